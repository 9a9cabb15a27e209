//! Observed sample `(X_i, D_i, Y_i)`, its validation, and CSV ingestion.
//!
//! Row order in the input defines the unit index `i`; nothing is re-sorted.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An immutable, validated sample of `n` units with `m` real covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    m: usize,
    /// Row-major `n x m` covariates.
    x: Vec<f64>,
    d: Vec<u8>,
    y: Vec<f64>,
}

/// Index partition of the units by treatment label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreatmentSplit {
    pub treated_idx: Vec<usize>,
    pub control_idx: Vec<usize>,
}

impl Dataset {
    /// Build from a row-major covariate buffer.
    pub fn new(m: usize, x: Vec<f64>, d: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::InvalidDataset("n must be at least 1".into()));
        }
        if m == 0 {
            return Err(Error::InvalidDataset("m must be at least 1".into()));
        }
        if x.len() != n * m || y.len() != n {
            return Err(Error::InvalidDataset(format!(
                "shape mismatch: x has {} values, y has {}, expected {} and {}",
                x.len(),
                y.len(),
                n * m,
                n
            )));
        }
        for (i, &di) in d.iter().enumerate() {
            if di > 1 {
                return Err(Error::NonBinaryTreatment {
                    row: i + 1,
                    value: di.to_string(),
                });
            }
        }
        for i in 0..n {
            for k in 0..m {
                let v = x[i * m + k];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i + 1,
                        column: format!("x{}", k + 1),
                        value: v.to_string(),
                    });
                }
            }
            if !y[i].is_finite() {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: "y".into(),
                    value: y[i].to_string(),
                });
            }
        }
        Ok(Dataset { n, m, x, d, y })
    }

    /// Build from one covariate vector per unit.
    pub fn from_rows(rows: &[Vec<f64>], d: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidDataset("ragged covariate rows".into()));
        }
        Self::new(m, rows.concat(), d, y)
    }

    /// Convenience constructor for one covariate.
    pub fn univariate(x: Vec<f64>, d: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        Self::new(1, x, d, y)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n_treated(&self) -> usize {
        self.d.iter().filter(|&&d| d == 1).count()
    }

    pub fn n_control(&self) -> usize {
        self.n - self.n_treated()
    }

    /// Same units and labels with replaced outcomes.
    pub fn with_outcomes(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.m, self.x.clone(), self.d.clone(), y)
    }

    /// Same outcomes and labels with replaced covariates of dimension `m`.
    pub fn with_covariates(&self, m: usize, x: Vec<f64>) -> Result<Self> {
        Self::new(m, x, self.d.clone(), self.y.clone())
    }

    /// Same covariates and outcomes with every label flipped.
    pub fn with_flipped_treatment(&self) -> Self {
        Dataset {
            d: self.d.iter().map(|&d| 1 - d).collect(),
            ..self.clone()
        }
    }

    /// Write the dataset as `x1,...,xm,d,y` with round-trip exact floats.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let header: Vec<String> = (1..=self.m)
            .map(|k| format!("x{k}"))
            .chain(["d".to_string(), "y".to_string()])
            .collect();
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        for i in 0..self.n {
            let mut fields: Vec<String> = self.x(i).iter().map(|v| format!("{v:?}")).collect();
            fields.push(self.d[i].to_string());
            fields.push(format!("{:?}", self.y[i]));
            writeln!(w, "{}", fields.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Read a dataset from a CSV file with header `x1..xm, d, y` in any column order.
///
/// Diagnostics use 1-based data-row numbers (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

/// Parse CSV text from any reader; see [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyFile);
    }

    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut m = 0;
    while find(&format!("x{}", m + 1)).is_some() {
        m += 1;
    }
    // any x<k> beyond a gap means x1..x(m+1) is incomplete
    let max_declared = headers
        .iter()
        .filter_map(|h| h.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()))
        .max()
        .unwrap_or(0);
    if m == 0 || max_declared > m {
        return Err(Error::MissingColumn {
            column: format!("x{}", m + 1),
        });
    }
    let x_cols: Vec<usize> = (1..=m).map(|k| find(&format!("x{k}")).unwrap()).collect();
    let d_col = find("d").ok_or_else(|| Error::MissingColumn { column: "d".into() })?;
    let y_col = find("y").ok_or_else(|| Error::MissingColumn { column: "y".into() })?;

    let mut x = Vec::new();
    let mut d = Vec::new();
    let mut y = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        let field = |col: usize| record.get(col).unwrap_or("");
        for (k, &col) in x_cols.iter().enumerate() {
            x.push(parse_finite(field(col), row, &format!("x{}", k + 1))?);
        }
        let draw = field(d_col);
        let dv = match draw.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(Error::NonBinaryTreatment {
                    row,
                    value: draw.to_string(),
                })
            }
        };
        d.push(dv);
        y.push(parse_finite(field(y_col), row, "y")?);
    }
    if d.is_empty() {
        return Err(Error::EmptyFile);
    }
    Dataset::new(m, x, d, y)
}

fn parse_finite(raw: &str, row: usize, column: &str) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonFinite {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

pub fn split(ds: &Dataset) -> TreatmentSplit {
    let (treated_idx, control_idx) = (0..ds.n()).partition(|&i| ds.d()[i] == 1);
    TreatmentSplit {
        treated_idx,
        control_idx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes())
    }

    #[test]
    fn four_row_univariate_file() {
        let ds = parse("x1,d,y\n0.1,1,1\n0.2,0,0\n0.4,1,2\n0.9,0,1\n").unwrap();
        assert_eq!((ds.n(), ds.m()), (4, 1));
        assert_eq!(ds.d(), &[1, 0, 1, 0]);
        assert_eq!(ds.y(), &[1.0, 0.0, 2.0, 1.0]);
    }

    #[test]
    fn column_order_is_immaterial() {
        let a = parse("x1,x2,d,y\n1,2,0,5\n3,4,1,6\n").unwrap();
        let b = parse("y,d,x2,x1\n5,0,2,1\n6,1,4,3\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hundred_rows_two_covariates() {
        let mut text = String::from("x1,x2,d,y\n");
        for i in 0..100 {
            text.push_str(&format!("{},{},{},{}\n", i, i * 2, i % 2, i as f64 * 0.5));
        }
        let ds = parse(&text).unwrap();
        assert_eq!((ds.n(), ds.m()), (100, 2));
    }

    #[test]
    fn non_binary_treatment_names_row() {
        let err = parse("x1,d,y\n0.1,1,1\n0.2,2,0\n").unwrap_err();
        assert!(matches!(err, Error::NonBinaryTreatment { row: 2, .. }));
        assert!(err.to_string().contains("non-binary treatment at row 2"));
    }

    #[test]
    fn distinct_diagnostics() {
        assert!(matches!(
            parse("x1,y\n1,2\n").unwrap_err(),
            Error::MissingColumn { ref column } if column == "d"
        ));
        assert!(matches!(
            parse("x1,d\n1,0\n").unwrap_err(),
            Error::MissingColumn { ref column } if column == "y"
        ));
        assert!(matches!(
            parse("x2,d,y\n1,0,1\n").unwrap_err(),
            Error::MissingColumn { ref column } if column == "x1"
        ));
        assert!(matches!(
            parse("x1,d,y\n1,0,nan\n").unwrap_err(),
            Error::NonFinite { row: 1, ref column, .. } if column == "y"
        ));
        assert!(matches!(
            parse("x1,d,y\n1,0,1\ninf,1,1\n").unwrap_err(),
            Error::NonFinite { row: 2, ref column, .. } if column == "x1"
        ));
        assert!(matches!(parse("x1,d,y\n").unwrap_err(), Error::EmptyFile));
        assert!(matches!(parse("").unwrap_err(), Error::EmptyFile));
    }

    #[test]
    fn split_partitions() {
        let ds = Dataset::univariate(vec![0.0; 4], vec![1, 0, 1, 0], vec![0.0; 4]).unwrap();
        let s = split(&ds);
        assert_eq!(s.treated_idx, vec![0, 2]);
        assert_eq!(s.control_idx, vec![1, 3]);

        let ds = Dataset::univariate(vec![0.0; 5], vec![0, 1, 1, 1, 0], vec![0.0; 5]).unwrap();
        let s = split(&ds);
        assert_eq!(s.treated_idx, vec![1, 2, 3]);
        assert_eq!(s.control_idx, vec![0, 4]);

        let ds = Dataset::univariate(vec![0.0; 3], vec![1, 1, 1], vec![0.0; 3]).unwrap();
        assert!(split(&ds).control_idx.is_empty());
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(Dataset::new(1, vec![], vec![], vec![]).is_err());
        assert!(Dataset::new(2, vec![1.0], vec![0], vec![1.0]).is_err());
        assert!(Dataset::new(1, vec![1.0], vec![3], vec![1.0]).is_err());
    }
}
