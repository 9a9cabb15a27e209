//! Opposite-arm M-nearest-neighbor matching, matched counts, and
//! stabilization radii.

mod index;

pub use index::{sq_dist, Neighbor, NeighborIndex, SearchStrategy, KD_MAX_DIM};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{split, Dataset};
use crate::error::{Error, Result};

/// Outcome of matching every unit to its `M` nearest opposite-arm units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// Number of matches `M`.
    pub num_matches: usize,
    pub n0: usize,
    pub n1: usize,
    d: Vec<u8>,
    /// `n x M` neighbor indices, each row ordered by `(distance, index)`.
    nn_idx: Vec<usize>,
    /// `n x M` Euclidean distances matching `nn_idx`.
    nn_dist: Vec<f64>,
    /// How many opposite-arm units list unit `i` among their `M` neighbors.
    pub k_count: Vec<usize>,
    /// Distance to the `M`-th neighbor.
    pub radius: Vec<f64>,
}

impl MatchResult {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn treatment(&self) -> &[u8] {
        &self.d
    }

    /// Ordered neighbor set of unit `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.nn_idx[i * self.num_matches..(i + 1) * self.num_matches]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.nn_dist[i * self.num_matches..(i + 1) * self.num_matches]
    }

    /// `1 + K(i)/M`, the weight unit `i` carries in the matching estimators.
    pub fn weight(&self, i: usize) -> f64 {
        1.0 + self.k_count[i] as f64 / self.num_matches as f64
    }
}

/// Match every unit of `ds` to its `num_matches` nearest opposite-arm units.
pub fn match_mnn(ds: &Dataset, num_matches: usize) -> Result<MatchResult> {
    match_mnn_with(ds, num_matches, SearchStrategy::Auto)
}

pub fn match_mnn_with(
    ds: &Dataset,
    num_matches: usize,
    strategy: SearchStrategy,
) -> Result<MatchResult> {
    match_in_coords(
        ds.d(),
        [ds.x_flat(), ds.x_flat()],
        ds.m(),
        num_matches,
        strategy,
    )
}

/// Matching where the search inside arm `w` happens in coordinates `coords[w]`.
///
/// A unit with label `d` is located by its own row of `coords[1 - d]` and
/// compared against the arm-`(1 - d)` rows of the same buffer. With both
/// buffers equal this is plain covariate matching; with per-arm transforms it
/// is transformed-coordinate matching.
pub fn match_in_coords(
    d: &[u8],
    coords: [&[f64]; 2],
    m: usize,
    num_matches: usize,
    strategy: SearchStrategy,
) -> Result<MatchResult> {
    let n = d.len();
    if num_matches == 0 {
        return Err(Error::invalid("matches", "M must be a positive integer"));
    }
    let (treated, control): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| d[i] == 1);
    let (n0, n1) = (control.len(), treated.len());
    if num_matches > n0.min(n1) {
        return Err(Error::InsufficientUnits {
            needed: num_matches,
            available: n0.min(n1),
        });
    }
    let arms = [
        NeighborIndex::build(coords[0], m, &control, strategy),
        NeighborIndex::build(coords[1], m, &treated, strategy),
    ];

    let per_unit: Vec<Vec<Neighbor>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let target = 1 - d[i] as usize;
            let q = &coords[target][i * m..(i + 1) * m];
            arms[target].knn(q, num_matches)
        })
        .collect();

    let mut nn_idx = Vec::with_capacity(n * num_matches);
    let mut nn_dist = Vec::with_capacity(n * num_matches);
    let mut k_count = vec![0usize; n];
    let mut radius = Vec::with_capacity(n);
    for (i, nbrs) in per_unit.into_iter().enumerate() {
        for nb in &nbrs {
            assert!(nb.idx != i && d[nb.idx] != d[i], "matched within own arm");
            nn_idx.push(nb.idx);
            nn_dist.push(nb.sq_dist.sqrt());
            k_count[nb.idx] += 1;
        }
        radius.push(nbrs.last().map_or(0.0, |nb| nb.sq_dist.sqrt()));
    }
    Ok(MatchResult {
        num_matches,
        n0,
        n1,
        d: d.to_vec(),
        nn_idx,
        nn_dist,
        k_count,
        radius,
    })
}

/// Radius of stabilization of each unit's score: the largest distance in its
/// matched set.
pub fn stabilization_radius(mr: &MatchResult) -> Vec<f64> {
    (0..mr.n())
        .map(|i| mr.distances(i).iter().copied().fold(0.0, f64::max))
        .collect()
}

/// Fraction of units whose radius of stabilization is at least `r`, per grid point.
pub fn empirical_radius_tail(ds: &Dataset, num_matches: usize, r_grid: &[f64]) -> Result<Vec<f64>> {
    let tr = split(ds);
    if tr.treated_idx.is_empty() {
        return Err(Error::EmptyArm { arm: 1 });
    }
    if tr.control_idx.is_empty() {
        return Err(Error::EmptyArm { arm: 0 });
    }
    let mr = match_mnn(ds, num_matches)?;
    Ok(radius_survival(&stabilization_radius(&mr), r_grid))
}

/// Survival curve `#{radius >= r} / len` of a radius sample.
pub fn radius_survival(radii: &[f64], r_grid: &[f64]) -> Vec<f64> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    r_grid
        .iter()
        .map(|&r| {
            let below = sorted.partition_point(|&v| v < r);
            (sorted.len() - below) as f64 / sorted.len() as f64
        })
        .collect()
}
