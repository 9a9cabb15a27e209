use ate_match_core::estimators::{
    decompose_en, estimate_tau_bc, estimate_tau_phi, estimate_tau_rank, estimate_tau_raw, fit_phi,
    fit_rank, rank_match, EmpiricalCdf, FnTransform, Identity, Scale,
};
use ate_match_core::matching::match_mnn;
use ate_match_core::regress::{fit, RegressorPair, RegressorSpec};
use ate_match_core::simlab::{generate, Dgp};
use ate_match_core::Dataset;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn random_dataset(seed: u64, n: usize, m: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let x: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>()).collect();
        let d: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let n1 = d.iter().filter(|&&v| v == 1).count();
        if n1 >= 4 && n - n1 >= 4 {
            return Dataset::new(m, x, d, y).unwrap();
        }
    }
}

/// Opposite-arm neighbours by full sort, ties broken by index.
fn brute_neighbors(ds: &Dataset, i: usize, mm: usize) -> Vec<usize> {
    let mut cands: Vec<(f64, usize)> = (0..ds.n())
        .filter(|&j| ds.d()[j] != ds.d()[i])
        .map(|j| {
            let dist: f64 = ds.x(i).iter().zip(ds.x(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            (dist, j)
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cands.into_iter().take(mm).map(|c| c.1).collect()
}

/// Impute each missing potential outcome and average the differences.
fn imputation_estimate(ds: &Dataset, mm: usize, rp: Option<&RegressorPair>) -> f64 {
    let n = ds.n();
    let mut total = 0.0;
    for i in 0..n {
        let di = ds.d()[i];
        let other = 1 - di;
        let nn = brute_neighbors(ds, i, mm);
        let imputed: f64 = nn
            .iter()
            .map(|&j| {
                let adj = rp.map_or(0.0, |r| r.predict(other, ds.x(i)) - r.predict(other, ds.x(j)));
                ds.y()[j] + adj
            })
            .sum::<f64>()
            / mm as f64;
        let (y1, y0) = if di == 1 { (ds.y()[i], imputed) } else { (imputed, ds.y()[i]) };
        total += y1 - y0;
    }
    total / n as f64
}

#[test]
fn raw_estimate_matches_imputation() {
    for seed in 0..60 {
        let m = 1 + (seed as usize % 3);
        let ds = random_dataset(seed, 12 + seed as usize % 30, m);
        for mm in [1, 2, 4] {
            let mr = match_mnn(&ds, mm).unwrap();
            let got = estimate_tau_raw(&ds, &mr).unwrap();
            let want = imputation_estimate(&ds, mm, None);
            assert!((got - want).abs() < 1e-12, "seed {seed} M {mm}: {got} vs {want}");
        }
    }
}

#[test]
fn corrected_estimate_matches_adjusted_imputation() {
    for seed in 100..140 {
        let m = 1 + (seed as usize % 2);
        let ds = random_dataset(seed, 40, m);
        let mr = match_mnn(&ds, 3).unwrap();
        for spec in [RegressorSpec::knn(), RegressorSpec::polynomial(1), RegressorSpec::polynomial(2)] {
            let rp = fit(&ds, &spec).unwrap();
            let got = estimate_tau_bc(&ds, &mr, &rp).unwrap().tau_hat_bc;
            let want = imputation_estimate(&ds, 3, Some(&rp));
            assert!((got - want).abs() < 1e-10, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn zero_regression_gives_raw_estimate() {
    let ds = random_dataset(7, 60, 2);
    let mr = match_mnn(&ds, 2).unwrap();
    let rep = estimate_tau_bc(&ds, &mr, &RegressorPair::zero(2)).unwrap();
    assert!((rep.tau_hat_bc - rep.tau_hat).abs() < 1e-12);
    assert_eq!(rep.b_hat_m, 0.0);
}

#[test]
fn flipping_treatment_negates_raw_estimate() {
    for seed in 0..20 {
        let ds = random_dataset(seed, 50, 2);
        let flipped = ds.with_flipped_treatment();
        let a = estimate_tau_raw(&ds, &match_mnn(&ds, 3).unwrap()).unwrap();
        let b = estimate_tau_raw(&flipped, &match_mnn(&flipped, 3).unwrap()).unwrap();
        assert!((a + b).abs() < 1e-12);
    }
}

#[test]
fn decomposition_requires_truth() {
    let ds = random_dataset(3, 30, 1);
    let mr = match_mnn(&ds, 1).unwrap();
    let fitted = fit(&ds, &RegressorSpec::knn()).unwrap();
    assert!(decompose_en(&ds, &mr, &fitted).is_err());
}

#[test]
fn decomposition_identity_on_generated_data() {
    let dgp = Dgp::quadratic_2d();
    for seed in 0..5 {
        let ds = generate(&dgp, 300, seed).unwrap();
        let mr = match_mnn(&ds, 4).unwrap();
        let truth = dgp.oracle();
        let rp = fit(&ds, &RegressorSpec::polynomial(2)).unwrap();
        let dec = decompose_en(&ds, &mr, &truth).unwrap();
        let rep = estimate_tau_bc(&ds, &mr, &rp).unwrap().with_decomposition(dec);
        let rhs = dec.e_n + dec.b_m - rep.b_hat_m;
        assert!((rep.tau_hat_bc - rhs).abs() < 1e-9);
    }
}

#[test]
fn rank_estimate_ignores_monotone_recoding() {
    for seed in 0..10 {
        let ds = random_dataset(seed + 500, 80, 2);
        let warped: Vec<f64> = ds.x_flat().iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let ds2 = ds.with_covariates(2, warped).unwrap();
        let spec = RegressorSpec::knn();
        let a = estimate_tau_rank(&ds, 3, &fit_rank(&ds, &spec).unwrap()).unwrap();
        let b = estimate_tau_rank(&ds2, 3, &fit_rank(&ds2, &spec).unwrap()).unwrap();
        assert_eq!(a.tau_hat_bc.to_bits(), b.tau_hat_bc.to_bits());
        assert_eq!(a.k_count, b.k_count);
    }
}

#[test]
fn rank_coordinates_lie_on_the_grid() {
    let ds = random_dataset(11, 45, 3);
    let (rt, _) = rank_match(&ds, 2).unwrap();
    let n = ds.n() as f64;
    for i in 0..ds.n() {
        for &u in rt.row(i) {
            let scaled = u * n;
            assert!((scaled - scaled.round()).abs() < 1e-9 && u > 0.0 && u <= 1.0);
        }
    }
}

#[test]
fn transform_paths_agree() {
    let spec = RegressorSpec::knn();
    for seed in 0..10 {
        let ds = random_dataset(seed + 900, 70, 2);
        let mr = match_mnn(&ds, 2).unwrap();
        let cov = estimate_tau_bc(&ds, &mr, &fit(&ds, &spec).unwrap()).unwrap();
        let id = estimate_tau_phi(&ds, 2, &Identity, &Identity, &fit_phi(&ds, &Identity, &Identity, &spec).unwrap()).unwrap();
        assert_eq!(cov.tau_hat_bc.to_bits(), id.tau_hat_bc.to_bits());

        let ecdf = EmpiricalCdf::of(&ds);
        let rank = estimate_tau_rank(&ds, 2, &fit_rank(&ds, &spec).unwrap()).unwrap();
        let phi = estimate_tau_phi(&ds, 2, &ecdf, &ecdf, &fit_phi(&ds, &ecdf, &ecdf, &spec).unwrap()).unwrap();
        assert_eq!(rank.tau_hat_bc.to_bits(), phi.tau_hat_bc.to_bits());

        // a common positive scale leaves neighbour sets unchanged
        let s = Scale(3.0);
        let scaled = estimate_tau_phi(&ds, 2, &s, &s, &fit_phi(&ds, &s, &s, &spec).unwrap()).unwrap();
        assert!((scaled.tau_hat_bc - cov.tau_hat_bc).abs() < 1e-12);
        assert_eq!(scaled.k_count, cov.k_count);
    }
}

#[test]
fn non_finite_transform_is_reported() {
    let ds = random_dataset(1, 20, 1);
    let bad = FnTransform {
        dim: 1,
        f: Arc::new(|x: &[f64], out: &mut [f64]| out[0] = if x[0] > 0.5 { f64::NAN } else { x[0] }),
    };
    let spec = RegressorSpec::knn();
    assert!(fit_phi(&ds, &bad, &bad, &spec).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corrected_estimate_shifts_with_constant_effect(seed in 0u64..10_000, shift in -5.0f64..5.0) {
        // adding a constant to treated outcomes moves every estimate by that constant
        let ds = random_dataset(seed, 30, 1);
        let y2: Vec<f64> = ds.y().iter().zip(ds.d()).map(|(y, &d)| y + shift * d as f64).collect();
        let ds2 = ds.with_outcomes(y2).unwrap();
        let mr = match_mnn(&ds, 2).unwrap();
        let spec = RegressorSpec::polynomial(1);
        let a = estimate_tau_bc(&ds, &mr, &fit(&ds, &spec).unwrap()).unwrap();
        let b = estimate_tau_bc(&ds2, &mr, &fit(&ds2, &spec).unwrap()).unwrap();
        prop_assert!((b.tau_hat - a.tau_hat - shift).abs() < 1e-9);
        prop_assert!((b.tau_hat_bc - a.tau_hat_bc - shift).abs() < 1e-9);
    }
}
