use ate_match_core::estimators::estimate_tau_bc;
use ate_match_core::inference::{
    bootstrap_ci, bootstrap_from_report, density_ratio, kolmogorov_distance, multiplier_bootstrap,
    variance_components, FixedMultipliers, GaussianMultipliers,
};
use ate_match_core::matching::match_mnn;
use ate_match_core::regress::{fit, RegressorPair, RegressorSpec};
use ate_match_core::simlab::{generate, Dgp};
use ate_match_core::{Dataset, Error};

fn sample(seed: u64, n: usize) -> Dataset {
    generate(&Dgp::linear_1d(), n, seed).unwrap()
}

#[test]
fn unit_multipliers_reproduce_the_estimate() {
    let ds = sample(1, 200);
    let mr = match_mnn(&ds, 3).unwrap();
    let rp = fit(&ds, &RegressorSpec::knn()).unwrap();
    let rep = estimate_tau_bc(&ds, &mr, &rp).unwrap();
    let bd = bootstrap_from_report(&rep, 5, 0, &FixedMultipliers { v: 0.0, w: 1.0 }).unwrap();
    for r in &bd.replicates {
        assert!((r - rep.tau_hat_bc).abs() < 1e-12);
    }
    // centred contrasts sum to zero, so unit V weights add nothing
    let bd = bootstrap_from_report(&rep, 1, 0, &FixedMultipliers { v: 1.0, w: 0.0 }).unwrap();
    assert!((bd.replicates[0] - rep.tau_reg).abs() < 1e-12);
}

#[test]
fn conditional_sd_matches_direct_formula() {
    let ds = sample(2, 150);
    let mm = 2;
    let mr = match_mnn(&ds, mm).unwrap();
    let rp = fit(&ds, &RegressorSpec::polynomial(1)).unwrap();
    let rep = estimate_tau_bc(&ds, &mr, &rp).unwrap();
    let n = ds.n() as f64;

    let contrast: Vec<f64> = (0..ds.n()).map(|i| rp.predict(1, ds.x(i)) - rp.predict(0, ds.x(i))).collect();
    let cbar = contrast.iter().sum::<f64>() / n;
    let k1 = contrast.iter().map(|c| (c - cbar).powi(2)).sum::<f64>() / n;
    let mut k2 = 0.0;
    let mut k3 = 0.0;
    for i in 0..ds.n() {
        let di = ds.d()[i];
        let resid = ds.y()[i] - rp.predict(di, ds.x(i));
        let term = ((1.0 + mr.k_count[i] as f64 / mm as f64) * resid).powi(2) / n;
        if di == 1 {
            k2 += term;
        } else {
            k3 += term;
        }
    }
    let vr = variance_components(&rep);
    assert!((vr.k1 - k1).abs() < 1e-10);
    assert!((vr.k2 - k2).abs() < 1e-10);
    assert!((vr.k3 - k3).abs() < 1e-10);
    let bd = bootstrap_from_report(&rep, 10, 0, &GaussianMultipliers { seed: 0 }).unwrap();
    assert!((bd.conditional_sd - ((k1 + k2 + k3) / n).sqrt()).abs() < 1e-12);
}

#[test]
fn same_seed_same_replicates() {
    let ds = sample(3, 120);
    let mr = match_mnn(&ds, 2).unwrap();
    let rp = fit(&ds, &RegressorSpec::knn()).unwrap();
    let a = multiplier_bootstrap(&ds, &mr, &rp, 400, 17).unwrap();
    let b = multiplier_bootstrap(&ds, &mr, &rp, 400, 17).unwrap();
    let c = multiplier_bootstrap(&ds, &mr, &rp, 400, 18).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.replicates, c.replicates);
}

#[test]
fn replicates_do_not_depend_on_thread_count() {
    let ds = sample(4, 100);
    let mr = match_mnn(&ds, 2).unwrap();
    let rp = fit(&ds, &RegressorSpec::knn()).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| multiplier_bootstrap(&ds, &mr, &rp, 300, 5).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn intervals_are_centred_and_need_enough_replicates() {
    let ds = sample(5, 200);
    let mr = match_mnn(&ds, 3).unwrap();
    let rp = fit(&ds, &RegressorSpec::knn()).unwrap();
    let bd = multiplier_bootstrap(&ds, &mr, &rp, 400, 1).unwrap();
    let ci = bootstrap_ci(&bd, bd.tau_hat_bc, 0.05).unwrap();
    let [lo, hi] = ci.analytic;
    assert!(((lo + hi) / 2.0 - bd.tau_hat_bc).abs() < 1e-12);
    assert!((hi - lo - 2.0 * 1.959963984540054 * bd.conditional_sd).abs() < 1e-9);
    assert!(ci.percentile[0] < bd.tau_hat_bc && bd.tau_hat_bc < ci.percentile[1]);
    assert!(matches!(bootstrap_ci(&bd, bd.tau_hat_bc, 0.01), Err(Error::TooFewReplicates { .. })));
}

#[test]
fn noiseless_constant_effect_has_zero_spread() {
    let dgp = Dgp::homogeneous().with_noise_sd(0.0);
    let ds = generate(&dgp, 80, 2).unwrap();
    let mr = match_mnn(&ds, 2).unwrap();
    let rp = fit(&ds, &RegressorSpec::polynomial(1)).unwrap();
    let rep = estimate_tau_bc(&ds, &mr, &rp).unwrap();
    let vr = variance_components(&rep);
    assert!(vr.k1 < 1e-20);
    assert!(vr.sigma2_hat < 1e-20);
    assert!((rep.tau_hat_bc - 1.0).abs() < 1e-9);
}

#[test]
fn density_ratios_average_to_one_per_arm() {
    let ds = sample(6, 300);
    let mr = match_mnn(&ds, 4).unwrap();
    for arm in [0u8, 1] {
        let rs: Vec<f64> = (0..ds.n())
            .filter(|&i| ds.d()[i] == arm)
            .map(|i| density_ratio(&ds, &mr, i).unwrap())
            .collect();
        let avg = rs.iter().sum::<f64>() / rs.len() as f64;
        assert!((avg - 1.0).abs() < 1e-12);
    }
    assert!(density_ratio(&ds, &mr, ds.n()).is_err());
}

#[test]
fn oracle_surfaces_give_finite_replicates() {
    let dgp = Dgp::linear_1d();
    let ds = sample(7, 200);
    let mr = match_mnn(&ds, 3).unwrap();
    let oracle: RegressorPair = dgp.oracle();
    let rep = estimate_tau_bc(&ds, &mr, &oracle).unwrap();
    let bd = bootstrap_from_report(&rep, 50, 3, &GaussianMultipliers { seed: 3 }).unwrap();
    assert!(bd.replicates.iter().all(|r| r.is_finite()));
}

#[test]
fn kolmogorov_against_own_quantiles_is_small() {
    let n = 1000;
    let sd = 2.5;
    let xs: Vec<f64> = (1..=n)
        .map(|i| {
            let p = (i as f64 - 0.5) / n as f64;
            3.0 + sd * ate_match_core::numeric::std_normal_quantile(p)
        })
        .collect();
    let d = kolmogorov_distance(&xs, 3.0, sd).unwrap();
    assert!((d - 0.5 / n as f64).abs() < 1e-12);
}
