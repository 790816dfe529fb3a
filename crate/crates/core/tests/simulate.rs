use tailcomb::normal;
use tailcomb::simulate::{
    estimate_rejection, gen_pvalues, gen_statistics, ks_distance, size_table, tail_equivalence_check, Dependence,
    Method, SimulationScenario, TableColumn, TableGrid,
};
use tailcomb::{Calibrator, Statistic};

#[test]
fn null_pvalues_are_uniform() {
    let s = SimulationScenario::new(3, 0.0, 0.05, 1, 8);
    let p1: Vec<f64> = (0..100_000).map(|i| gen_pvalues(&s, i).unwrap()[0]).collect();
    let d = ks_distance(&p1, |x| Ok(x.clamp(0.0, 1.0))).unwrap();
    assert!(d < 0.01, "KS {d}");
    // Marginal uniformity holds under dependence too.
    for rho in [0.2, 0.9] {
        let s = SimulationScenario::new(3, rho, 0.05, 1, 8);
        let p2: Vec<f64> = (0..100_000).map(|i| gen_pvalues(&s, i).unwrap()[1]).collect();
        let d = ks_distance(&p2, |x| Ok(x.clamp(0.0, 1.0))).unwrap();
        assert!(d < 1.63 / 100_000f64.sqrt(), "ρ={rho}: KS {d}");
    }
}

#[test]
fn equicorrelated_covariance() {
    let reps = 1_000_000u64;
    for rho in [0.0, 0.2, 0.9] {
        let s = SimulationScenario::new(4, rho, 0.05, 1, 21);
        let mut sum = [0.0; 4];
        let mut cross = [[0.0; 4]; 4];
        for i in 0..reps {
            let y = gen_statistics(&s, i).unwrap();
            for a in 0..4 {
                sum[a] += y[a];
                for b in 0..4 {
                    cross[a][b] += y[a] * y[b];
                }
            }
        }
        let r = reps as f64;
        for a in 0..4 {
            for b in 0..4 {
                let cov = cross[a][b] / r - sum[a] / r * sum[b] / r;
                let target = if a == b { 1.0 } else { rho };
                assert!((cov - target).abs() < 0.005, "ρ={rho} ({a},{b}): {cov}");
            }
        }
    }
}

#[test]
fn pearson_correlation_at_point_nine() {
    let s = SimulationScenario::new(2, 0.9, 0.05, 1, 5);
    let ys: Vec<(f64, f64)> = (0..100_000)
        .map(|i| {
            let y = gen_statistics(&s, i).unwrap();
            (y[0], y[1])
        })
        .collect();
    let m = ys.len() as f64;
    let (mx, my) = ys.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &ys {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let r = sxy / (sxx * syy).sqrt();
    assert!((r - 0.9).abs() < 0.01, "{r}");
}

#[test]
fn pvalues_follow_statistics() {
    let s = SimulationScenario::new(10, 0.4, 0.05, 1, 2);
    let y = gen_statistics(&s, 3).unwrap();
    let p = gen_pvalues(&s, 3).unwrap();
    for (y, p) in y.iter().zip(p) {
        assert_eq!(
            normal::two_sided_p(*y).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
            p
        );
    }
}

#[test]
fn iid_sum_tail_matches_marginal_sum() {
    // The relative standard error of the ratio at 1e7 replications is about
    // 3%, so the check uses 4 standard errors.
    let cal = Calibrator::pareto(1.0).unwrap();
    let rows = tail_equivalence_check(&cal, Statistic::Sum, 5, Dependence::Iid, &[1e-4], 10_000_000, 77, 0).unwrap();
    let r = rows[0];
    assert_eq!(r.theoretical, 1e-4);
    assert!((r.mc_tail - 1e-4).abs() <= 4.0 * r.mc_standard_error, "{r:?}");
}

#[test]
fn perfect_block_sizes() {
    let alphas = [0.05, 0.01];
    let reps = 400_000;
    // All p-values identical: the Pareto(1) sum has size α and the max α/n.
    let cal = Calibrator::pareto(1.0).unwrap();
    for (stat, scale) in [(Statistic::Sum, 1.0), (Statistic::Max, 1.0 / 8.0)] {
        let rows =
            tail_equivalence_check(&cal, stat, 8, Dependence::PerfectBlock { m: 0 }, &alphas, reps, 3, 0).unwrap();
        for r in rows {
            assert!((r.theoretical - r.alpha * scale).abs() < 1e-15);
            assert!(
                (r.mc_tail - r.theoretical).abs() <= 4.0 * r.mc_standard_error,
                "{stat}: {r:?}"
            );
        }
    }
    // Max with any calibrator, and a partial block.
    let wei = Calibrator::weibull(0.4).unwrap();
    let rows = tail_equivalence_check(
        &wei,
        Statistic::Max,
        10,
        Dependence::PerfectBlock { m: 3 },
        &alphas,
        reps,
        4,
        0,
    )
    .unwrap();
    for r in rows {
        assert!((r.theoretical - 4.0 * r.alpha / 10.0).abs() < 1e-15);
        let se = (r.theoretical * (1.0 - r.theoretical) / reps as f64).sqrt();
        assert!((r.mc_tail - r.theoretical).abs() <= 4.0 * se, "{r:?}");
    }
}

#[test]
fn wilson_cell() {
    let s = SimulationScenario::new(25, 0.2, 0.001, 100_000, 12).with_methods(vec![Method::Column {
        column: TableColumn::Wilson,
    }]);
    let r = &estimate_rejection(&s, 0).unwrap().results[0];
    let tol = 4.0 * r.mc_standard_error.unwrap() / 0.001;
    assert!((r.ratio_to_alpha.unwrap() - 0.956).abs() <= tol, "{r:?}");
}

#[test]
fn full_size_grid() {
    let rows = size_table(&TableGrid::default(), 100_000, 31, 0).unwrap();
    assert_eq!(rows.len(), 45);
    assert!(rows
        .iter()
        .all(|r| r.cells.len() == 11 && r.cells.iter().all(Option::is_some)));
    // Heavy over-rejection of T1_F1.5 at ρ = 0.9, n = 1000, α = 1e-4.
    let r = rows
        .iter()
        .find(|r| r.rho == 0.9 && r.n == 1000 && r.alpha == 1e-4)
        .unwrap();
    let ratio = r.cell(TableColumn::Pareto15).unwrap();
    let rate = ratio * 1e-4;
    let tol = 4.0 * (rate * (1.0 - rate) / 100_000.0).sqrt() / 1e-4;
    assert!((ratio - 29.030).abs() <= tol, "{ratio} ± {tol}");
}
