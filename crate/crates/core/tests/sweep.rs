use clkoop::harness::{run_sweep, AlphaGrid, Experiment, ExperimentConfig};
use clkoop::identify::{fit, training_grams, Method};
use clkoop::sim::EpisodeConfig;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.generate.n_train = 6;
    cfg.dataset.generate.n_test = 2;
    cfg.dataset.generate.episode = EpisodeConfig {
        duration: 6.0,
        ..EpisodeConfig::default()
    };
    cfg.alpha_grid = AlphaGrid {
        count: 7,
        log_min: -3.0,
        log_max: 3.0,
    };
    cfg
}

/// On clean data both methods identify the same plant at the smallest α.
#[test]
fn methods_agree_at_smallest_alpha() {
    let exp = Experiment::prepare(ExperimentConfig::default()).unwrap();
    let grams = training_grams(&exp.config.lifting, &exp.data.train).unwrap();
    let alpha = exp.config.alpha_grid.values()[0];
    let (_, edmd) = fit(Method::Edmd, &grams, &exp.controller, alpha, exp.config.options).unwrap();
    let (_, cl) = fit(Method::ClEdmd, &grams, &exp.controller, alpha, exp.config.options).unwrap();
    let diff = (&edmd.u_p - &cl.u_p).norm();
    assert!(diff <= 1e-8, "‖ΔUᵖ‖ = {diff:e}, ‖Uᵖ‖ = {:e}", edmd.u_p.norm());
}

/// The plant Gram matrix of delay-embedded clean data is numerically
/// singular, so the two fits can differ along directions the data does not
/// see. Measured through the data they agree, and more closely as α shrinks.
#[test]
fn methods_agree_on_the_data_at_small_alpha() {
    let exp = Experiment::prepare(ExperimentConfig::default()).unwrap();
    let grams = training_grams(&exp.config.lifting, &exp.data.train).unwrap();
    let h = &grams.plant.h;
    let gap = |alpha: f64| {
        let (_, edmd) = fit(Method::Edmd, &grams, &exp.controller, alpha, exp.config.options).unwrap();
        let (_, cl) = fit(Method::ClEdmd, &grams, &exp.controller, alpha, exp.config.options).unwrap();
        let d = &edmd.u_p - &cl.u_p;
        ((&d * h * d.transpose()).trace() / (&edmd.u_p * h * edmd.u_p.transpose()).trace()).sqrt()
    };
    let (g3, g5) = (gap(1e-3), gap(1e-5));
    assert!(g3 <= 1e-5, "{g3:e}");
    assert!(g5 < g3 / 10.0, "{g5:e} vs {g3:e}");
}

#[test]
fn rows_sorted_and_counted() {
    let exp = Experiment::prepare(small()).unwrap();
    let rows = run_sweep(&exp).unwrap();
    assert_eq!(rows.len(), 7 * 2);
    for w in rows.windows(2) {
        assert!((w[0].alpha, w[0].method.name()) < (w[1].alpha, w[1].method.name()));
    }
    let again = run_sweep(&exp).unwrap();
    assert_eq!(format!("{rows:?}"), format!("{again:?}"));
    for r in rows.iter().filter(|r| r.method == Method::ClEdmd) {
        assert!(r.error.is_none() && r.rho_cl.is_finite());
    }
}
