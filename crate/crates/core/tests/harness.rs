use singloc::estimators::EstimatorKind;
use singloc::exec::{with_execution, Execution};
use singloc::harness::{
    run_experiment, run_lemma1_check, run_lemma2_check, run_lemma3_check, run_rate_experiment, ExperimentConfig,
    ExperimentKind, HarnessError, Results,
};
use singloc::limit::LimitConfig;
use singloc::model::IntensityModel;

fn model(p: f64) -> IntensityModel {
    IntensityModel::pure_power(1.0, 1.0, p, 1.0, 2.0, 0.5, 1.5).unwrap()
}

const CONFIG: &str = "\
model.a = 1
model.b = 1
model.p = 0.5
model.theta = 1
model.T = 2
model.alpha = 0.5
model.beta = 1.5
experiment.kind = rate
experiment.n_ladder = 16, 32, 64, 128
experiment.replicates = 40
experiment.seed = 7
estimator.grid_size = 512
";

#[test]
fn config_text_round_trips() {
    let cfg = ExperimentConfig::from_text(CONFIG).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::Rate);
    assert_eq!(cfg.n_ladder, vec![16, 32, 64, 128]);
    assert_eq!(cfg.replicates, 40);
    assert_eq!(cfg.estimator.grid_size, 512);
    let back = ExperimentConfig::from_key_values(&cfg.to_key_values()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn bad_configs_are_validation_errors() {
    let cases = [
        CONFIG.replace("experiment.kind = rate", "experiment.kind = nonsense"),
        CONFIG.replace("experiment.n_ladder = 16, 32, 64, 128", "experiment.n_ladder = 16, 16, 64, 128"),
        CONFIG.replace("experiment.n_ladder = 16, 32, 64, 128", "experiment.n_ladder = 16, 32"),
        CONFIG.replace("model.p = 0.5", "model.p = -0.5") + "experiment.estimators = mle\n",
        CONFIG.to_string() + "experiment.colour = blue\n",
        CONFIG.replace("model.theta = 1", "model.theta = 1.7"),
        CONFIG.replace("experiment.kind = rate", ""),
    ];
    for text in cases {
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }
}

#[test]
fn rate_experiment_is_deterministic_and_falls() {
    let cfg = ExperimentConfig::from_text(CONFIG).unwrap();
    let seq = with_execution(Execution::Sequential, || run_experiment(&cfg).unwrap());
    let par = with_execution(Execution::Parallel, || run_experiment(&cfg).unwrap());
    assert_eq!(seq.to_json(), par.to_json());
    assert_eq!(seq.rows_csv(), par.rows_csv());
    assert_eq!(seq.rows.len(), 4 * 40);
    let Results::Rate(reports) = &seq.results else { panic!("rate results expected") };
    assert_eq!(reports.len(), 1);
    assert!(reports[0].slope < 0.0, "slope {}", reports[0].slope);
    assert!(seq.to_json().contains("\"slope\""));
    assert!(seq.rows_csv().starts_with("n,replicate,estimator,error,rescaled_error\n"));
}

#[test]
fn errors_are_rescaled_by_the_rate() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Rate, model(-0.5));
    cfg.n_ladder = vec![4, 8, 16, 32];
    cfg.replicates = 5;
    let (_, rows) = run_rate_experiment(&cfg).unwrap();
    for r in rows {
        assert_eq!(r.estimator, EstimatorKind::Bayes);
        assert!((r.rescaled_error - r.error * (r.n as f64).powi(2)).abs() < 1e-9 * r.rescaled_error.abs().max(1.0));
    }
}

#[test]
fn seeds_change_the_data() {
    let cfg = ExperimentConfig::from_text(CONFIG).unwrap();
    let mut other = cfg.clone();
    other.seed = 8;
    assert_ne!(run_experiment(&cfg).unwrap().rows, run_experiment(&other).unwrap().rows);
}

#[test]
fn lemma1_gaps_are_finite() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Lemma1, model(0.5));
    cfg.n_ladder = vec![16, 64];
    cfg.replicates = 300;
    let reports = run_lemma1_check(&cfg).unwrap();
    let gaps = &reports[0].max_gap_per_n;
    assert_eq!(gaps.len(), 2);
    assert!(gaps.iter().all(|&(_, g)| g.is_finite() && (0.0..=2.0).contains(&g)));
}

#[test]
fn lemma2_and_lemma3_constants() {
    for p in [0.5, -0.5] {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Lemma2, model(p));
        cfg.replicates = 100;
        let reports = run_lemma2_check(&cfg).unwrap();
        let r = &reports[0];
        assert!(r.deterministic.iter().all(|b| b.fitted_constant > 0.0 && b.worst_margin >= -1e-12));
        assert!(r.constant_spread.is_finite() && r.constant_spread >= 1.0);

        let mut cfg = ExperimentConfig::new(ExperimentKind::Lemma3, model(p));
        cfg.replicates = 200;
        let reports = run_lemma3_check(&cfg).unwrap();
        assert!(reports[0].deterministic.iter().all(|b| b.fitted_constant > 0.0));
    }
}

#[test]
fn limit_dist_runs_on_a_small_window() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::LimitDist, model(0.5));
    cfg.n_ladder = vec![64];
    cfg.replicates = 100;
    cfg.limit_replicates = 100;
    cfg.limit = LimitConfig::with_u_window(4.0);
    let report = run_experiment(&cfg).unwrap();
    let Results::Dist(d) = &report.results else { panic!("distribution results expected") };
    assert_eq!(d[0].comparisons.len(), 2);
    for c in &d[0].comparisons {
        assert!((0.0..=1.0).contains(&c.ks));
    }
    assert_eq!(d[0].split_half_sizes, (100, 100));
}

#[test]
fn validation_rejects_tiny_distribution_runs() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::LimitDist, model(0.5));
    cfg.replicates = 10;
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::Invalid(_))));
}
