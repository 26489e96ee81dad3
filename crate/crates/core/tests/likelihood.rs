mod common;

use common::tanh_sinh_pieces_nodes;
use proptest::prelude::*;
use singloc::model::{IntensityFamily, IntensityModel, PowerSingularity, SmoothPart, ThetaInterval};
use singloc::sampler::{sample_batch, EventPath, SampleBatch};
use singloc::likelihood::Likelihood;

fn family(a: f64, b: f64, p: f64, psi: [f64; 4]) -> IntensityFamily {
    IntensityFamily::new(
        PowerSingularity::new(a, b, p).unwrap(),
        SmoothPart::new(psi),
        2.0,
        ThetaInterval { alpha: 0.5, beta: 1.5 },
    )
    .unwrap()
}

fn batch_of(paths: Vec<Vec<f64>>, fam: &IntensityFamily) -> SampleBatch {
    let model = fam.at(1.0).unwrap();
    let paths = paths.into_iter().map(|t| EventPath::new(t, 2.0).unwrap()).collect();
    SampleBatch::from_paths(paths, &model, 0).unwrap()
}

/// `Λ_θ(T)` by quadrature, independent of the closed form.
fn mass_oracle(fam: &IntensityFamily, theta: f64) -> f64 {
    tanh_sinh_pieces_nodes(|n| fam.shape(n.minus(theta)), &[0.0, theta, fam.t_end])
}

/// Direct log-likelihood ratio from the intensity itself.
fn ratio_oracle(fam: &IntensityFamily, batch: &SampleBatch, theta: f64, theta1: f64) -> f64 {
    let sum: f64 = batch
        .pooled_times()
        .iter()
        .map(|&t| (fam.shape(t - theta) / fam.shape(t - theta1)).ln())
        .sum();
    sum - batch.n as f64 * (mass_oracle(fam, theta) - mass_oracle(fam, theta1))
}

#[test]
fn single_event_reference_value() {
    let fam = family(1.0, 1.0, 0.5, [0.0; 4]);
    let batch = batch_of(vec![vec![1.3]], &fam);
    let got = Likelihood::new(&batch, &fam).ratio(1.0, 1.1).unwrap();
    let expected = 0.5 * (0.3f64.ln() - 0.2f64.ln()) - (mass_oracle(&fam, 1.0) - mass_oracle(&fam, 1.1));
    assert!(!got.at_event_singularity);
    assert!((got.value - expected).abs() < 1e-9, "{} vs {expected}", got.value);
}

#[test]
fn general_intensity_matches_direct_evaluation() {
    for (p, psi) in [(0.5, [0.0, 0.1, 0.3, -0.05]), (-0.5, [0.2, 0.0, 1.0, 0.0]), (0.3, [0.0; 4])] {
        let fam = family(0.8, 1.7, p, psi);
        let batch = sample_batch(&fam.at(1.0).unwrap(), 40, 17).unwrap();
        let lik = Likelihood::new(&batch, &fam);
        for (theta, theta1) in [(0.9, 1.0), (1.23, 0.61), (1.0, 1.0 + 1e-7)] {
            let got = lik.ratio(theta, theta1).unwrap().value;
            let oracle = ratio_oracle(&fam, &batch, theta, theta1);
            assert!((got - oracle).abs() < 1e-8 * (1.0 + oracle.abs()), "p = {p}: {got} vs {oracle}");
        }
    }
}

#[test]
fn ratio_diverges_near_an_event() {
    for p in [0.5, -0.5] {
        let fam = family(1.0, 1.0, p, [0.0; 4]);
        let batch = batch_of(vec![vec![0.3, 1.2], vec![1.6]], &fam);
        let lik = Likelihood::new(&batch, &fam);
        let values: Vec<f64> = [1e-3, 1e-6, 1e-9]
            .iter()
            .map(|d| lik.ratio(1.2 - d, 1.0).unwrap().value)
            .collect();
        for w in values.windows(2) {
            let step = w[1] - w[0];
            // each factor of 1000 moves the value by about p·ln(1000)
            assert!((step - p * 1e-3f64.ln()).abs() < 0.01, "p = {p}: {values:?}");
        }
        let at = lik.ratio(1.2, 1.0).unwrap();
        assert!(at.at_event_singularity);
        assert_eq!(at.value, if p > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
        let back = lik.ratio(1.0, 1.2).unwrap();
        assert_eq!(back.value, -at.value);
    }
}

#[test]
fn local_process_uses_the_rate() {
    let fam = family(1.0, 1.0, 0.5, [0.0; 4]);
    let batch = sample_batch(&fam.at(1.0).unwrap(), 4, 1).unwrap();
    let lik = Likelihood::new(&batch, &fam);
    let local = lik.local(1.0);
    assert!((local.scale() - 4f64.powf(-2.0 / 3.0)).abs() < 1e-15);
    let u = 0.37;
    let direct = lik.ratio(1.0 + u * local.scale(), 1.0).unwrap().value;
    assert!((local.log_z(u).unwrap().value - direct).abs() < 1e-12);
    assert_eq!(local.log_z(0.0).unwrap().value, 0.0);
    let (lo, hi) = local.range();
    assert!((lo + 0.5 / local.scale()).abs() < 1e-12 && (hi - 0.5 / local.scale()).abs() < 1e-12);
    assert!(local.log_z(hi).is_err());
}

#[test]
fn out_of_interval_is_rejected() {
    let fam = family(1.0, 1.0, 0.5, [0.0; 4]);
    let batch = batch_of(vec![vec![1.3]], &fam);
    let lik = Likelihood::new(&batch, &fam);
    assert!(lik.ratio(0.4, 1.0).is_err());
    assert!(lik.ratio(1.0, 1.5).is_err());
}

#[test]
fn mirrored_batch_mirrors_the_ratio() {
    let fam = family(1.3, 1.3, -0.4, [0.1, 0.0, 0.2, 0.0]);
    let model = IntensityModel::new(fam, 1.0).unwrap();
    let batch = sample_batch(&model, 30, 4).unwrap();
    let mirrored = batch.mirrored(2.0);
    let (l, m) = (Likelihood::new(&batch, &fam), Likelihood::new(&mirrored, &fam));
    for (theta, theta1) in [(0.8, 1.1), (1.4, 0.55)] {
        let x = l.ratio(theta, theta1).unwrap().value;
        let y = m.ratio(2.0 - theta, 2.0 - theta1).unwrap().value;
        assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratio_is_antisymmetric_and_chains(
        seed in any::<u64>(),
        p in prop_oneof![-0.9f64..-0.05, 0.05f64..0.9],
        t0 in 0.51f64..1.49,
        t1 in 0.51f64..1.49,
        t2 in 0.51f64..1.49,
    ) {
        let fam = family(1.0, 2.0, p, [0.0; 4]);
        let batch = sample_batch(&fam.at(1.0).unwrap(), 16, seed).unwrap();
        let lik = Likelihood::new(&batch, &fam);
        let r01 = lik.ratio(t0, t1).unwrap().value;
        let r10 = lik.ratio(t1, t0).unwrap().value;
        let r12 = lik.ratio(t1, t2).unwrap().value;
        let r02 = lik.ratio(t0, t2).unwrap().value;
        let scale = 1.0 + r01.abs() + r12.abs();
        prop_assert!((r01 + r10).abs() <= 1e-10 * scale);
        prop_assert!((r01 + r12 - r02).abs() <= 1e-10 * scale);
    }
}
