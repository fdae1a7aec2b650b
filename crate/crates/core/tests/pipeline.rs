//! End-to-end checks on the simulate -> score -> evaluate pipeline:
//! matched-pair construction, additive-regime convergence, projection
//! sufficiency, and consistency between the two operating-point views.

use ftmf_core::{
    estimate_mean_cov, false_alarm_at_detection, generate, pairwise_auc, roc, score_batch,
    spearman, DataMatrix, DetectorKind, Label, ScenarioConfig, ScoreSet, TargetSpec,
};
use nalgebra::DVector;

#[test]
fn scenario_background_covariance_is_on_spec() {
    let config = ScenarioConfig {
        nu: 10.0,
        d: 4,
        target_amplitude: 3.0,
        alpha: 0.3,
        n: 20_000,
        seed: 51,
    };
    let s = generate(&config).unwrap();
    let (mu, factor) = estimate_mean_cov(&s.background).unwrap();
    let tol = 5.0 / (config.n as f64).sqrt();
    for j in 0..config.d {
        assert!(mu[j].abs() < tol, "mean[{j}] = {}", mu[j]);
    }
    for i in 0..config.d {
        for j in 0..config.d {
            let expected = if i == j { 1.0 } else { 0.0 };
            let got = factor.matrix()[(i, j)];
            assert!(
                (got - expected).abs() < tol,
                "cov[({i}, {j})] = {got}, tolerance {tol}"
            );
        }
    }
}

#[test]
fn scoring_does_not_depend_on_which_matrix_a_pixel_sits_in() {
    let config = ScenarioConfig {
        nu: 8.0,
        d: 5,
        target_amplitude: 4.0,
        alpha: 0.2,
        n: 64,
        seed: 52,
    };
    let s = generate(&config).unwrap();
    // Stack both matrices and score the stack; the halves must equal
    // the per-matrix scores exactly.
    let mut rows = Vec::new();
    for i in 0..config.n {
        rows.push(s.background.row(i));
    }
    for i in 0..config.n {
        rows.push(s.targets.row(i));
    }
    let combined = DataMatrix::from_rows(&rows).unwrap();
    for kind in DetectorKind::ALL {
        let bg = score_batch(&s.background, &s.model, &s.target, kind).unwrap();
        let tg = score_batch(&s.targets, &s.model, &s.target, kind).unwrap();
        let all = score_batch(&combined, &s.model, &s.target, kind).unwrap();
        assert_eq!(&all[..config.n], &bg[..], "{kind}");
        assert_eq!(&all[config.n..], &tg[..], "{kind}");
    }
}

#[test]
fn replacement_detectors_converge_to_their_additive_counterparts() {
    // Strong amplitude with a tiny fill fraction: the replacement model
    // linearizes, so each likelihood-ratio detector must rank implanted
    // pixels the same way its additive counterpart does.
    let config = ScenarioConfig {
        nu: 10.0,
        d: 10,
        target_amplitude: 100.0,
        alpha: 0.01,
        n: 10_000,
        seed: 53,
    };
    let s = generate(&config).unwrap();
    let pairs = [
        (DetectorKind::Ftmf, DetectorKind::Amf),
        (DetectorKind::EcFtmf, DetectorKind::EcAmf),
        (DetectorKind::Ftce, DetectorKind::Ace),
    ];
    for (replacement, additive) in pairs {
        let a = score_batch(&s.targets, &s.model, &s.target, replacement).unwrap();
        let b = score_batch(&s.targets, &s.model, &s.target, additive).unwrap();
        let rho = spearman(&a, &b).unwrap();
        assert!(
            rho > 0.99,
            "{replacement} vs {additive}: rank correlation {rho}"
        );
    }
}

#[test]
fn every_detector_is_a_function_of_the_projection_pair() {
    // For a whitened model with an axis-aligned target, pixels sharing
    // the same on-target coordinate and residual norm must score
    // identically, however the residual is spread across channels.
    let d = 6;
    let model = ftmf_core::BackgroundModel::standard(d, 9.0).unwrap();
    let mut t = DVector::zeros(d);
    t[0] = 4.0;
    let target = TargetSpec::new(t).unwrap();
    let half = 0.5_f64.sqrt();
    for (mf, r) in [(0.5, 1.0), (2.0, 3.0), (-1.0, 0.7)] {
        let mut x1 = DVector::zeros(d);
        x1[0] = mf;
        x1[1] = r;
        let mut x2 = DVector::zeros(d);
        x2[0] = mf;
        x2[2] = r * half;
        x2[3] = r * half;
        let mut x3 = DVector::zeros(d);
        x3[0] = mf;
        x3[5] = -r;
        for kind in DetectorKind::ALL {
            let s1 = ftmf_core::score(&model, &target, &x1, kind).unwrap();
            let s2 = ftmf_core::score(&model, &target, &x2, kind).unwrap();
            let s3 = ftmf_core::score(&model, &target, &x3, kind).unwrap();
            assert!(
                (s1 - s2).abs() <= 1e-10 * (1.0 + s1.abs()),
                "{kind} at mf {mf}, residual {r}: {s1} vs {s2}"
            );
            assert!(
                (s1 - s3).abs() <= 1e-10 * (1.0 + s1.abs()),
                "{kind} at mf {mf}, residual {r}: {s1} vs {s3}"
            );
        }
    }
}

#[test]
fn curve_and_quantile_views_of_the_operating_point_agree() {
    let config = ScenarioConfig {
        nu: 10.0,
        d: 8,
        target_amplitude: 3.0,
        alpha: 0.4,
        n: 5_000,
        seed: 54,
    };
    let s = generate(&config).unwrap();
    let bg = score_batch(&s.background, &s.model, &s.target, DetectorKind::Amf).unwrap();
    let tg = score_batch(&s.targets, &s.model, &s.target, DetectorKind::Amf).unwrap();
    let set = ScoreSet::uniform(bg, Label::Background)
        .unwrap()
        .concat(ScoreSet::uniform(tg, Label::Target).unwrap());

    let op = false_alarm_at_detection(&set, 0.5).unwrap();
    let curve = roc(&set).unwrap();
    // The quantile-based false-alarm rate must land inside the one-step
    // bracket of curve points around a detection rate of one half.
    let n_t = s.targets.n_rows() as f64;
    let lo = curve
        .points
        .iter()
        .find(|p| p.pd >= 0.5)
        .expect("curve reaches half detection");
    let hi = curve
        .points
        .iter()
        .find(|p| p.pd >= 0.5 + 1.0 / n_t)
        .unwrap_or_else(|| curve.points.last().unwrap());
    assert!(
        op.far >= lo.far - 1e-12 && op.far <= hi.far + 1e-12,
        "far {} outside curve bracket [{}, {}]",
        op.far,
        lo.far,
        hi.far
    );
}

#[test]
fn rerunning_the_whole_pipeline_reproduces_every_number() {
    let config = ScenarioConfig {
        nu: 6.0,
        d: 6,
        target_amplitude: 2.5,
        alpha: 0.35,
        n: 2_000,
        seed: 55,
    };
    let run = || {
        let s = generate(&config).unwrap();
        let mut out = Vec::new();
        for kind in DetectorKind::ALL {
            let bg = score_batch(&s.background, &s.model, &s.target, kind).unwrap();
            let tg = score_batch(&s.targets, &s.model, &s.target, kind).unwrap();
            let set = ScoreSet::uniform(bg, Label::Background)
                .unwrap()
                .concat(ScoreSet::uniform(tg, Label::Target).unwrap());
            out.push(pairwise_auc(&set).unwrap());
            out.push(false_alarm_at_detection(&set, 0.5).unwrap().far);
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn heavier_fill_fractions_separate_classes_more() {
    let base = ScenarioConfig {
        nu: 10.0,
        d: 8,
        target_amplitude: 3.0,
        alpha: 0.15,
        n: 4_000,
        seed: 56,
    };
    let auc_at = |alpha: f64| {
        let s = generate(&ScenarioConfig { alpha, ..base }).unwrap();
        let bg = score_batch(&s.background, &s.model, &s.target, DetectorKind::EcFtmf).unwrap();
        let tg = score_batch(&s.targets, &s.model, &s.target, DetectorKind::EcFtmf).unwrap();
        let set = ScoreSet::uniform(bg, Label::Background)
            .unwrap()
            .concat(ScoreSet::uniform(tg, Label::Target).unwrap());
        pairwise_auc(&set).unwrap()
    };
    let weak = auc_at(0.1);
    let strong = auc_at(0.5);
    assert!(
        weak > 0.5,
        "weak targets should still be detectable: {weak}"
    );
    assert!(strong > weak, "auc {strong} at 0.5 vs {weak} at 0.1");
}
