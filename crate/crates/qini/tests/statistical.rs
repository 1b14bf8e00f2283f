//! Monte Carlo checks of the score constructions and the baseline policy
//! against the synthetic design's closed-form effects.

use qini::dgp::{self, ASSIGNMENT_PROBS};
use qini::scores::{aipw_scores, ipw_scores, make_folds, NuisanceEstimates};
use qini::{baseline_path, difference_curve, PolicySpec};

/// Mean and standard error of the mean for a slice.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn ipw_score_columns_are_unbiased_for_true_effects() {
    let n = 100_000;
    let draw = dgp::simulate(n, 314);
    let scores = ipw_scores(&draw.observed(), &ASSIGNMENT_PROBS).unwrap();
    for k in 0..dgp::NUM_ARMS {
        let diffs: Vec<f64> = (0..n)
            .map(|i| scores[i * dgp::NUM_ARMS + k] - draw.tau_true[i * dgp::NUM_ARMS + k])
            .collect();
        let (mean, se) = mean_se(&diffs);
        assert!(
            mean.abs() <= 3.0 * se,
            "arm {}: bias {mean} vs 3se {}",
            k + 1,
            3.0 * se
        );
    }
}

#[test]
fn ipw_recovers_the_arm_contrast() {
    // E[score_2 - score_1] should match mean(tau_2 - tau_1).
    let n = 100_000;
    let draw = dgp::simulate(n, 2718);
    let scores = ipw_scores(&draw.observed(), &ASSIGNMENT_PROBS).unwrap();
    let diffs: Vec<f64> = (0..n)
        .map(|i| {
            (scores[i * 2 + 1] - scores[i * 2])
                - (draw.tau_true[i * 2 + 1] - draw.tau_true[i * 2])
        })
        .collect();
    let (mean, se) = mean_se(&diffs);
    assert!(mean.abs() <= 3.0 * se, "bias {mean} vs 3se {}", 3.0 * se);
}

#[test]
fn aipw_stays_unbiased_when_outcome_model_is_wrong() {
    // Exact propensities, badly corrupted conditional means: the residual
    // correction must still center the scores on the true effects.
    let n = 100_000;
    let draw = dgp::simulate(n, 999);
    let cols = dgp::NUM_ARMS + 1;
    let mut mu = Vec::with_capacity(n * cols);
    for i in 0..n {
        // Deliberately wrong and unit-dependent.
        let junk = 5.0 + (i % 7) as f64;
        mu.extend_from_slice(&[junk, -junk, 2.0 * junk]);
    }
    let mut e_hat = Vec::with_capacity(n * cols);
    for _ in 0..n {
        e_hat.extend_from_slice(&ASSIGNMENT_PROBS);
    }
    let folds = make_folds(n, 5, 1).unwrap();
    let nuisance = NuisanceEstimates::new(n, dgp::NUM_ARMS, mu, e_hat, folds).unwrap();
    let scores = aipw_scores(&draw.observed(), &nuisance).unwrap();
    for k in 0..dgp::NUM_ARMS {
        let diffs: Vec<f64> = (0..n)
            .map(|i| scores[i * dgp::NUM_ARMS + k] - draw.tau_true[i * dgp::NUM_ARMS + k])
            .collect();
        let (mean, se) = mean_se(&diffs);
        assert!(
            mean.abs() <= 3.0 * se,
            "arm {}: bias {mean} vs 3se {}",
            k + 1,
            3.0 * se
        );
    }
}

#[test]
fn targeting_weakly_dominates_the_baseline_up_to_noise() {
    let n = 4000;
    let draw = dgp::simulate(n, 77);
    let scores = ipw_scores(&draw.observed(), &ASSIGNMENT_PROBS).unwrap();
    let frame = draw.frame_with_scores(scores);
    let d = difference_curve(
        &frame,
        &PolicySpec::all_arms(),
        &PolicySpec::baseline(None),
        0.6,
        6,
        200,
        5,
    )
    .unwrap();
    for (g, (diff, se)) in d.diff.iter().zip(d.std_err.iter()).enumerate() {
        assert!(
            *diff >= -3.0 * se,
            "grid point {g}: baseline beats targeting by {} (3se {})",
            -diff,
            3.0 * se
        );
    }
}

#[test]
fn baseline_curve_is_piecewise_linear_in_budget() {
    let n = 2000;
    let draw = dgp::simulate(n, 31);
    let frame = draw.oracle_frame();
    let path = baseline_path(&frame, 2.0).unwrap();
    // With one pseudo-unit the curve has at most K breakpoints; between
    // consecutive event spends the gain is exactly linear.
    assert!(path.events.len() <= 2);
    let mut prev = (0.0, 0.0);
    for e in &path.events {
        let mid_b = 0.5 * (prev.0 + e.spend);
        let mid_gain = 0.5 * (prev.1 + e.gain);
        assert!((path.gain_at(mid_b) - mid_gain).abs() < 1e-12);
        prev = (e.spend, e.gain);
    }
}

#[test]
fn oracle_plateau_equals_mean_best_positive_effect() {
    // With budget beyond every hull, the oracle-scored path treats each
    // unit with its highest-effect hull arm, so the plateau is the mean of
    // max(0, max_k tau_k) over units.
    let n = 30_000;
    let draw = dgp::simulate(n, 555);
    let frame = draw.oracle_frame();
    let path = qini::compute_path(&frame, 1e9).unwrap();
    assert!(path.complete);
    let expected: f64 = (0..n)
        .map(|i| draw.tau_true[2 * i].max(draw.tau_true[2 * i + 1]).max(0.0))
        .sum::<f64>()
        / n as f64;
    assert!(
        (path.final_gain() - expected).abs() < 1e-10,
        "{} vs {expected}",
        path.final_gain()
    );
}

#[test]
fn oracle_runs_agree_within_monte_carlo_error() {
    // Empirical spread from cheap runs, scaled to the probe size.
    let small_n = 20_000;
    let probe_n = 100_000;
    let budget = 0.3;
    let small: Vec<f64> = (0..5)
        .map(|s| dgp::true_gain_oracle(budget, small_n, 100 + s))
        .collect();
    let (_, se_small) = mean_se(&small);
    let sd_small = se_small * (small.len() as f64).sqrt();
    let sd_probe = sd_small * (small_n as f64 / probe_n as f64).sqrt();
    let a = dgp::true_gain_oracle(budget, probe_n, 7001);
    let b = dgp::true_gain_oracle(budget, probe_n, 7002);
    let tol = 3.0 * std::f64::consts::SQRT_2 * sd_probe;
    assert!((a - b).abs() <= tol, "{a} vs {b}, tol {tol}");
}
