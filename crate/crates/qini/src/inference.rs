//! Half-sampling bootstrap inference for Qini curves.
//!
//! A point on a Qini curve is the estimated gain of the budget-constrained
//! policy at one spend level. Its sampling variability is estimated by
//! rerunning the solution path on `R` random half-samples of the test
//! units: each replicate draws `floor(n/2)` units without replacement,
//! doubles their weights, interpolates the replicate's gain curve onto the
//! full-sample spend grid, and the per-grid-point standard error is
//!
//! ```text
//! sigma_g = sqrt( (1/R) * sum_r (V_rg - mean_r V_rg)^2 )
//! ```
//!
//! Pointwise confidence intervals are normal-quantile based. Differences
//! between two policies (arm subsets, or a policy against the
//! covariate-free baseline) are estimated with a paired bootstrap: the same
//! half-sample is used to recompute both curves in each replicate, so the
//! correlation between curves evaluated on the same test data cancels.
//!
//! Replicate `r` draws from an independent substream of the seed, so
//! replicates are reproducible and may run in parallel; results are
//! identical for any thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::QiniError;
use crate::path::{compute_path, EvalFrame, KahanSum, SolutionPath};

/// Minimum units for a half-sampling bootstrap.
const MIN_BOOTSTRAP_UNITS: usize = 4;

/// Gain estimates on a spend grid with bootstrap standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    pub spend_grid: Vec<f64>,
    pub gain: Vec<f64>,
    pub std_err: Vec<f64>,
    pub num_replicates: usize,
    pub policy_label: String,
}

/// Pointwise difference between two policies' gains, with paired-bootstrap
/// standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceEstimate {
    pub spend_grid: Vec<f64>,
    pub diff: Vec<f64>,
    pub std_err: Vec<f64>,
    pub num_replicates: usize,
    pub label_a: String,
    pub label_b: String,
}

/// A policy to evaluate: targeting on a subset of arms, or the
/// covariate-free baseline over a subset of arms. `None` means all arms.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Targeting { arms: Option<Vec<usize>> },
    Baseline { arms: Option<Vec<usize>> },
}

impl PolicySpec {
    pub fn all_arms() -> Self {
        Self::Targeting { arms: None }
    }

    pub fn targeting(arms: Vec<usize>) -> Self {
        Self::Targeting { arms: Some(arms) }
    }

    pub fn baseline(arms: Option<Vec<usize>>) -> Self {
        Self::Baseline { arms }
    }

    pub fn label(&self) -> String {
        let fmt_arms = |arms: &Option<Vec<usize>>| match arms {
            None => "all".to_string(),
            Some(a) => a
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
        };
        match self {
            Self::Targeting { arms } => format!("arms {}", fmt_arms(arms)),
            Self::Baseline { arms } => format!("baseline arms {}", fmt_arms(arms)),
        }
    }

    /// Gains of the policy's path on `grid`, for the given frame.
    fn curve(&self, frame: &EvalFrame, b_max: f64, grid: &[f64]) -> Result<Vec<f64>, QiniError> {
        let masked;
        let (f, baseline) = match self {
            Self::Targeting { arms: None } => (frame, false),
            Self::Baseline { arms: None } => (frame, true),
            Self::Targeting { arms: Some(a) } => {
                masked = frame.select_arms(a)?;
                (&masked, false)
            }
            Self::Baseline { arms: Some(a) } => {
                masked = frame.select_arms(a)?;
                (&masked, true)
            }
        };
        let path = if baseline {
            baseline_path(f, b_max)?
        } else {
            compute_path(f, b_max)?
        };
        Ok(grid.iter().map(|&b| path.gain_at(b)).collect())
    }
}

/// Standard normal quantile by Acklam's rational approximation (absolute
/// error below 1.2e-9, ample for interval endpoints).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let tail = |q: f64| -> f64 {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Uniform grid over `(0, b_max]` with `grid_size` points.
pub fn spend_grid(b_max: f64, grid_size: usize) -> Result<Vec<f64>, QiniError> {
    if !(b_max.is_finite() && b_max > 0.0) {
        return Err(QiniError::InvalidBudget { value: b_max });
    }
    if grid_size == 0 {
        return Err(QiniError::EmptyGrid);
    }
    Ok((1..=grid_size)
        .map(|i| b_max * (i as f64) / (grid_size as f64))
        .collect())
}

/// RNG substream for replicate `r`.
fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64 + 1);
    rng
}

/// `floor(n/2)` distinct unit indices, in increasing order.
fn half_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = n / 2;
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx.sort_unstable();
    idx
}

fn validate_bootstrap(frame: &EvalFrame, replicates: usize) -> Result<(), QiniError> {
    if replicates < 2 {
        return Err(QiniError::TooFewReplicates {
            got: replicates,
            min: 2,
        });
    }
    if frame.n() < MIN_BOOTSTRAP_UNITS {
        return Err(QiniError::TooFewUnits {
            got: frame.n(),
            min: MIN_BOOTSTRAP_UNITS,
        });
    }
    Ok(())
}

/// Per-grid-point standard deviation across replicate curves, normalized by
/// `R` (not `R - 1`).
fn replicate_std_errs(curves: &[Vec<f64>]) -> Vec<f64> {
    let r = curves.len();
    let g = curves.first().map_or(0, |c| c.len());
    let mut out = Vec::with_capacity(g);
    for j in 0..g {
        let mut mean = KahanSum::default();
        for c in curves {
            mean.add(c[j]);
        }
        let m = mean.value() / r as f64;
        let mut ss = KahanSum::default();
        for c in curves {
            let d = c[j] - m;
            ss.add(d * d);
        }
        out.push((ss.value() / r as f64).sqrt());
    }
    out
}

/// Evaluates one policy on every half-sample replicate. Replicates run on
/// the current rayon pool; the result is ordered by replicate index, so
/// downstream reductions are thread-count independent.
fn bootstrap_replicate_curves(
    frame: &EvalFrame,
    specs: &[&PolicySpec],
    b_max: f64,
    grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>, QiniError> {
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let idx = half_sample(frame.n(), &mut rng);
            let sub = frame.subset(&idx, 2.0)?;
            specs
                .iter()
                .map(|s| s.curve(&sub, b_max, grid))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect()
}

/// Bootstrap standard errors for one targeting policy's Qini curve.
///
/// Computes the full-sample path and its gain on a uniform spend grid over
/// `(0, b_max]`, then the half-sampling standard error per grid point.
pub fn bootstrap_curve(
    frame: &EvalFrame,
    b_max: f64,
    grid_size: usize,
    replicates: usize,
    seed: u64,
) -> Result<CurveEstimate, QiniError> {
    validate_bootstrap(frame, replicates)?;
    let grid = spend_grid(b_max, grid_size)?;
    let spec = PolicySpec::all_arms();
    let gain = spec.curve(frame, b_max, &grid)?;
    let reps = bootstrap_replicate_curves(frame, &[&spec], b_max, &grid, replicates, seed)?;
    let curves: Vec<Vec<f64>> = reps.into_iter().map(|mut v| v.remove(0)).collect();
    let label = format!(
        "arms {}",
        frame
            .arm_labels()
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(CurveEstimate {
        spend_grid: grid,
        gain,
        std_err: replicate_std_errs(&curves),
        num_replicates: replicates,
        policy_label: label,
    })
}

/// Path of the covariate-free baseline policy.
///
/// Collapses the frame to a single pseudo-unit carrying the weighted means
/// of effects, costs, and scores per arm, and runs the path solver on that
/// unit's hull. The resulting curve splits budget between two consecutive
/// arms of the mean hull; spend is already per unit of the original
/// population because the means are.
pub fn baseline_path(frame: &EvalFrame, b_max: f64) -> Result<SolutionPath, QiniError> {
    let k = frame.num_arms();
    let w_total = frame.total_weight();
    let mut tau_bar = Vec::with_capacity(k);
    let mut cost_bar = Vec::with_capacity(k);
    let mut score_bar = Vec::with_capacity(k);
    for j in 0..k {
        let (mut t, mut c, mut s) = (
            KahanSum::default(),
            KahanSum::default(),
            KahanSum::default(),
        );
        for i in 0..frame.n() {
            let w = frame.weight(i);
            t.add(w * frame.tau(i, j));
            c.add(w * frame.cost(i, j));
            s.add(w * frame.score(i, j));
        }
        tau_bar.push(t.value() / w_total);
        cost_bar.push(c.value() / w_total);
        score_bar.push(s.value() / w_total);
    }
    let mean_frame = EvalFrame::from_parts(
        1,
        k,
        tau_bar,
        cost_bar,
        score_bar,
        vec![1.0],
        frame.arm_labels().to_vec(),
    )?;
    compute_path(&mean_frame, b_max)
}

/// Paired-bootstrap difference between two policies evaluated on the same
/// test units.
///
/// The full-sample difference is reported on a uniform grid; each replicate
/// draws one half-sample and recomputes both curves on it (baseline means
/// are recomputed within the half-sample, since they are sample statistics).
pub fn difference_curve(
    frame: &EvalFrame,
    policy_a: &PolicySpec,
    policy_b: &PolicySpec,
    b_max: f64,
    grid_size: usize,
    replicates: usize,
    seed: u64,
) -> Result<DifferenceEstimate, QiniError> {
    validate_bootstrap(frame, replicates)?;
    let grid = spend_grid(b_max, grid_size)?;
    let full_a = policy_a.curve(frame, b_max, &grid)?;
    let full_b = policy_b.curve(frame, b_max, &grid)?;
    let diff: Vec<f64> = full_a
        .iter()
        .zip(full_b.iter())
        .map(|(a, b)| a - b)
        .collect();
    let reps = bootstrap_replicate_curves(
        frame,
        &[policy_a, policy_b],
        b_max,
        &grid,
        replicates,
        seed,
    )?;
    let rep_diffs: Vec<Vec<f64>> = reps
        .into_iter()
        .map(|pair| {
            pair[0]
                .iter()
                .zip(pair[1].iter())
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    Ok(DifferenceEstimate {
        spend_grid: grid,
        diff,
        std_err: replicate_std_errs(&rep_diffs),
        num_replicates: replicates,
        label_a: policy_a.label(),
        label_b: policy_b.label(),
    })
}
