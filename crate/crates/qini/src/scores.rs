//! Evaluation scores: IPW and cross-fit AIPW arm-versus-control contrasts.
//!
//! A score matrix `Gamma` has one row per test unit and one column per
//! treatment arm `1..=K` (control contrasts are implicit), with
//! `E[Gamma_{i,k} | X_i] ~= tau_k(X_i)`. Policies are then valued by the
//! weighted average of `<pi(X_i), Gamma_i>` without refitting any model.
//!
//! With known randomization probabilities the scores are inverse-propensity
//! weighted:
//!
//! ```text
//! Gamma_{i,k} = 1(W_i = k) Y_i / P[W = k]  -  1(W_i = 0) Y_i / P[W = 0]
//! ```
//!
//! Otherwise, supplied cross-fit nuisance estimates (conditional means
//! `mu_hat` and propensities `e_hat`, each row estimated without the unit's
//! own fold) give the doubly robust form:
//!
//! ```text
//! Gamma_{i,k} = mu_hat_k(X_i) - mu_hat_0(X_i)
//!             + (1(W_i = k)/e_hat_k(X_i) - 1(W_i = 0)/e_hat_0(X_i))
//!               * (Y_i - mu_hat_{W_i}(X_i))
//! ```
//!
//! Nuisance estimation itself is out of scope; this module only assembles
//! scores. Propensities below `PROPENSITY_FLOOR` are a hard error rather
//! than being clipped: clipping silently biases evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::QiniError;

/// Smallest admissible propensity estimate.
pub const PROPENSITY_FLOOR: f64 = 1e-6;

/// Per-unit observations `(W_i, Y_i)` from the test set.
///
/// Treatments take values in `{0, ..., K}` with 0 the control arm; the row
/// index doubles as the unit id.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    w: Vec<u32>,
    y: Vec<f64>,
}

impl ObservedData {
    pub fn new(w: Vec<u32>, y: Vec<f64>) -> Result<Self, QiniError> {
        if w.len() != y.len() {
            return Err(QiniError::DimensionMismatch {
                what: "outcomes",
                expected: w.len(),
                got: y.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(QiniError::NonFinite {
                what: "outcome",
                unit: i,
                arm: 0,
            });
        }
        Ok(Self { w, y })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn treatment(&self, unit: usize) -> u32 {
        self.w[unit]
    }

    pub fn outcome(&self, unit: usize) -> f64 {
        self.y[unit]
    }

    fn check_range(&self, max_arm: u32) -> Result<(), QiniError> {
        for (i, &w) in self.w.iter().enumerate() {
            if w > max_arm {
                return Err(QiniError::TreatmentOutOfRange {
                    unit: i,
                    value: w,
                    max: max_arm,
                });
            }
        }
        Ok(())
    }
}

/// Arms in `{0, ..., K}` with no observation. Such arms make the score
/// matrix degenerate in those columns; callers may warn.
pub fn unobserved_arms(data: &ObservedData, num_arms: usize) -> Vec<u32> {
    let mut seen = vec![false; num_arms + 1];
    for i in 0..data.len() {
        let w = data.treatment(i) as usize;
        if w <= num_arms {
            seen[w] = true;
        }
    }
    (0..=num_arms as u32)
        .filter(|&k| !seen[k as usize])
        .collect()
}

/// Cross-fit nuisance estimates aligned with the test rows.
///
/// `mu_hat` and `e_hat` are `n x (K+1)` row-major (column 0 is the control);
/// each row must come from a fit excluding the unit's own fold, identified
/// by `fold_id`. Propensity rows must sum to 1 within 1e-6 with every entry
/// in `[PROPENSITY_FLOOR, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceEstimates {
    n: usize,
    num_arms: usize,
    mu_hat: Vec<f64>,
    e_hat: Vec<f64>,
    fold_id: Vec<usize>,
}

impl NuisanceEstimates {
    pub fn new(
        n: usize,
        num_arms: usize,
        mu_hat: Vec<f64>,
        e_hat: Vec<f64>,
        fold_id: Vec<usize>,
    ) -> Result<Self, QiniError> {
        let cols = num_arms + 1;
        if mu_hat.len() != n * cols {
            return Err(QiniError::DimensionMismatch {
                what: "mu_hat",
                expected: n * cols,
                got: mu_hat.len(),
            });
        }
        if e_hat.len() != n * cols {
            return Err(QiniError::DimensionMismatch {
                what: "e_hat",
                expected: n * cols,
                got: e_hat.len(),
            });
        }
        if fold_id.len() != n {
            return Err(QiniError::DimensionMismatch {
                what: "fold_id",
                expected: n,
                got: fold_id.len(),
            });
        }
        for i in 0..n {
            let mut row_sum = 0.0;
            for k in 0..cols {
                let mu = mu_hat[i * cols + k];
                if !mu.is_finite() {
                    return Err(QiniError::InvalidNuisance {
                        reason: format!("mu_hat for unit {i}, arm {k} is not finite"),
                    });
                }
                let e = e_hat[i * cols + k];
                if !(e.is_finite() && (PROPENSITY_FLOOR..1.0).contains(&e)) {
                    return Err(QiniError::PropensityOutOfRange {
                        unit: i,
                        arm: k,
                        value: e,
                    });
                }
                row_sum += e;
            }
            if (row_sum - 1.0).abs() > 1e-6 {
                return Err(QiniError::InvalidNuisance {
                    reason: format!("propensity row {i} sums to {row_sum}, not 1"),
                });
            }
        }
        let mut folds: Vec<usize> = fold_id.clone();
        folds.sort_unstable();
        folds.dedup();
        if folds.len() < 2 {
            return Err(QiniError::InvalidFolds {
                reason: format!("need at least 2 folds, got {}", folds.len()),
            });
        }
        Ok(Self {
            n,
            num_arms,
            mu_hat,
            e_hat,
            fold_id,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn fold_id(&self) -> &[usize] {
        &self.fold_id
    }

    #[inline]
    fn mu(&self, unit: usize, arm: usize) -> f64 {
        self.mu_hat[unit * (self.num_arms + 1) + arm]
    }

    #[inline]
    fn e(&self, unit: usize, arm: usize) -> f64 {
        self.e_hat[unit * (self.num_arms + 1) + arm]
    }
}

fn validate_probs(probs: &[f64]) -> Result<(), QiniError> {
    if probs.len() < 2 {
        return Err(QiniError::InvalidProbabilities {
            reason: format!("need K+1 >= 2 entries, got {}", probs.len()),
        });
    }
    for (k, &p) in probs.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(QiniError::InvalidProbabilities {
                reason: format!("entry {k} is {p}, must be positive"),
            });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(QiniError::InvalidProbabilities {
            reason: format!("entries sum to {sum}, not 1"),
        });
    }
    Ok(())
}

/// Inverse-propensity-weighted scores from known randomization
/// probabilities `probs = (P[W=0], ..., P[W=K])`.
///
/// Returns the `n x K` score matrix, row-major.
pub fn ipw_scores(data: &ObservedData, probs: &[f64]) -> Result<Vec<f64>, QiniError> {
    validate_probs(probs)?;
    let num_arms = probs.len() - 1;
    data.check_range(num_arms as u32)?;
    let n = data.len();
    let mut scores = vec![0.0; n * num_arms];
    for i in 0..n {
        let w = data.treatment(i) as usize;
        let y = data.outcome(i);
        if w == 0 {
            let control_term = y / probs[0];
            for k in 0..num_arms {
                scores[i * num_arms + k] = -control_term;
            }
        } else {
            scores[i * num_arms + (w - 1)] = y / probs[w];
        }
    }
    Ok(scores)
}

/// Doubly robust (AIPW) scores from cross-fit nuisance estimates.
///
/// Returns the `n x K` score matrix, row-major. Nuisance rows must be
/// aligned with the data rows.
pub fn aipw_scores(
    data: &ObservedData,
    nuisance: &NuisanceEstimates,
) -> Result<Vec<f64>, QiniError> {
    if nuisance.n != data.len() {
        return Err(QiniError::DimensionMismatch {
            what: "nuisance rows",
            expected: data.len(),
            got: nuisance.n,
        });
    }
    let num_arms = nuisance.num_arms;
    data.check_range(num_arms as u32)?;
    let n = data.len();
    let mut scores = vec![0.0; n * num_arms];
    for i in 0..n {
        let w = data.treatment(i) as usize;
        let residual = data.outcome(i) - nuisance.mu(i, w);
        let control_ipw = if w == 0 { 1.0 / nuisance.e(i, 0) } else { 0.0 };
        for k in 1..=num_arms {
            let arm_ipw = if w == k { 1.0 / nuisance.e(i, k) } else { 0.0 };
            scores[i * num_arms + (k - 1)] =
                nuisance.mu(i, k) - nuisance.mu(i, 0) + (arm_ipw - control_ipw) * residual;
        }
    }
    Ok(scores)
}

/// Deterministic balanced fold labels for cross-fitting: a seeded shuffle of
/// `0..n` dealt round-robin into `num_folds` folds, so sizes differ by at
/// most one.
pub fn make_folds(n: usize, num_folds: usize, seed: u64) -> Result<Vec<usize>, QiniError> {
    if num_folds < 2 {
        return Err(QiniError::InvalidFolds {
            reason: format!("need at least 2 folds, got {num_folds}"),
        });
    }
    if num_folds > n {
        return Err(QiniError::InvalidFolds {
            reason: format!("{num_folds} folds exceed {n} units"),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_id = vec![0usize; n];
    for (rank, &unit) in order.iter().enumerate() {
        fold_id[unit] = rank % num_folds;
    }
    Ok(fold_id)
}
