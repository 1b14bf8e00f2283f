//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the crate's hull or path code: the LP oracle
//! solves the assignment LP by enumerating kinks of its Lagrangian dual,
//! and the hull oracle checks every arm subset exhaustively. Both are
//! exponential-ish and only meant for tiny instances.

#![allow(dead_code)]

use rand::Rng;

/// Exact optimum of the fractional assignment LP
///
/// ```text
/// max (1/n) sum_{i,k} pi_ik tau_ik
/// s.t. (1/n) sum_{i,k} pi_ik c_ik <= B,  sum_k pi_ik <= 1,  pi >= 0
/// ```
///
/// via its partial Lagrangian dual. Dualizing only the budget row gives
///
/// ```text
/// g(lambda) = lambda B + (1/n) sum_i max(0, max_k (tau_ik - lambda c_ik))
/// ```
///
/// which is convex piecewise linear in `lambda >= 0` with kinks only where
/// some unit's active piece changes: at pairwise crossings
/// `(tau_ik - tau_il) / (c_ik - c_il)` or at zero crossings `tau_ik / c_ik`.
/// Strong duality holds (the LP is feasible and bounded), so the optimum is
/// the minimum of `g` over `{0} ∪ {positive kinks}`.
pub fn lp_oracle(n: usize, k: usize, tau: &[f64], cost: &[f64], budget: f64) -> f64 {
    assert!(budget > 0.0);
    let mut candidates = vec![0.0f64];
    for i in 0..n {
        let row_tau = &tau[i * k..(i + 1) * k];
        let row_cost = &cost[i * k..(i + 1) * k];
        for a in 0..k {
            let z = row_tau[a] / row_cost[a];
            if z.is_finite() && z > 0.0 {
                candidates.push(z);
            }
            for b in (a + 1)..k {
                let dc = row_cost[a] - row_cost[b];
                if dc != 0.0 {
                    let z = (row_tau[a] - row_tau[b]) / dc;
                    if z.is_finite() && z > 0.0 {
                        candidates.push(z);
                    }
                }
            }
        }
    }
    let dual = |lambda: f64| -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            let mut best = 0.0f64;
            for a in 0..k {
                let v = tau[i * k + a] - lambda * cost[i * k + a];
                if v > best {
                    best = v;
                }
            }
            total += best;
        }
        lambda * budget + total / n as f64
    };
    candidates
        .iter()
        .map(|&l| dual(l))
        .fold(f64::INFINITY, f64::min)
}

/// One hull arm as reported by the brute-force oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleArm {
    pub arm_id: usize,
    pub cost: f64,
    pub effect: f64,
    pub rho: f64,
}

/// Exhaustive-subset upper-left hull oracle.
///
/// A subset of arms (ordered by cost, with the origin prepended) is *the*
/// hull iff it satisfies the three ordering chains — costs strictly
/// increasing, effects strictly increasing from above 0, incremental ratios
/// strictly decreasing and positive — and its piecewise-linear envelope
/// (extended flat beyond the last point) weakly dominates every arm.
/// Returns `Err` when no subset qualifies or several do (ties).
pub fn hull_oracle(points: &[(usize, f64, f64)]) -> Result<Vec<OracleArm>, &'static str> {
    let k = points.len();
    assert!(k <= 16, "oracle is exponential in the number of arms");
    let mut winners: Vec<Vec<OracleArm>> = Vec::new();
    'subsets: for mask in 0u32..(1 << k) {
        let mut chain: Vec<(usize, f64, f64)> = (0..k)
            .filter(|&j| mask & (1 << j) != 0)
            .map(|j| points[j])
            .collect();
        chain.sort_by(|a, b| a.1.total_cmp(&b.1));

        // Ordering chains.
        let mut arms = Vec::with_capacity(chain.len());
        let (mut prev_cost, mut prev_effect, mut prev_rho) = (0.0, 0.0, f64::INFINITY);
        for &(arm_id, cost, effect) in &chain {
            if cost <= prev_cost || effect <= prev_effect {
                continue 'subsets;
            }
            let rho = (effect - prev_effect) / (cost - prev_cost);
            if rho <= 0.0 || rho >= prev_rho {
                continue 'subsets;
            }
            arms.push(OracleArm {
                arm_id,
                cost,
                effect,
                rho,
            });
            prev_cost = cost;
            prev_effect = effect;
            prev_rho = rho;
        }

        // Dominance of every excluded arm by the chain's envelope.
        let envelope = |c: f64| -> f64 {
            let (mut lc, mut le) = (0.0, 0.0);
            for a in &arms {
                if c <= a.cost {
                    return le + (c - lc) / (a.cost - lc) * (a.effect - le);
                }
                lc = a.cost;
                le = a.effect;
            }
            le
        };
        for (j, &(_, cost, effect)) in points.iter().enumerate() {
            if mask & (1 << j) != 0 {
                continue;
            }
            if effect > envelope(cost) {
                continue 'subsets;
            }
        }
        winners.push(arms);
    }
    match winners.len() {
        0 => Err("no subset satisfies the hull conditions"),
        1 => Ok(winners.pop().unwrap()),
        _ => Err("ambiguous hull (ties)"),
    }
}

/// Random arm points with costs in `(0, max_cost]` and effects in
/// `[-effect_range, effect_range]`.
pub fn random_points<R: Rng>(
    rng: &mut R,
    k: usize,
    max_cost: f64,
    effect_range: f64,
) -> Vec<(usize, f64, f64)> {
    (0..k)
        .map(|j| {
            let cost = (1.0 - rng.gen::<f64>()) * max_cost;
            let effect = (rng.gen::<f64>() * 2.0 - 1.0) * effect_range;
            (j + 1, cost, effect)
        })
        .collect()
}

/// Random `n x k` effect/cost matrices with mixed-sign effects.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let tau: Vec<f64> = (0..n * k).map(|_| rng.gen::<f64>() * 2.5 - 1.0).collect();
    let cost: Vec<f64> = (0..n * k)
        .map(|_| 0.05 + rng.gen::<f64>() * 1.95)
        .collect();
    (tau, cost)
}
