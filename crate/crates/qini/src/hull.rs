//! Per-unit reduction of treatment arms to the upper-left convex hull.
//!
//! Each treatment arm is a point on the (cost, effect) plane; the zero-cost
//! control sits at the origin. Only arms on the upper-left convex hull of
//! these points can be active in an optimal budget-constrained assignment —
//! every other arm is weakly dominated by a mixture of two hull neighbours
//! (or by the control). The hull is an increasing chain
//!
//! ```text
//! 0 < cost_1 < cost_2 < ...      0 < effect_1 < effect_2 < ...
//! ```
//!
//! whose incremental cost-benefit ratios
//! `rho_j = (effect_j - effect_{j-1}) / (cost_j - cost_{j-1})` are strictly
//! decreasing. `rho` is the priority at which the solution path allocates a
//! unit its first arm or upgrades it to the next one.
//!
//! The construction is a Graham-scan variant: sort arms by cost, run a
//! single backtracking scan that removes points breaking slope monotonicity,
//! then keep the strictly-increasing-effect prefix. Arms with non-positive
//! effect estimates never appear; a unit whose effects are all non-positive
//! has an empty hull.

use crate::error::QiniError;

/// One treatment arm as a point on the (cost, effect) plane.
///
/// `cost` is the arm's cost contrast against the control and must be
/// strictly positive; `effect` is the arm's effect estimate against the
/// control and may have either sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPoint {
    /// Caller-facing arm identifier (1-based in CSV interfaces).
    pub arm_id: usize,
    pub cost: f64,
    pub effect: f64,
}

/// One arm on a unit's hull, with the incremental cost-benefit ratio of
/// upgrading to it from the previous hull arm (from the control for the
/// first arm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullArm {
    pub arm_id: usize,
    pub cost: f64,
    pub effect: f64,
    pub rho: f64,
}

/// The ordered upper-left hull of one unit's arms.
///
/// Invariants (checked by construction): costs strictly increasing, effects
/// strictly increasing, `rho` strictly decreasing and positive. May be empty
/// when every effect estimate is non-positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HullSequence {
    pub unit_id: usize,
    pub arms: Vec<HullArm>,
}

impl HullSequence {
    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }
}

/// Computes the upper-left convex hull of `{(0,0)} ∪ points`, excluding the
/// origin, ordered by increasing cost.
///
/// Ties in cost keep the arm with the larger effect; full ties keep the
/// smaller `arm_id`. Collinear interior points are dropped so `rho` is
/// strictly decreasing. Slope comparisons use cross-multiplied differences;
/// `rho` is materialized as a quotient only for arms that made the hull.
///
/// Rejects non-positive or non-finite costs and non-finite effects.
/// `arm_id`s are assumed distinct.
pub fn compute_convex_hull(
    unit_id: usize,
    points: &[ArmPoint],
) -> Result<HullSequence, QiniError> {
    for p in points {
        if !(p.cost.is_finite() && p.cost > 0.0) {
            return Err(QiniError::InvalidCost {
                unit: unit_id,
                arm: p.arm_id,
                value: p.cost,
            });
        }
        if !p.effect.is_finite() {
            return Err(QiniError::NonFinite {
                what: "effect",
                unit: unit_id,
                arm: p.arm_id,
            });
        }
    }
    let mut scratch = HullScratch::with_capacity(points.len());
    scratch.candidates.extend_from_slice(points);
    let mut arms = Vec::new();
    scan_into(&mut scratch, &mut arms);
    Ok(HullSequence { unit_id, arms })
}

/// Reusable buffers for [`scan_into`]. The path solver runs one scan per
/// unit and would otherwise pay two allocations each.
pub(crate) struct HullScratch {
    pub(crate) candidates: Vec<ArmPoint>,
    chain: Vec<ArmPoint>,
}

impl HullScratch {
    pub(crate) fn with_capacity(k: usize) -> Self {
        Self {
            candidates: Vec::with_capacity(k),
            chain: Vec::with_capacity(k),
        }
    }
}

/// Core of the hull construction: consumes `scratch.candidates` (validated
/// points, any effects) and appends the hull arms to `out`.
pub(crate) fn scan_into(scratch: &mut HullScratch, out: &mut Vec<HullArm>) {
    let cand = &mut scratch.candidates;
    // Arms with non-positive effect never improve on the control.
    cand.retain(|p| p.effect > 0.0);
    cand.sort_unstable_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(b.effect.total_cmp(&a.effect))
            .then(a.arm_id.cmp(&b.arm_id))
    });
    cand.dedup_by(|next, kept| next.cost == kept.cost);

    // Backtracking scan over (cost, effect), seeded with the origin. The
    // previous point `b` is removed when slope(b, p) >= slope(a, b), i.e.
    // when b lies on or below the chord from a to p.
    let chain = &mut scratch.chain;
    chain.clear();
    for &p in cand.iter() {
        while let Some(&b) = chain.last() {
            let (a_cost, a_effect) = if chain.len() >= 2 {
                let a = chain[chain.len() - 2];
                (a.cost, a.effect)
            } else {
                (0.0, 0.0)
            };
            if (p.effect - b.effect) * (b.cost - a_cost)
                >= (b.effect - a_effect) * (p.cost - b.cost)
            {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(p);
    }

    // Keep the strictly-increasing-effect prefix: slopes decrease along the
    // chain, so the first non-positive increment ends the upper-left hull.
    let (mut prev_cost, mut prev_effect) = (0.0, 0.0);
    for p in chain.iter() {
        if p.effect <= prev_effect {
            break;
        }
        out.push(HullArm {
            arm_id: p.arm_id,
            cost: p.cost,
            effect: p.effect,
            rho: (p.effect - prev_effect) / (p.cost - prev_cost),
        });
        prev_cost = p.cost;
        prev_effect = p.effect;
    }
}
