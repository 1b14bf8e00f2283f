//! Solution path of the budget-constrained multi-armed assignment problem.
//!
//! With fractional allocation allowed, assigning at most one of K costly
//! treatment arms per unit under an average-budget constraint is the LP
//! relaxation of a multiple-choice knapsack. Its optimum over every budget
//! level at once is traced by a single greedy pass: reduce each unit to its
//! upper-left hull of arms, seed a priority queue with each unit's first
//! hull arm keyed by the cost-benefit ratio `rho`, then repeatedly pop the
//! largest ratio and either allocate a new unit or upgrade an allocated one
//! to its next hull arm (refunding the previous arm's cost and score). Each
//! pop is one breakpoint of the piecewise-linear spend/gain curve; the whole
//! path costs `O(nK log nK)`.
//!
//! [`SolutionPath`] stores those breakpoints. [`SolutionPath::gain_at`]
//! interpolates the curve at any budget and [`SolutionPath::assignment_at`]
//! reconstructs the (at most one unit fractional) allocation behind any
//! point on it. [`threshold_policy`] builds the same allocations directly
//! from a ratio threshold, which is how the optimal rule is characterized;
//! the two routes agree and are cross-checked in the tests.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::QiniError;
use crate::hull::{compute_convex_hull, scan_into, ArmPoint, HullArm, HullScratch, HullSequence};

// ---------------------------------------------------------------------------
// Compensated accumulation
// ---------------------------------------------------------------------------

/// Neumaier-compensated running sum.
///
/// Spend and gain accumulate over up to nK signed increments; compensation
/// keeps bootstrap replicates reproducible across summation orders.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// ---------------------------------------------------------------------------
// EvalFrame
// ---------------------------------------------------------------------------

/// Per-unit test-set matrices: effect estimates, cost contrasts, and
/// evaluation scores for K treatment arms, plus unit weights.
///
/// All three matrices are `n x K`, row-major. Costs must be strictly
/// positive and finite; effects and scores finite. Weights default to 1;
/// the half-sampling bootstrap gives drawn units weight 2.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalFrame {
    n: usize,
    k: usize,
    tau_hat: Vec<f64>,
    cost: Vec<f64>,
    scores: Vec<f64>,
    weights: Vec<f64>,
    arm_labels: Vec<usize>,
    total_weight: f64,
}

impl EvalFrame {
    /// Builds a frame with unit weights and arm labels `1..=k`.
    pub fn new(
        n: usize,
        k: usize,
        tau_hat: Vec<f64>,
        cost: Vec<f64>,
        scores: Vec<f64>,
    ) -> Result<Self, QiniError> {
        Self::with_weights(n, k, tau_hat, cost, scores, vec![1.0; n])
    }

    /// Builds a frame with explicit unit weights.
    pub fn with_weights(
        n: usize,
        k: usize,
        tau_hat: Vec<f64>,
        cost: Vec<f64>,
        scores: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self, QiniError> {
        let labels = (1..=k).collect();
        Self::from_parts(n, k, tau_hat, cost, scores, weights, labels)
    }

    pub(crate) fn from_parts(
        n: usize,
        k: usize,
        tau_hat: Vec<f64>,
        cost: Vec<f64>,
        scores: Vec<f64>,
        weights: Vec<f64>,
        arm_labels: Vec<usize>,
    ) -> Result<Self, QiniError> {
        if n == 0 {
            return Err(QiniError::TooFewUnits { got: 0, min: 1 });
        }
        for (name, m) in [("tau_hat", &tau_hat), ("cost", &cost), ("scores", &scores)] {
            if m.len() != n * k {
                return Err(QiniError::DimensionMismatch {
                    what: name,
                    expected: n * k,
                    got: m.len(),
                });
            }
        }
        if weights.len() != n {
            return Err(QiniError::DimensionMismatch {
                what: "weights",
                expected: n,
                got: weights.len(),
            });
        }
        debug_assert_eq!(arm_labels.len(), k);
        for i in 0..n {
            for j in 0..k {
                let c = cost[i * k + j];
                if !(c.is_finite() && c > 0.0) {
                    return Err(QiniError::InvalidCost {
                        unit: i,
                        arm: arm_labels[j],
                        value: c,
                    });
                }
                if !tau_hat[i * k + j].is_finite() {
                    return Err(QiniError::NonFinite {
                        what: "tau_hat",
                        unit: i,
                        arm: arm_labels[j],
                    });
                }
                if !scores[i * k + j].is_finite() {
                    return Err(QiniError::NonFinite {
                        what: "scores",
                        unit: i,
                        arm: arm_labels[j],
                    });
                }
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(QiniError::InvalidWeight { unit: i, value: w });
            }
        }
        let mut tw = KahanSum::default();
        for &w in &weights {
            tw.add(w);
        }
        let total_weight = tw.value();
        Ok(Self {
            n,
            k,
            tau_hat,
            cost,
            scores,
            weights,
            arm_labels,
            total_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_arms(&self) -> usize {
        self.k
    }

    /// Original (1-based) labels of the arm columns; subsetting preserves
    /// them so events and assignments always report original arm ids.
    pub fn arm_labels(&self) -> &[usize] {
        &self.arm_labels
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn weight(&self, unit: usize) -> f64 {
        self.weights[unit]
    }

    #[inline]
    pub fn tau(&self, unit: usize, col: usize) -> f64 {
        self.tau_hat[unit * self.k + col]
    }

    #[inline]
    pub fn cost(&self, unit: usize, col: usize) -> f64 {
        self.cost[unit * self.k + col]
    }

    #[inline]
    pub fn score(&self, unit: usize, col: usize) -> f64 {
        self.scores[unit * self.k + col]
    }

    /// Restricts the frame to an arm subset, by original label.
    pub fn select_arms(&self, labels: &[usize]) -> Result<Self, QiniError> {
        if labels.is_empty() {
            return Err(QiniError::InvalidArmMask {
                reason: "mask is empty".to_string(),
            });
        }
        let mut cols = Vec::with_capacity(labels.len());
        for &l in labels {
            match self.arm_labels.iter().position(|&x| x == l) {
                Some(c) => {
                    if cols.contains(&c) {
                        return Err(QiniError::InvalidArmMask {
                            reason: format!("arm {l} listed twice"),
                        });
                    }
                    cols.push(c);
                }
                None => {
                    return Err(QiniError::InvalidArmMask {
                        reason: format!("unknown arm {l}"),
                    });
                }
            }
        }
        cols.sort_unstable();
        let k2 = cols.len();
        let pick = |m: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(self.n * k2);
            for i in 0..self.n {
                for &c in &cols {
                    out.push(m[i * self.k + c]);
                }
            }
            out
        };
        Self::from_parts(
            self.n,
            k2,
            pick(&self.tau_hat),
            pick(&self.cost),
            pick(&self.scores),
            self.weights.clone(),
            cols.iter().map(|&c| self.arm_labels[c]).collect(),
        )
    }

    /// Extracts the rows in `units`, scaling their weights by `weight_factor`
    /// (the half-sampling bootstrap passes 2).
    pub fn subset(&self, units: &[usize], weight_factor: f64) -> Result<Self, QiniError> {
        let m = units.len();
        let take = |src: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(m * self.k);
            for &u in units {
                out.extend_from_slice(&src[u * self.k..(u + 1) * self.k]);
            }
            out
        };
        Self::from_parts(
            m,
            self.k,
            take(&self.tau_hat),
            take(&self.cost),
            take(&self.scores),
            units.iter().map(|&u| self.weights[u] * weight_factor).collect(),
            self.arm_labels.clone(),
        )
    }

    /// The unit's hull on the (cost, effect) plane, with arms reported by
    /// original label.
    pub fn unit_hull(&self, unit: usize) -> HullSequence {
        let points: Vec<ArmPoint> = (0..self.k)
            .map(|j| ArmPoint {
                arm_id: self.arm_labels[j],
                cost: self.cost(unit, j),
                effect: self.tau(unit, j),
            })
            .collect();
        compute_convex_hull(unit, &points).expect("frame inputs are validated")
    }

    /// All hulls, indexed by column rather than label, flattened into one
    /// arena: unit `i` owns `arms[offsets[i]..offsets[i+1]]`.
    fn column_hulls(&self) -> FlatHulls {
        let mut offsets = Vec::with_capacity(self.n + 1);
        offsets.push(0u32);
        let mut arms = Vec::with_capacity(self.n * self.k.min(4));
        let mut scratch = HullScratch::with_capacity(self.k);
        for i in 0..self.n {
            scratch.candidates.clear();
            for j in 0..self.k {
                scratch.candidates.push(ArmPoint {
                    arm_id: j,
                    cost: self.cost(i, j),
                    effect: self.tau(i, j),
                });
            }
            scan_into(&mut scratch, &mut arms);
            offsets.push(arms.len() as u32);
        }
        FlatHulls { offsets, arms }
    }
}

struct FlatHulls {
    offsets: Vec<u32>,
    arms: Vec<HullArm>,
}

impl FlatHulls {
    #[inline]
    fn unit(&self, i: usize) -> &[HullArm] {
        &self.arms[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

// ---------------------------------------------------------------------------
// Solution path
// ---------------------------------------------------------------------------

/// One allocation breakpoint: after this event the policy spends `spend`
/// per unit and gains `gain` per unit (both weighted averages).
///
/// On an upgrade the previous arm's contributions were refunded before the
/// new arm's were added, so consecutive spends differ by the incremental
/// cost only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    pub unit_id: u32,
    /// Original arm label (1-based in CSV interfaces).
    pub arm_id: u32,
    pub spend: f64,
    pub gain: f64,
    /// Priority at which the event fired; non-increasing along the path.
    pub rho: f64,
    pub is_upgrade: bool,
}

/// The full sequence of allocation breakpoints up to `B_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub events: Vec<PathEvent>,
    /// True when the queue emptied before spend exceeded `B_max`: the curve
    /// has plateaued and is constant beyond the final event.
    pub complete: bool,
    pub n: usize,
    pub num_arms: usize,
    pub total_weight: f64,
}

/// One unit's share of an allocation: `fraction` of the unit (or of its
/// weight) receives `arm_id`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationEntry {
    pub unit_id: u32,
    pub arm_id: u32,
    pub fraction: f64,
}

/// The (possibly fractional) allocation at one budget. At most one unit in
/// the whole assignment is fractional; that unit carries at most two entries
/// with fractions summing to at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAssignment {
    pub entries: Vec<AllocationEntry>,
    pub budget: f64,
    pub realized_spend: f64,
}

impl PolicyAssignment {
    /// Weighted average of the allocation's evaluation scores,
    /// `sum_i w_i <pi_i, score_i> / sum_i w_i`.
    pub fn value(&self, frame: &EvalFrame) -> f64 {
        let mut acc = KahanSum::default();
        for e in &self.entries {
            let col = frame
                .arm_labels
                .iter()
                .position(|&l| l == e.arm_id as usize)
                .expect("assignment arm belongs to frame");
            acc.add(frame.weight(e.unit_id as usize) * e.fraction
                * frame.score(e.unit_id as usize, col));
        }
        acc.value() / frame.total_weight()
    }
}

#[derive(PartialEq)]
struct QueueEntry {
    rho: f64,
    unit: u32,
    hull_idx: u32,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: larger rho first; ties pop the lower unit id first.
        self.rho
            .total_cmp(&other.rho)
            .then_with(|| other.unit.cmp(&self.unit))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Traces the allocation sequence up to `b_max` (weighted average spend per
/// unit).
///
/// The first event whose spend exceeds `b_max` is still recorded — it is the
/// segment on which any budget in between is interpolated — and the path is
/// marked incomplete. A frame whose hulls are all empty yields an empty,
/// complete path.
pub fn compute_path(frame: &EvalFrame, b_max: f64) -> Result<SolutionPath, QiniError> {
    if !(b_max.is_finite() && b_max > 0.0) {
        return Err(QiniError::InvalidBudget { value: b_max });
    }
    let hulls = frame.column_hulls();
    let total_weight = frame.total_weight();

    let mut heap: BinaryHeap<QueueEntry> = BinaryHeap::with_capacity(frame.n());
    for i in 0..frame.n() {
        if let Some(first) = hulls.unit(i).first() {
            heap.push(QueueEntry {
                rho: first.rho,
                unit: i as u32,
                hull_idx: 0,
            });
        }
    }

    let mut events = Vec::with_capacity(hulls.arms.len());
    let mut spend = KahanSum::default();
    let mut gain = KahanSum::default();
    let mut complete = true;

    while let Some(entry) = heap.pop() {
        let unit = entry.unit as usize;
        let idx = entry.hull_idx as usize;
        let unit_arms = hulls.unit(unit);
        let arm = &unit_arms[idx];
        let w = frame.weight(unit);
        let is_upgrade = idx > 0;
        if is_upgrade {
            let prev = &unit_arms[idx - 1];
            spend.add(-w * prev.cost / total_weight);
            gain.add(-w * frame.score(unit, prev.arm_id) / total_weight);
        }
        spend.add(w * arm.cost / total_weight);
        gain.add(w * frame.score(unit, arm.arm_id) / total_weight);
        events.push(PathEvent {
            unit_id: entry.unit,
            arm_id: frame.arm_labels[arm.arm_id] as u32,
            spend: spend.value(),
            gain: gain.value(),
            rho: entry.rho,
            is_upgrade,
        });
        if spend.value() > b_max {
            complete = false;
            break;
        }
        if idx + 1 < unit_arms.len() {
            heap.push(QueueEntry {
                rho: unit_arms[idx + 1].rho,
                unit: entry.unit,
                hull_idx: (idx + 1) as u32,
            });
        }
    }

    Ok(SolutionPath {
        events,
        complete,
        n: frame.n(),
        num_arms: frame.num_arms(),
        total_weight,
    })
}

impl SolutionPath {
    /// Spend after the final event, 0 for an empty path.
    pub fn final_spend(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.spend)
    }

    /// Gain after the final event, 0 for an empty path.
    pub fn final_gain(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.gain)
    }

    /// Piecewise-linear interpolation of cumulative gain in cumulative spend.
    ///
    /// Returns 0 at or below budget 0 (nobody is treated) and the final gain
    /// beyond the final event (the plateau of a complete path, or the last
    /// recorded value of a truncated one).
    pub fn gain_at(&self, budget: f64) -> f64 {
        if budget <= 0.0 || self.events.is_empty() {
            return 0.0;
        }
        let j = self.events.partition_point(|e| e.spend <= budget);
        if j == self.events.len() {
            return self.final_gain();
        }
        let (s0, g0) = if j == 0 {
            (0.0, 0.0)
        } else {
            (self.events[j - 1].spend, self.events[j - 1].gain)
        };
        let e = &self.events[j];
        g0 + (budget - s0) / (e.spend - s0) * (e.gain - g0)
    }

    /// Reconstructs the allocation at `budget` by replaying events.
    ///
    /// Events with spend at most `budget` are applied in full; the first
    /// event that would overshoot is applied fractionally, splitting the
    /// unit between its previous arm (if any) and the event's arm. Beyond
    /// the final event the allocation is the final integer one.
    ///
    /// `frame` must be the frame the path was computed from.
    pub fn assignment_at(
        &self,
        frame: &EvalFrame,
        budget: f64,
    ) -> Result<PolicyAssignment, QiniError> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(QiniError::InvalidBudget { value: budget });
        }
        debug_assert_eq!(frame.n(), self.n);
        debug_assert_eq!(frame.num_arms(), self.num_arms);

        let mut current: Vec<Option<u32>> = vec![None; self.n];
        let mut fractional: Option<(u32, Option<u32>, u32, f64)> = None;
        let mut realized = 0.0;
        let mut prev_spend = 0.0;
        for e in &self.events {
            if e.spend <= budget {
                current[e.unit_id as usize] = Some(e.arm_id);
                realized = e.spend;
                prev_spend = e.spend;
            } else {
                let c = (budget - prev_spend) / (e.spend - prev_spend);
                if c > 0.0 {
                    let old = current[e.unit_id as usize];
                    fractional = Some((e.unit_id, old, e.arm_id, c));
                    realized = budget;
                }
                break;
            }
        }

        let mut entries = Vec::new();
        for (unit, arm) in current.iter().enumerate() {
            if let Some(arm_id) = arm {
                let mut fraction = 1.0;
                if let Some((fu, _, _, c)) = fractional {
                    if fu as usize == unit {
                        fraction = 1.0 - c;
                    }
                }
                entries.push(AllocationEntry {
                    unit_id: unit as u32,
                    arm_id: *arm_id,
                    fraction,
                });
            }
        }
        if let Some((unit, old, new_arm, c)) = fractional {
            // A fresh fractional allocation has no previous entry to shrink.
            if old.is_none() {
                debug_assert!(current[unit as usize].is_none());
            }
            entries.push(AllocationEntry {
                unit_id: unit,
                arm_id: new_arm,
                fraction: c,
            });
        }
        entries.sort_by_key(|e| (e.unit_id, e.arm_id));
        Ok(PolicyAssignment {
            entries,
            budget,
            realized_spend: realized,
        })
    }
}

// ---------------------------------------------------------------------------
// Thresholding rule
// ---------------------------------------------------------------------------

/// Builds the allocation selected by a ratio threshold directly.
///
/// Per unit, the hull arm whose rho interval straddles `lambda` is assigned
/// in full; at an exact tie `rho_j == lambda` the unit splits between arm
/// `j` (fraction `c`) and its predecessor on the hull (fraction `1 - c`,
/// omitted when the predecessor is the control). The assignment's `budget`
/// field is set to its realized spend.
pub fn threshold_policy(
    frame: &EvalFrame,
    lambda: f64,
    c: f64,
) -> Result<PolicyAssignment, QiniError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(QiniError::InvalidThreshold {
            what: "lambda",
            value: lambda,
        });
    }
    if !(c.is_finite() && (0.0..1.0).contains(&c)) {
        return Err(QiniError::InvalidThreshold {
            what: "interpolation value c",
            value: c,
        });
    }

    let mut entries = Vec::new();
    let mut spend = KahanSum::default();
    for unit in 0..frame.n() {
        let hull = frame.unit_hull(unit);
        if hull.is_empty() {
            continue;
        }
        let w = frame.weight(unit);
        let arms = &hull.arms;
        if let Some(j) = arms.iter().position(|a| a.rho == lambda) {
            if c > 0.0 {
                entries.push(AllocationEntry {
                    unit_id: unit as u32,
                    arm_id: arms[j].arm_id as u32,
                    fraction: c,
                });
                spend.add(w * c * arms[j].cost);
            }
            if j > 0 {
                entries.push(AllocationEntry {
                    unit_id: unit as u32,
                    arm_id: arms[j - 1].arm_id as u32,
                    fraction: 1.0 - c,
                });
                spend.add(w * (1.0 - c) * arms[j - 1].cost);
            }
        } else {
            // rho strictly decreases, so the arms above lambda are a prefix;
            // its last element is the assigned arm.
            let above = arms.partition_point(|a| a.rho > lambda);
            if above > 0 {
                entries.push(AllocationEntry {
                    unit_id: unit as u32,
                    arm_id: arms[above - 1].arm_id as u32,
                    fraction: 1.0,
                });
                spend.add(w * arms[above - 1].cost);
            }
        }
    }
    entries.sort_by_key(|e| (e.unit_id, e.arm_id));
    let realized = spend.value() / frame.total_weight();
    Ok(PolicyAssignment {
        entries,
        budget: realized,
        realized_spend: realized,
    })
}
