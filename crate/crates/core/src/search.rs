//! Construction of optimal and near-optimal rejection regions.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt::{self, Debug, Write as _};

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::model::{ratio_to_f64, Alpha};
use crate::region::{evaluate, Criterion, Objective, ObjectiveValue, RejectionRegion};

pub const DEFAULT_MAX_ITER: u64 = 500_000;

/// Scale applied to alternative masses before they enter integer arithmetic.
const POWER_SCALE_BITS: i32 = 100;

/// Outcome of the reduction of the search space.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessResult {
    /// Positions surviving the removal step.
    pub v1: FixedBitSet,
    /// Positions left to decide.
    pub v2: FixedBitSet,
    /// Positions contained in every optimal region.
    pub forced: FixedBitSet,
    /// Null weight available for the points in `v2`.
    pub residual: BigUint,
    /// `floor(alpha * total)`.
    pub capacity: BigUint,
    pub total: BigUint,
}

impl PreprocessResult {
    pub fn residual_alpha(&self) -> Ratio<BigUint> {
        Ratio::new(self.residual.clone(), self.total.clone())
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.v1.count_ones(..), self.v2.count_ones(..))
    }
}

/// Remove points that cannot belong to a level-`alpha` region and force points
/// that belong to every optimal one. `forbidden` must be down-closed.
pub fn preprocess(
    dist: &JointDistribution,
    alpha: &Alpha,
    forbidden: Option<&FixedBitSet>,
) -> PreprocessResult {
    let n = dist.len();
    let dom = dist.dominance();
    let capacity = alpha.capacity(&dist.total);
    let weight_of = |set: &FixedBitSet| -> BigUint {
        set.ones()
            .fold(BigUint::zero(), |acc, i| acc + &dist.points[i].weight)
    };

    let mut v0 = FixedBitSet::with_capacity(n);
    v0.insert_range(..);
    if let Some(b) = forbidden {
        v0.difference_with(b);
    }

    let mut v1 = FixedBitSet::with_capacity(n);
    for i in v0.ones() {
        if weight_of(dom.up(i)) <= capacity {
            v1.insert(i);
        }
    }

    let v1_weight = weight_of(&v1);
    let mut forced = FixedBitSet::with_capacity(n);
    for i in v1.ones() {
        let below = dom
            .down(i)
            .intersection(&v1)
            .fold(BigUint::zero(), |acc, j| acc + &dist.points[j].weight);
        let outside = &v1_weight - &below;
        if outside + &dist.points[i].weight <= capacity {
            forced.insert(i);
        }
    }
    let mut v2 = v1.clone();
    v2.difference_with(&forced);
    let forced_weight = weight_of(&forced);
    let residual = if forced_weight <= capacity {
        &capacity - &forced_weight
    } else {
        BigUint::zero()
    };
    PreprocessResult {
        v1,
        v2,
        forced,
        residual,
        capacity,
        total: dist.total.clone(),
    }
}

/// Result of an optimization run.
#[derive(Clone, Debug)]
pub struct OptResult {
    pub region: RejectionRegion,
    pub iterations: u64,
    pub confirmed_optimal: bool,
    pub objective_value: Vec<ObjectiveValue>,
    pub v1: usize,
    pub v2: usize,
}

/// Non-negative integer arithmetic used inside the search.
trait Mass: Clone + Ord + Debug {
    fn nil() -> Self;
    fn from_big(b: &BigUint) -> Self;
    fn from_u128(x: u128) -> Self;
    fn add(&mut self, other: &Self);
    fn sub(&mut self, other: &Self);
    fn to_f64(&self) -> f64;
}

impl Mass for u128 {
    fn nil() -> Self {
        0
    }
    fn from_big(b: &BigUint) -> Self {
        b.to_u128().expect("weight exceeds 128 bits")
    }
    fn from_u128(x: u128) -> Self {
        x
    }
    fn add(&mut self, other: &Self) {
        *self += *other;
    }
    fn sub(&mut self, other: &Self) {
        *self -= *other;
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Mass for BigUint {
    fn nil() -> Self {
        Zero::zero()
    }
    fn from_big(b: &BigUint) -> Self {
        b.clone()
    }
    fn from_u128(x: u128) -> Self {
        BigUint::from(x)
    }
    fn add(&mut self, other: &Self) {
        *self += other;
    }
    fn sub(&mut self, other: &Self) {
        *self -= other;
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::INFINITY)
    }
}

fn quantize_power(a: f64) -> u128 {
    let scaled = (a.max(0.0) * 2f64.powi(POWER_SCALE_BITS)).floor();
    scaled as u128
}

/// Search problem over the free variables, in canonical order.
struct Problem<M> {
    n: usize,
    weights: Vec<M>,
    /// `coef[c][j]` for each criterion of the objective.
    coef: Vec<Vec<M>>,
    primary: Criterion,
    /// Local up-sets and down-sets, including the point itself.
    up: Vec<FixedBitSet>,
    down: Vec<FixedBitSet>,
    residual: M,
    /// Variables sorted by decreasing primary coefficient per unit weight.
    ratio_order: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Node<M> {
    decided_in: FixedBitSet,
    decided_out: FixedBitSet,
    committed: M,
    lower: Vec<M>,
    upper: Vec<M>,
    depth: usize,
    seq: u64,
}

impl<M: Mass> PartialEq for Node<M> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<M: Mass> Eq for Node<M> {}

impl<M: Mass> PartialOrd for Node<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<M: Mass> Ord for Node<M> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lower
            .cmp(&other.lower)
            .then(self.depth.cmp(&other.depth))
            .then(Reverse(self.seq).cmp(&Reverse(other.seq)))
    }
}

impl<M: Mass> Problem<M> {
    fn new(
        dist: &JointDistribution,
        vars: &[usize],
        objective: &Objective,
        residual: &BigUint,
    ) -> Self {
        let n = vars.len();
        let weights: Vec<M> = vars
            .iter()
            .map(|&i| M::from_big(&dist.points[i].weight))
            .collect();
        let coef: Vec<Vec<M>> = objective
            .criteria()
            .iter()
            .map(|c| match c {
                Criterion::Alpha => weights.clone(),
                Criterion::Area => vec![M::from_u128(1); n],
                Criterion::Power => vars
                    .iter()
                    .map(|&i| M::from_u128(quantize_power(dist.points[i].alt.unwrap_or(0.0))))
                    .collect(),
            })
            .collect();
        let dom = dist.dominance();
        let mut up = vec![FixedBitSet::with_capacity(n); n];
        let mut down = vec![FixedBitSet::with_capacity(n); n];
        for a in 0..n {
            for b in 0..n {
                if dom.up(vars[a]).contains(vars[b]) {
                    up[a].insert(b);
                    down[b].insert(a);
                }
            }
        }
        let primary = objective.primary();
        let mut ratio_order: Vec<usize> = (0..n).collect();
        match primary {
            Criterion::Alpha => {}
            Criterion::Area => ratio_order.reverse(),
            Criterion::Power => {
                let score = |j: usize| -> f64 {
                    let w = weights[j].to_f64();
                    let c = coef[0][j].to_f64();
                    if w > 0.0 {
                        c / w
                    } else {
                        f64::INFINITY
                    }
                };
                ratio_order.sort_by(|&a, &b| {
                    score(b)
                        .partial_cmp(&score(a))
                        .unwrap_or(Ordering::Equal)
                        .then(a.cmp(&b))
                });
            }
        }
        Problem {
            n,
            weights,
            coef,
            primary,
            up,
            down,
            residual: M::from_big(residual),
            ratio_order,
        }
    }

    fn value(&self, set: &FixedBitSet) -> Vec<M> {
        self.coef
            .iter()
            .map(|c| {
                let mut v = M::nil();
                for j in set.ones() {
                    v.add(&c[j]);
                }
                v
            })
            .collect()
    }

    fn bounds(&self, node: &mut Node<M>) {
        let mut open = FixedBitSet::with_capacity(self.n);
        open.insert_range(..);
        open.difference_with(&node.decided_in);
        open.difference_with(&node.decided_out);
        node.lower = self.value(&node.decided_in);
        let mut all = node.decided_in.clone();
        all.union_with(&open);
        let mut upper = self.value(&all);

        let mut room = self.residual.clone();
        room.sub(&node.committed);
        let knap = match self.primary {
            Criterion::Alpha => {
                let mut open_weight = M::nil();
                for j in open.ones() {
                    open_weight.add(&self.weights[j]);
                }
                let mut b = node.lower[0].clone();
                b.add(if open_weight < room {
                    &open_weight
                } else {
                    &room
                });
                b
            }
            Criterion::Area | Criterion::Power => {
                let mut b = node.lower[0].clone();
                for &j in &self.ratio_order {
                    if !open.contains(j) {
                        continue;
                    }
                    if self.weights[j] <= room {
                        room.sub(&self.weights[j]);
                        b.add(&self.coef[0][j]);
                    } else {
                        if self.primary == Criterion::Power {
                            let frac = room.to_f64() / self.weights[j].to_f64();
                            let part =
                                (self.coef[0][j].to_f64() * frac * (1.0 + 1e-9)).ceil() + 1.0;
                            let part = M::from_u128(part as u128);
                            b.add(if part < self.coef[0][j] {
                                &part
                            } else {
                                &self.coef[0][j]
                            });
                        }
                        break;
                    }
                }
                b
            }
        };
        if knap < upper[0] {
            upper[0] = knap;
        }
        node.upper = upper;
    }

    fn first_open(&self, node: &Node<M>) -> Option<usize> {
        (0..self.n).find(|&j| !node.decided_in.contains(j) && !node.decided_out.contains(j))
    }

    fn solve(&self, max_iter: u64) -> (FixedBitSet, u64, bool) {
        let mut seq = 0u64;
        let mut root = Node {
            decided_in: FixedBitSet::with_capacity(self.n),
            decided_out: FixedBitSet::with_capacity(self.n),
            committed: M::nil(),
            lower: Vec::new(),
            upper: Vec::new(),
            depth: 0,
            seq,
        };
        self.bounds(&mut root);
        let mut best = root.lower.clone();
        let mut incumbent = root.decided_in.clone();
        let mut heap = BinaryHeap::new();
        if root.upper > best {
            heap.push(root);
        }
        let mut iterations = 0u64;
        let mut confirmed = true;
        while let Some(node) = heap.pop() {
            if node.upper <= best {
                continue;
            }
            if iterations >= max_iter {
                confirmed = false;
                break;
            }
            iterations += 1;
            let Some(pivot) = self.first_open(&node) else {
                continue;
            };

            let mut children = Vec::with_capacity(2);
            let mut added = self.up[pivot].clone();
            added.difference_with(&node.decided_in);
            let mut committed = node.committed.clone();
            for j in added.ones() {
                committed.add(&self.weights[j]);
            }
            if committed <= self.residual {
                let mut decided_in = node.decided_in.clone();
                decided_in.union_with(&added);
                children.push(Node {
                    depth: node.depth + added.count_ones(..),
                    decided_in,
                    decided_out: node.decided_out.clone(),
                    committed,
                    lower: Vec::new(),
                    upper: Vec::new(),
                    seq: 0,
                });
            }
            let mut removed = self.down[pivot].clone();
            removed.difference_with(&node.decided_out);
            let mut decided_out = node.decided_out.clone();
            decided_out.union_with(&removed);
            children.push(Node {
                depth: node.depth + removed.count_ones(..),
                decided_in: node.decided_in.clone(),
                decided_out,
                committed: node.committed.clone(),
                lower: Vec::new(),
                upper: Vec::new(),
                seq: 0,
            });

            for mut child in children {
                seq += 1;
                child.seq = seq;
                self.bounds(&mut child);
                if child.lower > best {
                    best = child.lower.clone();
                    incumbent = child.decided_in.clone();
                }
                if child.depth < self.n && child.upper > best {
                    heap.push(child);
                }
            }
        }
        (incumbent, iterations, confirmed)
    }
}

fn mass_fits_u128(total: &BigUint) -> bool {
    total.bits() <= 126
}

fn check_objective(dist: &JointDistribution, objective: &Objective) -> Result<()> {
    if objective.needs_alternative() && !dist.has_alt() {
        return Err(Error::MissingAlternative);
    }
    Ok(())
}

/// Optimize `vars` at a level budget of `residual`, returning chosen positions.
fn optimize_free(
    dist: &JointDistribution,
    vars: &[usize],
    objective: &Objective,
    residual: &BigUint,
    max_iter: u64,
) -> (Vec<usize>, u64, bool) {
    let (chosen, iterations, confirmed) = if mass_fits_u128(&dist.total) {
        Problem::<u128>::new(dist, vars, objective, residual).solve(max_iter)
    } else {
        Problem::<BigUint>::new(dist, vars, objective, residual).solve(max_iter)
    };
    (
        chosen.ones().map(|j| vars[j]).collect(),
        iterations,
        confirmed,
    )
}

fn finish(
    dist: &JointDistribution,
    objective: &Objective,
    members: FixedBitSet,
    iterations: u64,
    confirmed: bool,
    pre: &PreprocessResult,
) -> Result<OptResult> {
    let region = RejectionRegion::from_members(dist, members);
    let objective_value = objective
        .criteria()
        .iter()
        .map(|&c| evaluate(&region, c, dist))
        .collect::<Result<Vec<_>>>()?;
    let (v1, v2) = pre.counts();
    Ok(OptResult {
        region,
        iterations,
        confirmed_optimal: confirmed,
        objective_value,
        v1,
        v2,
    })
}

/// Exact branch and bound for a monotone objective over up-closed level-`alpha` regions.
/// Points in `forbidden` (a down-closed set) are never rejected.
pub fn branch_and_bound(
    dist: &JointDistribution,
    objective: &Objective,
    alpha: &Alpha,
    forbidden: Option<&FixedBitSet>,
    max_iter: u64,
) -> Result<OptResult> {
    check_objective(dist, objective)?;
    let pre = preprocess(dist, alpha, forbidden);
    let vars: Vec<usize> = pre.v2.ones().collect();
    let (chosen, iterations, confirmed) =
        optimize_free(dist, &vars, objective, &pre.residual, max_iter);
    let mut members = pre.forced.clone();
    members.extend(chosen);
    finish(dist, objective, members, iterations, confirmed, &pre)
}

/// Search space without the reduction step: every non-forbidden point is free.
pub fn unreduced(
    dist: &JointDistribution,
    alpha: &Alpha,
    forbidden: Option<&FixedBitSet>,
) -> PreprocessResult {
    let n = dist.len();
    let capacity = alpha.capacity(&dist.total);
    let mut all = FixedBitSet::with_capacity(n);
    all.insert_range(..);
    if let Some(b) = forbidden {
        all.difference_with(b);
    }
    PreprocessResult {
        v1: all.clone(),
        v2: all,
        forced: FixedBitSet::with_capacity(n),
        residual: capacity.clone(),
        capacity,
        total: dist.total.clone(),
    }
}

/// Branch and bound over the full support without the reduction step.
pub fn branch_and_bound_unreduced(
    dist: &JointDistribution,
    objective: &Objective,
    alpha: &Alpha,
    forbidden: Option<&FixedBitSet>,
    max_iter: u64,
) -> Result<OptResult> {
    check_objective(dist, objective)?;
    let pre = unreduced(dist, alpha, forbidden);
    let vars: Vec<usize> = pre.v2.ones().collect();
    let (chosen, iterations, confirmed) =
        optimize_free(dist, &vars, objective, &pre.residual, max_iter);
    let mut members = FixedBitSet::with_capacity(dist.len());
    members.extend(chosen);
    finish(dist, objective, members, iterations, confirmed, &pre)
}

/// Direction of the one-step choice in the greedy construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyOp {
    Argmin,
    Argmax,
}

/// Grow a region one point at a time, keeping it up-closed and within level,
/// choosing the point whose addition changes `criterion` least (`Argmin`) or
/// most (`Argmax`). Ties go to the earlier canonical position.
pub fn greedy_region(
    dist: &JointDistribution,
    criterion: Criterion,
    op: GreedyOp,
    alpha: &Alpha,
) -> Result<RejectionRegion> {
    Ok(greedy_steps(dist, criterion, op, alpha, None)?
        .pop()
        .unwrap_or_else(|| RejectionRegion::empty(dist)))
}

/// Every intermediate region of the greedy construction, starting with the empty set.
/// Points in `forbidden` (a down-closed set) are never added.
pub fn greedy_steps(
    dist: &JointDistribution,
    criterion: Criterion,
    op: GreedyOp,
    alpha: &Alpha,
    forbidden: Option<&FixedBitSet>,
) -> Result<Vec<RejectionRegion>> {
    if criterion == Criterion::Power && !dist.has_alt() {
        return Err(Error::MissingAlternative);
    }
    let n = dist.len();
    let dom = dist.dominance();
    let capacity = alpha.capacity(&dist.total);
    let mut members = FixedBitSet::with_capacity(n);
    let mut weight = BigUint::zero();
    let mut above: Vec<usize> = (0..n).map(|i| dom.up(i).count_ones(..) - 1).collect();
    let mut steps = vec![RejectionRegion::empty(dist)];
    loop {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if members.contains(i) || above[i] != 0 || forbidden.is_some_and(|b| b.contains(i)) {
                continue;
            }
            if &weight + &dist.points[i].weight > capacity {
                continue;
            }
            pick = match pick {
                None => Some(i),
                Some(p) => {
                    let ord = match criterion {
                        Criterion::Alpha => dist.points[i].weight.cmp(&dist.points[p].weight),
                        Criterion::Area => Ordering::Equal,
                        Criterion::Power => dist.points[i]
                            .alt
                            .unwrap_or(0.0)
                            .partial_cmp(&dist.points[p].alt.unwrap_or(0.0))
                            .unwrap_or(Ordering::Equal),
                    };
                    let better = match op {
                        GreedyOp::Argmin => ord == Ordering::Less,
                        GreedyOp::Argmax => ord == Ordering::Greater,
                    };
                    if better {
                        Some(i)
                    } else {
                        Some(p)
                    }
                }
            };
        }
        let Some(i) = pick else { break };
        members.insert(i);
        weight += &dist.points[i].weight;
        for j in dom.down(i).ones() {
            if j != i {
                above[j] -= 1;
            }
        }
        steps.push(RejectionRegion::from_members(dist, members.clone()));
    }
    Ok(steps)
}

/// Near-optimal search that sets aside the lightest points of the reduced space.
#[derive(Clone, Debug)]
pub struct SplitResult {
    pub result: OptResult,
    /// Positions set aside before the search.
    pub small: FixedBitSet,
    pub small_weight: BigUint,
}

/// Set aside the lightest points of the reduced space with total probability at
/// most `c`, optimize the rest at the correspondingly lower level, then add the
/// set-aside points back wherever up-closure allows.
pub fn small_prob_split(
    dist: &JointDistribution,
    objective: &Objective,
    alpha: &Alpha,
    c: &Ratio<BigUint>,
    forbidden: Option<&FixedBitSet>,
    max_iter: u64,
) -> Result<SplitResult> {
    check_objective(dist, objective)?;
    let pre = preprocess(dist, alpha, forbidden);
    let c_cap = (&dist.total * c.numer()) / c.denom();
    let vars: Vec<usize> = pre.v2.ones().collect();

    // Canonical order is by decreasing weight, so the lightest points sit at the end.
    let mut cut = vars.len();
    let mut small_weight = BigUint::zero();
    let mut best_cut = vars.len();
    let mut best_weight = BigUint::zero();
    while cut > 0 {
        let w = &dist.points[vars[cut - 1]].weight;
        if &small_weight + w > c_cap {
            break;
        }
        small_weight += w;
        cut -= 1;
        let separated = cut == 0 || dist.points[vars[cut - 1]].weight > *w;
        if separated {
            best_cut = cut;
            best_weight = small_weight.clone();
        }
    }
    let (large, small) = vars.split_at(best_cut);
    let budget = if pre.residual >= best_weight {
        &pre.residual - &best_weight
    } else {
        BigUint::zero()
    };
    let dom = dist.dominance();
    let mut small_set = FixedBitSet::with_capacity(dist.len());
    small_set.extend(small.iter().copied());
    // Large points dominated by a small point cannot enter the search without it.
    let (free, deferred): (Vec<usize>, Vec<usize>) = large
        .iter()
        .partition(|&&i| dom.up(i).is_disjoint(&small_set));
    let (chosen, iterations, confirmed) = optimize_free(dist, &free, objective, &budget, max_iter);
    let mut members = pre.forced.clone();
    members.extend(chosen);

    let mut weight = members
        .ones()
        .fold(BigUint::zero(), |acc, i| acc + &dist.points[i].weight);
    let mut pending: Vec<usize> = small.iter().chain(&deferred).copied().collect();
    pending.sort_unstable();
    loop {
        let before = pending.len();
        pending.retain(|&i| {
            let mut strict_up = dom.up(i).clone();
            strict_up.set(i, false);
            if !strict_up.is_subset(&members) {
                return true;
            }
            if &weight + &dist.points[i].weight <= pre.capacity {
                members.insert(i);
                weight += &dist.points[i].weight;
            }
            false
        });
        if pending.len() == before {
            break;
        }
    }
    Ok(SplitResult {
        result: finish(dist, objective, members, iterations, confirmed, &pre)?,
        small: small_set,
        small_weight: best_weight,
    })
}

/// Coefficient format of an exported model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpNumbers {
    /// Null weights and capacity as exact integers.
    #[default]
    Integer,
    /// Probabilities with 18 significant digits.
    Decimal,
}

impl fmt::Display for LpNumbers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpNumbers::Integer => "integer",
            LpNumbers::Decimal => "decimal",
        })
    }
}

/// Decimal expansion of `num/den` with `digits` significant digits.
pub fn decimal_digits(num: &BigUint, den: &BigUint, digits: usize) -> String {
    if num.is_zero() {
        return "0".into();
    }
    let int_part = num / den;
    if !int_part.is_zero() {
        let s = int_part.to_string();
        if s.len() >= digits {
            return s;
        }
        let mut rem = num % den;
        let mut frac = String::new();
        for _ in 0..digits - s.len() {
            rem *= 10u32;
            frac.push_str(&(&rem / den).to_string());
            rem %= den;
        }
        let frac = frac.trim_end_matches('0');
        return if frac.is_empty() {
            s
        } else {
            format!("{s}.{frac}")
        };
    }
    let mut rem = num.clone();
    let mut out = String::from("0.");
    let mut significant = 0;
    while significant < digits {
        rem *= 10u32;
        let digit = &rem / den;
        rem %= den;
        if significant > 0 || !digit.is_zero() {
            significant += 1;
        }
        out.push_str(&digit.to_string());
        if rem.is_zero() {
            break;
        }
    }
    out
}

fn lp_name(t: &[u32]) -> String {
    let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
    format!("x_{}", parts.join("_"))
}

pub(crate) fn lp_sum(terms: &[(String, String)]) -> String {
    let mut out = String::new();
    for (n, (c, v)) in terms.iter().enumerate() {
        if n > 0 {
            out.push_str(" + ");
        }
        if c == "1" {
            out.push_str(v);
        } else {
            let _ = write!(out, "{c} {v}");
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Wrap long rows at term boundaries.
pub(crate) fn wrap(line: &str) -> String {
    let body = line.trim_start();
    let mut out = line[..line.len() - body.len()].to_string();
    let mut len = out.len();
    for token in body.split(' ') {
        if len > 0 && len + token.len() > 240 && (token == "+" || token == "-") {
            out.push_str("\n   ");
            len = 3;
        } else if len > 0 && !out.ends_with(' ') {
            out.push(' ');
            len += 1;
        }
        out.push_str(token);
        len += token.len();
    }
    out
}

/// Binary program of the region search in LP text format.
pub fn export_ilp(
    dist: &JointDistribution,
    objective: &Objective,
    alpha: &Alpha,
    forbidden: Option<&FixedBitSet>,
    numbers: LpNumbers,
    reduce: bool,
) -> Result<String> {
    if objective.criteria().len() != 1 {
        return Err(Error::NonLinearObjective(objective.to_string()));
    }
    check_objective(dist, objective)?;
    let criterion = objective.primary();
    let pre = if reduce {
        preprocess(dist, alpha, forbidden)
    } else {
        unreduced(dist, alpha, forbidden)
    };
    let vars: Vec<usize> = pre.v2.ones().collect();
    let names: Vec<String> = vars.iter().map(|&i| lp_name(&dist.points[i].t)).collect();
    let level_coef = |i: usize| match numbers {
        LpNumbers::Integer => dist.points[i].weight.to_string(),
        LpNumbers::Decimal => decimal_digits(&dist.points[i].weight, &dist.total, 18),
    };

    let objective_terms: Vec<(String, String)> = vars
        .iter()
        .zip(&names)
        .map(|(&i, name)| {
            let c = match criterion {
                Criterion::Alpha => level_coef(i),
                Criterion::Area => "1".to_string(),
                Criterion::Power => format!("{:.17e}", dist.points[i].alt.unwrap_or(0.0)),
            };
            (c, name.clone())
        })
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "\\ objective: {criterion}");
    let _ = writeln!(out, "\\ alpha: {alpha}");
    let _ = writeln!(
        out,
        "\\ support: {} points, {} free, {} forced",
        dist.len(),
        vars.len(),
        pre.forced.count_ones(..)
    );
    let _ = writeln!(out, "\\ coefficients: {numbers}");
    out.push_str("maximize\n");
    let _ = writeln!(
        out,
        "{}",
        wrap(&format!(" obj: {}", lp_sum(&objective_terms)))
    );
    out.push_str("st\n");
    let knapsack: Vec<(String, String)> = vars
        .iter()
        .zip(&names)
        .map(|(&i, name)| (level_coef(i), name.clone()))
        .collect();
    let rhs = match numbers {
        LpNumbers::Integer => pre.residual.to_string(),
        LpNumbers::Decimal => decimal_digits(&pre.residual, &dist.total, 18),
    };
    let _ = writeln!(
        out,
        "{}",
        wrap(&format!(" level: {} <= {rhs}", lp_sum(&knapsack)))
    );

    let dom = dist.dominance();
    for (a, &i) in vars.iter().enumerate() {
        let above: Vec<usize> = (0..vars.len())
            .filter(|&b| b != a && dom.up(i).contains(vars[b]))
            .collect();
        if above.is_empty() {
            continue;
        }
        let mut row = if above.len() == 1 {
            format!(" up_{}: {}", &names[a][2..], names[a])
        } else {
            format!(" up_{}: {} {}", &names[a][2..], above.len(), names[a])
        };
        for b in above {
            let _ = write!(row, " - {}", names[b]);
        }
        row.push_str(" <= 0");
        let _ = writeln!(out, "{}", wrap(&row));
    }
    out.push_str("bin\n");
    for name in &names {
        let _ = writeln!(out, " {name}");
    }
    out.push_str("end\n");
    Ok(out)
}

/// Level of a region as a float, for reports.
pub fn level_f64(weight: &BigUint, total: &BigUint) -> f64 {
    ratio_to_f64(weight, total)
}
