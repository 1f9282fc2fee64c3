//! Rejection regions on the support lattice.
//!
//! A region is a set of support points that is up-closed under the
//! componentwise order and whose null probability does not exceed the level.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::model::{ratio_to_f64, Alpha};

/// `t_a >= t_b` componentwise.
#[inline]
pub fn dominates(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Up- and down-sets of every support point, indexed by canonical position.
#[derive(Clone, Debug)]
pub struct Dominance {
    up: Vec<FixedBitSet>,
    down: Vec<FixedBitSet>,
}

impl Dominance {
    pub fn new(dist: &JointDistribution) -> Self {
        let n = dist.len();
        let mut up = vec![FixedBitSet::with_capacity(n); n];
        let mut down = vec![FixedBitSet::with_capacity(n); n];
        for i in 0..n {
            let ti = &dist.points[i].t;
            for j in 0..n {
                if dominates(&dist.points[j].t, ti) {
                    up[i].insert(j);
                    down[j].insert(i);
                }
            }
        }
        Dominance { up, down }
    }

    /// Points `j` with `t_j >= t_i`, including `i`.
    pub fn up(&self, i: usize) -> &FixedBitSet {
        &self.up[i]
    }

    /// Points `j` with `t_j <= t_i`, including `i`.
    pub fn down(&self, i: usize) -> &FixedBitSet {
        &self.down[i]
    }

    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }
}

/// An up-closed candidate region over the canonical support order of a distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct RejectionRegion {
    members: FixedBitSet,
    weight: BigUint,
    total: BigUint,
    power: Option<f64>,
}

impl RejectionRegion {
    pub fn empty(dist: &JointDistribution) -> Self {
        Self::from_members(dist, FixedBitSet::with_capacity(dist.len()))
    }

    pub fn full(dist: &JointDistribution) -> Self {
        let mut m = FixedBitSet::with_capacity(dist.len());
        m.insert_range(..);
        Self::from_members(dist, m)
    }

    pub fn from_members(dist: &JointDistribution, members: FixedBitSet) -> Self {
        let weight = members
            .ones()
            .fold(BigUint::zero(), |acc, i| acc + &dist.points[i].weight);
        let power = dist.has_alt().then(|| {
            members
                .ones()
                .map(|i| dist.points[i].alt.unwrap_or(0.0))
                .sum()
        });
        RejectionRegion {
            members,
            weight,
            total: dist.total.clone(),
            power,
        }
    }

    /// Region `{t : predicate(t)}`.
    pub fn from_predicate<F: Fn(&[u32]) -> bool>(dist: &JointDistribution, predicate: F) -> Self {
        let mut m = FixedBitSet::with_capacity(dist.len());
        for (i, p) in dist.points.iter().enumerate() {
            if predicate(&p.t) {
                m.insert(i);
            }
        }
        Self::from_members(dist, m)
    }

    pub fn members(&self) -> &FixedBitSet {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.contains(i)
    }

    pub fn size(&self) -> usize {
        self.members.count_ones(..)
    }

    /// Null weight of the region over the common denominator `C(N, n_trt)`.
    pub fn weight(&self) -> &BigUint {
        &self.weight
    }

    pub fn level(&self) -> Ratio<BigUint> {
        Ratio::new(self.weight.clone(), self.total.clone())
    }

    pub fn level_f64(&self) -> f64 {
        ratio_to_f64(&self.weight, &self.total)
    }

    pub fn power(&self) -> Option<f64> {
        self.power
    }

    pub fn dump(&self, dist: &JointDistribution) -> RegionDump {
        RegionDump {
            members: self
                .members
                .ones()
                .map(|i| dist.points[i].t.clone())
                .collect(),
            size: self.size(),
            level_num: self.weight.to_string(),
            level_den: self.total.to_string(),
            level: self.level_f64(),
            power: self.power,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionDump {
    pub members: Vec<Vec<u32>>,
    pub size: usize,
    pub level_num: String,
    pub level_den: String,
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
}

/// Outcome of a validity check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Validity {
    pub level_ok: bool,
    /// `(member, missing dominating point)` pairs breaking up-closure.
    pub violations: Vec<(Vec<u32>, Vec<u32>)>,
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        self.level_ok && self.violations.is_empty()
    }
}

/// Check the level constraint (exactly) and up-closure.
pub fn is_valid(region: &RejectionRegion, dist: &JointDistribution, alpha: &Alpha) -> Validity {
    let level_ok = region.weight <= alpha.capacity(&dist.total);
    let dom = dist.dominance();
    let mut violations = Vec::new();
    for i in region.members.ones() {
        for j in dom.up(i).ones() {
            if !region.members.contains(j) {
                violations.push((dist.points[i].t.clone(), dist.points[j].t.clone()));
            }
        }
    }
    Validity {
        level_ok,
        violations,
    }
}

/// `true` if the member set is up-closed.
pub fn is_up_closed(members: &FixedBitSet, dist: &JointDistribution) -> bool {
    let dom = dist.dominance();
    members.ones().all(|i| dom.up(i).is_subset(members))
}

/// A single optimization criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Null probability of the region.
    Alpha,
    /// Number of points in the region.
    Area,
    /// Probability of the region under the alternative attached to the distribution.
    Power,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Alpha => "alpha",
            Criterion::Area => "area",
            Criterion::Power => "power",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "alpha" => Ok(Criterion::Alpha),
            "area" => Ok(Criterion::Area),
            "power" => Ok(Criterion::Power),
            other => Err(Error::InvalidMethod(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Primary criterion followed by lexicographic tie-breakers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Objective {
    criteria: Vec<Criterion>,
}

impl Objective {
    pub fn new(criteria: Vec<Criterion>) -> Result<Self> {
        if criteria.is_empty() {
            return Err(Error::InvalidMethod("objective needs a criterion".into()));
        }
        for (n, c) in criteria.iter().enumerate() {
            if criteria[..n].contains(c) {
                return Err(Error::InvalidMethod(format!("criterion `{c}` repeated")));
            }
        }
        Ok(Objective { criteria })
    }

    pub fn single(c: Criterion) -> Self {
        Objective { criteria: vec![c] }
    }

    pub fn criteria(&self) -> &[Criterion] {
        &self.criteria
    }

    pub fn primary(&self) -> Criterion {
        self.criteria[0]
    }

    pub fn needs_alternative(&self) -> bool {
        self.criteria.contains(&Criterion::Power)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.criteria.iter().map(|c| c.to_string()).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveValue {
    Exact(Ratio<BigUint>),
    Count(usize),
    Real(f64),
}

impl ObjectiveValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            ObjectiveValue::Exact(r) => ratio_to_f64(r.numer(), r.denom()),
            ObjectiveValue::Count(c) => *c as f64,
            ObjectiveValue::Real(x) => *x,
        }
    }
}

pub fn evaluate(
    region: &RejectionRegion,
    criterion: Criterion,
    dist: &JointDistribution,
) -> Result<ObjectiveValue> {
    match criterion {
        Criterion::Alpha => Ok(ObjectiveValue::Exact(region.level())),
        Criterion::Area => Ok(ObjectiveValue::Count(region.size())),
        Criterion::Power => {
            if !dist.has_alt() {
                return Err(Error::MissingAlternative);
            }
            Ok(ObjectiveValue::Real(
                region
                    .members
                    .ones()
                    .map(|i| dist.points[i].alt.unwrap_or(0.0))
                    .sum(),
            ))
        }
    }
}

/// P-value of an observed statistic relative to a region.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionPValue {
    pub p: Ratio<BigUint>,
    pub observed_in_region: bool,
    /// Number of points removed or added before the observed point was reached.
    pub steps: usize,
}

impl RegionPValue {
    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(self.p.numer(), self.p.denom())
    }
}

/// Shrink the region (observation inside) or grow it (observation outside)
/// one point at a time, keeping up-closure, until the observed point leaves
/// or enters. Removal takes the heaviest removable point, addition the
/// lightest addable point; ties go to the earlier canonical position.
pub fn region_p_value(
    region: &RejectionRegion,
    dist: &JointDistribution,
    t_obs: &[u32],
) -> Result<RegionPValue> {
    let obs = dist
        .position(t_obs)
        .ok_or_else(|| crate::error::Error::NotInSupport(t_obs.to_vec()))?;
    let dom = dist.dominance();
    let n = dist.len();
    let mut members = region.members.clone();
    let mut weight = region.weight.clone();
    let total = dist.total.clone();

    if members.contains(obs) {
        // Members with no other member strictly below them.
        let mut below = vec![0usize; n];
        let mut heap = BinaryHeap::new();
        for i in members.ones() {
            below[i] = dom.down(i).intersection(&members).count() - 1;
            if below[i] == 0 {
                heap.push(Reverse(i));
            }
        }
        let mut steps = 0;
        while let Some(Reverse(i)) = heap.pop() {
            if i == obs {
                return Ok(RegionPValue {
                    p: Ratio::new(weight, total),
                    observed_in_region: true,
                    steps,
                });
            }
            members.set(i, false);
            weight -= &dist.points[i].weight;
            steps += 1;
            for j in dom.up(i).ones() {
                if j != i && members.contains(j) {
                    below[j] -= 1;
                    if below[j] == 0 {
                        heap.push(Reverse(j));
                    }
                }
            }
            debug_assert!(crate::region::is_up_closed(&members, dist));
        }
        unreachable!("observed point is always eventually removable")
    } else {
        // Non-members with no non-member strictly above them.
        let mut above = vec![0usize; n];
        let mut heap = BinaryHeap::new();
        for i in 0..n {
            if !members.contains(i) {
                above[i] = dom.up(i).ones().filter(|&j| !members.contains(j)).count() - 1;
                if above[i] == 0 {
                    heap.push((Reverse(dist.points[i].weight.clone()), Reverse(i)));
                }
            }
        }
        let mut steps = 0;
        while let Some((_, Reverse(i))) = heap.pop() {
            members.insert(i);
            weight += &dist.points[i].weight;
            if i == obs {
                return Ok(RegionPValue {
                    p: Ratio::new(weight, total),
                    observed_in_region: false,
                    steps,
                });
            }
            steps += 1;
            for j in dom.down(i).ones() {
                if j != i && !members.contains(j) {
                    above[j] -= 1;
                    if above[j] == 0 {
                        heap.push((Reverse(dist.points[j].weight.clone()), Reverse(j)));
                    }
                }
            }
            debug_assert!(crate::region::is_up_closed(&members, dist));
        }
        unreachable!("observed point is always eventually addable")
    }
}
