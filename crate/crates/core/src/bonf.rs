//! Bonferroni-type tests built from the exact marginal laws of the statistics.
//!
//! Boundaries are held as integer tail weights over the common denominator
//! `C(N, n_trt)`, so every level comparison is exact.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize, Serializer};

use crate::dist::{marginal_alt_tails, JointDistribution, MarginalNull};
use crate::error::{Error, Result};
use crate::model::{ratio_to_f64, Alpha, EndpointSet, Margins};
use crate::region::RejectionRegion;
use crate::search::{decimal_digits, lp_sum, wrap, GreedyOp, LpNumbers};

/// Exact null laws of every statistic of a margin vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub nulls: Vec<MarginalNull>,
    pub total: BigUint,
}

impl Marginals {
    pub fn new(margins: &Margins) -> Result<Self> {
        let nulls = (0..margins.k)
            .map(|i| MarginalNull::new(margins, i))
            .collect::<Result<Vec<_>>>()?;
        let total = nulls[0].total.clone();
        Ok(Marginals { nulls, total })
    }

    pub fn k(&self) -> usize {
        self.nulls.len()
    }

    /// Tail weight `S_i(c) * total`; zero for an untested endpoint.
    pub fn tail(&self, i: usize, c: Option<u32>) -> BigUint {
        match c {
            Some(c) => self.nulls[i].tail_weight(c),
            None => BigUint::zero(),
        }
    }

    /// Boundaries of endpoint `i` in increasing order, followed by `None`.
    fn values(&self, i: usize) -> Vec<Option<u32>> {
        let n = &self.nulls[i];
        (n.lo..=n.hi)
            .map(Some)
            .chain(std::iter::once(None))
            .collect()
    }

    /// Smallest boundary whose tail weight times `factor` fits in `cap`.
    fn smallest_within(&self, i: usize, cap: &BigUint, factor: u64) -> Option<u32> {
        let n = &self.nulls[i];
        (n.lo..=n.hi).find(|&c| n.tail_weight(c) * factor <= *cap)
    }

    /// Tail weight of the largest support value, the smallest attainable nonzero tail.
    fn min_tail(&self, i: usize) -> BigUint {
        let n = &self.nulls[i];
        n.tail_weight(n.hi)
    }
}

/// Per-endpoint critical values; `None` marks an untested endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalBoundaries {
    pub c: Vec<Option<u32>>,
    pub tails: Vec<BigUint>,
    pub total: BigUint,
}

impl CriticalBoundaries {
    fn new(marg: &Marginals, c: Vec<Option<u32>>) -> Self {
        let tails = c
            .iter()
            .enumerate()
            .map(|(i, &v)| marg.tail(i, v))
            .collect();
        CriticalBoundaries {
            c,
            tails,
            total: marg.total.clone(),
        }
    }

    /// `sum_i S_i(c_i)` as an integer weight.
    pub fn level_weight(&self) -> BigUint {
        self.tails.iter().sum()
    }

    pub fn level_sum(&self) -> Ratio<BigUint> {
        Ratio::new(self.level_weight(), self.total.clone())
    }

    pub fn rejects_endpoint(&self, i: usize, t: u32) -> bool {
        matches!(self.c[i], Some(c) if t >= c)
    }

    pub fn rejects(&self, t: &[u32]) -> bool {
        (0..self.c.len()).any(|i| self.rejects_endpoint(i, t[i]))
    }

    /// Region `{t : t_i >= c_i for some i}` on a joint support over the same endpoints.
    pub fn region(&self, dist: &JointDistribution) -> RejectionRegion {
        RejectionRegion::from_predicate(dist, |t| self.rejects(t))
    }

    pub fn report(&self) -> BoundaryReport {
        BoundaryReport {
            endpoints: self
                .c
                .iter()
                .zip(&self.tails)
                .enumerate()
                .map(|(i, (&c, tail))| BoundaryEntry {
                    endpoint: i + 1,
                    c,
                    tail_num: tail.to_string(),
                    tail_den: self.total.to_string(),
                    tested: c.is_some(),
                })
                .collect(),
            level_num: self.level_weight().to_string(),
            level_den: self.total.to_string(),
            level_sum: ratio_to_f64(&self.level_weight(), &self.total),
        }
    }
}

fn serialize_boundary<S: Serializer>(
    c: &Option<u32>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match c {
        Some(v) => s.serialize_u32(*v),
        None => s.serialize_str("untested"),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryEntry {
    pub endpoint: usize,
    #[serde(serialize_with = "serialize_boundary")]
    pub c: Option<u32>,
    pub tail_num: String,
    pub tail_den: String,
    pub tested: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryReport {
    pub endpoints: Vec<BoundaryEntry>,
    pub level_num: String,
    pub level_den: String,
    pub level_sum: f64,
}

/// Objective of the boundary optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonfObjective {
    /// Sum of the null tails.
    AlphaSum,
    /// Sum of the tails under marginal alternatives with odds ratios `psi`.
    PowerSum { psi: Vec<f64> },
}

impl BonfObjective {
    /// Power objective from marginal success rates in both groups.
    pub fn power_from_rates(p_trt: &[f64], p_ctr: &[f64]) -> Result<Self> {
        if p_trt.len() != p_ctr.len() {
            return Err(Error::InvalidProbability(
                "rate vectors differ in length".into(),
            ));
        }
        let psi = p_trt
            .iter()
            .zip(p_ctr)
            .map(|(&a, &b)| {
                if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
                    return Err(Error::InvalidProbability(format!(
                        "rates must lie in (0, 1): {a}, {b}"
                    )));
                }
                Ok(a * (1.0 - b) / (b * (1.0 - a)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BonfObjective::PowerSum { psi })
    }

    pub fn restrict(&self, endpoints: EndpointSet) -> Self {
        match self {
            BonfObjective::AlphaSum => BonfObjective::AlphaSum,
            BonfObjective::PowerSum { psi } => BonfObjective::PowerSum {
                psi: endpoints.indices().iter().map(|&i| psi[i]).collect(),
            },
        }
    }
}

/// Per-endpoint objective contributions, indexed like `Marginals::values`.
enum Gains {
    Exact(Vec<Vec<BigUint>>),
    Real(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
enum Score {
    Exact(BigUint),
    Real(f64),
}

impl Score {
    fn cmp(&self, other: &Score) -> Ordering {
        match (self, other) {
            (Score::Exact(a), Score::Exact(b)) => a.cmp(b),
            (Score::Real(a), Score::Real(b)) => {
                // Sums of equal terms in a different order still count as ties.
                if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
                    Ordering::Equal
                } else {
                    a.partial_cmp(b).unwrap_or(Ordering::Equal)
                }
            }
            _ => Ordering::Equal,
        }
    }
}

impl Gains {
    fn new(objective: &BonfObjective, marg: &Marginals, margins: &Margins) -> Result<Self> {
        match objective {
            BonfObjective::AlphaSum => Ok(Gains::Exact(
                (0..marg.k())
                    .map(|i| {
                        marg.values(i)
                            .into_iter()
                            .map(|c| marg.tail(i, c))
                            .collect()
                    })
                    .collect(),
            )),
            BonfObjective::PowerSum { psi } => {
                if psi.len() != marg.k() {
                    return Err(Error::InvalidMethod(format!(
                        "power objective has {} odds ratios for {} endpoints",
                        psi.len(),
                        marg.k()
                    )));
                }
                let mut out = Vec::with_capacity(marg.k());
                for (i, &p) in psi.iter().enumerate() {
                    let mut tails = marginal_alt_tails(margins, i, p)?;
                    tails.push(0.0);
                    out.push(tails);
                }
                Ok(Gains::Real(out))
            }
        }
    }

    /// Position of `c` within `Marginals::values(i)`.
    fn slot(marg: &Marginals, i: usize, c: Option<u32>) -> usize {
        let n = &marg.nulls[i];
        match c {
            Some(c) => (c.clamp(n.lo, n.hi + 1) - n.lo) as usize,
            None => (n.hi - n.lo + 1) as usize,
        }
    }

    fn score(&self, marg: &Marginals, c: &[Option<u32>]) -> Score {
        match self {
            Gains::Exact(g) => Score::Exact(
                c.iter()
                    .enumerate()
                    .map(|(i, &v)| &g[i][Self::slot(marg, i, v)])
                    .sum(),
            ),
            Gains::Real(g) => Score::Real(
                c.iter()
                    .enumerate()
                    .map(|(i, &v)| g[i][Self::slot(marg, i, v)])
                    .sum(),
            ),
        }
    }

    /// Change of the objective when endpoint `i` moves from `from` to `to`.
    fn delta(&self, marg: &Marginals, i: usize, from: Option<u32>, to: Option<u32>) -> Score {
        let (a, b) = (Self::slot(marg, i, from), Self::slot(marg, i, to));
        match self {
            Gains::Exact(g) => Score::Exact(&g[i][b] - &g[i][a]),
            Gains::Real(g) => Score::Real(g[i][b] - g[i][a]),
        }
    }
}

/// Plain Bonferroni: each endpoint tested at `alpha / k`.
pub fn unweighted(margins: &Margins, alpha: &Alpha) -> Result<CriticalBoundaries> {
    let marg = Marginals::new(margins)?;
    let cap = alpha.capacity(&marg.total);
    Ok(unweighted_at(&marg, &cap))
}

fn unweighted_at(marg: &Marginals, cap: &BigUint) -> CriticalBoundaries {
    let k = marg.k() as u64;
    let c = (0..marg.k())
        .map(|i| marg.smallest_within(i, cap, k))
        .collect();
    CriticalBoundaries::new(marg, c)
}

/// Tarone's procedure at integer level `cap`.
fn tarone_at(marg: &Marginals, cap: &BigUint) -> Vec<Option<u32>> {
    let k = marg.k();
    for size in 1..=k as u64 {
        let testable: Vec<usize> = (0..k)
            .filter(|&i| marg.min_tail(i) * size <= *cap)
            .collect();
        if testable.len() as u64 <= size {
            return (0..k)
                .map(|i| {
                    if testable.contains(&i) {
                        marg.smallest_within(i, cap, size)
                    } else {
                        None
                    }
                })
                .collect();
        }
    }
    vec![None; k]
}

/// Values of the integer level at which Tarone's decisions can change, up to `cap`.
fn tarone_grid(marg: &Marginals, cap: &BigUint) -> Vec<BigUint> {
    let mut grid = BTreeSet::new();
    for i in 0..marg.k() {
        let n = &marg.nulls[i];
        for c in n.lo..=n.hi {
            for size in 1..=marg.k() as u64 {
                let g = n.tail_weight(c) * size;
                if g <= *cap {
                    grid.insert(g);
                }
            }
        }
    }
    grid.insert(cap.clone());
    grid.into_iter().collect()
}

/// Tarone's procedure applied at every level up to `alpha`; an endpoint is
/// rejected if any of these rejects it.
pub fn hkt(margins: &Margins, alpha: &Alpha) -> Result<CriticalBoundaries> {
    let marg = Marginals::new(margins)?;
    let cap = alpha.capacity(&marg.total);
    Ok(hkt_at(&marg, &cap))
}

fn hkt_at(marg: &Marginals, cap: &BigUint) -> CriticalBoundaries {
    let mut best: Vec<Option<u32>> = vec![None; marg.k()];
    for level in tarone_grid(marg, cap) {
        for (b, c) in best.iter_mut().zip(tarone_at(marg, &level)) {
            *b = match (*b, c) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            };
        }
    }
    CriticalBoundaries::new(marg, best)
}

/// Common boundary `min{c : sum_i S_i(c) <= alpha}`.
pub fn westfall_troendle(margins: &Margins, alpha: &Alpha) -> Result<CriticalBoundaries> {
    let marg = Marginals::new(margins)?;
    let cap = alpha.capacity(&marg.total);
    Ok(westfall_troendle_at(&marg, &cap))
}

fn common_sum(marg: &Marginals, c: u32) -> BigUint {
    (0..marg.k()).map(|i| marg.nulls[i].tail_weight(c)).sum()
}

fn westfall_troendle_at(marg: &Marginals, cap: &BigUint) -> CriticalBoundaries {
    let lo = marg.nulls.iter().map(|n| n.lo).min().unwrap_or(0);
    let hi = marg.nulls.iter().map(|n| n.hi).max().unwrap_or(0) + 1;
    let common = (lo..=hi)
        .find(|&c| common_sum(marg, c) <= *cap)
        .unwrap_or(hi);
    let c = marg
        .nulls
        .iter()
        .map(|n| (common <= n.hi).then_some(common))
        .collect();
    CriticalBoundaries::new(marg, c)
}

/// Sort key for ties: smaller sum of boundaries first, then lexicographically smaller.
fn tie_key(marg: &Marginals, c: &[Option<u32>]) -> (u64, Vec<u32>) {
    let values: Vec<u32> = c
        .iter()
        .enumerate()
        .map(|(i, v)| v.unwrap_or(marg.nulls[i].hi + 1))
        .collect();
    (values.iter().map(|&v| v as u64).sum(), values)
}

/// `true` if `a` is preferred to `b` (higher score, then smaller tie key).
fn preferred(
    marg: &Marginals,
    a: &(Vec<Option<u32>>, Score),
    b: &(Vec<Option<u32>>, Score),
) -> bool {
    match a.1.cmp(&b.1) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => tie_key(marg, &a.0) < tie_key(marg, &b.0),
    }
}

/// All boundary vectors with level weight at most `cap`, respecting `limits`.
fn feasible_vectors(
    marg: &Marginals,
    cap: &BigUint,
    limits: Option<&[Option<u32>]>,
) -> Vec<(Vec<Option<u32>>, BigUint)> {
    fn allowed(limit: Option<Option<u32>>, c: Option<u32>) -> bool {
        match (limit, c) {
            (None, _) | (Some(None), _) => true,
            (Some(Some(l)), Some(c)) => c <= l,
            (Some(Some(_)), None) => false,
        }
    }
    fn rec(
        marg: &Marginals,
        cap: &BigUint,
        limits: Option<&[Option<u32>]>,
        i: usize,
        prefix: &mut Vec<Option<u32>>,
        used: &BigUint,
        out: &mut Vec<(Vec<Option<u32>>, BigUint)>,
    ) {
        if i == marg.k() {
            out.push((prefix.clone(), used.clone()));
            return;
        }
        for c in marg.values(i) {
            if !allowed(limits.map(|l| l[i]), c) {
                continue;
            }
            let w = used + marg.tail(i, c);
            if w > *cap {
                continue;
            }
            prefix.push(c);
            rec(marg, cap, limits, i + 1, prefix, &w, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(
        marg,
        cap,
        limits,
        0,
        &mut Vec::new(),
        &BigUint::zero(),
        &mut out,
    );
    out
}

/// Exhaustive search for the boundaries maximizing `objective` subject to
/// `sum_i S_i(c_i) <= alpha` and, if given, `c_i <= limits_i`.
pub fn optimize_boundaries(
    margins: &Margins,
    objective: &BonfObjective,
    alpha: &Alpha,
    limits: Option<&[Option<u32>]>,
) -> Result<CriticalBoundaries> {
    let marg = Marginals::new(margins)?;
    let gains = Gains::new(objective, &marg, margins)?;
    let cap = alpha.capacity(&marg.total);
    optimize_at(&marg, &gains, &cap, limits)
}

fn optimize_at(
    marg: &Marginals,
    gains: &Gains,
    cap: &BigUint,
    limits: Option<&[Option<u32>]>,
) -> Result<CriticalBoundaries> {
    let mut best: Option<(Vec<Option<u32>>, Score)> = None;
    for (c, _) in feasible_vectors(marg, cap, limits) {
        let s = gains.score(marg, &c);
        let cand = (c, s);
        if best.as_ref().is_none_or(|b| preferred(marg, &cand, b)) {
            best = Some(cand);
        }
    }
    let (c, _) = best.ok_or_else(|| {
        Error::UnsupportedConsonance("no boundary vector satisfies the superset caps".into())
    })?;
    Ok(CriticalBoundaries::new(marg, c))
}

/// Lower one boundary at a time by one support step, picking the endpoint
/// whose objective increment is smallest (`Argmin`) or largest (`Argmax`)
/// among moves that keep the level sum within `alpha`.
pub fn greedy_boundaries(
    margins: &Margins,
    objective: &BonfObjective,
    alpha: &Alpha,
    op: GreedyOp,
) -> Result<CriticalBoundaries> {
    let marg = Marginals::new(margins)?;
    let gains = Gains::new(objective, &marg, margins)?;
    let cap = alpha.capacity(&marg.total);
    Ok(greedy_at(&marg, &gains, &cap, op))
}

fn greedy_at(marg: &Marginals, gains: &Gains, cap: &BigUint, op: GreedyOp) -> CriticalBoundaries {
    let k = marg.k();
    let mut c: Vec<Option<u32>> = vec![None; k];
    let mut used = BigUint::zero();
    loop {
        let mut pick: Option<(usize, Option<u32>, Score, BigUint)> = None;
        for i in 0..k {
            let n = &marg.nulls[i];
            let next = match c[i] {
                None => Some(n.hi),
                Some(v) if v > n.lo => Some(v - 1),
                Some(_) => continue,
            };
            let step = marg.tail(i, next) - marg.tail(i, c[i]);
            if &used + &step > *cap {
                continue;
            }
            let d = gains.delta(marg, i, c[i], next);
            let better = match &pick {
                None => true,
                Some((_, _, best, _)) => match op {
                    GreedyOp::Argmin => d.cmp(best) == Ordering::Less,
                    GreedyOp::Argmax => d.cmp(best) == Ordering::Greater,
                },
            };
            if better {
                pick = Some((i, next, d, step));
            }
        }
        let Some((i, next, _, step)) = pick else {
            break;
        };
        c[i] = next;
        used += step;
    }
    CriticalBoundaries::new(marg, c)
}

/// Binary program choosing one boundary per endpoint (`inf` = untested) in LP text format.
pub fn export_bonf_ilp(
    margins: &Margins,
    objective: &BonfObjective,
    alpha: &Alpha,
    numbers: LpNumbers,
) -> Result<String> {
    let marg = Marginals::new(margins)?;
    let gains = Gains::new(objective, &marg, margins)?;
    let cap = alpha.capacity(&marg.total);
    let number = |w: &BigUint| match numbers {
        LpNumbers::Integer => w.to_string(),
        LpNumbers::Decimal => decimal_digits(w, &marg.total, 18),
    };
    let mut vars: Vec<Vec<(String, Option<u32>)>> = Vec::with_capacity(marg.k());
    for i in 0..marg.k() {
        let row = marg
            .values(i)
            .into_iter()
            .filter(|&c| marg.tail(i, c) <= cap)
            .map(|c| {
                let v = c.map_or("inf".to_string(), |v| v.to_string());
                (format!("c{}_{v}", i + 1), c)
            })
            .collect();
        vars.push(row);
    }
    let mut obj = Vec::new();
    let mut level = Vec::new();
    for (i, row) in vars.iter().enumerate() {
        for (name, c) in row {
            let tail = marg.tail(i, *c);
            let w = match &gains {
                Gains::Exact(_) => number(&tail),
                Gains::Real(g) => format!("{:.17e}", g[i][Gains::slot(&marg, i, *c)]),
            };
            if w != "0" {
                obj.push((w, name.clone()));
            }
            if !tail.is_zero() {
                level.push((number(&tail), name.clone()));
            }
        }
    }
    let name = match objective {
        BonfObjective::AlphaSum => "alpha",
        BonfObjective::PowerSum { .. } => "power",
    };
    let mut out = String::new();
    out.push_str(&format!("\\ bonferroni objective: {name}\n"));
    out.push_str(&format!("\\ alpha: {alpha}\n"));
    out.push_str(&format!("\\ coefficients: {numbers}\n"));
    out.push_str("maximize\n");
    out.push_str(&wrap(&format!(" obj: {}", lp_sum(&obj))));
    out.push_str("\nst\n");
    for (i, row) in vars.iter().enumerate() {
        let terms: Vec<(String, String)> = row
            .iter()
            .map(|(n, _)| ("1".to_string(), n.clone()))
            .collect();
        out.push_str(&wrap(&format!(" pick_{}: {} = 1", i + 1, lp_sum(&terms))));
        out.push('\n');
    }
    out.push_str(&wrap(&format!(
        " level: {} <= {}",
        lp_sum(&level),
        number(&cap)
    )));
    out.push_str("\nbin\n");
    for row in &vars {
        for (n, _) in row {
            out.push_str(&format!(" {n}\n"));
        }
    }
    out.push_str("end\n");
    Ok(out)
}

/// A boundary-based local test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonfMethod {
    Unweighted,
    Hkt,
    WestfallTroendle,
    Optimal(BonfObjective),
    Greedy(BonfObjective, GreedyOp),
}

impl BonfMethod {
    pub fn restrict(&self, endpoints: EndpointSet) -> Self {
        match self {
            BonfMethod::Optimal(o) => BonfMethod::Optimal(o.restrict(endpoints)),
            BonfMethod::Greedy(o, op) => BonfMethod::Greedy(o.restrict(endpoints), *op),
            other => other.clone(),
        }
    }

    /// Boundaries at level `alpha`; `limits` only constrains the optimal variants.
    pub fn boundaries(
        &self,
        margins: &Margins,
        alpha: &Alpha,
        limits: Option<&[Option<u32>]>,
    ) -> Result<CriticalBoundaries> {
        let marg = Marginals::new(margins)?;
        let cap = alpha.capacity(&marg.total);
        self.boundaries_at(&marg, margins, &cap, limits)
    }

    fn boundaries_at(
        &self,
        marg: &Marginals,
        margins: &Margins,
        cap: &BigUint,
        limits: Option<&[Option<u32>]>,
    ) -> Result<CriticalBoundaries> {
        Ok(match self {
            BonfMethod::Unweighted => unweighted_at(marg, cap),
            BonfMethod::Hkt => hkt_at(marg, cap),
            BonfMethod::WestfallTroendle => westfall_troendle_at(marg, cap),
            BonfMethod::Optimal(o) => {
                optimize_at(marg, &Gains::new(o, marg, margins)?, cap, limits)?
            }
            BonfMethod::Greedy(o, op) => greedy_at(marg, &Gains::new(o, marg, margins)?, cap, *op),
        })
    }

    /// Smallest level at which the method rejects the intersection hypothesis given `t`.
    pub fn p_value(
        &self,
        margins: &Margins,
        t: &[u32],
        limits: Option<&[Option<u32>]>,
    ) -> Result<Ratio<BigUint>> {
        let marg = Marginals::new(margins)?;
        let total = marg.total.clone();
        for (i, n) in marg.nulls.iter().enumerate() {
            if t[i] < n.lo || t[i] > n.hi {
                return Err(Error::NotInSupport(t.to_vec()));
            }
        }
        let weight = match self {
            BonfMethod::Unweighted => {
                let min = (0..marg.k())
                    .map(|i| marg.tail(i, Some(t[i])))
                    .min()
                    .unwrap_or_default();
                (min * marg.k() as u64).min(total.clone())
            }
            BonfMethod::Hkt => tarone_grid(&marg, &total)
                .into_iter()
                .find(|g| {
                    let c = tarone_at(&marg, g);
                    CriticalBoundaries::new(&marg, c).rejects(t)
                })
                .unwrap_or(total.clone()),
            BonfMethod::WestfallTroendle => {
                let top = t.iter().copied().max().unwrap_or(0);
                common_sum(&marg, top).min(total.clone())
            }
            BonfMethod::Optimal(o) => {
                let gains = Gains::new(o, &marg, margins)?;
                let mut all = feasible_vectors(&marg, &total, limits);
                all.sort_by(|a, b| a.1.cmp(&b.1));
                let mut best: Option<(Vec<Option<u32>>, Score)> = None;
                let mut found = total.clone();
                let mut idx = 0;
                while idx < all.len() {
                    let level = all[idx].1.clone();
                    while idx < all.len() && all[idx].1 == level {
                        let c = all[idx].0.clone();
                        let s = gains.score(&marg, &c);
                        let cand = (c, s);
                        if best.as_ref().is_none_or(|b| preferred(&marg, &cand, b)) {
                            best = Some(cand);
                        }
                        idx += 1;
                    }
                    if let Some((c, _)) = &best {
                        if CriticalBoundaries::new(&marg, c.clone()).rejects(t) {
                            found = level;
                            break;
                        }
                    }
                }
                found
            }
            BonfMethod::Greedy(o, op) => {
                let gains = Gains::new(o, &marg, margins)?;
                achievable_sums(&marg)
                    .into_iter()
                    .find(|g| greedy_at(&marg, &gains, g, *op).rejects(t))
                    .unwrap_or(total.clone())
            }
        };
        Ok(Ratio::new(weight, total))
    }
}

/// Every value of `sum_i S_i(c_i)` not exceeding one, in increasing order.
fn achievable_sums(marg: &Marginals) -> Vec<BigUint> {
    let mut sums: BTreeSet<BigUint> = BTreeSet::new();
    sums.insert(BigUint::zero());
    for i in 0..marg.k() {
        let tails: Vec<BigUint> = marg
            .values(i)
            .into_iter()
            .map(|c| marg.tail(i, c))
            .collect();
        let mut next = BTreeSet::new();
        for s in &sums {
            for t in &tails {
                let v = s + t;
                if v <= marg.total {
                    next.insert(v);
                }
            }
        }
        sums = next;
    }
    sums.into_iter().collect()
}

/// Per-point minimum of the marginal tail weights.
fn min_tails(dist: &JointDistribution) -> Result<(Marginals, Vec<BigUint>)> {
    let marg = Marginals::new(&dist.margins)?;
    let mins = dist
        .points
        .iter()
        .map(|p| {
            (0..marg.k())
                .map(|i| marg.tail(i, Some(p.t[i])))
                .min()
                .unwrap_or_default()
        })
        .collect();
    Ok((marg, mins))
}

/// The minP test: reject when the smallest marginal Fisher p-value is at most
/// the largest attainable threshold whose joint null probability is within `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct MinPTest {
    pub region: RejectionRegion,
    /// Threshold as a tail weight over the common denominator; `None` if nothing is rejected.
    pub threshold: Option<BigUint>,
    pub boundaries: CriticalBoundaries,
}

pub fn minp_region(dist: &JointDistribution, alpha: &Alpha) -> Result<MinPTest> {
    let (marg, mins) = min_tails(dist)?;
    let cap = alpha.capacity(&dist.total);
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| mins[a].cmp(&mins[b]));
    let mut threshold = None;
    let mut mass = BigUint::zero();
    let mut idx = 0;
    while idx < order.len() {
        let q = mins[order[idx]].clone();
        let mut group = BigUint::zero();
        let mut end = idx;
        while end < order.len() && mins[order[end]] == q {
            group += &dist.points[order[end]].weight;
            end += 1;
        }
        if &mass + &group > cap {
            break;
        }
        mass += group;
        threshold = Some(q);
        idx = end;
    }
    let c: Vec<Option<u32>> = (0..marg.k())
        .map(|i| {
            threshold.as_ref().and_then(|q| {
                let n = &marg.nulls[i];
                (n.lo..=n.hi).find(|&c| n.tail_weight(c) <= *q)
            })
        })
        .collect();
    let region = match &threshold {
        Some(q) => {
            let mut members = fixedbitset::FixedBitSet::with_capacity(dist.len());
            for (i, m) in mins.iter().enumerate() {
                if m <= q {
                    members.insert(i);
                }
            }
            RejectionRegion::from_members(dist, members)
        }
        None => RejectionRegion::empty(dist),
    };
    Ok(MinPTest {
        region,
        threshold,
        boundaries: CriticalBoundaries::new(&marg, c),
    })
}

/// `P(min_i S_i(T_i) <= min_i S_i(t_i))` under the joint null.
pub fn minp_p_value(dist: &JointDistribution, t: &[u32]) -> Result<Ratio<BigUint>> {
    let obs = dist
        .position(t)
        .ok_or_else(|| Error::NotInSupport(t.to_vec()))?;
    let (_, mins) = min_tails(dist)?;
    let q = &mins[obs];
    let mass: BigUint = dist
        .points
        .iter()
        .zip(&mins)
        .filter(|(_, m)| *m <= q)
        .map(|(p, _)| &p.weight)
        .sum();
    Ok(Ratio::new(mass, dist.total.clone()))
}
