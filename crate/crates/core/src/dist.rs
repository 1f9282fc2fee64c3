//! Conditional distributions of the statistic vector given the margins.
//!
//! Null weights are exact integers: the null probability of a support point
//! `t` is `weight(t) / C(N, n_trt)` with
//! `weight(t) = sum over {y in W : h(y) = t} of prod_s C(m_s, y_s)`.
//! Alternative masses (non-central case) are floating point, accumulated in
//! log space.

use std::collections::HashMap;
use std::ops::{AddAssign, Mul};
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{project, ratio_to_f64, EndpointSet, Margins};
use crate::region::Dominance;

/// Default cap on the number of enumerated `y` vectors.
pub const DEFAULT_SUPPORT_CAP: u64 = 10_000_000;

/// `C(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Natural log of `C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    statrs::function::factorial::ln_factorial(n)
}

/// Visit every `y` with `0 <= y_s <= m_s` and `sum y = n_trt`, in lexicographic order.
fn for_each_y<F: FnMut(&[u64])>(margins: &Margins, cap: u64, mut visit: F) -> Result<()> {
    let m = &margins.m;
    let d = m.len();
    let mut suffix = vec![0u64; d + 1];
    for s in (0..d).rev() {
        suffix[s] = suffix[s + 1] + m[s];
    }
    let mut y = vec![0u64; d];
    let mut count = 0u64;

    fn rec<F: FnMut(&[u64])>(
        s: usize,
        remaining: u64,
        m: &[u64],
        suffix: &[u64],
        y: &mut Vec<u64>,
        count: &mut u64,
        cap: u64,
        visit: &mut F,
    ) -> Result<()> {
        if s == m.len() {
            *count += 1;
            if *count > cap {
                return Err(Error::SupportTooLarge { cap });
            }
            visit(y);
            return Ok(());
        }
        let lo = remaining.saturating_sub(suffix[s + 1]);
        let hi = remaining.min(m[s]);
        for v in lo..=hi {
            y[s] = v;
            rec(s + 1, remaining - v, m, suffix, y, count, cap, visit)?;
        }
        y[s] = 0;
        Ok(())
    }

    rec(
        0,
        margins.n_trt,
        m,
        &suffix,
        &mut y,
        &mut count,
        cap,
        &mut visit,
    )
}

/// The set `W` of treatment-column vectors compatible with the margins.
pub fn enumerate_support(margins: &Margins) -> Result<Vec<Vec<u64>>> {
    enumerate_support_capped(margins, DEFAULT_SUPPORT_CAP)
}

pub fn enumerate_support_capped(margins: &Margins, cap: u64) -> Result<Vec<Vec<u64>>> {
    let mut out = Vec::new();
    for_each_y(margins, cap, |y| out.push(y.to_vec()))?;
    Ok(out)
}

/// One point of the support `V = h(W)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportPoint {
    pub t: Vec<u32>,
    pub weight: BigUint,
    pub alt: Option<f64>,
}

/// Positive odds ratios `q_trt,s / q_ctr,s`, indexed by category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddsVector(pub Vec<f64>);

impl OddsVector {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidProbability(format!(
                "odds must be positive: {r:?}"
            )));
        }
        Ok(OddsVector(r))
    }

    pub fn central(d: usize) -> Self {
        OddsVector(vec![1.0; d])
    }

    pub fn from_cells(
        trt: &crate::model::CellProbabilities,
        ctr: &crate::model::CellProbabilities,
    ) -> Result<Self> {
        OddsVector::new(trt.q.iter().zip(&ctr.q).map(|(a, b)| a / b).collect())
    }
}

/// Conditional joint law of `(T_i : i in J)` given the margins.
#[derive(Debug)]
pub struct JointDistribution {
    /// Endpoints retained, relative to the margins the distribution was built from.
    pub endpoints: EndpointSet,
    /// Margins collapsed to the retained endpoints.
    pub margins: Margins,
    /// Sorted by decreasing weight, ties by decreasing `t` lexicographically.
    pub points: Vec<SupportPoint>,
    /// `C(N, n_trt)`.
    pub total: BigUint,
    index: HashMap<Vec<u32>, usize>,
    dominance: OnceLock<Dominance>,
}

impl Clone for JointDistribution {
    fn clone(&self) -> Self {
        JointDistribution::from_parts(
            self.endpoints,
            self.margins.clone(),
            self.points.clone(),
            self.total.clone(),
        )
    }
}

impl JointDistribution {
    fn from_parts(
        endpoints: EndpointSet,
        margins: Margins,
        mut points: Vec<SupportPoint>,
        total: BigUint,
    ) -> Self {
        points.sort_by(|a, b| b.weight.cmp(&a.weight).then_with(|| b.t.cmp(&a.t)));
        let index = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.t.clone(), i))
            .collect();
        JointDistribution {
            endpoints,
            margins,
            points,
            total,
            index,
            dominance: OnceLock::new(),
        }
    }

    /// Number of retained endpoints.
    pub fn k(&self) -> usize {
        self.margins.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, t: &[u32]) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn dominance(&self) -> &Dominance {
        self.dominance.get_or_init(|| Dominance::new(self))
    }

    pub fn probability(&self, i: usize) -> f64 {
        ratio_to_f64(&self.points[i].weight, &self.total)
    }

    pub fn has_alt(&self) -> bool {
        self.points.iter().all(|p| p.alt.is_some())
    }

    /// Attach alternative masses from a map keyed by `t`.
    pub fn with_alt(mut self, masses: &HashMap<Vec<u32>, f64>) -> Self {
        for p in &mut self.points {
            p.alt = Some(masses.get(&p.t).copied().unwrap_or(0.0));
        }
        self
    }

    /// Marginalize onto the coordinates in `sub` (positions within this distribution).
    pub fn marginalize(&self, sub: EndpointSet) -> Result<JointDistribution> {
        sub.check(self.k())?;
        let positions = sub.indices();
        let mut acc: HashMap<Vec<u32>, (BigUint, Option<f64>)> = HashMap::new();
        for p in &self.points {
            let t: Vec<u32> = positions.iter().map(|&j| p.t[j]).collect();
            let e = acc
                .entry(t)
                .or_insert((BigUint::zero(), p.alt.map(|_| 0.0)));
            e.0 += &p.weight;
            if let (Some(a), Some(b)) = (&mut e.1, p.alt) {
                *a += b;
            }
        }
        let original = self.endpoints.indices();
        let endpoints =
            EndpointSet::from_indices(&positions.iter().map(|&j| original[j]).collect::<Vec<_>>());
        let points = acc
            .into_iter()
            .map(|(t, (weight, alt))| SupportPoint { t, weight, alt })
            .collect();
        Ok(JointDistribution::from_parts(
            endpoints,
            self.margins.restrict(sub)?,
            points,
            self.total.clone(),
        ))
    }

    pub fn dump(&self) -> DistributionDump {
        DistributionDump {
            endpoints: self.endpoints.indices().iter().map(|i| i + 1).collect(),
            total_weight: self.total.to_string(),
            points: self
                .points
                .iter()
                .map(|p| DumpPoint {
                    t: p.t.clone(),
                    weight: p.weight.to_string(),
                    alt_mass: p.alt,
                })
                .collect(),
        }
    }
}

/// Diagnostic JSON form of a distribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionDump {
    pub endpoints: Vec<usize>,
    pub total_weight: String,
    pub points: Vec<DumpPoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DumpPoint {
    pub t: Vec<u32>,
    pub weight: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alt_mass: Option<f64>,
}

fn accumulate<T>(
    margins: &Margins,
    positions: &[usize],
    cap: u64,
) -> Result<HashMap<Vec<u32>, BigUint>>
where
    T: Clone + From<u64> + Into<BigUint> + for<'a> AddAssign<&'a T>,
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    let k = margins.k;
    let maxm = margins.m.iter().copied().max().unwrap_or(0);
    // Pascal rows up to the largest margin.
    let mut pascal: Vec<Vec<T>> = Vec::with_capacity(maxm as usize + 1);
    for n in 0..=maxm as usize {
        let mut row = vec![T::from(1); n + 1];
        for j in 1..n {
            let mut v = pascal[n - 1][j - 1].clone();
            v += &pascal[n - 1][j];
            row[j] = v;
        }
        pascal.push(row);
    }
    let full = EndpointSet::full(k);
    let mut acc: HashMap<Vec<u32>, T> = HashMap::new();
    for_each_y(margins, cap, |y| {
        let mut w = T::from(1);
        for (s, &v) in y.iter().enumerate() {
            if v > 0 && v < margins.m[s] {
                w = &w * &pascal[margins.m[s] as usize][v as usize];
            }
        }
        let t_full = project(k, y, full).expect("valid projection");
        let t: Vec<u32> = positions.iter().map(|&i| t_full[i]).collect();
        match acc.get_mut(&t) {
            Some(e) => *e += &w,
            None => {
                acc.insert(t, w);
            }
        }
    })?;
    Ok(acc.into_iter().map(|(t, w)| (t, w.into())).collect())
}

/// Exact conditional null distribution of `(T_i : i in J)`.
pub fn joint_null_distribution(
    margins: &Margins,
    endpoints: EndpointSet,
) -> Result<JointDistribution> {
    joint_null_distribution_capped(margins, endpoints, DEFAULT_SUPPORT_CAP)
}

pub fn joint_null_distribution_capped(
    margins: &Margins,
    endpoints: EndpointSet,
    cap: u64,
) -> Result<JointDistribution> {
    let restricted = margins.restrict(endpoints)?;
    let total = binomial(margins.total(), margins.n_trt);
    let positions: Vec<usize> = (0..restricted.k).collect();
    let acc = if total.bits() <= 127 {
        accumulate::<u128>(&restricted, &positions, cap)?
    } else {
        accumulate::<BigUint>(&restricted, &positions, cap)?
    };
    let points = acc
        .into_iter()
        .map(|(t, weight)| SupportPoint {
            t,
            weight,
            alt: None,
        })
        .collect();
    Ok(JointDistribution::from_parts(
        endpoints, restricted, points, total,
    ))
}

/// Conditional masses of `(T_i : i in J)` under odds `r`, keyed by `t`.
///
/// `r` is indexed by the categories of the full `margins`; marginalization onto
/// `J` happens after the non-central weights are formed.
pub fn alt_masses(
    margins: &Margins,
    odds: &OddsVector,
    endpoints: EndpointSet,
) -> Result<HashMap<Vec<u32>, f64>> {
    endpoints.check(margins.k)?;
    if odds.0.len() != margins.d() {
        return Err(Error::InvalidProbability(format!(
            "expected {} odds, found {}",
            margins.d(),
            odds.0.len()
        )));
    }
    let k = margins.k;
    let positions = endpoints.indices();
    let ln_r: Vec<f64> = odds.0.iter().map(|r| r.ln()).collect();
    let full = EndpointSet::full(k);
    let mut logs: Vec<(Vec<u32>, f64)> = Vec::new();
    for_each_y(margins, DEFAULT_SUPPORT_CAP, |y| {
        let lw: f64 = y
            .iter()
            .enumerate()
            .map(|(s, &v)| ln_binomial(margins.m[s], v) + v as f64 * ln_r[s])
            .sum();
        let t_full = project(k, y, full).expect("valid projection");
        logs.push((positions.iter().map(|&i| t_full[i]).collect(), lw));
    })?;
    let max = logs
        .iter()
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut acc: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut norm = 0.0;
    for (t, lw) in logs {
        let w = (lw - max).exp();
        norm += w;
        *acc.entry(t).or_insert(0.0) += w;
    }
    for v in acc.values_mut() {
        *v /= norm;
    }
    Ok(acc)
}

/// Null distribution of `(T_i : i in J)` with alternative masses under odds `r`.
pub fn joint_alt_distribution(
    margins: &Margins,
    odds: &OddsVector,
    endpoints: EndpointSet,
) -> Result<JointDistribution> {
    let masses = alt_masses(margins, odds, endpoints)?;
    Ok(joint_null_distribution(margins, endpoints)?.with_alt(&masses))
}

/// Exact null law of a single statistic `T_i`: hypergeometric given the collapsed margins.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalNull {
    pub lo: u32,
    pub hi: u32,
    /// `weights[t - lo]` for `t` in `lo..=hi`.
    pub weights: Vec<BigUint>,
    /// `tails[t - lo] = sum of weights[u - lo] for u >= t`.
    pub tails: Vec<BigUint>,
    pub total: BigUint,
}

impl MarginalNull {
    pub fn new(margins: &Margins, endpoint: usize) -> Result<Self> {
        EndpointSet::single(endpoint).check(margins.k)?;
        let successes = margins.successes(endpoint);
        let n = margins.total();
        let lo = margins.n_trt.saturating_sub(n - successes) as u32;
        let hi = margins.n_trt.min(successes) as u32;
        let weights: Vec<BigUint> = (lo..=hi)
            .map(|t| {
                binomial(successes, t as u64) * binomial(n - successes, margins.n_trt - t as u64)
            })
            .collect();
        let mut tails = weights.clone();
        for j in (0..tails.len().saturating_sub(1)).rev() {
            let next = tails[j + 1].clone();
            tails[j] += next;
        }
        Ok(MarginalNull {
            lo,
            hi,
            weights,
            tails,
            total: binomial(n, margins.n_trt),
        })
    }

    /// Integer numerator of `P(T >= t)` over `total`.
    pub fn tail_weight(&self, t: u32) -> BigUint {
        if t <= self.lo {
            self.total.clone()
        } else if t > self.hi {
            BigUint::zero()
        } else {
            self.tails[(t - self.lo) as usize].clone()
        }
    }

    pub fn tail(&self, t: u32) -> Ratio<BigUint> {
        Ratio::new(self.tail_weight(t), self.total.clone())
    }

    pub fn tail_f64(&self, t: u32) -> f64 {
        ratio_to_f64(&self.tail_weight(t), &self.total)
    }

    /// Smallest `c` in the support with `P(T >= c) <= alpha`, if any.
    pub fn critical_value(&self, alpha: &crate::model::Alpha) -> Option<u32> {
        let cap = alpha.capacity(&self.total);
        (self.lo..=self.hi).find(|&c| self.tail_weight(c) <= cap)
    }
}

/// `P(T_i >= t)` under the null, as an exact rational.
pub fn marginal_tail(margins: &Margins, endpoint: usize, t: u32) -> Result<Ratio<BigUint>> {
    Ok(MarginalNull::new(margins, endpoint)?.tail(t))
}

/// One-sided Fisher exact p-value `P(T_i >= t_obs)`.
pub fn fisher_p(margins: &Margins, endpoint: usize, t_obs: u32) -> Result<Ratio<BigUint>> {
    let null = MarginalNull::new(margins, endpoint)?;
    if t_obs < null.lo || t_obs > null.hi {
        return Err(Error::NotInSupport(vec![t_obs]));
    }
    Ok(null.tail(t_obs))
}

/// Upper tails of Fisher's non-central hypergeometric law of `T_i` with odds ratio `psi`.
/// Returns `P(T >= t)` for `t` in `lo..=hi`.
pub fn marginal_alt_tails(margins: &Margins, endpoint: usize, psi: f64) -> Result<Vec<f64>> {
    let null = MarginalNull::new(margins, endpoint)?;
    let successes = margins.successes(endpoint);
    let n = margins.total();
    let logs: Vec<f64> = (null.lo..=null.hi)
        .map(|t| {
            ln_binomial(successes, t as u64)
                + ln_binomial(n - successes, margins.n_trt - t as u64)
                + t as f64 * psi.ln()
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let norm: f64 = w.iter().sum();
    let mut tails = vec![0.0; w.len()];
    let mut run = 0.0;
    for j in (0..w.len()).rev() {
        run += w[j] / norm;
        tails[j] = run.min(1.0);
    }
    Ok(tails)
}

/// Exact conditional probabilities `weight / total` of a distribution, as f64.
pub fn probabilities(dist: &JointDistribution) -> Vec<f64> {
    let total = dist.total.to_f64().unwrap_or(f64::INFINITY);
    if total.is_finite() {
        dist.points
            .iter()
            .map(|p| p.weight.to_f64().unwrap_or(0.0) / total)
            .collect()
    } else {
        (0..dist.len()).map(|i| dist.probability(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CrossTable;

    fn toy() -> Margins {
        Margins::from_display(2, &[2, 1, 1, 0], 2).unwrap()
    }

    fn table1_margins() -> Margins {
        CrossTable::from_patterns(&[("11", 80, 57), ("10", 13, 12), ("01", 1, 10), ("00", 0, 2)])
            .unwrap()
            .margins()
    }

    #[test]
    fn toy_support_enumeration() {
        let w = enumerate_support(&toy()).unwrap();
        // Display order (y_11, y_10, y_01, y_00).
        let mut disp: Vec<Vec<u64>> = w
            .iter()
            .map(|y| y.iter().rev().copied().collect())
            .collect();
        disp.sort();
        disp.reverse();
        assert_eq!(
            disp,
            vec![
                vec![2, 0, 0, 0],
                vec![1, 1, 0, 0],
                vec![1, 0, 1, 0],
                vec![0, 1, 1, 0]
            ]
        );
    }

    #[test]
    fn collapsed_support_is_an_interval() {
        let m = Margins::from_display(1, &[162, 13], 94).unwrap();
        let w = enumerate_support(&m).unwrap();
        assert_eq!(w.len(), 14);
        let succ: Vec<u64> = w.iter().map(|y| y[1]).collect();
        assert_eq!(*succ.iter().min().unwrap(), 81);
        assert_eq!(*succ.iter().max().unwrap(), 94);
    }

    #[test]
    fn everyone_treated_gives_single_point() {
        let m = Margins::new(2, vec![1, 2, 3, 4], 10).unwrap();
        assert_eq!(enumerate_support(&m).unwrap(), vec![vec![1, 2, 3, 4]]);
    }

    #[test]
    fn support_cap_is_enforced() {
        assert!(matches!(
            enumerate_support_capped(&table1_margins(), 10),
            Err(Error::SupportTooLarge { cap: 10 })
        ));
    }

    #[test]
    fn table1_support_size() {
        let d = joint_null_distribution(&table1_margins(), EndpointSet::full(2)).unwrap();
        assert_eq!(d.len(), 386);
        let sum = d.points.iter().fold(BigUint::zero(), |a, p| a + &p.weight);
        assert_eq!(sum, binomial(175, 94));
    }

    #[test]
    fn single_endpoint_is_hypergeometric() {
        let m = table1_margins();
        let d = joint_null_distribution(&m, EndpointSet::single(1)).unwrap();
        let h = MarginalNull::new(&m, 1).unwrap();
        assert_eq!(d.len(), h.weights.len());
        for p in &d.points {
            assert_eq!(p.weight, h.weights[(p.t[0] - h.lo) as usize]);
        }
    }

    #[test]
    fn canonical_order() {
        let d = joint_null_distribution(&table1_margins(), EndpointSet::full(2)).unwrap();
        for w in d.points.windows(2) {
            assert!(w[0].weight > w[1].weight || (w[0].weight == w[1].weight && w[0].t > w[1].t));
        }
    }

    #[test]
    fn central_alternative_equals_null() {
        let m = toy();
        let d = joint_alt_distribution(&m, &OddsVector::central(4), EndpointSet::full(2)).unwrap();
        let probs = probabilities(&d);
        for (p, q) in d.points.iter().zip(probs) {
            assert!((p.alt.unwrap() - q).abs() < 1e-12);
        }
    }

    #[test]
    fn fisher_thresholds_and_p_values() {
        let m = table1_margins();
        let alpha = "0.025".parse().unwrap();
        let urine = MarginalNull::new(&m, 0).unwrap();
        let duct = MarginalNull::new(&m, 1).unwrap();
        assert_eq!(urine.critical_value(&alpha), Some(91));
        assert_eq!(duct.critical_value(&alpha), Some(85));
        let pu = ratio_to_f64(
            fisher_p(&m, 0, 93).unwrap().numer(),
            fisher_p(&m, 0, 93).unwrap().denom(),
        );
        let pd = ratio_to_f64(
            fisher_p(&m, 1, 81).unwrap().numer(),
            fisher_p(&m, 1, 81).unwrap().denom(),
        );
        assert_eq!(format!("{pu:.4}"), "0.0005");
        assert_eq!(format!("{pd:.4}"), "0.3361");
        assert!(fisher_p(&m, 0, 95).is_err());
        assert!(fisher_p(&m, 0, urine.lo).unwrap().is_one());
        assert!(marginal_tail(&m, 0, 3).unwrap().is_one());
    }

    #[test]
    fn noncentral_marginal_tails_at_unit_odds_match_null() {
        let m = table1_margins();
        let h = MarginalNull::new(&m, 1).unwrap();
        let tails = marginal_alt_tails(&m, 1, 1.0).unwrap();
        for (j, t) in (h.lo..=h.hi).enumerate() {
            assert!((tails[j] - h.tail_f64(t)).abs() < 1e-12);
        }
    }
}
