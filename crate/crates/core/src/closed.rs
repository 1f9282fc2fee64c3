//! Closed testing over all intersection hypotheses.

use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::bonf::{minp_p_value, minp_region, BonfMethod, BonfObjective, CriticalBoundaries};
use crate::dist::{
    joint_alt_distribution, joint_null_distribution, JointDistribution, MarginalNull, OddsVector,
};
use crate::error::{Error, Result};
use crate::model::{project, ratio_to_f64, Alpha, CrossTable, EndpointSet, Margins};
use crate::power::cells_from_marginals;
use crate::region::{region_p_value, Criterion, Objective, RejectionRegion};
use crate::search::{branch_and_bound, greedy_steps, GreedyOp, DEFAULT_MAX_ITER};

/// The construction used for every local test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    OptimalAlpha,
    OptimalArea,
    OptimalPower,
    Greedy,
    BonfUnweighted,
    BonfHkt,
    BonfWt,
    BonfOptimalAlpha,
    BonfOptimalPower,
    BonfGreedy,
    Minp,
}

impl MethodKind {
    pub const ALL: [MethodKind; 11] = [
        MethodKind::OptimalAlpha,
        MethodKind::OptimalArea,
        MethodKind::OptimalPower,
        MethodKind::Greedy,
        MethodKind::BonfUnweighted,
        MethodKind::BonfHkt,
        MethodKind::BonfWt,
        MethodKind::BonfOptimalAlpha,
        MethodKind::BonfOptimalPower,
        MethodKind::BonfGreedy,
        MethodKind::Minp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::OptimalAlpha => "optimal-alpha",
            MethodKind::OptimalArea => "optimal-area",
            MethodKind::OptimalPower => "optimal-power",
            MethodKind::Greedy => "greedy",
            MethodKind::BonfUnweighted => "bonf-unweighted",
            MethodKind::BonfHkt => "bonf-hkt",
            MethodKind::BonfWt => "bonf-wt",
            MethodKind::BonfOptimalAlpha => "bonf-optimal-alpha",
            MethodKind::BonfOptimalPower => "bonf-optimal-power",
            MethodKind::BonfGreedy => "bonf-greedy",
            MethodKind::Minp => "minp",
        }
    }

    /// Uses the joint permutation distribution, and hence exchangeability of the outcome vectors.
    pub fn is_joint(self) -> bool {
        matches!(
            self,
            MethodKind::OptimalAlpha
                | MethodKind::OptimalArea
                | MethodKind::OptimalPower
                | MethodKind::Greedy
                | MethodKind::Minp
        )
    }

    pub fn needs_alternative(self) -> bool {
        matches!(
            self,
            MethodKind::OptimalPower | MethodKind::BonfOptimalPower
        )
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidMethod(format!("unknown method `{s}`")))
    }
}

/// Assumed alternative: marginal rates per group and a common pairwise correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltSpec {
    pub p_trt: Vec<f64>,
    pub p_ctr: Vec<f64>,
    pub rho: f64,
}

impl AltSpec {
    pub fn odds(&self) -> Result<OddsVector> {
        let trt = cells_from_marginals(&self.p_trt, self.rho)?;
        let ctr = cells_from_marginals(&self.p_ctr, self.rho)?;
        OddsVector::from_cells(&trt, &ctr)
    }

    pub fn k(&self) -> usize {
        self.p_trt.len()
    }
}

impl fmt::Display for AltSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<String> = self
            .p_trt
            .iter()
            .zip(&self.p_ctr)
            .map(|(a, b)| format!("{a}/{b}"))
            .collect();
        write!(f, "rates={},rho={}", pairs.join(":"), self.rho)
    }
}

/// Parses `rates=T1/C1:T2/C2,rho=R`.
impl FromStr for AltSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidMethod(format!("alternative `{s}`: {msg}"));
        let mut p_trt = Vec::new();
        let mut p_ctr = Vec::new();
        let mut rho = 0.0;
        let mut seen_rates = false;
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad("expected key=value"))?;
            match key.trim() {
                "rates" => {
                    seen_rates = true;
                    for pair in value.split(':') {
                        let (a, b) = pair
                            .split_once('/')
                            .ok_or_else(|| bad("rates are trt/ctr pairs"))?;
                        p_trt.push(a.trim().parse().map_err(|_| bad("bad rate"))?);
                        p_ctr.push(b.trim().parse().map_err(|_| bad("bad rate"))?);
                    }
                }
                "rho" => rho = value.trim().parse().map_err(|_| bad("bad rho"))?,
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        if !seen_rates {
            return Err(bad("missing rates"));
        }
        Ok(AltSpec { p_trt, p_ctr, rho })
    }
}

/// Full description of a local test construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub consonant: bool,
    pub alt: Option<AltSpec>,
    /// Tie-breaking criteria after the primary one (joint optimal methods).
    pub lex: Vec<Criterion>,
    pub max_iter: u64,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        MethodSpec {
            kind,
            consonant: false,
            alt: None,
            lex: Vec::new(),
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn consonant(mut self, on: bool) -> Self {
        self.consonant = on;
        self
    }

    pub fn with_alt(mut self, alt: AltSpec) -> Self {
        self.alt = Some(alt);
        self
    }

    pub fn with_lex(mut self, lex: Vec<Criterion>) -> Self {
        self.lex = lex;
        self
    }

    pub fn with_max_iter(mut self, max_iter: u64) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn label(&self) -> String {
        let mut s = self.kind.name().to_string();
        if self.consonant {
            s.push_str(" consonant");
        }
        if let Some(a) = &self.alt {
            s.push_str(&format!(" [{a}]"));
        }
        if !self.lex.is_empty() {
            let names: Vec<String> = self.lex.iter().map(|c| c.to_string()).collect();
            s.push_str(&format!(" lex={}", names.join(",")));
        }
        s
    }

    /// Objective of the joint optimal methods.
    pub fn objective(&self) -> Option<Result<Objective>> {
        let primary = match self.kind {
            MethodKind::OptimalAlpha => Criterion::Alpha,
            MethodKind::OptimalArea => Criterion::Area,
            MethodKind::OptimalPower => Criterion::Power,
            _ => return None,
        };
        let mut criteria = vec![primary];
        criteria.extend(self.lex.iter().copied());
        Some(Objective::new(criteria))
    }

    fn bonf_method(&self) -> Result<Option<BonfMethod>> {
        let alt = || -> Result<BonfObjective> {
            let a = self.alt.as_ref().ok_or(Error::MissingAlternative)?;
            BonfObjective::power_from_rates(&a.p_trt, &a.p_ctr)
        };
        Ok(Some(match self.kind {
            MethodKind::BonfUnweighted => BonfMethod::Unweighted,
            MethodKind::BonfHkt => BonfMethod::Hkt,
            MethodKind::BonfWt => BonfMethod::WestfallTroendle,
            MethodKind::BonfOptimalAlpha => BonfMethod::Optimal(BonfObjective::AlphaSum),
            MethodKind::BonfOptimalPower => BonfMethod::Optimal(alt()?),
            MethodKind::BonfGreedy => BonfMethod::Greedy(BonfObjective::AlphaSum, GreedyOp::Argmin),
            _ => return Ok(None),
        }))
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.kind.needs_alternative() {
            let a = self.alt.as_ref().ok_or(Error::MissingAlternative)?;
            if a.k() != k || a.p_ctr.len() != k {
                return Err(Error::InvalidMethod(format!(
                    "alternative has {} endpoints, data has {k}",
                    a.k()
                )));
            }
        }
        if self.consonant && self.kind.is_joint() && k > 2 {
            return Err(Error::UnsupportedConsonance(format!(
                "{} with {k} endpoints; joint consonance is only defined for two endpoints",
                self.kind
            )));
        }
        if self.consonant && self.kind == MethodKind::Minp {
            return Err(Error::UnsupportedConsonance("minp".into()));
        }
        Ok(())
    }
}

/// Parses `name [consonant] [alt=rates=...,rho=...] [lex=a,b] [max-iter=N]`.
impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let kind: MethodKind = tokens
            .next()
            .ok_or_else(|| Error::InvalidMethod("empty method spec".into()))?
            .parse()?;
        let mut spec = MethodSpec::new(kind);
        for token in tokens {
            match token.split_once('=') {
                None if token == "consonant" => spec.consonant = true,
                Some(("alt", v)) => spec.alt = Some(v.parse()?),
                Some(("lex", v)) => {
                    spec.lex = v.split(',').map(|c| c.parse()).collect::<Result<_>>()?;
                }
                Some(("max-iter", v)) => {
                    spec.max_iter = v
                        .parse()
                        .map_err(|_| Error::InvalidMethod(format!("bad iteration cap `{v}`")))?;
                }
                _ => {
                    return Err(Error::InvalidMethod(format!(
                        "unknown modifier `{token}` in `{s}`"
                    )))
                }
            }
        }
        Ok(spec)
    }
}

/// Points of a two-endpoint support where neither marginal Fisher test rejects at `alpha`.
pub fn consonance_forbidden_block(dist: &JointDistribution, alpha: &Alpha) -> Result<FixedBitSet> {
    if dist.k() != 2 {
        return Err(Error::UnsupportedConsonance(format!(
            "forbidden block needs two endpoints, found {}",
            dist.k()
        )));
    }
    let c: Vec<Option<u32>> = (0..2)
        .map(|i| Ok(MarginalNull::new(&dist.margins, i)?.critical_value(alpha)))
        .collect::<Result<_>>()?;
    Ok(forbidden_from_boundaries(dist, &c))
}

/// `{t : t_i < c_i for every i}`, with `None` meaning endpoint `i` never rejects.
pub fn forbidden_from_boundaries(dist: &JointDistribution, c: &[Option<u32>]) -> FixedBitSet {
    let mut b = FixedBitSet::with_capacity(dist.len());
    for (n, p) in dist.points.iter().enumerate() {
        let rejected =
            p.t.iter()
                .zip(c)
                .any(|(&t, c)| matches!(c, Some(c) if t >= *c));
        if !rejected {
            b.insert(n);
        }
    }
    b
}

/// Boundary caps for subset `endpoints` from the boundaries of its computed supersets.
pub fn consonant_boundary_caps(
    endpoints: EndpointSet,
    supersets: &[(EndpointSet, &CriticalBoundaries)],
) -> Result<Vec<Option<u32>>> {
    let members = endpoints.indices();
    let mut caps: Vec<Option<u32>> = vec![None; members.len()];
    for (set, b) in supersets {
        if !endpoints.is_subset_of(*set) || *set == endpoints {
            continue;
        }
        for (pos, &i) in members.iter().enumerate() {
            let sp = set
                .position(i)
                .ok_or(Error::BadSubset { k: members.len() })?;
            if let Some(c) = b.c[sp] {
                caps[pos] = Some(caps[pos].map_or(c, |x| x.min(c)));
            }
        }
    }
    Ok(caps)
}

/// Decision rule of one intersection hypothesis.
#[derive(Clone, Debug)]
pub enum LocalRule {
    Region {
        dist: JointDistribution,
        region: RejectionRegion,
    },
    Boundaries(CriticalBoundaries),
}

#[derive(Clone, Debug)]
pub struct LocalTest {
    pub endpoints: EndpointSet,
    pub rule: LocalRule,
    pub iterations: u64,
    pub confirmed_optimal: bool,
}

impl LocalTest {
    /// Decision given the statistic restricted to this test's endpoints.
    pub fn rejects(&self, t: &[u32]) -> bool {
        match &self.rule {
            LocalRule::Region { dist, region } => {
                dist.position(t).is_some_and(|i| region.contains(i))
            }
            LocalRule::Boundaries(b) => b.rejects(t),
        }
    }

    /// Null level of the local rule, exact.
    pub fn level(&self) -> Ratio<BigUint> {
        match &self.rule {
            LocalRule::Region { region, .. } => region.level(),
            LocalRule::Boundaries(b) => b.level_sum(),
        }
    }
}

/// All local tests of a closed procedure for fixed margins.
#[derive(Clone, Debug)]
pub struct ClosedProcedure {
    pub k: usize,
    pub margins: Margins,
    pub alpha: Alpha,
    pub spec: MethodSpec,
    /// In closure order: decreasing size, then lexicographic.
    pub locals: Vec<LocalTest>,
}

/// Rejections of one closed procedure at one data point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decisions {
    /// Per local test, in closure order.
    pub local: Vec<bool>,
    pub global: bool,
    pub elementary: Vec<bool>,
}

impl ClosedProcedure {
    pub fn build(margins: &Margins, spec: &MethodSpec, alpha: &Alpha) -> Result<Self> {
        let k = margins.k;
        spec.validate(k)?;
        let odds = match (&spec.alt, spec.kind) {
            (Some(a), MethodKind::OptimalPower) => Some(a.odds()?),
            _ => None,
        };
        let bonf = spec.bonf_method()?;
        let objective = spec.objective().transpose()?;
        let mut locals: Vec<LocalTest> = Vec::new();
        for set in EndpointSet::closure_order(k) {
            let sub_margins = margins.restrict(set)?;
            let local = if let Some(method) = &bonf {
                let method = method.restrict(set);
                let limits = if spec.consonant && matches!(method, BonfMethod::Optimal(_)) {
                    let computed: Vec<(EndpointSet, &CriticalBoundaries)> = locals
                        .iter()
                        .filter_map(|l| match &l.rule {
                            LocalRule::Boundaries(b) => Some((l.endpoints, b)),
                            LocalRule::Region { .. } => None,
                        })
                        .collect();
                    Some(consonant_boundary_caps(set, &computed)?)
                } else {
                    None
                };
                let b = method.boundaries(&sub_margins, alpha, limits.as_deref())?;
                LocalTest {
                    endpoints: set,
                    rule: LocalRule::Boundaries(b),
                    iterations: 0,
                    confirmed_optimal: true,
                }
            } else {
                let dist = match &odds {
                    Some(o) => joint_alt_distribution(margins, o, set)?,
                    None => joint_null_distribution(margins, set)?,
                };
                let forbidden = if spec.consonant && k == 2 && set.len() == 2 {
                    Some(consonance_forbidden_block(&dist, alpha)?)
                } else {
                    None
                };
                let (region, iterations, confirmed) = match (&objective, spec.kind) {
                    (Some(obj), _) => {
                        let r =
                            branch_and_bound(&dist, obj, alpha, forbidden.as_ref(), spec.max_iter)?;
                        (r.region, r.iterations, r.confirmed_optimal)
                    }
                    (None, MethodKind::Greedy) => {
                        let steps = greedy_steps(
                            &dist,
                            Criterion::Alpha,
                            GreedyOp::Argmin,
                            alpha,
                            forbidden.as_ref(),
                        )?;
                        (
                            steps
                                .last()
                                .cloned()
                                .unwrap_or_else(|| RejectionRegion::empty(&dist)),
                            0,
                            true,
                        )
                    }
                    (None, _) => (minp_region(&dist, alpha)?.region, 0, true),
                };
                LocalTest {
                    endpoints: set,
                    rule: LocalRule::Region { dist, region },
                    iterations,
                    confirmed_optimal: confirmed,
                }
            };
            locals.push(local);
        }
        Ok(ClosedProcedure {
            k,
            margins: margins.clone(),
            alpha: alpha.clone(),
            spec: spec.clone(),
            locals,
        })
    }

    /// Decisions for the full statistic vector `t` (one entry per endpoint).
    pub fn decide(&self, t: &[u32]) -> Decisions {
        let local: Vec<bool> = self
            .locals
            .iter()
            .map(|l| {
                let sub: Vec<u32> = l.endpoints.indices().iter().map(|&i| t[i]).collect();
                l.rejects(&sub)
            })
            .collect();
        let elementary = (0..self.k)
            .map(|i| {
                self.locals
                    .iter()
                    .zip(&local)
                    .all(|(l, &r)| !l.endpoints.contains(i) || r)
            })
            .collect();
        Decisions {
            global: local[0],
            local,
            elementary,
        }
    }

    /// Decisions for a vector `y` of treatment counts per category.
    pub fn decide_counts(&self, y: &[u64]) -> Result<Decisions> {
        let t = project(self.k, y, EndpointSet::full(self.k))?;
        Ok(self.decide(&t))
    }

    pub fn confirmed_optimal(&self) -> bool {
        self.locals.iter().all(|l| l.confirmed_optimal)
    }

    pub fn max_iterations(&self) -> u64 {
        self.locals.iter().map(|l| l.iterations).max().unwrap_or(0)
    }

    /// Local p-value of test `index` given the full statistic `t`.
    pub fn local_p_value(&self, index: usize, t: &[u32]) -> Result<LocalPValue> {
        let l = &self.locals[index];
        let sub: Vec<u32> = l.endpoints.indices().iter().map(|&i| t[i]).collect();
        let rejected = l.rejects(&sub);
        let p = match &l.rule {
            LocalRule::Region { dist, region } => {
                if self.spec.kind == MethodKind::Minp {
                    minp_p_value(dist, &sub)?
                } else {
                    region_p_value(region, dist, &sub)?.p
                }
            }
            LocalRule::Boundaries(_) => {
                let method = self
                    .spec
                    .bonf_method()?
                    .expect("boundary rule comes from a Bonferroni method")
                    .restrict(l.endpoints);
                let limits = if self.spec.consonant && matches!(method, BonfMethod::Optimal(_)) {
                    let computed: Vec<(EndpointSet, &CriticalBoundaries)> = self.locals[..index]
                        .iter()
                        .filter_map(|x| match &x.rule {
                            LocalRule::Boundaries(b) => Some((x.endpoints, b)),
                            LocalRule::Region { .. } => None,
                        })
                        .collect();
                    Some(consonant_boundary_caps(l.endpoints, &computed)?)
                } else {
                    None
                };
                method.p_value(
                    &self.margins.restrict(l.endpoints)?,
                    &sub,
                    limits.as_deref(),
                )?
            }
        };
        let below = p <= *self.alpha.ratio();
        Ok(LocalPValue {
            p,
            rejected,
            inconsistent: below != rejected,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalPValue {
    pub p: Ratio<BigUint>,
    pub rejected: bool,
    /// The p-value and the region decision disagree about rejection at `alpha`.
    pub inconsistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsetReport {
    /// One-based endpoint indices.
    pub endpoints: Vec<usize>,
    pub p_value: f64,
    pub p_num: String,
    pub p_den: String,
    pub rejected: bool,
    pub level: f64,
    pub confirmed_optimal: bool,
    pub iterations: u64,
    /// Set when `p_value <= alpha` disagrees with the local decision.
    pub p_value_inconsistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ElementaryReport {
    pub endpoint: usize,
    pub adjusted_p: f64,
    pub adjusted_p_num: String,
    pub adjusted_p_den: String,
    pub rejected: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedTestReport {
    pub method: String,
    pub alpha: String,
    pub statistic: Vec<u32>,
    pub subsets: Vec<SubsetReport>,
    pub elementary: Vec<ElementaryReport>,
    pub global_adjusted_p: f64,
    pub global_rejected: bool,
    pub confirmed_optimal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Run the closed test on observed data.
pub fn closed_test(
    table: &CrossTable,
    spec: &MethodSpec,
    alpha: &Alpha,
) -> Result<ClosedTestReport> {
    let margins = table.margins();
    let procedure = ClosedProcedure::build(&margins, spec, alpha)?;
    let t = table.statistic(EndpointSet::full(table.k()))?;
    let decisions = procedure.decide(&t);
    let mut subsets = Vec::new();
    let mut pvalues = Vec::new();
    for (n, l) in procedure.locals.iter().enumerate() {
        let p = procedure.local_p_value(n, &t)?;
        subsets.push(SubsetReport {
            endpoints: l.endpoints.indices().iter().map(|i| i + 1).collect(),
            p_value: ratio_to_f64(p.p.numer(), p.p.denom()),
            p_num: p.p.numer().to_string(),
            p_den: p.p.denom().to_string(),
            rejected: decisions.local[n],
            level: {
                let lv = l.level();
                ratio_to_f64(lv.numer(), lv.denom())
            },
            confirmed_optimal: l.confirmed_optimal,
            iterations: l.iterations,
            p_value_inconsistent: p.inconsistent,
        });
        pvalues.push(p.p);
    }
    let elementary = (0..table.k())
        .map(|i| {
            let adj = procedure
                .locals
                .iter()
                .zip(&pvalues)
                .filter(|(l, _)| l.endpoints.contains(i))
                .map(|(_, p)| p.clone())
                .max()
                .expect("every endpoint is in the global set");
            ElementaryReport {
                endpoint: i + 1,
                adjusted_p: ratio_to_f64(adj.numer(), adj.denom()),
                adjusted_p_num: adj.numer().to_string(),
                adjusted_p_den: adj.denom().to_string(),
                rejected: decisions.elementary[i],
            }
        })
        .collect();
    let note = spec.kind.is_joint().then(|| {
        "joint permutation distribution assumes identical outcome-vector distributions in both groups under the null".to_string()
    });
    Ok(ClosedTestReport {
        method: spec.label(),
        alpha: alpha.to_string(),
        statistic: t,
        global_adjusted_p: ratio_to_f64(pvalues[0].numer(), pvalues[0].denom()),
        global_rejected: decisions.global,
        confirmed_optimal: procedure.confirmed_optimal(),
        subsets,
        elementary,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1() -> CrossTable {
        CrossTable::from_patterns(&[("11", 80, 57), ("10", 13, 12), ("01", 1, 10), ("00", 0, 2)])
            .unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodKind::ALL {
            assert_eq!(m.name().parse::<MethodKind>().unwrap(), m);
        }
        assert!("optimal".parse::<MethodKind>().is_err());
    }

    #[test]
    fn alt_spec_parsing() {
        let a: AltSpec = "rates=0.9/0.75:0.8/0.7,rho=0.5".parse().unwrap();
        assert_eq!(a.p_trt, vec![0.9, 0.8]);
        assert_eq!(a.p_ctr, vec![0.75, 0.7]);
        assert_eq!(a.rho, 0.5);
        assert_eq!(a.to_string().parse::<AltSpec>().unwrap(), a);
        assert!("rho=0".parse::<AltSpec>().is_err());
        assert!("rates=0.9".parse::<AltSpec>().is_err());
    }

    #[test]
    fn closure_order_starts_with_global() {
        let m = table1().margins();
        let proc_ = ClosedProcedure::build(
            &m,
            &MethodSpec::new(MethodKind::BonfUnweighted),
            &"0.025".parse().unwrap(),
        )
        .unwrap();
        let sets: Vec<Vec<usize>> = proc_.locals.iter().map(|l| l.endpoints.indices()).collect();
        assert_eq!(sets, vec![vec![0, 1], vec![0], vec![1]]);
    }

    #[test]
    fn full_marginal_regions_leave_no_block() {
        let m = Margins::from_display(2, &[3, 1, 1, 2], 3).unwrap();
        let d = joint_null_distribution(&m, EndpointSet::full(2)).unwrap();
        let lo: Vec<Option<u32>> = vec![Some(0), Some(0)];
        assert!(forbidden_from_boundaries(&d, &lo).is_clear());
    }

    #[test]
    fn joint_consonance_needs_two_endpoints() {
        let m = Margins::new(3, vec![1, 1, 1, 1, 1, 1, 1, 1], 4).unwrap();
        let spec = MethodSpec::new(MethodKind::OptimalArea).consonant(true);
        assert!(matches!(
            ClosedProcedure::build(&m, &spec, &"0.05".parse().unwrap()),
            Err(Error::UnsupportedConsonance(_))
        ));
    }

    #[test]
    fn caps_take_minimum_over_supersets() {
        let m = Margins::new(3, vec![2, 1, 1, 2, 1, 2, 2, 3], 7).unwrap();
        let marg = crate::bonf::Marginals::new(&m).unwrap();
        let full = CriticalBoundaries {
            c: vec![Some(5), None, Some(4)],
            tails: vec![
                marg.tail(0, Some(5)),
                BigUint::default(),
                marg.tail(2, Some(4)),
            ],
            total: marg.total.clone(),
        };
        let pair = CriticalBoundaries {
            c: vec![Some(4), Some(6)],
            tails: vec![BigUint::default(), BigUint::default()],
            total: marg.total.clone(),
        };
        let all = EndpointSet::full(3);
        let p01 = EndpointSet::from_indices(&[0, 1]);
        let caps =
            consonant_boundary_caps(EndpointSet::single(0), &[(all, &full), (p01, &pair)]).unwrap();
        assert_eq!(caps, vec![Some(4)]);
        let caps =
            consonant_boundary_caps(EndpointSet::single(1), &[(all, &full), (p01, &pair)]).unwrap();
        assert_eq!(caps, vec![Some(6)]);
        let caps = consonant_boundary_caps(p01, &[(all, &full)]).unwrap();
        assert_eq!(caps, vec![Some(5), None]);
    }
}
