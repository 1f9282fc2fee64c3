//! Unconditional operating characteristics of closed procedures.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_factorial;

use crate::closed::{ClosedProcedure, Decisions, MethodSpec};
use crate::dist::{joint_alt_distribution, OddsVector};
use crate::error::{Error, Result};
use crate::model::{project, Alpha, CellProbabilities, EndpointSet, Margins};

/// Largest number of endpoints for which cell probabilities can be built from rates.
pub const MAX_CORRELATED_ENDPOINTS: usize = 3;

/// Largest number of per-group category vectors enumerated by `margin_distribution`.
pub const MAX_MARGIN_COMPOSITIONS: u64 = 2_000_000;

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn norm_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

const GL6: [(f64, f64); 3] = [
    (0.9324695142031522, 0.1713244923791705),
    (0.6612093864662647, 0.3607615730481384),
    (0.238619186083197, 0.4679139345726904),
];
const GL12: [(f64, f64); 6] = [
    (0.9815606342467191, 0.04717533638651177),
    (0.904117256370475, 0.1069393259953183),
    (0.769902674194305, 0.1600783285433464),
    (0.5873179542866171, 0.2031674267230659),
    (0.3678314989981802, 0.2334925365383547),
    (0.1252334085114692, 0.2491470458134029),
];
const GL20: [(f64, f64); 10] = [
    (0.9931285991850949, 0.01761400713915212),
    (0.9639719272779138, 0.04060142980038694),
    (0.912234428251326, 0.06267204833410906),
    (0.8391169718222188, 0.08327674157670475),
    (0.7463319064601508, 0.1019301198172404),
    (0.636053680726515, 0.1181945319615184),
    (0.5108670019508271, 0.1316886384491766),
    (0.3737060887154196, 0.1420961093183821),
    (0.2277858511416451, 0.1491729864726037),
    (0.07652652113349733, 0.1527533871307259),
];

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `r`
/// (Drezner–Wesolowsky with Genz's refinements).
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let table: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        for &(x, w) in table {
            for s in [1.0 - x, 1.0 + x] {
                let sn = (asr * s).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (2.0 * PI) + norm_cdf(-h) * norm_cdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = (2.0 * PI).sqrt() * norm_cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            let mut sum = 0.0;
            for &(x, w) in table {
                for s in [1.0 - x, 1.0 + x] {
                    let xs = (a * s) * (a * s);
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        let rs = (1.0 - xs).sqrt();
                        let ep = (-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                        sum += w * asr.exp() * (sp - ep);
                    }
                }
            }
            bvn = (a * sum - bvn) / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 {
                norm_cdf(k) - norm_cdf(h)
            } else {
                norm_cdf(-h) - norm_cdf(-k)
            };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(X <= a, Y <= b)` for a standard bivariate normal with correlation `r`.
pub fn bvn_cdf(a: f64, b: f64, r: f64) -> f64 {
    bvn_upper(-a, -b, r)
}

/// `P(Z_1 <= h_1, Z_2 <= h_2, Z_3 <= h_3)` for standard normals with correlations
/// `r12`, `r13`, `r23`, by integrating over `Z_1`.
pub fn tvn_cdf(h: [f64; 3], r12: f64, r13: f64, r23: f64) -> f64 {
    let s12 = (1.0 - r12 * r12).sqrt();
    let s13 = (1.0 - r13 * r13).sqrt();
    let partial = (r23 - r12 * r13) / (s12 * s13);
    let f = |x: f64| norm_pdf(x) * bvn_cdf((h[1] - r12 * x) / s12, (h[2] - r13 * x) / s13, partial);
    let lo = -10.0f64;
    let hi = h[0].min(10.0);
    if hi <= lo {
        return 0.0;
    }
    let pieces = 200;
    let step = (hi - lo) / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let mid = lo + (p as f64 + 0.5) * step;
        let half = step / 2.0;
        for &(x, w) in &GL20 {
            total += w * (f(mid - half * x) + f(mid + half * x));
        }
    }
    (total * step / 2.0).clamp(0.0, 1.0)
}

fn pair_target(p1: f64, p2: f64, rho: f64) -> f64 {
    p1 * p2 + rho * (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt()
}

fn pair_range(p1: f64, p2: f64) -> (f64, f64) {
    let s = (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt();
    let lo = ((p1 + p2 - 1.0).max(0.0) - p1 * p2) / s;
    let hi = (p1.min(p2) - p1 * p2) / s;
    (lo, hi)
}

/// Latent normal correlation giving `P(X_1 = X_2 = 1) = target` for thresholds at `p1`, `p2`.
fn latent_correlation(p1: f64, p2: f64, target: f64) -> f64 {
    let (z1, z2) = (norm_quantile(p1), norm_quantile(p2));
    let (mut lo, mut hi) = (-1.0 + 1e-15, 1.0 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bvn_cdf(z1, z2, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Cell probabilities of `k` binary endpoints with marginal success rates `p`
/// and common pairwise correlation `rho`. Three endpoints use a dichotomized
/// normal whose latent pairwise correlations reproduce `rho` exactly.
pub fn cells_from_marginals(p: &[f64], rho: f64) -> Result<CellProbabilities> {
    let k = p.len();
    if k == 0 {
        return Err(Error::InvalidProbability("no rates given".into()));
    }
    if let Some(bad) = p.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidProbability(format!(
            "rate {bad} outside [0, 1]"
        )));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InfeasibleCorrelation {
            rho,
            lo: -1.0,
            hi: 1.0,
        });
    }
    if k > MAX_CORRELATED_ENDPOINTS && rho != 0.0 {
        return Err(Error::InvalidScenario(format!(
            "correlated outcomes are supported for at most {MAX_CORRELATED_ENDPOINTS} endpoints"
        )));
    }
    let d = 1usize << k;
    if rho == 0.0 || k == 1 {
        let q = (0..d)
            .map(|s| {
                (0..k)
                    .map(|i| {
                        if crate::model::success(k, s, i) {
                            p[i]
                        } else {
                            1.0 - p[i]
                        }
                    })
                    .product()
            })
            .collect();
        return CellProbabilities::new(k, q);
    }
    let degenerate = p.iter().any(|&v| v <= 0.0 || v >= 1.0);
    if degenerate {
        return Err(Error::InfeasibleCorrelation {
            rho,
            lo: 0.0,
            hi: 0.0,
        });
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = pair_range(p[i], p[j]);
            lo = lo.max(a);
            hi = hi.min(b);
        }
    }
    if rho < lo - 1e-12 || rho > hi + 1e-12 {
        return Err(Error::InfeasibleCorrelation { rho, lo, hi });
    }
    // Probability that every endpoint in `set` succeeds.
    let joint_success: Box<dyn Fn(u32) -> f64> = if k == 2 {
        let q11 = pair_target(p[0], p[1], rho);
        Box::new(move |set: u32| match set {
            0 => 1.0,
            0b01 => p[1],
            0b10 => p[0],
            _ => q11,
        })
    } else {
        let z: Vec<f64> = p.iter().map(|&v| norm_quantile(v)).collect();
        let r = |i: usize, j: usize| latent_correlation(p[i], p[j], pair_target(p[i], p[j], rho));
        let (r01, r02, r12) = (r(0, 1), r(0, 2), r(1, 2));
        let triple = tvn_cdf([z[0], z[1], z[2]], r01, r02, r12);
        let pairs = [
            pair_target(p[1], p[2], rho),
            pair_target(p[0], p[2], rho),
            pair_target(p[0], p[1], rho),
        ];
        let p = p.to_vec();
        // Bit `2 - i` of `set` stands for endpoint `i`.
        Box::new(move |set: u32| {
            let members: Vec<usize> = (0..3).filter(|&i| set & (1 << (2 - i)) != 0).collect();
            match members.as_slice() {
                [] => 1.0,
                [i] => p[*i],
                [i, j] => pairs[3 - i - j],
                _ => triple,
            }
        })
    };
    // Inclusion-exclusion over the failing endpoints of each cell.
    let mut q = vec![0.0; d];
    for (s, cell) in q.iter_mut().enumerate() {
        let ones = s as u32;
        let zeros = !ones & (d as u32 - 1);
        let mut sub = zeros;
        let mut acc = 0.0;
        loop {
            let sign = if sub.count_ones().is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            acc += sign * joint_success(ones | sub);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & zeros;
        }
        *cell = acc;
    }
    if q.iter().any(|&v| v < -1e-12) {
        return Err(Error::InfeasibleCorrelation { rho, lo, hi });
    }
    for v in &mut q {
        *v = v.max(0.0);
    }
    let total: f64 = q.iter().sum();
    for v in &mut q {
        *v /= total;
    }
    CellProbabilities::new(k, q)
}

/// Power study configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub k: usize,
    /// Subjects per group.
    pub n: u64,
    pub p_trt: Vec<f64>,
    pub p_ctr: Vec<f64>,
    #[serde(default)]
    pub rho: f64,
    pub alpha: String,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p_trt.len() != self.k || self.p_ctr.len() != self.k {
            return Err(Error::InvalidScenario(format!(
                "k = {} with {} treatment and {} control rates",
                self.k,
                self.p_trt.len(),
                self.p_ctr.len()
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidScenario("n must be positive".into()));
        }
        self.alpha()?;
        self.cells()?;
        Ok(())
    }

    pub fn alpha(&self) -> Result<Alpha> {
        self.alpha.parse()
    }

    pub fn cells(&self) -> Result<(CellProbabilities, CellProbabilities)> {
        Ok((
            cells_from_marginals(&self.p_trt, self.rho)?,
            cells_from_marginals(&self.p_ctr, self.rho)?,
        ))
    }
}

/// Compositions of `n` into `d` nonnegative parts with their multinomial probabilities.
fn multinomial(n: u64, q: &[f64]) -> Vec<(Vec<u64>, f64)> {
    let d = q.len();
    let ln_q: Vec<f64> = q.iter().map(|&v| v.ln()).collect();
    let mut out = Vec::new();
    let mut y = vec![0u64; d];
    fn rec(
        s: usize,
        left: u64,
        y: &mut Vec<u64>,
        ln_q: &[f64],
        n: u64,
        out: &mut Vec<(Vec<u64>, f64)>,
    ) {
        let d = y.len();
        if s == d - 1 {
            y[s] = left;
            let mut lp = ln_factorial(n);
            for (j, &v) in y.iter().enumerate() {
                if v > 0 {
                    if ln_q[j] == f64::NEG_INFINITY {
                        return;
                    }
                    lp += v as f64 * ln_q[j];
                }
                lp -= ln_factorial(v);
            }
            out.push((y.clone(), lp.exp()));
            return;
        }
        for v in 0..=left {
            y[s] = v;
            rec(s + 1, left - v, y, ln_q, n, out);
        }
    }
    rec(0, n, &mut y, &ln_q, n, &mut out);
    out
}

/// Distribution of the pooled category counts for `n_trt` and `n_ctr` subjects.
pub fn margin_distribution(
    k: usize,
    n_trt: u64,
    n_ctr: u64,
    trt: &CellProbabilities,
    ctr: &CellProbabilities,
) -> Result<BTreeMap<Vec<u64>, f64>> {
    if trt.q.len() != 1 << k || ctr.q.len() != 1 << k {
        return Err(Error::InvalidScenario(format!(
            "cell probabilities do not match k = {k}"
        )));
    }
    let d = 1u64 << k;
    for n in [n_trt, n_ctr] {
        let count = crate::dist::binomial(n + d - 1, d - 1);
        if count > MAX_MARGIN_COMPOSITIONS.into() {
            return Err(Error::SupportTooLarge {
                cap: MAX_MARGIN_COMPOSITIONS,
            });
        }
    }
    let a = multinomial(n_trt, &trt.q);
    let b = multinomial(n_ctr, &ctr.q);
    let mut out: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (ya, pa) in &a {
        for (yb, pb) in &b {
            let m: Vec<u64> = ya.iter().zip(yb).map(|(x, y)| x + y).collect();
            *out.entry(m).or_insert(0.0) += pa * pb;
        }
    }
    Ok(out)
}

/// Rejection probabilities of one method.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub method: String,
    /// Intersection of all elementary hypotheses.
    pub global: f64,
    /// At least one elementary hypothesis.
    pub any: f64,
    /// Every elementary hypothesis.
    pub all: f64,
    /// Each elementary hypothesis.
    pub each: Vec<f64>,
    /// Fraction of margins (weighted) or draws whose local searches were confirmed optimal.
    pub confirmed: f64,
    pub iter_q50: u64,
    pub iter_q90: u64,
    pub iter_max: u64,
    /// Number of simulated data sets; absent for exact results.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_sims: Option<u64>,
    /// Monte Carlo standard errors in the order global, any, all, each.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<Vec<f64>>,
}

impl PowerReport {
    pub fn columns(&self) -> Vec<f64> {
        let mut v = vec![self.global, self.any, self.all];
        v.extend(&self.each);
        v
    }
}

#[derive(Default, Clone)]
struct Tally {
    global: f64,
    any: f64,
    all: f64,
    each: Vec<f64>,
}

impl Tally {
    fn new(k: usize) -> Self {
        Tally {
            each: vec![0.0; k],
            ..Default::default()
        }
    }

    fn add(&mut self, d: &Decisions, w: f64) {
        if d.global {
            self.global += w;
        }
        if d.elementary.iter().any(|&e| e) {
            self.any += w;
        }
        if d.elementary.iter().all(|&e| e) {
            self.all += w;
        }
        for (e, &r) in self.each.iter_mut().zip(&d.elementary) {
            if r {
                *e += w;
            }
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.global += other.global;
        self.any += other.any;
        self.all += other.all;
        for (a, b) in self.each.iter_mut().zip(&other.each) {
            *a += b;
        }
    }
}

fn weighted_quantile(mut items: Vec<(u64, f64)>, q: f64) -> u64 {
    if items.is_empty() {
        return 0;
    }
    items.sort_by_key(|x| x.0);
    let total: f64 = items.iter().map(|x| x.1).sum();
    let mut acc = 0.0;
    for &(v, w) in &items {
        acc += w;
        if acc >= q * total - 1e-12 {
            return v;
        }
    }
    items.last().map(|x| x.0).unwrap_or(0)
}

/// Exact unconditional power by enumerating every margin vector.
pub fn exact_power(scenario: &Scenario, spec: &MethodSpec) -> Result<PowerReport> {
    scenario.validate()?;
    let alpha = scenario.alpha()?;
    let (trt, ctr) = scenario.cells()?;
    let odds = OddsVector::from_cells(&trt, &ctr).map_err(|_| {
        Error::InvalidScenario(
            "exact power needs every outcome pattern to be possible in the control group".into(),
        )
    })?;
    let k = scenario.k;
    let margins = margin_distribution(k, scenario.n, scenario.n, &trt, &ctr)?;
    let items: Vec<(Vec<u64>, f64)> = margins.into_iter().filter(|(_, w)| *w > 0.0).collect();
    let results: Vec<Result<(Tally, bool, u64, f64)>> = items
        .par_iter()
        .map(|(m, w)| {
            let margins = Margins::new(k, m.clone(), scenario.n)?;
            let procedure = ClosedProcedure::build(&margins, spec, &alpha)?;
            let dist = joint_alt_distribution(&margins, &odds, EndpointSet::full(k))?;
            let mut tally = Tally::new(k);
            for p in &dist.points {
                tally.add(&procedure.decide(&p.t), p.alt.unwrap_or(0.0));
            }
            Ok((
                tally,
                procedure.confirmed_optimal(),
                procedure.locals[0].iterations,
                *w,
            ))
        })
        .collect();
    let mut total = Tally::new(k);
    let mut confirmed = 0.0;
    let mut mass = 0.0;
    let mut iterations = Vec::with_capacity(results.len());
    for r in results {
        let (mut t, c, it, w) = r?;
        t.global *= w;
        t.any *= w;
        t.all *= w;
        for e in &mut t.each {
            *e *= w;
        }
        total.merge(&t);
        if c {
            confirmed += w;
        }
        mass += w;
        iterations.push((it, w));
    }
    Ok(PowerReport {
        method: spec.label(),
        global: total.global / mass,
        any: total.any / mass,
        all: total.all / mass,
        each: total.each.iter().map(|e| e / mass).collect(),
        confirmed: confirmed / mass,
        iter_q50: weighted_quantile(iterations.clone(), 0.5),
        iter_q90: weighted_quantile(iterations.clone(), 0.9),
        iter_max: iterations.iter().map(|x| x.0).max().unwrap_or(0),
        n_sims: None,
        se: None,
    })
}

/// Category counts of one simulated trial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulatedTrial {
    pub trt: Vec<u64>,
    pub ctr: Vec<u64>,
}

/// Draw trial `index` of a seeded sequence; each draw has its own stream.
pub fn simulate_trial(
    trt: &CellProbabilities,
    ctr: &CellProbabilities,
    n: u64,
    seed: u64,
    index: u64,
) -> Result<SimulatedTrial> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut draw = |q: &CellProbabilities| -> Result<Vec<u64>> {
        let dist = WeightedIndex::new(&q.q)
            .map_err(|e| Error::InvalidProbability(format!("cell masses: {e}")))?;
        let mut counts = vec![0u64; q.q.len()];
        for _ in 0..n {
            counts[dist.sample(&mut rng)] += 1;
        }
        Ok(counts)
    };
    let trt = draw(trt)?;
    let ctr = draw(ctr)?;
    Ok(SimulatedTrial { trt, ctr })
}

/// Monte Carlo power from `n_sims` seeded draws; reproducible for a given seed.
pub fn simulate_power(
    scenario: &Scenario,
    spec: &MethodSpec,
    n_sims: u64,
    seed: u64,
) -> Result<PowerReport> {
    scenario.validate()?;
    if n_sims == 0 {
        return Err(Error::InvalidScenario("n_sims must be positive".into()));
    }
    let alpha = scenario.alpha()?;
    let (trt, ctr) = scenario.cells()?;
    let k = scenario.k;
    let trials: Vec<SimulatedTrial> = (0..n_sims)
        .into_par_iter()
        .map(|i| simulate_trial(&trt, &ctr, scenario.n, seed, i))
        .collect::<Result<_>>()?;

    // Identical margins share one procedure.
    let mut unique: Vec<Vec<u64>> = trials
        .iter()
        .map(|t| t.trt.iter().zip(&t.ctr).map(|(a, b)| a + b).collect())
        .collect();
    unique.sort();
    unique.dedup();
    let built: Vec<Result<Arc<ClosedProcedure>>> = unique
        .par_iter()
        .map(|m| {
            let margins = Margins::new(k, m.clone(), scenario.n)?;
            Ok(Arc::new(ClosedProcedure::build(&margins, spec, &alpha)?))
        })
        .collect();
    let mut cache: HashMap<Vec<u64>, Arc<ClosedProcedure>> = HashMap::with_capacity(unique.len());
    for (m, p) in unique.into_iter().zip(built) {
        cache.insert(m, p?);
    }

    let mut tally = Tally::new(k);
    let mut confirmed = 0u64;
    let mut iterations = Vec::with_capacity(trials.len());
    for trial in &trials {
        let m: Vec<u64> = trial
            .trt
            .iter()
            .zip(&trial.ctr)
            .map(|(a, b)| a + b)
            .collect();
        let procedure = &cache[&m];
        let t = project(k, &trial.trt, EndpointSet::full(k))?;
        tally.add(&procedure.decide(&t), 1.0);
        if procedure.confirmed_optimal() {
            confirmed += 1;
        }
        iterations.push((procedure.locals[0].iterations, 1.0));
    }
    let n = n_sims as f64;
    let rates: Vec<f64> = {
        let mut v = vec![tally.global / n, tally.any / n, tally.all / n];
        v.extend(tally.each.iter().map(|e| e / n));
        v
    };
    let se = rates.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
    Ok(PowerReport {
        method: spec.label(),
        global: rates[0],
        any: rates[1],
        all: rates[2],
        each: rates[3..].to_vec(),
        confirmed: confirmed as f64 / n,
        iter_q50: weighted_quantile(iterations.clone(), 0.5),
        iter_q90: weighted_quantile(iterations.clone(), 0.9),
        iter_max: iterations.iter().map(|x| x.0).max().unwrap_or(0),
        n_sims: Some(n_sims),
        se: Some(se),
    })
}

/// Several methods evaluated on one scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerTable {
    pub scenario: Scenario,
    pub rows: Vec<PowerReport>,
}

impl PowerTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "method".to_string(),
            "global".into(),
            "any".into(),
            "all".into(),
        ];
        header.extend((1..=self.scenario.k).map(|i| format!("H{i}")));
        header.extend(["confirmed".into(), "q50".into(), "q90".into(), "max".into()]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.method.clone()];
            rec.extend(r.columns().iter().map(|v| format!("{:.4}", v * 100.0)));
            rec.push(format!("{:.4}", r.confirmed * 100.0));
            rec.extend(
                [r.iter_q50, r.iter_q90, r.iter_max]
                    .iter()
                    .map(|v| v.to_string()),
            );
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
