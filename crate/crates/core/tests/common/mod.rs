//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use rand::Rng;

use multifisher::dist::{joint_alt_distribution, JointDistribution, OddsVector};
use multifisher::model::{Alpha, EndpointSet, Margins};
use multifisher::region::Criterion;

pub const ALPHAS: [&str; 5] = ["0.05", "0.1", "0.2", "0.3", "0.5"];

#[derive(Clone, Debug)]
pub struct Instance {
    pub k: usize,
    /// Category index of every subject.
    pub subjects: Vec<usize>,
    pub n_trt: usize,
    pub alpha: Alpha,
    pub odds: Vec<f64>,
}

impl Instance {
    pub fn margins(&self) -> Margins {
        let mut m = vec![0u64; 1 << self.k];
        for &s in &self.subjects {
            m[s] += 1;
        }
        Margins::new(self.k, m, self.n_trt as u64).unwrap()
    }

    pub fn alt_dist(&self) -> JointDistribution {
        let odds = OddsVector::new(self.odds.clone()).unwrap();
        joint_alt_distribution(&self.margins(), &odds, EndpointSet::full(self.k)).unwrap()
    }
}

/// Statistic of a treatment assignment, straight from the subject outcomes.
pub fn statistic(k: usize, subjects: &[usize], chosen: u32) -> Vec<u32> {
    let mut t = vec![0u32; k];
    for (j, &s) in subjects.iter().enumerate() {
        if chosen & (1 << j) != 0 {
            for (i, ti) in t.iter_mut().enumerate() {
                if s & (1 << (k - 1 - i)) != 0 {
                    *ti += 1;
                }
            }
        }
    }
    t
}

/// Count of label permutations giving each statistic.
pub fn permutation_counts(inst: &Instance) -> BTreeMap<Vec<u32>, u64> {
    let n = inst.subjects.len();
    let mut out = BTreeMap::new();
    for chosen in 0u32..(1 << n) {
        if chosen.count_ones() as usize == inst.n_trt {
            *out.entry(statistic(inst.k, &inst.subjects, chosen))
                .or_insert(0) += 1;
        }
    }
    out
}

pub fn dominates(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Weights, dominators, capacity and point values.
type Context<'a> = (&'a [u128], &'a [Vec<usize>], u128, &'a dyn Fn(usize) -> f64);

/// Best objective over every up-closed subset within the level, by exhaustive recursion.
pub fn brute_force(dist: &JointDistribution, criterion: Criterion, cap: u128) -> f64 {
    let n = dist.len();
    let w: Vec<u128> = dist
        .points
        .iter()
        .map(|p| p.weight.to_u128().unwrap())
        .collect();
    // Points with a larger coordinate sum come first, so dominators are decided earlier.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(dist.points[i].t.iter().sum::<u32>()));
    let above: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && dominates(&dist.points[j].t, &dist.points[i].t))
                .collect()
        })
        .collect();
    let value = |i: usize| match criterion {
        Criterion::Alpha => w[i] as f64,
        Criterion::Area => 1.0,
        Criterion::Power => dist.points[i].alt.unwrap(),
    };
    fn rec(
        pos: usize,
        order: &[usize],
        inside: &mut Vec<bool>,
        used: u128,
        score: f64,
        ctx: &Context,
        best: &mut f64,
    ) {
        if score > *best {
            *best = score;
        }
        if pos == order.len() {
            return;
        }
        let (w, above, cap, value) = ctx;
        let i = order[pos];
        if used + w[i] <= *cap && above[i].iter().all(|&j| inside[j]) {
            inside[i] = true;
            rec(
                pos + 1,
                order,
                inside,
                used + w[i],
                score + value(i),
                ctx,
                best,
            );
            inside[i] = false;
        }
        rec(pos + 1, order, inside, used, score, ctx, best);
    }
    let mut best = 0.0;
    let ctx: Context = (&w, &above, cap, &value);
    rec(0, &order, &mut vec![false; n], 0, 0.0, &ctx, &mut best);
    best
}

pub fn cap(dist: &JointDistribution, alpha: &Alpha) -> u128 {
    alpha.capacity(&dist.total).to_u128().unwrap()
}

pub fn objective_value(
    dist: &JointDistribution,
    members: impl Iterator<Item = usize>,
    criterion: Criterion,
) -> f64 {
    members
        .map(|i| match criterion {
            Criterion::Alpha => dist.points[i].weight.to_f64().unwrap(),
            Criterion::Area => 1.0,
            Criterion::Power => dist.points[i].alt.unwrap(),
        })
        .sum()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub type Terms = Vec<(usize, f64)>;

/// Minimal reader for the LP subset written by the exporters: one objective,
/// `<=` / `=` rows, binary variables.
pub struct Lp {
    pub vars: Vec<String>,
    pub objective: Vec<(usize, f64)>,
    /// Terms, equality flag and right-hand side.
    pub rows: Vec<(Terms, bool, f64)>,
}

pub fn parse_lp(text: &str) -> Lp {
    let mut sections: HashMap<&str, Vec<String>> = HashMap::new();
    let mut current = "";
    for line in text.lines() {
        if line.starts_with('\\') {
            continue;
        }
        match line.trim() {
            "maximize" | "st" | "bin" | "end" => current = line.trim(),
            _ => {
                let rows = sections.entry(current).or_default();
                if line.starts_with("   ") {
                    rows.last_mut().unwrap().push_str(line);
                } else {
                    rows.push(line.to_string());
                }
            }
        }
    }
    let vars: Vec<String> = sections
        .get("bin")
        .into_iter()
        .flatten()
        .map(|s| s.trim().to_string())
        .collect();
    let index: HashMap<&str, usize> = vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    let terms = |expr: &str| -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for tok in expr.split_whitespace() {
            match tok {
                "+" => sign = 1.0,
                "-" => sign = -1.0,
                "0" if coef.is_none() => {}
                _ => match tok.parse::<f64>() {
                    Ok(c) => coef = Some(c),
                    Err(_) => {
                        out.push((index[tok], sign * coef.take().unwrap_or(1.0)));
                        sign = 1.0;
                    }
                },
            }
        }
        out
    };
    let obj_line = sections["maximize"].join(" ");
    let objective = terms(obj_line.split_once(':').unwrap().1);
    let rows = sections["st"]
        .iter()
        .map(|row| {
            let body = row.split_once(':').unwrap().1;
            let (lhs, eq, rhs) = if let Some((l, r)) = body.split_once("<=") {
                (l, false, r)
            } else {
                let (l, r) = body.split_once('=').unwrap();
                (l, true, r)
            };
            (terms(lhs), eq, rhs.trim().parse::<f64>().unwrap())
        })
        .collect();
    Lp {
        vars,
        objective,
        rows,
    }
}

/// Exhaustive solve of a small binary program.
pub fn solve_lp(lp: &Lp) -> Option<(f64, Vec<bool>)> {
    let n = lp.vars.len();
    assert!(n <= 22, "too many variables for exhaustive solve: {n}");
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        let eval =
            |t: &[(usize, f64)]| t.iter().filter(|(i, _)| x[*i]).map(|(_, c)| c).sum::<f64>();
        let ok = lp.rows.iter().all(|(t, eq, rhs)| {
            let v = eval(t);
            if *eq {
                (v - rhs).abs() < 1e-9
            } else {
                v <= rhs + 1e-9
            }
        });
        if ok {
            let v = eval(&lp.objective);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, x));
            }
        }
    }
    best
}

/// Random instance with `2..=max_n` subjects and up to three endpoints.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize) -> Instance {
    let k = rng.random_range(1..=3);
    let n = rng.random_range(2..=max_n);
    let d = 1usize << k;
    Instance {
        k,
        subjects: (0..n).map(|_| rng.random_range(0..d)).collect(),
        n_trt: rng.random_range(1..n),
        alpha: ALPHAS[rng.random_range(0..ALPHAS.len())].parse().unwrap(),
        odds: (0..d).map(|_| rng.random_range(0.2..5.0)).collect(),
    }
}

/// Alternative used wherever a method needs one.
pub fn default_alt(k: usize) -> multifisher::closed::AltSpec {
    multifisher::closed::AltSpec {
        p_trt: vec![0.7; k],
        p_ctr: (0..k).map(|i| 0.2 + 0.1 * i as f64).collect(),
        rho: 0.0,
    }
}

/// Every method and consonance mode that supports `k` endpoints.
pub fn supported_specs(k: usize) -> Vec<multifisher::closed::MethodSpec> {
    use multifisher::closed::{MethodKind, MethodSpec};
    let mut out = Vec::new();
    for kind in MethodKind::ALL {
        for consonant in [false, true] {
            if consonant && (kind == MethodKind::Minp || (kind.is_joint() && k > 2)) {
                continue;
            }
            let mut spec = MethodSpec::new(kind).consonant(consonant);
            if kind.needs_alternative() {
                spec = spec.with_alt(default_alt(k));
            }
            out.push(spec);
        }
    }
    out
}

/// Points of the full support where the global hypothesis falls without any elementary one.
pub fn dissonant_points(
    m: &Margins,
    spec: &multifisher::closed::MethodSpec,
    alpha: &Alpha,
) -> Vec<Vec<u32>> {
    let procedure = multifisher::closed::ClosedProcedure::build(m, spec, alpha).unwrap();
    let full = multifisher::dist::joint_null_distribution(m, EndpointSet::full(m.k)).unwrap();
    full.points
        .iter()
        .filter(|p| {
            let d = procedure.decide(&p.t);
            d.global && !d.elementary.iter().any(|&e| e)
        })
        .map(|p| p.t.clone())
        .collect()
}

/// Null weight of the points a local test rejects, recounted from the null distribution.
pub fn recount_level(
    m: &Margins,
    local: &multifisher::closed::LocalTest,
) -> (num_bigint::BigUint, num_bigint::BigUint) {
    let dist = multifisher::dist::joint_null_distribution(m, local.endpoints).unwrap();
    let rejected = dist
        .points
        .iter()
        .filter(|p| local.rejects(&p.t))
        .map(|p| p.weight.clone())
        .sum();
    (rejected, dist.total)
}
