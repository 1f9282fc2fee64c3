//! Domain types for two-group trials with `k` binary endpoints.
//!
//! Each subject falls into one of `d = 2^k` joint outcome categories. The
//! category index is the integer whose binary digits are `(s_1, ..., s_k)`
//! with `s_1` the most significant digit, so with `k = 2` index 3 is
//! "success on both", index 2 "success on endpoint 1 only", and index 0
//! "no success".

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper limit on the number of endpoints accepted at ingestion.
pub const DEFAULT_MAX_ENDPOINTS: usize = 4;

/// Whether category `index` is a success on endpoint `i` (0-based).
#[inline]
pub fn success(k: usize, index: usize, i: usize) -> bool {
    (index >> (k - 1 - i)) & 1 == 1
}

/// Bit pattern string of a category, e.g. `"10"` for success on endpoint 1 only.
pub fn pattern(k: usize, index: usize) -> String {
    (0..k)
        .map(|i| if success(k, index, i) { '1' } else { '0' })
        .collect()
}

/// Category index of a bit pattern such as `"101"`.
pub fn parse_pattern(s: &str) -> Result<usize> {
    if s.is_empty() || s.len() > 31 {
        return Err(Error::InvalidTable(format!("bad category pattern `{s}`")));
    }
    s.chars().try_fold(0usize, |acc, c| match c {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::InvalidTable(format!("bad category pattern `{s}`"))),
    })
}

/// A nonempty subset of endpoints, stored as a bitmask (bit `i` is endpoint `i`, 0-based).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EndpointSet(u32);

impl EndpointSet {
    pub fn full(k: usize) -> Self {
        EndpointSet(((1u64 << k) - 1) as u32)
    }

    pub fn single(i: usize) -> Self {
        EndpointSet(1 << i)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        EndpointSet(indices.iter().fold(0, |acc, &i| acc | (1 << i)))
    }

    pub fn from_mask(mask: u32) -> Self {
        EndpointSet(mask)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn is_subset_of(self, other: EndpointSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Endpoints in ascending order.
    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|&i| self.contains(i)).collect()
    }

    /// Position of endpoint `i` among the members, if it is one.
    pub fn position(self, i: usize) -> Option<usize> {
        self.contains(i)
            .then(|| (self.0 & ((1u32 << i) - 1)).count_ones() as usize)
    }

    pub fn check(self, k: usize) -> Result<()> {
        if self.0 == 0 || (k < 32 && self.0 >> k != 0) {
            Err(Error::BadSubset { k })
        } else {
            Ok(())
        }
    }

    /// All nonempty subsets of `{0..k}` ordered by decreasing size, then
    /// lexicographically by their sorted index lists.
    pub fn closure_order(k: usize) -> Vec<EndpointSet> {
        let mut all: Vec<EndpointSet> = (1..(1u32 << k)).map(EndpointSet).collect();
        all.sort_by(|a, b| {
            b.len()
                .cmp(&a.len())
                .then_with(|| a.indices().cmp(&b.indices()))
        });
        all
    }
}

impl fmt::Debug for EndpointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ones: Vec<usize> = self.indices().into_iter().map(|i| i + 1).collect();
        write!(f, "{ones:?}")
    }
}

/// Component `i` of the statistic vector: treatment-group successes on endpoint `i`.
pub fn project(k: usize, y: &[u64], endpoints: EndpointSet) -> Result<Vec<u32>> {
    endpoints.check(k)?;
    if y.len() != 1 << k {
        return Err(Error::InvalidTable(format!(
            "expected {} category counts, found {}",
            1 << k,
            y.len()
        )));
    }
    Ok(endpoints
        .indices()
        .into_iter()
        .map(|i| {
            y.iter()
                .enumerate()
                .filter(|(s, _)| success(k, *s, i))
                .map(|(_, &c)| c as u32)
                .sum()
        })
        .collect())
}

/// Merge categories that agree on `endpoints`; the result is indexed over `2^|J|` categories.
fn collapse(k: usize, counts: &[u64], endpoints: EndpointSet) -> Vec<u64> {
    let members = endpoints.indices();
    let kj = members.len();
    let mut out = vec![0u64; 1 << kj];
    for (s, &c) in counts.iter().enumerate() {
        let idx = members
            .iter()
            .fold(0usize, |acc, &i| (acc << 1) | success(k, s, i) as usize);
        out[idx] += c;
    }
    out
}

/// The `d x 2` table of joint outcome category counts by group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CrossTable {
    k: usize,
    trt: Vec<u64>,
    ctr: Vec<u64>,
}

impl CrossTable {
    pub fn new(k: usize, trt: Vec<u64>, ctr: Vec<u64>) -> Result<Self> {
        if k == 0 || k > 16 {
            return Err(Error::InvalidTable(format!(
                "unsupported endpoint count {k}"
            )));
        }
        if trt.len() != 1 << k || ctr.len() != 1 << k {
            return Err(Error::InvalidTable(format!(
                "expected {} categories per group",
                1 << k
            )));
        }
        Ok(CrossTable { k, trt, ctr })
    }

    /// Build from `(pattern, treatment count, control count)` rows.
    pub fn from_patterns(rows: &[(&str, u64, u64)]) -> Result<Self> {
        let k = rows.first().ok_or(Error::EmptyInput)?.0.len();
        let mut trt = vec![0; 1 << k];
        let mut ctr = vec![0; 1 << k];
        for &(p, a, b) in rows {
            if p.len() != k {
                return Err(Error::InvalidTable(format!(
                    "pattern `{p}` has wrong length"
                )));
            }
            let s = parse_pattern(p)?;
            trt[s] += a;
            ctr[s] += b;
        }
        CrossTable::new(k, trt, ctr)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Treatment counts indexed by category.
    pub fn trt(&self) -> &[u64] {
        &self.trt
    }

    pub fn ctr(&self) -> &[u64] {
        &self.ctr
    }

    pub fn n_trt(&self) -> u64 {
        self.trt.iter().sum()
    }

    pub fn n_ctr(&self) -> u64 {
        self.ctr.iter().sum()
    }

    pub fn margins(&self) -> Margins {
        Margins {
            k: self.k,
            m: self.trt.iter().zip(&self.ctr).map(|(a, b)| a + b).collect(),
            n_trt: self.n_trt(),
            n_ctr: self.n_ctr(),
        }
    }

    /// Observed statistic vector on `endpoints`.
    pub fn statistic(&self, endpoints: EndpointSet) -> Result<Vec<u32>> {
        project(self.k, &self.trt, endpoints)
    }

    pub fn collapse(&self, endpoints: EndpointSet) -> Result<CrossTable> {
        endpoints.check(self.k)?;
        CrossTable::new(
            endpoints.len(),
            collapse(self.k, &self.trt, endpoints),
            collapse(self.k, &self.ctr, endpoints),
        )
    }

    /// Subject rows in a canonical order, treatment first.
    pub fn to_subjects(&self, labels: &GroupLabels) -> Vec<SubjectRecord> {
        let mut out = Vec::new();
        for (label, counts) in [(&labels.treatment, &self.trt), (&labels.control, &self.ctr)] {
            for (s, &c) in counts.iter().enumerate().rev() {
                for _ in 0..c {
                    out.push(SubjectRecord {
                        group: label.clone(),
                        outcomes: (0..self.k).map(|i| success(self.k, s, i)).collect(),
                    });
                }
            }
        }
        out
    }

    pub fn to_aggregated(&self) -> AggregatedTable {
        let order: Vec<usize> = (0..1 << self.k).rev().collect();
        AggregatedTable {
            k: self.k,
            categories: order.iter().map(|&s| pattern(self.k, s)).collect(),
            trt: order.iter().map(|&s| self.trt[s]).collect(),
            ctr: order.iter().map(|&s| self.ctr[s]).collect(),
        }
    }
}

/// Pooled per-category totals, the conditioning statistic of every exact test here.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Margins {
    pub k: usize,
    /// Per-category totals indexed by category.
    pub m: Vec<u64>,
    pub n_trt: u64,
    pub n_ctr: u64,
}

impl Margins {
    pub fn new(k: usize, m: Vec<u64>, n_trt: u64) -> Result<Self> {
        if k == 0 || m.len() != 1 << k {
            return Err(Error::InvalidTable(format!(
                "expected {} margins for k = {k}",
                1usize << k
            )));
        }
        let total: u64 = m.iter().sum();
        if n_trt > total {
            return Err(Error::InvalidTable(format!(
                "treatment size {n_trt} exceeds total {total}"
            )));
        }
        Ok(Margins {
            k,
            m,
            n_trt,
            n_ctr: total - n_trt,
        })
    }

    /// Margins given in display order (all-success pattern first, i.e. descending index).
    pub fn from_display(k: usize, display: &[u64], n_trt: u64) -> Result<Self> {
        let mut m = display.to_vec();
        m.reverse();
        Margins::new(k, m, n_trt)
    }

    /// Margins in display order (descending category index).
    pub fn display(&self) -> Vec<u64> {
        self.m.iter().rev().copied().collect()
    }

    pub fn total(&self) -> u64 {
        self.n_trt + self.n_ctr
    }

    pub fn d(&self) -> usize {
        self.m.len()
    }

    /// Collapse to the `2^|J|` categories formed by the endpoints in `J`.
    pub fn restrict(&self, endpoints: EndpointSet) -> Result<Margins> {
        endpoints.check(self.k)?;
        Ok(Margins {
            k: endpoints.len(),
            m: collapse(self.k, &self.m, endpoints),
            n_trt: self.n_trt,
            n_ctr: self.n_ctr,
        })
    }

    /// Pooled success count on endpoint `i`.
    pub fn successes(&self, i: usize) -> u64 {
        self.m
            .iter()
            .enumerate()
            .filter(|(s, _)| success(self.k, *s, i))
            .map(|(_, &c)| c)
            .sum()
    }
}

/// Per-category outcome probabilities for one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellProbabilities {
    pub k: usize,
    /// Indexed by category.
    pub q: Vec<f64>,
}

impl CellProbabilities {
    pub fn new(k: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != 1 << k {
            return Err(Error::InvalidProbability(format!(
                "expected {} cells",
                1usize << k
            )));
        }
        if q.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan()) {
            return Err(Error::InvalidProbability(format!("cell masses {q:?}")));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbability(format!("cells sum to {total}")));
        }
        Ok(CellProbabilities { k, q })
    }

    /// Marginal success rate on endpoint `i`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.q
            .iter()
            .enumerate()
            .filter(|(s, _)| success(self.k, *s, i))
            .map(|(_, &p)| p)
            .sum()
    }

    /// Cell probabilities of the endpoints in `J` alone.
    pub fn restrict(&self, endpoints: EndpointSet) -> CellProbabilities {
        let members = endpoints.indices();
        let mut q = vec![0.0; 1 << members.len()];
        for (s, &p) in self.q.iter().enumerate() {
            let idx = members.iter().fold(0usize, |acc, &i| {
                (acc << 1) | success(self.k, s, i) as usize
            });
            q[idx] += p;
        }
        CellProbabilities {
            k: members.len(),
            q,
        }
    }
}

/// Significance level as an exact rational in `[0, 1]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Alpha(Ratio<BigUint>);

impl Alpha {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::InvalidAlpha(format!("{num}/{den}")));
        }
        Ok(Alpha(Ratio::new(BigUint::from(num), BigUint::from(den))))
    }

    pub fn from_ratio(r: Ratio<BigUint>) -> Result<Self> {
        if r > Ratio::from_integer(BigUint::from(1u32)) {
            return Err(Error::InvalidAlpha(r.to_string()));
        }
        Ok(Alpha(r))
    }

    pub fn ratio(&self) -> &Ratio<BigUint> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Largest integer weight sum `w` with `w / total <= alpha`.
    pub fn capacity(&self, total: &BigUint) -> BigUint {
        total * self.0.numer() / self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(self.0.numer(), self.0.denom())
    }
}

impl FromStr for Alpha {
    type Err = Error;

    /// Accepts decimals (`0.025`) and fractions (`1/40`).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidAlpha(s.to_string());
        let s = s.trim();
        let r = if let Some((a, b)) = s.split_once('/') {
            let a: BigUint = a.trim().parse().map_err(|_| bad())?;
            let b: BigUint = b.trim().parse().map_err(|_| bad())?;
            if b.is_zero() {
                return Err(bad());
            }
            Ratio::new(a, b)
        } else {
            let (int, frac) = s.split_once('.').unwrap_or((s, ""));
            if int.is_empty() && frac.is_empty() {
                return Err(bad());
            }
            if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let digits = format!("{int}{frac}");
            let num: BigUint = if digits.is_empty() {
                BigUint::zero()
            } else {
                digits.parse().map_err(|_| bad())?
            };
            Ratio::new(num, BigUint::from(10u32).pow(frac.len() as u32))
        };
        Alpha::from_ratio(r).map_err(|_| bad())
    }
}

impl fmt::Debug for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Accurate `num / den` for big integers of any size.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if den.is_zero() {
        return f64::NAN;
    }
    let shift = den.bits().max(num.bits()).saturating_sub(1000) as usize;
    let (n, d) = (num >> shift, den >> shift);
    match (n.to_f64(), d.to_f64()) {
        (Some(a), Some(b)) => a / b,
        _ => f64::NAN,
    }
}

/// One subject: group label and `k` binary outcomes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectRecord {
    pub group: String,
    pub outcomes: Vec<bool>,
}

/// Labels identifying the two groups in subject-level input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLabels {
    pub treatment: String,
    pub control: String,
}

impl Default for GroupLabels {
    fn default() -> Self {
        GroupLabels {
            treatment: "trt".into(),
            control: "ctr".into(),
        }
    }
}

/// Tally subject records into a cross table.
pub fn ingest_subjects(
    records: &[SubjectRecord],
    labels: &GroupLabels,
    max_endpoints: usize,
) -> Result<CrossTable> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let k = first.outcomes.len();
    if k == 0 {
        return Err(Error::InvalidTable("records carry no endpoints".into()));
    }
    if k > max_endpoints {
        return Err(Error::TooManyEndpoints {
            k,
            limit: max_endpoints,
        });
    }
    let mut trt = vec![0u64; 1 << k];
    let mut ctr = vec![0u64; 1 << k];
    for (n, rec) in records.iter().enumerate() {
        if rec.outcomes.len() != k {
            return Err(Error::MixedEndpoints {
                record: n + 1,
                expected: k,
                found: rec.outcomes.len(),
            });
        }
        let s = rec
            .outcomes
            .iter()
            .fold(0usize, |acc, &o| (acc << 1) | o as usize);
        if rec.group == labels.treatment {
            trt[s] += 1;
        } else if rec.group == labels.control {
            ctr[s] += 1;
        } else {
            return Err(Error::UnknownGroup(rec.group.clone()));
        }
    }
    CrossTable::new(k, trt, ctr)
}

/// Parse subject-level CSV with header `group,ep1,...,epk` and 0/1 outcomes.
pub fn read_subject_csv<R: Read>(
    reader: R,
    labels: &GroupLabels,
    max_endpoints: usize,
) -> Result<CrossTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("group") {
        return Err(Error::InvalidTable(
            "subject CSV must start with a `group` column".into(),
        ));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let group = row.get(0).unwrap_or_default().to_string();
        let outcomes = row
            .iter()
            .skip(1)
            .map(|v| match v {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::InvalidOutcome(other.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(SubjectRecord { group, outcomes });
    }
    ingest_subjects(&records, labels, max_endpoints)
}

pub fn write_subject_csv(table: &CrossTable, labels: &GroupLabels) -> String {
    let mut out = String::from("group");
    for i in 1..=table.k() {
        out.push_str(&format!(",ep{i}"));
    }
    out.push('\n');
    for rec in table.to_subjects(labels) {
        out.push_str(&rec.group);
        for o in rec.outcomes {
            out.push_str(if o { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

/// Aggregated JSON input: categories listed as bit-pattern strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedTable {
    pub k: usize,
    pub categories: Vec<String>,
    pub trt: Vec<u64>,
    pub ctr: Vec<u64>,
}

impl AggregatedTable {
    pub fn to_table(&self, max_endpoints: usize) -> Result<CrossTable> {
        if self.k > max_endpoints {
            return Err(Error::TooManyEndpoints {
                k: self.k,
                limit: max_endpoints,
            });
        }
        if self.categories.len() != self.trt.len() || self.categories.len() != self.ctr.len() {
            return Err(Error::InvalidTable(
                "categories, trt and ctr must have equal length".into(),
            ));
        }
        let mut seen = BTreeMap::new();
        for (n, c) in self.categories.iter().enumerate() {
            if c.len() != self.k {
                return Err(Error::InvalidTable(format!(
                    "category `{c}` does not have {} digits",
                    self.k
                )));
            }
            if seen.insert(parse_pattern(c)?, n).is_some() {
                return Err(Error::InvalidTable(format!("duplicate category `{c}`")));
            }
        }
        let mut trt = vec![0; 1 << self.k];
        let mut ctr = vec![0; 1 << self.k];
        for (s, n) in seen {
            trt[s] = self.trt[n];
            ctr[s] = self.ctr[n];
        }
        CrossTable::new(self.k, trt, ctr)
    }

    pub fn from_json(text: &str, max_endpoints: usize) -> Result<CrossTable> {
        let agg: AggregatedTable = serde_json::from_str(text)?;
        agg.to_table(max_endpoints)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table1() -> CrossTable {
        CrossTable::from_patterns(&[("11", 80, 57), ("10", 13, 12), ("01", 1, 10), ("00", 0, 2)])
            .unwrap()
    }

    fn rec(g: &str, o: &[u8]) -> SubjectRecord {
        SubjectRecord {
            group: g.into(),
            outcomes: o.iter().map(|&v| v == 1).collect(),
        }
    }

    #[test]
    fn ingest_table1_subjects() {
        let labels = GroupLabels::default();
        let subjects = table1().to_subjects(&labels);
        assert_eq!(subjects.len(), 175);
        let t = ingest_subjects(&subjects, &labels, 4).unwrap();
        assert_eq!(t.to_aggregated().trt, vec![80, 13, 1, 0]);
        assert_eq!(t.to_aggregated().ctr, vec![57, 12, 10, 2]);
        assert_eq!(t.n_trt(), 94);
        assert_eq!(t.n_ctr(), 81);
    }

    #[test]
    fn ingest_errors() {
        let labels = GroupLabels::default();
        assert!(matches!(
            ingest_subjects(&[], &labels, 4),
            Err(Error::EmptyInput)
        ));
        let mixed = [rec("trt", &[1, 0]), rec("ctr", &[1])];
        assert!(matches!(
            ingest_subjects(&mixed, &labels, 4),
            Err(Error::MixedEndpoints { record: 2, .. })
        ));
        let unknown = [rec("trt", &[1]), rec("placebo", &[0])];
        assert!(matches!(
            ingest_subjects(&unknown, &labels, 4),
            Err(Error::UnknownGroup(_))
        ));
        let wide = [rec("trt", &[1, 0, 1, 0, 1])];
        assert!(matches!(
            ingest_subjects(&wide, &labels, 4),
            Err(Error::TooManyEndpoints { k: 5, limit: 4 })
        ));
    }

    #[test]
    fn single_endpoint_all_successes() {
        let labels = GroupLabels::default();
        let rs = [
            rec("trt", &[1]),
            rec("trt", &[1]),
            rec("ctr", &[1]),
            rec("ctr", &[1]),
        ];
        let t = ingest_subjects(&rs, &labels, 4).unwrap();
        assert_eq!(t.to_aggregated().trt, vec![2, 0]);
        assert_eq!(t.to_aggregated().ctr, vec![2, 0]);
    }

    #[test]
    fn margins_of_table1() {
        let m = table1().margins();
        assert_eq!(m.display(), vec![137, 25, 11, 2]);
        assert_eq!((m.n_trt, m.n_ctr), (94, 81));
    }

    #[test]
    fn zero_control_column_margins_equal_treatment() {
        let t = CrossTable::new(2, vec![1, 2, 3, 4], vec![0; 4]).unwrap();
        assert_eq!(t.margins().m, t.trt());
    }

    #[test]
    fn projection() {
        let t = table1();
        assert_eq!(t.statistic(EndpointSet::full(2)).unwrap(), vec![93, 81]);
        assert_eq!(
            project(2, &[0; 4], EndpointSet::full(2)).unwrap(),
            vec![0, 0]
        );
        // (2,0,0,0) in display order is two subjects in category "11".
        assert_eq!(
            project(2, &[0, 0, 0, 2], EndpointSet::full(2)).unwrap(),
            vec![2, 2]
        );
        assert!(project(2, &[0; 4], EndpointSet::from_mask(0)).is_err());
        assert!(project(2, &[0; 4], EndpointSet::from_mask(4)).is_err());
    }

    #[test]
    fn restriction() {
        let m = table1().margins();
        assert_eq!(
            m.restrict(EndpointSet::single(0)).unwrap().display(),
            vec![162, 13]
        );
        assert_eq!(m.restrict(EndpointSet::full(2)).unwrap(), m);
        let toy = Margins::from_display(2, &[2, 1, 1, 0], 2).unwrap();
        assert_eq!(
            toy.restrict(EndpointSet::single(1)).unwrap().display(),
            vec![3, 1]
        );
    }

    #[test]
    fn alpha_parsing() {
        let a: Alpha = "0.025".parse().unwrap();
        assert_eq!(a, Alpha::new(1, 40).unwrap());
        assert_eq!("1/40".parse::<Alpha>().unwrap(), a);
        assert!("0".parse::<Alpha>().unwrap().is_zero());
        assert!("1.5".parse::<Alpha>().is_err());
        assert!("abc".parse::<Alpha>().is_err());
        assert!("-0.1".parse::<Alpha>().is_err());
        assert_eq!(a.capacity(&BigUint::from(81u32)), BigUint::from(2u32));
    }

    #[test]
    fn aggregated_json_round_trip() {
        let t = table1();
        let text = serde_json::to_string(&t.to_aggregated()).unwrap();
        assert_eq!(AggregatedTable::from_json(&text, 4).unwrap(), t);
        let dup = r#"{"k":1,"categories":["1","1"],"trt":[1,2],"ctr":[0,0]}"#;
        assert!(AggregatedTable::from_json(dup, 4).is_err());
    }

    #[test]
    fn csv_ingest() {
        let labels = GroupLabels::default();
        let text = write_subject_csv(&table1(), &labels);
        let t = read_subject_csv(text.as_bytes(), &labels, 4).unwrap();
        assert_eq!(t, table1());
        let bad = "group,ep1\ntrt,2\n";
        assert!(matches!(
            read_subject_csv(bad.as_bytes(), &labels, 4),
            Err(Error::InvalidOutcome(_))
        ));
    }

    #[test]
    fn closure_order_is_by_decreasing_size() {
        let order: Vec<Vec<usize>> = EndpointSet::closure_order(3)
            .into_iter()
            .map(|j| j.indices())
            .collect();
        assert_eq!(
            order,
            vec![
                vec![0, 1, 2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0],
                vec![1],
                vec![2]
            ]
        );
    }

    #[test]
    fn ratio_to_f64_handles_huge_values() {
        let big = BigUint::from(3u32).pow(2000);
        let r = ratio_to_f64(&big, &(big.clone() * 4u32));
        assert!((r - 0.25).abs() < 1e-15);
    }
}
