use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use multifisher::bonf::{export_bonf_ilp, BonfObjective};
use multifisher::closed::{
    closed_test, consonance_forbidden_block, AltSpec, ClosedProcedure, LocalRule, MethodKind,
    MethodSpec,
};
use multifisher::dist::{joint_alt_distribution, joint_null_distribution, JointDistribution};
use multifisher::model::{
    read_subject_csv, AggregatedTable, Alpha, CrossTable, EndpointSet, GroupLabels, Margins,
    DEFAULT_MAX_ENDPOINTS,
};
use multifisher::power::{exact_power, simulate_power, PowerTable, Scenario};
use multifisher::region::{evaluate, region_p_value, Criterion, Objective, RejectionRegion};
use multifisher::search::{export_ilp, small_prob_split, LpNumbers, DEFAULT_MAX_ITER};
use multifisher::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "multifisher",
    version,
    about = "Exact multivariate tests for binary endpoints"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "MULTIFISHER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump the conditional joint distribution of the statistics.
    Dist(DistArgs),
    /// Construct the rejection region of the global test.
    Region(RegionArgs),
    /// Run the closed test on observed data.
    Test(TestArgs),
    /// Unconditional power of one or more methods.
    Power(PowerArgs),
    /// Write the region search as a binary program in LP format.
    ExportIlp(ExportArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Subject-level CSV (`group,ep1,...`) or aggregated JSON.
    #[arg(long, conflicts_with = "margins")]
    data: Option<PathBuf>,
    /// Category totals in display order (`11,10,01,00` for two endpoints).
    #[arg(long, value_delimiter = ',', requires = "n_trt")]
    margins: Option<Vec<u64>>,
    /// Treatment group size when giving `--margins`.
    #[arg(long)]
    n_trt: Option<u64>,
    #[arg(long, default_value = "trt")]
    trt_label: String,
    #[arg(long, default_value = "ctr")]
    ctr_label: String,
}

#[derive(Args, Debug, Clone)]
struct MethodArgs {
    #[arg(long, default_value = "optimal-area")]
    method: MethodKind,
    /// Enforce consonance of the closed procedure.
    #[arg(long)]
    consonant: bool,
    /// Assumed alternative, `rates=T1/C1:T2/C2,rho=R`.
    #[arg(long)]
    alt: Option<AltSpec>,
    /// Tie-breaking criteria after the primary one.
    #[arg(long, value_delimiter = ',')]
    lex: Vec<Criterion>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: u64,
}

impl MethodArgs {
    fn spec(&self) -> MethodSpec {
        let mut spec = MethodSpec::new(self.method)
            .consonant(self.consonant)
            .with_lex(self.lex.clone())
            .with_max_iter(self.max_iter);
        if let Some(a) = &self.alt {
            spec = spec.with_alt(a.clone());
        }
        spec
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct DistArgs {
    #[command(flatten)]
    data: DataArgs,
    /// One-based endpoints to keep (all by default).
    #[arg(long, value_delimiter = ',')]
    endpoints: Vec<usize>,
    #[arg(long)]
    alt: Option<AltSpec>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct RegionArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value = "0.025")]
    alpha: Alpha,
    /// Probability threshold of the small-probability split (optimal methods only).
    #[arg(long)]
    small_prob: Option<Alpha>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value = "0.025")]
    alpha: Alpha,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct PowerArgs {
    /// Scenario JSON: `k`, `n`, `p_trt`, `p_ctr`, `rho`, `alpha` and optionally `methods`.
    #[arg(long)]
    scenario: PathBuf,
    /// Method specs such as `optimal-power consonant alt=rates=0.7/0.3:0.7/0.3,rho=0`;
    /// overrides the scenario's list.
    #[arg(long = "spec")]
    specs: Vec<MethodSpec>,
    /// Simulated data sets; simulation is used when given and required for k >= 3.
    #[arg(long)]
    sims: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, default_value = "0.025")]
    alpha: Alpha,
    #[arg(long, value_enum, default_value_t = Numbers::Integer)]
    numbers: Numbers,
    /// Keep every variable instead of applying the two reduction steps.
    #[arg(long)]
    no_reduce: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Numbers {
    Integer,
    Decimal,
}

#[derive(Deserialize)]
struct Study {
    #[serde(flatten)]
    scenario: Scenario,
    #[serde(default)]
    methods: Vec<String>,
}

enum Failure {
    Input(String),
    Unconfirmed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Dist(a) => cmd_dist(a),
        Command::Region(a) => cmd_region(a),
        Command::Test(a) => cmd_test(a),
        Command::Power(a) => cmd_power(a),
        Command::ExportIlp(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Unconfirmed) => {
            eprintln!("warning: iteration cap reached before optimality was confirmed");
            ExitCode::from(3)
        }
    }
}

/// Observed table (when given) and margins.
fn load(data: &DataArgs) -> Result<(Option<CrossTable>, Margins), Failure> {
    if let Some(path) = &data.data {
        let labels = GroupLabels {
            treatment: data.trt_label.clone(),
            control: data.ctr_label.clone(),
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let table = if is_json(path) {
            AggregatedTable::from_json(&text, DEFAULT_MAX_ENDPOINTS)?
        } else {
            read_subject_csv(text.as_bytes(), &labels, DEFAULT_MAX_ENDPOINTS)?
        };
        let m = table.margins();
        return Ok((Some(table), m));
    }
    match (&data.margins, data.n_trt) {
        (Some(m), Some(n)) => {
            let d = m.len();
            if d < 2 || !d.is_power_of_two() {
                return Err(Failure::Input(format!("{d} margins is not a power of two")));
            }
            let k = d.trailing_zeros() as usize;
            Ok((None, Margins::from_display(k, m, n)?))
        }
        _ => Err(Failure::Input(
            "give --data or --margins with --n-trt".into(),
        )),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn data_config(data: &DataArgs, margins: &Margins) -> Value {
    json!({
        "data": data.data.as_ref().map(|p| p.display().to_string()),
        "margins": margins.display(),
        "n_trt": margins.n_trt,
        "k": margins.k,
    })
}

fn method_config(spec: &MethodSpec) -> Value {
    json!({
        "method": spec.kind.name(),
        "consonant": spec.consonant,
        "alt": spec.alt.as_ref().map(|a| a.to_string()),
        "lex": spec.lex.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "max_iter": spec.max_iter,
    })
}

fn envelope(command: &str, config: Value, result: Value) -> Value {
    json!({
        "tool": "multifisher",
        "version": VERSION,
        "command": command,
        "config": config,
        "result": result,
    })
}

fn write_out(path: Option<&PathBuf>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Input(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn endpoint_set(k: usize, endpoints: &[usize]) -> Result<EndpointSet, Failure> {
    if endpoints.is_empty() {
        return Ok(EndpointSet::full(k));
    }
    if endpoints.iter().any(|&e| e == 0 || e > k) {
        return Err(Error::BadSubset { k }.into());
    }
    let zero: Vec<usize> = endpoints.iter().map(|e| e - 1).collect();
    Ok(EndpointSet::from_indices(&zero))
}

fn distribution(
    margins: &Margins,
    alt: Option<&AltSpec>,
    set: EndpointSet,
) -> Result<JointDistribution, Failure> {
    Ok(match alt {
        Some(a) => {
            if a.k() != margins.k {
                return Err(Failure::Input(format!(
                    "alternative has {} endpoints, data has {}",
                    a.k(),
                    margins.k
                )));
            }
            joint_alt_distribution(margins, &a.odds()?, set)?
        }
        None => joint_null_distribution(margins, set)?,
    })
}

fn cmd_dist(a: &DistArgs) -> CmdResult {
    let (_, margins) = load(&a.data)?;
    let set = endpoint_set(margins.k, &a.endpoints)?;
    let dist = distribution(&margins, a.alt.as_ref(), set)?;
    let dump = dist.dump();
    let text = match a.out.format {
        Format::Json => {
            let config = json!({
                "input": data_config(&a.data, &margins),
                "endpoints": dump.endpoints,
                "alt": a.alt.as_ref().map(|x| x.to_string()),
            });
            to_json(&envelope(
                "dist",
                config,
                serde_json::to_value(&dump).expect("dump"),
            ))
        }
        Format::Csv => {
            let mut header: Vec<String> = dump.endpoints.iter().map(|e| format!("t{e}")).collect();
            header.extend(["weight".into(), "probability".into(), "alt_mass".into()]);
            let rows: Vec<Vec<String>> = dist
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut r: Vec<String> = p.t.iter().map(|x| x.to_string()).collect();
                    r.push(p.weight.to_string());
                    r.push(format!("{:.17e}", dist.probability(i)));
                    r.push(p.alt.map(|x| format!("{x:.17e}")).unwrap_or_default());
                    r
                })
                .collect();
            csv_text(&header, &rows)?
        }
    };
    write_out(a.out.output.as_ref(), &text)
}

fn cmd_region(a: &RegionArgs) -> CmdResult {
    let (table, margins) = load(&a.data)?;
    let spec = a.method.spec();
    let k = margins.k;
    let full = EndpointSet::full(k);
    let alt_dist = match &spec.alt {
        Some(alt) => Some(distribution(&margins, Some(alt), full)?),
        None => None,
    };
    let iterations;
    let confirmed;
    let mut boundaries = None;
    let mut small = None;
    let (dist, region) = if let (Some(c), Some(obj)) = (&a.small_prob, spec.objective()) {
        let obj = obj?;
        let dist = match &alt_dist {
            Some(d) => d.clone(),
            None => distribution(&margins, None, full)?,
        };
        let forbidden = if spec.consonant {
            Some(consonance_forbidden_block(&dist, &a.alpha)?)
        } else {
            None
        };
        let split = small_prob_split(
            &dist,
            &obj,
            &a.alpha,
            c.ratio(),
            forbidden.as_ref(),
            spec.max_iter,
        )?;
        iterations = split.result.iterations;
        confirmed = split.result.confirmed_optimal;
        small = Some(json!({
            "threshold": c.to_string(),
            "points": split.small.count_ones(..),
            "weight": split.small_weight.to_string(),
        }));
        (dist, split.result.region)
    } else {
        let procedure = ClosedProcedure::build(&margins, &spec, &a.alpha)?;
        let global = procedure.locals.into_iter().next().expect("global test");
        iterations = global.iterations;
        confirmed = global.confirmed_optimal;
        let (dist, region) = match global.rule {
            LocalRule::Region { dist, region } => (dist, region),
            LocalRule::Boundaries(b) => {
                let dist = distribution(&margins, None, full)?;
                let region = b.region(&dist);
                boundaries = Some(b.report());
                (dist, region)
            }
        };
        // Attach alternative masses when the construction did not use them.
        match &alt_dist {
            Some(ad) if !dist.has_alt() => {
                let region = RejectionRegion::from_predicate(ad, |t| {
                    dist.position(t).is_some_and(|i| region.contains(i))
                });
                (ad.clone(), region)
            }
            _ => (dist, region),
        }
    };

    let mut objective_values = serde_json::Map::new();
    for c in [Criterion::Alpha, Criterion::Area, Criterion::Power] {
        if let Ok(v) = evaluate(&region, c, &dist) {
            objective_values.insert(c.to_string(), json!(v.to_f64()));
        }
    }
    let observed = match &table {
        Some(t) => {
            let t_obs = t.statistic(full)?;
            let p = region_p_value(&region, &dist, &t_obs)?;
            Some(json!({
                "statistic": t_obs,
                "rejected": p.observed_in_region,
                "p_value": p.to_f64(),
                "p_num": p.p.numer().to_string(),
                "p_den": p.p.denom().to_string(),
            }))
        }
        None => None,
    };

    let text = match a.out.format {
        Format::Json => {
            let mut config = method_config(&spec);
            config["alpha"] = json!(a.alpha.to_string());
            config["input"] = data_config(&a.data, &margins);
            config["small_prob"] = json!(a.small_prob.as_ref().map(|c| c.to_string()));
            let result = json!({
                "region": region.dump(&dist),
                "objective_values": objective_values,
                "iterations": iterations,
                "confirmed_optimal": confirmed,
                "boundaries": boundaries,
                "small_prob_split": small,
                "observed": observed,
            });
            to_json(&envelope("region", config, result))
        }
        Format::Csv => {
            let mut header: Vec<String> = (1..=k).map(|e| format!("t{e}")).collect();
            header.extend(["weight".into(), "alt_mass".into()]);
            let rows: Vec<Vec<String>> = region
                .members()
                .ones()
                .map(|i| {
                    let p = &dist.points[i];
                    let mut r: Vec<String> = p.t.iter().map(|x| x.to_string()).collect();
                    r.push(p.weight.to_string());
                    r.push(p.alt.map(|x| format!("{x:.17e}")).unwrap_or_default());
                    r
                })
                .collect();
            csv_text(&header, &rows)?
        }
    };
    write_out(a.out.output.as_ref(), &text)?;
    if confirmed {
        Ok(())
    } else {
        Err(Failure::Unconfirmed)
    }
}

fn cmd_test(a: &TestArgs) -> CmdResult {
    let (table, margins) = load(&a.data)?;
    let table = table
        .ok_or_else(|| Failure::Input("the closed test needs observed data (--data)".into()))?;
    let spec = a.method.spec();
    let report = closed_test(&table, &spec, &a.alpha)?;

    let mut summary = format!(
        "{} at alpha {}; statistic {:?}\n",
        report.method, report.alpha, report.statistic
    );
    for s in &report.subsets {
        summary.push_str(&format!(
            "  H{:<8} p = {:.6}  {}\n",
            join(&s.endpoints),
            s.p_value,
            if s.rejected {
                "rejected"
            } else {
                "not rejected"
            }
        ));
    }
    for e in &report.elementary {
        summary.push_str(&format!(
            "  endpoint {}: adjusted p = {:.4}  {}\n",
            e.endpoint,
            e.adjusted_p,
            if e.rejected {
                "rejected"
            } else {
                "not rejected"
            }
        ));
    }

    let text = match a.out.format {
        Format::Json => {
            let mut config = method_config(&spec);
            config["alpha"] = json!(a.alpha.to_string());
            config["input"] = data_config(&a.data, &margins);
            to_json(&envelope(
                "test",
                config,
                serde_json::to_value(&report).expect("report"),
            ))
        }
        Format::Csv => {
            let header: Vec<String> = [
                "subset",
                "p_value",
                "rejected",
                "level",
                "iterations",
                "confirmed_optimal",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let rows: Vec<Vec<String>> = report
                .subsets
                .iter()
                .map(|s| {
                    vec![
                        join(&s.endpoints),
                        format!("{:.17e}", s.p_value),
                        s.rejected.to_string(),
                        format!("{:.17e}", s.level),
                        s.iterations.to_string(),
                        s.confirmed_optimal.to_string(),
                    ]
                })
                .collect();
            csv_text(&header, &rows)?
        }
    };
    match &a.out.output {
        Some(p) => {
            write_out(Some(p), &text)?;
            print!("{summary}");
        }
        None => {
            eprint!("{summary}");
            write_out(None, &text)?;
        }
    }
    if report.confirmed_optimal {
        Ok(())
    } else {
        Err(Failure::Unconfirmed)
    }
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_power(a: &PowerArgs) -> CmdResult {
    let text = fs::read_to_string(&a.scenario)
        .map_err(|e| Failure::Input(format!("{}: {e}", a.scenario.display())))?;
    let study: Study =
        serde_json::from_str(&text).map_err(|e| Failure::Input(format!("scenario: {e}")))?;
    let scenario = study.scenario;
    scenario.validate()?;
    let specs: Vec<MethodSpec> = if a.specs.is_empty() {
        study
            .methods
            .iter()
            .map(|m| m.parse())
            .collect::<Result<_, Error>>()?
    } else {
        a.specs.clone()
    };
    if specs.is_empty() {
        return Err(Failure::Input(
            "no methods given (--spec or `methods` in the scenario)".into(),
        ));
    }
    let simulate = match (a.sims, a.seed) {
        (Some(n), Some(seed)) => Some((n, seed)),
        (None, None) if scenario.k <= 2 => None,
        _ => {
            return Err(Failure::Input(
                "simulation needs both --sims and --seed (required for k >= 3)".into(),
            ))
        }
    };
    let mut rows = Vec::with_capacity(specs.len());
    for spec in &specs {
        rows.push(match simulate {
            Some((n, seed)) => simulate_power(&scenario, spec, n, seed)?,
            None => exact_power(&scenario, spec)?,
        });
    }
    let confirmed = rows.iter().all(|r| r.confirmed >= 1.0);
    let table = PowerTable { scenario, rows };
    let text = match a.out.format {
        Format::Json => {
            let config = json!({
                "scenario": table.scenario,
                "methods": specs.iter().map(method_config).collect::<Vec<_>>(),
                "mode": if simulate.is_some() { "simulation" } else { "exact" },
                "sims": a.sims,
                "seed": a.seed,
            });
            to_json(&envelope("power", config, json!({ "rows": table.rows })))
        }
        Format::Csv => table.to_csv()?,
    };
    write_out(a.out.output.as_ref(), &text)?;
    if confirmed {
        Ok(())
    } else {
        Err(Failure::Unconfirmed)
    }
}

fn cmd_export(a: &ExportArgs) -> CmdResult {
    let (_, margins) = load(&a.data)?;
    let spec = a.method.spec();
    let numbers = match a.numbers {
        Numbers::Integer => LpNumbers::Integer,
        Numbers::Decimal => LpNumbers::Decimal,
    };
    let text = match spec.kind {
        MethodKind::OptimalAlpha | MethodKind::OptimalArea | MethodKind::OptimalPower => {
            let objective = Objective::new(
                std::iter::once(match spec.kind {
                    MethodKind::OptimalAlpha => Criterion::Alpha,
                    MethodKind::OptimalArea => Criterion::Area,
                    _ => Criterion::Power,
                })
                .chain(spec.lex.iter().copied())
                .collect(),
            )?;
            let dist = distribution(&margins, spec.alt.as_ref(), EndpointSet::full(margins.k))?;
            let forbidden = if spec.consonant {
                Some(consonance_forbidden_block(&dist, &a.alpha)?)
            } else {
                None
            };
            export_ilp(
                &dist,
                &objective,
                &a.alpha,
                forbidden.as_ref(),
                numbers,
                !a.no_reduce,
            )?
        }
        MethodKind::BonfOptimalAlpha => {
            export_bonf_ilp(&margins, &BonfObjective::AlphaSum, &a.alpha, numbers)?
        }
        MethodKind::BonfOptimalPower => {
            let alt = spec.alt.as_ref().ok_or(Error::MissingAlternative)?;
            let objective = BonfObjective::power_from_rates(&alt.p_trt, &alt.p_ctr)?;
            export_bonf_ilp(&margins, &objective, &a.alpha, numbers)?
        }
        other => return Err(Error::NonLinearObjective(other.name().to_string()).into()),
    };
    let header = format!(
        "\\ multifisher {VERSION} export-ilp method={} alpha={} margins={} n_trt={}\n",
        spec.label(),
        a.alpha,
        join(
            &margins
                .display()
                .iter()
                .map(|&x| x as usize)
                .collect::<Vec<_>>()
        ),
        margins.n_trt
    );
    write_out(a.output.as_ref(), &(header + &text))
}
