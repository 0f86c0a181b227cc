//! Command-line front end. Each subcommand resolves its configuration
//! (JSON file first, then flags), validates it, runs one driver, and emits a
//! CSV table, a JSON manifest and optionally a gnuplot script, followed by a
//! one-line verdict.
//!
//! Exit codes: 0 within tolerance, 1 violation detected, 2 configuration or
//! budget error.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::experiments::{dyadic, fit_exponent, gnuplot_script, FitResult};
use crate::expsum::{arc_sweep, verify_i1, verify_i2, Family, SumSweep, DEFAULT_GRID_BUDGET};
use crate::lattice::{max_circle_count, BSamples};
use crate::packets::{
    max_per_point, projector_experiment, projector_schedule, strichartz_experiment,
    strichartz_schedule, witness_combinations, write_reports_csv, PacketFamily, ProductNormReport,
    StrichartzRun, Witness,
};
use crate::regularity::{
    applicable_thresholds, fmt_q, gamma_exponent, lwp_threshold, mljspe_constant, mls_constant,
    write_threshold_csv, FreeParams, LpExponent, ManifoldSpec, ThresholdRow, Q,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// An integer range written `lo:hi`, or a single value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub lo: i64,
    pub hi: i64,
}

impl Span {
    pub fn dyadic(&self) -> Vec<i64> {
        dyadic(self.lo, self.hi)
    }
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |v: &str| v.trim().parse::<i64>().map_err(|_| format!("bad integer '{v}'"));
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("empty range {s}"));
        }
        Ok(Span { lo, hi })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}:{}", self.lo, self.hi)
        }
    }
}

impl Serialize for Span {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let s = match v {
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            other => return Err(serde::de::Error::custom(format!("expected range, got {other}"))),
        };
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessArg {
    Zonal,
    Hw,
    /// Every per-factor combination.
    All,
}

#[derive(Parser, Debug)]
#[command(
    name = "strichartz-lab",
    version,
    about = "Thresholds, exponential sums, projector and Strichartz experiments on products of spheres and tori"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. In a config file these are top-level
/// keys.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// JSON config; flags override its keys
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Sphere dimensions, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub spheres: Option<Vec<u32>>,
    /// Torus dimension
    #[arg(long, global = true)]
    pub torus: Option<u32>,
    /// Multilinearity k (a range lo:hi for `thresholds`)
    #[arg(long, global = true)]
    pub k: Option<Span>,
    /// Lebesgue exponent, e.g. 4, 10/3 or inf
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Spectral size N or a dyadic range lo:hi
    #[arg(long = "N", global = true)]
    #[serde(rename = "N")]
    pub n: Option<Span>,
    /// Random draws per schedule point
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Base seed; every task derives its own stream from it
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on grid points, lattice points or nodes per evaluation
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Output directory for CSV, JSON manifest and gnuplot script
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// What to print on stdout
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Also write a gnuplot script
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "is_false")]
    pub gnuplot: bool,
    /// Print the resolved configuration and cost estimate, then stop
    #[arg(long, global = true)]
    #[serde(skip)]
    pub dry_run: bool,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Allowed slack on the fitted exponent (defaults per command)
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Well-posedness thresholds. CSV columns: r2,r3,r,k,regime,s_bound,strict,source
    Thresholds(ThresholdsArgs),
    /// Exponential-sum ratios on shifted cubes. CSV columns: N,p,r0,r1,family,shift,ratio
    Expsum(ExpsumArgs),
    /// Joint spectral projector witnesses. CSV columns: spec,k,label,point,trial,N,lhs,rhs,input_norm,ratio,modes
    Projector(ProjectorArgs),
    /// Multilinear Strichartz packets. CSV columns as for `projector`
    Strichartz(StrichartzArgs),
    /// Lattice points of a circle in a box. CSV columns: N,A_lo,A_hi,max_count,b1,b2,A
    Count(CountArgs),
    /// Weyl sums on major and minor arcs. CSV columns: N,major_ratio,minor_ratio,minor_samples
    Weyl(WeylArgs),
    /// Log-log fit of a CSV column. CSV columns: logN,logvalue,residual
    Fit(FitArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Thresholds(_) => "thresholds",
            Command::Expsum(_) => "expsum",
            Command::Projector(_) => "projector",
            Command::Strichartz(_) => "strichartz",
            Command::Count(_) => "count",
            Command::Weyl(_) => "weyl",
            Command::Fit(_) => "fit",
        }
    }
}

const COMMANDS: [&str; 7] = ["thresholds", "expsum", "projector", "strichartz", "count", "weyl", "fit"];

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsArgs {
    /// List every applicable rule, not only the best one
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub all: bool,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpsumArgs {
    /// Total rank r of the frequency lattice
    #[arg(long)]
    pub r: Option<usize>,
    /// Number of torus coordinates
    #[arg(long)]
    pub r1: Option<usize>,
    /// Random shifts per N in addition to b = 0
    #[arg(long)]
    pub shifts: Option<usize>,
    /// Run the slab sweep with N₁ = N₂^kappa instead of the cube sweep
    #[arg(long)]
    pub kappa: Option<u32>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectorArgs {
    #[arg(long, value_enum)]
    pub witness: Option<WitnessArg>,
    /// λ¹ = ratio·λ²
    #[arg(long)]
    pub ratio: Option<u32>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzArgs {
    /// N₁ = N₂^kappa
    #[arg(long)]
    pub kappa: Option<u32>,
    #[arg(long)]
    pub max_modes: Option<usize>,
    /// Comma list of single-mode, random-in-window, slab-localized
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub witness: Option<WitnessArg>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountArgs {
    /// Range of A = n₁² + n₂² (default 1:N⁴)
    #[arg(long = "A")]
    #[serde(rename = "A")]
    pub a: Option<Span>,
    /// Range over every offset whose box meets the circle
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub exhaustive_b: bool,
    /// Bound the maximum count must respect
    #[arg(long)]
    pub max: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeylArgs {
    #[arg(long)]
    pub shifts: Option<usize>,
    /// Random minor-arc sample points
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// CSV file to read
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long)]
    pub drop: Option<usize>,
    /// Exponent to compare the slope against
    #[arg(long)]
    pub expected: Option<f64>,
}

/// What a command produced.
struct Outcome {
    csv: Vec<u8>,
    report: Value,
    pass: bool,
    verdict: String,
    plot: Option<(String, usize, usize, Option<FitResult>)>,
}

/// Overlays non-null, non-false values of `over` onto `base`.
fn overlay(base: &mut Value, over: Value) {
    if let (Value::Object(b), Value::Object(o)) = (base, over) {
        for (k, v) in o {
            if v.is_null() || v == Value::Bool(false) {
                continue;
            }
            b.insert(k, v);
        }
    }
}

fn merge<T: Serialize + for<'de> Deserialize<'de>>(file: Option<Value>, flags: &T) -> Result<T> {
    let mut base = file.unwrap_or_else(|| Value::Object(Map::new()));
    overlay(&mut base, serde_json::to_value(flags)?);
    Ok(serde_json::from_value(base)?)
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Parses arguments, runs the command and returns the exit code. Output goes
/// to `stdout`; diagnostics to stderr.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

struct Resolved {
    common: Common,
    block: Value,
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let name = cli.command.name();
    let (file_common, file_block) = match &cli.common.config {
        None => (None, None),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut v: Value = serde_json::from_str(&text)?;
            let obj = v
                .as_object_mut()
                .ok_or_else(|| config_error("config file must hold a JSON object"))?;
            let block = obj.remove(name);
            for other in COMMANDS {
                obj.remove(other);
            }
            (Some(v), block)
        }
    };
    let common: Common = merge(file_common, &cli.common)?;
    let block = match &cli.command {
        Command::Thresholds(a) => serde_json::to_value(merge(file_block, a)?)?,
        Command::Expsum(a) => serde_json::to_value(merge(file_block, a)?)?,
        Command::Projector(a) => serde_json::to_value(merge(file_block, a)?)?,
        Command::Strichartz(a) => serde_json::to_value(merge(file_block, a)?)?,
        Command::Count(a) => serde_json::to_value(merge(file_block, a)?)?,
        Command::Weyl(a) => serde_json::to_value(merge(file_block, a)?)?,
        Command::Fit(a) => serde_json::to_value(merge(file_block, a)?)?,
    };
    Ok(Resolved {
        common: Common {
            dry_run: cli.common.dry_run,
            config: cli.common.config.clone(),
            ..common
        },
        block,
    })
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    let resolved = resolve(&cli)?;
    let c = &resolved.common;
    if let Some(t) = c.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let name = cli.command.name();
    let config = json!({ "command": name, "common": c, name: resolved.block });
    if c.dry_run {
        let plan = plan(name, c, &resolved.block)?;
        writeln!(stdout, "{}", serde_json::to_string_pretty(&json!({ "config": config, "plan": plan }))?)?;
        return Ok(EXIT_PASS);
    }
    let out = match name {
        "thresholds" => cmd_thresholds(c, serde_json::from_value(resolved.block.clone())?)?,
        "expsum" => cmd_expsum(c, serde_json::from_value(resolved.block.clone())?)?,
        "projector" => cmd_projector(c, serde_json::from_value(resolved.block.clone())?)?,
        "strichartz" => cmd_strichartz(c, serde_json::from_value(resolved.block.clone())?)?,
        "count" => cmd_count(c, serde_json::from_value(resolved.block.clone())?)?,
        "weyl" => cmd_weyl(c, serde_json::from_value(resolved.block.clone())?)?,
        _ => cmd_fit(c, serde_json::from_value(resolved.block.clone())?)?,
    };
    let manifest = json!({
        "config": config,
        "conventions": "probability measures on every factor and on t in [0, 2pi); model spectrum n^2",
        "report": out.report,
        "verdict": { "pass": out.pass, "line": out.verdict },
    });
    if let Some(dir) = &c.out {
        write_outputs(dir, name, &out, &manifest)?;
    }
    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => stdout.write_all(&out.csv)?,
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&manifest)?)?,
    }
    writeln!(stdout, "{} {}", if out.pass { "PASS" } else { "FAIL" }, out.verdict)?;
    Ok(if out.pass { EXIT_PASS } else { EXIT_VIOLATION })
}

fn write_outputs(dir: &Path, name: &str, out: &Outcome, manifest: &Value) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_name = format!("{name}.csv");
    std::fs::write(dir.join(&csv_name), &out.csv)?;
    std::fs::write(
        dir.join(format!("{name}.json")),
        serde_json::to_string_pretty(manifest)? + "\n",
    )?;
    if let Some((title, x, y, fit)) = &out.plot {
        std::fs::write(
            dir.join(format!("{name}.gp")),
            gnuplot_script(&csv_name, title, *x, *y, fit.as_ref()),
        )?;
    }
    Ok(())
}

fn manifold(c: &Common) -> Result<ManifoldSpec> {
    ManifoldSpec::new(c.spheres.clone().unwrap_or_default(), c.torus.unwrap_or(0))
}

fn budget(c: &Common, default: u128) -> u128 {
    c.budget.map_or(default, |b| b as u128)
}

fn n_list(c: &Common, default: Span) -> Result<Vec<i64>> {
    let span = c.n.unwrap_or(default);
    if span.lo < 1 {
        return Err(config_error("N must be positive"));
    }
    Ok(span.dyadic())
}

fn plan(name: &str, c: &Common, block: &Value) -> Result<Value> {
    let estimate = match name {
        "expsum" => {
            let a: ExpsumArgs = serde_json::from_value(block.clone())?;
            let r = a.r.unwrap_or(2) as u32;
            let ns = n_list(c, Span { lo: 4, hi: 64 })?;
            json!({ "N": ns, "cube_points": ns.iter().map(|n| (n + 1).pow(r)).collect::<Vec<_>>() })
        }
        "projector" | "strichartz" => json!({ "N": n_list(c, Span { lo: 4, hi: 16 })? }),
        "weyl" => json!({ "N": n_list(c, Span { lo: 64, hi: 1024 })? }),
        "count" => {
            let n = c.n.map_or(2, |s| s.lo);
            let a: CountArgs = serde_json::from_value(block.clone())?;
            let span = a.a.unwrap_or(Span { lo: 1, hi: n.pow(4) });
            json!({ "N": n, "A": span.to_string(), "values_of_A": span.hi - span.lo + 1 })
        }
        _ => Value::Null,
    };
    Ok(json!({ "budget": c.budget, "estimate": estimate }))
}

fn threshold_json(r: &ThresholdRow) -> Value {
    json!({
        "manifold": r.manifold,
        "k": r.k,
        "relation": r.relation(),
        "s_bound": fmt_q(&r.s_bound),
        "regime": r.regime.to_string(),
        "source": r.source(),
    })
}

fn cmd_thresholds(c: &Common, a: ThresholdsArgs) -> Result<Outcome> {
    let spec = manifold(c)?;
    let ks = c.k.unwrap_or(Span { lo: 1, hi: 1 });
    if ks.lo < 1 {
        return Err(config_error("k must be positive"));
    }
    let mut rows = Vec::new();
    for k in ks.lo..=ks.hi {
        if a.all {
            rows.extend(applicable_thresholds(&spec, k as u32)?);
        } else {
            rows.push(lwp_threshold(&spec, k as u32)?);
        }
    }
    let mut csv = Vec::new();
    write_threshold_csv(&rows, &mut csv)?;
    let summary: Vec<String> = rows
        .iter()
        .map(|r| format!("k={}: s {} {} ({})", r.k, r.relation(), fmt_q(&r.s_bound), r.regime))
        .collect();
    Ok(Outcome {
        csv,
        report: Value::Array(rows.iter().map(threshold_json).collect()),
        pass: true,
        verdict: format!("thresholds on {spec}: {}", summary.join("; ")),
        plot: None,
    })
}

fn parse_p(c: &Common, default: &str) -> Result<LpExponent> {
    c.p.as_deref().unwrap_or(default).parse()
}

fn fit_verdict(label: &str, fit: Option<&FitResult>, theory: f64, tol: f64, two_sided: bool) -> (bool, String) {
    match fit {
        None => (false, format!("{label}: fewer than three usable points, no fit")),
        Some(f) => {
            let upper = f.slope <= theory + tol;
            let lower = !two_sided || f.slope >= theory - tol;
            let range = if two_sided {
                format!("[{:.4}, {:.4}]", theory - tol, theory + tol)
            } else {
                format!("<= {:.4}", theory + tol)
            };
            (
                upper && lower,
                format!("{label}: slope {:.4} (theory {theory:.4}, allowed {range})", f.slope),
            )
        }
    }
}

fn cmd_expsum(c: &Common, a: ExpsumArgs) -> Result<Outcome> {
    let r = a.r.unwrap_or(2);
    let r1 = a.r1.unwrap_or(0);
    if r == 0 || r1 > r {
        return Err(config_error(format!("need 0 <= r1 <= r and r >= 1, got r={r}, r1={r1}")));
    }
    let p = parse_p(c, "4")?;
    let mut sweep = SumSweep::new(r - r1, r1, p, n_list(c, Span { lo: 4, hi: 64 })?);
    sweep.trials = c.trials.unwrap_or(1);
    sweep.seed = c.seed.unwrap_or(0);
    sweep.shifts = a.shifts.unwrap_or(20);
    sweep.families = Family::ALL.to_vec();
    sweep.budget = budget(c, DEFAULT_GRID_BUDGET);
    let shape = ManifoldSpec::new(vec![2; r - r1], r1 as u32)?;
    let theory = gamma_exponent(&shape, p, 0.0)
        .ok_or_else(|| config_error(format!("no known exponent for p = {p} at r = {r}, r1 = {r1}")))?;
    let tol = c.tolerance.unwrap_or(0.15);
    let mut csv = Vec::new();
    if let Some(kappa) = a.kappa {
        let report = verify_i2(&sweep, kappa, theory)?;
        {
            let mut w = csv::Writer::from_writer(&mut csv);
            for row in &report.rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        let (pass, verdict) = fit_verdict("expsum slab sweep", report.fit.as_ref(), theory, tol, false);
        let plot = Some(("slab ratios".to_string(), 2, 5, report.fit.clone()));
        return Ok(Outcome {
            csv,
            report: serde_json::to_value(&report)?,
            pass,
            verdict,
            plot,
        });
    }
    let report = verify_i1(&sweep)?;
    {
        let mut w = csv::Writer::from_writer(&mut csv);
        for row in &report.rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let (pass, verdict) = fit_verdict("expsum", report.fit.as_ref(), theory, tol, false);
    Ok(Outcome {
        csv,
        plot: Some(("max ratio over shifts and families".into(), 1, 7, report.fit.clone())),
        report: serde_json::to_value(&report)?,
        pass,
        verdict,
    })
}

fn witness_set(arg: WitnessArg, r0: usize) -> Vec<Vec<Witness>> {
    match arg {
        WitnessArg::Zonal => vec![vec![Witness::Zonal; r0]],
        WitnessArg::Hw => vec![vec![Witness::HighestWeight; r0]],
        WitnessArg::All => witness_combinations(r0, true),
    }
}

/// Fits lhs/input_norm against N₂ for every label and returns the fit with
/// the largest slope.
fn label_fits(rows: &[ProductNormReport]) -> Vec<(String, FitResult)> {
    let best = max_per_point(rows);
    let mut labels: Vec<String> = best.iter().map(|r| r.label.clone()).collect();
    labels.sort();
    labels.dedup();
    labels
        .into_iter()
        .filter_map(|label| {
            let pts: Vec<(f64, f64)> = best
                .iter()
                .filter(|r| r.label == label)
                .map(|r| (r.n[1], r.lhs / r.input_norm))
                .collect();
            fit_exponent(&pts, 0).ok().map(|f| (label, f))
        })
        .collect()
}

fn growth_exponent(
    base: &std::collections::BTreeMap<usize, crate::regularity::SlackExpr>,
    slack: &crate::regularity::SlackValues,
) -> f64 {
    base.iter()
        .filter(|(&j, _)| j >= 2)
        .map(|(_, e)| e.evaluate(slack))
        .sum()
}

fn product_outcome(
    label: &str,
    rows: Vec<ProductNormReport>,
    theory: f64,
    tol: f64,
    two_sided: bool,
) -> Result<Outcome> {
    let fits = label_fits(&rows);
    let top = fits
        .iter()
        .max_by(|a, b| a.1.slope.total_cmp(&b.1.slope))
        .map(|(l, f)| (l.clone(), f.clone()));
    let (pass, verdict) = fit_verdict(
        &format!("{label} [{}]", top.as_ref().map_or("-", |t| t.0.as_str())),
        top.as_ref().map(|t| &t.1),
        theory,
        tol,
        two_sided,
    );
    let mut csv = Vec::new();
    write_reports_csv(&rows, &mut csv)?;
    Ok(Outcome {
        csv,
        report: json!({
            "rows": rows,
            "fits": fits.iter().map(|(l, f)| json!({ "label": l, "fit": f })).collect::<Vec<_>>(),
            "theoretical_exponent": theory,
        }),
        pass,
        verdict,
        plot: Some((label.to_string(), 6, 7, top.map(|t| t.1))),
    })
}

fn cmd_projector(c: &Common, a: ProjectorArgs) -> Result<Outcome> {
    let spec = manifold(c)?;
    if !spec.is_sphere_only() {
        return Err(config_error("projector needs a product of spheres (no torus)"));
    }
    let k = c.k.map_or(1, |s| s.lo);
    if k < 1 {
        return Err(config_error("k must be positive"));
    }
    let k = k as u32;
    let ns: Vec<u32> = n_list(c, Span { lo: 4, hi: 32 })?.into_iter().map(|n| n as u32).collect();
    let schedule = projector_schedule(spec.sphere_count(), k, &ns, a.ratio.unwrap_or(4));
    let eta = a.eta.unwrap_or(1e-3);
    let rows = projector_experiment(
        &spec,
        k,
        &schedule,
        &witness_set(a.witness.unwrap_or(WitnessArg::All), spec.sphere_count()),
        eta,
    )?;
    let constant = mljspe_constant(&spec, k, eta)?;
    let theory = growth_exponent(&constant.base_exponents, &constant.slack);
    product_outcome("projector", rows, theory, c.tolerance.unwrap_or(0.15), true)
}

fn cmd_strichartz(c: &Common, a: StrichartzArgs) -> Result<Outcome> {
    let spec = manifold(c)?;
    let k = c.k.map_or(1, |s| s.lo);
    if k < 1 {
        return Err(config_error("k must be positive"));
    }
    let k = k as u32;
    let schedule = strichartz_schedule(k, &n_list(c, Span { lo: 4, hi: 16 })?, a.kappa.unwrap_or(2));
    let mut run = StrichartzRun::new(spec.clone(), k, schedule);
    run.trials = c.trials.unwrap_or(run.trials);
    run.seed = c.seed.unwrap_or(0);
    run.max_modes = a.max_modes.unwrap_or(run.max_modes);
    if let Some(f) = &a.families {
        run.families = f.iter().map(|s| s.parse::<PacketFamily>()).collect::<Result<_>>()?;
    }
    if let Some(b) = c.budget {
        run.window_budget = b as u128;
    }
    run.witness = match a.witness.unwrap_or(WitnessArg::Hw) {
        WitnessArg::Zonal => Witness::Zonal,
        _ => Witness::HighestWeight,
    };
    run.params = FreeParams {
        delta0: a.delta0,
        eta: a.eta.unwrap_or(1e-3),
        eps: a.eps.unwrap_or(1e-3),
    };
    let rows = strichartz_experiment(&run)?;
    let constant = mls_constant(&spec, k, &run.params)?;
    let theory = growth_exponent(&constant.base_exponents, &constant.slack);
    product_outcome("strichartz", rows, theory, c.tolerance.unwrap_or(0.2), false)
}

fn cmd_count(c: &Common, a: CountArgs) -> Result<Outcome> {
    let ns: Vec<i64> = match c.n {
        Some(s) if s.lo != s.hi => n_list(c, s)?,
        Some(s) => vec![s.lo],
        None => vec![2],
    };
    if ns.iter().any(|&n| n < 1) {
        return Err(config_error("N must be positive"));
    }
    let bound = a.max.unwrap_or(2);
    let budget = budget(c, 1 << 32);
    let mut rows = Vec::new();
    for &n in &ns {
        let span = a.a.unwrap_or(Span { lo: 1, hi: n.pow(4) });
        if span.lo < 0 {
            return Err(config_error("A must be nonnegative"));
        }
        let samples = if a.exhaustive_b {
            BSamples::Exhaustive
        } else {
            BSamples::Fixed(vec![(Q::from_integer(0), Q::from_integer(0))])
        };
        let m = max_circle_count(
            Ratio::from_integer(n),
            span.lo as u64..=span.hi as u64,
            &samples,
            budget,
        )?;
        rows.push((n, span, m));
    }
    let mut csv = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv);
        w.write_record(["N", "A_lo", "A_hi", "max_count", "b1", "b2", "A"])?;
        for (n, span, m) in &rows {
            w.write_record([
                n.to_string(),
                span.lo.to_string(),
                span.hi.to_string(),
                m.max_count.to_string(),
                fmt_q(&m.arg.0),
                fmt_q(&m.arg.1),
                m.arg.2.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let worst = rows.iter().map(|r| r.2.max_count).max().unwrap_or(0);
    let fit = if rows.len() >= 3 {
        let pts: Vec<(f64, f64)> = rows.iter().map(|(n, _, m)| (*n as f64, m.max_count as f64)).collect();
        fit_exponent(&pts, 0).ok()
    } else {
        None
    };
    let (pass, verdict) = match (&fit, c.tolerance) {
        (Some(f), Some(tol)) => (
            f.slope <= tol,
            format!("count: divisor-proxy slope {:.4} (allowed <= {tol})", f.slope),
        ),
        _ => (
            worst <= bound,
            format!("count: max points in a box {worst} (allowed <= {bound})"),
        ),
    };
    Ok(Outcome {
        csv,
        report: json!({
            "rows": rows.iter().map(|(n, s, m)| json!({
                "N": n, "A": s.to_string(), "max_count": m.max_count,
                "b1": fmt_q(&m.arg.0), "b2": fmt_q(&m.arg.1), "A_arg": m.arg.2,
            })).collect::<Vec<_>>(),
            "fit": fit,
        }),
        pass,
        verdict,
        plot: Some(("max lattice points in a box".into(), 1, 4, fit)),
    })
}

fn cmd_weyl(c: &Common, a: WeylArgs) -> Result<Outcome> {
    let ns = n_list(c, Span { lo: 64, hi: 1024 })?;
    if ns.iter().any(|&n| n < 2) {
        return Err(config_error("weyl needs N >= 2"));
    }
    let report = arc_sweep(&ns, a.shifts.unwrap_or(10), a.samples.unwrap_or(20), c.seed.unwrap_or(0))?;
    let tol = c.tolerance.unwrap_or(0.1);
    let mut csv = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv);
        for row in &report.rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let (major_ok, major_line) = fit_verdict("major arcs", report.major_fit.as_ref(), 0.0, tol, true);
    let minor_ok = report.minor_growth <= 1.5;
    Ok(Outcome {
        csv,
        plot: Some(("major-arc ratio".into(), 1, 2, report.major_fit.clone())),
        report: serde_json::to_value(&report)?,
        pass: major_ok && minor_ok,
        verdict: format!(
            "weyl: {major_line}; minor-arc growth {:.4} (allowed <= 1.5)",
            report.minor_growth
        ),
    })
}

fn cmd_fit(c: &Common, a: FitArgs) -> Result<Outcome> {
    let path = a.input.ok_or_else(|| config_error("fit needs --input"))?;
    let x = a.x.unwrap_or_else(|| "N".into());
    let y = a.y.unwrap_or_else(|| "value".into());
    let mut reader = csv::Reader::from_path(&path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| config_error(format!("column '{name}' not in {}", path.display())))
    };
    let (xi, yi) = (col(&x)?, col(&y)?);
    let mut pts = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let (Ok(xv), Ok(yv)) = (rec[xi].parse::<f64>(), rec[yi].parse::<f64>()) else {
            continue;
        };
        pts.push((xv, yv));
    }
    let fit = fit_exponent(&pts, a.drop.unwrap_or(0))?;
    let mut csv = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv);
        w.write_record(["logN", "logvalue", "residual"])?;
        for ((lx, ly), r) in fit.points.iter().zip(fit.residuals()) {
            w.write_record([lx.to_string(), ly.to_string(), r.to_string()])?;
        }
        w.flush()?;
    }
    let (pass, verdict) = match a.expected {
        Some(e) => fit_verdict("fit", Some(&fit), e, c.tolerance.unwrap_or(0.15), true),
        None => (true, format!("fit: slope {:.4}, intercept {:.4}", fit.slope, fit.intercept)),
    };
    Ok(Outcome {
        csv,
        report: serde_json::to_value(&fit)?,
        pass,
        verdict,
        plot: None,
    })
}
