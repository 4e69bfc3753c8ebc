//! Command line front end. Every command returns a process exit code:
//! 0 success, 1 a check or verdict failed, 2 bad input, 3 aborted run.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calculus::DerivativeConfig;
use crate::error::{Error, Result};
use crate::noise::NoiseVol;
use crate::path::TimeGrid;
use crate::rules::{check_equilibrium_conditions, check_h_equation, check_lambda_equation, kv_check, PricingRule, RectGrid, Rule, RuleKind};
use crate::scenario::Scenario;
use crate::selftest::{calculus_selftest, SelftestConfig};
use crate::sim::{demand_paths, replay, simulate, Model, SimOptions, TraceRow};
use crate::stats::certify;

/// Traced paths written when `output.emit_paths` is set.
pub const EMITTED_PATHS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "kylesim", version, about = "Monte Carlo laboratory for path-dependent Kyle-Back equilibria")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write result.csv, summary.json and manifest.json.
    Simulate(SimulateArgs),
    /// Run every verification block and write report.json and report.txt.
    Certify(CertifyArgs),
    /// Residuals of the equilibrium equations for a pricing rule.
    CheckRule(CheckRuleArgs),
    /// Oracle suite for the functional derivatives.
    CalculusSelftest(SelftestArgs),
    /// Regenerate one path with its full trajectory.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub scenario: Option<PathBuf>,
    /// Rerun from a manifest.json written by an earlier run.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Worker threads; overrides KYLESIM_THREADS, 0 means one per core.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckRuleArgs {
    /// bachelier, black_scholes, det_lambda or kimura.
    #[arg(long)]
    pub rule: String,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    /// t0:t1:nt,x0:x1:nx; defaults to the rule's own grid.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Initial price; defaults to 0, 1, 0 and 0.5 for the four rules.
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Demand paths for the path-derivative residuals.
    #[arg(long, default_value_t = 10)]
    pub paths: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 100)]
    pub paths: usize,
    #[arg(long, default_value_t = 4096)]
    pub steps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub index: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Everything needed to rerun a simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub scenario: Scenario,
}

impl Manifest {
    pub fn new(scenario: &Scenario) -> Manifest {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: scenario.mc.seed,
            scenario: scenario.clone(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Manifest> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::config(format!("manifest file not found: {}", path.display())))
            }
            Err(e) => return Err(Error::io(path.display(), e)),
        };
        Manifest::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.seed != m.scenario.mc.seed {
            return Err(Error::config("manifest seed differs from scenario.mc.seed"));
        }
        m.scenario.validate()?;
        Ok(m)
    }
}

#[derive(Serialize)]
struct ResultRow {
    path_id: u64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "Y_T")]
    y_t: f64,
    #[serde(rename = "P_T")]
    p_t: f64,
    #[serde(rename = "W_T")]
    w_t: f64,
    utility: f64,
    cap_events: u32,
    boundary_events: u32,
}

#[derive(Serialize)]
struct TraceOut {
    path_id: usize,
    t: f64,
    #[serde(rename = "Z")]
    z: f64,
    #[serde(rename = "Y")]
    y: f64,
    #[serde(rename = "P")]
    p: f64,
    theta: f64,
    #[serde(rename = "W")]
    w: f64,
    boundary_events: u32,
}

fn trace_rows(path_id: usize, rows: &[TraceRow]) -> impl Iterator<Item = TraceOut> + '_ {
    rows.iter().map(move |r| TraceOut {
        path_id,
        t: r.t,
        z: r.z,
        y: r.y,
        p: r.p,
        theta: r.theta,
        w: r.w,
        boundary_events: r.boundary_events,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display(), e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path.display(), e))?;
    Ok(csv::WriterBuilder::new().has_headers(true).from_writer(f))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let mut scenario = match (&args.scenario, &args.manifest) {
        (Some(p), _) => Scenario::from_file(p)?,
        (None, Some(m)) => Manifest::from_file(m)?.scenario,
        (None, None) => return Err(Error::config("either --scenario or --manifest is required")),
    };
    if let Some(s) = args.seed {
        scenario.mc.seed = s;
    }
    if let Some(p) = args.paths {
        scenario.mc.paths = p;
    }
    if let Some(n) = args.steps {
        scenario.mc.steps = n;
    }
    scenario.validate()?;
    let model = Model::new(&scenario)?;
    let result = simulate(
        &model,
        &SimOptions {
            threads: args.threads,
            ..SimOptions::default()
        },
    )?;

    create_dir(&args.out)?;
    let path = args.out.join("result.csv");
    let mut w = csv_writer(&path)?;
    for r in &result.records {
        w.serialize(ResultRow {
            path_id: r.path_id,
            v: r.v,
            y_t: r.y_t,
            p_t: r.p_t,
            w_t: r.w_t,
            utility: r.utility,
            cap_events: r.cap_events,
            boundary_events: r.boundary_events,
        })?;
    }
    w.flush().map_err(|e| Error::io(path.display(), e))?;

    if scenario.output.emit_paths {
        let path = args.out.join("paths.csv");
        let mut w = csv_writer(&path)?;
        for i in 0..scenario.mc.paths.min(EMITTED_PATHS) {
            let rp = replay(&model, i)?;
            for row in trace_rows(i, &rp.rows) {
                w.serialize(row)?;
            }
        }
        w.flush().map_err(|e| Error::io(path.display(), e))?;
    }

    write_text(&args.out.join("summary.json"), &json(&result.summary)?)?;
    write_text(&args.out.join("manifest.json"), &json(&Manifest::new(&scenario))?)?;
    let s = &result.summary;
    println!(
        "{} paths ({} failed, {} at a boundary); E[W_T] = {:.6} +/- {:.6}; mean |P_T - V| = {:.6}",
        s.n_paths, s.n_failed, s.n_boundary, s.w_t.mean, s.w_t.se, s.terminal_gap.mean
    );
    Ok(0)
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<i32> {
    let scenario = Scenario::from_file(&args.scenario)?;
    let report = certify(&scenario, args.threads)?;
    create_dir(&args.out)?;
    let text = report.render_text();
    write_text(&args.out.join("report.json"), &format!("{}\n", report.to_json()))?;
    write_text(&args.out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(if report.verdict { 0 } else { 1 })
}

fn rule_from_args(a: &CheckRuleArgs) -> Result<Rule> {
    let kind = RuleKind::parse(&a.rule).ok_or_else(|| Error::config(format!("unknown rule '{}'", a.rule)))?;
    let noise = NoiseVol::constant(a.sigma)?;
    let rule = match kind {
        RuleKind::Bachelier => Rule::Bachelier {
            p0: a.p0.unwrap_or(0.0),
            lambda: a.lambda,
            noise,
        },
        RuleKind::BlackScholes => Rule::BlackScholes {
            p0: a.p0.unwrap_or(1.0),
            lambda: a.lambda,
            noise,
        },
        RuleKind::DetLambda => Rule::DetLambda {
            p0: a.p0.unwrap_or(0.0),
            lambda0: a.lambda,
            gamma: a.gamma,
            noise,
        },
        RuleKind::Kimura => Rule::Kimura {
            p0: a.p0.unwrap_or(0.5),
            c: a.c,
            noise,
        },
    };
    rule.validate()?;
    Ok(rule)
}

pub fn cmd_check_rule(a: &CheckRuleArgs) -> Result<i32> {
    if !(a.gamma.is_finite() && a.gamma <= 0.0) {
        return Err(Error::config(format!("--gamma must be <= 0, got {}", a.gamma)));
    }
    if !(a.horizon > 0.0 && a.horizon.is_finite()) {
        return Err(Error::config("--horizon must be positive"));
    }
    let rule = rule_from_args(a)?;
    let grid = match &a.grid {
        Some(s) => RectGrid::parse(s)?,
        None => rule.default_grid(a.horizon),
    };
    let tol = 1e-3;
    let mut rows = vec![
        ("h_equation", check_h_equation(&rule, &grid), tol),
        ("lambda_equation", check_lambda_equation(&rule, a.gamma, &grid), tol),
    ];
    if a.paths > 0 {
        let tg = TimeGrid::new(a.horizon, a.steps)?;
        let paths = demand_paths(rule.noise(), tg, a.paths, a.seed)?;
        let cfg = DerivativeConfig::default();
        let r = check_equilibrium_conditions(&rule, a.gamma, &paths, &cfg)?;
        rows.push(("functional_drift", r.drift, tol));
        rows.push(("functional_commutator", r.commutator, tol));
        rows.push(("kernel_diagonal", kv_check(&rule, &paths[0], &cfg)?, 1e-2));
    }
    println!("rule {} gamma {}", rule.name(), a.gamma);
    let mut ok = true;
    for (name, value, tol) in rows {
        let pass = value < tol;
        ok &= pass;
        println!("{:<4} {name:<22} {value:>12.4e}  < {tol:e}", if pass { "ok" } else { "FAIL" });
    }
    Ok(if ok { 0 } else { 1 })
}

pub fn cmd_selftest(a: &SelftestArgs) -> Result<i32> {
    let mut cfg = SelftestConfig {
        paths: a.paths,
        steps: a.steps,
        ..SelftestConfig::default()
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.paths == 0 || cfg.steps < 2 {
        return Err(Error::config("selftest needs at least one path and two steps"));
    }
    let results = calculus_selftest(&cfg)?;
    let mut ok = true;
    for r in &results {
        ok &= r.pass;
        println!(
            "{:<4} {:<44} max error {:>10.3e}  worst/tol {:>8.3e}  ({})",
            if r.pass { "ok" } else { "FAIL" },
            r.name,
            r.max_error,
            r.worst_ratio,
            r.tolerance
        );
    }
    Ok(if ok { 0 } else { 1 })
}

pub fn cmd_replay(a: &ReplayArgs) -> Result<i32> {
    let scenario = Scenario::from_file(&a.scenario)?;
    let model = Model::new(&scenario)?;
    let rp = replay(&model, a.index)?;
    create_dir(&a.out)?;
    let path = a.out.join(format!("path_{}.csv", a.index));
    let mut w = csv_writer(&path)?;
    for row in trace_rows(a.index, &rp.rows) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path.display(), e))?;
    println!("{}", serde_json::to_string(&rp.record)?);
    Ok(0)
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Certify(a) => cmd_certify(a),
        Command::CheckRule(a) => cmd_check_rule(a),
        Command::CalculusSelftest(a) => cmd_selftest(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Parse arguments, run, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
