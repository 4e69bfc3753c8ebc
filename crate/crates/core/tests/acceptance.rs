//! Acceptance suite. Runs without the libtest harness so the one-line
//! verdict per criterion is always printed; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use kylesim::calculus::DerivativeConfig;
use kylesim::insider::density::TransitionDensity;
use kylesim::insider::drift_gaussian_bridge;
use kylesim::noise::NoiseVol;
use kylesim::path::TimeGrid;
use kylesim::rules::{
    check_equilibrium_conditions, check_h_equation, check_lambda_equation, kv_check, solve_lambda_ode,
    Rule,
};
use kylesim::scenario::Scenario;
use kylesim::selftest::{calculus_selftest, SelftestConfig};
use kylesim::sim::{demand_paths, replay, Model};
use kylesim::stats::{certify, EquilibriumReport};

type Outcome = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn load(name: &str) -> Scenario {
    Scenario::from_file(&scenario_path(name)).expect("shipped scenario parses")
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn block_pass(r: &EquilibriumReport, name: &str) -> Result<(), String> {
    let b = r.block(name).ok_or_else(|| format!("no {name} block"))?;
    if b.pass {
        return Ok(());
    }
    let failed: Vec<String> = b
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}={:?}", c.name, c.statistic))
        .collect();
    Err(format!("{name} block failed: {} {}", failed.join(", "), b.error.clone().unwrap_or_default()))
}

fn block_fails(r: &EquilibriumReport, name: &str) -> Result<(), String> {
    match r.block(name) {
        Some(b) if !b.pass => Ok(()),
        Some(_) => Err(format!("{} passed the {name} block", r.scenario)),
        None => Err(format!("no {name} block")),
    }
}

fn c1_calculus() -> Outcome {
    let start = Instant::now();
    let results = calculus_selftest(&SelftestConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    for r in &results {
        ensure(r.pass, format!("{} error {:.3e} ({})", r.name, r.max_error, r.tolerance))?;
    }
    ensure(results.len() == 6, "expected six identities")?;
    ensure(secs < 30.0, format!("took {secs:.1} s"))?;
    Ok(format!("6/6 identities on 100 paths x 4096 steps in {secs:.1} s"))
}

fn c2_rule_residuals() -> Outcome {
    let noise = NoiseVol::Constant(1.0);
    let rules = [
        (Rule::Bachelier { p0: 0.0, lambda: 1.0, noise: noise.clone() }, 0.0),
        (Rule::BlackScholes { p0: 1.0, lambda: 1.0, noise: noise.clone() }, 0.0),
        (Rule::Kimura { p0: 0.5, c: 1.0, noise: noise.clone() }, -1.0),
    ];
    let grid = TimeGrid::new(1.0, 2000).unwrap();
    let paths = demand_paths(&noise, grid, 10, 7).unwrap();
    let cfg = DerivativeConfig::default();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (rule, gamma) in &rules {
        let g = rule.default_grid(1.0);
        let h = check_h_equation(rule, &g);
        let l = check_lambda_equation(rule, *gamma, &g);
        ensure(h < 1e-12 && l < 1e-12, format!("{}: analytic residuals {h:e}, {l:e}", rule.name()))?;
        let r = check_equilibrium_conditions(rule, *gamma, &paths, &cfg).map_err(|e| e.to_string())?;
        ensure(
            r.drift < 1e-3 && r.commutator < 1e-3,
            format!("{}: path residuals {:e}, {:e}", rule.name(), r.drift, r.commutator),
        )?;
        for p in &paths {
            let kv = kv_check(rule, p, &cfg).map_err(|e| e.to_string())?;
            ensure(kv < 0.01, format!("{}: kernel diagonal off by {kv:e}", rule.name()))?;
            worst.2 = worst.2.max(kv);
        }
        worst.0 = worst.0.max(h.max(l));
        worst.1 = worst.1.max(r.drift.max(r.commutator));
    }
    Ok(format!(
        "analytic <= {:.1e}, path derivatives <= {:.1e}, kernel <= {:.1e}",
        worst.0, worst.1, worst.2
    ))
}

fn c3_bachelier() -> Outcome {
    let sc = load("bachelier_eq");
    ensure(sc.mc.paths == 100_000, "scenario must use 1e5 paths")?;
    let start = Instant::now();
    let r = certify(&sc, None).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let w = r.summary.w_t;
    ensure((w.mean - 1.0).abs() <= 3.0 * w.se, format!("E[W_T] = {} +/- {}", w.mean, w.se))?;
    for b in ["value", "martingale", "terminal", "competitive", "market_maker", "optimality"] {
        block_pass(&r, b)?;
    }
    ensure(secs < 300.0, format!("took {secs:.0} s"))?;
    let slope = r.block("terminal").and_then(|b| b.check("gap_slope")).and_then(|c| c.statistic);
    Ok(format!(
        "E[W_T] = {:.4} +/- {:.4}, gap slope {:.3}, verdict {}, {secs:.0} s",
        w.mean,
        w.se,
        slope.unwrap_or(f64::NAN),
        r.verdict
    ))
}

fn c4_black_scholes() -> Outcome {
    let sc = load("black_scholes_eq");
    let r = certify(&sc, None).map_err(|e| e.to_string())?;
    for b in ["martingale", "terminal", "competitive", "market_maker", "value", "optimality"] {
        block_pass(&r, b)?;
    }
    // Per-path agreement of the density-score drift with the plain Brownian
    // bridge to the matching terminal demand, both in units of W (sigma = 1).
    let model = Model::new(&sc).map_err(|e| e.to_string())?;
    let dt = model.grid.dt();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let rp = replay(&model, i).map_err(|e| e.to_string())?;
        let y_star = sc.rule.terminal_demand(rp.record.v, sc.horizon).ok_or("no terminal demand")?;
        for k in 0..rp.rows.len() - 1 {
            let row = &rp.rows[k];
            let gauss = drift_gaussian_bridge(y_star, row.y, row.t, sc.horizon, dt).map_err(|e| e.to_string())?;
            let used = rp.rows[k + 1].theta;
            worst = worst.max((used - gauss).abs() / gauss.abs().max(1.0));
        }
    }
    ensure(worst < 1e-10, format!("drifts differ by {worst:e}"))?;
    Ok(format!("all blocks pass (verdict {}), drift agreement {worst:.1e}", r.verdict))
}

fn c5_det_lambda() -> Outcome {
    let sc = load("det_lambda_eq");
    let (lambda0, gamma, sigma) = (1.0, -1.0, 1.0);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let ode = solve_lambda_ode(lambda0, gamma, &NoiseVol::Constant(sigma), &grid);
    let mut worst: f64 = 0.0;
    for (k, l) in ode.iter().enumerate() {
        let exact = lambda0 / (1.0 - lambda0 * gamma * sigma * sigma * grid.time(k));
        worst = worst.max(((l - exact) / exact).abs());
        let from_rule = sc.rule.depth(grid.time(k), 0.0);
        worst = worst.max(((from_rule - exact) / exact).abs());
    }
    ensure(worst < 1e-8, format!("lambda(t) off by {worst:e}"))?;
    let r = certify(&sc, None).map_err(|e| e.to_string())?;
    block_pass(&r, "value")?;
    block_pass(&r, "optimality")?;
    let ce = r.block("value").and_then(|b| b.check("certainty_equivalent")).ok_or("no CE")?;
    Ok(format!(
        "lambda(t) rel err {worst:.1e}, CE {:.4} ({}), verdict {}",
        ce.statistic.unwrap_or(f64::NAN),
        ce.note.clone().unwrap_or_default(),
        r.verdict
    ))
}

/// Composite Simpson in the logit variable, where the density is smooth.
fn unit_integral(f: impl Fn(f64) -> f64) -> f64 {
    let (a, b, n) = (-40.0f64, 40.0f64, 40_000usize);
    let h = (b - a) / n as f64;
    let g = |l: f64| {
        let x = 1.0 / (1.0 + (-l).exp());
        let jac = x * (1.0 - x);
        if jac == 0.0 || x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            f(x) * jac
        }
    };
    let mut s = g(a) + g(b);
    for i in 1..n {
        s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn c6_kimura() -> Outcome {
    let rule = Rule::Kimura { p0: 0.5, c: 1.0, noise: NoiseVol::Constant(1.0) };
    let d = rule.density();
    let mut mass_err: f64 = 0.0;
    for &p in &[0.5, 0.2, 0.9] {
        for &(t, horizon) in &[(0.0, 1.0), (0.5, 1.0), (0.0, 0.1)] {
            let m = unit_integral(|x| d.density(t, horizon, p, x));
            mass_err = mass_err.max((m - 1.0).abs());
        }
    }
    ensure(mass_err < 1e-6, format!("density mass off by {mass_err:e}"))?;
    let mut ck_err: f64 = 0.0;
    for &x in &[0.1, 0.3, 0.5, 0.7, 0.95] {
        let direct = d.density(0.0, 1.0, 0.5, x);
        let two_step = unit_integral(|z| d.density(0.0, 0.5, 0.5, z) * d.density(0.5, 1.0, z, x));
        ck_err = ck_err.max((direct - two_step).abs());
    }
    ensure(ck_err < 1e-4, format!("Chapman-Kolmogorov gap {ck_err:e}"))?;

    let g = rule.default_grid(1.0);
    let at_c = check_lambda_equation(&rule, -1.0, &g);
    ensure(at_c < 1e-12, format!("lambda residual at gamma = -C is {at_c:e}"))?;
    for gamma in [0.0, -0.5, -2.0] {
        let l = check_lambda_equation(&rule, gamma, &g);
        ensure(l > 1e-3, format!("lambda residual at gamma = {gamma} is only {l:e}"))?;
    }

    let r = certify(&load("kimura_eq"), None).map_err(|e| e.to_string())?;
    block_pass(&r, "terminal")?;
    let slope = r.block("terminal").and_then(|b| b.check("gap_slope")).and_then(|c| c.statistic);
    Ok(format!(
        "mass err {mass_err:.1e}, CK err {ck_err:.1e}, gap slope {:.3}, verdict {}",
        slope.unwrap_or(f64::NAN),
        r.verdict
    ))
}

fn c7_negative_controls() -> Outcome {
    let mut notes = Vec::new();
    for (name, blocks) in [
        ("noinsider_control", &["terminal", "competitive"][..]),
        ("wrong_target_control", &["market_maker"][..]),
        ("drifted_control", &["martingale"][..]),
    ] {
        let sc = load(name);
        let a = certify(&sc, None).map_err(|e| e.to_string())?;
        let b = certify(&sc, None).map_err(|e| e.to_string())?;
        ensure(!a.verdict, format!("{name} verdict true"))?;
        for blk in blocks {
            block_fails(&a, blk)?;
        }
        if *blocks == ["martingale"] {
            let ks = a.block("martingale").and_then(|m| m.check("ks_statistic")).ok_or("no KS")?;
            ensure(!ks.pass, "drifted control passed KS")?;
        }
        ensure(a.to_json() == b.to_json(), format!("{name} report differs between runs"))?;
        notes.push(format!("{name} fails {}", blocks.join("+")));
    }
    Ok(notes.join("; "))
}

fn kylesim(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kylesim"))
        .args(args)
        .env("KYLESIM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)),
    )
}

fn c8_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |s: &str| dir.path().join(s).display().to_string();
    let scen = scenario_path("kimura_eq").display().to_string();
    kylesim(&["simulate", "--scenario", &scen, "--out", &d("a"), "--paths", "3000"], "1")?;
    let manifest = d("a/manifest.json");
    kylesim(&["simulate", "--manifest", &manifest, "--out", &d("b")], "1")?;
    kylesim(&["simulate", "--manifest", &manifest, "--out", &d("c")], "4")?;
    let read = |p: String| std::fs::read(p).map_err(|e| e.to_string());
    let a = read(d("a/result.csv"))?;
    ensure(a == read(d("b/result.csv"))?, "manifest rerun differs")?;
    ensure(a == read(d("c/result.csv"))?, "four-worker run differs from one worker")?;
    ensure(read(d("a/summary.json"))? == read(d("c/summary.json"))?, "summaries differ")?;
    Ok(format!("result.csv identical across 3 runs ({} bytes)", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 functional calculus oracles", c1_calculus),
        ("2 rule residuals", c2_rule_residuals),
        ("3 Bachelier certification", c3_bachelier),
        ("4 Black-Scholes certification", c4_black_scholes),
        ("5 risk-averse deterministic lambda", c5_det_lambda),
        ("6 Kimura", c6_kimura),
        ("7 negative controls", c7_negative_controls),
        ("8 reproducibility", c8_reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg} [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
