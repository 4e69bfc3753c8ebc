//! Individual report blocks. Each takes simulation output and thresholds and
//! returns a [`Block`] of checks.

use serde_json::json;

use super::basic::{mean_se, ols, MeanSe};
use super::report::{Block, Check};
use super::tests::{ks_standard_normal, ljung_box_pooled, log_log_slope};
use super::{Thresholds, VerifyConfig};
use crate::calculus::DerivativeConfig;
use crate::error::{Error, Result};
use crate::insider::perturb::PerturbationResult;
use crate::insider::value::optimal_wealth_given_v;
use crate::path::SamplePath;
use crate::rules::{check_equilibrium_conditions, check_h_equation, check_lambda_equation, kv_check, Rule};
use crate::sim::{PathRecord, Summary};

/// KS on pooled standardized increments, pooled Ljung-Box, and realized QV.
pub fn test_brownian(increments: &[Vec<f64>], qv_ratio: f64, cfg: &VerifyConfig) -> Block {
    let t = &cfg.thresholds;
    let pooled: Vec<f64> = increments.iter().flatten().copied().collect();
    let ks = ks_standard_normal(&pooled);
    let lb = ljung_box_pooled(increments, cfg.lb_lags);
    let mut ks_check = Check::new("ks_statistic", ks.statistic, Some(ks.p_value), format!("p > {}", t.alpha), ks.p_value > t.alpha);
    if increments.len() < 1000 {
        ks_check = ks_check.with_note(format!("only {} paths", increments.len()));
    }
    Block::new(
        "martingale",
        vec![
            ks_check,
            Check::new(
                format!("ljung_box_lags_1_{}", cfg.lb_lags),
                lb.statistic,
                Some(lb.p_value),
                format!("p > {}", t.alpha),
                lb.p_value > t.alpha,
            ),
            Check::new("qv_ratio", qv_ratio, None, format!("|x - 1| < {}", t.qv_tol), (qv_ratio - 1.0).abs() < t.qv_tol),
        ],
    )
}

/// Mean |P_T - V| per step size, its log-log slope, and the smallest-step gap
/// against gap_frac * sd(V).
pub fn test_terminal(dts: &[f64], gaps: &[MeanSe], sd_v: f64, t: &Thresholds) -> Result<Block> {
    if dts.len() < 3 || dts.len() != gaps.len() {
        return Err(Error::config("terminal block needs at least three step sizes"));
    }
    let means: Vec<f64> = gaps.iter().map(|g| g.mean).collect();
    let slope = log_log_slope(dts, &means).unwrap_or(f64::NAN);
    let (i_min, _) = dts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let mut checks: Vec<Check> = dts
        .iter()
        .zip(gaps)
        .map(|(dt, g)| Check::new(format!("mean_gap_dt_{dt}"), g.mean, Some(g.se), "reported", true))
        .collect();
    checks.push(Check::new(
        "gap_slope",
        slope,
        None,
        format!("in [{}, {}]", t.slope_min, t.slope_max),
        slope >= t.slope_min && slope <= t.slope_max,
    ));
    let rel = gaps[i_min].mean / sd_v;
    checks.push(Check::new(
        "smallest_dt_gap_over_sd_v",
        rel,
        None,
        format!("< {}", t.gap_frac),
        rel < t.gap_frac,
    ));
    Ok(Block::new("terminal", checks))
}

/// Regress V on P_t at each checkpoint; slope 1 and intercept 0 within
/// se_mult robust standard errors. Quantile-binned means go in the detail.
pub fn test_competitive(records: &[PathRecord], times: &[f64], t: &Thresholds, bins: usize) -> Block {
    let used: Vec<&PathRecord> = records
        .iter()
        .filter(|r| r.usable() && r.checkpoints.len() == times.len())
        .collect();
    let v: Vec<f64> = used.iter().map(|r| r.v).collect();
    let v_spread = mean_se(&v).sd;
    let mut checks = Vec::new();
    let mut detail = Vec::new();
    for (j, &time) in times.iter().enumerate() {
        let p: Vec<f64> = used.iter().map(|r| r.checkpoints[j]).collect();
        let fit = if v_spread > 0.0 { ols(&p, &v) } else { None };
        let Some(fit) = fit else {
            checks.push(
                Check::new(format!("t={time}"), 0.0, None, "skipped", true)
                    .with_note("degenerate variance of P_t or V"),
            );
            continue;
        };
        checks.push(Check::near(format!("slope_t={time}"), fit.slope, fit.se_slope, 1.0, t.se_mult));
        checks.push(Check::near(format!("intercept_t={time}"), fit.intercept, fit.se_intercept, 0.0, t.se_mult));
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|a, b| p[*a].total_cmp(&p[*b]));
        let rows: Vec<_> = (0..bins)
            .filter_map(|b| {
                let lo = b * order.len() / bins;
                let hi = (b + 1) * order.len() / bins;
                if hi <= lo {
                    return None;
                }
                let idx = &order[lo..hi];
                let pm = mean_se(&idx.iter().map(|&i| p[i]).collect::<Vec<_>>());
                let vm = mean_se(&idx.iter().map(|&i| v[i]).collect::<Vec<_>>());
                Some(json!({"mean_p": pm.mean, "mean_v": vm.mean, "se_v": vm.se, "n": idx.len()}))
            })
            .collect();
        detail.push(json!({"t": time, "bins": rows}));
    }
    let mut b = Block::new("competitive", checks);
    b.detail = Some(json!(detail));
    b
}

/// Mean market-maker wealth within se_mult standard errors of 0.
pub fn test_market_maker(summary: &Summary, t: &Thresholds) -> Block {
    Block::new(
        "market_maker",
        vec![Check::near("mean_wm", summary.wm.mean, summary.wm.se, 0.0, t.se_mult)],
    )
}

/// Per-path utility against the optimum given V, paired, plus the
/// certainty equivalents of both.
pub fn test_value(records: &[PathRecord], rule: &Rule, gamma: f64, horizon: f64, t: &Thresholds) -> Result<Block> {
    let used: Vec<&PathRecord> = records.iter().filter(|r| r.usable()).collect();
    let mut opt_w = Vec::with_capacity(used.len());
    for r in &used {
        opt_w.push(optimal_wealth_given_v(rule, r.v, horizon)?);
    }
    let u = |w: f64| if gamma == 0.0 { w } else { gamma * (gamma * w).exp() };
    let diff: Vec<f64> = used.iter().zip(&opt_w).map(|(r, &w)| r.utility - u(w)).collect();
    let d = mean_se(&diff);
    let mut checks = vec![Check::near("utility_minus_optimum", d.mean, d.se, 0.0, t.se_mult)];
    let mc_u = mean_se(&used.iter().map(|r| r.utility).collect::<Vec<_>>());
    let opt_u = mean_se(&opt_w.iter().map(|&w| u(w)).collect::<Vec<_>>());
    let (ce_mc, ce_opt, ce_se) = if gamma == 0.0 {
        (mc_u.mean, opt_u.mean, d.se)
    } else {
        // CE = log(E[U] / gamma) / gamma, delta method on the paired difference.
        let ce = |m: f64| (m / gamma).ln() / gamma;
        (ce(mc_u.mean), ce(opt_u.mean), d.se / (gamma * mc_u.mean).abs())
    };
    checks.push(
        Check::near("certainty_equivalent", ce_mc, ce_se, ce_opt, t.se_mult)
            .with_note(format!("optimum {ce_opt:.6}")),
    );
    Ok(Block::new("value", checks))
}

pub fn test_optimality(results: &[PerturbationResult], t: &Thresholds) -> Block {
    let mut checks = Vec::new();
    for r in results {
        let d = r.derivative;
        let c = r.curvature;
        checks.push(Check::near(format!("dJ/deps_{}", r.direction.name()), d.mean, d.se, 0.0, t.se_mult));
        checks.push(Check::new(
            format!("curvature_{}", r.direction.name()),
            c.mean,
            Some(c.se),
            format!("<= {} SE", t.se_mult),
            c.mean <= t.se_mult * c.se,
        ));
    }
    Block::new("optimality", checks)
}

/// Cap rate, noise moments and independence of V and Z.
pub fn test_diagnostics(summary: &Summary, n_steps: usize, t: &Thresholds) -> Block {
    let n_ok = (summary.n_paths - summary.n_failed) as f64;
    let draws = n_ok * n_steps as f64;
    Block::new(
        "diagnostics",
        vec![
            Check::new("cap_rate", summary.cap_rate, None, format!("< {}", t.cap_rate), summary.cap_rate < t.cap_rate),
            Check::new(
                "noise_mean",
                summary.dz_mean,
                Some(1.0 / draws.sqrt()),
                format!("|x| < {} SE", t.se_mult),
                summary.dz_mean.abs() < t.se_mult / draws.sqrt(),
            ),
            Check::new("noise_variance", summary.dz_var, None, "|x - 1| < 0.01", (summary.dz_var - 1.0).abs() < 0.01),
            Check::new(
                "corr_v_z",
                summary.corr_v_z,
                None,
                format!("|x| < {} / sqrt(n)", t.se_mult),
                summary.corr_v_z.abs() < t.se_mult / (summary.n_used as f64).sqrt(),
            ),
            Check::new("failed_paths", summary.n_failed as f64, None, "reported", true),
            Check::new("boundary_paths", summary.n_boundary as f64, None, "reported, excluded", true),
        ],
    )
}

/// Analytic H and lambda equations on the default grid, the functional
/// equations along simulated Y paths, and the kernel identity.
pub fn test_pricing_rule(rule: &Rule, gamma: f64, horizon: f64, y_paths: &[SamplePath], t: &Thresholds) -> Result<Block> {
    let grid = rule.default_grid(horizon);
    let h = check_h_equation(rule, &grid);
    let l = check_lambda_equation(rule, gamma, &grid);
    let tol = t.residual_tol;
    let mut checks = vec![
        Check::new("h_equation", h, None, format!("< {tol}"), h < tol),
        Check::new("lambda_equation", l, None, format!("< {tol}"), l < tol),
    ];
    if !y_paths.is_empty() {
        let cfg = DerivativeConfig::default();
        let r = check_equilibrium_conditions(rule, gamma, y_paths, &cfg)?;
        checks.push(Check::new("functional_drift", r.drift, None, format!("< {tol}"), r.drift < tol));
        checks.push(Check::new("functional_commutator", r.commutator, None, format!("< {tol}"), r.commutator < tol));
        checks.push(Check::new("min_gradient", r.min_gradient, None, "> 0", r.min_gradient > 0.0));
        let kv = kv_check(rule, &y_paths[0], &cfg)?;
        checks.push(Check::new("kernel_diagonal", kv, None, format!("< {}", t.kv_tol), kv < t.kv_tol));
    }
    Ok(Block::new("pricing_rule", checks))
}
