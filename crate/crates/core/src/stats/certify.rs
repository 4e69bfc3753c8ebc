use super::basic::mean_se;
use super::blocks::{
    test_brownian, test_competitive, test_diagnostics, test_market_maker, test_optimality,
    test_pricing_rule, test_terminal, test_value,
};
use super::report::{Block, EquilibriumReport, CAVEAT};
use crate::error::{Error, Result};
use crate::insider::perturb::perturb_and_evaluate;
use crate::scenario::Scenario;
use crate::sim::{simulate, Model, SimOptions};

/// Run the scenario at its main step count and at every terminal step size,
/// then assemble all blocks. Block failures become failed blocks; only
/// configuration errors and aborted simulations propagate.
pub fn certify(scenario: &Scenario, threads: Option<usize>) -> Result<EquilibriumReport> {
    let cfg = &scenario.verify;
    let th = &cfg.thresholds;
    let model = Model::new(scenario)?;
    let main = simulate(
        &model,
        &SimOptions {
            threads,
            increment_paths: cfg.brownian_paths,
            thinning: cfg.thinning,
            tail_steps: cfg.tail_steps,
            y_paths: cfg.residual_paths,
            paths: None,
        },
    )?;
    let mut blocks = Vec::new();

    blocks.push(
        test_pricing_rule(&scenario.rule, scenario.gamma, scenario.horizon, &main.y_paths, th)
            .unwrap_or_else(|e| Block::failed("pricing_rule", e)),
    );
    blocks.push(test_brownian(&main.increments, main.summary.qv_ratio, cfg));

    let terminal = (|| -> Result<Block> {
        let mut dts = Vec::new();
        let mut gaps = Vec::new();
        let mut v = Vec::new();
        for &dt in &scenario.mc.dt_levels {
            let steps = (scenario.horizon / dt).round().max(1.0) as usize;
            let m = Model::with_steps(scenario, steps)?;
            let paths = if cfg.terminal_paths == 0 { scenario.mc.paths } else { cfg.terminal_paths };
            let r = simulate(
                &m,
                &SimOptions {
                    threads,
                    paths: Some(paths),
                    ..SimOptions::default()
                },
            )?;
            dts.push(m.grid.dt());
            gaps.push(r.summary.terminal_gap);
            if v.is_empty() {
                v = r.records.iter().filter(|x| x.usable()).map(|x| x.v).collect();
            }
        }
        test_terminal(&dts, &gaps, mean_se(&v).sd, th)
    })();
    blocks.push(match terminal {
        Ok(b) => b,
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => Block::failed("terminal", e),
    });

    blocks.push(test_competitive(
        &main.records,
        &scenario.output.checkpoint_times,
        th,
        cfg.bins,
    ));
    blocks.push(test_market_maker(&main.summary, th));
    if scenario.strategy.is_bridge() {
        blocks.push(
            test_value(&main.records, &scenario.rule, scenario.gamma, scenario.horizon, th)
                .unwrap_or_else(|e| Block::failed("value", e)),
        );
    }
    if !cfg.directions.is_empty() {
        let paths = if cfg.optimality_paths == 0 { scenario.mc.paths } else { cfg.optimality_paths };
        blocks.push(
            match perturb_and_evaluate(&model, &cfg.directions, cfg.epsilon, paths, threads) {
                Ok(r) => test_optimality(&r, th),
                Err(e) => Block::failed("optimality", e),
            },
        );
    }
    blocks.push(test_diagnostics(&main.summary, model.grid.n_steps(), th));

    let verdict = blocks.iter().all(|b| b.pass);
    Ok(EquilibriumReport {
        caveat: CAVEAT,
        scenario: scenario.name.clone(),
        rule: scenario.rule.name(),
        strategy: scenario.strategy.name(),
        gamma: scenario.gamma,
        paths: scenario.mc.paths,
        steps: scenario.mc.steps,
        seed: scenario.mc.seed,
        thresholds: th.clone(),
        blocks,
        summary: main.summary,
        verdict,
    })
}
