//! Scenario files: flat `key = value` lines grouped under `[section]`
//! headers, `#` comments. Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::insider::{DriftTable, StrategySpec};
use crate::noise::NoiseVol;
use crate::rules::{Rule, RuleKind};
use crate::sim::VLaw;
use crate::stats::{Direction, Thresholds, VerifyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// Step sizes for the terminal convergence block.
    pub dt_levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub emit_paths: bool,
    pub checkpoint_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub rule: Rule,
    pub gamma: f64,
    pub horizon: f64,
    pub fundamental: VLaw,
    pub strategy: StrategySpec,
    /// Drift cap in Y units per unit time.
    pub cap: f64,
    pub mc: McConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("model", &["rule", "P0", "lambda", "C", "gamma", "sigma_Z", "T"]),
    ("fundamental", &["law", "mean", "sd", "log_mean", "log_sd", "value"]),
    (
        "insider",
        &["strategy", "cap", "target_offset", "rate", "level", "target_time", "table"],
    ),
    ("mc", &["paths", "steps", "seed", "dt_levels"]),
    ("output", &["dir", "emit_paths", "checkpoint_times"]),
    (
        "verify",
        &[
            "alpha",
            "qv_tol",
            "slope_min",
            "slope_max",
            "gap_frac",
            "se_mult",
            "cap_rate",
            "failed_frac",
            "residual_tol",
            "kv_tol",
            "thinning",
            "tail_steps",
            "lb_lags",
            "bins",
            "brownian_paths",
            "terminal_paths",
            "optimality_paths",
            "residual_paths",
            "epsilon",
            "directions",
        ],
    ),
];

/// Raw key/value pairs per section, in file order of first appearance.
pub type RawScenario = BTreeMap<String, BTreeMap<String, String>>;

/// Split the text into sections. Rejects unknown sections, unknown keys,
/// duplicates and malformed lines.
pub fn parse_raw(text: &str) -> Result<RawScenario> {
    let mut out: RawScenario = BTreeMap::new();
    let mut current: Option<String> = None;
    for (no, line) in text.lines().enumerate() {
        let no = no + 1;
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(format!("line {no}: unterminated section header")))?
                .trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(Error::config(format!("line {no}: unknown section [{name}]")));
            }
            out.entry(name.to_string()).or_default();
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {no}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = current
            .as_deref()
            .ok_or_else(|| Error::config(format!("line {no}: key '{key}' outside any section")))?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(Error::config(format!("line {no}: unknown key '{section}.{key}'")));
        }
        let entries = out.get_mut(section).expect("section inserted");
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::config(format!("line {no}: duplicate key '{section}.{key}'")));
        }
    }
    Ok(out)
}

struct Section<'a> {
    name: &'a str,
    kv: Option<&'a BTreeMap<String, String>>,
}

impl<'a> Section<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.kv.and_then(|m| m.get(key)).map(String::as_str)
    }

    fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        self.raw(key)
            .ok_or_else(|| Error::config(format!("missing key '{}.{key}'", self.name)))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::config(format!(
                    "key '{}.{key}': '{s}' is not a finite number",
                    self.name
                ))),
            },
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.f64_opt(key)?
            .ok_or_else(|| Error::config(format!("missing key '{}.{key}'", self.name)))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::config(format!("key '{}.{key}' must be positive, got {v}", self.name)))
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse::<usize>().map_err(|_| {
                Error::config(format!("key '{}.{key}': '{s}' is not a non-negative integer", self.name))
            }),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => Err(Error::config(format!(
                "key '{}.{key}': '{s}' must be true or false",
                self.name
            ))),
        }
    }

    fn list_f64(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(s) = self.raw(key) else { return Ok(None) };
        s.split(',')
            .map(|x| match x.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::config(format!(
                    "key '{}.{key}': '{}' is not a finite number",
                    self.name,
                    x.trim()
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// Parse `sigma_Z`: a constant, or `t0:s0, t1:s1, ...` giving the value from
/// each start time onward.
pub fn parse_noise(s: &str) -> Result<NoiseVol> {
    let bad = || Error::config(format!("key 'model.sigma_Z': cannot read '{s}'"));
    let noise = if s.contains(':') {
        let steps = s
            .split(',')
            .map(|part| {
                let (t, v) = part.split_once(':').ok_or_else(bad)?;
                let t: f64 = t.trim().parse().map_err(|_| bad())?;
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                Ok((t, v))
            })
            .collect::<Result<Vec<_>>>()?;
        NoiseVol::Steps(steps)
    } else {
        NoiseVol::Constant(s.trim().parse().map_err(|_| bad())?)
    };
    noise
        .validate()
        .map_err(|e| Error::config(format!("key 'model.sigma_Z': {e}")))?;
    Ok(noise)
}

impl Scenario {
    /// Parse scenario text. `base_dir` resolves relative table paths.
    pub fn parse(text: &str, name: &str, base_dir: Option<&Path>) -> Result<Scenario> {
        let raw = parse_raw(text)?;
        let sec = |n: &'static str| Section {
            name: n,
            kv: raw.get(n),
        };
        let model = sec("model");
        let rule_name = model.str("rule")?;
        let kind = RuleKind::parse(rule_name)
            .ok_or_else(|| Error::config(format!("key 'model.rule': unknown rule '{rule_name}'")))?;
        let horizon = model.positive("T")?;
        let gamma = model.f64_or("gamma", 0.0)?;
        if gamma > 0.0 {
            return Err(Error::config(format!("key 'model.gamma' must be <= 0, got {gamma}")));
        }
        let noise = match model.raw("sigma_Z") {
            Some(s) => parse_noise(s)?,
            None => NoiseVol::Constant(1.0),
        };
        let p0 = model.f64("P0")?;
        let rule = match kind {
            RuleKind::Bachelier => Rule::Bachelier {
                p0,
                lambda: model.positive("lambda")?,
                noise,
            },
            RuleKind::BlackScholes => Rule::BlackScholes {
                p0,
                lambda: model.positive("lambda")?,
                noise,
            },
            RuleKind::DetLambda => Rule::DetLambda {
                p0,
                lambda0: model.positive("lambda")?,
                gamma,
                noise,
            },
            RuleKind::Kimura => Rule::Kimura {
                p0,
                c: model.positive("C")?,
                noise,
            },
        };
        let unused = match kind {
            RuleKind::Kimura => "lambda",
            _ => "C",
        };
        if model.has(unused) {
            return Err(Error::config(format!(
                "key 'model.{unused}' does not apply to rule {rule_name}"
            )));
        }
        rule.validate()?;

        let fund = sec("fundamental");
        let law = fund.raw("law").unwrap_or("matched");
        let fundamental = match law {
            "matched" => VLaw::matched(&rule, horizon),
            "normal" => VLaw::Normal {
                mean: fund.f64("mean")?,
                sd: fund.positive("sd")?,
            },
            "lognormal" => VLaw::Lognormal {
                log_mean: fund.f64("log_mean")?,
                log_sd: fund.positive("log_sd")?,
            },
            "kimura_terminal" => match VLaw::matched(&rule, horizon) {
                l @ VLaw::KimuraTerminal { .. } => l,
                _ => {
                    return Err(Error::config(
                        "key 'fundamental.law': kimura_terminal needs the kimura rule",
                    ))
                }
            },
            "point" => VLaw::Point {
                value: fund.f64("value")?,
            },
            other => {
                return Err(Error::config(format!("key 'fundamental.law': unknown law '{other}'")))
            }
        };

        let ins = sec("insider");
        let strategy = match ins.raw("strategy").unwrap_or("none") {
            "none" => StrategySpec::None,
            "constant" => StrategySpec::Constant {
                rate: ins.f64("rate")?,
            },
            "gaussian_bridge" => StrategySpec::GaussianBridge {
                target_offset: ins.f64_or("target_offset", 0.0)?,
            },
            "diffusion_density_bridge" => StrategySpec::DiffusionDensityBridge,
            "det_lambda_bridge" => StrategySpec::DetLambdaBridge,
            "kimura_bridge" => StrategySpec::KimuraBridge,
            "first_passage" => StrategySpec::FirstPassage {
                level: ins.f64("level")?,
                target_time: ins.f64_or("target_time", horizon)?,
            },
            "custom_table" => {
                let file = ins.str("table")?;
                let path = match base_dir {
                    Some(d) => d.join(file),
                    None => file.into(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::io(path.display(), e))?;
                StrategySpec::CustomTable {
                    table: DriftTable::parse_csv(&text)?,
                }
            }
            other => {
                return Err(Error::config(format!("key 'insider.strategy': unknown strategy '{other}'")))
            }
        };
        let cap = match ins.f64_opt("cap")? {
            Some(c) if c > 0.0 => c,
            Some(c) => return Err(Error::config(format!("key 'insider.cap' must be positive, got {c}"))),
            None => 1e3 / horizon,
        };

        let mc = sec("mc");
        let steps = mc.usize_or("steps", 1000)?;
        let paths = mc.usize_or("paths", 10_000)?;
        if steps == 0 || paths == 0 {
            return Err(Error::config("keys 'mc.paths' and 'mc.steps' must be positive"));
        }
        let dt_levels = mc
            .list_f64("dt_levels")?
            .unwrap_or_else(|| vec![1e-2 * horizon, 5e-3 * horizon, 2.5e-3 * horizon]);
        if dt_levels.iter().any(|&d| !(d > 0.0 && d <= horizon)) {
            return Err(Error::config("key 'mc.dt_levels': every level must lie in (0, T]"));
        }
        let seed = match mc.raw("seed") {
            None => 1,
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| Error::config(format!("key 'mc.seed': '{s}' is not an unsigned integer")))?,
        };

        let out = sec("output");
        let checkpoint_times = out
            .list_f64("checkpoint_times")?
            .unwrap_or_else(|| vec![0.25 * horizon, 0.5 * horizon, 0.75 * horizon]);
        if checkpoint_times.iter().any(|&t| !(t >= 0.0 && t <= horizon)) {
            return Err(Error::config("key 'output.checkpoint_times': times must lie in [0, T]"));
        }
        let output = OutputConfig {
            dir: out.raw("dir").map(str::to_string),
            emit_paths: out.bool_or("emit_paths", false)?,
            checkpoint_times,
        };

        let verify = parse_verify(&sec("verify"))?;
        let scenario = Scenario {
            name: name.to_string(),
            rule,
            gamma,
            horizon,
            fundamental,
            strategy,
            cap,
            mc: McConfig {
                paths,
                steps,
                seed,
                dt_levels,
            },
            output,
            verify,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::config(format!("scenario file not found: {}", path.display())))
            }
            Err(e) => return Err(Error::io(path.display(), e)),
        };
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        Scenario::parse(&text, &name, path.parent())
    }

    /// Checks shared by parsed and deserialized scenarios.
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if !(self.gamma <= 0.0) {
            return Err(Error::config(format!("gamma must be <= 0, got {}", self.gamma)));
        }
        if let Rule::DetLambda { gamma, .. } = self.rule {
            if gamma != self.gamma {
                return Err(Error::config("det_lambda rule gamma differs from the scenario gamma"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("T must be positive"));
        }
        if self.mc.paths == 0 || self.mc.steps == 0 {
            return Err(Error::config("paths and steps must be positive"));
        }
        if !(self.cap > 0.0) {
            return Err(Error::config("insider.cap must be positive"));
        }
        self.fundamental.validate()?;
        self.verify.validate()?;
        Ok(())
    }
}

fn parse_verify(v: &Section<'_>) -> Result<VerifyConfig> {
    let d = VerifyConfig::default();
    let t = &d.thresholds;
    let thresholds = Thresholds {
        alpha: v.f64_or("alpha", t.alpha)?,
        qv_tol: v.f64_or("qv_tol", t.qv_tol)?,
        slope_min: v.f64_or("slope_min", t.slope_min)?,
        slope_max: v.f64_or("slope_max", t.slope_max)?,
        gap_frac: v.f64_or("gap_frac", t.gap_frac)?,
        se_mult: v.f64_or("se_mult", t.se_mult)?,
        cap_rate: v.f64_or("cap_rate", t.cap_rate)?,
        failed_frac: v.f64_or("failed_frac", t.failed_frac)?,
        residual_tol: v.f64_or("residual_tol", t.residual_tol)?,
        kv_tol: v.f64_or("kv_tol", t.kv_tol)?,
    };
    let directions = match v.raw("directions") {
        None => d.directions.clone(),
        Some(s) => s
            .split(',')
            .map(|x| {
                Direction::parse(x.trim()).ok_or_else(|| {
                    Error::config(format!("key 'verify.directions': unknown direction '{}'", x.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(VerifyConfig {
        thresholds,
        thinning: v.usize_or("thinning", d.thinning)?,
        tail_steps: v.usize_or("tail_steps", d.tail_steps)?,
        lb_lags: v.usize_or("lb_lags", d.lb_lags)?,
        bins: v.usize_or("bins", d.bins)?,
        brownian_paths: v.usize_or("brownian_paths", d.brownian_paths)?,
        terminal_paths: v.usize_or("terminal_paths", d.terminal_paths)?,
        optimality_paths: v.usize_or("optimality_paths", d.optimality_paths)?,
        residual_paths: v.usize_or("residual_paths", d.residual_paths)?,
        epsilon: v.f64_or("epsilon", d.epsilon)?,
        directions,
    })
}
