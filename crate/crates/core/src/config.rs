//! Plain-text experiment configuration.
//!
//! One `key = value` pair per line, `#` starts a comment, model parameters
//! use dotted keys:
//!
//! ```text
//! model = stadium
//! model.l = 1.0
//! observable = constant(value=1)
//! n = 1000
//! replicas = 4
//! seed = 7
//! t_grid = 0.25, 0.5, 0.75, 1
//! out = results
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::chain::{DEFAULT_BURN_IN, DEFAULT_M_MAX};
use crate::induced::DEFAULT_ITERATION_CAP;
use crate::observables::ObservableSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelConfig {
    Stadium { l: f64 },
    Drivebelt { theta0: f64, theta1: f64, l: f64 },
    /// 2x2 rectangle with a central disk and two bottom quarter disks.
    LorentzCase1 { radius: f64 },
    ChainLinear { beta: f64, m_max: u64 },
    ChainAlgebraic { m_max: u64 },
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Stadium { .. } => "stadium",
            Self::Drivebelt { .. } => "drivebelt",
            Self::LorentzCase1 { .. } => "lorentz_case1",
            Self::ChainLinear { .. } => "chain_linear",
            Self::ChainAlgebraic { .. } => "chain_algebraic",
        }
    }

    pub fn is_chain(&self) -> bool {
        matches!(self, Self::ChainLinear { .. } | Self::ChainAlgebraic { .. })
    }
}

/// Which process `clt` and `ip` sum over a billiard.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Process {
    /// Induced values along the return map.
    Induced,
    /// Raw values along the billiard map.
    Map,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizerChoice {
    /// `sqrt((1+theta)/(1-theta) n H(c_n))` with the pooled empirical `H`.
    Empirical,
    /// `sqrt(sigma^2 n ln n)` from the constants module.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub observable: ObservableSpec,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub t_grid: Vec<f64>,
    pub out: PathBuf,
    pub process: Process,
    pub normalizer: NormalizerChoice,
    pub cap: u64,
    pub burn_in: u64,
    /// Independent `mu` draws for `tail` and `transition` on billiards.
    pub draws: u64,
    pub tail_min: u64,
    pub tail_max: u64,
    pub tail_points: usize,
    /// Proposals for the Monte Carlo estimate of the drivebelt `mu_M(M)`.
    pub mu_proposals: u64,
    pub cusp_a_bar: f64,
    pub cusp_perimeter: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::Stadium { l: 1.0 },
            observable: ObservableSpec::Constant { value: 1.0 },
            n: 1000,
            replicas: 1,
            seed: 0,
            threads: None,
            t_grid: vec![0.25, 0.5, 0.75, 1.0],
            out: PathBuf::from("."),
            process: Process::Induced,
            normalizer: NormalizerChoice::Empirical,
            cap: DEFAULT_ITERATION_CAP,
            burn_in: DEFAULT_BURN_IN,
            draws: 1_000_000,
            tail_min: 50,
            tail_max: 500,
            tail_points: 12,
            mu_proposals: 1_000_000,
            cusp_a_bar: 1.0,
            cusp_perimeter: 4.0,
        }
    }
}

const KEYS: &[&str] = &[
    "model",
    "model.l",
    "model.theta0",
    "model.theta1",
    "model.radius",
    "model.beta",
    "model.m_max",
    "observable",
    "n",
    "replicas",
    "seed",
    "threads",
    "t_grid",
    "out",
    "process",
    "normalizer",
    "cap",
    "burn_in",
    "draws",
    "tail.min",
    "tail.max",
    "tail.points",
    "mu.proposals",
    "cusp.a_bar",
    "cusp.perimeter",
];

/// Raw `key -> value` map, keeping the line of each key.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: raw.to_string(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        }
        if out.insert(k.to_string(), (line, v.to_string())).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                key: k.to_string(),
            });
        }
    }
    Ok(out)
}

struct Fields(BTreeMap<String, (usize, String)>);

impl Fields {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|(_, v)| v.as_str())
    }

    fn parse<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| field_err(key, format!("cannot parse {v:?}"))),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x: f64 = self.parse(key, default)?;
        if !x.is_finite() {
            return Err(field_err(key, "must be finite"));
        }
        Ok(x)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let x = self.real(key, default)?;
        if x <= 0.0 {
            return Err(field_err(key, format!("must be positive, got {x}")));
        }
        Ok(x)
    }

    fn count<T: FromStr + PartialOrd + Default + Copy>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        let x: T = self.parse(key, default)?;
        if x <= T::default() {
            return Err(field_err(key, "must be positive"));
        }
        Ok(x)
    }
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let f = Fields(parse_pairs(text)?);
        if let Some(k) = f.0.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let d = Self::default();
        let model = match f.raw("model").unwrap_or("stadium") {
            "stadium" => ModelConfig::Stadium {
                l: f.positive("model.l", 1.0)?,
            },
            "drivebelt" => {
                let theta0 = f.real("model.theta0", 1.25 * PI)?;
                let theta1 = f.real("model.theta1", PI / 4.0)?;
                if !(theta0 > PI && theta0 < 1.5 * PI) {
                    return Err(field_err("model.theta0", "must lie in (pi, 3 pi/2)"));
                }
                if !(theta1 > 0.0 && theta1 < PI / 2.0) {
                    return Err(field_err("model.theta1", "must lie in (0, pi/2)"));
                }
                ModelConfig::Drivebelt {
                    theta0,
                    theta1,
                    l: f.positive("model.l", 1.0)?,
                }
            }
            "lorentz_case1" => {
                let radius = f.positive("model.radius", 0.5)?;
                if radius >= 1.0 / std::f64::consts::SQRT_2 {
                    return Err(field_err("model.radius", "scatterers must stay disjoint (radius < 1/sqrt 2)"));
                }
                ModelConfig::LorentzCase1 { radius }
            }
            "chain_linear" => {
                let beta = f.real("model.beta", 3.0)?;
                if beta <= 1.0 {
                    return Err(field_err("model.beta", "must exceed 1"));
                }
                ModelConfig::ChainLinear {
                    beta,
                    m_max: f.count("model.m_max", DEFAULT_M_MAX)?,
                }
            }
            "chain_algebraic" => ModelConfig::ChainAlgebraic {
                m_max: f.count("model.m_max", DEFAULT_M_MAX)?,
            },
            other => {
                return Err(field_err(
                    "model",
                    format!(
                        "unknown model {other:?} (expected stadium, drivebelt, lorentz_case1, chain_linear, chain_algebraic)"
                    ),
                ))
            }
        };
        let observable = match f.raw("observable") {
            None => d.observable.clone(),
            Some(v) => v
                .parse::<ObservableSpec>()
                .map_err(|e| field_err("observable", e.to_string()))?,
        };
        let t_grid = match f.raw("t_grid") {
            None => d.t_grid.clone(),
            Some(v) => {
                let g = v
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|_| field_err("t_grid", format!("cannot parse {v:?}")))?;
                if g.is_empty() || g.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
                    return Err(field_err("t_grid", "values must lie in (0, 1]"));
                }
                if g.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(field_err("t_grid", "values must be increasing"));
                }
                g
            }
        };
        let process = match f.raw("process").unwrap_or("induced") {
            "induced" => Process::Induced,
            "map" => Process::Map,
            other => return Err(field_err("process", format!("expected induced or map, got {other:?}"))),
        };
        let normalizer = match f.raw("normalizer").unwrap_or("empirical") {
            "empirical" => NormalizerChoice::Empirical,
            "closed_form" => NormalizerChoice::ClosedForm,
            other => {
                return Err(field_err(
                    "normalizer",
                    format!("expected empirical or closed_form, got {other:?}"),
                ))
            }
        };
        let tail_min = f.count("tail.min", d.tail_min)?;
        let tail_max = f.count("tail.max", d.tail_max)?;
        if tail_max <= tail_min {
            return Err(field_err("tail.max", "must exceed tail.min"));
        }
        let threads = match f.raw("threads") {
            None => None,
            Some(_) => Some(f.count("threads", 1usize)?),
        };
        Ok(Self {
            model,
            observable,
            n: f.count("n", d.n)?,
            replicas: f.count("replicas", d.replicas)?,
            seed: f.parse("seed", d.seed)?,
            threads,
            t_grid,
            out: PathBuf::from(f.raw("out").unwrap_or(".")),
            process,
            normalizer,
            cap: f.count("cap", d.cap)?,
            burn_in: f.parse("burn_in", d.burn_in)?,
            draws: f.count("draws", d.draws)?,
            tail_min,
            tail_max,
            tail_points: f.count("tail.points", d.tail_points)?,
            mu_proposals: f.count("mu.proposals", d.mu_proposals)?,
            cusp_a_bar: f.positive("cusp.a_bar", d.cusp_a_bar)?,
            cusp_perimeter: f.positive("cusp.perimeter", d.cusp_perimeter)?,
        })
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }
}
