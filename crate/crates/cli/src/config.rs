//! Flat TOML run configuration.
//!
//! ```toml
//! problem = "ex1"          # ex1 | ex2 | neg_lambda_scalar
//! alpha = 0.4
//! gamma = 0.25             # ex2 only
//! order = 4
//! left_limit = true
//! spatial_cells = 30
//! tol = 1e-4
//! q = 1.2
//! tau_min = 1e-14
//! detect = false
//! barrier = "generalized"  # generalized | plain
//! weights = "unit"         # unit | halving | [w0, w1, ...]
//! rho = 0.05
//! strategy = "barrier"     # barrier | split | shift
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use fracstep::barrier::{extend_with_weight, BarrierSpec};
use fracstep::{AdaptiveParams, CollocationRule, ProblemId, ProblemSpec};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Barrier,
    Split,
    Shift,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "barrier" => Ok(Strategy::Barrier),
            "split" => Ok(Strategy::Split),
            "shift" => Ok(Strategy::Shift),
            _ => Err(format!(
                "unknown strategy `{s}` (expected barrier, split or shift)"
            )),
        }
    }
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Barrier => "barrier",
            Strategy::Split => "split",
            Strategy::Shift => "shift",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierChoice {
    Generalized,
    Plain,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Scheme(String),
    List(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    pub gamma: Option<f64>,
    #[serde(default = "defaults::order")]
    pub order: usize,
    #[serde(default = "defaults::yes")]
    pub left_limit: bool,
    pub spatial_cells: Option<usize>,

    #[serde(default = "defaults::tol")]
    pub tol: f64,
    #[serde(default = "defaults::q")]
    pub q: f64,
    pub tau_init: Option<f64>,
    #[serde(default = "defaults::tau_min")]
    pub tau_min: f64,
    #[serde(default)]
    pub detect: bool,
    #[serde(default = "defaults::detect_step_threshold")]
    pub detect_step_threshold: f64,
    #[serde(default = "defaults::detect_min_distance")]
    pub detect_min_distance: f64,
    #[serde(default = "defaults::max_forced_steps")]
    pub max_forced_steps: usize,
    #[serde(default = "defaults::max_restarts")]
    pub max_restarts: usize,

    #[serde(default = "defaults::barrier")]
    pub barrier: BarrierChoice,
    /// A-priori singular set; defaults to the problem's onsets (or `{0}` for
    /// the plain barrier).
    pub onsets: Option<Vec<f64>>,
    pub weights: Option<Weights>,
    #[serde(default = "defaults::rho")]
    pub rho: f64,

    #[serde(default = "defaults::strategy")]
    pub strategy: Strategy,
    /// Uniform time samples for `solution.csv` and the error table.
    #[serde(default = "defaults::time_samples")]
    pub time_samples: usize,
    pub out: Option<PathBuf>,
    pub label: Option<String>,
}

mod defaults {
    use super::{BarrierChoice, Strategy};

    pub fn alpha() -> f64 {
        0.4
    }
    pub fn order() -> usize {
        4
    }
    pub fn yes() -> bool {
        true
    }
    pub fn tol() -> f64 {
        1e-4
    }
    pub fn q() -> f64 {
        1.2
    }
    pub fn tau_min() -> f64 {
        1e-14
    }
    pub fn detect_step_threshold() -> f64 {
        1e-13
    }
    pub fn detect_min_distance() -> f64 {
        1e-4
    }
    pub fn max_forced_steps() -> usize {
        64
    }
    pub fn max_restarts() -> usize {
        32
    }
    pub fn barrier() -> BarrierChoice {
        BarrierChoice::Generalized
    }
    pub fn rho() -> f64 {
        0.05
    }
    pub fn strategy() -> Strategy {
        Strategy::Barrier
    }
    pub fn time_samples() -> usize {
        200
    }
}

/// Problems with configuration errors; the runner maps these to exit code 3.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<fracstep::Error> for ConfigError {
    fn from(e: fracstep::Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn problem_id(&self) -> Result<ProblemId, ConfigError> {
        self.problem
            .parse::<ProblemId>()
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            let barrier = match self.barrier {
                BarrierChoice::Generalized => "generalized",
                BarrierChoice::Plain => "plain",
            };
            format!(
                "{}-{}-{}-tol{:e}",
                self.problem,
                self.strategy.name(),
                barrier,
                self.tol
            )
        })
    }

    fn check(&self) -> Result<(), ConfigError> {
        self.problem_id()?;
        if self.time_samples == 0 {
            return Err(ConfigError("time_samples must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ConfigError(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if let Some(Weights::Scheme(s)) = &self.weights {
            if s != "unit" && s != "halving" {
                return Err(ConfigError(format!(
                    "unknown weight scheme `{s}` (expected unit or halving)"
                )));
            }
        }
        if self
            .label
            .as_deref()
            .is_some_and(|l| l.is_empty() || l.contains(['/', '\\']))
        {
            return Err(ConfigError(
                "label must be a non-empty plain file name".into(),
            ));
        }
        self.params().validate()?;
        self.rule()?;
        let spec = self.problem_spec()?;
        self.barrier_spec(&spec)?;
        Ok(())
    }

    pub fn params(&self) -> AdaptiveParams {
        AdaptiveParams {
            tol: self.tol,
            q: self.q,
            tau_init: self.tau_init,
            tau_min: self.tau_min,
            detect: self.detect,
            detect_step_threshold: self.detect_step_threshold,
            detect_min_distance: self.detect_min_distance,
            max_forced_steps: self.max_forced_steps,
            max_restarts: self.max_restarts,
        }
    }

    pub fn rule(&self) -> Result<CollocationRule, ConfigError> {
        Ok(CollocationRule::new(self.order)?.with_left_limit(self.left_limit))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let spec = fracstep::make_problem(self.problem_id()?, self.alpha, self.gamma)?;
        Ok(match self.spatial_cells {
            Some(n) => spec.with_spatial_cells(n)?,
            None => spec,
        })
    }

    /// Weights for `n` terms.
    pub fn weight_list(&self, n: usize) -> Result<Vec<f64>, ConfigError> {
        match &self.weights {
            None => Ok(vec![1.0; n]),
            Some(Weights::Scheme(s)) if s == "unit" => Ok(vec![1.0; n]),
            Some(Weights::Scheme(_)) => Ok((0..n).map(|k| 0.5f64.powi(k as i32)).collect()),
            Some(Weights::List(w)) if w.len() == n => Ok(w.clone()),
            Some(Weights::List(w)) => Err(ConfigError(format!(
                "{} weights given for {n} onsets",
                w.len()
            ))),
        }
    }

    /// Barrier for the all-in-one and shifting strategies. When `λ < 0` it is
    /// extended a priori (extension terms get weight 1) unless detection is on.
    pub fn barrier_spec(&self, spec: &ProblemSpec) -> Result<BarrierSpec, ConfigError> {
        let onsets = match (&self.onsets, self.barrier) {
            (Some(s), _) => s.clone(),
            (None, BarrierChoice::Generalized) => spec.effective_onsets(),
            (None, BarrierChoice::Plain) => vec![0.0],
        };
        let weights = self.weight_list(onsets.len())?;
        let b = BarrierSpec::new(spec.alpha, spec.lambda(), onsets, weights)?;
        Ok(if self.detect {
            b
        } else {
            extend_with_weight(&b, spec.horizon, self.rho, 1.0)
        })
    }
}
