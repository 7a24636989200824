//! Experiment configuration: a flat TOML document with a version tag.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{Checkerboard, Halfspace, KochCurve, LabelFunction, Threshold, UnionOfBalls};
use crate::learner::Backend;
use crate::measure::{ReferenceMeasure, WeightedBox};
use crate::metric::{BoxRegion, MetricKind, MetricSpace, Point};
use crate::processes::{AttackMode, ProcessClass, ProcessGenerator};
use crate::rng::{trial_rng, Purpose};

pub const CONFIG_VERSION: u32 = 1;

/// Audit names accepted in `audits`, in canonical order.
pub const AUDIT_NAMES: [&str; 7] =
    ["mlp", "packing", "delta_tail", "decomposition", "influence", "nn_ergodic", "rate_bound"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Threshold,
    Halfspace,
    Balls,
    Checkerboard,
    Koch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    Iid,
    Smoothed,
    Dominated,
    WorstThreshold,
    WorstGeneral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureChoice {
    Lebesgue,
    Mixture,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::config(format!("unknown format {s:?}; expected csv or json"))),
        }
    }
}

fn default_backend() -> Backend {
    Backend::CoverTree
}
fn default_attack() -> AttackMode {
    AttackMode::Learner
}
fn default_measure() -> MeasureChoice {
    MeasureChoice::Lebesgue
}
fn one() -> usize {
    1
}
fn default_cells() -> usize {
    2
}
fn default_koch_depth() -> u32 {
    4
}
fn default_koch_base() -> f64 {
    0.3
}
fn default_delta() -> f64 {
    0.1
}
fn default_p() -> f64 {
    0.05
}
fn default_slack() -> f64 {
    0.5
}
fn default_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub metric: MetricKind,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub doubling_dim: Option<u32>,
    /// Upper-doubling constant in original units.
    pub doubling_const: Option<f64>,
    #[serde(default = "default_measure")]
    pub measure: MeasureChoice,
    #[serde(default)]
    pub mixture_lo: Vec<Vec<f64>>,
    #[serde(default)]
    pub mixture_hi: Vec<Vec<f64>>,
    #[serde(default)]
    pub mixture_weights: Vec<f64>,

    pub label: LabelKind,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_koch_depth")]
    pub koch_depth: u32,
    #[serde(default = "default_koch_base")]
    pub koch_base: f64,

    pub process: ProcessKind,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(default = "default_attack")]
    pub attack: AttackMode,
    pub anchor: Option<Vec<f64>>,

    pub horizon: usize,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default)]
    pub audits: Vec<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,

    /// Indicated set `A`; the whole domain when absent.
    pub indicator_lo: Option<Vec<f64>>,
    pub indicator_hi: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Slack added to the boundary dimension in the rate bound.
    #[serde(default = "default_slack")]
    pub rate_c1: f64,
    /// Slack added to the boundary content in the rate bound.
    #[serde(default = "default_slack")]
    pub rate_c2: f64,
    #[serde(default = "default_samples")]
    pub ml_samples: usize,
    #[serde(default = "default_samples")]
    pub tail_samples: usize,
    /// Radius `r` of the `V_r` cover used by the one-mistake audit.
    pub mlp_radius: Option<f64>,
}

/// Everything built from a validated config.
#[derive(Clone, Debug)]
pub struct Context {
    pub space: MetricSpace,
    pub measure: ReferenceMeasure,
    pub eta: LabelFunction,
    pub class: ProcessClass,
    pub indicator: BoxRegion,
    pub indicator_configured: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field and builds the experiment objects. Any failure is
    /// reported as a config error.
    pub fn validate(&self) -> Result<Context> {
        self.build().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn build(&self) -> Result<Context> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!("unsupported config version {}", self.version)));
        }
        if self.horizon == 0 || self.trials == 0 {
            return Err(Error::config("horizon and trials must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta must lie in (0, 1)"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::config("p must lie in (0, 1)"));
        }
        if !(self.rate_c1 > 0.0 && self.rate_c2 > 0.0) {
            return Err(Error::config("rate slacks must be positive"));
        }
        for a in &self.audits {
            if !AUDIT_NAMES.contains(&a.as_str()) {
                return Err(Error::config(format!("unknown audit {a:?}; known: {}", AUDIT_NAMES.join(", "))));
            }
        }
        let mut space = MetricSpace::new(self.metric, self.lo.clone(), self.hi.clone())?;
        if self.doubling_dim.is_some() || self.doubling_const.is_some() {
            let d = self.doubling_dim.unwrap_or(space.doubling_dim);
            let c = self.doubling_const.unwrap_or(space.doubling_const);
            space = space.with_doubling(d, c)?;
        }
        let measure = match self.measure {
            MeasureChoice::Lebesgue => ReferenceMeasure::lebesgue(&space),
            MeasureChoice::Mixture => {
                let n = self.mixture_weights.len();
                if self.mixture_lo.len() != n || self.mixture_hi.len() != n {
                    return Err(Error::config("mixture_lo, mixture_hi and mixture_weights must have equal length"));
                }
                let parts = (0..n)
                    .map(|i| {
                        Ok(WeightedBox {
                            region: BoxRegion::new(self.mixture_lo[i].clone(), self.mixture_hi[i].clone())?,
                            weight: self.mixture_weights[i],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ReferenceMeasure::mixture(&space, parts)?
            }
        };
        let eta = match self.label {
            LabelKind::Threshold => LabelFunction::Threshold(Threshold::new(&space, self.theta)?),
            LabelKind::Halfspace => {
                LabelFunction::Halfspace(Halfspace::new(&space, self.weights.clone(), self.offset)?)
            }
            LabelKind::Balls => LabelFunction::Balls(UnionOfBalls::new(
                &space,
                self.centers.iter().cloned().map(Point).collect(),
                self.radii.clone(),
            )?),
            LabelKind::Checkerboard => LabelFunction::Checkerboard(Checkerboard::new(&space, self.cells)?),
            LabelKind::Koch => LabelFunction::Koch(KochCurve::new(&space, self.koch_depth, self.koch_base)?),
        };
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::config(format!("{name} is required")));
        let class = match self.process {
            ProcessKind::Iid => ProcessClass::Iid,
            ProcessKind::Smoothed => ProcessClass::Smoothed { sigma: need(self.sigma, "sigma")? },
            ProcessKind::Dominated => {
                ProcessClass::Dominated { sigma: need(self.sigma, "sigma")?, alpha: need(self.alpha, "alpha")? }
            }
            ProcessKind::WorstThreshold => ProcessClass::WorstCaseThreshold,
            ProcessKind::WorstGeneral => ProcessClass::WorstCaseGeneral,
        };
        let (indicator, indicator_configured) = match (&self.indicator_lo, &self.indicator_hi) {
            (Some(lo), Some(hi)) => {
                let b = BoxRegion::new(lo.clone(), hi.clone())?;
                if b.dim() != space.dim() {
                    return Err(Error::DimensionMismatch { expected: space.dim(), got: b.dim() });
                }
                (b, true)
            }
            (None, None) => (space.domain.clone(), false),
            _ => return Err(Error::config("indicator_lo and indicator_hi must be given together")),
        };
        if let Some(r) = self.mlp_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config("mlp_radius must be positive"));
            }
        }
        let ctx = Context { space, measure, eta, class, indicator, indicator_configured };
        // Surfaces unsupported combinations before any trial runs.
        ctx.generator(self, 0)?;
        Ok(ctx)
    }
}

impl Context {
    /// The process generator of trial `t`.
    pub fn generator(&self, cfg: &ExperimentConfig, t: u64) -> Result<ProcessGenerator> {
        let g = ProcessGenerator::new(
            self.class,
            cfg.attack,
            &self.measure,
            Some(&self.eta),
            trial_rng(cfg.seed, t, Purpose::Process),
        )?;
        match &cfg.anchor {
            Some(a) => g.with_anchor(Point(a.clone())),
            None => Ok(g),
        }
    }
}
