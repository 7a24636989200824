//! Instance-generating processes.
//!
//! Smoothed and dominated adversaries draw uniformly from an attack region:
//! a sup-norm cube clipped to the domain whose mass is found by bisection.
//! Uniform sampling on a region of mass `t` has density `1/t`, so a region
//! of mass at least `σ` is exactly a σ-smoothed step.

mod audit;
mod indicator;

use rand::{Rng as _, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

pub use audit::{smoothness_audit, SetAudit, SetRule, SmoothnessParams, SmoothnessReport, TestSet};
pub use indicator::{IndicatorProcess, IndicatorStats};

use crate::error::{Error, Result};
use crate::labels::LabelFunction;
use crate::learner::RoundRecord;
use crate::measure::ReferenceMeasure;
use crate::metric::{BoxRegion, Point};
use crate::rng::{derive_seed, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProcessClass {
    Iid,
    Smoothed {
        sigma: f64,
    },
    /// Uniformly dominated at `ε(δ) = min(1, (δ/σ)^α)`.
    Dominated {
        sigma: f64,
        alpha: f64,
    },
    /// `X_n = (-1/3)^n`.
    WorstCaseThreshold,
    /// Cross-class pairs closer than a third of the smallest gap so far.
    WorstCaseGeneral,
}

impl ProcessClass {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessClass::Iid => "iid",
            ProcessClass::Smoothed { .. } => "smoothed",
            ProcessClass::Dominated { .. } => "dominated",
            ProcessClass::WorstCaseThreshold => "worst-threshold",
            ProcessClass::WorstCaseGeneral => "worst-general",
        }
    }

    /// Whether the class carries a uniform domination rate.
    pub fn is_dominated(&self) -> bool {
        matches!(self, ProcessClass::Iid | ProcessClass::Smoothed { .. } | ProcessClass::Dominated { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    /// A fixed region around a boundary anchor.
    Oblivious,
    /// Centered on the latest instance.
    History,
    /// Centered between the latest mistaken instance and its neighbor.
    Learner,
}

/// A domination rate `ε(δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DominationRate {
    /// `min(1, δ/σ)`.
    Linear { sigma: f64 },
    /// `min(1, (δ/σ)^α)`.
    Power { sigma: f64, alpha: f64 },
}

impl DominationRate {
    pub fn eval(&self, delta: f64) -> f64 {
        match *self {
            DominationRate::Linear { sigma } => (delta / sigma).min(1.0),
            DominationRate::Power { sigma, alpha } => (delta / sigma).powf(alpha).min(1.0),
        }
    }

    /// The scale `σ` of the rate.
    pub fn sigma(&self) -> f64 {
        match *self {
            DominationRate::Linear { sigma } | DominationRate::Power { sigma, .. } => sigma,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProcessGenerator {
    class: ProcessClass,
    mode: AttackMode,
    measure: ReferenceMeasure,
    eta: Option<LabelFunction>,
    anchor: Point,
    rng: Rng,
    pending: Option<Point>,
    min_gap: f64,
    gap_seen: usize,
    mistake_center: Option<Point>,
    trace_seen: usize,
    last_region: Option<BoxRegion>,
}

impl ProcessGenerator {
    pub fn new(
        class: ProcessClass,
        mode: AttackMode,
        measure: &ReferenceMeasure,
        eta: Option<&LabelFunction>,
        rng: Rng,
    ) -> Result<Self> {
        let space = &measure.space;
        match class {
            ProcessClass::Smoothed { sigma } if !(sigma > 0.0) => {
                return Err(Error::invalid("σ must be positive"));
            }
            ProcessClass::Dominated { sigma, alpha } if !(sigma > 0.0) || !(alpha > 0.0 && alpha <= 1.0) => {
                return Err(Error::invalid("dominated process needs σ > 0 and α in (0, 1]"));
            }
            ProcessClass::WorstCaseThreshold => {
                if space.dim() != 1 || !space.domain.contains(&[-1.0 / 3.0]) || !space.domain.contains(&[1.0 / 9.0]) {
                    return Err(Error::invalid("worst-case threshold needs an interval containing [-1/3, 1/9]"));
                }
            }
            ProcessClass::WorstCaseGeneral => match eta {
                Some(e) if e.has_pair_oracle() => {}
                Some(e) => {
                    return Err(Error::Unsupported(format!("{} has no cross-class pair oracle", e.name())));
                }
                None => return Err(Error::invalid("worst-case general process needs a label function")),
            },
            _ => {}
        }
        let anchor = eta.map(|e| e.boundary_anchor()).unwrap_or_else(|| space.domain.center());
        Ok(ProcessGenerator {
            class,
            mode,
            measure: measure.clone(),
            eta: eta.cloned(),
            anchor,
            rng,
            pending: None,
            min_gap: f64::INFINITY,
            gap_seen: 0,
            mistake_center: None,
            trace_seen: 0,
            last_region: None,
        })
    }

    pub fn with_anchor(mut self, anchor: Point) -> Result<Self> {
        self.measure.space.check_point(&anchor)?;
        self.anchor = anchor;
        Ok(self)
    }

    pub fn class(&self) -> ProcessClass {
        self.class
    }

    pub fn mode(&self) -> AttackMode {
        self.mode
    }

    pub fn measure(&self) -> &ReferenceMeasure {
        &self.measure
    }

    pub fn label_function(&self) -> Option<&LabelFunction> {
        self.eta.as_ref()
    }

    /// The declared domination rate, if the class has one.
    pub fn rate(&self) -> Option<DominationRate> {
        match self.class {
            ProcessClass::Iid => Some(DominationRate::Linear { sigma: self.measure.total_mass() }),
            ProcessClass::Smoothed { sigma } => Some(DominationRate::Linear { sigma }),
            ProcessClass::Dominated { sigma, alpha } => Some(DominationRate::Power { sigma, alpha }),
            _ => None,
        }
    }

    /// The attack region used for the latest draw.
    pub fn last_region(&self) -> Option<&BoxRegion> {
        self.last_region.as_ref()
    }

    /// An independent copy whose randomness is derived from the current
    /// state and `stream`; `self` is left untouched.
    pub fn fork(&self, stream: u64) -> Self {
        let mut g = self.clone();
        let seed = self.rng.get_seed();
        let words: Vec<u64> = seed.chunks(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut mix = words.clone();
        mix.push(self.rng.get_word_pos() as u64);
        mix.push((self.rng.get_word_pos() >> 64) as u64);
        mix.push(self.rng.get_stream());
        g.rng = Rng::seed_from_u64(derive_seed(stream, &mix));
        g
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Draws `X_n` given the instances so far and the learner's public trace.
    pub fn next_instance(&mut self, history: &[Point], trace: &[RoundRecord]) -> Result<Point> {
        match self.class {
            ProcessClass::Iid => Ok(self.measure.sample(&mut self.rng)),
            ProcessClass::Smoothed { sigma } => {
                let region = self.attack_region(sigma, history, trace);
                self.draw_in(region)
            }
            ProcessClass::Dominated { sigma, alpha } => {
                let t = if self.rng.random::<f64>() < alpha {
                    sigma
                } else {
                    sigma * self.rng.random::<f64>().powf(1.0 / alpha)
                };
                let region = self.attack_region(t, history, trace);
                self.draw_in(region)
            }
            ProcessClass::WorstCaseThreshold => {
                let n = history.len() as i32 + 1;
                let mag = if n <= 33 { 1.0 / 3f64.powi(n) } else { (1.0f64 / 3.0).powi(n) };
                Ok(Point::scalar(if n % 2 == 1 { -mag } else { mag }))
            }
            ProcessClass::WorstCaseGeneral => self.next_pair_point(history),
        }
    }

    fn draw_in(&mut self, region: BoxRegion) -> Result<Point> {
        let x = self
            .measure
            .sample_in_box(&region, &mut self.rng)
            .ok_or_else(|| Error::Precondition("attack region has no mass".into()))?;
        self.last_region = Some(region);
        Ok(x)
    }

    fn center(&mut self, history: &[Point], trace: &[RoundRecord]) -> Point {
        match self.mode {
            AttackMode::Oblivious => self.anchor.clone(),
            AttackMode::History => history.last().cloned().unwrap_or_else(|| self.anchor.clone()),
            AttackMode::Learner => {
                if trace.len() < self.trace_seen {
                    self.trace_seen = 0;
                    self.mistake_center = None;
                }
                for rec in &trace[self.trace_seen..] {
                    if let (true, Some(j)) = (rec.mistake, rec.nn_index) {
                        let nb = history.get(j).unwrap_or(&rec.instance);
                        self.mistake_center =
                            Some(Point(rec.instance.iter().zip(nb.iter()).map(|(a, b)| 0.5 * (a + b)).collect()));
                    }
                }
                self.trace_seen = trace.len();
                self.mistake_center.clone().unwrap_or_else(|| self.anchor.clone())
            }
        }
    }

    fn attack_region(&mut self, mass: f64, history: &[Point], trace: &[RoundRecord]) -> BoxRegion {
        let c = self.center(history, trace);
        region_of_mass(&self.measure, &c, mass)
    }

    fn next_pair_point(&mut self, history: &[Point]) -> Result<Point> {
        if let Some(p) = self.pending.take() {
            return Ok(p);
        }
        let space = self.measure.space.clone();
        if history.len() < self.gap_seen {
            self.gap_seen = 0;
            self.min_gap = f64::INFINITY;
        }
        for i in self.gap_seen..history.len() {
            for j in 0..i {
                let d = space.dist(&history[i], &history[j]);
                if d > 0.0 && d < self.min_gap {
                    self.min_gap = d;
                }
            }
        }
        self.gap_seen = history.len();
        let r = if self.min_gap.is_finite() { self.min_gap } else { space.diameter() };
        let eta = self.eta.as_ref().expect("checked at construction");
        let (a, b) = eta
            .cross_class_pair(r / 3.0, &mut self.rng)
            .ok_or_else(|| Error::Precondition(format!("no cross-class pair resolvable below distance {}", r / 3.0)))?;
        // The second point of the pair must be misclassified: either it is
        // farther than r/3 from history (so its neighbor is its partner), or
        // both share a neighbor whose label differs from the second point.
        let (first, second) = if history.is_empty() {
            (a, b)
        } else {
            let (ia, da) = space.set_distance(&a, history)?;
            let (ib, db) = space.set_distance(&b, history)?;
            if ia == ib && da <= r / 3.0 && db <= r / 3.0 {
                if eta.label(&history[ia]) == eta.label(&b) {
                    (b, a)
                } else {
                    (a, b)
                }
            } else if db > r / 3.0 {
                (a, b)
            } else {
                (b, a)
            }
        };
        self.pending = Some(second);
        Ok(first)
    }
}

/// A sup-norm cube around `center`, clipped to the domain, with
/// `ν >= mass` (the whole domain when `mass` reaches the total).
pub fn region_of_mass(measure: &ReferenceMeasure, center: &[f64], mass: f64) -> BoxRegion {
    let d = &measure.space.domain;
    if mass >= measure.total_mass() {
        return d.clone();
    }
    let mut hi = (0..d.dim()).map(|i| (center[i] - d.lo[i]).max(d.hi[i] - center[i])).fold(0.0, f64::max);
    let mut lo = 0.0;
    let cube = |h: f64| d.clipped_cube(center, h).expect("center lies in the domain");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if measure.mass_of_box(&cube(mid)) >= mass {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    cube(hi)
}
