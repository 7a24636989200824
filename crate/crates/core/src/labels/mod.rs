//! Label functions, margins and mutually-labeling sets.

mod families;
mod koch;
mod mutual;
pub mod planar;

use serde::Serialize;

pub use families::{Checkerboard, Halfspace, Threshold, UnionOfBalls};
pub use koch::KochCurve;
pub use mutual::{
    is_mutually_labeling_ball, is_mutually_labeling_set, margin_equals_boundary_distance_check,
    ml_covering_number_estimate, mutually_labeling_ball, v_r_membership, MarginBoundaryReport, MlCover, MlCoverParams,
    MlsCheck, DEFAULT_PROBES, DEFAULT_SAFETY,
};

use crate::metric::{MetricSpace, Point};
use crate::rng::Rng;

pub type Label = u8;

/// Result of a margin query. `value` is `+inf` when the other class is
/// empty. For approximate families `error_bound` bounds the gap to the
/// true margin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginQuery {
    pub value: f64,
    pub exact: bool,
    pub error_bound: f64,
    /// A point of another class at distance at most `value·(1 + 1e-9)`.
    pub witness: Option<Point>,
}

impl MarginQuery {
    pub(crate) fn unbounded() -> Self {
        MarginQuery { value: f64::INFINITY, exact: true, error_bound: 0.0, witness: None }
    }
}

/// A label function over a box domain.
#[derive(Clone, Debug)]
pub enum LabelFunction {
    Threshold(Threshold),
    Halfspace(Halfspace),
    Balls(UnionOfBalls),
    Checkerboard(Checkerboard),
    Koch(KochCurve),
}

macro_rules! dispatch {
    ($self:ident, $f:ident => $e:expr) => {
        match $self {
            LabelFunction::Threshold($f) => $e,
            LabelFunction::Halfspace($f) => $e,
            LabelFunction::Balls($f) => $e,
            LabelFunction::Checkerboard($f) => $e,
            LabelFunction::Koch($f) => $e,
        }
    };
}

impl LabelFunction {
    pub fn name(&self) -> &'static str {
        match self {
            LabelFunction::Threshold(_) => "threshold",
            LabelFunction::Halfspace(_) => "halfspace",
            LabelFunction::Balls(_) => "balls",
            LabelFunction::Checkerboard(_) => "checkerboard",
            LabelFunction::Koch(_) => "koch",
        }
    }

    pub fn space(&self) -> &MetricSpace {
        dispatch!(self, f => &f.space)
    }

    pub fn label(&self, x: &[f64]) -> Label {
        dispatch!(self, f => f.label(x))
    }

    pub fn margin(&self, x: &[f64]) -> MarginQuery {
        dispatch!(self, f => f.margin(x))
    }

    pub fn is_boundary(&self, x: &[f64]) -> bool {
        self.margin(x).value == 0.0
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, LabelFunction::Koch(_))
    }

    /// A point of the boundary closest to `x`, when the family can name one.
    pub fn nearest_boundary_point(&self, x: &[f64]) -> Option<Point> {
        dispatch!(self, f => f.nearest_boundary_point(x))
    }

    /// `n` points spread over the boundary; `None` if the family has no
    /// sampler, an empty vector if the boundary is empty.
    pub fn boundary_sample(&self, n: usize, rng: &mut Rng) -> Option<Vec<Point>> {
        dispatch!(self, f => f.boundary_sample(n, rng))
    }

    /// Two points of different classes at distance in `(0, max_dist)`.
    /// `None` when the family has no such oracle or cannot resolve the scale.
    pub fn cross_class_pair(&self, max_dist: f64, rng: &mut Rng) -> Option<(Point, Point)> {
        if !(max_dist > 0.0) {
            return None;
        }
        let pair = match self {
            LabelFunction::Koch(_) => None,
            LabelFunction::Threshold(f) => f.cross_class_pair(max_dist, rng),
            LabelFunction::Halfspace(f) => f.cross_class_pair(max_dist, rng),
            LabelFunction::Balls(f) => f.cross_class_pair(max_dist, rng),
            LabelFunction::Checkerboard(f) => f.cross_class_pair(max_dist, rng),
        }?;
        let space = self.space();
        let d = space.dist(&pair.0, &pair.1);
        let ok = d > 0.0
            && d < max_dist
            && self.label(&pair.0) != self.label(&pair.1)
            && space.domain.contains(&pair.0)
            && space.domain.contains(&pair.1);
        ok.then_some(pair)
    }

    pub fn has_pair_oracle(&self) -> bool {
        !matches!(self, LabelFunction::Koch(_))
    }

    /// A fixed point near the decision boundary, used to aim oblivious attacks.
    pub fn boundary_anchor(&self) -> Point {
        let c = self.space().domain.center();
        self.nearest_boundary_point(&c).unwrap_or(c)
    }

    /// Box-counting dimension of the boundary when known analytically.
    pub fn boundary_box_dimension(&self) -> f64 {
        let dim = self.space().dim() as f64;
        match self {
            LabelFunction::Threshold(_) => 0.0,
            LabelFunction::Koch(_) => 4f64.ln() / 3f64.ln(),
            _ => dim - 1.0,
        }
    }
}

/// Searches for a witness of another class near `base`, stepping along `dir`.
pub(crate) fn find_witness(
    space: &MetricSpace,
    label: impl Fn(&[f64]) -> Label,
    x: &[f64],
    value: f64,
    base: &[f64],
    dir: &[f64],
) -> Option<Point> {
    if !(value > 0.0) || !value.is_finite() {
        return None;
    }
    let own = label(x);
    let limit = value * (1.0 + 1e-9);
    for tau in [0.0, 1e-10, 1e-11, 1e-12, 1e-13] {
        let mut w: Vec<f64> = base.iter().zip(dir).map(|(b, d)| b + tau * value * d).collect();
        space.domain.clamp(&mut w);
        if label(&w) != own && space.dist(x, &w) <= limit {
            return Some(Point(w));
        }
    }
    None
}

#[cfg(test)]
mod tests;
