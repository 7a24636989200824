use rand::Rng as _;
use serde::Serialize;

use super::LabelFunction;
use crate::error::{Error, Result};
use crate::grid::HashGrid;
use crate::measure::{MassEstimate, ReferenceMeasure};
use crate::metric::{Ball, MetricKind, Point};
use crate::rng::{derive_seed, stream_rng};

pub const DEFAULT_SAFETY: f64 = 0.99;
pub const DEFAULT_PROBES: usize = 512;

#[derive(Clone, Debug, Serialize)]
pub struct MlsCheck {
    pub mutually_labeling: bool,
    /// Diameter used in the comparison (`2r` for balls).
    pub diameter: f64,
    pub min_margin: f64,
    /// The probe with the smallest margin when the check fails.
    pub witness: Option<Point>,
}

/// `diam(U) < min_{x∈U} margin(x)` for a finite set.
pub fn is_mutually_labeling_set(eta: &LabelFunction, u: &[Point]) -> Result<MlsCheck> {
    let diameter = eta.space().set_diameter(u)?;
    Ok(judge(eta, diameter, u.iter().cloned()))
}

fn judge(eta: &LabelFunction, diameter: f64, probes: impl Iterator<Item = Point>) -> MlsCheck {
    let mut min_margin = f64::INFINITY;
    let mut worst = None;
    for p in probes {
        let m = eta.margin(&p).value;
        if m < min_margin || worst.is_none() {
            min_margin = min_margin.min(m);
            worst = Some(p);
        }
    }
    let ok = diameter < min_margin;
    MlsCheck { mutually_labeling: ok, diameter, min_margin, witness: if ok { None } else { worst } }
}

/// One-sided probe check of a ball: the center, the boundary point nearest
/// the center when it falls inside, and `probes` seeded draws from the ball.
pub fn is_mutually_labeling_ball(eta: &LabelFunction, ball: &Ball, probes: usize, seed: u64) -> MlsCheck {
    let space = eta.space();
    let mut pts = vec![ball.center.clone()];
    if let Some(b) = eta.nearest_boundary_point(&ball.center) {
        if ball.contains(space, &b) && space.domain.contains(&b) {
            pts.push(b);
        }
    }
    if let Some(cube) = space.domain.clipped_cube(&ball.center, ball.radius) {
        let mut rng = stream_rng(seed, 0);
        let mut tries = 0;
        while pts.len() < probes + 2 && tries < probes * 20 {
            tries += 1;
            let p: Vec<f64> =
                (0..cube.dim()).map(|i| cube.lo[i] + (cube.hi[i] - cube.lo[i]) * rng.random::<f64>()).collect();
            if ball.contains(space, &p) {
                pts.push(Point(p));
            }
        }
    }
    judge(eta, 2.0 * ball.radius, pts.into_iter())
}

/// `B(x, safety·margin(x)/3)`, or `None` on the boundary. Infinite margins
/// are capped at three domain diameters.
pub fn mutually_labeling_ball(eta: &LabelFunction, x: &[f64], safety: f64) -> Option<Ball> {
    assert!(safety > 0.0 && safety < 1.0, "safety must lie in (0, 1)");
    let m = eta.margin(x).value.min(3.0 * eta.space().diameter());
    (m > 0.0).then(|| Ball { center: Point(x.to_vec()), radius: safety * m / 3.0 })
}

/// `x ∈ V_r`, i.e. `margin(x) >= r`.
pub fn v_r_membership(eta: &LabelFunction, x: &[f64], r: f64) -> bool {
    eta.margin(x).value >= r
}

#[derive(Clone, Debug)]
pub struct MlCoverParams {
    pub samples: usize,
    /// Maximum number of balls.
    pub budget: usize,
    pub safety: f64,
    pub seed: u64,
}

impl Default for MlCoverParams {
    fn default() -> Self {
        MlCoverParams { samples: 100_000, budget: 100_000, safety: DEFAULT_SAFETY, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MlCover {
    pub r: f64,
    pub balls: Vec<Ball>,
    /// `ν(∪ balls)`.
    pub covered: MassEstimate,
    /// `ν(V_r \ ∪ balls)`.
    pub leftover: MassEstimate,
    /// `ν(V_r^c \ ∪ balls)`; the three estimates share one sample and sum
    /// to the total mass.
    pub outside: MassEstimate,
    pub complete: bool,
}

impl MlCover {
    pub fn count(&self) -> usize {
        self.balls.len()
    }
}

/// Greedy layered cover of `V_r` by mutually-labeling balls.
///
/// Sample points of `V_r` are grouped into layers `margin ∈ [2^k r,
/// 2^{k+1} r)`. Outer layers go first; each uncovered point opens a ball of
/// radius `safety·2^k r/3`. Masses are then estimated on an independent
/// sample.
pub fn ml_covering_number_estimate(
    eta: &LabelFunction,
    measure: &ReferenceMeasure,
    r: f64,
    params: &MlCoverParams,
) -> Result<MlCover> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("ML covering radius must be positive"));
    }
    let space = eta.space();
    let top = (space.diameter() / r).log2().ceil().max(0.0) as usize;
    let mut rng = stream_rng(params.seed, 0);
    let mut layers: Vec<Vec<Point>> = vec![Vec::new(); top + 1];
    for _ in 0..params.samples {
        let x = measure.sample(&mut rng);
        let m = eta.margin(&x).value;
        if m >= r {
            let k = if m.is_finite() { ((m / r).log2().floor().max(0.0) as usize).min(top) } else { top };
            layers[k].push(x);
        }
    }
    let mut balls: Vec<Ball> = Vec::new();
    let mut grids: Vec<HashGrid> = Vec::new();
    let mut complete = true;
    'outer: for k in (0..=top).rev() {
        if layers[k].is_empty() {
            continue;
        }
        let radius = params.safety * 2f64.powi(k as i32) * r / 3.0;
        grids.push(HashGrid::new(&space.domain.lo, radius));
        for x in &layers[k] {
            if covered_by(&balls, &grids, space, x) {
                continue;
            }
            if balls.len() >= params.budget {
                complete = false;
                break 'outer;
            }
            grids.last_mut().unwrap().insert(x, balls.len());
            balls.push(Ball { center: x.clone(), radius });
        }
    }
    let mut rng = stream_rng(derive_seed(params.seed, &[1]), 0);
    let n = params.samples.max(1);
    let (mut cov, mut left, mut out) = (0, 0, 0);
    for _ in 0..n {
        let x = measure.sample(&mut rng);
        if covered_by(&balls, &grids, space, &x) {
            cov += 1;
        } else if eta.margin(&x).value >= r {
            left += 1;
        } else {
            out += 1;
        }
    }
    let total = measure.total_mass();
    Ok(MlCover {
        r,
        balls,
        covered: MassEstimate::from_hits(cov, n, total),
        leftover: MassEstimate::from_hits(left, n, total),
        outside: MassEstimate::from_hits(out, n, total),
        complete,
    })
}

fn covered_by(balls: &[Ball], grids: &[HashGrid], space: &crate::metric::MetricSpace, x: &[f64]) -> bool {
    let mut hit = false;
    for g in grids {
        g.for_each_near(x, 1, |i| {
            if !hit && balls[i].contains(space, x) {
                hit = true;
            }
        });
        if hit {
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginBoundaryReport {
    pub probes: usize,
    pub boundary_points: usize,
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
}

/// Compares `margin(x)` with the distance from `x` to a dense boundary
/// sample. Runs only for euclidean and interval metrics.
pub fn margin_equals_boundary_distance_check(
    eta: &LabelFunction,
    measure: &ReferenceMeasure,
    n_probes: usize,
    n_boundary: usize,
    seed: u64,
) -> Result<MarginBoundaryReport> {
    let space = eta.space();
    if space.kind == MetricKind::Sup && space.dim() > 1 {
        return Err(Error::Unsupported("margin/boundary comparison runs for euclidean and interval metrics".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let boundary = eta
        .boundary_sample(n_boundary, &mut rng)
        .ok_or_else(|| Error::Unsupported(format!("{} has no boundary sampler", eta.name())))?;
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for _ in 0..n_probes {
        let x = measure.sample(&mut rng);
        let m = eta.margin(&x).value;
        let d = if boundary.is_empty() { f64::INFINITY } else { space.set_distance(&x, &boundary)?.1 };
        let gap = if m.is_infinite() && d.is_infinite() { 0.0 } else { (m - d).abs() };
        max = max.max(gap);
        sum += gap;
    }
    Ok(MarginBoundaryReport {
        probes: n_probes,
        boundary_points: boundary.len(),
        max_discrepancy: max,
        mean_discrepancy: sum / n_probes.max(1) as f64,
    })
}
