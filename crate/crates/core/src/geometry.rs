//! Boundary geometry: box-counting dimension, Minkowski content, and the
//! mistake bound obtained by trading mutually-labeling cover size against
//! the mass left uncovered.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::HashGrid;
use crate::labels::{ml_covering_number_estimate, LabelFunction, MlCoverParams};
use crate::measure::ReferenceMeasure;
use crate::metric::{greedy_net, BoxRegion, MetricSpace, Point};
use crate::processes::DominationRate;
use crate::rng::{derive_seed, stream_rng};

/// `diam · 2^{-j}` for `j = first..=last`.
pub fn dyadic_schedule(space: &MetricSpace, first: i32, last: i32) -> Vec<f64> {
    let r = space.diameter();
    (first..=last).map(|j| r * 2f64.powi(-j)).collect()
}

/// The default dimension schedule, `j = 2..=10`.
pub fn default_schedule(space: &MetricSpace) -> Vec<f64> {
    dyadic_schedule(space, 2, 10)
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// `(r, greedy covering count)` for every scale kept.
    pub counts: Vec<(f64, usize)>,
    pub dropped: Vec<f64>,
    pub warning: Option<String>,
}

/// Least-squares slope of `ln N_r` against `ln 1/r`, with greedy counts.
/// Scales whose count exceeds an eighth of the sample are too fine for the
/// sample and are dropped.
pub fn box_dimension_estimate(space: &MetricSpace, sample: &[Point], schedule: &[f64]) -> Result<DimensionEstimate> {
    if sample.is_empty() {
        return Err(Error::EmptySet("dimension sample"));
    }
    if schedule.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("schedule radii must be positive"));
    }
    for p in sample {
        space.check_point(p)?;
    }
    let counts: Vec<(f64, usize)> = schedule.par_iter().map(|&r| (r, greedy_net(space, sample, r).len())).collect();
    let cap = (sample.len() / 8).max(1);
    let (kept, dropped): (Vec<_>, Vec<_>) = counts.into_iter().partition(|&(_, n)| n <= cap || sample.len() < 8);
    let dropped: Vec<f64> = dropped.into_iter().map(|(r, _)| r).collect();
    let mut warning =
        (!dropped.is_empty()).then(|| format!("sample too sparse for {} finest scales; truncated", dropped.len()));
    let (slope, intercept) = if kept.len() >= 2 {
        let xs: Vec<f64> = kept.iter().map(|(r, _)| (1.0 / r).ln()).collect();
        let ys: Vec<f64> = kept.iter().map(|(_, n)| (*n as f64).ln()).collect();
        least_squares(&xs, &ys)
    } else {
        warning = Some("fewer than two usable scales".into());
        (0.0, kept.first().map(|(_, n)| (*n as f64).ln()).unwrap_or(0.0))
    };
    Ok(DimensionEstimate { slope, intercept, counts: kept, dropped, warning })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContentPoint {
    pub r: f64,
    pub mass: f64,
    pub stderr: f64,
    pub ratio: f64,
    pub reliable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinkowskiEstimate {
    /// `ν(A^r)/r` at the finest reliable scale.
    pub content: f64,
    pub curve: Vec<ContentPoint>,
    /// Largest nearest-neighbor gap inside the boundary sample.
    pub spacing: f64,
    pub exact: bool,
    pub warning: Option<String>,
}

/// Estimates `lim ν(A^r)/r` from a sample of `A`, assuming `ν(A) = 0`.
///
/// One-dimensional spaces use exact interval unions. Elsewhere the tube is
/// sampled from ν restricted to the sample's bounding box grown by `r`.
/// A scale counts as reliable once `r` is at least four sample spacings.
pub fn minkowski_content_estimate(
    measure: &ReferenceMeasure,
    boundary: &[Point],
    schedule: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<MinkowskiEstimate> {
    let space = &measure.space;
    if schedule.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("schedule radii must be positive"));
    }
    for p in boundary {
        space.check_point(p)?;
    }
    if boundary.is_empty() {
        let curve =
            schedule.iter().map(|&r| ContentPoint { r, mass: 0.0, stderr: 0.0, ratio: 0.0, reliable: true }).collect();
        return Ok(MinkowskiEstimate { content: 0.0, curve, spacing: 0.0, exact: true, warning: None });
    }
    let spacing = max_nn_gap(space, boundary);
    let exact = space.dim() == 1;
    let mut curve: Vec<ContentPoint> = schedule
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let (mass, stderr) = if exact {
                let iv: Vec<(f64, f64)> = boundary.iter().map(|p| (p[0] - r, p[0] + r)).collect();
                (measure.mass_of_interval_union(&iv).expect("one-dimensional"), 0.0)
            } else {
                tube_mass_mc(measure, boundary, r, n_samples, derive_seed(seed, &[j as u64]))
            };
            ContentPoint { r, mass, stderr, ratio: mass / r, reliable: r >= 4.0 * spacing }
        })
        .collect();
    curve.sort_by(|a, b| b.r.total_cmp(&a.r));
    let finest = curve.iter().filter(|c| c.reliable).min_by(|a, b| a.r.total_cmp(&b.r));
    let (content, warning) = match finest {
        Some(c) => (c.ratio, None),
        None => (
            curve.first().map(|c| c.ratio).unwrap_or(0.0),
            Some("no reliable scale; reporting the coarsest".to_string()),
        ),
    };
    Ok(MinkowskiEstimate { content, curve, spacing, exact, warning })
}

fn max_nn_gap(space: &MetricSpace, pts: &[Point]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let dim = space.dim();
    let lo: Vec<f64> = (0..dim).map(|i| pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..dim).map(|i| pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    if extent == 0.0 {
        return 0.0;
    }
    let cell = extent / (pts.len() as f64).sqrt();
    let mut grid = HashGrid::new(&lo, cell);
    for (i, p) in pts.iter().enumerate() {
        grid.insert(p, i);
    }
    pts.par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best = f64::INFINITY;
            grid.for_each_near(p, 1, |j| {
                if j != i {
                    best = best.min(space.dist(p, &pts[j]));
                }
            });
            // A neighbor beyond the probed cells may still be closer.
            if best > cell {
                for (j, q) in pts.iter().enumerate() {
                    if j != i {
                        best = best.min(space.dist(p, q));
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

fn tube_mass_mc(measure: &ReferenceMeasure, pts: &[Point], r: f64, n: usize, seed: u64) -> (f64, f64) {
    let space = &measure.space;
    let dim = space.dim();
    let lo: Vec<f64> = (0..dim).map(|i| pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min) - r).collect();
    let hi: Vec<f64> = (0..dim).map(|i| pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max) + r).collect();
    let bbox = match BoxRegion::new(lo.clone(), hi).ok().and_then(|b| b.intersect(&space.domain)) {
        Some(b) => b,
        None => return (0.0, 0.0),
    };
    let bmass = measure.mass_of_box(&bbox);
    if bmass == 0.0 || n == 0 {
        return (0.0, 0.0);
    }
    let mut grid = HashGrid::new(&lo, r);
    for (i, p) in pts.iter().enumerate() {
        grid.insert(p, i);
    }
    let mut rng = stream_rng(seed, 0);
    let mut hits = 0usize;
    for _ in 0..n {
        let x = measure.sample_in_box(&bbox, &mut rng).expect("box has mass");
        let mut inside = false;
        grid.for_each_near(&x, 1, |j| {
            if !inside && space.dist(&x, &pts[j]) < r {
                inside = true;
            }
        });
        if inside {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    (p * bmass, bmass * (p * (1.0 - p) / n as f64).sqrt())
}

/// Inputs to the smoothed-rate mistake bound.
#[derive(Clone, Debug, Serialize)]
pub struct RateParams {
    pub rate: DominationRate,
    /// Minkowski content `m` of the boundary.
    pub m: f64,
    /// Box-counting dimension `b` of the boundary.
    pub b: f64,
    /// Slack on the dimension exponent.
    pub c1: f64,
    /// Slack on the content.
    pub c2: f64,
    pub big_c: f64,
    pub r0: f64,
    /// Failure probability in the Azuma term.
    pub p: f64,
    /// Radii searched besides the closed-form optimum.
    pub schedule: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateBound {
    pub value: f64,
    /// Closed-form optimal radius, before clipping to `r0`.
    pub r_star: f64,
    /// Radius attaining the infimum, if the trivial bound `N` did not win.
    pub best_r: Option<f64>,
    pub ml_term: f64,
    pub eps_term: f64,
    pub azuma_term: f64,
}

/// `min{N, inf_r C r^{-(b+c1)} + N ε((m+c2) r) + sqrt(2N ln(2N/p))}` over
/// the schedule below `r0` and the closed-form optimum.
pub fn rate_curve_bound(n: u64, params: &RateParams) -> RateBound {
    let nf = n as f64;
    let a = params.b + params.c1;
    let k = params.m + params.c2;
    let sigma = params.rate.sigma();
    let r_star = (params.big_c * a * sigma / (nf * k)).powf(1.0 / (a + 1.0));
    let azuma = if n == 0 { 0.0 } else { (2.0 * nf * (2.0 * nf / params.p).ln()).sqrt() };
    let mut cands: Vec<f64> = params.schedule.iter().cloned().filter(|&r| r > 0.0 && r <= params.r0).collect();
    if params.r0 > 0.0 && r_star.is_finite() && r_star > 0.0 {
        cands.push(r_star.min(params.r0));
    }
    let mut best = (f64::INFINITY, None, 0.0, 0.0);
    for r in cands {
        let ml = params.big_c * r.powf(-a);
        let eps = nf * params.rate.eval(k * r);
        let v = ml + eps + azuma;
        if v < best.0 {
            best = (v, Some(r), ml, eps);
        }
    }
    if best.0 >= nf {
        return RateBound { value: nf, r_star, best_r: None, ml_term: best.2, eps_term: best.3, azuma_term: azuma };
    }
    RateBound { value: best.0, r_star, best_r: best.1, ml_term: best.2, eps_term: best.3, azuma_term: azuma }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitPoint {
    pub r: f64,
    pub count: usize,
    /// Upper estimate of the mass outside the cover.
    pub uncovered: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FittedRate {
    pub big_c: f64,
    pub r0: f64,
    pub points: Vec<FitPoint>,
}

/// Fits `C` and `r0` from greedy mutually-labeling covers on the schedule.
///
/// `C` is the smallest constant with `count(r) <= C r^{-(b+c1)}` on every
/// scale, and `r0` the largest scale below which every uncovered mass
/// (three standard errors up) stays under `(m + c2) r`.
#[allow(clippy::too_many_arguments)]
pub fn fit_rate_constants(
    eta: &LabelFunction,
    measure: &ReferenceMeasure,
    m: f64,
    b: f64,
    c1: f64,
    c2: f64,
    schedule: &[f64],
    cover: &MlCoverParams,
) -> Result<FittedRate> {
    if schedule.is_empty() {
        return Err(Error::EmptySet("rate schedule"));
    }
    let mut points = schedule
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let params = MlCoverParams { seed: derive_seed(cover.seed, &[j as u64]), ..cover.clone() };
            let c = ml_covering_number_estimate(eta, measure, r, &params)?;
            let uncovered = (c.leftover.value + c.outside.value) + 3.0 * (c.leftover.stderr + c.outside.stderr);
            Ok(FitPoint { r, count: c.count(), uncovered })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.r.total_cmp(&b.r));
    let big_c = points.iter().map(|p| p.count as f64 * p.r.powf(b + c1)).fold(0.0, f64::max);
    let mut r0 = 0.0;
    for p in &points {
        if p.uncovered <= (m + c2) * p.r {
            r0 = p.r;
        } else {
            break;
        }
    }
    Ok(FittedRate { big_c, r0, points })
}
