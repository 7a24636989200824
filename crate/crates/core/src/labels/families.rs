use rand::Rng as _;

use super::planar::{clip_halfplane, polygon_boundary_distance, P2};
use super::{find_witness, Label, MarginQuery};
use crate::error::{Error, Result};
use crate::metric::{norm2, MetricKind, MetricSpace, Point};
use crate::rng::Rng;

/// `η(x) = 1{x >= θ}` on an interval.
#[derive(Clone, Debug)]
pub struct Threshold {
    pub space: MetricSpace,
    pub theta: f64,
}

impl Threshold {
    pub fn new(space: &MetricSpace, theta: f64) -> Result<Self> {
        if space.dim() != 1 {
            return Err(Error::invalid("threshold needs a one-dimensional space"));
        }
        if !theta.is_finite() {
            return Err(Error::invalid("threshold must be finite"));
        }
        Ok(Threshold { space: space.clone(), theta })
    }

    pub fn label(&self, x: &[f64]) -> Label {
        (x[0] >= self.theta) as Label
    }

    fn bounds(&self) -> (f64, f64) {
        (self.space.domain.lo[0], self.space.domain.hi[0])
    }

    pub fn margin(&self, x: &[f64]) -> MarginQuery {
        let (lo, hi) = self.bounds();
        let t = self.theta;
        let (value, dir) = if x[0] >= t {
            if t <= lo {
                return MarginQuery::unbounded();
            }
            (x[0] - t, -1.0)
        } else {
            if t > hi {
                return MarginQuery::unbounded();
            }
            (t - x[0], 1.0)
        };
        let witness = find_witness(&self.space, |y| self.label(y), x, value, &[t], &[dir]);
        MarginQuery { value, exact: true, error_bound: 0.0, witness }
    }

    pub fn nearest_boundary_point(&self, _x: &[f64]) -> Option<Point> {
        let (lo, hi) = self.bounds();
        (lo < self.theta && self.theta <= hi).then(|| Point::scalar(self.theta))
    }

    pub fn boundary_sample(&self, n: usize, _rng: &mut Rng) -> Option<Vec<Point>> {
        Some(self.nearest_boundary_point(&[0.0]).map(|p| vec![p; n.min(1)]).unwrap_or_default())
    }

    pub fn cross_class_pair(&self, max_dist: f64, _rng: &mut Rng) -> Option<(Point, Point)> {
        let b = self.nearest_boundary_point(&[0.0])?;
        let s = 0.9 * max_dist;
        Some((Point::scalar(b[0] - s), b))
    }
}

/// `η(x) = 1{w·x >= b}`.
#[derive(Clone, Debug)]
pub struct Halfspace {
    pub space: MetricSpace,
    pub w: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn new(space: &MetricSpace, w: Vec<f64>, b: f64) -> Result<Self> {
        if w.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: w.len() });
        }
        if w.iter().all(|v| *v == 0.0) || !w.iter().all(|v| v.is_finite()) || !b.is_finite() {
            return Err(Error::invalid("halfspace normal must be finite and nonzero"));
        }
        if space.kind == MetricKind::Euclidean && space.dim() > 2 {
            return Err(Error::Unsupported("euclidean halfspace margins are implemented up to dimension 2".into()));
        }
        Ok(Halfspace { space: space.clone(), w, b })
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn label(&self, x: &[f64]) -> Label {
        (self.dot(x) >= self.b) as Label
    }

    fn extreme(&self, sign: f64) -> f64 {
        let d = &self.space.domain;
        self.w.iter().enumerate().map(|(i, wi)| wi * if sign * wi > 0.0 { d.hi[i] } else { d.lo[i] }).sum()
    }

    /// Whether the class opposite to `own` is nonempty, and the sign that
    /// points toward it.
    fn other_side(&self, own: Label) -> Option<f64> {
        if own == 1 {
            (self.extreme(-1.0) < self.b).then_some(-1.0)
        } else {
            (self.extreme(1.0) >= self.b).then_some(1.0)
        }
    }

    /// Smallest `t` with `max_{box ∩ [x-t, x+t]} s·w·y >= s·b`, and the
    /// maximizing point, by walking the piecewise-linear profile.
    fn sup_reach(&self, x: &[f64], s: f64) -> Option<(f64, Vec<f64>)> {
        let d = &self.space.domain;
        let w: Vec<f64> = self.w.iter().map(|v| s * v).collect();
        let target = s * self.b;
        let mut f: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        let point_at = |t: f64| -> Vec<f64> {
            (0..x.len())
                .map(|i| {
                    if w[i] > 0.0 {
                        (x[i] + t).min(d.hi[i])
                    } else if w[i] < 0.0 {
                        (x[i] - t).max(d.lo[i])
                    } else {
                        x[i]
                    }
                })
                .collect()
        };
        if f >= target {
            return Some((0.0, x.to_vec()));
        }
        let mut limits: Vec<(f64, f64)> = (0..x.len())
            .filter(|&i| w[i] != 0.0)
            .map(|i| {
                let l = if w[i] > 0.0 { d.hi[i] - x[i] } else { x[i] - d.lo[i] };
                (l.max(0.0), w[i].abs())
            })
            .collect();
        limits.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut slope: f64 = limits.iter().filter(|l| l.0 > 0.0).map(|l| l.1).sum();
        let mut t = 0.0;
        for (l, a) in limits {
            if l > t {
                let next = f + slope * (l - t);
                if next >= target {
                    let tt = t + (target - f) / slope;
                    return Some((tt, point_at(tt)));
                }
                t = l;
                f = next;
                slope -= a;
            } else if l == t && t == 0.0 {
                continue;
            } else {
                slope -= a;
            }
        }
        None
    }

    fn planar(&self) -> bool {
        self.space.kind == MetricKind::Euclidean && self.space.dim() == 2
    }

    fn box_polygon(&self) -> Vec<P2> {
        let d = &self.space.domain;
        vec![[d.lo[0], d.lo[1]], [d.hi[0], d.lo[1]], [d.hi[0], d.hi[1]], [d.lo[0], d.hi[1]]]
    }

    /// Closest point of the other class's closure and its distance.
    fn nearest_other(&self, x: &[f64]) -> Option<(f64, Vec<f64>, f64)> {
        let s = self.other_side(self.label(x))?;
        if self.planar() {
            let poly = clip_halfplane(&self.box_polygon(), [self.w[0], self.w[1]], self.b, s);
            let (d, q) = polygon_boundary_distance(MetricKind::Euclidean, [x[0], x[1]], &poly)?;
            Some((d, q.to_vec(), s))
        } else {
            let (t, q) = self.sup_reach(x, s)?;
            Some((t, q, s))
        }
    }

    pub fn margin(&self, x: &[f64]) -> MarginQuery {
        let Some((value, base, s)) = self.nearest_other(x) else {
            return MarginQuery::unbounded();
        };
        let n = norm2(&self.w);
        let dir: Vec<f64> = self.w.iter().map(|v| s * v / n).collect();
        let witness = find_witness(&self.space, |y| self.label(y), x, value, &base, &dir);
        MarginQuery { value, exact: true, error_bound: 0.0, witness }
    }

    pub fn nearest_boundary_point(&self, x: &[f64]) -> Option<Point> {
        self.nearest_other(x).map(|(_, q, _)| Point(q))
    }

    pub fn boundary_sample(&self, n: usize, rng: &mut Rng) -> Option<Vec<Point>> {
        let d = &self.space.domain;
        if self.extreme(1.0) < self.b || self.extreme(-1.0) >= self.b {
            return Some(vec![]);
        }
        match self.space.dim() {
            1 => Some(vec![Point::scalar(self.b / self.w[0]); n.min(1)]),
            2 => {
                let n2 = self.w[0] * self.w[0] + self.w[1] * self.w[1];
                let p0 = [self.w[0] * self.b / n2, self.w[1] * self.b / n2];
                let t = [-self.w[1], self.w[0]];
                let (mut smin, mut smax) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..2 {
                    if t[i] == 0.0 {
                        if p0[i] < d.lo[i] || p0[i] > d.hi[i] {
                            return Some(vec![]);
                        }
                    } else {
                        let a = (d.lo[i] - p0[i]) / t[i];
                        let b = (d.hi[i] - p0[i]) / t[i];
                        smin = smin.max(a.min(b));
                        smax = smax.min(a.max(b));
                    }
                }
                if smin > smax {
                    return Some(vec![]);
                }
                Some(
                    (0..n)
                        .map(|_| {
                            let s = smin + (smax - smin) * rng.random::<f64>();
                            let mut p = vec![p0[0] + s * t[0], p0[1] + s * t[1]];
                            d.clamp(&mut p);
                            Point(p)
                        })
                        .collect(),
                )
            }
            _ => {
                let n2: f64 = self.w.iter().map(|v| v * v).sum();
                let mut out = Vec::with_capacity(n);
                for _ in 0..n.saturating_mul(1000) {
                    if out.len() == n {
                        break;
                    }
                    let y: Vec<f64> =
                        (0..d.dim()).map(|i| d.lo[i] + (d.hi[i] - d.lo[i]) * rng.random::<f64>()).collect();
                    let k = (self.dot(&y) - self.b) / n2;
                    let p: Vec<f64> = y.iter().zip(&self.w).map(|(a, w)| a - k * w).collect();
                    if d.contains(&p) {
                        out.push(Point(p));
                    }
                }
                Some(out)
            }
        }
    }

    pub fn cross_class_pair(&self, max_dist: f64, rng: &mut Rng) -> Option<(Point, Point)> {
        let scale = match self.space.kind {
            MetricKind::Euclidean => norm2(&self.w),
            _ => self.w.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        };
        let u: Vec<f64> = self.w.iter().map(|v| v / scale).collect();
        let h = 0.45 * max_dist;
        for _ in 0..64 {
            let q = self.boundary_sample(1, rng)?.pop()?;
            let a = Point(q.iter().zip(&u).map(|(q, u)| q + h * u).collect());
            let b = Point(q.iter().zip(&u).map(|(q, u)| q - h * u).collect());
            let d = self.space.dist(&a, &b);
            if self.label(&a) != self.label(&b)
                && d > 0.0
                && d < max_dist
                && self.space.domain.contains(&a)
                && self.space.domain.contains(&b)
            {
                return Some((b, a));
            }
        }
        None
    }
}

/// Label 1 on a union of disjoint open balls, 0 elsewhere.
#[derive(Clone, Debug)]
pub struct UnionOfBalls {
    pub space: MetricSpace,
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
}

impl UnionOfBalls {
    pub fn new(space: &MetricSpace, centers: Vec<Point>, radii: Vec<f64>) -> Result<Self> {
        if centers.len() != radii.len() || centers.is_empty() {
            return Err(Error::invalid("balls need matching nonempty centers and radii"));
        }
        for (c, r) in centers.iter().zip(&radii) {
            space.check_point(c)?;
            if !(*r > 0.0) {
                return Err(Error::invalid("ball radii must be positive"));
            }
            let inside = (0..space.dim()).all(|i| c[i] - r >= space.domain.lo[i] && c[i] + r <= space.domain.hi[i]);
            if !inside {
                return Err(Error::invalid("closed balls must lie inside the domain"));
            }
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if space.dist(&centers[i], &centers[j]) < radii[i] + radii[j] {
                    return Err(Error::invalid("balls must be disjoint"));
                }
            }
        }
        Ok(UnionOfBalls { space: space.clone(), centers, radii })
    }

    pub fn label(&self, x: &[f64]) -> Label {
        self.centers.iter().zip(&self.radii).any(|(c, r)| self.space.dist(c, x) < *r) as Label
    }

    /// Point on sphere `j` in the direction of `x` and that unit direction.
    fn radial(&self, j: usize, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = &self.centers[j];
        let r = self.radii[j];
        let d = self.space.dist(c, x);
        let dir: Vec<f64> = if d > 0.0 {
            c.iter().zip(x).map(|(c, x)| (x - c) / d).collect()
        } else {
            let mut e = vec![0.0; c.len()];
            e[0] = 1.0;
            e
        };
        (c.iter().zip(&dir).map(|(c, u)| c + r * u).collect(), dir)
    }

    fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut inside = None;
        let mut best = (0, f64::INFINITY);
        for (j, (c, r)) in self.centers.iter().zip(&self.radii).enumerate() {
            let d = self.space.dist(c, x);
            if d < *r {
                inside = Some((j, r - d));
            }
            if d - r < best.1 {
                best = (j, (d - r).max(0.0));
            }
        }
        inside.unwrap_or(best)
    }

    pub fn margin(&self, x: &[f64]) -> MarginQuery {
        let (j, value) = self.nearest(x);
        let (base, dir) = self.radial(j, x);
        let dir: Vec<f64> = if self.label(x) == 1 { dir } else { dir.iter().map(|v| -v).collect() };
        let witness = find_witness(&self.space, |y| self.label(y), x, value, &base, &dir);
        MarginQuery { value, exact: true, error_bound: 0.0, witness }
    }

    pub fn nearest_boundary_point(&self, x: &[f64]) -> Option<Point> {
        Some(Point(self.radial(self.nearest(x).0, x).0))
    }

    pub fn boundary_sample(&self, n: usize, rng: &mut Rng) -> Option<Vec<Point>> {
        let dim = self.space.dim();
        let weights: Vec<f64> = self.radii.iter().map(|r| r.powi(dim as i32 - 1)).collect();
        let total: f64 = weights.iter().sum();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u = rng.random::<f64>() * total;
            let mut j = 0;
            while j + 1 < weights.len() && u >= weights[j] {
                u -= weights[j];
                j += 1;
            }
            let (c, r) = (&self.centers[j], self.radii[j]);
            let dir = match self.space.kind {
                MetricKind::Euclidean if dim > 1 => gaussian_direction(dim, rng),
                _ => cube_surface_direction(dim, rng),
            };
            out.push(Point(c.iter().zip(&dir).map(|(c, u)| c + r * u).collect()));
        }
        Some(out)
    }

    pub fn cross_class_pair(&self, max_dist: f64, rng: &mut Rng) -> Option<(Point, Point)> {
        for _ in 0..64 {
            let p = self.boundary_sample(1, rng)?.pop()?;
            let (j, _) = self.nearest(&p);
            let c = &self.centers[j];
            let s = 0.9 * max_dist.min(self.radii[j]);
            let k = 1.0 - s / self.radii[j];
            let q = Point(c.iter().zip(p.iter()).map(|(c, p)| c + (p - c) * k).collect());
            if self.label(&p) != self.label(&q) {
                return Some((p, q));
            }
        }
        None
    }
}

fn gaussian_direction(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let u2 = rng.random::<f64>();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let n = norm2(&v);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// A uniform point on the surface of the cube `[-1, 1]^dim`.
fn cube_surface_direction(dim: usize, rng: &mut Rng) -> Vec<f64> {
    let face = rng.random_range(0..2 * dim);
    let mut v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    v[face / 2] = if face % 2 == 0 { -1.0 } else { 1.0 };
    v
}

/// Parity of the cell index on a `k^D` grid of half-open cells.
#[derive(Clone, Debug)]
pub struct Checkerboard {
    pub space: MetricSpace,
    pub cells: usize,
}

impl Checkerboard {
    pub fn new(space: &MetricSpace, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::invalid("checkerboard needs at least one cell per side"));
        }
        Ok(Checkerboard { space: space.clone(), cells })
    }

    fn face(&self, i: usize, j: usize) -> f64 {
        let d = &self.space.domain;
        d.lo[i] + (d.hi[i] - d.lo[i]) * (j as f64) / (self.cells as f64)
    }

    fn index(&self, i: usize, x: f64) -> usize {
        let d = &self.space.domain;
        let k = self.cells;
        let guess = ((x - d.lo[i]) / (d.hi[i] - d.lo[i]) * k as f64).floor();
        let mut j = if guess.is_nan() || guess < 0.0 { 0 } else { (guess as usize).min(k - 1) };
        while j > 0 && x < self.face(i, j) {
            j -= 1;
        }
        while j + 1 < k && x >= self.face(i, j + 1) {
            j += 1;
        }
        j
    }

    pub fn label(&self, x: &[f64]) -> Label {
        ((0..x.len()).map(|i| self.index(i, x[i])).sum::<usize>() % 2) as Label
    }

    /// Nearest interior face: (distance, coordinate, face position, side).
    fn nearest_face(&self, x: &[f64]) -> Option<(f64, usize, f64, f64)> {
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for (i, &xi) in x.iter().enumerate() {
            let j = self.index(i, xi);
            let mut consider = |d: f64, pos: f64, side: f64| {
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, i, pos, side));
                }
            };
            if j + 1 < self.cells {
                let f = self.face(i, j + 1);
                consider(f - xi, f, 1.0);
            }
            if j > 0 {
                let f = self.face(i, j);
                consider(xi - f, f, -1.0);
            }
        }
        best
    }

    pub fn margin(&self, x: &[f64]) -> MarginQuery {
        let Some((value, i, pos, side)) = self.nearest_face(x) else {
            return MarginQuery::unbounded();
        };
        let mut base = x.to_vec();
        base[i] = pos;
        let mut dir = vec![0.0; x.len()];
        dir[i] = side;
        let witness = find_witness(&self.space, |y| self.label(y), x, value, &base, &dir);
        MarginQuery { value, exact: true, error_bound: 0.0, witness }
    }

    pub fn nearest_boundary_point(&self, x: &[f64]) -> Option<Point> {
        let (_, i, pos, _) = self.nearest_face(x)?;
        let mut p = x.to_vec();
        p[i] = pos;
        Some(Point(p))
    }

    pub fn boundary_sample(&self, n: usize, rng: &mut Rng) -> Option<Vec<Point>> {
        if self.cells < 2 {
            return Some(vec![]);
        }
        let d = &self.space.domain;
        Some(
            (0..n)
                .map(|_| {
                    let i = rng.random_range(0..d.dim());
                    let j = rng.random_range(1..self.cells);
                    let mut p: Vec<f64> =
                        (0..d.dim()).map(|k| d.lo[k] + (d.hi[k] - d.lo[k]) * rng.random::<f64>()).collect();
                    p[i] = self.face(i, j);
                    Point(p)
                })
                .collect(),
        )
    }

    pub fn cross_class_pair(&self, max_dist: f64, rng: &mut Rng) -> Option<(Point, Point)> {
        let p = self.boundary_sample(1, rng)?.pop()?;
        let (_, i, pos, _) = self.nearest_face(&p)?;
        let mut q = p.0.clone();
        q[i] = pos - 0.9 * max_dist;
        Some((Point(q), p))
    }
}
