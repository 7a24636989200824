//! Points, metrics on boxes, balls and brute-force metric entropy.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::HashGrid;

/// A point with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl From<f64> for Point {
    fn from(v: f64) -> Self {
        Point(vec![v])
    }
}

/// Axis-aligned closed box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.is_empty() {
            return Err(Error::invalid("box must have dimension >= 1"));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !a.is_finite() || !b.is_finite() || a > b {
                return Err(Error::invalid(format!("bad box side [{a}, {b}]")));
            }
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn intersect(&self, other: &BoxRegion) -> Option<BoxRegion> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let a = self.lo[i].max(other.lo[i]);
            let b = self.hi[i].min(other.hi[i]);
            if a > b {
                return None;
            }
            lo.push(a);
            hi.push(b);
        }
        Some(BoxRegion { lo, hi })
    }

    /// The sup-norm ball `[c - h, c + h]` clipped to `self`.
    pub fn clipped_cube(&self, center: &[f64], half: f64) -> Option<BoxRegion> {
        let cube =
            BoxRegion { lo: center.iter().map(|c| c - half).collect(), hi: center.iter().map(|c| c + half).collect() };
        self.intersect(&cube)
    }

    pub fn center(&self) -> Point {
        Point(self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Maximum coordinate difference.
    #[serde(alias = "sup-norm", alias = "supnorm")]
    Sup,
    Euclidean,
    /// Absolute value on a one-dimensional interval.
    Interval,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Sup => "sup",
            MetricKind::Euclidean => "euclidean",
            MetricKind::Interval => "interval",
        })
    }
}

/// A metric on a closed box with its doubling parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpace {
    pub kind: MetricKind,
    pub domain: BoxRegion,
    pub doubling_dim: u32,
    /// Upper-doubling constant `c` in original units: `ν(B(x,r)) <= c r^d`.
    pub doubling_const: f64,
}

/// Volume of the euclidean unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(dim - 2) * 2.0 * std::f64::consts::PI / dim as f64,
    }
}

impl MetricSpace {
    /// A space with `d = D` and `c` set to the bound for normalized Lebesgue
    /// measure on the box.
    pub fn new(kind: MetricKind, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let domain = BoxRegion::new(lo, hi)?;
        let dim = domain.dim();
        if kind == MetricKind::Interval && dim != 1 {
            return Err(Error::invalid("interval metric requires dimension 1"));
        }
        let vol = domain.volume();
        if vol <= 0.0 {
            return Err(Error::invalid("domain box must have positive volume"));
        }
        let ball = match kind {
            MetricKind::Euclidean => unit_ball_volume(dim),
            _ => 2f64.powi(dim as i32),
        };
        Ok(MetricSpace { kind, domain, doubling_dim: dim as u32, doubling_const: ball / vol })
    }

    pub fn unit_interval() -> Self {
        Self::new(MetricKind::Interval, vec![0.0], vec![1.0]).expect("valid")
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(MetricKind::Interval, vec![lo], vec![hi])
    }

    pub fn unit_cube(kind: MetricKind, dim: usize) -> Result<Self> {
        Self::new(kind, vec![0.0; dim], vec![1.0; dim])
    }

    pub fn with_doubling(mut self, d: u32, c: f64) -> Result<Self> {
        if d == 0 || !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid("doubling parameters must be positive"));
        }
        self.doubling_dim = d;
        self.doubling_const = c;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Diameter of the domain box under this metric.
    pub fn diameter(&self) -> f64 {
        let sides: Vec<f64> = self.domain.lo.iter().zip(&self.domain.hi).map(|(a, b)| b - a).collect();
        match self.kind {
            MetricKind::Euclidean => norm2(&sides),
            _ => sides.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Doubling constant in units where the domain has diameter one.
    pub fn scaled_doubling_const(&self) -> f64 {
        self.doubling_const * self.diameter().powi(self.doubling_dim as i32)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(())
    }

    /// Distance without dimension checks.
    #[inline]
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            MetricKind::Interval => (x[0] - y[0]).abs(),
            MetricKind::Sup => x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            MetricKind::Euclidean => {
                if x.len() == 1 {
                    return (x[0] - y[0]).abs();
                }
                let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                if s > 1e-280 && s.is_finite() {
                    s.sqrt()
                } else {
                    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                    norm2(&d)
                }
            }
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.dist(x, y))
    }

    /// `ρ(x, Z)` with the lowest index among minimizers.
    pub fn set_distance(&self, x: &[f64], z: &[Point]) -> Result<(usize, f64)> {
        self.check_point(x)?;
        if z.is_empty() {
            return Err(Error::Precondition("set_distance over an empty set".into()));
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in z.iter().enumerate() {
            let d = self.dist(x, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }

    pub fn set_diameter(&self, z: &[Point]) -> Result<f64> {
        if z.is_empty() {
            return Err(Error::Precondition("diameter of an empty set".into()));
        }
        let mut best = 0.0f64;
        for i in 0..z.len() {
            for j in i + 1..z.len() {
                best = best.max(self.dist(&z[i], &z[j]));
            }
        }
        Ok(best)
    }

    /// `x ∈ A^r`, i.e. `ρ(x, A) < r`.
    pub fn r_expansion_membership(&self, a: &[Point], r: f64, x: &[f64]) -> Result<bool> {
        Ok(self.set_distance(x, a)?.1 < r)
    }
}

/// Euclidean norm, scaled so it neither overflows nor underflows.
pub fn norm2(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

/// An open ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, space: &MetricSpace, x: &[f64]) -> bool {
        space.dist(&self.center, x) < self.radius
    }

    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.radius
    }
}

/// A metric-entropy count; `exact` is false when the size cap forced a
/// greedy bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EntropyCount {
    pub value: usize,
    pub exact: bool,
}

/// Largest set on which packing and covering numbers are searched exactly.
pub const EXACT_SEARCH_CAP: usize = 24;

/// Maximum size of an `r`-packing (pairwise distance `>= r`) inside `u`.
///
/// Exact in one dimension (sorted greedy) and for at most
/// [`EXACT_SEARCH_CAP`] points (maximum independent set of the conflict
/// graph). Otherwise a greedy net, which is a lower bound.
pub fn packing_number(space: &MetricSpace, u: &[Point], r: f64) -> Result<EntropyCount> {
    check_radius(r)?;
    if u.is_empty() {
        return Ok(EntropyCount { value: 0, exact: true });
    }
    if space.dim() == 1 {
        let mut xs: Vec<f64> = u.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        let mut count = 1;
        let mut last = xs[0];
        for &x in &xs[1..] {
            if x - last >= r {
                count += 1;
                last = x;
            }
        }
        return Ok(EntropyCount { value: count, exact: true });
    }
    if u.len() <= EXACT_SEARCH_CAP {
        let n = u.len();
        let mut conflict = vec![0u32; n];
        for i in 0..n {
            for j in 0..n {
                if i != j && space.dist(&u[i], &u[j]) < r {
                    conflict[i] |= 1 << j;
                }
            }
        }
        let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        return Ok(EntropyCount { value: max_independent(all, &conflict) as usize, exact: true });
    }
    Ok(EntropyCount { value: greedy_net(space, u, r).len(), exact: false })
}

fn max_independent(mask: u32, conflict: &[u32]) -> u32 {
    if mask == 0 {
        return 0;
    }
    let v = mask.trailing_zeros() as usize;
    let rest = mask & !(1 << v);
    // A vertex without remaining conflicts is always taken.
    if conflict[v] & rest == 0 {
        return 1 + max_independent(rest, conflict);
    }
    let with = 1 + max_independent(rest & !conflict[v], conflict);
    let without = max_independent(rest, conflict);
    with.max(without)
}

/// Minimum number of open `r`-balls covering `u`.
///
/// In one dimension centers range over the line and the count is exact. In
/// higher dimensions the exact search restricts centers to `u` itself (the
/// internal covering number, which lies between the covering numbers at `r`
/// and `r/2`); above the cap a greedy net gives an upper bound.
pub fn covering_number(space: &MetricSpace, u: &[Point], r: f64) -> Result<EntropyCount> {
    check_radius(r)?;
    if u.is_empty() {
        return Ok(EntropyCount { value: 0, exact: true });
    }
    if space.dim() == 1 {
        let mut xs: Vec<f64> = u.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        let mut count = 1;
        let mut start = xs[0];
        for &x in &xs[1..] {
            // An open interval of length 2r covers exactly the spans < 2r.
            if x - start >= 2.0 * r {
                count += 1;
                start = x;
            }
        }
        return Ok(EntropyCount { value: count, exact: true });
    }
    if u.len() <= EXACT_SEARCH_CAP {
        let n = u.len();
        let cover: Vec<u32> =
            (0..n).map(|i| (0..n).filter(|&j| space.dist(&u[i], &u[j]) < r).fold(0u32, |m, j| m | 1 << j)).collect();
        let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let mut k = 1;
        while !cover_within(all, &cover, k) {
            k += 1;
        }
        return Ok(EntropyCount { value: k, exact: true });
    }
    Ok(EntropyCount { value: greedy_net(space, u, r).len(), exact: false })
}

fn cover_within(uncovered: u32, cover: &[u32], k: usize) -> bool {
    if uncovered == 0 {
        return true;
    }
    if k == 0 {
        return false;
    }
    let v = uncovered.trailing_zeros();
    cover.iter().filter(|m| *m & (1 << v) != 0).any(|m| cover_within(uncovered & !m, cover, k - 1))
}

/// Indices of a greedy `r`-net of `u` in input order: every point lies within
/// distance `< r` of a net point, and net points are pairwise `>= r` apart.
pub fn greedy_net(space: &MetricSpace, u: &[Point], r: f64) -> Vec<usize> {
    let mut net = Vec::new();
    if u.is_empty() {
        return net;
    }
    if space.dim() > 4 {
        for (i, p) in u.iter().enumerate() {
            if net.iter().all(|&j: &usize| space.dist(&u[j], p) >= r) {
                net.push(i);
            }
        }
        return net;
    }
    let mut grid = HashGrid::new(&space.domain.lo, r);
    for (i, p) in u.iter().enumerate() {
        let mut covered = false;
        grid.for_each_near(p, 1, |j| {
            if !covered && space.dist(&u[j], p) < r {
                covered = true;
            }
        });
        if !covered {
            grid.insert(p, i);
            net.push(i);
        }
    }
    net
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("radius must be positive and finite, got {r}")))
    }
}

/// Exact `floor(log2(x))` for positive finite `x`, read from the bits.
pub fn floor_log2(x: f64) -> i32 {
    assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        let mant = bits & ((1u64 << 52) - 1);
        -1074 + (63 - mant.leading_zeros() as i32)
    } else {
        exp - 1023
    }
}

/// `2^{-l}` computed exactly.
pub fn dyadic(l: i32) -> f64 {
    2f64.powi(-l)
}
