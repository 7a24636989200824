use serde::Serialize;

use super::CoverTree;
use crate::error::{Error, Result};
use crate::grid::HashGrid;
use crate::measure::{MassEstimate, ReferenceMeasure};
use crate::metric::{dyadic, Point};
use crate::rng::stream_rng;

/// Tail parameters; `c` and `d` are upper-doubling constants in scaled
/// (unit-diameter) units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailConfig {
    pub delta: f64,
    pub c: f64,
    pub d: f64,
}

impl TailConfig {
    pub fn new(delta: f64, c: f64, d: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) || !(c > 0.0) || !(d > 0.0) {
            return Err(Error::invalid("tail config needs δ in (0,1) and positive c, d"));
        }
        Ok(TailConfig { delta, c, d })
    }

    /// `⌈(1/d) lg(c/δ)⌉`, snapping values within 1e-12 of an integer so
    /// that exact powers of two are not pushed up by rounding.
    pub fn offset(&self) -> i64 {
        let v = (self.c / self.delta).log2() / self.d;
        let r = v.round();
        if (v - r).abs() < 1e-12 {
            r as i64
        } else {
            v.ceil() as i64
        }
    }
}

/// Tail balls `B(a_k, 2^{-T_{k,n}})` of the first `n` nodes, as
/// `(center, original radius)`.
pub fn tail_balls(tree: &CoverTree, n: usize, cfg: &TailConfig) -> Vec<(Point, f64)> {
    (0..n.min(tree.len()))
        .map(|k| {
            let t = tree.tail_rank(k, n, cfg).expect("k < n");
            (tree.node(k).point.clone(), tail_radius(t) * tree.scale())
        })
        .collect()
}

fn tail_radius(t: i64) -> f64 {
    dyadic(t.clamp(-1000, 1000) as i32)
}

/// `ν(A_n)` for the tail set of the first `n` nodes: exact interval
/// arithmetic in one dimension, Monte Carlo otherwise.
pub fn tail_set_mass(
    tree: &CoverTree,
    n: usize,
    cfg: &TailConfig,
    measure: &ReferenceMeasure,
    n_samples: usize,
    seed: u64,
) -> Result<MassEstimate> {
    let n = n.min(tree.len());
    if n == 0 {
        return Ok(MassEstimate::exact(0.0));
    }
    if tree.space().dim() == 1 {
        let iv: Vec<(f64, f64)> = tail_balls(tree, n, cfg).iter().map(|(c, r)| (c[0] - r, c[0] + r)).collect();
        return Ok(MassEstimate::exact(measure.mass_of_interval_union(&iv)?));
    }
    let mut cover = SampleCover::new(measure, n_samples, seed);
    for (c, r) in tail_balls(tree, n, cfg) {
        cover.apply(&c, r, 1);
    }
    Ok(cover.estimate())
}

/// One change to the tail set: ball `node` goes from `old` (if any) to `new`
/// original radius.
struct TailStep {
    node: usize,
    old: Option<f64>,
    new: f64,
}

/// Per prefix, the balls that appear or shrink when node `n-1` arrives.
/// Only the new node and its parent change rank.
fn tail_steps(tree: &CoverTree, cfg: &TailConfig) -> Result<Vec<Vec<TailStep>>> {
    let len = tree.len();
    let mut current: Vec<f64> = Vec::with_capacity(len);
    let mut steps = Vec::with_capacity(len);
    for n in 1..=len {
        let k = n - 1;
        let r = tail_radius(tree.tail_rank(k, n, cfg)?) * tree.scale();
        current.push(r);
        let mut here = vec![TailStep { node: k, old: None, new: r }];
        if let Some(p) = tree.node(k).parent {
            let r_new = tail_radius(tree.tail_rank(p, n, cfg)?) * tree.scale();
            if r_new != current[p] {
                here.push(TailStep { node: p, old: Some(current[p]), new: r_new });
                current[p] = r_new;
            }
        }
        steps.push(here);
    }
    Ok(steps)
}

/// `ν(A_n)` for every prefix `n = 1..=len`, entry `n-1`, updated
/// incrementally as balls appear and shrink. In one dimension the union is
/// kept exactly in a segment tree over all interval endpoints; otherwise
/// one shared sample carries coverage counts.
pub fn tail_mass_trajectory(
    tree: &CoverTree,
    cfg: &TailConfig,
    measure: &ReferenceMeasure,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<MassEstimate>> {
    let steps = tail_steps(tree, cfg)?;
    if tree.space().dim() == 1 {
        let center = |k: usize| tree.node(k).point[0];
        let mut ends: Vec<f64> = Vec::new();
        for s in steps.iter().flatten() {
            let c = center(s.node);
            ends.extend([c - s.new, c + s.new]);
        }
        let mut union = IntervalUnion::new(measure, ends);
        return Ok(steps
            .iter()
            .map(|here| {
                for s in here {
                    let c = center(s.node);
                    if let Some(r) = s.old {
                        union.apply(c - r, c + r, -1);
                    }
                    union.apply(c - s.new, c + s.new, 1);
                }
                MassEstimate::exact(union.mass())
            })
            .collect());
    }
    let mut cover = SampleCover::new(measure, n_samples, seed);
    let mut out = Vec::with_capacity(steps.len());
    for here in &steps {
        for s in here {
            let c = &tree.node(s.node).point;
            if let Some(r) = s.old {
                cover.apply(c, r, -1);
            }
            cover.apply(c, s.new, 1);
        }
        out.push(cover.estimate());
    }
    Ok(out)
}

/// Measure of a union of open intervals under insertions and removals, over
/// a fixed set of endpoints (the classic covered-length segment tree).
struct IntervalUnion {
    ends: Vec<f64>,
    count: Vec<u32>,
    covered: Vec<f64>,
    /// `ν` of the elementary segments under each node.
    full: Vec<f64>,
    leaves: usize,
}

impl IntervalUnion {
    fn new(measure: &ReferenceMeasure, mut ends: Vec<f64>) -> Self {
        ends.sort_by(f64::total_cmp);
        ends.dedup();
        let leaves = ends.len().saturating_sub(1).max(1);
        let mut full = vec![0.0; 4 * leaves];
        let seg: Vec<f64> = (0..leaves)
            .map(|i| match (ends.get(i), ends.get(i + 1)) {
                (Some(&a), Some(&b)) => measure.mass_of_interval_union(&[(a, b)]).unwrap_or(0.0),
                _ => 0.0,
            })
            .collect();
        Self::build(&mut full, &seg, 1, 0, leaves);
        IntervalUnion { ends, count: vec![0; 4 * leaves], covered: vec![0.0; 4 * leaves], full, leaves }
    }

    fn build(full: &mut [f64], seg: &[f64], node: usize, lo: usize, hi: usize) -> f64 {
        full[node] = if hi - lo == 1 {
            seg[lo]
        } else {
            let mid = (lo + hi) / 2;
            Self::build(full, seg, 2 * node, lo, mid) + Self::build(full, seg, 2 * node + 1, mid, hi)
        };
        full[node]
    }

    fn apply(&mut self, a: f64, b: f64, delta: i32) {
        let i = self.ends.partition_point(|&e| e < a);
        let j = self.ends.partition_point(|&e| e < b);
        if i < j {
            self.update(1, 0, self.leaves, i, j, delta);
        }
    }

    fn update(&mut self, node: usize, lo: usize, hi: usize, i: usize, j: usize, delta: i32) {
        if j <= lo || hi <= i {
            return;
        }
        if i <= lo && hi <= j {
            self.count[node] = self.count[node].checked_add_signed(delta).expect("balanced updates");
        } else {
            let mid = (lo + hi) / 2;
            self.update(2 * node, lo, mid, i, j, delta);
            self.update(2 * node + 1, mid, hi, i, j, delta);
        }
        self.covered[node] = if self.count[node] > 0 {
            self.full[node]
        } else if hi - lo == 1 {
            0.0
        } else {
            self.covered[2 * node] + self.covered[2 * node + 1]
        };
    }

    fn mass(&self) -> f64 {
        self.covered[1]
    }
}

/// A fixed ν-sample with per-point coverage counts.
struct SampleCover<'a> {
    measure: &'a ReferenceMeasure,
    points: Vec<Point>,
    grid: HashGrid,
    counts: Vec<u32>,
    covered: usize,
}

impl<'a> SampleCover<'a> {
    fn new(measure: &'a ReferenceMeasure, n: usize, seed: u64) -> Self {
        let n = n.max(1);
        let space = &measure.space;
        let mut rng = stream_rng(seed, 0);
        let points: Vec<Point> = (0..n).map(|_| measure.sample(&mut rng)).collect();
        let dim = space.dim() as f64;
        let cell = space.diameter() * (4.0 / n as f64).powf(1.0 / dim);
        let mut grid = HashGrid::new(&space.domain.lo, cell);
        for (i, p) in points.iter().enumerate() {
            grid.insert(p, i);
        }
        SampleCover { measure, points, grid, counts: vec![0; n], covered: 0 }
    }

    fn apply(&mut self, center: &[f64], radius: f64, delta: i32) {
        let space = &self.measure.space;
        let reach = (radius / self.grid.cell_size()).ceil().max(1.0) as i64;
        let (points, counts, covered) = (&self.points, &mut self.counts, &mut self.covered);
        self.grid.for_each_near(center, reach, |i| {
            if space.dist(&points[i], center) < radius {
                if delta > 0 {
                    if counts[i] == 0 {
                        *covered += 1;
                    }
                    counts[i] += 1;
                } else {
                    counts[i] -= 1;
                    if counts[i] == 0 {
                        *covered -= 1;
                    }
                }
            }
        });
    }

    fn estimate(&self) -> MassEstimate {
        MassEstimate::from_hits(self.covered, self.points.len(), self.measure.total_mass())
    }
}
