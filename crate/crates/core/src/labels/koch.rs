use rand::Rng as _;

use super::planar::{segment_distance, P2};
use super::{find_witness, Label, MarginQuery};
use crate::error::{Error, Result};
use crate::metric::{MetricSpace, Point};
use crate::rng::Rng;

const MAX_DEPTH: u32 = 8;

/// Label 1 strictly below a depth-`m` Koch polyline spanning the domain
/// horizontally at height `base`, 0 elsewhere.
///
/// Margins are distances to the polyline. Against the limit curve they are
/// off by at most the Hausdorff gap `(√3/6)·L·3^{-m}`, reported as
/// `error_bound`.
#[derive(Clone, Debug)]
pub struct KochCurve {
    pub space: MetricSpace,
    pub depth: u32,
    vertices: Vec<P2>,
    grid_n: usize,
    cell: P2,
    cells: Vec<Vec<u32>>,
    rows: Vec<Vec<u32>>,
    error_bound: f64,
}

impl KochCurve {
    /// `base` is the baseline height as a fraction of the vertical extent.
    pub fn new(space: &MetricSpace, depth: u32, base: f64) -> Result<Self> {
        if space.dim() != 2 {
            return Err(Error::invalid("koch boundary needs a two-dimensional space"));
        }
        if depth > MAX_DEPTH {
            return Err(Error::invalid(format!("koch depth is capped at {MAX_DEPTH}")));
        }
        let d = &space.domain;
        let (w, h) = (d.hi[0] - d.lo[0], d.hi[1] - d.lo[1]);
        let y0 = d.lo[1] + base * h;
        if !(base > 0.0) || y0 + w * 3f64.sqrt() / 6.0 > d.hi[1] {
            return Err(Error::invalid("koch curve must fit strictly inside the domain"));
        }
        let mut vertices = vec![[d.lo[0], y0], [d.hi[0], y0]];
        let (c, s) = (0.5, 3f64.sqrt() / 2.0);
        for _ in 0..depth {
            let mut next = Vec::with_capacity(4 * vertices.len());
            for k in 0..vertices.len() - 1 {
                let (p, q) = (vertices[k], vertices[k + 1]);
                let u = [(q[0] - p[0]) / 3.0, (q[1] - p[1]) / 3.0];
                let a = [p[0] + u[0], p[1] + u[1]];
                let b = [p[0] + 2.0 * u[0], p[1] + 2.0 * u[1]];
                let peak = [a[0] + c * u[0] - s * u[1], a[1] + s * u[0] + c * u[1]];
                next.extend_from_slice(&[p, a, peak, b]);
            }
            next.push(*vertices.last().unwrap());
            vertices = next;
        }
        let nseg = vertices.len() - 1;
        let grid_n = ((nseg as f64).sqrt().ceil() as usize).clamp(8, 256);
        let cell = [w / grid_n as f64, h / grid_n as f64];
        let mut cells = vec![Vec::new(); grid_n * grid_n];
        let mut rows = vec![Vec::new(); grid_n];
        let idx = |v: f64, o: f64, c: f64| (((v - o) / c).floor().max(0.0) as usize).min(grid_n - 1);
        for k in 0..nseg {
            let (p, q) = (vertices[k], vertices[k + 1]);
            let (x0, x1) = (idx(p[0].min(q[0]), d.lo[0], cell[0]), idx(p[0].max(q[0]), d.lo[0], cell[0]));
            let (y0, y1) = (idx(p[1].min(q[1]), d.lo[1], cell[1]), idx(p[1].max(q[1]), d.lo[1], cell[1]));
            for iy in y0..=y1 {
                rows[iy].push(k as u32);
                for ix in x0..=x1 {
                    cells[iy * grid_n + ix].push(k as u32);
                }
            }
        }
        let error_bound = 3f64.sqrt() / 6.0 * w * 3f64.powi(-(depth as i32));
        Ok(KochCurve { space: space.clone(), depth, vertices, grid_n, cell, cells, rows, error_bound })
    }

    pub fn vertices(&self) -> &[P2] {
        &self.vertices
    }

    fn cell_of(&self, v: f64, axis: usize) -> usize {
        let o = self.space.domain.lo[axis];
        (((v - o) / self.cell[axis]).floor().max(0.0) as usize).min(self.grid_n - 1)
    }

    pub fn label(&self, x: &[f64]) -> Label {
        let d = &self.space.domain;
        let p = [x[0], x[1]];
        let mut inside = false;
        let mut edge = |a: P2, b: P2| {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let xi = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < xi {
                    inside = !inside;
                }
            }
        };
        for &k in &self.rows[self.cell_of(p[1], 1)] {
            edge(self.vertices[k as usize], self.vertices[k as usize + 1]);
        }
        let last = *self.vertices.last().unwrap();
        let first = self.vertices[0];
        edge(last, [d.hi[0], d.lo[1]]);
        edge([d.hi[0], d.lo[1]], [d.lo[0], d.lo[1]]);
        edge([d.lo[0], d.lo[1]], first);
        inside as Label
    }

    /// Nearest point of the polyline by expanding rings of grid cells.
    fn nearest_curve_point(&self, x: &[f64]) -> (f64, P2) {
        let p = [x[0], x[1]];
        let (cx, cy) = (self.cell_of(p[0], 0) as i64, self.cell_of(p[1], 1) as i64);
        let n = self.grid_n as i64;
        let step = self.cell[0].min(self.cell[1]);
        let mut best = (f64::INFINITY, p);
        for ring in 0..=n {
            for iy in (cy - ring).max(0)..=(cy + ring).min(n - 1) {
                for ix in (cx - ring).max(0)..=(cx + ring).min(n - 1) {
                    if (iy - cy).abs() != ring && (ix - cx).abs() != ring {
                        continue;
                    }
                    for &k in &self.cells[(iy * n + ix) as usize] {
                        let (a, b) = (self.vertices[k as usize], self.vertices[k as usize + 1]);
                        let cand = segment_distance(self.space.kind, p, a, b);
                        if cand.0 < best.0 {
                            best = cand;
                        }
                    }
                }
            }
            if best.0 <= ring as f64 * step {
                break;
            }
        }
        best
    }

    pub fn margin(&self, x: &[f64]) -> MarginQuery {
        let (value, q) = self.nearest_curve_point(x);
        let dir = [q[0] - x[0], q[1] - x[1]];
        let n = crate::metric::norm2(&dir).max(f64::MIN_POSITIVE);
        let dir = [dir[0] / n, dir[1] / n];
        let witness = find_witness(&self.space, |y| self.label(y), x, value, &q, &dir);
        MarginQuery { value, exact: false, error_bound: self.error_bound, witness }
    }

    pub fn nearest_boundary_point(&self, x: &[f64]) -> Option<Point> {
        Some(Point(self.nearest_curve_point(x).1.to_vec()))
    }

    pub fn boundary_sample(&self, n: usize, rng: &mut Rng) -> Option<Vec<Point>> {
        let nseg = self.vertices.len() - 1;
        Some(
            (0..n)
                .map(|_| {
                    let k = rng.random_range(0..nseg);
                    let t = rng.random::<f64>();
                    let (a, b) = (self.vertices[k], self.vertices[k + 1]);
                    Point(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
                })
                .collect(),
        )
    }
}
