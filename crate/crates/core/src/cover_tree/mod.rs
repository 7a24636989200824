//! Sequentially constructed cover trees.
//!
//! Distances are rescaled by the domain diameter so the space has unit
//! diameter. Node `k` sits at insertion rank `L_k`: the smallest `ℓ >= 1`
//! such that no existing ball `B(a_j, 2^{-ℓ})` with `ℓ >= L_j` contains it.

mod audit;
mod dump;
mod tail;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

pub use audit::{
    decomposition_check, decomposition_check_with_nn, packing_bound_audit, packing_upper_bound, ChargedRegion,
    Decomposition, EventKey, PackingAudit, PackingViolation, SeparatedEventLog,
};
pub use dump::{dump_tree, parse_tree};
pub use tail::{tail_balls, tail_mass_trajectory, tail_set_mass, TailConfig};

use crate::error::{Error, Result};
use crate::metric::{dyadic, floor_log2, MetricSpace, Point};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverTreeNode {
    pub point: Point,
    pub rank: u32,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Distinct child ranks in order of first appearance.
    pub generation_ranks: Vec<u32>,
    /// Tree size right after each generation appeared.
    pub generation_born: Vec<usize>,
    /// Largest original-unit distance to any descendant.
    pub radius: f64,
    /// External ids mapped to this node; later entries are duplicates.
    pub ids: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Insertion {
    Node { index: usize, rank: u32, parent: Option<usize> },
    Duplicate { of: usize },
}

#[derive(Clone, Debug)]
pub struct CoverTree {
    space: MetricSpace,
    scale: f64,
    nodes: Vec<CoverTreeNode>,
    inserted: usize,
    /// Ids of skipped duplicate insertions.
    pub skipped: Vec<usize>,
}

/// The cover-tree neighbor ball `B(center, 2^{-level})` of a query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborBall {
    pub center: usize,
    pub level: u32,
    /// `2^{-level}` in scaled units.
    pub radius: f64,
    /// The same radius in original units.
    pub radius_original: f64,
    pub nearest: usize,
    /// Scaled distance from the query to the nearest node.
    pub nearest_distance: f64,
}

/// Largest `m` with `2^{-m} > d`, i.e. `-floor(log2 d) - 1`.
fn top_level(d: f64) -> i64 {
    -(floor_log2(d) as i64) - 1
}

impl CoverTree {
    pub fn new(space: &MetricSpace) -> Self {
        CoverTree { space: space.clone(), scale: space.diameter(), nodes: Vec::new(), inserted: 0, skipped: Vec::new() }
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    /// Rescaling factor: original distance = scaled distance × scale.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[CoverTreeNode] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &CoverTreeNode {
        &self.nodes[k]
    }

    pub fn scaled_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        self.space.dist(x, y) / self.scale
    }

    /// Nodes `j` whose own ball `B(a_j, 2^{-L_j})` contains `x`, with scaled
    /// distances, restricted to nodes below `limit`.
    fn covering_nodes(&self, x: &[f64], limit: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if limit == 0 {
            return out;
        }
        let mut stack = vec![(0usize, self.scaled_dist(&self.nodes[0].point, x))];
        while let Some((j, d)) = stack.pop() {
            let node = &self.nodes[j];
            if d < dyadic(node.rank as i32) {
                out.push((j, d));
            }
            let reach = node.radius / self.scale * (1.0 + 1e-12) + 1e-300;
            if d - reach >= dyadic(node.rank as i32 + 1) {
                continue;
            }
            for &c in &node.children {
                if c < limit {
                    stack.push((c, self.scaled_dist(&self.nodes[c].point, x)));
                }
            }
        }
        out
    }

    /// Rank and parent that `x` would receive against the first `limit`
    /// nodes, or `Err(j)` if `x` duplicates node `j`.
    pub fn rank_against_prefix(&self, x: &[f64], limit: usize) -> std::result::Result<(u32, Option<usize>), usize> {
        if limit == 0 {
            return Ok((0, None));
        }
        let mut cov = self.covering_nodes(x, limit);
        if let Some(&(j, _)) = cov.iter().filter(|c| c.1 == 0.0).min_by_key(|c| c.0) {
            return Err(j);
        }
        let mut spans: Vec<(i64, i64)> = cov.iter().map(|&(j, d)| (self.nodes[j].rank as i64, top_level(d))).collect();
        spans.sort();
        let mut level = 1i64;
        for (s, e) in spans {
            if s > level {
                break;
            }
            if e >= level {
                level = e + 1;
            }
        }
        cov.sort_by_key(|c| c.0);
        let target = level - 1;
        let parent = cov
            .iter()
            .find(|&&(j, d)| (self.nodes[j].rank as i64) <= target && target <= top_level(d))
            .map(|c| c.0)
            // Only reachable when ρ(root, x) = 1 exactly: no ball of radius 1 holds x.
            .unwrap_or(0);
        Ok((level as u32, Some(parent)))
    }

    pub fn insert(&mut self, x: Point) -> Result<Insertion> {
        let id = self.inserted;
        self.insert_with_id(x, id)
    }

    pub fn insert_with_id(&mut self, x: Point, id: usize) -> Result<Insertion> {
        self.space.check_point(&x)?;
        self.inserted += 1;
        let n = self.nodes.len();
        let (rank, parent) = match self.rank_against_prefix(&x, n) {
            Ok(v) => v,
            Err(j) => {
                self.nodes[j].ids.push(id);
                self.skipped.push(id);
                return Ok(Insertion::Duplicate { of: j });
            }
        };
        if let Some(p) = parent {
            let pn = &mut self.nodes[p];
            pn.children.push(n);
            if !pn.generation_ranks.contains(&rank) {
                pn.generation_ranks.push(rank);
                pn.generation_born.push(n + 1);
            }
            let mut a = Some(p);
            while let Some(j) = a {
                let d = self.space.dist(&self.nodes[j].point, &x);
                let node = &mut self.nodes[j];
                node.radius = node.radius.max(d);
                a = node.parent;
            }
        }
        self.nodes.push(CoverTreeNode {
            point: x,
            rank,
            parent,
            children: Vec::new(),
            generation_ranks: Vec::new(),
            generation_born: Vec::new(),
            radius: 0.0,
            ids: vec![id],
        });
        Ok(Insertion::Node { index: n, rank, parent })
    }

    /// `G_{k,n}`: generations of node `k` present in the first `n` nodes.
    pub fn generation_count(&self, k: usize, n: usize) -> usize {
        self.nodes[k].generation_born.iter().filter(|&&b| b <= n).count()
    }

    /// `T_{k,n} = L_k + 1 + ⌈(1/d) lg(c/δ)⌉ + G_{k,n}`.
    pub fn tail_rank(&self, k: usize, n: usize, cfg: &TailConfig) -> Result<i64> {
        if k >= n || n > self.nodes.len() {
            return Err(Error::Precondition(format!("node {k} is not in the first {n} nodes")));
        }
        Ok(self.nodes[k].rank as i64 + 1 + cfg.offset() + self.generation_count(k, n) as i64)
    }

    /// Exact nearest node (lowest index on ties) and original distance.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let d0 = self.space.dist(&self.nodes[0].point, q);
        let mut best = (d0, 0usize);
        let mut heap = BinaryHeap::new();
        heap.push(Pending { lb: d0 - self.reach(0, d0), node: 0 });
        while let Some(Pending { lb, node }) = heap.pop() {
            if lb > best.0 {
                break;
            }
            for &c in &self.nodes[node].children {
                let d = self.space.dist(&self.nodes[c].point, q);
                if d < best.0 || (d == best.0 && c < best.1) {
                    best = (d, c);
                }
                if !self.nodes[c].children.is_empty() {
                    let lb = d - self.reach(c, d);
                    if lb <= best.0 {
                        heap.push(Pending { lb, node: c });
                    }
                }
            }
        }
        Some((best.1, best.0))
    }

    fn reach(&self, j: usize, d: f64) -> f64 {
        let r = self.nodes[j].radius;
        r + 1e-12 * (r + d) + 1e-300
    }

    /// The cover-tree neighbor of `x`: nearest node `a` and the unique `ℓ`
    /// with `2^{-ℓ-1} <= ρ(x, A) < 2^{-ℓ}` (clamped at 0). When `ℓ < L_a`
    /// the ball is recentered on the lowest-index node whose cone holds
    /// `B(·, 2^{-ℓ}) ∋ a`, so the ball belongs to the tree and still
    /// contains `x` in its double.
    pub fn cover_tree_neighbor(&self, x: &[f64]) -> Result<NeighborBall> {
        let (a, d_orig) = self.nearest(x).ok_or(Error::EmptySet("cover tree"))?;
        let d = d_orig / self.scale;
        if d == 0.0 {
            return Err(Error::Precondition("query coincides with a tree node".into()));
        }
        let level = top_level(d).max(0) as u32;
        let center = if level >= self.nodes[a].rank {
            a
        } else {
            let mut cov = self.covering_nodes(&self.nodes[a].point, self.nodes.len());
            cov.sort_by_key(|c| c.0);
            cov.iter()
                .find(|&&(j, dj)| self.nodes[j].rank <= level && (level as i64) <= top_level(dj).max(0))
                .map(|c| c.0)
                .unwrap_or(0)
        };
        let radius = dyadic(level as i32);
        Ok(NeighborBall {
            center,
            level,
            radius,
            radius_original: radius * self.scale,
            nearest: a,
            nearest_distance: d,
        })
    }
}

#[derive(PartialEq)]
struct Pending {
    lb: f64,
    node: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.lb.total_cmp(&self.lb).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
