use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{CoverTree, NeighborBall};
use crate::error::{Error, Result};
use crate::metric::{packing_number, MetricKind, MetricSpace, Point, EXACT_SEARCH_CAP};

/// Outcome of a decomposition check.
#[derive(Clone, Debug, Serialize)]
pub enum Decomposition {
    Skipped(String),
    Verified(NeighborBall),
    Defect { ball: NeighborBall, reason: String },
}

/// Checks that `x`, whose nearest neighbor in `history` is indicated, is
/// `r/2`-separated from history and lies in `B(a, 2r)` for its cover-tree
/// neighbor `B(a, r)`. The tree must hold exactly the indicated history.
pub fn decomposition_check(
    tree: &CoverTree,
    x: &[f64],
    history: &[Point],
    indicated: &[bool],
) -> Result<Decomposition> {
    if history.is_empty() {
        return Ok(Decomposition::Skipped("empty history".into()));
    }
    if indicated.len() != history.len() {
        return Err(Error::invalid("indicator flags must match the history"));
    }
    let (j, d) = tree.space().set_distance(x, history)?;
    if !indicated[j] {
        return Ok(Decomposition::Skipped(format!("nearest neighbor {j} is not indicated")));
    }
    decomposition_check_with_nn(tree, x, d)
}

/// As [`decomposition_check`], given the original-unit nearest-neighbor
/// distance of `x` in the history (which must be attained at a tree node).
pub fn decomposition_check_with_nn(tree: &CoverTree, x: &[f64], nn_distance: f64) -> Result<Decomposition> {
    if nn_distance == 0.0 {
        return Ok(Decomposition::Skipped("query coincides with a stored instance".into()));
    }
    let ball = tree.cover_tree_neighbor(x)?;
    let sep = nn_distance / tree.scale();
    let to_center = tree.scaled_dist(&tree.node(ball.center).point, x);
    let r = ball.radius;
    let reason = if sep < r / 2.0 {
        Some(format!("separation {sep} < r/2 = {}", r / 2.0))
    } else if to_center >= 2.0 * r {
        Some(format!("distance to center {to_center} >= 2r = {}", 2.0 * r))
    } else if sep >= r {
        Some(format!("separation {sep} >= r = {r}"))
    } else {
        None
    };
    Ok(match reason {
        Some(reason) => Decomposition::Defect { ball, reason },
        None => Decomposition::Verified(ball),
    })
}

/// Key of a charged event: the neighbor ball's center node and level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EventKey {
    pub center: usize,
    pub level: u32,
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.center, self.level)
    }
}

impl FromStr for EventKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(':').ok_or_else(|| Error::Parse(format!("bad event key {s:?}")))?;
        Ok(EventKey {
            center: a.parse().map_err(|_| Error::Parse(format!("bad event key {s:?}")))?,
            level: b.parse().map_err(|_| Error::Parse(format!("bad event key {s:?}")))?,
        })
    }
}

/// The region `U` and separation of a key, in original units. A `None`
/// center means the whole domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChargedRegion {
    pub center: Option<Point>,
    pub radius: f64,
    pub separation: f64,
}

impl ChargedRegion {
    /// `2B` and `r/2` for a neighbor ball `B = B(a, r)`.
    pub fn from_ball(tree: &CoverTree, ball: &NeighborBall) -> Self {
        ChargedRegion {
            center: Some(tree.node(ball.center).point.clone()),
            radius: 2.0 * ball.radius_original,
            separation: ball.radius_original / 2.0,
        }
    }

    pub fn contains(&self, space: &MetricSpace, x: &[f64]) -> bool {
        match &self.center {
            Some(c) => space.dist(c, x) < self.radius,
            None => space.domain.contains(x),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SeparatedEventLog {
    pub entries: BTreeMap<EventKey, (ChargedRegion, Vec<(usize, Point)>)>,
}

impl SeparatedEventLog {
    pub fn charge(&mut self, key: EventKey, region: ChargedRegion, round: usize, x: Point) {
        self.entries.entry(key).or_insert_with(|| (region, Vec::new())).1.push((round, x));
    }

    pub fn events(&self) -> usize {
        self.entries.values().map(|e| e.1.len()).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PackingViolation {
    pub key: EventKey,
    pub reason: String,
    pub witnesses: Vec<usize>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PackingAudit {
    pub keys: usize,
    pub events: usize,
    pub exact_checked: usize,
    /// Largest `count / bound` over keys.
    pub worst_ratio: f64,
    pub violations: Vec<PackingViolation>,
}

impl PackingAudit {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// An upper bound on the packing number of `region` at `sep`: half-open
/// grid cells of side `sep` (sup) or `sep/√D` (euclidean) hold at most one
/// packing point each.
pub fn packing_upper_bound(space: &MetricSpace, region: &ChargedRegion, sep: f64) -> f64 {
    let b = match &region.center {
        Some(c) => space.domain.clipped_cube(c, region.radius),
        None => Some(space.domain.clone()),
    };
    let Some(b) = b else { return 0.0 };
    let side = match space.kind {
        MetricKind::Euclidean => sep / (space.dim() as f64).sqrt(),
        _ => sep,
    };
    (0..b.dim()).map(|i| ((b.hi[i] - b.lo[i]) / side).floor() + 1.0).product()
}

/// Per key: every charged point lies in `U`, points are pairwise at least
/// the separation apart, and the count respects the packing bound.
pub fn packing_bound_audit(log: &SeparatedEventLog, space: &MetricSpace) -> PackingAudit {
    let mut audit = PackingAudit { keys: log.entries.len(), events: log.events(), ..Default::default() };
    let mut worst = 0.0f64;
    let mut exact = 0;
    for (key, (region, events)) in &log.entries {
        let mut found = Vec::new();
        let mut fail = |reason: String, witnesses: Vec<usize>| {
            found.push(PackingViolation { key: *key, reason, witnesses });
        };
        for (n, x) in events {
            if !region.contains(space, x) {
                fail(format!("round {n} lies outside the charged region"), vec![*n]);
            }
        }
        for i in 0..events.len() {
            for j in i + 1..events.len() {
                let d = space.dist(&events[i].1, &events[j].1);
                if d < region.separation {
                    fail(
                        format!(
                            "rounds {} and {} are {d} apart, below {}",
                            events[i].0, events[j].0, region.separation
                        ),
                        vec![events[i].0, events[j].0],
                    );
                }
            }
        }
        let pts: Vec<Point> = events.iter().map(|e| e.1.clone()).collect();
        if pts.len() <= EXACT_SEARCH_CAP {
            exact += 1;
            let p = packing_number(space, &pts, region.separation).expect("positive separation");
            if p.value != pts.len() {
                fail(format!("charged set is not a packing: exact packing number {} < {}", p.value, pts.len()), vec![]);
            }
        }
        let bound = packing_upper_bound(space, region, region.separation);
        worst = worst.max(pts.len() as f64 / bound);
        if pts.len() as f64 > bound {
            fail(format!("{} charged rounds exceed the packing bound {bound}", pts.len()), vec![]);
        }
        audit.violations.extend(found);
    }
    audit.worst_ratio = worst;
    audit.exact_checked = exact;
    audit
}
