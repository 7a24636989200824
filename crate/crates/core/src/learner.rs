//! The online 1-nearest-neighbor rule.
//!
//! Round 1 has an empty memory: the learner abstains and the round counts as
//! a mistake. Afterwards it predicts the stored label of the nearest stored
//! instance (lowest index on ties) and then memorizes the true label.

use serde::{Deserialize, Serialize};

use crate::cover_tree::CoverTree;
use crate::labels::{Label, LabelFunction};
use crate::metric::{MetricSpace, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Brute,
    #[serde(alias = "cover-tree")]
    CoverTree,
}

/// One round of the protocol. `nn_index` is the zero-based memory position
/// of the neighbor, i.e. it refers to round `nn_index + 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub n: usize,
    pub instance: Point,
    pub nn_index: Option<usize>,
    pub nn_distance: Option<f64>,
    /// `None` is the round-1 abstention.
    pub predicted: Option<Label>,
    pub truth: Label,
    pub mistake: bool,
}

#[derive(Clone, Debug)]
enum Index {
    Brute,
    Tree(CoverTree),
}

#[derive(Clone, Debug)]
pub struct LearnerState {
    space: MetricSpace,
    points: Vec<Point>,
    labels: Vec<Label>,
    index: Index,
}

impl LearnerState {
    pub fn new(space: &MetricSpace, backend: Backend) -> Self {
        let index = match backend {
            Backend::Brute => Index::Brute,
            Backend::CoverTree => Index::Tree(CoverTree::new(space)),
        };
        LearnerState { space: space.clone(), points: Vec::new(), labels: Vec::new(), index }
    }

    /// Instances seen so far, in arrival order.
    pub fn memory(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// The round about to be played.
    pub fn round(&self) -> usize {
        self.points.len() + 1
    }

    /// Nearest stored instance: `(memory index, distance)`.
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        match &self.index {
            Index::Brute => {
                let mut best: Option<(usize, f64)> = None;
                for (i, p) in self.points.iter().enumerate() {
                    let d = self.space.dist(p, x);
                    if best.is_none_or(|b| d < b.1) {
                        best = Some((i, d));
                    }
                }
                best
            }
            Index::Tree(t) => t.nearest(x).map(|(node, d)| (t.node(node).ids[0], d)),
        }
    }

    pub fn predict_and_update(&mut self, x: Point, eta: &LabelFunction) -> RoundRecord {
        let truth = eta.label(&x);
        self.predict_and_update_with_label(x, truth)
    }

    pub fn predict_and_update_with_label(&mut self, x: Point, truth: Label) -> RoundRecord {
        let n = self.round();
        let nn = self.nearest(&x);
        let predicted = nn.map(|(i, _)| self.labels[i]);
        if let Index::Tree(t) = &mut self.index {
            t.insert_with_id(x.clone(), n - 1).expect("instance dimension checked by the space");
        }
        self.points.push(x.clone());
        self.labels.push(truth);
        RoundRecord {
            n,
            instance: x,
            nn_index: nn.map(|v| v.0),
            nn_distance: nn.map(|v| v.1),
            predicted,
            truth,
            mistake: predicted != Some(truth),
        }
    }
}

/// Cumulative mistakes over the first `n` rounds divided by `n`.
pub fn mistake_rate(trace: &[RoundRecord], n: usize) -> f64 {
    assert!(n >= 1 && n <= trace.len(), "need 1 <= n <= trace length");
    trace[..n].iter().filter(|r| r.mistake).count() as f64 / n as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct Divergence {
    pub round: usize,
    pub brute: (Option<usize>, Option<f64>),
    pub tree: (Option<usize>, Option<f64>),
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EquivalenceReport {
    pub rounds: usize,
    /// Rounds where the brute-force minimum is attained more than once.
    pub tie_rounds: Vec<usize>,
    pub divergences: Vec<Divergence>,
}

impl EquivalenceReport {
    pub fn pass(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Runs the cover-tree backend on `stream` against a brute-force scan that
/// also counts minimizers. Distances must agree every round; indices must
/// agree whenever the minimizer is unique.
pub fn backend_equivalence_check(space: &MetricSpace, stream: &[Point], eta: &LabelFunction) -> EquivalenceReport {
    let mut tree = LearnerState::new(space, Backend::CoverTree);
    let mut report = EquivalenceReport { rounds: stream.len(), ..Default::default() };
    for (i, x) in stream.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        let mut ties = 0;
        for (j, p) in stream[..i].iter().enumerate() {
            let d = space.dist(p, x);
            match best {
                Some((_, b)) if d > b => {}
                Some((_, b)) if d == b => ties += 1,
                _ => {
                    best = Some((j, d));
                    ties = 1;
                }
            }
        }
        let b = tree.predict_and_update(x.clone(), eta);
        let tie = ties > 1;
        if tie {
            report.tie_rounds.push(i + 1);
        }
        let dist_ok = best.map(|v| v.1.to_bits()) == b.nn_distance.map(f64::to_bits);
        if !dist_ok || (!tie && best.map(|v| v.0) != b.nn_index) {
            report.divergences.push(Divergence {
                round: i + 1,
                brute: (best.map(|v| v.0), best.map(|v| v.1)),
                tree: (b.nn_index, b.nn_distance),
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Threshold;

    fn threshold() -> LabelFunction {
        let s = MetricSpace::interval(-1.0, 1.0).unwrap();
        LabelFunction::Threshold(Threshold::new(&s, 0.0).unwrap())
    }

    #[test]
    fn first_round_abstains_and_counts() {
        let eta = threshold();
        for backend in [Backend::Brute, Backend::CoverTree] {
            let mut l = LearnerState::new(eta.space(), backend);
            let r = l.predict_and_update(Point::scalar(-1.0 / 3.0), &eta);
            assert_eq!((r.predicted, r.nn_index, r.mistake), (None, None, true));
            let r = l.predict_and_update(Point::scalar(1.0 / 9.0), &eta);
            assert_eq!((r.predicted, r.truth, r.mistake, r.nn_index), (Some(0), 1, true, Some(0)));
            let r = l.predict_and_update(Point::scalar(1.0 / 9.0), &eta);
            assert_eq!((r.nn_distance, r.predicted, r.mistake), (Some(0.0), Some(1), false));
            assert_eq!(l.memory().len(), 3);
        }
    }

    #[test]
    fn mistake_rates() {
        let eta = threshold();
        let mut l = LearnerState::new(eta.space(), Backend::Brute);
        let trace: Vec<_> = (0..4).map(|_| l.predict_and_update(Point::scalar(0.5), &eta)).collect();
        assert_eq!(mistake_rate(&trace, 4), 0.25);
        assert_eq!(mistake_rate(&trace[1..], 3), 0.0);
    }

    #[test]
    fn duplicate_stream_reports_ties() {
        let eta = threshold();
        let stream: Vec<Point> = [0.5, 0.5, 0.5, -0.5].iter().map(|&x| Point::scalar(x)).collect();
        let r = backend_equivalence_check(eta.space(), &stream, &eta);
        assert!(r.pass());
        assert_eq!(r.tie_rounds, vec![3, 4]);
    }
}
