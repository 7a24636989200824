//! Empirical check of `Pr(X_n ∈ A | past) <= ε(ν(A))`.
//!
//! The conditional probability at each round is estimated by forking the
//! generator and drawing continuations from the same past.

use serde::Serialize;

use super::{DominationRate, ProcessGenerator};
use crate::error::{Error, Result};
use crate::learner::{Backend, LearnerState};
use crate::metric::{BoxRegion, Point};

/// Chooses a region from the round and past instances.
pub type SetRule = Box<dyn Fn(usize, &[Point]) -> BoxRegion + Send + Sync>;

/// A test set, possibly chosen from the round and past instances.
pub enum TestSet {
    Fixed(BoxRegion),
    Predictable(SetRule),
}

impl TestSet {
    fn at(&self, n: usize, history: &[Point]) -> BoxRegion {
        match self {
            TestSet::Fixed(b) => b.clone(),
            TestSet::Predictable(f) => f(n, history),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SmoothnessParams {
    pub horizon: usize,
    pub trials: usize,
    pub continuations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SetAudit {
    pub max_rate: f64,
    pub mean_rate: f64,
    pub max_excess: f64,
    pub worst_trial: usize,
    pub worst_round: usize,
    pub mass_at_worst: f64,
    pub bound_at_worst: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    pub sets: Vec<SetAudit>,
    /// Normal quantile used for the binomial slack, Bonferroni-corrected
    /// over every (trial, round, set) test.
    pub z: f64,
    pub pass: bool,
}

pub fn smoothness_audit(
    gen: &ProcessGenerator,
    rate: DominationRate,
    sets: &[TestSet],
    params: SmoothnessParams,
) -> Result<SmoothnessReport> {
    if params.horizon == 0 || params.trials == 0 || params.continuations == 0 || sets.is_empty() {
        return Err(Error::invalid("smoothness audit needs positive horizon, trials, continuations and sets"));
    }
    let tests = (params.horizon * params.trials * sets.len()) as f64;
    let z = (2.0 * (2.0 * tests / 0.01).ln()).sqrt();
    let m = params.continuations as f64;
    let mut audits: Vec<SetAudit> = sets
        .iter()
        .map(|_| SetAudit {
            max_rate: 0.0,
            mean_rate: 0.0,
            max_excess: f64::NEG_INFINITY,
            worst_trial: 0,
            worst_round: 0,
            mass_at_worst: 0.0,
            bound_at_worst: 0.0,
            violated: false,
        })
        .collect();
    let space = gen.measure().space.clone();
    for trial in 0..params.trials {
        let mut g = gen.fork(trial as u64);
        let mut learner = LearnerState::new(&space, Backend::CoverTree);
        let mut history: Vec<Point> = Vec::with_capacity(params.horizon);
        let mut trace = Vec::with_capacity(params.horizon);
        for n in 1..=params.horizon {
            let regions: Vec<BoxRegion> = sets.iter().map(|s| s.at(n, &history)).collect();
            let mut hits = vec![0usize; sets.len()];
            for c in 0..params.continuations {
                let mut h = g.fork(1 + c as u64);
                let x = h.next_instance(&history, &trace)?;
                for (i, reg) in regions.iter().enumerate() {
                    if reg.contains(&x) {
                        hits[i] += 1;
                    }
                }
            }
            for (i, reg) in regions.iter().enumerate() {
                let mass = gen.measure().mass_of_box(reg);
                let bound = rate.eval(mass);
                let p = hits[i] as f64 / m;
                let slack = z * (bound * (1.0 - bound) / m).sqrt();
                let a = &mut audits[i];
                a.mean_rate += p;
                a.max_rate = a.max_rate.max(p);
                let excess = p - bound;
                if excess > a.max_excess {
                    a.max_excess = excess;
                    a.worst_trial = trial;
                    a.worst_round = n;
                    a.mass_at_worst = mass;
                    a.bound_at_worst = bound;
                }
                if p > bound + slack {
                    a.violated = true;
                }
            }
            let x = g.next_instance(&history, &trace)?;
            if let Some(eta) = gen.label_function() {
                trace.push(learner.predict_and_update(x.clone(), eta));
            }
            history.push(x);
        }
    }
    let denom = (params.horizon * params.trials) as f64;
    for a in &mut audits {
        a.mean_rate /= denom;
    }
    let pass = audits.iter().all(|a| !a.violated);
    Ok(SmoothnessReport { sets: audits, z, pass })
}
