use rayon::prelude::*;
use serde::Serialize;

use super::audits::audit_suite;
use super::config::{Context, ExperimentConfig};
use super::AuditReport;
use crate::cover_tree::{decomposition_check_with_nn, CoverTree, Decomposition, EventKey};
use crate::error::Result;
use crate::labels::Label;
use crate::learner::{LearnerState, RoundRecord};
use crate::metric::Point;

/// One row of a trial trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub instance: Point,
    pub nn_index: Option<usize>,
    pub nn_distance: Option<f64>,
    pub predicted: Option<Label>,
    pub truth: Label,
    pub mistake: bool,
    pub cum_mistakes: usize,
    pub rate: f64,
    /// Separated events charged this round, keyed by cover-tree node and
    /// level in the tree of indicated instances.
    pub sep_event_keys: Vec<EventKey>,
    pub indicator: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    pub trial: usize,
    pub rows: Vec<TraceRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n: usize,
    pub mistakes: usize,
    pub rate: f64,
}

impl TrialTrace {
    pub fn mistakes_at(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            self.rows[n - 1].cum_mistakes
        }
    }

    pub fn checkpoints(&self) -> Vec<Checkpoint> {
        checkpoints(self.rows.len())
            .into_iter()
            .map(|n| Checkpoint { n, mistakes: self.mistakes_at(n), rate: self.rows[n - 1].rate })
            .collect()
    }
}

/// Powers of ten up to `horizon`, then `horizon` itself.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 1usize;
    while n <= horizon {
        out.push(n);
        match n.checked_mul(10) {
            Some(m) => n = m,
            None => break,
        }
    }
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

/// Median and mean mistake rate across trials at one checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub median_rate: f64,
    pub mean_rate: f64,
    pub min_rate: f64,
    pub max_rate: f64,
}

pub fn rate_curve(traces: &[TrialTrace]) -> Vec<CurvePoint> {
    let horizon = traces.iter().map(|t| t.rows.len()).min().unwrap_or(0);
    checkpoints(horizon)
        .into_iter()
        .map(|n| {
            let mut rates: Vec<f64> = traces.iter().map(|t| t.rows[n - 1].rate).collect();
            rates.sort_by(f64::total_cmp);
            let k = rates.len();
            let median = if k % 2 == 1 { rates[k / 2] } else { 0.5 * (rates[k / 2 - 1] + rates[k / 2]) };
            CurvePoint {
                n,
                median_rate: median,
                mean_rate: rates.iter().sum::<f64>() / k as f64,
                min_rate: rates[0],
                max_rate: rates[k - 1],
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub traces: Vec<TrialTrace>,
    pub curve: Vec<CurvePoint>,
    pub reports: Vec<AuditReport>,
}

/// Runs every trial, then the configured audits.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let ctx = cfg.validate()?;
    let traces = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &ctx, t)).collect::<Result<Vec<_>>>()?;
    let curve = rate_curve(&traces);
    let reports = audit_suite(&traces, cfg)?;
    Ok(Experiment { config: cfg.clone(), traces, curve, reports })
}

/// Plays one trial and records the charged separated events.
pub fn run_trial(cfg: &ExperimentConfig, ctx: &Context, t: usize) -> Result<TrialTrace> {
    let mut gen = ctx.generator(cfg, t as u64)?;
    let mut learner = LearnerState::new(&ctx.space, cfg.backend);
    let mut tree = CoverTree::new(&ctx.space);
    let mut indicated: Vec<bool> = Vec::with_capacity(cfg.horizon);
    let mut records: Vec<RoundRecord> = Vec::with_capacity(cfg.horizon);
    let mut keys: Vec<Vec<EventKey>> = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        let x = gen.next_instance(learner.memory(), &records)?;
        let rec = learner.predict_and_update(x.clone(), &ctx.eta);
        keys.push(charged_keys(&tree, &indicated, &rec)?);
        let flag = ctx.indicator.contains(&x);
        if flag {
            tree.insert(x)?;
        }
        indicated.push(flag);
        records.push(rec);
    }
    let mut cum = 0;
    let rows = records
        .into_iter()
        .zip(keys)
        .zip(indicated)
        .map(|((r, k), flag)| {
            cum += r.mistake as usize;
            TraceRow {
                n: r.n,
                rate: cum as f64 / r.n as f64,
                instance: r.instance,
                nn_index: r.nn_index,
                nn_distance: r.nn_distance,
                predicted: r.predicted,
                truth: r.truth,
                mistake: r.mistake,
                cum_mistakes: cum,
                sep_event_keys: k,
                indicator: flag,
            }
        })
        .collect();
    Ok(TrialTrace { trial: t, rows })
}

/// The key charged when the round's nearest neighbor is indicated.
pub(crate) fn charged_keys(tree: &CoverTree, indicated: &[bool], rec: &RoundRecord) -> Result<Vec<EventKey>> {
    let (Some(j), Some(d)) = (rec.nn_index, rec.nn_distance) else {
        return Ok(Vec::new());
    };
    if !indicated[j] {
        return Ok(Vec::new());
    }
    Ok(match decomposition_check_with_nn(tree, &rec.instance, d)? {
        Decomposition::Skipped(_) => Vec::new(),
        Decomposition::Verified(b) | Decomposition::Defect { ball: b, .. } => {
            vec![EventKey { center: b.center, level: b.level }]
        }
    })
}
