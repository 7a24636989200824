//! Standalone geometry and cover-tree runs behind the CLI.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::audits::fitted_rate_params;
use super::config::ExperimentConfig;
use super::run::checkpoints;
use super::AuditReport;
use crate::cover_tree::{dump_tree, tail_mass_trajectory, CoverTree, TailConfig};
use crate::error::Result;
use crate::geometry::{
    box_dimension_estimate, dyadic_schedule, minkowski_content_estimate, rate_curve_bound, DimensionEstimate,
    MinkowskiEstimate, RateParams,
};
use crate::rng::{derive_seed, stream_id, trial_rng, Purpose};

#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub bound: f64,
    pub r_star: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometryReport {
    pub label: String,
    pub dimension: Option<DimensionEstimate>,
    pub content: Option<MinkowskiEstimate>,
    pub rate: Option<RateParams>,
    pub rate_curve: Vec<RatePoint>,
    pub notes: Vec<String>,
}

/// Boundary dimension, content, fitted rate constants, and the rate bound
/// at the checkpoints of the configured horizon. Writes `geometry.json`
/// and `geometry_curves.csv`.
pub fn run_geometry(cfg: &ExperimentConfig, dir: &Path) -> Result<GeometryReport> {
    let ctx = cfg.validate()?;
    let mut notes = Vec::new();
    let mut rng = trial_rng(cfg.seed, 0, Purpose::Geometry);
    let schedule = dyadic_schedule(&ctx.space, 2, 9);
    let (dimension, content) = match ctx.eta.boundary_sample(4000, &mut rng) {
        Some(b) => {
            let seed = derive_seed(cfg.seed, &[stream_id(1, Purpose::Geometry)]);
            (
                Some(box_dimension_estimate(&ctx.space, &b, &schedule)?),
                Some(minkowski_content_estimate(&ctx.measure, &b, &schedule, cfg.ml_samples, seed)?),
            )
        }
        None => {
            notes.push(format!("{} has no boundary sampler", ctx.eta.name()));
            (None, None)
        }
    };
    let rate = match fitted_rate_params(cfg, &ctx)? {
        Ok(p) => Some(p),
        Err(why) => {
            notes.push(format!("rate bound not evaluated: {why}"));
            None
        }
    };
    let rate_curve = rate
        .as_ref()
        .map(|p| {
            checkpoints(cfg.horizon)
                .into_iter()
                .map(|n| {
                    let b = rate_curve_bound(n as u64, p);
                    RatePoint { n, bound: b.value, r_star: b.r_star }
                })
                .collect()
        })
        .unwrap_or_default();
    let rep = GeometryReport { label: ctx.eta.name().to_string(), dimension, content, rate, rate_curve, notes };
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&rep)?;
    text.push('\n');
    fs::write(dir.join("geometry.json"), text)?;
    let mut w = csv::Writer::from_path(dir.join("geometry_curves.csv"))?;
    w.write_record(["r", "covering_count", "tube_mass", "content_ratio"])?;
    for (i, r) in schedule.iter().enumerate() {
        let count = rep
            .dimension
            .as_ref()
            .and_then(|d| d.counts.iter().find(|c| c.0 == *r))
            .map(|c| c.1.to_string())
            .unwrap_or_default();
        let (mass, ratio) = rep
            .content
            .as_ref()
            .and_then(|c| c.curve.get(i))
            .map(|c| (format!("{:?}", c.mass), format!("{:?}", c.ratio)))
            .unwrap_or_default();
        w.write_record([format!("{r:?}"), count, mass, ratio])?;
    }
    w.flush()?;
    Ok(rep)
}

/// Builds a cover tree from the first `horizon` instances of trial 0,
/// writes `covertree.txt`, and checks every prefix's tail mass against δ.
pub fn run_covertree(cfg: &ExperimentConfig, dir: &Path) -> Result<AuditReport> {
    let ctx = cfg.validate()?;
    let mut gen = ctx.generator(cfg, 0)?;
    let mut tree = CoverTree::new(&ctx.space);
    let mut history = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        let x = gen.next_instance(&history, &[])?;
        tree.insert(x.clone())?;
        history.push(x);
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("covertree.txt"), dump_tree(&tree))?;
    let space = &ctx.space;
    let tcfg = TailConfig::new(cfg.delta, space.scaled_doubling_const(), space.doubling_dim as f64)?;
    let seed = derive_seed(cfg.seed, &[stream_id(0, Purpose::Measure)]);
    let traj = tail_mass_trajectory(&tree, &tcfg, &ctx.measure, cfg.tail_samples, seed)?;
    let exact = space.dim() == 1;
    let mut worst = (0.0f64, 0.0f64);
    let mut witnesses = Vec::new();
    for (n, m) in traj.iter().enumerate() {
        let slack = if exact { 0.0 } else { 3.0 * m.stderr };
        if m.value > worst.0 {
            worst = (m.value, slack);
        }
        if m.value - slack >= cfg.delta {
            witnesses.push(format!("prefix {}: tail mass {} >= δ", n + 1, m.value));
        }
    }
    witnesses.truncate(20);
    Ok(AuditReport::checked("delta_tail", worst.0, cfg.delta, worst.1, witnesses))
}
