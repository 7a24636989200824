//! Post-run audits. Every audit works from stored traces alone: the
//! indicated cover tree and the separated-event log are rebuilt by replaying
//! the instance stream.

use rayon::prelude::*;

use super::config::{Context, ExperimentConfig};
use super::run::{charged_keys, TrialTrace};
use super::AuditReport;
use crate::cover_tree::{
    decomposition_check_with_nn, packing_bound_audit, tail_mass_trajectory, ChargedRegion, CoverTree, Decomposition,
    EventKey, SeparatedEventLog, TailConfig,
};
use crate::error::Result;
use crate::geometry::{
    box_dimension_estimate, dyadic_schedule, fit_rate_constants, minkowski_content_estimate, rate_curve_bound,
    RateParams,
};
use crate::labels::{ml_covering_number_estimate, MlCoverParams};
use crate::learner::{Backend, LearnerState};
use crate::processes::DominationRate;
use crate::rng::{derive_seed, stream_id, Purpose};

/// Runs the configured audits in the configured order.
pub fn audit_suite(traces: &[TrialTrace], cfg: &ExperimentConfig) -> Result<Vec<AuditReport>> {
    let ctx = cfg.validate()?;
    let needs_replay = cfg
        .audits
        .iter()
        .any(|a| matches!(a.as_str(), "packing" | "delta_tail" | "decomposition" | "influence" | "nn_ergodic"));
    let replays =
        if needs_replay { Some(traces.par_iter().map(|t| replay(t, &ctx)).collect::<Result<Vec<_>>>()?) } else { None };
    let replays = replays.as_deref().unwrap_or(&[]);
    let mut out = Vec::with_capacity(cfg.audits.len());
    for name in &cfg.audits {
        let rep = if traces.iter().all(|t| t.rows.is_empty()) {
            AuditReport::skipped(name, "no trace rows")
        } else {
            match name.as_str() {
                "mlp" => mlp_audit(traces, cfg, &ctx)?,
                "packing" => packing_audit(replays, &ctx),
                "delta_tail" => delta_tail_audit(replays, cfg, &ctx)?,
                "decomposition" => decomposition_audit(replays),
                "influence" => influence_audit(replays, cfg, &ctx),
                "nn_ergodic" => ergodic_audit(replays, cfg, &ctx),
                "rate_bound" => rate_bound_audit(traces, cfg, &ctx)?,
                _ => unreachable!("names are validated"),
            }
        };
        out.push(rep);
    }
    Ok(out)
}

struct Replay {
    trial: usize,
    rounds: usize,
    tree: CoverTree,
    log: SeparatedEventLog,
    defects: Vec<String>,
    verified: usize,
    /// Rounds whose nearest neighbor is an indicated instance.
    nn_indicated: usize,
    /// Rounds whose nearest neighbor lies in the indicator set.
    nn_in_set: usize,
    indicated: usize,
}

fn replay(trace: &TrialTrace, ctx: &Context) -> Result<Replay> {
    let mut learner = LearnerState::new(&ctx.space, Backend::CoverTree);
    let mut tree = CoverTree::new(&ctx.space);
    let mut log = SeparatedEventLog::default();
    let mut flags: Vec<bool> = Vec::with_capacity(trace.rows.len());
    let mut defects = Vec::new();
    let (mut verified, mut nn_indicated, mut nn_in_set) = (0, 0, 0);
    let t = trace.trial;
    for row in &trace.rows {
        let truth = ctx.eta.label(&row.instance);
        if truth != row.truth {
            defects.push(format!("trial {t} round {}: stored label {} but η gives {truth}", row.n, row.truth));
        }
        let rec = learner.predict_and_update_with_label(row.instance.clone(), row.truth);
        if rec.nn_distance != row.nn_distance || rec.nn_index != row.nn_index || rec.mistake != row.mistake {
            defects.push(format!("trial {t} round {}: stored neighbor disagrees with exact replay", row.n));
        }
        let keys = charged_keys(&tree, &flags, &rec)?;
        if keys != row.sep_event_keys {
            defects.push(format!(
                "trial {t} round {}: stored keys {:?} differ from replayed {:?}",
                row.n,
                row.sep_event_keys.iter().map(EventKey::to_string).collect::<Vec<_>>(),
                keys.iter().map(EventKey::to_string).collect::<Vec<_>>()
            ));
        }
        if let (Some(j), Some(d)) = (rec.nn_index, rec.nn_distance) {
            if ctx.indicator.contains(&learner.memory()[j]) {
                nn_in_set += 1;
            }
            if flags[j] {
                nn_indicated += 1;
                match decomposition_check_with_nn(&tree, &row.instance, d)? {
                    Decomposition::Verified(b) => {
                        verified += 1;
                        let key = EventKey { center: b.center, level: b.level };
                        log.charge(key, ChargedRegion::from_ball(&tree, &b), row.n, row.instance.clone());
                    }
                    Decomposition::Defect { reason, .. } => {
                        defects.push(format!("trial {t} round {}: {reason}", row.n));
                    }
                    Decomposition::Skipped(_) => {}
                }
            }
        }
        let flag = ctx.indicator.contains(&row.instance);
        if flag != row.indicator {
            defects.push(format!("trial {t} round {}: stored indicator flag disagrees with the set", row.n));
        }
        if flag {
            tree.insert(row.instance.clone())?;
        }
        flags.push(flag);
    }
    let indicated = flags.iter().filter(|&&f| f).count();
    Ok(Replay { trial: t, rounds: trace.rows.len(), tree, log, defects, verified, nn_indicated, nn_in_set, indicated })
}

fn mlp_cover_params(cfg: &ExperimentConfig) -> MlCoverParams {
    MlCoverParams {
        samples: cfg.ml_samples,
        budget: cfg.ml_samples,
        seed: derive_seed(cfg.seed, &[stream_id(0, Purpose::Geometry)]),
        ..Default::default()
    }
}

/// At most one mistake inside each certified mutually-labeling ball.
fn mlp_audit(traces: &[TrialTrace], cfg: &ExperimentConfig, ctx: &Context) -> Result<AuditReport> {
    let r = cfg.mlp_radius.unwrap_or(ctx.space.diameter() / 64.0);
    let cover = ml_covering_number_estimate(&ctx.eta, &ctx.measure, r, &mlp_cover_params(cfg))?;
    let space = &ctx.space;
    let per_trial: Vec<(usize, Vec<String>)> = traces
        .par_iter()
        .map(|t| {
            let mut counts = vec![0usize; cover.balls.len()];
            let mut first = vec![0usize; cover.balls.len()];
            let mut witnesses = Vec::new();
            for row in t.rows.iter().filter(|r| r.mistake) {
                for (i, b) in cover.balls.iter().enumerate() {
                    if b.contains(space, &row.instance) {
                        counts[i] += 1;
                        if counts[i] == 1 {
                            first[i] = row.n;
                        } else {
                            witnesses.push(format!(
                                "trial {} ball {i} (radius {}): mistakes at rounds {} and {}",
                                t.trial, b.radius, first[i], row.n
                            ));
                        }
                    }
                }
            }
            (counts.into_iter().max().unwrap_or(0), witnesses)
        })
        .collect();
    let worst = per_trial.iter().map(|p| p.0).max().unwrap_or(0);
    let witnesses: Vec<String> = per_trial.into_iter().flat_map(|p| p.1).take(20).collect();
    Ok(AuditReport::checked("mlp", worst as f64, 1.0, 0.0, witnesses))
}

fn packing_audit(replays: &[Replay], ctx: &Context) -> AuditReport {
    let audits: Vec<_> = replays.par_iter().map(|r| (r.trial, packing_bound_audit(&r.log, &ctx.space))).collect();
    if audits.iter().all(|(_, a)| a.events == 0) {
        return AuditReport::skipped("packing", "no separated events were charged");
    }
    let worst = audits.iter().map(|(_, a)| a.worst_ratio).fold(0.0, f64::max);
    let mut witnesses = Vec::new();
    for (t, a) in &audits {
        for v in &a.violations {
            witnesses.push(format!("trial {t} key {}: {} (rounds {:?})", v.key, v.reason, v.witnesses));
        }
    }
    let mut rep = AuditReport::checked("packing", worst, 1.0, 0.0, witnesses);
    rep.pass = audits.iter().all(|(_, a)| a.pass());
    rep
}

fn delta_tail_audit(replays: &[Replay], cfg: &ExperimentConfig, ctx: &Context) -> Result<AuditReport> {
    let space = &ctx.space;
    let tcfg = TailConfig::new(cfg.delta, space.scaled_doubling_const(), space.doubling_dim as f64)?;
    let exact = space.dim() == 1;
    let results = replays
        .par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &[stream_id(r.trial as u64, Purpose::Measure)]);
            let traj = tail_mass_trajectory(&r.tree, &tcfg, &ctx.measure, cfg.tail_samples, seed)?;
            let mut worst = (0.0f64, 0.0f64, 0usize);
            let mut bad = Vec::new();
            for (n, m) in traj.iter().enumerate() {
                let slack = if exact { 0.0 } else { 3.0 * m.stderr };
                if m.value > worst.0 {
                    worst = (m.value, slack, n + 1);
                }
                if m.value - slack >= cfg.delta {
                    bad.push(format!("trial {} prefix {}: tail mass {} >= δ", r.trial, n + 1, m.value));
                }
            }
            Ok((worst, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = results.iter().map(|r| r.0).fold((0.0, 0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let witnesses: Vec<String> = results.into_iter().flat_map(|r| r.1).take(20).collect();
    Ok(AuditReport::checked("delta_tail", worst.0, cfg.delta, worst.1, witnesses))
}

fn decomposition_audit(replays: &[Replay]) -> AuditReport {
    let verified: usize = replays.iter().map(|r| r.verified).sum();
    let defects: Vec<String> = replays.iter().flat_map(|r| r.defects.iter().cloned()).collect();
    if verified == 0 && defects.is_empty() {
        return AuditReport::skipped("decomposition", "no round had an indicated nearest neighbor");
    }
    let n = defects.len();
    AuditReport::checked("decomposition", n as f64, 0.0, 0.0, defects.into_iter().take(20).collect())
}

/// `c1 = 2^{2d}(3 + (1/d) lg c)` and `c2 = 2^{2d}/d`, with `c` in
/// unit-diameter units.
pub fn influence_constants(ctx: &Context) -> (f64, f64) {
    let d = ctx.space.doubling_dim as f64;
    let c = ctx.space.scaled_doubling_const();
    let k = 2f64.powf(2.0 * d);
    (k * (3.0 + c.log2() / d), k / d)
}

fn dominated_rate(ctx: &Context, cfg: &ExperimentConfig) -> std::result::Result<DominationRate, String> {
    ctx.generator(cfg, 0)
        .ok()
        .and_then(|g| g.rate())
        .ok_or_else(|| format!("process {} is not uniformly dominated", ctx.class.name()))
}

fn influence_audit(replays: &[Replay], cfg: &ExperimentConfig, ctx: &Context) -> AuditReport {
    let rate = match dominated_rate(ctx, cfg) {
        Ok(r) => r,
        Err(why) => return AuditReport::skipped("influence", &why),
    };
    let (c1, c2) = influence_constants(ctx);
    let factor = c1 + c2 * (1.0 / cfg.delta).log2();
    let worst = replays
        .iter()
        .map(|r| {
            let n = r.rounds as f64;
            let slack = 5.0 / n.sqrt();
            let gamma = r.indicated as f64 / n;
            let observed = r.nn_indicated as f64 / n;
            (r.trial, observed, gamma * factor + rate.eval(cfg.delta) + slack, slack)
        })
        .max_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)))
        .expect("at least one trial");
    let witnesses = if worst.1 > worst.2 {
        vec![format!("trial {}: NN-indicated rate {} exceeds {}", worst.0, worst.1, worst.2)]
    } else {
        Vec::new()
    };
    AuditReport::checked("influence", worst.1, worst.2 - worst.3, worst.3, witnesses)
}

fn ergodic_audit(replays: &[Replay], cfg: &ExperimentConfig, ctx: &Context) -> AuditReport {
    let rate = match dominated_rate(ctx, cfg) {
        Ok(r) => r,
        Err(why) => return AuditReport::skipped("nn_ergodic", &why),
    };
    if !ctx.indicator_configured {
        return AuditReport::skipped("nn_ergodic", "no indicator set configured");
    }
    let (c1, c2) = influence_constants(ctx);
    let mass = ctx.measure.mass_of_box(&ctx.indicator);
    let base = (c1 + c2 * (1.0 / cfg.delta).log2()) * rate.eval(mass) + rate.eval(cfg.delta);
    let worst = replays
        .iter()
        .map(|r| {
            let n = r.rounds as f64;
            (r.trial, r.nn_in_set as f64 / n, 5.0 / n.sqrt())
        })
        .max_by(|a, b| (a.1 - a.2).total_cmp(&(b.1 - b.2)))
        .expect("at least one trial");
    let witnesses = if worst.1 > base + worst.2 {
        vec![format!("trial {}: nearest neighbors fell in A at rate {}", worst.0, worst.1)]
    } else {
        Vec::new()
    };
    AuditReport::checked("nn_ergodic", worst.1, base, worst.2, witnesses)
}

/// Inputs of the rate bound fitted from the label function's geometry.
pub fn fitted_rate_params(cfg: &ExperimentConfig, ctx: &Context) -> Result<std::result::Result<RateParams, String>> {
    let rate = match dominated_rate(ctx, cfg) {
        Ok(r) => r,
        Err(why) => return Ok(Err(why)),
    };
    let mut rng = crate::rng::trial_rng(cfg.seed, 0, Purpose::Geometry);
    let Some(boundary) = ctx.eta.boundary_sample(4000, &mut rng) else {
        return Ok(Err(format!("{} has no boundary sampler", ctx.eta.name())));
    };
    let schedule = dyadic_schedule(&ctx.space, 2, 9);
    let b = box_dimension_estimate(&ctx.space, &boundary, &schedule)?.slope.max(0.0);
    let seed = derive_seed(cfg.seed, &[stream_id(1, Purpose::Geometry)]);
    let m = minkowski_content_estimate(&ctx.measure, &boundary, &schedule, cfg.ml_samples, seed)?.content;
    let fit =
        fit_rate_constants(&ctx.eta, &ctx.measure, m, b, cfg.rate_c1, cfg.rate_c2, &schedule, &mlp_cover_params(cfg))?;
    Ok(Ok(RateParams {
        rate,
        m,
        b,
        c1: cfg.rate_c1,
        c2: cfg.rate_c2,
        big_c: fit.big_c,
        r0: fit.r0,
        p: cfg.p,
        schedule,
    }))
}

/// Cumulative mistakes under the fitted bound at every checkpoint. Observed
/// is the fraction of trials breaking it somewhere, allowed up to `p`.
fn rate_bound_audit(traces: &[TrialTrace], cfg: &ExperimentConfig, ctx: &Context) -> Result<AuditReport> {
    let params = match fitted_rate_params(cfg, ctx)? {
        Ok(p) => p,
        Err(why) => return Ok(AuditReport::skipped("rate_bound", &why)),
    };
    let mut failing = Vec::new();
    for t in traces {
        for c in t.checkpoints() {
            let bound = rate_curve_bound(c.n as u64, &params).value;
            if c.mistakes as f64 > bound {
                failing.push(format!("trial {} N={}: {} mistakes > bound {bound}", t.trial, c.n, c.mistakes));
                break;
            }
        }
    }
    let frac = failing.len() as f64 / traces.len() as f64;
    let mut rep = AuditReport::checked("rate_bound", frac, cfg.p, 0.0, Vec::new());
    if !rep.pass {
        rep.witnesses.extend(failing);
    }
    Ok(rep)
}
