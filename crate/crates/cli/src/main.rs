use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnlab::harness::{
    audit_suite, emit_experiment, parse_reports_csv, parse_reports_json, read_traces_dir, run_covertree,
    run_experiment, run_geometry, write_reports, AuditReport, ExperimentConfig, Format,
};
use nnlab::Error;

/// Online nearest-neighbor experiments and audits.
#[derive(Parser)]
#[command(name = "nnlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials, audits, and write traces and reports.
    Simulate(Common),
    /// Re-run the configured audits on traces stored in the output directory.
    Audit(Common),
    /// Estimate boundary dimension and content and evaluate the rate bound.
    Geometry(Common),
    /// Build a cover tree, dump it, and check its tail masses.
    Covertree(Common),
    /// Re-emit stored reports in another format.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_format, default_value = "json")]
    format: Format,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const DEFAULT_OUT: &str = "nnlab-out";

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((cfg, out))
    }
}

fn print_reports(reports: &[AuditReport]) {
    for r in reports {
        let status = if r.is_skipped() {
            "SKIP"
        } else if r.pass {
            "PASS"
        } else {
            "FAIL"
        };
        let num = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_else(|| "-".into());
        println!("{status} {} observed={} bound={} slack={}", r.audit, num(r.observed), num(r.bound), num(r.slack));
        if !r.pass || r.is_skipped() {
            for w in r.witnesses.iter().take(5) {
                println!("    {w}");
            }
        }
    }
}

fn verdict(reports: &[AuditReport]) -> ExitCode {
    if reports.iter().all(|r| r.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn read_reports(dir: &Path) -> Result<Vec<AuditReport>, Error> {
    let json = dir.join("reports.json");
    if json.exists() {
        return parse_reports_json(&std::fs::read_to_string(json)?);
    }
    parse_reports_csv(&std::fs::read_to_string(dir.join("reports.csv"))?)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate(c) => {
            let (cfg, out) = c.load()?;
            let exp = run_experiment(&cfg)?;
            emit_experiment(&exp, &out, cfg.format)?;
            for p in &exp.curve {
                println!("N={} median_rate={} mean_rate={}", p.n, p.median_rate, p.mean_rate);
            }
            print_reports(&exp.reports);
            Ok(verdict(&exp.reports))
        }
        Command::Audit(c) => {
            let (cfg, out) = c.load()?;
            let traces = read_traces_dir(&out)?;
            if traces.is_empty() {
                return Err(Error::Precondition(format!("no traces found in {}", out.display())));
            }
            let reports = audit_suite(&traces, &cfg)?;
            write_reports(&out, &reports, cfg.format)?;
            print_reports(&reports);
            Ok(verdict(&reports))
        }
        Command::Geometry(c) => {
            let (cfg, out) = c.load()?;
            let rep = run_geometry(&cfg, &out)?;
            if let Some(d) = &rep.dimension {
                println!("box dimension slope {}", d.slope);
            }
            if let Some(m) = &rep.content {
                println!("minkowski content {}", m.content);
            }
            if let Some(p) = rep.rate_curve.last() {
                println!("rate bound at N={}: {}", p.n, p.bound);
            }
            for n in &rep.notes {
                println!("note: {n}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Covertree(c) => {
            let (cfg, out) = c.load()?;
            let rep = run_covertree(&cfg, &out)?;
            write_reports(&out, std::slice::from_ref(&rep), cfg.format)?;
            print_reports(std::slice::from_ref(&rep));
            Ok(verdict(&[rep]))
        }
        Command::Report(r) => {
            let reports = read_reports(&r.out)?;
            write_reports(&r.out, &reports, r.format)?;
            print_reports(&reports);
            Ok(verdict(&reports))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
