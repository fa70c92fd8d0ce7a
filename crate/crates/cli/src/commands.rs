use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use pcaerr::experiment::{sweep_beta_example, Experiment};
use pcaerr::{Error, ExperimentConfig};

use crate::config::parse_config;
use crate::report::{
    calibration_csv, format_number, plan_csv, plan_rows, sweep_csv, to_json, trials_jsonl,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Plan,
    Simulate,
    Calibrate,
    Sweep,
    Verify,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub overrides: Vec<String>,
    pub dump_data: bool,
}

impl Invocation {
    pub fn new(command: Command, config: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            command,
            config: config.into(),
            out: out.into(),
            seed: None,
            trials: None,
            overrides: Vec::new(),
            dump_data: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(Error),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("{0}")]
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::VerificationFailed(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn runtime(e: Error) -> CliError {
    CliError::Runtime(e)
}

pub fn load_config(inv: &Invocation) -> CliResult<ExperimentConfig> {
    let mut overrides = inv.overrides.clone();
    if let Some(s) = inv.seed {
        overrides.push(format!("master_seed={s}"));
    }
    if let Some(t) = inv.trials {
        overrides.push(format!("trials={t}"));
    }
    parse_config(&inv.config, &overrides).map_err(CliError::Invalid)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(e.into()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| runtime(e.into()))?;
    Ok(path)
}

/// Executes one subcommand, writing its summary to `out`.
pub fn run(inv: &Invocation, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(inv)?;
    let summary = match inv.command {
        Command::Plan => cmd_plan(&cfg, &inv.out)?,
        Command::Simulate => cmd_simulate(&cfg, inv)?,
        Command::Calibrate => cmd_calibrate(&cfg, &inv.out)?,
        Command::Sweep => cmd_sweep(&cfg, &inv.out)?,
        Command::Verify => {
            let (summary, failures) = cmd_verify(&cfg, &inv.out)?;
            out.write_all(summary.as_bytes())
                .map_err(|e| runtime(e.into()))?;
            return if failures == 0 {
                Ok(())
            } else {
                Err(CliError::VerificationFailed(format!(
                    "{failures} inequality violations"
                )))
            };
        }
    };
    out.write_all(summary.as_bytes())
        .map_err(|e| runtime(e.into()))
}

pub fn cmd_plan(cfg: &ExperimentConfig, dir: &Path) -> CliResult<String> {
    let csv = plan_rows(cfg)
        .and_then(|rows| plan_csv(&rows))
        .map_err(runtime)?;
    write_file(dir, "plan.csv", &csv)?;
    Ok(csv)
}

fn experiment(cfg: &ExperimentConfig) -> CliResult<Experiment<f64>> {
    Experiment::new(cfg.clone()).map_err(CliError::Invalid)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, inv: &Invocation) -> CliResult<String> {
    let exp = experiment(cfg)?;
    let (records, report) = exp.run().map_err(runtime)?;
    write_file(
        &inv.out,
        "trials.jsonl",
        &trials_jsonl(&records).map_err(runtime)?,
    )?;
    write_file(&inv.out, "report.json", &to_json(&report).map_err(runtime)?)?;
    if inv.dump_data {
        let data = exp.trial_data(0).map_err(runtime)?;
        write_file(&inv.out, "data_trial0.csv", &data.to_csv())?;
    }
    let mut s = format!(
        "p = {}, n = {}, trials = {}, mean ||E|| = {}\n",
        report.p,
        report.n,
        report.trials,
        format_number(report.mean_e_norm)
    );
    for t in &report.targets {
        let _ = write!(
            s,
            "i = {}: P[sin <= q] = {} (se {}), P[n >= Psi] = {}",
            t.i + 1,
            format_number(t.p_sin_le_q),
            format_number(t.se_sin_le_q),
            format_number(t.p_psi_event)
        );
        if let (Some(pc), Some(floor)) = (t.p_conditional, t.coverage_floor) {
            let _ = write!(
                s,
                ", conditional = {}, floor = {}",
                format_number(pc),
                format_number(floor)
            );
        }
        s.push('\n');
    }
    for n in &report.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "violations: {}", report.violations.total());
    Ok(s)
}

pub fn cmd_calibrate(cfg: &ExperimentConfig, dir: &Path) -> CliResult<String> {
    let rep = experiment(cfg)?.calibrate().map_err(runtime)?;
    write_file(dir, "calibration.json", &to_json(&rep).map_err(runtime)?)?;
    write_file(
        dir,
        "calibration.csv",
        &calibration_csv(&rep).map_err(runtime)?,
    )?;
    let mut s = format!(
        "c1 = {} (quantile level {}, {} trials at n = {})\n",
        format_number(rep.c1),
        format_number(rep.quantile_level),
        rep.trials,
        rep.n
    );
    for r in &rep.rescaled {
        let _ = writeln!(
            s,
            "k = {}: ||E(nu)||^2 > Xi in {} of {} trials",
            r.k + 1,
            r.violations,
            r.samples.len()
        );
    }
    if let Some(h) = &rep.holdout {
        let _ = writeln!(
            s,
            "holdout n = {}: violation frequency {} (allowed {}) {}",
            h.n,
            format_number(h.frequency),
            format_number(h.allowed),
            if h.pass { "ok" } else { "exceeded" }
        );
    }
    Ok(s)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, dir: &Path) -> CliResult<String> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| {
        CliError::Invalid(Error::validation("sweep", "sweep section is required"))
    })?;
    let rows = sweep_beta_example(spec, cfg.q, cfg.t, cfg.c1).map_err(CliError::Invalid)?;
    let csv = sweep_csv(&rows).map_err(runtime)?;
    write_file(dir, "sweep.csv", &csv)?;
    Ok(csv)
}

/// Returns the summary and the total number of violations.
pub fn cmd_verify(cfg: &ExperimentConfig, dir: &Path) -> CliResult<(String, usize)> {
    let (records, report) = experiment(cfg)?.run().map_err(runtime)?;
    write_file(
        dir,
        "trials.jsonl",
        &trials_jsonl(&records).map_err(runtime)?,
    )?;
    write_file(dir, "report.json", &to_json(&report).map_err(runtime)?)?;
    let mut s = format!(
        "{} trials, {} targets\n",
        report.trials,
        report.targets.len()
    );
    for (name, count) in report.violations.named() {
        let _ = writeln!(s, "{name:<22}{count}");
    }
    let degenerate: usize = report.targets.iter().map(|t| t.degenerate).sum();
    let _ = writeln!(s, "{:<22}{degenerate}", "degenerate (skipped)");
    let total = report.violations.total();
    let _ = writeln!(s, "{}", if total == 0 { "PASS" } else { "FAIL" });
    Ok((s, total))
}
