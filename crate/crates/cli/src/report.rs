//! CSV and JSON output. Every writer is a pure function of its input so
//! reruns produce byte-identical files.

use pcaerr::bounds::{new_required_n, old_required_n, psi, psi_alt, BoundInputs};
use pcaerr::experiment::{CalibrationReport, ExperimentConfig, SweepRow, TrialRecord};
use pcaerr::spectrum::{gap_weighted_sum, spectral_gap, Spectrum};
use pcaerr::{Error, Result};
use serde::Serialize;

/// Shortest decimal that round-trips to the same `f64`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// Sample-size requirements for one target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRow {
    /// One-based.
    pub i: usize,
    pub lambda_i: f64,
    pub gap_i: Option<f64>,
    pub gap_weighted_sum: Option<f64>,
    pub old_n: Option<f64>,
    pub psi: Option<f64>,
    pub new_n: Option<f64>,
    pub psi_alt: Option<f64>,
    pub note: String,
}

pub fn plan_rows(cfg: &ExperimentConfig) -> Result<Vec<PlanRow>> {
    let s: Spectrum<f64> = cfg.build_spectrum()?;
    Ok(cfg
        .targets
        .iter()
        .map(|&i| {
            let mut row = PlanRow {
                i: i + 1,
                lambda_i: s.get(i),
                gap_i: None,
                gap_weighted_sum: None,
                old_n: None,
                psi: None,
                new_n: None,
                psi_alt: None,
                note: String::new(),
            };
            let filled = (|| -> Result<()> {
                row.gap_i = Some(spectral_gap(&s, i)?);
                row.gap_weighted_sum = Some(gap_weighted_sum(&s, i)?);
                let b = BoundInputs::new(s.clone(), cfg.q, cfg.t, i, cfg.c1, cfg.m_factor)?;
                row.old_n = Some(old_required_n(&b)?);
                row.psi = Some(psi(&b)?);
                row.new_n = Some(new_required_n(&b)?);
                row.psi_alt = match psi_alt(&b) {
                    Ok(v) => Some(v),
                    Err(Error::NotApplicable { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok(())
            })();
            if let Err(e) = filled {
                row.note = e.to_string();
            }
            row
        })
        .collect())
}

fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn plan_csv(rows: &[PlanRow]) -> Result<String> {
    write_csv(
        &[
            "i",
            "lambda_i",
            "gap_i",
            "gap_weighted_sum",
            "old_n",
            "psi",
            "new_n",
            "psi_alt",
            "note",
        ],
        rows.iter().map(|r| {
            vec![
                r.i.to_string(),
                format_number(r.lambda_i),
                opt(r.gap_i),
                opt(r.gap_weighted_sum),
                opt(r.old_n),
                opt(r.psi),
                opt(r.new_n),
                opt(r.psi_alt),
                r.note.clone(),
            ]
        }),
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    write_csv(
        &[
            "p",
            "target",
            "lambda_i",
            "gap_i",
            "gap_weighted_sum",
            "old_n",
            "new_n",
            "ratio",
        ],
        rows.iter().map(|r| {
            vec![
                r.p.to_string(),
                (r.target + 1).to_string(),
                format_number(r.lambda_i),
                format_number(r.gap_i),
                format_number(r.gap_weighted_sum),
                format_number(r.old_n),
                format_number(r.new_n),
                format_number(r.ratio),
            ]
        }),
    )
}

/// Per-trial `‖E‖` and `‖E(ν(k))‖²` columns of a calibration run.
pub fn calibration_csv(rep: &CalibrationReport) -> Result<String> {
    let mut header = vec!["trial".to_string(), "e_norm".to_string()];
    header.extend(rep.rescaled.iter().map(|r| format!("e_nu_sq_k{}", r.k + 1)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &header,
        rep.e_norm_samples.iter().enumerate().map(|(j, &e)| {
            let mut row = vec![j.to_string(), format_number(e)];
            row.extend(rep.rescaled.iter().map(|r| format_number(r.samples[j])));
            row
        }),
    )
}

pub fn trials_jsonl(records: &[TrialRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn to_json<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
