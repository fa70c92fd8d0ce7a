//! Strict JSON experiment configs.
//!
//! Target indices are one-based in the file and zero-based once parsed.
//! `n` is either an integer or the string `"psi"`, which resolves to
//! `ceil(Ψ(q, t, i))` at the first target.

use std::path::Path;

use pcaerr::bounds::{psi, BoundInputs};
use pcaerr::experiment::{
    ExperimentConfig, Mode, Sampler, SpectrumSpec, SweepSpec, DEFAULT_CALIBRATION_TRIALS,
    DEFAULT_COVERAGE_TRIALS,
};
use pcaerr::spectrum::BetaModelParams;
use pcaerr::{Error, Result};
use serde::Deserialize;
use serde_json::Value;

const TOP_KEYS: &[&str] = &[
    "lambda",
    "beta_model",
    "n",
    "targets",
    "q",
    "t",
    "c1",
    "m_factor",
    "trials",
    "master_seed",
    "mode",
    "sampler",
    "center",
    "sweep",
    "holdout_n",
    "inject_fault",
];
const BETA_KEYS: &[&str] = &["p", "beta", "top_count", "top_scale", "lattice_spread"];
const SWEEP_KEYS: &[&str] = &["p_grid", "beta", "top_count", "top_scale", "lattice_spread"];

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawN {
    Count(u64),
    Rule(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda: Option<Vec<f64>>,
    beta_model: Option<BetaModelParams>,
    n: Option<RawN>,
    targets: Option<Vec<usize>>,
    q: Option<f64>,
    t: Option<f64>,
    c1: Option<f64>,
    m_factor: Option<f64>,
    trials: Option<usize>,
    master_seed: Option<u64>,
    mode: Option<Mode>,
    sampler: Option<Sampler>,
    center: Option<bool>,
    sweep: Option<SweepSpec>,
    holdout_n: Option<usize>,
    inject_fault: Option<f64>,
}

/// Reads and validates a config file, applying `key=value` overrides first.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| syntax_error(&e))?;
    if !value.is_object() {
        return Err(Error::Parse {
            line: Some(1),
            key: None,
            message: "config must be a JSON object".into(),
        });
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    check_keys(&value, text)?;
    let raw: RawConfig = if overrides.is_empty() {
        serde_json::from_str(text).map_err(|e| syntax_error(&e))?
    } else {
        serde_json::from_value(value).map_err(|e| Error::Parse {
            line: None,
            key: None,
            message: e.to_string(),
        })?
    };
    build(raw)
}

fn syntax_error(e: &serde_json::Error) -> Error {
    Error::Parse {
        line: Some(e.line()),
        key: None,
        message: e.to_string(),
    }
}

/// Sets a dotted key such as `beta_model.beta`. The value is read as JSON
/// when it parses, otherwise as a bare string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| Error::Parse {
        line: None,
        key: None,
        message: format!("override '{assignment}' is not of the form key=value"),
    })?;
    let key = key.trim();
    let parsed =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let obj = node.as_object_mut().ok_or_else(|| Error::Parse {
            line: None,
            key: Some(key.into()),
            message: "override path goes through a non-object".into(),
        })?;
        if parts.peek().is_none() {
            obj.insert(part.into(), parsed);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Parse {
        line: None,
        key: None,
        message: "empty override key".into(),
    })
}

fn check_keys(value: &Value, text: &str) -> Result<()> {
    check_object(value, TOP_KEYS, "", text)?;
    if let Some(v) = value.get("beta_model") {
        check_object(v, BETA_KEYS, "beta_model.", text)?;
    }
    if let Some(v) = value.get("sweep") {
        check_object(v, SWEEP_KEYS, "sweep.", text)?;
    }
    Ok(())
}

fn check_object(value: &Value, known: &[&str], prefix: &str, text: &str) -> Result<()> {
    let Some(obj) = value.as_object() else {
        return Ok(());
    };
    for key in obj.keys() {
        if known.contains(&key.as_str()) {
            continue;
        }
        let mut message = format!("unknown key '{prefix}{key}'");
        if let Some(s) = suggest(key, known) {
            message.push_str(&format!(", did you mean '{prefix}{s}'?"));
        }
        return Err(Error::Parse {
            line: line_of_key(text, key),
            key: Some(format!("{prefix}{key}")),
            message,
        });
    }
    Ok(())
}

fn suggest<'a>(key: &str, known: &[&'a str]) -> Option<&'a str> {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| k)
}

fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|pos| text[..pos].matches('\n').count() + 1)
}

fn build(raw: RawConfig) -> Result<ExperimentConfig> {
    let spectrum = match (raw.lambda, raw.beta_model, &raw.sweep) {
        (Some(_), Some(_), _) => {
            return Err(Error::validation(
                "lambda",
                "give either 'lambda' or 'beta_model', not both",
            ))
        }
        (Some(l), None, _) => SpectrumSpec::Explicit(l),
        (None, Some(b), _) => SpectrumSpec::BetaModel(b),
        (None, None, Some(sw)) if !sw.p_grid.is_empty() => {
            SpectrumSpec::BetaModel(sw.params(sw.p_grid[0]))
        }
        (None, None, _) => {
            return Err(Error::validation(
                "lambda",
                "a spectrum ('lambda' or 'beta_model') is required",
            ))
        }
    };
    let targets = match raw.targets {
        Some(ts) => ts
            .into_iter()
            .map(|i| {
                i.checked_sub(1)
                    .ok_or_else(|| Error::validation("targets", "indices are 1-based"))
            })
            .collect::<Result<Vec<_>>>()?,
        None => match (&spectrum, &raw.sweep) {
            (SpectrumSpec::BetaModel(b), Some(_)) => vec![b.middle_target()],
            _ => {
                return Err(Error::validation(
                    "targets",
                    "at least one target is required",
                ))
            }
        },
    };
    let mode = raw.mode.unwrap_or(Mode::Coverage);
    let default_trials = if mode == Mode::Calibrate {
        DEFAULT_CALIBRATION_TRIALS
    } else {
        DEFAULT_COVERAGE_TRIALS
    };
    let mut cfg = ExperimentConfig::new(spectrum, 1, targets);
    cfg.q = raw.q.unwrap_or(cfg.q);
    cfg.t = raw.t.unwrap_or(cfg.t);
    cfg.c1 = raw.c1.unwrap_or(cfg.c1);
    cfg.m_factor = raw.m_factor.unwrap_or(cfg.m_factor);
    cfg.trials = raw.trials.unwrap_or(default_trials);
    cfg.master_seed = raw.master_seed.unwrap_or(0);
    cfg.mode = mode;
    cfg.sampler = raw.sampler.unwrap_or(Sampler::Auto);
    cfg.center = raw.center.unwrap_or(false);
    cfg.holdout_n = raw.holdout_n;
    cfg.inject_fault = raw.inject_fault;
    let sweep_only = raw.sweep.is_some() && raw.n.is_none();
    cfg.sweep = raw.sweep;
    cfg.n = match raw.n {
        Some(RawN::Count(n)) => {
            usize::try_from(n).map_err(|_| Error::validation("n", "too large"))?
        }
        Some(RawN::Rule(r)) if r == "psi" => {
            // Validate everything Ψ depends on before evaluating it.
            cfg.validate()?;
            resolve_psi_n(&cfg)?
        }
        Some(RawN::Rule(r)) => {
            return Err(Error::validation(
                "n",
                format!("'{r}' is neither an integer nor \"psi\""),
            ))
        }
        None if sweep_only => cfg.dimension(),
        None => return Err(Error::validation("n", "sample size is required")),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_psi_n(cfg: &ExperimentConfig) -> Result<usize> {
    let s = cfg.build_spectrum::<f64>()?;
    let b = BoundInputs::new(s, cfg.q, cfg.t, cfg.targets[0], cfg.c1, cfg.m_factor)?;
    let v = psi(&b).map_err(|e| Error::validation("n", format!("cannot evaluate Ψ: {e}")))?;
    if !v.is_finite() || v > 1e12 {
        return Err(Error::validation(
            "n",
            format!("Ψ = {v} is not a usable sample size"),
        ));
    }
    Ok(v.ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{ "lambda": [4, 2, 1], "n": 100, "targets": [2] }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config_str(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.targets, vec![1]);
        assert_eq!(cfg.n, 100);
        assert_eq!(cfg.trials, DEFAULT_COVERAGE_TRIALS);
        assert_eq!(cfg.q, 0.5);
        assert_eq!(cfg.mode, Mode::Coverage);
    }

    #[test]
    fn q_out_of_range_names_q() {
        let text = r#"{ "lambda": [4, 2, 1], "n": 100, "targets": [1], "q": 1.5 }"#;
        match parse_config_str(text, &[]) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "q"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn misspelled_key_gets_suggestion() {
        let text = "{\n  \"lamda\": [4, 2, 1],\n  \"n\": 100,\n  \"targets\": [1]\n}";
        match parse_config_str(text, &[]) {
            Err(Error::Parse { line, key, message }) => {
                assert_eq!(line, Some(2));
                assert_eq!(key.as_deref(), Some("lamda"));
                assert!(message.contains("'lambda'"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_unknown_key_is_rejected() {
        let text = r#"{ "beta_model": {"p": 32, "betta": 0.6}, "n": 100, "targets": [1] }"#;
        match parse_config_str(text, &[]) {
            Err(Error::Parse { key, message, .. }) => {
                assert_eq!(key.as_deref(), Some("beta_model.betta"));
                assert!(message.contains("beta_model.beta'"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_targets_is_validation_error() {
        let text = r#"{ "lambda": [4, 2, 1], "n": 100, "targets": [] }"#;
        assert!(matches!(
            parse_config_str(text, &[]),
            Err(Error::Validation { ref field, .. }) if field == "targets"
        ));
        let text = r#"{ "lambda": [4, 2, 1], "n": 100, "targets": [0] }"#;
        assert!(matches!(
            parse_config_str(text, &[]),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn overrides_apply_before_validation() {
        let over = vec![
            "q=0.25".to_string(),
            "targets=[1,3]".to_string(),
            "master_seed=9".to_string(),
        ];
        let cfg = parse_config_str(MINIMAL, &over).unwrap();
        assert_eq!(cfg.q, 0.25);
        assert_eq!(cfg.targets, vec![0, 2]);
        assert_eq!(cfg.master_seed, 9);
        let bad = vec!["qq=0.25".to_string()];
        assert!(matches!(
            parse_config_str(MINIMAL, &bad),
            Err(Error::Parse { .. })
        ));
        let mode = vec!["mode=verify".to_string()];
        assert_eq!(parse_config_str(MINIMAL, &mode).unwrap().mode, Mode::Verify);
    }

    #[test]
    fn n_from_psi() {
        let text = r#"{ "lambda": [4, 2, 1], "n": "psi", "targets": [2] }"#;
        assert_eq!(parse_config_str(text, &[]).unwrap().n, 1152);
    }

    #[test]
    fn non_positive_eigenvalue_rejected() {
        let text = r#"{ "lambda": [4, 0, 1], "n": 100, "targets": [1] }"#;
        assert!(matches!(
            parse_config_str(text, &[]),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn sweep_config_needs_no_spectrum() {
        let text = r#"{ "sweep": {"p_grid": [64, 128], "beta": 0.6}, "q": 0.3 }"#;
        let cfg = parse_config_str(text, &[]).unwrap();
        assert_eq!(cfg.sweep.unwrap().p_grid, vec![64, 128]);
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "{\n \"lambda\": [4, 2, 1],\n \"n\": ,\n}";
        assert!(matches!(
            parse_config_str(text, &[]),
            Err(Error::Parse { line: Some(3), .. })
        ));
    }
}
