//! Monte Carlo orchestration.
//!
//! A trial draws `Σ̂` from its own [`RngStream`], decomposes it and evaluates
//! every per-target check. Trials are independent and run on the rayon pool;
//! aggregation works on integer tallies (plus float summaries taken in trial
//! order), so the report does not depend on completion order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::bounds::{calibrate_c1, kl_bound, new_required_n, old_required_n, psi, xi, BoundInputs};
use crate::error::{Error, Result};
use crate::linalg::{diag_scale, op_norm, sym_eig, SymMatrix};
use crate::perturbation::{
    build_operators, check_chain, check_shift_inequalities, conditioned_nu, delta_mu_formula,
    first_order_delta_mu, normalize_against, relative_difference, sin_theta, ChainCheck,
    TargetContext,
};
use crate::sampling::{
    center_columns, error_matrix, ml_covariance, sample_covariance_wishart, sample_data, RngStream,
};
use crate::scalar::{inequality_slack, le_with_slack, Scalar};
use crate::spectrum::{gap_weighted_sum, make_beta_model, spectral_gap, BetaModelParams, Spectrum};

/// Relative tolerance for the exact `Δμ` identity check in `f64`.
pub const EXACT_FORMULA_TOL: f64 = 1e-8;

/// `EXACT_FORMULA_TOL`, widened to `1e4 ε` for scalars too coarse to reach it.
pub fn exact_formula_tolerance<T: Scalar>() -> f64 {
    EXACT_FORMULA_TOL.max(1e4 * T::epsilon().as_f64())
}
/// Trials of a hold-out run use stream ids offset by this amount.
pub const HOLDOUT_STREAM_OFFSET: u64 = 1 << 40;
/// `Sampler::Auto` switches to Wishart draws above this many data entries.
pub const AUTO_WISHART_ENTRIES: usize = 4_000_000;

pub const DEFAULT_COVERAGE_TRIALS: usize = 500;
pub const DEFAULT_CALIBRATION_TRIALS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSpec {
    Explicit(Vec<f64>),
    BetaModel(BetaModelParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Verify,
    Coverage,
    Calibrate,
    Sweep,
}

/// How `Σ̂` is drawn. `Data` materialises the `n x p` sample; `Wishart` draws
/// `Σ̂` from the same law in `O(p³)` regardless of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Auto,
    Data,
    Wishart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub p_grid: Vec<usize>,
    pub beta: f64,
    #[serde(default)]
    pub top_count: Option<usize>,
    #[serde(default)]
    pub top_scale: Option<f64>,
    #[serde(default)]
    pub lattice_spread: Option<f64>,
}

impl SweepSpec {
    pub fn params(&self, p: usize) -> BetaModelParams {
        let mut params = BetaModelParams::new(p, self.beta);
        if let Some(v) = self.top_count {
            params.top_count = v;
        }
        if let Some(v) = self.top_scale {
            params.top_scale = v;
        }
        if let Some(v) = self.lattice_spread {
            params.lattice_spread = v;
        }
        params
    }
}

/// Validated experiment description. Target indices are zero-based here; the
/// config file and all outputs use one-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spectrum: SpectrumSpec,
    pub n: usize,
    pub targets: Vec<usize>,
    pub q: f64,
    pub t: f64,
    pub c1: f64,
    pub m_factor: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub mode: Mode,
    pub sampler: Sampler,
    pub center: bool,
    pub sweep: Option<SweepSpec>,
    pub holdout_n: Option<usize>,
    /// Test hook: added to `E_12 = E_21` before the perturbation checks so
    /// that the exact identity no longer matches the computed eigenvector.
    pub inject_fault: Option<f64>,
}

impl ExperimentConfig {
    /// Config with defaults for everything but the spectrum, `n` and targets.
    pub fn new(spectrum: SpectrumSpec, n: usize, targets: Vec<usize>) -> Self {
        Self {
            spectrum,
            n,
            targets,
            q: 0.5,
            t: 1.0,
            c1: 1.0,
            m_factor: 1.0,
            trials: DEFAULT_COVERAGE_TRIALS,
            master_seed: 0,
            mode: Mode::Coverage,
            sampler: Sampler::Auto,
            center: false,
            sweep: None,
            holdout_n: None,
            inject_fault: None,
        }
    }

    pub fn build_spectrum<T: Scalar>(&self) -> Result<Spectrum<T>> {
        match &self.spectrum {
            SpectrumSpec::Explicit(v) => Spectrum::new(v.iter().map(|&x| T::lit(x)).collect()),
            SpectrumSpec::BetaModel(params) => make_beta_model(params),
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.spectrum {
            SpectrumSpec::Explicit(v) => v.len(),
            SpectrumSpec::BetaModel(params) => params.p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(field, msg))
            }
        };
        if let SpectrumSpec::Explicit(v) = &self.spectrum {
            check(!v.is_empty(), "lambda", "spectrum is empty".into())?;
            for (j, &x) in v.iter().enumerate() {
                check(
                    x.is_finite() && x > 0.0,
                    "lambda",
                    format!("eigenvalue {} = {x} must be positive", j + 1),
                )?;
            }
            check(
                v.windows(2).all(|w| w[0] >= w[1]),
                "lambda",
                "eigenvalues must be non-increasing".into(),
            )?;
        }
        if let SpectrumSpec::BetaModel(_) = &self.spectrum {
            self.build_spectrum::<f64>()
                .map_err(|e| Error::validation("beta_model", e.to_string()))?;
        }
        let p = self.dimension();
        check(self.n >= 1, "n", "must be at least 1".into())?;
        check(
            !self.targets.is_empty(),
            "targets",
            "at least one target is required".into(),
        )?;
        for &i in &self.targets {
            check(
                i < p,
                "targets",
                format!("index {} out of range 1..={p}", i + 1),
            )?;
        }
        check(
            self.q > 0.0 && self.q < 1.0,
            "q",
            format!("{} not in (0,1)", self.q),
        )?;
        check(
            self.t >= 1.0 && self.t.is_finite(),
            "t",
            format!("{} must be >= 1", self.t),
        )?;
        check(
            self.c1 > 0.0 && self.c1.is_finite(),
            "c1",
            format!("{} must be positive", self.c1),
        )?;
        check(
            self.m_factor > 0.0 && self.m_factor.is_finite(),
            "m_factor",
            format!("{} must be positive", self.m_factor),
        )?;
        check(self.trials >= 1, "trials", "must be at least 1".into())?;
        let sampler = self.resolved_sampler();
        check(
            !(self.center && sampler == Sampler::Wishart),
            "center",
            "mean subtraction needs the data sampler".into(),
        )?;
        check(
            !(sampler == Sampler::Wishart && self.n < p),
            "sampler",
            format!("Wishart sampling needs n >= p = {p}"),
        )?;
        if let Some(h) = self.holdout_n {
            check(h >= 1, "holdout_n", "must be at least 1".into())?;
        }
        if let Some(sw) = &self.sweep {
            check(
                !sw.p_grid.is_empty(),
                "sweep.p_grid",
                "must not be empty".into(),
            )?;
        }
        Ok(())
    }

    pub fn resolved_sampler(&self) -> Sampler {
        match self.sampler {
            Sampler::Auto
                if self.n.saturating_mul(self.dimension()) > AUTO_WISHART_ENTRIES
                    && self.n >= self.dimension() =>
            {
                Sampler::Wishart
            }
            Sampler::Auto => Sampler::Data,
            other => other,
        }
    }
}

fn one_based<S: Serializer>(i: &usize, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u64(*i as u64 + 1)
}

/// Per-target outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetRecord {
    #[serde(serialize_with = "one_based")]
    pub i: usize,
    pub lambda_hat_i: f64,
    #[serde(serialize_with = "one_based")]
    pub i_star: usize,
    pub sin_theta: f64,
    /// `‖Δμ_i‖` after normalising against axis `i`.
    pub tan_theta: Option<f64>,
    /// `2 ‖E‖ / g_i`; absent when `λ_i` is repeated.
    pub sin_theta_bound: Option<f64>,
    pub shift_checks: Option<[bool; 2]>,
    pub chain: Option<ChainCheck<f64>>,
    /// Relative gap between the exact identity and the eigenvector route.
    pub exact_rel_err: Option<f64>,
    /// `exact_rel_err` within [`exact_formula_tolerance`] of the scalar type.
    pub exact_formula_ok: Option<bool>,
    /// Relative gap between the first-order approximation and `Δμ_i`.
    pub first_order_rel_err: Option<f64>,
    pub degenerate: bool,
    pub degenerate_reason: Option<String>,
    pub psi_at_i_star: Option<f64>,
    pub n_geq_psi: bool,
}

impl TargetRecord {
    pub fn sin_bound_holds(&self) -> Option<bool> {
        self.sin_theta_bound
            .map(|b| le_with_slack(self.sin_theta, b, inequality_slack::<f64>()))
    }

    pub fn violations(&self) -> ViolationCounts {
        let flag = |b: bool| usize::from(!b);
        let mut v = ViolationCounts {
            sin_theta_bound: self.sin_bound_holds().map_or(0, flag),
            ..Default::default()
        };
        if let Some([a, b]) = self.shift_checks {
            v.resolvent_shift = flag(a);
            v.gap_ratio_cap = flag(b);
        }
        if let Some(c) = &self.chain {
            v.column_lower = flag(c.column_lower);
            v.column_upper = flag(c.column_upper);
            v.lambda_vs_nu_tilde = flag(c.lambda_vs_nu_tilde);
            v.nu_tilde_vs_nu = flag(c.nu_tilde_vs_nu);
            v.delta_mu_bound = flag(c.delta_mu_bound);
        }
        if let Some(ok) = self.exact_formula_ok {
            v.exact_formula = flag(ok);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub e_norm: f64,
    pub targets: Vec<TargetRecord>,
}

/// Violation tallies of the deterministic inequalities; all expected zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ViolationCounts {
    pub sin_theta_bound: usize,
    pub resolvent_shift: usize,
    pub gap_ratio_cap: usize,
    pub column_lower: usize,
    pub column_upper: usize,
    pub lambda_vs_nu_tilde: usize,
    pub nu_tilde_vs_nu: usize,
    pub delta_mu_bound: usize,
    pub exact_formula: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.named().iter().map(|(_, v)| v).sum()
    }

    pub fn named(&self) -> [(&'static str, usize); 9] {
        [
            ("sin_theta_bound", self.sin_theta_bound),
            ("resolvent_shift", self.resolvent_shift),
            ("gap_ratio_cap", self.gap_ratio_cap),
            ("column_lower", self.column_lower),
            ("column_upper", self.column_upper),
            ("lambda_vs_nu_tilde", self.lambda_vs_nu_tilde),
            ("nu_tilde_vs_nu", self.nu_tilde_vs_nu),
            ("delta_mu_bound", self.delta_mu_bound),
            ("exact_formula", self.exact_formula),
        ]
    }

    fn add(&mut self, o: &Self) {
        self.sin_theta_bound += o.sin_theta_bound;
        self.resolvent_shift += o.resolvent_shift;
        self.gap_ratio_cap += o.gap_ratio_cap;
        self.column_lower += o.column_lower;
        self.column_upper += o.column_upper;
        self.lambda_vs_nu_tilde += o.lambda_vs_nu_tilde;
        self.nu_tilde_vs_nu += o.nu_tilde_vs_nu;
        self.delta_mu_bound += o.delta_mu_bound;
        self.exact_formula += o.exact_formula;
    }
}

/// Aggregates for one target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSummary {
    #[serde(serialize_with = "one_based")]
    pub i: usize,
    pub trials: usize,
    pub degenerate: usize,
    pub degenerate_rate: f64,
    pub i_star_matches: usize,
    /// Count of `sin θ <= q`.
    pub sin_le_q: usize,
    pub p_sin_le_q: f64,
    pub se_sin_le_q: f64,
    /// Count of `n >= Ψ(q, t, i*)`.
    pub psi_event: usize,
    pub p_psi_event: f64,
    pub se_psi_event: f64,
    pub sin_le_q_and_psi_event: usize,
    pub p_conditional: Option<f64>,
    pub se_conditional: Option<f64>,
    /// `1 - p e^{-t} / P̂[n >= Ψ(q, t, i*)]`.
    pub coverage_floor: Option<f64>,
    /// `p_conditional >= coverage_floor - 3 se_conditional`.
    pub coverage_ok: Option<bool>,
    pub psi_at_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub p: usize,
    pub n: usize,
    pub trials: usize,
    pub q: f64,
    pub t: f64,
    pub c1: f64,
    pub master_seed: u64,
    pub targets: Vec<TargetSummary>,
    pub violations: ViolationCounts,
    pub mean_e_norm: f64,
    pub max_e_norm: f64,
    pub calibrated_c1: Option<f64>,
    pub notes: Vec<String>,
}

/// Binomial standard error `sqrt(p̂ (1 - p̂) / count)`.
pub fn binomial_se(p_hat: f64, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    (p_hat * (1.0 - p_hat) / count as f64).sqrt()
}

/// Monte Carlo experiment over a fixed spectrum in scalar type `T`.
#[derive(Debug, Clone)]
pub struct Experiment<T> {
    cfg: ExperimentConfig,
    spectrum: Spectrum<T>,
}

impl<T: Scalar> Experiment<T> {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let spectrum = cfg.build_spectrum()?;
        Ok(Self { cfg, spectrum })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn spectrum(&self) -> &Spectrum<T> {
        &self.spectrum
    }

    fn draw_covariance(&self, n: usize, stream: &mut RngStream) -> Result<SymMatrix<T>> {
        let sampler = ExperimentConfig {
            n,
            ..self.cfg.clone()
        }
        .resolved_sampler();
        match sampler {
            Sampler::Wishart => sample_covariance_wishart(&self.spectrum, n, stream),
            _ => {
                let x = sample_data(&self.spectrum, n, stream)?;
                let x = if self.cfg.center {
                    center_columns(&x)
                } else {
                    x
                };
                Ok(ml_covariance(&x))
            }
        }
    }

    /// Data matrix of one trial, for debug dumps.
    pub fn trial_data(&self, trial_index: u64) -> Result<crate::sampling::DataMatrix<T>> {
        let mut stream = RngStream::new(self.cfg.master_seed, trial_index);
        sample_data(&self.spectrum, self.cfg.n, &mut stream)
    }

    fn psi_at(&self, k: usize) -> Option<f64> {
        let c = &self.cfg;
        BoundInputs::new(
            self.spectrum.clone(),
            T::lit(c.q),
            T::lit(c.t),
            k,
            T::lit(c.c1),
            T::lit(c.m_factor),
        )
        .and_then(|b| psi(&b))
        .ok()
        .map(Scalar::as_f64)
    }

    pub fn run_trial(&self, trial_index: u64) -> Result<TrialRecord> {
        let cfg = &self.cfg;
        let s = &self.spectrum;
        let mut stream = RngStream::new(cfg.master_seed, trial_index);
        let sigma_hat = self.draw_covariance(cfg.n, &mut stream)?;
        let e = error_matrix(&sigma_hat, s)?;
        let e_norm = op_norm(&e)?;
        let e_used = match cfg.inject_fault {
            Some(f) if s.len() >= 2 => {
                let mut bump = SymMatrix::zeros(s.len()).into_matrix();
                bump[(0, 1)] = T::lit(f);
                bump[(1, 0)] = T::lit(f);
                e.add(&SymMatrix::new(bump)?)?
            }
            _ => e.clone(),
        };
        let eig = sym_eig(&sigma_hat)?;

        let targets = cfg
            .targets
            .iter()
            .map(|&i| self.evaluate_target(&eig, &e_used, e_norm, i))
            .collect();
        Ok(TrialRecord {
            trial_index,
            e_norm: e_norm.as_f64(),
            targets,
        })
    }

    fn evaluate_target(
        &self,
        eig: &crate::linalg::EigenDecomposition<T>,
        e: &SymMatrix<T>,
        e_norm: T,
        i: usize,
    ) -> TargetRecord {
        let s = &self.spectrum;
        let n = self.cfg.n;
        let ctx = TargetContext::from_decomposition(s, eig, i);
        let sin = sin_theta(i, &ctx.eta_unit);
        let own = normalize_against(&ctx.eta_unit, i).ok();
        let psi_star = self.psi_at(ctx.i_star);

        let mut rec = TargetRecord {
            i,
            lambda_hat_i: ctx.lambda_hat_i.as_f64(),
            i_star: ctx.i_star,
            sin_theta: sin.as_f64(),
            tan_theta: own.as_ref().map(|(_, t)| t.as_f64()),
            sin_theta_bound: spectral_gap(s, i)
                .ok()
                .map(|g| (T::lit(2.0) * e_norm / g).as_f64()),
            shift_checks: None,
            chain: None,
            exact_rel_err: None,
            exact_formula_ok: None,
            first_order_rel_err: None,
            degenerate: false,
            degenerate_reason: None,
            psi_at_i_star: psi_star,
            n_geq_psi: psi_star.is_some_and(|v| n as f64 >= v),
        };
        if let (Some((dm, _)), Ok(fo)) = (&own, first_order_delta_mu(e, s, i)) {
            rec.first_order_rel_err = Some(relative_difference(&fo, dm).as_f64());
        }

        let detailed = || -> Result<([bool; 2], ChainCheck<f64>, f64)> {
            let (a, b) = check_shift_inequalities(s, ctx.lambda_hat_i, ctx.i_star)?;
            let ops = build_operators(s, ctx.lambda_hat_i, ctx.i_star)?;
            let formula = delta_mu_formula(e, &ops)?;
            let (from_eta, _) = normalize_against(&ctx.eta_unit, ctx.i_star)?;
            let chain = check_chain(e, s, &ctx, &ops, n)?;
            Ok((
                [a, b],
                chain.to_f64(),
                relative_difference(&formula, &from_eta).as_f64(),
            ))
        };
        match detailed() {
            Ok((shift, chain, err)) => {
                rec.shift_checks = Some(shift);
                rec.chain = Some(chain);
                rec.exact_rel_err = Some(err);
                rec.exact_formula_ok = Some(err <= exact_formula_tolerance::<T>());
            }
            Err(err) => {
                rec.degenerate = true;
                rec.degenerate_reason = Some(err.to_string());
            }
        }
        rec
    }

    /// Runs all configured trials concurrently; records are in trial order.
    pub fn run_trials(&self) -> Result<Vec<TrialRecord>> {
        (0..self.cfg.trials as u64)
            .into_par_iter()
            .map(|k| self.run_trial(k))
            .collect()
    }

    pub fn run(&self) -> Result<(Vec<TrialRecord>, ExperimentReport)> {
        let records = self.run_trials()?;
        let report = self.aggregate(&records);
        Ok((records, report))
    }

    /// Summarises records supplied in any order.
    pub fn aggregate(&self, records: &[TrialRecord]) -> ExperimentReport {
        let cfg = &self.cfg;
        let p = self.spectrum.len();
        let mut ordered: Vec<&TrialRecord> = records.iter().collect();
        ordered.sort_by_key(|r| r.trial_index);

        let mut violations = ViolationCounts::default();
        let mut notes = Vec::new();
        let mut targets = Vec::with_capacity(cfg.targets.len());
        for (slot, &i) in cfg.targets.iter().enumerate() {
            let mut trials = 0;
            let mut degenerate = 0;
            let mut matches = 0;
            let mut a = 0;
            let mut b = 0;
            let mut ab = 0;
            for r in &ordered {
                let t = &r.targets[slot];
                trials += 1;
                degenerate += usize::from(t.degenerate);
                matches += usize::from(t.i_star == t.i);
                let hit = t.sin_theta <= cfg.q;
                a += usize::from(hit);
                b += usize::from(t.n_geq_psi);
                ab += usize::from(hit && t.n_geq_psi);
                violations.add(&t.violations());
            }
            let p_a = a as f64 / trials.max(1) as f64;
            let p_b = b as f64 / trials.max(1) as f64;
            let (p_cond, se_cond, floor, ok) = if b == 0 {
                notes.push(format!(
                    "target i = {}: no trial satisfied n >= Psi(q, t, i*)",
                    i + 1
                ));
                (None, None, None, None)
            } else {
                let pc = ab as f64 / b as f64;
                let se = binomial_se(pc, b);
                let floor = 1.0 - p as f64 * (-cfg.t).exp() / p_b;
                (
                    Some(pc),
                    Some(se),
                    Some(floor),
                    Some(pc >= floor - 3.0 * se),
                )
            };
            targets.push(TargetSummary {
                i,
                trials,
                degenerate,
                degenerate_rate: degenerate as f64 / trials.max(1) as f64,
                i_star_matches: matches,
                sin_le_q: a,
                p_sin_le_q: p_a,
                se_sin_le_q: binomial_se(p_a, trials),
                psi_event: b,
                p_psi_event: p_b,
                se_psi_event: binomial_se(p_b, trials),
                sin_le_q_and_psi_event: ab,
                p_conditional: p_cond,
                se_conditional: se_cond,
                coverage_floor: floor,
                coverage_ok: ok,
                psi_at_target: self.psi_at(i),
            });
        }
        let e_norms: Vec<f64> = ordered.iter().map(|r| r.e_norm).collect();
        ExperimentReport {
            p,
            n: cfg.n,
            trials: ordered.len(),
            q: cfg.q,
            t: cfg.t,
            c1: cfg.c1,
            master_seed: cfg.master_seed,
            targets,
            violations,
            mean_e_norm: e_norms.iter().sum::<f64>() / e_norms.len().max(1) as f64,
            max_e_norm: e_norms.iter().copied().fold(0.0, f64::max),
            calibrated_c1: None,
            notes,
        }
    }

    /// `‖E‖` for one trial at sample size `n`, plus `‖E(ν(k))‖²` for each
    /// configured target with a non-repeated eigenvalue.
    fn error_norms(
        &self,
        n: usize,
        stream_id: u64,
        nus: &[(usize, Vec<T>)],
    ) -> Result<(f64, Vec<f64>)> {
        let mut stream = RngStream::new(self.cfg.master_seed, stream_id);
        let e = error_matrix(&self.draw_covariance(n, &mut stream)?, &self.spectrum)?;
        let rescaled = nus
            .iter()
            .map(|(_, nu)| {
                let v = op_norm(&diag_scale(&e, nu)?)?;
                Ok((v * v).as_f64())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((op_norm(&e)?.as_f64(), rescaled))
    }

    /// Pilot estimate of `c1` from `trials` draws of `‖E‖`, with the rescaled
    /// error bound `‖E(ν(k))‖² <= Ξ(n, t, ν(k))` evaluated at the estimate.
    pub fn calibrate(&self) -> Result<CalibrationReport> {
        let cfg = &self.cfg;
        let s = &self.spectrum;
        let nus: Vec<(usize, Vec<T>)> = cfg
            .targets
            .iter()
            .filter_map(|&k| conditioned_nu(s, k).ok().map(|nu| (k, nu)))
            .collect();
        let draws = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|k| self.error_norms(cfg.n, k, &nus))
            .collect::<Result<Vec<_>>>()?;
        let samples: Vec<f64> = draws.iter().map(|(e, _)| *e).collect();
        let t = T::lit(cfg.t);
        let c1 = calibrate_c1(
            &samples.iter().map(|&x| T::lit(x)).collect::<Vec<_>>(),
            s,
            cfg.n,
            t,
        )?
        .as_f64();
        let rescaled = nus
            .iter()
            .enumerate()
            .map(|(slot, (k, nu))| {
                let bound = xi(s, cfg.n, t, nu, T::lit(c1))?.as_f64();
                let samples: Vec<f64> = draws.iter().map(|(_, r)| r[slot]).collect();
                let violations = samples.iter().filter(|&&x| x > bound).count();
                Ok(RescaledCheck {
                    k: *k,
                    xi: bound,
                    violations,
                    frequency: violations as f64 / samples.len() as f64,
                    samples,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let holdout = match cfg.holdout_n {
            Some(h) => Some(self.holdout(c1, h)?),
            None => None,
        };
        Ok(CalibrationReport {
            p: s.len(),
            n: cfg.n,
            t: cfg.t,
            trials: cfg.trials,
            c1,
            quantile_level: 1.0 - (-cfg.t).exp(),
            unit_bound: kl_bound(s, cfg.n, t, T::one())?.as_f64(),
            e_norm_samples: samples,
            rescaled,
            holdout,
        })
    }

    /// Fresh run at sample size `n` counting `‖E‖ > kl_bound(s, n, t, c1)`.
    pub fn holdout(&self, c1: f64, n: usize) -> Result<HoldoutReport> {
        let cfg = &self.cfg;
        let bound = kl_bound(&self.spectrum, n, T::lit(cfg.t), T::lit(c1))?.as_f64();
        let norms = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|k| {
                self.error_norms(n, HOLDOUT_STREAM_OFFSET + k, &[])
                    .map(|(e, _)| e)
            })
            .collect::<Result<Vec<_>>>()?;
        let violations = norms.iter().filter(|&&x| x > bound).count();
        let frequency = violations as f64 / norms.len() as f64;
        let se = binomial_se(frequency, norms.len());
        let allowed = (-cfg.t).exp() + 3.0 * se;
        Ok(HoldoutReport {
            n,
            trials: norms.len(),
            bound,
            violations,
            frequency,
            se,
            allowed,
            pass: frequency <= allowed,
        })
    }
}

/// `Ξ` check for the rescaled error at one conditioning index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledCheck {
    #[serde(serialize_with = "one_based")]
    pub k: usize,
    pub xi: f64,
    pub violations: usize,
    pub frequency: f64,
    /// `‖E(ν(k))‖²` per trial.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutReport {
    pub n: usize,
    pub trials: usize,
    pub bound: f64,
    pub violations: usize,
    pub frequency: f64,
    pub se: f64,
    /// `e^{-t} + 3 se`.
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub p: usize,
    pub n: usize,
    pub t: f64,
    pub trials: usize,
    pub c1: f64,
    pub quantile_level: f64,
    /// `kl_bound` at `c1 = 1`.
    pub unit_bound: f64,
    pub e_norm_samples: Vec<f64>,
    pub rescaled: Vec<RescaledCheck>,
    pub holdout: Option<HoldoutReport>,
}

/// One row of the β-model scaling table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: usize,
    #[serde(serialize_with = "one_based")]
    pub target: usize,
    pub lambda_i: f64,
    pub gap_i: f64,
    pub gap_weighted_sum: f64,
    pub old_n: f64,
    pub new_n: f64,
    pub ratio: f64,
}

/// Old versus improved sample size at the lattice-middle target of the
/// β-model for each `p` in the grid (`m_factor = 1`).
pub fn sweep_beta_example(spec: &SweepSpec, q: f64, t: f64, c1: f64) -> Result<Vec<SweepRow>> {
    spec.p_grid
        .iter()
        .map(|&p| {
            let params = spec.params(p);
            let s: Spectrum<f64> = make_beta_model(&params)?;
            let i = params.middle_target();
            let b = BoundInputs::new(s.clone(), q, t, i, c1, 1.0)?;
            let old_n = old_required_n(&b)?;
            let new_n = new_required_n(&b)?;
            Ok(SweepRow {
                p,
                target: i,
                lambda_i: s.get(i),
                gap_i: spectral_gap(&s, i)?,
                gap_weighted_sum: gap_weighted_sum(&s, i)?,
                old_n,
                new_n,
                ratio: new_n / old_n,
            })
        })
        .collect()
}

/// Runs the configured trials in `f64`.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: u64) -> Result<TrialRecord> {
    Experiment::<f64>::new(cfg.clone())?.run_trial(trial_index)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(Experiment::<f64>::new(cfg.clone())?.run()?.1)
}

pub fn calibrate_run(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    Experiment::<f64>::new(cfg.clone())?.calibrate()
}
