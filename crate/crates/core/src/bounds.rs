//! Closed-form sample-size and error bounds.
//!
//! All functions return reals; callers take the ceiling when they need an
//! integer sample size. `c1` is the universal constant of the operator-norm
//! concentration bound and `m_factor` the spectrum-dependent slack constant of
//! the improved sample-size bound; neither has a known value, so both are
//! inputs (see [`calibrate_c1`] for an empirical surrogate of `c1`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::perturbation::conditioned_nu;
use crate::scalar::Scalar;
use crate::spectrum::{gap_weighted_sum, max_gap_ratio, spectral_gap, Spectrum};

/// Inputs shared by the sample-size bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs<T> {
    pub spectrum: Spectrum<T>,
    pub q: T,
    pub t: T,
    /// Target index (zero-based).
    pub i: usize,
    pub c1: T,
    pub m_factor: T,
}

impl<T: Scalar> BoundInputs<T> {
    pub fn new(spectrum: Spectrum<T>, q: T, t: T, i: usize, c1: T, m_factor: T) -> Result<Self> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::validation("q", format!("{q} not in (0,1)")));
        }
        if !(t >= T::one()) || !t.is_finite() {
            return Err(Error::validation("t", format!("{t} must be >= 1")));
        }
        if !(c1 > T::zero()) || !c1.is_finite() {
            return Err(Error::validation("c1", format!("{c1} must be positive")));
        }
        if !(m_factor > T::zero()) || !m_factor.is_finite() {
            return Err(Error::validation(
                "m_factor",
                format!("{m_factor} must be positive"),
            ));
        }
        if i >= spectrum.len() {
            return Err(Error::validation(
                "targets",
                format!("index {} out of range for p = {}", i + 1, spectrum.len()),
            ));
        }
        Ok(Self {
            spectrum,
            q,
            t,
            i,
            c1,
            m_factor,
        })
    }
}

fn require_n_at_least<T: Scalar>(n: usize, p: usize, t: T) -> Result<()> {
    if n < p || T::count(n) < t {
        return Err(Error::PreconditionViolated(format!(
            "n = {n} must be at least max(p = {p}, t = {t})"
        )));
    }
    Ok(())
}

/// `c1 sqrt(λ_1/n) max(sqrt(λ_1 t), sqrt(Σ λ_j))`, valid for `n >= max(p, t)`.
pub fn kl_bound<T: Scalar>(s: &Spectrum<T>, n: usize, t: T, c1: T) -> Result<T> {
    require_n_at_least(n, s.len(), t)?;
    let l1 = s.largest();
    Ok(c1 * (l1 / T::count(n)).sqrt() * (l1 * t).sqrt().max(s.trace().sqrt()))
}

/// Four-term form `c1 λ_1 max(sqrt(r/n), r/n, sqrt(t/n), t/n)` with `r` the
/// effective rank; holds for every `n`.
pub fn kl_bound_full<T: Scalar>(s: &Spectrum<T>, n: usize, t: T, c1: T) -> T {
    let nf = T::count(n);
    let r = s.trace() / s.largest();
    let terms = [(r / nf).sqrt(), r / nf, (t / nf).sqrt(), t / nf];
    c1 * s.largest() * terms.iter().copied().fold(T::zero(), T::max)
}

/// `2 ‖E‖ / g`.
pub fn sin_theta_bound<T: Scalar>(e_norm: T, gap: T) -> Result<T> {
    if !(gap > T::zero()) {
        return Err(Error::ZeroGap);
    }
    Ok(T::lit(2.0) * e_norm / gap)
}

/// Sample size from combining the operator-norm and sin θ bounds:
/// `max(p, t, 4c1²λ_1²t/(q²g_i²), 4c1²λ_1Σλ_j/(q²g_i²))`.
pub fn old_required_n<T: Scalar>(b: &BoundInputs<T>) -> Result<T> {
    let s = &b.spectrum;
    let g = spectral_gap(s, b.i)?;
    let l1 = s.largest();
    let denom = b.q * b.q * g * g;
    let four_c2 = T::lit(4.0) * b.c1 * b.c1;
    Ok(T::count(s.len())
        .max(b.t)
        .max(four_c2 * l1 * l1 * b.t / denom)
        .max(four_c2 * l1 * s.trace() / denom))
}

/// `16c1² max(1 + λ_i/g_i, 2λ_i/(q²g_i)) max((1 + λ_i/g_i) t, (3/2) Σ_{j≠i} λ_j/|λ_j-λ_i|)`.
pub fn psi<T: Scalar>(b: &BoundInputs<T>) -> Result<T> {
    let s = &b.spectrum;
    let g = spectral_gap(s, b.i)?;
    let li = s.get(b.i);
    let ratio = T::one() + li / g;
    let first = ratio.max(T::lit(2.0) * li / (b.q * b.q * g));
    let second = (ratio * b.t).max(T::lit(1.5) * gap_weighted_sum(s, b.i)?);
    Ok(T::lit(16.0) * b.c1 * b.c1 * first * second)
}

/// Improved sample size `max(p, t, M Ψ)`.
pub fn new_required_n<T: Scalar>(b: &BoundInputs<T>) -> Result<T> {
    Ok(T::count(b.spectrum.len())
        .max(b.t)
        .max(b.m_factor * psi(b)?))
}

/// Alternative form `80c1² t λ_i/(q²g_i) Σ_{j≠i} λ_j/|λ_j-λ_i|`, applicable
/// only when `λ_i/g_i >= 1`.
pub fn psi_alt<T: Scalar>(b: &BoundInputs<T>) -> Result<T> {
    let s = &b.spectrum;
    let g = spectral_gap(s, b.i)?;
    let li = s.get(b.i);
    if li / g < T::one() {
        return Err(Error::NotApplicable {
            ratio: (li / g).as_f64(),
        });
    }
    Ok(T::lit(80.0) * b.c1 * b.c1 * b.t * li / (b.q * b.q * g) * gap_weighted_sum(s, b.i)?)
}

/// `(4c1²/n) (λ_k ν̃_k²) max((1 + λ_k/g_k) t, (3/2) Σ_{j≠k} λ_j/|λ_j-λ_k|)`
/// where `λ_k ν̃_k² = max_{j≠k} λ_j/|λ_j-λ_k|`.
pub fn phi<T: Scalar>(s: &Spectrum<T>, n: usize, t: T, k: usize, c1: T) -> Result<T> {
    let g = spectral_gap(s, k)?;
    let lk = s.get(k);
    let weight = max_gap_ratio(s, k)?;
    let second = ((T::one() + lk / g) * t).max(T::lit(1.5) * gap_weighted_sum(s, k)?);
    Ok(T::lit(4.0) * c1 * c1 / T::count(n) * weight * second)
}

/// `(c1² ‖ν²λ‖_∞ / n) max(‖ν²λ‖_∞ t, Σ ν_j² λ_j)`: high-probability bound on
/// `‖E(ν)‖²` for the rescaled error `Diag(ν) E Diag(ν)`.
pub fn xi<T: Scalar>(s: &Spectrum<T>, n: usize, t: T, nu: &[T], c1: T) -> Result<T> {
    if nu.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            found: nu.len(),
        });
    }
    if nu.iter().any(|v| !(*v >= T::zero())) {
        return Err(Error::PreconditionViolated("ν must be non-negative".into()));
    }
    require_n_at_least(n, s.len(), t)?;
    let weighted: Vec<T> = nu
        .iter()
        .zip(s.values())
        .map(|(&v, &l)| v * v * l)
        .collect();
    let sup = weighted.iter().copied().fold(T::zero(), T::max);
    let sum: T = weighted.iter().copied().sum();
    Ok(c1 * c1 * sup / T::count(n) * (sup * t).max(sum))
}

/// Smallest `c` for which at least `ceil((1 - e^{-t}) * len)` of the samples
/// satisfy `sample <= kl_bound(s, n, t, c)`.
pub fn calibrate_c1<T: Scalar>(e_norm_samples: &[T], s: &Spectrum<T>, n: usize, t: T) -> Result<T> {
    if e_norm_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let unit = kl_bound(s, n, t, T::one())?;
    let mut sorted = e_norm_samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let need = coverage_count(sorted.len(), t.as_f64());
    Ok(sorted[need - 1] / unit)
}

/// `ceil((1 - e^{-t}) * count)`, at least 1.
pub fn coverage_count(count: usize, t: f64) -> usize {
    let level = 1.0 - (-t).exp();
    // Strip representation noise so exact products do not round up.
    let raw = level * count as f64;
    ((raw - 1e-9).ceil() as usize).clamp(1, count)
}

/// Every bound for one target and sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub kl_norm_bound: T,
    /// `2 / g_i`: multiply by `‖E‖` for the sin θ bound.
    pub sin_theta_bound_factor: T,
    pub psi: T,
    pub psi_alt: Option<T>,
    pub old_n: T,
    pub new_n: T,
    pub phi_at_n: T,
    /// `Ξ(n, t, ν(i))`.
    pub xi_at_n: T,
}

impl<T: Scalar> BoundReport<T> {
    pub fn compute(b: &BoundInputs<T>, n: usize) -> Result<Self> {
        let s = &b.spectrum;
        let psi_alt = match psi_alt(b) {
            Ok(v) => Some(v),
            Err(Error::NotApplicable { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            kl_norm_bound: kl_bound(s, n, b.t, b.c1)?,
            sin_theta_bound_factor: T::lit(2.0) / spectral_gap(s, b.i)?,
            psi: psi(b)?,
            psi_alt,
            old_n: old_required_n(b)?,
            new_n: new_required_n(b)?,
            phi_at_n: phi(s, n, b.t, b.i, b.c1)?,
            xi_at_n: xi(s, n, b.t, &conditioned_nu(s, b.i)?, b.c1)?,
        })
    }
}
