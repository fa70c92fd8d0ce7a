//! Population spectra and the scalar quantities derived from them.
//!
//! A [`Spectrum`] holds the eigenvalues of the population covariance in
//! non-increasing order. Equal values are allowed so that degenerate inputs can
//! be represented; every gap-dependent query rejects them with
//! [`Error::RepeatedEigenvalue`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordered population eigenvalues `λ_1 >= ... >= λ_p > 0`.
///
/// Serializes as a plain JSON array of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct Spectrum<T> {
    values: Vec<T>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpectrum("spectrum is empty".into()));
        }
        if let Some((j, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v <= T::zero())
        {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalue {j} = {v} is not strictly positive and finite"
            )));
        }
        if let Some(j) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalues not non-increasing at index {}",
                j + 1
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Dimension `p`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn largest(&self) -> T {
        self.values[0]
    }

    pub fn trace(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// True if another eigenvalue equals `λ_i` exactly.
    pub fn is_repeated(&self, i: usize) -> bool {
        let li = self.values[i];
        self.values
            .iter()
            .enumerate()
            .any(|(j, &lj)| j != i && lj == li)
    }

    pub fn stats(&self) -> SpectrumStats<T> {
        let p = self.len();
        let gaps = (0..p)
            .map(|i| {
                (0..p)
                    .filter(|&j| j != i)
                    .map(|j| (self.values[i] - self.values[j]).abs())
                    .fold(T::infinity(), T::min)
            })
            .collect();
        SpectrumStats {
            effective_rank: effective_rank(self),
            gaps,
            trace: self.trace(),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Result<Spectrum<U>> {
        Spectrum::new(self.values.iter().map(|&v| f(v)).collect())
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Spectrum<T> {
    type Error = Error;

    fn try_from(values: Vec<T>) -> Result<Self> {
        Spectrum::new(values)
    }
}

impl<T> From<Spectrum<T>> for Vec<T> {
    fn from(s: Spectrum<T>) -> Vec<T> {
        s.values
    }
}

/// Summary quantities of a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumStats<T> {
    pub effective_rank: T,
    /// `min_{j != i} |λ_i - λ_j|` per index; 0 marks a repeated eigenvalue and
    /// infinity the single-eigenvalue case.
    pub gaps: Vec<T>,
    pub trace: T,
}

/// Effective rank `(Σ_j λ_j) / λ_1`.
pub fn effective_rank<T: Scalar>(s: &Spectrum<T>) -> T {
    s.trace() / s.largest()
}

/// Spectral gap `min_{j != i} |λ_i - λ_j|`.
pub fn spectral_gap<T: Scalar>(s: &Spectrum<T>, i: usize) -> Result<T> {
    if s.len() < 2 {
        return Err(Error::DimensionTooSmall);
    }
    // The minimum is attained at a neighbour in sorted order.
    let li = s.get(i);
    let below = (i + 1 < s.len()).then(|| li - s.get(i + 1));
    let above = (i > 0).then(|| s.get(i - 1) - li);
    let gap = match (above, below) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("p >= 2"),
    };
    if gap <= T::zero() {
        return Err(Error::RepeatedEigenvalue { index: i });
    }
    Ok(gap)
}

/// `Σ_{j != i} λ_j / |λ_j - λ_i|`, the spectrum-dependent factor of the
/// improved sample-size bound. Zero for a one-dimensional spectrum.
pub fn gap_weighted_sum<T: Scalar>(s: &Spectrum<T>, i: usize) -> Result<T> {
    let li = s.get(i);
    let mut sum = T::zero();
    for (j, &lj) in s.values().iter().enumerate() {
        if j == i {
            continue;
        }
        let d = (lj - li).abs();
        if d == T::zero() {
            return Err(Error::RepeatedEigenvalue { index: i });
        }
        sum = sum + lj / d;
    }
    Ok(sum)
}

/// `max_{j != i} λ_j / |λ_j - λ_i|` (zero when `p = 1`).
pub fn max_gap_ratio<T: Scalar>(s: &Spectrum<T>, i: usize) -> Result<T> {
    let li = s.get(i);
    let mut best = T::zero();
    for (j, &lj) in s.values().iter().enumerate() {
        if j == i {
            continue;
        }
        let d = (lj - li).abs();
        if d == T::zero() {
            return Err(Error::RepeatedEigenvalue { index: i });
        }
        best = best.max(lj / d);
    }
    Ok(best)
}

/// Multiplies every eigenvalue by `target / Σ λ_j`.
pub fn rescale_to_trace<T: Scalar>(s: &Spectrum<T>, target: T) -> Result<Spectrum<T>> {
    if !(target > T::zero()) || !target.is_finite() {
        return Err(Error::InvalidSpectrum(format!(
            "rescale target {target} must be positive"
        )));
    }
    let factor = target / s.trace();
    s.map(|v| v * factor)
}

/// Parameters of the three-block synthetic spectrum: `top_count` spikes of
/// size `top_scale * p`, a lattice of `ceil(p^(1-β))` equally spaced values
/// centred at `p^β` spanning `lattice_spread * p^β`, and a bulk at level 1.
/// The result is rescaled to trace `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaModelParams {
    pub p: usize,
    pub beta: f64,
    #[serde(default = "default_top_count")]
    pub top_count: usize,
    #[serde(default = "default_top_scale")]
    pub top_scale: f64,
    #[serde(default = "default_lattice_spread")]
    pub lattice_spread: f64,
}

fn default_top_count() -> usize {
    3
}
fn default_top_scale() -> f64 {
    1.0
}
fn default_lattice_spread() -> f64 {
    0.5
}

const BASE_LEVEL: f64 = 1.0;

impl BetaModelParams {
    pub fn new(p: usize, beta: f64) -> Self {
        Self {
            p,
            beta,
            top_count: default_top_count(),
            top_scale: default_top_scale(),
            lattice_spread: default_lattice_spread(),
        }
    }

    /// Number of lattice eigenvalues, `ceil(p^(1-β))`.
    pub fn lattice_len(&self) -> usize {
        // Guard against p^(1-β) landing a hair above an integer.
        ((self.p as f64).powf(1.0 - self.beta) - 1e-9)
            .ceil()
            .max(1.0) as usize
    }

    /// Index range of the lattice block in the sorted spectrum.
    pub fn lattice_block(&self) -> Range<usize> {
        self.top_count..self.top_count + self.lattice_len()
    }

    /// Middle element of the lattice block (lower-index middle for even sizes).
    pub fn middle_target(&self) -> usize {
        self.top_count + (self.lattice_len() - 1) / 2
    }
}

/// Builds the β-model spectrum described by `params`.
pub fn make_beta_model<T: Scalar>(params: &BetaModelParams) -> Result<Spectrum<T>> {
    let BetaModelParams {
        p,
        beta,
        top_count,
        top_scale,
        lattice_spread,
    } = *params;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidShape(format!("beta = {beta} not in (0,1)")));
    }
    if !(top_scale > 0.0) || !(lattice_spread >= 0.0) {
        return Err(Error::InvalidShape(
            "top_scale must be positive and lattice_spread non-negative".into(),
        ));
    }
    let m = params.lattice_len();
    if top_count + m >= p {
        return Err(Error::InvalidShape(format!(
            "top_count + lattice size = {} leaves no bulk for p = {p}",
            top_count + m
        )));
    }
    let pf = T::count(p);
    let center = pf.powf(T::lit(beta));
    let spread = T::lit(lattice_spread) * center;
    if m > 1 && spread == T::zero() {
        return Err(Error::InvalidShape(
            "lattice_spread = 0 collapses the lattice block".into(),
        ));
    }
    let two = T::lit(2.0);
    let lattice: Vec<T> = if m == 1 {
        vec![center]
    } else {
        let step = spread / T::count(m - 1);
        (0..m)
            .map(|k| center + spread / two - T::count(k) * step)
            .collect()
    };
    let top = T::lit(top_scale) * pf;
    let base = T::lit(BASE_LEVEL);
    let lowest = *lattice.last().expect("lattice non-empty");
    let highest = lattice[0];
    if lowest <= base {
        return Err(Error::InvalidShape(format!(
            "lattice value {lowest} does not exceed the base level"
        )));
    }
    if top_count > 0 && highest >= top {
        return Err(Error::InvalidShape(format!(
            "lattice value {highest} reaches the top block {top}"
        )));
    }
    let mut values = Vec::with_capacity(p);
    values.extend(std::iter::repeat_n(top, top_count));
    values.extend(lattice);
    values.extend(std::iter::repeat_n(base, p - top_count - m));
    rescale_to_trace(&Spectrum::new(values)?, pf)
}
