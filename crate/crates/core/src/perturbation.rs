//! Exact eigenvector perturbation machinery.
//!
//! For a sample eigenpair `(λ̂_i, η_i)` of `Σ̂ = Diag(λ) + E` and a reference
//! axis `k`, normalise `η_i` so that its `k`-th coordinate is 1 and write
//! `Δμ = η_i - e_k`. With `D_k = -Diag(1/(λ_j - λ̂_i))` (zero at `k`) and `P_k`
//! the projector that zeroes coordinate `k`, the rows `j != k` of the
//! eigen-equation give exactly
//!
//! ```text
//! (I - D_k E P_k) Δμ = D_k (E_1k, ..., 0, ..., E_pk)ᵀ
//! ```
//!
//! This module builds those operators, evaluates the identity by a direct
//! solve and by its Neumann series, and checks the deterministic inequality
//! chain that bounds `‖Δμ‖` through rescaled error matrices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    diag_scale, norm2, op_norm, solve_linear, EigenDecomposition, Matrix, SymMatrix,
};
use crate::scalar::{inequality_slack, le_with_slack, Scalar};
use crate::spectrum::{max_gap_ratio, spectral_gap, Spectrum};

/// `|λ_j - λ̂_i|` below this is treated as a degenerate shift.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;
/// `|η_k|` below this means the eigenvector is orthogonal to axis `k`.
pub const ORTHOGONALITY_THRESHOLD: f64 = 1e-14;

/// Target eigenvector `i` of `Σ` together with the sample quantities it is
/// compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetContext<T> {
    pub i: usize,
    /// `i`-th largest eigenvalue of `Σ̂`.
    pub lambda_hat_i: T,
    /// Population index closest to `λ̂_i`.
    pub i_star: usize,
    pub eta_unit: Vec<T>,
}

impl<T: Scalar> TargetContext<T> {
    pub fn from_decomposition(s: &Spectrum<T>, eig: &EigenDecomposition<T>, i: usize) -> Self {
        let lambda_hat_i = eig.eigenvalues[i];
        Self {
            i,
            lambda_hat_i,
            i_star: match_index(s, lambda_hat_i),
            eta_unit: eig.vector(i),
        }
    }
}

/// `argmin_k |λ_k - λ̂|`, smallest index on ties.
pub fn match_index<T: Scalar>(s: &Spectrum<T>, lambda_hat: T) -> usize {
    let mut best = 0;
    let mut best_d = (s.get(0) - lambda_hat).abs();
    for (k, &l) in s.values().iter().enumerate().skip(1) {
        let d = (l - lambda_hat).abs();
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Rescales a unit eigenvector so its `k`-th coordinate is `+1` and returns
/// `(η - e_k, tan θ)` where `tan θ = ‖η - e_k‖`.
pub fn normalize_against<T: Scalar>(eta_unit: &[T], k: usize) -> Result<(Vec<T>, T)> {
    let pivot = eta_unit[k];
    if pivot.abs() < T::lit(ORTHOGONALITY_THRESHOLD) {
        return Err(Error::OrthogonalTarget { index: k });
    }
    let mut delta: Vec<T> = eta_unit.iter().map(|&v| v / pivot).collect();
    delta[k] = T::zero();
    let tan = norm2(&delta);
    Ok((delta, tan))
}

/// `sin ∠(e_k, η) = sqrt(1 - η_k²)`, clamped to `[0, 1]`.
pub fn sin_theta<T: Scalar>(k: usize, eta_unit: &[T]) -> T {
    let c = eta_unit[k];
    (T::one() - c * c).max(T::zero()).min(T::one()).sqrt()
}

/// Diagonal operators for reference axis `k` and shift `λ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationOperators<T> {
    /// Reference axis; `P_k` zeroes this coordinate.
    pub k: usize,
    pub lambda_hat: T,
    /// `-1 / (λ_j - λ̂)`, zero at `k`.
    pub d_k: Vec<T>,
    /// `sqrt|d_k|`; coincides with `ν̃` off `k`.
    pub abs_d_half: Vec<T>,
    /// `sign(d_k)`, zero at `k`.
    pub j_signs: Vec<T>,
    pub nu_tilde: Vec<T>,
    pub nu: Vec<T>,
}

/// `max_{j != k} sqrt(λ_j) / (sqrt|λ_j - λ_k| sqrt(λ_k))`.
pub fn nu_tilde_at<T: Scalar>(s: &Spectrum<T>, k: usize) -> Result<T> {
    Ok((max_gap_ratio(s, k)? / s.get(k)).sqrt())
}

/// Deterministic rescaling vector `ν(k)`: `sqrt(2) |λ_j - λ_k|^{-1/2}` off
/// `k` and `ν̃_k` at `k`.
pub fn conditioned_nu<T: Scalar>(s: &Spectrum<T>, k: usize) -> Result<Vec<T>> {
    let at_k = nu_tilde_at(s, k)?;
    let root2 = T::lit(2.0).sqrt();
    Ok(s.values()
        .iter()
        .enumerate()
        .map(|(j, &lj)| {
            if j == k {
                at_k
            } else {
                root2 / (lj - s.get(k)).abs().sqrt()
            }
        })
        .collect())
}

pub fn build_operators<T: Scalar>(
    s: &Spectrum<T>,
    lambda_hat: T,
    k: usize,
) -> Result<PerturbationOperators<T>> {
    let p = s.len();
    let nu = conditioned_nu(s, k)?;
    let mut d_k = vec![T::zero(); p];
    let mut abs_d_half = vec![T::zero(); p];
    let mut j_signs = vec![T::zero(); p];
    let mut nu_tilde = vec![T::zero(); p];
    for j in 0..p {
        if j == k {
            nu_tilde[j] = nu[k];
            continue;
        }
        let shift = s.get(j) - lambda_hat;
        if shift.abs() < T::lit(DEGENERACY_THRESHOLD) {
            return Err(Error::DegenerateShift { index: j });
        }
        d_k[j] = -T::one() / shift;
        abs_d_half[j] = d_k[j].abs().sqrt();
        j_signs[j] = d_k[j].signum();
        nu_tilde[j] = abs_d_half[j];
    }
    Ok(PerturbationOperators {
        k,
        lambda_hat,
        d_k,
        abs_d_half,
        j_signs,
        nu_tilde,
        nu,
    })
}

fn check_order<T: Scalar>(e: &SymMatrix<T>, ops: &PerturbationOperators<T>) -> Result<()> {
    if e.order() != ops.d_k.len() {
        return Err(Error::DimensionMismatch {
            expected: ops.d_k.len(),
            found: e.order(),
        });
    }
    Ok(())
}

/// Exact `Δμ_{k,i} = (I - D_k E P_k)^{-1} D_k (column k of E, k-th entry 0)`.
pub fn delta_mu_formula<T: Scalar>(
    e: &SymMatrix<T>,
    ops: &PerturbationOperators<T>,
) -> Result<Vec<T>> {
    check_order(e, ops)?;
    let p = e.order();
    let k = ops.k;
    let mut a = Matrix::identity(p);
    for j in 0..p {
        for l in 0..p {
            if l != k {
                a[(j, l)] = a[(j, l)] - ops.d_k[j] * e[(j, l)];
            }
        }
    }
    let rhs: Vec<T> = (0..p)
        .map(|j| {
            if j == k {
                T::zero()
            } else {
                ops.d_k[j] * e[(j, k)]
            }
        })
        .collect();
    solve_linear(&a, &rhs)
}

/// `Λ = |D_k|^{1/2} E |D_k|^{1/2}`; row and column `k` vanish.
pub fn lambda_matrix<T: Scalar>(
    e: &SymMatrix<T>,
    ops: &PerturbationOperators<T>,
) -> Result<SymMatrix<T>> {
    diag_scale(e, &ops.abs_d_half)
}

/// `v_j = sqrt(λ_j / |λ_j - λ̂|) N_{j,k}` with `N_{s,t} = sqrt(n/(λ_s λ_t)) E_st`,
/// and `v_k = 0`.
pub fn v_vector<T: Scalar>(
    e: &SymMatrix<T>,
    s: &Spectrum<T>,
    ops: &PerturbationOperators<T>,
    n: usize,
) -> Result<Vec<T>> {
    check_order(e, ops)?;
    let k = ops.k;
    let nf = T::count(n);
    let lk = s.get(k);
    (0..s.len())
        .map(|j| {
            if j == k {
                return Ok(T::zero());
            }
            let lj = s.get(j);
            let shift = (lj - ops.lambda_hat).abs();
            if shift < T::lit(DEGENERACY_THRESHOLD) {
                return Err(Error::DegenerateShift { index: j });
            }
            let n_jk = (nf / (lj * lk)).sqrt() * e[(j, k)];
            Ok((lj / shift).sqrt() * n_jk)
        })
        .collect()
}

/// Partial sums of the rescaled Neumann series
/// `Δμ = |D|^{1/2} (I + Σ_{m>=1} (JΛ)^m) J |D|^{1/2} E_{·k}`;
/// element `m` of the result holds the sum truncated after `m` powers.
pub fn neumann_partial_sums<T: Scalar>(
    e: &SymMatrix<T>,
    ops: &PerturbationOperators<T>,
    terms: usize,
) -> Result<Vec<Vec<T>>> {
    check_order(e, ops)?;
    let p = e.order();
    let k = ops.k;
    let lambda = lambda_matrix(e, ops)?;
    let mut term: Vec<T> = (0..p)
        .map(|j| ops.j_signs[j] * ops.abs_d_half[j] * e[(j, k)])
        .collect();
    let mut acc = term.clone();
    let finish = |acc: &[T]| -> Vec<T> {
        acc.iter()
            .zip(&ops.abs_d_half)
            .map(|(&a, &d)| a * d)
            .collect()
    };
    let mut out = Vec::with_capacity(terms + 1);
    out.push(finish(&acc));
    for _ in 0..terms {
        let next = lambda.as_matrix().matvec(&term)?;
        term = next
            .iter()
            .zip(&ops.j_signs)
            .map(|(&v, &s)| v * s)
            .collect();
        acc.iter_mut().zip(&term).for_each(|(a, &t)| *a = *a + t);
        out.push(finish(&acc));
    }
    Ok(out)
}

pub fn neumann_partial_sum<T: Scalar>(
    e: &SymMatrix<T>,
    ops: &PerturbationOperators<T>,
    terms: usize,
) -> Result<Vec<T>> {
    Ok(neumann_partial_sums(e, ops, terms)?
        .pop()
        .expect("at least one partial sum"))
}

/// First-order approximation `Δμ_j ≈ -E_ji / (λ_j - λ_i)`, kept as a
/// diagnostic against the exact identity.
pub fn first_order_delta_mu<T: Scalar>(
    e: &SymMatrix<T>,
    s: &Spectrum<T>,
    i: usize,
) -> Result<Vec<T>> {
    let li = s.get(i);
    (0..s.len())
        .map(|j| {
            if j == i {
                return Ok(T::zero());
            }
            let d = s.get(j) - li;
            if d == T::zero() {
                return Err(Error::RepeatedEigenvalue { index: i });
            }
            Ok(-e[(j, i)] / d)
        })
        .collect()
}

/// `‖a - b‖ / ‖b‖` (absolute difference when `b = 0`).
pub fn relative_difference<T: Scalar>(a: &[T], b: &[T]) -> T {
    let diff: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let scale = norm2(b);
    if scale > T::zero() {
        norm2(&diff) / scale
    } else {
        norm2(&diff)
    }
}

/// Returns `(resolvent_shift, gap_ratio_cap)`:
/// `1/|λ_j - λ̂| <= 2/|λ_j - λ_{i*}|` and
/// `λ_j/|λ_j - λ_{i*}| <= 1 + λ_{i*}/g_{i*}` for all `j != i*`.
pub fn check_shift_inequalities<T: Scalar>(
    s: &Spectrum<T>,
    lambda_hat: T,
    i_star: usize,
) -> Result<(bool, bool)> {
    let ls = s.get(i_star);
    if s.is_repeated(i_star) {
        return Err(Error::RepeatedEigenvalue { index: i_star });
    }
    if s.len() == 1 {
        return Ok((true, true));
    }
    let gap = spectral_gap(s, i_star)?;
    let slack = inequality_slack::<T>();
    let cap = T::one() + ls / gap;
    let mut resolvent_shift = true;
    let mut gap_ratio_cap = true;
    for (j, &lj) in s.values().iter().enumerate() {
        if j == i_star {
            continue;
        }
        let to_star = (lj - ls).abs();
        // Cross-multiplied form of 1/|λ_j - λ̂| <= 2/|λ_j - λ_{i*}|.
        resolvent_shift &= le_with_slack(to_star, T::lit(2.0) * (lj - lambda_hat).abs(), slack);
        gap_ratio_cap &= le_with_slack(lj / to_star, cap, slack);
    }
    Ok((resolvent_shift, gap_ratio_cap))
}

/// Quantities and outcomes of the deterministic inequality chain for one
/// trial and target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCheck<T> {
    /// `ν̃_k² (λ_k/n) ‖V‖²`.
    pub v_term: T,
    /// `‖W‖²`, W the `k`-th column of `E(ν̃)`.
    pub w_norm_sq: T,
    pub e_nu_tilde_sq: T,
    pub lambda_norm: T,
    pub e_nu_norm: T,
    /// `‖Δμ_{k,i}‖` from the eigenvector normalised against axis `k`.
    pub delta_mu_norm: T,
    /// Right-hand side of the norm bound on `Δμ`; absent when `‖Λ‖ >= 1`.
    pub delta_mu_bound_rhs: Option<T>,
    pub column_lower: bool,
    pub column_upper: bool,
    pub lambda_vs_nu_tilde: bool,
    pub nu_tilde_vs_nu: bool,
    /// Vacuously true when `‖Λ‖ >= 1`.
    pub delta_mu_bound: bool,
}

impl<T: Scalar> ChainCheck<T> {
    pub fn all_hold(&self) -> bool {
        self.column_lower
            && self.column_upper
            && self.lambda_vs_nu_tilde
            && self.nu_tilde_vs_nu
            && self.delta_mu_bound
    }

    pub fn to_f64(&self) -> ChainCheck<f64> {
        ChainCheck {
            v_term: self.v_term.as_f64(),
            w_norm_sq: self.w_norm_sq.as_f64(),
            e_nu_tilde_sq: self.e_nu_tilde_sq.as_f64(),
            lambda_norm: self.lambda_norm.as_f64(),
            e_nu_norm: self.e_nu_norm.as_f64(),
            delta_mu_norm: self.delta_mu_norm.as_f64(),
            delta_mu_bound_rhs: self.delta_mu_bound_rhs.map(Scalar::as_f64),
            column_lower: self.column_lower,
            column_upper: self.column_upper,
            lambda_vs_nu_tilde: self.lambda_vs_nu_tilde,
            nu_tilde_vs_nu: self.nu_tilde_vs_nu,
            delta_mu_bound: self.delta_mu_bound,
        }
    }
}

/// Evaluates
/// `ν̃_k² (λ_k/n) ‖V‖² <= ‖W‖² <= ‖E(ν̃)‖²`, `‖Λ‖ <= ‖E(ν̃)‖`,
/// `‖E(ν̃)‖ <= ‖E(ν)‖` and, when `‖Λ‖ < 1`,
/// `‖Δμ_{k,i}‖ <= sqrt(2/g_k) (1 - ‖Λ‖)^{-1} sqrt(λ_k/n) ‖V‖`
/// with `k = ops.k` (normally `i*`).
pub fn check_chain<T: Scalar>(
    e: &SymMatrix<T>,
    s: &Spectrum<T>,
    ctx: &TargetContext<T>,
    ops: &PerturbationOperators<T>,
    n: usize,
) -> Result<ChainCheck<T>> {
    check_order(e, ops)?;
    let k = ops.k;
    let lk = s.get(k);
    let nf = T::count(n);
    let slack = inequality_slack::<T>();

    let v = v_vector(e, s, ops, n)?;
    let v_norm = norm2(&v);
    let v_term = ops.nu_tilde[k] * ops.nu_tilde[k] * (lk / nf) * v_norm * v_norm;

    let e_nu_tilde = diag_scale(e, &ops.nu_tilde)?;
    let w = e_nu_tilde.column(k);
    let w_norm_sq = w.iter().map(|&x| x * x).sum::<T>();
    let e_nu_tilde_norm = op_norm(&e_nu_tilde)?;
    let e_nu_tilde_sq = e_nu_tilde_norm * e_nu_tilde_norm;

    let lambda_norm = op_norm(&lambda_matrix(e, ops)?)?;
    let e_nu_norm = op_norm(&diag_scale(e, &ops.nu)?)?;

    let (delta_mu, _) = normalize_against(&ctx.eta_unit, k)?;
    let delta_mu_norm = norm2(&delta_mu);

    let delta_mu_bound_rhs = if lambda_norm < T::one() {
        let gap = spectral_gap(s, k)?;
        Some((T::lit(2.0) / gap).sqrt() / (T::one() - lambda_norm) * (lk / nf).sqrt() * v_norm)
    } else {
        None
    };

    Ok(ChainCheck {
        v_term,
        w_norm_sq,
        e_nu_tilde_sq,
        lambda_norm,
        e_nu_norm,
        delta_mu_norm,
        delta_mu_bound_rhs,
        column_lower: le_with_slack(v_term, w_norm_sq, slack),
        column_upper: le_with_slack(w_norm_sq, e_nu_tilde_sq, slack),
        lambda_vs_nu_tilde: le_with_slack(lambda_norm, e_nu_tilde_norm, slack),
        nu_tilde_vs_nu: le_with_slack(e_nu_tilde_norm, e_nu_norm, slack),
        delta_mu_bound: delta_mu_bound_rhs
            .is_none_or(|rhs| le_with_slack(delta_mu_norm, rhs, slack)),
    })
}
