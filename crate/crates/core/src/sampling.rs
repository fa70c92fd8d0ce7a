//! Reproducible Gaussian data in the population eigenbasis.
//!
//! Every trial owns an [`RngStream`]: a ChaCha8 keystream keyed by the master
//! seed with the trial index as stream id, so trials can be evaluated in any
//! order or concurrently and still draw identical numbers. Normals come from
//! the inverse normal CDF applied to one 64-bit uniform each.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::scalar::Scalar;
use crate::spectrum::Spectrum;

/// Counter-based random stream for one trial.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    trial_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trial_index);
        Self {
            master_seed,
            trial_index,
            rng,
        }
    }

    /// Stream positioned after `draw_counter` 32-bit output words.
    pub fn at(master_seed: u64, trial_index: u64, draw_counter: u128) -> Self {
        let mut s = Self::new(master_seed, trial_index);
        s.rng.set_word_pos(draw_counter);
        s
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trial_index(&self) -> u64 {
        self.trial_index
    }

    /// Number of 32-bit words consumed so far.
    pub fn draw_counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform on the open interval `(0, 1)` with 53 bits of resolution.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// One standard normal variate by inverse CDF; advances the stream by one
/// 64-bit draw.
pub fn standard_normal(stream: &mut RngStream) -> f64 {
    let u = stream.uniform_open();
    Normal::standard().inverse_cdf(u)
}

/// `n x p` data matrix, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T>(Matrix<T>);

impl<T: Scalar> DataMatrix<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::PreconditionViolated(
                "data matrix needs n >= 1 and p >= 1".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn p(&self) -> usize {
        self.0.cols()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn to_csv(&self) -> String {
        self.0.to_csv()
    }
}

/// Draws `n` i.i.d. rows of `N(0, Diag(λ))`; entry `(r, j)` is
/// `sqrt(λ_j) * z` with `z` drawn in row-major order.
pub fn sample_data<T: Scalar>(
    s: &Spectrum<T>,
    n: usize,
    stream: &mut RngStream,
) -> Result<DataMatrix<T>> {
    if n == 0 {
        return Err(Error::PreconditionViolated("n must be at least 1".into()));
    }
    let scales: Vec<T> = s.values().iter().map(|v| v.sqrt()).collect();
    let mut data = Vec::with_capacity(n * s.len());
    for _ in 0..n {
        for &sc in &scales {
            data.push(sc * T::lit(standard_normal(stream)));
        }
    }
    DataMatrix::new(Matrix::from_row_major(n, s.len(), data)?)
}

/// Maximum-likelihood covariance `(1/n) XᵀX` (no mean subtraction).
pub fn ml_covariance<T: Scalar>(x: &DataMatrix<T>) -> SymMatrix<T> {
    let (n, p) = (x.n(), x.p());
    let m = x.as_matrix();
    let mut acc = Matrix::zeros(p, p);
    for r in 0..n {
        let row = m.row(r);
        for i in 0..p {
            let xi = row[i];
            if xi == T::zero() {
                continue;
            }
            for j in i..p {
                acc[(i, j)] = acc[(i, j)] + xi * row[j];
            }
        }
    }
    let inv_n = T::one() / T::count(n);
    for i in 0..p {
        for j in i..p {
            let v = acc[(i, j)] * inv_n;
            acc[(i, j)] = v;
            acc[(j, i)] = v;
        }
    }
    SymMatrix::from_upper(acc)
}

/// Subtracts column means. Off by default in the experiment pipeline since
/// the data are mean-zero by construction.
pub fn center_columns<T: Scalar>(x: &DataMatrix<T>) -> DataMatrix<T> {
    let (n, p) = (x.n(), x.p());
    let m = x.as_matrix();
    let means: Vec<T> = (0..p)
        .map(|j| (0..n).map(|r| m[(r, j)]).sum::<T>() / T::count(n))
        .collect();
    let mut out = m.clone();
    for r in 0..n {
        for j in 0..p {
            out[(r, j)] = out[(r, j)] - means[j];
        }
    }
    DataMatrix(out)
}

/// Test hook: rotates every sample row by the orthogonal matrix `q`
/// (`X -> X q`). Operator norms and inner products are invariant under it.
pub fn rotate_rows<T: Scalar>(x: &DataMatrix<T>, q: &Matrix<T>) -> Result<DataMatrix<T>> {
    Ok(DataMatrix(x.as_matrix().matmul(q)?))
}

/// Draws the maximum-likelihood covariance directly from its Wishart law via
/// the Bartlett decomposition: `n Σ̂ = L B Bᵀ Lᵀ` with `L = Diag(sqrt(λ))`,
/// `B` lower triangular, `B_jj = sqrt(χ²_{n-j})` and standard normal entries
/// below the diagonal. Cost is independent of `n`; requires `n >= p`.
pub fn sample_covariance_wishart<T: Scalar>(
    s: &Spectrum<T>,
    n: usize,
    stream: &mut RngStream,
) -> Result<SymMatrix<T>> {
    let p = s.len();
    if n < p {
        return Err(Error::PreconditionViolated(format!(
            "Wishart sampling needs n >= p (n = {n}, p = {p})"
        )));
    }
    let mut b = vec![0.0f64; p * p];
    for j in 0..p {
        let dof = (n - j) as f64;
        let chi = ChiSquared::new(dof).expect("positive degrees of freedom");
        b[j * p + j] = chi.sample(stream).sqrt();
        for k in 0..j {
            b[j * p + k] = standard_normal(stream);
        }
    }
    let scales: Vec<f64> = s.values().iter().map(|v| v.as_f64().sqrt()).collect();
    let inv_n = 1.0 / n as f64;
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            // (B Bᵀ)_ij = Σ_k B_ik B_jk over k <= min(i, j) = i.
            let w: f64 = (0..=i).map(|k| b[i * p + k] * b[j * p + k]).sum();
            let v = T::lit(scales[i] * scales[j] * w * inv_n);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(SymMatrix::from_upper(out))
}

/// Estimation error `E = Σ̂ - Diag(λ)`.
pub fn error_matrix<T: Scalar>(sigma_hat: &SymMatrix<T>, s: &Spectrum<T>) -> Result<SymMatrix<T>> {
    if sigma_hat.order() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            found: sigma_hat.order(),
        });
    }
    sigma_hat.sub(&SymMatrix::from_diag(s.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{op_norm, sym_eigvals};

    fn spec(v: &[f64]) -> Spectrum<f64> {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normal_is_deterministic() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        for _ in 0..10 {
            assert_eq!(standard_normal(&mut a), standard_normal(&mut b));
        }
        assert_eq!(a.draw_counter(), 20);
        let mut c = RngStream::at(7, 3, 10);
        let mut d = RngStream::new(7, 3);
        for _ in 0..5 {
            standard_normal(&mut d);
        }
        assert_eq!(standard_normal(&mut c), standard_normal(&mut d));
    }

    #[test]
    fn streams_differ_by_trial() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 1);
        assert_ne!(standard_normal(&mut a), standard_normal(&mut b));
    }

    #[test]
    fn normal_moments() {
        let mut s = RngStream::new(2024, 0);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| standard_normal(&mut s)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "var {var}");
    }

    #[test]
    fn sample_data_scaling_law() {
        let x4 = sample_data(&spec(&[4.0, 1.0]), 50, &mut RngStream::new(1, 0)).unwrap();
        let x1 = sample_data(&spec(&[1.0, 1.0]), 50, &mut RngStream::new(1, 0)).unwrap();
        for r in 0..50 {
            assert_eq!(x4.as_matrix()[(r, 0)], 2.0 * x1.as_matrix()[(r, 0)]);
            assert_eq!(x4.as_matrix()[(r, 1)], x1.as_matrix()[(r, 1)]);
        }
        let again = sample_data(&spec(&[4.0, 1.0]), 50, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(again, x4);
        assert!(sample_data(&spec(&[1.0]), 0, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn sample_data_column_variances() {
        let p = 16;
        let n = 10_000;
        let lam: Vec<f64> = (1..=p).rev().map(|j| j as f64).collect();
        let x = sample_data(&spec(&lam), n, &mut RngStream::new(99, 0)).unwrap();
        let cov = ml_covariance(&x);
        for (j, &l) in lam.iter().enumerate() {
            let tol = 5.0 * (2.0 / n as f64).sqrt() * l;
            assert!((cov[(j, j)] - l).abs() <= tol, "column {j}");
        }
    }

    #[test]
    fn ml_covariance_examples() {
        let x = DataMatrix::new(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(
            ml_covariance(&x),
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap()
        );
        let z = DataMatrix::new(Matrix::<f64>::zeros(3, 2)).unwrap();
        assert_eq!(ml_covariance(&z), SymMatrix::zeros(2));
        let e = DataMatrix::new(Matrix::identity(2)).unwrap();
        assert_eq!(ml_covariance(&e), SymMatrix::from_diag(&[0.5, 0.5]));
    }

    #[test]
    fn ml_covariance_is_psd() {
        let x = sample_data(
            &spec(&[5.0, 3.0, 2.0, 1.0, 0.5]),
            3,
            &mut RngStream::new(5, 5),
        )
        .unwrap();
        let c = ml_covariance(&x);
        let vals = sym_eigvals(&c).unwrap();
        let norm = op_norm(&c).unwrap();
        assert!(*vals.last().unwrap() >= -1e-10 * norm);
    }

    #[test]
    fn error_matrix_examples() {
        let s = spec(&[3.0, 2.0]);
        let d = SymMatrix::from_diag(s.values());
        assert_eq!(error_matrix(&d, &s).unwrap(), SymMatrix::zeros(2));
        let shifted = d.add(&SymMatrix::identity(2)).unwrap();
        assert_eq!(error_matrix(&shifted, &s).unwrap(), SymMatrix::identity(2));
        assert!(error_matrix(&SymMatrix::identity(3), &s).is_err());

        let x = sample_data(&s, 20, &mut RngStream::new(3, 1)).unwrap();
        let c = ml_covariance(&x);
        let e = error_matrix(&c, &s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = c[(i, j)] - if i == j { s.get(i) } else { 0.0 };
                assert_eq!(e[(i, j)], expect);
            }
        }
    }

    #[test]
    fn centering_removes_means() {
        let x = sample_data(&spec(&[2.0, 1.0]), 40, &mut RngStream::new(8, 0)).unwrap();
        let c = center_columns(&x);
        for j in 0..2 {
            let m: f64 = (0..40).map(|r| c.as_matrix()[(r, j)]).sum();
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_preserves_error_norm() {
        let s = spec(&[4.0, 2.0, 1.0]);
        let x = sample_data(&s, 200, &mut RngStream::new(11, 0)).unwrap();
        let (c, sn) = (0.6, 0.8);
        let q =
            Matrix::from_rows(&[vec![c, -sn, 0.0], vec![sn, c, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let e = error_matrix(&ml_covariance(&x), &s).unwrap();
        // In the rotated basis the population covariance is Qᵀ Σ Q.
        let sigma_rot = q
            .transpose()
            .matmul(&Matrix::from_diag(s.values()))
            .unwrap()
            .matmul(&q)
            .unwrap();
        let xr = rotate_rows(&x, &q).unwrap();
        let er = ml_covariance(&xr)
            .sub(&SymMatrix::new(sigma_rot).unwrap())
            .unwrap();
        let (a, b) = (op_norm(&e).unwrap(), op_norm(&er).unwrap());
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn wishart_is_deterministic_and_unbiased() {
        let s = spec(&[4.0, 2.0, 1.0]);
        let a = sample_covariance_wishart(&s, 50, &mut RngStream::new(4, 2)).unwrap();
        let b = sample_covariance_wishart(&s, 50, &mut RngStream::new(4, 2)).unwrap();
        assert_eq!(a, b);
        assert!(sample_covariance_wishart(&s, 2, &mut RngStream::new(4, 2)).is_err());

        // Mean over many draws approaches Diag(λ); entry variance is
        // (λ_i λ_j + δ_ij λ_i²)/n, so 2000 draws at n = 10 pin the mean to ~1e-1.
        let trials = 2000;
        let n = 10;
        let mut mean = SymMatrix::zeros(3);
        for t in 0..trials {
            let c = sample_covariance_wishart(&s, n, &mut RngStream::new(17, t)).unwrap();
            mean = mean.add(&c).unwrap();
        }
        let mean = mean.scale(1.0 / trials as f64);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { s.get(i) } else { 0.0 };
                let sd = ((s.get(i) * s.get(j) + if i == j { s.get(i).powi(2) } else { 0.0 })
                    / (n as f64 * trials as f64))
                    .sqrt();
                assert!((mean[(i, j)] - target).abs() <= 5.0 * sd, "({i},{j})");
            }
        }
    }
}
