//! Batch sparse self-expressive coding by inexact augmented Lagrange multipliers.
//!
//! Solves
//!
//! ```text
//! min ‖J‖₁ + λ‖E‖   s.t.  X = XZ + E,  Z = J
//! ```
//!
//! alternating a shrinkage step on `J`, a linear solve on `Z` and a proximal
//! step on `E`, followed by multiplier and penalty updates. The system matrix
//! `I + XᵀX` is fixed for a window and factorized once.

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;

use crate::error::{CoreError, Result};
use crate::math;
use crate::model::{NoiseNorm, SolverConfig, SparseCode};
use crate::Matrix;

/// Elementwise shrinkage `sign(m)·max(|m| − τ, 0)`, the proximal map of `τ‖·‖₁`.
pub fn soft_threshold(m: &Matrix, tau: f64) -> Matrix {
    m.map(|v| shrink(v, tau))
}

#[inline]
fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Column-wise shrinkage, the proximal map of `τ‖·‖₂,₁`: every column `q` is
/// scaled by `max(0, 1 − τ/‖q‖₂)`.
pub fn prox_l21_columns(q: &Matrix, tau: f64) -> Matrix {
    let mut out = q.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm <= tau {
            col.fill(0.0);
        } else {
            col *= 1.0 - tau / norm;
        }
    }
    out
}

/// Proximal map of `λ‖E‖` with penalty `μ`, i.e. the `E`-update given `Q`.
pub fn prox_noise(q: &Matrix, lambda: f64, mu: f64, norm: NoiseNorm) -> Matrix {
    match norm {
        NoiseNorm::L21 => prox_l21_columns(q, lambda / mu),
        NoiseNorm::L1 => soft_threshold(q, lambda / mu),
        // argmin λ‖E‖²_F + μ/2 ‖E − Q‖²_F
        NoiseNorm::Fro => q * (mu / (2.0 * lambda + mu)),
    }
}

/// Value of `‖E‖` under the chosen noise norm.
pub fn noise_norm_value(e: &Matrix, norm: NoiseNorm) -> f64 {
    match norm {
        NoiseNorm::L21 => e.column_iter().map(|c| c.norm()).sum(),
        NoiseNorm::L1 => e.iter().map(|v| math::abs(*v)).sum(),
        NoiseNorm::Fro => e.norm_squared(),
    }
}

/// `‖J‖₁ + λ‖E‖`, the objective of the coding problem.
pub fn objective(j: &Matrix, e: &Matrix, lambda: f64, norm: NoiseNorm) -> f64 {
    j.iter().map(|v| math::abs(*v)).sum::<f64>() + lambda * noise_norm_value(e, norm)
}

/// Factorization of `I + XᵀX` for a fixed window.
///
/// When `d < n` the inverse is applied through the Woodbury identity
/// `(I + XᵀX)⁻¹ = I − Xᵀ(I + XXᵀ)⁻¹X`, which only needs a `d × d` factor.
pub struct GramFactor {
    kind: FactorKind,
}

enum FactorKind {
    Full(Cholesky<f64, Dyn>),
    Woodbury { x: Matrix, inner: Cholesky<f64, Dyn> },
}

impl GramFactor {
    pub fn new(x: &Matrix) -> Result<Self> {
        let (d, n) = x.shape();
        let kind = if d < n {
            let mut inner = x * x.transpose();
            for i in 0..d {
                inner[(i, i)] += 1.0;
            }
            let chol = Cholesky::new(inner).ok_or(CoreError::FactorizationFailure)?;
            FactorKind::Woodbury { x: x.clone(), inner: chol }
        } else {
            let mut gram = x.transpose() * x;
            for i in 0..n {
                gram[(i, i)] += 1.0;
            }
            FactorKind::Full(Cholesky::new(gram).ok_or(CoreError::FactorizationFailure)?)
        };
        Ok(Self { kind })
    }

    /// Solves `(I + XᵀX) Z = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let out = match &self.kind {
            FactorKind::Full(chol) => chol.solve(rhs),
            FactorKind::Woodbury { x, inner } => {
                let inner_sol = inner.solve(&(x * rhs));
                rhs - x.transpose() * inner_sol
            }
        };
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(CoreError::FactorizationFailure)
        }
    }
}

/// `Z`-update: `(I+XᵀX)⁻¹(XᵀX − XᵀE + J + (XᵀY₁ − Y₂)/μ)`.
pub fn update_z(
    x: &Matrix,
    e: &Matrix,
    j: &Matrix,
    y1: &Matrix,
    y2: &Matrix,
    mu: f64,
    factor: &GramFactor,
) -> Result<Matrix> {
    // Xᵀ(X − E + Y₁/μ) + J − Y₂/μ
    let inner = x - e + y1 / mu;
    let rhs = x.transpose() * inner + j - y2 / mu;
    factor.solve(&rhs)
}

/// Solver-internal auxiliary variable, multipliers and penalty.
#[derive(Debug, Clone)]
pub struct AlmState {
    pub j: Matrix,
    pub y1: Matrix,
    pub y2: Matrix,
    pub mu: f64,
}

/// Runs the inexact ALM iteration on a `d × n` matrix.
///
/// Non-convergence within `max_iters` is reported through
/// [`SparseCode::converged`], not as an error.
pub fn solve_sparse_code(x: &Matrix, cfg: &SolverConfig) -> Result<SparseCode> {
    cfg.validate()?;
    let (d, n) = x.shape();
    if n < 2 {
        return Err(CoreError::InvalidInput(alloc::format!(
            "sparse coding needs at least 2 objects, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidInput("data matrix contains NaN or Inf".into()));
    }

    let factor = GramFactor::new(x)?;
    let mut z = Matrix::zeros(n, n);
    let mut e = Matrix::zeros(d, n);
    let mut st = AlmState {
        j: Matrix::zeros(n, n),
        y1: Matrix::zeros(d, n),
        y2: Matrix::zeros(n, n),
        mu: cfg.mu0,
    };

    let mut iterations = 0;
    let mut residuals = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let mu = st.mu;

        st.j = soft_threshold(&(&z + &st.y2 / mu), 1.0 / mu);
        if cfg.zero_diagonal {
            st.j.fill_diagonal(0.0);
        }
        z = update_z(x, &e, &st.j, &st.y1, &st.y2, mu, &factor)?;
        let xz = x * &z;
        let q = x - &xz + &st.y1 / mu;
        e = prox_noise(&q, cfg.lambda, mu, cfg.noise_norm);

        let r1 = x - &xz - &e;
        let r2 = &z - &st.j;
        st.y1 += &r1 * mu;
        st.y2 += &r2 * mu;
        st.mu = (cfg.rho * mu).min(cfg.mu_max);

        residuals = stopping_residuals(x, &z, &e, &st.j, &r1, &r2, cfg.zero_diagonal);
        if residuals.0 < cfg.epsilon && residuals.1 < cfg.epsilon {
            converged = true;
            break;
        }
    }

    if cfg.zero_diagonal {
        z.fill_diagonal(0.0);
    }
    Ok(SparseCode { z, e, iterations, converged, final_residuals: residuals })
}

// With a zero-diagonal constraint the reported code has its diagonal cleared,
// so the stopping test is evaluated on that projected iterate. Otherwise this
// is exactly ‖X − XZ − E‖_max and ‖Z − J‖_max.
fn stopping_residuals(
    x: &Matrix,
    z: &Matrix,
    e: &Matrix,
    j: &Matrix,
    r1: &Matrix,
    r2: &Matrix,
    zero_diagonal: bool,
) -> (f64, f64) {
    if !zero_diagonal {
        return (math::max_abs(r1), math::max_abs(r2));
    }
    let mut zp = z.clone();
    zp.fill_diagonal(0.0);
    let r1p = x - x * &zp - e;
    let r2p = zp - j;
    (math::max_abs(&r1p), math::max_abs(&r2p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn soft_threshold_examples() {
        let m = Matrix::from_row_slice(1, 1, &[1.5]);
        assert_eq!(soft_threshold(&m, 1.0)[(0, 0)], 0.5);
        let m = Matrix::from_row_slice(1, 1, &[-0.3]);
        assert_eq!(soft_threshold(&m, 0.5)[(0, 0)], 0.0);
        let m = Matrix::from_row_slice(2, 2, &[2.0, -2.0, 0.0, 1.0]);
        assert_eq!(soft_threshold(&m, 1.0), Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]));
    }

    #[test]
    fn prox_l21_examples() {
        let q = Matrix::from_column_slice(3, 1, &[0.0, 2.0, 0.0]);
        assert_eq!(prox_l21_columns(&q, 1.0), Matrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]));
        let q = Matrix::from_column_slice(2, 1, &[0.3, 0.4]);
        assert_eq!(prox_l21_columns(&q, 1.0), Matrix::zeros(2, 1));
        // norms 4 and 0.5
        let q = Matrix::from_column_slice(2, 2, &[0.0, 4.0, 0.3, 0.4]);
        let p = prox_l21_columns(&q, 1.0);
        assert_eq!(p.column(0).into_owned(), q.column(0) * 0.75);
        assert_eq!(p.column(1).norm(), 0.0);
    }

    #[test]
    fn fro_prox_is_ridge_scaling() {
        let q = Matrix::from_element(2, 2, 3.0);
        let e = prox_noise(&q, 1.0, 2.0, NoiseNorm::Fro);
        assert!((e[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn update_z_zero_fixed_point() {
        let x = Matrix::zeros(3, 4);
        let zero_n = Matrix::zeros(4, 4);
        let zero_d = Matrix::zeros(3, 4);
        let f = GramFactor::new(&x).unwrap();
        let z = update_z(&x, &zero_d, &zero_n, &zero_d, &zero_n, 1.0, &f).unwrap();
        assert_eq!(z, zero_n);
    }

    #[test]
    fn update_z_satisfies_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, n) in [(3, 4), (6, 4), (10, 30)] {
            let x = random(d, n, &mut rng);
            let e = random(d, n, &mut rng);
            let j = random(n, n, &mut rng);
            let y1 = random(d, n, &mut rng);
            let y2 = random(n, n, &mut rng);
            let mu = 0.7;
            let f = GramFactor::new(&x).unwrap();
            let z = update_z(&x, &e, &j, &y1, &y2, mu, &f).unwrap();
            let xtx = x.transpose() * &x;
            let rhs = &xtx - x.transpose() * &e + &j + (x.transpose() * &y1 - &y2) / mu;
            let lhs = (Matrix::identity(n, n) + xtx) * &z;
            assert!((lhs - &rhs).norm() / rhs.norm() < 1e-10);
        }
    }

    #[test]
    fn zero_window_converges_immediately() {
        let x = Matrix::zeros(4, 3);
        let code = solve_sparse_code(&x, &SolverConfig::default()).unwrap();
        assert!(code.converged);
        assert_eq!(code.iterations, 1);
        assert_eq!(code.z, Matrix::zeros(3, 3));
        assert_eq!(code.e, Matrix::zeros(4, 3));
    }

    #[test]
    fn rejects_non_finite_and_tiny_input() {
        let mut x = Matrix::zeros(2, 3);
        x[(1, 1)] = f64::INFINITY;
        assert!(matches!(
            solve_sparse_code(&x, &SolverConfig::default()),
            Err(CoreError::InvalidInput(_))
        ));
        assert!(solve_sparse_code(&Matrix::zeros(2, 1), &SolverConfig::default()).is_err());
    }

    #[test]
    fn duplicate_columns_code_each_other() {
        // x1 = x2 = e1, x3 = e2
        let x = Matrix::from_column_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let cfg = SolverConfig { lambda: 10.0, ..SolverConfig::default() };
        let code = solve_sparse_code(&x, &cfg).unwrap();
        assert!(code.converged);
        assert!(code.z[(0, 1)].abs() > 0.9 && code.z[(1, 0)].abs() > 0.9);
        assert!(code.z.column(2).amax() < 1e-3);
        assert!((code.e.column(2).norm() - 1.0).abs() < 1e-3);
        for i in 0..3 {
            assert_eq!(code.z[(i, i)], 0.0);
        }
    }

    #[test]
    fn converged_code_meets_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(8, 20, &mut rng);
        for norm in [NoiseNorm::L21, NoiseNorm::L1, NoiseNorm::Fro] {
            let cfg = SolverConfig { lambda: 1.0, noise_norm: norm, ..SolverConfig::default() };
            let code = solve_sparse_code(&x, &cfg).unwrap();
            assert!(code.converged, "{norm:?} did not converge");
            let r1 = math::max_abs(&(&x - &x * &code.z - &code.e));
            assert!(r1 < cfg.epsilon, "{norm:?}: {r1}");
            assert!(code.final_residuals.1 < cfg.epsilon);
        }
    }
}
