//! Structural-stability decomposition of the linearized collision operator.
//!
//! For a steady state `f_e`, with `Lambda_0 = diag(1/f_e)` and `J = Q'(f_e)`,
//! we find an invertible `P` and a positive diagonal `Lambda` (size `r`) with
//!
//! ```text
//! P J P^{-1}     = -blockdiag(0, Lambda)
//! Lambda_0 J     = -P^T blockdiag(0, Lambda) P
//! ```
//!
//! `P = H Lambda_0^{1/2}` where `H` diagonalizes the symmetric matrix
//! `Lambda_0^{1/2} L(f_e) Lambda_0^{1/2}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{check_positive, DiscreteVelocityModel, SteadyState};

const JACOBI_TOLERANCE: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Eigenvalues below `ZERO_EIGENVALUE_RELATIVE * largest` count as zero.
const ZERO_EIGENVALUE_RELATIVE: f64 = 1e-9;
const ZERO_EIGENVALUE_FLOOR: f64 = 1e-14;
const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix `M = H^T diag(values) H`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthogonal; row `i` is the eigenvector for `values[i]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver for small symmetric matrices.
pub fn eigh_symmetric(m: &Matrix) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::Numerical(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let scale = m.max_abs().max(1.0);
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Numerical(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let target = JACOBI_TOLERANCE * m.frobenius();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- J^T A J, V <- V J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let diag = a.diag();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (row, &col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(row, k)] = v[(k, col)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// `diag(1/f_1, .., 1/f_n)`.
pub fn lambda0(steady: &[f64]) -> Result<Matrix> {
    check_positive(steady)?;
    Ok(Matrix::from_diag(
        &steady.iter().map(|x| 1.0 / x).collect::<Vec<_>>(),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityDecomposition {
    pub p: Matrix,
    pub p_inv: Matrix,
    /// Diagonal of `Lambda_0`.
    pub lambda0: Vec<f64>,
    /// Positive eigenvalues, ascending.
    pub lambda: Vec<f64>,
    pub rank: usize,
    /// `|P J P^{-1} + blockdiag(0, Lambda)|_max`.
    pub similarity_residual: f64,
    /// `|Lambda_0 J + P^T blockdiag(0, Lambda) P|_max`.
    pub symmetrizer_residual: f64,
}

impl StabilityDecomposition {
    pub fn n(&self) -> usize {
        self.lambda0.len()
    }

    /// Dimension of the conserved block, `n - r`.
    pub fn null_dim(&self) -> usize {
        self.n() - self.rank
    }

    /// `blockdiag(0_{n-r}, Lambda)`.
    pub fn relaxation_block(&self) -> Matrix {
        let mut d = vec![0.0; self.null_dim()];
        d.extend_from_slice(&self.lambda);
        Matrix::from_diag(&d)
    }

    /// Smallest eigenvalue of `Lambda`, `None` when `r = 0`.
    pub fn smallest_rate(&self) -> Option<f64> {
        self.lambda.first().copied()
    }
}

pub fn decompose(
    model: &DiscreteVelocityModel,
    steady: &SteadyState,
) -> Result<StabilityDecomposition> {
    let fe = steady.values();
    let n = model.n_species();
    let l_mat = model.onsager_matrix(fe)?;
    let sqrt_l0: Vec<f64> = fe.iter().map(|x| (1.0 / x).sqrt()).collect();
    let mut sym = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = sqrt_l0[i] * l_mat[(i, j)] * sqrt_l0[j];
        }
    }
    let eig = eigh_symmetric(&sym)?;
    let largest = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    if let Some(&low) = eig.values.first() {
        if low < -NEGATIVE_EIGENVALUE_TOLERANCE * largest.max(1.0) {
            return Err(Error::Model(format!(
                "Onsager matrix is not positive semi-definite (eigenvalue {low:e})"
            )));
        }
    }
    let cut = (ZERO_EIGENVALUE_RELATIVE * largest).max(ZERO_EIGENVALUE_FLOOR);
    let lambda: Vec<f64> = eig.values.iter().copied().filter(|&x| x > cut).collect();
    let rank = lambda.len();

    let h = &eig.vectors;
    let mut p = Matrix::zeros(n, n);
    let mut p_inv = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = h[(i, j)] * sqrt_l0[j];
            p_inv[(j, i)] = h[(i, j)] / sqrt_l0[j];
        }
    }

    let mut decomposition = StabilityDecomposition {
        p,
        p_inv,
        lambda0: fe.iter().map(|x| 1.0 / x).collect(),
        lambda,
        rank,
        similarity_residual: f64::NAN,
        symmetrizer_residual: f64::NAN,
    };
    let jac = model.source_jacobian(steady);
    let block = decomposition.relaxation_block();
    let similarity = &(&decomposition.p * &jac) * &decomposition.p_inv;
    decomposition.similarity_residual = similarity.add(&block).max_abs();
    let l0j = &Matrix::from_diag(&decomposition.lambda0) * &jac;
    let ptdp = &(&decomposition.p.transpose() * &block) * &decomposition.p;
    decomposition.symmetrizer_residual = l0j.add(&ptdp).max_abs();
    Ok(decomposition)
}
