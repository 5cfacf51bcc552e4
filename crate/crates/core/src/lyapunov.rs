//! Weighted Lyapunov functional
//!
//! ```text
//! L(t) = alpha int f^T Lambda_0 f dx + int f^T exp(-sum_j Lambda_j x_j) f dx
//! ```
//!
//! and the constants certifying its exponential decay.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoxDomain;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, Matrix};
use crate::model::{DiscreteVelocityModel, SteadyState};
use crate::solver::Grid;
use crate::stability::{eigh_symmetric, StabilityDecomposition};

/// Points per axis of the sample lattice used for extrema over the closed box.
pub const SAMPLES_PER_AXIS: usize = 8;
/// Default relative safety margin applied by [`select_alpha`].
pub const DEFAULT_ALPHA_MARGIN: f64 = 0.1;
/// Floor for `alpha` when any positive value works.
pub const MIN_ALPHA: f64 = 1e-6;

/// `alpha / f_k^e + exp(-u_k . x)`.
pub fn species_weight(
    model: &DiscreteVelocityModel,
    steady: &[f64],
    alpha: f64,
    species: usize,
    x: &[f64],
) -> f64 {
    alpha / steady[species] + (-dot(model.velocity(species), x)).exp()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `alpha Lambda_0 + exp(-sum_j Lambda_j x_j)`, diagonal.
pub fn weight_matrix(
    model: &DiscreteVelocityModel,
    steady: &SteadyState,
    alpha: f64,
    x: &[f64],
) -> Matrix {
    let diag: Vec<f64> = (0..model.n_species())
        .map(|k| species_weight(model, steady.values(), alpha, k, x))
        .collect();
    Matrix::from_diag(&diag)
}

/// Trapezoidal quadrature of `L` for a species-major field on `grid`.
pub fn functional(
    grid: &Grid,
    field: &[f64],
    model: &DiscreteVelocityModel,
    steady: &SteadyState,
    alpha: f64,
) -> Result<f64> {
    let nodes = grid.n_nodes();
    let n = model.n_species();
    if field.len() != n * nodes || grid.dim() != model.dim() {
        return Err(Error::Parameter(format!(
            "field of length {} does not match {n} species on {nodes} nodes",
            field.len()
        )));
    }
    let qw = grid.quadrature_weights();
    let terms: Vec<f64> = (0..nodes)
        .map(|p| {
            let x = grid.node_position(p);
            (0..n)
                .map(|k| {
                    let v = field[k * nodes + p];
                    species_weight(model, steady.values(), alpha, k, &x) * v * v
                })
                .sum::<f64>()
                * qw[p]
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `lambda` (smallest relaxation rate), `C_1`, `C_2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayConstants {
    pub lambda: Option<f64>,
    pub c1: f64,
    pub c2: f64,
}

fn lattice(domain: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for j in 0..domain.dim() {
        let (lo, hi) = (domain.lower()[j], domain.upper()[j]);
        let axis: Vec<f64> = (0..per_axis)
            .map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64)
            .collect();
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    points
}

/// `P^{-T} diag(d) P^{-1}`.
fn congruence(p_inv: &Matrix, d: &[f64]) -> Matrix {
    let n = d.len();
    let mut m = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: f64 = (0..n).map(|i| p_inv[(i, a)] * d[i] * p_inv[(i, b)]).sum();
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

fn spectral_norm(m: &Matrix) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let gram = &m.transpose() * m;
    let eig = eigh_symmetric(&gram)?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

pub fn constants(
    model: &DiscreteVelocityModel,
    domain: &BoxDomain,
    decomposition: &StabilityDecomposition,
) -> Result<DecayConstants> {
    constants_with_resolution(model, domain, decomposition, SAMPLES_PER_AXIS)
}

/// [`constants`] on a lattice with `per_axis` points per axis (corners included).
pub fn constants_with_resolution(
    model: &DiscreteVelocityModel,
    domain: &BoxDomain,
    decomposition: &StabilityDecomposition,
    per_axis: usize,
) -> Result<DecayConstants> {
    if per_axis < 2 {
        return Err(Error::Parameter("need at least two samples per axis".into()));
    }
    let n = model.n_species();
    let nd = decomposition.null_dim();
    let lambda = Matrix::from_diag(&decomposition.lambda);
    let speed_sq: Vec<f64> = model
        .velocities()
        .iter()
        .map(|u| u.iter().map(|c| c * c).sum())
        .collect();

    let per_point: Vec<Result<PointBounds>> = lattice(domain, per_axis)
        .par_iter()
        .map(|x| {
            let expw: Vec<f64> = model
                .velocities()
                .iter()
                .map(|u| (-dot(u, x)).exp())
                .collect();
            let scaled: Vec<f64> = speed_sq.iter().zip(&expw).map(|(s, e)| s * e).collect();
            let c1 = eigh_symmetric(&congruence(&decomposition.p_inv, &scaled))?.values[0];
            if decomposition.rank == 0 {
                return Ok(PointBounds {
                    c1,
                    coupling_sq: 0.0,
                    relaxed: 0.0,
                });
            }
            let mu = congruence(&decomposition.p_inv, &expw);
            let mu12_l = &mu.block(0, nd, nd, n) * &lambda;
            let mu22 = mu.block(nd, n, nd, n);
            let sym = (&mu22 * &lambda).add(&(&lambda * &mu22));
            let relaxed = eigh_symmetric(&sym)?
                .values
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(PointBounds {
                c1,
                coupling_sq: spectral_norm(&mu12_l)?.powi(2),
                relaxed,
            })
        })
        .collect();
    let per_point = per_point.into_iter().collect::<Result<Vec<_>>>()?;

    let c1 = per_point.iter().map(|b| b.c1).fold(f64::INFINITY, f64::min);
    if c1.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Certificate(format!(
            "C1 = {c1:e} is not positive; some velocity is zero"
        )));
    }
    // Young: 2 u^T mu12 Lambda q <= C1/2 |u|^2 + 2 |mu12 Lambda|^2 / C1 |q|^2
    let c2 = per_point
        .iter()
        .map(|b| 2.0 * b.coupling_sq / c1 + b.relaxed)
        .fold(0.0, f64::max);
    Ok(DecayConstants {
        lambda: decomposition.smallest_rate(),
        c1,
        c2,
    })
}

struct PointBounds {
    /// Smallest eigenvalue of `P^{-T} (sum_j Lambda_j^2) E(x) P^{-1}`.
    c1: f64,
    /// `|mu12(x) Lambda|^2`.
    coupling_sq: f64,
    /// `|mu22(x) Lambda + Lambda mu22(x)|`.
    relaxed: f64,
}

/// Smallest `alpha` (times `1 + margin`) with `2 lambda alpha - C2 + C1 > 0`.
pub fn select_alpha(lambda: f64, c1: f64, c2: f64, margin: f64) -> Result<f64> {
    if lambda.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Certificate(
            "no relaxation block (r = 0); use the exponential-only functional".into(),
        ));
    }
    if margin.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Parameter(format!("alpha margin {margin} must be positive")));
    }
    Ok(((c2 - c1) / (2.0 * lambda)).max(MIN_ALPHA) * (1.0 + margin))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaChoice {
    Auto { margin: f64 },
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    pub alpha: f64,
    pub rank: usize,
    /// Smallest eigenvalue of `Lambda`; `None` when `r = 0`.
    pub lambda_small: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `C~` with `dL/dt + BC <= -C~ |Pf|^2`.
    pub dissipation: f64,
    /// Guaranteed rate for `L`: `L(t) <= exp(-decay_rate t) L(0)` when `BC >= 0`.
    pub decay_rate: f64,
    /// `sqrt(lambda_max / lambda_min)`, the overshoot factor for `|f|`.
    pub overshoot: f64,
}

impl LyapunovCertificate {
    /// Guaranteed rate for the plain norm, half of the functional's.
    pub fn norm_decay_rate(&self) -> f64 {
        0.5 * self.decay_rate
    }
}

pub fn certificate(
    model: &DiscreteVelocityModel,
    steady: &SteadyState,
    domain: &BoxDomain,
    decomposition: &StabilityDecomposition,
    choice: AlphaChoice,
) -> Result<LyapunovCertificate> {
    let k = constants(model, domain, decomposition)?;
    let alpha = match (k.lambda, choice) {
        // r = 0: the exponential part alone is a Lyapunov functional
        (None, _) => 0.0,
        (Some(lambda), AlphaChoice::Auto { margin }) => select_alpha(lambda, k.c1, k.c2, margin)?,
        (Some(lambda), AlphaChoice::Fixed(alpha)) => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::Certificate(format!("alpha = {alpha} must be positive")));
            }
            if 2.0 * lambda * alpha - k.c2 + k.c1 <= 0.0 {
                return Err(Error::Certificate(format!(
                    "alpha = {alpha} is too small: need alpha > {:e}",
                    (k.c2 - k.c1) / (2.0 * lambda)
                )));
            }
            alpha
        }
    };

    let mut dissipation = f64::INFINITY;
    match k.lambda {
        None => dissipation = k.c1,
        Some(lambda) => {
            if decomposition.null_dim() > 0 {
                dissipation = dissipation.min(0.5 * k.c1);
            }
            dissipation = dissipation.min(2.0 * lambda * alpha - k.c2 + k.c1);
        }
    }

    let mut lambda_min = f64::INFINITY;
    let mut lambda_max: f64 = 0.0;
    for x in domain.corners() {
        for s in 0..model.n_species() {
            let w = species_weight(model, steady.values(), alpha, s, &x);
            lambda_min = lambda_min.min(w);
            lambda_max = lambda_max.max(w);
        }
    }
    // |Pf|^2 >= min(Lambda_0) |f|^2
    let p_floor = decomposition.lambda0.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LyapunovCertificate {
        alpha,
        rank: decomposition.rank,
        lambda_small: k.lambda,
        c1: k.c1,
        c2: k.c2,
        lambda_min,
        lambda_max,
        dissipation,
        decay_rate: dissipation * p_floor / lambda_max,
        overshoot: (lambda_max / lambda_min).sqrt(),
    })
}
