//! Discrete-velocity kinetic models with binary collisions.
//!
//! A model is a finite velocity set `u_1..u_n` in `R^d` together with
//! nonnegative transition rates `A_{ij}^{kl}` for collisions turning the
//! pre-collision pair `(i, j)` into the post-collision pair `(k, l)`. The
//! collision source is
//!
//! ```text
//! Q_k(f) = sum_{i,j,l} ( A_{ij}^{kl} f_i f_j - A_{kl}^{ij} f_k f_l )
//! ```
//!
//! and the rates are symmetric under exchanging the two pairs and under
//! reordering either pair. Species indices are zero-based throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default absolute tolerance on `|Q(f_e)|_inf` for a steady state.
pub const STEADY_STATE_TOLERANCE: f64 = 1e-10;

/// One collision family as stated by the user: `A_{pre}^{post} = rate`.
/// The model closes it under the pair symmetries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionChannel {
    pub pre: [usize; 2],
    pub post: [usize; 2],
    pub rate: f64,
}

impl CollisionChannel {
    pub fn new(pre: [usize; 2], post: [usize; 2], rate: f64) -> Self {
        CollisionChannel { pre, post, rate }
    }
}

/// Key `(i, j, k, l)` stands for `A_{ij}^{kl}`.
type Quad = (usize, usize, usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteVelocityModel {
    dim: usize,
    velocities: Vec<Vec<f64>>,
    /// Closed under the pair symmetries; zero rates are dropped.
    rates: BTreeMap<Quad, f64>,
    channels: Vec<CollisionChannel>,
}

fn orbit((i, j, k, l): Quad) -> [Quad; 8] {
    [
        (i, j, k, l),
        (j, i, k, l),
        (i, j, l, k),
        (j, i, l, k),
        (k, l, i, j),
        (l, k, i, j),
        (k, l, j, i),
        (l, k, j, i),
    ]
}

impl DiscreteVelocityModel {
    /// Builds a model, closing each channel under the collision symmetries.
    ///
    /// Every velocity must be nonzero: static particles would make the
    /// transport part degenerate and the Lyapunov construction fails.
    pub fn new(
        dim: usize,
        velocities: Vec<Vec<f64>>,
        channels: Vec<CollisionChannel>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Model("spatial dimension must be at least 1".into()));
        }
        if velocities.is_empty() {
            return Err(Error::Model("velocity set is empty".into()));
        }
        for (k, u) in velocities.iter().enumerate() {
            if u.len() != dim {
                return Err(Error::Model(format!(
                    "velocity {k} has {} components, expected {dim}",
                    u.len()
                )));
            }
            if u.iter().any(|c| !c.is_finite()) {
                return Err(Error::Model(format!("velocity {k} is not finite")));
            }
            if u.iter().all(|&c| c == 0.0) {
                return Err(Error::Model(format!(
                    "velocity {k} is the zero vector; static particles are not allowed (the velocity set must not contain the origin)"
                )));
            }
        }
        let n = velocities.len();
        let mut rates = BTreeMap::new();
        for ch in &channels {
            let idx = [ch.pre[0], ch.pre[1], ch.post[0], ch.post[1]];
            if let Some(bad) = idx.iter().find(|&&s| s >= n) {
                return Err(Error::Model(format!(
                    "collision index {bad} out of range for {n} species"
                )));
            }
            if !(ch.rate.is_finite() && ch.rate >= 0.0) {
                return Err(Error::Model(format!(
                    "collision rate {} must be finite and nonnegative",
                    ch.rate
                )));
            }
            if ch.rate == 0.0 {
                continue;
            }
            for q in orbit((idx[0], idx[1], idx[2], idx[3])) {
                match rates.insert(q, ch.rate) {
                    Some(prev) if prev != ch.rate => {
                        return Err(Error::Model(format!(
                            "conflicting rates {prev} and {} for A_({},{})^({},{})",
                            ch.rate, q.0, q.1, q.2, q.3
                        )));
                    }
                    _ => {}
                }
            }
        }
        Ok(DiscreteVelocityModel {
            dim,
            velocities,
            rates,
            channels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_species(&self) -> usize {
        self.velocities.len()
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocities
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.velocities[k]
    }

    /// Channels as given to the constructor (before closure).
    pub fn channels(&self) -> &[CollisionChannel] {
        &self.channels
    }

    /// `A_{ij}^{kl}` after symmetric closure.
    pub fn rate(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.rates.get(&(i, j, k, l)).copied().unwrap_or(0.0)
    }

    /// Nonzero entries `((i, j, k, l), A_{ij}^{kl})` of the closed table.
    pub fn rates(&self) -> impl Iterator<Item = (Quad, f64)> + '_ {
        self.rates.iter().map(|(&q, &a)| (q, a))
    }

    pub fn has_collisions(&self) -> bool {
        !self.rates.is_empty()
    }

    /// Diagonal transport matrix `diag(u_{1j}, .., u_{nj})` for axis `j`.
    pub fn transport_matrix(&self, axis: usize) -> Matrix {
        let diag: Vec<f64> = self.velocities.iter().map(|u| u[axis]).collect();
        Matrix::from_diag(&diag)
    }

    /// Largest speed `max_k |u_k|`.
    pub fn max_speed(&self) -> f64 {
        self.velocities
            .iter()
            .map(|u| u.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Collision source `Q(f)` evaluated term by term from the rate table.
    pub fn source_term(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_state(f)?;
        let mut q = vec![0.0; self.n_species()];
        for (&(i, j, k, _), &a) in &self.rates {
            let flux = a * f[i] * f[j];
            q[k] += flux;
            q[i] -= flux;
        }
        Ok(q)
    }

    /// Analytic Jacobian of `Q` at `f`.
    pub fn source_jacobian_at(&self, f: &[f64]) -> Result<Matrix> {
        self.check_state(f)?;
        let n = self.n_species();
        let mut jac = Matrix::zeros(n, n);
        for (&(i, j, k, _), &a) in &self.rates {
            // d(a f_i f_j) = a (f_j e_i + f_i e_j)
            jac[(k, i)] += a * f[j];
            jac[(k, j)] += a * f[i];
            jac[(i, i)] -= a * f[j];
            jac[(i, j)] -= a * f[i];
        }
        Ok(jac)
    }

    /// Jacobian of `Q` at a validated steady state; this is the relaxation
    /// matrix of the linearized system.
    pub fn source_jacobian(&self, steady: &SteadyState) -> Matrix {
        self.source_jacobian_at(steady.values())
            .expect("steady state components are positive")
    }

    /// Symmetric positive semi-definite `L(f)` with `Q(f) = -L(f) log f`.
    ///
    /// `L(f) = 1/4 sum A_{ij}^{kl} Phi(f_k f_l, f_i f_j) v v^T` over the closed
    /// table, `v = e_k + e_l - e_i - e_j` and `Phi` the logarithmic mean. The
    /// range is spanned by the collision vectors `v`, so the null space does not
    /// depend on `f`.
    pub fn onsager_matrix(&self, f: &[f64]) -> Result<Matrix> {
        self.check_state(f)?;
        let n = self.n_species();
        let mut l_mat = Matrix::zeros(n, n);
        for (&(i, j, k, l), &a) in &self.rates {
            let mut v = vec![0.0; n];
            v[k] += 1.0;
            v[l] += 1.0;
            v[i] -= 1.0;
            v[j] -= 1.0;
            if v.iter().all(|&c| c == 0.0) {
                continue;
            }
            let w = 0.25 * a * log_mean(f[k] * f[l], f[i] * f[j]);
            for r in 0..n {
                if v[r] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    l_mat[(r, c)] += w * v[r] * v[c];
                }
            }
        }
        Ok(l_mat)
    }

    /// `eta(f) = sum f_k (log f_k - 1)`.
    pub fn entropy(&self, f: &[f64]) -> Result<f64> {
        self.check_state(f)?;
        Ok(f.iter().map(|&x| x * (x.ln() - 1.0)).sum())
    }

    pub fn entropy_gradient(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_state(f)?;
        Ok(f.iter().map(|x| x.ln()).collect())
    }

    /// `diag(1/f_k)`; at a steady state this is the symmetrizer `Lambda_0`.
    pub fn entropy_hessian(&self, f: &[f64]) -> Result<Matrix> {
        self.check_state(f)?;
        Ok(Matrix::from_diag(
            &f.iter().map(|x| 1.0 / x).collect::<Vec<_>>(),
        ))
    }

    /// `|Q(f)|_inf <= tol`.
    pub fn is_steady_state(&self, f: &[f64], tol: f64) -> Result<bool> {
        Ok(inf_norm(&self.source_term(f)?) <= tol)
    }

    fn check_state(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n_species() {
            return Err(Error::Parameter(format!(
                "state has {} components, model has {} species",
                f.len(),
                self.n_species()
            )));
        }
        check_positive(f)
    }
}

pub(crate) fn check_positive(f: &[f64]) -> Result<()> {
    match f.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        Some(index) => Err(Error::Domain {
            index,
            value: f[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Logarithmic mean `(a - b) / (log a - log b)`, with `Phi(a, a) = a`.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let diff = a - b;
    if diff.abs() < 1e-12 * a.max(b) {
        return 0.5 * (a + b);
    }
    diff / (diff / b).ln_1p()
}

/// The two-dimensional coplanar model: speeds `(±U, 0)`, `(0, ±U)` and the
/// single collision channel `(1,2) <-> (3,4)` at rate `sigma`.
///
/// Closing the channel over all pair orderings counts each collision twice
/// in the source sum, so the stored table entries are `sigma / 2`; the source
/// is then exactly `Q_1 = Q_2 = -Q_3 = -Q_4 = sigma (f_3 f_4 - f_1 f_2)`.
pub fn build_coplanar(speed: f64, sigma: f64) -> Result<DiscreteVelocityModel> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::Parameter(format!("speed U = {speed} must be positive")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Parameter(format!(
            "collision rate sigma = {sigma} must be positive"
        )));
    }
    DiscreteVelocityModel::new(
        2,
        vec![
            vec![speed, 0.0],
            vec![-speed, 0.0],
            vec![0.0, speed],
            vec![0.0, -speed],
        ],
        vec![CollisionChannel::new([0, 1], [2, 3], 0.5 * sigma)],
    )
}

/// A spatially uniform state with vanishing collision source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    values: Vec<f64>,
}

impl SteadyState {
    pub fn new(model: &DiscreteVelocityModel, values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(model, values, STEADY_STATE_TOLERANCE)
    }

    pub fn with_tolerance(
        model: &DiscreteVelocityModel,
        values: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        let residual = inf_norm(&model.source_term(&values)?);
        if residual > tolerance {
            return Err(Error::NotSteady {
                residual,
                tolerance,
            });
        }
        Ok(SteadyState { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
