//! Box geometry, trace classification, feedback laws and boundary forms.

mod admissibility;
mod form;
mod geometry;
mod law;

pub use admissibility::{check_admissible, Admissibility, BudgetViolation, ADMISSIBILITY_SAMPLES};
pub use form::{boundary_form, trapezoid_weights, uniform_nodes, BoundaryTraces, FaceTrace};
pub use geometry::{
    classify, BoundaryClassification, BoxDomain, Face, FaceClassification, Side, TraceKind,
};
pub use law::{
    coplanar_cross_law, coplanar_mixed_law, coplanar_zero_law, cross_gain_bound, mixed_gain_bounds,
    AffineMap, ControlLaw, CoplanarGainBounds, FeedbackTerm, InflowRule, Region,
};

use serde::Serialize;

use crate::lyapunov;
use crate::model::DiscreteVelocityModel;

/// Diagonal weight applied to `f_i^2` in the boundary form.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryWeights {
    /// `alpha / f_i^e + exp(-u_i . x)`, the Lyapunov weight.
    Lyapunov { alpha: f64, steady: Vec<f64> },
    /// Identity symmetrizer: the plain energy flux.
    Unit,
}

impl BoundaryWeights {
    pub fn lyapunov(alpha: f64, steady: Vec<f64>) -> Self {
        BoundaryWeights::Lyapunov { alpha, steady }
    }

    pub fn weight(&self, model: &DiscreteVelocityModel, species: usize, x: &[f64]) -> f64 {
        match self {
            BoundaryWeights::Lyapunov { alpha, steady } => {
                lyapunov::species_weight(model, steady, *alpha, species, x)
            }
            BoundaryWeights::Unit => 1.0,
        }
    }
}
