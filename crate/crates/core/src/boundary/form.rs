//! Discrete boundary quadratic form
//! `BC = int_{dOmega} sum_i w_i(x) (n . u_i) f_i^2 dsigma`
//! with trapezoidal quadrature on each face lattice.

use serde::Serialize;

use super::geometry::{BoxDomain, Face};
use super::BoundaryWeights;
use crate::error::{Error, Result};
use crate::model::DiscreteVelocityModel;

/// Samples of every species on one face. Points are ordered with the first
/// tangential axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaceTrace {
    pub face: Face,
    /// Node coordinates along each tangential axis.
    pub coords: Vec<Vec<f64>>,
    /// `values[species][point]`.
    pub values: Vec<Vec<f64>>,
}

impl FaceTrace {
    pub fn n_points(&self) -> usize {
        self.coords.iter().map(Vec::len).product()
    }

    /// Tangential coordinates of point `p`.
    pub fn point(&self, mut p: usize) -> Vec<f64> {
        self.coords
            .iter()
            .map(|axis| {
                let c = axis[p % axis.len()];
                p /= axis.len();
                c
            })
            .collect()
    }

    /// Tensor-product trapezoid weights.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self.coords.iter().map(|c| trapezoid_weights(c)).collect();
        (0..self.n_points())
            .map(|mut p| {
                per_axis
                    .iter()
                    .map(|w| {
                        let v = w[p % w.len()];
                        p /= w.len();
                        v
                    })
                    .product()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryTraces {
    pub faces: Vec<FaceTrace>,
}

impl BoundaryTraces {
    /// Samples `value(face, species, x)` on uniform face lattices with
    /// `nodes[j]` points along axis `j`.
    pub fn sample<F>(
        domain: &BoxDomain,
        n_species: usize,
        nodes: &[usize],
        mut value: F,
    ) -> Self
    where
        F: FnMut(Face, usize, &[f64]) -> f64,
    {
        let faces = domain
            .faces()
            .into_iter()
            .map(|face| {
                let coords: Vec<Vec<f64>> = face
                    .tangential_axes(domain.dim())
                    .into_iter()
                    .map(|j| uniform_nodes(domain.lower()[j], domain.upper()[j], nodes[j]))
                    .collect();
                let mut trace = FaceTrace {
                    face,
                    coords,
                    values: Vec::new(),
                };
                let points: Vec<Vec<f64>> = (0..trace.n_points())
                    .map(|p| domain.face_point(face, &trace.point(p)))
                    .collect();
                trace.values = (0..n_species)
                    .map(|k| points.iter().map(|x| value(face, k, x)).collect())
                    .collect();
                trace
            })
            .collect();
        BoundaryTraces { faces }
    }

    /// `int_{dOmega} sum_i f_i^2`.
    pub fn energy(&self) -> f64 {
        self.faces
            .iter()
            .map(|ft| {
                let w = ft.quadrature_weights();
                ft.values
                    .iter()
                    .map(|vals| vals.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>())
                    .sum::<f64>()
            })
            .sum()
    }
}

pub fn uniform_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn trapezoid_weights(coords: &[f64]) -> Vec<f64> {
    let n = coords.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (coords[i] - coords[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

pub fn boundary_form(
    traces: &BoundaryTraces,
    model: &DiscreteVelocityModel,
    domain: &BoxDomain,
    weights: &BoundaryWeights,
) -> Result<f64> {
    let n = model.n_species();
    let mut total = 0.0;
    for ft in &traces.faces {
        if ft.coords.len() + 1 != domain.dim() {
            return Err(Error::Parameter(format!(
                "trace on the {} has {} tangential axes, expected {}",
                ft.face,
                ft.coords.len(),
                domain.dim() - 1
            )));
        }
        if ft.values.len() != n {
            return Err(Error::Parameter(format!(
                "trace on the {} has {} species, model has {n}",
                ft.face,
                ft.values.len()
            )));
        }
        let npts = ft.n_points();
        if let Some(bad) = ft.values.iter().find(|v| v.len() != npts) {
            return Err(Error::Parameter(format!(
                "trace on the {} has {} samples, lattice has {npts}",
                ft.face,
                bad.len()
            )));
        }
        let qw = ft.quadrature_weights();
        for p in 0..npts {
            let x = domain.face_point(ft.face, &ft.point(p));
            for (k, vals) in ft.values.iter().enumerate() {
                let s = ft.face.normal_speed(model.velocity(k));
                if s == 0.0 {
                    continue;
                }
                total += qw[p] * weights.weight(model, k, &x) * s * vals[p] * vals[p];
            }
        }
    }
    Ok(total)
}
