//! Boundary feedback laws assigning incoming traces from outgoing ones.

use serde::{Deserialize, Serialize};

use super::geometry::{classify, BoxDomain, Face, TraceKind};
use crate::error::{Error, Result};
use crate::model::DiscreteVelocityModel;

const REGION_TOLERANCE: f64 = 1e-12;

/// Componentwise affine map `t -> scale * t + offset` between the tangential
/// coordinates of two faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        AffineMap {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
        }
    }

    pub fn new(scale: Vec<f64>, offset: Vec<f64>) -> Self {
        AffineMap { scale, offset }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(x, (a, b))| a * x + b)
            .collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(y, (a, b))| (y - b) / a)
            .collect()
    }

    /// `|det|` of the linear part.
    pub fn jacobian(&self) -> f64 {
        self.scale.iter().map(|a| a.abs()).product()
    }
}

/// One summand `gain * f_species(source_face, map(t))` of an incoming value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackTerm {
    pub source_face: Face,
    pub source_species: usize,
    pub map: AffineMap,
    pub gain: f64,
}

/// Tangential sub-box `[lower, upper]` of a face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn contains(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *x >= lo - REGION_TOLERANCE && *x <= hi + REGION_TOLERANCE)
    }

    fn overlaps(&self, other: &Region) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .all(|((a0, a1), (b0, b1))| a0.max(*b0) < a1.min(*b1) - REGION_TOLERANCE)
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.lower.len();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|j| {
                        if mask >> j & 1 == 0 {
                            self.lower[j]
                        } else {
                            self.upper[j]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Incoming value of `species` on `face` over `region` (whole face when `None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflowRule {
    pub face: Face,
    pub species: usize,
    pub region: Option<Region>,
    pub terms: Vec<FeedbackTerm>,
}

impl InflowRule {
    pub fn covers(&self, t: &[f64]) -> bool {
        self.region.as_ref().is_none_or(|r| r.contains(t))
    }
}

/// Incoming traces not covered by any rule are set to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    pub name: String,
    pub rules: Vec<InflowRule>,
}

impl ControlLaw {
    pub fn new(name: impl Into<String>, rules: Vec<InflowRule>) -> Self {
        ControlLaw {
            name: name.into(),
            rules,
        }
    }

    /// Every incoming trace held at the steady state (zero deviation).
    pub fn zero() -> Self {
        ControlLaw::new("zero", vec![])
    }

    /// Rule governing `species` at tangential position `t` of `face`.
    pub fn rule_at(&self, face: Face, species: usize, t: &[f64]) -> Option<&InflowRule> {
        self.rules
            .iter()
            .find(|r| r.face == face && r.species == species && r.covers(t))
    }

    /// Checks trace directions, map shapes and that mapped regions stay on
    /// their source faces.
    pub fn validate(&self, model: &DiscreteVelocityModel, domain: &BoxDomain) -> Result<()> {
        let classes = classify(model, domain)?;
        let tdim = domain.dim() - 1;
        let n = model.n_species();
        let faces = domain.faces();
        for (idx, rule) in self.rules.iter().enumerate() {
            if !faces.contains(&rule.face) || rule.species >= n {
                return Err(Error::Law(format!(
                    "rule {idx} targets species {} on {}, which does not exist",
                    rule.species, rule.face
                )));
            }
            if classes.kind(rule.face, rule.species) != TraceKind::Incoming {
                return Err(Error::Law(format!(
                    "rule {idx}: species {} is not incoming on the {}",
                    rule.species, rule.face
                )));
            }
            let (flo, fhi) = domain.face_bounds(rule.face);
            let region = rule.region.clone().unwrap_or(Region {
                lower: flo.clone(),
                upper: fhi.clone(),
            });
            if region.lower.len() != tdim || region.upper.len() != tdim {
                return Err(Error::Law(format!(
                    "rule {idx}: region needs {tdim} tangential coordinates"
                )));
            }
            for m in 0..tdim {
                let (lo, hi) = (region.lower[m], region.upper[m]);
                if !(lo <= hi && lo >= flo[m] - REGION_TOLERANCE && hi <= fhi[m] + REGION_TOLERANCE)
                {
                    return Err(Error::Law(format!(
                        "rule {idx}: region [{lo}, {hi}] leaves the face range [{}, {}]",
                        flo[m], fhi[m]
                    )));
                }
            }
            for (t, term) in rule.terms.iter().enumerate() {
                if !term.gain.is_finite() {
                    return Err(Error::Law(format!("rule {idx} term {t}: gain is not finite")));
                }
                if !faces.contains(&term.source_face) || term.source_species >= n {
                    return Err(Error::Law(format!(
                        "rule {idx} term {t}: source does not exist"
                    )));
                }
                if classes.kind(term.source_face, term.source_species) != TraceKind::Outgoing {
                    return Err(Error::Law(format!(
                        "rule {idx} term {t}: species {} is not outgoing on the {}",
                        term.source_species, term.source_face
                    )));
                }
                if term.map.dim() != tdim || term.map.offset.len() != tdim {
                    return Err(Error::Law(format!(
                        "rule {idx} term {t}: map needs {tdim} coordinates"
                    )));
                }
                if term.map.scale.iter().any(|a| *a == 0.0 || !a.is_finite()) {
                    return Err(Error::Law(format!(
                        "rule {idx} term {t}: map scale must be finite and nonzero"
                    )));
                }
                let (slo, shi) = domain.face_bounds(term.source_face);
                for corner in region.corners() {
                    let y = term.map.apply(&corner);
                    let inside = y.iter().enumerate().all(|(m, v)| {
                        *v >= slo[m] - REGION_TOLERANCE && *v <= shi[m] + REGION_TOLERANCE
                    });
                    if !inside {
                        return Err(Error::Law(format!(
                            "rule {idx} term {t}: region corner {corner:?} maps to {y:?}, outside the {}",
                            term.source_face
                        )));
                    }
                }
            }
            for other in &self.rules[..idx] {
                if other.face == rule.face && other.species == rule.species {
                    let other_region = other.region.clone().unwrap_or(Region {
                        lower: flo.clone(),
                        upper: fhi.clone(),
                    });
                    if other_region.overlaps(&region) || tdim == 0 {
                        return Err(Error::Law(format!(
                            "rule {idx} overlaps an earlier rule for species {} on the {}",
                            rule.species, rule.face
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

// Coplanar laws on the unit square. Species (zero-based): 0 -> +x, 1 -> -x,
// 2 -> +y, 3 -> -y. The controlled stretch is x in [1/3, 2/3] on y = 0.

const BOTTOM: Face = Face {
    axis: 1,
    side: super::geometry::Side::Lower,
};
const LEFT: Face = Face {
    axis: 0,
    side: super::geometry::Side::Lower,
};

fn controlled_interval() -> Region {
    Region {
        lower: vec![1.0 / 3.0],
        upper: vec![2.0 / 3.0],
    }
}

/// Left-edge outflow `f_2(0, 3x - 1)` feeding the controlled interval.
fn left_outflow_term(gain: f64) -> FeedbackTerm {
    FeedbackTerm {
        source_face: LEFT,
        source_species: 1,
        map: AffineMap::new(vec![3.0], vec![-1.0]),
        gain,
    }
}

fn check_gains(gains: &[f64]) -> Result<()> {
    if gains.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::Law(format!("gains {gains:?} must be finite")))
    }
}

pub fn coplanar_zero_law() -> ControlLaw {
    ControlLaw::zero()
}

/// `f_3(x, 0) = k1 f_2(0, 3x - 1)` on the controlled interval, zero inflow elsewhere.
pub fn coplanar_cross_law(k1: f64) -> Result<ControlLaw> {
    check_gains(&[k1])?;
    Ok(ControlLaw::new(
        "cross",
        vec![InflowRule {
            face: BOTTOM,
            species: 2,
            region: Some(controlled_interval()),
            terms: vec![left_outflow_term(k1)],
        }],
    ))
}

/// `f_3(x, 0) = k2 f_2(0, 3x - 1) + k3 f_4(x, 0)` on the controlled interval.
pub fn coplanar_mixed_law(k2: f64, k3: f64) -> Result<ControlLaw> {
    check_gains(&[k2, k3])?;
    Ok(ControlLaw::new(
        "mixed",
        vec![InflowRule {
            face: BOTTOM,
            species: 2,
            region: Some(controlled_interval()),
            terms: vec![
                left_outflow_term(k2),
                FeedbackTerm {
                    source_face: BOTTOM,
                    source_species: 3,
                    map: AffineMap::identity(1),
                    gain: k3,
                },
            ],
        }],
    ))
}

/// Closed-form gain limits of the coplanar laws for boundary weights `w_i`
/// of species 2, 3, 4 at the faces where they are measured or set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoplanarGainBounds {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl CoplanarGainBounds {
    pub fn from_weights(w2: f64, w3: f64, w4: f64) -> Self {
        CoplanarGainBounds {
            k1: (3.0 * w2 / w3).sqrt(),
            k2: (3.0 * w2 / (2.0 * w3)).sqrt(),
            k3: (w4 / (2.0 * w3)).sqrt(),
        }
    }

    /// Lyapunov weights `alpha / f_i^e + 1` (the exponential part is 1 on the
    /// left and bottom edges).
    pub fn lyapunov(steady: &[f64], alpha: f64) -> Self {
        let w = |i: usize| alpha / steady[i] + 1.0;
        Self::from_weights(w(1), w(2), w(3))
    }

    /// Plain `L^2` boundary form (symmetrizer equal to the identity).
    pub fn unit() -> Self {
        Self::from_weights(1.0, 1.0, 1.0)
    }
}

/// `|k1| <= sqrt(3 f3 (alpha + f2) / (f2 (alpha + f3)))`.
pub fn cross_gain_bound(steady: &[f64], alpha: f64) -> f64 {
    CoplanarGainBounds::lyapunov(steady, alpha).k1
}

/// `(bound_k2, bound_k3)` for the mixed law.
pub fn mixed_gain_bounds(steady: &[f64], alpha: f64) -> (f64, f64) {
    let b = CoplanarGainBounds::lyapunov(steady, alpha);
    (b.k2, b.k3)
}
