//! Trace-independent sufficient condition for a nonnegative boundary form.
//!
//! An incoming value `f_i(x) = sum_m g_m f_{s_m}(phi_m(x))` with `M` terms
//! satisfies `f_i^2 <= M sum_m g_m^2 f_{s_m}^2`. Changing variables
//! `y = phi_m(x)` turns each negative incoming contribution into a charge
//! `w_i(x) |s_i| M g_m^2 / |det phi_m|` against the outgoing density
//! `w_{s_m}(y) s_{s_m}` at `y`. If no outgoing point is overdrawn the form is
//! nonnegative for every trace.

use serde::Serialize;

use super::geometry::{classify, BoxDomain, Face, TraceKind};
use super::law::ControlLaw;
use super::BoundaryWeights;
use crate::error::Result;
use crate::model::DiscreteVelocityModel;

/// Sample points per tangential axis when scanning outgoing faces.
pub const ADMISSIBILITY_SAMPLES: usize = 257;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetViolation {
    pub face: Face,
    pub species: usize,
    /// Point on the source face where the budget is exceeded.
    pub location: Vec<f64>,
    pub demand: f64,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Admissibility {
    /// `margin` is the smallest `budget - demand` over all outgoing points.
    Admissible { margin: f64 },
    /// The worst overdrawn point.
    Inadmissible { margin: f64, violation: BudgetViolation },
}

impl Admissibility {
    pub fn is_admissible(&self) -> bool {
        matches!(self, Admissibility::Admissible { .. })
    }

    pub fn margin(&self) -> f64 {
        match self {
            Admissibility::Admissible { margin } | Admissibility::Inadmissible { margin, .. } => {
                *margin
            }
        }
    }
}

fn lattice(lower: &[f64], upper: &[f64], samples: usize) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for (lo, hi) in lower.iter().zip(upper) {
        let axis: Vec<f64> = (0..samples)
            .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
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

pub fn check_admissible(
    law: &ControlLaw,
    model: &DiscreteVelocityModel,
    domain: &BoxDomain,
    weights: &BoundaryWeights,
) -> Result<Admissibility> {
    law.validate(model, domain)?;
    let classes = classify(model, domain)?;
    let mut margin = f64::INFINITY;
    let mut worst: Option<BudgetViolation> = None;

    for fc in &classes.faces {
        let face = fc.face;
        let (flo, fhi) = domain.face_bounds(face);
        for species in 0..model.n_species() {
            if fc.kinds[species] != TraceKind::Outgoing {
                continue;
            }
            // Every (rule, term) reading this outgoing trace.
            let readers: Vec<_> = law
                .rules
                .iter()
                .flat_map(|rule| rule.terms.iter().map(move |term| (rule, term)))
                .filter(|(_, term)| term.source_face == face && term.source_species == species)
                .collect();

            let mut points = lattice(&flo, &fhi, ADMISSIBILITY_SAMPLES);
            for (rule, term) in &readers {
                if let Some(region) = &rule.region {
                    points.extend(region.corners().iter().map(|c| term.map.apply(c)));
                }
            }

            for y in points {
                let x_src = domain.face_point(face, &y);
                let budget = weights.weight(model, species, &x_src) * fc.speeds[species];
                let mut demand = 0.0;
                for (rule, term) in &readers {
                    let t = term.map.invert(&y);
                    if !rule.covers(&t) {
                        continue;
                    }
                    let x_tgt = domain.face_point(rule.face, &t);
                    let speed = classes.speed(rule.face, rule.species).abs();
                    let combined = rule.terms.len() as f64;
                    demand += weights.weight(model, rule.species, &x_tgt)
                        * speed
                        * combined
                        * term.gain
                        * term.gain
                        / term.map.jacobian();
                }
                let slack = budget - demand;
                if slack < margin {
                    margin = slack;
                    if slack < 0.0 {
                        worst = Some(BudgetViolation {
                            face,
                            species,
                            location: x_src,
                            demand,
                            budget,
                        });
                    }
                }
            }
        }
    }

    Ok(match worst {
        Some(violation) => Admissibility::Inadmissible { margin, violation },
        None => Admissibility::Admissible { margin },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::law::{
        coplanar_cross_law, coplanar_mixed_law, coplanar_zero_law, cross_gain_bound, mixed_gain_bounds,
        CoplanarGainBounds,
    };
    use crate::model::build_coplanar;
    use approx::assert_abs_diff_eq;

    const FE: [f64; 4] = [4.0, 3.0, 2.0, 6.0];

    fn check(law: &ControlLaw, weights: &BoundaryWeights) -> Admissibility {
        let m = build_coplanar(1.0, 0.1).unwrap();
        check_admissible(law, &m, &BoxDomain::unit(2), weights).unwrap()
    }

    fn lyap(alpha: f64) -> BoundaryWeights {
        BoundaryWeights::lyapunov(alpha, FE.to_vec())
    }

    #[test]
    fn gain_cross_bound_is_sharp() {
        let bound = cross_gain_bound(&FE, 1.0);
        assert!(check(&coplanar_cross_law(0.99 * bound).unwrap(), &lyap(1.0)).is_admissible());
        assert!(check(&coplanar_cross_law(-0.99 * bound).unwrap(), &lyap(1.0)).is_admissible());
        let over = check(&coplanar_cross_law(1.01 * bound).unwrap(), &lyap(1.0));
        match over {
            Admissibility::Inadmissible { violation, .. } => {
                assert_eq!(violation.face, Face::lower(0));
                assert_eq!(violation.species, 1);
            }
            _ => panic!("expected rejection"),
        }
        let at = check(&coplanar_cross_law(bound).unwrap(), &lyap(1.0));
        assert!(at.margin().abs() <= 1e-12, "margin {}", at.margin());
    }

    #[test]
    fn gain_mixed_bounds_are_sharp_for_each_gain() {
        for alpha in [0.3, 1.0, 5.0] {
            let (b2, b3) = mixed_gain_bounds(&FE, alpha);
            assert!(check(&coplanar_mixed_law(0.99 * b2, 0.99 * b3).unwrap(), &lyap(alpha)).is_admissible());
            assert!(!check(&coplanar_mixed_law(1.01 * b2, 0.5 * b3).unwrap(), &lyap(alpha)).is_admissible());
            assert!(!check(&coplanar_mixed_law(0.5 * b2, 1.01 * b3).unwrap(), &lyap(alpha)).is_admissible());
        }
    }

    #[test]
    fn unit_weight_bounds_reproduced() {
        let b = CoplanarGainBounds::unit();
        let w = BoundaryWeights::Unit;
        assert!(check(&coplanar_mixed_law(0.999 * b.k2, 0.999 * b.k3).unwrap(), &w).is_admissible());
        assert!(!check(&coplanar_mixed_law(1.001 * b.k2, 0.0).unwrap(), &w).is_admissible());
        assert!(!check(&coplanar_mixed_law(0.0, 1.001 * b.k3).unwrap(), &w).is_admissible());
        let at = check(&coplanar_mixed_law(b.k2, b.k3).unwrap(), &w);
        assert!(at.margin().abs() <= 1e-12);
    }

    #[test]
    fn zero_law_margin_is_smallest_outgoing_budget() {
        let r = check(&coplanar_zero_law(), &lyap(1.0));
        // f_1 leaving through x = 1 has the lightest weight 1/4 + e^{-1}
        assert!(r.is_admissible());
        assert_abs_diff_eq!(r.margin(), 0.25 + (-1.0f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn law_cross_with_zero_gain_matches_zero_law() {
        let a = check(&coplanar_cross_law(0.0).unwrap(), &lyap(2.0));
        let z = check(&coplanar_zero_law(), &lyap(2.0));
        assert_eq!(a, z);
    }
}
