//! Nonnegativity of the boundary form for traces closed by admissible laws.

use kinbc_core::boundary::{
    boundary_form, check_admissible, classify, coplanar_cross_law, coplanar_mixed_law,
    cross_gain_bound, mixed_gain_bounds, BoundaryTraces, BoundaryWeights, BoxDomain, ControlLaw,
    Face, TraceKind,
};
use kinbc_core::build_coplanar;
use proptest::prelude::*;

const FE: [f64; 4] = [4.0, 3.0, 2.0, 6.0];
const MODES: usize = 4;
const NODES: usize = 301;

/// `sum_m a_m cos(m pi t) + b_m sin(m pi t)` for every (face, species).
#[derive(Clone, Debug)]
struct SmoothTraces {
    coeffs: Vec<Vec<(f64, f64)>>,
}

impl SmoothTraces {
    fn eval(&self, face_index: usize, species: usize, t: f64) -> f64 {
        self.coeffs[face_index * 4 + species]
            .iter()
            .enumerate()
            .map(|(m, (a, b))| {
                let w = std::f64::consts::PI * m as f64;
                a * (w * t).cos() + b * (w * t).sin()
            })
            .sum()
    }
}

fn smooth_traces() -> impl Strategy<Value = SmoothTraces> {
    prop::collection::vec(
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), MODES),
        4 * 4,
    )
    .prop_map(|coeffs| SmoothTraces { coeffs })
}

fn face_index(domain: &BoxDomain, face: Face) -> usize {
    domain.faces().iter().position(|&f| f == face).unwrap()
}

/// Outgoing traces from `smooth`, incoming traces from `law`.
fn closed_traces(law: &ControlLaw, smooth: &SmoothTraces) -> BoundaryTraces {
    let model = build_coplanar(1.0, 0.1).unwrap();
    let domain = BoxDomain::unit(2);
    let classes = classify(&model, &domain).unwrap();
    BoundaryTraces::sample(&domain, 4, &[NODES, NODES], |face, k, x| {
        let t = x[1 - face.axis];
        match classes.kind(face, k) {
            TraceKind::Incoming => law.rule_at(face, k, &[t]).map_or(0.0, |rule| {
                rule.terms
                    .iter()
                    .map(|term| {
                        let y = term.map.apply(&[t])[0];
                        term.gain
                            * smooth.eval(face_index(&domain, term.source_face), term.source_species, y)
                    })
                    .sum()
            }),
            _ => smooth.eval(face_index(&domain, face), k, t),
        }
    })
}

fn law_strategy() -> impl Strategy<Value = (ControlLaw, f64)> {
    (0usize..3, -0.99f64..0.99, -0.99f64..0.99, 0.1f64..200.0).prop_map(|(kind, a, b, alpha)| {
        let law = match kind {
            0 => ControlLaw::zero(),
            1 => coplanar_cross_law(a * cross_gain_bound(&FE, alpha)).unwrap(),
            _ => {
                let (b2, b3) = mixed_gain_bounds(&FE, alpha);
                coplanar_mixed_law(a * b2, b * b3).unwrap()
            }
        };
        (law, alpha)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn admissible_laws_give_nonnegative_forms((law, alpha) in law_strategy(), smooth in smooth_traces()) {
        let model = build_coplanar(1.0, 0.1).unwrap();
        let domain = BoxDomain::unit(2);
        let weights = BoundaryWeights::lyapunov(alpha, FE.to_vec());
        prop_assert!(check_admissible(&law, &model, &domain, &weights).unwrap().is_admissible());
        let traces = closed_traces(&law, &smooth);
        let bc = boundary_form(&traces, &model, &domain, &weights).unwrap();
        prop_assert!(bc >= -1e-8 * traces.energy(), "form {bc}, energy {}", traces.energy());
    }
}

#[test]
fn inadmissible_gain_admits_a_negative_form() {
    let model = build_coplanar(1.0, 0.1).unwrap();
    let domain = BoxDomain::unit(2);
    let alpha = 1.0;
    let law = coplanar_cross_law(3.0 * cross_gain_bound(&FE, alpha)).unwrap();
    let weights = BoundaryWeights::lyapunov(alpha, FE.to_vec());
    assert!(!check_admissible(&law, &model, &domain, &weights).unwrap().is_admissible());
    // Only species 2 leaves through the left edge; everything else is quiet.
    let mut coeffs = vec![vec![(0.0, 0.0); MODES]; 16];
    coeffs[face_index(&domain, Face::lower(0)) * 4 + 1][0] = (1.0, 0.0);
    let traces = closed_traces(&law, &SmoothTraces { coeffs });
    assert!(boundary_form(&traces, &model, &domain, &weights).unwrap() < 0.0);
}
