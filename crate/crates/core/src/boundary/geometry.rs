use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiscreteVelocityModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// A face `x_axis = lower_axis` or `x_axis = upper_axis` of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn new(axis: usize, side: Side) -> Self {
        Face { axis, side }
    }

    pub fn lower(axis: usize) -> Self {
        Face::new(axis, Side::Lower)
    }

    pub fn upper(axis: usize) -> Self {
        Face::new(axis, Side::Upper)
    }

    /// Sign of the outward normal `±e_axis`.
    pub fn normal_sign(&self) -> f64 {
        match self.side {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }

    /// Axes spanning the face, ascending.
    pub fn tangential_axes(&self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|&j| j != self.axis).collect()
    }

    /// `n . u` for velocity `u`.
    pub fn normal_speed(&self, velocity: &[f64]) -> f64 {
        self.normal_sign() * velocity[self.axis]
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::Lower => "lower",
            Side::Upper => "upper",
        };
        write!(f, "{side} face of axis {}", self.axis)
    }
}

/// Axis-aligned box `prod_j (lower_j, upper_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Parameter(format!(
                "box bounds have mismatched lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Parameter(format!(
                    "box axis {j}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// Coordinate of the plane containing `face`.
    pub fn face_coordinate(&self, face: Face) -> f64 {
        match face.side {
            Side::Lower => self.lower[face.axis],
            Side::Upper => self.upper[face.axis],
        }
    }

    /// All `2d` faces, ordered by axis then lower before upper.
    pub fn faces(&self) -> Vec<Face> {
        (0..self.dim())
            .flat_map(|j| [Face::lower(j), Face::upper(j)])
            .collect()
    }

    /// The `2^d` corners.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
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

    /// Full point on `face` from its tangential coordinates.
    pub fn face_point(&self, face: Face, tangential: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        let mut t = tangential.iter();
        for j in 0..self.dim() {
            if j == face.axis {
                x.push(self.face_coordinate(face));
            } else {
                x.push(*t.next().expect("tangential coordinate count"));
            }
        }
        x
    }

    /// Tangential bounds `(lower, upper)` of `face`.
    pub fn face_bounds(&self, face: Face) -> (Vec<f64>, Vec<f64>) {
        let axes = face.tangential_axes(self.dim());
        (
            axes.iter().map(|&j| self.lower[j]).collect(),
            axes.iter().map(|&j| self.upper[j]).collect(),
        )
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.extent(j).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Incoming,
    Outgoing,
    Characteristic,
}

impl TraceKind {
    pub fn from_speed(s: f64) -> Self {
        if s > 0.0 {
            TraceKind::Outgoing
        } else if s < 0.0 {
            TraceKind::Incoming
        } else {
            TraceKind::Characteristic
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaceClassification {
    pub face: Face,
    /// Signed normal speed per species.
    pub speeds: Vec<f64>,
    pub kinds: Vec<TraceKind>,
}

/// Per-face, per-species trace labels. On a box the normal is constant on
/// each face, so the labels are too.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryClassification {
    pub faces: Vec<FaceClassification>,
}

impl BoundaryClassification {
    pub fn face(&self, face: Face) -> &FaceClassification {
        self.faces
            .iter()
            .find(|c| c.face == face)
            .expect("face belongs to the classified domain")
    }

    pub fn kind(&self, face: Face, species: usize) -> TraceKind {
        self.face(face).kinds[species]
    }

    pub fn speed(&self, face: Face, species: usize) -> f64 {
        self.face(face).speeds[species]
    }

    /// Faces on which `species` has the given kind.
    pub fn faces_with(&self, species: usize, kind: TraceKind) -> Vec<Face> {
        self.faces
            .iter()
            .filter(|c| c.kinds[species] == kind)
            .map(|c| c.face)
            .collect()
    }
}

pub fn classify(model: &DiscreteVelocityModel, domain: &BoxDomain) -> Result<BoundaryClassification> {
    if model.dim() != domain.dim() {
        return Err(Error::Parameter(format!(
            "model dimension {} does not match domain dimension {}",
            model.dim(),
            domain.dim()
        )));
    }
    let faces = domain
        .faces()
        .into_iter()
        .map(|face| {
            let speeds: Vec<f64> = model
                .velocities()
                .iter()
                .map(|u| face.normal_speed(u))
                .collect();
            let kinds = speeds.iter().map(|&s| TraceKind::from_speed(s)).collect();
            FaceClassification { face, speeds, kinds }
        })
        .collect();
    Ok(BoundaryClassification { faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_coplanar;

    #[test]
    fn coplanar_left_and_top_faces() {
        let c = classify(&build_coplanar(1.0, 0.1).unwrap(), &BoxDomain::unit(2)).unwrap();
        let left = c.face(Face::lower(0));
        assert_eq!(left.speeds, vec![-1.0, 1.0, -0.0, -0.0]);
        assert_eq!(
            left.kinds,
            vec![
                TraceKind::Incoming,
                TraceKind::Outgoing,
                TraceKind::Characteristic,
                TraceKind::Characteristic
            ]
        );
        let top = c.face(Face::upper(1));
        assert_eq!(
            top.kinds,
            vec![
                TraceKind::Characteristic,
                TraceKind::Characteristic,
                TraceKind::Outgoing,
                TraceKind::Incoming
            ]
        );
    }

    #[test]
    fn one_dimensional_boundary_is_non_characteristic() {
        let m = DiscreteVelocityModel::new(1, vec![vec![2.0], vec![-2.0]], vec![]).unwrap();
        let c = classify(&m, &BoxDomain::unit(1)).unwrap();
        assert_eq!(
            c.face(Face::upper(0)).kinds,
            vec![TraceKind::Outgoing, TraceKind::Incoming]
        );
        assert!(c
            .faces
            .iter()
            .all(|f| !f.kinds.contains(&TraceKind::Characteristic)));
    }

    #[test]
    fn every_species_partitions_the_boundary() {
        let m = DiscreteVelocityModel::new(
            3,
            vec![vec![1.0, -2.0, 0.0], vec![0.0, 0.0, -1.0], vec![0.5, 0.5, 0.5]],
            vec![],
        )
        .unwrap();
        let dom = BoxDomain::new(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 3.0]).unwrap();
        let c = classify(&m, &dom).unwrap();
        for k in 0..3 {
            let mut all: Vec<Face> = [
                TraceKind::Incoming,
                TraceKind::Outgoing,
                TraceKind::Characteristic,
            ]
            .iter()
            .flat_map(|&kind| c.faces_with(k, kind))
            .collect();
            all.sort();
            assert_eq!(all, dom.faces());
        }
    }

    #[test]
    fn invalid_box_rejected() {
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn corners_and_face_points() {
        let dom = BoxDomain::new(vec![0.0, 2.0], vec![1.0, 5.0]).unwrap();
        assert_eq!(dom.corners().len(), 4);
        assert!(dom.corners().contains(&vec![1.0, 5.0]));
        assert_eq!(dom.face_point(Face::lower(1), &[0.25]), vec![0.25, 2.0]);
        assert_eq!(dom.face_point(Face::upper(0), &[3.0]), vec![1.0, 3.0]);
    }
}
