//! First-order upwind explicit integrator for the linearized system
//! `f_t + sum_j Lambda_j f_{x_j} = J f` on a node-based box grid, closed by a
//! boundary feedback law.
//!
//! Each step does the transport+source update on every node, then overwrites
//! the incoming boundary nodes from the freshly updated outgoing traces.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{
    boundary_form, trapezoid_weights, uniform_nodes, BoundaryTraces, BoundaryWeights, BoxDomain,
    ControlLaw, Face, FaceTrace, Side, TraceKind,
};
use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, Matrix};
use crate::lyapunov::species_weight;
use crate::model::{DiscreteVelocityModel, SteadyState};

/// Abort when the norm grows past this multiple of the initial norm.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
const CFL_SLACK: f64 = 1e-12;

/// Node-based tensor grid; `cells[j] + 1` nodes along axis `j`, boundary included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    domain: BoxDomain,
    cells: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(domain: BoxDomain, cells: Vec<usize>) -> Result<Self> {
        if cells.len() != domain.dim() {
            return Err(Error::Parameter(format!(
                "{} cell counts given for a {}-dimensional box",
                cells.len(),
                domain.dim()
            )));
        }
        if let Some(c) = cells.iter().find(|&&c| c < 2) {
            return Err(Error::Parameter(format!(
                "need at least 2 cells per axis, got {c}"
            )));
        }
        let mut strides = Vec::with_capacity(cells.len());
        let mut s = 1;
        for c in &cells {
            strides.push(s);
            s *= c + 1;
        }
        Ok(Grid {
            domain,
            cells,
            strides,
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn nodes_per_axis(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c + 1).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.extent(axis) / self.cells[axis] as f64
    }

    pub fn index(&self, node: usize, axis: usize) -> usize {
        node / self.strides[axis] % (self.cells[axis] + 1)
    }

    pub fn node(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_position(&self, node: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.domain.lower()[j] + self.index(node, j) as f64 * self.spacing(j))
            .collect()
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        uniform_nodes(
            self.domain.lower()[axis],
            self.domain.upper()[axis],
            self.cells[axis] + 1,
        )
    }

    /// Trapezoid weights per node.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = (0..self.dim())
            .map(|j| trapezoid_weights(&self.axis_coords(j)))
            .collect();
        (0..self.n_nodes())
            .map(|p| (0..self.dim()).map(|j| per_axis[j][self.index(p, j)]).product())
            .collect()
    }

    /// Nodes on `face`, first tangential axis varying fastest.
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        let fixed = match face.side {
            Side::Lower => 0,
            Side::Upper => self.cells[face.axis],
        };
        let tangential = face.tangential_axes(self.dim());
        let count: usize = tangential.iter().map(|&j| self.cells[j] + 1).product();
        (0..count)
            .map(|mut q| {
                let mut multi = vec![0; self.dim()];
                multi[face.axis] = fixed;
                for &j in &tangential {
                    multi[j] = q % (self.cells[j] + 1);
                    q /= self.cells[j] + 1;
                }
                self.node(&multi)
            })
            .collect()
    }

    /// Boundary traces of a species-major field.
    pub fn traces(&self, field: &[f64], n_species: usize) -> BoundaryTraces {
        let nodes = self.n_nodes();
        let faces = self
            .domain
            .faces()
            .into_iter()
            .map(|face| {
                let ids = self.face_nodes(face);
                FaceTrace {
                    face,
                    coords: face
                        .tangential_axes(self.dim())
                        .into_iter()
                        .map(|j| self.axis_coords(j))
                        .collect(),
                    values: (0..n_species)
                        .map(|k| ids.iter().map(|&p| field[k * nodes + p]).collect())
                        .collect(),
                }
            })
            .collect();
        BoundaryTraces { faces }
    }

    /// Multilinear interpolation stencil at tangential position `t` of `face`.
    fn face_stencil(&self, face: Face, t: &[f64]) -> Vec<(usize, f64)> {
        let tangential = face.tangential_axes(self.dim());
        let mut base = vec![0; self.dim()];
        base[face.axis] = match face.side {
            Side::Lower => 0,
            Side::Upper => self.cells[face.axis],
        };
        let mut stencil = vec![(base, 1.0)];
        for (m, &j) in tangential.iter().enumerate() {
            let s = ((t[m] - self.domain.lower()[j]) / self.spacing(j))
                .clamp(0.0, self.cells[j] as f64);
            let mut i0 = s.floor() as usize;
            if i0 >= self.cells[j] {
                i0 = self.cells[j] - 1;
            }
            let frac = s - i0 as f64;
            stencil = stencil
                .into_iter()
                .flat_map(|(multi, w)| {
                    let mut lo = multi.clone();
                    lo[j] = i0;
                    let mut hi = multi;
                    hi[j] = i0 + 1;
                    [(lo, w * (1.0 - frac)), (hi, w * frac)]
                })
                .filter(|(_, w)| *w != 0.0)
                .collect();
        }
        stencil
            .into_iter()
            .map(|(multi, w)| (self.node(&multi), w))
            .collect()
    }
}

/// `max_k sum_j |u_kj| dt / dx_j`.
pub fn cfl_number(model: &DiscreteVelocityModel, grid: &Grid, dt: f64) -> f64 {
    model
        .velocities()
        .iter()
        .map(|u| {
            u.iter()
                .enumerate()
                .map(|(j, c)| c.abs() * dt / grid.spacing(j))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Deviation field `f(t, .)`, species-major: value of species `k` at node `p`
/// is `field[k * n_nodes + p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub time: f64,
    pub step: usize,
    pub field: Vec<f64>,
}

impl SimulationState {
    pub fn new(field: Vec<f64>) -> Self {
        SimulationState {
            time: 0.0,
            step: 0,
            field,
        }
    }

    /// Field built from `value(species, x)` at every node.
    pub fn from_fn<F>(grid: &Grid, n_species: usize, mut value: F) -> Self
    where
        F: FnMut(usize, &[f64]) -> f64,
    {
        let positions: Vec<Vec<f64>> = (0..grid.n_nodes()).map(|p| grid.node_position(p)).collect();
        let field = (0..n_species)
            .flat_map(|k| positions.iter().map(|x| value(k, x)).collect::<Vec<_>>())
            .collect();
        SimulationState::new(field)
    }
}

/// Diagnostics recorded along a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub l2_norm: f64,
    pub lyapunov: f64,
    pub boundary_form: f64,
    pub species_norms: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    /// Single-threaded.
    #[default]
    Sequential,
    /// Node updates split over the current rayon pool. Results are identical
    /// to the sequential path.
    Rayon,
}

/// Incoming node `target` set to `sum coef * field[source]`.
#[derive(Clone, Debug)]
struct Overwrite {
    target: usize,
    sources: Vec<(usize, f64)>,
}

pub struct Solver {
    model: DiscreteVelocityModel,
    grid: Grid,
    jacobian: Matrix,
    dt: f64,
    /// `u_kj / dx_j` per species and axis.
    transport: Vec<Vec<f64>>,
    overwrites: Vec<Overwrite>,
    /// Quadrature weight per node.
    volume: Vec<f64>,
    /// Quadrature weight times Lyapunov weight, species-major.
    lyapunov_weight: Vec<f64>,
    weights: BoundaryWeights,
    parallelism: Parallelism,
}

impl Solver {
    /// Refuses configurations with CFL number above 1.
    pub fn new(
        model: DiscreteVelocityModel,
        steady: &SteadyState,
        grid: Grid,
        law: &ControlLaw,
        alpha: f64,
        dt: f64,
    ) -> Result<Self> {
        if model.dim() != grid.dim() {
            return Err(Error::Parameter(format!(
                "model dimension {} does not match grid dimension {}",
                model.dim(),
                grid.dim()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("time step {dt} must be positive")));
        }
        let cfl = cfl_number(&model, &grid, dt);
        if cfl > 1.0 + CFL_SLACK {
            return Err(Error::Cfl { cfl });
        }
        law.validate(&model, grid.domain())?;

        let n = model.n_species();
        let nodes = grid.n_nodes();
        let jacobian = model.source_jacobian(steady);
        let transport = model
            .velocities()
            .iter()
            .map(|u| (0..grid.dim()).map(|j| u[j] / grid.spacing(j)).collect())
            .collect();
        let overwrites = plan_overwrites(&model, &grid, law);
        let volume = grid.quadrature_weights();
        let mut lyapunov_weight = vec![0.0; n * nodes];
        for p in 0..nodes {
            let x = grid.node_position(p);
            for k in 0..n {
                lyapunov_weight[k * nodes + p] =
                    volume[p] * species_weight(&model, steady.values(), alpha, k, &x);
            }
        }
        Ok(Solver {
            model,
            grid,
            jacobian,
            dt,
            transport,
            overwrites,
            volume,
            lyapunov_weight,
            weights: BoundaryWeights::lyapunov(alpha, steady.values().to_vec()),
            parallelism: Parallelism::Sequential,
        })
    }

    pub fn with_parallelism(mut self, parallelism: Parallelism) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> &DiscreteVelocityModel {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn jacobian(&self) -> &Matrix {
        &self.jacobian
    }

    pub fn initial_state(&self, field: Vec<f64>) -> Result<SimulationState> {
        let expected = self.model.n_species() * self.grid.n_nodes();
        if field.len() != expected {
            return Err(Error::Parameter(format!(
                "initial field has {} values, expected {expected}",
                field.len()
            )));
        }
        Ok(SimulationState::new(field))
    }

    fn update_chunk(&self, old: &[f64], start: usize, out: &mut [f64]) {
        let nodes = self.grid.n_nodes();
        let n = self.model.n_species();
        let dt = self.dt;
        for (offset, slot) in out.iter_mut().enumerate() {
            let flat = start + offset;
            let k = flat / nodes;
            let p = flat % nodes;
            let here = old[flat];
            let mut rhs = 0.0;
            for (j, &c) in self.transport[k].iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let i = self.grid.index(p, j);
                let stride = self.grid.strides[j];
                if c > 0.0 {
                    if i > 0 {
                        rhs -= c * (here - old[flat - stride]);
                    }
                } else if i < self.grid.cells[j] {
                    rhs -= c * (old[flat + stride] - here);
                }
            }
            for m in 0..n {
                let a = self.jacobian[(k, m)];
                if a != 0.0 {
                    rhs += a * old[m * nodes + p];
                }
            }
            *slot = here + dt * rhs;
        }
    }

    /// One explicit step. Fails if the field stops being finite.
    pub fn step(&self, state: &mut SimulationState) -> Result<()> {
        let mut next = vec![0.0; state.field.len()];
        let chunk = self.grid.cells[0] + 1;
        let old = &state.field;
        match self.parallelism {
            Parallelism::Sequential => next
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(c, out)| self.update_chunk(old, c * chunk, out)),
            Parallelism::Rayon => next
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(c, out)| self.update_chunk(old, c * chunk, out)),
        }
        let values: Vec<f64> = self
            .overwrites
            .iter()
            .map(|o| o.sources.iter().map(|&(s, w)| w * next[s]).sum())
            .collect();
        for (o, v) in self.overwrites.iter().zip(values) {
            next[o.target] = v;
        }
        state.field = next;
        state.step += 1;
        state.time = state.step as f64 * self.dt;
        if let Some(bad) = state.field.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: state.step,
                species: bad / self.grid.n_nodes(),
                reason: "non-finite value".into(),
            });
        }
        Ok(())
    }

    pub fn species_energies(&self, field: &[f64]) -> Vec<f64> {
        let nodes = self.grid.n_nodes();
        field
            .chunks(nodes)
            .map(|f| {
                let terms: Vec<f64> = f.iter().zip(&self.volume).map(|(v, w)| w * v * v).collect();
                pairwise_sum(&terms)
            })
            .collect()
    }

    /// Plain `L^2` norm.
    pub fn l2_norm(&self, field: &[f64]) -> f64 {
        self.species_energies(field).iter().sum::<f64>().sqrt()
    }

    pub fn lyapunov(&self, field: &[f64]) -> f64 {
        let nodes = self.grid.n_nodes();
        let per_species: Vec<f64> = field
            .chunks(nodes)
            .zip(self.lyapunov_weight.chunks(nodes))
            .map(|(f, w)| {
                let terms: Vec<f64> = f.iter().zip(w).map(|(v, w)| w * v * v).collect();
                pairwise_sum(&terms)
            })
            .collect();
        per_species.iter().sum()
    }

    pub fn record(&self, state: &SimulationState) -> Result<Record> {
        let energies = self.species_energies(&state.field);
        let traces = self.grid.traces(&state.field, self.model.n_species());
        Ok(Record {
            t: state.time,
            l2_norm: energies.iter().sum::<f64>().sqrt(),
            lyapunov: self.lyapunov(&state.field),
            boundary_form: boundary_form(&traces, &self.model, self.grid.domain(), &self.weights)?,
            species_norms: energies.iter().map(|e| e.sqrt()).collect(),
        })
    }

    /// Runs `steps` steps, calling `on_record` at step 0 and every
    /// `record_every` steps.
    pub fn run<F>(
        &self,
        state: &mut SimulationState,
        steps: usize,
        record_every: usize,
        mut on_record: F,
    ) -> Result<()>
    where
        F: FnMut(&Record) -> Result<()>,
    {
        if record_every == 0 {
            return Err(Error::Parameter("record_every must be at least 1".into()));
        }
        let initial_norm = self.l2_norm(&state.field);
        on_record(&self.record(state)?)?;
        for _ in 0..steps {
            self.step(state)?;
            let norm = self.l2_norm(&state.field);
            if norm > DIVERGENCE_FACTOR * initial_norm && norm > 0.0 {
                let worst = self
                    .species_energies(&state.field)
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map_or(0, |(k, _)| k);
                return Err(Error::Divergence {
                    step: state.step,
                    species: worst,
                    reason: format!(
                        "norm {norm:e} exceeds {DIVERGENCE_FACTOR:e} times the initial norm {initial_norm:e}"
                    ),
                });
            }
            if state.step.is_multiple_of(record_every) {
                on_record(&self.record(state)?)?;
            }
        }
        Ok(())
    }
}

fn plan_overwrites(model: &DiscreteVelocityModel, grid: &Grid, law: &ControlLaw) -> Vec<Overwrite> {
    let nodes = grid.n_nodes();
    let dim = grid.dim();
    let mut claimed = vec![false; model.n_species() * nodes];
    let mut plan = Vec::new();
    for face in grid.domain().faces() {
        let tangential = face.tangential_axes(dim);
        for k in 0..model.n_species() {
            if crate::boundary::TraceKind::from_speed(face.normal_speed(model.velocity(k)))
                != TraceKind::Incoming
            {
                continue;
            }
            for p in grid.face_nodes(face) {
                let target = k * nodes + p;
                if claimed[target] {
                    continue;
                }
                claimed[target] = true;
                let x = grid.node_position(p);
                let t: Vec<f64> = tangential.iter().map(|&j| x[j]).collect();
                let sources = match law.rule_at(face, k, &t) {
                    None => Vec::new(),
                    Some(rule) => rule
                        .terms
                        .iter()
                        .flat_map(|term| {
                            let y = term.map.apply(&t);
                            grid.face_stencil(term.source_face, &y)
                                .into_iter()
                                .map(move |(q, w)| (term.source_species * nodes + q, term.gain * w))
                        })
                        .collect(),
                };
                plan.push(Overwrite { target, sources });
            }
        }
    }
    plan
}

/// Writes a field as one value per line after a header `n d nodes... t`.
pub fn write_snapshot(path: &Path, grid: &Grid, n_species: usize, state: &SimulationState) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let dims: Vec<String> = grid.nodes_per_axis().iter().map(|d| d.to_string()).collect();
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{} {} {} {:.16e}", n_species, grid.dim(), dims.join(" "), state.time)?;
        for v in &state.field {
            writeln!(out, "{v:.16e}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{coplanar_mixed_law, AffineMap, InflowRule, FeedbackTerm};
    use crate::model::build_coplanar;
    use approx::assert_abs_diff_eq;

    fn coplanar_solver(law: &ControlLaw, cells: usize, dt: f64) -> Solver {
        let m = build_coplanar(1.0, 0.1).unwrap();
        let fe = SteadyState::new(&m, vec![4.0, 3.0, 2.0, 6.0]).unwrap();
        let grid = Grid::new(BoxDomain::unit(2), vec![cells, cells]).unwrap();
        Solver::new(m, &fe, grid, law, 1.0, dt).unwrap()
    }

    fn one_species(u: f64) -> (DiscreteVelocityModel, SteadyState) {
        let m = DiscreteVelocityModel::new(1, vec![vec![u]], vec![]).unwrap();
        let fe = SteadyState::new(&m, vec![1.0]).unwrap();
        (m, fe)
    }

    #[test]
    fn cfl_examples() {
        let m = build_coplanar(1.0, 0.1).unwrap();
        let grid = Grid::new(BoxDomain::unit(2), vec![100, 100]).unwrap();
        assert_abs_diff_eq!(cfl_number(&m, &grid, 0.002), 0.2, epsilon = 1e-15);
        assert_eq!(cfl_number(&m, &grid, 0.0), 0.0);
        let m2 = build_coplanar(2.0, 0.1).unwrap();
        assert_abs_diff_eq!(cfl_number(&m2, &grid, 0.005), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cfl_violation_refused() {
        let m = build_coplanar(1.0, 0.1).unwrap();
        let fe = SteadyState::new(&m, vec![1.0; 4]).unwrap();
        let grid = Grid::new(BoxDomain::unit(2), vec![100, 100]).unwrap();
        let r = Solver::new(m, &fe, grid, &ControlLaw::zero(), 1.0, 0.011);
        assert!(matches!(r, Err(Error::Cfl { .. })));
    }

    #[test]
    fn grid_geometry() {
        let grid = Grid::new(BoxDomain::new(vec![0.0, 1.0], vec![2.0, 2.0]).unwrap(), vec![4, 2]).unwrap();
        assert_eq!(grid.n_nodes(), 15);
        assert_eq!(grid.node_position(grid.node(&[2, 1])), vec![1.0, 1.5]);
        assert_abs_diff_eq!(grid.quadrature_weights().iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        assert_eq!(grid.face_nodes(Face::upper(0)), vec![4, 9, 14]);
        assert_eq!(grid.face_nodes(Face::lower(1)), vec![0, 1, 2, 3, 4]);
        assert!(Grid::new(BoxDomain::unit(1), vec![1]).is_err());
    }

    #[test]
    fn zero_field_stays_zero() {
        let s = coplanar_solver(&coplanar_mixed_law(0.1, 0.1).unwrap(), 20, 0.01);
        let mut st = s.initial_state(vec![0.0; 4 * 21 * 21]).unwrap();
        for _ in 0..10 {
            s.step(&mut st).unwrap();
        }
        assert!(st.field.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_data_under_upwind_transport() {
        let (m, fe) = one_species(1.0);
        let grid = Grid::new(BoxDomain::unit(1), vec![10]).unwrap();
        let s = Solver::new(m, &fe, grid, &ControlLaw::zero(), 1.0, 0.05).unwrap();
        let mut st = s.initial_state(vec![2.0; 11]).unwrap();
        s.step(&mut st).unwrap();
        assert_eq!(st.field[0], 0.0);
        assert!(st.field[1..].iter().all(|&v| v == 2.0));
        s.step(&mut st).unwrap();
        assert_abs_diff_eq!(st.field[1], 1.0, epsilon = 1e-15); // (1 - 0.5) * 2
    }

    #[test]
    fn first_step_from_uniform_data_is_pure_source() {
        let s = coplanar_solver(&coplanar_mixed_law(0.1, 0.1).unwrap(), 100, 0.002);
        let nodes = 101 * 101;
        let mut st = s.initial_state(vec![1.0; 4 * nodes]).unwrap();
        s.step(&mut st).unwrap();
        let centre = s.grid().node(&[50, 50]);
        assert_abs_diff_eq!(st.field[centre], 1.0002, epsilon = 1e-14);
        assert_abs_diff_eq!(st.field[2 * nodes + centre], 0.9998, epsilon = 1e-14);
    }

    #[test]
    fn periodic_feedback_preserves_free_stream() {
        let (m, fe) = one_species(1.0);
        let grid = Grid::new(BoxDomain::unit(1), vec![16]).unwrap();
        let law = ControlLaw::new(
            "periodic",
            vec![InflowRule {
                face: Face::lower(0),
                species: 0,
                region: None,
                terms: vec![FeedbackTerm {
                    source_face: Face::upper(0),
                    source_species: 0,
                    map: AffineMap::identity(0),
                    gain: 1.0,
                }],
            }],
        );
        let s = Solver::new(m, &fe, grid, &law, 1.0, 0.03).unwrap();
        let mut st = s.initial_state(vec![0.75; 17]).unwrap();
        for _ in 0..200 {
            s.step(&mut st).unwrap();
        }
        assert!(st.field.iter().all(|&v| v == 0.75));
    }

    #[test]
    fn exact_shift_at_unit_cfl_flushes_in_finite_time() {
        let (m, fe) = one_species(-1.0);
        // dyadic spacing keeps dt * u / dx exactly 1
        let grid = Grid::new(BoxDomain::unit(1), vec![16]).unwrap();
        let s = Solver::new(m, &fe, grid, &ControlLaw::zero(), 1.0, 0.0625).unwrap();
        let mut st = s.initial_state(vec![1.0; 17]).unwrap();
        // the value sitting at x = 1 reaches x = 0 after exactly 16 steps
        for _ in 0..17 {
            s.step(&mut st).unwrap();
        }
        assert!(st.field.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interpolation_stencil_on_face() {
        let grid = Grid::new(BoxDomain::unit(2), vec![10, 10]).unwrap();
        let st = grid.face_stencil(Face::lower(0), &[0.25]);
        assert_eq!(st.len(), 2);
        assert_eq!(st[0].0, grid.node(&[0, 2]));
        assert_abs_diff_eq!(st[0].1, 0.5, epsilon = 1e-12);
        let aligned = grid.face_stencil(Face::lower(0), &[0.3]);
        assert!(aligned.iter().any(|&(p, w)| p == grid.node(&[0, 3]) && (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn lyapunov_matches_functional() {
        let s = coplanar_solver(&ControlLaw::zero(), 30, 0.01);
        let m = build_coplanar(1.0, 0.1).unwrap();
        let fe = SteadyState::new(&m, vec![4.0, 3.0, 2.0, 6.0]).unwrap();
        let st = SimulationState::from_fn(s.grid(), 4, |k, x| (k as f64 + 1.0) * (x[0] - x[1]).sin());
        let direct = crate::lyapunov::functional(s.grid(), &st.field, &m, &fe, 1.0).unwrap();
        assert_abs_diff_eq!(s.lyapunov(&st.field), direct, epsilon = 1e-12 * direct);
    }

    #[test]
    fn divergence_guard_trips() {
        // u > 0 with inflow k * outflow, k = 10: grows without bound.
        let (m, fe) = one_species(1.0);
        let grid = Grid::new(BoxDomain::unit(1), vec![4]).unwrap();
        let law = ControlLaw::new(
            "gain",
            vec![InflowRule {
                face: Face::lower(0),
                species: 0,
                region: None,
                terms: vec![FeedbackTerm {
                    source_face: Face::upper(0),
                    source_species: 0,
                    map: AffineMap::identity(0),
                    gain: 10.0,
                }],
            }],
        );
        let s = Solver::new(m, &fe, grid, &law, 1.0, 0.25).unwrap();
        let mut st = s.initial_state(vec![1.0; 5]).unwrap();
        let r = s.run(&mut st, 10_000, 1, |_| Ok(()));
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }
}
