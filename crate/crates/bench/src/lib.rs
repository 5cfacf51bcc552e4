//! Shared fixtures for the benchmarks: the coplanar reference setup.

use kinbc_core::boundary::coplanar_mixed_law;
use kinbc_core::{
    build_coplanar, BoundaryWeights, BoxDomain, ControlLaw, DiscreteVelocityModel, Grid,
    Parallelism, SimulationState, Solver, SteadyState,
};

pub const STEADY: [f64; 4] = [4.0, 3.0, 2.0, 6.0];
pub const ALPHA: f64 = 71.2471;

pub fn model() -> DiscreteVelocityModel {
    build_coplanar(1.0, 0.1).expect("coplanar model")
}

pub fn steady(model: &DiscreteVelocityModel) -> SteadyState {
    SteadyState::new(model, STEADY.to_vec()).expect("steady state")
}

pub fn domain() -> BoxDomain {
    BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]).expect("unit square")
}

pub fn law() -> ControlLaw {
    coplanar_mixed_law(0.1, 0.1).expect("mixed law")
}

pub fn weights() -> BoundaryWeights {
    BoundaryWeights::lyapunov(ALPHA, STEADY.to_vec())
}

/// Solver on an `n x n` grid with CFL number 0.2, and a unit initial state.
pub fn solver(n: usize, parallelism: Parallelism) -> (Solver, SimulationState) {
    let model = model();
    let steady = steady(&model);
    let grid = Grid::new(domain(), vec![n, n]).expect("grid");
    let dt = 0.2 / n as f64;
    let solver = Solver::new(model, &steady, grid, &law(), ALPHA, dt)
        .expect("solver")
        .with_parallelism(parallelism);
    let field = vec![1.0; 4 * (n + 1) * (n + 1)];
    let state = solver.initial_state(field).expect("initial state");
    (solver, state)
}
