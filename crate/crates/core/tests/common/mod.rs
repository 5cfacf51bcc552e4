#![allow(dead_code)]

use kinbc_core::{CollisionChannel, DiscreteVelocityModel};
use proptest::prelude::*;

/// Velocity with at least one component of size >= 0.25.
fn velocity(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, dim)
        .prop_filter("velocity near the origin", |u| u.iter().any(|c| c.abs() >= 0.25))
}

fn channel(n: usize) -> impl Strategy<Value = CollisionChannel> {
    ([0..n, 0..n], [0..n, 0..n], 0.01f64..1.0)
        .prop_map(|(pre, post, rate)| CollisionChannel::new(pre, post, rate))
}

/// Random model with 1-3 dimensions, 2-6 velocities and up to 5 channels.
pub fn model() -> impl Strategy<Value = DiscreteVelocityModel> {
    (1usize..=3, 2usize..=6)
        .prop_flat_map(|(dim, n)| {
            (
                Just(dim),
                prop::collection::vec(velocity(dim), n),
                prop::collection::vec(channel(n), 1..=5),
            )
        })
        .prop_filter_map("conflicting channel rates", |(dim, v, ch)| {
            DiscreteVelocityModel::new(dim, v, ch).ok()
        })
}

/// Random model together with a random positive state.
pub fn model_and_state() -> impl Strategy<Value = (DiscreteVelocityModel, Vec<f64>)> {
    model().prop_flat_map(|m| {
        let n = m.n_species();
        (Just(m), prop::collection::vec(0.1f64..5.0, n))
    })
}
