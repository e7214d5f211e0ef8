//! Integrator properties on assembled systems: linearity, prefix
//! consistency, dissipation, and fitted decay rates straddling the slowest
//! mode.

use memlqr::galerkin::{assemble_system, project_state, Basis, ScalarField};
use memlqr::model::{BoxRegion, InputShape, ModelParams};
use memlqr::riccati::solve_are;
use memlqr::simulate::{cost_functional, decay_rate, integrate};
use memlqr::Real;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn interval_system(n: usize) -> memlqr::galerkin::GalerkinSystem<Real> {
    let params = ModelParams::new(0.01, 0.01, 1.0, 2.0, DMatrix::identity(1, 1)).unwrap();
    let shapes = vec![InputShape::single_box(BoxRegion::interval(0.1, 0.8), 10.0)];
    assemble_system(Basis::hat1d(n).unwrap(), &params, &shapes).unwrap()
}

proptest! {
    // The scheme is linear: scaling the initial state scales every state.
    #[test]
    fn integration_is_linear(scale in -3.0f64..3.0, seed in 0.0f64..10.0) {
        let system = interval_system(5);
        let d = system.state_dim();
        let c0 = DVector::<Real>::from_fn(d, |i, _| ((seed + i as Real) * 0.7).sin());
        let base = integrate(&system, None, &c0, 1.0, 0.01).unwrap();
        let scaled = integrate(&system, None, &(&c0 * scale), 1.0, 0.01).unwrap();
        for (a, b) in base.states.iter().zip(scaled.states.iter()) {
            let diff = (b - a * scale).amax();
            prop_assert!(diff <= 1e-12 * (1.0 + scale.abs()) * (1.0 + a.amax()));
        }
    }
}

// Truncating the horizon reproduces the prefix of the longer run exactly:
// each step depends only on its predecessor and a shared factorization.
#[test]
fn shorter_horizons_are_exact_prefixes() {
    let system = interval_system(6);
    let d = system.state_dim();
    let c0 = DVector::<Real>::from_fn(d, |i, _| (i as Real * 0.3).cos());
    let long = integrate(&system, None, &c0, 2.0, 0.05).unwrap();
    let short = integrate(&system, None, &c0, 1.0, 0.05).unwrap();
    for (k, s) in short.states.iter().enumerate() {
        assert_eq!(s, &long.states[k], "state {k} must match exactly");
    }
    assert_eq!(short.times.len(), 21);
    assert_eq!(long.times.len(), 41);
}

// The uncontrolled fitted decay rate straddles the slowest analytic mode
// (about 0.05 for this configuration); feedback accelerates it by an order
// of magnitude.
#[test]
fn feedback_outpaces_the_open_loop() {
    let system = interval_system(10);
    let c0 = project_state(
        system.basis,
        &ScalarField::OneD(&|_x| -5.0),
        &ScalarField::OneD(&|_x| 0.0),
    )
    .unwrap();

    let open = integrate(&system, None, &c0, 20.0, 0.01).unwrap();
    let open_rate = decay_rate(&open, None).unwrap();
    assert!((0.04..=0.07).contains(&open_rate), "open-loop rate {open_rate}");
    for pair in open.x_norm.windows(2) {
        assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "open loop is dissipative");
    }

    let solution = solve_are(&system).unwrap();
    let closed = integrate(&system, Some(&solution.gain), &c0, 8.0, 0.01).unwrap();
    let closed_rate = decay_rate(&closed, None).unwrap();
    assert!(
        closed_rate > 10.0 * open_rate,
        "closed {closed_rate} vs open {open_rate}"
    );
}

// Quadratic cost of a pure exponential decay: A = -I on an orthonormal
// basis gives J = q ||x0||^2 / 2 for the state part.
#[test]
fn cost_of_synthetic_exponential_decay() {
    let params = ModelParams::new(0.005, 0.001, 0.5, 3.0, DMatrix::identity(2, 2)).unwrap();
    let shapes = vec![
        InputShape::single_box(BoxRegion::rect(0.1, 0.3, 0.1, 0.5), 5.0),
        InputShape::single_box(BoxRegion::rect(0.5, 0.7, 0.5, 0.9), 10.0),
    ];
    let mut system = assemble_system(Basis::sine2d(1).unwrap(), &params, &shapes).unwrap();
    let sd = system.state_dim();
    system.a_mat = -DMatrix::<Real>::identity(sd, sd);
    system.g_mat = DMatrix::<Real>::identity(sd, sd);
    let mut c0 = DVector::<Real>::zeros(sd);
    c0[0] = 1.0;
    let record = integrate(&system, None, &c0, 15.0, 1e-3).unwrap();
    let cost = cost_functional(&record, system.q_weight, &system.r_matrix, &system.g_mat).unwrap();
    let expected = 3.0 / 2.0;
    assert!(
        (cost - expected).abs() < 1e-4 * expected,
        "cost {cost} vs {expected}"
    );
}
