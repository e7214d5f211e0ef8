//! Feedback stabilization of a heat equation with memory.
//!
//! The plant is the coupled system
//!
//! ```text
//! y_t = div((eta*y + z)_grad) + sum_i b_i(xi) u_i(t),    z_t = y - kappa*z
//! ```
//!
//! on the unit interval or the unit square with Dirichlet boundary
//! conditions, posed on the state space `X = L2 x H1_0`. The crate
//! synthesizes state-feedback gains that move the closed-loop spectrum left
//! of a target rate `-omega` and validates the construction numerically:
//!
//! * [`model`]: problem data and the closed-form spectrum of the continuum
//!   operator (two eigenvalue branches per Laplacian eigenvalue).
//! * [`stabilizability`]: the rank test deciding whether the chosen
//!   actuators can achieve the target rate.
//! * [`galerkin`]: finite-dimensional state/input/Gram matrices for 1D hat
//!   and 2D spectral sine bases.
//! * [`riccati`]: dense algebraic Riccati solves in Gram-orthonormalized
//!   coordinates, gain extraction, Riesz representers, inter-mesh gain
//!   distances.
//! * [`analysis`]: dense eigenvalue reports, cross-mesh gain application,
//!   and empirical convergence probes.
//! * [`simulate`]: Crank-Nicolson time integration, decay-rate fits, and
//!   the quadratic cost functional.
//!
//! All numeric code is generic over the scalar type through [`Scalar`];
//! concrete aliases at the crate root fix `f64`, which every shipped tool
//! uses.

pub mod analysis;
pub mod error;
pub mod galerkin;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod riccati;
pub mod simulate;
pub mod stabilizability;

pub use error::{Error, Result};

use nalgebra::RealField;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Scalar field the numerics run over. Implemented by `f32` and `f64`.
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Num + Copy {}

impl<T> Scalar for T where T: RealField + FromPrimitive + ToPrimitive + Num + Copy {}

/// Converts an `f64` literal into the working scalar type.
///
/// Panics if the value is not representable, which cannot happen for the
/// finite literals used throughout this crate.
pub fn scalar<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite literal must convert to the scalar type")
}

/// Default scalar type for desk-scale runs.
pub type Real = f64;

/// [`model::ModelParams`] over [`Real`].
pub type ModelParams = model::ModelParams<Real>;
/// [`model::InputShape`] over [`Real`].
pub type InputShape = model::InputShape<Real>;
/// [`model::AEigenpair`] over [`Real`].
pub type AEigenpair = model::AEigenpair<Real>;
/// [`model::ModeGroup`] over [`Real`].
pub type ModeGroup = model::ModeGroup<Real>;
/// [`stabilizability::RankReport`] over [`Real`].
pub type RankReport = stabilizability::RankReport<Real>;
/// [`galerkin::GalerkinSystem`] over [`Real`].
pub type GalerkinSystem = galerkin::GalerkinSystem<Real>;
/// [`riccati::ARESolution`] over [`Real`].
pub type ARESolution = riccati::ARESolution<Real>;
/// [`riccati::GainRepresenters`] over [`Real`].
pub type GainRepresenters = riccati::GainRepresenters<Real>;
/// [`analysis::SpectrumReport`] over [`Real`].
pub type SpectrumReport = analysis::SpectrumReport<Real>;
/// [`simulate::TrajectoryRecord`] over [`Real`].
pub type TrajectoryRecord = simulate::TrajectoryRecord<Real>;
