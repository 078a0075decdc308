//! Mollified Euler scheme for kinetic SDEs `dX = V dt, dV = b(X, V) dt + dW`
//! with singular drifts, together with the Gaussian kernel of the free
//! kinetic system, augmented Brownian paths and an error laboratory for
//! measuring strong and weak convergence rates.

pub mod brownian;
pub mod drift;
pub mod error;
pub mod integrator;
pub mod kernel;
pub mod lab;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod state;

pub use brownian::{coarsen, integrate_path, sample_path, AugmentedIncrement, AugmentedPath, Estimate, GridSpec};
pub use drift::{mollify, DriftSpec, MollifiedDrift, MollifyMethod, RegularityLabel, TabulatedDrift};
pub use error::{Error, Result};
pub use integrator::{
    exact_linear_solve, integrate, reference_solve, InitialCondition, SchemeConfig, Trajectory,
};
pub use kernel::{kernel_density, KernelCovariance, MixedExponent};
pub use lab::RateReport;
pub use state::PhaseState;
