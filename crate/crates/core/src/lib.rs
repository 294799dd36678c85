//! Variable-step fractional BDF2 (FBDF2) time stepping for the
//! time-fractional Cahn-Hilliard equation.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: nonuniform time levels, graded/composite constructors and CSV I/O.
//! - [`bounds`]: the step-ratio window `[R_*, r*(alpha))` and the grading limit.
//! - [`kernels`]: closed-form FBDF2 convolution coefficients and the discrete
//!   Caputo operator.
//! - [`dgs`]: the discrete gradient structure functionals and their checks.
//! - [`spectral`]: the 2-D periodic Fourier pseudo-spectral backend and energies.
//! - [`solver`]: the implicit FBDF2 stepper, a BDF2 reference stepper and the
//!   adaptive step controller.
//! - [`experiments`]: run configuration and the experiment drivers used by the
//!   `tfch` binary.

pub mod bounds;
pub mod dgs;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod mesh;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use kernels::{omega, KernelRow};
pub use mesh::TimeMesh;
