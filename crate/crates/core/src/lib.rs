//! Truncated Fourier-space Poisson structures for the three-dimensional
//! incompressible Euler equations in vorticity form.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: the truncated, anisotropy-scaled wavenumber lattice.
//! * [`frames`]: cross-product matrices, the divergence-free projector and
//!   per-mode rotation frames.
//! * [`state`]: vorticity fields in full and reduced coordinates.
//! * [`structures`]: structure-matrix blocks and the assembled Poisson tensor.
//! * [`observables`]: energy, helicity, their gradients and velocity inversion.
//! * [`dynamics`]: Hamiltonian vector fields and RK4 time stepping.
//! * [`verify`]: residual checks of the algebraic identities.
//! * [`equilibria`]: shear-flow equilibria and Poisson-rank analysis.

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod frames;
pub mod io;
pub mod lattice;
pub mod observables;
pub mod state;
pub mod structures;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Anisotropy, IVec3, ModeSet, Truncation};
pub use num_complex::Complex64;

/// Complex 3-vector, the value of a single vorticity mode.
pub type CVec3 = nalgebra::Vector3<Complex64>;
/// Complex 2-vector, the value of a single reduced vorticity mode.
pub type CVec2 = nalgebra::Vector2<Complex64>;
/// Real 3-vector, used for wavevectors.
pub type RVec3 = nalgebra::Vector3<f64>;
/// Complex 3×3 matrix.
pub type CMat3 = nalgebra::Matrix3<Complex64>;
/// Complex 2×2 matrix.
pub type CMat2 = nalgebra::Matrix2<Complex64>;
/// Real 3×3 matrix.
pub type RMat3 = nalgebra::Matrix3<f64>;
