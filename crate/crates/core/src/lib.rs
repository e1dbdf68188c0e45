//! Exact arithmetic for Hermitian theta lattices over imaginary quadratic
//! fields, the Atkin-Lehner part of the extended Hermitian modular group of
//! degree two, and Maass-space checks on Fourier coefficient tables.

pub mod enumeration;
pub mod error;
pub mod hlattice;
pub mod isometry;
pub mod linalg;
pub mod maass;
pub mod modgroup;
pub mod qfield;
pub mod reduction;
pub mod theta;

pub use error::{Error, Result};
pub use hlattice::{ExampleReading, HermLattice};
pub use qfield::{FieldCtx, Ideal, KElem};
pub use num_rational::BigRational;
