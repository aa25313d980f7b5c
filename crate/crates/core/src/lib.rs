pub mod dump;
pub mod error;
pub mod fock;
pub mod harness;
pub mod linalg;
pub mod modular;
pub mod onepspace;
pub mod quadrature;
pub mod scatfunc;
pub mod smatrix;
pub mod sparse;
pub mod twist;
pub mod verify;

pub use error::{LabError, Result};
