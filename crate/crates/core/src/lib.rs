//! Clifford analysis toolkit: exact Clifford algebra arithmetic, the
//! finite-difference Dirac calculus on grids, exact verification of the
//! algebraic identities behind weighted `L²` estimates for `D̄u = f`, and a
//! minimum-weighted-norm solver with norm-bound certificates.

pub mod algebra;
pub mod convergence;
pub mod field;
pub mod identity;
pub mod solver;
pub mod weight;

pub use algebra::{blade_product, AlgebraError, Blade, Multivector, Sign};
pub use field::{CliffordField, FieldError, GridSpec};
pub use weight::WeightSpec;
