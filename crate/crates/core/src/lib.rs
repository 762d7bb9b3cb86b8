//! Numerical laboratory for circle-method machinery: exponential sums over
//! polynomial surfaces, Farey dissections, arc mollifiers, majorants and
//! moment / level-set functionals at desk scale.

pub mod arcs;
pub mod arith;
pub mod error;
pub mod expsum;
pub mod majorants;
pub mod numeric;
pub mod quad;
pub mod restriction;
pub mod surfaces;

pub use error::{Error, ErrorClass, Result};
