//! Numerical building blocks shared by the asymptotic solver: adaptive
//! Gauss-Kronrod quadrature and bracketed root finding.

pub mod quad;
pub mod roots;

pub use quad::{Estimate, Quadrature};
pub use roots::{bracket_increasing, brent, Bracket};
