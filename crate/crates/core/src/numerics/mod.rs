//! Numerical building blocks shared by the synthesis and optimization code.

pub mod ode;
pub mod optimize;
pub mod quadrature;
