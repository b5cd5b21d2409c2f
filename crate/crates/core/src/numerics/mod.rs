//! Numerical building blocks shared by the solvers.

pub mod chebyshev;
pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod uniform;
