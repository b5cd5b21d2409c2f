//! Cohomogeneity-one Kähler–Ricci solitons: reduced geometry, a brute-force
//! curvature oracle, two independent soliton solvers, second-variation
//! diagnostics and the pointwise matrix identities behind them.

pub mod algebra;
pub mod ansatz;
pub mod error;
pub mod grid;
pub mod io;
pub mod numerics;
pub mod oracle;
pub mod solver;
pub mod stability;

pub use ansatz::{BaseFactor, BundleConfig, CurvatureConstants, RicciProfiles};
pub use error::{Error, Result};
pub use grid::{GridScheme, Profile, ProfileGrid};
pub use stability::{EntropyGauge, GaugeMode};
pub use solver::{Method, ResidualReport, SolitonSolution, SolverOptions};
