//! Normalized shrinking soliton `Ric + Hess u = g` for the ansatz, solved two
//! independent ways, gauge-normalized and checked against the soliton identities.

mod momentum;
mod shooting;

pub use momentum::{solve_momentum, MomentumReduction};
pub use shooting::{solve_shooting, ShootingDiagnostics};

use serde::{Deserialize, Serialize};

use crate::ansatz::{
    hessian_components, kaehler_residual, laplacian, ricci_components, weighted_laplacian, weighted_measure,
    BundleConfig, CurvatureConstants,
};
use crate::error::Result;
use crate::grid::{GridScheme, Profile, ProfileGrid};
use crate::numerics::ode::OdeTolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Momentum,
    Shooting,
}

/// Discretization and tolerance controls shared by both solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub nodes: usize,
    pub scheme: GridScheme,
    pub ode: OdeTolerances,
    /// Distance from each collapse end at which shooting leaves the series.
    pub launch_offset: f64,
    /// Allowed `sup |(l²)' − q f|` along a shooting trajectory.
    pub kaehler_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nodes: 2048,
            scheme: GridScheme::Chebyshev,
            ode: OdeTolerances {
                rtol: 1e-10,
                atol: 1e-12,
                max_steps: 400_000,
            },
            launch_offset: 0.01,
            kaehler_tolerance: 1e-7,
            max_iterations: 60,
        }
    }
}

/// Sup-norm deviations of the soliton equations and identities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub e_n: f64,
    pub e_u: f64,
    pub e_i: Vec<f64>,
    pub kaehler: f64,
    /// `sup |R + Δu − n|`.
    pub trace_identity: f64,
    /// Half-width of the range of `τ(2Δu − |∇u|² + R) + u` along the interval.
    pub hamilton_constancy: f64,
    /// Midrange value of the same quantity.
    pub hamilton_constant: f64,
    /// `sup |Δ_u u + 2u|`.
    pub drift_laplacian: f64,
    /// `|∫ Δ_u u e^{-u} dV|` with unit orbit volume.
    pub weighted_divergence: f64,
    /// `|∫ u e^{-u} dV| / ∫ e^{-u} dV`.
    pub normalization: f64,
    /// Sup-norm difference on `(f, l_i, u)` against the other method.
    pub cross_method: Option<f64>,
}

impl ResidualReport {
    /// Largest soliton-equation residual.
    pub fn soliton(&self) -> f64 {
        self.e_i.iter().fold(self.e_n.max(self.e_u), |m, e| m.max(*e))
    }

    /// Largest of the four identity deviations checked by the verify stage.
    pub fn identity_max(&self) -> f64 {
        self.drift_laplacian
            .max(self.trace_identity)
            .max(self.hamilton_constancy)
    }
}

/// A solved, gauge-normalized soliton.
#[derive(Debug, Clone)]
pub struct SolitonSolution {
    pub grid: ProfileGrid,
    pub config: BundleConfig,
    pub constants: CurvatureConstants,
    /// `u = c s + const` in the momentum coordinate `ds = f dt`.
    pub c_slope: f64,
    /// Total constant subtracted from `u` by normalization.
    pub gauge_shift: f64,
    pub residuals: ResidualReport,
    pub method: Method,
    /// Every slope root located in the search box (momentum method only).
    pub roots: Vec<f64>,
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `∫ F w e^{-u} dt` with unit orbit volume.
fn measure_integral(measure: &[f64], values: &[f64]) -> f64 {
    measure.iter().zip(values).map(|(m, v)| m * v).sum()
}

/// Sup-norms of `Ric + Hess u − g` per unit-frame direction.
pub fn soliton_residuals(
    grid: &ProfileGrid,
    config: &BundleConfig,
    constants: &CurvatureConstants,
) -> Result<(f64, f64, Vec<f64>)> {
    let ric = ricci_components(grid, config, constants)?;
    let hess = hessian_components(grid, &grid.u)?;
    let n = grid.len();
    let e_n = sup((0..n).map(|k| ric.r_nn[k] + hess.nn[k] - 1.0));
    let e_u = sup((0..n).map(|k| ric.r_uu[k] + hess.uu[k] - 1.0));
    let e_i = ric
        .r_i
        .iter()
        .zip(&hess.h)
        .map(|(r, h)| sup((0..n).map(|k| r[k] + h[k] - 1.0)))
        .collect();
    Ok((e_n, e_u, e_i))
}

/// Shifts `u` so that `∫ u e^{-u} dV = 0`. One shot.
pub fn gauge_normalize(sol: &SolitonSolution) -> SolitonSolution {
    let shift = normalization_shift(&sol.grid, &sol.config);
    let mut out = sol.clone();
    out.grid = sol.grid.with_potential(sol.grid.u.shifted(-shift));
    out.gauge_shift = sol.gauge_shift + shift;
    out
}

/// `a = ∫ u e^{-u} dV / ∫ e^{-u} dV` in the current weight.
pub fn normalization_shift(grid: &ProfileGrid, config: &BundleConfig) -> f64 {
    let m = weighted_measure(grid, config);
    measure_integral(&m, &grid.u.value) / m.iter().sum::<f64>()
}

/// Pointwise values of `τ(2Δu − |∇u|² + R) + u`.
pub fn hamilton_profile(
    grid: &ProfileGrid,
    config: &BundleConfig,
    constants: &CurvatureConstants,
) -> Result<Vec<f64>> {
    let ric = ricci_components(grid, config, constants)?;
    let lap = laplacian(grid, config, &grid.u)?;
    let tau = config.tau();
    Ok((0..grid.len())
        .map(|k| tau * (2.0 * lap[k] - grid.u.d1[k].powi(2) + ric.r[k]) + grid.u.value[k])
        .collect())
}

/// Recomputes every residual and identity on `sol` as it stands.
pub fn identity_suite(sol: &SolitonSolution) -> Result<ResidualReport> {
    let grid = &sol.grid;
    let config = &sol.config;
    let (e_n, e_u, e_i) = soliton_residuals(grid, config, &sol.constants)?;
    let kaehler = kaehler_residual(grid, config)?
        .iter()
        .map(|r| sup(r.iter().copied()))
        .fold(0.0, f64::max);
    let ric = ricci_components(grid, config, &sol.constants)?;
    let lap = laplacian(grid, config, &grid.u)?;
    let dlap = weighted_laplacian(grid, config, &grid.u)?;
    let n = config.n() as f64;
    let trace_identity = sup((0..grid.len()).map(|k| ric.r[k] + lap[k] - n));
    let ham = hamilton_profile(grid, config, &sol.constants)?;
    let (lo, hi) = ham
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let drift_laplacian = sup((0..grid.len()).map(|k| dlap[k] + 2.0 * grid.u.value[k]));
    let m = weighted_measure(grid, config);
    let mass: f64 = m.iter().sum();
    Ok(ResidualReport {
        e_n,
        e_u,
        e_i,
        kaehler,
        trace_identity,
        hamilton_constancy: 0.5 * (hi - lo),
        hamilton_constant: 0.5 * (hi + lo),
        drift_laplacian,
        weighted_divergence: measure_integral(&m, &dlap).abs(),
        normalization: measure_integral(&m, &grid.u.value).abs() / mass,
        cross_method: sol.residuals.cross_method,
    })
}

/// Normalizes the gauge and fills in the residual report.
pub(crate) fn finish(mut sol: SolitonSolution) -> Result<SolitonSolution> {
    sol = gauge_normalize(&sol);
    sol.residuals = identity_suite(&sol)?;
    Ok(sol)
}

/// Residual of the soliton system when `u` is replaced by a constant, i.e.
/// how far the geometry is from being Einstein with constant 1.
pub fn einstein_defect(sol: &SolitonSolution) -> Result<f64> {
    let flat = sol.grid.with_potential(Profile::constant(sol.grid.len(), 0.0));
    let (e_n, e_u, e_i) = soliton_residuals(&flat, &sol.config, &sol.constants)?;
    Ok(e_i.into_iter().fold(e_n.max(e_u), f64::max))
}

/// Sup-norm difference of `(f, l_i, u)` between two solutions, evaluated on
/// the nodes of `a` (with `b` interpolated), plus the difference in length.
pub fn profile_distance(a: &ProfileGrid, b: &ProfileGrid) -> f64 {
    let tb = b.length();
    let mut worst = (a.length() - tb).abs();
    for (k, &t) in a.t.iter().enumerate() {
        let t = t.min(tb);
        worst = worst.max((a.f.value[k] - b.interpolate(&b.f.value, t)).abs());
        worst = worst.max((a.u.value[k] - b.interpolate(&b.u.value, t)).abs());
        for (la, lb) in a.l.iter().zip(&b.l) {
            worst = worst.max((la.value[k] - b.interpolate(&lb.value, t)).abs());
        }
    }
    worst
}

/// Runs both solvers and records their disagreement in each report.
pub fn solve_both(
    config: &BundleConfig,
    constants: &CurvatureConstants,
    options: &SolverOptions,
) -> Result<(SolitonSolution, SolitonSolution)> {
    let mut m = solve_momentum(config, constants, options)?;
    let mut s = solve_shooting(config, constants, options)?;
    let d = profile_distance(&m.grid, &s.grid).max(profile_distance(&s.grid, &m.grid));
    m.residuals.cross_method = Some(d);
    s.residuals.cross_method = Some(d);
    Ok((m, s))
}
