//! Circle-bundle ansatz `g = dt² + f(t)² θ⊗θ + Σ l_i(t)² π_i* r_i` over a
//! product of Kähler–Einstein factors, and the reduced one-dimensional
//! geometry: Ricci components, Hessians, volume density, drift Laplacian
//! and weighted integrals.
//!
//! All orthonormal-frame quantities use the unit frame `{N = ∂_t, U = f⁻¹Z, H_i}`
//! where `Z` generates the circle action and `H_i` is any unit horizontal
//! vector tangent to factor `i`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{Profile, ProfileGrid};
use crate::stability::{EntropyGauge, GaugeMode};

/// One Kähler–Einstein factor `(V_i, r_i)` of the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseFactor {
    /// Real dimension of the factor.
    pub d: u32,
    /// Einstein constant, `Ric(r_i) = p r_i`.
    pub p: f64,
    /// Twist of the circle bundle over this factor.
    pub q: i64,
    /// Squared pointwise norm of a harmonic complex-structure deformation (0 if rigid).
    pub kappa: f64,
}

impl BaseFactor {
    pub fn new(d: u32, p: f64, q: i64, kappa: f64) -> Result<Self> {
        let factor = Self { d, p, q, kappa };
        factor.validate()?;
        Ok(factor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || !self.d.is_multiple_of(2) {
            return Err(Error::Config(format!("factor dimension {} must be even and >= 2", self.d)));
        }
        if self.q == 0 {
            return Err(Error::Config("twist q must be nonzero".into()));
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return Err(Error::Config(format!("Einstein constant {} must be positive", self.p)));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::Config(format!("deformation norm {} must be >= 0", self.kappa)));
        }
        Ok(())
    }

    pub fn dim(&self) -> f64 {
        f64::from(self.d)
    }

    pub fn twist(&self) -> f64 {
        self.q as f64
    }
}

/// Discrete data of the ansatz. The soliton is normalized with `τ = 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub factors: Vec<BaseFactor>,
}

impl BundleConfig {
    pub fn new(factors: Vec<BaseFactor>) -> Result<Self> {
        let config = Self { factors };
        config.validate()?;
        Ok(config)
    }

    /// The one-point blow-up of the projective plane: `d = 2, p = 2, q = 1`.
    pub fn koiso_cao() -> Self {
        Self {
            factors: vec![BaseFactor {
                d: 2,
                p: 2.0,
                q: 1,
                kappa: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::Config("at least one base factor is required".into()));
        }
        self.factors.iter().try_for_each(BaseFactor::validate)
    }

    /// Real dimension of the total space.
    pub fn n(&self) -> usize {
        2 + self.factors.iter().map(|f| f.d as usize).sum::<usize>()
    }

    pub fn tau(&self) -> f64 {
        0.5
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    fn check_grid(&self, grid: &ProfileGrid) -> Result<()> {
        if grid.factor_count() != self.factor_count() {
            return Err(Error::FactorMismatch {
                grid: grid.factor_count(),
                config: self.factor_count(),
            });
        }
        Ok(())
    }
}

/// The two A-tensor coefficients of the Ricci formulas together with the
/// provenance of their validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureConstants {
    #[serde(rename = "A", with = "ratio_string")]
    pub a: Ratio<i64>,
    #[serde(rename = "B", with = "ratio_string")]
    pub b: Ratio<i64>,
    pub max_rel_err: f64,
    pub samples: usize,
}

/// Acceptance bar for a pinning run.
pub const PIN_TOLERANCE: f64 = 1e-6;
/// Minimum number of oracle states behind a pinning run.
pub const PIN_MIN_SAMPLES: usize = 20;

impl CurvatureConstants {
    pub fn is_pinned(&self) -> bool {
        self.max_rel_err < PIN_TOLERANCE
            && self.samples >= PIN_MIN_SAMPLES
            && *self.a.numer() > 0
            && *self.b.numer() > 0
    }

    /// `(A, B)` as floats, or an error when the pinning run did not validate them.
    pub fn validated(&self) -> Result<(f64, f64)> {
        if !self.is_pinned() {
            return Err(Error::Unpinned(format!(
                "max_rel_err = {:e} over {} samples",
                self.max_rel_err, self.samples
            )));
        }
        Ok((ratio_to_f64(self.a), ratio_to_f64(self.b)))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

mod ratio_string {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Ratio<i64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Ratio<i64>, D::Error> {
        let text = String::deserialize(d)?;
        Ratio::from_str(text.trim()).map_err(serde::de::Error::custom)
    }
}

/// Value and first two derivatives of a profile at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub fn new(v: f64, d1: f64, d2: f64) -> Self {
        Self { v, d1, d2 }
    }

    fn of(p: &Profile, k: usize) -> Self {
        Self::new(p.value[k], p.d1[k], p.d2[k])
    }
}

/// Unit-frame Ricci components at a point where `f > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRicci {
    pub nn: f64,
    pub uu: f64,
    pub h: Vec<f64>,
}

/// Ricci components at a regular point for explicit coefficients `(a, b)`.
pub fn ricci_at_point(factors: &[BaseFactor], a: f64, b: f64, f: Jet, l: &[Jet]) -> PointRicci {
    let f_ratio = f.d1 / f.v;
    let mut sum_dl = 0.0;
    let mut sum_dll = 0.0;
    let mut twist_sum = 0.0;
    for (fac, lj) in factors.iter().zip(l) {
        let d = fac.dim();
        sum_dl += d * lj.d1 / lj.v;
        sum_dll += d * lj.d2 / lj.v;
        twist_sum += d * fac.twist().powi(2) / lj.v.powi(4);
    }
    let f2 = f.v * f.v;
    let nn = -f.d2 / f.v - sum_dll;
    let uu = -f.d2 / f.v - f_ratio * sum_dl + a * f2 * twist_sum;
    let h = factors
        .iter()
        .zip(l)
        .map(|(fac, li)| {
            let ri = li.d1 / li.v;
            -li.d2 / li.v - ri * (f_ratio + sum_dl - ri) + fac.p / (li.v * li.v)
                - b * fac.twist().powi(2) * f2 / li.v.powi(4)
        })
        .collect();
    PointRicci { nn, uu, h }
}

/// Limits of the Ricci components where the circle collapses (`f = 0`),
/// given `f'''` at that end.
pub fn ricci_at_collapse(factors: &[BaseFactor], f: Jet, f3: f64, l: &[Jet]) -> PointRicci {
    let ff = f3 / f.d1;
    let sum_dll: f64 = factors.iter().zip(l).map(|(fac, lj)| fac.dim() * lj.d2 / lj.v).sum();
    let nn = -ff - sum_dll;
    let uu = -ff - sum_dll;
    let h = factors
        .iter()
        .zip(l)
        .map(|(fac, li)| -2.0 * li.d2 / li.v + fac.p / (li.v * li.v))
        .collect();
    PointRicci { nn, uu, h }
}

/// Ricci profiles in the unit frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RicciProfiles {
    pub r_nn: Vec<f64>,
    pub r_uu: Vec<f64>,
    pub r_i: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

fn end_nodes(grid: &ProfileGrid) -> [usize; 2] {
    [0, grid.len() - 1]
}

fn check_interior(grid: &ProfileGrid) -> Result<()> {
    let last = grid.len() - 1;
    for k in 1..last {
        if grid.f.value[k] == 0.0 {
            return Err(Error::SingularGeometry { node: k, t: grid.t[k] });
        }
    }
    Ok(())
}

/// `(l_i²)' − q_i f` at every node, one vector per factor.
pub fn kaehler_residual(grid: &ProfileGrid, config: &BundleConfig) -> Result<Vec<Vec<f64>>> {
    config.check_grid(grid)?;
    Ok(config
        .factors
        .iter()
        .zip(&grid.l)
        .map(|(fac, l)| {
            (0..grid.len())
                .map(|k| 2.0 * l.value[k] * l.d1[k] - fac.twist() * grid.f.value[k])
                .collect()
        })
        .collect())
}

/// Ricci components on the grid. End nodes use the collapse limits with
/// `f'''` obtained by differentiating the sampled `f''`.
pub fn ricci_components(
    grid: &ProfileGrid,
    config: &BundleConfig,
    constants: &CurvatureConstants,
) -> Result<RicciProfiles> {
    let (a, b) = constants.validated()?;
    config.check_grid(grid)?;
    check_interior(grid)?;
    let n = grid.len();
    let r = config.factor_count();
    let (f3_start, f3_end) = grid.scheme.derivative_at_ends(&grid.f.d2, grid.length());
    let mut out = RicciProfiles {
        r_nn: vec![0.0; n],
        r_uu: vec![0.0; n],
        r_i: vec![vec![0.0; n]; r],
        r: vec![0.0; n],
    };
    let mut l_jets = Vec::with_capacity(r);
    for k in 0..n {
        l_jets.clear();
        l_jets.extend(grid.l.iter().map(|l| Jet::of(l, k)));
        let f = Jet::of(&grid.f, k);
        let point = if k == 0 {
            ricci_at_collapse(&config.factors, f, f3_start, &l_jets)
        } else if k == n - 1 {
            ricci_at_collapse(&config.factors, f, f3_end, &l_jets)
        } else {
            ricci_at_point(&config.factors, a, b, f, &l_jets)
        };
        out.r_nn[k] = point.nn;
        out.r_uu[k] = point.uu;
        let mut scalar = point.nn + point.uu;
        for (i, (fac, hi)) in config.factors.iter().zip(&point.h).enumerate() {
            out.r_i[i][k] = *hi;
            scalar += fac.dim() * hi;
        }
        out.r[k] = scalar;
    }
    Ok(out)
}

/// Unit-frame Hessian components of a scalar profile.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianProfiles {
    pub nn: Vec<f64>,
    pub uu: Vec<f64>,
    pub h: Vec<Vec<f64>>,
}

impl HessianProfiles {
    /// Metric trace `Δv`.
    pub fn trace(&self, config: &BundleConfig) -> Vec<f64> {
        (0..self.nn.len())
            .map(|k| {
                self.nn[k]
                    + self.uu[k]
                    + config
                        .factors
                        .iter()
                        .zip(&self.h)
                        .map(|(fac, h)| fac.dim() * h[k])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// `Hess v` on the grid; at the collapse ends `v' f'/f → v''`.
pub fn hessian_components(grid: &ProfileGrid, v: &Profile) -> Result<HessianProfiles> {
    if v.len() != grid.len() {
        return Err(Error::Grid("profile length does not match the grid".into()));
    }
    check_interior(grid)?;
    let n = grid.len();
    let ends = end_nodes(grid);
    let nn = v.d2.clone();
    let uu = (0..n)
        .map(|k| {
            if ends.contains(&k) {
                v.d2[k]
            } else {
                v.d1[k] * grid.f.d1[k] / grid.f.value[k]
            }
        })
        .collect();
    let h = grid
        .l
        .iter()
        .map(|l| (0..n).map(|k| v.d1[k] * l.d1[k] / l.value[k]).collect())
        .collect();
    Ok(HessianProfiles { nn, uu, h })
}

/// Reduced volume density `w = f Π l_i^{d_i}`.
pub fn volume_weight(grid: &ProfileGrid, config: &BundleConfig) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            config
                .factors
                .iter()
                .zip(&grid.l)
                .fold(grid.f.value[k], |acc, (fac, l)| acc * l.value[k].powi(fac.d as i32))
        })
        .collect()
}

/// `(log w)' = f'/f + Σ d_i l_i'/l_i` away from the ends.
fn log_weight_slope_noncollapsed(grid: &ProfileGrid, config: &BundleConfig, k: usize) -> f64 {
    config
        .factors
        .iter()
        .zip(&grid.l)
        .map(|(fac, l)| fac.dim() * l.d1[k] / l.value[k])
        .sum()
}

/// Drift Laplacian `Δ_u v = v'' + ((log w)' − u') v'`; at the ends the
/// collapsing term `(f'/f) v'` is replaced by its limit `v''`.
pub fn weighted_laplacian(grid: &ProfileGrid, config: &BundleConfig, v: &Profile) -> Result<Vec<f64>> {
    config.check_grid(grid)?;
    check_interior(grid)?;
    if v.len() != grid.len() {
        return Err(Error::Grid("profile length does not match the grid".into()));
    }
    let n = grid.len();
    let ends = end_nodes(grid);
    Ok((0..n)
        .map(|k| {
            let tail = log_weight_slope_noncollapsed(grid, config, k) - grid.u.d1[k];
            if ends.contains(&k) {
                2.0 * v.d2[k] + tail * v.d1[k]
            } else {
                v.d2[k] + (grid.f.d1[k] / grid.f.value[k] + tail) * v.d1[k]
            }
        })
        .collect())
}

/// Unweighted Laplacian `Δv = Δ_u v + u'v'`.
pub fn laplacian(grid: &ProfileGrid, config: &BundleConfig, v: &Profile) -> Result<Vec<f64>> {
    let mut lap = weighted_laplacian(grid, config, v)?;
    for (k, x) in lap.iter_mut().enumerate() {
        *x += grid.u.d1[k] * v.d1[k];
    }
    Ok(lap)
}

/// Quadrature weights times `w e^{-u}`, so that `Σ m_k F_k ≈ ∫ F w e^{-u} dt`.
pub fn weighted_measure(grid: &ProfileGrid, config: &BundleConfig) -> Vec<f64> {
    let w = volume_weight(grid, config);
    grid.quadrature_weights()
        .iter()
        .zip(&w)
        .zip(&grid.u.value)
        .map(|((q, w), u)| q * w * (-u).exp())
        .collect()
}

/// Result of a weighted integral; `ratio_gauge` marks the `V₀ = 1` convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedIntegral {
    pub value: f64,
    pub ratio_gauge: bool,
}

/// `V₀ ∫_0^T F w e^{-u} dt`.
pub fn weighted_integral(
    grid: &ProfileGrid,
    config: &BundleConfig,
    values: &[f64],
    gauge: &EntropyGauge,
) -> Result<WeightedIntegral> {
    config.check_grid(grid)?;
    if values.len() != grid.len() {
        return Err(Error::Grid("integrand length does not match the grid".into()));
    }
    let m = weighted_measure(grid, config);
    let raw: f64 = m.iter().zip(values).map(|(m, v)| m * v).sum();
    Ok(match (gauge.mode, gauge.v0) {
        (GaugeMode::Absolute, Some(v0)) => WeightedIntegral {
            value: v0 * raw,
            ratio_gauge: false,
        },
        _ => WeightedIntegral {
            value: raw,
            ratio_gauge: true,
        },
    })
}

impl fmt::Display for BaseFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(d={}, p={}, q={}, kappa={})", self.d, self.p, self.q, self.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridScheme;
    use std::f64::consts::PI;

    fn pinned() -> CurvatureConstants {
        CurvatureConstants {
            a: Ratio::new(1, 4),
            b: Ratio::new(1, 2),
            max_rel_err: 1e-9,
            samples: 20,
        }
    }

    fn kaehler_grid(n: usize, q: i64, l0: f64) -> ProfileGrid {
        // f = sin t on [0, π]; l² = q ∫ f + l0² is an exact Kähler pair.
        let t = GridScheme::Chebyshev.nodes(n, PI);
        let f = Profile::from_fn(&t, |x| (x.sin(), x.cos(), -x.sin()));
        let qf = q as f64;
        let l = Profile::from_fn(&t, |x| {
            let l2 = qf * (1.0 - x.cos()) + l0 * l0;
            let l = l2.sqrt();
            let dl = qf * x.sin() / (2.0 * l);
            let ddl = qf * x.cos() / (2.0 * l) - qf * qf * x.sin().powi(2) / (4.0 * l * l * l);
            (l, dl, ddl)
        });
        ProfileGrid::new(GridScheme::Chebyshev, t, f, vec![l], Profile::constant(n, 0.0)).unwrap()
    }

    #[test]
    fn exact_antiderivative_is_kaehler() {
        let g = kaehler_grid(33, 1, 1.0);
        let cfg = BundleConfig::koiso_cao();
        let res = kaehler_residual(&g, &cfg).unwrap();
        assert!(res[0].iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn constant_l_gives_minus_f() {
        let g = kaehler_grid(33, 1, 1.0);
        let mut g2 = g.clone();
        g2.l[0] = Profile::constant(33, 1.3);
        let res = kaehler_residual(&g2, &BundleConfig::koiso_cao()).unwrap();
        for (r, f) in res[0].iter().zip(&g.f.value) {
            assert!((r + f).abs() < 1e-15);
        }
        assert!(res[0][16].abs() > 0.5);
    }

    #[test]
    fn factor_mismatch_is_reported() {
        let g = kaehler_grid(17, 1, 1.0);
        let cfg = BundleConfig::new(vec![
            BaseFactor::new(2, 2.0, 1, 0.0).unwrap(),
            BaseFactor::new(2, 2.0, 1, 0.0).unwrap(),
        ])
        .unwrap();
        assert!(matches!(kaehler_residual(&g, &cfg), Err(Error::FactorMismatch { .. })));
    }

    #[test]
    fn flat_second_derivatives_kill_normal_ricci() {
        let fac = [BaseFactor::new(2, 2.0, 1, 0.0).unwrap()];
        let r = ricci_at_point(&fac, 0.25, 0.5, Jet::new(0.7, 0.3, 0.0), &[Jet::new(1.1, -0.2, 0.0)]);
        assert_eq!(r.nn, 0.0);
    }

    #[test]
    fn trace_matches_components_and_unpinned_is_rejected() {
        let g = kaehler_grid(33, 1, 1.0);
        let cfg = BundleConfig::koiso_cao();
        let ric = ricci_components(&g, &cfg, &pinned()).unwrap();
        for k in 0..g.len() {
            let tr = ric.r_nn[k] + ric.r_uu[k] + 2.0 * ric.r_i[0][k];
            assert!((tr - ric.r[k]).abs() <= 1e-14 * tr.abs().max(1.0));
        }
        let mut loose = pinned();
        loose.max_rel_err = 1e-3;
        assert!(matches!(ricci_components(&g, &cfg, &loose), Err(Error::Unpinned(_))));
    }

    #[test]
    fn interior_zero_of_f_is_singular() {
        let mut g = kaehler_grid(17, 1, 1.0);
        g.f.value[4] = 0.0;
        let cfg = BundleConfig::koiso_cao();
        assert!(matches!(
            ricci_components(&g, &cfg, &pinned()),
            Err(Error::SingularGeometry { node: 4, .. })
        ));
    }

    #[test]
    fn collapse_limits_are_continuous() {
        let g = kaehler_grid(65, 1, 1.0);
        let cfg = BundleConfig::koiso_cao();
        let ric = ricci_components(&g, &cfg, &pinned()).unwrap();
        // limits at the end nodes continue the interior values
        for (end, next) in [(0usize, 1usize), (64, 63)] {
            assert!((ric.r_nn[end] - ric.r_nn[next]).abs() < 1e-2);
            assert!((ric.r_uu[end] - ric.r_uu[next]).abs() < 1e-2);
            assert!((ric.r_i[0][end] - ric.r_i[0][next]).abs() < 1e-2);
        }
    }

    #[test]
    fn hessian_of_constant_vanishes_and_flat_model_second_derivative() {
        let g = kaehler_grid(33, 1, 1.0);
        let hess = hessian_components(&g, &Profile::constant(33, 4.2)).unwrap();
        assert!(hess.nn.iter().chain(&hess.uu).chain(&hess.h[0]).all(|x| *x == 0.0));
        let v = Profile::from_fn(&g.t, |x| (x * x, 2.0 * x, 2.0));
        let hess = hessian_components(&g, &v).unwrap();
        assert!(hess.nn.iter().all(|x| *x == 2.0));
    }

    #[test]
    fn volume_weight_arithmetic() {
        let g = kaehler_grid(9, 1, 1.0);
        let cfg = BundleConfig::koiso_cao();
        let w = volume_weight(&g, &cfg);
        assert_eq!(w[0], 0.0);
        let mut g2 = g.clone();
        g2.f = Profile::constant(9, 1.0);
        g2.l[0] = Profile::constant(9, 2.0);
        assert!(volume_weight(&g2, &cfg).iter().all(|x| (*x - 4.0).abs() < 1e-15));
    }

    #[test]
    fn weighted_laplacian_of_constant_and_symbolic_polynomial() {
        let g = kaehler_grid(33, 1, 1.0);
        let cfg = BundleConfig::koiso_cao();
        let lap = weighted_laplacian(&g, &cfg, &Profile::constant(33, 3.0)).unwrap();
        assert!(lap.iter().all(|x| *x == 0.0));
        // v = (t(π - t))², u = 0: symbolic v'' + (cot t + 2 l'/l) v'
        let v = Profile::from_fn(&g.t, |x| {
            let s = x * (PI - x);
            let ds = PI - 2.0 * x;
            (s * s, 2.0 * s * ds, 2.0 * ds * ds - 4.0 * s)
        });
        let lap = weighted_laplacian(&g, &cfg, &v).unwrap();
        for k in 1..32 {
            let x = g.t[k];
            let s = x * (PI - x);
            let ds = PI - 2.0 * x;
            let l2 = 1.0 - x.cos() + 1.0;
            let slope = x.cos() / x.sin() + 2.0 * (x.sin() / (2.0 * l2));
            let exact = 2.0 * ds * ds - 4.0 * s + slope * 2.0 * s * ds;
            assert!((lap[k] - exact).abs() < 1e-10 * exact.abs().max(1.0), "k={k}");
        }
    }
}
