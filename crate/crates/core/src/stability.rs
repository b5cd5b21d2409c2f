//! Second-variation diagnostics on a solved soliton.
//!
//! The perturbations are the ansatz deformations `h_i = l_i² π*h_{i,t}`: the
//! two factors of `l_i²` cancel against the metric, so `‖h‖²(t) = Σ ψ_i(t)`.
//! Such `h` has no normal or vertical components and is trace-free and
//! divergence-free on each base, which makes `div_f h = 0` for every profile
//! `ψ_i(t)`. The `v_h` source therefore vanishes identically on this family;
//! the solver is still exercised on arbitrary sources.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{ricci_components, weighted_laplacian, weighted_measure, BundleConfig, RicciProfiles};
use crate::error::{Error, Result};
use crate::grid::{Profile, ProfileGrid};
use crate::numerics::chebyshev;
use crate::solver::{identity_suite, SolitonSolution};

/// How volume constants enter reported integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GaugeMode {
    /// Orbit volume set to 1; only ratios are meaningful.
    #[default]
    Ratio,
    /// Uses the supplied orbit volume.
    Absolute,
}

/// Gauge data of the potential and volume normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyGauge {
    /// Additive constant removed from `u` by normalization.
    pub shift: f64,
    pub tau: f64,
    pub v0: Option<f64>,
    pub mode: GaugeMode,
}

impl Default for EntropyGauge {
    fn default() -> Self {
        Self::ratio(0.0)
    }
}

impl EntropyGauge {
    pub fn ratio(shift: f64) -> Self {
        Self {
            shift,
            tau: 0.5,
            v0: None,
            mode: GaugeMode::Ratio,
        }
    }

    pub fn absolute(shift: f64, v0: f64) -> Result<Self> {
        let g = Self {
            shift,
            tau: 0.5,
            v0: Some(v0),
            mode: GaugeMode::Absolute,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == GaugeMode::Absolute && !self.v0.is_some_and(|v| v > 0.0) {
            return Err(Error::Config("absolute gauge needs a positive orbit volume".into()));
        }
        Ok(())
    }
}

/// Pointwise squared norm of one factor's deformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorNorm {
    /// `‖h_{i,t}‖²` independent of `t`.
    Constant(f64),
    /// A sampled profile with derivatives on the solution grid.
    Sampled(Profile),
}

/// Per-factor norm profiles of a complex-structure perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationProfile {
    pub factors: Vec<FactorNorm>,
    /// Only constant profiles are known to be essential deformations.
    pub essential: bool,
}

impl PerturbationProfile {
    pub fn constant(kappa: Vec<f64>) -> Result<Self> {
        let p = Self {
            factors: kappa.into_iter().map(FactorNorm::Constant).collect(),
            essential: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// The deformation norms recorded in the configuration.
    pub fn from_config(config: &BundleConfig) -> Self {
        Self {
            factors: config.factors.iter().map(|f| FactorNorm::Constant(f.kappa)).collect(),
            essential: true,
        }
    }

    /// A synthetic profile; never essential.
    pub fn sampled(profiles: Vec<Profile>) -> Result<Self> {
        let p = Self {
            factors: profiles.into_iter().map(FactorNorm::Sampled).collect(),
            essential: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// A single sampled profile on the first factor, zero elsewhere.
    pub fn single(psi: Profile, factor_count: usize) -> Result<Self> {
        let n = psi.len();
        let mut all = vec![psi];
        all.extend((1..factor_count).map(|_| Profile::constant(n, 0.0)));
        Self::sampled(all)
    }

    pub fn validate(&self) -> Result<()> {
        let mut sampled = false;
        for (i, f) in self.factors.iter().enumerate() {
            match f {
                FactorNorm::Constant(k) if !(*k >= 0.0) => {
                    return Err(Error::Profile(format!("factor {}: norm {k} is negative", i + 1)));
                }
                FactorNorm::Sampled(p) => {
                    sampled = true;
                    if p.value.iter().any(|v| !(*v >= 0.0)) {
                        return Err(Error::Profile(format!("factor {}: sampled norm is negative", i + 1)));
                    }
                }
                _ => {}
            }
        }
        if sampled && self.essential {
            return Err(Error::Profile("sampled profiles cannot be marked essential".into()));
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.factors.iter().all(|f| matches!(f, FactorNorm::Constant(_)))
    }

    /// `Σ ψ_i` with derivatives on `n` nodes.
    pub fn total(&self, n: usize) -> Result<Profile> {
        let mut out = Profile::constant(n, 0.0);
        for f in &self.factors {
            match f {
                FactorNorm::Constant(k) => out.value.iter_mut().for_each(|v| *v += k),
                FactorNorm::Sampled(p) => {
                    if p.value.len() != n {
                        return Err(Error::Profile("sampled profile does not match the grid".into()));
                    }
                    if p.d1.len() != n {
                        return Err(Error::Profile("sampled profile carries no derivative".into()));
                    }
                    for k in 0..n {
                        out.value[k] += p.value[k];
                        out.d1[k] += p.d1[k];
                        out.d2[k] += p.d2.get(k).copied().unwrap_or(0.0);
                    }
                }
            }
        }
        Ok(out)
    }

    fn check_factors(&self, config: &BundleConfig) -> Result<()> {
        if self.factors.len() != config.factor_count() {
            return Err(Error::FactorMismatch {
                grid: self.factors.len(),
                config: config.factor_count(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    /// Classifies `value` against the band `[−band, band]`.
    pub fn classify(value: f64, band: f64) -> Self {
        if value.abs() <= band {
            Self::Zero
        } else if value > 0.0 {
            Self::Positive
        } else {
            Self::Negative
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Negative => "negative",
            Self::Zero => "zero",
            Self::Positive => "positive",
        }
    }
}

/// Relative width of the zero band.
pub const ZERO_BAND: f64 = 1e-8;
/// Allowed `|∫ u e^{-u} dV| / ∫ e^{-u} dV` for a normalized solution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// Value of the second-variation functional and its side terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub value: f64,
    pub prefactor: f64,
    /// `|prefactor| ∫ ‖h‖² e^{-u} dV`; the zero band is `ZERO_BAND · scale`.
    pub scale: f64,
    #[serde(rename = "C_hg")]
    pub c_hg: f64,
    /// Sup-norm of `div_f h`, which vanishes for the ansatz family.
    pub div_f_norm: f64,
    pub v_h_norm: f64,
    pub sign: Sign,
    pub essential: bool,
    pub gauge: GaugeMode,
}

impl StabilityReport {
    /// Value in units of the scale (0 when the scale is 0).
    pub fn normalized(&self) -> f64 {
        if self.scale > 0.0 {
            self.value / self.scale
        } else {
            0.0
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_normalized(sol: &SolitonSolution) -> Result<()> {
    let m = weighted_measure(&sol.grid, &sol.config);
    let rel = dot(&m, &sol.grid.u.value).abs() / m.iter().sum::<f64>();
    if rel > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized(rel));
    }
    Ok(())
}

/// `div_f h` for an ansatz perturbation, reduced to the interval.
///
/// `h` is horizontal, trace-free on every base block and pairs to zero with
/// the horizontal part of `∇U` (a multiple of `J`), so every term of the
/// divergence vanishes.
pub fn divergence_source(sol: &SolitonSolution, pert: &PerturbationProfile) -> Result<Vec<f64>> {
    pert.check_factors(&sol.config)?;
    pert.validate()?;
    Ok(vec![0.0; sol.grid.len()])
}

/// `prefactor · ∫ u ‖h‖² e^{-u} dV` with unit orbit volume.
pub fn second_variation_main(
    sol: &SolitonSolution,
    pert: &PerturbationProfile,
    prefactor: f64,
) -> Result<StabilityReport> {
    check_normalized(sol)?;
    pert.check_factors(&sol.config)?;
    pert.validate()?;
    let psi = pert.total(sol.grid.len())?;
    let m = weighted_measure(&sol.grid, &sol.config);
    let integrand: Vec<f64> = sol.grid.u.value.iter().zip(&psi.value).map(|(u, p)| u * p).collect();
    let value = prefactor * dot(&m, &integrand);
    let scale = prefactor.abs() * dot(&m, &psi.value);
    let source = divergence_source(sol, pert)?;
    let div_f_norm = source.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let v_h = v_h_solve(sol, &source, &VhOptions::default())?;
    Ok(StabilityReport {
        value,
        prefactor,
        scale,
        c_hg: c_constant(sol, &TensorKind::AntiInvariant)?,
        div_f_norm,
        v_h_norm: v_h.norm,
        sign: Sign::classify(value, ZERO_BAND * scale),
        essential: pert.essential,
        gauge: GaugeMode::Ratio,
    })
}

/// `|∫ Δ_u u (Σκ_i) e^{-u} dV|`, the last line of the vanishing argument,
/// evaluated independently of [`second_variation_main`].
pub fn dw_theorem_check(sol: &SolitonSolution, pert: &PerturbationProfile) -> Result<f64> {
    pert.check_factors(&sol.config)?;
    let mut kappa = 0.0;
    for f in &pert.factors {
        match f {
            FactorNorm::Constant(k) => kappa += k,
            FactorNorm::Sampled(_) => {
                return Err(Error::Profile(
                    "the factorization needs t-independent norms; got a sampled profile".into(),
                ))
            }
        }
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let lap = weighted_laplacian(&sol.grid, &sol.config, &sol.grid.u)?;
    let m = weighted_measure(&sol.grid, &sol.config);
    Ok((kappa * dot(&m, &lap)).abs())
}

/// Diagonal J-invariant symmetric tensor in the unit frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalTensor {
    pub nn: Vec<f64>,
    pub uu: Vec<f64>,
    pub h: Vec<Vec<f64>>,
}

impl DiagonalTensor {
    pub fn ricci(ric: &RicciProfiles) -> Self {
        Self {
            nn: ric.r_nn.clone(),
            uu: ric.r_uu.clone(),
            h: ric.r_i.clone(),
        }
    }
}

/// Direction `h` for the constant `C(h, g)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorKind {
    AntiInvariant,
    MetricDirection,
    Diagonal(DiagonalTensor),
}

/// `C(h, g) = ∫ ⟨Ric, h⟩ e^{-u} dV / ∫ R e^{-u} dV`.
///
/// For anti-invariant `h` the pointwise pairing with the diagonal Ricci
/// tensor reduces to `(R_NN − R_UU)·h(N, N)`, plus per-factor terms that
/// vanish because `h` is trace-free on each J-invariant block. The check
/// therefore amounts to J-invariance of `Ric`, which is verified before 0
/// is returned.
pub fn c_constant(sol: &SolitonSolution, kind: &TensorKind) -> Result<f64> {
    let ric = ricci_components(&sol.grid, &sol.config, &sol.constants)?;
    let m = weighted_measure(&sol.grid, &sol.config);
    let denom = dot(&m, &ric.r);
    if !(denom.abs() > 1e-300) {
        return Err(Error::Division("∫ R e^{-u} dV vanishes".into()));
    }
    let n = sol.grid.len();
    match kind {
        TensorKind::AntiInvariant => {
            let scale = ric.r.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            let defect = (0..n).fold(0.0_f64, |a, k| a.max((ric.r_nn[k] - ric.r_uu[k]).abs()));
            if defect > 1e-6 * scale {
                return Err(Error::Identity(format!(
                    "Ricci is not J-invariant (|R_NN − R_UU| = {defect:e}); anti-invariant pairing is nonzero"
                )));
            }
            Ok(0.0)
        }
        TensorKind::MetricDirection => {
            // ⟨Ric, g⟩ assembled component-wise, independently of `ric.r`
            let num: Vec<f64> = (0..n)
                .map(|k| {
                    ric.r_nn[k]
                        + ric.r_uu[k]
                        + sol
                            .config
                            .factors
                            .iter()
                            .zip(&ric.r_i)
                            .map(|(f, r)| f.dim() * r[k])
                            .sum::<f64>()
                })
                .collect();
            Ok(dot(&m, &num) / denom)
        }
        TensorKind::Diagonal(h) => {
            if h.nn.len() != n || h.uu.len() != n || h.h.len() != sol.config.factor_count() {
                return Err(Error::Grid("tensor profile does not match the solution".into()));
            }
            let scale = h.nn.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            if (0..n).any(|k| (h.nn[k] - h.uu[k]).abs() > 1e-6 * scale) {
                return Err(Error::Config("h(N, N) must equal h(U, U) for a J-invariant tensor".into()));
            }
            let num: Vec<f64> = (0..n)
                .map(|k| {
                    ric.r_nn[k] * h.nn[k]
                        + ric.r_uu[k] * h.uu[k]
                        + sol
                            .config
                            .factors
                            .iter()
                            .zip(ric.r_i.iter().zip(&h.h))
                            .map(|(f, (r, hh))| f.dim() * r[k] * hh[k])
                            .sum::<f64>()
                })
                .collect();
            Ok(dot(&m, &num) / denom)
        }
    }
}

/// Collocation controls for `Δ_u v + λ v = s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VhOptions {
    /// Chebyshev nodes of the collocation grid.
    pub nodes: usize,
    /// `λ = 1/(2τ)`.
    pub shift: f64,
    /// Smallest singular value below which the operator is flagged.
    pub near_kernel: f64,
}

impl Default for VhOptions {
    fn default() -> Self {
        Self {
            nodes: 64,
            shift: 1.0,
            near_kernel: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VhSolution {
    pub v: Profile,
    /// Sup-norm plug-back residual on the solution grid.
    pub residual: f64,
    pub min_singular: f64,
    /// Operator flagged near-singular; `v` is then a least-squares solution.
    pub near_kernel: bool,
    pub norm: f64,
}

/// Solves `Δ_u v + λ v = s` with `v'(0) = v'(T) = 0` by Chebyshev
/// collocation on a coarse grid, then evaluates the residual on the
/// solution grid. The coarse grid keeps the differentiation matrices well
/// conditioned; the coefficients are smooth, so little is lost.
pub fn v_h_solve(sol: &SolitonSolution, source: &[f64], options: &VhOptions) -> Result<VhSolution> {
    let grid = &sol.grid;
    let config = &sol.config;
    if source.len() != grid.len() {
        return Err(Error::Grid("source length does not match the grid".into()));
    }
    let m = options.nodes.clamp(8, grid.len().max(8));
    let len = grid.length();
    let tc = chebyshev::lobatto_nodes(m, len);
    let d = chebyshev::differentiation_matrix(&tc);
    let d2 = &d * &d;
    let mut op = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    let fine = |values: &[f64], t: f64| grid.interpolate(values, t);
    for (k, &t) in tc.iter().enumerate() {
        if k == 0 || k == m - 1 {
            op.row_mut(k).copy_from(&d.row(k));
            continue;
        }
        let f = fine(&grid.f.value, t);
        let df = fine(&grid.f.d1, t);
        let mut drift = df / f - fine(&grid.u.d1, t);
        for (fac, l) in config.factors.iter().zip(&grid.l) {
            drift += fac.dim() * fine(&l.d1, t) / fine(&l.value, t);
        }
        for j in 0..m {
            op[(k, j)] = d2[(k, j)] + drift * d[(k, j)];
        }
        op[(k, k)] += options.shift;
        rhs[k] = fine(source, t);
    }
    let svd = op.clone().svd(true, true);
    let min_singular = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let near_kernel = min_singular < options.near_kernel;
    let vc = if near_kernel {
        svd.solve(&rhs, options.near_kernel)
            .map_err(|e| Error::Integration(format!("least-squares solve failed: {e}")))?
    } else {
        op.lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Integration("collocation matrix is singular".into()))?
    };
    let dv = &d * &vc;
    let ddv = &d2 * &vc;
    let bw = chebyshev::barycentric_weights(m);
    let coarse = |c: &DVector<f64>, t: f64| chebyshev::interpolate(&tc, &bw, c.as_slice(), t);
    // v' vanishes at both ends, so v'/(t − end) is a polynomial; interpolating
    // that quotient keeps v' relatively accurate where f'/f blows up
    let quotient = |end: usize| {
        DVector::from_iterator(
            m,
            (0..m).map(|j| if j == end { ddv[j] } else { dv[j] / (tc[j] - tc[end]) }),
        )
    };
    let (ql, qr) = (quotient(0), quotient(m - 1));
    let slope = |t: f64| {
        if t <= 0.5 * len {
            coarse(&ql, t) * t
        } else {
            coarse(&qr, t) * (t - len)
        }
    };
    let v = Profile::from_fn(&grid.t, |t| (coarse(&vc, t), slope(t), coarse(&ddv, t)));
    let lap = weighted_laplacian(grid, config, &v)?;
    let residual = (0..grid.len()).fold(0.0_f64, |a, k| {
        a.max((lap[k] + options.shift * v.value[k] - source[k]).abs())
    });
    let norm = v.value.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    Ok(VhSolution {
        v,
        residual,
        min_singular,
        near_kernel,
        norm,
    })
}

/// Both sides of `−⟨∇_{∇u}h, h⟩_f = ½ ∫ Δ_u u ‖h‖² e^{-u} dV` for the ansatz,
/// where `⟨∇_{∇u}h, h⟩ = ½ u' ψ'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|`.
    pub residual: f64,
    /// `|∫ Δ_u u ψ e^{-u} dV + ∫ u' ψ' e^{-u} dV|` (product rule plus divergence).
    pub product_residual: f64,
    /// `sup ψ · ∫ e^{-u} dV`, the natural size of either side.
    pub scale: f64,
}

pub fn ibp_identity_check(sol: &SolitonSolution, pert: &PerturbationProfile) -> Result<IbpCheck> {
    pert.check_factors(&sol.config)?;
    pert.validate()?;
    let psi = pert.total(sol.grid.len())?;
    let m = weighted_measure(&sol.grid, &sol.config);
    let lap = weighted_laplacian(&sol.grid, &sol.config, &sol.grid.u)?;
    let du_dpsi: Vec<f64> = sol.grid.u.d1.iter().zip(&psi.d1).map(|(a, b)| a * b).collect();
    let lap_psi: Vec<f64> = lap.iter().zip(&psi.value).map(|(a, b)| a * b).collect();
    let lhs = -0.5 * dot(&m, &du_dpsi);
    let rhs = 0.5 * dot(&m, &lap_psi);
    let peak = psi.value.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(IbpCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        product_residual: (dot(&m, &lap_psi) + dot(&m, &du_dpsi)).abs(),
        scale: peak * m.iter().sum::<f64>(),
    })
}

/// `max(±u, 0)` and `|u|` as sampled profiles (derivatives one-sided at zeros of `u`).
pub fn potential_part(grid: &ProfileGrid, sign: f64) -> Profile {
    let u = &grid.u;
    let mut p = Profile::constant(grid.len(), 0.0);
    for k in 0..grid.len() {
        let v = sign * u.value[k];
        if v > 0.0 {
            p.value[k] = v;
            p.d1[k] = sign * u.d1[k];
            p.d2[k] = sign * u.d2[k];
        }
    }
    p
}

pub fn potential_abs(grid: &ProfileGrid) -> Profile {
    let a = potential_part(grid, 1.0);
    let b = potential_part(grid, -1.0);
    Profile {
        value: a.value.iter().zip(&b.value).map(|(x, y)| x + y).collect(),
        d1: a.d1.iter().zip(&b.d1).map(|(x, y)| x + y).collect(),
        d2: a.d2.iter().zip(&b.d2).map(|(x, y)| x + y).collect(),
    }
}

/// The shipped family: the configured constant norms (1 per factor when all
/// are zero), `u⁺`, `u⁻` and `|u|`.
pub fn default_family(sol: &SolitonSolution) -> Result<Vec<(String, PerturbationProfile)>> {
    let r = sol.config.factor_count();
    let mut constant = PerturbationProfile::from_config(&sol.config);
    if constant
        .factors
        .iter()
        .all(|f| matches!(f, FactorNorm::Constant(k) if *k == 0.0))
    {
        constant = PerturbationProfile::constant(vec![1.0; r])?;
    }
    Ok(vec![
        ("constant".into(), constant),
        ("u_plus".into(), PerturbationProfile::single(potential_part(&sol.grid, 1.0), r)?),
        ("u_minus".into(), PerturbationProfile::single(potential_part(&sol.grid, -1.0), r)?),
        ("abs_u".into(), PerturbationProfile::single(potential_abs(&sol.grid), r)?),
    ])
}

/// Evaluates the functional over a labelled family.
pub fn sign_explorer(
    sol: &SolitonSolution,
    family: &[(String, PerturbationProfile)],
    prefactor: f64,
) -> Result<Vec<(String, StabilityReport)>> {
    family
        .iter()
        .map(|(id, p)| Ok((id.clone(), second_variation_main(sol, p, prefactor)?)))
        .collect()
}

/// Random nonnegative profile with zero slope at both ends:
/// `ψ = c_0 + Σ_k a_k cos(kπt/T)` with `c_0` large enough to keep it positive.
pub fn random_even_profile<R: Rng>(grid: &ProfileGrid, rng: &mut R, modes: usize) -> Profile {
    let len = grid.length();
    let amps: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let base = 0.1 + amps.iter().map(|a| a.abs()).sum::<f64>();
    Profile::from_fn(&grid.t, |t| {
        let mut v = base;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (k, a) in amps.iter().enumerate() {
            let w = (k + 1) as f64 * std::f64::consts::PI / len;
            v += a * (w * t).cos();
            d1 -= a * w * (w * t).sin();
            d2 -= a * w * w * (w * t).cos();
        }
        (v, d1, d2)
    })
}

/// Entropy estimate; `ratio_gauge` marks the value as known only up to the
/// log-volume constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuEstimate {
    pub value: f64,
    pub ratio_gauge: bool,
}

/// Allowed deviation of the Hamilton-type quantity from a constant.
pub const CONSTANCY_TOLERANCE: f64 = 1e-6;

/// Ratio mode returns `τ(2Δu − |∇u|² + R) + u − n`. Absolute mode shifts
/// `u` so that `∫ e^{-u}(4πτ)^{-n/2} dV = 1` and integrates the entropy
/// density directly.
pub fn nu_estimate(sol: &SolitonSolution, gauge: &EntropyGauge) -> Result<NuEstimate> {
    gauge.validate()?;
    let report = identity_suite(sol)?;
    if report.hamilton_constancy > CONSTANCY_TOLERANCE {
        return Err(Error::Identity(format!(
            "Hamilton-type quantity varies by {:e}; refusing to report an entropy",
            report.hamilton_constancy
        )));
    }
    let n = sol.config.n() as f64;
    match (gauge.mode, gauge.v0) {
        (GaugeMode::Absolute, Some(v0)) => {
            let tau = gauge.tau;
            let grid = &sol.grid;
            let m = weighted_measure(grid, &sol.config);
            let mass = m.iter().sum::<f64>();
            let norm = (4.0 * std::f64::consts::PI * tau).powf(-0.5 * n);
            let a = (v0 * mass * norm).ln();
            let ric = ricci_components(grid, &sol.config, &sol.constants)?;
            let density: Vec<f64> = (0..grid.len())
                .map(|k| (ric.r[k] + grid.u.d1[k].powi(2)) * tau + grid.u.value[k] + a - n)
                .collect();
            Ok(NuEstimate {
                value: dot(&m, &density) * (-a).exp() * v0 * norm,
                ratio_gauge: false,
            })
        }
        _ => Ok(NuEstimate {
            value: report.hamilton_constant - n,
            ratio_gauge: true,
        }),
    }
}
