//! Momentum construction.
//!
//! With `ds = f dt` the Kähler condition makes `L_i = l_i²` affine in `s`,
//! and `u = c s` reduces the soliton system to the linear first-order ODE
//! `(φ Q e^{-cs})' = −2 s Q e^{-cs}` for `φ = f²`, `Q = Π L_i^{d_i/2}`. The
//! collapse conditions at both ends fix `L_i = p_i + q_i s` on `s ∈ [−1, 1]`,
//! leaving the slope `c` as the only unknown: the root of
//! `F(c) = ∫_{-1}^{1} x Q(x) e^{-cx} dx`. Time is recovered from
//! `dt = ds/√φ` through `s = −cos σ`, which removes the endpoint singularity.

use crate::ansatz::{BaseFactor, BundleConfig, CurvatureConstants};
use crate::error::{Error, Result};
use crate::grid::{Profile, ProfileGrid};
use crate::numerics::quadrature::GaussLegendre;
use crate::numerics::roots::brent;

use super::{finish, Method, ResidualReport, SolitonSolution, SolverOptions};

/// Half-width of the slope search box and its scan resolution.
const SLOPE_BOX: f64 = 60.0;
const SLOPE_SCAN: usize = 241;

/// The reduced problem for a fixed slope.
#[derive(Debug, Clone)]
pub struct MomentumReduction {
    factors: Vec<BaseFactor>,
    pub c: f64,
    rule: GaussLegendre,
}

impl MomentumReduction {
    /// Checks that every `L_i` stays positive on `[−1, 1]`.
    pub fn new(config: &BundleConfig, c: f64) -> Result<Self> {
        config.validate()?;
        for (i, fac) in config.factors.iter().enumerate() {
            if fac.p <= fac.twist().abs() {
                return Err(Error::NoSoliton(format!(
                    "factor {}: p = {} must exceed |q| = {} for l² to stay positive",
                    i + 1,
                    fac.p,
                    fac.q
                )));
            }
        }
        Ok(Self {
            factors: config.factors.clone(),
            c,
            rule: GaussLegendre::new(48),
        })
    }

    fn big_l(fac: &BaseFactor, s: f64) -> f64 {
        fac.p + fac.twist() * s
    }

    fn q(&self, s: f64) -> f64 {
        self.factors
            .iter()
            .map(|f| Self::big_l(f, s).powi(f.d as i32 / 2))
            .product()
    }

    /// `Q'/Q`.
    fn log_q_slope(&self, s: f64) -> f64 {
        self.factors
            .iter()
            .map(|f| 0.5 * f.dim() * f.twist() / Self::big_l(f, s))
            .sum()
    }

    /// `(Q'/Q)'`.
    fn log_q_curvature(&self, s: f64) -> f64 {
        self.factors
            .iter()
            .map(|f| -0.5 * f.dim() * f.twist().powi(2) / Self::big_l(f, s).powi(2))
            .sum()
    }

    /// `F(c)`, whose root is the slope.
    pub fn balance(&self) -> f64 {
        self.rule.integrate(-1.0, 1.0, |x| x * self.q(x) * (-self.c * x).exp())
    }

    /// `φ/(1 − s²)`, smooth and equal to 1 at both ends. The integral is
    /// taken over the shorter side of `s` so nothing cancels.
    pub fn g(&self, s: f64) -> f64 {
        self.g_split(s, 1.0 - s, 1.0 + s)
    }

    /// `g` with `1 − s` and `1 + s` supplied separately, so callers holding an
    /// angle can pass them without cancellation.
    fn g_split(&self, s: f64, below: f64, above: f64) -> f64 {
        let c = self.c;
        let qs = self.q(s);
        let h = |x: f64| x * self.q(x) / qs * (c * (s - x)).exp();
        if s >= 0.0 {
            let i = self.rule.integrate(0.0, 1.0, |y| h(1.0 - below * (1.0 - y)));
            2.0 * i / above
        } else {
            let i = self.rule.integrate(0.0, 1.0, |y| h(-1.0 + above * y));
            -2.0 * i / below
        }
    }

    /// `(φ, φ', φ'')` with primes in `s`.
    pub fn phi_jet(&self, s: f64) -> (f64, f64, f64) {
        self.jet_split(s, 1.0 - s, 1.0 + s)
    }

    /// `phi_jet` at `s = −cos σ`, accurate near the collapse ends.
    pub fn phi_jet_at_angle(&self, sigma: f64) -> (f64, f64, f64) {
        let (sh, ch) = (0.5 * sigma).sin_cos();
        self.jet_split(-sigma.cos(), 2.0 * ch * ch, 2.0 * sh * sh)
    }

    fn jet_split(&self, s: f64, below: f64, above: f64) -> (f64, f64, f64) {
        let phi = self.g_split(s, below, above) * below * above;
        let drift = self.log_q_slope(s) - self.c;
        let d1 = -2.0 * s - phi * drift;
        let d2 = -2.0 - d1 * drift - phi * self.log_q_curvature(s);
        (phi, d1, d2)
    }

    fn dt_dsigma(&self, sigma: f64) -> f64 {
        let (sh, ch) = (0.5 * sigma).sin_cos();
        1.0 / self.g_split(-sigma.cos(), 2.0 * ch * ch, 2.0 * sh * sh).sqrt()
    }

    /// Total length `T = ∫_{-1}^{1} ds/√φ`.
    pub fn length(&self) -> f64 {
        self.rule
            .integrate_composite(0.0, std::f64::consts::PI, 16, |x| self.dt_dsigma(x))
    }

    /// Angles `σ_k` with `t(σ_k) = targets[k]`; targets increasing from 0 to
    /// `T`. Each half is marched inward from its own end so that the
    /// accumulated error is smallest where `f` is small.
    fn angles(&self, targets: &[f64]) -> Result<Vec<f64>> {
        let pi = std::f64::consts::PI;
        let length = targets[targets.len() - 1];
        let half = 0.5 * length;
        let split = targets.partition_point(|&t| t <= half);
        let mut out = self.march(&targets[..split], 0.0, 1.0)?;
        let right: Vec<f64> = targets[split..].iter().rev().map(|t| length - t).collect();
        let mut back = self.march(&right, pi, -1.0)?;
        back.reverse();
        out.extend(back);
        Ok(out)
    }

    /// Newton inversion of `t(σ)` along one direction from an end angle;
    /// `targets` are distances from that end, increasing.
    fn march(&self, targets: &[f64], start: f64, dir: f64) -> Result<Vec<f64>> {
        let step = GaussLegendre::new(20);
        let speed = |x: f64| self.dt_dsigma(x);
        let mut out = Vec::with_capacity(targets.len());
        let (mut sig0, mut t0) = (start, 0.0);
        for (k, &target) in targets.iter().enumerate() {
            if target == 0.0 {
                out.push(start);
                continue;
            }
            let mut sig = sig0 + dir * (target - t0) / speed(sig0);
            let mut converged = false;
            for _ in 0..50 {
                let t = t0 + dir * step.integrate(sig0, sig, speed);
                let delta = (t - target) / speed(sig);
                sig -= dir * delta;
                if delta.abs() < 1e-15 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Integration(format!("time inversion failed at node {k}")));
            }
            out.push(sig);
            sig0 = sig;
            t0 = target;
        }
        Ok(out)
    }
}

/// Scans the slope box for sign changes of `F` and refines each by Brent.
fn slope_roots(config: &BundleConfig) -> Result<Vec<f64>> {
    let eval = |c: f64| MomentumReduction::new(config, c).map(|m| m.balance());
    let grid: Vec<f64> = (0..SLOPE_SCAN)
        .map(|k| -SLOPE_BOX + 2.0 * SLOPE_BOX * k as f64 / (SLOPE_SCAN - 1) as f64)
        .collect();
    let values = grid.iter().map(|&c| eval(c)).collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for k in 0..SLOPE_SCAN - 1 {
        let (a, b) = (values[k], values[k + 1]);
        if a == 0.0 {
            roots.push(grid[k]);
        } else if a * b < 0.0 {
            let f = |c: f64| eval(c).unwrap_or(f64::NAN);
            let r = brent(f, grid[k], grid[k + 1], 1e-15, 200)
                .ok_or_else(|| Error::NoSoliton(format!("Brent failed in [{}, {}]", grid[k], grid[k + 1])))?;
            roots.push(r);
        }
    }
    if roots.is_empty() {
        return Err(Error::NoSoliton(format!(
            "no slope root in [{}, {}]; F changes sign nowhere (F(-box) = {:e}, F(box) = {:e})",
            -SLOPE_BOX,
            SLOPE_BOX,
            values[0],
            values[SLOPE_SCAN - 1]
        )));
    }
    Ok(roots)
}

/// Builds the profiles of the reduction on the requested grid.
fn assemble(red: &MomentumReduction, config: &BundleConfig, options: &SolverOptions) -> Result<ProfileGrid> {
    let length = red.length();
    let t = options.scheme.nodes(options.nodes, length);
    let sigma = red.angles(&t)?;
    let n = t.len();
    let r = config.factor_count();
    let mut f = Profile::constant(n, 0.0);
    let mut u = Profile::constant(n, 0.0);
    let mut l = vec![Profile::constant(n, 0.0); r];
    let c = red.c;
    for k in 0..n {
        let s = -sigma[k].cos();
        let (phi, dphi, ddphi) = if k == 0 || k == n - 1 {
            let s = if k == 0 { -1.0 } else { 1.0 };
            let (_, d1, d2) = red.phi_jet(s);
            (0.0, d1, d2)
        } else {
            red.phi_jet_at_angle(sigma[k])
        };
        let s = if k == 0 {
            -1.0
        } else if k == n - 1 {
            1.0
        } else {
            s
        };
        let fv = phi.max(0.0).sqrt();
        f.value[k] = fv;
        f.d1[k] = 0.5 * dphi;
        f.d2[k] = 0.5 * ddphi * fv;
        u.value[k] = c * s;
        u.d1[k] = c * fv;
        u.d2[k] = 0.5 * c * dphi;
        for (fac, li) in config.factors.iter().zip(l.iter_mut()) {
            let q = fac.twist();
            let lv = MomentumReduction::big_l(fac, s).sqrt();
            li.value[k] = lv;
            li.d1[k] = q * fv / (2.0 * lv);
            li.d2[k] = q * dphi / (4.0 * lv) - q * q * phi / (4.0 * lv.powi(3));
        }
    }
    ProfileGrid::new(options.scheme, t, f, l, u)
}

/// Solves by the momentum construction; `u` is affine in `s` by assumption.
pub fn solve_momentum(
    config: &BundleConfig,
    constants: &CurvatureConstants,
    options: &SolverOptions,
) -> Result<SolitonSolution> {
    constants.validated()?;
    MomentumReduction::new(config, 0.0)?;
    let roots = slope_roots(config)?;
    let c = roots[0];
    let red = MomentumReduction::new(config, c)?;
    let grid = assemble(&red, config, options)?;
    finish(SolitonSolution {
        grid,
        config: config.clone(),
        constants: constants.clone(),
        c_slope: c,
        gauge_shift: 0.0,
        residuals: ResidualReport::default(),
        method: Method::Momentum,
        roots,
    })
}
