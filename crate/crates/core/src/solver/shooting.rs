//! Two-sided shooting on the full second-order system.
//!
//! Both ends are regular singular points (`f = 0`). Each end is left along a
//! Taylor series whose only free datum is `u''` there; the Kähler condition
//! at the end, together with the horizontal equation, fixes `l_i²` there to
//! `p_i ∓ q_i`. The system is invariant under `t → T − t`, so the right half
//! is integrated in `τ = T − t` with the twist sign flipped. Unknowns
//! `(u''(0), u_ττ(T), T)` are fitted by Levenberg–Marquardt to continuity of
//! `(f, f', l_i, l_i', u')` at `T/2`; the system is overdetermined because
//! the Kähler relation is carried along by the flow.

use crate::ansatz::{ricci_at_point, BaseFactor, BundleConfig, CurvatureConstants, Jet};
use crate::error::{Error, Result};
use crate::grid::{Profile, ProfileGrid};
use crate::numerics::ode::{integrate, OdeTolerances};

use super::{finish, Method, ResidualReport, SolitonSolution, SolverOptions};

/// Convergence record of the matching iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingDiagnostics {
    pub iterations: usize,
    pub mismatch: f64,
    /// `(u''(0), u_ττ(T), T)`.
    pub unknowns: [f64; 3],
    pub kaehler_drift: f64,
}

/// Taylor data at one collapse end, in the local coordinate pointing inward.
#[derive(Debug, Clone)]
struct Launch {
    f3: f64,
    f5: f64,
    u2: f64,
    u4: f64,
    /// Per factor `(l(0), l''(0)/2, l''''(0)/24)`.
    l: Vec<(f64, f64, f64)>,
}

impl Launch {
    /// `sign = +1` at `t = 0`, `−1` at `t = T`.
    fn new(factors: &[BaseFactor], a_coef: f64, b_coef: f64, ddu: f64, sign: f64) -> Result<Self> {
        let u2 = 0.5 * ddu;
        let mut a = Vec::with_capacity(factors.len());
        for fac in factors {
            let a2 = fac.p - sign * fac.twist();
            if a2 <= 0.0 {
                return Err(Error::NoSoliton(format!(
                    "collapse end needs l² = p − q = {a2} > 0 for factor {fac}"
                )));
            }
            a.push(a2.sqrt());
        }
        let beta: Vec<f64> = factors
            .iter()
            .zip(&a)
            .map(|(fac, ai)| (fac.p / (ai * ai) - 1.0) / 4.0)
            .collect();
        let dsum = |g: &dyn Fn(usize) -> f64| -> f64 { factors.iter().enumerate().map(|(j, f)| f.dim() * g(j)).sum() };
        let p_sum = dsum(&|j| beta[j]);
        let p2 = dsum(&|j| beta[j] * beta[j]);
        let s2 = dsum(&|j| factors[j].twist().powi(2) / a[j].powi(4));
        let f3 = (2.0 * u2 - 2.0 * p_sum - 1.0) / 6.0;
        let eps: Vec<f64> = factors
            .iter()
            .enumerate()
            .map(|(i, fac)| {
                let (b, ai) = (beta[i], a[i]);
                (8.0 * b * b - 4.0 * b * f3 - 4.0 * b * p_sum - 2.0 * fac.p * b / (ai * ai)
                    - b_coef * fac.twist().powi(2) / ai.powi(4)
                    + 4.0 * u2 * b)
                    / 16.0
            })
            .collect();
        let e_sum = dsum(&|j| eps[j]);
        let u4 = (8.0 * e_sum - 6.0 * f3 * p_sum + a_coef * s2 + 6.0 * u2 * f3 - f3 - 6.0 * f3 * f3) / 8.0;
        let f5 = (-(4.0 * e_sum - 2.0 * p2 + 6.0 * f3 * p_sum) + a_coef * s2 + 4.0 * u4 + 6.0 * u2 * f3 - f3) / 20.0;
        let l = (0..factors.len())
            .map(|i| (a[i], beta[i] * a[i], eps[i] * a[i]))
            .collect();
        Ok(Self { f3, f5, u2, u4, l })
    }

    /// Value, first and second derivative of every unknown at local time `s`,
    /// packed as `(state, second derivatives)`.
    fn eval(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let r = self.l.len();
        let mut y = vec![0.0; 4 + 2 * r];
        let mut dd = vec![0.0; 2 + r];
        let s2 = s * s;
        y[0] = s + self.f3 * s * s2 + self.f5 * s * s2 * s2;
        y[1] = 1.0 + 3.0 * self.f3 * s2 + 5.0 * self.f5 * s2 * s2;
        dd[0] = 6.0 * self.f3 * s + 20.0 * self.f5 * s * s2;
        y[2] = self.u2 * s2 + self.u4 * s2 * s2;
        y[3] = 2.0 * self.u2 * s + 4.0 * self.u4 * s * s2;
        dd[1] = 2.0 * self.u2 + 12.0 * self.u4 * s2;
        for (i, &(a, b, e)) in self.l.iter().enumerate() {
            y[4 + i] = a + b * s2 + e * s2 * s2;
            y[4 + r + i] = 2.0 * b * s + 4.0 * e * s * s2;
            dd[2 + i] = 2.0 * b + 12.0 * e * s2;
        }
        (y, dd)
    }
}

/// State layout: `[f, f', u, u', l_1..l_r, l_1'..l_r']`.
struct System<'a> {
    factors: &'a [BaseFactor],
    a: f64,
    b: f64,
}

impl System<'_> {
    /// Second derivatives `(f'', u'', l_i'')` solved from the three equations.
    fn second(&self, y: &[f64], dd: &mut [f64]) {
        let r = self.factors.len();
        let (f, df, du) = (y[0], y[1], y[3]);
        let ls: Vec<Jet> = (0..r).map(|i| Jet::new(y[4 + i], y[4 + r + i], 0.0)).collect();
        let p0 = ricci_at_point(self.factors, self.a, self.b, Jet::new(f, df, 0.0), &ls);
        let ddf = f * (p0.uu - 1.0) + du * df;
        let mut ddu = 1.0 - p0.nn + ddf / f;
        for (i, fac) in self.factors.iter().enumerate() {
            let (l, dl) = (y[4 + i], y[4 + r + i]);
            let ddl = l * (p0.h[i] - 1.0) + du * dl;
            dd[2 + i] = ddl;
            ddu += fac.dim() * ddl / l;
        }
        dd[0] = ddf;
        dd[1] = ddu;
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let r = self.factors.len();
        let mut dd = vec![0.0; 2 + r];
        self.second(y, &mut dd);
        dy[0] = y[1];
        dy[1] = dd[0];
        dy[2] = y[3];
        dy[3] = dd[1];
        for i in 0..r {
            dy[4 + i] = y[4 + r + i];
            dy[4 + r + i] = dd[2 + i];
        }
    }

    /// `sup |(l²)' − sign·q f|` over states of one half.
    fn kaehler_drift(&self, states: &[Vec<f64>], sign: f64) -> f64 {
        let r = self.factors.len();
        states
            .iter()
            .flat_map(|y| {
                self.factors
                    .iter()
                    .enumerate()
                    .map(move |(i, fac)| (2.0 * y[4 + i] * y[4 + r + i] - sign * fac.twist() * y[0]).abs())
            })
            .fold(0.0, f64::max)
    }
}

struct Shooter<'a> {
    system: System<'a>,
    eps: f64,
    tol: OdeTolerances,
}

impl Shooter<'_> {
    fn launch(&self, ddu: f64, sign: f64) -> Result<Launch> {
        Launch::new(self.system.factors, self.system.a, self.system.b, ddu, sign)
    }

    /// States of one half at the local times `outputs` (all `≥ eps`).
    fn half(&self, ddu: f64, sign: f64, outputs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (y0, _) = self.launch(ddu, sign)?.eval(self.eps);
        let states = integrate(|_, y, dy| self.system.rhs(y, dy), self.eps, &y0, outputs, self.tol)?;
        if states.iter().any(|y| !(y[0] > 0.0) || y.iter().any(|v| !v.is_finite())) {
            return Err(Error::Integration("trajectory left the admissible region".into()));
        }
        Ok(states)
    }

    /// Mismatch at `T/2`; the right half is mapped back to `t`.
    fn mismatch(&self, x: [f64; 3]) -> Result<Vec<f64>> {
        let mid = 0.5 * x[2];
        if mid <= self.eps {
            return Err(Error::Integration("interval shorter than the launch offsets".into()));
        }
        let left = self.half(x[0], 1.0, &[mid])?.pop().unwrap();
        let right = self.half(x[1], -1.0, &[mid])?.pop().unwrap();
        let r = self.system.factors.len();
        let mut out = vec![left[0] - right[0], left[1] + right[1], left[3] + right[3]];
        for i in 0..r {
            out.push(left[4 + i] - right[4 + i]);
            out.push(left[4 + r + i] + right[4 + r + i]);
        }
        Ok(out)
    }

    /// First time `f'` turns negative when leaving the left end with `u''(0) = 0`.
    fn turning_time(&self) -> Result<f64> {
        let outputs: Vec<f64> = (1..=4000).map(|k| self.eps + 0.005 * k as f64).collect();
        let (y0, _) = self.launch(0.0, 1.0)?.eval(self.eps);
        let mut y = y0;
        let mut t = self.eps;
        for &target in &outputs {
            let next = integrate(|_, y, dy| self.system.rhs(y, dy), t, &y, &[target], self.tol)?
                .pop()
                .unwrap();
            if next[1] < 0.0 || !(next[0] > 0.0) {
                return Ok(target);
            }
            y = next;
            t = target;
        }
        Err(Error::NoSoliton("f' never turns with u''(0) = 0".into()))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Gauss–Newton with a central-difference Jacobian.
fn levenberg_marquardt(shooter: &Shooter, x0: [f64; 3], max_iter: usize) -> Result<([f64; 3], f64, usize)> {
    let mut x = x0;
    let mut res = shooter.mismatch(x)?;
    let mut lambda = 1e-3;
    for it in 0..max_iter {
        let rn = norm(&res);
        if rn < 1e-11 {
            return Ok((x, rn, it));
        }
        let m = res.len();
        let mut jac = nalgebra::DMatrix::zeros(m, 3);
        for j in 0..3 {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let rp = shooter.mismatch(xp)?;
            let rm = shooter.mismatch(xm)?;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * nalgebra::DVector::from_column_slice(&res);
        let mut accepted = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for d in 0..3 {
                lhs[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = lhs.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            match shooter.mismatch(trial) {
                Ok(r) if norm(&r) < rn => {
                    x = trial;
                    res = r;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !accepted {
            return Err(Error::NewtonDivergence {
                iterations: it,
                residual: rn,
                last: x.to_vec(),
            });
        }
    }
    let rn = norm(&res);
    if rn < 1e-9 {
        return Ok((x, rn, max_iter));
    }
    Err(Error::NewtonDivergence {
        iterations: max_iter,
        residual: rn,
        last: x.to_vec(),
    })
}

/// Fills every node from the converged trajectories.
fn assemble(
    shooter: &Shooter,
    x: [f64; 3],
    config: &BundleConfig,
    options: &SolverOptions,
) -> Result<(ProfileGrid, f64)> {
    let length = x[2];
    let mid = 0.5 * length;
    let t = options.scheme.nodes(options.nodes, length);
    let n = t.len();
    let r = config.factor_count();
    let sys = &shooter.system;
    // local time, side, node index
    let mut left_nodes = Vec::new();
    let mut right_nodes = Vec::new();
    for (k, &tk) in t.iter().enumerate() {
        if tk <= mid {
            left_nodes.push((tk, k));
        } else {
            right_nodes.push((length - tk, k));
        }
    }
    right_nodes.reverse();
    let mut f = Profile::constant(n, 0.0);
    let mut u = Profile::constant(n, 0.0);
    let mut l = vec![Profile::constant(n, 0.0); r];
    let mut drift = 0.0_f64;
    let mut u_mid = [0.0; 2];
    for (side, nodes, ddu, sign) in [(0, &left_nodes, x[0], 1.0), (1, &right_nodes, x[1], -1.0)] {
        let launch = shooter.launch(ddu, sign)?;
        let mut outputs: Vec<f64> = nodes.iter().map(|&(s, _)| s).filter(|&s| s > shooter.eps).collect();
        outputs.push(mid);
        let states = shooter.half(ddu, sign, &outputs)?;
        drift = drift.max(sys.kaehler_drift(&states, sign));
        u_mid[side] = states.last().unwrap()[2];
        let mut it = states.iter();
        let odd = if side == 0 { 1.0 } else { -1.0 };
        for &(s, k) in nodes.iter() {
            let (y, dd) = if s > shooter.eps {
                let y = it.next().unwrap().clone();
                let mut dd = vec![0.0; 2 + r];
                sys.second(&y, &mut dd);
                (y, dd)
            } else if s > 0.0 {
                let (y, _) = launch.eval(s);
                let mut dd = vec![0.0; 2 + r];
                sys.second(&y, &mut dd);
                (y, dd)
            } else {
                launch.eval(s)
            };
            f.value[k] = y[0];
            f.d1[k] = odd * y[1];
            f.d2[k] = dd[0];
            u.value[k] = y[2];
            u.d1[k] = odd * y[3];
            u.d2[k] = dd[1];
            for i in 0..r {
                l[i].value[k] = y[4 + i];
                l[i].d1[k] = odd * y[4 + r + i];
                l[i].d2[k] = dd[2 + i];
            }
        }
    }
    // align the right half's additive constant with the left one at T/2
    let offset = u_mid[0] - u_mid[1];
    for &(_, k) in &right_nodes {
        u.value[k] += offset;
    }
    Ok((ProfileGrid::new(options.scheme, t, f, l, u)?, drift))
}

/// Solves by shooting, returning the normalized solution and the fit record.
pub fn solve_shooting_with_diagnostics(
    config: &BundleConfig,
    constants: &CurvatureConstants,
    options: &SolverOptions,
) -> Result<(SolitonSolution, ShootingDiagnostics)> {
    let (a, b) = constants.validated()?;
    config.validate()?;
    let shooter = Shooter {
        system: System {
            factors: &config.factors,
            a,
            b,
        },
        eps: options.launch_offset,
        tol: options.ode,
    };
    let turn = shooter.turning_time()?;
    let (x, mismatch, iterations) = levenberg_marquardt(&shooter, [0.0, 0.0, 2.0 * turn], options.max_iterations)?;
    let (grid, drift) = assemble(&shooter, x, config, options)?;
    if drift > options.kaehler_tolerance {
        return Err(Error::KaehlerDrift {
            drift,
            tolerance: options.kaehler_tolerance,
        });
    }
    let sol = finish(SolitonSolution {
        grid,
        config: config.clone(),
        constants: constants.clone(),
        c_slope: x[0],
        gauge_shift: 0.0,
        residuals: ResidualReport::default(),
        method: Method::Shooting,
        roots: Vec::new(),
    })?;
    Ok((
        sol,
        ShootingDiagnostics {
            iterations,
            mismatch,
            unknowns: x,
            kaehler_drift: drift,
        },
    ))
}

/// Shooting solve; the slope is read off as `u''(0)` since `u' = c f` there.
pub fn solve_shooting(
    config: &BundleConfig,
    constants: &CurvatureConstants,
    options: &SolverOptions,
) -> Result<SolitonSolution> {
    solve_shooting_with_diagnostics(config, constants, options).map(|(s, _)| s)
}
