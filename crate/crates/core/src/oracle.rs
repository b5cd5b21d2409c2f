//! Brute-force Ricci curvature of the one-factor ansatz in an explicit chart.
//!
//! The chart is `(t, ψ, ϑ, φ)` on an interval times a circle bundle over a
//! round 2-sphere of curvature `p` (so `Ric(r) = p r`), with connection form
//! `θ = dψ − (q/p) cos ϑ dφ` whose curvature is `q` times the area form.
//! Everything below is plain coordinate differentiation: metric → Christoffel
//! symbols → Ricci, each derivative taken by Ridders' extrapolated central
//! differences. Nothing here reuses the reduced formulas of [`crate::ansatz`].

use nalgebra::{Matrix4, Vector4};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{ratio_to_f64, ricci_at_point, BaseFactor, CurvatureConstants, Jet};
use crate::error::{Error, Result};

/// Interior state of the profiles at the evaluation time plus a chart point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalState {
    pub f: f64,
    pub df: f64,
    pub ddf: f64,
    pub l: f64,
    pub dl: f64,
    pub ddl: f64,
    pub q: i64,
    /// Einstein constant of the base sphere.
    pub p: f64,
    pub t: f64,
    pub psi: f64,
    pub theta: f64,
    pub phi: f64,
}

/// Points closer than this to the chart poles (in `|sin ϑ|`) are rejected.
pub const POLE_GUARD: f64 = 0.1;

impl LocalState {
    fn validate(&self) -> Result<()> {
        if !(self.f > 0.0 && self.l > 0.0 && self.p > 0.0) {
            return Err(Error::OracleState("f, l and p must be positive".into()));
        }
        if self.theta.sin().abs() < POLE_GUARD {
            return Err(Error::OracleState(format!(
                "ϑ = {} is inside the pole guard band",
                self.theta
            )));
        }
        Ok(())
    }

    /// Quadratic model of `f` around the evaluation time.
    fn f_at(&self, t: f64) -> f64 {
        let s = t - self.t;
        self.f + self.df * s + 0.5 * self.ddf * s * s
    }

    fn l_at(&self, t: f64) -> f64 {
        let s = t - self.t;
        self.l + self.dl * s + 0.5 * self.ddl * s * s
    }

    fn coords(&self) -> [f64; 4] {
        [self.t, self.psi, self.theta, self.phi]
    }
}

fn metric_at(state: &LocalState, x: [f64; 4]) -> Matrix4<f64> {
    let [t, _psi, th, _phi] = x;
    let f = state.f_at(t);
    let l = state.l_at(t);
    let p = state.p;
    let a = -(state.q as f64 / p) * th.cos();
    let base = l * l / p;
    let f2 = f * f;
    let mut g = Matrix4::zeros();
    g[(0, 0)] = 1.0;
    g[(1, 1)] = f2;
    g[(1, 3)] = f2 * a;
    g[(3, 1)] = f2 * a;
    g[(2, 2)] = base;
    g[(3, 3)] = f2 * a * a + base * th.sin().powi(2);
    g
}

/// Metric matrix in the chart `(t, ψ, ϑ, φ)` at `coords`.
pub fn coordinate_metric(state: &LocalState, coords: [f64; 4]) -> Result<Matrix4<f64>> {
    state.validate()?;
    if coords[2].sin().abs() < POLE_GUARD {
        return Err(Error::OracleState("chart point inside the pole guard band".into()));
    }
    Ok(metric_at(state, coords))
}

/// Finite-difference controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    /// Initial central-difference step.
    pub initial_step: f64,
    /// Ridders tableau depth; 1 means a single unextrapolated difference.
    pub max_levels: usize,
    /// Required absolute accuracy of the Ricci components.
    pub target_error: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            max_levels: 10,
            target_error: 1e-7,
        }
    }
}

/// Ridders' extrapolation for the derivative at 0 of a vector-valued map.
/// Returns per-component estimates and error estimates.
fn ridders<F: Fn(f64) -> Vec<f64>>(f: F, h0: f64, levels: usize) -> (Vec<f64>, Vec<f64>) {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const SAFE: f64 = 2.0;
    let central = |h: f64| -> Vec<f64> {
        let plus = f(h);
        let minus = f(-h);
        plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    };
    if levels <= 1 {
        let coarse = central(h0);
        let fine = central(0.5 * h0);
        let err = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).collect();
        return (coarse, err);
    }
    let first = central(h0);
    let dim = first.len();
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); levels]; levels];
    table[0][0] = first;
    let mut best = table[0][0].clone();
    let mut err = vec![f64::MAX; dim];
    let mut done = vec![false; dim];
    let mut h = h0;
    for i in 1..levels {
        h /= CON;
        table[0][i] = central(h);
        let mut fac = CON2;
        for j in 1..=i {
            let next: Vec<f64> = (0..dim)
                .map(|c| (table[j - 1][i][c] * fac - table[j - 1][i - 1][c]) / (fac - 1.0))
                .collect();
            table[j][i] = next;
            fac *= CON2;
            for c in 0..dim {
                if done[c] {
                    continue;
                }
                let errt = (table[j][i][c] - table[j - 1][i][c])
                    .abs()
                    .max((table[j][i][c] - table[j - 1][i - 1][c]).abs());
                if errt <= err[c] {
                    err[c] = errt;
                    best[c] = table[j][i][c];
                }
            }
        }
        for c in 0..dim {
            if !done[c] && (table[i][i][c] - table[i - 1][i - 1][c]).abs() >= SAFE * err[c] {
                done[c] = true;
            }
        }
        if done.iter().all(|d| *d) {
            break;
        }
    }
    (best, err)
}

fn flatten(m: &Matrix4<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

/// Christoffel symbols `Γ^a_{bc}` at `x`, flattened as `a*16 + b*4 + c`,
/// with the worst error estimate of the metric derivatives.
fn christoffel(state: &LocalState, x: [f64; 4], settings: &OracleSettings) -> (Vec<f64>, f64) {
    let g = metric_at(state, x);
    let ginv = g.try_inverse().expect("chart metric is nondegenerate");
    // dg[c] = ∂_c g (column-major flattened)
    let mut dg = Vec::with_capacity(4);
    let mut worst = 0.0_f64;
    for c in 0..4 {
        let (d, e) = ridders(
            |h| {
                let mut y = x;
                y[c] += h;
                flatten(&metric_at(state, y))
            },
            settings.initial_step,
            settings.max_levels,
        );
        worst = e.iter().fold(worst, |m, v| m.max(*v));
        dg.push(Matrix4::from_column_slice(&d));
    }
    let mut gamma = vec![0.0; 64];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let mut s = 0.0;
                for d in 0..4 {
                    s += ginv[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                }
                gamma[a * 16 + b * 4 + c] = 0.5 * s;
            }
        }
    }
    (gamma, worst)
}

/// Coordinate Ricci tensor at the state's chart point, plus an error estimate.
fn coordinate_ricci(state: &LocalState, settings: &OracleSettings) -> (Matrix4<f64>, f64) {
    let x = state.coords();
    let (gamma, mut worst) = christoffel(state, x, settings);
    // dgamma[e][a*16+b*4+c] = ∂_e Γ^a_{bc}
    let mut dgamma = Vec::with_capacity(4);
    for e in 0..4 {
        let (d, err) = ridders(
            |h| {
                let mut y = x;
                y[e] += h;
                christoffel(state, y, settings).0
            },
            settings.initial_step,
            settings.max_levels,
        );
        worst = err.iter().fold(worst, |m, v| m.max(*v));
        dgamma.push(d);
    }
    let gam = |a: usize, b: usize, c: usize| gamma[a * 16 + b * 4 + c];
    let mut ric = Matrix4::zeros();
    for b in 0..4 {
        for d in 0..4 {
            let mut s = 0.0;
            for a in 0..4 {
                s += dgamma[a][a * 16 + b * 4 + d] - dgamma[d][a * 16 + a * 4 + b];
                for e in 0..4 {
                    s += gam(a, a, e) * gam(e, b, d) - gam(a, d, e) * gam(e, a, b);
                }
            }
            ric[(b, d)] = s;
        }
    }
    (ric, worst)
}

/// Oracle output in the unit frame `{∂_t, U, H}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRicci {
    pub r_nn: f64,
    pub r_uu: f64,
    pub r_h: f64,
    /// Ricci on the second horizontal unit vector (equal to `r_h` by symmetry).
    pub r_h2: f64,
    /// Largest off-diagonal frame component.
    pub off_diagonal: f64,
    /// `max |Ric_ab − Ric_ba|` of the coordinate tensor before projection.
    pub asymmetry: f64,
    pub error_estimate: f64,
}

fn frame(state: &LocalState, rotation: f64) -> [Vector4<f64>; 4] {
    let th = state.theta;
    let f = state.f;
    let sp = state.p.sqrt();
    let a = -(state.q as f64 / state.p) * th.cos();
    let n = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let u = Vector4::new(0.0, 1.0 / f, 0.0, 0.0);
    let h1 = Vector4::new(0.0, 0.0, sp / state.l, 0.0);
    let s = sp / (state.l * th.sin());
    let h2 = Vector4::new(0.0, -a * s, 0.0, s);
    let (c, sn) = (rotation.cos(), rotation.sin());
    [n, u, h1 * c + h2 * sn, h2 * c - h1 * sn]
}

fn project(ric: &Matrix4<f64>, state: &LocalState, rotation: f64, error_estimate: f64) -> OracleRicci {
    let e = frame(state, rotation);
    let r = |i: usize, j: usize| (e[i].transpose() * ric * e[j])[(0, 0)];
    let mut off = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                off = off.max(r(i, j).abs());
            }
        }
    }
    let mut asym = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            asym = asym.max((ric[(i, j)] - ric[(j, i)]).abs());
        }
    }
    OracleRicci {
        r_nn: r(0, 0),
        r_uu: r(1, 1),
        r_h: r(2, 2),
        r_h2: r(3, 3),
        off_diagonal: off,
        asymmetry: asym,
        error_estimate,
    }
}

/// Oracle Ricci components, failing when the extrapolated error estimate
/// exceeds the target.
pub fn oracle_ricci(state: &LocalState) -> Result<OracleRicci> {
    oracle_ricci_with(state, &OracleSettings::default(), 0.0)
}

/// As [`oracle_ricci`] with explicit settings and a rotation of the horizontal frame.
pub fn oracle_ricci_with(state: &LocalState, settings: &OracleSettings, rotation: f64) -> Result<OracleRicci> {
    let out = oracle_ricci_unchecked(state, settings, rotation)?;
    if !(out.error_estimate <= settings.target_error) {
        return Err(Error::OracleConvergence {
            estimate: out.error_estimate,
        });
    }
    Ok(out)
}

/// Error is estimated a posteriori: the whole pipeline is rerun from a
/// different initial step and the frame components are compared.
fn oracle_ricci_unchecked(state: &LocalState, settings: &OracleSettings, rotation: f64) -> Result<OracleRicci> {
    state.validate()?;
    let (ric, _) = coordinate_ricci(state, settings);
    let alt = OracleSettings {
        initial_step: 0.6 * settings.initial_step,
        ..*settings
    };
    let (ric_alt, _) = coordinate_ricci(state, &alt);
    let e = frame(state, rotation);
    let mut err = 0.0_f64;
    for a in &e {
        for b in &e {
            let x = (a.transpose() * ric * b)[(0, 0)];
            let y = (a.transpose() * ric_alt * b)[(0, 0)];
            err = err.max((x - y).abs());
        }
    }
    Ok(project(&ric, state, rotation, err))
}

/// Candidate values for both coefficients.
pub fn candidate_set() -> Vec<Ratio<i64>> {
    vec![Ratio::new(1, 8), Ratio::new(1, 4), Ratio::new(1, 2), Ratio::new(1, 1)]
}

/// Deterministic random admissible states.
pub fn random_states(count: usize, seed: u64) -> Vec<LocalState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| LocalState {
            f: rng.gen_range(0.4..1.5),
            df: rng.gen_range(-1.0..1.0),
            ddf: rng.gen_range(-1.0..1.0),
            l: rng.gen_range(0.6..1.8),
            dl: rng.gen_range(-0.6..0.6),
            ddl: rng.gen_range(-1.0..1.0),
            q: rng.gen_range(1..=2),
            p: 2.0,
            t: rng.gen_range(0.2..2.0),
            psi: rng.gen_range(0.0..std::f64::consts::TAU),
            theta: rng.gen_range(0.6..2.5),
            phi: rng.gen_range(0.0..std::f64::consts::TAU),
        })
        .collect()
}

/// Worst relative disagreement between the structural formulas with
/// coefficients `(a, b)` and the oracle over `pairs`. Relative to the
/// largest oracle component of each state.
pub fn formula_error(pairs: &[(LocalState, OracleRicci)], a: f64, b: f64) -> f64 {
    pairs
        .iter()
        .map(|(s, o)| {
            let factor = [BaseFactor {
                d: 2,
                p: s.p,
                q: s.q,
                kappa: 0.0,
            }];
            let r = ricci_at_point(
                &factor,
                a,
                b,
                Jet::new(s.f, s.df, s.ddf),
                &[Jet::new(s.l, s.dl, s.ddl)],
            );
            let scale = o.r_nn.abs().max(o.r_uu.abs()).max(o.r_h.abs()).max(1e-300);
            let e = (r.nn - o.r_nn)
                .abs()
                .max((r.uu - o.r_uu).abs())
                .max((r.h[0] - o.r_h).abs());
            e / scale
        })
        .fold(0.0, f64::max)
}

/// One row of the candidate scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    pub max_rel_err: f64,
}

/// Full record of a pinning run.
#[derive(Debug, Clone, PartialEq)]
pub struct PinReport {
    /// Best candidate; `is_pinned()` tells whether it passed.
    pub constants: CurvatureConstants,
    pub scores: Vec<CandidateScore>,
    /// The best candidate is the only one under the tolerance.
    pub unique: bool,
    /// Worst oracle error estimate across the states.
    pub oracle_error: f64,
}

impl PinReport {
    pub fn succeeded(&self) -> bool {
        self.unique && self.constants.is_pinned() && self.oracle_error <= OracleSettings::default().target_error
    }
}

/// Scans the candidate grid against the oracle on `samples` random states.
pub fn pin_constants(samples: usize, seed: u64, settings: &OracleSettings) -> Result<PinReport> {
    let states = random_states(samples, seed);
    let mut pairs = Vec::with_capacity(samples);
    let mut oracle_error = 0.0_f64;
    for s in states {
        let o = oracle_ricci_unchecked(&s, settings, 0.0)?;
        oracle_error = oracle_error.max(o.error_estimate);
        pairs.push((s, o));
    }
    let cands = candidate_set();
    let mut scores = Vec::new();
    let mut best: Option<(Ratio<i64>, Ratio<i64>, f64)> = None;
    for &a in &cands {
        for &b in &cands {
            let err = formula_error(&pairs, ratio_to_f64(a), ratio_to_f64(b));
            scores.push(CandidateScore {
                a: a.to_string(),
                b: b.to_string(),
                max_rel_err: err,
            });
            if best.is_none_or(|(_, _, e)| err < e) {
                best = Some((a, b, err));
            }
        }
    }
    let (a, b, err) = best.expect("candidate set is nonempty");
    let below = scores
        .iter()
        .filter(|s| s.max_rel_err < crate::ansatz::PIN_TOLERANCE)
        .count();
    Ok(PinReport {
        constants: CurvatureConstants {
            a,
            b,
            max_rel_err: err,
            samples,
        },
        scores,
        unique: below == 1,
        oracle_error,
    })
}

/// Pins with the default settings and sample count; errors unless the run validates.
pub fn pinned_constants(seed: u64) -> Result<CurvatureConstants> {
    let report = pin_constants(crate::ansatz::PIN_MIN_SAMPLES, seed, &OracleSettings::default())?;
    if !report.succeeded() {
        return Err(Error::Unpinned(format!(
            "pinning run failed: best max_rel_err {:e}, unique = {}, oracle error {:e}",
            report.constants.max_rel_err, report.unique, report.oracle_error
        )));
    }
    Ok(report.constants)
}
