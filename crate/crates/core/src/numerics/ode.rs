//! Dormand–Prince 5(4) with step-size control, stepping exactly onto output points.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeTolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = rhs(t, y)` from `(t0, y0)` and returns the state at every
/// point of `outputs` (which must be nondecreasing and `>= t0`).
pub fn integrate<F>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    tol: OdeTolerances,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut out = Vec::with_capacity(outputs.len());
    let span = outputs.last().map_or(0.0, |e| e - t0).abs().max(1e-12);
    let mut h = 1e-3 * span;
    let mut steps = 0usize;
    rhs(t, &y, &mut k[0]);

    for &target in outputs {
        if target < t - 1e-14 * span {
            return Err(Error::Integration(format!(
                "output point {target} precedes current time {t}"
            )));
        }
        while t < target {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::Integration(format!("step budget exhausted at t = {t}")));
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            let stage = |acc: &mut Vec<f64>, coeffs: &[(usize, f64)], k: &Vec<Vec<f64>>| {
                for i in 0..dim {
                    let mut s = y[i];
                    for &(j, a) in coeffs {
                        s += step * a * k[j][i];
                    }
                    acc[i] = s;
                }
            };
            stage(&mut tmp, &[(0, A21)], &k);
            rhs(t + C2 * step, &tmp, &mut k[1]);
            stage(&mut tmp, &[(0, A31), (1, A32)], &k);
            rhs(t + C3 * step, &tmp, &mut k[2]);
            stage(&mut tmp, &[(0, A41), (1, A42), (2, A43)], &k);
            rhs(t + C4 * step, &tmp, &mut k[3]);
            stage(&mut tmp, &[(0, A51), (1, A52), (2, A53), (3, A54)], &k);
            rhs(t + C5 * step, &tmp, &mut k[4]);
            stage(&mut tmp, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], &k);
            rhs(t + step, &tmp, &mut k[5]);
            for i in 0..dim {
                y_new[i] = y[i]
                    + step * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            rhs(t + step, &y_new, &mut k[6]);
            let mut err = 0.0_f64;
            for i in 0..dim {
                let e = step
                    * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                        + E7 * k[6][i]);
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                h = 0.1 * step;
                if h < 1e-14 * span {
                    return Err(Error::Integration(format!("non-finite state near t = {t}")));
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || grow < 1.0 {
                    h = step * grow;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < 1e-14 * span {
                    return Err(Error::Integration(format!("step size underflow near t = {t}")));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
