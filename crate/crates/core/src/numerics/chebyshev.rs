//! Chebyshev–Lobatto machinery on an interval `[0, L]`.
//!
//! Nodes are stored in increasing order, `t_k = L/2 (1 - cos(k pi / n))`,
//! so the reference coordinate is `x_k = -cos(k pi / n)`.

use std::f64::consts::PI;

/// `count` Chebyshev–Lobatto points on `[0, length]`, increasing.
pub fn lobatto_nodes(count: usize, length: f64) -> Vec<f64> {
    assert!(count >= 2, "need at least two Lobatto nodes");
    let n = (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k == 0 {
                0.0
            } else if k == count - 1 {
                length
            } else {
                0.5 * length * (1.0 - (k as f64 * PI / n).cos())
            }
        })
        .collect()
}

/// Clenshaw–Curtis weights matching [`lobatto_nodes`].
pub fn clenshaw_curtis_weights(count: usize, length: f64) -> Vec<f64> {
    assert!(count >= 2);
    let n = count - 1;
    let nf = n as f64;
    let mut w = vec![0.0; count];
    if n == 1 {
        w[0] = 0.5 * length;
        w[1] = 0.5 * length;
        return w;
    }
    let table = CosTable::new(n);
    let edge = if n.is_multiple_of(2) {
        1.0 / (nf * nf - 1.0)
    } else {
        1.0 / (nf * nf)
    };
    w[0] = edge;
    w[n] = edge;
    for (k, wk) in w.iter_mut().enumerate().take(n).skip(1) {
        let mut v = 1.0;
        if n.is_multiple_of(2) {
            for j in 1..n / 2 {
                v -= 2.0 * table.cos(2 * j * k) / (4.0 * (j * j) as f64 - 1.0);
            }
            v -= table.cos(n * k) / (nf * nf - 1.0);
        } else {
            for j in 1..=(n - 1) / 2 {
                v -= 2.0 * table.cos(2 * j * k) / (4.0 * (j * j) as f64 - 1.0);
            }
        }
        *wk = 2.0 * v / nf;
    }
    // reference interval [-1, 1] has length 2
    w.iter_mut().for_each(|x| *x *= 0.5 * length);
    w
}

/// `cos(m pi / n)` for integer `m`, from a table of `2n` entries.
struct CosTable {
    n2: usize,
    table: Vec<f64>,
}

impl CosTable {
    fn new(n: usize) -> Self {
        let n2 = 2 * n;
        let table = (0..n2).map(|m| (m as f64 * PI / n as f64).cos()).collect();
        Self { n2, table }
    }

    #[inline]
    fn cos(&self, m: usize) -> f64 {
        self.table[m % self.n2]
    }
}

/// Chebyshev expansion of nodal data given on [`lobatto_nodes`].
#[derive(Debug, Clone)]
pub struct ChebSeries {
    /// Coefficients in the reference variable `x = 2t/L - 1`.
    pub coeffs: Vec<f64>,
    pub length: f64,
}

impl ChebSeries {
    /// Discrete Chebyshev transform of Lobatto samples.
    pub fn from_values(values: &[f64], length: f64) -> Self {
        let count = values.len();
        assert!(count >= 2);
        let n = count - 1;
        let table = CosTable::new(n);
        let mut coeffs = vec![0.0; count];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &v) in values.iter().enumerate() {
                let half = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += half * v * table.cos(j * k);
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let scale = if j == 0 || j == n { 1.0 } else { 2.0 };
            *c = sign * scale * acc / n as f64;
        }
        Self { coeffs, length }
    }

    /// Drops the tail of coefficients that sit at the rounding floor.
    pub fn chopped(mut self) -> Self {
        let scale = self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            self.coeffs.truncate(1);
            return self;
        }
        // the transform's own rounding grows linearly with the sample count
        let floor = (self.coeffs.len() as f64).max(64.0) * 8.0 * f64::EPSILON * scale;
        let keep = self
            .coeffs
            .iter()
            .rposition(|c| c.abs() > floor)
            .map_or(1, |k| k + 1);
        // only chop when a genuine plateau exists
        if keep + 4 < self.coeffs.len() {
            self.coeffs.truncate(keep);
        }
        self
    }

    /// Series of the t-derivative.
    pub fn derivative(&self) -> Self {
        let m = self.coeffs.len();
        let mut d = vec![0.0; m.max(1)];
        if m >= 2 {
            for k in (1..m).rev() {
                let next = if k + 1 < m { d[k + 1] } else { 0.0 };
                d[k - 1] = next + 2.0 * k as f64 * self.coeffs[k];
            }
            d[0] *= 0.5;
            d.truncate(m - 1);
        } else {
            d[0] = 0.0;
        }
        let scale = 2.0 / self.length;
        d.iter_mut().for_each(|c| *c *= scale);
        Self {
            coeffs: d,
            length: self.length,
        }
    }

    /// Clenshaw evaluation at a physical point `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let x = 2.0 * t / self.length - 1.0;
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - b2
    }

    /// Values on `count` Lobatto nodes.
    pub fn eval_on_nodes(&self, count: usize) -> Vec<f64> {
        let n = count - 1;
        let table = CosTable::new(n);
        (0..count)
            .map(|k| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        sign * c * table.cos(j * k)
                    })
                    .sum()
            })
            .collect()
    }
}

/// Spectral derivative of Lobatto samples, with tail chopping.
pub fn derivative(values: &[f64], length: f64) -> Vec<f64> {
    ChebSeries::from_values(values, length)
        .chopped()
        .derivative()
        .eval_on_nodes(values.len())
}

/// Spectral derivative evaluated only at the two interval ends.
pub fn derivative_at_ends(values: &[f64], length: f64) -> (f64, f64) {
    let d = ChebSeries::from_values(values, length).chopped().derivative();
    (d.eval(0.0), d.eval(length))
}

/// Barycentric weights of the Lobatto node set.
pub fn barycentric_weights(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == count - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Barycentric interpolation of Lobatto data at `t`.
pub fn interpolate(nodes: &[f64], weights: &[f64], values: &[f64], t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&tk, &wk), &vk) in nodes.iter().zip(weights).zip(values) {
        let dt = t - tk;
        if dt == 0.0 {
            return vk;
        }
        let c = wk / dt;
        num += c * vk;
        den += c;
    }
    num / den
}

/// Dense first-derivative matrix on the given Lobatto nodes.
pub fn differentiation_matrix(nodes: &[f64]) -> nalgebra::DMatrix<f64> {
    let m = nodes.len();
    let w = barycentric_weights(m);
    let mut d = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clenshaw_curtis_integrates_polynomials_exactly() {
        let len = 3.0;
        for count in [9usize, 10, 33] {
            let t = lobatto_nodes(count, len);
            let w = clenshaw_curtis_weights(count, len);
            for p in 0..(count - 1) {
                let q: f64 = t.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = len.powi(p as i32 + 1) / (p as f64 + 1.0);
                assert!((q - exact).abs() < 1e-12 * exact.max(1.0), "p={p} count={count}");
            }
        }
    }

    #[test]
    fn spectral_derivative_of_smooth_function() {
        let len = 2.5;
        let t = lobatto_nodes(64, len);
        let v: Vec<f64> = t.iter().map(|x| (1.3 * x).sin() * (-x).exp()).collect();
        let d = derivative(&v, len);
        for (x, dv) in t.iter().zip(&d) {
            let exact = 1.3 * (1.3 * x).cos() * (-x).exp() - (1.3 * x).sin() * (-x).exp();
            assert!((dv - exact).abs() < 1e-11);
        }
        let (a, b) = derivative_at_ends(&v, len);
        assert!((a - 1.3).abs() < 1e-11);
        let exact_b = 1.3 * (1.3 * len).cos() * (-len).exp() - (1.3 * len).sin() * (-len).exp();
        assert!((b - exact_b).abs() < 1e-11);
    }

    #[test]
    fn series_round_trip_and_interpolation() {
        let len = 1.7;
        let t = lobatto_nodes(21, len);
        let v: Vec<f64> = t.iter().map(|x| 1.0 + x * x * x - 0.5 * x).collect();
        let s = ChebSeries::from_values(&v, len);
        let back = s.eval_on_nodes(21);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
        let w = barycentric_weights(21);
        let probe = 0.731;
        let exact = 1.0 + probe * probe * probe - 0.5 * probe;
        assert!((interpolate(&t, &w, &v, probe) - exact).abs() < 1e-13);
        assert!((s.eval(probe) - exact).abs() < 1e-13);
    }

    #[test]
    fn differentiation_matrix_matches_series_derivative() {
        let len = 2.0;
        let t = lobatto_nodes(17, len);
        let v: Vec<f64> = t.iter().map(|x| (0.7 * x).cos()).collect();
        let d = differentiation_matrix(&t);
        let dv = &d * nalgebra::DVector::from_vec(v.clone());
        let ds = derivative(&v, len);
        for (a, b) in dv.iter().zip(&ds) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
