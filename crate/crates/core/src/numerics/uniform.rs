//! Equispaced fallback: Gregory quadrature and fourth-order finite differences.

/// `count` equispaced nodes on `[0, length]`.
pub fn nodes(count: usize, length: f64) -> Vec<f64> {
    assert!(count >= 2);
    let h = length / (count - 1) as f64;
    (0..count)
        .map(|k| if k == count - 1 { length } else { k as f64 * h })
        .collect()
}

/// Gregory end-corrected trapezoid weights (fourth order). Needs `count >= 8`.
pub fn gregory_weights(count: usize, length: f64) -> Vec<f64> {
    assert!(count >= 8, "Gregory weights need at least 8 nodes");
    let h = length / (count - 1) as f64;
    let mut w = vec![h; count];
    let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
    for (k, c) in ends.iter().enumerate() {
        w[k] = c * h;
        w[count - 1 - k] = c * h;
    }
    w
}

/// Fourth-order first derivative, one-sided stencils at the ends.
pub fn derivative(values: &[f64], length: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5);
    let h = length / (n - 1) as f64;
    let v = values;
    let mut d = vec![0.0; n];
    let fwd = |i: usize| -> f64 {
        (-25.0 * v[i] + 48.0 * v[i + 1] - 36.0 * v[i + 2] + 16.0 * v[i + 3] - 3.0 * v[i + 4])
            / (12.0 * h)
    };
    let fwd1 = |i: usize| -> f64 {
        (-3.0 * v[i - 1] - 10.0 * v[i] + 18.0 * v[i + 1] - 6.0 * v[i + 2] + v[i + 3]) / (12.0 * h)
    };
    d[0] = fwd(0);
    d[1] = fwd1(1);
    for i in 2..n - 2 {
        d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
    }
    let j = n - 1;
    d[j] = (25.0 * v[j] - 48.0 * v[j - 1] + 36.0 * v[j - 2] - 16.0 * v[j - 3] + 3.0 * v[j - 4])
        / (12.0 * h);
    let j = n - 2;
    d[j] = (3.0 * v[j + 1] + 10.0 * v[j] - 18.0 * v[j - 1] + 6.0 * v[j - 2] - v[j - 3]) / (12.0 * h);
    d
}

/// Six-point Lagrange interpolation of equispaced data.
pub fn interpolate(length: f64, values: &[f64], t: f64) -> f64 {
    let n = values.len();
    let h = length / (n - 1) as f64;
    let pos = (t / h).clamp(0.0, (n - 1) as f64);
    let start = (pos.floor() as isize - 2).clamp(0, n as isize - 6) as usize;
    let mut acc = 0.0;
    for i in start..start + 6 {
        let mut basis = 1.0;
        for j in start..start + 6 {
            if i != j {
                basis *= (pos - j as f64) / (i as f64 - j as f64);
            }
        }
        acc += basis * values[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gregory_is_exact_on_cubics() {
        let len = 2.0;
        let t = nodes(11, len);
        let w = gregory_weights(11, len);
        let q: f64 = t.iter().zip(&w).map(|(x, w)| w * (x * x * x - x)).sum();
        assert!((q - (4.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn fourth_order_derivative_is_exact_on_quartics() {
        let len = 1.0;
        let t = nodes(12, len);
        let v: Vec<f64> = t.iter().map(|x| x.powi(4) - 2.0 * x).collect();
        let d = derivative(&v, len);
        for (x, dv) in t.iter().zip(&d) {
            assert!((dv - (4.0 * x.powi(3) - 2.0)).abs() < 1e-9);
        }
        assert!((interpolate(len, &v, 0.33) - (0.33f64.powi(4) - 0.66)).abs() < 1e-12);
    }
}
