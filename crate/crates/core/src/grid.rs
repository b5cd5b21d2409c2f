//! Sampled profiles on `[0, T]` and the discretization they live on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{chebyshev, uniform};

/// Node family and the matching quadrature/differentiation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridScheme {
    /// Chebyshev–Lobatto nodes, Clenshaw–Curtis quadrature, spectral derivatives.
    #[default]
    Chebyshev,
    /// Equispaced nodes, Gregory quadrature, fourth-order finite differences.
    Uniform,
}

impl GridScheme {
    pub fn nodes(self, count: usize, length: f64) -> Vec<f64> {
        match self {
            Self::Chebyshev => chebyshev::lobatto_nodes(count, length),
            Self::Uniform => uniform::nodes(count, length),
        }
    }

    pub fn weights(self, count: usize, length: f64) -> Vec<f64> {
        match self {
            Self::Chebyshev => chebyshev::clenshaw_curtis_weights(count, length),
            Self::Uniform => uniform::gregory_weights(count, length),
        }
    }

    pub fn derivative(self, values: &[f64], length: f64) -> Vec<f64> {
        match self {
            Self::Chebyshev => chebyshev::derivative(values, length),
            Self::Uniform => uniform::derivative(values, length),
        }
    }

    pub fn derivative_at_ends(self, values: &[f64], length: f64) -> (f64, f64) {
        match self {
            Self::Chebyshev => chebyshev::derivative_at_ends(values, length),
            Self::Uniform => {
                let d = uniform::derivative(values, length);
                (d[0], d[d.len() - 1])
            }
        }
    }

    /// Minimum node count the scheme's rules support.
    pub fn min_nodes(self) -> usize {
        match self {
            Self::Chebyshev => 3,
            Self::Uniform => 8,
        }
    }
}

/// A scalar profile with its first two t-derivatives at every node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl Profile {
    pub fn constant(len: usize, c: f64) -> Self {
        Self {
            value: vec![c; len],
            d1: vec![0.0; len],
            d2: vec![0.0; len],
        }
    }

    /// Samples a function returning `(v, v', v'')` at each node.
    pub fn from_fn<F: Fn(f64) -> (f64, f64, f64)>(t: &[f64], f: F) -> Self {
        let mut p = Self::constant(t.len(), 0.0);
        for (k, &tk) in t.iter().enumerate() {
            let (v, d1, d2) = f(tk);
            p.value[k] = v;
            p.d1[k] = d1;
            p.d2[k] = d2;
        }
        p
    }

    /// Builds derivatives by the grid's differentiation rule.
    pub fn from_samples(grid: &ProfileGrid, values: Vec<f64>) -> Self {
        let d1 = grid.scheme.derivative(&values, grid.length());
        let d2 = grid.scheme.derivative(&d1, grid.length());
        Self { value: values, d1, d2 }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| c * x).collect();
        Self {
            value: s(&self.value),
            d1: s(&self.d1),
            d2: s(&self.d2),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            value: self.value.iter().map(|x| x + c).collect(),
            d1: self.d1.clone(),
            d2: self.d2.clone(),
        }
    }

    fn check_len(&self, n: usize, name: &str) -> Result<()> {
        if self.value.len() != n || self.d1.len() != n || self.d2.len() != n {
            return Err(Error::Grid(format!("profile `{name}` does not have {n} samples")));
        }
        Ok(())
    }
}

/// Metric profiles `f`, `l_i` and potential `u` sampled on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ProfileGrid {
    pub scheme: GridScheme,
    pub t: Vec<f64>,
    pub f: Profile,
    pub l: Vec<Profile>,
    pub u: Profile,
    weights: Vec<f64>,
}

impl ProfileGrid {
    /// Assembles a grid; the node vector must match `scheme` on `[0, t_last]`.
    pub fn new(scheme: GridScheme, t: Vec<f64>, f: Profile, l: Vec<Profile>, u: Profile) -> Result<Self> {
        let n = t.len();
        if n < scheme.min_nodes() {
            return Err(Error::Grid(format!("{n} nodes is below the scheme minimum")));
        }
        let length = t[n - 1];
        if !(length > 0.0) || t[0] != 0.0 {
            return Err(Error::Grid("nodes must start at 0 and end at T > 0".into()));
        }
        let expected = scheme.nodes(n, length);
        let dev = expected
            .iter()
            .zip(&t)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if dev > 1e-9 * length {
            return Err(Error::Grid(format!("nodes deviate from the {scheme:?} layout by {dev:e}")));
        }
        f.check_len(n, "f")?;
        u.check_len(n, "u")?;
        for (i, li) in l.iter().enumerate() {
            li.check_len(n, &format!("l{}", i + 1))?;
        }
        let weights = scheme.weights(n, length);
        Ok(Self {
            scheme,
            t,
            f,
            l,
            u,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Interval length `T`.
    pub fn length(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    pub fn factor_count(&self) -> usize {
        self.l.len()
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Plain `∫_0^T F dt` by the scheme's rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Same geometry with a replaced potential.
    pub fn with_potential(&self, u: Profile) -> Self {
        let mut g = self.clone();
        g.u = u;
        g
    }

    /// Evaluates nodal data at an arbitrary `t` in `[0, T]`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        match self.scheme {
            GridScheme::Chebyshev => {
                let w = chebyshev::barycentric_weights(self.len());
                chebyshev::interpolate(&self.t, &w, values, t)
            }
            GridScheme::Uniform => uniform::interpolate(self.length(), values, t),
        }
    }

    /// Checks the smooth-compactification invariants to tolerance `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.len();
        let last = n - 1;
        let f = &self.f;
        if f.value[0].abs() > tol || f.value[last].abs() > tol {
            return Err(Error::Grid("f must vanish at both ends".into()));
        }
        if (f.d1[0].abs() - 1.0).abs() > tol || (f.d1[last].abs() - 1.0).abs() > tol {
            return Err(Error::Grid(format!(
                "|f'| must be 1 at the ends (got {}, {})",
                f.d1[0], f.d1[last]
            )));
        }
        if let Some(k) = (1..last).find(|&k| f.value[k] <= 0.0) {
            return Err(Error::Grid(format!("f is not positive at interior node {k}")));
        }
        for (i, li) in self.l.iter().enumerate() {
            if li.value.iter().any(|&v| v <= 0.0) {
                return Err(Error::Grid(format!("l{} is not positive", i + 1)));
            }
            if li.d1[0].abs() > tol || li.d1[last].abs() > tol {
                return Err(Error::Grid(format!("l{}' must vanish at the ends", i + 1)));
            }
        }
        if self.u.d1[0].abs() > tol || self.u.d1[last].abs() > tol {
            return Err(Error::Grid("u' must vanish at the ends".into()));
        }
        Ok(())
    }
}
