//! Pointwise matrix identities on `R^{2m}` with the standard complex structure
//! `J e_i = e_{m+i}`: the skew-Hermitian Ricci cancellation, the unitary-frame
//! pairing identity and the trace and orthogonality facts for J-anti-invariant
//! symmetric tensors. Indices are zero-based, so the partner of `i < m` is `i + m`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking block structure of an input.
const STRUCTURE_TOLERANCE: f64 = 1e-12;
/// Contract bound for the randomized identities, relative to their scale.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Agreement required between the two expressions of the skew pairing.
pub const EXPRESSION_TOLERANCE: f64 = 1e-13;
/// Bound for the trace and invariant-pairing facts.
pub const FACT_TOLERANCE: f64 = 1e-13;

/// `J` as a real `2m × 2m` matrix.
pub fn complex_structure(m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(m + i, i)] = 1.0;
        j[(i, m + i)] = -1.0;
    }
    j
}

fn max_abs(h: &DMatrix<f64>) -> f64 {
    h.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn half_dim(h: &DMatrix<f64>) -> Result<usize> {
    if h.nrows() != h.ncols() || h.nrows() == 0 || !h.nrows().is_multiple_of(2) {
        return Err(Error::Config(format!(
            "expected a square matrix of even positive size, got {}×{}",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(h.nrows() / 2)
}

fn check_symmetric(h: &DMatrix<f64>) -> Result<()> {
    let tol = STRUCTURE_TOLERANCE * max_abs(h).max(f64::MIN_POSITIVE);
    for i in 0..h.nrows() {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > tol {
                return Err(Error::Config(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Diagonalized Ricci eigenvalues `c` (with `c_{m+i} = c_i`) and a symmetric `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianModel {
    pub m: usize,
    pub c: Vec<f64>,
    pub h: DMatrix<f64>,
}

impl HermitianModel {
    /// Checks shape, symmetry and the doubling of `c`; `h` may have any J-type.
    pub fn new(c: Vec<f64>, h: DMatrix<f64>) -> Result<Self> {
        let m = half_dim(&h)?;
        if c.len() != 2 * m {
            return Err(Error::Config(format!("expected {} eigenvalues, got {}", 2 * m, c.len())));
        }
        if let Some(i) = (0..m).find(|&i| c[i] != c[m + i]) {
            return Err(Error::Config(format!("eigenvalues are not doubled at index {i}")));
        }
        check_symmetric(&h)?;
        Ok(Self { m, c, h })
    }

    pub fn j(&self) -> DMatrix<f64> {
        complex_structure(self.m)
    }

    /// First violated block condition `h_{ij} = −h_{i+m,j+m}`, `h_{i,j+m} = h_{i+m,j}`.
    pub fn block_violation(&self) -> Option<(usize, usize)> {
        let (m, h) = (self.m, &self.h);
        let tol = STRUCTURE_TOLERANCE * max_abs(h).max(f64::MIN_POSITIVE);
        for i in 0..m {
            for j in 0..m {
                if (h[(i, j)] + h[(i + m, j + m)]).abs() > tol {
                    return Some((i, j));
                }
                if (h[(i, j + m)] - h[(i + m, j)]).abs() > tol {
                    return Some((i, j + m));
                }
            }
        }
        None
    }

    /// `‖h‖_F² · ‖c‖_∞`.
    pub fn scale(&self) -> f64 {
        let cmax = self.c.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        self.h.norm_squared() * cmax
    }
}

/// The two sides of the skew-Hermitian cancellation, kept separate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewPairing {
    /// `Σ c_i h_{ij}²`, computed as the Frobenius pairing of `C h` with `h`.
    pub quadratic: f64,
    /// `2 Σ_{i,j<m} c_j (h_{i+m,j} h_{i,j+m} − h_{ij} h_{i+m,j+m})`.
    pub double_sum: f64,
    /// `quadratic − double_sum`.
    pub value: f64,
    pub scale: f64,
}

impl SkewPairing {
    /// `|value| / scale`, zero for `h = 0`.
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.value.abs()
        } else {
            self.value.abs() / self.scale
        }
    }
}

/// `(Ric∘h − h∘iρ, h)` for a skew-Hermitian `h`; rejects inputs that break
/// the block conditions.
pub fn skew_pairing(model: &HermitianModel) -> Result<SkewPairing> {
    if let Some((i, j)) = model.block_violation() {
        return Err(Error::BlockCondition(i, j));
    }
    Ok(skew_pairing_unchecked(model))
}

/// Same evaluation without the block check, for negative controls.
pub fn skew_pairing_unchecked(model: &HermitianModel) -> SkewPairing {
    let (m, h, c) = (model.m, &model.h, &model.c);
    let ch = DMatrix::from_fn(2 * m, 2 * m, |i, j| c[i] * h[(i, j)]);
    let quadratic = ch.dot(h);
    let mut double_sum = 0.0;
    for j in 0..m {
        for i in 0..m {
            double_sum += c[j] * (h[(i + m, j)] * h[(i, j + m)] - h[(i, j)] * h[(i + m, j + m)]);
        }
    }
    double_sum *= 2.0;
    SkewPairing {
        quadratic,
        double_sum,
        value: quadratic - double_sum,
        scale: model.scale(),
    }
}

/// J-anti-invariance defect `‖JᵀhJ + h‖_max / ‖h‖_max`.
pub fn anti_invariance_defect(h: &DMatrix<f64>) -> Result<f64> {
    let m = half_dim(h)?;
    let j = complex_structure(m);
    let d = j.transpose() * h * &j + h;
    let peak = max_abs(h);
    Ok(if peak == 0.0 { 0.0 } else { max_abs(&d) / peak })
}

fn check_anti_invariant(h: &DMatrix<f64>) -> Result<usize> {
    let m = half_dim(h)?;
    check_symmetric(h)?;
    let defect = anti_invariance_defect(h)?;
    if defect > STRUCTURE_TOLERANCE {
        return Err(Error::NotAntiInvariant(defect));
    }
    Ok(m)
}

/// Columns `X̄_i = (e_i + √−1 J e_i)/√2` of the conjugate unitary frame.
pub fn conjugate_frame(m: usize) -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = DMatrix::zeros(2 * m, m);
    for i in 0..m {
        v[(i, i)] = Complex64::new(s, 0.0);
        v[(m + i, i)] = Complex64::new(0.0, s);
    }
    v
}

/// `H_{ij} = h(X̄_i, X̄_j)` in the frame whose conjugate columns are `frame`.
pub fn frame_matrix(h: &DMatrix<f64>, frame: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let hc = h.map(|x| Complex64::new(x, 0.0));
    frame.transpose() * hc * frame
}

/// Outcome of one frame pairing comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameCheck {
    /// `κ · Re Σ H_{ij} conj(H̃_{ij})`.
    pub complex: f64,
    /// `Σ h_{ab} h̃_{ab}`.
    pub real: f64,
    pub residual: f64,
    /// `‖h‖_F ‖h̃‖_F`.
    pub scale: f64,
}

/// The frame pairing with its normalization constant frozen after calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePairing {
    pub kappa: f64,
}

impl FramePairing {
    /// Fixes `κ` on the rank-one probe `diag(1, −1)` with `m = 1`.
    pub fn calibrate() -> Self {
        let probe = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        let frame = conjugate_frame(1);
        let hp = frame_matrix(&probe, &frame);
        let complex = hp.iter().map(|z| z.norm_sqr()).sum::<f64>();
        Self {
            kappa: probe.norm_squared() / complex,
        }
    }

    /// Compares both pairings in the standard unitary frame.
    pub fn check(&self, h: &DMatrix<f64>, other: &DMatrix<f64>) -> Result<FrameCheck> {
        let m = check_anti_invariant(h)?;
        self.check_in_frame(h, other, &DMatrix::identity(m, m))
    }

    /// Compares both pairings after the unitary change of frame `X → U X`.
    pub fn check_in_frame(
        &self,
        h: &DMatrix<f64>,
        other: &DMatrix<f64>,
        unitary: &DMatrix<Complex64>,
    ) -> Result<FrameCheck> {
        let m = check_anti_invariant(h)?;
        if check_anti_invariant(other)? != m || unitary.shape() != (m, m) {
            return Err(Error::Config("frame pairing inputs have mismatched sizes".into()));
        }
        let frame = conjugate_frame(m) * unitary.map(|z| z.conj());
        let a = frame_matrix(h, &frame);
        let b = frame_matrix(other, &frame);
        let complex = self.kappa * a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum::<f64>();
        let real = h.dot(other);
        Ok(FrameCheck {
            complex,
            real,
            residual: (complex - real).abs(),
            scale: h.norm() * other.norm(),
        })
    }
}

/// Trace of an anti-invariant `h` and its pairing with an invariant `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntiInvariantFacts {
    pub trace: f64,
    pub inv_pairing: f64,
    pub h_norm: f64,
    pub k_norm: f64,
}

impl AntiInvariantFacts {
    pub fn holds(&self) -> bool {
        self.trace.abs() <= FACT_TOLERANCE * self.h_norm
            && self.inv_pairing.abs() <= FACT_TOLERANCE * self.h_norm * self.k_norm
    }
}

/// No structure is enforced, so perturbed inputs expose a nonzero trace.
pub fn anti_invariant_facts(h: &DMatrix<f64>, k: &DMatrix<f64>) -> AntiInvariantFacts {
    AntiInvariantFacts {
        trace: h.trace(),
        inv_pairing: h.dot(k),
        h_norm: h.norm(),
        k_norm: k.norm(),
    }
}

fn random_block<R: Rng>(m: usize, rng: &mut R, symmetric: bool) -> DMatrix<f64> {
    let mut a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    if symmetric {
        a = (&a + a.transpose()) * 0.5;
    } else {
        a = (&a - a.transpose()) * 0.5;
    }
    a
}

fn assemble_blocks(p: &DMatrix<f64>, q: &DMatrix<f64>, lower: f64, last: f64) -> DMatrix<f64> {
    let m = p.nrows();
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    h.view_mut((0, 0), (m, m)).copy_from(p);
    h.view_mut((0, m), (m, m)).copy_from(q);
    h.view_mut((m, 0), (m, m)).copy_from(&(q * lower));
    h.view_mut((m, m), (m, m)).copy_from(&(p * last));
    h
}

/// `[[P, Q], [Q, −P]]` with `P, Q` symmetric.
pub fn random_anti_invariant<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let p = random_block(m, rng, true);
    let q = random_block(m, rng, true);
    assemble_blocks(&p, &q, 1.0, -1.0)
}

/// `[[P, Q], [−Q, P]]` with `P` symmetric and `Q` antisymmetric.
pub fn random_invariant<R: Rng>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let p = random_block(m, rng, true);
    let q = random_block(m, rng, false);
    assemble_blocks(&p, &q, -1.0, 1.0)
}

pub fn random_doubled_eigenvalues<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let half: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
    half.iter().chain(&half).copied().collect()
}

/// A unitary from the QR factor of a random complex matrix.
pub fn random_unitary<R: Rng>(m: usize, rng: &mut R) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(m, m, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    a.qr().q()
}

/// Summary emitted by the randomized suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub trials: usize,
    /// Largest scale-relative residual over all operations and trials.
    pub max_residual: f64,
    pub seed: u64,
}

/// Per-operation maxima behind a [`FuzzReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FuzzBreakdown {
    pub skew_pairing: f64,
    /// Largest `|quadratic − double_sum|` relative to scale, which only
    /// vanishes because of the block structure.
    pub skew_expressions: f64,
    pub frame_pairing: f64,
    pub frame_invariance: f64,
    pub trace: f64,
    pub inv_pairing: f64,
}

impl FuzzBreakdown {
    pub fn max(&self) -> f64 {
        [
            self.skew_pairing,
            self.skew_expressions,
            self.frame_pairing,
            self.frame_invariance,
            self.trace,
            self.inv_pairing,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn relative(x: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        x.abs()
    } else {
        x.abs() / scale
    }
}

/// Runs `trials` random instances of every identity, cycling `m` through 1..=4.
pub fn fuzz(trials: usize, seed: u64) -> Result<(FuzzReport, FuzzBreakdown)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairing = FramePairing::calibrate();
    let mut b = FuzzBreakdown::default();
    for trial in 0..trials {
        let m = 1 + trial % 4;
        let h = random_anti_invariant(m, &mut rng);
        let model = HermitianModel::new(random_doubled_eigenvalues(m, &mut rng), h.clone())?;
        let skew = skew_pairing(&model)?;
        b.skew_pairing = b.skew_pairing.max(skew.relative());
        b.skew_expressions = b
            .skew_expressions
            .max(relative(skew.quadratic - skew.double_sum, skew.scale));

        let other = random_anti_invariant(m, &mut rng);
        let plain = pairing.check(&h, &other)?;
        let u = random_unitary(m, &mut rng);
        let rotated = pairing.check_in_frame(&h, &other, &u)?;
        b.frame_pairing = b
            .frame_pairing
            .max(relative(plain.residual, plain.scale))
            .max(relative(rotated.residual, rotated.scale));
        b.frame_invariance = b
            .frame_invariance
            .max(relative(plain.complex - rotated.complex, plain.scale));

        let k = random_invariant(m, &mut rng);
        let facts = anti_invariant_facts(&h, &k);
        b.trace = b.trace.max(relative(facts.trace, facts.h_norm));
        b.inv_pairing = b.inv_pairing.max(relative(facts.inv_pairing, facts.h_norm * facts.k_norm));
    }
    Ok((
        FuzzReport {
            trials,
            max_residual: b.max(),
            seed,
        },
        b,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        for m in 1..=4 {
            let j = complex_structure(m);
            assert_eq!(&j * &j, -DMatrix::<f64>::identity(2 * m, 2 * m));
        }
    }

    #[test]
    fn kappa_is_two() {
        assert!((FramePairing::calibrate().kappa - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_inputs_give_zero() {
        let model = HermitianModel::new(vec![1.0, 1.0], DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(skew_pairing(&model).unwrap().value, 0.0);
        let z = DMatrix::zeros(2, 2);
        assert_eq!(FramePairing::calibrate().check(&z, &z).unwrap().residual, 0.0);
    }
}
