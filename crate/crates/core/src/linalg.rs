//! Dense complex Hermitian kernel.
//!
//! Everything the estimator needs from linear algebra goes through a single
//! eigendecomposition: the matrix exponential and logarithm are spectral maps,
//! and fidelity is built from two spectral square roots.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Absolute tolerance for Hermiticity, unit trace and positivity checks.
pub const STATE_TOL: f64 = 1e-12;

/// Default eigenvalue floor applied before taking a matrix logarithm.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

const EIG_MAX_ITER: usize = 10_000;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Returns `(m + m†) / 2`.
pub(crate) fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() < 2 {
        return Err(Error::InvalidInput(format!(
            "dimension {} is below the minimum of 2",
            m.nrows()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(m.nrows())
}

/// A d×d complex matrix equal to its conjugate transpose (to [`STATE_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = hermiticity_defect(&m);
        if defect > STATE_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian (max |m_ij - conj(m_ji)| = {defect:e})"
            )));
        }
        Ok(Self(m))
    }

    /// Builds the Hermitian part `(m + m†)/2` of a square matrix.
    pub fn from_hermitian_part(m: &CMatrix) -> Result<Self> {
        check_square(m)?;
        Ok(Self(symmetrize(m)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(CMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&x| c(x)),
        )))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Real Hilbert-Schmidt inner product `tr(self · other)`.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        hs_inner(&self.0, &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * c(s))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }
}

/// `tr(a·b)` for Hermitian `a`, `b` (real by construction).
pub(crate) fn hs_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// A Hermitian, positive-semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        let tr = h.0.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidInput(format!("trace is {tr}, expected 1")));
        }
        let eig = eig_hermitian(&h)?;
        let min = eig.values[0];
        if min < -STATE_TOL {
            return Err(Error::InvalidInput(format!(
                "minimum eigenvalue {min:e} is negative"
            )));
        }
        Ok(Self(h.0))
    }

    /// Wraps a matrix the caller has constructed to satisfy the invariants.
    pub(crate) fn from_raw(m: CMatrix) -> Self {
        Self(m)
    }

    /// The completely mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim) * c(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn as_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.clone())
    }

    /// `⟨v|ρ|v⟩` for a vector `v`.
    pub fn expectation(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `V · diag(f(λ)) · V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let scaled = weighted_columns(&self.vectors, self.values.iter().map(|&l| f(l)));
        scaled * self.vectors.adjoint()
    }

    /// `V · diag(λ) · V†`.
    pub fn reconstruct(&self) -> CMatrix {
        self.map_spectrum(|l| l)
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

fn weighted_columns(v: &CMatrix, weights: impl Iterator<Item = f64>) -> CMatrix {
    let mut out = v.clone();
    for (k, w) in weights.enumerate() {
        out.column_mut(k).scale_mut(w);
    }
    out
}

pub fn eig_hermitian(h: &HermitianMatrix) -> Result<EigenSystem> {
    eig_of_matrix(&h.0)
}

fn eig_of_matrix(m: &CMatrix) -> Result<EigenSystem> {
    let n = m.nrows();
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence);
    }
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(EigenSystem { values, vectors })
}

/// Largest exponent for which `exp` stays finite.
const EXP_LIMIT: f64 = 709.782_712_893_384;

pub fn exp_hermitian(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = eig_hermitian(h)?;
    let top = eig.max_value();
    if top > EXP_LIMIT {
        return Err(Error::Overflow(top));
    }
    Ok(HermitianMatrix(symmetrize(&eig.map_spectrum(f64::exp))))
}

/// Matrix logarithm of a density matrix with eigenvalues clamped below at `floor`.
pub fn log_psd(rho: &DensityMatrix, floor: f64) -> Result<HermitianMatrix> {
    let eig = eig_of_matrix(&rho.0)?;
    log_from_eigen(&eig, floor)
}

pub(crate) fn log_from_eigen(eig: &EigenSystem, floor: f64) -> Result<HermitianMatrix> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "log floor must be a positive finite number, got {floor}"
        )));
    }
    Ok(HermitianMatrix(symmetrize(
        &eig.map_spectrum(|l| l.max(floor).ln()),
    )))
}

/// Eigenvalues below the numerical-rank threshold of the spectrum count as zero.
fn roundoff_cutoff(eig: &EigenSystem) -> f64 {
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    8.0 * f64::EPSILON * eig.dim() as f64 * scale
}

fn clipped_sqrt(l: f64, cutoff: f64) -> f64 {
    if l <= cutoff {
        0.0
    } else {
        l.sqrt()
    }
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = eig_of_matrix(&symmetrize(m))?;
    let cutoff = roundoff_cutoff(&eig);
    Ok(eig.map_spectrum(|l| clipped_sqrt(l, cutoff)))
}

/// Uhlmann fidelity `(tr √(√ρ Ω √ρ))²`, clipped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, omega: &DensityMatrix) -> Result<f64> {
    if rho.dim() != omega.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            rho.dim(),
            omega.dim()
        )));
    }
    let s = psd_sqrt(&rho.0)?;
    let inner = symmetrize(&(&s * &omega.0 * &s));
    let eig = eig_of_matrix(&inner)?;
    let cutoff = roundoff_cutoff(&eig);
    let tr: f64 = eig.values.iter().map(|&l| clipped_sqrt(l, cutoff)).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// `tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.0.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn random_hermitian_raw<R: Rng>(d: usize, scale: f64, rng: &mut R) -> HermitianMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        HermitianMatrix::from_hermitian_part(&(a * c(scale))).unwrap()
    }

    /// Random full-rank density matrix with minimum eigenvalue at least `min_eig`.
    pub fn random_density<R: Rng>(d: usize, min_eig: f64, rng: &mut R) -> DensityMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let g = &a * a.adjoint();
        let g = g.clone() / g.trace();
        let mixed = g * c(1.0 - d as f64 * min_eig) + CMatrix::identity(d, d) * c(min_eig);
        DensityMatrix::new(symmetrize(&mixed)).unwrap()
    }

    pub fn random_unit_vector<R: Rng>(d: usize, rng: &mut R) -> CVector {
        let v = CVector::from_fn(d, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let n = v.norm();
        v / c(n)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Real roots of det(λI − H) for 3×3 Hermitian H by the trigonometric
    /// cubic formula.
    fn charpoly_roots_3(h: &CMatrix) -> [f64; 3] {
        let a = |i: usize, j: usize| h[(i, j)];
        let tr = (a(0, 0) + a(1, 1) + a(2, 2)).re;
        let minor = |i: usize, j: usize| (a(i, i) * a(j, j) - a(i, j) * a(j, i)).re;
        let c1 = minor(0, 1) + minor(0, 2) + minor(1, 2);
        let det = (a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)))
        .re;
        // λ³ − tr λ² + c1 λ − det = 0, substitute λ = x + tr/3.
        let s = tr / 3.0;
        let p = c1 - tr * tr / 3.0;
        let q = -2.0 * s * s * s + c1 * s - det;
        // x³ + p x + q = 0 with p ≤ 0 for real roots.
        let m = 2.0 * (-p / 3.0).max(0.0).sqrt();
        let arg = if m == 0.0 {
            0.0
        } else {
            (3.0 * q / (p * m)).clamp(-1.0, 1.0)
        };
        let theta = arg.acos() / 3.0;
        let mut roots = [0.0; 3];
        for (k, r) in roots.iter_mut().enumerate() {
            *r = s + m * (theta - 2.0 * PI * k as f64 / 3.0).cos();
        }
        roots.sort_by(f64::total_cmp);
        roots
    }

    fn assert_eigensystem(h: &HermitianMatrix, eig: &EigenSystem) {
        let d = h.dim();
        for w in eig.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let gram = eig.vectors.adjoint() * &eig.vectors;
        assert!((gram - CMatrix::identity(d, d)).norm() < 1e-10);
        let err = (eig.reconstruct() - h.matrix()).norm();
        assert!(err <= 1e-9 * h.matrix().norm().max(1.0), "reconstruction error {err:e}");
    }

    #[test]
    fn eig_identity() {
        let eig = eig_hermitian(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eig_generalized_pauli_z() {
        let s = 1.0 / 3f64.sqrt();
        let h = HermitianMatrix::from_real_diagonal(&[s, s, -2.0 * s]);
        let eig = eig_hermitian(&h).unwrap();
        let expected = [-2.0 * s, s, s];
        for (v, e) in eig.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn eig_matches_characteristic_polynomial_roots() {
        let mut r = rng(7);
        for _ in 0..500 {
            let h = random_hermitian_raw(3, 1.0, &mut r);
            let eig = eig_hermitian(&h).unwrap();
            let roots = charpoly_roots_3(h.matrix());
            for (v, root) in eig.values.iter().zip(roots) {
                assert!((v - root).abs() < 1e-9, "{v} vs {root}");
            }
            assert_eigensystem(&h, &eig);
        }
    }

    #[test]
    fn eig_reconstructs_up_to_dim_8() {
        let mut r = rng(8);
        for d in 2..=8 {
            for _ in 0..50 {
                let h = random_hermitian_raw(d, 3.0, &mut r);
                assert_eigensystem(&h, &eig_hermitian(&h).unwrap());
            }
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::InvalidInput(_))));
        assert!(HermitianMatrix::new(CMatrix::identity(1, 1)).is_err());
        assert!(HermitianMatrix::new(CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = exp_hermitian(&HermitianMatrix::zeros(3)).unwrap();
        assert!((e.matrix() - CMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn exp_of_diagonal() {
        let e = exp_hermitian(&HermitianMatrix::from_real_diagonal(&[0.5, -1.0, 2.0])).unwrap();
        for (k, x) in [0.5f64, -1.0, 2.0].iter().enumerate() {
            assert!((e.matrix()[(k, k)].re - x.exp()).abs() < 1e-13);
        }
        assert!(e.matrix().iter().enumerate().all(|(idx, z)| idx % 4 == 0 || z.norm() < 1e-14));
    }

    #[test]
    fn exp_overflow_is_reported() {
        let h = HermitianMatrix::from_real_diagonal(&[800.0, 0.0]);
        assert!(matches!(exp_hermitian(&h), Err(Error::Overflow(_))));
    }

    #[test]
    fn exp_times_exp_negative_is_identity() {
        let mut r = rng(9);
        for _ in 0..200 {
            let h = random_hermitian_raw(3, 1.0, &mut r);
            let h = h.scale(5.0 / eig_hermitian(&h).unwrap().values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            let prod = exp_hermitian(&h).unwrap().into_matrix() * exp_hermitian(&h.scale(-1.0)).unwrap().into_matrix();
            assert!((prod - CMatrix::identity(3, 3)).norm() < 1e-9);
        }
    }

    #[test]
    fn log_of_maximally_mixed() {
        let l = log_psd(&DensityMatrix::maximally_mixed(3), DEFAULT_LOG_FLOOR).unwrap();
        let expected = CMatrix::identity(3, 3) * c((1.0f64 / 3.0).ln());
        assert!((l.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn log_clamps_pure_state() {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = c(1.0);
        let l = log_psd(&DensityMatrix::new(m).unwrap(), 1e-12).unwrap();
        let eig = eig_hermitian(&l).unwrap();
        let floor = 1e-12f64.ln();
        assert!((eig.values[0] - floor).abs() < 1e-12);
        assert!((eig.values[1] - floor).abs() < 1e-12);
        assert!(eig.values[2].abs() < 1e-12);
        assert!((l.matrix()[(0, 0)].re).abs() < 1e-12);
    }

    #[test]
    fn log_rejects_bad_floor() {
        let rho = DensityMatrix::maximally_mixed(2);
        assert!(matches!(log_psd(&rho, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(log_psd(&rho, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn fidelity_basic_cases() {
        let mut r = rng(10);
        let rho = random_density(3, 1e-3, &mut r);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);

        let mut a = CMatrix::zeros(3, 3);
        a[(0, 0)] = c(1.0);
        let mut b = CMatrix::zeros(3, 3);
        b[(1, 1)] = c(1.0);
        let f = fidelity(&DensityMatrix::new(a).unwrap(), &DensityMatrix::new(b).unwrap()).unwrap();
        assert!(f.abs() < 1e-12);

        assert!(fidelity(&DensityMatrix::maximally_mixed(2), &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn fidelity_pure_state_reduction() {
        let mut r = rng(11);
        for d in 2..=5 {
            for _ in 0..50 {
                let rho = random_density(d, 0.0, &mut r);
                let psi = random_unit_vector(d, &mut r);
                let omega = DensityMatrix::new(&psi * psi.adjoint()).unwrap();
                let overlap = rho.expectation(&psi);
                assert!((fidelity(&rho, &omega).unwrap() - overlap).abs() < 1e-9);
                assert!((fidelity(&omega, &rho).unwrap() - overlap).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn purity_cases() {
        assert!((purity(&DensityMatrix::maximally_mixed(3)) - 1.0 / 3.0).abs() < 1e-15);
        let mut r = rng(12);
        let phi = random_unit_vector(3, &mut r);
        let pure = &phi * phi.adjoint();
        assert!((purity(&DensityMatrix::new(pure.clone()).unwrap()) - 1.0).abs() < 1e-12);

        // λ=0.5 mixture: λ² + 2λ(1−λ)/3 + (1−λ)²/3 = 0.5
        let lambda = 0.5;
        let mix = pure * c(lambda) + CMatrix::identity(3, 3) * c((1.0 - lambda) / 3.0);
        let direct = (&mix * &mix).trace().re;
        let closed = lambda * lambda + 2.0 * lambda * (1.0 - lambda) / 3.0 + (1.0 - lambda).powi(2) / 3.0;
        assert!((closed - 0.5).abs() < 1e-15);
        assert!((direct - closed).abs() < 1e-12);
        assert!((purity(&DensityMatrix::new(mix).unwrap()) - closed).abs() < 1e-12);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMatrix::identity(3, 3)).is_err());
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(DensityMatrix::new(m).is_err());
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(seed in any::<u64>(), d in 2usize..6) {
            let mut r = rng(seed);
            let rho = random_density(d, 1e-6, &mut r);
            let back = exp_hermitian(&log_psd(&rho, 1e-12).unwrap()).unwrap();
            prop_assert!((back.matrix() - rho.matrix()).norm() < 1e-9);
        }

        #[test]
        fn fidelity_symmetric_and_bounded(seed in any::<u64>(), d in 2usize..6) {
            let mut r = rng(seed);
            let a = random_density(d, 0.0, &mut r);
            let b = random_density(d, 0.0, &mut r);
            let fab = fidelity(&a, &b).unwrap();
            let fba = fidelity(&b, &a).unwrap();
            prop_assert!((0.0..=1.0).contains(&fab));
            prop_assert!((fab - fba).abs() < 1e-9);
        }

        #[test]
        fn outputs_are_hermitian(seed in any::<u64>(), d in 2usize..8) {
            let mut r = rng(seed);
            let h = random_hermitian_raw(d, 1.0, &mut r);
            prop_assert!(hermiticity_defect(exp_hermitian(&h).unwrap().matrix()) <= STATE_TOL);
            let rho = random_density(d, 0.0, &mut r);
            prop_assert!(hermiticity_defect(log_psd(&rho, 1e-12).unwrap().matrix()) <= STATE_TOL);
        }
    }
}
