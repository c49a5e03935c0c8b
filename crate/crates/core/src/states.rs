//! Pure states, random generators and stroboscopic unitary evolution.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, CMatrix, CVector, DensityMatrix, EigenSystem, HermitianMatrix};
use crate::rng::SimRng;

const NORM_TOL: f64 = 1e-12;

/// Unit-norm complex amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState(CVector);

impl PureState {
    /// Accepts amplitudes whose squared norm is 1 to within `1e-12`.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "state dimension {} is below the minimum of 2",
                amplitudes.len()
            )));
        }
        let n2 = amplitudes.norm_squared();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!("squared norm is {n2}, expected 1")));
        }
        Ok(Self(amplitudes))
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero or non-finite vector".into()));
        }
        Self::new(amplitudes / Complex64::new(n, 0.0))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Self(v)
    }

    pub(crate) fn from_raw(v: CVector) -> Self {
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Computational-basis probabilities `|⟨i|ψ⟩|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {d}")));
    }
    Ok(())
}

/// Haar-random pure state: i.i.d. standard normal real and imaginary parts, normalized.
pub fn haar_random_pure(d: usize, rng: &mut SimRng) -> Result<PureState> {
    check_dim(d)?;
    let v = CVector::from_fn(d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    PureState::normalized(v)
}

/// GUE draw `(A + A†)/2` rescaled to unit spectral norm.
pub fn random_hermitian(d: usize, rng: &mut SimRng) -> Result<HermitianMatrix> {
    check_dim(d)?;
    let a = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let h = HermitianMatrix::from_hermitian_part(&a)?;
    let eig = eig_hermitian(&h)?;
    let norm = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return Err(Error::InvalidInput("random Hermitian draw was exactly zero".into()));
    }
    Ok(h.scale(1.0 / norm))
}

/// `(1/√d)·diag(1, …, 1, −(d−1))`.
pub fn pauli_z_general(d: usize) -> Result<HermitianMatrix> {
    check_dim(d)?;
    let s = 1.0 / (d as f64).sqrt();
    let mut diag = vec![s; d];
    diag[d - 1] = -((d - 1) as f64) * s;
    Ok(HermitianMatrix::from_real_diagonal(&diag))
}

/// `|ψ⟩⟨ψ|`.
pub fn density_of(psi: &PureState) -> DensityMatrix {
    DensityMatrix::from_raw(psi.amplitudes() * psi.amplitudes().adjoint())
}

/// Time evolution `|ψ_t⟩ = exp(−i σ ω t)|ψ_0⟩` with integer iteration index `t`.
#[derive(Debug, Clone)]
pub struct EvolutionSpec {
    generator: HermitianMatrix,
    rate: f64,
    total_iterations: usize,
    spectrum: EigenSystem,
}

impl EvolutionSpec {
    pub fn new(generator: HermitianMatrix, rate: f64, total_iterations: usize) -> Result<Self> {
        if total_iterations == 0 {
            return Err(Error::InvalidParameter("total_iterations must be positive".into()));
        }
        if !rate.is_finite() {
            return Err(Error::InvalidParameter(format!("rate must be finite, got {rate}")));
        }
        let spectrum = eig_hermitian(&generator)?;
        Ok(Self { generator, rate, total_iterations, spectrum })
    }

    /// Uses `ω = 1.3 / t_tot`, which takes the state out to a fidelity minimum and back.
    pub fn with_default_rate(generator: HermitianMatrix, total_iterations: usize) -> Result<Self> {
        if total_iterations == 0 {
            return Err(Error::InvalidParameter("total_iterations must be positive".into()));
        }
        Self::new(generator, 1.3 / total_iterations as f64, total_iterations)
    }

    /// Identity evolution.
    pub fn stationary(dim: usize, total_iterations: usize) -> Result<Self> {
        Self::with_default_rate(HermitianMatrix::zeros(dim), total_iterations)
    }

    pub fn generator(&self) -> &HermitianMatrix {
        &self.generator
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }
}

pub fn evolve(psi0: &PureState, spec: &EvolutionSpec, t: usize) -> Result<PureState> {
    if psi0.dim() != spec.dim() {
        return Err(Error::InvalidInput(format!(
            "state dimension {} does not match generator dimension {}",
            psi0.dim(),
            spec.dim()
        )));
    }
    if t > spec.total_iterations {
        return Err(Error::InvalidParameter(format!(
            "iteration {t} exceeds total_iterations {}",
            spec.total_iterations
        )));
    }
    if t == 0 || spec.generator.is_zero() {
        return Ok(psi0.clone());
    }
    let eig = &spec.spectrum;
    let angle = spec.rate * t as f64;
    // V · diag(e^{−iλωt}) · V† |ψ0⟩
    let mut coeffs = eig.vectors.adjoint() * psi0.amplitudes();
    for (k, z) in coeffs.iter_mut().enumerate() {
        *z *= Complex64::from_polar(1.0, -eig.values[k] * angle);
    }
    Ok(PureState::from_raw(&eig.vectors * coeffs))
}
