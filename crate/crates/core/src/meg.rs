//! Matrix-exponentiated gradient (MEG) online tomography.
//!
//! One iteration measures all `d` outcomes of a randomly chosen basis and
//! moves the estimate along
//!
//! ```text
//! ρ̂_{t+1} = exp(log ρ̂_t − η ∇L_t) / tr exp(log ρ̂_t − η ∇L_t)
//! L_t     = Σ_i (tr(ρ̂_t X_i) − y_i)²
//! ∇L_t    = 2 Σ_i (tr(ρ̂_t X_i) − y_i) X_i
//! ```
//!
//! with `X_i` the projectors of the chosen basis and `y_i` the measured
//! probabilities. The update keeps the estimate a valid density matrix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, log_from_eigen, symmetrize, CMatrix, DensityMatrix, EigenSystem,
    HermitianMatrix, DEFAULT_LOG_FLOOR,
};
use crate::measurement::{MeasurementBasis, MeasurementFamily};
use crate::photon::{measure_iteration, NoiseConfig};
use crate::rng::SimRng;
use crate::states::{evolve, EvolutionSpec, PureState};

const PROBABILITY_SUM_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;
const PHASE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRateSchedule {
    /// `η_t = η`.
    #[default]
    Constant,
    /// `η_t = η / √t` for the `t`-th update.
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MegConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_log_floor")]
    pub log_floor: f64,
    #[serde(default)]
    pub schedule: LearningRateSchedule,
}

fn default_learning_rate() -> f64 {
    5.0
}

fn default_log_floor() -> f64 {
    DEFAULT_LOG_FLOOR
}

impl Default for MegConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_learning_rate(),
            log_floor: default_log_floor(),
            schedule: LearningRateSchedule::Constant,
        }
    }
}

impl MegConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self { learning_rate, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "meg.learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.log_floor.is_finite() && self.log_floor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "meg.log_floor must be positive, got {}",
                self.log_floor
            )));
        }
        Ok(())
    }

    /// Learning rate for the update that produces estimate number `step` (1-based).
    pub fn rate_at(&self, step: usize) -> f64 {
        match self.schedule {
            LearningRateSchedule::Constant => self.learning_rate,
            LearningRateSchedule::InverseSqrt => self.learning_rate / (step.max(1) as f64).sqrt(),
        }
    }
}

/// The running estimate `ρ̂_t` together with its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    estimate: DensityMatrix,
    iteration: usize,
    spectrum: EigenSystem,
}

impl EstimatorState {
    /// Starts from the completely mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            estimate: DensityMatrix::maximally_mixed(dim),
            iteration: 0,
            spectrum: EigenSystem {
                values: vec![1.0 / dim as f64; dim],
                vectors: CMatrix::identity(dim, dim),
            },
        }
    }

    pub fn from_density(estimate: DensityMatrix, iteration: usize) -> Result<Self> {
        let spectrum = eig_hermitian(&estimate.as_hermitian())?;
        Ok(Self { estimate, iteration, spectrum })
    }

    pub fn estimate(&self) -> &DensityMatrix {
        &self.estimate
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn spectrum(&self) -> &EigenSystem {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.estimate.dim()
    }

    /// `tr(ρ̂²)` from the cached spectrum.
    pub fn purity(&self) -> f64 {
        self.spectrum.values.iter().map(|p| p * p).sum()
    }
}

fn check_record(rho: &DensityMatrix, basis: &MeasurementBasis, y: &[f64]) -> Result<()> {
    if basis.dim() != rho.dim() {
        return Err(Error::InvalidInput(format!(
            "basis dimension {} does not match estimate dimension {}",
            basis.dim(),
            rho.dim()
        )));
    }
    if y.len() != basis.dim() {
        return Err(Error::InvalidInput(format!(
            "expected {} probabilities, got {}",
            basis.dim(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("probabilities must be finite".into()));
    }
    let sum: f64 = y.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::InvalidInput(format!("probabilities sum to {sum}, expected 1")));
    }
    Ok(())
}

/// `tr(ρ̂ X_i)` for each projector of `basis`.
pub fn predicted_probabilities(rho: &DensityMatrix, basis: &MeasurementBasis) -> Vec<f64> {
    basis.states().iter().map(|s| rho.expectation(s.amplitudes())).collect()
}

/// `Σ (tr(ρ̂ |ψ⟩⟨ψ|) − y)²` over arbitrary (outcome, probability) pairs.
pub fn outcome_loss(rho: &DensityMatrix, outcomes: &[(&PureState, f64)]) -> f64 {
    outcomes
        .iter()
        .map(|(s, y)| (rho.expectation(s.amplitudes()) - y).powi(2))
        .sum()
}

/// `2 Σ (tr(ρ̂ |ψ⟩⟨ψ|) − y) |ψ⟩⟨ψ|` over arbitrary (outcome, probability) pairs.
pub fn outcome_gradient(rho: &DensityMatrix, outcomes: &[(&PureState, f64)]) -> HermitianMatrix {
    let d = rho.dim();
    let mut g = CMatrix::zeros(d, d);
    for (s, y) in outcomes {
        let v = s.amplitudes();
        let residual = rho.expectation(v) - y;
        g += v * v.adjoint() * num_complex::Complex64::new(2.0 * residual, 0.0);
    }
    HermitianMatrix::from_hermitian_part(&g).expect("square matrix of dimension ≥ 2")
}

fn pair<'a>(basis: &'a MeasurementBasis, y: &[f64]) -> Vec<(&'a PureState, f64)> {
    basis.states().iter().zip(y.iter().copied()).collect()
}

pub fn loss(rho: &DensityMatrix, basis: &MeasurementBasis, y: &[f64]) -> Result<f64> {
    check_record(rho, basis, y)?;
    Ok(outcome_loss(rho, &pair(basis, y)))
}

pub fn gradient(rho: &DensityMatrix, basis: &MeasurementBasis, y: &[f64]) -> Result<HermitianMatrix> {
    check_record(rho, basis, y)?;
    Ok(outcome_gradient(rho, &pair(basis, y)))
}

/// `log ρ̂ − η ∇L`, the exponent of the update.
fn update_exponent(
    state: &EstimatorState,
    basis: &MeasurementBasis,
    y: &[f64],
    cfg: &MegConfig,
) -> Result<HermitianMatrix> {
    let log = log_from_eigen(&state.spectrum, cfg.log_floor)?;
    let grad = gradient(&state.estimate, basis, y)?;
    let eta = cfg.rate_at(state.iteration + 1);
    HermitianMatrix::from_hermitian_part(&(log.matrix() - grad.matrix() * num_complex::Complex64::new(eta, 0.0)))
}

/// One MEG update. The exponent is shifted by its largest eigenvalue before
/// exponentiation, which cancels in the trace normalization.
pub fn meg_step(
    state: &EstimatorState,
    basis: &MeasurementBasis,
    y: &[f64],
    cfg: &MegConfig,
) -> Result<EstimatorState> {
    let iteration = state.iteration + 1;
    let wrap = |e: Error| Error::Step { iteration, source: Box::new(e) };
    cfg.validate().map_err(wrap)?;
    let exponent = update_exponent(state, basis, y, cfg).map_err(wrap)?;
    let eig = eig_hermitian(&exponent).map_err(wrap)?;
    let top = eig.max_value();
    let weights: Vec<f64> = eig.values.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let values: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let spectrum = EigenSystem { values, vectors: eig.vectors };
    let estimate = DensityMatrix::from_raw(symmetrize(&spectrum.reconstruct()));
    Ok(EstimatorState { estimate, iteration, spectrum })
}

fn first_significant(v: &[num_complex::Complex64]) -> usize {
    v.iter().position(|z| z.norm() > PHASE_TOL).unwrap_or(v.len())
}

fn projection_from_spectrum(eig: &EigenSystem) -> PureState {
    let top = eig.max_value();
    let d = eig.dim();
    let best = (0..d)
        .filter(|&k| top - eig.values[k] <= TIE_TOL)
        .min_by_key(|&k| (first_significant(eig.vectors.column(k).as_slice()), k))
        .expect("top eigenvalue is in its own cluster");
    let mut v = eig.vector(best);
    if let Some(lead) = v.iter().copied().find(|z| z.norm() > PHASE_TOL) {
        let rot = lead.conj() / lead.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
    let n = v.norm();
    PureState::normalized(v / num_complex::Complex64::new(n, 0.0)).expect("eigenvector is nonzero")
}

/// Eigenvector of the largest eigenvalue, with its leading amplitude real positive.
pub fn pure_projection(rho: &DensityMatrix) -> Result<PureState> {
    Ok(projection_from_spectrum(&eig_hermitian(&rho.as_hermitian())?))
}

impl EstimatorState {
    pub fn pure_projection(&self) -> PureState {
        projection_from_spectrum(&self.spectrum)
    }
}

/// Per-iteration record of a tracking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub iteration: usize,
    pub basis_index: usize,
    pub basis_label: String,
    /// `1 − |⟨φ_t|ψ_t⟩|²` for the pure projection `φ_t` of `ρ̂_t`.
    pub infidelity: f64,
    pub purity: f64,
    pub p_true: Vec<f64>,
    pub p_pred: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackTrace {
    pub dim: usize,
    /// Computational-basis probabilities of the initial estimate `I/d`.
    pub prior_probabilities: Vec<f64>,
    pub rows: Vec<TrackRow>,
}

impl TrackTrace {
    pub fn infidelities(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.infidelity)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Online tracking of an evolving state.
///
/// For `t = 1..=t_tot`: evolve the prepared state, draw a basis uniformly from
/// `family`, simulate its counts, update the estimate and record how well the
/// pure projection of the estimate matches the prepared state.
pub fn track(
    psi0: &PureState,
    evolution: &EvolutionSpec,
    family: &MeasurementFamily,
    noise: &NoiseConfig,
    cfg: &MegConfig,
    rng: &mut SimRng,
) -> Result<TrackTrace> {
    let d = psi0.dim();
    if evolution.dim() != d || family.dim() != d {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: state {d}, generator {}, measurements {}",
            evolution.dim(),
            family.dim()
        )));
    }
    noise.validate()?;
    cfg.validate()?;

    let mut state = EstimatorState::maximally_mixed(d);
    let prior_probabilities = (0..d).map(|i| state.estimate.matrix()[(i, i)].re).collect();
    let mut rows = Vec::with_capacity(evolution.total_iterations());
    for t in 1..=evolution.total_iterations() {
        let context = |e: Error| match e {
            e @ Error::Step { .. } => e,
            other => Error::Step { iteration: t, source: Box::new(other) },
        };
        let psi_t = evolve(psi0, evolution, t).map_err(context)?;
        let basis_index = rng.random_range(0..family.len());
        let basis = &family.bases()[basis_index];
        let record = measure_iteration(&psi_t, basis, noise, rng).map_err(context)?;
        state = meg_step(&state, basis, &noise.estimator_input(&record), cfg)?;

        let phi = state.pure_projection();
        rows.push(TrackRow {
            iteration: t,
            basis_index,
            basis_label: basis.label().to_string(),
            infidelity: (1.0 - phi.overlap(&psi_t)).max(0.0),
            purity: state.purity(),
            p_true: psi_t.probabilities(),
            p_pred: phi.probabilities(),
        });
    }
    Ok(TrackTrace { dim: d, prior_probabilities, rows })
}
