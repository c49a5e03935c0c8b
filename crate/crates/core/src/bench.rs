//! Ensemble experiments and their summary statistics.
//!
//! An ensemble is `n_states` Haar-random initial states, each tracked
//! `n_noise_repeats` times with fresh measurement noise. Every run draws from
//! its own stream derived from `(master_seed, state, repeat)`, so results do not
//! depend on how runs are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{MeasurementFamily, Scheme};
use crate::meg::{track, MegConfig, TrackTrace};
use crate::photon::NoiseConfig;
use crate::rng::{derive_seed, rng_from_seed};
use crate::states::{haar_random_pure, pauli_z_general, random_hermitian, EvolutionSpec, PureState};
use crate::linalg::HermitianMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionKind {
    #[default]
    Stationary,
    PauliZ,
    RandomHermitian,
}

/// How many noise repeats a state gets when `n_noise_repeats` is not given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// One run per state.
    #[default]
    Experiment,
    /// Twenty noise realizations per state.
    Simulation,
}

impl RunMode {
    pub fn default_repeats(self) -> usize {
        match self {
            RunMode::Experiment => 1,
            RunMode::Simulation => 20,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::Mub
}
fn default_t_tot() -> usize {
    300
}
fn default_n_states() -> usize {
    50
}
fn default_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dim: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub evolution: EvolutionKind,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub meg: MegConfig,
    #[serde(default = "default_t_tot")]
    pub t_tot: usize,
    #[serde(default = "default_n_states")]
    pub n_states: usize,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_noise_repeats: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    /// Infidelity threshold for the convergence-speed statistic.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Iterations excluded from the mean infidelity; when absent each trace
    /// uses its own threshold-crossing iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
}

impl ScenarioConfig {
    /// Qutrit defaults: MUBs, stationary, high signal.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            scheme: default_scheme(),
            evolution: EvolutionKind::Stationary,
            noise: NoiseConfig::default(),
            meg: MegConfig::default(),
            t_tot: default_t_tot(),
            n_states: default_n_states(),
            mode: RunMode::Experiment,
            n_noise_repeats: None,
            master_seed: 0,
            threshold: default_threshold(),
            burn_in: None,
        }
    }

    pub fn n_noise_repeats(&self) -> usize {
        self.n_noise_repeats.unwrap_or_else(|| self.mode.default_repeats())
    }

    /// Copy with every defaulted-by-mode field written out.
    pub fn resolved(&self) -> Self {
        Self { n_noise_repeats: Some(self.n_noise_repeats()), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.t_tot == 0 {
            return bad("t_tot must be positive".into());
        }
        if self.n_states == 0 {
            return bad("n_states must be at least 1".into());
        }
        if self.n_noise_repeats() == 0 {
            return bad("n_noise_repeats must be at least 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if let Some(b) = self.burn_in {
            if b >= self.t_tot {
                return bad(format!("burn_in {b} must be below t_tot {}", self.t_tot));
            }
        }
        self.noise.validate()?;
        self.meg.validate()
    }

    pub fn state_seed(&self, state: usize) -> u64 {
        derive_seed(self.master_seed, &[0, state as u64])
    }

    pub fn run_seed(&self, state: usize, repeat: usize) -> u64 {
        derive_seed(self.master_seed, &[1, state as u64, repeat as u64])
    }

    /// Initial state and evolution for ensemble member `state`.
    pub fn prepare_state(&self, state: usize) -> Result<(PureState, EvolutionSpec)> {
        let mut rng = rng_from_seed(self.state_seed(state));
        let psi0 = haar_random_pure(self.dim, &mut rng)?;
        let generator = match self.evolution {
            EvolutionKind::Stationary => HermitianMatrix::zeros(self.dim),
            EvolutionKind::PauliZ => pauli_z_general(self.dim)?,
            EvolutionKind::RandomHermitian => random_hermitian(self.dim, &mut rng)?,
        };
        Ok((psi0, EvolutionSpec::with_default_rate(generator, self.t_tot)?))
    }

    /// One tracking run of ensemble member `(state, repeat)`.
    pub fn run_one(&self, family: &MeasurementFamily, state: usize, repeat: usize) -> Result<TrackTrace> {
        let (psi0, evolution) = self.prepare_state(state)?;
        let mut rng = rng_from_seed(self.run_seed(state, repeat));
        track(&psi0, &evolution, family, &self.noise, &self.meg, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub state_index: usize,
    pub repeat_index: usize,
    pub seed: u64,
    pub outcome: Result<TrackTrace>,
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every `(state, repeat)` member, in parallel, returning them in
/// `(state, repeat)` order. A failing run is reported in place and does not
/// stop the others.
pub fn run_ensemble(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<Vec<EnsembleRun>> {
    cfg.validate()?;
    let family = MeasurementFamily::build(cfg.scheme, cfg.dim)?;
    let repeats = cfg.n_noise_repeats();
    let members: Vec<(usize, usize)> = (0..cfg.n_states)
        .flat_map(|s| (0..repeats).map(move |r| (s, r)))
        .collect();
    with_pool(jobs, || {
        members
            .par_iter()
            .map(|&(s, r)| EnsembleRun {
                state_index: s,
                repeat_index: r,
                seed: cfg.run_seed(s, r),
                outcome: cfg.run_one(&family, s, r).map_err(|e| Error::Run {
                    state: s,
                    repeat: r,
                    source: Box::new(e),
                }),
            })
            .collect()
    })
}

/// First iteration whose infidelity is below `threshold`.
pub fn iterations_to_threshold(trace: &TrackTrace, threshold: f64) -> Option<usize> {
    trace.rows.iter().find(|r| r.infidelity < threshold).map(|r| r.iteration)
}

/// Mean infidelity over iterations after `burn_in`.
pub fn mean_infidelity(trace: &TrackTrace, burn_in: usize) -> Result<f64> {
    let tail: Vec<f64> = trace
        .rows
        .iter()
        .filter(|r| r.iteration > burn_in)
        .map(|r| r.infidelity)
        .collect();
    if tail.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "burn_in {burn_in} leaves no iterations of a {}-iteration trace",
            trace.len()
        )));
    }
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Burn-in used for a trace: fixed if given, else the threshold crossing
/// (whole trace when the threshold is never reached).
fn trace_burn_in(trace: &TrackTrace, threshold: f64, burn_in: Option<usize>) -> usize {
    let last = trace.rows.last().map_or(0, |r| r.iteration);
    match burn_in {
        Some(b) => b,
        None => iterations_to_threshold(trace, threshold).map_or(0, |t| t.min(last.saturating_sub(1))),
    }
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self { q25: quantile(&v, 0.25), median: quantile(&v, 0.5), q75: quantile(&v, 0.75) }
    }
}

/// Quartiles of a statistic that some traces never attain. Censored traces
/// sort above every observed value; a quartile that falls among them is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredQuartiles {
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub reached: usize,
    pub censored: usize,
    pub censored_fraction: f64,
}

impl CensoredQuartiles {
    pub fn of(values: &[Option<f64>]) -> Self {
        let mut v: Vec<f64> = values.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            if v[hi].is_infinite() {
                None
            } else {
                Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
            }
        };
        let censored = values.iter().filter(|x| x.is_none()).count();
        Self {
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            reached: values.len() - censored,
            censored,
            censored_fraction: censored as f64 / values.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub n_traces: usize,
    pub threshold: f64,
    pub burn_in: Option<usize>,
    pub iterations: Vec<usize>,
    pub median: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
    pub iterations_to_threshold: CensoredQuartiles,
    /// Per-trace mean infidelity after the burn-in.
    pub mean_infidelity: Quartiles,
    /// Per-trace mean infidelity over the whole trace.
    pub mean_infidelity_full: Quartiles,
    /// Per-trace mean infidelity over the second half of the trace.
    pub tail_infidelity: Quartiles,
    /// Median purity of the final estimates.
    pub median_purity: f64,
}

pub fn aggregate(traces: &[TrackTrace], threshold: f64, burn_in: Option<usize>) -> Result<AggregateStats> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot aggregate an empty set of traces".into()))?;
    let len = first.len();
    if len == 0 || traces.iter().any(|t| t.len() != len) {
        return Err(Error::InvalidInput("traces must be non-empty and of equal length".into()));
    }
    let iterations: Vec<usize> = first.rows.iter().map(|r| r.iteration).collect();
    let mut median = Vec::with_capacity(len);
    let mut q25 = Vec::with_capacity(len);
    let mut q75 = Vec::with_capacity(len);
    for k in 0..len {
        let column: Vec<f64> = traces.iter().map(|t| t.rows[k].infidelity).collect();
        let q = Quartiles::of(&column);
        median.push(q.median);
        q25.push(q.q25);
        q75.push(q.q75);
    }

    let crossings: Vec<Option<f64>> = traces
        .iter()
        .map(|t| iterations_to_threshold(t, threshold).map(|i| i as f64))
        .collect();
    let per_trace = |f: &dyn Fn(&TrackTrace) -> Result<f64>| -> Result<Vec<f64>> {
        traces.iter().map(f).collect()
    };
    let mean_burn = per_trace(&|t| mean_infidelity(t, trace_burn_in(t, threshold, burn_in)))?;
    let mean_full = per_trace(&|t| mean_infidelity(t, 0))?;
    let tail = per_trace(&|t| mean_infidelity(t, t.len() / 2))?;
    let purities: Vec<f64> = traces.iter().map(|t| t.rows[len - 1].purity).collect();

    Ok(AggregateStats {
        n_traces: traces.len(),
        threshold,
        burn_in,
        iterations,
        median,
        q25,
        q75,
        iterations_to_threshold: CensoredQuartiles::of(&crossings),
        mean_infidelity: Quartiles::of(&mean_burn),
        mean_infidelity_full: Quartiles::of(&mean_full),
        tail_infidelity: Quartiles::of(&tail),
        median_purity: Quartiles::of(&purities).median,
    })
}

/// Successful traces of an ensemble plus the failures, each with context.
pub fn split_runs(runs: Vec<EnsembleRun>) -> (Vec<TrackTrace>, Vec<Error>) {
    let mut traces = Vec::with_capacity(runs.len());
    let mut failures = Vec::new();
    for run in runs {
        match run.outcome {
            Ok(t) => traces.push(t),
            Err(e) => failures.push(e),
        }
    }
    (traces, failures)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepLevel {
    pub level: f64,
    /// Signal over all noise sources.
    pub snr: f64,
    /// Signal over the extra background alone.
    pub extra_snr: f64,
    pub runs: Vec<EnsembleRun>,
    pub stats: AggregateStats,
}

/// Runs the base scenario once per extra-background level.
pub fn noise_sweep(base: &ScenarioConfig, levels: &[f64], jobs: Option<usize>) -> Result<Vec<SweepLevel>> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("noise sweep needs at least one level".into()));
    }
    if let Some(bad) = levels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidParameter(format!("noise level {bad} must be non-negative")));
    }
    levels
        .iter()
        .map(|&level| {
            let mut cfg = base.clone();
            cfg.noise.extra_background_rate = level;
            let runs = run_ensemble(&cfg, jobs)?;
            let traces: Vec<TrackTrace> =
                runs.iter().filter_map(|r| r.outcome.as_ref().ok().cloned()).collect();
            let stats = aggregate(&traces, cfg.threshold, cfg.burn_in)?;
            Ok(SweepLevel { level, snr: cfg.noise.snr(), extra_snr: cfg.noise.extra_snr(), runs, stats })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meg::TrackRow;
    use proptest::prelude::*;

    fn trace_from(infidelities: &[f64]) -> TrackTrace {
        TrackTrace {
            dim: 3,
            prior_probabilities: vec![1.0 / 3.0; 3],
            rows: infidelities
                .iter()
                .enumerate()
                .map(|(k, &inf)| TrackRow {
                    iteration: k + 1,
                    basis_index: 0,
                    basis_label: "mub0".into(),
                    infidelity: inf,
                    purity: 1.0 - inf,
                    p_true: vec![1.0, 0.0, 0.0],
                    p_pred: vec![1.0, 0.0, 0.0],
                })
                .collect(),
        }
    }

    fn small(n_states: usize, t_tot: usize) -> ScenarioConfig {
        ScenarioConfig { n_states, t_tot, master_seed: 11, ..ScenarioConfig::new(3) }
    }

    #[test]
    fn threshold_crossing() {
        let t = trace_from(&[0.5, 0.2, 0.08, 0.3, 0.01]);
        assert_eq!(iterations_to_threshold(&t, 0.10), Some(3));
        assert_eq!(iterations_to_threshold(&trace_from(&[0.5, 0.4]), 0.10), None);
    }

    #[test]
    fn mean_infidelity_cases() {
        let t = trace_from(&[0.05; 10]);
        assert!((mean_infidelity(&t, 0).unwrap() - 0.05).abs() < 1e-15);
        let t = trace_from(&[0.5, 0.2, 0.08, 0.3]);
        assert_eq!(mean_infidelity(&t, 3).unwrap(), 0.3);
        assert!(mean_infidelity(&t, 4).is_err());
    }

    #[test]
    fn aggregate_single_trace() {
        let t = trace_from(&[0.5, 0.2, 0.08]);
        let s = aggregate(std::slice::from_ref(&t), 0.1, None).unwrap();
        assert_eq!(s.median, vec![0.5, 0.2, 0.08]);
        assert_eq!(s.q25, s.median);
        assert_eq!(s.q75, s.median);
        assert_eq!(s.iterations_to_threshold.median, Some(3.0));
        assert_eq!(s.mean_infidelity.median, 0.08);
    }

    #[test]
    fn aggregate_quartile_convention() {
        let traces = [trace_from(&[0.1; 4]), trace_from(&[0.3; 4]), trace_from(&[0.2; 4])];
        let s = aggregate(&traces, 0.05, Some(0)).unwrap();
        for k in 0..4 {
            assert!((s.median[k] - 0.2).abs() < 1e-15);
            assert!((s.q25[k] - 0.15).abs() < 1e-15);
            assert!((s.q75[k] - 0.25).abs() < 1e-15);
        }
        assert_eq!(s.iterations_to_threshold.censored, 3);
        assert_eq!(s.iterations_to_threshold.median, None);
        assert!(aggregate(&[], 0.1, None).is_err());
        assert!(aggregate(&[trace_from(&[0.1]), trace_from(&[0.1, 0.2])], 0.1, None).is_err());
    }

    #[test]
    fn censored_quartiles() {
        let q = CensoredQuartiles::of(&[Some(2.0), Some(4.0), None, Some(6.0), Some(3.0)]);
        assert_eq!(q.median, Some(4.0));
        assert_eq!(q.q25, Some(3.0));
        assert_eq!(q.q75, Some(6.0));
        assert_eq!(q.censored, 1);
        assert!((q.censored_fraction - 0.2).abs() < 1e-15);
        let q = CensoredQuartiles::of(&[Some(2.0), None, None]);
        assert_eq!(q.median, None);
    }

    #[test]
    fn ensemble_size_and_order() {
        let cfg = ScenarioConfig { n_noise_repeats: Some(3), ..small(4, 5) };
        let runs = run_ensemble(&cfg, None).unwrap();
        assert_eq!(runs.len(), 12);
        let order: Vec<(usize, usize)> = runs.iter().map(|r| (r.state_index, r.repeat_index)).collect();
        let expected: Vec<(usize, usize)> = (0..4).flat_map(|s| (0..3).map(move |r| (s, r))).collect();
        assert_eq!(order, expected);
        assert_eq!(ScenarioConfig { mode: RunMode::Simulation, ..small(1, 1) }.n_noise_repeats(), 20);
    }

    #[test]
    fn ensemble_is_deterministic_across_job_counts() {
        let cfg = ScenarioConfig {
            evolution: EvolutionKind::RandomHermitian,
            noise: NoiseConfig { signal_rate: 100.0, ..NoiseConfig::default() },
            n_noise_repeats: Some(2),
            ..small(5, 15)
        };
        let a = run_ensemble(&cfg, Some(1)).unwrap();
        let b = run_ensemble(&cfg, Some(4)).unwrap();
        let c = run_ensemble(&cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn repeats_share_state_but_not_noise() {
        let cfg = ScenarioConfig {
            noise: NoiseConfig { signal_rate: 100.0, ..NoiseConfig::default() },
            n_noise_repeats: Some(2),
            ..small(1, 10)
        };
        let runs = run_ensemble(&cfg, None).unwrap();
        let a = runs[0].outcome.as_ref().unwrap();
        let b = runs[1].outcome.as_ref().unwrap();
        assert_eq!(a.rows[0].p_true, b.rows[0].p_true);
        assert_ne!(a, b);
    }

    #[test]
    fn single_noiseless_state_converges() {
        let cfg = ScenarioConfig { noise: NoiseConfig::noiseless(1e6), ..small(1, 300) };
        let runs = run_ensemble(&cfg, None).unwrap();
        assert_eq!(runs.len(), 1);
        let trace = runs[0].outcome.as_ref().unwrap();
        assert!(trace.rows.last().unwrap().infidelity < 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(run_ensemble(&ScenarioConfig { n_states: 0, ..small(1, 5) }, None).is_err());
        assert!(run_ensemble(&ScenarioConfig { threshold: 1.5, ..small(1, 5) }, None).is_err());
        assert!(run_ensemble(&ScenarioConfig { burn_in: Some(5), ..small(1, 5) }, None).is_err());
        let err = run_ensemble(&ScenarioConfig { dim: 4, ..small(1, 5) }, None).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDimension(4)));
        assert!(run_ensemble(&ScenarioConfig { dim: 4, scheme: Scheme::GeneralizedPauli, ..small(1, 5) }, None).is_ok());
    }

    #[test]
    fn sweep_levels_and_snr() {
        let base = ScenarioConfig {
            noise: NoiseConfig { signal_rate: 100.0, ..NoiseConfig::default() },
            ..small(3, 10)
        };
        let sweep = noise_sweep(&base, &[0.0, 1000.0, 2500.0], Some(2)).unwrap();
        assert_eq!(sweep.len(), 3);
        assert!(sweep[0].extra_snr > 1e9);
        assert!((sweep[1].extra_snr - 0.1).abs() < 1e-15);
        assert!((sweep[2].extra_snr - 0.04).abs() < 1e-15);

        let direct = run_ensemble(&base, None).unwrap();
        assert_eq!(sweep[0].runs, direct);

        assert!(noise_sweep(&base, &[], None).is_err());
        assert!(noise_sweep(&base, &[-1.0], None).is_err());
    }

    proptest! {
        #[test]
        fn quartile_sandwich(data in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 6), 1..20)) {
            let traces: Vec<TrackTrace> = data.iter().map(|d| trace_from(d)).collect();
            let s = aggregate(&traces, 0.1, None).unwrap();
            for k in 0..6 {
                prop_assert!(s.q25[k] <= s.median[k] && s.median[k] <= s.q75[k]);
            }
            for q in [s.mean_infidelity, s.mean_infidelity_full, s.tail_infidelity] {
                prop_assert!(q.q25 <= q.median && q.median <= q.q75);
            }
        }
    }
}
