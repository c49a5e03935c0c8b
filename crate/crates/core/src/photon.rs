//! Prepare-and-measure photon counting.
//!
//! Each of the `d` projective settings of a basis is measured in its own
//! one-second window. The mean count of a setting is the signal rate times
//! the state overlap plus the dark, background and extra background rates,
//! and the recorded count is a Poisson draw around that mean.

use std::io::{Read, Write};

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementBasis;
use crate::rng::SimRng;
use crate::states::PureState;

const SNR_EPS: f64 = 1e-9;

/// Expected counts per measurement window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub signal_rate: f64,
    #[serde(default = "default_dark")]
    pub dark_rate: f64,
    #[serde(default = "default_background")]
    pub background_rate: f64,
    #[serde(default)]
    pub extra_background_rate: f64,
    /// Feed the estimator counts minus the expected offset instead of raw
    /// count fractions. Off by default.
    #[serde(default)]
    pub subtract_offsets: bool,
}

fn default_dark() -> f64 {
    100.0
}

fn default_background() -> f64 {
    50.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            signal_rate: 1e6,
            dark_rate: default_dark(),
            background_rate: default_background(),
            extra_background_rate: 0.0,
            subtract_offsets: false,
        }
    }
}

impl NoiseConfig {
    /// Signal only, no offsets.
    pub fn noiseless(signal_rate: f64) -> Self {
        Self {
            signal_rate,
            dark_rate: 0.0,
            background_rate: 0.0,
            extra_background_rate: 0.0,
            subtract_offsets: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("signal_rate", self.signal_rate),
            ("dark_rate", self.dark_rate),
            ("background_rate", self.background_rate),
            ("extra_background_rate", self.extra_background_rate),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "noise.{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Sum of all rates that do not depend on the state.
    pub fn offset(&self) -> f64 {
        self.dark_rate + self.background_rate + self.extra_background_rate
    }

    /// Signal rate over total noise rate.
    pub fn snr(&self) -> f64 {
        self.signal_rate / self.offset().max(SNR_EPS)
    }

    /// Signal rate over the extra background alone.
    pub fn extra_snr(&self) -> f64 {
        self.signal_rate / self.extra_background_rate.max(SNR_EPS)
    }

    /// Probabilities handed to the estimator for a record.
    ///
    /// Without offset subtraction these are the record's own probabilities.
    /// With it, each count is reduced by [`offset`](Self::offset), clipped at
    /// zero and renormalized; if nothing is left the record's probabilities
    /// are used.
    pub fn estimator_input(&self, record: &CountRecord) -> Vec<f64> {
        if !self.subtract_offsets {
            return record.probabilities.clone();
        }
        let offset = self.offset();
        let excess: Vec<f64> =
            record.counts.iter().map(|&c| (c as f64 - offset).max(0.0)).collect();
        let total: f64 = excess.iter().sum();
        if total > 0.0 {
            excess.iter().map(|x| x / total).collect()
        } else {
            record.probabilities.clone()
        }
    }
}

/// Photon counts for the `d` settings of one basis and the derived probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub basis_label: String,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    /// Set when every count was zero and uniform probabilities were substituted.
    pub degenerate: bool,
}

impl CountRecord {
    /// Normalizes raw counts; an all-zero record gets uniform probabilities and is flagged.
    pub fn from_counts(basis_label: impl Into<String>, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let d = counts.len();
        let (probabilities, degenerate) = if total == 0 {
            (vec![1.0 / d as f64; d], true)
        } else {
            (counts.iter().map(|&c| c as f64 / total as f64).collect(), false)
        };
        Self { basis_label: basis_label.into(), counts, probabilities, degenerate }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn expected_counts(
    psi: &PureState,
    basis: &MeasurementBasis,
    noise: &NoiseConfig,
) -> Result<Vec<f64>> {
    if psi.dim() != basis.dim() {
        return Err(Error::InvalidInput(format!(
            "state dimension {} does not match basis dimension {}",
            psi.dim(),
            basis.dim()
        )));
    }
    let offset = noise.offset();
    Ok(basis
        .states()
        .iter()
        .map(|b| noise.signal_rate * b.overlap(psi) + offset)
        .collect())
}

/// Independent Poisson draws, one per mean.
pub fn sample_counts(means: &[f64], rng: &mut SimRng) -> Result<Vec<u64>> {
    means
        .iter()
        .map(|&m| {
            if m == 0.0 {
                return Ok(0);
            }
            let dist = Poisson::new(m).map_err(|e| {
                Error::InvalidParameter(format!("invalid Poisson mean {m}: {e}"))
            })?;
            Ok(dist.sample(rng) as u64)
        })
        .collect()
}

/// Simulates one iteration: all `d` settings of `basis` measured on `psi`.
pub fn measure_iteration(
    psi: &PureState,
    basis: &MeasurementBasis,
    noise: &NoiseConfig,
    rng: &mut SimRng,
) -> Result<CountRecord> {
    let means = expected_counts(psi, basis, noise)?;
    let mut counts = sample_counts(&means, rng)?;
    if counts.iter().all(|&c| c == 0) {
        counts = sample_counts(&means, rng)?;
    }
    Ok(CountRecord::from_counts(basis.label(), counts))
}

/// Writes `(iteration, basis_label, count_0..count_{d−1})` rows.
pub fn write_counts_csv<W: Write>(writer: W, rows: &[(usize, CountRecord)]) -> Result<()> {
    let d = rows.first().map(|(_, r)| r.counts.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["iteration".to_string(), "basis_label".to_string()];
    header.extend((0..d).map(|i| format!("count_{i}")));
    w.write_record(&header).map_err(io_err)?;
    for (iteration, record) in rows {
        let mut fields = vec![iteration.to_string(), record.basis_label.clone()];
        fields.extend(record.counts.iter().map(u64::to_string));
        w.write_record(&fields).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("write failed: {e}")))
}

/// Reads rows written by [`write_counts_csv`] or recorded by an experiment.
pub fn read_counts_csv<R: Read>(reader: R) -> Result<Vec<(usize, CountRecord)>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(io_err)?;
        let bad = |what: &str| Error::InvalidInput(format!("row {}: {what}", line + 2));
        if row.len() < 4 {
            return Err(bad("expected iteration, basis_label and at least two counts"));
        }
        let iteration = row[0].trim().parse().map_err(|_| bad("iteration is not an integer"))?;
        let counts = row
            .iter()
            .skip(2)
            .map(|f| f.trim().parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("counts must be non-negative integers"))?;
        out.push((iteration, CountRecord::from_counts(row[1].to_string(), counts)));
    }
    Ok(out)
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}
