//! JSON and CSV summaries of aggregated ensembles.

use megtomo::bench::{AggregateStats, ScenarioConfig, SweepLevel};
use megtomo::report::sig12;
use serde_json::{json, Value};

pub const QUARTILE_CONVENTION: &str = "linear interpolation between order statistics";

/// `median +(q75 − median) −(median − q25)`.
fn spread(median: f64, q25: f64, q75: f64) -> Value {
    json!({ "median": median, "plus": q75 - median, "minus": median - q25 })
}

pub fn ensemble_summary(cfg: &ScenarioConfig, stats: &AggregateStats, failures: &[String]) -> Value {
    let it = &stats.iterations_to_threshold;
    let iterations = match (it.q25, it.median, it.q75) {
        (Some(q25), Some(m), Some(q75)) => spread(m, q25, q75),
        _ => Value::Null,
    };
    let mi = &stats.mean_infidelity;
    json!({
        "scenario": {
            "dim": cfg.dim,
            "scheme": cfg.scheme,
            "evolution": cfg.evolution,
            "signal_rate": cfg.noise.signal_rate,
            "extra_background_rate": cfg.noise.extra_background_rate,
            "learning_rate": cfg.meg.learning_rate,
            "n_states": cfg.n_states,
            "n_noise_repeats": cfg.n_noise_repeats(),
            "t_tot": cfg.t_tot,
            "master_seed": cfg.master_seed,
        },
        "quartile_convention": QUARTILE_CONVENTION,
        "n_traces": stats.n_traces,
        "threshold": stats.threshold,
        "burn_in": stats.burn_in.map_or(Value::String("per-trace threshold crossing".into()), Value::from),
        "iterations_to_threshold": it,
        "mean_infidelity": stats.mean_infidelity,
        "mean_infidelity_full": stats.mean_infidelity_full,
        "tail_infidelity": stats.tail_infidelity,
        "median_purity": stats.median_purity,
        "headline": {
            "iterations_to_threshold": iterations,
            "mean_infidelity_percent": spread(100.0 * mi.median, 100.0 * mi.q25, 100.0 * mi.q75),
        },
        "failures": failures,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(sig12).unwrap_or_default()
}

/// One row per noise level.
pub fn sweep_csv(levels: &[SweepLevel]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "level",
        "snr",
        "extra_snr",
        "n_traces",
        "iterations_q25",
        "iterations_median",
        "iterations_q75",
        "censored_fraction",
        "mean_infidelity_q25",
        "mean_infidelity_median",
        "mean_infidelity_q75",
        "tail_infidelity_median",
        "median_purity",
    ])?;
    for l in levels {
        let s = &l.stats;
        let it = &s.iterations_to_threshold;
        w.write_record([
            sig12(l.level),
            sig12(l.snr),
            sig12(l.extra_snr),
            s.n_traces.to_string(),
            opt(it.q25),
            opt(it.median),
            opt(it.q75),
            sig12(it.censored_fraction),
            sig12(s.mean_infidelity.q25),
            sig12(s.mean_infidelity.median),
            sig12(s.mean_infidelity.q75),
            sig12(s.tail_infidelity.median),
            sig12(s.median_purity),
        ])?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}
