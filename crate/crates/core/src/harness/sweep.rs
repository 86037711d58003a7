use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::shrinkfit::FitState;
use crate::{Error, Result};

use super::config::{ExperimentConfig, Method, SweepKind};
use super::trial::{run_trial, TrialOutcome};

/// Aggregate SER of one method at one sweep point. Field order is the CSV
/// column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: Method,
    pub sweep_kind: SweepKind,
    pub sweep_value: f64,
    /// Trials that produced a result for this method.
    pub trials: u64,
    pub symbol_errors: u64,
    pub total_symbols: u64,
    pub ser: f64,
    pub mean_alpha: Option<f64>,
    pub mean_iterations: Option<f64>,
    /// Only filled when timing is requested; it would break byte-identical
    /// reruns otherwise.
    pub wallclock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerUeRecord {
    pub method: Method,
    pub sweep_value: f64,
    pub ue: usize,
    pub symbol_errors: u64,
    pub total_symbols: u64,
    pub ser: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sweep_value: f64,
    pub method: Method,
    pub failed_trials: u64,
    pub resampled_trials: u64,
    pub clamp_events: u64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub per_ue: Vec<PerUeRecord>,
    pub diagnostics: Vec<Diagnostics>,
    /// `(sweep_value, trial_index, trajectory)` when tracing is on.
    pub traces: Vec<(f64, u64, FitState)>,
}

impl SweepOutput {
    pub fn record(&self, m: Method, value: f64) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.method == m && r.sweep_value == value)
    }

    pub fn ser(&self, m: Method, value: f64) -> f64 {
        self.record(m, value).map(|r| r.ser).unwrap_or(f64::NAN)
    }
}

#[derive(Default)]
struct Accum {
    trials: u64,
    errors_per_ue: Vec<u64>,
    symbols_per_ue: u64,
    alpha_sum: f64,
    alpha_n: u64,
    iter_sum: u64,
    iter_n: u64,
    failed: u64,
    clamps: u64,
}

fn run_point(cfg: &ExperimentConfig, value: f64) -> Result<Vec<TrialOutcome>> {
    let scenario = cfg.point_scenario(value)?;
    scenario.validate()?;
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(&scenario, &cfg.options, i))
        .collect()
}

/// Runs all sweep points. Trials are distributed over `threads` workers;
/// results are reduced in trial order with integer error counts, so the
/// output does not depend on the thread count.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize, record_wallclock: bool) -> Result<SweepOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut out = SweepOutput::default();
    for &value in &cfg.sweep.values {
        let start = Instant::now();
        let trials = pool.install(|| run_point(cfg, value))?;
        let elapsed = start.elapsed().as_secs_f64();
        let resampled = trials.iter().filter(|t| t.resamples > 0).count() as u64;

        let mut acc: Vec<Accum> = (0..5).map(|_| Accum::default()).collect();
        for t in trials {
            for m in &cfg.options.methods {
                let a = &mut acc[m.index()];
                let Some(o) = t.get(*m) else { continue };
                a.clamps += o.clamp_events as u64;
                let Some(e) = &o.errors else {
                    a.failed += 1;
                    continue;
                };
                if a.errors_per_ue.is_empty() {
                    a.errors_per_ue = vec![0; e.errors_per_ue.len()];
                }
                for (dst, src) in a.errors_per_ue.iter_mut().zip(&e.errors_per_ue) {
                    *dst += src;
                }
                a.symbols_per_ue += e.symbols_per_ue;
                a.trials += 1;
                if let Some(alpha) = o.alpha {
                    a.alpha_sum += alpha;
                    a.alpha_n += 1;
                }
                if let Some(it) = o.iterations {
                    a.iter_sum += it as u64;
                    a.iter_n += 1;
                }
            }
            if let Some(tr) = t.fit_trace {
                out.traces.push((value, t.trial_index, tr));
            }
        }

        for &m in &cfg.options.methods {
            let a = &acc[m.index()];
            let errors: u64 = a.errors_per_ue.iter().sum();
            let total = a.symbols_per_ue * a.errors_per_ue.len() as u64;
            let with_alpha = !matches!(m, Method::PerfectCsi);
            out.records.push(SweepRecord {
                method: m,
                sweep_kind: cfg.sweep.kind,
                sweep_value: value,
                trials: a.trials,
                symbol_errors: errors,
                total_symbols: total,
                ser: if total > 0 { errors as f64 / total as f64 } else { f64::NAN },
                mean_alpha: (with_alpha && a.alpha_n > 0).then(|| a.alpha_sum / a.alpha_n as f64),
                mean_iterations: (a.iter_n > 0).then(|| a.iter_sum as f64 / a.iter_n as f64),
                wallclock_s: record_wallclock.then_some(elapsed),
            });
            for (ue, &e) in a.errors_per_ue.iter().enumerate() {
                out.per_ue.push(PerUeRecord {
                    method: m,
                    sweep_value: value,
                    ue,
                    symbol_errors: e,
                    total_symbols: a.symbols_per_ue,
                    ser: e as f64 / a.symbols_per_ue as f64,
                });
            }
            out.diagnostics.push(Diagnostics {
                sweep_value: value,
                method: m,
                failed_trials: a.failed,
                resampled_trials: resampled,
                clamp_events: a.clamps,
            });
        }
    }
    Ok(out)
}
