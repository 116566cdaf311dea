//! Monte Carlo experiments: many replications, then per-threshold summaries.

use dagcusum_core::{run_replication, DetectorKind, ReplicationOutcome, RunKind};
use rayon::prelude::*;

use crate::config::ExperimentPlan;
use crate::csv_io::{write_trace, RunResult, SensorId};
use crate::error::{HarnessError, Result};

/// Results plus run-level diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub results: Vec<RunResult>,
    /// Steps in which a distributed sensor held its statistic.
    pub degenerate_events: u64,
    /// Attacked runs in which some threshold was never crossed.
    pub censored_delays: usize,
}

struct ReplicationPair {
    attacked: Option<ReplicationOutcome>,
    null: Option<ReplicationOutcome>,
}

fn run_pair(plan: &ExperimentPlan, rep: u64) -> Result<ReplicationPair> {
    let attacked = if plan.attacked_runs() { Some(run_replication(&plan.spec, rep, RunKind::Attacked)?) } else { None };
    let null = if plan.null_runs { Some(run_replication(&plan.spec, rep, RunKind::Null)?) } else { None };
    Ok(ReplicationPair { attacked, null })
}

fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Runs every replication on a pool of `threads` workers (all cores when
/// `None`) and reduces them in replication order.
pub fn run_experiment(plan: &ExperimentPlan, threads: Option<usize>) -> Result<ExperimentOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| HarnessError::config("parallel", e.to_string()))?;
    let reps = plan.replications as u64;
    let pairs: Vec<ReplicationPair> =
        pool.install(|| (0..reps).into_par_iter().map(|rep| run_pair(plan, rep)).collect::<Result<Vec<_>>>())?;

    if let Some(dir) = &plan.trace_dir {
        let mut spec = plan.spec.clone();
        spec.record_trace = true;
        let runs = [(plan.attacked_runs(), RunKind::Attacked, "attacked_"), (plan.null_runs, RunKind::Null, "null_")];
        for (enabled, run, prefix) in runs {
            if enabled {
                let out = run_replication(&spec, 0, run)?;
                write_trace(dir, prefix, out.trace.as_ref().expect("trace requested"))?;
            }
        }
    }

    Ok(summarize(plan, &pairs))
}

fn summarize(plan: &ExperimentPlan, pairs: &[ReplicationPair]) -> ExperimentOutcome {
    let spec = &plan.spec;
    let horizon = spec.horizon as f64;
    let attack_time = spec.scenario.attack_time;
    let seed = spec.scenario.master_seed;
    let n = spec.topology.n_sensors();
    let mut results = Vec::new();
    let mut censored_delays = 0;
    let degenerate_events = pairs
        .iter()
        .flat_map(|p| p.attacked.iter().chain(p.null.iter()))
        .map(|o| o.degenerate_events)
        .sum();

    for (d_index, d) in spec.detectors.iter().enumerate() {
        let slots = if d.kind == DetectorKind::DagCusum { n } else { 1 };
        for slot in 0..slots {
            let sensor = if d.kind.is_distributed() { SensorId::Sensor(slot + 1) } else { SensorId::Central };
            for (h_index, &h) in d.h_grid.iter().enumerate() {
                let stop = |o: &ReplicationOutcome| o.detectors[d_index].stop(slot, h_index);

                let (mean_delay, delay_ci) = match attack_time {
                    Some(ta) if plan.attacked_runs() => {
                        let delays: Vec<f64> = pairs
                            .iter()
                            .filter_map(|p| p.attacked.as_ref())
                            .map(|o| match stop(o) {
                                Some(t) => t.saturating_sub(ta) as f64,
                                None => {
                                    censored_delays += 1;
                                    (horizon - ta as f64).max(0.0)
                                }
                            })
                            .collect();
                        let (m, ci) = mean_and_half_width(&delays);
                        (Some(m), Some(ci))
                    }
                    _ => (None, None),
                };

                let (false_alarm_period, censored_frac) = if plan.null_runs {
                    let (mut total, mut censored) = (0.0, 0usize);
                    for o in pairs.iter().filter_map(|p| p.null.as_ref()) {
                        match stop(o) {
                            Some(t) => total += t as f64,
                            None => {
                                total += horizon;
                                censored += 1;
                            }
                        }
                    }
                    let r = pairs.len() as f64;
                    (Some(total / r), Some(censored as f64 / r))
                } else {
                    (None, None)
                };

                results.push(RunResult {
                    detector: d.kind,
                    sensor,
                    h,
                    false_alarm_period,
                    mean_delay,
                    delay_ci,
                    censored_frac,
                    reps: pairs.len(),
                    seed,
                });
            }
        }
    }
    if censored_delays > 0 {
        log::warn!("{censored_delays} attacked (detector, sensor, threshold) runs reached the horizon without an alarm");
    }
    crate::csv_io::sort_results(&mut results);
    ExperimentOutcome { results, degenerate_events, censored_delays }
}
