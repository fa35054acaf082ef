//! Experiment orchestration: scripted runs, reports, trace files and the
//! two-scheduler comparison.

mod output;
mod scenario;
mod steady;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

pub use output::{read_steady_input, write_comparison, write_run};
pub use scenario::{EventEntry, MacParams, NodeEntry, Scenario, SchedulerChoice, SchedulerKind};
pub use steady::{detect_steady, SteadyCriterion, SteadyInput};

use crate::energy::EnergyRow;
use crate::error::ConfigError;
use crate::kernel::SimTime;
use crate::network::{Delivery, FrameCounts, Network, NodeSummary};
use crate::trace::Trace;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    pub node: NodeId,
    pub removed_at_ms: u64,
    pub steady_at_ms: Option<u64>,
    /// Present only when the network became steady again before the end.
    pub recovery_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub label: String,
    pub window_ms: u64,
    pub network_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub duration_ms: u64,
    pub criterion: SteadyCriterion,
    pub nodes: Vec<NodeSummary>,
    /// Time the last node acquired a parent, if all did.
    pub all_joined_ms: Option<u64>,
    pub steady_state_ms: Option<u64>,
    pub recoveries: Vec<Recovery>,
    pub windows: Vec<WindowSummary>,
    pub frames: FrameCounts,
    pub delivered_by_origin: BTreeMap<NodeId, u64>,
}

impl RunReport {
    pub fn window(&self, label: &str) -> Option<&WindowSummary> {
        self.windows.iter().find(|w| w.label == label)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSummary> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// A finished run: the report plus everything needed to write trace files.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Trace,
    pub energy_rows: Vec<EnergyRow>,
    pub deliveries: Vec<Delivery>,
    pub steady_input: SteadyInput,
}

/// Mean of the per-node percentages in each window, in window order.
fn summarize_windows(rows: &[EnergyRow]) -> Vec<WindowSummary> {
    let mut out: Vec<WindowSummary> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for r in rows {
        match out.iter().position(|w| w.label == r.window) {
            Some(i) => {
                sums[i].0 += r.percent;
                sums[i].1 += 1;
            }
            None => {
                out.push(WindowSummary {
                    label: r.window.clone(),
                    window_ms: r.window_ms,
                    network_percent: 0.0,
                });
                sums.push((r.percent, 1));
            }
        }
    }
    for (w, (sum, n)) in out.iter_mut().zip(sums) {
        w.network_percent = sum / n as f64;
    }
    out
}

/// Builds the network for one scheduler, runs it to the scenario's end and
/// computes the report.
pub fn run(
    scenario: &Scenario,
    kind: SchedulerKind,
    seed: u64,
    criterion: SteadyCriterion,
) -> Result<RunOutput, ConfigError> {
    scenario.validate()?;
    criterion.validate(&scenario.trickle)?;
    for w in scenario.warnings() {
        log::warn!("{w}");
    }
    let mut net = Network::new(
        scenario.network_config(kind),
        &scenario.node_specs(),
        &scenario.timed_actions(),
        seed,
        scenario.duration(),
    );
    net.run();

    let steady_input = SteadyInput::from_trace(net.trace(), scenario.node_ids());
    let steady_state = detect_steady(&steady_input, &criterion, SimTime::ZERO);
    let recoveries = scenario
        .removals()
        .into_iter()
        .map(|(at, node)| {
            let steady = detect_steady(&steady_input, &criterion, at);
            Recovery {
                node,
                removed_at_ms: at.0,
                steady_at_ms: steady.map(|t| t.0),
                recovery_ms: steady.map(|t| t - at),
            }
        })
        .collect();
    let nodes = net.summaries();
    let all_joined_ms = nodes
        .iter()
        .map(|n| n.rpl_join_ms)
        .collect::<Option<Vec<u64>>>()
        .and_then(|v| v.into_iter().max());
    let mut delivered_by_origin = BTreeMap::new();
    for d in net.deliveries() {
        *delivered_by_origin.entry(d.origin).or_insert(0) += 1;
    }
    let report = RunReport {
        scenario: scenario.name.clone(),
        scheduler: kind,
        seed,
        duration_ms: scenario.duration_ms,
        criterion,
        nodes,
        all_joined_ms,
        steady_state_ms: steady_state.map(|t| t.0),
        recoveries,
        windows: summarize_windows(net.energy_rows()),
        frames: net.counts(),
        delivered_by_origin,
    };
    log::info!(
        "{kind} seed {seed}: all joined {:?} ms, steady {:?} ms",
        report.all_joined_ms,
        report.steady_state_ms
    );
    Ok(RunOutput {
        report,
        trace: net.trace().clone(),
        energy_rows: net.energy_rows().to_vec(),
        deliveries: net.deliveries().to_vec(),
        steady_input,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulerResult {
    pub scheduler: SchedulerKind,
    /// Network-average radio-on percentage of the measured window.
    pub measured_percent: Option<f64>,
    pub recovery_ms: Vec<Option<u64>>,
    pub windows: Vec<WindowSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    /// Label of the window opened by the first energy reset, or the whole run.
    pub measured_window: String,
    pub results: Vec<SchedulerResult>,
    /// Orchestra's measured percentage over minimal's.
    pub ratio: Option<f64>,
}

/// Output of [`compare`]: one run per scheduler plus the side-by-side summary.
#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub runs: Vec<RunOutput>,
    pub comparison: Comparison,
}

/// Runs the scenario under both schedulers with the same seed, in parallel.
pub fn compare(
    scenario: &Scenario,
    seed: u64,
    criterion: SteadyCriterion,
) -> Result<CompareOutput, ConfigError> {
    if scenario.scheduler != SchedulerChoice::Both {
        return Err(ConfigError::invalid(
            "compare needs a scenario that leaves the scheduler open (\"both\")",
        ));
    }
    scenario.validate()?;
    criterion.validate(&scenario.trickle)?;
    let runs = std::thread::scope(|s| {
        let handles: Vec<_> = SchedulerKind::ALL
            .iter()
            .map(|&k| s.spawn(move || run(scenario, k, seed, criterion)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let measured_window = scenario
        .first_reset_label()
        .unwrap_or_else(|| "warmup".to_string());
    let results: Vec<SchedulerResult> = runs
        .iter()
        .map(|r| SchedulerResult {
            scheduler: r.report.scheduler,
            measured_percent: r.report.window(&measured_window).map(|w| w.network_percent),
            recovery_ms: r.report.recoveries.iter().map(|x| x.recovery_ms).collect(),
            windows: r.report.windows.clone(),
        })
        .collect();
    let pct = |k: SchedulerKind| {
        results
            .iter()
            .find(|r| r.scheduler == k)
            .and_then(|r| r.measured_percent)
    };
    let ratio = match (pct(SchedulerKind::Orchestra), pct(SchedulerKind::Minimal)) {
        (Some(o), Some(m)) if m > 0.0 => Some(o / m),
        _ => None,
    };
    Ok(CompareOutput {
        comparison: Comparison {
            scenario: scenario.name.clone(),
            seed,
            measured_window,
            results,
            ratio,
        },
        runs,
    })
}

/// Runs and writes all outputs into `dir`. Nothing is written if the
/// scenario is invalid.
pub fn run_to_dir(
    scenario: &Scenario,
    kind: SchedulerKind,
    seed: u64,
    criterion: SteadyCriterion,
    dir: &Path,
) -> Result<RunOutput, ConfigError> {
    let out = run(scenario, kind, seed, criterion)?;
    write_run(dir, &out)?;
    Ok(out)
}

/// Compares and writes `<dir>/<scheduler>/` run outputs plus the summary.
pub fn compare_to_dir(
    scenario: &Scenario,
    seed: u64,
    criterion: SteadyCriterion,
    dir: &Path,
) -> Result<CompareOutput, ConfigError> {
    let out = compare(scenario, seed, criterion)?;
    for r in &out.runs {
        write_run(&dir.join(r.report.scheduler.name()), r)?;
    }
    write_comparison(dir, &out.comparison)?;
    Ok(out)
}
