//! Trace files: CSV series, the event log and JSON reports.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Comparison, RunOutput, SteadyInput};
use crate::error::ConfigError;
use crate::kernel::SimTime;
use crate::NodeId;

#[derive(Debug, Serialize, Deserialize)]
struct TrickleRow {
    time_ms: u64,
    node: NodeId,
    interval_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DioRow {
    time_ms: u64,
    node: NodeId,
    trigger_index: u32,
}

#[derive(Debug, Serialize)]
struct DeliveryRow {
    time_ms: u64,
    origin: NodeId,
    seq: u32,
}

#[derive(Debug, Serialize)]
struct ComparisonRow<'a> {
    scheduler: &'a str,
    window: &'a str,
    window_ms: u64,
    network_percent: f64,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), ConfigError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path)(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path)(e.into()))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ConfigError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes `trickle.csv`, `dio.csv`, `energy.csv`, `deliveries.csv`,
/// `events.log` and `report.json` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, out: &RunOutput) -> Result<(), ConfigError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(
        &dir.join("trickle.csv"),
        out.trace
            .trickle_series()
            .into_iter()
            .map(|(t, node, interval_ms)| TrickleRow {
                time_ms: t.0,
                node,
                interval_ms,
            }),
    )?;
    write_csv(
        &dir.join("dio.csv"),
        out.trace
            .dio_series()
            .into_iter()
            .map(|(t, node, trigger_index)| DioRow {
                time_ms: t.0,
                node,
                trigger_index,
            }),
    )?;
    write_csv(&dir.join("energy.csv"), &out.energy_rows)?;
    write_csv(
        &dir.join("deliveries.csv"),
        out.deliveries.iter().map(|d| DeliveryRow {
            time_ms: d.time.0,
            origin: d.origin,
            seq: d.seq,
        }),
    )?;
    let log_path = dir.join("events.log");
    let file = fs::File::create(&log_path).map_err(io_err(&log_path))?;
    let mut w = BufWriter::new(file);
    for r in out.trace.iter() {
        writeln!(w, "{r}").map_err(io_err(&log_path))?;
    }
    w.flush().map_err(io_err(&log_path))?;
    write_json(&dir.join("report.json"), &out.report)
}

/// Writes `comparison.json` and `comparison.csv` into `dir`.
pub fn write_comparison(dir: &Path, cmp: &Comparison) -> Result<(), ConfigError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("comparison.json"), cmp)?;
    let rows: Vec<ComparisonRow> = cmp
        .results
        .iter()
        .flat_map(|r| {
            r.windows.iter().map(move |w| ComparisonRow {
                scheduler: r.scheduler.name(),
                window: &w.label,
                window_ms: w.window_ms,
                network_percent: w.network_percent,
            })
        })
        .collect();
    write_csv(&dir.join("comparison.csv"), rows)
}

/// Rebuilds detector input from a run directory. Nodes are those named
/// anywhere in `events.log`.
pub fn read_steady_input(dir: &Path) -> Result<SteadyInput, ConfigError> {
    let mut input = SteadyInput::default();
    let path = dir.join("trickle.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| io_err(&path)(e.into()))?;
    for row in r.deserialize::<TrickleRow>() {
        let row = row.map_err(|e| ConfigError::invalid(format!("{}: {e}", path.display())))?;
        input
            .trickle
            .push((SimTime(row.time_ms), row.node, row.interval_ms));
    }
    let path = dir.join("dio.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| io_err(&path)(e.into()))?;
    for row in r.deserialize::<DioRow>() {
        let row = row.map_err(|e| ConfigError::invalid(format!("{}: {e}", path.display())))?;
        input
            .dio
            .push((SimTime(row.time_ms), row.node, row.trigger_index));
    }
    let path = dir.join("events.log");
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let mut nodes = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        let mut f = line.split_whitespace();
        let parsed = (|| {
            let t: u64 = f.next()?.parse().ok()?;
            let n: NodeId = f.next()?.parse().ok()?;
            Some((t, n, f.next()?.to_string()))
        })();
        let Some((t, n, kind)) = parsed else {
            return Err(ConfigError::invalid(format!(
                "{}:{}: malformed event line",
                path.display(),
                i + 1
            )));
        };
        nodes.insert(n);
        if kind == "removed" {
            input.removals.push((SimTime(t), n));
        }
    }
    input.nodes = nodes;
    Ok(input)
}
