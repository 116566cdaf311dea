//! CSV output: experiment results and per-replication traces.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use dagcusum_core::{DetectorKind, ReplicationTrace};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HarnessError, Result};

pub const RESULT_COLUMNS: [&str; 9] =
    ["detector", "sensor", "h", "false_alarm_period", "mean_delay", "delay_ci", "censored_frac", "reps", "seed"];

/// Which statistic a result row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SensorId {
    Central,
    /// 1-based sensor number.
    Sensor(usize),
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SensorId::Central => f.write_str("central"),
            SensorId::Sensor(j) => write!(f, "{j}"),
        }
    }
}

impl FromStr for SensorId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "central" {
            return Ok(SensorId::Central);
        }
        match s.parse::<usize>() {
            Ok(j) if j >= 1 => Ok(SensorId::Sensor(j)),
            _ => Err(format!("invalid sensor `{s}`")),
        }
    }
}

impl Serialize for SensorId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SensorId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod detector_name {
    use super::*;

    pub fn serialize<S: Serializer>(k: &DetectorKind, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(k.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DetectorKind, D::Error> {
        let s = String::deserialize(d)?;
        DetectorKind::from_name(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown detector `{s}`")))
    }
}

/// Summary of one detector, sensor and threshold.
///
/// Delay columns are empty when the experiment had no attack; the
/// false-alarm columns are empty when attack-free runs were disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    #[serde(with = "detector_name")]
    pub detector: DetectorKind,
    pub sensor: SensorId,
    pub h: f64,
    /// Mean attack-free stopping time, with censored runs counted at the horizon.
    pub false_alarm_period: Option<f64>,
    pub mean_delay: Option<f64>,
    /// Half-width of the normal-approximation 95% interval of the mean delay.
    pub delay_ci: Option<f64>,
    /// Share of attack-free runs without an alarm within the horizon.
    pub censored_frac: Option<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl RunResult {
    fn sort_key(&self) -> (DetectorKind, SensorId) {
        (self.detector, self.sensor)
    }
}

/// Sorts rows by detector, sensor and threshold.
pub fn sort_results(rows: &mut [RunResult]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then(a.h.total_cmp(&b.h)));
}

/// Writes the header and sorted rows.
pub fn emit_results<W: Write>(out: W, rows: &[RunResult]) -> std::result::Result<(), csv::Error> {
    let mut sorted = rows.to_vec();
    sort_results(&mut sorted);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for r in &sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_results<R: Read>(input: R) -> std::result::Result<Vec<RunResult>, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().collect()
}

pub fn results_to_string(rows: &[RunResult]) -> String {
    let mut buf = Vec::new();
    emit_results(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn write_results(path: &Path, rows: &[RunResult]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    emit_results(std::io::BufWriter::new(f), rows).map_err(|source| HarnessError::Csv { path: path.to_path_buf(), source })
}

pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    let f = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_results(f).map_err(|source| HarnessError::Csv { path: path.to_path_buf(), source })
}

/// Writes `bits.csv`, `central.csv` and `dag.csv` of one replication into `dir`.
/// Sensor numbers are 1-based.
pub fn write_trace(dir: &Path, prefix: &str, trace: &ReplicationTrace) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Csv { path: path.clone(), source }
    };

    let path = dir.join(format!("{prefix}bits.csv"));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["phase", "time", "sensor", "bit"]).map_err(csv_err(&path))?;
    for r in trace.bits.records() {
        w.write_record([r.phase.as_str().to_string(), r.time.to_string(), (r.sensor + 1).to_string(), r.bit.to_string()])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;

    if !trace.central.is_empty() {
        let path = dir.join(format!("{prefix}central.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["k", "h_g", "h_a", "k_hat"]).map_err(csv_err(&path))?;
        for r in &trace.central {
            w.write_record([r.k.to_string(), r.h_g.to_string(), r.h_a.to_string(), r.k_hat.to_string()])
                .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
    }

    if !trace.dag.is_empty() {
        let path = dir.join(format!("{prefix}dag.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["k", "sensor", "eta1", "eta2", "eta3", "h_d", "stopped"]).map_err(csv_err(&path))?;
        for r in &trace.dag {
            w.write_record([
                r.k.to_string(),
                (r.sensor + 1).to_string(),
                r.eta1.to_string(),
                r.eta2.to_string(),
                r.eta3.to_string(),
                r.h_d.to_string(),
                r.stopped.to_string(),
            ])
            .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(detector: DetectorKind, sensor: SensorId, h: f64) -> RunResult {
        RunResult {
            detector,
            sensor,
            h,
            false_alarm_period: Some(123.5),
            mean_delay: Some(4.25),
            delay_ci: Some(0.5),
            censored_frac: Some(0.1),
            reps: 200,
            seed: 7,
        }
    }

    #[test]
    fn empty_results_give_header_only() {
        assert_eq!(results_to_string(&[]), format!("{}\n", RESULT_COLUMNS.join(",")));
    }

    #[test]
    fn one_row_gives_two_lines() {
        let s = results_to_string(&[row(DetectorKind::Gcusum, SensorId::Central, 10.0)]);
        assert_eq!(s.lines().count(), 2);
        assert_eq!(s.lines().nth(1).unwrap(), "gcusum,central,10.0,123.5,4.25,0.5,0.1,200,7");
    }

    #[test]
    fn rows_are_ordered() {
        let rows = vec![
            row(DetectorKind::DagCusum, SensorId::Sensor(10), 1.0),
            row(DetectorKind::DagCusum, SensorId::Sensor(2), 2.0),
            row(DetectorKind::DagCusum, SensorId::Sensor(2), 1.0),
            row(DetectorKind::Gcusum, SensorId::Central, 3.0),
        ];
        let back = parse_results(results_to_string(&rows).as_bytes()).unwrap();
        let keys: Vec<(DetectorKind, SensorId, f64)> = back.iter().map(|r| (r.detector, r.sensor, r.h)).collect();
        assert_eq!(
            keys,
            vec![
                (DetectorKind::Gcusum, SensorId::Central, 3.0),
                (DetectorKind::DagCusum, SensorId::Sensor(2), 1.0),
                (DetectorKind::DagCusum, SensorId::Sensor(2), 2.0),
                (DetectorKind::DagCusum, SensorId::Sensor(10), 1.0),
            ]
        );
    }

    #[test]
    fn missing_values_are_empty_fields() {
        let mut r = row(DetectorKind::OracleCusum, SensorId::Central, 5.0);
        r.mean_delay = None;
        r.delay_ci = None;
        let s = results_to_string(&[r.clone()]);
        assert!(s.contains("oracle-cusum,central,5.0,123.5,,,0.1"));
        assert_eq!(parse_results(s.as_bytes()).unwrap(), vec![r]);
    }
}
