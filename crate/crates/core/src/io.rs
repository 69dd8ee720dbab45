// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats: the wide counts CSV, event-timestamp binning and the
//! versioned JSON documents written by the command-line tool.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detect::DetectionReport;
use crate::error::{Error, Result};
use crate::metrics::EvalResult;
use crate::sim::{Scenario, ScenarioKind};
use crate::types::{EventSeries, ModelConfig, Source};

pub const TRUTH_SCHEMA: &str = "sepp-cpd/truth/v1";
pub const REPORT_SCHEMA: &str = "sepp-cpd/report/v1";
pub const METRICS_SCHEMA: &str = "sepp-cpd/metrics/v1";

/// Writes `t,x1,...,xM` followed by one row per time point.
pub fn write_counts<W: Write>(series: &EventSeries, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=series.dim()).map(|m| format!("x{m}")));
    w.write_record(&header).map_err(csv_error)?;
    let mut row = Vec::with_capacity(series.dim() + 1);
    for (t, obs) in series.observations().enumerate() {
        row.clear();
        row.push((t + 1).to_string());
        row.extend(obs.iter().map(u32::to_string));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts<R: Read>(reader: R, provenance: Option<String>) -> Result<EventSeries> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(csv_error)?.clone();
    if header.get(0).map(str::trim) != Some("t") {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with `t`".into(),
        });
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "header has no count columns".into(),
        });
    }
    for (j, name) in header.iter().enumerate().skip(1) {
        if name.trim() != format!("x{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("column {} should be `x{j}`, found `{name}`", j + 1),
            });
        }
    }

    let mut counts = Vec::new();
    let mut len = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let more = r.read_record(&mut record).map_err(csv_error)?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 1, record.len()),
            });
        }
        let t: usize = parse_cell(&record[0], line, "t")?;
        if t != len + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected t = {}, found {t}", len + 1),
            });
        }
        for (j, cell) in record.iter().enumerate().skip(1) {
            counts.push(parse_cell::<u32>(cell, line, &format!("x{j}"))?);
        }
        len += 1;
    }
    if len == 0 {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    EventSeries::from_time_major(dim, len, counts, Source::ingested(provenance))
}

fn parse_cell<T: std::str::FromStr>(cell: &str, line: usize, column: &str) -> Result<T> {
    let cell = cell.trim();
    cell.parse().map_err(|_| Error::Parse {
        line,
        message: if cell.starts_with('-') {
            format!("column {column}: negative value `{cell}`")
        } else {
            format!("column {column}: `{cell}` is not a non-negative integer")
        },
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn read_counts_file(path: &Path) -> Result<EventSeries> {
    let file = File::open(path)?;
    read_counts(BufReader::new(file), Some(path.display().to_string()))
}

pub fn write_counts_file(series: &EventSeries, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    write_counts(series, BufWriter::new(file))
}

/// Bins an event-timestamp CSV with header `time,unit` into counts.
///
/// `unit` is 1-based. Bin `t` (1-based) collects events with
/// `(t - 1) * width <= time - origin < t * width`. Events before `origin`
/// are rejected. The number of units is the largest unit seen unless
/// `units` is given.
pub fn bin_events<R: Read>(
    reader: R,
    width: f64,
    origin: f64,
    units: Option<usize>,
    provenance: Option<String>,
) -> Result<EventSeries> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::invalid(format!("bin width must be positive, got {width}")));
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["time", "unit"] {
        return Err(Error::Parse {
            line: 1,
            message: "event header must be `time,unit`".into(),
        });
    }
    let mut events = Vec::new();
    let mut record = csv::StringRecord::new();
    while r.read_record(&mut record).map_err(csv_error)? {
        let line = record.position().map_or(0, |p| p.line() as usize);
        let time: f64 = record[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{}` is not a time", &record[0]),
        })?;
        if !time.is_finite() || time < origin {
            return Err(Error::Parse {
                line,
                message: format!("time {time} is before the origin {origin}"),
            });
        }
        let unit: usize = parse_cell(&record[1], line, "unit")?;
        if unit == 0 || units.is_some_and(|u| unit > u) {
            return Err(Error::Parse {
                line,
                message: format!("unit {unit} out of range"),
            });
        }
        events.push((((time - origin) / width).floor() as usize, unit - 1));
    }
    let dim = units.unwrap_or_else(|| events.iter().map(|e| e.1 + 1).max().unwrap_or(0));
    if dim == 0 || events.is_empty() {
        return Err(Error::invalid("no events to bin"));
    }
    let len = events.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let mut counts = vec![0u32; dim * len];
    for (bin, unit) in events {
        counts[bin * dim + unit] += 1;
    }
    EventSeries::from_time_major(dim, len, counts, Source::ingested(provenance))
}

/// Everything needed to repeat a run with the same build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            seed: None,
            scenario: None,
            input: None,
            wall_time_secs: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub schema: String,
    pub len: usize,
    pub dim: usize,
    pub config: ModelConfig,
    pub change_points: Vec<usize>,
    pub scenario: Scenario,
    pub manifest: RunManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub schema: String,
    pub len: usize,
    pub dim: usize,
    pub config: ModelConfig,
    pub report: DetectionReport,
    pub manifest: RunManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub schema: String,
    pub len: usize,
    pub estimate: Vec<usize>,
    pub truth: Vec<usize>,
    pub result: EvalResult,
}

/// Reads a JSON document after checking its `schema` field.
pub fn read_doc<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == schema => Ok(serde_json::from_value(value)?),
        Some(s) => Err(Error::invalid(format!(
            "{}: schema `{s}`, expected `{schema}`",
            path.display()
        ))),
        None => Err(Error::invalid(format!("{}: missing schema field", path.display()))),
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Change points listed one per line or comma separated; an optional
/// non-numeric header line is skipped. Used for scoring external tools.
pub fn read_change_points<R: Read>(mut reader: R) -> Result<Vec<usize>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for cell in line.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            match cell.parse::<usize>() {
                Ok(p) => points.push(p),
                Err(_) if i == 0 => {}
                Err(_) => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("`{cell}` is not a time index"),
                    })
                }
            }
        }
    }
    points.sort_unstable();
    points.dedup();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<EventSeries> {
        read_counts(text.as_bytes(), None)
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn writes_header_and_rows() {
        let s = EventSeries::from_time_major(2, 2, vec![1, 2, 0, 5], Source::ingested(None)).unwrap();
        let mut buf = Vec::new();
        write_counts(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x1,x2\n1,1,2\n2,0,5\n");
    }

    #[test]
    fn parse_errors_name_the_line() {
        assert_eq!(line_of(parse("t,x1,x2\n1,1,2\n2,3\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,x1\n1,1\n2,-4\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("t,x1\n1,1.5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("t,x1\n1,1\n3,1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("time,x1\n1,1\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("t,x1,x3\n1,1,1\n").unwrap_err()), 1);
        assert!(parse("t,x1\n").is_err());
    }

    #[test]
    fn bins_event_times() {
        let text = "time,unit\n0.0,1\n4.9,2\n5.0,1\n12.5,2\n";
        let s = bin_events(text.as_bytes(), 5.0, 0.0, None, None).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.len(), 3);
        assert_eq!(s.observation(1), &[1, 1]);
        assert_eq!(s.observation(2), &[1, 0]);
        assert_eq!(s.observation(3), &[0, 1]);
        let wide = bin_events(text.as_bytes(), 5.0, 0.0, Some(4), None).unwrap();
        assert_eq!(wide.dim(), 4);
        assert!(bin_events(text.as_bytes(), 0.0, 0.0, None, None).is_err());
        assert!(bin_events("time,unit\n1.0,0\n".as_bytes(), 1.0, 0.0, None, None).is_err());
        assert!(bin_events(text.as_bytes(), 5.0, 1.0, None, None).is_err());
    }

    #[test]
    fn change_point_lists() {
        assert_eq!(read_change_points("cp\n151\n40\n".as_bytes()).unwrap(), vec![40, 151]);
        assert_eq!(read_change_points("148, 290".as_bytes()).unwrap(), vec![148, 290]);
        assert!(read_change_points("".as_bytes()).unwrap().is_empty());
        assert!(read_change_points("1\nx\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(dim in 1usize..5, rows in prop::collection::vec(prop::collection::vec(0u32..1000, 5), 2..40)) {
            let counts: Vec<u32> = rows.iter().flat_map(|r| r[..dim].to_vec()).collect();
            let s = EventSeries::from_time_major(dim, rows.len(), counts, Source::ingested(None)).unwrap();
            let mut buf = Vec::new();
            write_counts(&s, &mut buf).unwrap();
            let back = read_counts(buf.as_slice(), None).unwrap();
            prop_assert_eq!(back.time_major(), s.time_major());
            prop_assert_eq!(back.dim(), s.dim());
            prop_assert_eq!(back.len(), s.len());
        }
    }
}
