//! Run reports: one JSON object per example, then a summary line.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::refinement::LabelResult;
use crate::search::Probe;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Certified,
    NotCertified,
    /// The unperturbed input is already misclassified; not attempted.
    Misclassified,
    Falsified,
    NotFalsified,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<LabelResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Probe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_ms: Option<f64>,
}

impl ExampleReport {
    pub fn new(index: usize, label: usize, predicted: usize, status: Status) -> Self {
        Self {
            index,
            label,
            predicted,
            method: None,
            status,
            bounds: Vec::new(),
            max_eps: None,
            probes: Vec::new(),
            counterexample: None,
            error: None,
            time_ms: None,
        }
    }

    pub fn epochs(&self) -> usize {
        self.bounds.iter().map(|b| b.epochs).sum()
    }

    /// Smallest bound over the reported labels.
    pub fn min_bound(&self) -> Option<f64> {
        self.bounds.iter().map(|b| b.bound).reduce(f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub examples: usize,
    /// Correctly classified examples, the denominator of `certified_pct`.
    pub attempted: usize,
    pub certified: usize,
    pub certified_pct: f64,
    pub falsified: usize,
    pub errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_max_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_time_ms: Option<f64>,
}

impl Summary {
    pub fn from_reports(command: &str, method: Option<&str>, reports: &[ExampleReport]) -> Self {
        let mine: Vec<&ExampleReport> = reports
            .iter()
            .filter(|r| method.is_none() || r.method.as_deref() == method)
            .collect();
        let attempted = mine
            .iter()
            .filter(|r| !matches!(r.status, Status::Misclassified | Status::Error))
            .count();
        let certified = mine
            .iter()
            .filter(|r| r.status == Status::Certified)
            .count();
        let falsified = mine
            .iter()
            .filter(|r| r.status == Status::Falsified)
            .count();
        let errors = mine.iter().filter(|r| r.status == Status::Error).count();
        let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Self {
            command: command.into(),
            method: method.map(Into::into),
            examples: mine.len(),
            attempted,
            certified,
            certified_pct: if attempted == 0 {
                0.0
            } else {
                100.0 * certified as f64 / attempted as f64
            },
            falsified,
            errors,
            mean_max_eps: mean(mine.iter().filter_map(|r| r.max_eps).collect()),
            mean_time_ms: mean(mine.iter().filter_map(|r| r.time_ms).collect()),
        }
    }
}

#[derive(Serialize)]
struct Footer<'a> {
    summary: &'a Summary,
}

/// Writes one line per example followed by one footer line per summary.
pub fn write_jsonl(
    mut out: impl Write,
    reports: &[ExampleReport],
    summaries: &[Summary],
) -> Result<(), Error> {
    let io = |e| Error::io(std::path::Path::new("<report>"), e);
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(io)?;
    }
    for s in summaries {
        serde_json::to_writer(&mut out, &Footer { summary: s })?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    index: usize,
    label: usize,
    predicted: usize,
    method: &'a str,
    status: &'a str,
    min_bound: Option<f64>,
    epochs: usize,
    max_eps: Option<f64>,
    time_ms: Option<f64>,
}

pub fn write_csv(out: impl Write, reports: &[ExampleReport]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    for r in reports {
        let status = serde_json::to_value(r.status)?;
        w.serialize(CsvRow {
            index: r.index,
            label: r.label,
            predicted: r.predicted,
            method: r.method.as_deref().unwrap_or(""),
            status: status.as_str().unwrap_or(""),
            min_bound: r.min_bound(),
            epochs: r.epochs(),
            max_eps: r.max_eps,
            time_ms: r.time_ms,
        })
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::io(std::path::Path::new("<csv>"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ExampleReport> {
        let mut a = ExampleReport::new(0, 1, 1, Status::Certified);
        a.bounds.push(LabelResult {
            label: 0,
            bound: 0.25,
            epochs: 3,
            certified: true,
        });
        let b = ExampleReport::new(1, 2, 0, Status::Misclassified);
        let c = ExampleReport::new(2, 0, 0, Status::NotCertified);
        vec![a, b, c]
    }

    #[test]
    fn percentage_counts_only_correct_examples() {
        let s = Summary::from_reports("certify", None, &sample());
        assert_eq!((s.examples, s.attempted, s.certified), (3, 2, 1));
        assert_eq!(s.certified_pct, 50.0);
        assert!(s.mean_time_ms.is_none());
    }

    #[test]
    fn jsonl_round_trips_and_ends_with_footer() {
        let reports = sample();
        let mut buf = Vec::new();
        write_jsonl(
            &mut buf,
            &reports,
            &[Summary::from_reports("certify", None, &reports)],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let back: ExampleReport = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(back, reports[0]);
        assert!(lines[3].starts_with("{\"summary\""));
        assert!(!text.contains("time_ms"));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "index,label,predicted,method,status,min_bound,epochs,max_eps,time_ms"
        );
        assert_eq!(lines.next().unwrap(), "0,1,1,,certified,0.25,3,,");
        assert_eq!(text.lines().count(), 4);
    }
}
