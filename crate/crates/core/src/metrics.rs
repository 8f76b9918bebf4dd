//! Confusion-matrix bookkeeping with `attack` as the positive class.
//!
//! Metrics whose denominator is zero are reported as `None` rather than 0
//! or NaN; CSV output spells that as `NA` and JSON as `null`.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{self, Header};
use crate::error::{Error, Result};
use crate::label::Label;

pub const METRICS_MAGIC: &str = "arp-metrics";
pub const CSV_COLUMNS: &str = "subject,tp,fp,fn,tn,accuracy,precision,recall,f1,fpr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Attack, Label::Attack) => self.tp += 1,
            (Label::Attack, Label::Benign) => self.fp += 1,
            (Label::Benign, Label::Attack) => self.fn_ += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
        }
    }
}

impl std::ops::AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
        self.tn += rhs.tn;
    }
}

pub fn confusion(predicted: &[Label], actual: &[Label]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::Precondition(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Precondition("confusion of empty label sequences".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        m.record(p, a);
    }
    Ok(m)
}

/// Who a report describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Subject {
    Layer(usize),
    Ensemble,
    Named(String),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Layer(i) => write!(f, "layer{i}"),
            Subject::Ensemble => f.write_str("ensemble"),
            Subject::Named(s) => f.write_str(s),
        }
    }
}

impl From<Subject> for String {
    fn from(s: Subject) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Subject {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "ensemble" {
            return Ok(Subject::Ensemble);
        }
        if let Some(i) = s.strip_prefix("layer").and_then(|r| r.parse().ok()) {
            return Ok(Subject::Layer(i));
        }
        if s.is_empty() || s.contains([',', '\n']) {
            return Err(format!("invalid subject `{s}`"));
        }
        Ok(Subject::Named(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub subject: Subject,
    pub matrix: ConfusionMatrix,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn derive(matrix: ConfusionMatrix) -> MetricsReport {
    derive_for(Subject::Ensemble, matrix)
}

pub fn derive_for(subject: Subject, m: ConfusionMatrix) -> MetricsReport {
    let accuracy = ratio(m.tp + m.tn, m.total());
    let precision = ratio(m.tp, m.tp + m.fp);
    let recall = ratio(m.tp, m.tp + m.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let fpr = ratio(m.fp, m.fp + m.tn);
    MetricsReport {
        subject,
        matrix: m,
        accuracy,
        precision,
        recall,
        f1,
        fpr,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        let m = &self.matrix;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.subject,
            m.tp,
            m.fp,
            m.fn_,
            m.tn,
            cell(self.accuracy),
            cell(self.precision),
            cell(self.recall),
            cell(self.f1),
            cell(self.fpr)
        )
    }

    pub fn parse_csv_row(row: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 10 {
            return Err(format!("expected 10 columns, found {}", f.len()));
        }
        let count = |s: &str| s.parse::<u64>().map_err(|_| format!("invalid count `{s}`"));
        let metric = |s: &str| -> std::result::Result<Option<f64>, String> {
            if s == "NA" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("invalid metric `{s}`"))
            }
        };
        Ok(MetricsReport {
            subject: Subject::try_from(f[0].to_owned())?,
            matrix: ConfusionMatrix {
                tp: count(f[1])?,
                fp: count(f[2])?,
                fn_: count(f[3])?,
                tn: count(f[4])?,
            },
            accuracy: metric(f[5])?,
            precision: metric(f[6])?,
            recall: metric(f[7])?,
            f1: metric(f[8])?,
            fpr: metric(f[9])?,
        })
    }
}

/// CSV with a versioned comment header, then the fixed column line.
pub fn write_metrics_csv(reports: &[MetricsReport], path: &Path, header: &Header) -> Result<()> {
    let mut out = artifact::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    writeln!(out, "{CSV_COLUMNS}").map_err(io)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsReport>> {
    let mut out = Vec::new();
    for (idx, line) in artifact::open_lines(path)?.enumerate() {
        let line = line?;
        if line.starts_with('#') || line == CSV_COLUMNS || line.is_empty() {
            continue;
        }
        out.push(MetricsReport::parse_csv_row(&line).map_err(|r| Error::parse(path, idx + 1, r))?);
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_metrics_jsonl(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut out = artifact::create(path)?;
    let io = |e| Error::io(path, e);
    for r in reports {
        let json = serde_json::to_string(r).map_err(|e| Error::Invariant(e.to_string()))?;
        writeln!(out, "{json}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Attack as A, Benign as B};

    fn cm(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    #[test]
    fn identity_predictions() {
        assert_eq!(confusion(&[A, B], &[A, B]).unwrap(), cm(1, 0, 0, 1));
    }

    #[test]
    fn all_missed() {
        assert_eq!(confusion(&[B; 5], &[A; 5]).unwrap(), cm(0, 0, 5, 0));
    }

    #[test]
    fn bad_inputs() {
        assert!(confusion(&[A], &[A, B]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn hand_substituted_values() {
        let r = derive(cm(9, 1, 1, 9));
        for v in [r.accuracy, r.precision, r.recall, r.f1] {
            assert!((v.unwrap() - 0.9).abs() < 1e-15);
        }
        assert!((r.fpr.unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_denominators_are_undefined() {
        let r = derive(cm(0, 0, 0, 10));
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, None);
        assert_eq!(r.f1, None);
        assert_eq!(r.fpr, Some(0.0));
        assert_eq!(r.accuracy, Some(1.0));
    }

    #[test]
    fn perfect_classifier() {
        for n in [1, 7, 1000] {
            let r = derive(cm(n, 0, 0, n));
            assert_eq!(r.accuracy, Some(1.0));
            assert_eq!(r.precision, Some(1.0));
            assert_eq!(r.recall, Some(1.0));
            assert_eq!(r.f1, Some(1.0));
            assert_eq!(r.fpr, Some(0.0));
        }
    }

    #[test]
    fn csv_roundtrip_and_na() {
        let r = derive_for(Subject::Layer(2), cm(0, 0, 0, 10));
        let row = r.csv_row();
        assert_eq!(row, "layer2,0,0,0,10,1,NA,NA,NA,0");
        assert_eq!(MetricsReport::parse_csv_row(&row).unwrap(), r);
    }

    #[test]
    fn json_uses_null_and_fn_key() {
        let r = derive(cm(0, 0, 0, 3));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"precision\":null"));
        assert!(json.contains("\"fn\":0"));
        assert!(json.contains("\"subject\":\"ensemble\""));
    }
}
