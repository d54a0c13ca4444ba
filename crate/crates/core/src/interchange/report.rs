use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use super::{InterchangeError, Result};

/// Evaluation summary written by `evaluate`. Field order is the on-disk key
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionReport,
    pub nll: f64,
    pub ece: f64,
    /// `None` when the logits were evaluated without a fitted temperature.
    pub temperature: Option<f64>,
    pub ece_bins: usize,
    pub bin_stats: Vec<BinStat>,
    pub per_class: Vec<ClassStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub num_classes: usize,
    /// `counts[t][p]`: records of true class `t` predicted as `p`.
    pub counts: Vec<Vec<u64>>,
    // binary tasks only; class 1 is the positive class
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp: Option<u64>,
    #[serde(default, rename = "fn", skip_serializing_if = "Option::is_none")]
    pub fn_: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tn: Option<u64>,
}

/// Per-bin reliability statistics; the means are `None` for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub count: u64,
    pub mean_confidence: Option<f64>,
    pub mean_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStat {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("accuracy", self.accuracy),
            ("macro_precision", self.macro_precision),
            ("macro_recall", self.macro_recall),
            ("macro_f1", self.macro_f1),
            ("ece", self.ece),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(InterchangeError::Invalid(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if !(self.nll >= 0.0 && self.nll.is_finite()) {
            return Err(InterchangeError::Invalid(format!(
                "nll = {} invalid",
                self.nll
            )));
        }
        if let Some(t) = self.temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(InterchangeError::Invalid(format!(
                    "temperature = {t} invalid"
                )));
            }
        }
        if self.bin_stats.len() != self.ece_bins {
            return Err(InterchangeError::Invalid(format!(
                "{} bin stats for {} bins",
                self.bin_stats.len(),
                self.ece_bins
            )));
        }
        let binned: u64 = self.bin_stats.iter().map(|b| b.count).sum();
        let confused: u64 = self.confusion.counts.iter().flatten().sum();
        if binned != self.n || confused != self.n {
            return Err(InterchangeError::Invalid(format!(
                "counts do not sum to n = {} (bins {binned}, confusion {confused})",
                self.n
            )));
        }
        Ok(())
    }
}

/// Pretty JSON formatter that prints every real with exactly 6 decimals.
struct SixDecimals<'a>(PrettyFormatter<'a>);

impl Formatter for SixDecimals<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.6}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.6}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

/// Serializes any value as pretty JSON with 6-decimal reals and a trailing
/// newline.
pub(crate) fn to_fixed_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, SixDecimals(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn report_to_json(report: &MetricsReport) -> Result<String> {
    report.validate()?;
    to_fixed_json(report)
}

pub fn write_report_json(report: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = report_to_json(report)?;
    fs::write(path, text).map_err(|e| InterchangeError::io(path, e))
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<MetricsReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| InterchangeError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
