use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{InterchangeError, Result};

/// One classifier output: the true class and the raw pre-softmax scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub label: usize,
    pub logits: Vec<f64>,
}

/// A validated set of labeled logit vectors.
///
/// Invariants: at least one record, at least two classes, every record has
/// exactly `num_classes` finite logits and a label in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLogits {
    num_classes: usize,
    records: Vec<LogitRecord>,
}

impl LabeledLogits {
    pub fn new(num_classes: usize, records: Vec<LogitRecord>) -> Result<Self> {
        if num_classes < 2 {
            return Err(InterchangeError::Invalid(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if records.is_empty() {
            return Err(InterchangeError::Invalid("no records".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.logits.len() != num_classes {
                return Err(InterchangeError::Invalid(format!(
                    "record {i}: expected {num_classes} logits, found {}",
                    r.logits.len()
                )));
            }
            if r.label >= num_classes {
                return Err(InterchangeError::Invalid(format!(
                    "record {i}: label {} out of range",
                    r.label
                )));
            }
            if let Some(z) = r.logits.iter().find(|z| !z.is_finite()) {
                return Err(InterchangeError::Invalid(format!(
                    "record {i}: non-finite logit {z}"
                )));
            }
        }
        Ok(LabeledLogits {
            num_classes,
            records,
        })
    }

    /// Builds from parallel label and logit-row sequences.
    pub fn from_rows(num_classes: usize, labels: &[usize], rows: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != rows.len() {
            return Err(InterchangeError::Invalid(format!(
                "{} labels for {} logit rows",
                labels.len(),
                rows.len()
            )));
        }
        let records = labels
            .iter()
            .zip(rows)
            .map(|(&label, logits)| LogitRecord { label, logits })
            .collect();
        Self::new(num_classes, records)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LogitRecord] {
        &self.records
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Returns a copy with every logit multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| LogitRecord {
                label: r.label,
                logits: r.logits.iter().map(|z| z * factor).collect(),
            })
            .collect();
        Self::new(self.num_classes, records)
    }
}

/// Formats `x` with 9 significant digits, keeping trailing zeros
/// (the `%#.9g` convention): fixed notation for decimal exponents in
/// `[-5, 9)`, scientific otherwise.
pub fn format_sig9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        let sign = if x.is_sign_negative() { "-" } else { "" };
        return format!("{sign}0.{}", "0".repeat((DIGITS - 1) as usize));
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (_, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        format!("{:.*}", (DIGITS - 1 - exp) as usize, x)
    } else {
        sci
    }
}

fn header_line(num_classes: usize) -> String {
    let mut h = String::from("label");
    for k in 0..num_classes {
        let _ = write!(h, ",logit_{k}");
    }
    h
}

pub fn write_logits_csv(data: &LabeledLogits, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if data.is_empty() {
        return Err(InterchangeError::Invalid("no records".into()));
    }
    let mut out = header_line(data.num_classes);
    out.push('\n');
    for r in &data.records {
        let _ = write!(out, "{}", r.label);
        for &z in &r.logits {
            out.push(',');
            out.push_str(&format_sig9(z));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| InterchangeError::io(path, e))
}

pub fn read_logits_csv(path: impl AsRef<Path>) -> Result<LabeledLogits> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| InterchangeError::io(path, e))?;
    parse_logits_csv(&text)
}

pub(crate) fn parse_logits_csv(text: &str) -> Result<LabeledLogits> {
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));

    let header = lines
        .next()
        .filter(|h| !h.is_empty())
        .ok_or_else(|| InterchangeError::parse(1, "missing header"))?;
    let num_classes = parse_header(header)?;

    let mut records = Vec::new();
    let mut pending_blank = None;
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.is_empty() {
            pending_blank.get_or_insert(lineno);
            continue;
        }
        if let Some(blank) = pending_blank {
            return Err(InterchangeError::parse(blank, "empty row"));
        }
        records.push(parse_row(line, lineno, num_classes)?);
    }
    if records.is_empty() {
        return Err(InterchangeError::parse(2, "no data rows"));
    }
    LabeledLogits::new(num_classes, records)
}

fn parse_header(header: &str) -> Result<usize> {
    let fields: Vec<&str> = header.split(',').collect();
    if fields[0] != "label" {
        return Err(InterchangeError::parse(
            1,
            "malformed header: first column must be `label`",
        ));
    }
    for (k, f) in fields[1..].iter().enumerate() {
        if *f != format!("logit_{k}") {
            return Err(InterchangeError::parse(
                1,
                format!("malformed header: expected `logit_{k}`, found `{f}`"),
            ));
        }
    }
    let k = fields.len() - 1;
    if k < 2 {
        return Err(InterchangeError::parse(
            1,
            "malformed header: need at least 2 logit columns",
        ));
    }
    Ok(k)
}

fn parse_row(line: &str, lineno: usize, num_classes: usize) -> Result<LogitRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != num_classes + 1 {
        return Err(InterchangeError::parse(
            lineno,
            format!(
                "ragged row: expected {} fields, found {}",
                num_classes + 1,
                fields.len()
            ),
        ));
    }
    let label: usize = fields[0]
        .trim()
        .parse()
        .map_err(|_| InterchangeError::parse(lineno, "non-integer label"))?;
    if label >= num_classes {
        return Err(InterchangeError::parse(lineno, "label out of range"));
    }
    let mut logits = Vec::with_capacity(num_classes);
    for f in &fields[1..] {
        let f = f.trim();
        if f.is_empty() {
            return Err(InterchangeError::parse(lineno, "missing logit"));
        }
        let z: f64 = f
            .parse()
            .map_err(|_| InterchangeError::parse(lineno, format!("unparseable logit `{f}`")))?;
        if !z.is_finite() {
            return Err(InterchangeError::parse(lineno, "non-finite logit"));
        }
        logits.push(z);
    }
    Ok(LogitRecord { label, logits })
}
