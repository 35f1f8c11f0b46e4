//! CSV tables: sweep result rows and signature plots. Each file opens with a
//! `#` line naming its schema version.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{SignatureMode, SignaturePlot, SignaturePoint};
use crate::matcher::{Family, WeightFamily};
use crate::montecarlo::{CellSpec, FailureEstimate, SweepCell};
use crate::noise::{NoiseKind, NoiseModel};

pub const RESULTS_SCHEMA: &str = "# adaptive-toric results v1";
pub const SIGNATURE_SCHEMA: &str = "# adaptive-toric signature v1";
pub const SPECIALIZE_SCHEMA: &str = "# adaptive-toric specialize v1";
pub const ORACLE_SCHEMA: &str = "# adaptive-toric oracle v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub xi: usize,
    pub p: f64,
    #[serde(rename = "L")]
    pub size: usize,
    pub family: String,
    pub lambda: String,
    pub delta: Option<u64>,
    pub trials: u64,
    pub failures: u64,
    pub p_fail: f64,
    pub stderr: f64,
    pub effective_rate: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn from_cell(c: &SweepCell) -> Self {
        let d = &c.spec.decoder;
        let uses_delta = matches!(d.family, Family::SingleWeight | Family::MultiPeak);
        Self {
            model: c.spec.model.kind.name().into(),
            xi: c.spec.model.xi,
            p: c.spec.model.p,
            size: c.spec.size,
            family: d.family.name().into(),
            lambda: d.lambda_label(),
            delta: uses_delta.then(|| d.resolved_delta(c.spec.size)),
            trials: c.estimate.trials,
            failures: c.estimate.failures,
            p_fail: c.estimate.rate,
            stderr: c.estimate.stderr,
            effective_rate: c.effective_rate,
            seed: c.seed,
        }
    }

    pub fn to_cell(&self) -> Result<SweepCell, String> {
        let kind = NoiseKind::parse(&self.model)
            .ok_or_else(|| format!("unknown model {:?}", self.model))?;
        let model = NoiseModel::new(kind, self.p, self.xi).map_err(|e| e.to_string())?;
        let family = Family::parse(&self.family)
            .ok_or_else(|| format!("unknown family {:?}", self.family))?;
        let mut decoder = WeightFamily::from_label(family, &self.lambda)
            .ok_or_else(|| format!("bad lambda {:?} for {}", self.lambda, self.family))?;
        if let Some(d) = self.delta {
            if d != decoder.resolved_delta(self.size) {
                decoder = decoder.with_delta(d);
            }
        }
        if self.failures > self.trials || self.trials == 0 {
            return Err(format!(
                "{} failures out of {} trials",
                self.failures, self.trials
            ));
        }
        Ok(SweepCell {
            spec: CellSpec::new(self.size, model, decoder),
            estimate: FailureEstimate::from_counts(self.trials, self.failures),
            effective_rate: self.effective_rate,
            seed: self.seed,
        })
    }
}

fn check_schema(first: Option<&str>, schema: &str) -> Result<(), String> {
    match first {
        Some(line) if line.trim_end() == schema => Ok(()),
        Some(line) => Err(format!("expected schema line {schema:?}, found {line:?}")),
        None => Err("empty file".into()),
    }
}

fn split_schema(text: &str) -> (Option<&str>, &str) {
    match text.split_once('\n') {
        Some((first, rest)) => (Some(first), rest),
        None if text.is_empty() => (None, ""),
        None => (Some(text), ""),
    }
}

fn read_records<T: for<'de> Deserialize<'de>>(body: &str) -> Result<Vec<T>, String> {
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| format!("row {}: {e}", i + 1)))
        .collect()
}

fn write_records<T: Serialize>(
    out: &mut impl Write,
    schema: &str,
    rows: &[T],
    header: &[&str],
) -> std::io::Result<()> {
    writeln!(out, "{schema}")?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    out.write_all(&bytes)
}

pub const RESULT_COLUMNS: [&str; 13] = [
    "model",
    "xi",
    "p",
    "L",
    "family",
    "lambda",
    "delta",
    "trials",
    "failures",
    "p_fail",
    "stderr",
    "effective_rate",
    "seed",
];

pub fn write_results(out: &mut impl Write, rows: &[ResultRow]) -> std::io::Result<()> {
    write_records(out, RESULTS_SCHEMA, rows, &RESULT_COLUMNS)
}

/// Appends rows without the schema and header lines.
pub fn append_results(out: &mut impl Write, rows: &[ResultRow]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    out.write_all(&w.into_inner().map_err(|e| e.into_error())?)
}

pub fn read_results(text: &str) -> Result<Vec<ResultRow>, String> {
    let (first, body) = split_schema(text);
    check_schema(first, RESULTS_SCHEMA)?;
    let header = body.lines().next().unwrap_or_default();
    if header != RESULT_COLUMNS.join(",") {
        return Err(format!("unexpected columns {header:?}"));
    }
    read_records(body)
}

/// Rows of a possibly interrupted results file: a torn final line is dropped.
pub fn read_partial_results(text: &str) -> Result<Vec<ResultRow>, String> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    read_results(complete)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub xi: usize,
    pub lambda: u32,
    pub value: f64,
    pub error: f64,
}

pub fn write_plots(
    out: &mut impl Write,
    mode: SignatureMode,
    plots: &[SignaturePlot],
) -> std::io::Result<()> {
    let rows: Vec<PlotRow> = plots
        .iter()
        .flat_map(|pl| {
            pl.points.iter().map(move |pt| PlotRow {
                xi: pl.xi,
                lambda: pt.lambda,
                value: pt.value,
                error: pt.error,
            })
        })
        .collect();
    let schema = format!("{SIGNATURE_SCHEMA} mode={}", mode.name());
    write_records(out, &schema, &rows, &["xi", "lambda", "value", "error"])
}

pub fn read_plots(text: &str) -> Result<Vec<SignaturePlot>, String> {
    let (first, body) = split_schema(text);
    let first = first.ok_or("empty file")?;
    let mode = first
        .trim_end()
        .strip_prefix(SIGNATURE_SCHEMA)
        .and_then(|rest| rest.trim().strip_prefix("mode="))
        .and_then(SignatureMode::parse)
        .ok_or_else(|| {
            format!("expected schema line \"{SIGNATURE_SCHEMA} mode=...\", found {first:?}")
        })?;
    let header = body.lines().next().unwrap_or_default();
    if header != "xi,lambda,value,error" {
        return Err(format!("unexpected columns {header:?}"));
    }
    let rows: Vec<PlotRow> = read_records(body)?;
    if rows.is_empty() {
        return Err("no signature points".into());
    }
    let mut xis: Vec<usize> = rows.iter().map(|r| r.xi).collect();
    xis.dedup();
    let mut sorted = xis.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != xis.len() {
        return Err("rows for each xi must be contiguous".into());
    }
    xis.into_iter()
        .map(|xi| {
            let pts = rows
                .iter()
                .filter(|r| r.xi == xi)
                .map(|r| SignaturePoint {
                    lambda: r.lambda,
                    value: r.value,
                    error: r.error,
                })
                .collect();
            SignaturePlot::new(xi, mode, pts).map_err(|e| e.to_string())
        })
        .collect()
}
