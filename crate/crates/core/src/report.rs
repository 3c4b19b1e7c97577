//! Report files: `report.csv`, `report.json` and variance tables.
//!
//! CSV columns are
//! `id,total_var,AAV_1..N,RAV_1..N,VVO_1..N,AVV,RVV,max_VVO`, followed by
//! `verdict,reasons,rank` once variants have been gated. Numbers are written
//! with four decimals; an infinite VVO is written as `inf`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::selector::{GateThresholds, RankKey, RankedList, RejectReason, Verdict};

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";

/// One report line: the statistics plus, after selection, the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(flatten)]
    pub metrics: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasons: Option<Vec<RejectReason>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

impl ReportRow {
    pub fn ungated(metrics: MetricsReport) -> Self {
        Self {
            metrics,
            accepted: None,
            reasons: None,
            rank: None,
        }
    }
}

/// Full JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gates: Option<GateThresholds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_key: Option<RankKey>,
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankedList>,
}

impl ReportFile {
    pub fn ungated(reports: Vec<MetricsReport>) -> Self {
        Self {
            gates: None,
            rank_key: None,
            rows: reports.into_iter().map(ReportRow::ungated).collect(),
            ranking: None,
        }
    }

    /// Attaches verdicts (matched by id) and ranks.
    pub fn gated(
        reports: Vec<MetricsReport>,
        verdicts: &[Verdict],
        ranked: RankedList,
        gates: GateThresholds,
    ) -> Self {
        let rows = reports
            .into_iter()
            .map(|metrics| {
                let verdict = verdicts.iter().find(|v| v.variant_id == metrics.variant_id);
                let rank = ranked.rank_of(&metrics.variant_id);
                ReportRow {
                    accepted: verdict.map(|v| v.accepted),
                    reasons: verdict.map(|v| v.reasons.clone()),
                    rank,
                    metrics,
                }
            })
            .collect();
        Self {
            gates: Some(gates),
            rank_key: Some(ranked.key),
            rows,
            ranking: Some(ranked),
        }
    }

    pub fn reports(&self) -> Vec<MetricsReport> {
        self.rows.iter().map(|r| r.metrics.clone()).collect()
    }

    fn is_gated(&self) -> bool {
        self.rows.iter().any(|r| r.accepted.is_some())
    }
}

pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_owned()
    } else {
        format!("{v:.4}")
    }
}

fn parse_value(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        other => other.parse().ok(),
    }
}

pub fn csv_header(areas: usize, gated: bool) -> Vec<String> {
    let mut header = vec!["id".to_owned(), "total_var".to_owned()];
    for prefix in ["AAV", "RAV", "VVO"] {
        header.extend((1..=areas).map(|i| format!("{prefix}_{i}")));
    }
    header.extend(["AVV", "RVV", "max_VVO"].map(String::from));
    if gated {
        header.extend(["verdict", "reasons", "rank"].map(String::from));
    }
    header
}

pub fn csv_record(row: &ReportRow, gated: bool) -> Vec<String> {
    let m = &row.metrics;
    let mut rec = vec![m.variant_id.clone(), format_value(m.total_variance)];
    for values in [&m.aav, &m.rav, &m.vvo] {
        rec.extend(values.iter().map(|&v| format_value(v)));
    }
    rec.extend([m.avv, m.rvv, m.max_vvo].map(format_value));
    if gated {
        rec.push(match row.accepted {
            Some(true) => "accepted".to_owned(),
            Some(false) => "rejected".to_owned(),
            None => String::new(),
        });
        rec.push(
            row.reasons
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(RejectReason::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        );
        rec.push(row.rank.map(|r| r.to_string()).unwrap_or_default());
    }
    rec
}

pub fn render_csv(report: &ReportFile) -> Result<Vec<u8>> {
    let gated = report.is_gated();
    let areas = report.rows.first().map_or(0, |r| r.metrics.area_count());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Encode(e.to_string());
    writer.write_record(csv_header(areas, gated)).map_err(csv_err)?;
    for row in &report.rows {
        if row.metrics.area_count() != areas {
            return Err(Error::InvalidParams(
                "report rows have different area counts".into(),
            ));
        }
        writer.write_record(csv_record(row, gated)).map_err(csv_err)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Encode(e.to_string()))
}

pub fn write_csv(report: &ReportFile, path: &Path) -> Result<()> {
    fs::write(path, render_csv(report)?).map_err(|e| Error::io(path, e))
}

pub fn write_json(report: &ReportFile, path: &Path) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(report).map_err(|e| Error::Encode(e.to_string()))?;
    json.push(b'\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<ReportFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: "report JSON",
        message: e.to_string(),
    })
}

/// Reads the statistics back from a `report.csv`. Values carry the four
/// decimals they were written with.
pub fn read_csv(path: &Path) -> Result<Vec<MetricsReport>> {
    let bad = |message: String| Error::Parse {
        what: "report CSV",
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => bad(format!("{other:?}")),
    })?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let areas = header.iter().filter(|h| h.starts_with("AAV_")).count();
    if areas == 0 || header.len() < 2 + 3 * areas + 3 {
        return Err(bad("missing statistic columns".into()));
    }
    let mut reports = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(parse_value)
                .ok_or_else(|| bad(format!("row {}: bad value in column {}", line + 1, i + 1)))
        };
        let span = |start: usize| (start..start + areas).map(num).collect::<Result<Vec<_>>>();
        let tail = 2 + 3 * areas;
        reports.push(MetricsReport {
            variant_id: rec.get(0).unwrap_or_default().to_owned(),
            total_variance: num(1)?,
            aav: span(2)?,
            rav: span(2 + areas)?,
            vvo: span(2 + 2 * areas)?,
            avv: num(tail)?,
            rvv: num(tail + 1)?,
            max_vvo: num(tail + 2)?,
        });
    }
    Ok(reports)
}

/// Precomputed variances for one image: `id,total_var,var_1,...,var_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub id: String,
    pub total: f64,
    pub areas: Vec<f64>,
}

/// Id that marks the baseline row of a variance table.
pub const ORIGINAL_ID: &str = "original";

/// Parses a variance table and splits off the `original` row.
pub fn read_variance_table(path: &Path) -> Result<(VarianceRow, Vec<VarianceRow>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_variance_table(&text)
}

pub fn parse_variance_table(text: &str) -> Result<(VarianceRow, Vec<VarianceRow>)> {
    let bad = |message: String| Error::Parse {
        what: "variance table",
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut original = None;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() < 3 {
            return Err(bad(format!("row {}: need id, total and area variances", line + 1)));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("row {}: '{v}' is not a number", line + 1))))
            .collect::<Result<Vec<_>>>()?;
        let row = VarianceRow {
            id: rec[0].to_owned(),
            total: values[0],
            areas: values[1..].to_vec(),
        };
        if row.id.eq_ignore_ascii_case(ORIGINAL_ID) {
            if original.replace(row).is_some() {
                return Err(bad("more than one 'original' row".into()));
            }
        } else {
            rows.push(row);
        }
    }
    let original = original.ok_or_else(|| bad("no row with id 'original'".into()))?;
    Ok((original, rows))
}
