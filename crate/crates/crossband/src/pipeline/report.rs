//! Result tables: tab-separated serialization with a provenance header,
//! plus an aligned rendering for terminals.

use crate::error::{Error, Result};

/// How a run identifies itself in every emitted table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub dataset_sha256: String,
    pub detector: String,
    pub notes: Vec<String>,
}

/// Outcome of one evaluated condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub condition: String,
    pub parameter: String,
    pub detector: String,
    pub accuracy: f64,
    pub acc_real: f64,
    pub acc_gan: f64,
    pub n_real: usize,
    pub n_gan: usize,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

/// A provenance block plus one row per condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub provenance: Provenance,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Rows whose condition failed to evaluate.
    pub fn failed_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.status != RowStatus::Ok)
    }

    /// Mean accuracy over rows selected by condition name.
    pub fn mean_accuracy_where(&self, mut pred: impl FnMut(&ResultRow) -> bool) -> Option<f64> {
        let accs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.status == RowStatus::Ok && pred(r))
            .map(|r| r.accuracy)
            .collect();
        if accs.is_empty() {
            None
        } else {
            Some(accs.iter().sum::<f64>() / accs.len() as f64)
        }
    }
}

const HEADER_TAG: &str = "# coocc-results-v1";
const COLUMNS: &str = "condition\tparameter\tdetector\taccuracy\tacc_real\tacc_gan\tn_real\tn_gan\tstatus";

/// Serialize to tab-separated text with `#` provenance header lines.
pub fn to_tsv(table: &ResultTable) -> String {
    let p = &table.provenance;
    let mut out = String::new();
    out.push_str(HEADER_TAG);
    out.push('\n');
    out.push_str(&format!("# tool: crossband {}\n", p.version));
    out.push_str(&format!("# seed: {}\n", p.seed));
    out.push_str(&format!("# config: {}\n", p.config_sha256));
    out.push_str(&format!("# dataset: {}\n", p.dataset_sha256));
    out.push_str(&format!("# detector: {}\n", p.detector));
    for note in &p.notes {
        out.push_str(&format!("# note: {note}\n"));
    }
    out.push_str(COLUMNS);
    out.push('\n');
    for r in &table.rows {
        match &r.status {
            RowStatus::Ok => out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\tok\n",
                r.condition,
                r.parameter,
                r.detector,
                r.accuracy,
                r.acc_real,
                r.acc_gan,
                r.n_real,
                r.n_gan
            )),
            RowStatus::Failed(msg) => out.push_str(&format!(
                "{}\t{}\t{}\t-\t-\t-\t-\t-\tfailed: {}\n",
                r.condition,
                r.parameter,
                r.detector,
                msg.replace(['\t', '\n'], " ")
            )),
        }
    }
    out
}

/// Parse the tab-separated form back into a table.
pub fn parse_tsv(text: &str) -> Result<ResultTable> {
    let mut lines = text.lines().peekable();
    if lines.next() != Some(HEADER_TAG) {
        return Err(Error::Parse("missing result table header".into()));
    }
    let mut provenance = Provenance {
        version: String::new(),
        seed: 0,
        config_sha256: String::new(),
        dataset_sha256: String::new(),
        detector: String::new(),
        notes: Vec::new(),
    };
    while let Some(line) = lines.peek() {
        let Some(rest) = line.strip_prefix("# ") else {
            break;
        };
        if let Some(v) = rest.strip_prefix("tool: crossband ") {
            provenance.version = v.to_string();
        } else if let Some(v) = rest.strip_prefix("seed: ") {
            provenance.seed = v
                .parse()
                .map_err(|_| Error::Parse(format!("bad seed line: {line}")))?;
        } else if let Some(v) = rest.strip_prefix("config: ") {
            provenance.config_sha256 = v.to_string();
        } else if let Some(v) = rest.strip_prefix("dataset: ") {
            provenance.dataset_sha256 = v.to_string();
        } else if let Some(v) = rest.strip_prefix("detector: ") {
            provenance.detector = v.to_string();
        } else if let Some(v) = rest.strip_prefix("note: ") {
            provenance.notes.push(v.to_string());
        } else {
            return Err(Error::Parse(format!("unknown header line: {line}")));
        }
        lines.next();
    }
    if lines.next() != Some(COLUMNS) {
        return Err(Error::Parse("missing result table column row".into()));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 9 {
            return Err(Error::Parse(format!(
                "result row has {} columns, expected 9: {line:?}",
                cols.len()
            )));
        }
        let status = match cols[8] {
            "ok" => RowStatus::Ok,
            s => RowStatus::Failed(s.strip_prefix("failed: ").unwrap_or(s).to_string()),
        };
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            if s == "-" {
                Ok(f64::NAN)
            } else {
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad {what} value {s:?}")))
            }
        };
        let parse_n = |s: &str, what: &str| -> Result<usize> {
            if s == "-" {
                Ok(0)
            } else {
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad {what} value {s:?}")))
            }
        };
        rows.push(ResultRow {
            condition: cols[0].to_string(),
            parameter: cols[1].to_string(),
            detector: cols[2].to_string(),
            accuracy: parse_f(cols[3], "accuracy")?,
            acc_real: parse_f(cols[4], "acc_real")?,
            acc_gan: parse_f(cols[5], "acc_gan")?,
            n_real: parse_n(cols[6], "n_real")?,
            n_gan: parse_n(cols[7], "n_gan")?,
            status,
        });
    }
    Ok(ResultTable { provenance, rows })
}

/// Human-readable aligned rendering (provenance block plus padded columns).
pub fn render_aligned(table: &ResultTable) -> String {
    let p = &table.provenance;
    let mut out = String::new();
    out.push_str(&format!(
        "crossband {} | seed {} | detector {}\nconfig  {}\ndataset {}\n",
        p.version, p.seed, p.detector, p.config_sha256, p.dataset_sha256
    ));
    for note in &p.notes {
        out.push_str(&format!("note    {note}\n"));
    }
    let header = ["condition", "parameter", "accuracy", "acc_real", "acc_gan", "n", "status"];
    let mut cells: Vec<[String; 7]> = vec![header.map(str::to_string)];
    for r in &table.rows {
        let (acc, ar, ag) = match r.status {
            RowStatus::Ok => (
                format!("{:.2}%", 100.0 * r.accuracy),
                format!("{:.2}%", 100.0 * r.acc_real),
                format!("{:.2}%", 100.0 * r.acc_gan),
            ),
            RowStatus::Failed(_) => ("-".into(), "-".into(), "-".into()),
        };
        let status = match &r.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Failed(m) => format!("failed: {m}"),
        };
        cells.push([
            r.condition.clone(),
            r.parameter.clone(),
            acc,
            ar,
            ag,
            format!("{}", r.n_real + r.n_gan),
            status,
        ]);
    }
    let mut widths = [0usize; 7];
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
