//! CSV reports and their manifests.
//!
//! Rows are sorted before writing, so the CSV depends only on the rows and
//! never on the order trials finished in. Wall-clock time lives in the
//! manifest, keeping the CSV byte-identical across reruns.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::error::Result;

pub const CSV_HEADER: &str = "experiment,parameter,point,epoch,solver,metric,value,stddev";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Experiment label including fixed settings, e.g. `recovery_curve/s=8`.
    pub experiment: String,
    /// Name of the swept quantity.
    pub parameter: String,
    pub point: f64,
    pub epoch: Option<usize>,
    pub solver: String,
    pub metric: String,
    pub value: f64,
    pub stddev: f64,
}

impl Row {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then_with(|| self.parameter.cmp(&other.parameter))
            .then_with(|| self.point.total_cmp(&other.point))
            .then_with(|| self.epoch.cmp(&other.epoch))
            .then_with(|| self.solver.cmp(&other.solver))
            .then_with(|| self.metric.cmp(&other.metric))
    }
}

/// Decimal text with 12 significant digits.
pub fn format_sig(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.11e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// FNV-1a over the canonical configuration text.
pub fn config_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<Row>,
    /// Ordered `(key, value)` pairs; the seed and config hash come first.
    pub manifest: Vec<(String, String)>,
    pub wall_time: Duration,
}

impl Report {
    pub fn new(seed: u64, config_text: &str) -> Self {
        Self {
            rows: Vec::new(),
            manifest: vec![
                ("seed".into(), seed.to_string()),
                ("config_hash".into(), config_hash(config_text)),
            ],
            wall_time: Duration::ZERO,
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.to_string(), value.to_string()));
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(Row::cmp_key);
    }

    /// Sorted rows as CSV text, header first.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&Row> = self.rows.iter().collect();
        rows.sort_by(|a, b| a.cmp_key(b));
        let mut out = String::with_capacity(64 * (rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in rows {
            let epoch = r.epoch.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(&r.experiment),
                csv_field(&r.parameter),
                format_sig(r.point),
                epoch,
                csv_field(&r.solver),
                csv_field(&r.metric),
                format_sig(r.value),
                format_sig(r.stddev),
            );
        }
        out
    }

    /// Flat JSON object: manifest entries, row count, then wall time.
    pub fn manifest_text(&self) -> String {
        let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
        let mut out = String::from("{\n");
        for (k, v) in &self.manifest {
            let _ = writeln!(out, "  \"{}\": \"{}\",", esc(k), esc(v));
        }
        let _ = writeln!(out, "  \"rows\": \"{}\",", self.rows.len());
        let _ = writeln!(out, "  \"wall_time_seconds\": \"{:.3}\"", self.wall_time.as_secs_f64());
        out.push_str("}\n");
        out
    }

    pub fn write(&self, csv_path: &Path, manifest_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv())?;
        std::fs::write(manifest_path, self.manifest_text())?;
        Ok(())
    }
}

/// `out.csv` → `out.manifest.json`.
pub fn manifest_path_for(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("manifest.json")
}
