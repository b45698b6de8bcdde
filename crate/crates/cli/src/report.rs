use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::run::{Outcome, RunError, Table};

pub const VERSION: &str = concat!("qbsde ", env!("CARGO_PKG_VERSION"));

/// sha256 of the compact JSON of the resolved config.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn csv_bytes(t: &Table) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

/// The JSON report of one run; contains no timings so reruns are byte-identical.
pub fn report_json(cfg: &ExperimentConfig, outcome: &Result<Outcome, RunError>) -> Value {
    let mut v = json!({
        "name": cfg.name,
        "experiment": cfg.experiment.tag(),
        "version": VERSION,
        "config_sha256": config_hash(cfg),
        "config": cfg,
    });
    let body = match outcome {
        Ok(o) => json!({ "verdict": o.verdict, "gap": o.gap, "tolerance": o.tolerance, "result": o.result }),
        Err(e) => json!({ "verdict": "error", "exit_code": e.code, "error": e.message }),
    };
    if let (Value::Object(m), Value::Object(b)) = (&mut v, body) {
        m.extend(b);
    }
    v
}

/// Write `<name>.json` and the CSV tables of one run into `dir`.
pub fn write_reports(dir: &Path, cfg: &ExperimentConfig, outcome: &Result<Outcome, RunError>) -> std::io::Result<()> {
    let mut json = serde_json::to_vec_pretty(&report_json(cfg, outcome)).map_err(std::io::Error::other)?;
    json.push(b'\n');
    write_atomic(&dir.join(format!("{}.json", cfg.name)), &json)?;
    if let Ok(o) = outcome {
        for t in &o.tables {
            let file = match t.suffix {
                Some(s) => format!("{}.{s}.csv", cfg.name),
                None => format!("{}.csv", cfg.name),
            };
            write_atomic(&dir.join(file), &csv_bytes(t)?)?;
        }
    }
    Ok(())
}

/// One row of the suite summary.
pub struct SummaryRow {
    pub name: String,
    pub verdict: String,
    pub gap: Option<f64>,
    pub tolerance: Option<f64>,
    pub seconds: f64,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "verdict", "gap", "tolerance", "seconds"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for r in rows {
        w.write_record([r.name.clone(), r.verdict.clone(), opt(r.gap), opt(r.tolerance), format!("{:.3}", r.seconds)])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    write_atomic(path, &bytes)
}
