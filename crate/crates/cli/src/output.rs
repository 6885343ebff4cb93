use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sgfem::driver::{write_csv, AdaptiveTrace};

use crate::config::RunConfig;

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

pub fn csv_bytes(trace: &AdaptiveTrace) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_csv(trace, &mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct Dump<'a> {
    config: &'a RunConfig,
    trace: &'a AdaptiveTrace,
}

pub fn json_bytes(config: &RunConfig, trace: &AdaptiveTrace) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&Dump { config, trace })?;
    out.push(b'\n');
    Ok(out)
}

/// `trace.csv` → `trace.json`.
pub fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// One line per run, the layout of a cost/rate table.
pub struct SummaryRow {
    pub config: RunConfig,
    pub stop: String,
    pub iterations: Option<usize>,
    pub final_eta: Option<f64>,
    pub cost: Option<usize>,
    pub rate: Option<f64>,
    pub file: String,
}

pub const SUMMARY_HEADER: &str = "criterion,theta_x,theta_p,vartheta,stop,iterations,final_eta,cost,rate,file";

pub fn summary_bytes(rows: &[SummaryRow]) -> Vec<u8> {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.config.criterion,
            r.config.theta_x,
            r.config.theta_p,
            r.config.vartheta,
            r.stop,
            opt(r.iterations.map(|v| v.to_string())),
            opt(r.final_eta.map(|v| format!("{v:.16e}"))),
            opt(r.cost.map(|v| v.to_string())),
            opt(r.rate.map(|v| format!("{v:.16e}"))),
            r.file
        ));
    }
    s.into_bytes()
}
