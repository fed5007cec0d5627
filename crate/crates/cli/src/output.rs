//! CSV tables, metadata records and atomic file writes.

use std::fs;
use std::path::Path;

use dokc::expsum::cache::fmt17;
use dokc::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// A double at 17 significant digits.
pub fn num(x: f64) -> String {
    fmt17(x)
}

/// Write through a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::numerical(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::numerical(format!("csv encoding failed: {e}")))?;
    write_atomic(path, &bytes)
}

#[derive(Serialize)]
struct Metadata<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    results: T,
}

/// `metadata.json` with the resolved config and run results, plus
/// `config.toml` that re-runs the experiment.
pub fn write_metadata(dir: &Path, command: &str, config: &RunConfig, results: impl Serialize) -> Result<()> {
    let meta = Metadata {
        tool: "dokc",
        version: dokc::VERSION,
        command,
        config,
        results,
    };
    write_atomic(&dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    let toml = toml::to_string(config).map_err(|e| Error::config(format!("cannot render config: {e}")))?;
    write_atomic(&dir.join("config.toml"), toml.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_identifiers_with_commas() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["kernel", "x"], &[vec!["bump(1,2)".into(), num(0.1)]]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "kernel,x\n\"bump(1,2)\",1.0000000000000001e-1\n");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn metadata_re_reads_as_config() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            scenario: Some("example1".into()),
            seed: Some(3),
            ..Default::default()
        };
        write_metadata(dir.path(), "solve-ode", &c, serde_json::json!({"ok": true})).unwrap();
        let back = RunConfig::load(&dir.path().join("config.toml")).unwrap();
        assert_eq!(back, c);
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
        assert_eq!(meta["version"], dokc::VERSION);
    }
}
