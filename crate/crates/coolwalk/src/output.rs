//! Output files: CSV with `#`-prefixed metadata headers, and the run
//! manifest. CSV bytes are a pure function of (config, seed); the manifest
//! additionally records wall time and is written atomically after all
//! outputs.

use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Write via a temp file and rename, so readers never observe a torn file.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

pub fn meta(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: u64,
    pub config_text: String,
    pub outputs: Vec<String>,
    pub band_ok: bool,
    pub notes: Vec<String>,
    pub started_unix: u64,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, config_text: String) -> RunManifest {
        RunManifest {
            subcommand: subcommand.to_string(),
            seed,
            config_text,
            outputs: Vec::new(),
            band_ok: true,
            notes: Vec::new(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_seconds: 0.0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# run manifest\n");
        s.push_str(&format!("subcommand = {}\n", self.subcommand));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("band_ok = {}\n", self.band_ok));
        s.push_str(&format!("started_unix = {}\n", self.started_unix));
        s.push_str(&format!("wall_seconds = {}\n", self.wall_seconds));
        s.push_str(&format!("outputs = {}\n", self.outputs.join(", ")));
        for note in &self.notes {
            s.push_str(&format!("note = {note}\n"));
        }
        s.push_str("\n--- effective config ---\n");
        s.push_str(&self.config_text);
        s
    }

    /// Written last, atomically, so a complete manifest implies complete
    /// outputs.
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join("manifest.txt");
        write_atomic(&path, &self.to_text())?;
        Ok(path)
    }
}
