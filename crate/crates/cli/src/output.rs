use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Output directory that records every file it writes for the manifest.
pub struct Outputs {
    dir: PathBuf,
    seed: u64,
    files: Vec<(String, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Outputs {
    pub fn create(dir: &Path, seed: u64) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), seed, files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn csv<F>(&mut self, name: &str, fill: F) -> std::io::Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }

    /// Writes `body` with `manifest` and `seed` keys added.
    pub fn json(&mut self, name: &str, mut body: Value) -> std::io::Result<()> {
        if let Value::Object(map) = &mut body {
            map.insert("manifest".into(), Value::String(MANIFEST.into()));
            map.insert("seed".into(), json!(self.seed));
        }
        let mut text = serde_json::to_string_pretty(&body)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, subcommand: &str, inputs: Value, wall_time: f64) -> std::io::Result<()> {
        let outputs: Vec<Value> = self.files.iter().map(|(f, h)| json!({ "file": f, "sha256": h })).collect();
        let manifest = json!({
            "tool": "mems",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "inputs": inputs,
            "seed": self.seed,
            "wall_time_s": wall_time,
            "outputs": outputs,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)
    }
}
