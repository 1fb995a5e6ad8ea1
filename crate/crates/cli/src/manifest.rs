//! `manifest.txt`: ordered `key = value` lines describing a run.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use tcspc_core::Result;

pub struct Manifest {
    entries: Vec<(String, String)>,
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self {
            entries: Vec::new(),
        };
        m.set("tool", "tcspc");
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Records an input path and the FNV-1a hash of its contents.
    pub fn file(&mut self, key: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        self.set(key, path.display());
        self.set(&format!("{key}_fnv1a"), format!("{:016x}", fnv1a(&bytes)));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text: String = self
            .entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        fs::write(dir.join("manifest.txt"), text)?;
        Ok(())
    }
}
