use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Formats with 12 significant digits, switching to exponent notation for
/// very small or very large magnitudes.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').unwrap();
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

pub fn join(xs: &[f64], sep: &str) -> String {
    xs.iter().map(|&x| sig12(x)).collect::<Vec<_>>().join(sep)
}

/// A CSV table whose numeric cells are already formatted.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_secs: f64,
    pub outputs: Value,
    pub files: Vec<String>,
}

/// Collects the files of one run and writes them together with the manifest.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    files: Vec<(String, String)>,
}

impl Run {
    pub fn new(dir: &Path, command: &'static str) -> Self {
        Self { dir: dir.to_path_buf(), command, files: Vec::new() }
    }

    pub fn csv(&mut self, table: &Table) {
        self.files.push((format!("{}.csv", self.command), table.to_csv()));
    }

    pub fn json(&mut self, value: &impl Serialize) -> Result<()> {
        let body = serde_json::to_string_pretty(value)?;
        self.files.push((format!("{}.json", self.command), body));
        Ok(())
    }

    pub fn finish(self, argv: Vec<String>, params: Value, seed: Option<u64>, outputs: Value, elapsed: Duration) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating output directory {}", self.dir.display()))?;
        let mut names = Vec::new();
        for (name, body) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            names.push(name.clone());
        }
        let manifest = RunManifest {
            command: self.command.to_string(),
            argv,
            params,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs: elapsed.as_secs_f64(),
            outputs,
            files: names,
        };
        let path = self.dir.join(format!("{}.manifest.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
