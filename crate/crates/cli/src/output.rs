use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Failure;

/// Everything that determines a command's output. Its hash heads every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub preset: String,
    pub seed: u64,
    pub params: kerr_laser::LaserParams,
    /// The command's options after merging the config file.
    pub args: Value,
}

impl Inputs {
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(serde_json::to_vec(self).expect("inputs serialize")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_hash: String,
    pub inputs: Inputs,
    pub command_line: Vec<String>,
    pub config_file: Option<PathBuf>,
    /// SHA-256 of the config file's text, when one was used.
    pub config_sha256: Option<String>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
    pub summary: Value,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Round-trip formatting for numbers.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A CSV table: hash comment, header, rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, manifest_hash: &str) -> String {
        let mut s = format!("# manifest-hash: {manifest_hash}\n{}\n", self.header.join(","));
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// What a command produced, before anything is written.
pub struct Produced {
    /// The main table, written to `--out`.
    pub table: Table,
    /// Further tables, written next to it as `<stem>.<suffix>.csv`.
    pub extra: Vec<(&'static str, Table)>,
    pub summary: Value,
    /// Plot commands for the optional gnuplot script; `{csv}` stands for the
    /// main file name and `{stem}` for its stem.
    pub plot: Vec<String>,
    /// A failed internal cross-check: outputs are still written, exit code 3.
    pub check_failure: Option<String>,
}

pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

fn write(path: &Path, text: &str) -> Result<OutputFile, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(OutputFile {
        path: path.to_path_buf(),
        sha256: sha256_hex(text.as_bytes()),
    })
}

/// Writes the tables (and the gnuplot script when asked); returns the files written.
pub fn write_outputs(out: &Path, hash: &str, produced: &Produced, gnuplot: bool) -> Result<Vec<OutputFile>, Failure> {
    let mut files = vec![write(out, &produced.table.render(hash))?];
    for (suffix, t) in &produced.extra {
        files.push(write(&sibling(out, &format!("{suffix}.csv")), &t.render(hash))?);
    }
    if gnuplot && !produced.plot.is_empty() {
        let csv = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut gp = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        for line in &produced.plot {
            gp.push_str(&line.replace("{csv}", &csv).replace("{stem}", &stem));
            gp.push('\n');
        }
        write(&sibling(out, "gp"), &gp)?;
    }
    Ok(files)
}

pub fn write_manifest(out: &Path, manifest: &Manifest) -> Result<PathBuf, Failure> {
    let path = manifest_path(out);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write(&path, &(text + "\n"))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: not a manifest: {e}", path.display())))
}
