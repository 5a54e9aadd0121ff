//! Report files: JSON and CSV with 17 significant digits, each tagged with
//! the spec hash, plus a run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::problem::{ProblemSpec, ToleranceSet};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records to report")]
    EmptyReport,
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Formats floats as `{:.16e}`, enough to round-trip every `f64`.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Compact JSON with 17 significant digits per float.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// SHA-256 of the canonical spec text, hex encoded.
pub fn spec_hash(spec: &ProblemSpec) -> String {
    hex::encode(Sha256::digest(spec.to_spec_text().as_bytes()))
}

/// A flat table row.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

/// JSON report body: the payload with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub spec_hash: String,
    pub command: String,
    pub tool_version: String,
    pub data: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec_hash: String,
    pub command: String,
    pub tolerances: ToleranceSet,
    pub tool_version: String,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

/// Writes report files into one directory and records them in the manifest.
pub struct ReportWriter {
    dir: PathBuf,
    spec_hash: String,
    command: String,
    tolerances: ToleranceSet,
    outputs: Vec<String>,
    started: Instant,
}

impl ReportWriter {
    pub fn new(dir: &Path, spec_hash: String, command: &str, tolerances: ToleranceSet) -> Result<Self, ReportError> {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(ReportWriter {
            dir: dir.to_path_buf(),
            spec_hash,
            command: command.to_string(),
            tolerances,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn spec_hash(&self) -> &str {
        &self.spec_hash
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), ReportError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| ReportError::Io { path, source })?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes `data` inside an [`Envelope`]; `count` is the number of records
    /// it carries.
    pub fn write_json<T: Serialize>(&mut self, name: &str, data: &T, count: usize) -> Result<(), ReportError> {
        if count == 0 {
            return Err(ReportError::EmptyReport);
        }
        let envelope = Envelope {
            spec_hash: self.spec_hash.clone(),
            command: self.command.clone(),
            tool_version: TOOL_VERSION.to_string(),
            data,
        };
        let mut text = to_json_string(&envelope)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes a CSV table headed by a `# spec_hash=` comment line.
    pub fn write_csv<R: CsvRow>(&mut self, name: &str, rows: &[R]) -> Result<(), ReportError> {
        if rows.is_empty() {
            return Err(ReportError::EmptyReport);
        }
        let mut text = format!("# spec_hash={}\n{}\n", self.spec_hash, R::header().join(","));
        for r in rows {
            text.push_str(&r.cells().join(","));
            text.push('\n');
        }
        self.write(name, &text)
    }

    /// Writes the manifest and returns it.
    pub fn finish(mut self) -> Result<RunManifest, ReportError> {
        let manifest = RunManifest {
            spec_hash: self.spec_hash.clone(),
            command: self.command.clone(),
            tolerances: self.tolerances,
            tool_version: TOOL_VERSION.to_string(),
            outputs: self.outputs.clone(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let mut text = to_json_string(&manifest)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|source| ReportError::Io { path, source })?;
        self.outputs.clear();
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        x: f64,
        n: usize,
    }

    impl CsvRow for Row {
        fn header() -> &'static [&'static str] {
            &["x", "n"]
        }

        fn cells(&self) -> Vec<String> {
            vec![format_float(self.x), self.n.to_string()]
        }
    }

    #[test]
    fn floats_have_seventeen_digits_and_round_trip() {
        let xs = vec![0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, std::f64::consts::PI];
        let s = to_json_string(&xs).unwrap();
        assert!(s.contains("1.0000000000000001e-1"));
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
        assert_eq!(to_json_string(&f64::NAN).unwrap(), "null");
    }

    #[test]
    fn writer_emits_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ProblemSpec::new(vec![1.0], vec![0.0, 1.0]).unwrap();
        let hash = spec_hash(&spec);
        assert_eq!(hash.len(), 64);
        let mut w = ReportWriter::new(dir.path(), hash.clone(), "test", *spec.tol()).unwrap();
        let rows = vec![Row { x: 0.5, n: 1 }];
        w.write_json("rows.json", &rows, rows.len()).unwrap();
        w.write_csv("rows.csv", &rows).unwrap();
        assert!(matches!(
            w.write_csv::<Row>("empty.csv", &[]),
            Err(ReportError::EmptyReport)
        ));
        assert!(matches!(
            w.write_json("empty.json", &Vec::<Row>::new(), 0),
            Err(ReportError::EmptyReport)
        ));
        let m = w.finish().unwrap();
        assert_eq!(m.outputs, vec!["rows.json", "rows.csv"]);
        for name in &m.outputs {
            let text = fs::read_to_string(dir.path().join(name)).unwrap();
            assert!(text.contains(&hash));
        }
        let csv = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert!(csv.ends_with("x,n\n5.0000000000000000e-1,1\n"));
        let manifest: RunManifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(manifest.spec_hash, hash);
    }

    #[test]
    fn spec_hash_tracks_content() {
        let a = ProblemSpec::new(vec![1.0], vec![0.0, 1.0]).unwrap();
        let b = ProblemSpec::new(vec![1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(spec_hash(&a), spec_hash(&a.clone()));
        assert_ne!(spec_hash(&a), spec_hash(&b));
    }
}
