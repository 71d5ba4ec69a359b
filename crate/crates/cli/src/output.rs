//! Artifact writers. Every file starts with, or carries, its provenance.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use shapefuzz::Provenance;

use crate::CliError;

pub struct Outputs {
    pub root: PathBuf,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct Header<'a> {
    provenance: &'a Provenance,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl Outputs {
    pub fn new(root: PathBuf, provenance: Provenance) -> Self {
        Outputs { root, provenance }
    }

    /// `root/sub/name`, creating the directory.
    pub fn path(&self, sub: &str, name: &str) -> Result<PathBuf, CliError> {
        let dir = self.root.join(sub);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(dir.join(name))
    }

    pub fn create(&self, sub: &str, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.path(sub, name)?;
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        Ok((path, BufWriter::new(file)))
    }

    /// A single JSON document with a top-level `provenance` field.
    pub fn json<T: Serialize>(&self, sub: &str, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(sub, name)?;
        let doc = Wrapped {
            provenance: &self.provenance,
            body,
        };
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| io_err(&path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// A provenance header line, then one record per line.
    pub fn jsonl<T: Serialize>(&self, sub: &str, name: &str, records: &[T]) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(sub, name)?;
        let mut line = |v: &dyn erased::Json| -> Result<(), CliError> {
            v.write(&mut w).map_err(|e| io_err(&path, e))?;
            w.write_all(b"\n").map_err(|e| io_err(&path, e))
        };
        line(&Header {
            provenance: &self.provenance,
        })?;
        for r in records {
            line(r)?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// A `# key=value ...` provenance comment, then the table.
    pub fn csv(&self, sub: &str, name: &str, header: &str, rows: &[String]) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(sub, name)?;
        let mut body = format!("{}\n{header}\n", self.provenance.csv_comment());
        for r in rows {
            body.push_str(r);
            body.push('\n');
        }
        w.write_all(body.as_bytes()).map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

mod erased {
    use std::io::Write;

    pub trait Json {
        fn write(&self, w: &mut dyn Write) -> serde_json::Result<()>;
    }

    impl<T: serde::Serialize> Json for T {
        fn write(&self, w: &mut dyn Write) -> serde_json::Result<()> {
            serde_json::to_writer(w, self)
        }
    }
}

/// Empty cells for undefined values.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}
