use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use corrcache::workload::SemiMarkovSpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Experiment;
use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical JSON form of the workload.
pub fn spec_hash(spec: &SemiMarkovSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("workload serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
pub struct Manifest {
    tool: &'static str,
    tool_version: &'static str,
    subcommand: String,
    experiment_id: String,
    spec_hash: String,
    rng_algorithm: &'static str,
    seeds: Vec<u64>,
    files: Vec<String>,
    /// Seconds since the Unix epoch; the only field that changes between reruns.
    created_unix: u64,
}

impl Manifest {
    pub fn new(exp: &Experiment, subcommand: &str, files: Vec<String>) -> Self {
        Manifest {
            tool: "corrcache",
            tool_version: TOOL_VERSION,
            subcommand: subcommand.to_string(),
            experiment_id: exp.config.experiment.id.clone(),
            spec_hash: spec_hash(&exp.config.workload),
            rng_algorithm: corrcache::rng::RNG_ALGORITHM,
            seeds: exp.seeds().to_vec(),
            files,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w).map_err(io)?;
        w.flush().map_err(io)
    }
}
