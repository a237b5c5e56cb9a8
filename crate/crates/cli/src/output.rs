use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Provenance written ahead of every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub params: Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<f64>,
}

impl Manifest {
    pub fn new(command: &str, params: Value) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            params,
            seeds: Vec::new(),
            outputs: Vec::new(),
            duration_seconds: None,
        }
    }
}

/// A finished table or report ready to be written.
pub struct Artifact {
    pub body: String,
    /// CSV bodies get a `# {manifest}` first line; JSON reports embed it.
    pub csv: bool,
}

pub fn f(x: f64) -> String {
    format!("{x:?}")
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn render(artifact: &Artifact, manifest: &Manifest) -> Result<String, CliError> {
    if artifact.csv {
        let header =
            serde_json::to_string(manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(format!("# {header}\n{}", artifact.body))
    } else {
        Ok(artifact.body.clone())
    }
}

/// Writes `artifact` to `out` (stdout when `None`) and, for files, the
/// manifest with the run duration to `<out>.manifest.json`.
pub fn emit(
    artifact: &Artifact,
    mut manifest: Manifest,
    out: Option<&Path>,
    elapsed: Duration,
) -> Result<(), CliError> {
    match out {
        None => {
            manifest.outputs.push("-".into());
            let text = render(artifact, &manifest)?;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            manifest.outputs.push(path.display().to_string());
            write_atomic(path, &render(artifact, &manifest)?)?;
            manifest.duration_seconds = Some(elapsed.as_secs_f64());
            let side = serde_json::to_string_pretty(&manifest)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            write_atomic(&sidecar(path), &(side + "\n"))?;
        }
    }
    Ok(())
}

/// Writes an auxiliary CSV next to the main one, sharing its manifest.
pub fn emit_extra(body: &str, manifest: &Manifest, path: &Path) -> Result<(), CliError> {
    let header = serde_json::to_string(manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(path, &format!("# {header}\n{body}"))
}
