//! Per-invocation bookkeeping: hashed inputs and outputs, stage timings,
//! and the exit-code contract.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use ogre_core::annotation::AnnotationError;
use ogre_core::domain::DomainError;
use ogre_core::empire::EmpireError;
use ogre_core::focus::FocusError;
use ogre_core::petri::PetriError;
use ogre_core::solver::SolverError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_REFUTED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_UNKNOWN: u8 = 3;

/// A command that could not finish; `code` is the process exit status.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub message: String,
}

impl Fail {
    pub fn usage(m: impl fmt::Display) -> Fail {
        Fail { code: EXIT_USAGE, message: m.to_string() }
    }

    pub fn refuted(m: impl fmt::Display) -> Fail {
        Fail { code: EXIT_REFUTED, message: m.to_string() }
    }

    pub fn unknown(m: impl fmt::Display) -> Fail {
        Fail { code: EXIT_UNKNOWN, message: m.to_string() }
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<PetriError> for Fail {
    fn from(e: PetriError) -> Fail {
        match e {
            PetriError::NotOneSafe { .. } => Fail::refuted(e),
            _ => Fail::usage(e),
        }
    }
}

impl From<DomainError> for Fail {
    fn from(e: DomainError) -> Fail {
        match e {
            DomainError::Unknown(_) => Fail::unknown(e),
            _ => Fail::usage(e),
        }
    }
}

impl From<EmpireError> for Fail {
    fn from(e: EmpireError) -> Fail {
        match e {
            EmpireError::Petri(e) => e.into(),
            EmpireError::Domain(e) => e.into(),
            EmpireError::Unsafe { .. } => Fail::refuted(e),
            _ => Fail::usage(e),
        }
    }
}

impl From<FocusError> for Fail {
    fn from(e: FocusError) -> Fail {
        match e {
            FocusError::Domain(e) => e.into(),
            _ => Fail::usage(e),
        }
    }
}

impl From<AnnotationError> for Fail {
    fn from(e: AnnotationError) -> Fail {
        match e {
            AnnotationError::Petri(e) => e.into(),
            AnnotationError::Domain(e) => e.into(),
            AnnotationError::Focus(e) => e.into(),
            AnnotationError::Unsafe | AnnotationError::BadFocus { .. } => Fail::refuted(e),
            _ => Fail::usage(e),
        }
    }
}

impl From<SolverError> for Fail {
    fn from(e: SolverError) -> Fail {
        Fail::unknown(e)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub ms: f64,
}

/// Written for any command given `--manifest`. Everything except
/// `timings` is a function of the inputs and flags.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub modes: BTreeMap<String, String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub timings: Vec<StageTime>,
    pub exit_code: u8,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Run {
    pub manifest: RunManifest,
}

impl Run {
    pub fn new(command: &str) -> Run {
        Run {
            manifest: RunManifest {
                tool: "ogre",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                modes: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
                exit_code: EXIT_OK,
            },
        }
    }

    pub fn mode(&mut self, key: &str, value: impl fmt::Display) {
        self.manifest.modes.insert(key.to_string(), value.to_string());
    }

    pub fn read(&mut self, path: &Path) -> Result<String, Fail> {
        let text = fs::read_to_string(path).map_err(|e| Fail::usage(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(text)
    }

    pub fn write(&mut self, path: &Path, content: &str) -> Result<(), Fail> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Fail::usage(format!("cannot create {}: {e}", dir.display())))?;
        }
        fs::write(path, content).map_err(|e| Fail::usage(format!("cannot write {}: {e}", path.display())))?;
        self.record_output(path, content.as_bytes());
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path, bytes: &[u8]) {
        self.manifest.outputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.manifest.timings.push(StageTime {
            stage: name.to_string(),
            ms: (start.elapsed().as_secs_f64() * 1e6).round() / 1e3,
        });
        out
    }
}
