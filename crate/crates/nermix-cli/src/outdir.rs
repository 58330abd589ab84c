//! Output-directory plumbing: file writing, the resolved-config echo, and a
//! manifest with input digests sufficient to reproduce a run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use nermix::error::Result;

pub struct OutDir {
    root: PathBuf,
    inputs: Vec<(String, String)>,
    outputs: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutDir {
            root: root.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push((path.display().to_string(), hex));
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Write manifest.json last so it lists every produced file.
    pub fn finish(mut self, command: &str, seed: u64) -> Result<()> {
        #[derive(Serialize)]
        struct InputEntry {
            path: String,
            sha256: String,
        }
        #[derive(Serialize)]
        struct Manifest<'a> {
            version: &'a str,
            command: &'a str,
            seed: u64,
            inputs: Vec<InputEntry>,
            outputs: Vec<String>,
        }
        let mut outputs = self.outputs.clone();
        outputs.push("manifest.json".into());
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            inputs: self
                .inputs
                .iter()
                .map(|(path, sha256)| InputEntry {
                    path: path.clone(),
                    sha256: sha256.clone(),
                })
                .collect(),
            outputs,
        };
        self.write_json("manifest.json", &manifest)
    }
}
