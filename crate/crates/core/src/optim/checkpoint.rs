//! Optimizer checkpoints: one binary matrix file per tensor plus a JSON
//! manifest keyed by parameter path.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, MuonState, ParamLabel};
use crate::error::{Error, Result};
use crate::matops::{read_binary, write_binary, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Muon(MuonState),
    Adam(AdamState),
}

impl OptimizerState {
    pub fn label(&self) -> ParamLabel {
        match self {
            OptimizerState::Muon(_) => ParamLabel::Muon,
            OptimizerState::Adam(_) => ParamLabel::Adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub path: String,
    pub label: ParamLabel,
    pub weight: String,
    pub moments: Vec<String>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub entries: Vec<CheckpointEntry>,
}

const MANIFEST: &str = "manifest.json";

fn write_matrix(dir: &Path, name: &str, m: &Matrix) -> Result<String> {
    let file = File::create(dir.join(name))?;
    write_binary(m, BufWriter::new(file))?;
    Ok(name.to_string())
}

fn read_matrix(dir: &Path, name: &str) -> Result<Matrix> {
    read_binary(BufReader::new(File::open(dir.join(name))?))
}

pub fn save_checkpoint(dir: &Path, params: &[(String, Matrix, OptimizerState)]) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(params.len());
    for (i, (path, weight, state)) in params.iter().enumerate() {
        let weight_file = write_matrix(dir, &format!("{i:04}.weight.bin"), weight)?;
        let (moments, step) = match state {
            OptimizerState::Muon(s) => (
                vec![write_matrix(dir, &format!("{i:04}.m.bin"), &s.first_moment)?],
                0,
            ),
            OptimizerState::Adam(s) => (
                vec![
                    write_matrix(dir, &format!("{i:04}.m.bin"), &s.m)?,
                    write_matrix(dir, &format!("{i:04}.v.bin"), &s.v)?,
                ],
                s.step,
            ),
        };
        entries.push(CheckpointEntry {
            path: path.clone(),
            label: state.label(),
            weight: weight_file,
            moments,
            step,
        });
    }
    let manifest = CheckpointManifest { entries };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json)?;
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<Vec<(String, Matrix, OptimizerState)>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("checkpoint manifest: {e}")))?;
    manifest
        .entries
        .iter()
        .map(|e| {
            let weight = read_matrix(dir, &e.weight)?;
            let state = match (e.label, e.moments.as_slice()) {
                (ParamLabel::Muon, [m]) => OptimizerState::Muon(MuonState {
                    first_moment: read_matrix(dir, m)?,
                }),
                (ParamLabel::Adam, [m, v]) => OptimizerState::Adam(AdamState {
                    m: read_matrix(dir, m)?,
                    v: read_matrix(dir, v)?,
                    step: e.step,
                }),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "checkpoint entry {} has {} moment files for label {:?}",
                        e.path,
                        e.moments.len(),
                        e.label
                    )))
                }
            };
            Ok((e.path.clone(), weight, state))
        })
        .collect()
}
