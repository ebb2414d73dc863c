//! Checkpoints: `manifest.json` (names, shapes, configuration, seed and
//! vocabulary) plus `params.bin`, the parameters as little-endian f64 in
//! manifest order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{layout, Model, ModelConfig, ModelError, Params, Result, Vocabulary};
use crate::graph::GraphConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub shape: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub model: ModelConfig,
    pub graph: GraphConfig,
    /// Echo of the full run configuration.
    pub config: serde_json::Value,
    pub vocabulary: Vocabulary,
    pub params: Vec<ParamShape>,
}

fn fail(path: &Path, message: impl Into<String>) -> ModelError {
    ModelError::Checkpoint {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn save_checkpoint(
    dir: &Path,
    model: &Model,
    seed: u64,
    config: &serde_json::Value,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| fail(dir, e.to_string()))?;
    let manifest = Manifest {
        seed,
        model: model.config.clone(),
        graph: model.graph,
        config: config.clone(),
        vocabulary: model.vocab.clone(),
        params: model
            .params
            .iter()
            .map(|(name, m)| ParamShape {
                name: name.to_string(),
                shape: m.dim(),
            })
            .collect(),
    };
    let mut bytes = Vec::with_capacity(model.params.entry_count() * 8);
    for (_, m) in model.params.iter() {
        for x in m.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| fail(&manifest_path, e.to_string()))?;
    fs::write(&manifest_path, text + "\n").map_err(|e| fail(&manifest_path, e.to_string()))?;
    let params_path = dir.join(PARAMS_FILE);
    fs::write(&params_path, bytes).map_err(|e| fail(&params_path, e.to_string()))?;
    Ok(())
}

/// Loads a checkpoint, checking every shape against the layout implied by
/// its configuration.
pub fn load_checkpoint(dir: &Path) -> Result<(Model, Manifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text =
        fs::read_to_string(&manifest_path).map_err(|e| fail(&manifest_path, e.to_string()))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| fail(&manifest_path, e.to_string()))?;
    let expected = layout(&manifest.model, &manifest.vocabulary);
    if expected.len() != manifest.params.len() {
        return Err(fail(
            &manifest_path,
            format!(
                "expected {} parameters, found {}",
                expected.len(),
                manifest.params.len()
            ),
        ));
    }
    for ((name, shape), found) in expected.iter().zip(&manifest.params) {
        if *name != found.name || *shape != found.shape {
            return Err(ModelError::Shape {
                name: found.name.clone(),
                expected: *shape,
                found: found.shape,
            });
        }
    }
    let params_path = dir.join(PARAMS_FILE);
    let bytes = fs::read(&params_path).map_err(|e| fail(&params_path, e.to_string()))?;
    let total: usize = manifest.params.iter().map(|p| p.shape.0 * p.shape.1).sum();
    if bytes.len() != total * 8 {
        return Err(fail(
            &params_path,
            format!("expected {} bytes, found {}", total * 8, bytes.len()),
        ));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let mut params = Params::new();
    for p in &manifest.params {
        let data: Vec<f64> = values.by_ref().take(p.shape.0 * p.shape.1).collect();
        let m =
            Array2::from_shape_vec(p.shape, data).map_err(|e| fail(&params_path, e.to_string()))?;
        params.insert(p.name.clone(), m);
    }
    let model = Model {
        config: manifest.model.clone(),
        graph: manifest.graph,
        vocab: manifest.vocabulary.clone(),
        params,
    };
    Ok((model, manifest))
}
