//! Input loaders: every file re-validates its invariants and fails loudly
//! with the offending path.

use std::path::Path;

use qot::grassmann::{Projection, ProjectionJson};
use qot::linalg::{matrix_from_json, MatrixJson};
use qot::spectral::DensityMatrix;
use qot::tensor::{TensorState, TensorStateJson};

pub enum LoadError {
    Parse(String, String),
    Validate(String, String),
}

impl LoadError {
    pub fn describe(&self) -> String {
        match self {
            LoadError::Parse(path, reason) => format!("parse error in {path}: {reason}"),
            LoadError::Validate(path, reason) => {
                format!("validation failed for {path}: {reason}")
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path)
        .map_err(|e| LoadError::Parse(path.display().to_string(), e.to_string()))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, LoadError> {
    serde_json::from_str(text)
        .map_err(|e| LoadError::Parse(path.display().to_string(), e.to_string()))
}

pub fn load_density(path: &Path) -> Result<DensityMatrix, LoadError> {
    let json: MatrixJson = parse(path, &read(path)?)?;
    let mat = matrix_from_json(&json)
        .map_err(|e| LoadError::Validate(path.display().to_string(), e.to_string()))?;
    DensityMatrix::new(mat)
        .map_err(|e| LoadError::Validate(path.display().to_string(), e.to_string()))
}

pub fn load_projection(path: &Path) -> Result<Projection, LoadError> {
    let json: ProjectionJson = parse(path, &read(path)?)?;
    Projection::from_json(&json)
        .map_err(|e| LoadError::Validate(path.display().to_string(), e.to_string()))
}

pub fn load_tensor_state(path: &Path) -> Result<TensorState, LoadError> {
    let json: TensorStateJson = parse(path, &read(path)?)?;
    TensorState::from_json(&json)
        .map_err(|e| LoadError::Validate(path.display().to_string(), e.to_string()))
}
