//! JSON interchange format for complex matrices: row-major `re`/`im` arrays.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{is_finite, CMat};
use crate::error::{Error, Result};

/// Wire format `{"rows": n, "cols": m, "re": [...], "im": [...]}`,
/// row-major. Used by every module and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    let mut re = Vec::with_capacity(m.len());
    let mut im = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    MatrixJson {
        rows: m.nrows(),
        cols: m.ncols(),
        re,
        im,
    }
}

pub fn matrix_from_json(json: &MatrixJson) -> Result<CMat> {
    let expected = json.rows * json.cols;
    if json.re.len() != expected || json.im.len() != expected {
        return Err(Error::Validation {
            path: "matrix".into(),
            reason: format!(
                "entry count {}/{} does not match {}x{}",
                json.re.len(),
                json.im.len(),
                json.rows,
                json.cols
            ),
        });
    }
    let m = CMat::from_fn(json.rows, json.cols, |i, j| {
        let k = i * json.cols + j;
        Complex64::new(json.re[k], json.im[k])
    });
    if !is_finite(&m) {
        return Err(Error::NonFinite {
            context: "matrix from JSON",
        });
    }
    Ok(m)
}
