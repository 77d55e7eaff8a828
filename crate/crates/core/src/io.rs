//! JSON file formats. Matrices are row-major arrays of rows, complex entries
//! are `[re, im]` pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dilation::Subspace;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::tuple::OperatorTuple;
use crate::weights::WeightSequence;

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn encode_matrix(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn decode_matrix(rows: &MatrixJson) -> Result<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Shape("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WeightsJson {
    pub d: usize,
    #[serde(rename = "Kmax")]
    pub kmax: usize,
    #[serde(rename = "X")]
    pub x: Vec<MatrixJson>,
}

impl WeightsJson {
    pub fn from_weights(x: &WeightSequence) -> Self {
        WeightsJson {
            d: x.d(),
            kmax: x.kmax(),
            x: x.matrices().iter().map(encode_matrix).collect(),
        }
    }

    pub fn to_weights(&self) -> Result<WeightSequence> {
        if self.x.len() != self.kmax {
            return Err(Error::Shape(format!(
                "Kmax = {} but {} matrices given",
                self.kmax,
                self.x.len()
            )));
        }
        let mats = self.x.iter().map(decode_matrix).collect::<Result<Vec<_>>>()?;
        WeightSequence::new(self.d, mats)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TupleJson {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: Vec<MatrixJson>,
}

impl TupleJson {
    pub fn from_tuple(t: &OperatorTuple) -> Self {
        TupleJson {
            d: t.d(),
            m: t.m(),
            t: t.ops().iter().map(encode_matrix).collect(),
        }
    }

    pub fn to_tuple(&self) -> Result<OperatorTuple> {
        if self.t.len() != self.d {
            return Err(Error::Shape(format!("d = {} but {} operators given", self.d, self.t.len())));
        }
        let ops = self.t.iter().map(decode_matrix).collect::<Result<Vec<_>>>()?;
        let t = OperatorTuple::new(ops)?;
        if t.m() != self.m {
            return Err(Error::Shape(format!("m = {} but operators are {}x{}", self.m, t.m(), t.m())));
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceKind {
    Isometry,
    Projection,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SubspaceJson {
    pub kind: SubspaceKind,
    pub matrix: MatrixJson,
}

impl SubspaceJson {
    pub fn to_subspace(&self) -> Result<Subspace> {
        let m = decode_matrix(&self.matrix)?;
        Ok(match self.kind {
            SubspaceKind::Isometry => Subspace::Isometry(m),
            SubspaceKind::Projection => Subspace::Projection(m),
        })
    }

    pub fn isometry(s: &CMat) -> Self {
        SubspaceJson {
            kind: SubspaceKind::Isometry,
            matrix: encode_matrix(s),
        }
    }
}

/// A complete dilation or factorization run in one file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentJson {
    pub weights: WeightsJson,
    #[serde(default)]
    pub tuple: Option<TupleJson>,
    #[serde(default)]
    pub subspace: Option<SubspaceJson>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_weights(path: &Path) -> Result<WeightSequence> {
    read_json::<WeightsJson>(path)?.to_weights()
}

pub fn read_tuple(path: &Path) -> Result<OperatorTuple> {
    read_json::<TupleJson>(path)?.to_tuple()
}

pub fn read_subspace(path: &Path) -> Result<Subspace> {
    read_json::<SubspaceJson>(path)?.to_subspace()
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
