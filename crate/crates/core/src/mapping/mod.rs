//! Regression maps from (PCA-reduced) word-embedding space into smell
//! space.

mod cv;
mod mlp;
mod model;
mod pca;
mod regress;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, fold_indices, CvReport, CvRow};
pub use mlp::{fit_mlp, Mlp, MlpConfig, MlpGrads, MlpParams};
pub use model::{
    build_training_data, fit_mapping, predict_smell, MappingModel, PcaDomain, SmellPrediction,
    TrainingData, MODEL_SCHEMA,
};
pub use pca::{pca_fit, PcaModel};
pub use regress::{fit_map, mse, MapHyper, Regressor, RIDGE_FALLBACK};

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Hash,
    PartialOrd,
    Ord,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Linear,
    Mlp,
    Knn,
    Dummy,
}

impl MapKind {
    pub const ALL: [MapKind; 4] = [MapKind::Linear, MapKind::Mlp, MapKind::Knn, MapKind::Dummy];

    pub fn name(self) -> &'static str {
        match self {
            MapKind::Linear => "linear",
            MapKind::Mlp => "mlp",
            MapKind::Knn => "knn",
            MapKind::Dummy => "dummy",
        }
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense matrix stored row-major for persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RowMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl From<&DMatrix<f64>> for RowMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = m
            .row_iter()
            .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}
