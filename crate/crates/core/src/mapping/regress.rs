use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::mlp::{fit_mlp, Mlp, MlpConfig, MlpParams};
use super::{MapKind, RowMatrix};
use crate::error::{Error, Result};

/// Ridge penalty used when the centered design matrix is rank-deficient.
pub const RIDGE_FALLBACK: f64 = 1e-8;

/// Singular values below this fraction of the largest one count as zero.
const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapHyper {
    pub knn_k: usize,
    pub mlp: MlpConfig,
    pub seed: u64,
}

impl Default for MapHyper {
    fn default() -> Self {
        Self {
            knn_k: 5,
            mlp: MlpConfig::default(),
            seed: 0,
        }
    }
}

/// A fitted regressor from reduced word space to smell space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regressor {
    Linear {
        /// input × output
        weights: RowMatrix,
        intercept: Vec<f64>,
    },
    Mlp(MlpParams),
    Knn {
        k: usize,
        inputs: RowMatrix,
        targets: RowMatrix,
    },
    Dummy {
        mean: Vec<f64>,
    },
}

impl Regressor {
    pub fn kind(&self) -> MapKind {
        match self {
            Regressor::Linear { .. } => MapKind::Linear,
            Regressor::Mlp(_) => MapKind::Mlp,
            Regressor::Knn { .. } => MapKind::Knn,
            Regressor::Dummy { .. } => MapKind::Dummy,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Regressor::Linear { intercept, .. } => intercept.len(),
            Regressor::Mlp(p) => p.b2.len(),
            Regressor::Knn { targets, .. } => targets.cols,
            Regressor::Dummy { mean } => mean.len(),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Regressor::Linear { weights, intercept } => {
                let mut out = x * weights.to_dmatrix();
                let b = DVector::from_column_slice(intercept).transpose();
                for mut row in out.row_iter_mut() {
                    row += &b;
                }
                out
            }
            Regressor::Mlp(p) => Mlp::from_params(p).predict(x),
            Regressor::Knn { k, inputs, targets } => knn_predict(*k, inputs, targets, x),
            Regressor::Dummy { mean } => DMatrix::from_fn(x.nrows(), mean.len(), |_, j| mean[j]),
        }
    }
}

/// Fits one regressor of the given kind.
pub fn fit_map(
    kind: MapKind,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    hyper: &MapHyper,
) -> Result<Regressor> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.nrows(),
        });
    }
    if n < 2 {
        return Err(Error::Insufficient(format!(
            "regression needs at least 2 samples, got {n}"
        )));
    }
    Ok(match kind {
        MapKind::Linear => fit_linear(x, y),
        MapKind::Mlp => Regressor::Mlp(fit_mlp(x, y, &hyper.mlp, hyper.seed).to_params()),
        MapKind::Knn => {
            if hyper.knn_k == 0 || hyper.knn_k > n {
                return Err(Error::Insufficient(format!(
                    "k-NN with k = {} needs at least k samples, got {n}",
                    hyper.knn_k
                )));
            }
            Regressor::Knn {
                k: hyper.knn_k,
                inputs: RowMatrix::from(x),
                targets: RowMatrix::from(y),
            }
        }
        MapKind::Dummy => Regressor::Dummy {
            mean: y.row_mean().iter().copied().collect(),
        },
    })
}

/// Least squares with intercept, solved through the SVD of the centered
/// design. A rank-deficient design falls back to a tiny ridge penalty.
fn fit_linear(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Regressor {
    let x_mean = x.row_mean();
    let y_mean = y.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let mut yc = y.clone();
    for mut row in yc.row_iter_mut() {
        row -= &y_mean;
    }
    let svd = SVD::new(xc, true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let singular = s.len() < x.ncols() || s.iter().any(|&v| v <= SINGULAR_TOLERANCE * s_max);
    if singular {
        log::warn!("linear map: design matrix is singular, using ridge penalty {RIDGE_FALLBACK:e}");
    }
    let inv = s.map(|v| {
        if singular {
            v / (v * v + RIDGE_FALLBACK)
        } else {
            1.0 / v
        }
    });
    // W = V · diag(inv) · Uᵀ · Yc
    let uty = u.transpose() * yc;
    let scaled = DMatrix::from_fn(uty.nrows(), uty.ncols(), |i, j| uty[(i, j)] * inv[i]);
    let weights = v_t.transpose() * scaled;
    let intercept = y_mean - x_mean * &weights;
    Regressor::Linear {
        weights: RowMatrix::from(&weights),
        intercept: intercept.iter().copied().collect(),
    }
}

fn lexical_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean target of the `k` nearest stored inputs. Distance ties are broken
/// by comparing the stored rows themselves, so the result does not depend
/// on storage order.
fn knn_predict(
    k: usize,
    inputs: &RowMatrix,
    targets: &RowMatrix,
    x: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), targets.cols);
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(inputs.rows);
    for (qi, query) in x.row_iter().enumerate() {
        scored.clear();
        scored.extend((0..inputs.rows).map(|i| {
            let d: f64 = inputs
                .row(i)
                .iter()
                .zip(query.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, i)
        }));
        scored.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| lexical_cmp(inputs.row(a.1), inputs.row(b.1)))
                .then_with(|| lexical_cmp(targets.row(a.1), targets.row(b.1)))
        });
        for &(_, i) in scored.iter().take(k) {
            for (j, t) in targets.row(i).iter().enumerate() {
                out[(qi, j)] += t;
            }
        }
        for j in 0..targets.cols {
            out[(qi, j)] /= k as f64;
        }
    }
    out
}

/// Mean over samples of the mean squared per-coordinate error.
pub fn mse(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    (pred - truth).norm_squared() / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seed::rng(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn linear_recovers_exact_map() {
        let x = random(40, 5, 1);
        let w = random(5, 3, 2);
        let y = &x * &w;
        let model = fit_map(MapKind::Linear, &x, &y, &MapHyper::default()).unwrap();
        assert!(mse(&model.predict(&x), &y) <= 1e-10);
    }

    #[test]
    fn linear_residuals_are_orthogonal_to_design() {
        let x = random(30, 4, 3);
        let y = random(30, 2, 4);
        let model = fit_map(MapKind::Linear, &x, &y, &MapHyper::default()).unwrap();
        let resid = &y - model.predict(&x);
        let ones = DMatrix::from_element(30, 1, 1.0);
        let design = DMatrix::from_fn(30, 5, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let gram = design.transpose() * &resid;
        assert!(gram.iter().all(|v| v.abs() < 1e-8), "{gram}");
        assert!((ones.transpose() * &resid).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn singular_design_uses_ridge() {
        let base = random(10, 1, 5);
        let x = DMatrix::from_fn(10, 2, |i, _| base[(i, 0)]);
        let y = DMatrix::from_fn(10, 1, |i, _| 2.0 * base[(i, 0)]);
        let model = fit_map(MapKind::Linear, &x, &y, &MapHyper::default()).unwrap();
        assert!(mse(&model.predict(&x), &y) < 1e-8);
        assert!(model.predict(&x).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dummy_on_constant_targets() {
        let x = random(8, 3, 6);
        let y = DMatrix::from_element(8, 2, 4.5);
        let model = fit_map(MapKind::Dummy, &x, &y, &MapHyper::default()).unwrap();
        assert_eq!(mse(&model.predict(&x), &y), 0.0);
    }

    #[test]
    fn knn_one_returns_training_target() {
        let x = random(12, 3, 7);
        let y = random(12, 2, 8);
        let hyper = MapHyper {
            knn_k: 1,
            ..MapHyper::default()
        };
        let model = fit_map(MapKind::Knn, &x, &y, &hyper).unwrap();
        assert_eq!(model.predict(&x), y);
        let too_big = MapHyper {
            knn_k: 13,
            ..MapHyper::default()
        };
        assert!(fit_map(MapKind::Knn, &x, &y, &too_big).is_err());
    }

    #[test]
    fn knn_ignores_storage_order() {
        // Duplicate inputs with different targets force distance ties.
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 1.0, 3.0]);
        let y = DMatrix::from_row_slice(4, 1, &[10.0, 20.0, 30.0, 40.0]);
        let hyper = MapHyper {
            knn_k: 2,
            ..MapHyper::default()
        };
        let a = fit_map(MapKind::Knn, &x, &y, &hyper).unwrap();
        let perm = [3, 2, 0, 1];
        let xp = DMatrix::from_fn(4, 1, |i, j| x[(perm[i], j)]);
        let yp = DMatrix::from_fn(4, 1, |i, j| y[(perm[i], j)]);
        let b = fit_map(MapKind::Knn, &xp, &yp, &hyper).unwrap();
        let q = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert_eq!(a.predict(&q), b.predict(&q));
    }
}
