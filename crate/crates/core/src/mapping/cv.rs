use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::regress::{fit_map, mse, MapHyper};
use super::MapKind;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub kind: MapKind,
    pub fold_mse: Vec<f64>,
    pub mse_mean: f64,
    /// Population standard deviation over folds.
    pub mse_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub per_model: Vec<CvRow>,
}

impl CvReport {
    pub fn row(&self, kind: MapKind) -> Option<&CvRow> {
        self.per_model.iter().find(|r| r.kind == kind)
    }
}

/// Shuffled k-fold partition of `0..n`. The first `n % folds` folds hold
/// one extra sample.
pub fn fold_indices(n: usize, folds: usize, seed_value: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if n < folds {
        return Err(Error::Insufficient(format!(
            "{folds}-fold cross-validation needs at least {folds} samples, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed_value));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(out)
}

fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// K-fold cross-validated MSE for each requested model kind. All kinds see
/// the same folds.
pub fn cross_validate(
    kinds: &[MapKind],
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    folds: usize,
    seed_value: u64,
    hyper: &MapHyper,
) -> Result<CvReport> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.nrows(),
        });
    }
    let parts = fold_indices(x.nrows(), folds, seed_value)?;
    let mut per_model = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let mut fold_mse = Vec::with_capacity(folds);
        for (f, held_out) in parts.iter().enumerate() {
            let train_idx: Vec<usize> = parts
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            let fold_hyper = MapHyper {
                seed: seed::derive(hyper.seed, f as u64),
                ..hyper.clone()
            };
            let model = fit_map(
                kind,
                &select_rows(x, &train_idx),
                &select_rows(y, &train_idx),
                &fold_hyper,
            )?;
            let pred = model.predict(&select_rows(x, held_out));
            fold_mse.push(mse(&pred, &select_rows(y, held_out)));
        }
        let mean = fold_mse.iter().sum::<f64>() / folds as f64;
        let var = fold_mse.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / folds as f64;
        per_model.push(CvRow {
            kind,
            fold_mse,
            mse_mean: mean,
            mse_std: var.sqrt(),
        });
    }
    Ok(CvReport {
        folds,
        seed: seed_value,
        per_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_samples() {
        let parts = fold_indices(13, 5, 1).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2, 2]);
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..13).collect::<Vec<_>>());
        assert!(fold_indices(3, 5, 1).is_err());
    }
}
