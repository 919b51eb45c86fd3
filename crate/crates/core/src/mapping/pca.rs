use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue size below which a direction counts as rank-deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Principal axes of a centered data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One orthonormal row per component, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Sample variance (divisor `n - 1`) along each component.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    fn component_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_components(), self.input_dim(), |i, j| {
            self.components[i][j]
        })
    }

    /// Projects rows of `x` onto the components: `(x - mean) · Cᵀ`.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let mut centered = x.clone();
        let mean = DVector::from_column_slice(&self.mean).transpose();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        Ok(centered * self.component_matrix().transpose())
    }

    pub fn transform_one(&self, v: &[f64]) -> Result<Vec<f64>> {
        let x = DMatrix::from_row_slice(1, v.len(), v);
        Ok(self.transform(&x)?.row(0).iter().copied().collect())
    }

    /// Maps reduced coordinates back into the input space.
    pub fn inverse_transform(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                actual: z.ncols(),
            });
        }
        let mut out = z * self.component_matrix();
        let mean = DVector::from_column_slice(&self.mean).transpose();
        for mut row in out.row_iter_mut() {
            row += &mean;
        }
        Ok(out)
    }
}

/// Fits PCA by eigendecomposition of the sample covariance.
///
/// Each component is signed so that its largest-magnitude coordinate is
/// positive.
pub fn pca_fit(x: &DMatrix<f64>, n_components: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Insufficient(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if n_components == 0 || n_components > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "n_components must be in 1..={}, got {n_components}",
            n.min(d)
        )));
    }
    let mean: DVector<f64> = x.row_mean().transpose();
    let mut centered = x.clone();
    let mean_row = mean.transpose();
    for mut row in centered.row_iter_mut() {
        row -= &mean_row;
    }
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let largest = eig.eigenvalues[order[0]].max(0.0);
    let mut components = Vec::with_capacity(n_components);
    let mut explained = Vec::with_capacity(n_components);
    let mut deficient = 0;
    for &idx in order.iter().take(n_components) {
        let value = eig.eigenvalues[idx].max(0.0);
        if value <= RANK_TOLERANCE * largest {
            deficient += 1;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained.push(value);
    }
    if deficient > 0 {
        log::warn!("PCA: {deficient} of {n_components} components exceed the data rank");
    }
    Ok(PcaModel {
        mean: mean.iter().copied().collect(),
        components,
        explained_variance: explained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn line_data_is_rank_one() {
        let x = DMatrix::from_fn(20, 3, |i, j| (i as f64 - 4.0) * [1.0, -2.0, 0.5][j] + 3.0);
        let model = pca_fit(&x, 3).unwrap();
        let total: f64 = model.explained_variance.iter().sum();
        assert_abs_diff_eq!(model.explained_variance[0] / total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn mean_maps_to_origin() {
        let x = DMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64);
        let model = pca_fit(&x, 2).unwrap();
        let z = model.transform_one(&model.mean.clone()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn identity_basis_passes_centered_data() {
        let model = PcaModel {
            mean: vec![1.0, 2.0],
            components: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            explained_variance: vec![1.0, 1.0],
        };
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 5.0, 0.0, 0.0]);
        let z = model.transform(&x).unwrap();
        assert_eq!(z, DMatrix::from_row_slice(2, 2, &[2.0, 3.0, -1.0, -2.0]));
        assert!(model.transform(&DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn rejects_bad_component_counts() {
        let x = DMatrix::from_fn(4, 3, |i, j| (i + j) as f64);
        assert!(pca_fit(&x, 4).is_err());
        assert!(pca_fit(&x, 0).is_err());
        assert!(pca_fit(&DMatrix::zeros(1, 3), 1).is_err());
    }
}
