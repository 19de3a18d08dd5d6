//! Dense SVD entry points, backed by faer.

use faer::Mat;

use crate::error::{Error, Result};
use crate::tensor_io::WeightMatrix;

/// Copies `w` into a faer matrix oriented so that `nrows >= ncols`.
pub(crate) fn oriented(w: &WeightMatrix) -> Mat<f64> {
    if w.rows() >= w.cols() {
        Mat::from_fn(w.rows(), w.cols(), |i, j| w.get(i, j))
    } else {
        Mat::from_fn(w.cols(), w.rows(), |i, j| w.get(j, i))
    }
}

/// Singular values of `w`, nonincreasing.
pub fn singular_values(w: &WeightMatrix) -> Result<Vec<f64>> {
    oriented(w).singular_values().map_err(|e| Error::Numeric {
        layer: w.name().to_owned(),
        message: format!("SVD did not converge: {e:?}"),
    })
}

/// Singular values (nonincreasing) and the matching right singular vectors
/// of the `N >= M` orientation, i.e. the eigenvectors of `WᵀW`.
pub fn right_singular_pairs(w: &WeightMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let a = oriented(w);
    let svd = a.thin_svd().map_err(|e| Error::Numeric {
        layer: w.name().to_owned(),
        message: format!("SVD did not converge: {e:?}"),
    })?;
    let s = svd.S().column_vector();
    let v = svd.V();
    let m = a.ncols();
    let values = (0..m).map(|i| s[i]).collect();
    let vectors = (0..m)
        .map(|k| (0..m).map(|i| v[(i, k)]).collect())
        .collect();
    Ok((values, vectors))
}

/// Thin SVD `W = U diag(s) Vᵀ` in the raw orientation of `w`.
pub(crate) fn thin_svd(w: &WeightMatrix) -> Result<(Mat<f64>, Vec<f64>, Mat<f64>)> {
    let a = Mat::from_fn(w.rows(), w.cols(), |i, j| w.get(i, j));
    let svd = a.thin_svd().map_err(|e| Error::Numeric {
        layer: w.name().to_owned(),
        message: format!("SVD did not converge: {e:?}"),
    })?;
    let k = w.rows().min(w.cols());
    let s = svd.S().column_vector();
    let values = (0..k).map(|i| s[i]).collect();
    Ok((svd.U().to_owned(), values, svd.V().to_owned()))
}
