//! Empirical spectral densities of weight matrices.
//!
//! A weight matrix `W` is oriented so that it is `N x M` with `N >= M`, and
//! its spectrum is the set of `M` eigenvalues of `X = (1/N) WᵀW`, obtained as
//! squared singular values of `W` divided by `N`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;
use crate::tensor_io::WeightMatrix;

/// Relative size below which negative eigenvalues are treated as symmetry noise.
pub const SYMMETRY_EPS: f64 = 1e-10;

/// Ascending eigenvalue spectrum together with its shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Real> {
    eigenvalues: Vec<T>,
    n_rows: usize,
    n_cols: usize,
    q: T,
    ensemble_size: usize,
    source_name: String,
}

impl<T: Real> Spectrum<T> {
    /// Builds a spectrum from raw eigenvalues of an `N x M` problem.
    ///
    /// Values are sorted; negatives within `SYMMETRY_EPS * λ_max` of zero are
    /// clamped to zero, anything more negative is rejected.
    pub fn from_eigenvalues(
        mut eigenvalues: Vec<T>,
        n_rows: usize,
        n_cols: usize,
        source_name: impl Into<String>,
    ) -> Result<Self> {
        let (n, m) = (n_rows.max(n_cols), n_rows.min(n_cols));
        if m == 0 {
            return Err(Error::Shape("spectrum of an empty matrix".into()));
        }
        if !eigenvalues.len().is_multiple_of(m) || eigenvalues.is_empty() {
            return Err(Error::Shape(format!(
                "{} eigenvalues do not match M = {m}",
                eigenvalues.len()
            )));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("non-finite eigenvalue".into()));
        }
        eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let max = *eigenvalues.last().unwrap();
        let eps = T::lit(SYMMETRY_EPS) * max.abs();
        for v in eigenvalues.iter_mut() {
            if *v < T::zero() {
                if -*v <= eps {
                    *v = T::zero();
                } else {
                    return Err(Error::Data(format!("negative eigenvalue {v}")));
                }
            }
        }
        let ensemble_size = eigenvalues.len() / m;
        Ok(Self {
            eigenvalues,
            n_rows: n,
            n_cols: m,
            q: T::from_count(n) / T::from_count(m),
            ensemble_size,
            source_name: source_name.into(),
        })
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// `N`, the larger matrix dimension.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// `M`, the smaller matrix dimension.
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn q(&self) -> T {
        self.q
    }

    /// Number of matrices pooled into this spectrum (1 for a single layer).
    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_max(&self) -> T {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    pub fn lambda_min(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn sum(&self) -> T {
        self.eigenvalues.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    /// Fraction of eigenvalues `<= x` (right-continuous).
    pub fn empirical_cdf(&self, x: T) -> T {
        empirical_cdf(&self.eigenvalues, x)
    }

    /// Element-wise rescaling of every eigenvalue by `c > 0`.
    pub fn scaled(&self, c: T) -> Self {
        let mut s = self.clone();
        for v in s.eigenvalues.iter_mut() {
            *v = *v * c;
        }
        s
    }

    /// Pools spectra of equally-shaped matrices (ensemble analysis).
    pub fn pool(members: &[Spectrum<T>]) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
        if members
            .iter()
            .any(|s| s.n_rows != first.n_rows || s.n_cols != first.n_cols)
        {
            return Err(Error::Shape("ensemble members differ in shape".into()));
        }
        let values = members
            .iter()
            .flat_map(|s| s.eigenvalues.iter().copied())
            .collect();
        Self::from_eigenvalues(
            values,
            first.n_rows,
            first.n_cols,
            first.source_name.clone(),
        )
    }
}

/// The `f64` spectrum produced by [`compute_esd`].
pub type Esd = Spectrum<f64>;

/// Eigenvalues of `(1/N) WᵀW` for the `N >= M` orientation of `w`.
pub fn compute_esd(w: &WeightMatrix) -> Result<Esd> {
    let (n, m) = w.oriented_dims();
    let sv = linalg::singular_values(w)?;
    let values = sv.iter().map(|s| s * s / n as f64).collect();
    Spectrum::from_eigenvalues(values, n, m, w.name())
}

/// Fraction of `sorted` values `<= x`.
pub fn empirical_cdf<T: Real>(sorted: &[T], x: T) -> T {
    if sorted.is_empty() {
        return T::zero();
    }
    let k = sorted.partition_point(|&v| v <= x);
    T::from_count(k) / T::from_count(sorted.len())
}

/// Density-normalized histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T: Real> {
    pub bin_edges: Vec<T>,
    pub densities: Vec<T>,
}

impl<T: Real> Histogram<T> {
    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }

    /// `Σ density_b * width_b`; 1 whenever at least one value fell in range.
    pub fn total_mass(&self) -> T {
        self.densities
            .iter()
            .zip(self.bin_edges.windows(2))
            .fold(T::zero(), |acc, (&d, e)| acc + d * (e[1] - e[0]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,density\n");
        for (d, e) in self.densities.iter().zip(self.bin_edges.windows(2)) {
            let _ = writeln!(out, "{},{},{}", e[0], e[1], d);
        }
        out
    }
}

/// Equal-width histogram over `[min, max]` of `values` (or over `range`).
///
/// Values outside an explicit range are ignored; the densities are
/// normalized over the values that fall inside. If the span is degenerate a
/// single bin of width `max(|λ|·1e-6, 1e-12)` centred on the value is used.
pub fn histogram<T: Real>(
    values: &[T],
    n_bins: usize,
    range: Option<(T, T)>,
) -> Result<Histogram<T>> {
    if n_bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("histogram of no values".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(hi >= lo) {
                return Err(Error::Parameter(format!(
                    "invalid histogram range [{lo}, {hi}]"
                )));
            }
            (lo, hi)
        }
        None => values.iter().fold((values[0], values[0]), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }),
    };

    if hi == lo {
        let width = (lo.abs() * T::lit(1e-6)).max(T::lit(1e-12));
        let half = width / T::lit(2.0);
        let inside = values.iter().filter(|&&v| v == lo).count();
        let density = if inside > 0 {
            T::one() / width
        } else {
            T::zero()
        };
        return Ok(Histogram {
            bin_edges: vec![lo - half, lo + half],
            densities: vec![density],
        });
    }

    let width = (hi - lo) / T::from_count(n_bins);
    let bin_edges: Vec<T> = (0..=n_bins)
        .map(|b| {
            if b == n_bins {
                hi
            } else {
                lo + width * T::from_count(b)
            }
        })
        .collect();
    let mut counts = vec![0usize; n_bins];
    let mut total = 0usize;
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let b = ((v - lo) / width).to_usize().unwrap_or(0).min(n_bins - 1);
        counts[b] += 1;
        total += 1;
    }
    let densities = counts
        .iter()
        .zip(bin_edges.windows(2))
        .map(|(&c, e)| {
            if total == 0 {
                T::zero()
            } else {
                T::from_count(c) / (T::from_count(total) * (e[1] - e[0]))
            }
        })
        .collect();
    Ok(Histogram {
        bin_edges,
        densities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_of_identity_like_matrix() {
        let w = WeightMatrix::from_fn("e", 4, 2, |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        let esd = compute_esd(&w).unwrap();
        assert_eq!(esd.n_rows(), 4);
        assert_eq!(esd.n_cols(), 2);
        assert_eq!(esd.q(), 2.0);
        for &l in esd.eigenvalues() {
            assert!((l - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let u: Vec<f64> = (0..100).map(|i| ((i as f64) * 0.37).sin()).collect();
        let v: Vec<f64> = (0..50).map(|j| ((j as f64) * 1.3).cos() + 0.1).collect();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let w = WeightMatrix::from_fn("r1", 100, 50, |i, j| u[i] / nu * v[j] / nv).unwrap();
        let esd = compute_esd(&w).unwrap();
        assert_eq!(esd.len(), 50);
        assert!((esd.lambda_max() - 0.01).abs() < 1e-14);
        for &l in &esd.eigenvalues()[..49] {
            assert!(l.abs() < 1e-25);
        }
    }

    #[test]
    fn wide_matrix_is_oriented() {
        let w = WeightMatrix::from_fn("wide", 3, 7, |i, j| (i * 7 + j) as f64).unwrap();
        let esd = compute_esd(&w).unwrap();
        assert_eq!((esd.n_rows(), esd.n_cols()), (7, 3));
        assert!(esd.q() > 1.0);
    }

    #[test]
    fn histogram_degenerate_single_bin() {
        let h = histogram(&[1.0f64, 1.0, 1.0, 1.0], 1, None).unwrap();
        assert_eq!(h.n_bins(), 1);
        let width = h.bin_edges[1] - h.bin_edges[0];
        assert!((width - 1e-6).abs() < 1e-15);
        assert!((h.densities[0] - 1.0 / width).abs() < 1e-3);
        assert!((h.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_uniform_grid() {
        let h = histogram(&[0.5f64, 1.5, 2.5, 3.5], 4, Some((0.0, 4.0))).unwrap();
        assert_eq!(h.densities, vec![0.25; 4]);
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        assert!(h.to_csv().starts_with("bin_lo,bin_hi,density\n0,1,0.25\n"));
    }

    #[test]
    fn histogram_rejects_zero_bins() {
        assert!(matches!(
            histogram(&[1.0], 0, None),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn ecdf_steps() {
        let v = [1.0f64, 2.0, 3.0];
        assert_eq!(empirical_cdf(&v, 0.5), 0.0);
        assert!((empirical_cdf(&v, 2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_cdf(&v, 3.0), 1.0);
        assert_eq!(empirical_cdf(&v, 99.0), 1.0);
    }

    #[test]
    fn clamps_symmetry_noise_but_rejects_real_negatives() {
        let s = Spectrum::from_eigenvalues(vec![-1e-12, 1.0, 2.0], 6, 3, "x").unwrap();
        assert_eq!(s.eigenvalues()[0], 0.0);
        assert!(Spectrum::from_eigenvalues(vec![-0.1, 1.0, 2.0], 6, 3, "x").is_err());
    }

    #[test]
    fn single_precision_spectrum() {
        let s = Spectrum::<f32>::from_eigenvalues(vec![3.0, 1.0, 2.0], 6, 3, "f32").unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.q(), 2.0f32);
    }

    #[test]
    fn pooling_keeps_shape() {
        let a = Spectrum::from_eigenvalues(vec![1.0, 2.0], 4, 2, "a").unwrap();
        let b = Spectrum::from_eigenvalues(vec![0.5, 3.0], 4, 2, "b").unwrap();
        let p = Spectrum::pool(&[a, b]).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.ensemble_size(), 2);
        assert_eq!(p.n_cols(), 2);
        assert_eq!(p.eigenvalues(), &[0.5, 1.0, 2.0, 3.0]);
    }
}
