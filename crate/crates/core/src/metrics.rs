//! Per-layer scalar diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esd::{Esd, Spectrum};
use crate::linalg;
use crate::mp::MpFit;
use crate::scalar::Real;
use crate::tensor_io::WeightMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub mp_soft_rank: f64,
    pub stable_rank: f64,
    pub entropy: f64,
    pub lambda_max: f64,
    pub spike_count: usize,
    pub bulk_ipr_mean: f64,
    pub spike_ipr_mean: Option<f64>,
}

/// `λ+ / λ_max`, clamped to 1; zero when there is no bulk edge.
pub fn soft_rank_from_edge<T: Real>(lambda_plus: Option<T>, lambda_max: T) -> Result<T> {
    if !(lambda_max > T::zero()) {
        return Err(Error::UndefinedMetric(
            "MP soft rank of a zero matrix".into(),
        ));
    }
    Ok(match lambda_plus {
        Some(lp) => (lp / lambda_max).min(T::one()),
        None => T::zero(),
    })
}

/// MP soft rank from an optional bulk fit. Unconverged fits count as no fit.
pub fn mp_soft_rank(fit: Option<&MpFit>, esd: &Esd) -> Result<f64> {
    let lp = fit.filter(|f| f.converged).map(|f| f.lambda_plus);
    soft_rank_from_edge(lp, esd.lambda_max())
}

/// `Σλ / λ_max`, i.e. `‖W‖²_F / ‖W‖²_2`.
pub fn stable_rank<T: Real>(esd: &Spectrum<T>) -> Result<T> {
    let lmax = esd.lambda_max();
    if !(lmax > T::zero()) {
        return Err(Error::UndefinedMetric(
            "stable rank of a zero matrix".into(),
        ));
    }
    Ok(esd.sum() / lmax)
}

/// Shannon entropy of `λ_i / Σλ`, normalized by `ln M` to lie in `[0, 1]`.
pub fn spectral_entropy<T: Real>(esd: &Spectrum<T>) -> Result<T> {
    let total = esd.sum();
    if !(total > T::zero()) {
        return Err(Error::UndefinedMetric("entropy of a zero matrix".into()));
    }
    let m = esd.len();
    if m < 2 {
        return Ok(T::zero());
    }
    let h = esd
        .eigenvalues()
        .iter()
        .filter(|&&l| l > T::zero())
        .map(|&l| {
            let p = l / total;
            -p * p.ln()
        })
        .fold(T::zero(), |a, b| a + b);
    Ok((h / T::from_count(m).ln()).max(T::zero()).min(T::one()))
}

/// Inverse participation ratio `Σ v_i⁴` of a unit vector.
pub fn ipr<T: Real>(v: &[T]) -> Result<T> {
    let norm_sq = v.iter().fold(T::zero(), |a, &x| a + x * x);
    if (norm_sq.sqrt() - T::one()).abs() > T::lit(1e-8).max(T::epsilon() * T::lit(16.0)) {
        return Err(Error::Precondition(format!(
            "IPR needs a unit vector, got norm {}",
            norm_sq.sqrt()
        )));
    }
    Ok(v.iter().fold(T::zero(), |a, &x| a + x * x * x * x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub bulk_ipr_mean: f64,
    pub spike_ipr_mean: Option<f64>,
    pub spike_count: usize,
}

/// Mean IPR of the eigenvectors of `X` above and below the spike threshold.
///
/// Without an MP fit every eigenvector is counted as bulk.
pub fn localization_summary(matrix: &WeightMatrix, fit: Option<&MpFit>) -> Result<Localization> {
    let (n, _) = matrix.oriented_dims();
    let (singular, vectors) = linalg::right_singular_pairs(matrix)?;
    let threshold = fit.map(|f| f.spike_threshold());
    let mut bulk = Vec::new();
    let mut spikes = Vec::new();
    for (s, v) in singular.iter().zip(&vectors) {
        let lambda = s * s / n as f64;
        // Singular vectors are unit-norm up to rounding; renormalize before IPR.
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let value = ipr(&unit)?;
        match threshold {
            Some(t) if lambda > t => spikes.push(value),
            _ => bulk.push(value),
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(Localization {
        bulk_ipr_mean: if bulk.is_empty() { 0.0 } else { mean(&bulk) },
        spike_ipr_mean: (!spikes.is_empty()).then(|| mean(&spikes)),
        spike_count: spikes.len(),
    })
}
