//! Marchenko-Pastur density, CDF and bulk fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esd::Esd;
use crate::optim::golden_section;
use crate::quad::adaptive_simpson;
use crate::scalar::Real;

/// Absolute tolerance of the CDF quadrature.
pub const CDF_TOL: f64 = 1e-9;

/// Marchenko-Pastur law for element variance `sigma_sq` and aspect ratio `q >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpParams<T: Real> {
    pub sigma_sq: T,
    pub q: T,
}

impl<T: Real> MpParams<T> {
    pub fn new(sigma_sq: T, q: T) -> Result<Self> {
        if !(sigma_sq > T::zero()) || !sigma_sq.is_finite() {
            return Err(Error::Parameter(format!(
                "sigma_sq must be positive, got {sigma_sq}"
            )));
        }
        if !(q >= T::one()) || !q.is_finite() {
            return Err(Error::Parameter(format!("q must be >= 1, got {q}")));
        }
        Ok(Self { sigma_sq, q })
    }

    /// Parameters whose upper edge sits at `lambda_plus`.
    pub fn with_lambda_plus(lambda_plus: T, q: T) -> Result<Self> {
        let s = T::one() + T::one() / q.sqrt();
        Self::new(lambda_plus / (s * s), q)
    }

    /// `(λ−, λ+) = σ²(1 ∓ 1/√Q)²`.
    pub fn edges(&self) -> (T, T) {
        let r = T::one() / self.q.sqrt();
        let lo = T::one() - r;
        let hi = T::one() + r;
        (self.sigma_sq * lo * lo, self.sigma_sq * hi * hi)
    }

    pub fn lambda_plus(&self) -> T {
        self.edges().1
    }

    pub fn density(&self, x: T) -> T {
        let (lo, hi) = self.edges();
        if !(x > lo && x < hi && x > T::zero()) {
            return T::zero();
        }
        let two_pi = T::lit(2.0) * T::PI();
        self.q / (two_pi * self.sigma_sq) * ((hi - x) * (x - lo)).sqrt() / x
    }

    /// Density in the angular variable `x = λ− + h(1 − cos θ)`, `h = (λ+ − λ−)/2`.
    ///
    /// The substitution removes the square-root edge singularities and the
    /// `1/√x` singularity at the origin when `Q = 1`.
    fn angular_density(&self, theta: T) -> T {
        let (lo, hi) = self.edges();
        let h = (hi - lo) / T::lit(2.0);
        let x = lo + h * (T::one() - theta.cos());
        if x <= T::zero() {
            // limit θ → 0 with λ− = 0
            return self.q * h / (T::PI() * self.sigma_sq);
        }
        let s = theta.sin();
        self.q * h * h * s * s / (T::lit(2.0) * T::PI() * self.sigma_sq * x)
    }

    fn angle_of(&self, x: T) -> T {
        let (lo, hi) = self.edges();
        let t = T::one() - T::lit(2.0) * (x - lo) / (hi - lo);
        t.max(-T::one()).min(T::one()).acos()
    }

    pub fn cdf(&self, x: T) -> T {
        let (lo, hi) = self.edges();
        if x <= lo {
            return T::zero();
        }
        if x >= hi {
            return T::one();
        }
        let v = adaptive_simpson(
            &|t| self.angular_density(t),
            T::zero(),
            self.angle_of(x),
            T::lit(CDF_TOL),
        );
        v.max(T::zero()).min(T::one())
    }

    /// CDF at every point of an ascending slice, integrating piecewise.
    pub fn cdf_sorted(&self, xs: &[T]) -> Vec<T> {
        let (lo, hi) = self.edges();
        let mut out = Vec::with_capacity(xs.len());
        let mut acc = T::zero();
        let mut theta_prev = T::zero();
        for &x in xs {
            if x <= lo {
                out.push(T::zero());
                continue;
            }
            if x >= hi {
                out.push(T::one());
                continue;
            }
            let theta = self.angle_of(x);
            if theta > theta_prev {
                acc = acc
                    + adaptive_simpson(
                        &|t| self.angular_density(t),
                        theta_prev,
                        theta,
                        T::lit(CDF_TOL),
                    );
                theta_prev = theta;
            }
            out.push(acc.max(T::zero()).min(T::one()));
        }
        out
    }

    /// Median of the law, by bisection on the CDF.
    pub fn median(&self) -> T {
        let (mut lo, mut hi) = self.edges();
        let half = T::lit(0.5);
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / T::lit(2.0)
    }
}

/// `(λ−, λ+)` for the given parameters.
pub fn mp_edges<T: Real>(params: &MpParams<T>) -> (T, T) {
    params.edges()
}

pub fn mp_density<T: Real>(x: T, params: &MpParams<T>) -> T {
    params.density(x)
}

pub fn mp_cdf<T: Real>(x: T, params: &MpParams<T>) -> T {
    params.cdf(x)
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
/// ascending `values` and a model CDF.
pub fn ks_distance<T: Real, F: Fn(T) -> T>(values: &[T], cdf: F) -> T {
    let cdf_values: Vec<T> = values.iter().map(|&x| cdf(x)).collect();
    ks_from_model_cdf(&cdf_values)
}

/// KS distance given the model CDF already evaluated at each ascending sample.
pub fn ks_from_model_cdf<T: Real>(cdf_values: &[T]) -> T {
    let n = T::from_count(cdf_values.len());
    let mut d = T::zero();
    for (i, &f) in cdf_values.iter().enumerate() {
        let above = T::from_count(i + 1) / n - f;
        let below = f - T::from_count(i) / n;
        d = d.max(above).max(below);
    }
    d.min(T::one())
}

/// Knobs of the bulk fit; defaults match the documented procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpFitOptions {
    /// Floor of the relative spike-exclusion margin.
    pub edge_floor: f64,
    /// Coefficient of the `M^{-2/3}` edge-fluctuation term.
    pub edge_coeff: f64,
    pub max_iter: usize,
    pub min_bulk: usize,
    /// Share of the spectrum the fitted bulk must keep; below it there is
    /// no MP bulk to speak of.
    pub min_bulk_fraction: f64,
}

impl Default for MpFitOptions {
    fn default() -> Self {
        Self {
            edge_floor: 0.05,
            edge_coeff: 5.0,
            max_iter: 20,
            min_bulk: 20,
            min_bulk_fraction: 0.5,
        }
    }
}

impl MpFitOptions {
    /// Relative margin `δ_edge = max(floor, coeff · M^{-2/3})`.
    pub fn edge_margin(&self, m: usize) -> f64 {
        self.edge_floor
            .max(self.edge_coeff * (m as f64).powf(-2.0 / 3.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpFit {
    pub params: MpParams<f64>,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub ks_distance: f64,
    pub n_bulk: usize,
    pub n_excluded: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Relative margin above `λ+` separating bleed from spikes.
    pub edge_margin: f64,
}

impl MpFit {
    /// Eigenvalues strictly above this are spikes.
    pub fn spike_threshold(&self) -> f64 {
        self.lambda_plus * (1.0 + self.edge_margin)
    }
}

/// Fits an MP bulk with median initialization and KS-minimizing refinement.
///
/// Starting from the `σ²` whose MP median equals the empirical median, the
/// fit repeatedly keeps the eigenvalues at most `λ+(1 + δ_edge)` and re-fits
/// `σ²` on `[0.2σ²₀, 2σ²₀]` by golden-section search on the KS distance
/// between the kept eigenvalues and the MP CDF truncated at the cutoff. It
/// stops when the kept set no longer changes.
pub fn fit_mp(esd: &Esd) -> Result<MpFit> {
    fit_mp_with(esd, &MpFitOptions::default())
}

pub fn fit_mp_with(esd: &Esd, opts: &MpFitOptions) -> Result<MpFit> {
    let values = esd.eigenvalues();
    let total = values.len();
    if total < opts.min_bulk {
        return Err(Error::InsufficientData(format!(
            "MP fit needs at least {} eigenvalues, got {total}",
            opts.min_bulk
        )));
    }
    let q = esd.q();
    let margin = opts.edge_margin(esd.n_cols());

    let empirical_median = if total % 2 == 1 {
        values[total / 2]
    } else {
        0.5 * (values[total / 2 - 1] + values[total / 2])
    };
    if !(empirical_median > 0.0) {
        return Err(Error::DegenerateBulk {
            retained: values.iter().filter(|&&v| v > 0.0).count(),
            required: opts.min_bulk,
        });
    }
    let unit = MpParams::new(1.0, q)?;
    let sigma0 = empirical_median / unit.median();

    let mut sigma = sigma0;
    let mut retained: Option<usize> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut ks = 1.0;

    for it in 1..=opts.max_iter {
        iterations = it;
        let cutoff = MpParams::new(sigma, q)?.lambda_plus() * (1.0 + margin);
        let k = values.partition_point(|&v| v <= cutoff);
        if k < opts.min_bulk {
            return Err(Error::DegenerateBulk {
                retained: k,
                required: opts.min_bulk,
            });
        }
        if retained == Some(k) {
            converged = true;
            break;
        }
        retained = Some(k);
        let bulk = &values[..k];
        let (best, d) = golden_section(
            |s| truncated_ks(bulk, s, q, cutoff),
            0.2 * sigma0,
            2.0 * sigma0,
            1e-10,
        );
        sigma = best;
        ks = d;
    }

    let n_bulk = retained.expect("at least one iteration");
    let required = opts
        .min_bulk
        .max((opts.min_bulk_fraction * total as f64).ceil() as usize);
    if n_bulk < required {
        return Err(Error::DegenerateBulk {
            retained: n_bulk,
            required,
        });
    }
    let params = MpParams::new(sigma, q)?;
    let (lambda_minus, lambda_plus) = params.edges();
    Ok(MpFit {
        params,
        lambda_minus,
        lambda_plus,
        ks_distance: ks.clamp(0.0, 1.0),
        n_bulk,
        n_excluded: total - n_bulk,
        converged,
        iterations,
        edge_margin: margin,
    })
}

/// KS distance of `bulk` against the MP CDF truncated and renormalized at `cutoff`.
fn truncated_ks(bulk: &[f64], sigma_sq: f64, q: f64, cutoff: f64) -> f64 {
    let params = MpParams { sigma_sq, q };
    let norm = params.cdf(cutoff);
    if !(norm > 0.0) {
        return 1.0;
    }
    let mut cdf = params.cdf_sorted(bulk);
    for c in cdf.iter_mut() {
        *c = (*c / norm).min(1.0);
    }
    ks_from_model_cdf(&cdf)
}
