//! Power-law tail fitting in the Clauset-Shalizi-Newman style.
//!
//! For every candidate lower cutoff `x_min` the continuous power-law MLE
//! `α = 1 + n / Σ ln(x_i / x_min)` is computed on the tail, and the cutoff
//! whose fitted CDF is closest to the empirical tail CDF (KS distance) wins.
//! The winning tail is then compared against exponential, log-normal,
//! stretched-exponential and truncated power-law alternatives with Vuong's
//! normalized log-likelihood ratio.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::esd::Esd;
use crate::mp::ks_from_model_cdf;
use crate::optim::{nelder_mead, NelderMeadResult};
use crate::quad::adaptive_simpson;
use crate::rng::Xoshiro256;
use crate::scalar::Real;

/// Heavy-tailed universality class of the entry distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniversalityClass {
    /// `μ > 4`
    WeaklyHt,
    /// `2 < μ <= 4`
    ModeratelyHt,
    /// `0 < μ <= 2`
    VeryHt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlternativeModel {
    TruncatedPl,
    Exponential,
    Lognormal,
    StretchedExponential,
}

impl AlternativeModel {
    pub const ALL: [AlternativeModel; 4] = [
        AlternativeModel::TruncatedPl,
        AlternativeModel::Exponential,
        AlternativeModel::Lognormal,
        AlternativeModel::StretchedExponential,
    ];
}

/// Outcome of one likelihood-ratio comparison. `log_likelihood_ratio` is
/// Vuong's normalized statistic; positive values favour the power law.
/// Both statistics are `None` when the alternative's MLE failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub model: AlternativeModel,
    pub log_likelihood_ratio: Option<f64>,
    pub p_value: Option<f64>,
    pub preferred: bool,
    pub params: Vec<f64>,
}

impl Alternative {
    pub fn is_indeterminate(&self) -> bool {
        self.log_likelihood_ratio.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlFit {
    pub alpha: f64,
    pub x_min: f64,
    pub n_tail: usize,
    pub ks_distance: f64,
    pub alternatives: Vec<Alternative>,
    pub mu: f64,
    pub universality_class: UniversalityClass,
}

impl PlFit {
    pub fn alternative(&self, model: AlternativeModel) -> Option<&Alternative> {
        self.alternatives.iter().find(|a| a.model == model)
    }

    /// True when the exponential alternative is significantly better.
    pub fn rejected_by_exponential(&self) -> bool {
        self.alternative(AlternativeModel::Exponential)
            .is_some_and(|a| a.preferred)
    }

    /// Human-readable caveats about the reliability of this fit.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !(1.5..=3.5).contains(&self.alpha) {
            w.push(format!(
                "power-law exponent alpha = {:.3} lies outside [1.5, 3.5], where the tail fit is unreliable",
                self.alpha
            ));
        }
        if self.universality_class == UniversalityClass::ModeratelyHt {
            w.push(
                "mu inferred from the infinite-size relation alpha = mu/2 + 1; finite-size corrections are large for 2 < mu < 4"
                    .to_owned(),
            );
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawOptions {
    pub n_tail_min: usize,
    /// Up to this many positive values every unique value is an `x_min` candidate.
    pub exhaustive_limit: usize,
    /// Otherwise this many empirical quantiles are scanned.
    pub n_quantiles: usize,
    pub max_quantile: f64,
    /// Values `<= zero_rel_eps * max` count as numerical zeros and are dropped.
    pub zero_rel_eps: f64,
    /// Seed of the restarts used for the non-convex alternative likelihoods.
    pub seed: u64,
    pub significance: f64,
}

impl Default for PowerLawOptions {
    fn default() -> Self {
        Self {
            n_tail_min: 10,
            exhaustive_limit: 1000,
            n_quantiles: 100,
            max_quantile: 0.95,
            zero_rel_eps: 1e-9,
            seed: 0x5EED_CAFE,
            significance: 0.05,
        }
    }
}

/// `μ = 2(α − 1)` and the class it falls in.
pub fn classify_universality<T: Real>(alpha: T) -> (T, UniversalityClass) {
    let mu = T::lit(2.0) * (alpha - T::one());
    let class = if mu <= T::lit(2.0) {
        UniversalityClass::VeryHt
    } else if mu <= T::lit(4.0) {
        UniversalityClass::ModeratelyHt
    } else {
        UniversalityClass::WeaklyHt
    };
    (mu, class)
}

fn positive_sorted(values: &[f64], zero_rel_eps: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let floor = zero_rel_eps * max;
    let mut v: Vec<f64> = values
        .iter()
        .copied()
        .filter(|&x| x > 0.0 && x > floor)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Fits the ESD tail; alternatives are left empty (see [`compare_alternatives`]).
pub fn fit_power_law(esd: &Esd) -> Result<PlFit> {
    fit_power_law_with(esd, &PowerLawOptions::default())
}

pub fn fit_power_law_with(esd: &Esd, opts: &PowerLawOptions) -> Result<PlFit> {
    fit_power_law_samples(esd.eigenvalues(), opts)
}

/// CSN fit of raw positive samples.
pub fn fit_power_law_samples(samples: &[f64], opts: &PowerLawOptions) -> Result<PlFit> {
    let xs = positive_sorted(samples, opts.zero_rel_eps);
    let n = xs.len();
    if n < opts.n_tail_min {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs {} positive values, got {n}",
            opts.n_tail_min
        )));
    }

    let candidates: Vec<f64> = if n <= opts.exhaustive_limit {
        let mut c = xs.clone();
        c.dedup();
        c
    } else {
        let k = opts.n_quantiles.max(2);
        (0..k)
            .map(|i| quantile(&xs, opts.max_quantile * i as f64 / (k - 1) as f64))
            .collect()
    };

    // suffix sums of ln x for O(1) MLE per candidate
    let mut suffix_ln = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_ln[i] = suffix_ln[i + 1] + xs[i].ln();
    }

    let mut best: Option<(f64, f64, usize, f64)> = None;
    let mut cdf = Vec::with_capacity(n);
    for &x_min in &candidates {
        let start = xs.partition_point(|&v| v < x_min);
        let n_tail = n - start;
        if n_tail < opts.n_tail_min {
            continue;
        }
        let log_sum = suffix_ln[start] - n_tail as f64 * x_min.ln();
        if !(log_sum > 0.0) {
            continue;
        }
        let alpha = 1.0 + n_tail as f64 / log_sum;
        cdf.clear();
        cdf.extend(
            xs[start..]
                .iter()
                .map(|&x| 1.0 - (x / x_min).powf(1.0 - alpha)),
        );
        let d = ks_from_model_cdf(&cdf);
        // ascending scan with strict improvement: ties keep the smallest x_min
        if best.is_none_or(|(_, _, _, bd)| d < bd) {
            best = Some((alpha, x_min, n_tail, d));
        }
    }

    let (alpha, x_min, n_tail, ks_distance) = best.ok_or_else(|| {
        Error::Degenerate("every candidate tail is constant; no power law can be fitted".into())
    })?;
    let (mu, universality_class) = classify_universality(alpha);
    Ok(PlFit {
        alpha,
        x_min,
        n_tail,
        ks_distance,
        alternatives: Vec::new(),
        mu,
        universality_class,
    })
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Adds likelihood-ratio comparisons against every alternative model.
pub fn compare_alternatives(esd: &Esd, fit: &PlFit) -> Result<PlFit> {
    compare_alternatives_with(esd.eigenvalues(), fit, &PowerLawOptions::default())
}

pub fn compare_alternatives_with(
    samples: &[f64],
    fit: &PlFit,
    opts: &PowerLawOptions,
) -> Result<PlFit> {
    if !(fit.alpha > 1.0) || !(fit.x_min > 0.0) {
        return Err(Error::Precondition(format!(
            "invalid power-law fit (alpha {}, x_min {})",
            fit.alpha, fit.x_min
        )));
    }
    let xs = positive_sorted(samples, opts.zero_rel_eps);
    let start = xs.partition_point(|&v| v < fit.x_min);
    let tail = &xs[start..];
    if tail.len() < 2 {
        return Err(Error::InsufficientData(
            "tail too short for comparisons".into(),
        ));
    }
    let u: Vec<f64> = tail.iter().map(|&x| x / fit.x_min).collect();
    let ln_xmin = fit.x_min.ln();
    let pl_ll: Vec<f64> = u
        .iter()
        .map(|&ui| (fit.alpha - 1.0).ln() - ln_xmin - fit.alpha * ui.ln())
        .collect();

    let mut out = fit.clone();
    out.alternatives = AlternativeModel::ALL
        .iter()
        .enumerate()
        .map(|(i, &model)| {
            let seed = crate::rng::derive_seed(opts.seed, i as u64);
            let fitted = match model {
                AlternativeModel::Exponential => fit_exponential(&u),
                AlternativeModel::Lognormal => fit_lognormal(&u, seed),
                AlternativeModel::StretchedExponential => fit_stretched_exponential(&u, seed),
                AlternativeModel::TruncatedPl => fit_truncated_pl(&u, fit.alpha, seed),
            };
            match fitted {
                Some((params, alt_ll_u)) => {
                    // densities in u differ from densities in x by the constant ln x_min
                    let diffs: Vec<f64> = pl_ll
                        .iter()
                        .zip(&alt_ll_u)
                        .map(|(&p, &a)| p - (a - ln_xmin))
                        .collect();
                    let (r, p) = vuong(&diffs);
                    Alternative {
                        model,
                        log_likelihood_ratio: Some(r),
                        p_value: Some(p),
                        preferred: r < 0.0 && p <= opts.significance,
                        params: params_in_x(model, &params, fit.x_min),
                    }
                }
                None => Alternative {
                    model,
                    log_likelihood_ratio: None,
                    p_value: None,
                    preferred: false,
                    params: Vec::new(),
                },
            }
        })
        .collect();
    Ok(out)
}

/// Below this spread of pointwise log-likelihood differences two normalized
/// densities agree on the sample, so the comparison is uninformative.
pub const VUONG_MIN_SPREAD: f64 = 1e-6;

/// Vuong's normalized log-likelihood ratio and its two-sided p-value.
pub fn vuong(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    if !(var.sqrt() > VUONG_MIN_SPREAD) || !var.is_finite() {
        return (0.0, 1.0);
    }
    let r = n.sqrt() * mean / var.sqrt();
    (r, erfc(r.abs() / std::f64::consts::SQRT_2))
}

/// Reports alternative parameters on the original scale.
fn params_in_x(model: AlternativeModel, p: &[f64], x_min: f64) -> Vec<f64> {
    match model {
        // [rate]
        AlternativeModel::Exponential => vec![p[0] / x_min],
        // [mu_log, sigma_log]
        AlternativeModel::Lognormal => vec![p[0] + x_min.ln(), p[1]],
        // [lambda, beta] in f ∝ x^(β-1) exp(-λ x^β)
        AlternativeModel::StretchedExponential => vec![p[0] / x_min.powf(p[1]), p[1]],
        // [alpha, lambda_cutoff]
        AlternativeModel::TruncatedPl => vec![p[0], x_min / p[1]],
    }
}

// The alternative fitters below work on u = x / x_min >= 1 and return the
// per-sample log-density in u.

fn fit_exponential(u: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let mean_excess = u.iter().map(|&x| x - 1.0).sum::<f64>() / u.len() as f64;
    if !(mean_excess > 0.0) {
        return None;
    }
    let rate = 1.0 / mean_excess;
    let ll = u.iter().map(|&x| rate.ln() - rate * (x - 1.0)).collect();
    Some((vec![rate], ll))
}

/// `ln P(Z > z)` for a standard normal, stable far into the upper tail.
fn ln_normal_sf(z: f64) -> f64 {
    if z < 5.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = z * z;
        -0.5 * z2 - (z * (2.0 * std::f64::consts::PI).sqrt()).ln()
            + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)).ln()
    }
}

fn best_of_restarts(
    mut objective: impl FnMut(&[f64]) -> f64,
    starts: &[Vec<f64>],
    step: &[f64],
) -> Option<NelderMeadResult> {
    let mut best: Option<NelderMeadResult> = None;
    for s in starts {
        let r = nelder_mead(&mut objective, s, step, 1e-12, 4000);
        // unconverged runs still bound the maximum likelihood from below
        if r.value.is_finite() && best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    best
}

fn restart_points(base: &[f64], spread: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let mut starts = vec![base.to_vec()];
    for _ in 0..2 {
        starts.push(
            base.iter()
                .zip(spread)
                .map(|(&b, &s)| b + s * rng.normal())
                .collect(),
        );
    }
    starts
}

fn fit_lognormal(u: &[f64], seed: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = u.len() as f64;
    let logs: Vec<f64> = u.iter().map(|x| x.ln()).collect();
    let m0 = logs.iter().sum::<f64>() / n;
    let s0 = (logs.iter().map(|l| (l - m0).powi(2)).sum::<f64>() / n)
        .sqrt()
        .max(1e-3);
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let ll_at = |m: f64, s: f64, l: f64| -> f64 {
        let z = (l - m) / s;
        -l - s.ln() - half_ln_2pi - 0.5 * z * z - ln_normal_sf(-m / s)
    };
    let nll = |p: &[f64]| -> f64 {
        let (m, s) = (p[0], p[1].exp());
        -logs.iter().map(|&l| ll_at(m, s, l)).sum::<f64>()
    };
    let starts = restart_points(&[m0, s0.ln()], &[1.0, 0.5], seed);
    let best = best_of_restarts(nll, &starts, &[0.5, 0.3])?;
    let (m, s) = (best.x[0], best.x[1].exp());
    let ll: Vec<f64> = logs.iter().map(|&l| ll_at(m, s, l)).collect();
    ll.iter().all(|v| v.is_finite()).then(|| (vec![m, s], ll))
}

fn fit_stretched_exponential(u: &[f64], seed: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    let mean_excess = u.iter().map(|&x| x - 1.0).sum::<f64>() / u.len() as f64;
    if !(mean_excess > 0.0) {
        return None;
    }
    // k = λβ keeps the β → 0 limit (a pure power law) finite
    let ll_at = |k: f64, beta: f64, x: f64| -> f64 {
        let lx = x.ln();
        k.ln() + (beta - 1.0) * lx - k * (beta * lx).exp_m1() / beta
    };
    let nll = |p: &[f64]| -> f64 {
        let (k, beta) = (p[0].exp(), p[1].exp());
        -u.iter().map(|&x| ll_at(k, beta, x)).sum::<f64>()
    };
    let starts = restart_points(&[(1.0 / mean_excess).ln(), 0.0], &[1.0, 0.5], seed);
    let best = best_of_restarts(nll, &starts, &[0.5, 0.3])?;
    let (k, beta) = (best.x[0].exp(), best.x[1].exp());
    let ll: Vec<f64> = u.iter().map(|&x| ll_at(k, beta, x)).collect();
    ll.iter()
        .all(|v| v.is_finite())
        .then(|| (vec![k / beta, beta], ll))
}

/// `ln ∫_1^∞ u^{-α} e^{-r u} du`, integrated in `t = ln u`.
fn ln_tpl_normalizer(alpha: f64, r: f64) -> f64 {
    if !(r > 0.0) {
        return f64::NAN;
    }
    let g = |t: f64| (1.0 - alpha) * t - r * t.exp();
    let t_peak = if alpha < 1.0 {
        ((1.0 - alpha) / r).ln().max(0.0)
    } else {
        0.0
    };
    let g_peak = g(t_peak);
    let mut upper = t_peak + 1.0;
    while g(upper) - g_peak > -60.0 {
        upper = t_peak + 2.0 * (upper - t_peak);
        if upper > 700.0 {
            return f64::NAN;
        }
    }
    let integrand = |t: f64| (g(t) - g_peak).exp();
    let mut total = 0.0;
    if t_peak > 0.0 {
        total += adaptive_simpson(&integrand, 0.0, t_peak, 1e-12);
    }
    total += adaptive_simpson(&integrand, t_peak, upper, 1e-12);
    g_peak + total.ln()
}

fn fit_truncated_pl(u: &[f64], alpha_pl: f64, seed: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = u.len() as f64;
    let sum_ln: f64 = u.iter().map(|x| x.ln()).sum();
    let sum_u: f64 = u.iter().sum();
    let u_max = u.iter().copied().fold(1.0, f64::max);
    let nll = |p: &[f64]| -> f64 {
        let (alpha, r) = (p[0], p[1].exp());
        let ln_z = ln_tpl_normalizer(alpha, r);
        alpha * sum_ln + r * sum_u + n * ln_z
    };
    // start near the pure power law (weak cutoff) and at a moderate cutoff
    let mut starts = restart_points(&[alpha_pl, (0.01 / u_max).ln()], &[0.3, 1.0], seed);
    starts.push(vec![alpha_pl - 0.5, (1.0 / u_max).ln()]);
    let best = best_of_restarts(nll, &starts, &[0.2, 1.0])?;
    let (alpha, r) = (best.x[0], best.x[1].exp());
    let ln_z = ln_tpl_normalizer(alpha, r);
    let ll: Vec<f64> = u.iter().map(|&x| -alpha * x.ln() - r * x - ln_z).collect();
    ll.iter()
        .all(|v| v.is_finite())
        .then(|| (vec![alpha, r], ll))
}

/// Least-squares slope of `ln λ_max` against `ln M` over a set of spectra.
pub fn frechet_scaling_exponent(esds: &[Esd]) -> Result<f64> {
    let mut sizes: Vec<usize> = esds.iter().map(|e| e.n_cols()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling slope needs at least 3 distinct sizes, got {}",
            sizes.len()
        )));
    }
    let mut points = Vec::with_capacity(esds.len());
    for e in esds {
        let lmax = e.lambda_max();
        if !(lmax > 0.0) {
            return Err(Error::Degenerate(format!(
                "spectrum `{}` has lambda_max = 0",
                e.source_name()
            )));
        }
        points.push(((e.n_cols() as f64).ln(), lmax.ln()));
    }
    Ok(least_squares_slope(&points))
}

pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
