//! Seeded synthetic weight matrices with known spectral ground truth.
//!
//! Every generator is a pure function of its [`SynthSpec`]; randomness comes
//! from the documented stream in [`crate::rng`].
//!
//! Spike strengths are *target eigenvalues* of `X = (1/N) WᵀW`. A rank-one
//! term `a·u·vᵀ` with unit `u`, `v` and `a = θ·σ·√N` moves the top
//! eigenvalue of a Gaussian bulk to `σ²(1 + θ²)(c + θ²)/θ²` (`c = M/N`)
//! once `θ² > √c`; the generator inverts that relation. Targets at or
//! below `λ+` are mapped linearly onto `θ² ∈ (0, √c]`, i.e. below the
//! transition, and are expected to be absorbed by the bulk.
//!
//! The bulk-decay generator is one plausible realization of that phase (a
//! variance-weighted mix of Gaussian and Pareto entries, a band of
//! near-critical correlations and two strong spikes); there is no canonical
//! generative model for it.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mp::MpParams;
use crate::rng::{derive_seed, Xoshiro256};
use crate::tensor_io::WeightMatrix;

pub const DEFAULT_ROWS: usize = 1000;
pub const DEFAULT_COLS: usize = 250;
pub const DEFAULT_BLEED_RANK: usize = 50;
pub const DEFAULT_SPIKES: usize = 10;
pub const DEFAULT_MIX_WEIGHT: f64 = 0.5;
pub const DEFAULT_MIX_MU: f64 = 2.5;
pub const DEFAULT_PARETO_MU: f64 = 1.5;
pub const DEFAULT_ZERO_FRACTION: f64 = 0.6;
/// Share of directions carrying the bulk-decay correlation band.
pub const DECAY_RANK_FRACTION: f64 = 0.4;
/// Band amplitude relative to the detection threshold.
pub const DECAY_STRENGTH: f64 = 1.3;
/// Seeds used to locate the spike-detection transition empirically.
pub const BPP_TRIALS: usize = 50;
const BPP_SEED: u64 = 0xB_B900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Gaussian,
    Spiked,
    Pareto,
    Bleed,
    BulkDecayMix,
    RankCollapsed,
}

impl SynthKind {
    pub const ALL: [SynthKind; 6] = [
        SynthKind::Gaussian,
        SynthKind::Spiked,
        SynthKind::Pareto,
        SynthKind::Bleed,
        SynthKind::BulkDecayMix,
        SynthKind::RankCollapsed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SynthKind::Gaussian => "gaussian",
            SynthKind::Spiked => "spiked",
            SynthKind::Pareto => "pareto",
            SynthKind::Bleed => "bleed",
            SynthKind::BulkDecayMix => "bulk_decay_mix",
            SynthKind::RankCollapsed => "rank_collapsed",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SynthKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown generator kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    /// Target eigenvalue of `(1/N) WᵀW`.
    pub strength: f64,
    /// Support size of the spike's right vector; dense when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
}

impl Spike {
    pub fn dense(strength: f64) -> Self {
        Self {
            strength,
            sparsity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_rows: usize,
    pub n_cols: usize,
    pub sigma_sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spikes: Vec<Spike>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_fraction: Option<f64>,
    /// Pareto variance share of the bulk-decay mix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix_weight: Option<f64>,
    /// Rank of the bleed perturbation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleed_rank: Option<usize>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn gaussian(n_rows: usize, n_cols: usize, sigma_sq: f64, seed: u64) -> Self {
        Self {
            kind: SynthKind::Gaussian,
            n_rows,
            n_cols,
            sigma_sq,
            mu: None,
            spikes: Vec::new(),
            zero_fraction: None,
            mix_weight: None,
            bleed_rank: None,
            seed,
        }
    }

    pub fn spiked(
        n_rows: usize,
        n_cols: usize,
        sigma_sq: f64,
        spikes: Vec<Spike>,
        seed: u64,
    ) -> Self {
        Self {
            kind: SynthKind::Spiked,
            spikes,
            ..Self::gaussian(n_rows, n_cols, sigma_sq, seed)
        }
    }

    pub fn pareto(n_rows: usize, n_cols: usize, mu: f64, seed: u64) -> Self {
        Self {
            kind: SynthKind::Pareto,
            mu: Some(mu),
            ..Self::gaussian(n_rows, n_cols, 1.0, seed)
        }
    }

    pub fn rank_collapsed(
        n_rows: usize,
        n_cols: usize,
        sigma_sq: f64,
        zero_fraction: f64,
        seed: u64,
    ) -> Self {
        Self {
            kind: SynthKind::RankCollapsed,
            zero_fraction: Some(zero_fraction),
            ..Self::gaussian(n_rows, n_cols, sigma_sq, seed)
        }
    }

    /// `(1/N)·MP upper edge` for this shape and noise level.
    pub fn lambda_plus(&self) -> f64 {
        let (n, m) = oriented(self.n_rows, self.n_cols);
        MpParams::new(self.sigma_sq, n as f64 / m as f64)
            .map(|p| p.lambda_plus())
            .unwrap_or(f64::NAN)
    }

    /// The default gallery member of `kind` at the given shape. Spike and
    /// bleed counts shrink on matrices too small to hold them.
    pub fn default_for(kind: SynthKind, n_rows: usize, n_cols: usize, seed: u64) -> Self {
        let base = Self::gaussian(n_rows, n_cols, 1.0, seed);
        let lp = base.lambda_plus();
        let m = n_rows.min(n_cols);
        match kind {
            SynthKind::Gaussian => base,
            SynthKind::Spiked => Self {
                kind,
                spikes: vec![Spike::dense(4.0 * lp); DEFAULT_SPIKES.min((m / 4).max(1))],
                ..base
            },
            SynthKind::Pareto => Self::pareto(n_rows, n_cols, DEFAULT_PARETO_MU, seed),
            SynthKind::Bleed => Self {
                kind,
                bleed_rank: Some(DEFAULT_BLEED_RANK.min((m / 5).max(1))),
                ..base
            },
            SynthKind::BulkDecayMix => Self {
                kind,
                mu: Some(DEFAULT_MIX_MU),
                mix_weight: Some(DEFAULT_MIX_WEIGHT),
                spikes: vec![Spike::dense(8.0 * lp), Spike::dense(12.0 * lp)],
                ..base
            },
            SynthKind::RankCollapsed => {
                Self::rank_collapsed(n_rows, n_cols, 1.0, DEFAULT_ZERO_FRACTION, seed)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.n_rows < 2 || self.n_cols < 2 {
            return bad(format!("shape {}x{} too small", self.n_rows, self.n_cols));
        }
        if !(self.sigma_sq > 0.0) || !self.sigma_sq.is_finite() {
            return bad(format!("sigma_sq must be positive, got {}", self.sigma_sq));
        }
        let kind = self.kind.as_str();
        let uses_mu = matches!(self.kind, SynthKind::Pareto | SynthKind::BulkDecayMix);
        let uses_spikes = matches!(self.kind, SynthKind::Spiked | SynthKind::BulkDecayMix);
        if self.mu.is_some() != uses_mu && !(self.kind == SynthKind::BulkDecayMix) {
            return bad(format!(
                "`mu` is {} for kind {kind}",
                if uses_mu { "required" } else { "not allowed" }
            ));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) {
                return bad(format!("mu must be positive, got {mu}"));
            }
        }
        if !uses_spikes && !self.spikes.is_empty() {
            return bad(format!("`spikes` not allowed for kind {kind}"));
        }
        if self.kind == SynthKind::Spiked && self.spikes.is_empty() {
            return bad("kind spiked needs at least one spike".into());
        }
        let (_, m) = oriented(self.n_rows, self.n_cols);
        for s in &self.spikes {
            if !(s.strength > 0.0) {
                return bad(format!(
                    "spike strength must be positive, got {}",
                    s.strength
                ));
            }
            if let Some(k) = s.sparsity {
                if k == 0 || k > m {
                    return bad(format!("spike sparsity {k} outside 1..={m}"));
                }
            }
        }
        if self.spikes.len() > m {
            return bad(format!(
                "{} spikes exceed rank bound {m}",
                self.spikes.len()
            ));
        }
        match (self.kind, self.zero_fraction) {
            (SynthKind::RankCollapsed, None) => {
                return bad("kind rank_collapsed needs zero_fraction".into())
            }
            (SynthKind::RankCollapsed, Some(f)) if !(0.0..=1.0).contains(&f) => {
                return bad(format!("zero_fraction {f} outside [0, 1]"))
            }
            (SynthKind::RankCollapsed, _) => {}
            (_, Some(_)) => return bad(format!("`zero_fraction` not allowed for kind {kind}")),
            _ => {}
        }
        if self.mix_weight.is_some() && self.kind != SynthKind::BulkDecayMix {
            return bad(format!("`mix_weight` not allowed for kind {kind}"));
        }
        if let Some(w) = self.mix_weight {
            if !(0.0..=1.0).contains(&w) {
                return bad(format!("mix_weight {w} outside [0, 1]"));
            }
        }
        match (self.kind, self.bleed_rank) {
            (SynthKind::Bleed, Some(r)) if r == 0 || r > m => {
                return bad(format!("bleed_rank {r} outside 1..={m}"))
            }
            (SynthKind::Bleed, _) => {}
            (_, Some(_)) => return bad(format!("`bleed_rank` not allowed for kind {kind}")),
            _ => {}
        }
        Ok(())
    }
}

/// A generated matrix plus any generator warnings.
#[derive(Debug, Clone)]
pub struct Synthesized {
    pub matrix: WeightMatrix,
    pub warnings: Vec<String>,
}

fn oriented(rows: usize, cols: usize) -> (usize, usize) {
    (rows.max(cols), rows.min(cols))
}

/// Dispatches on `spec.kind`.
pub fn generate(spec: &SynthSpec) -> Result<Synthesized> {
    match spec.kind {
        SynthKind::Gaussian => gen_gaussian(spec),
        SynthKind::Spiked => gen_spiked(spec),
        SynthKind::Pareto => gen_pareto(spec),
        SynthKind::Bleed => gen_bleed(spec),
        SynthKind::BulkDecayMix => gen_bulk_decay_mix(spec),
        SynthKind::RankCollapsed => gen_rank_collapsed(spec),
    }
}

fn expect_kind(spec: &SynthSpec, kind: SynthKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Parameter(format!(
            "generator for {} called with kind {}",
            kind.as_str(),
            spec.kind.as_str()
        )));
    }
    spec.validate()
}

fn matrix_name(spec: &SynthSpec) -> String {
    format!("{}-{}", spec.kind.as_str(), spec.seed)
}

fn gaussian_data(rows: usize, cols: usize, sigma: f64, rng: &mut Xoshiro256) -> Vec<f64> {
    (0..rows * cols).map(|_| sigma * rng.normal()).collect()
}

/// i.i.d. `N(0, σ²)` entries.
pub fn gen_gaussian(spec: &SynthSpec) -> Result<Synthesized> {
    expect_kind(spec, SynthKind::Gaussian)?;
    let mut rng = Xoshiro256::seed_from_u64(spec.seed);
    let data = gaussian_data(spec.n_rows, spec.n_cols, spec.sigma_sq.sqrt(), &mut rng);
    Ok(Synthesized {
        matrix: WeightMatrix::new(matrix_name(spec), spec.n_rows, spec.n_cols, data)?,
        warnings: Vec::new(),
    })
}

/// Normalized signal amplitude `θ` for a target eigenvalue, and whether the
/// target sits at or below the bulk edge.
pub fn spike_amplitude(target: f64, sigma_sq: f64, q: f64) -> (f64, bool) {
    let c = 1.0 / q;
    let ell = target / sigma_sq;
    let ell_plus = (1.0 + c.sqrt()).powi(2);
    if ell > ell_plus {
        let b = ell - 1.0 - c;
        let theta_sq = 0.5 * (b + (b * b - 4.0 * c).max(0.0).sqrt());
        (theta_sq.sqrt(), false)
    } else {
        ((c.sqrt() * ell / ell_plus).sqrt(), true)
    }
}

/// Asymptotic top eigenvalue produced by amplitude `θ` (the edge when subcritical).
pub fn outlier_location(theta: f64, sigma_sq: f64, q: f64) -> f64 {
    let c = 1.0 / q;
    let t2 = theta * theta;
    if t2 <= c.sqrt() {
        sigma_sq * (1.0 + c.sqrt()).powi(2)
    } else {
        sigma_sq * (1.0 + t2) * (c + t2) / t2
    }
}

fn random_unit(len: usize, sparsity: Option<usize>, rng: &mut Xoshiro256) -> Vec<f64> {
    let mut v = vec![0.0; len];
    match sparsity {
        Some(k) if k < len => {
            for i in rng.choose_indices(len, k) {
                v[i] = rng.normal();
            }
        }
        _ => v.iter_mut().for_each(|x| *x = rng.normal()),
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Orthonormalizes `v` against `basis` (modified Gram-Schmidt).
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Adds `Σ a_k u_k v_kᵀ` to row-major `data`. `amplitudes` are the
/// normalized `θ_k`; sparse supports go on the smaller-dimension side.
fn plant(
    data: &mut [f64],
    rows: usize,
    cols: usize,
    sigma_sq: f64,
    amplitudes: &[(f64, Option<usize>)],
    rng: &mut Xoshiro256,
) {
    let (n, _) = oriented(rows, cols);
    let small_is_cols = cols <= rows;
    let (mut dense_left, mut dense_right): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        (Vec::new(), Vec::new());
    for &(theta, sparsity) in amplitudes {
        let a = theta * sigma_sq.sqrt() * (n as f64).sqrt();
        let (left_sparsity, right_sparsity) = if small_is_cols {
            (None, sparsity)
        } else {
            (sparsity, None)
        };
        let mut u = random_unit(rows, left_sparsity, rng);
        let mut v = random_unit(cols, right_sparsity, rng);
        if left_sparsity.is_none() {
            orthonormalize(&mut u, &dense_left);
            dense_left.push(u.clone());
        }
        if right_sparsity.is_none() {
            orthonormalize(&mut v, &dense_right);
            dense_right.push(v.clone());
        }
        for i in 0..rows {
            let ui = a * u[i];
            if ui == 0.0 {
                continue;
            }
            let row = &mut data[i * cols..(i + 1) * cols];
            row.iter_mut().zip(&v).for_each(|(x, vj)| *x += ui * vj);
        }
    }
}

/// Gaussian bulk plus low-rank spikes at the requested eigenvalues.
pub fn gen_spiked(spec: &SynthSpec) -> Result<Synthesized> {
    expect_kind(spec, SynthKind::Spiked)?;
    let (n, m) = oriented(spec.n_rows, spec.n_cols);
    let q = n as f64 / m as f64;
    let mut rng = Xoshiro256::seed_from_u64(spec.seed);
    let mut data = gaussian_data(spec.n_rows, spec.n_cols, spec.sigma_sq.sqrt(), &mut rng);
    let mut warnings = Vec::new();
    let amplitudes: Vec<(f64, Option<usize>)> = spec
        .spikes
        .iter()
        .map(|s| {
            let (theta, sub) = spike_amplitude(s.strength, spec.sigma_sq, q);
            if sub {
                warnings.push(format!(
                    "spike strength {} is at or below lambda_plus {:.4}; it is sub-critical and expected to be absorbed by the bulk",
                    s.strength,
                    spec.lambda_plus()
                ));
            }
            (theta, s.sparsity)
        })
        .collect();
    plant(
        &mut data,
        spec.n_rows,
        spec.n_cols,
        spec.sigma_sq,
        &amplitudes,
        &mut rng,
    );
    Ok(Synthesized {
        matrix: WeightMatrix::new(matrix_name(spec), spec.n_rows, spec.n_cols, data)?,
        warnings,
    })
}

/// `sign · Pareto(μ)` entries with unit scale: `P(|W| > x) = x^-μ`, `x >= 1`.
pub fn gen_pareto(spec: &SynthSpec) -> Result<Synthesized> {
    expect_kind(spec, SynthKind::Pareto)?;
    let mu = spec.mu.expect("validated");
    let mut rng = Xoshiro256::seed_from_u64(spec.seed);
    let data = (0..spec.n_rows * spec.n_cols)
        .map(|_| rng.sign() * rng.pareto(mu))
        .collect();
    Ok(Synthesized {
        matrix: WeightMatrix::new(matrix_name(spec), spec.n_rows, spec.n_cols, data)?,
        warnings: Vec::new(),
    })
}

/// Thresholds keyed by `(rows, cols, σ² bits)`.
type ThresholdCache = HashMap<(usize, usize, u64), f64>;

/// Empirical spike-detection transition, in normalized amplitude `θ`.
///
/// [`BPP_TRIALS`] Gaussian matrices with fixed seeds give a null
/// distribution of `λ_max`; a planted dense spike counts as detected when
/// `λ_max` exceeds the null's 95th percentile. Bisection (with common random
/// numbers across amplitudes) finds the amplitude detected in half of the
/// trials. Results are cached per `(rows, cols, σ²)`.
pub fn bpp_threshold(n_rows: usize, n_cols: usize, sigma_sq: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<ThresholdCache>> = OnceLock::new();
    let key = (n_rows, n_cols, sigma_sq.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&t) = cache.lock().expect("cache lock").get(&key) {
        return Ok(t);
    }

    let (n, m) = oriented(n_rows, n_cols);
    let q = n as f64 / m as f64;
    let top_eigenvalues = |theta: f64| -> Result<Vec<f64>> {
        (0..BPP_TRIALS)
            .map(|trial| {
                let mut rng = Xoshiro256::seed_from_u64(derive_seed(BPP_SEED, trial as u64));
                let mut data = gaussian_data(n_rows, n_cols, sigma_sq.sqrt(), &mut rng);
                if theta > 0.0 {
                    plant(
                        &mut data,
                        n_rows,
                        n_cols,
                        sigma_sq,
                        &[(theta, None)],
                        &mut rng,
                    );
                }
                let w = WeightMatrix::new("bpp-probe", n_rows, n_cols, data)?;
                let smax = linalg::singular_values(&w)?[0];
                Ok(smax * smax / n as f64)
            })
            .collect()
    };

    let mut null = top_eigenvalues(0.0)?;
    null.sort_by(f64::total_cmp);
    let cutoff = null[((0.95 * BPP_TRIALS as f64).ceil() as usize).min(BPP_TRIALS) - 1];
    let detected_fraction = |theta: f64| -> Result<f64> {
        let hits = top_eigenvalues(theta)?
            .iter()
            .filter(|&&l| l > cutoff)
            .count();
        Ok(hits as f64 / BPP_TRIALS as f64)
    };

    let critical = (1.0 / q).powf(0.25);
    let (mut lo, mut hi) = (0.0, 3.0 * critical);
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if detected_fraction(mid)? >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    cache.lock().expect("cache lock").insert(key, t);
    Ok(t)
}

/// Gaussian plus a rank-`r` perturbation with amplitudes uniform in
/// `[1.0, 1.2]` times the empirical detection threshold.
pub fn gen_bleed(spec: &SynthSpec) -> Result<Synthesized> {
    expect_kind(spec, SynthKind::Bleed)?;
    let rank = spec.bleed_rank.unwrap_or(DEFAULT_BLEED_RANK);
    let theta_c = bpp_threshold(spec.n_rows, spec.n_cols, spec.sigma_sq)?;
    let mut rng = Xoshiro256::seed_from_u64(spec.seed);
    let mut data = gaussian_data(spec.n_rows, spec.n_cols, spec.sigma_sq.sqrt(), &mut rng);
    let amplitudes: Vec<(f64, Option<usize>)> = (0..rank)
        .map(|_| (theta_c * (1.0 + 0.2 * rng.uniform()), None))
        .collect();
    plant(
        &mut data,
        spec.n_rows,
        spec.n_cols,
        spec.sigma_sq,
        &amplitudes,
        &mut rng,
    );
    Ok(Synthesized {
        matrix: WeightMatrix::new(matrix_name(spec), spec.n_rows, spec.n_cols, data)?,
        warnings: Vec::new(),
    })
}

/// Bulk-decay realization: `√(1−w)·Gaussian + √w·Pareto(μ)/rms` entries
/// (total variance `σ²`), a band of `⌈0.4·M⌉` correlations just strong
/// enough to leave the bulk but not to separate from it (amplitudes
/// uniform in `[1.0, 1.2] × 1.3 × θ_bpp`), and the requested spikes.
pub fn gen_bulk_decay_mix(spec: &SynthSpec) -> Result<Synthesized> {
    expect_kind(spec, SynthKind::BulkDecayMix)?;
    let mu = spec.mu.unwrap_or(DEFAULT_MIX_MU);
    if mu <= 2.0 {
        return Err(Error::Parameter(format!(
            "bulk-decay mix needs a finite-variance Pareto component (mu > 2), got {mu}"
        )));
    }
    let w = spec.mix_weight.unwrap_or(DEFAULT_MIX_WEIGHT);
    let sigma = spec.sigma_sq.sqrt();
    let pareto_rms = (mu / (mu - 2.0)).sqrt();
    let (n, m) = oriented(spec.n_rows, spec.n_cols);
    let q = n as f64 / m as f64;
    let theta_c = bpp_threshold(spec.n_rows, spec.n_cols, spec.sigma_sq)?;

    let mut rng = Xoshiro256::seed_from_u64(spec.seed);
    let mut data: Vec<f64> = (0..spec.n_rows * spec.n_cols)
        .map(|_| {
            let g = rng.normal();
            let p = rng.sign() * rng.pareto(mu) / pareto_rms;
            sigma * ((1.0 - w).sqrt() * g + w.sqrt() * p)
        })
        .collect();
    let band = (DECAY_RANK_FRACTION * m as f64).ceil() as usize;
    let mut amplitudes: Vec<(f64, Option<usize>)> = (0..band)
        .map(|_| (DECAY_STRENGTH * theta_c * (1.0 + 0.2 * rng.uniform()), None))
        .collect();
    amplitudes.extend(
        spec.spikes
            .iter()
            .map(|s| (spike_amplitude(s.strength, spec.sigma_sq, q).0, s.sparsity)),
    );
    plant(
        &mut data,
        spec.n_rows,
        spec.n_cols,
        spec.sigma_sq,
        &amplitudes,
        &mut rng,
    );
    Ok(Synthesized {
        matrix: WeightMatrix::new(matrix_name(spec), spec.n_rows, spec.n_cols, data)?,
        warnings: Vec::new(),
    })
}

/// Gaussian with `⌈f·M⌉` randomly chosen singular values set to zero.
pub fn gen_rank_collapsed(spec: &SynthSpec) -> Result<Synthesized> {
    expect_kind(spec, SynthKind::RankCollapsed)?;
    let f = spec.zero_fraction.expect("validated");
    let mut rng = Xoshiro256::seed_from_u64(spec.seed);
    let data = gaussian_data(spec.n_rows, spec.n_cols, spec.sigma_sq.sqrt(), &mut rng);
    let g = WeightMatrix::new(matrix_name(spec), spec.n_rows, spec.n_cols, data)?;
    let (u, mut s, v) = linalg::thin_svd(&g)?;
    let k = s.len();
    let zeros = ((f * k as f64) - 1e-9).ceil().max(0.0) as usize;
    for i in rng.choose_indices(k, zeros.min(k)) {
        s[i] = 0.0;
    }
    let matrix = WeightMatrix::from_fn(matrix_name(spec), spec.n_rows, spec.n_cols, |i, j| {
        (0..k).map(|r| u[(i, r)] * s[r] * v[(j, r)]).sum()
    })?;
    Ok(Synthesized {
        matrix,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitude_inverts_outlier_formula() {
        for &q in &[1.0, 2.0, 4.0, 4.9] {
            for &target_rel in &[1.5, 4.0, 10.0] {
                let lp = MpParams::new(1.3, q).unwrap().lambda_plus();
                let (theta, sub) = spike_amplitude(target_rel * lp, 1.3, q);
                assert!(!sub);
                let back = outlier_location(theta, 1.3, q);
                assert!((back - target_rel * lp).abs() < 1e-9 * back, "q={q}");
            }
        }
        let (theta, sub) = spike_amplitude(1.0, 1.0, 4.0);
        assert!(sub);
        assert!(theta * theta < 0.5);
    }

    #[test]
    fn validation_rules() {
        assert!(SynthSpec::default_for(SynthKind::Pareto, 40, 20, 1)
            .validate()
            .is_ok());
        let mut s = SynthSpec::gaussian(40, 20, 1.0, 1);
        s.mu = Some(2.0);
        assert!(s.validate().is_err());
        assert!(SynthSpec::rank_collapsed(40, 20, 1.0, 1.5, 1)
            .validate()
            .is_err());
        assert!(SynthSpec::rank_collapsed(40, 20, 1.0, -0.1, 1)
            .validate()
            .is_err());
        let empty = SynthSpec::spiked(40, 20, 1.0, vec![], 1);
        assert!(empty.validate().is_err());
        assert!(gen_pareto(&SynthSpec::gaussian(40, 20, 1.0, 1)).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        for kind in SynthKind::ALL {
            let s = SynthSpec::default_for(kind, 100, 50, 7);
            let text = serde_json::to_string(&s).unwrap();
            let back: SynthSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(s, back);
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "bulk_decay_mix".parse::<SynthKind>().unwrap(),
            SynthKind::BulkDecayMix
        );
        assert!("wishart".parse::<SynthKind>().is_err());
    }

    #[test]
    fn pareto_entries_have_unit_floor() {
        let out = gen_pareto(&SynthSpec::pareto(30, 20, 1.5, 4)).unwrap();
        assert!(out.matrix.data().iter().all(|x| x.abs() >= 1.0));
        let neg = out.matrix.data().iter().filter(|&&x| x < 0.0).count();
        assert!(neg > 200 && neg < 400);
    }
}
