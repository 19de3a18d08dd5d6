//! The per-layer analysis pipeline and its serialized report.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esd::{compute_esd, Esd};
use crate::metrics::{self, LayerMetrics};
use crate::mp::{fit_mp_with, MpFit, MpFitOptions};
use crate::phases::{classify, PhaseEvidence, PhaseLabel, Thresholds};
use crate::powerlaw::{compare_alternatives_with, fit_power_law_with, PlFit, PowerLawOptions};
use crate::synth::SynthSpec;
use crate::tensor_io::{load_array, manifest_base, Manifest, WeightMatrix};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub layer_name: String,
    /// `[N, M]` after orienting `N >= M`.
    pub shape: [usize; 2],
    pub q: f64,
    pub metrics: LayerMetrics,
    pub mp_fit: Option<MpFit>,
    pub pl_fit: Option<PlFit>,
    pub phase: PhaseLabel,
    pub warnings: Vec<String>,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerError {
    pub layer_name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub layers: Vec<PhaseReport>,
    #[serde(default)]
    pub errors: Vec<LayerError>,
    /// Seconds since the Unix epoch; absent in deterministic mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnalysisOptions {
    pub thresholds: Thresholds,
    pub mp: MpFitOptions,
    pub power_law: PowerLawOptions,
}

/// Everything computed for one layer, including the spectrum for plotting.
#[derive(Debug, Clone)]
pub struct LayerAnalysis {
    pub report: PhaseReport,
    pub esd: Esd,
}

/// Runs the full pipeline on one matrix. Fit failures become warnings and
/// null fields; only a failed eigensolve, an all-zero matrix or a layer
/// with nothing to classify is an error.
pub fn analyze_matrix(w: &WeightMatrix, opts: &AnalysisOptions) -> Result<LayerAnalysis> {
    let esd = compute_esd(w)?;
    let mut warnings = Vec::new();

    let mp_fit = match fit_mp_with(&esd, &opts.mp) {
        Ok(fit) => {
            if !fit.converged {
                warnings.push(format!(
                    "MP fit did not converge after {} iterations",
                    fit.iterations
                ));
            }
            Some(fit)
        }
        Err(e) => {
            warnings.push(format!("MP fit failed: {e}"));
            None
        }
    };

    let pl_fit = match fit_power_law_with(&esd, &opts.power_law) {
        Ok(fit) => match compare_alternatives_with(esd.eigenvalues(), &fit, &opts.power_law) {
            Ok(full) => Some(full),
            Err(e) => {
                warnings.push(format!("alternative-model comparison failed: {e}"));
                Some(fit)
            }
        },
        Err(e) => {
            warnings.push(format!("power-law fit failed: {e}"));
            None
        }
    };
    if let Some(pl) = &pl_fit {
        warnings.extend(pl.warnings());
    }

    let localization = metrics::localization_summary(w, mp_fit.as_ref())?;
    let layer_metrics = LayerMetrics {
        mp_soft_rank: metrics::mp_soft_rank(mp_fit.as_ref(), &esd)?,
        stable_rank: metrics::stable_rank(&esd)?,
        entropy: metrics::spectral_entropy(&esd)?,
        lambda_max: esd.lambda_max(),
        spike_count: localization.spike_count,
        bulk_ipr_mean: localization.bulk_ipr_mean,
        spike_ipr_mean: localization.spike_ipr_mean,
    };

    let evidence = PhaseEvidence::gather(&esd, mp_fit, pl_fit);
    let phase = classify(&evidence, &opts.thresholds)?;
    let PhaseEvidence { mp_fit, pl_fit, .. } = evidence;

    Ok(LayerAnalysis {
        report: PhaseReport {
            layer_name: w.name().to_owned(),
            shape: [esd.n_rows(), esd.n_cols()],
            q: esd.q(),
            metrics: layer_metrics,
            mp_fit,
            pl_fit,
            phase,
            warnings,
            tool_version: TOOL_VERSION.to_owned(),
            seed: None,
        },
        esd,
    })
}

/// Sidecar spec written next to synthetic arrays: `<file>.json`.
pub fn sidecar_path(array: &Path) -> PathBuf {
    let mut s = array.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn sidecar_seed(array: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(sidecar_path(array)).ok()?;
    serde_json::from_str::<SynthSpec>(&text)
        .ok()
        .map(|s| s.seed)
}

/// One analysis job: where the layer comes from.
#[derive(Debug, Clone)]
pub enum LayerSource {
    File(PathBuf),
    ManifestEntry {
        base: PathBuf,
        layer: crate::tensor_io::ManifestLayer,
    },
    Matrix(WeightMatrix),
}

impl LayerSource {
    fn name(&self) -> String {
        match self {
            LayerSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            LayerSource::ManifestEntry { layer, .. } => layer.name.clone(),
            LayerSource::Matrix(w) => w.name().to_owned(),
        }
    }

    fn load(&self) -> Result<(WeightMatrix, Option<u64>)> {
        match self {
            LayerSource::File(p) => Ok((load_array(p)?, sidecar_seed(p))),
            LayerSource::ManifestEntry { base, layer } => {
                Ok((layer.load(base)?, sidecar_seed(&layer.resolve(base))))
            }
            LayerSource::Matrix(w) => Ok((w.clone(), None)),
        }
    }
}

/// Lists the layers of a manifest without loading them.
pub fn manifest_sources(path: impl AsRef<Path>) -> Result<Vec<LayerSource>> {
    let path = path.as_ref();
    let manifest = Manifest::read(path)?;
    let base = manifest_base(path);
    Ok(manifest
        .layers
        .into_iter()
        .map(|layer| LayerSource::ManifestEntry {
            base: base.clone(),
            layer,
        })
        .collect())
}

/// Analyzes every source with up to `jobs` worker threads. Output order
/// follows input order; per-layer failures land in `errors`.
pub fn analyze_sources(
    sources: &[LayerSource],
    opts: &AnalysisOptions,
    jobs: usize,
) -> Result<(Report, Vec<Option<LayerAnalysis>>)> {
    let run = |src: &LayerSource| -> Result<LayerAnalysis> {
        let (w, seed) = src.load()?;
        let mut a = analyze_matrix(&w, opts)?;
        a.report.seed = seed;
        Ok(a)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<LayerAnalysis>> =
        pool.install(|| sources.par_iter().map(run).collect());

    let mut layers = Vec::new();
    let mut errors = Vec::new();
    let mut analyses = Vec::with_capacity(sources.len());
    for (src, outcome) in sources.iter().zip(outcomes) {
        match outcome {
            Ok(a) => {
                layers.push(a.report.clone());
                analyses.push(Some(a));
            }
            Err(e) => {
                errors.push(LayerError {
                    layer_name: src.name(),
                    error: e.to_string(),
                });
                analyses.push(None);
            }
        }
    }
    Ok((
        Report {
            version: REPORT_VERSION.to_owned(),
            layers,
            errors,
            generated_at: None,
        },
        analyses,
    ))
}
