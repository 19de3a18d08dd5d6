use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use esdscope::mp::MpFitOptions;
use esdscope::phases::Thresholds;
use esdscope::plot::plot_data;
use esdscope::report::{
    analyze_sources, manifest_sources, sidecar_path, AnalysisOptions, LayerSource,
};
use esdscope::synth::{generate, Spike, SynthKind, SynthSpec};
use esdscope::validate::{run_suite, Suite};
use esdscope::{compute_esd, histogram, load_array, save_array};

#[derive(Parser)]
#[command(
    name = "esdscope",
    version,
    about = "Spectral diagnostics for neural network weight matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one NPY file or every layer of a manifest.
    Analyze(AnalyzeArgs),
    /// Write a synthetic weight matrix plus a sidecar JSON spec.
    Synth(SynthArgs),
    /// Run a Monte-Carlo validation suite and print its JSON report.
    Validate(ValidateArgs),
    /// Write the eigenvalue histogram of one NPY file as CSV.
    Esd(EsdArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as a manifest (implied by a .json extension).
    #[arg(long)]
    manifest: bool,
    #[arg(long)]
    out: PathBuf,
    /// Directory for per-layer plot CSVs.
    #[arg(long)]
    plots: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Emit plot data in log10 space.
    #[arg(long)]
    log_plots: bool,
    /// Also render a minimal SVG per layer.
    #[arg(long)]
    svg: bool,
    /// Omit the timestamp so identical inputs give identical bytes.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Maximum MP bulk KS distance for random-like, spiked and bleeding phases.
    #[arg(long, default_value_t = 0.05)]
    tau_mp: f64,
    /// Maximum power-law exponent for the heavy-tailed phase.
    #[arg(long, default_value_t = 4.0)]
    alpha_ht: f64,
    /// Zero-eigenvalue fraction that marks rank collapse.
    #[arg(long, default_value_t = 0.25)]
    zero_frac: f64,
    /// Eigenvalue mass just above the bulk edge tolerated as random-like.
    #[arg(long, default_value_t = 0.01)]
    bleed_frac: f64,
    /// Relative gap separating spikes from the bulk.
    #[arg(long, default_value_t = 0.25)]
    spike_gap: f64,
    /// Floor of the relative bulk-edge margin.
    #[arg(long, default_value_t = 0.05)]
    edge_floor: f64,
    /// Smallest share of eigenvalues an MP bulk fit may retain.
    #[arg(long, default_value_t = 0.5)]
    min_bulk_fraction: f64,
}

impl ThresholdArgs {
    fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            thresholds: Thresholds {
                zero_mass: self.zero_frac,
                alpha_ht: self.alpha_ht,
                tau_mp: self.tau_mp,
                bleed: self.bleed_frac,
                spike_gap: self.spike_gap,
            },
            mp: MpFitOptions {
                edge_floor: self.edge_floor,
                min_bulk_fraction: self.min_bulk_fraction,
                ..MpFitOptions::default()
            },
            ..AnalysisOptions::default()
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: SynthKind,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma_sq: f64,
    /// Pareto exponent (pareto and bulk_decay_mix kinds).
    #[arg(long)]
    mu: Option<f64>,
    /// Comma-separated target eigenvalues for planted spikes.
    #[arg(long, value_delimiter = ',')]
    spikes: Vec<f64>,
    /// Support size of every spike vector.
    #[arg(long)]
    spike_sparsity: Option<usize>,
    #[arg(long)]
    zero_fraction: Option<f64>,
    #[arg(long)]
    mix_weight: Option<f64>,
    #[arg(long)]
    bleed_rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl SynthArgs {
    /// Kind defaults overridden by whatever was given on the command line.
    fn spec(&self) -> SynthSpec {
        let mut spec = SynthSpec::default_for(self.kind, self.rows, self.cols, self.seed);
        spec.sigma_sq = self.sigma_sq;
        if self.mu.is_some() {
            spec.mu = self.mu;
        }
        if !self.spikes.is_empty() {
            spec.spikes = self
                .spikes
                .iter()
                .map(|&strength| Spike {
                    strength,
                    sparsity: self.spike_sparsity,
                })
                .collect();
        } else if let Some(k) = self.spike_sparsity {
            spec.spikes.iter_mut().for_each(|s| s.sparsity = Some(k));
        }
        if self.zero_fraction.is_some() {
            spec.zero_fraction = self.zero_fraction;
        }
        if self.mix_weight.is_some() {
            spec.mix_weight = self.mix_weight;
        }
        if self.bleed_rank.is_some() {
            spec.bleed_rank = self.bleed_rank;
        }
        spec
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    suite: Suite,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EsdArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    hist: PathBuf,
    #[arg(long, default_value_t = 100)]
    bins: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Synth(args) => synth(args),
        Command::Validate(args) => validate(args),
        Command::Esd(args) => esd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_manifest(args: &AnalyzeArgs) -> bool {
    args.manifest || args.input.extension().is_some_and(|e| e == "json")
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let sources = if is_manifest(&args) {
        manifest_sources(&args.input)
            .with_context(|| format!("reading manifest {}", args.input.display()))?
    } else {
        vec![LayerSource::File(args.input.clone())]
    };
    let opts = args.thresholds.options();
    let (mut report, analyses) = analyze_sources(&sources, &opts, args.jobs)?;
    if !args.deterministic {
        report.generated_at = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    report
        .write(&args.out)
        .with_context(|| format!("writing report {}", args.out.display()))?;

    if let Some(dir) = &args.plots {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for a in analyses.iter().flatten() {
            let r = &a.report;
            let data = plot_data(
                &a.esd,
                r.mp_fit.as_ref(),
                r.pl_fit.as_ref(),
                args.bins,
                args.log_plots,
            )?;
            let stem = file_stem(&r.layer_name);
            data.write_csv(dir.join(format!("{stem}.csv")))?;
            if args.svg {
                data.write_svg(dir.join(format!("{stem}.svg")), &r.layer_name)?;
            }
        }
    }

    for e in &report.errors {
        eprintln!("layer `{}` failed: {}", e.layer_name, e.error);
    }
    for r in &report.layers {
        println!(
            "{}\t{}\t{}",
            r.layer_name, r.phase.label, r.metrics.mp_soft_rank
        );
    }
    if report.layers.is_empty() {
        bail!("no layer could be analyzed");
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = args.spec();
    let out = generate(&spec)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let matrix = out.matrix.with_name(file_stem_of(&args.out));
    save_array(&matrix, &args.out)?;
    let sidecar = sidecar_path(&args.out);
    std::fs::write(&sidecar, serde_json::to_string_pretty(&spec)? + "\n")
        .with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(())
}

fn file_stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn validate(args: ValidateArgs) -> Result<()> {
    let report = run_suite(args.suite, args.seed);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(out) = &args.out {
        std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{text}");
    Ok(())
}

fn esd(args: EsdArgs) -> Result<()> {
    let w = load_array(&args.input)?;
    let spectrum = compute_esd(&w)?;
    let h = histogram(spectrum.eigenvalues(), args.bins, None)?;
    std::fs::write(&args.hist, h.to_csv())
        .with_context(|| format!("writing {}", args.hist.display()))?;
    println!(
        "{}: N={} M={} Q={:.4} lambda_min={} lambda_max={}",
        w.name(),
        spectrum.n_rows(),
        spectrum.n_cols(),
        spectrum.q(),
        spectrum.lambda_min(),
        spectrum.lambda_max()
    );
    Ok(())
}
