//! Assignment of a layer to one of the 5+1 self-regularization phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esd::Esd;
use crate::mp::MpFit;
use crate::powerlaw::PlFit;

/// Eigenvalues below `ZERO_REL_EPS · λ_max` count as exact zeros.
pub const ZERO_REL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    RandomLike,
    BleedingOut,
    BulkSpikes,
    BulkDecay,
    HeavyTailed,
    RankCollapse,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::RandomLike,
        Phase::BleedingOut,
        Phase::BulkSpikes,
        Phase::BulkDecay,
        Phase::HeavyTailed,
        Phase::RankCollapse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::RandomLike => "random_like",
            Phase::BleedingOut => "bleeding_out",
            Phase::BulkSpikes => "bulk_spikes",
            Phase::BulkDecay => "bulk_decay",
            Phase::HeavyTailed => "heavy_tailed",
            Phase::RankCollapse => "rank_collapse",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub label: Phase,
    pub rationale: Vec<String>,
}

/// Decision thresholds of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `f₀`: zero-eigenvalue mass that signals rank collapse.
    pub zero_mass: f64,
    /// `α_ht`: largest tail exponent still called heavy-tailed.
    pub alpha_ht: f64,
    /// `τ_mp`: largest bulk KS distance of an acceptable MP fit.
    pub tau_mp: f64,
    /// `β`: largest bleed mass of a random-like layer.
    pub bleed: f64,
    /// `g`: smallest relative gap of a well-separated spike.
    pub spike_gap: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            zero_mass: 0.25,
            alpha_ht: 4.0,
            tau_mp: 0.05,
            bleed: 0.01,
            spike_gap: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeStats {
    pub spike_count: usize,
    pub spike_gap: f64,
    pub bleed_mass_fraction: f64,
    pub zero_mass_fraction: f64,
}

pub fn zero_mass_fraction(esd: &Esd) -> f64 {
    let floor = ZERO_REL_EPS * esd.lambda_max();
    let zeros = esd.eigenvalues().partition_point(|&l| l < floor);
    zeros as f64 / esd.len() as f64
}

/// Spike and bleed bookkeeping relative to a fitted bulk edge.
///
/// Spikes lie above `t = λ+(1 + δ_edge)`; the bleed region is `(λ+, t]`.
/// The gap is `(smallest spike − largest non-spike) / λ+`.
pub fn spike_statistics(esd: &Esd, fit: &MpFit) -> SpikeStats {
    let values = esd.eigenvalues();
    let m = values.len() as f64;
    let t = fit.spike_threshold();
    let lp = fit.lambda_plus;
    let first_spike = values.partition_point(|&l| l <= t);
    let first_bleed = values.partition_point(|&l| l <= lp);
    let spike_count = values.len() - first_spike;
    let spike_gap = if spike_count > 0 && first_spike > 0 {
        (values[first_spike] - values[first_spike - 1]) / lp
    } else {
        0.0
    };
    SpikeStats {
        spike_count,
        spike_gap,
        bleed_mass_fraction: (first_spike - first_bleed) as f64 / m,
        zero_mass_fraction: zero_mass_fraction(esd),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEvidence {
    pub mp_fit: Option<MpFit>,
    pub pl_fit: Option<PlFit>,
    pub zero_mass_fraction: f64,
    pub bleed_mass_fraction: f64,
    pub spike_count: usize,
    pub spike_gap: f64,
}

impl PhaseEvidence {
    pub fn gather(esd: &Esd, mp_fit: Option<MpFit>, pl_fit: Option<PlFit>) -> Self {
        let stats = match &mp_fit {
            Some(fit) => spike_statistics(esd, fit),
            None => SpikeStats {
                spike_count: 0,
                spike_gap: 0.0,
                bleed_mass_fraction: 0.0,
                zero_mass_fraction: zero_mass_fraction(esd),
            },
        };
        Self {
            mp_fit,
            pl_fit,
            zero_mass_fraction: stats.zero_mass_fraction,
            bleed_mass_fraction: stats.bleed_mass_fraction,
            spike_count: stats.spike_count,
            spike_gap: stats.spike_gap,
        }
    }
}

/// First matching rule wins:
/// rank collapse, heavy-tailed, random-like, bulk+spikes, bleeding-out,
/// and bulk-decay as the residual class.
pub fn classify(ev: &PhaseEvidence, th: &Thresholds) -> Result<PhaseLabel> {
    let label = |label: Phase, rationale: Vec<String>| Ok(PhaseLabel { label, rationale });

    if ev.zero_mass_fraction >= th.zero_mass {
        return label(
            Phase::RankCollapse,
            vec![format!(
                "zero_mass_fraction {:.4} >= {} (large-mass spike at lambda = 0)",
                ev.zero_mass_fraction, th.zero_mass
            )],
        );
    }
    if ev.mp_fit.is_none() && ev.pl_fit.is_none() {
        return Err(Error::Unclassifiable);
    }

    if let Some(pl) = &ev.pl_fit {
        let mp_ks = ev.mp_fit.as_ref().map(|f| f.ks_distance);
        let tail_beats_bulk = mp_ks.is_none_or(|d| pl.ks_distance < d);
        if pl.alpha <= th.alpha_ht && !pl.rejected_by_exponential() && tail_beats_bulk {
            let mut why = vec![
                format!("power-law alpha {:.3} <= {}", pl.alpha, th.alpha_ht),
                "power law not rejected in favour of an exponential tail".to_owned(),
            ];
            why.push(match mp_ks {
                Some(d) => format!("tail KS {:.4} < MP bulk KS {:.4}", pl.ks_distance, d),
                None => "no MP bulk could be fitted".to_owned(),
            });
            return label(Phase::HeavyTailed, why);
        }
    }

    if let Some(mp) = ev.mp_fit.as_ref().filter(|f| f.converged) {
        if mp.ks_distance <= th.tau_mp {
            let fit_note = format!("MP bulk KS {:.4} <= {}", mp.ks_distance, th.tau_mp);
            if ev.spike_count == 0 && ev.bleed_mass_fraction <= th.bleed {
                return label(
                    Phase::RandomLike,
                    vec![
                        fit_note,
                        "no spikes".to_owned(),
                        format!("bleed mass {:.4} <= {}", ev.bleed_mass_fraction, th.bleed),
                    ],
                );
            }
            if ev.spike_count >= 1 && ev.spike_gap >= th.spike_gap {
                return label(
                    Phase::BulkSpikes,
                    vec![
                        fit_note,
                        format!("{} spike(s) above the bulk", ev.spike_count),
                        format!("spike gap {:.3} >= {}", ev.spike_gap, th.spike_gap),
                    ],
                );
            }
            if ev.bleed_mass_fraction > th.bleed
                && (ev.spike_count == 0 || ev.spike_gap < th.spike_gap)
            {
                return label(
                    Phase::BleedingOut,
                    vec![
                        fit_note,
                        format!("bleed mass {:.4} > {}", ev.bleed_mass_fraction, th.bleed),
                        format!(
                            "{} spike(s), gap {:.3} below {}",
                            ev.spike_count, ev.spike_gap, th.spike_gap
                        ),
                    ],
                );
            }
        }
    }

    let mut why =
        vec!["no earlier rule matched (residual class; edge concavity is not tested)".to_owned()];
    match &ev.mp_fit {
        Some(mp) if !mp.converged => why.push("MP fit did not converge".to_owned()),
        Some(mp) if mp.ks_distance > th.tau_mp => {
            why.push(format!("MP bulk KS {:.4} > {}", mp.ks_distance, th.tau_mp))
        }
        Some(_) => why.push(format!(
            "{} spike(s) with gap {:.3}, bleed mass {:.4}",
            ev.spike_count, ev.spike_gap, ev.bleed_mass_fraction
        )),
        None => why.push("no MP bulk could be fitted".to_owned()),
    }
    if let Some(pl) = &ev.pl_fit {
        why.push(format!(
            "power-law alpha {:.3}, tail KS {:.4} not decisive",
            pl.alpha, pl.ks_distance
        ));
    }
    label(Phase::BulkDecay, why)
}
