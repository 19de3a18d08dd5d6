use esdscope::metrics::{
    localization_summary, mp_soft_rank, soft_rank_from_edge, spectral_entropy, stable_rank,
};
use esdscope::phases::spike_statistics;
use esdscope::synth::{generate, Spike, SynthKind, SynthSpec};
use esdscope::{
    analyze_matrix, classify, compute_esd, fit_mp, fit_power_law, AnalysisOptions, Esd, Phase,
    PhaseEvidence, Thresholds, WeightMatrix,
};

fn synth(spec: SynthSpec) -> WeightMatrix {
    generate(&spec).unwrap().matrix
}

fn phase_of(w: &WeightMatrix) -> Phase {
    analyze_matrix(w, &AnalysisOptions::default())
        .unwrap()
        .report
        .phase
        .label
}

fn evidence(esd: &Esd) -> PhaseEvidence {
    PhaseEvidence::gather(esd, fit_mp(esd).ok(), fit_power_law(esd).ok())
}

#[test]
fn gaussian_stable_rank_and_entropy() {
    let w = synth(SynthSpec::gaussian(1000, 250, 1.0, 21));
    let esd = compute_esd(&w).unwrap();
    let sr = stable_rank(&esd).unwrap();
    assert!((sr / (250.0 / 2.25) - 1.0).abs() <= 0.05, "{sr}");
    let s = spectral_entropy(&esd).unwrap();
    assert!(s > 0.9 && s < 1.0, "{s}");

    // a dominant rank-one signal a u v^T with unit u, v lowers the entropy
    let (n, m) = (1000f64, 250f64);
    let a = 3.0 * n.sqrt();
    let spiked = WeightMatrix::from_fn("spiked", 1000, 250, |i, j| {
        let u = if i % 2 == 0 { 1.0 } else { -1.0 } / n.sqrt();
        let v = if j % 3 == 0 { 1.0 } else { -1.0 } / m.sqrt();
        w.get(i, j) + a * u * v
    })
    .unwrap();
    let spiked_esd = compute_esd(&spiked).unwrap();
    assert!(spiked_esd.lambda_max() > 3.0 * esd.lambda_max());
    assert!(spectral_entropy(&spiked_esd).unwrap() < s);
}

#[test]
fn soft_rank_cases() {
    let w = synth(SynthSpec::gaussian(1000, 250, 1.0, 22));
    let esd = compute_esd(&w).unwrap();
    let fit = fit_mp(&esd).unwrap();
    let r = mp_soft_rank(Some(&fit), &esd).unwrap();
    assert!(r > 0.95 && r <= 1.0, "{r}");
    assert_eq!(mp_soft_rank(None, &esd).unwrap(), 0.0);
    assert!((soft_rank_from_edge(Some(3.5f64), 25.0).unwrap() - 0.14).abs() < 1e-12);
}

#[test]
fn localization_of_bulk_and_sparse_spike() {
    let w = synth(SynthSpec::gaussian(1000, 250, 1.0, 23));
    let fit = fit_mp(&compute_esd(&w).unwrap()).unwrap();
    let loc = localization_summary(&w, Some(&fit)).unwrap();
    assert_eq!(loc.spike_count, 0);
    assert!(
        (loc.bulk_ipr_mean * 250.0 / 3.0 - 1.0).abs() < 0.3,
        "{}",
        loc.bulk_ipr_mean
    );

    let sparse = Spike {
        strength: 5.0 * 2.25,
        sparsity: Some(10),
    };
    let w = synth(SynthSpec::spiked(1000, 250, 1.0, vec![sparse], 23));
    let fit = fit_mp(&compute_esd(&w).unwrap()).unwrap();
    let loc = localization_summary(&w, Some(&fit)).unwrap();
    assert_eq!(loc.spike_count, 1);
    assert!(loc.spike_ipr_mean.unwrap() > loc.bulk_ipr_mean);
}

#[test]
fn collapsed_layer_has_no_spikes() {
    let w = synth(SynthSpec::rank_collapsed(400, 100, 1.0, 0.6, 3));
    let fit = fit_mp(&compute_esd(&w).unwrap()).ok();
    assert!(fit.is_none());
    assert_eq!(localization_summary(&w, None).unwrap().spike_count, 0);
}

#[test]
fn spike_statistics_cases() {
    let esd = compute_esd(&synth(SynthSpec::gaussian(2000, 500, 1.0, 24))).unwrap();
    let s = spike_statistics(&esd, &fit_mp(&esd).unwrap());
    assert_eq!(
        (s.spike_count, s.spike_gap, s.zero_mass_fraction),
        (0, 0.0, 0.0)
    );
    assert!(s.bleed_mass_fraction <= 3.0 / 500.0);

    let w = synth(SynthSpec::spiked(
        2000,
        500,
        1.0,
        vec![Spike::dense(10.0)],
        24,
    ));
    let esd = compute_esd(&w).unwrap();
    let s = spike_statistics(&esd, &fit_mp(&esd).unwrap());
    assert_eq!(s.spike_count, 1);
    assert!(s.spike_gap > 3.0, "{}", s.spike_gap);

    let mut one = vec![0.0; 50];
    one[49] = 2.0;
    let esd = Esd::from_eigenvalues(one, 100, 50, "one").unwrap();
    assert_eq!(esdscope::phases::zero_mass_fraction(&esd), 49.0 / 50.0);
}

#[test]
fn classifier_examples() {
    assert_eq!(
        phase_of(&synth(SynthSpec::gaussian(2000, 500, 1.0, 25))),
        Phase::RandomLike
    );
    let lp = SynthSpec::gaussian(1000, 250, 1.0, 0).lambda_plus();
    let spikes = vec![Spike::dense(4.0 * lp); 10];
    let w = synth(SynthSpec::spiked(1000, 250, 1.0, spikes, 25));
    let a = analyze_matrix(&w, &AnalysisOptions::default())
        .unwrap()
        .report;
    assert_eq!(a.phase.label, Phase::BulkSpikes);
    assert_eq!(a.metrics.spike_count, 10);
    assert_eq!(
        phase_of(&synth(SynthSpec::pareto(1000, 250, 1.5, 25))),
        Phase::HeavyTailed
    );
    assert_eq!(
        phase_of(&synth(SynthSpec::pareto(1000, 250, 1.0, 25))),
        Phase::HeavyTailed
    );
    assert_eq!(
        phase_of(&synth(SynthSpec::rank_collapsed(1000, 250, 1.0, 0.6, 25))),
        Phase::RankCollapse
    );
    assert_eq!(
        phase_of(&synth(SynthSpec::default_for(
            SynthKind::Bleed,
            1000,
            250,
            25
        ))),
        Phase::BleedingOut
    );
}

#[test]
fn default_generators_hit_their_phase() {
    for (kind, phase) in [
        (SynthKind::Bleed, Phase::BleedingOut),
        (SynthKind::BulkDecayMix, Phase::BulkDecay),
    ] {
        let hits = (0..10u64)
            .filter(|&s| {
                phase_of(&synth(SynthSpec::default_for(kind, 1000, 250, 700 + s))) == phase
            })
            .count();
        assert!(hits >= 9, "{kind:?}: {hits}/10");
    }
}

#[test]
fn classification_is_scale_invariant_and_deterministic() {
    let th = Thresholds::default();
    for kind in SynthKind::ALL {
        let w = synth(SynthSpec::default_for(kind, 400, 100, 26));
        let esd = compute_esd(&w).unwrap();
        let base = classify(&evidence(&esd), &th).unwrap();
        assert_eq!(classify(&evidence(&esd), &th).unwrap(), base);
        for c in [0.01, 5.0] {
            let scaled = compute_esd(&w.scaled(c).unwrap()).unwrap();
            assert_eq!(
                classify(&evidence(&scaled), &th).unwrap().label,
                base.label,
                "{kind:?} c={c}"
            );
        }
    }
}
