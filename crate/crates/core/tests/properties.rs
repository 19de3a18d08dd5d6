use proptest::prelude::*;

use esdscope::metrics::{soft_rank_from_edge, spectral_entropy, stable_rank};
use esdscope::powerlaw::{classify_universality, vuong};
use esdscope::rng::{derive_seed, Xoshiro256};
use esdscope::synth::{generate, SynthKind, SynthSpec};
use esdscope::tensor_io::{decode_array, encode_array};
use esdscope::{
    analyze_matrix, compute_esd, empirical_cdf, histogram, AnalysisOptions, Esd, MpParams, Report,
    WeightMatrix,
};

fn matrix() -> impl Strategy<Value = WeightMatrix> {
    (2usize..24, 2usize..24).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |data| WeightMatrix::new("m", r, c, data).unwrap())
    })
}

fn spectrum() -> impl Strategy<Value = Esd> {
    prop::collection::vec(0.0f64..100.0, 2..60).prop_filter_map("needs a positive value", |v| {
        let m = v.len();
        v.iter()
            .any(|&x| x > 1e-3)
            .then(|| Esd::from_eigenvalues(v, 2 * m, m, "s").unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rng_streams_are_reproducible(seed in any::<u64>(), index in any::<u64>()) {
        let draw = |s: u64| {
            let mut rng = Xoshiro256::seed_from_u64(s);
            (0..16).map(|_| rng.next_u64()).collect::<Vec<_>>()
        };
        prop_assert_eq!(draw(seed), draw(seed));
        prop_assert_eq!(derive_seed(seed, index), derive_seed(seed, index));
        let mut rng = Xoshiro256::seed_from_u64(seed);
        for _ in 0..64 {
            let u = rng.uniform();
            prop_assert!((0.0..1.0).contains(&u));
            prop_assert!(rng.uniform_open0() > 0.0);
        }
    }

    #[test]
    fn mp_law_shape(sigma_sq in 0.05f64..20.0, q in 1.0f64..12.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let p = MpParams::new(sigma_sq, q).unwrap();
        let (lo, hi) = p.edges();
        prop_assert!(0.0 <= lo && lo <= hi);
        let (x, y) = (lo + a.min(b) * (hi - lo), lo + a.max(b) * (hi - lo));
        let (fx, fy) = (p.cdf(x), p.cdf(y));
        prop_assert!((0.0..=1.0).contains(&fx) && (0.0..=1.0).contains(&fy));
        prop_assert!(fx <= fy + 1e-9);
        prop_assert!(p.density(x) >= 0.0);
        prop_assert_eq!(p.density(hi * 1.01 + 1e-9), 0.0);
        prop_assert!(p.cdf(lo) <= 1e-9 && p.cdf(hi) >= 1.0 - 1e-9);
    }

    #[test]
    fn esd_invariants(w in matrix()) {
        if let Ok(esd) = compute_esd(&w) {
            let v = esd.eigenvalues();
            prop_assert_eq!(v.len(), w.rows().min(w.cols()));
            prop_assert!(v.windows(2).all(|p| p[0] <= p[1]));
            prop_assert!(v.iter().all(|&x| x >= 0.0));
            prop_assert!(esd.q() >= 1.0);
            let h = histogram(v, 7, None).unwrap();
            prop_assert!((h.total_mass() - 1.0).abs() <= 1e-9);
            let mut prev = 0.0;
            for &x in v {
                let f = empirical_cdf(v, x);
                prop_assert!((0.0..=1.0).contains(&f) && f >= prev);
                prev = f;
            }
        }
    }

    #[test]
    fn metric_bounds(esd in spectrum()) {
        let sr = stable_rank(&esd).unwrap();
        let floor = 1e-9 * esd.lambda_max();
        let hard_rank = esd.eigenvalues().iter().filter(|&&x| x > floor).count() as f64;
        prop_assert!(sr >= 1.0 - 1e-12 && sr <= hard_rank + 1e-9);
        prop_assert!(hard_rank <= esd.len() as f64);
        let s = spectral_entropy(&esd).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
    }

    #[test]
    fn metrics_ignore_scale(w in matrix(), c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
        if let (Ok(a), Ok(b)) = (compute_esd(&w), compute_esd(&w.scaled(c).unwrap())) {
            if a.lambda_max() > 1e-6 {
                let (sa, sb) = (stable_rank(&a).unwrap(), stable_rank(&b).unwrap());
                prop_assert!((sa / sb - 1.0).abs() < 1e-9);
                let (ea, eb) = (spectral_entropy(&a).unwrap(), spectral_entropy(&b).unwrap());
                prop_assert!((ea - eb).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn majorization_lowers_rank_and_entropy(esd in spectrum(), share in 0.05f64..0.95) {
        let mut v = esd.eigenvalues().to_vec();
        let (small, top) = (0, v.len() - 1);
        if v[small] > 1e-6 && v[small] < v[top] {
            let moved = share * v[small];
            v[small] -= moved;
            v[top] += moved;
            let shifted = Esd::from_eigenvalues(v, esd.n_rows(), esd.n_cols(), "s").unwrap();
            prop_assert!(stable_rank(&shifted).unwrap() < stable_rank(&esd).unwrap());
            prop_assert!(spectral_entropy(&shifted).unwrap() < spectral_entropy(&esd).unwrap());
        }
    }

    #[test]
    fn soft_rank_is_a_ratio(lambda_plus in 0.01f64..100.0, lambda_max in 0.01f64..100.0) {
        let r = soft_rank_from_edge(Some(lambda_plus), lambda_max).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r == 1.0, lambda_max <= lambda_plus);
    }

    #[test]
    fn universality_is_monotone(a in 1.0001f64..10.0, b in 1.0001f64..10.0) {
        let ((mu_a, ca), (mu_b, cb)) = (classify_universality(a), classify_universality(b));
        prop_assert_eq!(mu_a, 2.0 * (a - 1.0));
        if a <= b {
            prop_assert!(mu_a <= mu_b);
            // classes are declared from heaviest-tailed to lightest
            prop_assert!(class_rank(ca) <= class_rank(cb));
        }
    }

    #[test]
    fn vuong_is_antisymmetric(d in prop::collection::vec(-5.0f64..5.0, 3..40)) {
        let (r, p) = vuong(&d);
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let (rn, pn) = vuong(&neg);
        prop_assert!((r + rn).abs() < 1e-9 && (p - pn).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn npy_round_trip_is_bitwise(w in matrix()) {
        let bytes = encode_array(w.rows(), w.cols(), w.data());
        prop_assert_eq!(bytes.len() % 16, (w.data().len() * 8) % 16);
        let back = decode_array(&bytes, "m".into()).unwrap();
        prop_assert_eq!(back.data(), w.data());
    }

    #[test]
    fn synth_specs_validate_and_round_trip(kind_index in 0usize..6, seed in any::<u64>(), rows in 4usize..40, cols in 4usize..40) {
        let kind = SynthKind::ALL[kind_index];
        let spec = SynthSpec::default_for(kind, rows, cols, seed);
        prop_assert!(spec.validate().is_ok());
        let text = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(serde_json::from_str::<SynthSpec>(&text).unwrap(), spec.clone());
        let stray = SynthSpec { mix_weight: Some(0.5), ..spec.clone() };
        prop_assert_eq!(stray.validate().is_ok(), kind == SynthKind::BulkDecayMix);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reports_round_trip(kind_index in 0usize..6, seed in any::<u64>()) {
        let spec = SynthSpec::default_for(SynthKind::ALL[kind_index], 120, 40, seed);
        let w = generate(&spec).unwrap().matrix;
        let layer = analyze_matrix(&w, &AnalysisOptions::default()).unwrap().report;
        let report = Report { version: "1".into(), layers: vec![layer], errors: vec![], generated_at: Some(seed) };
        let text = report.to_json().unwrap();
        prop_assert_eq!(Report::from_json(&text).unwrap(), report);
    }
}

fn class_rank(c: esdscope::UniversalityClass) -> u8 {
    use esdscope::UniversalityClass::*;
    match c {
        VeryHt => 0,
        ModeratelyHt => 1,
        WeaklyHt => 2,
    }
}
