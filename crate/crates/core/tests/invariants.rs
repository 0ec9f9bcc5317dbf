use darboux::transform::commutativity_check;
use darboux::{apply, invert, nsoliton_reference, one_soliton_reference, BackgroundModel, Method, SpectralMeasure};
use proptest::prelude::*;

fn atom_strategy() -> impl Strategy<Value = (f64, f64)> {
    (0.3f64..2.0, 0.1f64..5.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_atom_is_the_one_soliton((kappa, w) in atom_strategy(), x in -6.0f64..6.0, t in 0.0f64..0.5) {
        let field = apply(&BackgroundModel::Zero, &SpectralMeasure::atom(kappa, w).unwrap(), 1).unwrap();
        let q = field.potential(x, t, Method::Direct).unwrap();
        let want = one_soliton_reference(kappa, w.sqrt(), x, t);
        prop_assert!((q - want).abs() <= 1e-12 * (1.0 + kappa * kappa), "{q} vs {want}");
    }

    #[test]
    fn methods_agree_on_two_solitons(
        (k1, w1) in atom_strategy(),
        gap in 0.2f64..1.0,
        w2 in 0.1f64..5.0,
        x in -4.0f64..4.0,
    ) {
        let k2 = k1 + gap;
        let sigma = SpectralMeasure::atoms(&[(k1, w1), (k2, w2)]).unwrap();
        let field = apply(&BackgroundModel::Zero, &sigma, 1).unwrap();
        let direct = field.potential(x, 0.0, Method::Direct).unwrap();
        let logdet = field.potential(x, 0.0, Method::LogDet).unwrap();
        let reference = nsoliton_reference(&[k1, k2], &[w1.sqrt(), w2.sqrt()], x, 0.0).unwrap();
        prop_assert!((direct - logdet).abs() < 1e-10, "{direct} vs {logdet}");
        prop_assert!((direct - reference).abs() < 1e-9, "{direct} vs {reference}");
    }

    #[test]
    fn atoms_commute((k1, w1) in atom_strategy(), gap in 0.2f64..1.0, w2 in 0.1f64..5.0) {
        let s1 = SpectralMeasure::atom(k1, w1).unwrap();
        let s2 = SpectralMeasure::atom(k1 + gap, w2).unwrap();
        let grid: Vec<(f64, f64)> = (-8..=8).map(|i| (i as f64 * 0.5, 0.1)).collect();
        let dev = commutativity_check(&s1, &s2, &grid, &Default::default()).unwrap();
        prop_assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn inversion_recovers_zero((kappa, w) in atom_strategy(), x in -5.0f64..5.0) {
        let field = apply(&BackgroundModel::Zero, &SpectralMeasure::atom(kappa, w).unwrap(), 1).unwrap();
        let back = invert(&field).unwrap();
        let q = back.potential(x, 0.0, Method::Direct).unwrap();
        prop_assert!(q.abs() < 1e-11, "{q}");
    }

    #[test]
    fn potential_is_nonpositive_for_positive_measures(
        (k1, w1) in atom_strategy(),
        gap in 0.2f64..1.0,
        w2 in 0.1f64..5.0,
        x in -10.0f64..10.0,
    ) {
        let sigma = SpectralMeasure::atoms(&[(k1, w1), (k1 + gap, w2)]).unwrap();
        let field = apply(&BackgroundModel::Zero, &sigma, 1).unwrap();
        let q = field.potential(x, 0.0, Method::Direct).unwrap();
        prop_assert!(q <= 1e-12, "{q}");
    }

    #[test]
    fn measure_json_round_trips(atoms in prop::collection::vec(atom_strategy(), 0..5)) {
        let mut seen = Vec::new();
        let distinct: Vec<(f64, f64)> = atoms
            .into_iter()
            .filter(|&(k, _)| {
                let fresh = seen.iter().all(|&s: &f64| (s - k).abs() > 1e-6);
                seen.push(k);
                fresh
            })
            .collect();
        let m = SpectralMeasure::atoms(&distinct).unwrap();
        prop_assert_eq!(SpectralMeasure::from_json(&m.to_json()).unwrap(), m);
    }
}
