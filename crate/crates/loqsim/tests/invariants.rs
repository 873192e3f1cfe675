//! Cross-module invariants of the measurement layer and the protocol that
//! don't belong to any single unit: completeness of the strict pattern
//! space, probability conservation under conditioning, insensitivity to the
//! polarizing-beamsplitter reflection phase, and measurement-basis
//! invariance of the heralding statistics.

use num_complex::Complex64;

use loqsim::dsl::SourceKind;
use loqsim::elements::{apply_bs, apply_pbs_phased, apply_rotation, RotationBasis};
use loqsim::fock::PureState;
use loqsim::measure::{condition, fidelity, pattern_probability, BellKind, ClickPattern, Detector};
use loqsim::oracle::oracle_state;
use loqsim::protocol::{
    input_from_ir, reference_ir, run, singlet_state, MeasurementBasis, ProtocolConfig,
};

fn reference_input(kind: BellKind, theta: f64) -> (loqsim::fock::ModeSet, PureState) {
    let ir = reference_ir(SourceKind::Bell(kind), theta, MeasurementBasis::HV);
    input_from_ir(&ir, None).unwrap()
}

fn fig1_bank() -> Vec<Detector> {
    [
        ("D1pH", "1pt"),
        ("D1pV", "1pr"),
        ("D3pH", "3pt"),
        ("D3pV", "3pr"),
    ]
    .into_iter()
    .map(|(name, spatial)| Detector {
        name: name.into(),
        spatial: spatial.into(),
    })
    .collect()
}

/// Fig-1 layout with a configurable PBS reflection phase.
fn final_state_with_pbs_phase(theta: f64, phase: Complex64) -> PureState {
    let (_, input) = reference_input(BellKind::PhiPlus, theta);
    let after_bs1 = apply_bs(&input, "1", "3", "1p", "3p").unwrap();
    let after_bs2 = apply_bs(&after_bs1, "2", "4", "2p", "4p").unwrap();
    let after_pbs1 = apply_pbs_phased(&after_bs2, "1p", "1pt", "1pr", phase).unwrap();
    apply_pbs_phased(&after_pbs1, "3p", "3pt", "3pr", phase).unwrap()
}

#[test]
fn strict_patterns_partition_probability_space() {
    // Every subset of the bank, as a strict pattern, is one cell of a
    // partition; including the all-silent cell they must sum to 1.
    let bank = fig1_bank();
    let state = final_state_with_pbs_phase(0.6, Complex64::new(0.0, 1.0));
    let names = ["D1pH", "D1pV", "D3pH", "D3pV"];
    let mut total = 0.0;
    for mask in 0u8..16 {
        let chosen: Vec<&str> = names
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, n)| *n)
            .collect();
        let pattern = ClickPattern::strict(chosen);
        total += pattern_probability(&state, &pattern, &bank).unwrap();
    }
    assert!(
        (total - 1.0).abs() < 1e-10,
        "strict patterns must partition: total {total}"
    );
}

#[test]
fn conditioning_conserves_pattern_probability_exactly() {
    let bank = fig1_bank();
    let state = final_state_with_pbs_phase(std::f64::consts::FRAC_PI_6, Complex64::new(0.0, 1.0));
    let pattern = ClickPattern::strict(["D1pH", "D3pV"]);
    let p = pattern_probability(&state, &pattern, &bank).unwrap();
    let ensemble = condition(&state, &pattern, &bank).unwrap();
    let weight_sum: f64 = ensemble.members().iter().map(|(w, _)| w).sum();
    assert_eq!(weight_sum, ensemble.total_probability());
    assert!((ensemble.total_probability() - p).abs() < 1e-15);
}

#[test]
fn pbs_reflection_phase_is_unobservable_downstream() {
    // Detectors are terminal, so the i-on-reflection convention cannot show
    // up in any probability or conditional fidelity. Compare against a
    // phase-free variant.
    let bank = fig1_bank();
    let theta = 0.5;
    let with_i = final_state_with_pbs_phase(theta, Complex64::new(0.0, 1.0));
    let phase_free = final_state_with_pbs_phase(theta, Complex64::new(1.0, 0.0));

    for alternative in [["D1pH", "D3pV"], ["D1pV", "D3pH"]] {
        let pattern = ClickPattern::strict(alternative);
        let p_i = pattern_probability(&with_i, &pattern, &bank).unwrap();
        let p_free = pattern_probability(&phase_free, &pattern, &bank).unwrap();
        assert!((p_i - p_free).abs() < 1e-12);

        let fid = |state: &PureState| {
            let ensemble = condition(state, &pattern, &bank).unwrap();
            let target = singlet_state(ensemble.modes().clone(), "2p", "4p").unwrap();
            fidelity(&ensemble, &target).unwrap()
        };
        assert!((fid(&with_i) - fid(&phase_free)).abs() < 1e-12);
    }
}

#[test]
fn rotated_analysis_leaves_heralding_statistics_unchanged() {
    let theta = 0.7;
    for kind in BellKind::ALL {
        let baseline = run(&ProtocolConfig::new(kind, theta)).unwrap();
        for basis in [MeasurementBasis::DA, MeasurementBasis::RL] {
            let rotated = run(&ProtocolConfig::new(kind, theta).with_basis(basis)).unwrap();
            let mut base_probs: Vec<f64> =
                baseline.patterns.iter().map(|p| p.probability).collect();
            let mut rot_probs: Vec<f64> = rotated.patterns.iter().map(|p| p.probability).collect();
            // The rotation may relabel which pattern catches which
            // polarization pair; the pair of probabilities is invariant.
            base_probs.sort_by(f64::total_cmp);
            rot_probs.sort_by(f64::total_cmp);
            for (a, b) in base_probs.iter().zip(&rot_probs) {
                assert!((a - b).abs() < 1e-10, "{kind} {basis:?}: {a} vs {b}");
            }
            assert!((rotated.heralded_fidelity().unwrap() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn singlet_analysis_direction_is_symmetric() {
    // Rotating the sources instead of reading them in a rotated basis is a
    // different experiment; but rotating BOTH output arms by the same
    // unitary must leave the swapped singlet component invariant up to
    // phase.
    let (universe, input) = reference_input(BellKind::PhiPlus, 0.6);
    let post_bs = {
        let a = apply_bs(&input, "1", "3", "1p", "3p").unwrap();
        apply_bs(&a, "2", "4", "2p", "4p").unwrap()
    };
    for basis in [RotationBasis::DA, RotationBasis::RL] {
        let rotated = apply_rotation(&post_bs, "1p", basis.matrix())
            .and_then(|s| apply_rotation(&s, "3p", basis.matrix()))
            .unwrap();
        let overlap = |state: &PureState| {
            let s13 = singlet_state(universe.clone(), "1p", "3p").unwrap();
            let s24 = singlet_state(universe.clone(), "2p", "4p").unwrap();
            let mut terms = Vec::new();
            for (b1, a1) in s13.terms() {
                for (b2, a2) in s24.terms() {
                    let occ: Vec<_> = b1
                        .iter()
                        .chain(b2.iter())
                        .map(|(m, n)| (m.clone(), n))
                        .collect();
                    terms.push((
                        loqsim::fock::FockBasisVector::from_occupations(occ),
                        a1 * a2,
                    ));
                }
            }
            PureState::from_terms(universe.clone(), terms)
                .unwrap()
                .inner(state)
                .unwrap()
        };
        assert!((overlap(&rotated).norm() - overlap(&post_bs).norm()).abs() < 1e-12);
    }
}

#[test]
fn full_protocol_state_matches_oracle_termwise() {
    for (kind, theta) in [
        (BellKind::PhiPlus, std::f64::consts::FRAC_PI_6),
        (BellKind::PsiMinus, 0.9),
    ] {
        let ir = reference_ir(SourceKind::Bell(kind), theta, MeasurementBasis::HV);
        let (_, input) = input_from_ir(&ir, None).unwrap();
        let elements = ir.element_list();
        let engine = loqsim::elements::apply_circuit(&input, &elements).unwrap();
        let oracle = oracle_state(&input, &elements).unwrap();
        let keys: std::collections::BTreeSet<_> = engine
            .terms()
            .map(|(b, _)| b.clone())
            .chain(oracle.terms().map(|(b, _)| b.clone()))
            .collect();
        for key in keys {
            assert!(
                (engine.amplitude(&key) - oracle.amplitude(&key)).norm() < 1e-10,
                "{kind} theta={theta} {key}"
            );
        }
        assert!((engine.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn post_bs_term_count_is_sixteen_for_generic_theta() {
    let result = run(&ProtocolConfig::new(
        BellKind::PhiPlus,
        std::f64::consts::FRAC_PI_6,
    ))
    .unwrap();
    assert_eq!(result.amplitude_table.len(), 16);
    // Bunched contributions put both photon pairs on two spatial modes; the
    // swapped component spreads one photon over each of the four outputs.
    let spans_all_four = |c: &str| {
        ["1p", "2p", "3p", "4p"].iter().all(|s| {
            c.split(',')
                .any(|entry| entry.starts_with(s) && !entry.starts_with(&format!("{s}t")))
        })
    };
    let bunched: Vec<&str> = result
        .amplitude_table
        .iter()
        .map(|r| r.config.as_str())
        .filter(|c| !spans_all_four(c))
        .collect();
    assert_eq!(bunched.len(), 12);
    for pair in [("1p", "2p"), ("1p", "4p"), ("2p", "3p"), ("3p", "4p")] {
        assert!(
            bunched
                .iter()
                .any(|c| c.contains(pair.0) && c.contains(pair.1)),
            "missing bunched pair {pair:?}"
        );
    }
    // No bunched term on the 1p-3p or 2p-4p pairs.
    for c in &bunched {
        let on_13 = c.contains("1p") && c.contains("3p");
        let on_24 = c.contains("2p") && c.contains("4p");
        assert!(!on_13 && !on_24, "unexpected bunched pair in {c}");
    }
}
