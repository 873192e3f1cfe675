//! Linear optical elements acting on [`PureState`] by creation-operator
//! rewriting.
//!
//! Every element here is a linear substitution on creation operators. A term
//! |n₁,n₂,…⟩ is the operator monomial ∏ (a†)^n/√(n!) applied to vacuum, so
//! applying an element means substituting each rewritten operator by its
//! image, expanding the powers multinomially, and converting the resulting
//! monomials back to number states. Interference is exact: the two paths of a
//! Hong-Ou-Mandel coincidence cancel to a true floating-point zero, not just
//! below tolerance.
//!
//! Conventions (fixed once, tested, and shared with the permanent oracle):
//!
//! - 50/50 beamsplitter, per polarization: a†_in_a → (a†_out_a + i·a†_out_b)/√2
//!   and a†_in_b → (i·a†_out_a + a†_out_b)/√2.
//! - Polarizing beamsplitter: a†_H → a†_transmit_H, a†_V → i·a†_reflect_V.
//!   The reflection phase is unobservable downstream because detectors are
//!   terminal; a test pins that.
//! - Polarization rotation by a 2×2 unitary U acts in place on one spatial
//!   mode with column convention a†_p → Σ_q U[q][p]·a†_q.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{
    sqrt_factorial, FockBasisVector, FockError, ModeId, Polarization, PureState, MAX_OCCUPATION,
};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("element input modes must be distinct")]
    DuplicateModes,
    #[error("rotation matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),
    #[error("element {index} ({element}): {source}")]
    AtElement {
        index: usize,
        element: String,
        source: Box<ElementError>,
    },
}

/// Named polarization-basis presets for rotations placed before a polarizing
/// beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum RotationBasis {
    /// Diagonal/antidiagonal: maps |D⟩ → H port, |A⟩ → V port.
    DA,
    /// Circular: maps |L⟩ → H port, |R⟩ → V port under the fixed convention.
    RL,
}

impl RotationBasis {
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let r = |x: f64| Complex64::new(x * FRAC_1_SQRT_2, 0.0);
        let i = |x: f64| Complex64::new(0.0, x * FRAC_1_SQRT_2);
        match self {
            RotationBasis::DA => [[r(1.0), r(1.0)], [r(1.0), r(-1.0)]],
            RotationBasis::RL => [[r(1.0), i(-1.0)], [r(1.0), i(1.0)]],
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            RotationBasis::DA => "DA",
            RotationBasis::RL => "RL",
        }
    }
}

/// One optical element of a circuit, in terms of spatial mode labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    BeamSplitter {
        in_a: String,
        in_b: String,
        out_a: String,
        out_b: String,
    },
    PolarizingBs {
        input: String,
        transmit: String,
        reflect: String,
    },
    Rotation {
        spatial: String,
        basis: RotationBasis,
    },
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Element::BeamSplitter {
                in_a,
                in_b,
                out_a,
                out_b,
            } => write!(f, "bs {in_a} {in_b} -> {out_a} {out_b}"),
            Element::PolarizingBs {
                input,
                transmit,
                reflect,
            } => write!(f, "pbs {input} -> {transmit} {reflect}"),
            Element::Rotation { spatial, basis } => {
                write!(f, "rot {spatial} basis {}", basis.keyword())
            }
        }
    }
}

/// A linear substitution on creation operators: each key mode maps to a
/// superposition of target modes. Modes absent from the map pass through.
pub(crate) type Substitution = BTreeMap<ModeId, Vec<(ModeId, Complex64)>>;

/// Substitute creation operators and re-expand into number states.
pub(crate) fn rewrite(state: &PureState, sub: &Substitution) -> Result<PureState, ElementError> {
    for (from, targets) in sub {
        if !state.modes().contains(from) {
            return Err(FockError::UnknownMode(from.clone()).into());
        }
        for (to, _) in targets {
            if !state.modes().contains(to) {
                return Err(FockError::UnknownMode(to.clone()).into());
            }
        }
    }

    let mut out: BTreeMap<FockBasisVector, Complex64> = BTreeMap::new();
    for (basis, amp) in state.terms() {
        // Operator coefficient of the monomial behind this term.
        let mut coeff = amp;
        for (_, n) in basis.iter() {
            coeff /= sqrt_factorial(n);
        }

        // Monomials under construction: raw creation-operator powers.
        let mut partial: Vec<(BTreeMap<ModeId, u8>, Complex64)> = vec![(
            basis
                .iter()
                .filter(|(m, _)| !sub.contains_key(m))
                .map(|(m, n)| (m.clone(), n))
                .collect(),
            coeff,
        )];

        for (mode, n) in basis.iter() {
            let Some(targets) = sub.get(mode) else {
                continue;
            };
            let mut expanded = Vec::with_capacity(partial.len() * 2);
            for (monomial, c) in &partial {
                for (powers, w) in multinomial_powers(targets, n) {
                    let mut next = monomial.clone();
                    for (target, k) in powers {
                        *next.entry(target).or_insert(0) += k;
                    }
                    expanded.push((next, c * w));
                }
            }
            partial = expanded;
        }

        for (monomial, c) in partial {
            let mut value = c;
            for (mode, &k) in &monomial {
                if k > MAX_OCCUPATION {
                    return Err(FockError::OccupationCap {
                        mode: mode.clone(),
                        cap: MAX_OCCUPATION,
                    }
                    .into());
                }
                value *= sqrt_factorial(k);
            }
            let key =
                FockBasisVector::from_occupations(monomial.into_iter().filter(|(_, k)| *k > 0));
            *out.entry(key).or_insert(Complex64::new(0.0, 0.0)) += value;
        }
    }

    // from_terms re-canonicalizes: prune at PRUNE_EPS plus finiteness check.
    PureState::from_terms(state.modes().clone(), out).map_err(ElementError::from)
}

/// Expand (Σ_t c_t a†_t)^n into monomials with multinomial weights.
fn multinomial_powers(
    targets: &[(ModeId, Complex64)],
    n: u8,
) -> Vec<(Vec<(ModeId, u8)>, Complex64)> {
    fn go(
        targets: &[(ModeId, Complex64)],
        remaining: u8,
        acc: &mut Vec<(ModeId, u8)>,
        weight: Complex64,
        out: &mut Vec<(Vec<(ModeId, u8)>, Complex64)>,
    ) {
        if targets.len() == 1 {
            let (mode, c) = &targets[0];
            let mut w = weight;
            for _ in 0..remaining {
                w *= c;
            }
            let mut monomial = acc.clone();
            if remaining > 0 {
                monomial.push((mode.clone(), remaining));
            }
            out.push((monomial, w));
            return;
        }
        let (mode, c) = &targets[0];
        for k in 0..=remaining {
            // n!/(k!·(rest)!) accumulates as binomial(remaining, k) here.
            let mut w = weight * f64::from(binomial(remaining, k));
            for _ in 0..k {
                w *= c;
            }
            if k > 0 {
                acc.push((mode.clone(), k));
            }
            go(&targets[1..], remaining - k, acc, w, out);
            if k > 0 {
                acc.pop();
            }
        }
    }

    let mut out = Vec::new();
    let mut acc = Vec::new();
    go(targets, n, &mut acc, Complex64::new(1.0, 0.0), &mut out);
    out
}

fn binomial(n: u8, k: u8) -> u32 {
    let mut acc = 1u32;
    for j in 0..u32::from(k) {
        acc = acc * (u32::from(n) - j) / (j + 1);
    }
    acc
}

/// 50/50 beamsplitter from spatial modes (`in_a`, `in_b`) to fresh output
/// labels (`out_a`, `out_b`), acting on both polarizations.
pub fn apply_bs(
    state: &PureState,
    in_a: &str,
    in_b: &str,
    out_a: &str,
    out_b: &str,
) -> Result<PureState, ElementError> {
    if in_a == in_b
        || out_a == out_b
        || in_a == out_a
        || in_a == out_b
        || in_b == out_a
        || in_b == out_b
    {
        return Err(ElementError::DuplicateModes);
    }
    let t = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let r = Complex64::new(0.0, FRAC_1_SQRT_2);
    let mut sub = Substitution::new();
    for pol in [Polarization::H, Polarization::V] {
        sub.insert(
            ModeId::new(in_a, pol),
            vec![(ModeId::new(out_a, pol), t), (ModeId::new(out_b, pol), r)],
        );
        sub.insert(
            ModeId::new(in_b, pol),
            vec![(ModeId::new(out_a, pol), r), (ModeId::new(out_b, pol), t)],
        );
    }
    rewrite(state, &sub)
}

/// Polarizing beamsplitter: H transmits unphased, V reflects with phase i.
pub fn apply_pbs(
    state: &PureState,
    input: &str,
    transmit: &str,
    reflect: &str,
) -> Result<PureState, ElementError> {
    apply_pbs_phased(state, input, transmit, reflect, Complex64::new(0.0, 1.0))
}

/// Polarizing beamsplitter with an explicit reflection phase. Terminal
/// detection probabilities are independent of this phase; the default
/// [`apply_pbs`] uses i and a test compares against the phase-free variant.
pub fn apply_pbs_phased(
    state: &PureState,
    input: &str,
    transmit: &str,
    reflect: &str,
    reflect_phase: Complex64,
) -> Result<PureState, ElementError> {
    if input == transmit || input == reflect || transmit == reflect {
        return Err(ElementError::DuplicateModes);
    }
    let mut sub = Substitution::new();
    sub.insert(
        ModeId::h(input),
        vec![(ModeId::h(transmit), Complex64::new(1.0, 0.0))],
    );
    sub.insert(ModeId::v(input), vec![(ModeId::v(reflect), reflect_phase)]);
    rewrite(state, &sub)
}

/// In-place polarization rotation of one spatial mode by a 2×2 unitary,
/// column convention: a†_p → Σ_q U[q][p]·a†_q.
pub fn apply_rotation(
    state: &PureState,
    spatial: &str,
    u: [[Complex64; 2]; 2],
) -> Result<PureState, ElementError> {
    let dev = unitarity_deviation(&u);
    if dev > 1e-12 {
        return Err(ElementError::NonUnitary(dev));
    }
    let h = ModeId::h(spatial);
    let v = ModeId::v(spatial);
    let mut sub = Substitution::new();
    sub.insert(h.clone(), vec![(h.clone(), u[0][0]), (v.clone(), u[1][0])]);
    sub.insert(v.clone(), vec![(h, u[0][1]), (v, u[1][1])]);
    rewrite(state, &sub)
}

fn unitarity_deviation(u: &[[Complex64; 2]; 2]) -> f64 {
    // max |(U†U − I)_{jk}|
    let mut worst = 0.0f64;
    for j in 0..2 {
        for k in 0..2 {
            let acc: Complex64 = u.iter().map(|row| row[j].conj() * row[k]).sum();
            let expect = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((acc - expect).norm());
        }
    }
    worst
}

/// Apply one element.
pub fn apply_element(state: &PureState, element: &Element) -> Result<PureState, ElementError> {
    match element {
        Element::BeamSplitter {
            in_a,
            in_b,
            out_a,
            out_b,
        } => apply_bs(state, in_a, in_b, out_a, out_b),
        Element::PolarizingBs {
            input,
            transmit,
            reflect,
        } => apply_pbs(state, input, transmit, reflect),
        Element::Rotation { spatial, basis } => apply_rotation(state, spatial, basis.matrix()),
    }
}

/// Apply elements in declaration order, tagging failures with the element
/// index.
pub fn apply_circuit(state: &PureState, elements: &[Element]) -> Result<PureState, ElementError> {
    let mut current = state.clone();
    for (index, element) in elements.iter().enumerate() {
        current = apply_element(&current, element).map_err(|e| ElementError::AtElement {
            index,
            element: element.to_string(),
            source: Box::new(e),
        })?;
    }
    Ok(current)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::fock::mode_set;
    use proptest::prelude::*;

    fn arb_state_4ph() -> impl Strategy<Value = PureState> {
        // Random states over spatials {1,3} with up to 4 photons per term.
        proptest::collection::vec(
            (
                proptest::collection::vec((0usize..2, 0u8..2, 1u8..3), 0..3),
                (-1.0f64..1.0, -1.0f64..1.0),
            ),
            1..5,
        )
        .prop_map(|raw| {
            let spatials = ["1", "3"];
            let terms = raw.into_iter().map(|(occ, (re, im))| {
                let basis = FockBasisVector::from_occupations(occ.into_iter().map(|(s, p, n)| {
                    let pol = if p == 0 {
                        Polarization::H
                    } else {
                        Polarization::V
                    };
                    (ModeId::new(spatials[s], pol), n)
                }));
                (basis, Complex64::new(re, im))
            });
            PureState::from_terms(mode_set(&["1", "3", "1p", "3p"]), terms).unwrap()
        })
    }

    fn arb_unitary() -> impl Strategy<Value = [[Complex64; 2]; 2]> {
        // Gram-Schmidt on two random complex columns.
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4).prop_map(|v| {
            let mut c0 = [
                Complex64::new(v[0].0, v[0].1),
                Complex64::new(v[1].0, v[1].1),
            ];
            let n0 = (c0[0].norm_sqr() + c0[1].norm_sqr()).sqrt();
            if n0 < 1e-3 {
                c0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            } else {
                c0[0] /= n0;
                c0[1] /= n0;
            }
            let mut c1 = [
                Complex64::new(v[2].0, v[2].1),
                Complex64::new(v[3].0, v[3].1),
            ];
            let proj = c0[0].conj() * c1[0] + c0[1].conj() * c1[1];
            c1[0] -= proj * c0[0];
            c1[1] -= proj * c0[1];
            let n1 = (c1[0].norm_sqr() + c1[1].norm_sqr()).sqrt();
            if n1 < 1e-3 {
                c1 = [-c0[1].conj(), c0[0].conj()];
            } else {
                c1[0] /= n1;
                c1[1] /= n1;
            }
            [[c0[0], c1[0]], [c0[1], c1[1]]]
        })
    }

    proptest! {
        #[test]
        fn bs_preserves_norm(s in arb_state_4ph()) {
            let out = apply_bs(&s, "1", "3", "1p", "3p").unwrap();
            prop_assert!((out.norm() - s.norm()).abs() < 1e-12);
        }

        #[test]
        fn bs_preserves_photon_number_per_term(s in arb_state_4ph()) {
            let out = apply_bs(&s, "1", "3", "1p", "3p").unwrap();
            let totals: std::collections::BTreeSet<u32> =
                s.terms().map(|(b, _)| b.total_photons()).collect();
            for (basis, _) in out.terms() {
                prop_assert!(totals.contains(&basis.total_photons()));
                // BS moves photons within the {1,3} → {1p,3p} sector.
                prop_assert_eq!(
                    basis.photons_in_spatial("1") + basis.photons_in_spatial("3"),
                    0
                );
            }
        }

        #[test]
        fn pbs_preserves_per_polarization_totals(s in arb_state_4ph()) {
            // Feed spatial mode 1 into a PBS; H and V photon counts of every
            // originating term must be preserved per output term.
            let widened = PureState::from_terms(
                mode_set(&["1", "3", "1p", "3p", "t", "r"]),
                s.terms().map(|(b, a)| (b.clone(), a)),
            )
            .unwrap();
            let out = apply_pbs(&widened, "1", "t", "r").unwrap();
            let pol_totals = |state: &PureState| -> std::collections::BTreeSet<(u32, u32)> {
                state
                    .terms()
                    .map(|(b, _)| {
                        let mut h = 0;
                        let mut v = 0;
                        for (m, n) in b.iter() {
                            match m.polarization() {
                                Polarization::H => h += u32::from(n),
                                Polarization::V => v += u32::from(n),
                            }
                        }
                        (h, v)
                    })
                    .collect()
            };
            let before = pol_totals(&widened);
            for totals in pol_totals(&out) {
                prop_assert!(before.contains(&totals));
            }
        }

        #[test]
        fn bs_preserves_spatial_pair_totals(s in arb_state_4ph()) {
            let out = apply_bs(&s, "1", "3", "1p", "3p").unwrap();
            let sector_totals: std::collections::BTreeSet<u32> = s
                .terms()
                .map(|(b, _)| b.photons_in_spatial("1") + b.photons_in_spatial("3"))
                .collect();
            for (basis, _) in out.terms() {
                let moved = basis.photons_in_spatial("1p") + basis.photons_in_spatial("3p");
                prop_assert!(sector_totals.contains(&moved));
            }
        }

        #[test]
        fn rotation_preserves_norm(s in arb_state_4ph(), u in arb_unitary()) {
            let out = apply_rotation(&s, "1", u).unwrap();
            prop_assert!((out.norm() - s.norm()).abs() < 1e-12);
        }

        #[test]
        fn singlet_form_survives_any_common_unitary(u in arb_unitary()) {
            let universe = mode_set(&["a", "b"]);
            let hv = FockBasisVector::from_occupations([(ModeId::h("a"), 1), (ModeId::v("b"), 1)]);
            let vh = FockBasisVector::from_occupations([(ModeId::v("a"), 1), (ModeId::h("b"), 1)]);
            let inv = std::f64::consts::FRAC_1_SQRT_2;
            let s = PureState::from_terms(
                universe,
                [
                    (hv, Complex64::new(inv, 0.0)),
                    (vh, Complex64::new(-inv, 0.0)),
                ],
            )
            .unwrap();
            let rotated = apply_rotation(&s, "a", u)
                .and_then(|r| apply_rotation(&r, "b", u))
                .unwrap();
            let overlap = s.inner(&rotated).unwrap();
            prop_assert!((overlap.norm() - 1.0).abs() < 1e-10);
        }
    }
}
