//! Detector clicks, coincidence patterns, conditioning, Bell states and
//! fidelities.
//!
//! Detectors are non-number-resolving: a detector on a spatial mode clicks
//! exactly when at least one photon (of either polarization) occupies that
//! mode. A [`ClickPattern`] names detectors that must click; under
//! [`Semantics::Strict`] every other detector of the heralding bank must stay
//! silent, under [`Semantics::Relaxed`] only the named detectors are
//! constrained. Strict is the physical coincidence-circuit logic and the
//! default; the two agree on ideal inputs and differ only on contaminated
//! ones, which the contamination tests document.
//!
//! Conditioning never constrains the output modes — the heralded pair is
//! certified without being detected. Because the detectors cannot resolve
//! photon number, the heralded state is in general an ensemble: surviving
//! terms are grouped by their exact occupation of the detector modes, and
//! each group, restricted to the remaining modes and normalized, is one
//! member weighted by its probability.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{FockBasisVector, FockError, ModeId, ModeSet, PureState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("theta = {0} is outside [0, pi/2]")]
    ThetaOutOfRange(f64),
    #[error("detector {0} is not part of the heralding bank")]
    UnknownDetector(String),
    #[error("pattern has probability {0:.3e}; nothing to condition on")]
    DegenerateConditioning(f64),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("fidelity target must be unit-norm (got norm {0})")]
    TargetNotNormalized(f64),
}

/// The four Bell families, parameterized by θ ∈ [0, π/2].
///
/// Φ±(θ) = cosθ|HH⟩ ± sinθ|VV⟩ and Ψ±(θ) = cosθ|HV⟩ ± sinθ|VH⟩; θ = π/4
/// gives the maximally entangled member, θ ∈ {0, π/2} product states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    /// Keyword used by the circuit DSL and the CLI.
    pub fn keyword(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi+",
            BellKind::PhiMinus => "phi-",
            BellKind::PsiPlus => "psi+",
            BellKind::PsiMinus => "psi-",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "phi+" => Some(BellKind::PhiPlus),
            "phi-" => Some(BellKind::PhiMinus),
            "psi+" => Some(BellKind::PsiPlus),
            "psi-" => Some(BellKind::PsiMinus),
            _ => None,
        }
    }

    /// The two-photon pair-creation operator of this family on spatial modes
    /// (i, j): a list of (creation modes, coefficient) terms.
    pub(crate) fn pair_operator(
        self,
        theta: f64,
        i: &str,
        j: &str,
    ) -> Vec<(Vec<ModeId>, Complex64)> {
        let c = Complex64::new(theta.cos(), 0.0);
        let s = |sign: f64| Complex64::new(sign * theta.sin(), 0.0);
        match self {
            BellKind::PhiPlus => vec![
                (vec![ModeId::h(i), ModeId::h(j)], c),
                (vec![ModeId::v(i), ModeId::v(j)], s(1.0)),
            ],
            BellKind::PhiMinus => vec![
                (vec![ModeId::h(i), ModeId::h(j)], c),
                (vec![ModeId::v(i), ModeId::v(j)], s(-1.0)),
            ],
            BellKind::PsiPlus => vec![
                (vec![ModeId::h(i), ModeId::v(j)], c),
                (vec![ModeId::v(i), ModeId::h(j)], s(1.0)),
            ],
            BellKind::PsiMinus => vec![
                (vec![ModeId::h(i), ModeId::v(j)], c),
                (vec![ModeId::v(i), ModeId::h(j)], s(-1.0)),
            ],
        }
    }
}

impl std::fmt::Display for BellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.keyword())
    }
}

/// Apply a pair-creation operator (a sum of creation-mode products) once.
pub(crate) fn apply_pair_operator(
    state: &PureState,
    operator: &[(Vec<ModeId>, Complex64)],
) -> Result<PureState, FockError> {
    let mut acc: Option<PureState> = None;
    for (modes, coeff) in operator {
        let mut branch = state.clone();
        for mode in modes {
            branch = branch.apply_creation(mode)?;
        }
        branch = branch.scale(*coeff)?;
        acc = Some(match acc {
            None => branch,
            Some(prev) => prev.add(&branch)?,
        });
    }
    acc.ok_or(FockError::EmptyModeSet)
}

/// Two-photon Bell-family state on spatial modes (i, j) over `modes`.
pub fn bell_state(
    kind: BellKind,
    theta: f64,
    mode_i: &str,
    mode_j: &str,
    modes: ModeSet,
) -> Result<PureState, MeasureError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(MeasureError::ThetaOutOfRange(theta));
    }
    let vacuum = PureState::vacuum(modes)?;
    let op = kind.pair_operator(theta, mode_i, mode_j);
    Ok(apply_pair_operator(&vacuum, &op)?)
}

/// A detector watching one terminal spatial mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detector {
    pub name: String,
    pub spatial: String,
}

/// The declared set of heralding detectors, in declaration order.
pub type HeraldingBank = Vec<Detector>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Semantics {
    /// Named detectors click and every other bank detector is silent.
    Strict,
    /// Only the named detectors are constrained.
    Relaxed,
}

/// A required coincidence: a set of detector names plus click semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickPattern {
    pub detectors: BTreeSet<String>,
    pub semantics: Semantics,
}

impl ClickPattern {
    pub fn strict<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> Self {
        ClickPattern {
            detectors: names.into_iter().map(Into::into).collect(),
            semantics: Semantics::Strict,
        }
    }

    pub fn with_semantics(mut self, semantics: Semantics) -> Self {
        self.semantics = semantics;
        self
    }

    /// Textual form used by the DSL and CLI, e.g. `D1pH&D3pV`.
    pub fn label(&self) -> String {
        self.detectors.iter().cloned().collect::<Vec<_>>().join("&")
    }

    /// Parse the `D1pH&D3pV` textual form.
    pub fn parse(text: &str, semantics: Semantics) -> Self {
        ClickPattern {
            detectors: text
                .split('&')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            semantics,
        }
    }

    fn validate(&self, bank: &HeraldingBank) -> Result<(), MeasureError> {
        for name in &self.detectors {
            if !bank.iter().any(|d| &d.name == name) {
                return Err(MeasureError::UnknownDetector(name.clone()));
            }
        }
        Ok(())
    }

    /// Does a term with the given click set match this pattern?
    fn matches(&self, clicked: &BTreeSet<String>) -> bool {
        match self.semantics {
            Semantics::Strict => clicked == &self.detectors,
            Semantics::Relaxed => self.detectors.is_subset(clicked),
        }
    }
}

fn clicked_detectors(basis: &FockBasisVector, bank: &HeraldingBank) -> BTreeSet<String> {
    bank.iter()
        .filter(|d| basis.photons_in_spatial(&d.spatial) >= 1)
        .map(|d| d.name.clone())
        .collect()
}

fn check_bank_modes(state: &PureState, bank: &HeraldingBank) -> Result<(), MeasureError> {
    for detector in bank {
        let mode = ModeId::h(&detector.spatial);
        if !state.modes().contains(&mode) {
            return Err(MeasureError::Fock(FockError::UnknownMode(mode)));
        }
    }
    Ok(())
}

/// Probability that the detectors fire according to `pattern`.
pub fn pattern_probability(
    state: &PureState,
    pattern: &ClickPattern,
    bank: &HeraldingBank,
) -> Result<f64, MeasureError> {
    check_bank_modes(state, bank)?;
    pattern.validate(bank)?;
    let mut p = 0.0;
    for (basis, amp) in state.terms() {
        if pattern.matches(&clicked_detectors(basis, bank)) {
            p += amp.norm_sqr();
        }
    }
    Ok(p)
}

/// A weighted ensemble of unit-norm pure states on the non-detector modes.
#[derive(Debug, Clone)]
pub struct ConditionalEnsemble {
    members: Vec<(f64, PureState)>,
    total_probability: f64,
    modes: ModeSet,
}

impl ConditionalEnsemble {
    /// (weight, state) pairs; weights sum to [`Self::total_probability`].
    pub fn members(&self) -> &[(f64, PureState)] {
        &self.members
    }

    pub fn total_probability(&self) -> f64 {
        self.total_probability
    }

    /// The surviving (non-detector) mode universe.
    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    /// Build an ensemble from explicit members (weights > 0, unit-norm
    /// states over a shared universe).
    pub fn from_members(members: Vec<(f64, PureState)>) -> Result<Self, MeasureError> {
        let first = members.first().ok_or(MeasureError::EmptyEnsemble)?;
        let modes = first.1.modes().clone();
        let total_probability = members.iter().map(|(w, _)| w).sum();
        Ok(ConditionalEnsemble {
            members,
            total_probability,
            modes,
        })
    }
}

/// Condition `state` on a click pattern: keep consistent terms, group them by
/// exact detector-mode occupation, and normalize each group on the remaining
/// modes.
pub fn condition(
    state: &PureState,
    pattern: &ClickPattern,
    bank: &HeraldingBank,
) -> Result<ConditionalEnsemble, MeasureError> {
    check_bank_modes(state, bank)?;
    pattern.validate(bank)?;

    let detector_spatials: BTreeSet<&str> = bank.iter().map(|d| d.spatial.as_str()).collect();
    let is_detector_mode = |m: &ModeId| detector_spatials.contains(m.spatial());

    let surviving_modes: ModeSet = std::sync::Arc::new(
        state
            .modes()
            .iter()
            .filter(|m| !is_detector_mode(m))
            .cloned()
            .collect(),
    );

    let mut groups: BTreeMap<FockBasisVector, Vec<(FockBasisVector, Complex64)>> = BTreeMap::new();
    for (basis, amp) in state.terms() {
        if !pattern.matches(&clicked_detectors(basis, bank)) {
            continue;
        }
        let detector_part = basis.restrict(|m| is_detector_mode(m));
        let rest = basis.restrict(|m| !is_detector_mode(m));
        groups.entry(detector_part).or_default().push((rest, amp));
    }

    let mut members = Vec::new();
    let mut total_probability = 0.0;
    for (_, terms) in groups {
        let raw = PureState::from_terms(surviving_modes.clone(), terms)?;
        let weight = raw.norm_sqr();
        if weight <= 0.0 {
            continue;
        }
        total_probability += weight;
        members.push((weight, raw.normalize()?));
    }

    if total_probability <= 1e-12 {
        return Err(MeasureError::DegenerateConditioning(total_probability));
    }
    Ok(ConditionalEnsemble {
        members,
        total_probability,
        modes: surviving_modes,
    })
}

/// Ensemble-average overlap with a unit-norm target state:
/// Σᵢ (wᵢ/total)·|⟨target|ψᵢ⟩|².
pub fn fidelity(ensemble: &ConditionalEnsemble, target: &PureState) -> Result<f64, MeasureError> {
    if ensemble.members.is_empty() {
        return Err(MeasureError::EmptyEnsemble);
    }
    let target_norm = target.norm();
    if (target_norm - 1.0).abs() > 1e-9 {
        return Err(MeasureError::TargetNotNormalized(target_norm));
    }
    let mut acc = 0.0;
    for (weight, member) in &ensemble.members {
        let overlap = target.inner(member)?;
        acc += weight / ensemble.total_probability * overlap.norm_sqr();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mode_set, FockBasisVector};
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_plus_at_zero_theta_is_hh() {
        let s = bell_state(BellKind::PhiPlus, 0.0, "1", "2", mode_set(&["1", "2"])).unwrap();
        let hh = FockBasisVector::from_occupations([(ModeId::h("1"), 1), (ModeId::h("2"), 1)]);
        assert_eq!(s.term_count(), 1);
        assert_eq!(s.amplitude(&hh), c(1.0, 0.0));
    }

    #[test]
    fn psi_minus_at_quarter_pi_is_singlet() {
        let s = bell_state(
            BellKind::PsiMinus,
            FRAC_PI_4,
            "1",
            "2",
            mode_set(&["1", "2"]),
        )
        .unwrap();
        let hv = FockBasisVector::from_occupations([(ModeId::h("1"), 1), (ModeId::v("2"), 1)]);
        let vh = FockBasisVector::from_occupations([(ModeId::v("1"), 1), (ModeId::h("2"), 1)]);
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitude(&hv) - c(inv, 0.0)).norm() < 1e-15);
        assert!((s.amplitude(&vh) - c(-inv, 0.0)).norm() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_minus_amplitudes_follow_definition() {
        let s = bell_state(
            BellKind::PhiMinus,
            FRAC_PI_6,
            "1",
            "2",
            mode_set(&["1", "2"]),
        )
        .unwrap();
        let hh = FockBasisVector::from_occupations([(ModeId::h("1"), 1), (ModeId::h("2"), 1)]);
        let vv = FockBasisVector::from_occupations([(ModeId::v("1"), 1), (ModeId::v("2"), 1)]);
        assert!((s.amplitude(&hh).re - 0.8660254).abs() < 1e-7);
        assert!((s.amplitude(&vv).re - (-0.5)).abs() < 1e-12);
    }

    #[test]
    fn singlet_is_orthogonal_to_maximally_entangled_phi_plus() {
        let modes = mode_set(&["1", "2"]);
        let singlet = bell_state(BellKind::PsiMinus, FRAC_PI_4, "1", "2", modes.clone()).unwrap();
        let phi = bell_state(BellKind::PhiPlus, FRAC_PI_4, "1", "2", modes).unwrap();
        assert!(singlet.inner(&phi).unwrap().norm() < 1e-15);
    }

    #[test]
    fn bell_state_rejects_theta_out_of_range() {
        let err = bell_state(BellKind::PhiPlus, 2.0, "1", "2", mode_set(&["1", "2"]));
        assert!(matches!(err, Err(MeasureError::ThetaOutOfRange(_))));
    }

    fn two_detector_setup() -> (ModeSet, HeraldingBank) {
        let modes = mode_set(&["a", "b", "out"]);
        let bank = vec![
            Detector {
                name: "Da".into(),
                spatial: "a".into(),
            },
            Detector {
                name: "Db".into(),
                spatial: "b".into(),
            },
        ];
        (modes, bank)
    }

    #[test]
    fn strict_pattern_requires_other_detectors_silent() {
        let (modes, bank) = two_detector_setup();
        // |1⟩_a|1⟩_b with amplitude 0.6, |1⟩_a alone with 0.8.
        let both = FockBasisVector::from_occupations([(ModeId::h("a"), 1), (ModeId::v("b"), 1)]);
        let only_a = FockBasisVector::from_occupations([(ModeId::h("a"), 1)]);
        let state =
            PureState::from_terms(modes, [(both, c(0.6, 0.0)), (only_a, c(0.8, 0.0))]).unwrap();

        let strict_a = ClickPattern::strict(["Da"]);
        let relaxed_a = ClickPattern::strict(["Da"]).with_semantics(Semantics::Relaxed);
        assert!((pattern_probability(&state, &strict_a, &bank).unwrap() - 0.64).abs() < 1e-12);
        assert!((pattern_probability(&state, &relaxed_a, &bank).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pattern_rejects_detector_outside_bank() {
        let (modes, bank) = two_detector_setup();
        let state = PureState::vacuum(modes).unwrap();
        let pattern = ClickPattern::strict(["Dz"]);
        assert!(matches!(
            pattern_probability(&state, &pattern, &bank),
            Err(MeasureError::UnknownDetector(_))
        ));
    }

    #[test]
    fn conditioning_groups_by_detector_occupation() {
        let (modes, bank) = two_detector_setup();
        // Two click-consistent terms with different photon numbers at the
        // detectors → two ensemble members.
        let one_photon = FockBasisVector::from_occupations([
            (ModeId::h("a"), 1),
            (ModeId::v("b"), 1),
            (ModeId::h("out"), 1),
        ]);
        let two_photons = FockBasisVector::from_occupations([
            (ModeId::h("a"), 2),
            (ModeId::v("b"), 1),
            (ModeId::v("out"), 1),
        ]);
        let state = PureState::from_terms(
            modes,
            [(one_photon, c(0.6, 0.0)), (two_photons, c(0.8, 0.0))],
        )
        .unwrap();
        let pattern = ClickPattern::strict(["Da", "Db"]);
        let ensemble = condition(&state, &pattern, &bank).unwrap();
        assert_eq!(ensemble.members().len(), 2);
        assert!((ensemble.total_probability() - 1.0).abs() < 1e-12);
        let p = pattern_probability(&state, &pattern, &bank).unwrap();
        assert!((ensemble.total_probability() - p).abs() < 1e-15);
        for (_, member) in ensemble.members() {
            assert!((member.norm() - 1.0).abs() < 1e-12);
            // Detector modes are gone from the surviving universe.
            assert!(member.modes().iter().all(|m| m.spatial() == "out"));
        }
    }

    #[test]
    fn conditioning_on_impossible_pattern_is_degenerate() {
        let (modes, bank) = two_detector_setup();
        let state = PureState::vacuum(modes).unwrap();
        let pattern = ClickPattern::strict(["Da", "Db"]);
        assert!(matches!(
            condition(&state, &pattern, &bank),
            Err(MeasureError::DegenerateConditioning(_))
        ));
    }

    fn singlet_on(modes: &ModeSet, a: &str, b: &str) -> PureState {
        let hv = FockBasisVector::from_occupations([(ModeId::h(a), 1), (ModeId::v(b), 1)]);
        let vh = FockBasisVector::from_occupations([(ModeId::v(a), 1), (ModeId::h(b), 1)]);
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        PureState::from_terms(modes.clone(), [(hv, c(inv, 0.0)), (vh, c(-inv, 0.0))]).unwrap()
    }

    #[test]
    fn fidelity_of_pure_singlet_member_is_one() {
        let modes = mode_set(&["x", "y"]);
        let singlet = singlet_on(&modes, "x", "y");
        let ensemble = ConditionalEnsemble::from_members(vec![(1.0, singlet.clone())]).unwrap();
        assert!((fidelity(&ensemble, &singlet).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_against_orthogonal_target_is_zero() {
        let modes = mode_set(&["x", "y"]);
        let singlet = singlet_on(&modes, "x", "y");
        let hv = FockBasisVector::from_occupations([(ModeId::h("x"), 1), (ModeId::v("y"), 1)]);
        let vh = FockBasisVector::from_occupations([(ModeId::v("x"), 1), (ModeId::h("y"), 1)]);
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let triplet = PureState::from_terms(modes, [(hv, c(inv, 0.0)), (vh, c(inv, 0.0))]).unwrap();
        let ensemble = ConditionalEnsemble::from_members(vec![(1.0, triplet)]).unwrap();
        assert!(fidelity(&ensemble, &singlet).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_even_mixture_is_half() {
        let modes = mode_set(&["x", "y"]);
        let singlet = singlet_on(&modes, "x", "y");
        let bunched = FockBasisVector::from_occupations([(ModeId::h("x"), 2)]);
        let other = PureState::from_terms(modes, [(bunched, c(1.0, 0.0))]).unwrap();
        let ensemble =
            ConditionalEnsemble::from_members(vec![(0.5, singlet.clone()), (0.5, other)]).unwrap();
        assert!((fidelity(&ensemble, &singlet).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_requires_unit_norm_target() {
        let modes = mode_set(&["x", "y"]);
        let singlet = singlet_on(&modes, "x", "y");
        let ensemble = ConditionalEnsemble::from_members(vec![(1.0, singlet.clone())]).unwrap();
        let double = singlet.scale(c(2.0, 0.0)).unwrap();
        assert!(matches!(
            fidelity(&ensemble, &double),
            Err(MeasureError::TargetNotNormalized(_))
        ));
    }

    #[test]
    fn click_pattern_textual_form_round_trips() {
        let p = ClickPattern::parse("D1pH&D3pV", Semantics::Strict);
        assert_eq!(p.label(), "D1pH&D3pV");
        assert_eq!(p.detectors.len(), 2);
    }
}
