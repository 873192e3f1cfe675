//! Sparse multimode bosonic Fock states and the creation-operator algebra.
//!
//! A mode is a (spatial label, polarization) pair. A basis vector assigns a
//! photon count to each occupied mode; zero counts are never stored, so every
//! basis vector has exactly one representation. A [`PureState`] is a sparse
//! complex-amplitude map over such basis vectors, tied to a fixed declared
//! mode universe. All operations are value-to-value: states are immutable.
//!
//! Amplitudes smaller in magnitude than [`PRUNE_EPS`] are dropped whenever a
//! state is rebuilt, which keeps the maps free of numeric dust without
//! touching anything the 1e-10 protocol tolerances can see.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// Magnitudes below this are treated as exact zeros when states are rebuilt.
pub const PRUNE_EPS: f64 = 1e-14;

/// Hard cap on the photon count of a single mode. The protocol scenarios
/// never exceed 4; the cap guards against combinatorial blowup from malformed
/// inputs.
pub const MAX_OCCUPATION: u8 = 8;

/// Norms below this cannot be normalized away meaningfully.
pub const NORM_FLOOR: f64 = 1e-12;

/// Errors from Fock-state construction and algebra.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("mode universe is empty")]
    EmptyModeSet,
    #[error("unknown mode {0}")]
    UnknownMode(ModeId),
    #[error("mode universes overlap on {0}")]
    ModeCollision(ModeId),
    #[error("mode universes differ")]
    MismatchedUniverse,
    #[error("cannot normalize state with norm {0:.3e}")]
    DegenerateState(f64),
    #[error("occupation of {mode} exceeds cap of {cap} photons")]
    OccupationCap { mode: ModeId, cap: u8 },
    #[error("non-finite amplitude produced")]
    NonFiniteAmplitude,
}

/// Photon polarization. `H` orders before `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn label(self) -> char {
        match self {
            Polarization::H => 'H',
            Polarization::V => 'V',
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// One photon slot: a spatial mode label plus a polarization.
///
/// The total order is (spatial label lexicographic, `H` before `V`), which
/// fixes serialization order everywhere.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    spatial: Arc<str>,
    pol: Polarization,
}

impl ModeId {
    pub fn new(spatial: &str, pol: Polarization) -> Self {
        ModeId {
            spatial: Arc::from(spatial),
            pol,
        }
    }

    pub fn h(spatial: &str) -> Self {
        ModeId::new(spatial, Polarization::H)
    }

    pub fn v(spatial: &str) -> Self {
        ModeId::new(spatial, Polarization::V)
    }

    pub fn spatial(&self) -> &str {
        &self.spatial
    }

    pub fn polarization(&self) -> Polarization {
        self.pol
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.spatial, self.pol)
    }
}

/// The declared mode universe of a circuit, shared cheaply between states.
pub type ModeSet = Arc<BTreeSet<ModeId>>;

/// Build a universe containing both polarizations of every given spatial label.
pub fn mode_set(spatials: &[&str]) -> ModeSet {
    let mut set = BTreeSet::new();
    for s in spatials {
        set.insert(ModeId::h(s));
        set.insert(ModeId::v(s));
    }
    Arc::new(set)
}

/// Occupation numbers over modes; zero counts are absent by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FockBasisVector {
    occupations: BTreeMap<ModeId, u8>,
}

impl FockBasisVector {
    /// The vacuum configuration.
    pub fn empty() -> Self {
        FockBasisVector::default()
    }

    /// Build from explicit (mode, count) pairs; zero counts are dropped,
    /// repeated modes accumulate.
    pub fn from_occupations<I: IntoIterator<Item = (ModeId, u8)>>(iter: I) -> Self {
        let mut occupations: BTreeMap<ModeId, u8> = BTreeMap::new();
        for (mode, n) in iter {
            if n > 0 {
                *occupations.entry(mode).or_insert(0) += n;
            }
        }
        FockBasisVector { occupations }
    }

    pub fn occupation(&self, mode: &ModeId) -> u8 {
        self.occupations.get(mode).copied().unwrap_or(0)
    }

    pub fn total_photons(&self) -> u32 {
        self.occupations.values().map(|&n| u32::from(n)).sum()
    }

    /// Total photons across both polarizations of one spatial label.
    pub fn photons_in_spatial(&self, spatial: &str) -> u32 {
        self.occupations
            .iter()
            .filter(|(m, _)| m.spatial() == spatial)
            .map(|(_, &n)| u32::from(n))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeId, u8)> {
        self.occupations.iter().map(|(m, &n)| (m, n))
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    /// The part of this configuration whose modes satisfy `keep`.
    pub fn restrict<F: Fn(&ModeId) -> bool>(&self, keep: F) -> Self {
        FockBasisVector {
            occupations: self
                .occupations
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, &n)| (m.clone(), n))
                .collect(),
        }
    }

    /// This configuration with one more photon in `mode`, together with the
    /// ladder factor √(n+1).
    fn raised(&self, mode: &ModeId) -> Result<(Self, f64), FockError> {
        let n = self.occupation(mode);
        if n >= MAX_OCCUPATION {
            return Err(FockError::OccupationCap {
                mode: mode.clone(),
                cap: MAX_OCCUPATION,
            });
        }
        let mut occupations = self.occupations.clone();
        *occupations.entry(mode.clone()).or_insert(0) += 1;
        Ok((FockBasisVector { occupations }, f64::from(n + 1).sqrt()))
    }

    /// Canonical textual form, e.g. `1pH:1,3pV:1`; empty string for vacuum.
    pub fn config_string(&self) -> String {
        let parts: Vec<String> = self
            .occupations
            .iter()
            .map(|(m, n)| format!("{m}:{n}"))
            .collect();
        parts.join(",")
    }
}

impl fmt::Display for FockBasisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.config_string())
    }
}

/// One serialized amplitude record of a state. Fields are declared
/// alphabetically so JSON output is key-sorted.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AmplitudeRecord {
    pub config: String,
    pub im: f64,
    pub re: f64,
}

/// Sparse superposition of Fock basis vectors over a declared mode universe.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    terms: BTreeMap<FockBasisVector, Complex64>,
    modes: ModeSet,
}

impl PureState {
    /// The vacuum: a single empty-occupation term with amplitude 1.
    pub fn vacuum(modes: ModeSet) -> Result<Self, FockError> {
        if modes.is_empty() {
            return Err(FockError::EmptyModeSet);
        }
        let mut terms = BTreeMap::new();
        terms.insert(FockBasisVector::empty(), Complex64::new(1.0, 0.0));
        Ok(PureState { terms, modes })
    }

    /// Build from explicit terms. Duplicate configurations accumulate; tiny
    /// and zero amplitudes are dropped; modes outside the universe are
    /// rejected.
    pub fn from_terms<I>(modes: ModeSet, terms: I) -> Result<Self, FockError>
    where
        I: IntoIterator<Item = (FockBasisVector, Complex64)>,
    {
        if modes.is_empty() {
            return Err(FockError::EmptyModeSet);
        }
        let mut map: BTreeMap<FockBasisVector, Complex64> = BTreeMap::new();
        for (basis, amp) in terms {
            for (mode, _) in basis.iter() {
                if !modes.contains(mode) {
                    return Err(FockError::UnknownMode(mode.clone()));
                }
            }
            *map.entry(basis).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        canonicalize(&mut map, PRUNE_EPS)?;
        Ok(PureState { terms: map, modes })
    }

    pub fn modes(&self) -> &ModeSet {
        &self.modes
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockBasisVector, Complex64)> {
        self.terms.iter().map(|(b, &a)| (b, a))
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn amplitude(&self, basis: &FockBasisVector) -> Complex64 {
        self.terms
            .get(basis)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Apply the creation operator of `mode`: each term |…,n,…⟩ becomes
    /// √(n+1)·|…,n+1,…⟩.
    pub fn apply_creation(&self, mode: &ModeId) -> Result<Self, FockError> {
        if !self.modes.contains(mode) {
            return Err(FockError::UnknownMode(mode.clone()));
        }
        let mut terms = BTreeMap::new();
        for (basis, amp) in &self.terms {
            let (raised, factor) = basis.raised(mode)?;
            *terms.entry(raised).or_insert(Complex64::new(0.0, 0.0)) += amp * factor;
        }
        canonicalize(&mut terms, PRUNE_EPS)?;
        Ok(PureState {
            terms,
            modes: self.modes.clone(),
        })
    }

    /// Tensor product with a state over a disjoint universe.
    pub fn tensor(&self, other: &PureState) -> Result<Self, FockError> {
        if let Some(shared) = self.modes.intersection(&other.modes).next() {
            return Err(FockError::ModeCollision(shared.clone()));
        }
        let modes: ModeSet = Arc::new(self.modes.union(&other.modes).cloned().collect());
        let mut terms = BTreeMap::new();
        for (basis_a, amp_a) in &self.terms {
            for (basis_b, amp_b) in &other.terms {
                let joined = FockBasisVector::from_occupations(
                    basis_a
                        .iter()
                        .chain(basis_b.iter())
                        .map(|(m, n)| (m.clone(), n)),
                );
                *terms.entry(joined).or_insert(Complex64::new(0.0, 0.0)) += amp_a * amp_b;
            }
        }
        canonicalize(&mut terms, PRUNE_EPS)?;
        Ok(PureState { terms, modes })
    }

    /// ⟨self|other⟩ = Σ conj(self[k])·other[k] over the shared universe.
    pub fn inner(&self, other: &PureState) -> Result<Complex64, FockError> {
        if self.modes != other.modes {
            return Err(FockError::MismatchedUniverse);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (basis, amp) in &self.terms {
            if let Some(other_amp) = other.terms.get(basis) {
                acc += amp.conj() * other_amp;
            }
        }
        Ok(acc)
    }

    /// Term-wise sum; universes must match.
    pub fn add(&self, other: &PureState) -> Result<Self, FockError> {
        if self.modes != other.modes {
            return Err(FockError::MismatchedUniverse);
        }
        let mut terms = self.terms.clone();
        for (basis, amp) in &other.terms {
            *terms
                .entry(basis.clone())
                .or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        canonicalize(&mut terms, PRUNE_EPS)?;
        Ok(PureState {
            terms,
            modes: self.modes.clone(),
        })
    }

    pub fn scale(&self, factor: Complex64) -> Result<Self, FockError> {
        let mut terms = self.terms.clone();
        for amp in terms.values_mut() {
            *amp *= factor;
        }
        canonicalize(&mut terms, PRUNE_EPS)?;
        Ok(PureState {
            terms,
            modes: self.modes.clone(),
        })
    }

    /// Rescale to unit norm. Fails on (near-)zero states.
    pub fn normalize(&self) -> Result<Self, FockError> {
        let norm = self.norm();
        if norm <= NORM_FLOOR {
            return Err(FockError::DegenerateState(norm));
        }
        self.scale(Complex64::new(1.0 / norm, 0.0))
    }

    /// Drop every term with |amplitude| < `eps`.
    pub fn prune(&self, eps: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, a)| a.norm() >= eps)
            .map(|(b, a)| (b.clone(), *a))
            .collect();
        PureState {
            terms,
            modes: self.modes.clone(),
        }
    }

    /// Deterministic serialization: records sorted by basis-vector order,
    /// each config listing its modes in ModeId order.
    pub fn amplitude_records(&self) -> Vec<AmplitudeRecord> {
        self.terms
            .iter()
            .map(|(basis, amp)| AmplitudeRecord {
                config: basis.config_string(),
                im: amp.im,
                re: amp.re,
            })
            .collect()
    }
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(b, a)| {
                if b.is_empty() {
                    format!("({:+.6}{:+.6}i)|vac⟩", a.re, a.im)
                } else {
                    format!("({:+.6}{:+.6}i)|{}⟩", a.re, a.im, b)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Drop tiny amplitudes and verify finiteness. Every state constructor and
/// operation funnels through this, which is what maintains the canonical-form
/// invariant.
fn canonicalize(
    terms: &mut BTreeMap<FockBasisVector, Complex64>,
    eps: f64,
) -> Result<(), FockError> {
    for amp in terms.values() {
        if !amp.re.is_finite() || !amp.im.is_finite() {
            return Err(FockError::NonFiniteAmplitude);
        }
    }
    terms.retain(|_, amp| amp.norm() >= eps);
    Ok(())
}

pub(crate) fn sqrt_factorial(n: u8) -> f64 {
    let mut acc = 1.0f64;
    for k in 2..=u32::from(n) {
        acc *= f64::from(k);
    }
    acc.sqrt()
}
