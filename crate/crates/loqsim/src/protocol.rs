//! The end-to-end entanglement-concentration protocol and a general circuit
//! executor.
//!
//! Two sources emit identically prepared non-maximally entangled photon
//! pairs into modes 1-2 and 3-4. Photons 1,3 interfere at one 50/50
//! beamsplitter (outputs 1', 3'), photons 2,4 at another (outputs 2', 4').
//! Polarizing beamsplitters analyze 1' and 3' (optionally after a common
//! basis rotation), and a coincidence between the D1'H/D3'V or D1'V/D3'H
//! detector pairs heralds photons 2', 4' in the singlet Bell state without
//! those photons ever being detected. The success probability is
//! sin²(2θ)/4 for every input family, peaking at 1/4 for maximally
//! entangled inputs.
//!
//! Everything an input file can describe runs through [`execute_ir`]; the
//! named protocol entry points ([`run`], [`sweep`], [`contamination_run`])
//! build the reference circuit programmatically and go through the same
//! path.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::{CircuitIR, Diagnostic, IrDetector, IrElement, Source, SourceKind};
use crate::elements::{apply_circuit, Element, ElementError, RotationBasis};
use crate::fock::{
    mode_set, AmplitudeRecord, FockBasisVector, FockError, ModeId, ModeSet, PureState,
};
use crate::measure::{
    apply_pair_operator, condition, fidelity, pattern_probability, BellKind, ClickPattern,
    Detector, HeraldingBank, MeasureError, Semantics,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("circuit is not runnable: {0:?}")]
    InvalidCircuit(Vec<Diagnostic>),
    #[error("circuit has no output declaration")]
    MissingOutput,
    #[error("invalid branch weights: {0}")]
    InvalidWeights(String),
    #[error("no branch produces any heralding event")]
    NoHeralds,
}

/// Measurement basis of the polarization analysis on modes 1' and 3'.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MeasurementBasis {
    HV,
    DA,
    RL,
}

impl MeasurementBasis {
    pub const ALL: [MeasurementBasis; 3] = [
        MeasurementBasis::HV,
        MeasurementBasis::DA,
        MeasurementBasis::RL,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            MeasurementBasis::HV => "HV",
            MeasurementBasis::DA => "DA",
            MeasurementBasis::RL => "RL",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "HV" => Some(MeasurementBasis::HV),
            "DA" => Some(MeasurementBasis::DA),
            "RL" => Some(MeasurementBasis::RL),
            _ => None,
        }
    }

    fn rotation(self) -> Option<RotationBasis> {
        match self {
            MeasurementBasis::HV => None,
            MeasurementBasis::DA => Some(RotationBasis::DA),
            MeasurementBasis::RL => Some(RotationBasis::RL),
        }
    }
}

/// Full configuration of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProtocolConfig {
    pub input_kind: BellKind,
    pub theta: f64,
    pub measurement_basis: MeasurementBasis,
    pub pattern_semantics: Semantics,
}

impl ProtocolConfig {
    pub fn new(input_kind: BellKind, theta: f64) -> Self {
        ProtocolConfig {
            input_kind,
            theta,
            measurement_basis: MeasurementBasis::HV,
            pattern_semantics: Semantics::Strict,
        }
    }

    pub fn with_basis(mut self, basis: MeasurementBasis) -> Self {
        self.measurement_basis = basis;
        self
    }

    pub fn with_semantics(mut self, semantics: Semantics) -> Self {
        self.pattern_semantics = semantics;
        self
    }
}

/// Outcome of one coincidence alternative.
///
/// Serialized fields are declared alphabetically: report JSON is key-sorted.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PatternOutcome {
    /// Heralded singlet fidelity on the output pair; absent when the pattern
    /// never fires.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    pub pattern: String,
    pub probability: f64,
}

/// Everything a protocol run produces.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProtocolResult {
    /// Serialized post-beamsplitter state (unit norm).
    pub amplitude_table: Vec<AmplitudeRecord>,
    pub config: ProtocolConfig,
    pub patterns: Vec<PatternOutcome>,
    pub success_probability: f64,
    /// Overlap of the post-beamsplitter state with the swapped
    /// singlet⊗singlet component, taken in the H-V frame before any basis
    /// rotation, as (re, im).
    pub swapped_term_amplitude: (f64, f64),
}

impl ProtocolResult {
    /// Probability-weighted heralded fidelity across the coincidence
    /// alternatives; `None` when no pattern ever fires.
    pub fn heralded_fidelity(&self) -> Option<f64> {
        weighted_fidelity(&self.patterns)
    }
}

fn weighted_fidelity(patterns: &[PatternOutcome]) -> Option<f64> {
    let total: f64 = patterns
        .iter()
        .filter(|p| p.fidelity.is_some())
        .map(|p| p.probability)
        .sum();
    if total <= 0.0 {
        return None;
    }
    Some(
        patterns
            .iter()
            .filter_map(|p| p.fidelity.map(|f| p.probability * f))
            .sum::<f64>()
            / total,
    )
}

/// Spatial labels of the reference circuit.
pub mod modes {
    pub const SOURCES: [&str; 4] = ["1", "2", "3", "4"];
    pub const BS_OUTPUTS: [&str; 4] = ["1p", "2p", "3p", "4p"];
    pub const PBS_OUTPUTS: [&str; 4] = ["1pt", "1pr", "3pt", "3pr"];
    pub const OUTPUT_PAIR: (&str, &str) = ("2p", "4p");
}

/// The reference circuit as an IR: two sources of `kind` at `theta`, the two
/// beamsplitters, optional common basis rotation on 1'/3', the two polarizing
/// beamsplitters, four detectors and the two coincidence alternatives.
pub fn reference_ir(kind: SourceKind, theta: f64, basis: MeasurementBasis) -> CircuitIR {
    reference_ir_pair([(kind, theta), (kind, theta)], basis)
}

/// Reference circuit with per-source kinds, for the contamination branches.
pub fn reference_ir_pair(sources: [(SourceKind, f64); 2], basis: MeasurementBasis) -> CircuitIR {
    let mut elements = vec![
        Element::BeamSplitter {
            in_a: "1".into(),
            in_b: "3".into(),
            out_a: "1p".into(),
            out_b: "3p".into(),
        },
        Element::BeamSplitter {
            in_a: "2".into(),
            in_b: "4".into(),
            out_a: "2p".into(),
            out_b: "4p".into(),
        },
    ];
    if let Some(rotation) = basis.rotation() {
        elements.push(Element::Rotation {
            spatial: "1p".into(),
            basis: rotation,
        });
        elements.push(Element::Rotation {
            spatial: "3p".into(),
            basis: rotation,
        });
    }
    elements.push(Element::PolarizingBs {
        input: "1p".into(),
        transmit: "1pt".into(),
        reflect: "1pr".into(),
    });
    elements.push(Element::PolarizingBs {
        input: "3p".into(),
        transmit: "3pt".into(),
        reflect: "3pr".into(),
    });

    let detectors = [
        ("D1pH", "1pt"),
        ("D1pV", "1pr"),
        ("D3pH", "3pt"),
        ("D3pV", "3pr"),
    ];

    let mut line = 0usize;
    let mut next_line = || {
        line += 1;
        line
    };

    CircuitIR {
        sources: vec![
            Source {
                kind: sources[0].0,
                theta: sources[0].1,
                modes: ("1".into(), "2".into()),
                line: next_line(),
            },
            Source {
                kind: sources[1].0,
                theta: sources[1].1,
                modes: ("3".into(), "4".into()),
                line: next_line(),
            },
        ],
        elements: elements
            .into_iter()
            .map(|element| IrElement {
                element,
                line: next_line(),
            })
            .collect(),
        detectors: detectors
            .into_iter()
            .map(|(name, spatial)| IrDetector {
                detector: Detector {
                    name: name.into(),
                    spatial: spatial.into(),
                },
                line: next_line(),
            })
            .collect(),
        coincidence: vec![
            vec!["D1pH".into(), "D3pV".into()],
            vec!["D1pV".into(), "D3pH".into()],
        ],
        coincidence_line: next_line(),
        output: Some(("2p".into(), "4p".into())),
        output_line: next_line(),
    }
}

/// Build the four-photon input state of the reference protocol:
/// bell(kind, θ) on modes 1,2 ⊗ bell(kind, θ) on modes 3,4, over the full
/// reference universe.
pub fn build_input(kind: BellKind, theta: f64) -> Result<PureState, ProtocolError> {
    let ir = reference_ir(SourceKind::Bell(kind), theta, MeasurementBasis::HV);
    let (_, input) = input_from_ir(&ir, None)?;
    Ok(input)
}

/// The declared universe and initial state of an IR's sources.
pub fn input_from_ir(
    ir: &CircuitIR,
    theta_override: Option<f64>,
) -> Result<(ModeSet, PureState), ProtocolError> {
    let spatials = ir.spatials();
    let refs: Vec<&str> = spatials.iter().map(String::as_str).collect();
    let universe = mode_set(&refs);
    let mut state = PureState::vacuum(universe.clone())?;
    let mut needs_normalization = false;

    for source in &ir.sources {
        let theta = theta_override.unwrap_or(source.theta);
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(MeasureError::ThetaOutOfRange(theta).into());
        }
        let (i, j) = (&source.modes.0, &source.modes.1);
        match source.kind {
            SourceKind::Vacuum => {}
            SourceKind::Bell(kind) => {
                let op = kind.pair_operator(theta, i, j);
                state = apply_pair_operator(&state, &op)?;
            }
            SourceKind::DoublePair(kind) => {
                let op = kind.pair_operator(theta, i, j);
                state = apply_pair_operator(&state, &op)?;
                state = apply_pair_operator(&state, &op)?;
                needs_normalization = true;
            }
        }
    }
    if needs_normalization {
        state = state.normalize()?;
    }
    Ok((universe, state))
}

/// Result of executing an arbitrary validated circuit.
#[derive(Debug, Clone)]
pub struct CircuitRun {
    pub universe: ModeSet,
    pub input: PureState,
    pub final_state: PureState,
    pub bank: HeraldingBank,
    pub patterns: Vec<PatternOutcome>,
    pub success_probability: f64,
    pub output_pair: (String, String),
}

impl CircuitRun {
    pub fn heralded_fidelity(&self) -> Option<f64> {
        weighted_fidelity(&self.patterns)
    }
}

/// The singlet (|H⟩_a|V⟩_b − |V⟩_a|H⟩_b)/√2 over an arbitrary universe
/// containing spatial modes `a` and `b`.
pub fn singlet_state(universe: ModeSet, a: &str, b: &str) -> Result<PureState, ProtocolError> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let hv = FockBasisVector::from_occupations([(ModeId::h(a), 1), (ModeId::v(b), 1)]);
    let vh = FockBasisVector::from_occupations([(ModeId::v(a), 1), (ModeId::h(b), 1)]);
    Ok(PureState::from_terms(
        universe,
        [
            (hv, Complex64::new(inv, 0.0)),
            (vh, Complex64::new(-inv, 0.0)),
        ],
    )?)
}

/// Execute a validated circuit: build the source state, apply the elements,
/// evaluate every coincidence alternative, and compute heralded singlet
/// fidelities on the declared output pair.
pub fn execute_ir(
    ir: &CircuitIR,
    semantics: Semantics,
    theta_override: Option<f64>,
) -> Result<CircuitRun, ProtocolError> {
    let output_pair = ir.output.clone().ok_or(ProtocolError::MissingOutput)?;
    let (universe, input) = input_from_ir(ir, theta_override)?;
    let final_state = apply_circuit(&input, &ir.element_list())?;
    let bank = ir.bank();

    let mut patterns = Vec::new();
    let mut success = 0.0;
    for alternative in &ir.coincidence {
        let pattern = ClickPattern::strict(alternative.iter().cloned()).with_semantics(semantics);
        let probability = pattern_probability(&final_state, &pattern, &bank)?;
        success += probability;
        let fid = if probability > 1e-12 {
            let ensemble = condition(&final_state, &pattern, &bank)?;
            let target = singlet_state(ensemble.modes().clone(), &output_pair.0, &output_pair.1)?;
            Some(fidelity(&ensemble, &target)?)
        } else {
            None
        };
        patterns.push(PatternOutcome {
            pattern: pattern.label(),
            probability,
            fidelity: fid,
        });
    }

    Ok(CircuitRun {
        universe,
        input,
        final_state,
        bank,
        patterns,
        success_probability: success,
        output_pair,
    })
}

/// Overlap of the post-beamsplitter state with |Ψ⁻⟩_{1'3'} ⊗ |Ψ⁻⟩_{2'4'},
/// in the H-V frame. Its magnitude is sin(2θ)/2 for every input family; the
/// sign relative to the bunched reference terms distinguishes the families.
pub fn swapped_amplitude(kind: BellKind, theta: f64) -> Result<Complex64, ProtocolError> {
    let ir = reference_ir(SourceKind::Bell(kind), theta, MeasurementBasis::HV);
    let (universe, input) = input_from_ir(&ir, None)?;
    let post_bs = apply_circuit(&input, &ir.element_list()[..2])?;
    let swap_target = singlet_pair_target(universe)?;
    Ok(swap_target.inner(&post_bs)?)
}

fn singlet_pair_target(universe: ModeSet) -> Result<PureState, ProtocolError> {
    let s13 = singlet_state(universe.clone(), "1p", "3p")?;
    let mut terms = Vec::new();
    let s24 = [
        (ModeId::h("2p"), ModeId::v("4p"), 1.0),
        (ModeId::v("2p"), ModeId::h("4p"), -1.0),
    ];
    for (b13, a13) in s13.terms() {
        for (m2, m4, sign) in &s24 {
            let mut occ: Vec<(ModeId, u8)> = b13.iter().map(|(m, n)| (m.clone(), n)).collect();
            occ.push((m2.clone(), 1));
            occ.push((m4.clone(), 1));
            terms.push((
                FockBasisVector::from_occupations(occ),
                a13 * std::f64::consts::FRAC_1_SQRT_2 * sign,
            ));
        }
    }
    Ok(PureState::from_terms(universe, terms)?)
}

/// Run the reference protocol for one configuration.
pub fn run(config: &ProtocolConfig) -> Result<ProtocolResult, ProtocolError> {
    let ir = reference_ir(
        SourceKind::Bell(config.input_kind),
        config.theta,
        config.measurement_basis,
    );
    let circuit_run = execute_ir(&ir, config.pattern_semantics, None)?;

    // Post-beamsplitter snapshot in the H-V frame: the two BS are always the
    // first two elements of the reference circuit.
    let post_bs = apply_circuit(&circuit_run.input, &ir.element_list()[..2])?;
    let swap = singlet_pair_target(circuit_run.universe.clone())?.inner(&post_bs)?;

    Ok(ProtocolResult {
        config: *config,
        patterns: circuit_run.patterns,
        success_probability: circuit_run.success_probability,
        swapped_term_amplitude: (swap.re, swap.im),
        amplitude_table: post_bs.amplitude_records(),
    })
}

/// Run the protocol over a θ grid; points evaluate in parallel, results come
/// back in input order.
pub fn sweep(
    kind: BellKind,
    thetas: &[f64],
    basis: MeasurementBasis,
) -> Result<Vec<ProtocolResult>, ProtocolError> {
    thetas
        .par_iter()
        .map(|&theta| run(&ProtocolConfig::new(kind, theta).with_basis(basis)))
        .collect()
}

/// Normalized state of one source emitting two pairs into the same mode
/// pair: (cosθ a†_iH a†_jH + sinθ a†_iV a†_jV)² |0⟩, normalized. Contains
/// the |2_H,2_H⟩, |1_H1_V,1_H1_V⟩ and |2_V,2_V⟩ configurations.
pub fn build_double_pair(theta: f64, i: &str, j: &str) -> Result<PureState, ProtocolError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(MeasureError::ThetaOutOfRange(theta).into());
    }
    let universe = mode_set(&[i, j]);
    let vacuum = PureState::vacuum(universe)?;
    let op = BellKind::PhiPlus.pair_operator(theta, i, j);
    let once = apply_pair_operator(&vacuum, &op)?;
    let twice = apply_pair_operator(&once, &op)?;
    Ok(twice.normalize()?)
}

/// Source statistics for the contamination study: branch weights for the
/// nominal emission and for a double-pair emission from either source.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ContaminationScenario {
    pub theta: f64,
    pub w_nominal: f64,
    pub w_double_a: f64,
    pub w_double_b: f64,
}

impl ContaminationScenario {
    /// Weights must be non-negative and sum to 1 within 1e-9; they are
    /// renormalized to an exact sum.
    pub fn new(
        theta: f64,
        w_nominal: f64,
        w_double_a: f64,
        w_double_b: f64,
    ) -> Result<Self, ProtocolError> {
        let weights = [w_nominal, w_double_a, w_double_b];
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(ProtocolError::InvalidWeights(format!(
                "weights must be non-negative, got {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ProtocolError::InvalidWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(ContaminationScenario {
            theta,
            w_nominal: w_nominal / sum,
            w_double_a: w_double_a / sum,
            w_double_b: w_double_b / sum,
        })
    }
}

/// Per-branch outcome of a contamination run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BranchOutcome {
    pub branch: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heralded_fidelity: Option<f64>,
    pub patterns: Vec<PatternOutcome>,
    pub success_probability: f64,
    pub weight: f64,
}

/// Mixed-source contamination study result.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ContaminationReport {
    pub branches: Vec<BranchOutcome>,
    /// Σ w·p·F / Σ w·p over the branches.
    pub mixed_heralded_fidelity: f64,
    /// Σ w·p: the heralding rate of the mixture.
    pub mixed_success_probability: f64,
    pub scenario: ContaminationScenario,
}

/// Run the nominal and double-pair branches and mix their heralded
/// fidelities by branch weight and heralding probability.
pub fn contamination_run(
    scenario: &ContaminationScenario,
) -> Result<ContaminationReport, ProtocolError> {
    let theta = scenario.theta;
    let nominal = SourceKind::Bell(BellKind::PhiPlus);
    let double = SourceKind::DoublePair(BellKind::PhiPlus);
    let branch_specs = [
        ("nominal", scenario.w_nominal, [nominal, nominal]),
        (
            "double_a",
            scenario.w_double_a,
            [double, SourceKind::Vacuum],
        ),
        (
            "double_b",
            scenario.w_double_b,
            [SourceKind::Vacuum, double],
        ),
    ];

    let mut branches = Vec::new();
    let mut weighted_prob = 0.0;
    let mut weighted_fid = 0.0;
    for (name, weight, kinds) in branch_specs {
        let ir = reference_ir_pair([(kinds[0], theta), (kinds[1], theta)], MeasurementBasis::HV);
        let run = execute_ir(&ir, Semantics::Strict, None)?;
        let heralded = run.heralded_fidelity();
        if let Some(f) = heralded {
            weighted_prob += weight * run.success_probability;
            weighted_fid += weight * run.success_probability * f;
        }
        branches.push(BranchOutcome {
            branch: name.to_string(),
            weight,
            patterns: run.patterns,
            success_probability: run.success_probability,
            heralded_fidelity: heralded,
        });
    }

    if weighted_prob <= 1e-15 {
        return Err(ProtocolError::NoHeralds);
    }
    Ok(ContaminationReport {
        scenario: *scenario,
        branches,
        mixed_heralded_fidelity: weighted_fid / weighted_prob,
        mixed_success_probability: weighted_prob,
    })
}
