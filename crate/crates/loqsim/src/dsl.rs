//! The `.loc` circuit description language: parsing, validation and
//! pretty-printing.
//!
//! The grammar is line-oriented; `#` starts a comment, keywords are
//! case-sensitive, and tokens are whitespace-separated except that `&` and
//! `|` delimit themselves (so `D1pH&D3pV` and `D1pH & D3pV` read the same).
//! Angles are radians given as decimal literals.
//!
//! ```text
//! source      := "source" KIND "theta=" FLOAT "modes" ID ID
//! KIND        := "phi+" | "phi-" | "psi+" | "psi-"
//!              | "double:" KIND | "vacuum"
//! bs          := "bs" ID ID "->" ID ID
//! pbs         := "pbs" ID "->" ID ID          (transmit, reflect)
//! rot         := "rot" ID "basis" ("DA"|"RL")
//! detector    := "detector" NAME "on" ID
//! coincidence := "coincidence" NAME ("&" NAME)* ("|" NAME ("&" NAME)*)*
//! output      := "output" ID ID
//! ```
//!
//! [`parse`] reports syntax and intra-line problems, [`validate`] the
//! cross-line invariants (production order, terminal detectors, …); both
//! attach source locations and stable error codes, and [`load`] chains them.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::elements::{Element, RotationBasis};
use crate::measure::{BellKind, Detector};

/// Stable diagnostic codes; the negative test corpus pins one per file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DiagnosticCode {
    /// E001: no `output` declaration in the file.
    NoOutput,
    /// E002: malformed token, e.g. an unreadable `theta=` literal.
    Lexical,
    /// E003: unknown keyword at start of a line.
    UnknownKeyword,
    /// E004: wrong number or shape of tokens for the keyword.
    Arity,
    /// E005: a mode produced more than once.
    DuplicateProduction,
    /// E006: an element consumes a mode that is not produced before it.
    UseBeforeProduction,
    /// E007: a detector attached to a mode that is never produced.
    DanglingDetector,
    /// E008: a detector attached to a mode that is later consumed.
    NonTerminalDetector,
    /// E009: a coincidence pattern names an undeclared detector.
    UnknownDetector,
    /// E010: more than one `output` declaration.
    MultipleOutput,
    /// E011: repeated mode label within a single element.
    DuplicateMode,
    /// E012: theta outside [0, pi/2].
    ThetaOutOfRange,
    /// E013: detector name declared twice.
    DuplicateDetector,
    /// E014: an output mode that is missing, unproduced, consumed later, or
    /// carrying a detector.
    BadOutput,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::NoOutput => "E001",
            DiagnosticCode::Lexical => "E002",
            DiagnosticCode::UnknownKeyword => "E003",
            DiagnosticCode::Arity => "E004",
            DiagnosticCode::DuplicateProduction => "E005",
            DiagnosticCode::UseBeforeProduction => "E006",
            DiagnosticCode::DanglingDetector => "E007",
            DiagnosticCode::NonTerminalDetector => "E008",
            DiagnosticCode::UnknownDetector => "E009",
            DiagnosticCode::MultipleOutput => "E010",
            DiagnosticCode::DuplicateMode => "E011",
            DiagnosticCode::ThetaOutOfRange => "E012",
            DiagnosticCode::DuplicateDetector => "E013",
            DiagnosticCode::BadOutput => "E014",
        }
    }
}

/// One located problem in a circuit file.
#[derive(Debug, Clone, PartialEq, Eq, Error, serde::Serialize)]
#[error("{line}:{col}: {} {message}", code.as_str())]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    /// 1-based line.
    pub line: usize,
    /// 1-based column.
    pub col: usize,
}

impl Diagnostic {
    fn new(code: DiagnosticCode, line: usize, col: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            message: message.into(),
            line,
            col,
        }
    }
}

/// What a `source` line emits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    Bell(BellKind),
    /// Two pair emissions from one source: the contamination branch.
    DoublePair(BellKind),
    Vacuum,
}

impl SourceKind {
    pub fn keyword(self) -> String {
        match self {
            SourceKind::Bell(k) => k.keyword().to_string(),
            SourceKind::DoublePair(k) => format!("double:{}", k.keyword()),
            SourceKind::Vacuum => "vacuum".to_string(),
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        if s == "vacuum" {
            return Some(SourceKind::Vacuum);
        }
        if let Some(rest) = s.strip_prefix("double:") {
            return BellKind::from_keyword(rest).map(SourceKind::DoublePair);
        }
        BellKind::from_keyword(s).map(SourceKind::Bell)
    }
}

/// A photon-pair source declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub kind: SourceKind,
    pub theta: f64,
    pub modes: (String, String),
    pub line: usize,
}

/// An element together with its source line.
#[derive(Debug, Clone, PartialEq)]
pub struct IrElement {
    pub element: Element,
    pub line: usize,
}

/// A detector declaration with its source line.
#[derive(Debug, Clone, PartialEq)]
pub struct IrDetector {
    pub detector: Detector,
    pub line: usize,
}

/// Parsed circuit: sources, ordered elements, heralding bank, coincidence
/// alternatives and the declared output pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitIR {
    pub sources: Vec<Source>,
    pub elements: Vec<IrElement>,
    pub detectors: Vec<IrDetector>,
    /// Coincidence alternatives, each a list of detector names as written.
    pub coincidence: Vec<Vec<String>>,
    pub coincidence_line: usize,
    pub output: Option<(String, String)>,
    pub output_line: usize,
}

impl CircuitIR {
    /// Heralding bank in declaration order.
    pub fn bank(&self) -> Vec<Detector> {
        self.detectors.iter().map(|d| d.detector.clone()).collect()
    }

    /// Plain element list, in application order.
    pub fn element_list(&self) -> Vec<Element> {
        self.elements.iter().map(|e| e.element.clone()).collect()
    }

    /// All spatial labels, in first-appearance order.
    pub fn spatials(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        {
            let mut push = |label: &str| {
                if !seen.iter().any(|s| s == label) {
                    seen.push(label.to_string());
                }
            };
            for s in &self.sources {
                push(&s.modes.0);
                push(&s.modes.1);
            }
            for e in &self.elements {
                match &e.element {
                    Element::BeamSplitter {
                        in_a,
                        in_b,
                        out_a,
                        out_b,
                    } => {
                        push(in_a);
                        push(in_b);
                        push(out_a);
                        push(out_b);
                    }
                    Element::PolarizingBs {
                        input,
                        transmit,
                        reflect,
                    } => {
                        push(input);
                        push(transmit);
                        push(reflect);
                    }
                    Element::Rotation { spatial, .. } => push(spatial),
                }
            }
            for d in &self.detectors {
                push(&d.detector.spatial);
            }
            if let Some((a, b)) = &self.output {
                push(a);
                push(b);
            }
        }
        seen
    }

    /// Canonical textual form; reparses to a structurally identical IR.
    pub fn pretty_print(&self) -> String {
        let mut out = String::new();
        for s in &self.sources {
            out.push_str(&format!(
                "source {} theta={} modes {} {}\n",
                s.kind.keyword(),
                s.theta,
                s.modes.0,
                s.modes.1
            ));
        }
        for e in &self.elements {
            out.push_str(&format!("{}\n", e.element));
        }
        for d in &self.detectors {
            out.push_str(&format!(
                "detector {} on {}\n",
                d.detector.name, d.detector.spatial
            ));
        }
        if !self.coincidence.is_empty() {
            let alts: Vec<String> = self.coincidence.iter().map(|alt| alt.join(" & ")).collect();
            out.push_str(&format!("coincidence {}\n", alts.join(" | ")));
        }
        if let Some((a, b)) = &self.output {
            out.push_str(&format!("output {a} {b}\n"));
        }
        out
    }
}

impl fmt::Display for CircuitIR {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pretty_print())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    text: String,
    col: usize,
}

/// Split a line into tokens; `&` and `|` delimit themselves even when glued
/// to their neighbours, `#` starts a comment.
fn tokenize(line: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (i, ch) in line.char_indices() {
        if ch == '#' {
            break;
        }
        if ch.is_whitespace() || ch == '&' || ch == '|' {
            if !current.is_empty() {
                tokens.push(Token {
                    text: std::mem::take(&mut current),
                    col: start + 1,
                });
            }
            if ch == '&' || ch == '|' {
                tokens.push(Token {
                    text: ch.to_string(),
                    col: i + 1,
                });
            }
        } else {
            if current.is_empty() {
                start = i;
            }
            current.push(ch);
        }
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            col: start + 1,
        });
    }
    tokens
}

/// Parse circuit text into an IR, reporting syntax and intra-line problems
/// sorted by source location.
pub fn parse(text: &str) -> Result<CircuitIR, Vec<Diagnostic>> {
    let mut ir = CircuitIR::default();
    let mut diagnostics = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = tokenize(raw_line);
        let Some(head) = tokens.first() else {
            continue;
        };
        let args = &tokens[1..];
        let arity = |expected: &str| {
            Diagnostic::new(
                DiagnosticCode::Arity,
                line_no,
                head.col,
                format!("'{}' expects {expected}", head.text),
            )
        };

        match head.text.as_str() {
            "source" => {
                if args.len() != 5 || args[2].text != "modes" {
                    diagnostics.push(arity("KIND theta=FLOAT modes ID ID"));
                    continue;
                }
                let Some(kind) = SourceKind::from_keyword(&args[0].text) else {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::Lexical,
                        line_no,
                        args[0].col,
                        format!("unknown source kind '{}'", args[0].text),
                    ));
                    continue;
                };
                let Some(theta_text) = args[1].text.strip_prefix("theta=") else {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::Lexical,
                        line_no,
                        args[1].col,
                        format!("expected theta=FLOAT, found '{}'", args[1].text),
                    ));
                    continue;
                };
                let Ok(theta) = theta_text.parse::<f64>() else {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::Lexical,
                        line_no,
                        args[1].col,
                        format!("'{theta_text}' is not a decimal literal"),
                    ));
                    continue;
                };
                if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::ThetaOutOfRange,
                        line_no,
                        args[1].col,
                        format!("theta={theta} is outside [0, pi/2]"),
                    ));
                    continue;
                }
                if args[3].text == args[4].text {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::DuplicateMode,
                        line_no,
                        args[4].col,
                        format!("source modes must differ, got '{}' twice", args[3].text),
                    ));
                    continue;
                }
                ir.sources.push(Source {
                    kind,
                    theta,
                    modes: (args[3].text.clone(), args[4].text.clone()),
                    line: line_no,
                });
            }
            "bs" => {
                if args.len() != 5 || args[2].text != "->" {
                    diagnostics.push(arity("ID ID -> ID ID"));
                    continue;
                }
                let labels = [&args[0], &args[1], &args[3], &args[4]];
                if let Some(dup) = first_duplicate(&labels) {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::DuplicateMode,
                        line_no,
                        dup.col,
                        format!("mode '{}' repeated within element", dup.text),
                    ));
                    continue;
                }
                ir.elements.push(IrElement {
                    element: Element::BeamSplitter {
                        in_a: args[0].text.clone(),
                        in_b: args[1].text.clone(),
                        out_a: args[3].text.clone(),
                        out_b: args[4].text.clone(),
                    },
                    line: line_no,
                });
            }
            "pbs" => {
                if args.len() != 4 || args[1].text != "->" {
                    diagnostics.push(arity("ID -> ID ID"));
                    continue;
                }
                let labels = [&args[0], &args[2], &args[3]];
                if let Some(dup) = first_duplicate(&labels) {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::DuplicateMode,
                        line_no,
                        dup.col,
                        format!("mode '{}' repeated within element", dup.text),
                    ));
                    continue;
                }
                ir.elements.push(IrElement {
                    element: Element::PolarizingBs {
                        input: args[0].text.clone(),
                        transmit: args[2].text.clone(),
                        reflect: args[3].text.clone(),
                    },
                    line: line_no,
                });
            }
            "rot" => {
                if args.len() != 3 || args[1].text != "basis" {
                    diagnostics.push(arity("ID basis (DA|RL)"));
                    continue;
                }
                let basis = match args[2].text.as_str() {
                    "DA" => RotationBasis::DA,
                    "RL" => RotationBasis::RL,
                    other => {
                        diagnostics.push(Diagnostic::new(
                            DiagnosticCode::Lexical,
                            line_no,
                            args[2].col,
                            format!("unknown basis '{other}' (expected DA or RL)"),
                        ));
                        continue;
                    }
                };
                ir.elements.push(IrElement {
                    element: Element::Rotation {
                        spatial: args[0].text.clone(),
                        basis,
                    },
                    line: line_no,
                });
            }
            "detector" => {
                if args.len() != 3 || args[1].text != "on" {
                    diagnostics.push(arity("NAME on ID"));
                    continue;
                }
                ir.detectors.push(IrDetector {
                    detector: Detector {
                        name: args[0].text.clone(),
                        spatial: args[2].text.clone(),
                    },
                    line: line_no,
                });
            }
            "coincidence" => {
                if args.is_empty() {
                    diagnostics.push(arity("NAME (& NAME)* (| NAME (& NAME)*)*"));
                    continue;
                }
                let mut alternatives: Vec<Vec<String>> = vec![Vec::new()];
                let mut expect_name = true;
                let mut ok = true;
                for tok in args {
                    match tok.text.as_str() {
                        "|" if !expect_name => {
                            alternatives.push(Vec::new());
                            expect_name = true;
                        }
                        "&" if !expect_name => expect_name = true,
                        name if expect_name && name != "&" && name != "|" => {
                            alternatives.last_mut().unwrap().push(name.to_string());
                            expect_name = false;
                        }
                        _ => {
                            diagnostics.push(Diagnostic::new(
                                DiagnosticCode::Arity,
                                line_no,
                                tok.col,
                                format!("unexpected '{}' in coincidence list", tok.text),
                            ));
                            ok = false;
                            break;
                        }
                    }
                }
                if ok && expect_name {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::Arity,
                        line_no,
                        args.last().unwrap().col,
                        "coincidence list ends with a separator",
                    ));
                    ok = false;
                }
                if ok {
                    ir.coincidence = alternatives;
                    ir.coincidence_line = line_no;
                }
            }
            "output" => {
                if args.len() != 2 {
                    diagnostics.push(arity("ID ID"));
                    continue;
                }
                if ir.output.is_some() {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::MultipleOutput,
                        line_no,
                        head.col,
                        "more than one output declaration",
                    ));
                    continue;
                }
                ir.output = Some((args[0].text.clone(), args[1].text.clone()));
                ir.output_line = line_no;
            }
            other => {
                diagnostics.push(Diagnostic::new(
                    DiagnosticCode::UnknownKeyword,
                    line_no,
                    head.col,
                    format!("unknown keyword '{other}'"),
                ));
            }
        }
    }

    if diagnostics.is_empty() {
        Ok(ir)
    } else {
        diagnostics.sort_by_key(|d| (d.line, d.col));
        Err(diagnostics)
    }
}

fn first_duplicate<'a>(tokens: &'a [&'a Token]) -> Option<&'a Token> {
    for (i, t) in tokens.iter().enumerate() {
        if tokens[..i].iter().any(|p| p.text == t.text) {
            return Some(*t);
        }
    }
    None
}

/// Check the cross-line invariants of a parsed IR. An empty list means the
/// circuit is runnable; otherwise the diagnostics come back ordered by
/// source location.
pub fn validate(ir: &CircuitIR) -> Vec<Diagnostic> {
    let mut diagnostics = Vec::new();
    // spatial -> line where the mode comes into existence
    let mut produced: BTreeMap<&str, usize> = BTreeMap::new();
    // spatial -> line where an element consumes it
    let mut consumed: BTreeMap<&str, usize> = BTreeMap::new();

    for source in &ir.sources {
        for label in [source.modes.0.as_str(), source.modes.1.as_str()] {
            if produced.contains_key(label) {
                diagnostics.push(Diagnostic::new(
                    DiagnosticCode::DuplicateProduction,
                    source.line,
                    1,
                    format!("mode '{label}' is already produced"),
                ));
            } else {
                produced.insert(label, source.line);
            }
        }
    }

    for e in &ir.elements {
        let (inputs, outputs): (Vec<&str>, Vec<&str>) = match &e.element {
            Element::BeamSplitter {
                in_a,
                in_b,
                out_a,
                out_b,
            } => (vec![in_a, in_b], vec![out_a, out_b]),
            Element::PolarizingBs {
                input,
                transmit,
                reflect,
            } => (vec![input], vec![transmit, reflect]),
            // Rotations read and rewrite a mode in place.
            Element::Rotation { spatial, .. } => (vec![spatial], vec![]),
        };
        let consumes = !matches!(e.element, Element::Rotation { .. });

        for label in inputs {
            match produced.get(label) {
                Some(&line) if line < e.line => {}
                Some(_) | None => {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::UseBeforeProduction,
                        e.line,
                        1,
                        format!("mode '{label}' is used before it is produced"),
                    ));
                    continue;
                }
            }
            if let Some(&line) = consumed.get(label) {
                diagnostics.push(Diagnostic::new(
                    DiagnosticCode::UseBeforeProduction,
                    e.line,
                    1,
                    format!("mode '{label}' was already consumed at line {line}"),
                ));
            } else if consumes {
                consumed.insert(label, e.line);
            }
        }
        for label in outputs {
            if produced.contains_key(label) {
                diagnostics.push(Diagnostic::new(
                    DiagnosticCode::DuplicateProduction,
                    e.line,
                    1,
                    format!("mode '{label}' is already produced"),
                ));
            } else {
                produced.insert(label, e.line);
            }
        }
    }

    let mut seen_names: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &ir.detectors {
        let name = d.detector.name.as_str();
        if seen_names.contains_key(name) {
            diagnostics.push(Diagnostic::new(
                DiagnosticCode::DuplicateDetector,
                d.line,
                1,
                format!("detector '{name}' is already declared"),
            ));
        } else {
            seen_names.insert(name, d.line);
        }
        let spatial = d.detector.spatial.as_str();
        if !produced.contains_key(spatial) {
            diagnostics.push(Diagnostic::new(
                DiagnosticCode::DanglingDetector,
                d.line,
                1,
                format!("detector '{name}' sits on mode '{spatial}', which is never produced"),
            ));
        } else if let Some(&line) = consumed.get(spatial) {
            diagnostics.push(Diagnostic::new(
                DiagnosticCode::NonTerminalDetector,
                d.line,
                1,
                format!(
                    "detector '{name}' sits on mode '{spatial}', which is consumed at line {line}"
                ),
            ));
        }
    }

    for alternative in &ir.coincidence {
        for name in alternative {
            if !seen_names.contains_key(name.as_str()) {
                diagnostics.push(Diagnostic::new(
                    DiagnosticCode::UnknownDetector,
                    ir.coincidence_line,
                    1,
                    format!("coincidence names unknown detector '{name}'"),
                ));
            }
        }
    }

    match &ir.output {
        None => diagnostics.push(Diagnostic::new(
            DiagnosticCode::NoOutput,
            ir.sources.last().map_or(1, |s| s.line),
            1,
            "no output declaration",
        )),
        Some((a, b)) => {
            for label in [a.as_str(), b.as_str()] {
                if !produced.contains_key(label) {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::BadOutput,
                        ir.output_line,
                        1,
                        format!("output mode '{label}' is never produced"),
                    ));
                } else if consumed.contains_key(label) {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::BadOutput,
                        ir.output_line,
                        1,
                        format!("output mode '{label}' is consumed by an element"),
                    ));
                } else if ir.detectors.iter().any(|d| d.detector.spatial == *label) {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticCode::BadOutput,
                        ir.output_line,
                        1,
                        format!("output mode '{label}' carries a detector"),
                    ));
                }
            }
        }
    }

    diagnostics.sort_by_key(|d| (d.line, d.col));
    diagnostics
}

/// Parse then validate; any diagnostic is fatal.
pub fn load(text: &str) -> Result<CircuitIR, Vec<Diagnostic>> {
    let ir = parse(text)?;
    let diagnostics = validate(&ir);
    if diagnostics.is_empty() {
        Ok(ir)
    } else {
        Err(diagnostics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = "\
# two identical sources, two beamsplitters, polarizing analysis
source phi+ theta=0.785398163 modes 1 2
source phi+ theta=0.785398163 modes 3 4
bs 1 3 -> 1p 3p
bs 2 4 -> 2p 4p
pbs 1p -> 1pt 1pr
pbs 3p -> 3pt 3pr
detector D1pH on 1pt
detector D1pV on 1pr
detector D3pH on 3pt
detector D3pV on 3pr
coincidence D1pH & D3pV | D1pV & D3pH
output 2p 4p
";

    #[test]
    fn reference_circuit_parses_to_expected_shape() {
        let ir = load(FIG1).unwrap();
        assert_eq!(ir.sources.len(), 2);
        assert_eq!(ir.elements.len(), 4);
        assert_eq!(
            ir.elements
                .iter()
                .filter(|e| matches!(e.element, Element::BeamSplitter { .. }))
                .count(),
            2
        );
        assert_eq!(
            ir.elements
                .iter()
                .filter(|e| matches!(e.element, Element::PolarizingBs { .. }))
                .count(),
            2
        );
        assert_eq!(ir.detectors.len(), 4);
        assert_eq!(ir.coincidence.len(), 2);
        assert_eq!(ir.output, Some(("2p".into(), "4p".into())));
    }

    #[test]
    fn empty_file_reports_no_output() {
        let err = load("").unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].code, DiagnosticCode::NoOutput);
    }

    #[test]
    fn duplicate_bs_input_is_reported_with_location() {
        let err = parse("bs 1 1 -> a b").unwrap_err();
        assert_eq!(err[0].code, DiagnosticCode::DuplicateMode);
        assert_eq!(err[0].line, 1);
    }

    #[test]
    fn glued_and_spaced_coincidence_forms_agree() {
        let spaced = parse("coincidence D1pH & D3pV | D1pV & D3pH").unwrap();
        let glued = parse("coincidence D1pH&D3pV | D1pV&D3pH").unwrap();
        assert_eq!(spaced.coincidence, glued.coincidence);
        assert_eq!(spaced.coincidence.len(), 2);
        assert_eq!(spaced.coincidence[0], vec!["D1pH", "D3pV"]);
    }

    #[test]
    fn detector_on_consumed_mode_is_not_terminal() {
        let text = "\
source phi+ theta=0.5 modes 1 2
bs 1 2 -> a b
detector D on 1
output a b
";
        let ir = parse(text).unwrap();
        let diags = validate(&ir);
        assert!(diags
            .iter()
            .any(|d| d.code == DiagnosticCode::NonTerminalDetector));
    }

    #[test]
    fn coincidence_with_unknown_detector_is_rejected() {
        let text = "\
source phi+ theta=0.5 modes 1 2
detector D1 on 1
coincidence D1 & Dmissing
output 1 2
";
        let ir = parse(text).unwrap();
        let diags = validate(&ir);
        assert!(diags
            .iter()
            .any(|d| d.code == DiagnosticCode::UnknownDetector));
    }

    #[test]
    fn valid_reference_file_has_no_diagnostics() {
        let ir = parse(FIG1).unwrap();
        assert_eq!(validate(&ir), vec![]);
    }

    #[test]
    fn use_before_production_is_ordered_by_location() {
        let text = "\
bs 1 3 -> 1p 3p
source phi+ theta=0.5 modes 5 6
bs 9 5 -> x y
output x y
";
        let ir = parse(text).unwrap();
        let diags = validate(&ir);
        assert!(diags.len() >= 2);
        assert!(diags.windows(2).all(|w| w[0].line <= w[1].line));
        assert_eq!(diags[0].code, DiagnosticCode::UseBeforeProduction);
        assert_eq!(diags[0].line, 1);
    }

    #[test]
    fn pretty_print_round_trips_structurally() {
        let ir = load(FIG1).unwrap();
        let printed = ir.pretty_print();
        let reparsed = load(&printed).unwrap();
        // Lines shift, so compare everything except the location fields.
        assert_eq!(reparsed.coincidence, ir.coincidence);
        assert_eq!(reparsed.output, ir.output);
        assert_eq!(reparsed.element_list(), ir.element_list());
        assert_eq!(reparsed.bank(), ir.bank());
        assert_eq!(
            reparsed
                .sources
                .iter()
                .map(|s| (s.kind, s.theta, s.modes.clone()))
                .collect::<Vec<_>>(),
            ir.sources
                .iter()
                .map(|s| (s.kind, s.theta, s.modes.clone()))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "
# a comment
output 2p 4p   # trailing comment

";
        let ir = parse(text).unwrap();
        assert_eq!(ir.output, Some(("2p".into(), "4p".into())));
    }

    #[test]
    fn theta_out_of_range_is_flagged_at_parse_time() {
        let err = parse("source phi+ theta=3.2 modes 1 2").unwrap_err();
        assert_eq!(err[0].code, DiagnosticCode::ThetaOutOfRange);
    }

    #[test]
    fn double_pair_and_vacuum_kinds_parse() {
        let text = "\
source double:phi+ theta=0.785398163 modes 1 2
source vacuum theta=0 modes 3 4
bs 1 3 -> 1p 3p
bs 2 4 -> 2p 4p
output 2p 4p
";
        let ir = load(text).unwrap();
        assert_eq!(
            ir.sources[0].kind,
            SourceKind::DoublePair(BellKind::PhiPlus)
        );
        assert_eq!(ir.sources[1].kind, SourceKind::Vacuum);
    }
}
