//! Deterministic report payloads for the command line tools.
//!
//! Every report serializes with key-sorted, schema-stable JSON: struct
//! fields are declared alphabetically and no payload field depends on wall
//! time, so identical invocations produce byte-identical output. Timing is
//! opt-in (`timing_ms`) and excluded from golden comparisons. The schemas
//! are documented in `docs/schema.md` and versioned by [`SCHEMA_VERSION`].

use sha2::{Digest, Sha256};

use crate::measure::Semantics;
use crate::protocol::{CircuitRun, ContaminationReport, PatternOutcome, ProtocolResult};

pub const SCHEMA_VERSION: &str = "1";

/// Report of `loqsim run` on a circuit file.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunReport {
    pub amplitude_table: Vec<crate::fock::AmplitudeRecord>,
    pub circuit_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heralded_fidelity: Option<f64>,
    pub output_pair: (String, String),
    pub patterns: Vec<PatternOutcome>,
    pub schema_version: String,
    pub semantics: Semantics,
    pub success_probability: f64,
    pub theta_override: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl RunReport {
    pub fn from_run(
        run: &CircuitRun,
        circuit_text: &str,
        semantics: Semantics,
        theta_override: Option<f64>,
    ) -> Self {
        RunReport {
            amplitude_table: run.final_state.amplitude_records(),
            circuit_sha256: sha256_hex(circuit_text.as_bytes()),
            heralded_fidelity: run.heralded_fidelity(),
            output_pair: run.output_pair.clone(),
            patterns: run.patterns.clone(),
            schema_version: SCHEMA_VERSION.to_string(),
            semantics,
            success_probability: run.success_probability,
            theta_override,
            timing_ms: None,
        }
    }
}

/// Report of `loqsim protocol`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProtocolReport {
    pub protocol: ProtocolResult,
    pub schema_version: String,
}

/// One θ grid point of a sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub basis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    pub kind: String,
    pub p1: f64,
    pub p2: f64,
    pub success: f64,
    pub theta: f64,
}

impl SweepRow {
    pub fn from_result(result: &ProtocolResult) -> Self {
        SweepRow {
            basis: result.config.measurement_basis.keyword().to_string(),
            fidelity: result.heralded_fidelity(),
            kind: result.config.input_kind.keyword().to_string(),
            p1: result.patterns.first().map_or(0.0, |p| p.probability),
            p2: result.patterns.get(1).map_or(0.0, |p| p.probability),
            success: result.success_probability,
            theta: result.config.theta,
        }
    }

    pub fn csv_header() -> &'static str {
        "theta,kind,basis,p1,p2,success,fidelity"
    }

    pub fn csv_line(&self) -> String {
        let fidelity = self.fidelity.map_or(String::new(), |f| f.to_string());
        format!(
            "{},{},{},{},{},{},{}",
            self.theta, self.kind, self.basis, self.p1, self.p2, self.success, fidelity
        )
    }
}

/// Report of `loqsim sweep --out json`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub schema_version: String,
}

/// Report of `loqsim contaminate`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ContaminateReport {
    pub contamination: ContaminationReport,
    pub schema_version: String,
}

/// Report of `loqsim oracle-check`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OracleCheckReport {
    pub cases: usize,
    pub circuit_sha256: String,
    pub max_deviation: f64,
    pub passed: bool,
    pub schema_version: String,
    pub seed: u64,
    pub tolerance: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Pretty JSON with a trailing newline; the byte-exact golden format.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sweep_csv_line_leaves_fidelity_empty_when_absent() {
        let row = SweepRow {
            basis: "HV".into(),
            fidelity: None,
            kind: "phi+".into(),
            p1: 0.0,
            p2: 0.0,
            success: 0.0,
            theta: 0.0,
        };
        assert_eq!(row.csv_line(), "0,phi+,HV,0,0,0,");
    }

    #[test]
    fn json_bytes_are_stable_across_calls() {
        let report = OracleCheckReport {
            cases: 3,
            circuit_sha256: "00".into(),
            max_deviation: 1e-12,
            passed: true,
            schema_version: SCHEMA_VERSION.into(),
            seed: 7,
            tolerance: 1e-10,
        };
        assert_eq!(to_json_bytes(&report), to_json_bytes(&report));
    }
}
