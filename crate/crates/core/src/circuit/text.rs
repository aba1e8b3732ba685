//! Plain-text circuit format.
//!
//! ```text
//! qubits 3 ancilla 0
//! roles ancilla data reference
//! label swap-test
//! # gates follow, one per line
//! H 0
//! CSWAP 0 1 2
//! RY(1.5707963268) 1
//! SWAP 1 2 @injected
//! MEASURE 0
//! ```
//!
//! The header line is mandatory. `roles` and `label` lines are optional;
//! without a `roles` line every qubit is `data` except the header ancilla.
//! Blank lines and `#` comments are ignored. Angles are printed with ten
//! decimal digits, so serialize/parse round trips agree to `ANGLE_EQ_TOL`.

use super::{Circuit, GateKind, GateOp, Provenance, QubitRole};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("missing `qubits <n> ancilla <index|none>` header")]
    MissingHeader,
}

fn syntax(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        reason: reason.into(),
    }
}

/// Renders one gate as a text line without its provenance suffix. This is
/// the canonical content form: consumers that must not distinguish attacker
/// labels (the detector's hashes) build on it directly.
pub(crate) fn gate_line_untagged(gate: &GateOp) -> String {
    let mut line = gate.kind.name().to_string();
    if let Some(angle) = gate.angle {
        line.push_str(&format!("({angle:.10})"));
    }
    for q in &gate.qubits {
        line.push_str(&format!(" {q}"));
    }
    line
}

/// Renders one gate as a full text line, provenance suffix included.
pub(super) fn gate_line(gate: &GateOp) -> String {
    let mut line = gate_line_untagged(gate);
    if gate.tag == Provenance::Injected {
        line.push_str(" @injected");
    }
    line
}

/// Serializes a circuit to the text format. The output always carries the
/// header, a `roles` line, and, when non-empty, a `label` line.
pub fn serialize(circuit: &Circuit) -> String {
    let mut out = String::new();
    let ancilla = match circuit.ancilla_index() {
        Some(i) => i.to_string(),
        None => "none".to_string(),
    };
    out.push_str(&format!(
        "qubits {} ancilla {}\n",
        circuit.n_qubits, ancilla
    ));
    let roles = circuit
        .roles
        .iter()
        .map(|r| r.name())
        .collect::<Vec<_>>()
        .join(" ");
    out.push_str(&format!("roles {roles}\n"));
    if !circuit.label.is_empty() {
        out.push_str(&format!("label {}\n", circuit.label));
    }
    for gate in &circuit.gates {
        out.push_str(&gate_line(gate));
        out.push('\n');
    }
    out
}

/// Parses the text format produced by [`serialize`]. Errors carry the
/// 1-based line number of the offending line.
pub fn parse(input: &str) -> Result<Circuit, ParseError> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        let Some(circuit) = circuit.as_mut() else {
            // First significant line must be the header.
            let mut words = line.split_whitespace();
            if words.next() != Some("qubits") {
                return Err(ParseError::MissingHeader);
            }
            let n_qubits: usize = words
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| syntax(lineno, "expected qubit count after `qubits`"))?;
            if words.next() != Some("ancilla") {
                return Err(syntax(lineno, "expected `ancilla` after qubit count"));
            }
            let ancilla_word = words
                .next()
                .ok_or_else(|| syntax(lineno, "expected ancilla index or `none`"))?;
            if let Some(extra) = words.next() {
                return Err(syntax(lineno, format!("unexpected token `{extra}`")));
            }
            let mut parsed = Circuit::new(n_qubits, "");
            if ancilla_word != "none" {
                let a: usize = ancilla_word
                    .parse()
                    .map_err(|_| syntax(lineno, format!("bad ancilla index `{ancilla_word}`")))?;
                if a >= n_qubits {
                    return Err(syntax(
                        lineno,
                        format!("ancilla index {a} out of range for {n_qubits} qubit(s)"),
                    ));
                }
                parsed.roles[a] = QubitRole::Ancilla;
            }
            circuit = Some(parsed);
            continue;
        };

        if let Some(rest) = line.strip_prefix("roles ") {
            let roles: Vec<QubitRole> = rest
                .split_whitespace()
                .map(|w| {
                    QubitRole::from_name(w)
                        .ok_or_else(|| syntax(lineno, format!("unknown role `{w}`")))
                })
                .collect::<Result<_, _>>()?;
            if roles.len() != circuit.n_qubits {
                return Err(syntax(
                    lineno,
                    format!(
                        "roles line lists {} role(s), circuit has {} qubit(s)",
                        roles.len(),
                        circuit.n_qubits
                    ),
                ));
            }
            circuit.roles = roles;
            continue;
        }
        if let Some(rest) = line.strip_prefix("label ") {
            circuit.label = rest.trim().to_string();
            continue;
        }

        circuit.push(parse_gate_line(line, lineno)?);
    }
    circuit.ok_or(ParseError::MissingHeader)
}

fn parse_gate_line(line: &str, lineno: usize) -> Result<GateOp, ParseError> {
    let mut words = line.split_whitespace().peekable();
    let head = words.next().expect("line is non-empty");

    let (kind_name, angle) = match head.find('(') {
        Some(open) => {
            let close = head
                .rfind(')')
                .ok_or_else(|| syntax(lineno, "unclosed `(` in gate angle"))?;
            if close != head.len() - 1 || close <= open {
                return Err(syntax(lineno, "malformed angle syntax"));
            }
            let angle_text = &head[open + 1..close];
            let angle: f64 = angle_text
                .parse()
                .map_err(|_| syntax(lineno, format!("bad angle `{angle_text}`")))?;
            if !angle.is_finite() {
                return Err(syntax(lineno, format!("non-finite angle `{angle_text}`")));
            }
            (&head[..open], Some(angle))
        }
        None => (head, None),
    };

    let kind = GateKind::from_name(kind_name)
        .ok_or_else(|| syntax(lineno, format!("unknown gate `{kind_name}`")))?;
    match (kind.is_rotation(), angle) {
        (true, None) => return Err(syntax(lineno, format!("{kind} requires an angle"))),
        (false, Some(_)) => return Err(syntax(lineno, format!("{kind} takes no angle"))),
        _ => {}
    }

    let mut qubits = Vec::with_capacity(kind.arity());
    let mut tag = Provenance::Legitimate;
    for word in words {
        if word == "@injected" {
            tag = Provenance::Injected;
            continue;
        }
        if tag == Provenance::Injected {
            return Err(syntax(lineno, "`@injected` must be the final token"));
        }
        let q: usize = word
            .parse()
            .map_err(|_| syntax(lineno, format!("bad qubit index `{word}`")))?;
        qubits.push(q);
    }
    if qubits.len() != kind.arity() {
        return Err(syntax(
            lineno,
            format!(
                "{} takes {} qubit(s), got {}",
                kind,
                kind.arity(),
                qubits.len()
            ),
        ));
    }

    let mut gate = GateOp::new(kind, qubits, angle);
    gate.tag = tag;
    Ok(gate)
}
