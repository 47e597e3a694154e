// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{key_input_name, topo_order, GateKind, RawNetlist, KEY_INPUT_PREFIX};

/// One broken structural invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    /// Signal name outside `[A-Za-z0-9_]+`.
    BadIdentifier { signal: String },
    /// Signal declared as an input more than once.
    DuplicateInput { signal: String },
    /// More than one gate drives the signal.
    DuplicateDriver { signal: String },
    /// A gate drives a primary or key input.
    DrivenInput { signal: String },
    /// A gate reads a signal that is neither an input nor a gate output.
    UndeclaredSignal { gate: String, signal: String },
    /// Fan-in count not allowed for the gate kind.
    BadArity {
        gate: String,
        kind: GateKind,
        arity: usize,
    },
    /// Gates on a combinational loop.
    Cycle { signals: Vec<String> },
    /// A primary output nothing drives.
    UndrivenOutput { signal: String },
    /// Key input `index` is not named `keyinput<index>`, or a primary input
    /// uses the key prefix.
    KeyInputName { signal: String, expected: String },
    /// Key inputs present without a stored correct key or vice versa, or the
    /// widths differ.
    KeyMismatch {
        key_inputs: usize,
        key_bits: Option<usize>,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadIdentifier { signal } => write!(f, "illegal identifier `{signal}`"),
            Violation::DuplicateInput { signal } => write!(f, "input `{signal}` declared twice"),
            Violation::DuplicateDriver { signal } => {
                write!(f, "signal `{signal}` has more than one driver")
            }
            Violation::DrivenInput { signal } => {
                write!(f, "input `{signal}` is also driven by a gate")
            }
            Violation::UndeclaredSignal { gate, signal } => {
                write!(f, "gate `{gate}` reads undeclared signal `{signal}`")
            }
            Violation::BadArity { gate, kind, arity } => {
                write!(f, "gate `{gate}`: {kind} cannot take {arity} inputs")
            }
            Violation::Cycle { signals } => {
                write!(f, "combinational cycle through {}", signals.join(", "))
            }
            Violation::UndrivenOutput { signal } => write!(f, "output `{signal}` is not driven"),
            Violation::KeyInputName { signal, expected } => {
                write!(f, "key input `{signal}` should be named `{expected}`")
            }
            Violation::KeyMismatch {
                key_inputs,
                key_bits,
            } => match key_bits {
                Some(b) => write!(f, "{key_inputs} key inputs but a {b}-bit correct key"),
                None => write!(f, "{key_inputs} key inputs but no correct key"),
            },
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Checks every structural invariant of `raw`.
pub fn validate(raw: &RawNetlist) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();

    let mut inputs: HashSet<&str> = HashSet::new();
    for s in raw.primary_inputs.iter().chain(raw.key_inputs.iter()) {
        if !is_identifier(s) {
            out.push(Violation::BadIdentifier { signal: s.clone() });
        }
        if !inputs.insert(s.as_str()) {
            out.push(Violation::DuplicateInput { signal: s.clone() });
        }
    }
    for (i, s) in raw.key_inputs.iter().enumerate() {
        let expected = key_input_name(i);
        if *s != expected {
            out.push(Violation::KeyInputName {
                signal: s.clone(),
                expected,
            });
        }
    }
    for s in &raw.primary_inputs {
        if s.starts_with(KEY_INPUT_PREFIX) {
            out.push(Violation::KeyInputName {
                signal: s.clone(),
                expected: "a key input".into(),
            });
        }
    }
    let key_bits = raw.correct_key.as_ref().map(|k| k.width());
    if key_bits.unwrap_or(0) != raw.key_inputs.len()
        || (raw.key_inputs.is_empty() && raw.correct_key.is_some())
    {
        out.push(Violation::KeyMismatch {
            key_inputs: raw.key_inputs.len(),
            key_bits,
        });
    }

    let mut drivers: HashMap<&str, usize> = HashMap::with_capacity(raw.gates.len());
    for g in &raw.gates {
        if !is_identifier(&g.output) {
            out.push(Violation::BadIdentifier {
                signal: g.output.clone(),
            });
        }
        if !g.kind.arity_ok(g.fanin.len()) {
            out.push(Violation::BadArity {
                gate: g.output.clone(),
                kind: g.kind,
                arity: g.fanin.len(),
            });
        }
        let count = drivers.entry(g.output.as_str()).or_insert(0);
        *count += 1;
        if *count == 2 {
            out.push(Violation::DuplicateDriver {
                signal: g.output.clone(),
            });
        }
        if inputs.contains(g.output.as_str()) {
            out.push(Violation::DrivenInput {
                signal: g.output.clone(),
            });
        }
    }
    let mut undeclared = false;
    for g in &raw.gates {
        for f in &g.fanin {
            if !inputs.contains(f.as_str()) && !drivers.contains_key(f.as_str()) {
                undeclared = true;
                out.push(Violation::UndeclaredSignal {
                    gate: g.output.clone(),
                    signal: f.clone(),
                });
            }
        }
    }
    for o in &raw.primary_outputs {
        if !inputs.contains(o.as_str()) && !drivers.contains_key(o.as_str()) {
            out.push(Violation::UndrivenOutput { signal: o.clone() });
        }
    }

    let duplicate_driver = drivers.values().any(|&c| c > 1);
    if !undeclared && !duplicate_driver {
        if topo_order(&raw.primary_inputs, &raw.key_inputs, &raw.gates).is_none() {
            out.push(Violation::Cycle {
                signals: cycle_members(raw),
            });
        }
    } else if !undeclared {
        // cycles hidden behind duplicate drivers are still worth reporting
        if let Some(signals) = cycle_by_dfs(raw) {
            out.push(Violation::Cycle { signals });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Gate outputs left over after peeling every gate Kahn's algorithm can
/// schedule; sorted by name.
fn cycle_members(raw: &RawNetlist) -> Vec<String> {
    let mut done: HashSet<&str> = raw
        .primary_inputs
        .iter()
        .chain(raw.key_inputs.iter())
        .map(|s| s.as_str())
        .collect();
    let mut remaining: Vec<&super::RawGate> = raw.gates.iter().collect();
    loop {
        let before = remaining.len();
        remaining.retain(|g| {
            if g.fanin.iter().all(|f| done.contains(f.as_str())) {
                done.insert(g.output.as_str());
                false
            } else {
                true
            }
        });
        if remaining.len() == before {
            break;
        }
    }
    // peel gates downstream of a loop that nothing left reads
    loop {
        let read: HashSet<&str> = remaining
            .iter()
            .flat_map(|g| g.fanin.iter().map(|s| s.as_str()))
            .collect();
        let before = remaining.len();
        remaining.retain(|g| read.contains(g.output.as_str()));
        if remaining.len() == before {
            break;
        }
    }
    let mut v: Vec<String> = remaining.iter().map(|g| g.output.clone()).collect();
    v.sort();
    v
}

fn cycle_by_dfs(raw: &RawNetlist) -> Option<Vec<String>> {
    let mut fanin: HashMap<&str, Vec<&str>> = HashMap::new();
    for g in &raw.gates {
        fanin
            .entry(g.output.as_str())
            .or_default()
            .extend(g.fanin.iter().map(|s| s.as_str()));
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<&str, u8> = HashMap::new();
    for start in fanin.keys() {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        state.insert(start, 1);
        while let Some((node, idx)) = stack.pop() {
            let next = fanin.get(node).and_then(|v| v.get(idx)).copied();
            match next {
                Some(n) => {
                    stack.push((node, idx + 1));
                    match state.get(n).copied().unwrap_or(0) {
                        0 if fanin.contains_key(n) => {
                            state.insert(n, 1);
                            stack.push((n, 0));
                        }
                        1 => {
                            let mut cyc: Vec<String> = stack
                                .iter()
                                .map(|(s, _)| s.to_string())
                                .skip_while(|s| s != n)
                                .collect();
                            cyc.sort();
                            return Some(cyc);
                        }
                        _ => {}
                    }
                }
                None => {
                    state.insert(node, 2);
                }
            }
        }
    }
    None
}
