// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use thiserror::Error;

use super::{GateKind, InvalidNetlist, KeyVector, Netlist, RawGate, RawNetlist, SignalId};

#[derive(Debug, Error)]
pub enum BindError {
    #[error("key has {got} bits but the netlist has {expected} key inputs")]
    WidthMismatch { expected: usize, got: usize },
    #[error(
        "output `{0}` is constant but the netlist has no primary input to build a tie cell from"
    )]
    NoTieSource(String),
    #[error(transparent)]
    Invalid(#[from] InvalidNetlist),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Value {
    Const(bool),
    Signal,
}

/// Replaces every key input by its bit in `key`, folds constants through
/// local gate identities and drops gates no output depends on.
///
/// Surviving gates keep their output names. An output that folds to a
/// constant is rebuilt as `XOR(x, x)` / `XNOR(x, x)` over the first primary
/// input, since the gate basis has no constant cells.
pub fn bind_key(n: &Netlist, key: &KeyVector) -> Result<Netlist, BindError> {
    if key.width() != n.key_inputs().len() {
        return Err(BindError::WidthMismatch {
            expected: n.key_inputs().len(),
            got: key.width(),
        });
    }
    let mut value = vec![Value::Signal; n.num_signals()];
    for (i, &k) in n.key_inputs().iter().enumerate() {
        value[k.index()] = Value::Const(key.bit(i));
    }

    // simplified form of every gate, None when constant
    let mut simplified: Vec<Option<(GateKind, Vec<SignalId>)>> = Vec::with_capacity(n.num_gates());
    for g in n.gates() {
        let (v, form) = fold(g.kind, &g.fanin, &value);
        value[g.output.index()] = v;
        simplified.push(form);
    }

    // sweep from the outputs
    let mut live = vec![false; n.num_signals()];
    let mut stack: Vec<SignalId> = n.primary_outputs().to_vec();
    while let Some(s) = stack.pop() {
        if live[s.index()] {
            continue;
        }
        live[s.index()] = true;
        if let Some(gi) = n.driver(s) {
            if let Some((_, fanin)) = &simplified[gi] {
                stack.extend(fanin.iter().copied());
            }
        }
    }

    let name = |id: SignalId| n.signal_name(id).to_string();
    let mut gates = Vec::new();
    let mut tied: HashSet<SignalId> = HashSet::new();
    for (gi, g) in n.gates().iter().enumerate() {
        if !live[g.output.index()] {
            continue;
        }
        match &simplified[gi] {
            Some((kind, fanin)) => gates.push(RawGate {
                output: name(g.output),
                kind: *kind,
                fanin: fanin.iter().map(|&f| name(f)).collect(),
            }),
            None => {
                // only reachable when an output is constant
                if let Value::Const(b) = value[g.output.index()] {
                    gates.push(tie_cell(n, name(g.output), b)?);
                    tied.insert(g.output);
                }
            }
        }
    }
    // outputs wired straight to a key input
    for &o in n.primary_outputs() {
        if n.is_key_input(o) && tied.insert(o) {
            let b = matches!(value[o.index()], Value::Const(true));
            gates.push(tie_cell(n, name(o), b)?);
        }
    }

    let raw = RawNetlist {
        name: n.name().to_string(),
        primary_inputs: n.primary_inputs().iter().map(|&i| name(i)).collect(),
        key_inputs: Vec::new(),
        primary_outputs: n.primary_outputs().iter().map(|&o| name(o)).collect(),
        gates,
        correct_key: None,
    };
    Ok(Netlist::from_raw(raw)?)
}

fn tie_cell(n: &Netlist, output: String, value: bool) -> Result<RawGate, BindError> {
    let Some(&src) = n.primary_inputs().first() else {
        return Err(BindError::NoTieSource(output));
    };
    let src = n.signal_name(src).to_string();
    Ok(RawGate {
        output,
        kind: if value { GateKind::Xnor } else { GateKind::Xor },
        fanin: vec![src.clone(), src],
    })
}

/// Local constant folding of one gate.
fn fold(
    kind: GateKind,
    fanin: &[SignalId],
    value: &[Value],
) -> (Value, Option<(GateKind, Vec<SignalId>)>) {
    let konst = |b: bool| (Value::Const(b), None);
    let keep = |k: GateKind, f: Vec<SignalId>| (Value::Signal, Some((k, f)));
    let invert = kind.is_inverting();
    match kind {
        GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
            // controlling value: 0 for AND-type, 1 for OR-type
            let controlling = matches!(kind, GateKind::Or | GateKind::Nor);
            let mut rest = Vec::with_capacity(fanin.len());
            for &f in fanin {
                match value[f.index()] {
                    Value::Const(b) if b == controlling => return konst(controlling ^ invert),
                    Value::Const(_) => {}
                    Value::Signal => rest.push(f),
                }
            }
            match rest.len() {
                0 => konst(!controlling ^ invert),
                1 => keep(
                    if invert {
                        GateKind::Not
                    } else {
                        GateKind::Buff
                    },
                    rest,
                ),
                _ => keep(kind, rest),
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            let mut parity = invert;
            let mut rest = Vec::with_capacity(2);
            for &f in fanin {
                match value[f.index()] {
                    Value::Const(b) => parity ^= b,
                    Value::Signal => rest.push(f),
                }
            }
            match rest.len() {
                0 => konst(parity),
                1 => keep(
                    if parity {
                        GateKind::Not
                    } else {
                        GateKind::Buff
                    },
                    rest,
                ),
                _ => keep(
                    if parity {
                        GateKind::Xnor
                    } else {
                        GateKind::Xor
                    },
                    rest,
                ),
            }
        }
        GateKind::Not | GateKind::Buff => match value[fanin[0].index()] {
            Value::Const(b) => konst(b ^ invert),
            Value::Signal => keep(kind, fanin.to_vec()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    fn locked(kind: &str, bit: &str) -> Netlist {
        let text = format!(
            "# key={bit}\nINPUT(a)\nINPUT(b)\nINPUT(keyinput0)\nOUTPUT(y)\n\
             w = AND(a, b)\ny = {kind}(w, keyinput0)\n"
        );
        parse_bench("t", &text).unwrap()
    }

    fn gate_of<'a>(n: &'a Netlist, out: &str) -> &'a crate::netlist::Gate {
        let id = n.signal(out).unwrap();
        &n.gates()[n.driver(id).unwrap()]
    }

    #[test]
    fn xor_with_zero_becomes_buffer() {
        let n = locked("XOR", "0");
        let b = bind_key(&n, &KeyVector::parse("0").unwrap()).unwrap();
        let g = gate_of(&b, "y");
        assert_eq!(g.kind, GateKind::Buff);
        assert_eq!(b.signal_name(g.fanin[0]), "w");
        assert!(b.key_inputs().is_empty() && b.correct_key().is_none());
    }

    #[test]
    fn xnor_with_zero_becomes_inverter() {
        let n = locked("XNOR", "1");
        let b = bind_key(&n, &KeyVector::parse("0").unwrap()).unwrap();
        assert_eq!(gate_of(&b, "y").kind, GateKind::Not);
    }

    #[test]
    fn constant_output_gets_tie_cell() {
        let n = locked("AND", "1");
        let b = bind_key(&n, &KeyVector::parse("0").unwrap()).unwrap();
        let g = gate_of(&b, "y");
        assert_eq!(g.kind, GateKind::Xor);
        assert_eq!(g.fanin[0], g.fanin[1]);
        // w no longer feeds anything
        assert!(b.signal("w").is_none());
    }

    #[test]
    fn width_mismatch() {
        let n = locked("XOR", "0");
        assert!(matches!(
            bind_key(&n, &KeyVector::parse("01").unwrap()),
            Err(BindError::WidthMismatch {
                expected: 1,
                got: 2
            })
        ));
    }
}
