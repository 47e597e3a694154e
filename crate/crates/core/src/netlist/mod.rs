// SPDX-License-Identifier: Apache-2.0

//! Gate-level combinational netlists.
//!
//! A [`Netlist`] is immutable once built. Construction goes through
//! [`RawNetlist`], a plain name-based description that may violate any of the
//! structural invariants; [`validate`] lists the violations and
//! [`Netlist::from_raw`] refuses to build from a raw netlist that has any.
//!
//! Gates of a built netlist are stored in a deterministic topological order
//! (the smallest-index-first Kahn order of the raw gate list), so a netlist
//! whose raw gate list is already topological keeps its order.

mod bench;
mod bind;
mod validate;
mod verilog;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use bench::{parse_bench, read_bench_file, write_bench, BenchError};
pub use bind::{bind_key, BindError};
pub use validate::{validate, Violation};
pub use verilog::emit_verilog;

/// Identifier prefix that marks a primary input as a key input.
pub const KEY_INPUT_PREFIX: &str = "keyinput";

/// Canonical name of key input `index`.
pub fn key_input_name(index: usize) -> String {
    format!("{KEY_INPUT_PREFIX}{index}")
}

/// Dense index of a signal inside one [`Netlist`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalId(pub u32);

impl SignalId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    Not,
    Buff,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buff,
    ];

    /// Keyword used by the `.bench` format.
    pub fn bench_name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buff => "BUFF",
        }
    }

    /// Whether `n` fan-ins is a legal arity for this kind.
    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buff => n == 1,
            GateKind::Xor | GateKind::Xnor => n == 2,
            GateKind::And | GateKind::Or | GateKind::Nand | GateKind::Nor => n >= 2,
        }
    }

    /// Whether the gate output is inverted relative to its base function
    /// (AND, OR, XOR or identity).
    pub fn is_inverting(self) -> bool {
        matches!(
            self,
            GateKind::Nand | GateKind::Nor | GateKind::Xnor | GateKind::Not
        )
    }

    /// Scalar evaluation.
    pub fn eval<I: IntoIterator<Item = bool>>(self, inputs: I) -> bool {
        let mut it = inputs.into_iter();
        let base = match self {
            GateKind::And | GateKind::Nand => it.all(|b| b),
            GateKind::Or | GateKind::Nor => it.any(|b| b),
            GateKind::Xor | GateKind::Xnor => it.fold(false, |acc, b| acc ^ b),
            GateKind::Not | GateKind::Buff => it.next().unwrap_or(false),
        };
        base ^ self.is_inverting()
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.bench_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown gate kind `{0}`")]
pub struct UnknownGateKind(pub String);

impl FromStr for GateKind {
    type Err = UnknownGateKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AND" => Ok(GateKind::And),
            "OR" => Ok(GateKind::Or),
            "NAND" => Ok(GateKind::Nand),
            "NOR" => Ok(GateKind::Nor),
            "XOR" => Ok(GateKind::Xor),
            "XNOR" => Ok(GateKind::Xnor),
            "NOT" => Ok(GateKind::Not),
            "BUFF" | "BUF" => Ok(GateKind::Buff),
            _ => Err(UnknownGateKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub output: SignalId,
    pub kind: GateKind,
    pub fanin: Vec<SignalId>,
}

/// Fixed-width key assignment. Bit `i` is the value of key input `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct KeyVector {
    bits: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid key bit string `{0}` (expected only 0 and 1)")]
pub struct KeyParseError(pub String);

impl KeyVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(width: usize) -> Self {
        Self {
            bits: vec![false; width],
        }
    }

    /// Key whose bit `i` is bit `i` of `value`.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        Self {
            bits: (0..width).map(|i| (value >> i) & 1 == 1).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn with_flipped(&self, i: usize) -> Self {
        let mut bits = self.bits.clone();
        bits[i] = !bits[i];
        Self { bits }
    }

    /// Parses a `0`/`1` string; character `i` becomes bit `i`.
    pub fn parse(s: &str) -> Result<Self, KeyParseError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(KeyParseError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }
}

impl fmt::Display for KeyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for KeyVector {
    type Err = KeyParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KeyVector::parse(s)
    }
}

impl Serialize for KeyVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KeyVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        KeyVector::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A gate described by signal names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGate {
    pub output: String,
    pub kind: GateKind,
    pub fanin: Vec<String>,
}

impl RawGate {
    pub fn new(output: impl Into<String>, kind: GateKind, fanin: &[&str]) -> Self {
        Self {
            output: output.into(),
            kind,
            fanin: fanin.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Unchecked, name-based netlist description.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawNetlist {
    pub name: String,
    pub primary_inputs: Vec<String>,
    /// Key inputs in key-bit order.
    pub key_inputs: Vec<String>,
    pub primary_outputs: Vec<String>,
    pub gates: Vec<RawGate>,
    pub correct_key: Option<KeyVector>,
}

#[derive(Debug, Clone, Error)]
#[error("invalid netlist `{name}`: {}", format_violations(.violations))]
pub struct InvalidNetlist {
    pub name: String,
    pub violations: Vec<Violation>,
}

fn format_violations(v: &[Violation]) -> String {
    let shown: Vec<String> = v.iter().take(8).map(|x| x.to_string()).collect();
    let mut s = shown.join("; ");
    if v.len() > 8 {
        s.push_str(&format!("; ... ({} more)", v.len() - 8));
    }
    s
}

/// Immutable, validated combinational netlist.
#[derive(Debug, Clone)]
pub struct Netlist {
    name: String,
    signals: Vec<String>,
    index: HashMap<String, SignalId>,
    primary_inputs: Vec<SignalId>,
    key_inputs: Vec<SignalId>,
    primary_outputs: Vec<SignalId>,
    gates: Vec<Gate>,
    driver: Vec<Option<u32>>,
    sinks: Vec<Vec<u32>>,
    correct_key: Option<KeyVector>,
}

impl PartialEq for Netlist {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.signals == other.signals
            && self.primary_inputs == other.primary_inputs
            && self.key_inputs == other.key_inputs
            && self.primary_outputs == other.primary_outputs
            && self.gates == other.gates
            && self.correct_key == other.correct_key
    }
}

impl Eq for Netlist {}

impl Netlist {
    /// Validates `raw` and builds the netlist.
    pub fn from_raw(raw: RawNetlist) -> Result<Self, InvalidNetlist> {
        if let Err(violations) = validate(&raw) {
            return Err(InvalidNetlist {
                name: raw.name,
                violations,
            });
        }
        Ok(Self::build_unchecked(raw))
    }

    /// Builds from a raw netlist that already passed [`validate`].
    fn build_unchecked(raw: RawNetlist) -> Self {
        let RawNetlist {
            name,
            primary_inputs,
            key_inputs,
            primary_outputs,
            gates: raw_gates,
            correct_key,
        } = raw;

        let order = topo_order(&primary_inputs, &key_inputs, &raw_gates)
            .expect("validated netlist is acyclic");

        let mut signals: Vec<String> =
            Vec::with_capacity(primary_inputs.len() + key_inputs.len() + raw_gates.len());
        let mut index = HashMap::with_capacity(signals.capacity());
        let mut intern = |name: &String, signals: &mut Vec<String>| -> SignalId {
            let id = SignalId(signals.len() as u32);
            signals.push(name.clone());
            index.insert(name.clone(), id);
            id
        };
        let pi: Vec<SignalId> = primary_inputs
            .iter()
            .map(|s| intern(s, &mut signals))
            .collect();
        let ki: Vec<SignalId> = key_inputs.iter().map(|s| intern(s, &mut signals)).collect();
        for &g in &order {
            intern(&raw_gates[g].output, &mut signals);
        }
        let gates: Vec<Gate> = order
            .iter()
            .map(|&g| {
                let rg = &raw_gates[g];
                Gate {
                    output: index[&rg.output],
                    kind: rg.kind,
                    fanin: rg.fanin.iter().map(|f| index[f]).collect(),
                }
            })
            .collect();
        let po: Vec<SignalId> = primary_outputs.iter().map(|s| index[s]).collect();

        let mut driver = vec![None; signals.len()];
        let mut sinks = vec![Vec::new(); signals.len()];
        for (gi, g) in gates.iter().enumerate() {
            driver[g.output.index()] = Some(gi as u32);
            for (pos, f) in g.fanin.iter().enumerate() {
                // record each sink gate once even if it reads the signal twice
                if !g.fanin[..pos].contains(f) {
                    sinks[f.index()].push(gi as u32);
                }
            }
        }

        Self {
            name,
            signals,
            index,
            primary_inputs: pi,
            key_inputs: ki,
            primary_outputs: po,
            gates,
            driver,
            sinks,
            correct_key,
        }
    }

    /// Name-based copy of this netlist.
    pub fn to_raw(&self) -> RawNetlist {
        let names = |ids: &[SignalId]| {
            ids.iter()
                .map(|&i| self.signals[i.index()].clone())
                .collect()
        };
        RawNetlist {
            name: self.name.clone(),
            primary_inputs: names(&self.primary_inputs),
            key_inputs: names(&self.key_inputs),
            primary_outputs: names(&self.primary_outputs),
            gates: self
                .gates
                .iter()
                .map(|g| RawGate {
                    output: self.signals[g.output.index()].clone(),
                    kind: g.kind,
                    fanin: names(&g.fanin),
                })
                .collect(),
            correct_key: self.correct_key.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Same netlist under another name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        let mut n = self.clone();
        n.name = name.into();
        n
    }

    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn signal_name(&self, id: SignalId) -> &str {
        &self.signals[id.index()]
    }

    pub fn signal_names(&self) -> &[String] {
        &self.signals
    }

    pub fn signal(&self, name: &str) -> Option<SignalId> {
        self.index.get(name).copied()
    }

    pub fn primary_inputs(&self) -> &[SignalId] {
        &self.primary_inputs
    }

    pub fn key_inputs(&self) -> &[SignalId] {
        &self.key_inputs
    }

    pub fn primary_outputs(&self) -> &[SignalId] {
        &self.primary_outputs
    }

    /// Gates in topological order.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn correct_key(&self) -> Option<&KeyVector> {
        self.correct_key.as_ref()
    }

    pub fn is_locked(&self) -> bool {
        !self.key_inputs.is_empty()
    }

    /// Index (into [`Netlist::gates`]) of the gate driving `id`, if any.
    pub fn driver(&self, id: SignalId) -> Option<usize> {
        self.driver[id.index()].map(|g| g as usize)
    }

    pub fn is_gate_output(&self, id: SignalId) -> bool {
        self.driver[id.index()].is_some()
    }

    pub fn is_primary_input(&self, id: SignalId) -> bool {
        self.primary_inputs.contains(&id)
    }

    pub fn is_key_input(&self, id: SignalId) -> bool {
        self.key_inputs.contains(&id)
    }

    /// Indices of gates reading `id`, each listed once.
    pub fn sink_gates(&self, id: SignalId) -> &[u32] {
        &self.sinks[id.index()]
    }

    /// Copy of this netlist with a different (or no) stored correct key.
    ///
    /// Fails if the key width does not match the key-input count.
    pub fn with_correct_key(&self, key: Option<KeyVector>) -> Result<Self, InvalidNetlist> {
        let mut raw = self.to_raw();
        raw.correct_key = key;
        Netlist::from_raw(raw)
    }
}

/// Smallest-index-first topological order of `gates`. `None` on a cycle or
/// a reference to an unknown signal.
fn topo_order(pis: &[String], keys: &[String], gates: &[RawGate]) -> Option<Vec<usize>> {
    let mut producer: HashMap<&str, usize> = HashMap::with_capacity(gates.len());
    for (i, g) in gates.iter().enumerate() {
        producer.insert(g.output.as_str(), i);
    }
    let inputs: std::collections::HashSet<&str> =
        pis.iter().chain(keys.iter()).map(|s| s.as_str()).collect();
    let mut indegree = vec![0usize; gates.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    for (i, g) in gates.iter().enumerate() {
        for f in &g.fanin {
            if let Some(&p) = producer.get(f.as_str()) {
                indegree[i] += 1;
                consumers[p].push(i);
            } else if !inputs.contains(f.as_str()) {
                return None;
            }
        }
    }
    let mut heap: BinaryHeap<Reverse<usize>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| Reverse(i))
        .collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(Reverse(i)) = heap.pop() {
        order.push(i);
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    (order.len() == gates.len()).then_some(order)
}
