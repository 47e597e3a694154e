// SPDX-License-Identifier: Apache-2.0

//! The `lockplan_v1` lock-plan document and its validation.
//!
//! A plan lists lock instances (style, target wires, key-bit group, correct
//! bits, helper signals). [`parse_plan`] enforces the closed JSON schema and
//! the structural rules that need no netlist; [`validate_plan`] adds the
//! checks against a concrete key-free netlist.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::transitive_fanout;
use crate::netlist::{self, KeyVector, Netlist, Violation};

pub const PLAN_VERSION: &str = "lockplan_v1";
/// Prefix reserved for names created by the lock compiler.
pub const RESERVED_PREFIX: &str = "lk_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    XorXnor,
    MuxLock,
    PerturbRestore,
    PairwiseSubgraph,
}

impl Style {
    pub const ALL: [Style; 4] = [
        Style::XorXnor,
        Style::MuxLock,
        Style::PerturbRestore,
        Style::PairwiseSubgraph,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Style::XorXnor => "xor_xnor",
            Style::MuxLock => "mux_lock",
            Style::PerturbRestore => "perturb_restore",
            Style::PairwiseSubgraph => "pairwise_subgraph",
        }
    }

    fn target_count(self) -> usize {
        if self == Style::PairwiseSubgraph {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

mod bit01 {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*b as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(D::Error::custom(format!("expected bit 0 or 1, found {v}"))),
        }
    }
}

mod bits01 {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(bits.iter().map(|&b| b as u8))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        Vec::<u8>::deserialize(d)?
            .into_iter()
            .map(|v| match v {
                0 => Ok(false),
                1 => Ok(true),
                v => Err(D::Error::custom(format!("expected bit 0 or 1, found {v}"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Helper {
    pub signal: String,
    #[serde(with = "bit01")]
    pub polarity: bool,
}

impl Helper {
    pub fn new(signal: impl Into<String>, polarity: bool) -> Self {
        Self {
            signal: signal.into(),
            polarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockInstance {
    pub style: Style,
    pub targets: Vec<String>,
    pub key_bits: Vec<usize>,
    #[serde(with = "bits01")]
    pub correct_bits: Vec<bool>,
    /// Pattern-detector inputs for perturb_restore; the decoy for mux_lock.
    #[serde(default)]
    pub helpers: Vec<Helper>,
}

impl LockInstance {
    pub fn xor_xnor(target: impl Into<String>, key_bit: usize, correct: bool) -> Self {
        Self {
            style: Style::XorXnor,
            targets: vec![target.into()],
            key_bits: vec![key_bit],
            correct_bits: vec![correct],
            helpers: Vec::new(),
        }
    }

    pub fn mux_lock(
        target: impl Into<String>,
        decoy: impl Into<String>,
        key_bit: usize,
        correct: bool,
    ) -> Self {
        Self {
            style: Style::MuxLock,
            targets: vec![target.into()],
            key_bits: vec![key_bit],
            correct_bits: vec![correct],
            helpers: vec![Helper::new(decoy, true)],
        }
    }

    pub fn perturb_restore(
        target: impl Into<String>,
        helpers: Vec<Helper>,
        key_bits: Vec<usize>,
        correct_bits: Vec<bool>,
    ) -> Self {
        Self {
            style: Style::PerturbRestore,
            targets: vec![target.into()],
            key_bits,
            correct_bits,
            helpers,
        }
    }

    pub fn pairwise(
        first: impl Into<String>,
        second: impl Into<String>,
        key_bit: usize,
        correct: bool,
    ) -> Self {
        Self {
            style: Style::PairwiseSubgraph,
            targets: vec![first.into(), second.into()],
            key_bits: vec![key_bit],
            correct_bits: vec![correct],
            helpers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockPlan {
    pub version: String,
    pub source_circuit: String,
    pub key_width: usize,
    pub seed: u64,
    pub instances: Vec<LockInstance>,
}

impl LockPlan {
    pub fn new(source_circuit: impl Into<String>, key_width: usize, seed: u64) -> Self {
        Self {
            version: PLAN_VERSION.to_string(),
            source_circuit: source_circuit.into(),
            key_width,
            seed,
            instances: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization cannot fail")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("plan serialization cannot fail");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Correct key assembled from the instance groups. Bits no instance
    /// claims are left at 0.
    pub fn correct_key(&self) -> KeyVector {
        let mut bits = vec![false; self.key_width];
        for inst in &self.instances {
            for (&k, &c) in inst.key_bits.iter().zip(&inst.correct_bits) {
                if k < bits.len() {
                    bits[k] = c;
                }
            }
        }
        KeyVector::new(bits)
    }

    pub fn styles(&self) -> Vec<Style> {
        let mut s: Vec<Style> = self.instances.iter().map(|i| i.style).collect();
        s.sort();
        s.dedup();
        s
    }
}

/// A rule broken by a plan. Instance indices are positions in
/// `LockPlan::instances`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum PlanViolation {
    Version {
        found: String,
    },
    ZeroKeyWidth,
    NoInstances,
    TargetCount {
        instance: usize,
        style: Style,
        count: usize,
    },
    KeyBitCount {
        instance: usize,
        style: Style,
        count: usize,
    },
    CorrectBitsLength {
        instance: usize,
        key_bits: usize,
        correct_bits: usize,
    },
    KeyBitOutOfRange {
        instance: usize,
        bit: usize,
        key_width: usize,
    },
    KeyBitOverlap {
        bit: usize,
        instances: Vec<usize>,
    },
    KeyBitGap {
        bit: usize,
    },
    DuplicateTarget {
        target: String,
        instances: Vec<usize>,
    },
    HelperCount {
        instance: usize,
        style: Style,
        count: usize,
        min: usize,
        max: usize,
    },
    UnknownSignal {
        instance: usize,
        signal: String,
    },
    InvalidTarget {
        instance: usize,
        signal: String,
    },
    KeySignal {
        instance: usize,
        signal: String,
    },
    DecoyInFanout {
        instance: usize,
        decoy: String,
        target: String,
    },
    PairwiseReachable {
        instance: usize,
        from: String,
        to: String,
    },
    HelperInFanout {
        instance: usize,
        helper: String,
        target: String,
    },
    ReservedName {
        signal: String,
    },
    LockedNetlist,
    CombinedCycle {
        signals: Vec<String>,
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use PlanViolation::*;
        match self {
            Version { found } => write!(f, "version must be `{PLAN_VERSION}`, found `{found}`"),
            ZeroKeyWidth => write!(f, "key_width must be positive"),
            NoInstances => write!(f, "plan has no instances"),
            TargetCount { instance, style, count } => write!(
                f,
                "instance {instance}: {style} takes {} target(s), found {count}",
                style.target_count()
            ),
            KeyBitCount { instance, style, count } => {
                let want = if *style == Style::PerturbRestore { "at least 2" } else { "exactly 1" };
                write!(f, "instance {instance}: {style} uses {want} key bit(s), found {count}")
            }
            CorrectBitsLength { instance, key_bits, correct_bits } => write!(
                f,
                "instance {instance}: {correct_bits} correct bits for {key_bits} key bits"
            ),
            KeyBitOutOfRange { instance, bit, key_width } => write!(
                f,
                "instance {instance}: key bit {bit} outside key_width {key_width}"
            ),
            KeyBitOverlap { bit, instances } => {
                write!(f, "key bit {bit} claimed by instances {instances:?}")
            }
            KeyBitGap { bit } => write!(f, "key bit {bit} is not used by any instance"),
            DuplicateTarget { target, instances } => {
                write!(f, "target `{target}` locked by instances {instances:?}")
            }
            HelperCount { instance, style, count, min, max } => write!(
                f,
                "instance {instance}: {style} needs {min}..={max} helper(s), found {count}"
            ),
            UnknownSignal { instance, signal } => {
                write!(f, "instance {instance}: signal `{signal}` is not in the netlist")
            }
            InvalidTarget { instance, signal } => {
                write!(f, "instance {instance}: target `{signal}` is not a gate output")
            }
            KeySignal { instance, signal } => {
                write!(f, "instance {instance}: `{signal}` is a key input")
            }
            DecoyInFanout { instance, decoy, target } => write!(
                f,
                "instance {instance}: decoy `{decoy}` is `{target}` or in its transitive fanout (cycle risk)"
            ),
            PairwiseReachable { instance, from, to } => write!(
                f,
                "instance {instance}: `{to}` is in the transitive fanout of `{from}`"
            ),
            HelperInFanout { instance, helper, target } => write!(
                f,
                "instance {instance}: helper `{helper}` is in the transitive fanout of `{target}`"
            ),
            ReservedName { signal } => {
                write!(f, "netlist signal `{signal}` uses the reserved prefix `{RESERVED_PREFIX}`")
            }
            LockedNetlist => write!(f, "netlist already has key inputs"),
            CombinedCycle { signals } => {
                write!(f, "instances together create a cycle through {}", signals.join(", "))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan schema: {0}")]
    Schema(String),
    #[error("plan structure: {}", join_violations(.0))]
    Structure(Vec<PlanViolation>),
}

pub(crate) fn join_violations(v: &[PlanViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Helper-count bounds for perturb_restore.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanLimits {
    pub min_helpers: usize,
    pub max_helpers: usize,
}

impl Default for PlanLimits {
    fn default() -> Self {
        Self {
            min_helpers: 1,
            max_helpers: 8,
        }
    }
}

pub fn parse_plan(text: &str) -> Result<LockPlan, PlanError> {
    let plan: LockPlan =
        serde_json::from_str(text).map_err(|e| PlanError::Schema(e.to_string()))?;
    let v = check_structure(&plan);
    if v.is_empty() {
        Ok(plan)
    } else {
        Err(PlanError::Structure(v))
    }
}

/// Netlist-independent rules: version, per-style arities, exact key-bit
/// partition, unique targets.
pub fn check_structure(plan: &LockPlan) -> Vec<PlanViolation> {
    use PlanViolation::*;
    let mut out = Vec::new();
    if plan.version != PLAN_VERSION {
        out.push(Version {
            found: plan.version.clone(),
        });
    }
    if plan.key_width == 0 {
        out.push(ZeroKeyWidth);
    }
    if plan.instances.is_empty() {
        out.push(NoInstances);
    }
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); plan.key_width];
    let mut targets: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in plan.instances.iter().enumerate() {
        if inst.targets.len() != inst.style.target_count() {
            out.push(TargetCount {
                instance: i,
                style: inst.style,
                count: inst.targets.len(),
            });
        }
        let kb = inst.key_bits.len();
        let kb_ok = match inst.style {
            Style::PerturbRestore => kb >= 2,
            _ => kb == 1,
        };
        if !kb_ok {
            out.push(KeyBitCount {
                instance: i,
                style: inst.style,
                count: kb,
            });
        }
        if inst.correct_bits.len() != kb {
            out.push(CorrectBitsLength {
                instance: i,
                key_bits: kb,
                correct_bits: inst.correct_bits.len(),
            });
        }
        for &b in &inst.key_bits {
            match owners.get_mut(b) {
                Some(o) => o.push(i),
                None => out.push(KeyBitOutOfRange {
                    instance: i,
                    bit: b,
                    key_width: plan.key_width,
                }),
            }
        }
        let helpers_ok = match inst.style {
            Style::MuxLock => inst.helpers.len() == 1,
            Style::XorXnor | Style::PairwiseSubgraph => inst.helpers.is_empty(),
            Style::PerturbRestore => !inst.helpers.is_empty(),
        };
        if !helpers_ok {
            let (min, max) = match inst.style {
                Style::MuxLock => (1, 1),
                Style::PerturbRestore => (1, usize::MAX),
                _ => (0, 0),
            };
            out.push(HelperCount {
                instance: i,
                style: inst.style,
                count: inst.helpers.len(),
                min,
                max,
            });
        }
        for t in &inst.targets {
            targets.entry(t.as_str()).or_default().push(i);
        }
    }
    for (bit, o) in owners.iter().enumerate() {
        match o.len() {
            0 => out.push(KeyBitGap { bit }),
            1 => {}
            _ => out.push(KeyBitOverlap {
                bit,
                instances: o.clone(),
            }),
        }
    }
    for (t, o) in targets {
        if o.len() > 1 {
            out.push(DuplicateTarget {
                target: t.to_string(),
                instances: o,
            });
        }
    }
    out
}

/// Checks `plan` against `n`: structural rules, signal existence, target
/// kinds, fanout rules for decoys/helpers/pairs, helper bounds, and that the
/// instances together compile to an acyclic netlist.
pub fn validate_plan(
    plan: &LockPlan,
    n: &Netlist,
    limits: &PlanLimits,
) -> Result<(), Vec<PlanViolation>> {
    use PlanViolation::*;
    let mut out = check_structure(plan);
    if n.is_locked() {
        out.push(LockedNetlist);
    }
    for s in n.signal_names() {
        if s.starts_with(RESERVED_PREFIX) {
            out.push(ReservedName { signal: s.clone() });
        }
    }

    let mut tfo_cache: HashMap<netlist::SignalId, Vec<bool>> = HashMap::new();
    let mut tfo = |id: netlist::SignalId| -> Vec<bool> {
        tfo_cache
            .entry(id)
            .or_insert_with(|| transitive_fanout(n, id))
            .clone()
    };

    for (i, inst) in plan.instances.iter().enumerate() {
        let mut resolve = |s: &str| -> Option<netlist::SignalId> {
            let id = n.signal(s);
            match id {
                None => out.push(UnknownSignal {
                    instance: i,
                    signal: s.to_string(),
                }),
                Some(id) if n.is_key_input(id) => out.push(KeySignal {
                    instance: i,
                    signal: s.to_string(),
                }),
                _ => {}
            }
            id
        };
        let targets: Vec<Option<netlist::SignalId>> =
            inst.targets.iter().map(|t| resolve(t)).collect();
        let helpers: Vec<Option<netlist::SignalId>> =
            inst.helpers.iter().map(|h| resolve(&h.signal)).collect();
        let mut target_ids = Vec::new();
        for (t, id) in inst.targets.iter().zip(&targets) {
            if let Some(id) = *id {
                if n.is_gate_output(id) {
                    target_ids.push(id);
                } else if !n.is_key_input(id) {
                    out.push(InvalidTarget {
                        instance: i,
                        signal: t.clone(),
                    });
                }
            }
        }
        if target_ids.len() != inst.targets.len() {
            continue;
        }
        match inst.style {
            Style::MuxLock => {
                if let (Some(Some(d)), Some(&t)) = (helpers.first(), target_ids.first()) {
                    if *d == t || tfo(t)[d.index()] {
                        out.push(DecoyInFanout {
                            instance: i,
                            decoy: inst.helpers[0].signal.clone(),
                            target: inst.targets[0].clone(),
                        });
                    }
                }
            }
            Style::PerturbRestore => {
                let c = inst.helpers.len();
                if c < limits.min_helpers || c > limits.max_helpers {
                    out.push(HelperCount {
                        instance: i,
                        style: inst.style,
                        count: c,
                        min: limits.min_helpers,
                        max: limits.max_helpers,
                    });
                }
                let t = target_ids[0];
                let cone = tfo(t);
                for (h, id) in inst.helpers.iter().zip(&helpers) {
                    if let Some(id) = id {
                        if cone[id.index()] {
                            out.push(HelperInFanout {
                                instance: i,
                                helper: h.signal.clone(),
                                target: inst.targets[0].clone(),
                            });
                        }
                    }
                }
            }
            Style::PairwiseSubgraph if target_ids.len() == 2 => {
                let (a, b) = (target_ids[0], target_ids[1]);
                for (x, y, xs, ys) in [
                    (a, b, &inst.targets[0], &inst.targets[1]),
                    (b, a, &inst.targets[1], &inst.targets[0]),
                ] {
                    if x == y || tfo(x)[y.index()] {
                        out.push(PairwiseReachable {
                            instance: i,
                            from: xs.clone(),
                            to: ys.clone(),
                        });
                    }
                }
            }
            _ => {}
        }
    }

    if out.is_empty() {
        // per-instance rules cannot see cycles that span instances
        let raw = crate::compile::lock_raw(n, plan);
        if let Err(vs) = netlist::validate(&raw) {
            for v in vs {
                if let Violation::Cycle { signals } = v {
                    out.push(CombinedCycle { signals });
                }
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
