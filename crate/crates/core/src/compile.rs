// SPDX-License-Identifier: Apache-2.0

//! Lock-plan compilation into the 2-input gate basis.
//!
//! Each target keeps its name: its original driver is renamed to a fresh
//! `lk_` wire and the lock structure drives the target name, so every
//! former sink (output declarations included) reads the locked value.
//! Lock structures read the pre-lock wires of all targets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{key_input_name, GateKind, InvalidNetlist, Netlist, RawGate, RawNetlist};
use crate::plan::{
    join_violations, validate_plan, LockInstance, LockPlan, PlanLimits, PlanViolation, Style,
    RESERVED_PREFIX,
};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("plan rejected: {}", join_violations(.0))]
    Plan(Vec<PlanViolation>),
    #[error(transparent)]
    Invalid(#[from] InvalidNetlist),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadMetrics {
    pub gate_overhead_ratio: f64,
    pub key_gate_count: usize,
    pub key_input_count: usize,
}

pub fn overhead(original: &Netlist, locked: &Netlist) -> OverheadMetrics {
    let o = original.num_gates();
    let added = locked.num_gates().saturating_sub(o);
    OverheadMetrics {
        gate_overhead_ratio: if o == 0 { 0.0 } else { added as f64 / o as f64 },
        key_gate_count: added,
        key_input_count: locked.key_inputs().len(),
    }
}

/// Compiles `plan` into a locked copy of `n` carrying the plan's correct
/// key. The plan is re-validated first; helper-count policy is not enforced
/// here.
pub fn compile_plan(n: &Netlist, plan: &LockPlan) -> Result<Netlist, CompileError> {
    let limits = PlanLimits {
        min_helpers: 1,
        max_helpers: usize::MAX,
    };
    validate_plan(plan, n, &limits).map_err(CompileError::Plan)?;
    let mut raw = lock_raw(n, plan);
    raw.correct_key = Some(plan.correct_key());
    Ok(Netlist::from_raw(raw)?)
}

struct Builder {
    gates: Vec<RawGate>,
    next: usize,
}

impl Builder {
    fn fresh(&mut self) -> String {
        let s = format!("{RESERVED_PREFIX}{}", self.next);
        self.next += 1;
        s
    }

    fn gate(&mut self, out: Option<&str>, kind: GateKind, fanin: &[&str]) -> String {
        let out = match out {
            Some(o) => o.to_string(),
            None => self.fresh(),
        };
        self.gates.push(RawGate::new(out.clone(), kind, fanin));
        out
    }

    fn lit(&mut self, s: &str, positive: bool) -> String {
        if positive {
            s.to_string()
        } else {
            self.gate(None, GateKind::Not, &[s])
        }
    }

    /// Chain of 2-input ANDs; a single operand is returned as is.
    fn and_all(&mut self, xs: &[String]) -> String {
        let mut acc = xs[0].clone();
        for x in &xs[1..] {
            acc = self.gate(None, GateKind::And, &[&acc, x]);
        }
        acc
    }

    /// `sel ? b : a` as OR(AND(NOT sel, a), AND(sel, b)).
    fn mux(&mut self, out: &str, sel: &str, a: &str, b: &str) {
        let ns = self.gate(None, GateKind::Not, &[sel]);
        let ta = self.gate(None, GateKind::And, &[&ns, a]);
        let tb = self.gate(None, GateKind::And, &[sel, b]);
        self.gate(Some(out), GateKind::Or, &[&ta, &tb]);
    }
}

/// Applies the plan without validation or key metadata.
pub(crate) fn lock_raw(n: &Netlist, plan: &LockPlan) -> RawNetlist {
    let mut raw = n.to_raw();
    let mut b = Builder {
        gates: Vec::new(),
        next: 0,
    };

    let mut pre_lock: HashMap<String, String> = HashMap::new();
    for inst in &plan.instances {
        for t in &inst.targets {
            if !pre_lock.contains_key(t) {
                let fresh = b.fresh();
                pre_lock.insert(t.clone(), fresh);
            }
        }
    }
    for g in &mut raw.gates {
        if let Some(r) = pre_lock.get(&g.output) {
            g.output = r.clone();
        }
    }
    let pre = |s: &str| pre_lock.get(s).cloned().unwrap_or_else(|| s.to_string());

    raw.key_inputs = (0..plan.key_width).map(key_input_name).collect();
    for inst in &plan.instances {
        apply(&mut b, inst, &pre);
    }
    raw.gates.extend(b.gates);
    raw
}

/// Whether compiling `instances` into `n` would leave the netlist acyclic.
/// Works on signal ids without building the locked netlist; signals the
/// netlist does not have are ignored.
pub(crate) fn lock_is_acyclic(n: &Netlist, instances: &[LockInstance]) -> bool {
    let base = n.num_signals();
    let mut pre: HashMap<usize, usize> = HashMap::new();
    for inst in instances {
        for t in &inst.targets {
            if let Some(id) = n.signal(t) {
                let next = base + pre.len();
                pre.entry(id.index()).or_insert(next);
            }
        }
    }
    let nodes = base + pre.len();
    let mut succ: Vec<Vec<u32>> = vec![Vec::new(); nodes];
    let read = |s: usize| pre.get(&s).copied().unwrap_or(s);
    for g in n.gates() {
        let dst = read(g.output.index());
        for f in &g.fanin {
            succ[f.index()].push(dst as u32);
        }
    }
    for inst in instances {
        let ids: Vec<usize> = inst
            .targets
            .iter()
            .chain(inst.helpers.iter().map(|h| &h.signal))
            .filter_map(|s| n.signal(s).map(|id| id.index()))
            .collect();
        for t in inst.targets.iter().filter_map(|t| n.signal(t)) {
            for &s in &ids {
                succ[read(s)].push(t.index() as u32);
            }
        }
    }
    let mut indeg = vec![0u32; nodes];
    for out in &succ {
        for &v in out {
            indeg[v as usize] += 1;
        }
    }
    let mut queue: Vec<usize> = (0..nodes).filter(|&v| indeg[v] == 0).collect();
    let mut done = 0;
    while let Some(v) = queue.pop() {
        done += 1;
        for &w in &succ[v] {
            indeg[w as usize] -= 1;
            if indeg[w as usize] == 0 {
                queue.push(w as usize);
            }
        }
    }
    done == nodes
}

fn apply(b: &mut Builder, inst: &LockInstance, pre: &dyn Fn(&str) -> String) {
    let key = |i: usize| key_input_name(inst.key_bits[i]);
    match inst.style {
        Style::XorXnor => {
            let kind = if inst.correct_bits[0] {
                GateKind::Xnor
            } else {
                GateKind::Xor
            };
            let w = pre(&inst.targets[0]);
            b.gate(Some(&inst.targets[0]), kind, &[&w, &key(0)]);
        }
        Style::MuxLock => {
            let w = pre(&inst.targets[0]);
            let d = pre(&inst.helpers[0].signal);
            let (a, c) = if inst.correct_bits[0] {
                (&d, &w)
            } else {
                (&w, &d)
            };
            b.mux(&inst.targets[0], &key(0), a, c);
        }
        Style::PerturbRestore => {
            let lits: Vec<String> = inst
                .helpers
                .iter()
                .map(|h| b.lit(&pre(&h.signal), h.polarity))
                .collect();
            let p = b.and_all(&lits);
            let klits: Vec<String> = (0..inst.key_bits.len())
                .map(|i| b.lit(&key(i), inst.correct_bits[i]))
                .collect();
            let r = b.and_all(&klits);
            let nr = b.gate(None, GateKind::Not, &[&r]);
            let flip = b.gate(None, GateKind::And, &[&p, &nr]);
            let w = pre(&inst.targets[0]);
            b.gate(Some(&inst.targets[0]), GateKind::Xor, &[&w, &flip]);
        }
        Style::PairwiseSubgraph => {
            let (t1, t2) = (&inst.targets[0], &inst.targets[1]);
            let (w1, w2) = (pre(t1), pre(t2));
            let k = key(0);
            if inst.correct_bits[0] {
                b.mux(t1, &k, &w2, &w1);
                b.mux(t2, &k, &w1, &w2);
            } else {
                b.mux(t1, &k, &w1, &w2);
                b.mux(t2, &k, &w2, &w1);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{bind_key, parse_bench, KeyVector};
    use crate::plan::Helper;
    use crate::sim::{check_correct_key, evaluate_scalar};

    const C17: &str = include_str!("../../../benchmarks/iscas85/c17.bench");

    fn c17() -> Netlist {
        parse_bench("c17", C17).unwrap()
    }

    fn plan(instances: Vec<LockInstance>, width: usize) -> LockPlan {
        let mut p = LockPlan::new("c17", width, 1);
        p.instances = instances;
        p
    }

    #[test]
    fn two_xor_gates_on_c17() {
        let n = c17();
        let p = plan(
            vec![
                LockInstance::xor_xnor("11", 0, true),
                LockInstance::xor_xnor("16", 1, false),
            ],
            2,
        );
        let l = compile_plan(&n, &p).unwrap();
        assert_eq!(l.num_gates(), 8);
        assert_eq!(l.key_inputs().len(), 2);
        assert_eq!(l.correct_key().unwrap().to_string(), "10");
        assert!(check_correct_key(&n, &l, 0, 0).unwrap().matches);
        let m = overhead(&n, &l);
        assert_eq!(m.key_gate_count, 2);
        assert_eq!(m.gate_overhead_ratio, 2.0 / 6.0);
    }

    #[test]
    fn wrong_xor_key_inverts_the_wire() {
        let n = c17();
        let p = plan(vec![LockInstance::xor_xnor("22", 0, false)], 1);
        let l = compile_plan(&n, &p).unwrap();
        let wrong = KeyVector::parse("1").unwrap();
        for v in 0..32u32 {
            let ins: Vec<bool> = (0..5).map(|i| v >> i & 1 == 1).collect();
            let want = evaluate_scalar(&n, &ins, None).unwrap();
            let got = evaluate_scalar(&l, &ins, Some(&wrong)).unwrap();
            assert_eq!(got[0], !want[0]);
            assert_eq!(got[1], want[1]);
        }
    }

    #[test]
    fn mux_adds_four_gates_and_selects_decoy() {
        let n = c17();
        for c in [false, true] {
            let p = plan(vec![LockInstance::mux_lock("22", "19", 0, c)], 1);
            let l = compile_plan(&n, &p).unwrap();
            assert_eq!(overhead(&n, &l).key_gate_count, 4);
            assert!(check_correct_key(&n, &l, 0, 0).unwrap().matches);
            // wrong key routes 19 to output 22
            let wrong = KeyVector::new(vec![!c]);
            let id19 = n.signal("19").unwrap();
            for v in 0..32u32 {
                let ins: Vec<bool> = (0..5).map(|i| v >> i & 1 == 1).collect();
                let got = evaluate_scalar(&l, &ins, Some(&wrong)).unwrap();
                let probe = Netlist::from_raw(RawNetlist {
                    primary_outputs: vec![n.signal_name(id19).to_string()],
                    ..n.to_raw()
                })
                .unwrap();
                assert_eq!(got[0], evaluate_scalar(&probe, &ins, None).unwrap()[0]);
            }
        }
    }

    #[test]
    fn perturb_restore_transparency_and_corruption() {
        let n = c17();
        let p = plan(
            vec![LockInstance::perturb_restore(
                "16",
                vec![Helper::new("1", true), Helper::new("7", false)],
                vec![0, 1],
                vec![true, false],
            )],
            2,
        );
        let l = compile_plan(&n, &p).unwrap();
        let bound = bind_key(&l, l.correct_key().unwrap()).unwrap();
        assert!(check_correct_key(&n, &bound, 0, 0).unwrap().matches);
        // p = 1 & !7 fires on 8 of 32 patterns
        let wrong = KeyVector::parse("00").unwrap();
        let mut flips = 0;
        for v in 0..32u32 {
            let ins: Vec<bool> = (0..5).map(|i| v >> i & 1 == 1).collect();
            if evaluate_scalar(&l, &ins, Some(&wrong)).unwrap()
                != evaluate_scalar(&n, &ins, None).unwrap()
            {
                flips += 1;
            }
        }
        assert!(flips > 0 && flips <= 8);
    }

    #[test]
    fn pairwise_swaps_under_wrong_key() {
        let n = c17();
        for c in [false, true] {
            let p = plan(vec![LockInstance::pairwise("10", "19", 0, c)], 1);
            let l = compile_plan(&n, &p).unwrap();
            assert_eq!(overhead(&n, &l).key_gate_count, 8);
            assert!(check_correct_key(&n, &l, 0, 0).unwrap().matches);
            // structural swap of 10 and 19 in the original
            let mut swapped = n.to_raw();
            for g in &mut swapped.gates {
                for f in &mut g.fanin {
                    if f == "10" {
                        *f = "19".into();
                    } else if f == "19" {
                        *f = "10".into();
                    }
                }
            }
            let swapped = Netlist::from_raw(swapped).unwrap();
            let wrong = KeyVector::new(vec![!c]);
            for v in 0..32u32 {
                let ins: Vec<bool> = (0..5).map(|i| v >> i & 1 == 1).collect();
                assert_eq!(
                    evaluate_scalar(&l, &ins, Some(&wrong)).unwrap(),
                    evaluate_scalar(&swapped, &ins, None).unwrap()
                );
            }
        }
    }

    #[test]
    fn compile_is_deterministic() {
        let n = c17();
        let p = plan(vec![LockInstance::mux_lock("16", "10", 0, true)], 1);
        let a = crate::netlist::write_bench(&compile_plan(&n, &p).unwrap());
        let b = crate::netlist::write_bench(&compile_plan(&n, &p).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("# key=1\n"));
    }

    #[test]
    fn identical_netlists_have_zero_overhead() {
        let n = c17();
        let m = overhead(&n, &n);
        assert_eq!(
            (m.gate_overhead_ratio, m.key_gate_count, m.key_input_count),
            (0.0, 0, 0)
        );
    }
}
