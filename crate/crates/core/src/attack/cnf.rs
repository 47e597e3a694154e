// SPDX-License-Identifier: Apache-2.0

//! CNF construction.
//!
//! [`encode_cnf`] is the plain per-gate Tseitin encoding, one variable per
//! signal. [`Encoder`] is the structurally hashed AND/XOR builder used by the
//! attack and equivalence checker: it folds constants, shares identical
//! nodes, and so partially evaluates circuit copies whose inputs are fixed.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::netlist::{GateKind, Netlist};

/// Anything that accepts fresh variables and clauses (DIMACS literals).
pub trait ClauseSink {
    fn new_var(&mut self) -> i32;
    fn add_clause(&mut self, lits: &[i32]);
}

/// Clause list with per-copy signal and key variable maps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: i32,
    clauses: Vec<Vec<i32>>,
    /// Literal of every signal, per circuit copy (empty for formulas built
    /// without a signal map).
    pub signal_lits: Vec<Vec<i32>>,
    /// Key-input literals per copy.
    pub key_lits: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars as usize
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// Replays every clause into `sink`, whose variable numbering must start
    /// empty.
    pub fn load_into<S: ClauseSink>(&self, sink: &mut S) {
        for _ in 0..self.num_vars {
            sink.new_var();
        }
        for c in &self.clauses {
            sink.add_clause(c);
        }
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{l} ");
            }
            s.push_str("0\n");
        }
        s
    }
}

impl ClauseSink for CnfFormula {
    fn new_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars
    }

    fn add_clause(&mut self, lits: &[i32]) {
        self.clauses.push(lits.to_vec());
    }
}

/// Textbook Tseitin encoding of `copies` instances of `n`. With
/// `shared_inputs`, primary-input variables are common to all copies; key
/// variables are always per copy.
pub fn encode_cnf(n: &Netlist, copies: usize, shared_inputs: bool) -> CnfFormula {
    let mut f = CnfFormula::new();
    let mut shared: Vec<i32> = Vec::new();
    if shared_inputs {
        shared = n.primary_inputs().iter().map(|_| f.new_var()).collect();
    }
    for _ in 0..copies {
        let mut lits = vec![0i32; n.num_signals()];
        for (i, &pi) in n.primary_inputs().iter().enumerate() {
            lits[pi.index()] = if shared_inputs {
                shared[i]
            } else {
                f.new_var()
            };
        }
        let mut keys = Vec::with_capacity(n.key_inputs().len());
        for &k in n.key_inputs() {
            let v = f.new_var();
            lits[k.index()] = v;
            keys.push(v);
        }
        for g in n.gates() {
            let y = f.new_var();
            lits[g.output.index()] = y;
            let ins: Vec<i32> = g.fanin.iter().map(|x| lits[x.index()]).collect();
            tseitin(&mut f, g.kind, &ins, y);
        }
        f.signal_lits.push(lits);
        f.key_lits.push(keys);
    }
    f
}

fn tseitin<S: ClauseSink>(s: &mut S, kind: GateKind, ins: &[i32], y: i32) {
    match kind {
        GateKind::And | GateKind::Nand => {
            let y = if kind == GateKind::Nand { -y } else { y };
            let mut big: Vec<i32> = ins.iter().map(|&a| -a).collect();
            big.push(y);
            s.add_clause(&big);
            for &a in ins {
                s.add_clause(&[a, -y]);
            }
        }
        GateKind::Or | GateKind::Nor => {
            let y = if kind == GateKind::Nor { -y } else { y };
            let mut big: Vec<i32> = ins.to_vec();
            big.push(-y);
            s.add_clause(&big);
            for &a in ins {
                s.add_clause(&[-a, y]);
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            // chain through auxiliaries for more than two inputs
            let mut acc = ins[0];
            for (i, &b) in ins[1..].iter().enumerate() {
                let last = i + 2 == ins.len();
                let z = if last {
                    if kind == GateKind::Xnor {
                        -y
                    } else {
                        y
                    }
                } else {
                    s.new_var()
                };
                xor_clauses(s, acc, b, z);
                acc = z;
            }
        }
        GateKind::Not => {
            s.add_clause(&[ins[0], y]);
            s.add_clause(&[-ins[0], -y]);
        }
        GateKind::Buff => {
            s.add_clause(&[-ins[0], y]);
            s.add_clause(&[ins[0], -y]);
        }
    }
}

fn xor_clauses<S: ClauseSink>(s: &mut S, a: i32, b: i32, y: i32) {
    s.add_clause(&[-a, -b, -y]);
    s.add_clause(&[a, b, -y]);
    s.add_clause(&[a, -b, y]);
    s.add_clause(&[-a, b, y]);
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Xor,
}

/// Structurally hashed two-input AND/XOR construction over literals, with
/// a constant-true literal.
pub struct Encoder {
    t: i32,
    table: HashMap<(Op, i32, i32), i32>,
}

impl Encoder {
    pub fn new<S: ClauseSink>(sink: &mut S) -> Self {
        let t = sink.new_var();
        sink.add_clause(&[t]);
        Self {
            t,
            table: HashMap::new(),
        }
    }

    pub fn constant(&self, b: bool) -> i32 {
        if b {
            self.t
        } else {
            -self.t
        }
    }

    /// `Some(value)` when `l` is a constant literal.
    pub fn const_value(&self, l: i32) -> Option<bool> {
        if l == self.t {
            Some(true)
        } else if l == -self.t {
            Some(false)
        } else {
            None
        }
    }

    pub fn and<S: ClauseSink>(&mut self, s: &mut S, a: i32, b: i32) -> i32 {
        let (t, f) = (self.t, -self.t);
        if a == f || b == f || a == -b {
            return f;
        }
        if a == t || a == b {
            return b;
        }
        if b == t {
            return a;
        }
        let key = (Op::And, a.min(b), a.max(b));
        if let Some(&y) = self.table.get(&key) {
            return y;
        }
        let y = s.new_var();
        s.add_clause(&[-y, a]);
        s.add_clause(&[-y, b]);
        s.add_clause(&[y, -a, -b]);
        self.table.insert(key, y);
        y
    }

    pub fn or<S: ClauseSink>(&mut self, s: &mut S, a: i32, b: i32) -> i32 {
        -self.and(s, -a, -b)
    }

    pub fn xor<S: ClauseSink>(&mut self, s: &mut S, a: i32, b: i32) -> i32 {
        let t = self.t;
        if a == b {
            return -t;
        }
        if a == -b {
            return t;
        }
        if a.abs() == t {
            return if a == t { -b } else { b };
        }
        if b.abs() == t {
            return if b == t { -a } else { a };
        }
        let negate = (a < 0) != (b < 0);
        let (a, b) = (a.abs(), b.abs());
        let key = (Op::Xor, a.min(b), a.max(b));
        let y = match self.table.get(&key) {
            Some(&y) => y,
            None => {
                let y = s.new_var();
                xor_clauses(s, a, b, y);
                self.table.insert(key, y);
                y
            }
        };
        if negate {
            -y
        } else {
            y
        }
    }

    /// OR of all literals (false for none).
    pub fn or_all<S: ClauseSink>(&mut self, s: &mut S, lits: &[i32]) -> i32 {
        let mut acc = self.constant(false);
        for &l in lits {
            acc = self.or(s, acc, l);
        }
        acc
    }

    /// Encodes one copy of `n` over the given input and key literals and
    /// returns the literal of every signal.
    pub fn encode_netlist<S: ClauseSink>(
        &mut self,
        s: &mut S,
        n: &Netlist,
        inputs: &[i32],
        keys: &[i32],
    ) -> Vec<i32> {
        let mut lits = vec![0i32; n.num_signals()];
        for (&pi, &l) in n.primary_inputs().iter().zip(inputs) {
            lits[pi.index()] = l;
        }
        for (&k, &l) in n.key_inputs().iter().zip(keys) {
            lits[k.index()] = l;
        }
        for g in n.gates() {
            let mut ins = g.fanin.iter().map(|f| lits[f.index()]);
            let first = ins.next().expect("gates have fanin");
            let y = match g.kind {
                GateKind::And | GateKind::Nand => {
                    let v = ins.fold(first, |acc, x| self.and(s, acc, x));
                    if g.kind == GateKind::Nand {
                        -v
                    } else {
                        v
                    }
                }
                GateKind::Or | GateKind::Nor => {
                    let v = ins.fold(first, |acc, x| self.or(s, acc, x));
                    if g.kind == GateKind::Nor {
                        -v
                    } else {
                        v
                    }
                }
                GateKind::Xor | GateKind::Xnor => {
                    let v = ins.fold(first, |acc, x| self.xor(s, acc, x));
                    if g.kind == GateKind::Xnor {
                        -v
                    } else {
                        v
                    }
                }
                GateKind::Not => -first,
                GateKind::Buff => first,
            };
            lits[g.output.index()] = y;
        }
        lits
    }

    /// Output literals of one copy of `n`.
    pub fn encode_outputs<S: ClauseSink>(
        &mut self,
        s: &mut S,
        n: &Netlist,
        inputs: &[i32],
        keys: &[i32],
    ) -> Vec<i32> {
        let lits = self.encode_netlist(s, n, inputs, keys);
        n.primary_outputs()
            .iter()
            .map(|o| lits[o.index()])
            .collect()
    }
}
