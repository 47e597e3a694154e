// SPDX-License-Identifier: Apache-2.0

//! SAT-based analysis of locked netlists: equivalence checking, the
//! oracle-guided distinguishing-input attack, brute-force key enumeration
//! and remaining-key counting.

mod cnf;
mod solver;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{bind_key, BindError, KeyVector, Netlist};
use crate::sim::{self, evaluate, evaluate_scalar, KeyAssignment, PatternBlock, SimError};

pub use cnf::{encode_cnf, ClauseSink, CnfFormula, Encoder};
pub use solver::{Cadical, SatBackend, SolveResult};

pub const DEFAULT_DIP_BUDGET: usize = 10_000;
pub const DEFAULT_TIME_BUDGET_S: f64 = 600.0;
pub const DEFAULT_COUNT_CAP: u64 = 65_536;
/// Widest key [`enumerate_keys`] accepts.
pub const ENUMERATION_MAX_WIDTH: usize = 20;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("netlist has no key inputs")]
    NotLocked,
    #[error("key width {width} exceeds the enumeration limit {max}")]
    KeyWidthGuard { width: usize, max: usize },
    #[error("interfaces differ: {0}")]
    Interface(String),
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("recovered key {0} is not equivalent to the oracle (encoder bug)")]
    VerificationFailed(KeyVector),
    #[error("no key reproduces the oracle responses")]
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CecResult {
    Equivalent,
    /// Input vector, ordered like the first netlist's primary inputs.
    Counterexample(Vec<bool>),
}

impl CecResult {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, CecResult::Equivalent)
    }
}

/// Maps `b`'s primary inputs onto `a`'s by name.
fn input_permutation(a: &Netlist, b: &Netlist) -> Result<Vec<usize>, AttackError> {
    if a.is_locked() || b.is_locked() {
        return Err(AttackError::Interface(
            "both netlists must be key-free".into(),
        ));
    }
    if a.primary_inputs().len() != b.primary_inputs().len() {
        return Err(AttackError::Interface(format!(
            "{} vs {} primary inputs",
            a.primary_inputs().len(),
            b.primary_inputs().len()
        )));
    }
    if a.primary_outputs().len() != b.primary_outputs().len() {
        return Err(AttackError::Interface(format!(
            "{} vs {} primary outputs",
            a.primary_outputs().len(),
            b.primary_outputs().len()
        )));
    }
    let pos: HashMap<&str, usize> = a
        .primary_inputs()
        .iter()
        .enumerate()
        .map(|(i, &s)| (a.signal_name(s), i))
        .collect();
    b.primary_inputs()
        .iter()
        .map(|&s| {
            pos.get(b.signal_name(s)).copied().ok_or_else(|| {
                AttackError::Interface(format!("input `{}` missing", b.signal_name(s)))
            })
        })
        .collect()
}

/// Miter-based equivalence check of two key-free netlists. Inputs are
/// matched by name, outputs by position.
pub fn cec_check(a: &Netlist, b: &Netlist) -> Result<CecResult, AttackError> {
    Ok(cec_until(a, b, None)?.expect("no deadline"))
}

/// `None` when the deadline interrupts the solver.
fn cec_until(
    a: &Netlist,
    b: &Netlist,
    deadline: Option<Instant>,
) -> Result<Option<CecResult>, AttackError> {
    let perm = input_permutation(a, b)?;
    let mut s = Cadical::new(deadline);
    let mut e = Encoder::new(&mut s);
    let x: Vec<i32> = a.primary_inputs().iter().map(|_| s.new_var()).collect();
    let xb: Vec<i32> = perm.iter().map(|&i| x[i]).collect();
    let oa = e.encode_outputs(&mut s, a, &x, &[]);
    let ob = e.encode_outputs(&mut s, b, &xb, &[]);
    let diffs: Vec<i32> = oa
        .iter()
        .zip(&ob)
        .map(|(&p, &q)| e.xor(&mut s, p, q))
        .collect();
    let m = e.or_all(&mut s, &diffs);
    if e.const_value(m) == Some(false) {
        return Ok(Some(CecResult::Equivalent));
    }
    Ok(match s.solve(&[m]) {
        SolveResult::Unsat => Some(CecResult::Equivalent),
        SolveResult::Sat => Some(CecResult::Counterexample(
            x.iter().map(|&v| s.value(v)).collect(),
        )),
        SolveResult::Interrupted => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackBudget {
    pub dip_budget: usize,
    pub time_budget_s: f64,
    /// Model-count cap for the remaining key space.
    pub count_cap: u64,
}

impl Default for AttackBudget {
    fn default() -> Self {
        Self {
            dip_budget: DEFAULT_DIP_BUDGET,
            time_budget_s: DEFAULT_TIME_BUDGET_S,
            count_cap: DEFAULT_COUNT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackOutcome {
    KeyRecovered,
    BudgetExhausted,
    Timeout,
}

impl AttackOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackOutcome::KeyRecovered => "key_recovered",
            AttackOutcome::BudgetExhausted => "budget_exhausted",
            AttackOutcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainingKeys {
    Exact(u64),
    /// Enumeration stopped at the cap (or the deadline) with this many keys.
    AtLeast(u64),
}

impl RemainingKeys {
    pub fn lower_bound(self) -> u64 {
        match self {
            RemainingKeys::Exact(n) | RemainingKeys::AtLeast(n) => n,
        }
    }
}

impl std::fmt::Display for RemainingKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RemainingKeys::Exact(n) => write!(f, "{n}"),
            RemainingKeys::AtLeast(n) => write!(f, ">={n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub outcome: AttackOutcome,
    pub recovered_key: Option<KeyVector>,
    pub dip_count: usize,
    /// Distinguishing inputs as bit strings over the primary inputs.
    pub dips: Vec<String>,
    /// Oracle output for each DIP.
    pub responses: Vec<String>,
    pub solver_time_s: f64,
    pub remaining_keys: RemainingKeys,
    pub budget: AttackBudget,
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn bits_from_str(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

fn fix_outputs<S: ClauseSink>(s: &mut S, e: &Encoder, outs: &[i32], want: &[bool]) {
    for (&o, &y) in outs.iter().zip(want) {
        match e.const_value(o) {
            Some(v) if v == y => {}
            Some(_) => s.add_clause(&[]),
            None => s.add_clause(&[if y { o } else { -o }]),
        }
    }
}

/// Oracle-guided DIP attack on `locked`, with `oracle` (the key-free
/// original) answering queries by simulation.
///
/// Every recovered key is checked with [`cec_check`]; a failing check is
/// returned as [`AttackError::VerificationFailed`].
pub fn dip_attack(
    locked: &Netlist,
    oracle: &Netlist,
    budget: &AttackBudget,
) -> Result<AttackReport, AttackError> {
    if !locked.is_locked() {
        return Err(AttackError::NotLocked);
    }
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(budget.time_budget_s.max(0.0));
    // queries are issued in the locked netlist's input order
    let oracle_view = reorder_inputs(oracle, locked)?;
    if locked.primary_outputs().len() != oracle.primary_outputs().len() {
        return Err(AttackError::Interface("output counts differ".into()));
    }

    let kw = locked.key_inputs().len();
    let mut s = Cadical::new(Some(deadline));
    let mut e = Encoder::new(&mut s);
    let x: Vec<i32> = locked
        .primary_inputs()
        .iter()
        .map(|_| s.new_var())
        .collect();
    let k1: Vec<i32> = (0..kw).map(|_| s.new_var()).collect();
    let k2: Vec<i32> = (0..kw).map(|_| s.new_var()).collect();
    let o1 = e.encode_outputs(&mut s, locked, &x, &k1);
    let o2 = e.encode_outputs(&mut s, locked, &x, &k2);
    let diffs: Vec<i32> = o1
        .iter()
        .zip(&o2)
        .map(|(&a, &b)| e.xor(&mut s, a, b))
        .collect();
    let miter = e.or_all(&mut s, &diffs);

    let mut dips: Vec<Vec<bool>> = Vec::new();
    let mut responses: Vec<Vec<bool>> = Vec::new();
    let mut recovered = None;
    let outcome = loop {
        let r = if e.const_value(miter) == Some(false) {
            SolveResult::Unsat
        } else {
            s.solve(&[miter])
        };
        match r {
            SolveResult::Sat => {
                if dips.len() >= budget.dip_budget {
                    break AttackOutcome::BudgetExhausted;
                }
                let dip: Vec<bool> = x.iter().map(|&v| s.value(v)).collect();
                let y = evaluate_scalar(&oracle_view, &dip, None)?;
                let consts: Vec<i32> = dip.iter().map(|&b| e.constant(b)).collect();
                for keys in [&k1, &k2] {
                    let outs = e.encode_outputs(&mut s, locked, &consts, keys);
                    fix_outputs(&mut s, &e, &outs, &y);
                }
                dips.push(dip);
                responses.push(y);
            }
            SolveResult::Unsat => match s.solve(&[]) {
                SolveResult::Sat => {
                    let key = KeyVector::new(k1.iter().map(|&v| s.value(v)).collect());
                    let bound = bind_key(locked, &key)?;
                    match cec_until(&bound, oracle, Some(deadline))? {
                        Some(CecResult::Equivalent) => {
                            recovered = Some(key);
                            break AttackOutcome::KeyRecovered;
                        }
                        Some(CecResult::Counterexample(_)) => {
                            return Err(AttackError::VerificationFailed(key))
                        }
                        None => break AttackOutcome::Timeout,
                    }
                }
                SolveResult::Unsat => return Err(AttackError::Inconsistent),
                SolveResult::Interrupted => break AttackOutcome::Timeout,
            },
            SolveResult::Interrupted => break AttackOutcome::Timeout,
        }
    };
    let solver_time_s = start.elapsed().as_secs_f64();

    let constraints = attack_constraints(locked, &dips, &responses);
    let count_deadline = Instant::now() + Duration::from_secs_f64(budget.time_budget_s.max(0.0));
    let remaining_keys = count_remaining_keys(&constraints, budget.count_cap, Some(count_deadline));

    Ok(AttackReport {
        outcome,
        recovered_key: recovered,
        dip_count: dips.len(),
        dips: dips.iter().map(|d| bits_to_string(d)).collect(),
        responses: responses.iter().map(|r| bits_to_string(r)).collect(),
        solver_time_s,
        remaining_keys,
        budget: *budget,
    })
}

/// Single-copy key constraints implied by a set of oracle observations:
/// `locked(dip, K) = response` for each pair. `key_lits[0]` holds `K`.
pub fn attack_constraints(
    locked: &Netlist,
    dips: &[Vec<bool>],
    responses: &[Vec<bool>],
) -> CnfFormula {
    let mut f = CnfFormula::new();
    let mut e = Encoder::new(&mut f);
    let keys: Vec<i32> = locked.key_inputs().iter().map(|_| f.new_var()).collect();
    for (dip, y) in dips.iter().zip(responses) {
        let consts: Vec<i32> = dip.iter().map(|&b| e.constant(b)).collect();
        let outs = e.encode_outputs(&mut f, locked, &consts, &keys);
        fix_outputs(&mut f, &e, &outs, y);
    }
    f.key_lits.push(keys);
    f
}

/// Counts assignments to `f.key_lits[0]` that satisfy `f`, by enumeration
/// with blocking clauses, stopping at `cap`.
pub fn count_remaining_keys(f: &CnfFormula, cap: u64, deadline: Option<Instant>) -> RemainingKeys {
    let keys = f.key_lits.first().cloned().unwrap_or_default();
    let mut s = Cadical::new(deadline);
    f.load_into(&mut s);
    let mut count = 0u64;
    loop {
        match s.solve(&[]) {
            SolveResult::Unsat => return RemainingKeys::Exact(count),
            SolveResult::Interrupted => return RemainingKeys::AtLeast(count),
            SolveResult::Sat => {
                if count == cap {
                    return RemainingKeys::AtLeast(cap);
                }
                count += 1;
                if keys.is_empty() {
                    return RemainingKeys::Exact(1);
                }
                let block: Vec<i32> = keys
                    .iter()
                    .map(|&k| if s.value(k) { -k } else { k })
                    .collect();
                s.add_clause(&block);
            }
        }
    }
}

/// Every key under which `locked` computes the oracle's function, in
/// ascending numeric order (bit 0 least significant).
pub fn enumerate_keys(locked: &Netlist, oracle: &Netlist) -> Result<Vec<KeyVector>, AttackError> {
    let w = locked.key_inputs().len();
    if w == 0 {
        return Err(AttackError::NotLocked);
    }
    if w > ENUMERATION_MAX_WIDTH {
        return Err(AttackError::KeyWidthGuard {
            width: w,
            max: ENUMERATION_MAX_WIDTH,
        });
    }
    let ni = locked.primary_inputs().len();
    let (inputs, exhaustive) = if ni <= sim::EXHAUSTIVE_INPUT_LIMIT {
        (PatternBlock::<u64>::exhaustive(ni), true)
    } else {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        (
            PatternBlock::random(ni, sim::DEFAULT_CORRECT_KEY_PATTERNS, &mut rng),
            false,
        )
    };
    let oracle_view = reorder_inputs(oracle, locked)?;
    let want = evaluate(&oracle_view, &inputs, KeyAssignment::None)?;
    let mut class = Vec::new();
    for v in 0..(1u64 << w) {
        let key = KeyVector::from_u64(v, w);
        let got = evaluate(locked, &inputs, KeyAssignment::Fixed(&key))?;
        let agrees = (0..want.rows()).all(|r| {
            (0..inputs.words_per_row())
                .all(|i| (want.row(r)[i] ^ got.row(r)[i]) & inputs.lane_mask(i) == 0)
        });
        if !agrees {
            continue;
        }
        if exhaustive || cec_check(&bind_key(locked, &key)?, oracle)?.is_equivalent() {
            class.push(key);
        }
    }
    Ok(class)
}

/// `oracle` with its primary inputs listed in `locked`'s order.
fn reorder_inputs(oracle: &Netlist, locked: &Netlist) -> Result<Netlist, AttackError> {
    let mut raw = oracle.to_raw();
    raw.primary_inputs = locked
        .primary_inputs()
        .iter()
        .map(|&s| locked.signal_name(s).to_string())
        .collect();
    let mut want = raw.primary_inputs.clone();
    let mut have = oracle.to_raw().primary_inputs;
    want.sort();
    have.sort();
    if want != have || oracle.is_locked() {
        return Err(AttackError::Interface("primary inputs differ".into()));
    }
    Netlist::from_raw(raw).map_err(|e| AttackError::Interface(e.to_string()))
}
