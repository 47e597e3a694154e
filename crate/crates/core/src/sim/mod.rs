// SPDX-License-Identifier: Apache-2.0

//! Bit-parallel combinational simulation.
//!
//! Patterns are packed into machine words, one lane per pattern. The engine
//! is generic over the word type ([`LaneWord`]); the crate root exports the
//! 64-lane instantiation used by verification and the attack oracle.

mod lane;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateKind, KeyVector, Netlist, SignalId};

pub use lane::LaneWord;

/// Primary-input count up to which verification enumerates every pattern.
pub const EXHAUSTIVE_INPUT_LIMIT: usize = 12;
pub const DEFAULT_CORRECT_KEY_PATTERNS: usize = 4096;
pub const DEFAULT_CORRUPTION_INPUTS: usize = 256;
pub const DEFAULT_CORRUPTION_KEYS: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("pattern block has {got} rows but the netlist has {expected} primary inputs")]
    InputCount { expected: usize, got: usize },
    #[error("key has {got} bits but the netlist has {expected} key inputs")]
    KeyWidth { expected: usize, got: usize },
    #[error("key pattern block covers {got} patterns, input block {expected}")]
    PatternCount { expected: usize, got: usize },
    #[error("netlist has key inputs but no key was supplied")]
    MissingKey,
    #[error("interfaces differ: {0}")]
    InterfaceMismatch(String),
    #[error("locked netlist carries no correct key")]
    NoCorrectKey,
    #[error("netlist has no key inputs")]
    ZeroKeyWidth,
}

/// Row-major block of packed patterns: one row per signal, `words` lane
/// words per row, all rows equally long.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternBlock<W> {
    rows: usize,
    words: usize,
    patterns: usize,
    data: Vec<W>,
}

impl<W: LaneWord> PatternBlock<W> {
    pub fn zeros(rows: usize, patterns: usize) -> Self {
        let words = patterns.div_ceil(W::LANES).max(1);
        Self {
            rows,
            words,
            patterns,
            data: vec![W::zero(); rows * words],
        }
    }

    /// Block holding the given patterns; `patterns[p][r]` is row `r` of
    /// pattern `p`.
    pub fn from_patterns(rows: usize, patterns: &[Vec<bool>]) -> Self {
        let mut b = Self::zeros(rows, patterns.len());
        for (p, pat) in patterns.iter().enumerate() {
            assert_eq!(pat.len(), rows, "pattern {p} has the wrong width");
            for (r, &v) in pat.iter().enumerate() {
                b.set(r, p, v);
            }
        }
        b
    }

    /// All `2^rows` assignments; pattern `p` sets row `r` to bit `r` of `p`.
    pub fn exhaustive(rows: usize) -> Self {
        assert!(rows < 31, "exhaustive block over {rows} rows is too large");
        let n = 1usize << rows;
        let mut b = Self::zeros(rows, n);
        for r in 0..rows {
            for w in 0..b.words {
                let mut word = W::zero();
                for l in 0..W::LANES {
                    let p = w * W::LANES + l;
                    if p < n && (p >> r) & 1 == 1 {
                        word = word.with_lane(l, true);
                    }
                }
                b.data[r * b.words + w] = word;
            }
        }
        b
    }

    /// Uniformly random patterns.
    pub fn random<R: RngCore>(rows: usize, patterns: usize, rng: &mut R) -> Self {
        let mut b = Self::zeros(rows, patterns);
        let tail = W::low_mask(patterns - (b.words - 1) * W::LANES);
        for r in 0..rows {
            for w in 0..b.words {
                let lo = rng.next_u64();
                let hi = if W::LANES > 64 { rng.next_u64() } else { 0 };
                let mut word = W::from_random(lo, hi);
                if w + 1 == b.words {
                    word = word & tail;
                }
                b.data[r * b.words + w] = word;
            }
        }
        b
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    pub fn words_per_row(&self) -> usize {
        self.words
    }

    pub fn row(&self, r: usize) -> &[W] {
        &self.data[r * self.words..(r + 1) * self.words]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [W] {
        &mut self.data[r * self.words..(r + 1) * self.words]
    }

    pub fn get(&self, row: usize, pattern: usize) -> bool {
        self.data[row * self.words + pattern / W::LANES].lane(pattern % W::LANES)
    }

    pub fn set(&mut self, row: usize, pattern: usize, v: bool) {
        let i = row * self.words + pattern / W::LANES;
        self.data[i] = self.data[i].with_lane(pattern % W::LANES, v);
    }

    /// Column `p` as a bool vector over rows.
    pub fn pattern(&self, p: usize) -> Vec<bool> {
        (0..self.rows).map(|r| self.get(r, p)).collect()
    }

    /// Mask of valid lanes in word `w`.
    pub fn lane_mask(&self, w: usize) -> W {
        if w + 1 == self.words {
            W::low_mask(self.patterns - w * W::LANES)
        } else {
            W::max_value()
        }
    }
}

/// Key values for an evaluation.
#[derive(Debug, Clone, Copy)]
pub enum KeyAssignment<'a, W> {
    None,
    /// One key broadcast to every pattern.
    Fixed(&'a KeyVector),
    /// A key per pattern; rows are key bits.
    PerPattern(&'a PatternBlock<W>),
}

#[inline]
fn eval_word<W: LaneWord>(kind: GateKind, mut ins: impl Iterator<Item = W>) -> W {
    let first = ins.next().unwrap_or_else(W::zero);
    match kind {
        GateKind::And => ins.fold(first, |a, b| a & b),
        GateKind::Nand => !ins.fold(first, |a, b| a & b),
        GateKind::Or => ins.fold(first, |a, b| a | b),
        GateKind::Nor => !ins.fold(first, |a, b| a | b),
        GateKind::Xor => ins.fold(first, |a, b| a ^ b),
        GateKind::Xnor => !ins.fold(first, |a, b| a ^ b),
        GateKind::Not => !first,
        GateKind::Buff => first,
    }
}

/// Values of every signal (rows indexed by [`SignalId`]).
pub fn simulate_signals<W: LaneWord>(
    n: &Netlist,
    inputs: &PatternBlock<W>,
    key: KeyAssignment<'_, W>,
) -> Result<PatternBlock<W>, SimError> {
    if inputs.rows() != n.primary_inputs().len() {
        return Err(SimError::InputCount {
            expected: n.primary_inputs().len(),
            got: inputs.rows(),
        });
    }
    let nk = n.key_inputs().len();
    let mut vals = PatternBlock::<W>::zeros(n.num_signals(), inputs.patterns());
    for (r, &pi) in n.primary_inputs().iter().enumerate() {
        vals.row_mut(pi.index()).copy_from_slice(inputs.row(r));
    }
    match key {
        KeyAssignment::None if nk > 0 => return Err(SimError::MissingKey),
        KeyAssignment::None => {}
        KeyAssignment::Fixed(k) => {
            if k.width() != nk {
                return Err(SimError::KeyWidth {
                    expected: nk,
                    got: k.width(),
                });
            }
            for (i, &ki) in n.key_inputs().iter().enumerate() {
                vals.row_mut(ki.index()).fill(W::splat(k.bit(i)));
            }
        }
        KeyAssignment::PerPattern(kb) => {
            if kb.rows() != nk {
                return Err(SimError::KeyWidth {
                    expected: nk,
                    got: kb.rows(),
                });
            }
            if kb.patterns() != inputs.patterns() {
                return Err(SimError::PatternCount {
                    expected: inputs.patterns(),
                    got: kb.patterns(),
                });
            }
            for (i, &ki) in n.key_inputs().iter().enumerate() {
                vals.row_mut(ki.index()).copy_from_slice(kb.row(i));
            }
        }
    }
    let words = vals.words_per_row();
    for g in n.gates() {
        let out = g.output.index() * words;
        for w in 0..words {
            let v = eval_word(
                g.kind,
                g.fanin.iter().map(|f| vals.data[f.index() * words + w]),
            );
            vals.data[out + w] = v;
        }
    }
    Ok(vals)
}

/// Output values (rows follow the primary-output order).
pub fn evaluate<W: LaneWord>(
    n: &Netlist,
    inputs: &PatternBlock<W>,
    key: KeyAssignment<'_, W>,
) -> Result<PatternBlock<W>, SimError> {
    let vals = simulate_signals(n, inputs, key)?;
    let mut out = PatternBlock::zeros(n.primary_outputs().len(), inputs.patterns());
    for (r, &o) in n.primary_outputs().iter().enumerate() {
        out.row_mut(r).copy_from_slice(vals.row(o.index()));
    }
    Ok(out)
}

/// One pattern, evaluated by demand-driven recursion over gate drivers.
/// Kept separate from the word engine so each can check the other.
pub fn evaluate_scalar(
    n: &Netlist,
    inputs: &[bool],
    key: Option<&KeyVector>,
) -> Result<Vec<bool>, SimError> {
    if inputs.len() != n.primary_inputs().len() {
        return Err(SimError::InputCount {
            expected: n.primary_inputs().len(),
            got: inputs.len(),
        });
    }
    let mut memo: Vec<Option<bool>> = vec![None; n.num_signals()];
    for (&pi, &v) in n.primary_inputs().iter().zip(inputs) {
        memo[pi.index()] = Some(v);
    }
    match key {
        None if n.is_locked() => return Err(SimError::MissingKey),
        None => {}
        Some(k) => {
            if k.width() != n.key_inputs().len() {
                return Err(SimError::KeyWidth {
                    expected: n.key_inputs().len(),
                    got: k.width(),
                });
            }
            for (i, &ki) in n.key_inputs().iter().enumerate() {
                memo[ki.index()] = Some(k.bit(i));
            }
        }
    }
    fn value(n: &Netlist, s: SignalId, memo: &mut [Option<bool>]) -> bool {
        if let Some(v) = memo[s.index()] {
            return v;
        }
        // explicit stack: deep netlists overflow naive recursion
        let mut stack = vec![s];
        while let Some(&top) = stack.last() {
            if memo[top.index()].is_some() {
                stack.pop();
                continue;
            }
            let g = &n.gates()[n.driver(top).expect("non-input signal has a driver")];
            let pending: Vec<SignalId> = g
                .fanin
                .iter()
                .copied()
                .filter(|f| memo[f.index()].is_none())
                .collect();
            if pending.is_empty() {
                let v = g
                    .kind
                    .eval(g.fanin.iter().map(|f| memo[f.index()].unwrap()));
                memo[top.index()] = Some(v);
                stack.pop();
            } else {
                stack.extend(pending);
            }
        }
        memo[s.index()].unwrap()
    }
    Ok(n.primary_outputs()
        .iter()
        .map(|&o| value(n, o, &mut memo))
        .collect())
}

fn check_interface(orig: &Netlist, locked: &Netlist) -> Result<(), SimError> {
    let names = |n: &Netlist, ids: &[SignalId]| -> Vec<String> {
        ids.iter().map(|&i| n.signal_name(i).to_string()).collect()
    };
    if names(orig, orig.primary_inputs()) != names(locked, locked.primary_inputs()) {
        return Err(SimError::InterfaceMismatch("primary inputs differ".into()));
    }
    if orig.primary_outputs().len() != locked.primary_outputs().len() {
        return Err(SimError::InterfaceMismatch(format!(
            "{} vs {} primary outputs",
            orig.primary_outputs().len(),
            locked.primary_outputs().len()
        )));
    }
    if orig.is_locked() {
        return Err(SimError::InterfaceMismatch(
            "reference netlist has key inputs".into(),
        ));
    }
    Ok(())
}

/// Input patterns used by verification: exhaustive up to
/// [`EXHAUSTIVE_INPUT_LIMIT`] inputs, otherwise `count` seeded random vectors.
pub fn verification_patterns(
    n_inputs: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> (PatternBlock<u64>, bool) {
    if n_inputs <= EXHAUSTIVE_INPUT_LIMIT {
        (PatternBlock::exhaustive(n_inputs), true)
    } else {
        (PatternBlock::random(n_inputs, count.max(1), rng), false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyCheck {
    pub matches: bool,
    /// Patterns with at least one differing output.
    pub mismatches: usize,
    pub patterns: usize,
    pub exhaustive: bool,
}

/// Simulates `locked` under its stored correct key against `orig`.
pub fn check_correct_key(
    orig: &Netlist,
    locked: &Netlist,
    patterns: usize,
    seed: u64,
) -> Result<KeyCheck, SimError> {
    check_interface(orig, locked)?;
    let key = match locked.correct_key() {
        Some(k) => k.clone(),
        None if !locked.is_locked() => KeyVector::default(),
        None => return Err(SimError::NoCorrectKey),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (inputs, exhaustive) =
        verification_patterns(orig.primary_inputs().len(), patterns, &mut rng);
    let want = evaluate(orig, &inputs, KeyAssignment::None)?;
    let got = evaluate(locked, &inputs, KeyAssignment::Fixed(&key))?;
    let mut mismatches = 0usize;
    for w in 0..inputs.words_per_row() {
        let mut diff = 0u64;
        for r in 0..want.rows() {
            diff |= want.row(r)[w] ^ got.row(r)[w];
        }
        mismatches += (diff & inputs.lane_mask(w)).count_ones() as usize;
    }
    Ok(KeyCheck {
        matches: mismatches == 0,
        mismatches,
        patterns: inputs.patterns(),
        exhaustive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionEstimate {
    /// Mismatched output bits / (outputs × input samples × key samples).
    pub bit_error_rate: f64,
    /// Fraction of (input, key) samples with at least one wrong output.
    pub pattern_error_rate: f64,
    pub samples_inputs: usize,
    pub samples_keys: usize,
    pub exhaustive_inputs: bool,
    pub seed: u64,
}

/// Uniform key of `width` bits different from `avoid`.
fn draw_wrong_key(rng: &mut ChaCha8Rng, avoid: &KeyVector) -> KeyVector {
    loop {
        let k = KeyVector::new((0..avoid.width()).map(|_| rng.random::<bool>()).collect());
        if &k != avoid {
            return k;
        }
    }
}

/// Output mismatch of `locked` under random wrong keys relative to `orig`.
pub fn measure_corruption(
    orig: &Netlist,
    locked: &Netlist,
    n_inputs: usize,
    n_keys: usize,
    seed: u64,
) -> Result<CorruptionEstimate, SimError> {
    check_interface(orig, locked)?;
    if !locked.is_locked() {
        return Err(SimError::ZeroKeyWidth);
    }
    let correct = locked.correct_key().ok_or(SimError::NoCorrectKey)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (inputs, exhaustive) =
        verification_patterns(orig.primary_inputs().len(), n_inputs, &mut rng);
    let keys: Vec<KeyVector> = (0..n_keys.max(1))
        .map(|_| draw_wrong_key(&mut rng, correct))
        .collect();
    let want = evaluate(orig, &inputs, KeyAssignment::None)?;
    let mut bit_errors = 0u64;
    let mut pattern_errors = 0u64;
    for k in &keys {
        let got = evaluate(locked, &inputs, KeyAssignment::Fixed(k))?;
        for w in 0..inputs.words_per_row() {
            let mask = inputs.lane_mask(w);
            let mut any = 0u64;
            for r in 0..want.rows() {
                let d = (want.row(r)[w] ^ got.row(r)[w]) & mask;
                bit_errors += d.count_ones() as u64;
                any |= d;
            }
            pattern_errors += any.count_ones() as u64;
        }
    }
    let samples = (inputs.patterns() * keys.len()) as f64;
    let outputs = orig.primary_outputs().len().max(1) as f64;
    Ok(CorruptionEstimate {
        bit_error_rate: bit_errors as f64 / (samples * outputs),
        pattern_error_rate: pattern_errors as f64 / samples,
        samples_inputs: inputs.patterns(),
        samples_keys: keys.len(),
        exhaustive_inputs: exhaustive,
        seed,
    })
}
