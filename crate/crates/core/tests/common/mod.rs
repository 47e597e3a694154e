// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use std::path::PathBuf;

use lockforge::analysis::{compute_features, rank_nodes, RankedSites};
use lockforge::netlist::{GateKind, Netlist, RawGate, RawNetlist};
use lockforge::plan::LockPlan;
use lockforge::planner::{heuristic_plan, StylePolicy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ISCAS85: [&str; 8] = [
    "c432", "c499", "c880", "c1355", "c1908", "c3540", "c5315", "c7552",
];

pub fn bench_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../benchmarks/iscas85")
        .join(format!("{name}.bench"))
}

/// Random combinational circuit: every gate reads earlier signals, and
/// every gate without sinks is an output (plus a few internal taps).
pub fn random_circuit(seed: u64, max_inputs: usize, max_gates: usize) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = rng.random_range(2..=max_inputs.max(2));
    let n_gates = rng.random_range(1..=max_gates.max(1));
    let mut raw = RawNetlist {
        name: format!("rand{seed}"),
        ..RawNetlist::default()
    };
    let mut signals: Vec<String> = (0..n_in).map(|i| format!("i{i}")).collect();
    raw.primary_inputs = signals.clone();
    let mut used = vec![false; n_in + n_gates];
    for g in 0..n_gates {
        let kind = GateKind::ALL[rng.random_range(0..GateKind::ALL.len())];
        let arity = match kind {
            GateKind::Not | GateKind::Buff => 1,
            GateKind::Xor | GateKind::Xnor => 2,
            _ => rng.random_range(2..=3),
        };
        let mut fanin = Vec::new();
        for _ in 0..arity {
            // bias towards recent signals so circuits get some depth
            let lo = signals.len().saturating_sub(6);
            let j = if rng.random_bool(0.6) {
                rng.random_range(lo..signals.len())
            } else {
                rng.random_range(0..signals.len())
            };
            used[j] = true;
            fanin.push(signals[j].clone());
        }
        let name = format!("g{g}");
        raw.gates.push(RawGate {
            output: name.clone(),
            kind,
            fanin,
        });
        signals.push(name);
    }
    for (j, s) in signals.iter().enumerate().skip(n_in) {
        if !used[j] || rng.random_bool(0.1) {
            raw.primary_outputs.push(s.clone());
        }
    }
    Netlist::from_raw(raw).expect("generated circuits are valid")
}

pub fn ranked(n: &Netlist) -> RankedSites {
    rank_nodes(n, &compute_features(n))
}

/// Heuristic plan over a shuffled ranking, with a random style policy and
/// key width; `None` when the circuit has too few legal sites.
pub fn random_plan(n: &Netlist, seed: u64, max_width: usize) -> Option<LockPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A);
    let mut r = ranked(n);
    r.entries.shuffle(&mut rng);
    let policy = StylePolicy::ALL[rng.random_range(0..StylePolicy::ALL.len())];
    let width = rng.random_range(1..=max_width.max(1));
    heuristic_plan(n, &r, width, policy, seed).ok()
}

pub fn random_patterns(rng: &mut ChaCha8Rng, width: usize, count: usize) -> Vec<Vec<bool>> {
    (0..count)
        .map(|_| (0..width).map(|_| rng.random()).collect())
        .collect()
}
