// SPDX-License-Identifier: Apache-2.0

//! Structural features of gate outputs and candidate-site ranking.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::netlist::{Netlist, SignalId};

pub const W_TFO: f64 = 0.35;
pub const W_DEPTH: f64 = 0.25;
pub const W_COVERAGE: f64 = 0.20;
pub const W_OBSERVABILITY: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub node: String,
    /// Longest path from any input, in gates.
    pub depth: u32,
    /// Distinct sink gates.
    pub fanout: u32,
    /// Gates in the transitive fanout, the node's own driver excluded.
    pub tfo_size: u32,
    /// Fraction of primary outputs reachable from the node.
    pub cone_coverage: f64,
    /// `1 / (1 + d)`, `d` the gate distance to the nearest primary output.
    /// Nodes reaching no output use `d = G + 1`.
    pub observability: f64,
}

/// Features of every gate output, in netlist (topological) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub nodes: Vec<NodeFeatures>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FeatureMap {
    pub fn new(nodes: Vec<NodeFeatures>) -> Self {
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, f)| (f.node.clone(), i))
            .collect();
        Self { nodes, index }
    }

    pub fn get(&self, node: &str) -> Option<&NodeFeatures> {
        self.index.get(node).map(|&i| &self.nodes[i])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub gates: usize,
    pub max_depth: u32,
    pub inputs: usize,
    pub outputs: usize,
    pub key_inputs: usize,
}

impl CircuitStats {
    pub fn of(n: &Netlist) -> Self {
        Self {
            gates: n.num_gates(),
            max_depth: depths(n).into_iter().max().unwrap_or(0),
            inputs: n.primary_inputs().len(),
            outputs: n.primary_outputs().len(),
            key_inputs: n.key_inputs().len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSite {
    pub node: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSites {
    pub entries: Vec<RankedSite>,
    pub circuit_stats: CircuitStats,
}

impl RankedSites {
    /// Position of `node` in the ranking.
    pub fn position(&self, node: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.node == node)
    }
}

/// Gate-level depth of every signal; inputs are 0.
pub fn depths(n: &Netlist) -> Vec<u32> {
    let mut d = vec![0u32; n.num_signals()];
    for g in n.gates() {
        d[g.output.index()] = 1 + g.fanin.iter().map(|f| d[f.index()]).max().unwrap_or(0);
    }
    d
}

/// Signals strictly downstream of `root` (the root itself excluded).
pub fn transitive_fanout(n: &Netlist, root: SignalId) -> Vec<bool> {
    let mut seen = vec![false; n.num_signals()];
    let mut stack = vec![root];
    while let Some(s) = stack.pop() {
        for &gi in n.sink_gates(s) {
            let out = n.gates()[gi as usize].output;
            if !seen[out.index()] {
                seen[out.index()] = true;
                stack.push(out);
            }
        }
    }
    seen
}

/// Signals strictly upstream of `root`, primary and key inputs included.
pub fn transitive_fanin(n: &Netlist, root: SignalId) -> Vec<bool> {
    let mut seen = vec![false; n.num_signals()];
    let mut stack = vec![root];
    while let Some(s) = stack.pop() {
        if let Some(gi) = n.driver(s) {
            for &f in &n.gates()[gi].fanin {
                if !seen[f.index()] {
                    seen[f.index()] = true;
                    stack.push(f);
                }
            }
        }
    }
    seen
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn new(bits: usize) -> Self {
        Self(vec![0; bits.div_ceil(64)])
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }
    fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

pub fn compute_features(n: &Netlist) -> FeatureMap {
    let gates = n.gates();
    let g_count = gates.len();
    let depth = depths(n);

    // output index per signal
    let mut po_bits: Vec<Vec<usize>> = vec![Vec::new(); n.num_signals()];
    for (i, &o) in n.primary_outputs().iter().enumerate() {
        po_bits[o.index()].push(i);
    }

    // reverse topological sweep: tfo over gate indices, cone over outputs
    let mut tfo: Vec<BitSet> = (0..g_count).map(|_| BitSet::new(g_count)).collect();
    let mut cone: Vec<BitSet> = (0..g_count)
        .map(|_| BitSet::new(n.primary_outputs().len()))
        .collect();
    for gi in (0..g_count).rev() {
        let out = gates[gi].output;
        let mut t = BitSet::new(g_count);
        let mut c = BitSet::new(n.primary_outputs().len());
        for &p in &po_bits[out.index()] {
            c.insert(p);
        }
        for &s in n.sink_gates(out) {
            let s = s as usize;
            t.insert(s);
            t.union_with(&tfo[s]);
            c.union_with(&cone[s]);
        }
        tfo[gi] = t;
        cone[gi] = c;
    }

    // distance to the nearest output, multi-source BFS backwards
    let unreachable = g_count as u32 + 1;
    let mut dist = vec![u32::MAX; n.num_signals()];
    let mut queue = VecDeque::new();
    for &o in n.primary_outputs() {
        if dist[o.index()] != 0 {
            dist[o.index()] = 0;
            queue.push_back(o);
        }
    }
    while let Some(s) = queue.pop_front() {
        if let Some(gi) = n.driver(s) {
            for &f in &gates[gi].fanin {
                if dist[f.index()] == u32::MAX {
                    dist[f.index()] = dist[s.index()] + 1;
                    queue.push_back(f);
                }
            }
        }
    }

    let n_out = n.primary_outputs().len().max(1) as f64;
    let nodes = gates
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let o = g.output.index();
            let d = if dist[o] == u32::MAX {
                unreachable
            } else {
                dist[o]
            };
            NodeFeatures {
                node: n.signal_name(g.output).to_string(),
                depth: depth[o],
                fanout: n.sink_gates(g.output).len() as u32,
                tfo_size: tfo[gi].len(),
                cone_coverage: cone[gi].len() as f64 / n_out,
                observability: 1.0 / (1.0 + d as f64),
            }
        })
        .collect();
    FeatureMap::new(nodes)
}

/// Weighted score of one node against circuit-level normalisers.
pub fn score(f: &NodeFeatures, gates: usize, max_depth: u32) -> f64 {
    let g = gates.max(1) as f64;
    let d = max_depth.max(1) as f64;
    let s = W_TFO * (f.tfo_size as f64 + 1.0) / g
        + W_DEPTH * f.depth as f64 / d
        + W_COVERAGE * f.cone_coverage
        + W_OBSERVABILITY * f.observability;
    s.clamp(0.0, 1.0)
}

pub fn rank_nodes(n: &Netlist, feats: &FeatureMap) -> RankedSites {
    let stats = CircuitStats::of(n);
    let mut entries: Vec<RankedSite> = feats
        .nodes
        .iter()
        .map(|f| RankedSite {
            node: f.node.clone(),
            score: score(f, stats.gates, stats.max_depth),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.node.cmp(&b.node))
    });
    RankedSites {
        entries,
        circuit_stats: stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    const C17: &str = include_str!("../../../benchmarks/iscas85/c17.bench");

    #[test]
    fn chain_depth() {
        let n = parse_bench(
            "t",
            "INPUT(a)\nOUTPUT(y3)\ny1 = NOT(a)\ny2 = NOT(y1)\ny3 = NOT(y2)",
        )
        .unwrap();
        let f = compute_features(&n);
        assert_eq!(f.get("y3").unwrap().depth, 3);
        assert_eq!(f.get("y1").unwrap().tfo_size, 2);
        assert_eq!(f.get("y1").unwrap().observability, 1.0 / 3.0);
    }

    #[test]
    fn c17_node_features() {
        let n = parse_bench("c17", C17).unwrap();
        let f = compute_features(&n);
        let n11 = f.get("11").unwrap();
        assert_eq!(n11.tfo_size, 4);
        assert_eq!(n11.cone_coverage, 1.0);
        assert_eq!(n11.fanout, 2);
        assert_eq!(f.get("22").unwrap().observability, 1.0);
        assert_eq!(f.get("22").unwrap().depth, 3);
    }

    #[test]
    fn single_gate_scores_one() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)").unwrap();
        let r = rank_nodes(&n, &compute_features(&n));
        assert_eq!(r.entries.len(), 1);
        assert!((r.entries[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dead_node_uses_far_distance() {
        let n = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = NOT(a)\nz = BUFF(a)").unwrap();
        let f = compute_features(&n);
        let z = f.get("z").unwrap();
        assert_eq!(z.cone_coverage, 0.0);
        assert_eq!(z.observability, 1.0 / 4.0);
    }

    #[test]
    fn ties_break_by_name() {
        let n = parse_bench(
            "t",
            "INPUT(a)\nINPUT(b)\nOUTPUT(q)\nOUTPUT(p)\nq = AND(a, b)\np = OR(a, b)",
        )
        .unwrap();
        let r = rank_nodes(&n, &compute_features(&n));
        let names: Vec<&str> = r.entries.iter().map(|e| e.node.as_str()).collect();
        assert_eq!(names, ["p", "q"]);
    }
}
