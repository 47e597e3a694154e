// SPDX-License-Identifier: Apache-2.0

//! Lock-plan generation: the deterministic heuristic planner, the
//! LLM-endpoint planner, feedback-driven refinement and candidate ranking.

pub mod llm;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{transitive_fanin, transitive_fanout, RankedSites};
use crate::attack::{AttackOutcome, AttackReport};
use crate::compile::{lock_is_acyclic, OverheadMetrics};
use crate::netlist::{Netlist, SignalId};
use crate::plan::{
    validate_plan, Helper, LockInstance, LockPlan, PlanLimits, PlanViolation, Style,
};
use crate::sim::{CorruptionEstimate, KeyCheck};

pub use llm::{
    llm_plan, HttpTransport, LlmConfig, LlmOutcome, LlmRequest, ScriptedTransport, Transport,
    TransportError,
};

/// Key bits per perturb_restore group.
pub const PERTURB_GROUP_BITS: usize = 4;
/// Pattern-detector inputs per perturb_restore group.
pub const PERTURB_HELPERS: usize = 2;
/// Bit error rate below which a candidate counts as weakly corrupting.
pub const WEAK_CORRUPTION_THRESHOLD: f64 = 0.01;
/// Decoy / partner candidates tried per target before moving on.
const SIDE_SEARCH_LIMIT: usize = 64;

/// Style requested for a plan: one style throughout, or round-robin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StylePolicy {
    Fixed(Style),
    Hybrid,
}

impl StylePolicy {
    pub const ALL: [StylePolicy; 5] = [
        StylePolicy::Fixed(Style::XorXnor),
        StylePolicy::Fixed(Style::MuxLock),
        StylePolicy::Fixed(Style::PerturbRestore),
        StylePolicy::Fixed(Style::PairwiseSubgraph),
        StylePolicy::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StylePolicy::Fixed(s) => s.as_str(),
            StylePolicy::Hybrid => "hybrid",
        }
    }

    pub fn allowed_styles(self) -> Vec<Style> {
        match self {
            StylePolicy::Fixed(s) => vec![s],
            StylePolicy::Hybrid => Style::ALL.to_vec(),
        }
    }
}

impl fmt::Display for StylePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StylePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "hybrid" {
            return Ok(StylePolicy::Hybrid);
        }
        Style::ALL
            .iter()
            .find(|st| st.as_str() == s)
            .map(|&st| StylePolicy::Fixed(st))
            .ok_or_else(|| format!("unknown style `{s}`"))
    }
}

impl Serialize for StylePolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StylePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlannerError {
    #[error("only {placed} of {needed} {style} instances found legal sites")]
    InsufficientSites {
        style: Style,
        placed: usize,
        needed: usize,
    },
    #[error("{policy} cannot use a {width}-bit key")]
    KeyWidth { policy: StylePolicy, width: usize },
    #[error("perturb_restore needs primary inputs for its pattern detector")]
    NoHelperInputs,
    #[error("no refinement applies: {0}")]
    NoRefinement(String),
    #[error("planner produced an invalid plan: {0}")]
    Invalid(String),
}

/// Where a plan came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Heuristic,
    Llm,
    /// LLM path failed; heuristic plan substituted.
    Fallback,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Heuristic => "heuristic",
            Provenance::Llm => "llm",
            Provenance::Fallback => "fallback",
        }
    }
}

/// Key-bit group sizes per instance for a policy.
fn layout(policy: StylePolicy, width: usize) -> Result<Vec<(Style, usize)>, PlannerError> {
    let bad = || PlannerError::KeyWidth { policy, width };
    if width == 0 {
        return Err(bad());
    }
    Ok(match policy {
        StylePolicy::Fixed(Style::PerturbRestore) => {
            if width < 2 {
                return Err(bad());
            }
            let mut groups = vec![PERTURB_GROUP_BITS; width / PERTURB_GROUP_BITS];
            match width % PERTURB_GROUP_BITS {
                0 => {}
                1 => *groups.last_mut().expect("width >= 5 here") += 1,
                r => groups.push(r),
            }
            groups
                .into_iter()
                .map(|g| (Style::PerturbRestore, g))
                .collect()
        }
        StylePolicy::Fixed(s) => vec![(s, 1); width],
        StylePolicy::Hybrid => {
            let mut out = Vec::new();
            let mut left = width;
            for s in Style::ALL.iter().cycle() {
                if left == 0 {
                    break;
                }
                let bits = if *s == Style::PerturbRestore {
                    if left < 2 {
                        continue;
                    }
                    let g = PERTURB_GROUP_BITS.min(left);
                    if left - g == 1 {
                        g + 1
                    } else {
                        g
                    }
                } else {
                    1
                };
                out.push((*s, bits));
                left -= bits;
            }
            out
        }
    })
}

/// Incremental site selection over a ranking.
struct Selector<'a> {
    n: &'a Netlist,
    order: Vec<SignalId>,
    rank: Vec<usize>,
    used: Vec<bool>,
    instances: Vec<LockInstance>,
}

impl<'a> Selector<'a> {
    fn new(n: &'a Netlist, ranked: &RankedSites) -> Self {
        let order: Vec<SignalId> = ranked
            .entries
            .iter()
            .filter_map(|e| n.signal(&e.node))
            .filter(|&id| n.is_gate_output(id))
            .collect();
        let mut rank = vec![usize::MAX; n.num_signals()];
        for (i, id) in order.iter().enumerate() {
            rank[id.index()] = i;
        }
        Self {
            n,
            order,
            rank,
            used: vec![false; n.num_signals()],
            instances: Vec::new(),
        }
    }

    fn with_instances(mut self, instances: &[LockInstance]) -> Self {
        for inst in instances {
            self.mark(inst, true);
        }
        self.instances = instances.to_vec();
        self
    }

    fn mark(&mut self, inst: &LockInstance, v: bool) {
        for t in &inst.targets {
            if let Some(id) = self.n.signal(t) {
                self.used[id.index()] = v;
            }
        }
    }

    fn rank_of(&self, name: &str) -> usize {
        self.n
            .signal(name)
            .map_or(usize::MAX, |id| self.rank[id.index()])
    }

    fn name(&self, id: SignalId) -> String {
        self.n.signal_name(id).to_string()
    }

    fn fits(&self, inst: &LockInstance) -> bool {
        let mut all = self.instances.clone();
        all.push(inst.clone());
        lock_is_acyclic(self.n, &all)
    }

    fn helpers(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Helper>, PlannerError> {
        let pis = self.n.primary_inputs();
        if pis.is_empty() {
            return Err(PlannerError::NoHelperInputs);
        }
        let k = PERTURB_HELPERS.min(pis.len());
        let mut idx = sample(rng, pis.len(), k).into_vec();
        idx.sort_unstable();
        Ok(idx
            .into_iter()
            .map(|i| Helper::new(self.name(pis[i]), rng.random::<bool>()))
            .collect())
    }

    /// Best-ranked legal instance of `style` on an unused site, skipping
    /// `exclude`. Does not record it.
    fn pick(
        &self,
        style: Style,
        key_bits: &[usize],
        correct: &[bool],
        exclude: &[SignalId],
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<LockInstance>, PlannerError> {
        let free = |id: SignalId| !self.used[id.index()] && !exclude.contains(&id);
        for &t in self.order.iter().filter(|&&t| free(t)) {
            let inst = match style {
                Style::XorXnor => Some(LockInstance::xor_xnor(
                    self.name(t),
                    key_bits[0],
                    correct[0],
                )),
                Style::PerturbRestore => Some(LockInstance::perturb_restore(
                    self.name(t),
                    self.helpers(rng)?,
                    key_bits.to_vec(),
                    correct.to_vec(),
                )),
                Style::MuxLock => {
                    let tfo = transitive_fanout(self.n, t);
                    self.order
                        .iter()
                        .filter(|&&d| d != t && !tfo[d.index()])
                        .take(SIDE_SEARCH_LIMIT)
                        .map(|&d| {
                            LockInstance::mux_lock(
                                self.name(t),
                                self.name(d),
                                key_bits[0],
                                correct[0],
                            )
                        })
                        .find(|i| self.fits(i))
                }
                Style::PairwiseSubgraph => {
                    let tfo = transitive_fanout(self.n, t);
                    let tfi = transitive_fanin(self.n, t);
                    self.order
                        .iter()
                        .filter(|&&u| u != t && free(u) && !tfo[u.index()] && !tfi[u.index()])
                        .take(SIDE_SEARCH_LIMIT)
                        .map(|&u| {
                            LockInstance::pairwise(
                                self.name(t),
                                self.name(u),
                                key_bits[0],
                                correct[0],
                            )
                        })
                        .find(|i| self.fits(i))
                }
            };
            // xor_xnor and perturb_restore read only the target and primary
            // inputs, so they cannot close a cycle
            if inst.is_some() {
                return Ok(inst);
            }
        }
        Ok(None)
    }

    fn push(&mut self, inst: LockInstance) {
        self.mark(&inst, true);
        self.instances.push(inst);
    }
}

/// Seeded plan over the ranked sites: instances consume sites in rank
/// order under the validity rules; correct bits and pattern-detector
/// helpers come from the seed.
pub fn heuristic_plan(
    n: &Netlist,
    ranked: &RankedSites,
    key_width: usize,
    policy: StylePolicy,
    seed: u64,
) -> Result<LockPlan, PlannerError> {
    let groups = layout(policy, key_width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let correct: Vec<bool> = (0..key_width).map(|_| rng.random()).collect();
    let mut sel = Selector::new(n, ranked);
    let mut next_bit = 0;
    for (i, &(style, bits)) in groups.iter().enumerate() {
        let kb: Vec<usize> = (next_bit..next_bit + bits).collect();
        let inst = sel.pick(
            style,
            &kb,
            &correct[next_bit..next_bit + bits],
            &[],
            &mut rng,
        )?;
        match inst {
            Some(inst) => sel.push(inst),
            None => {
                return Err(PlannerError::InsufficientSites {
                    style,
                    placed: groups[..i].iter().filter(|g| g.0 == style).count(),
                    needed: groups.iter().filter(|g| g.0 == style).count(),
                })
            }
        }
        next_bit += bits;
    }
    let mut plan = LockPlan::new(n.name(), key_width, seed);
    plan.instances = sel.instances;
    finish(plan, n)
}

fn finish(plan: LockPlan, n: &Netlist) -> Result<LockPlan, PlannerError> {
    match validate_plan(&plan, n, &PlanLimits::default()) {
        Ok(()) => Ok(plan),
        Err(v) => Err(PlannerError::Invalid(crate::plan::join_violations(&v))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Plan accepted and compiled into a valid netlist.
    pub parse_ok: bool,
    pub correct_key_ok: bool,
    pub key_check: Option<KeyCheck>,
    /// SAT-CEC of the key-bound netlist against the original.
    pub cec_equivalent: Option<bool>,
    pub corruption: Option<CorruptionEstimate>,
    pub overhead: Option<OverheadMetrics>,
    pub violations: Vec<PlanViolation>,
    pub error: Option<String>,
}

impl VerificationReport {
    pub fn failed(violations: Vec<PlanViolation>, error: String) -> Self {
        Self {
            parse_ok: false,
            correct_key_ok: false,
            key_check: None,
            cec_equivalent: None,
            corruption: None,
            overhead: None,
            violations,
            error: Some(error),
        }
    }

    pub fn bit_error_rate(&self) -> f64 {
        self.corruption.as_ref().map_or(0.0, |c| c.bit_error_rate)
    }

    pub fn overhead_ratio(&self) -> f64 {
        self.overhead
            .as_ref()
            .map_or(0.0, |o| o.gate_overhead_ratio)
    }
}

#[derive(Debug, Clone)]
pub struct CandidateRecord {
    pub plan: LockPlan,
    pub provenance: Provenance,
    /// Refinement rounds applied to reach this plan.
    pub refinements: usize,
    pub locked: Option<Netlist>,
    pub verification: VerificationReport,
    pub attack: Option<AttackReport>,
    pub score: f64,
}

/// Candidate score from its verification report.
pub fn candidate_score(v: &VerificationReport) -> f64 {
    let ck = if v.correct_key_ok { 1.0 } else { 0.0 };
    let parse_penalty = if v.parse_ok { 0.0 } else { 10.0 };
    ck + 2.0 * v.bit_error_rate().min(0.5) / 0.5 - 0.5 * v.overhead_ratio().min(1.0) - parse_penalty
}

/// Scores every candidate and sorts best first; ties go to lower overhead,
/// then to the smaller plan digest.
pub fn rank_candidates(mut cands: Vec<CandidateRecord>) -> Vec<CandidateRecord> {
    for c in &mut cands {
        c.score = candidate_score(&c.verification);
    }
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| {
                a.verification
                    .overhead_ratio()
                    .total_cmp(&b.verification.overhead_ratio())
            })
            .then_with(|| a.plan.digest().cmp(&b.plan.digest()))
    });
    cands
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackReason {
    ParseFail,
    WrongKeyWeak,
    SatRecovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerFeedback {
    pub reason: FeedbackReason,
    pub corruption: Option<CorruptionEstimate>,
    pub attack: Option<AttackReport>,
    pub violations: Vec<PlanViolation>,
}

impl PlannerFeedback {
    /// Feedback for a verified (and possibly attacked) candidate, or `None`
    /// when nothing calls for refinement.
    pub fn for_candidate(c: &CandidateRecord) -> Option<Self> {
        let v = &c.verification;
        let reason = if !v.parse_ok {
            FeedbackReason::ParseFail
        } else if v.bit_error_rate() < WEAK_CORRUPTION_THRESHOLD {
            FeedbackReason::WrongKeyWeak
        } else if c
            .attack
            .as_ref()
            .is_some_and(|a| a.outcome == AttackOutcome::KeyRecovered)
        {
            FeedbackReason::SatRecovered
        } else {
            return None;
        };
        Some(Self {
            reason,
            corruption: v.corruption.clone(),
            attack: c.attack.clone(),
            violations: v.violations.clone(),
        })
    }
}

fn instances_named(v: &PlanViolation) -> Vec<usize> {
    use PlanViolation::*;
    match v {
        TargetCount { instance, .. }
        | KeyBitCount { instance, .. }
        | CorrectBitsLength { instance, .. }
        | KeyBitOutOfRange { instance, .. }
        | HelperCount { instance, .. }
        | UnknownSignal { instance, .. }
        | InvalidTarget { instance, .. }
        | KeySignal { instance, .. }
        | DecoyInFanout { instance, .. }
        | PairwiseReachable { instance, .. }
        | HelperInFanout { instance, .. } => vec![*instance],
        // the first claimant keeps the bit or wire
        KeyBitOverlap { instances, .. } | DuplicateTarget { instances, .. } => {
            instances.iter().skip(1).copied().collect()
        }
        _ => Vec::new(),
    }
}

fn policy_of(plan: &LockPlan) -> StylePolicy {
    match plan.styles().as_slice() {
        [s] => StylePolicy::Fixed(*s),
        _ => StylePolicy::Hybrid,
    }
}

/// Applies the rule matching `fb.reason` to `prev`:
///
/// * `parse_fail`: drops the offending instances and re-places their styles
///   on fresh sites over the freed key bits (a full re-plan when the
///   violations name no instance);
/// * `wrong_key_weak`: moves the lowest-ranked instance to the best unused
///   site and removes one pattern-detector helper from a perturb_restore
///   instance;
/// * `sat_recovered`: merges all xor_xnor instances into one
///   perturb_restore group, or else merges the two smallest groups.
pub fn refine_plan(
    prev: &LockPlan,
    fb: &PlannerFeedback,
    n: &Netlist,
    ranked: &RankedSites,
    seed: u64,
) -> Result<LockPlan, PlannerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = match fb.reason {
        FeedbackReason::ParseFail => repair(prev, fb, n, ranked, seed, &mut rng)?,
        FeedbackReason::WrongKeyWeak => strengthen(prev, n, ranked, &mut rng)?,
        FeedbackReason::SatRecovered => regroup(prev, n, ranked, &mut rng)?,
    };
    plan.seed = seed;
    finish(plan, n)
}

fn repair(
    prev: &LockPlan,
    fb: &PlannerFeedback,
    n: &Netlist,
    ranked: &RankedSites,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<LockPlan, PlannerError> {
    let offending: BTreeSet<usize> = fb.violations.iter().flat_map(instances_named).collect();
    let width = prev.key_width.max(1);
    if offending.is_empty() {
        return heuristic_plan(n, ranked, width, policy_of(prev), seed);
    }
    let kept: Vec<LockInstance> = prev
        .instances
        .iter()
        .enumerate()
        .filter(|(i, _)| !offending.contains(i))
        .map(|(_, x)| x.clone())
        .collect();
    let mut sel = Selector::new(n, ranked).with_instances(&kept);
    let mut free: BTreeSet<usize> = (0..width).collect();
    for inst in &kept {
        for b in &inst.key_bits {
            free.remove(b);
        }
    }
    for &i in &offending {
        let Some(old) = prev.instances.get(i) else {
            continue;
        };
        let (style, need) = match old.style {
            Style::PerturbRestore if free.len() >= 2 => (
                Style::PerturbRestore,
                old.key_bits.len().clamp(2, free.len()),
            ),
            Style::PerturbRestore => (Style::XorXnor, 1),
            s => (s, 1),
        };
        if free.len() < need {
            break;
        }
        let bits: Vec<usize> = free.iter().take(need).copied().collect();
        let correct: Vec<bool> = bits.iter().map(|_| rng.random()).collect();
        if let Some(inst) = sel.pick(style, &bits, &correct, &[], rng)? {
            for b in &bits {
                free.remove(b);
            }
            sel.push(inst);
        }
    }
    // leftover bits become xor_xnor instances
    while let Some(&b) = free.iter().next() {
        let c = rng.random();
        let inst = sel.pick(Style::XorXnor, &[b], &[c], &[], rng)?.ok_or(
            PlannerError::InsufficientSites {
                style: Style::XorXnor,
                placed: 0,
                needed: free.len(),
            },
        )?;
        free.remove(&b);
        sel.push(inst);
    }
    let mut plan = LockPlan::new(n.name(), width, seed);
    plan.instances = sel.instances;
    Ok(plan)
}

fn strengthen(
    prev: &LockPlan,
    n: &Netlist,
    ranked: &RankedSites,
    rng: &mut ChaCha8Rng,
) -> Result<LockPlan, PlannerError> {
    let mut plan = prev.clone();
    let mut changed = false;
    let sel = Selector::new(n, ranked).with_instances(&prev.instances);
    let lowest =
        (0..plan.instances.len()).max_by_key(|&i| (sel.rank_of(&plan.instances[i].targets[0]), i));
    if let Some(i) = lowest {
        let old = plan.instances[i].clone();
        let mut others = plan.instances.clone();
        others.remove(i);
        let mut sel = Selector::new(n, ranked).with_instances(&others);
        let exclude: Vec<SignalId> = old.targets.iter().filter_map(|t| n.signal(t)).collect();
        if let Some(mut moved) =
            sel.pick(old.style, &old.key_bits, &old.correct_bits, &exclude, rng)?
        {
            if old.style == Style::PerturbRestore {
                moved.helpers = old.helpers.clone();
            }
            sel.instances.insert(i, moved);
            plan.instances = sel.instances;
            changed = true;
        }
    }
    if let Some(p) = plan
        .instances
        .iter_mut()
        .find(|x| x.style == Style::PerturbRestore && x.helpers.len() >= 2)
    {
        p.helpers.pop();
        changed = true;
    }
    if changed {
        Ok(plan)
    } else {
        Err(PlannerError::NoRefinement(
            "no unused site and no helper to remove".into(),
        ))
    }
}

fn regroup(
    prev: &LockPlan,
    n: &Netlist,
    ranked: &RankedSites,
    rng: &mut ChaCha8Rng,
) -> Result<LockPlan, PlannerError> {
    let sel = Selector::new(n, ranked);
    let xors: Vec<usize> = (0..prev.instances.len())
        .filter(|&i| prev.instances[i].style == Style::XorXnor)
        .collect();
    let merge: Vec<usize> = if xors.len() >= 2 {
        xors
    } else {
        let mut groups: Vec<usize> = (0..prev.instances.len())
            .filter(|&i| prev.instances[i].style == Style::PerturbRestore)
            .collect();
        if groups.len() < 2 {
            return Err(PlannerError::NoRefinement(
                "fewer than two xor_xnor instances or perturb_restore groups".into(),
            ));
        }
        groups.sort_by_key(|&i| (prev.instances[i].key_bits.len(), i));
        groups.truncate(2);
        groups.sort_unstable();
        groups
    };
    let best = *merge
        .iter()
        .min_by_key(|&&i| (sel.rank_of(&prev.instances[i].targets[0]), i))
        .expect("at least two instances merge");
    let mut pairs: Vec<(usize, bool)> = merge
        .iter()
        .flat_map(|&i| {
            let x = &prev.instances[i];
            x.key_bits
                .iter()
                .copied()
                .zip(x.correct_bits.iter().copied())
        })
        .collect();
    pairs.sort_unstable();
    let helpers = if prev.instances[best].style == Style::PerturbRestore {
        prev.instances[best].helpers.clone()
    } else {
        sel.helpers(rng)?
    };
    let group = LockInstance::perturb_restore(
        prev.instances[best].targets[0].clone(),
        helpers,
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
    );
    let mut plan = prev.clone();
    plan.instances = Vec::new();
    for (i, inst) in prev.instances.iter().enumerate() {
        if i == merge[0] {
            plan.instances.push(group.clone());
        } else if !merge.contains(&i) {
            plan.instances.push(inst.clone());
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{compute_features, rank_nodes};
    use crate::netlist::parse_bench;

    const C17: &str = include_str!("../../../../benchmarks/iscas85/c17.bench");

    fn c17() -> (Netlist, RankedSites) {
        let n = parse_bench("c17", C17).unwrap();
        let r = rank_nodes(&n, &compute_features(&n));
        (n, r)
    }

    #[test]
    fn layouts() {
        let pr = StylePolicy::Fixed(Style::PerturbRestore);
        let sizes = |w| {
            layout(pr, w)
                .unwrap()
                .iter()
                .map(|g| g.1)
                .collect::<Vec<_>>()
        };
        assert_eq!(sizes(8), vec![4, 4]);
        assert_eq!(sizes(5), vec![5]);
        assert_eq!(sizes(6), vec![4, 2]);
        assert_eq!(sizes(2), vec![2]);
        assert!(layout(pr, 1).is_err());
        let h = layout(StylePolicy::Hybrid, 8).unwrap();
        assert_eq!(h.iter().map(|g| g.1).sum::<usize>(), 8);
        assert_eq!(h[0].0, Style::XorXnor);
        assert_eq!(h[2], (Style::PerturbRestore, 4));
        assert_eq!(
            layout(StylePolicy::Hybrid, 1).unwrap(),
            vec![(Style::XorXnor, 1)]
        );
    }

    #[test]
    fn xor_takes_top_two_sites() {
        let (n, r) = c17();
        for seed in [0, 1, 99] {
            let p = heuristic_plan(&n, &r, 2, StylePolicy::Fixed(Style::XorXnor), seed).unwrap();
            let t: Vec<&str> = p.instances.iter().map(|i| i.targets[0].as_str()).collect();
            assert_eq!(t, [r.entries[0].node.as_str(), r.entries[1].node.as_str()]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (n, r) = c17();
        for policy in StylePolicy::ALL {
            let a = heuristic_plan(&n, &r, 3, policy, 5).unwrap();
            let b = heuristic_plan(&n, &r, 3, policy, 5).unwrap();
            assert_eq!(a, b, "{policy}");
        }
    }

    #[test]
    fn no_decoy_available() {
        let n = parse_bench("t", "INPUT(a)\nOUTPUT(z)\ny = NOT(a)\nz = NOT(y)").unwrap();
        let r = rank_nodes(&n, &compute_features(&n));
        // y's only other gate is in its fanout; z can take y as decoy, so
        // ask for two
        let e = heuristic_plan(&n, &r, 2, StylePolicy::Fixed(Style::MuxLock), 0).unwrap_err();
        assert!(matches!(
            e,
            PlannerError::InsufficientSites {
                style: Style::MuxLock,
                placed: 1,
                needed: 2
            }
        ));
    }

    #[test]
    fn style_policy_strings() {
        for p in StylePolicy::ALL {
            assert_eq!(p.as_str().parse::<StylePolicy>().unwrap(), p);
        }
        assert!("rot_lock".parse::<StylePolicy>().is_err());
    }
}
