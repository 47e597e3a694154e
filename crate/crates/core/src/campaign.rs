// SPDX-License-Identifier: Apache-2.0

//! Batch evaluation: plan, compile, verify, attack, refine and rank every
//! (circuit, key width, style, seed) cell of a configuration, then write
//! the winning netlists and the CSV/JSON reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{compute_features, rank_nodes, FeatureMap, RankedSites};
use crate::attack::{cec_check, dip_attack, AttackBudget, AttackOutcome, AttackReport};
use crate::compile::{compile_plan, overhead, CompileError};
use crate::netlist::{bind_key, emit_verilog, parse_bench, read_bench_file, write_bench, Netlist};
use crate::plan::LockPlan;
use crate::planner::{
    heuristic_plan, llm_plan, rank_candidates, refine_plan, CandidateRecord, FeedbackReason,
    HttpTransport, LlmConfig, PlannerFeedback, Provenance, StylePolicy, Transport,
    VerificationReport,
};
use crate::sim::{
    check_correct_key, measure_corruption, DEFAULT_CORRECT_KEY_PATTERNS, DEFAULT_CORRUPTION_INPUTS,
    DEFAULT_CORRUPTION_KEYS,
};

pub const CSV_FILE: &str = "campaign.csv";
pub const JSON_FILE: &str = "campaign.json";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("no rows to aggregate")]
    EmptyAggregate,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Heuristic,
    Llm,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Heuristic => "heuristic",
            PlannerKind::Llm => "llm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub correct_key_patterns: usize,
    pub corruption_inputs: usize,
    pub corruption_keys: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            correct_key_patterns: DEFAULT_CORRECT_KEY_PATTERNS,
            corruption_inputs: DEFAULT_CORRUPTION_INPUTS,
            corruption_keys: DEFAULT_CORRUPTION_KEYS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    pub dip_budget: usize,
    pub time_budget_s: f64,
    pub count_cap: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let b = AttackBudget::default();
        Self {
            dip_budget: b.dip_budget,
            time_budget_s: b.time_budget_s,
            count_cap: b.count_cap,
        }
    }
}

impl From<AttackConfig> for AttackBudget {
    fn from(c: AttackConfig) -> Self {
        AttackBudget {
            dip_budget: c.dip_budget,
            time_budget_s: c.time_budget_s,
            count_cap: c.count_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// `.bench` files; relative paths resolve against the config file.
    pub circuits: Vec<PathBuf>,
    #[serde(default = "default_widths")]
    pub key_widths: Vec<usize>,
    #[serde(default = "default_styles")]
    pub styles: Vec<StylePolicy>,
    #[serde(default = "default_one")]
    pub candidates_per_pair: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub planner: PlannerKind,
    #[serde(default)]
    pub llm: Option<LlmConfig>,
    #[serde(default = "default_one")]
    pub refine_rounds: usize,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[serde(default)]
    pub jobs: usize,
}

fn default_widths() -> Vec<usize> {
    vec![8, 16, 32]
}

fn default_styles() -> Vec<StylePolicy> {
    StylePolicy::ALL.to_vec()
}

fn default_one() -> usize {
    1
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl CampaignConfig {
    pub fn new(circuits: Vec<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            circuits,
            key_widths: default_widths(),
            styles: default_styles(),
            candidates_per_pair: 1,
            seeds: default_seeds(),
            planner: PlannerKind::Heuristic,
            llm: None,
            refine_rounds: 1,
            simulation: SimulationConfig::default(),
            attack: AttackConfig::default(),
            out: out.into(),
            jobs: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        toml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
    }

    /// Loads a TOML file and resolves relative circuit paths against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CampaignError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut cfg.circuits {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::Config(m.into()));
        if self.circuits.is_empty() {
            return bad("circuits is empty");
        }
        if self.key_widths.is_empty() || self.key_widths.contains(&0) {
            return bad("key_widths must be non-empty and at least 1");
        }
        if self.styles.is_empty() {
            return bad("styles is empty");
        }
        if self.seeds.is_empty() {
            return bad("seeds is empty");
        }
        if self.candidates_per_pair == 0 {
            return bad("candidates_per_pair must be at least 1");
        }
        let s = &self.simulation;
        if s.correct_key_patterns == 0 || s.corruption_inputs == 0 || s.corruption_keys == 0 {
            return bad("simulation sample sizes must be at least 1");
        }
        if self.attack.dip_budget == 0 || self.attack.count_cap == 0 {
            return bad("attack budgets must be at least 1");
        }
        if self.attack.time_budget_s.is_nan() || self.attack.time_budget_s <= 0.0 {
            return bad("attack.time_budget_s must be positive");
        }
        match (self.planner, &self.llm) {
            (PlannerKind::Llm, None) => bad("planner = \"llm\" needs an [llm] section"),
            (PlannerKind::Llm, Some(l)) => l.check().map_err(CampaignError::Config),
            _ => Ok(()),
        }
    }
}

/// Wall-clock seconds per pipeline stage, summed over candidates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub plan_s: f64,
    pub compile_s: f64,
    pub verify_s: f64,
    pub attack_s: f64,
}

/// One report row per cell; flat so it maps onto a CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub cell: String,
    pub circuit: String,
    pub key_width: usize,
    pub style: String,
    pub seed: u64,
    pub planner: String,
    pub status: String,
    pub error: Option<String>,
    pub provenance: Option<String>,
    /// Styles of the winning plan, `+`-joined.
    pub plan_styles: Option<String>,
    pub candidates: usize,
    pub refinements: usize,
    pub llm_requests: usize,
    pub llm_retries: usize,
    pub llm_fallbacks: usize,
    pub parse_ok: Option<bool>,
    pub correct_key_ok: Option<bool>,
    pub cec_equivalent: Option<bool>,
    pub bit_error_rate: Option<f64>,
    pub pattern_error_rate: Option<f64>,
    pub original_gates: Option<usize>,
    pub locked_gates: Option<usize>,
    pub key_gate_count: Option<usize>,
    pub gate_overhead_ratio: Option<f64>,
    pub attack_outcome: Option<String>,
    pub dip_count: Option<usize>,
    pub remaining_keys: Option<String>,
    pub recovered_key: Option<String>,
    pub key_verified: Option<bool>,
    pub score: Option<f64>,
    pub plan_s: f64,
    pub compile_s: f64,
    pub verify_s: f64,
    pub attack_s: f64,
    pub total_s: f64,
    pub bench_path: Option<String>,
    pub verilog_path: Option<String>,
    pub run_json_path: String,
}

impl RunRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Means over the successful rows of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub planner: String,
    /// `None` for the all-widths group.
    pub key_width: Option<usize>,
    pub runs: usize,
    pub failed: usize,
    pub key_recovered: usize,
    pub mean_bit_error_rate: Option<f64>,
    pub mean_pattern_error_rate: Option<f64>,
    pub mean_dip_count: Option<f64>,
    pub mean_gate_overhead_ratio: Option<f64>,
    pub mean_attack_s: Option<f64>,
    pub mean_runtime_s: Option<f64>,
    pub llm_retries: usize,
    pub llm_fallbacks: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn aggregate_group(planner: &str, key_width: Option<usize>, rows: &[&RunRow]) -> AggregateRow {
    let ok: Vec<&RunRow> = rows.iter().copied().filter(|r| r.is_ok()).collect();
    AggregateRow {
        planner: planner.to_string(),
        key_width,
        runs: rows.len(),
        failed: rows.len() - ok.len(),
        key_recovered: ok
            .iter()
            .filter(|r| r.attack_outcome.as_deref() == Some(AttackOutcome::KeyRecovered.as_str()))
            .count(),
        mean_bit_error_rate: mean(ok.iter().filter_map(|r| r.bit_error_rate)),
        mean_pattern_error_rate: mean(ok.iter().filter_map(|r| r.pattern_error_rate)),
        mean_dip_count: mean(ok.iter().filter_map(|r| r.dip_count.map(|d| d as f64))),
        mean_gate_overhead_ratio: mean(ok.iter().filter_map(|r| r.gate_overhead_ratio)),
        mean_attack_s: mean(ok.iter().map(|r| r.attack_s)),
        mean_runtime_s: mean(ok.iter().map(|r| r.total_s)),
        llm_retries: rows.iter().map(|r| r.llm_retries).sum(),
        llm_fallbacks: rows.iter().map(|r| r.llm_fallbacks).sum(),
    }
}

/// Arithmetic means grouped by (planner, key width), followed by one
/// all-widths group per planner. Rows are consumed in the given order.
pub fn aggregate(rows: &[RunRow]) -> Result<Vec<AggregateRow>, CampaignError> {
    if rows.is_empty() {
        return Err(CampaignError::EmptyAggregate);
    }
    let mut by_width: BTreeMap<(&str, usize), Vec<&RunRow>> = BTreeMap::new();
    let mut by_planner: BTreeMap<&str, Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        by_width
            .entry((r.planner.as_str(), r.key_width))
            .or_default()
            .push(r);
        by_planner.entry(r.planner.as_str()).or_default().push(r);
    }
    let mut out: Vec<AggregateRow> = by_width
        .iter()
        .map(|((p, w), rs)| aggregate_group(p, Some(*w), rs))
        .collect();
    out.extend(
        by_planner
            .iter()
            .map(|(p, rs)| aggregate_group(p, None, rs)),
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub planner: String,
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl CampaignReport {
    pub fn from_rows(planner: PlannerKind, rows: Vec<RunRow>) -> Result<Self, CampaignError> {
        let aggregates = aggregate(&rows)?;
        Ok(Self {
            planner: planner.as_str().into(),
            rows,
            aggregates,
        })
    }
}

/// Candidate as stored in the per-run JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub plan: LockPlan,
    pub provenance: Provenance,
    pub refinements: usize,
    pub verification: VerificationReport,
    pub attack: Option<AttackReport>,
    pub attack_error: Option<String>,
    pub score: f64,
    /// Feedback that triggered refinement of this candidate, if any.
    pub feedback: Option<FeedbackReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub row: RunRow,
    /// Best first.
    pub candidates: Vec<CandidateSummary>,
    pub notes: Vec<String>,
}

/// Compiles `plan` and runs every verification check against `orig`.
/// The locked netlist is the re-parsed `.bench` text, so the checks apply
/// to the artifact that gets written.
pub fn evaluate_plan(
    orig: &Netlist,
    plan: &LockPlan,
    sim: &SimulationConfig,
    seed: u64,
    times: &mut StageTimes,
) -> (Option<Netlist>, VerificationReport) {
    let t = Instant::now();
    let compiled = compile_plan(orig, plan)
        .map_err(|e| match e {
            CompileError::Plan(v) => (v.clone(), CompileError::Plan(v).to_string()),
            other => (Vec::new(), other.to_string()),
        })
        .and_then(|n| {
            parse_bench(n.name(), &write_bench(&n))
                .map_err(|e| (Vec::new(), format!("locked bench does not re-parse: {e}")))
        });
    times.compile_s += t.elapsed().as_secs_f64();
    let locked = match compiled {
        Ok(n) => n,
        Err((v, msg)) => return (None, VerificationReport::failed(v, msg)),
    };
    let t = Instant::now();
    let report = verify_locked(orig, &locked, sim, seed);
    times.verify_s += t.elapsed().as_secs_f64();
    (Some(locked), report)
}

/// Simulation key check, SAT equivalence under the correct key, wrong-key
/// corruption and overhead of an already parsed locked netlist.
pub fn verify_locked(
    orig: &Netlist,
    locked: &Netlist,
    sim: &SimulationConfig,
    seed: u64,
) -> VerificationReport {
    let mut r = VerificationReport {
        parse_ok: true,
        correct_key_ok: false,
        key_check: None,
        cec_equivalent: None,
        corruption: None,
        overhead: Some(overhead(orig, locked)),
        violations: Vec::new(),
        error: None,
    };
    let mut errors = Vec::new();
    match check_correct_key(orig, locked, sim.correct_key_patterns, seed) {
        Ok(k) => r.key_check = Some(k),
        Err(e) => errors.push(format!("key check: {e}")),
    }
    match locked.correct_key() {
        Some(key) => match bind_key(locked, key).map(|b| cec_check(&b, orig)) {
            Ok(Ok(c)) => r.cec_equivalent = Some(c.is_equivalent()),
            Ok(Err(e)) => errors.push(format!("cec: {e}")),
            Err(e) => errors.push(format!("bind: {e}")),
        },
        None => errors.push("locked netlist carries no correct key".into()),
    }
    match measure_corruption(
        orig,
        locked,
        sim.corruption_inputs,
        sim.corruption_keys,
        seed,
    ) {
        Ok(c) => r.corruption = Some(c),
        Err(e) => errors.push(format!("corruption: {e}")),
    }
    r.correct_key_ok =
        r.key_check.as_ref().is_some_and(|k| k.matches) && r.cec_equivalent == Some(true);
    if !errors.is_empty() {
        r.error = Some(errors.join("; "));
    }
    r
}

/// Seed of candidate `i` (and refinement round `round`) within a cell.
/// Candidate 0, unrefined, uses the cell seed itself.
fn derive_seed(seed: u64, i: usize, round: usize) -> u64 {
    seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (round as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

struct Circuit {
    name: String,
    netlist: Netlist,
    feats: FeatureMap,
    ranked: RankedSites,
}

#[derive(Clone)]
struct Cell {
    circuit: usize,
    width: usize,
    policy: StylePolicy,
    seed: u64,
}

fn cell_id(circuit: &str, width: usize, policy: StylePolicy, seed: u64) -> String {
    format!("{circuit}_k{width}_{}_s{seed}", policy.as_str())
}

struct Evaluated {
    rec: CandidateRecord,
    attack_error: Option<String>,
    feedback: Option<FeedbackReason>,
}

struct Runner<'a> {
    cfg: &'a CampaignConfig,
    transport: Option<&'a dyn Transport>,
    /// Directory for bench/Verilog artifacts, relative to `cfg.out`.
    artifact_dir: Box<dyn Fn(u64) -> PathBuf + Sync + 'a>,
}

impl Runner<'_> {
    fn evaluate(
        &self,
        c: &Circuit,
        plan: LockPlan,
        provenance: Provenance,
        refinements: usize,
        seed: u64,
        times: &mut StageTimes,
    ) -> Evaluated {
        let (locked, verification) =
            evaluate_plan(&c.netlist, &plan, &self.cfg.simulation, seed, times);
        let mut attack = None;
        let mut attack_error = None;
        if let Some(l) = &locked {
            let t = Instant::now();
            match dip_attack(l, &c.netlist, &self.cfg.attack.into()) {
                Ok(a) => attack = Some(a),
                Err(e) => attack_error = Some(e.to_string()),
            }
            times.attack_s += t.elapsed().as_secs_f64();
        }
        Evaluated {
            rec: CandidateRecord {
                plan,
                provenance,
                refinements,
                locked,
                verification,
                attack,
                score: 0.0,
            },
            attack_error,
            feedback: None,
        }
    }

    fn run_cell(&self, circuits: &[Result<Arc<Circuit>, String>], cell: &Cell) -> RunRecord {
        let start = Instant::now();
        let circuit_name = match &circuits[cell.circuit] {
            Ok(c) => c.name.clone(),
            Err(_) => circuit_stem(&self.cfg.circuits[cell.circuit]),
        };
        let id = cell_id(&circuit_name, cell.width, cell.policy, cell.seed);
        let mut row = RunRow {
            cell: id.clone(),
            circuit: circuit_name.clone(),
            key_width: cell.width,
            style: cell.policy.as_str().into(),
            seed: cell.seed,
            planner: self.cfg.planner.as_str().into(),
            status: "failed".into(),
            error: None,
            provenance: None,
            plan_styles: None,
            candidates: 0,
            refinements: 0,
            llm_requests: 0,
            llm_retries: 0,
            llm_fallbacks: 0,
            parse_ok: None,
            correct_key_ok: None,
            cec_equivalent: None,
            bit_error_rate: None,
            pattern_error_rate: None,
            original_gates: None,
            locked_gates: None,
            key_gate_count: None,
            gate_overhead_ratio: None,
            attack_outcome: None,
            dip_count: None,
            remaining_keys: None,
            recovered_key: None,
            key_verified: None,
            score: None,
            plan_s: 0.0,
            compile_s: 0.0,
            verify_s: 0.0,
            attack_s: 0.0,
            total_s: 0.0,
            bench_path: None,
            verilog_path: None,
            run_json_path: format!("run_{id}.json"),
        };
        let mut notes = Vec::new();
        let mut times = StageTimes::default();
        let result = match &circuits[cell.circuit] {
            Ok(c) => self.pipeline(c, cell, &mut row, &mut notes, &mut times),
            Err(e) => Err(e.clone()),
        };
        let candidates = match result {
            Ok(cands) => cands,
            Err(e) => {
                row.error = Some(e);
                Vec::new()
            }
        };
        row.plan_s = times.plan_s;
        row.compile_s = times.compile_s;
        row.verify_s = times.verify_s;
        row.attack_s = times.attack_s;
        row.total_s = start.elapsed().as_secs_f64();
        RunRecord {
            row,
            candidates,
            notes,
        }
    }

    fn plan(
        &self,
        c: &Circuit,
        cell: &Cell,
        seed: u64,
        row: &mut RunRow,
        notes: &mut Vec<String>,
    ) -> Result<(LockPlan, Provenance), String> {
        match (self.cfg.planner, self.transport, &self.cfg.llm) {
            (PlannerKind::Llm, Some(t), Some(lc)) => {
                let out = llm_plan(
                    &c.netlist,
                    &c.feats,
                    &c.ranked,
                    cell.width,
                    cell.policy,
                    seed,
                    lc,
                    t,
                )
                .map_err(|e| e.to_string())?;
                row.llm_requests += out.attempts;
                if out.provenance == Provenance::Fallback {
                    row.llm_fallbacks += 1;
                    row.llm_retries += out.attempts.saturating_sub(1);
                } else {
                    row.llm_retries += out.attempts - 1;
                }
                notes.extend(out.errors.into_iter().map(|e| format!("llm: {e}")));
                Ok((out.plan, out.provenance))
            }
            _ => heuristic_plan(&c.netlist, &c.ranked, cell.width, cell.policy, seed)
                .map(|p| (p, Provenance::Heuristic))
                .map_err(|e| e.to_string()),
        }
    }

    fn pipeline(
        &self,
        c: &Circuit,
        cell: &Cell,
        row: &mut RunRow,
        notes: &mut Vec<String>,
        times: &mut StageTimes,
    ) -> Result<Vec<CandidateSummary>, String> {
        let mut pool: Vec<Evaluated> = Vec::new();
        for i in 0..self.cfg.candidates_per_pair {
            let seed = derive_seed(cell.seed, i, 0);
            let t = Instant::now();
            let planned = self.plan(c, cell, seed, row, notes);
            times.plan_s += t.elapsed().as_secs_f64();
            match planned {
                Ok((plan, prov)) => pool.push(self.evaluate(c, plan, prov, 0, cell.seed, times)),
                Err(e) => notes.push(format!("candidate {i}: {e}")),
            }
        }
        if pool.is_empty() {
            return Err(notes
                .last()
                .cloned()
                .unwrap_or_else(|| "no candidates".into()));
        }

        let mut frontier: Vec<usize> = (0..pool.len()).collect();
        for round in 1..=self.cfg.refine_rounds {
            let mut next = Vec::new();
            for idx in frontier {
                let Some(fb) = PlannerFeedback::for_candidate(&pool[idx].rec) else {
                    continue;
                };
                pool[idx].feedback = Some(fb.reason);
                let prev = &pool[idx].rec;
                let seed = derive_seed(cell.seed, idx, round);
                let t = Instant::now();
                let refined = refine_plan(&prev.plan, &fb, &c.netlist, &c.ranked, seed);
                times.plan_s += t.elapsed().as_secs_f64();
                match refined {
                    Ok(plan) => {
                        let (prov, depth) = (prev.provenance, prev.refinements + 1);
                        next.push(pool.len());
                        let ev = self.evaluate(c, plan, prov, depth, cell.seed, times);
                        pool.push(ev);
                    }
                    Err(e) => notes.push(format!("refine candidate {idx} round {round}: {e}")),
                }
            }
            frontier = next;
        }

        // rank_candidates sorts records; carry the side data by plan digest
        let mut side: BTreeMap<String, (Option<String>, Option<FeedbackReason>)> = BTreeMap::new();
        let mut records = Vec::new();
        for ev in pool {
            side.insert(ev.rec.plan.digest(), (ev.attack_error, ev.feedback));
            records.push(ev.rec);
        }
        let ranked = rank_candidates(records);
        row.candidates = ranked.len();
        let win = &ranked[0];
        let (win_attack_err, _) = side.get(&win.plan.digest()).cloned().unwrap_or_default();
        self.fill_row(row, c, win, win_attack_err)?;

        Ok(ranked
            .into_iter()
            .map(|r| {
                let (attack_error, feedback) =
                    side.get(&r.plan.digest()).cloned().unwrap_or_default();
                CandidateSummary {
                    plan: r.plan,
                    provenance: r.provenance,
                    refinements: r.refinements,
                    verification: r.verification,
                    attack: r.attack,
                    attack_error,
                    score: r.score,
                    feedback,
                }
            })
            .collect())
    }

    fn fill_row(
        &self,
        row: &mut RunRow,
        c: &Circuit,
        win: &CandidateRecord,
        attack_error: Option<String>,
    ) -> Result<(), String> {
        let v = &win.verification;
        row.provenance = Some(win.provenance.as_str().into());
        row.plan_styles = Some(
            win.plan
                .styles()
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join("+"),
        );
        row.refinements = win.refinements;
        row.parse_ok = Some(v.parse_ok);
        row.correct_key_ok = Some(v.correct_key_ok);
        row.cec_equivalent = v.cec_equivalent;
        row.bit_error_rate = v.corruption.as_ref().map(|x| x.bit_error_rate);
        row.pattern_error_rate = v.corruption.as_ref().map(|x| x.pattern_error_rate);
        row.original_gates = Some(c.netlist.num_gates());
        row.locked_gates = win.locked.as_ref().map(|l| l.num_gates());
        row.key_gate_count = v.overhead.map(|o| o.key_gate_count);
        row.gate_overhead_ratio = v.overhead.map(|o| o.gate_overhead_ratio);
        row.score = Some(win.score);
        if let Some(a) = &win.attack {
            row.attack_outcome = Some(a.outcome.as_str().into());
            row.dip_count = Some(a.dip_count);
            row.remaining_keys = Some(a.remaining_keys.to_string());
            row.recovered_key = a.recovered_key.as_ref().map(|k| k.to_string());
            // dip_attack rejects keys failing CEC, so a returned key is verified
            row.key_verified = Some(a.recovered_key.is_some());
        }

        let Some(locked) = &win.locked else {
            return Err(v
                .error
                .clone()
                .unwrap_or_else(|| "no candidate compiled".into()));
        };
        let dir = (self.artifact_dir)(row.seed);
        let stem = format!("{}_k{}_{}", row.circuit, row.key_width, row.style);
        let bench = dir.join(format!("{stem}.bench"));
        let verilog = dir.join(format!("{stem}.v"));
        let write = |rel: &Path, text: String| {
            let p = self.cfg.out.join(rel);
            if let Some(d) = p.parent() {
                fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
            }
            fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()))
        };
        write(&bench, write_bench(locked))?;
        write(&verilog, emit_verilog(locked))?;
        row.bench_path = Some(path_string(&bench));
        row.verilog_path = Some(path_string(&verilog));

        if let Some(e) = attack_error {
            return Err(format!("attack: {e}"));
        }
        if !v.correct_key_ok {
            return Err(v
                .error
                .clone()
                .unwrap_or_else(|| "correct key does not restore the original".into()));
        }
        row.status = "ok".into();
        Ok(())
    }
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn circuit_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

fn load_circuit(path: &Path) -> Result<Arc<Circuit>, String> {
    let netlist = read_bench_file(path).map_err(|e| e.to_string())?;
    if netlist.is_locked() {
        return Err(format!("{} is already locked", path.display()));
    }
    let feats = compute_features(&netlist);
    let ranked = rank_nodes(&netlist, &feats);
    Ok(Arc::new(Circuit {
        name: netlist.name().to_string(),
        netlist,
        feats,
        ranked,
    }))
}

/// Runs `cfg` with the HTTP transport built from its `[llm]` section.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport, CampaignError> {
    cfg.check()?;
    match (&cfg.planner, &cfg.llm) {
        (PlannerKind::Llm, Some(l)) => {
            let t = HttpTransport::from_config(l).map_err(CampaignError::Config)?;
            run_campaign_with(cfg, Some(&t))
        }
        _ => run_campaign_with(cfg, None),
    }
}

/// Runs `cfg`, sending LLM requests through `transport`, and writes all
/// artifacts under `cfg.out`. Per-cell failures become failed rows.
pub fn run_campaign_with(
    cfg: &CampaignConfig,
    transport: Option<&dyn Transport>,
) -> Result<CampaignReport, CampaignError> {
    cfg.check()?;
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CampaignError::Config(e.to_string()))?;

    let multi_seed = cfg.seeds.len() > 1;
    let runner = Runner {
        cfg,
        transport,
        artifact_dir: Box::new(move |seed| {
            if multi_seed {
                PathBuf::from(format!("s{seed}"))
            } else {
                PathBuf::new()
            }
        }),
    };

    let mut cells = Vec::new();
    for ci in 0..cfg.circuits.len() {
        for &width in &cfg.key_widths {
            for &policy in &cfg.styles {
                for &seed in &cfg.seeds {
                    cells.push(Cell {
                        circuit: ci,
                        width,
                        policy,
                        seed,
                    });
                }
            }
        }
    }

    let records: Vec<RunRecord> = pool.install(|| {
        let circuits: Vec<Result<Arc<Circuit>, String>> =
            cfg.circuits.par_iter().map(|p| load_circuit(p)).collect();
        cells
            .par_iter()
            .map(|cell| runner.run_cell(&circuits, cell))
            .collect()
    });

    let mut rows = Vec::with_capacity(records.len());
    for rec in &records {
        let p = cfg.out.join(&rec.row.run_json_path);
        fs::write(&p, serde_json::to_string_pretty(rec)?).map_err(io_err(&p))?;
        rows.push(rec.row.clone());
    }
    rows.sort_by(|a, b| a.cell.cmp(&b.cell));
    let report = CampaignReport::from_rows(cfg.planner, rows)?;
    write_reports(&report, &cfg.out)?;
    Ok(report)
}

pub fn write_reports(report: &CampaignReport, out: &Path) -> Result<(), CampaignError> {
    let csv_path = out.join(CSV_FILE);
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(&csv_path))?;
    let json_path = out.join(JSON_FILE);
    fs::write(&json_path, serde_json::to_string_pretty(report)?).map_err(io_err(&json_path))?;
    Ok(())
}

pub fn read_report(out: &Path) -> Result<CampaignReport, CampaignError> {
    let p = out.join(JSON_FILE);
    let text = fs::read_to_string(&p).map_err(io_err(&p))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_csv_rows(path: &Path) -> Result<Vec<RunRow>, CampaignError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
