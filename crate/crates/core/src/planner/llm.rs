// SPDX-License-Identifier: Apache-2.0

//! Plans requested from an HTTP language-model endpoint.
//!
//! One POST per attempt carries the circuit summary, the ranked shortlist,
//! the requested key width and styles, and a plain-text description of the
//! plan schema. The response body must be a single `lockplan_v1` document.
//! Rejected responses are re-requested with the violation messages
//! attached; when every attempt fails the heuristic plan is used instead.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{heuristic_plan, PlannerError, Provenance, StylePolicy};
use crate::analysis::{FeatureMap, NodeFeatures, RankedSites};
use crate::netlist::Netlist;
use crate::plan::{parse_plan, validate_plan, LockPlan, PlanError, PlanLimits, Style};

pub const CONSTRAINTS_DOC: &str = "\
Return exactly one JSON object and nothing else:
{\"version\":\"lockplan_v1\",\"source_circuit\":<name>,\"key_width\":<n>,\"seed\":<u64>,
 \"instances\":[{\"style\":<style>,\"targets\":[<wire>...],\"key_bits\":[<i>...],
                 \"correct_bits\":[0|1...],\"helpers\":[{\"signal\":<wire>,\"polarity\":0|1}...]}]}
Rules:
- key_bits of all instances partition 0..key_width-1 exactly; correct_bits align with key_bits.
- targets are gate outputs from the shortlist; each wire is a target at most once.
- xor_xnor: 1 target, 1 key bit, no helpers.
- mux_lock: 1 target, 1 key bit, exactly 1 helper (the decoy), which must not be the
  target or lie in its transitive fanout.
- perturb_restore: 1 target, >= 2 key bits, 1..8 helpers not in the target's
  transitive fanout (primary inputs are always safe).
- pairwise_subgraph: 2 targets, neither in the other's transitive fanout, 1 key bit.
- Unknown fields are rejected.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: String,
    /// Header carrying the secret, e.g. `Authorization`.
    #[serde(default)]
    pub auth_header: Option<String>,
    /// Environment variable holding the header value.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Requests per plan, the first one included.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Ranked sites sent with each request.
    #[serde(default = "default_shortlist")]
    pub shortlist: usize,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_shortlist() -> usize {
    64
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            auth_header: None,
            auth_env: None,
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            shortlist: default_shortlist(),
        }
    }

    /// Parses the settings from a TOML table.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(format!(
                "endpoint `{}` is not an http(s) URL",
                self.endpoint
            ));
        }
        if self.max_retries == 0 {
            return Err("max_retries must be at least 1".into());
        }
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err("timeout_s must be positive".into());
        }
        if self.auth_header.is_some() != self.auth_env.is_some() {
            return Err("auth_header and auth_env must be set together".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Http(String),
    #[error("endpoint answered {status}: {body}")]
    Status { status: u16, body: String },
}

/// Delivers one request body and returns the response body.
pub trait Transport: Send + Sync {
    fn post(&self, body: &str) -> Result<String, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    auth: Option<(String, String)>,
}

impl HttpTransport {
    /// Reads the auth secret from the configured environment variable.
    pub fn from_config(cfg: &LlmConfig) -> Result<Self, String> {
        cfg.check()?;
        let auth = match (&cfg.auth_header, &cfg.auth_env) {
            (Some(h), Some(var)) => {
                let v = std::env::var(var)
                    .map_err(|_| format!("environment variable `{var}` is not set"))?;
                Some((h.clone(), v))
            }
            _ => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint: cfg.endpoint.clone(),
            auth,
        })
    }
}

impl Transport for HttpTransport {
    fn post(&self, body: &str) -> Result<String, TransportError> {
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some((h, v)) = &self.auth {
            req = req.header(h.as_str(), v.as_str());
        }
        let mut resp = req
            .send(body)
            .map_err(|e| TransportError::Http(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        if (200..300).contains(&status) {
            Ok(text)
        } else {
            Err(TransportError::Status { status, body: text })
        }
    }
}

/// Replays canned responses in order; records every request body.
pub struct ScriptedTransport {
    responses: Mutex<Vec<Result<String, TransportError>>>,
    pub requests: Mutex<Vec<String>>,
}

impl ScriptedTransport {
    pub fn new(mut responses: Vec<Result<String, TransportError>>) -> Self {
        responses.reverse();
        Self {
            responses: Mutex::new(responses),
            requests: Mutex::new(Vec::new()),
        }
    }
}

impl Transport for ScriptedTransport {
    fn post(&self, body: &str) -> Result<String, TransportError> {
        self.requests.lock().unwrap().push(body.to_string());
        self.responses
            .lock()
            .unwrap()
            .pop()
            .unwrap_or_else(|| Err(TransportError::Http("no scripted response left".into())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSummary {
    pub name: String,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub n_gates: usize,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortlistEntry {
    pub node: String,
    pub score: f64,
    pub features: NodeFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub task: String,
    pub circuit: CircuitSummary,
    pub shortlist: Vec<ShortlistEntry>,
    pub key_width: usize,
    pub allowed_styles: Vec<Style>,
    pub constraints_doc: String,
    pub seed: u64,
    /// Problems found in the previous response, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub previous_errors: Vec<String>,
}

impl LlmRequest {
    pub fn new(
        n: &Netlist,
        feats: &FeatureMap,
        ranked: &RankedSites,
        key_width: usize,
        policy: StylePolicy,
        seed: u64,
        shortlist: usize,
    ) -> Self {
        Self {
            task: "lockplan_v1".into(),
            circuit: CircuitSummary {
                name: n.name().to_string(),
                n_inputs: ranked.circuit_stats.inputs,
                n_outputs: ranked.circuit_stats.outputs,
                n_gates: ranked.circuit_stats.gates,
                depth: ranked.circuit_stats.max_depth,
            },
            shortlist: ranked
                .entries
                .iter()
                .take(shortlist.max(key_width * 2))
                .filter_map(|e| {
                    feats.get(&e.node).map(|f| ShortlistEntry {
                        node: e.node.clone(),
                        score: e.score,
                        features: f.clone(),
                    })
                })
                .collect(),
            key_width,
            allowed_styles: policy.allowed_styles(),
            constraints_doc: CONSTRAINTS_DOC.into(),
            seed,
            previous_errors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutcome {
    pub plan: LockPlan,
    pub provenance: Provenance,
    pub attempts: usize,
    /// Rejection or transport messages, one per failed attempt.
    pub errors: Vec<String>,
}

/// Problems with a response, empty when it is acceptable.
fn review(text: &str, n: &Netlist, req: &LlmRequest) -> Result<LockPlan, Vec<String>> {
    let plan = parse_plan(text.trim()).map_err(|e| match e {
        PlanError::Schema(m) => vec![format!("schema: {m}")],
        PlanError::Structure(v) => v.iter().map(|x| x.to_string()).collect(),
    })?;
    let mut errs = Vec::new();
    if plan.key_width != req.key_width {
        errs.push(format!(
            "key_width must be {}, found {}",
            req.key_width, plan.key_width
        ));
    }
    for (i, inst) in plan.instances.iter().enumerate() {
        if !req.allowed_styles.contains(&inst.style) {
            errs.push(format!("instance {i}: style {} is not allowed", inst.style));
        }
    }
    if let Err(v) = validate_plan(&plan, n, &PlanLimits::default()) {
        errs.extend(v.iter().map(|x| x.to_string()));
    }
    if errs.is_empty() {
        Ok(plan)
    } else {
        Err(errs)
    }
}

/// Requests a plan from `transport`, retrying with the rejection reasons up
/// to `max_attempts` requests in total, then falling back to
/// [`heuristic_plan`].
#[allow(clippy::too_many_arguments)]
pub fn llm_plan(
    n: &Netlist,
    feats: &FeatureMap,
    ranked: &RankedSites,
    key_width: usize,
    policy: StylePolicy,
    seed: u64,
    cfg: &LlmConfig,
    transport: &dyn Transport,
) -> Result<LlmOutcome, PlannerError> {
    let mut req = LlmRequest::new(n, feats, ranked, key_width, policy, seed, cfg.shortlist);
    let mut errors = Vec::new();
    let attempts = cfg.max_retries.max(1) as usize;
    for attempt in 1..=attempts {
        let body = serde_json::to_string(&req).expect("request serialization cannot fail");
        let problems = match transport.post(&body) {
            Ok(text) => match review(&text, n, &req) {
                Ok(plan) => {
                    return Ok(LlmOutcome {
                        plan,
                        provenance: Provenance::Llm,
                        attempts: attempt,
                        errors,
                    })
                }
                Err(p) => p,
            },
            Err(e) => vec![e.to_string()],
        };
        errors.push(problems.join("; "));
        req.previous_errors = problems;
    }
    let plan = heuristic_plan(n, ranked, key_width, policy, seed)?;
    Ok(LlmOutcome {
        plan,
        provenance: Provenance::Fallback,
        attempts,
        errors,
    })
}
