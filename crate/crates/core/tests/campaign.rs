// SPDX-License-Identifier: Apache-2.0

mod common;

use std::fs;

use common::{bench_path, ISCAS85};
use lockforge::campaign::{
    aggregate, read_csv_rows, read_report, run_campaign, run_campaign_with, CampaignConfig,
    PlannerKind, RunRecord,
};
use lockforge::netlist::read_bench_file;
use lockforge::plan::Style;
use lockforge::planner::{LlmConfig, ScriptedTransport, StylePolicy};

fn c17_config(out: &std::path::Path) -> CampaignConfig {
    let mut cfg = CampaignConfig::new(vec![bench_path("c17")], out);
    cfg.key_widths = vec![2];
    cfg.styles = vec![StylePolicy::Fixed(Style::XorXnor)];
    cfg.seeds = vec![7];
    cfg
}

#[test]
fn c17_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_campaign(&c17_config(dir.path())).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.cell, "c17_k2_xor_xnor_s7");
    assert!(row.is_ok(), "{:?}", row.error);
    assert_eq!(row.correct_key_ok, Some(true));
    assert_eq!(row.attack_outcome.as_deref(), Some("key_recovered"));
    let bench = dir.path().join("c17_k2_xor_xnor.bench");
    assert_eq!(row.bench_path.as_deref(), Some("c17_k2_xor_xnor.bench"));
    let locked = read_bench_file(&bench).unwrap();
    assert_eq!(locked.key_inputs().len(), 2);
    assert!(dir.path().join("c17_k2_xor_xnor.v").exists());
    let rec: RunRecord =
        serde_json::from_str(&fs::read_to_string(dir.path().join(&row.run_json_path)).unwrap())
            .unwrap();
    assert_eq!(&rec.row, row);
    assert!(!rec.candidates.is_empty());
    assert_eq!(read_report(dir.path()).unwrap(), report);
}

#[test]
fn grid_arity_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CampaignConfig::new(ISCAS85.iter().map(|c| bench_path(c)).collect(), dir.path());
    cfg.styles = vec![StylePolicy::Fixed(Style::XorXnor)];
    let report = run_campaign(&cfg).unwrap();
    assert_eq!(report.rows.len(), 24);
    assert!(report.rows.iter().all(|r| r.is_ok()));
    let csv_rows = read_csv_rows(&dir.path().join("campaign.csv")).unwrap();
    assert_eq!(csv_rows, report.rows);
    assert_eq!(aggregate(&csv_rows).unwrap(), report.aggregates);
    // 3 widths + the all-widths group
    assert_eq!(report.aggregates.len(), 4);
    assert_eq!(report.aggregates[3].runs, 24);
}

#[test]
fn failures_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.bench");
    fs::write(&bad, "INPUT(a)\nOUTPUT(y)\ny = FOO(a)\n").unwrap();
    let mut cfg = c17_config(&dir.path().join("out"));
    cfg.circuits.push(bad);
    cfg.circuits.push(dir.path().join("absent.bench"));
    // c17 has only six sites: 12 xor bits cannot fit
    cfg.key_widths = vec![2, 12];
    let report = run_campaign(&cfg).unwrap();
    assert_eq!(report.rows.len(), 6);
    let ok: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| r.is_ok())
        .map(|r| r.cell.as_str())
        .collect();
    assert_eq!(ok, ["c17_k2_xor_xnor_s7"]);
    let broken = report.rows.iter().find(|r| r.circuit == "broken").unwrap();
    assert!(broken.error.as_deref().unwrap().contains("FOO"));
    let wide = report
        .rows
        .iter()
        .find(|r| r.cell == "c17_k12_xor_xnor_s7")
        .unwrap();
    assert!(wide.error.as_deref().unwrap().contains("legal sites"));
    assert_eq!(report.aggregates.last().unwrap().failed, 5);
    for r in &report.rows {
        assert!(cfg.out.join(&r.run_json_path).exists());
    }
}

#[test]
fn rerun_is_byte_identical_across_job_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut cfg = CampaignConfig::new(vec![bench_path("c432"), bench_path("c880")], a.path());
    cfg.key_widths = vec![8, 16];
    cfg.seeds = vec![1, 2];
    cfg.candidates_per_pair = 2;
    cfg.jobs = 1;
    let ra = run_campaign(&cfg).unwrap();
    cfg.out = b.path().to_path_buf();
    cfg.jobs = 3;
    let rb = run_campaign(&cfg).unwrap();
    let mut n = 0;
    for (x, y) in ra.rows.iter().zip(&rb.rows) {
        assert_eq!(x.cell, y.cell);
        assert_eq!(x.bit_error_rate, y.bit_error_rate);
        assert_eq!(x.dip_count, y.dip_count);
        let p = x.bench_path.as_ref().unwrap();
        assert!(p.starts_with(&format!("s{}/", x.seed)));
        assert_eq!(
            fs::read(a.path().join(p)).unwrap(),
            fs::read(b.path().join(p)).unwrap(),
            "{p}"
        );
        n += 1;
    }
    assert_eq!(n, 2 * 2 * 5 * 2);
    assert!(ra.rows.iter().all(|r| r.candidates >= 2));
}

#[test]
fn llm_campaign_counts_fallbacks() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = c17_config(dir.path());
    cfg.planner = PlannerKind::Llm;
    cfg.llm = Some(LlmConfig::new("http://127.0.0.1:9/"));
    let t = ScriptedTransport::new(vec![
        Ok("nope".into()),
        Ok("nope".into()),
        Ok("nope".into()),
    ]);
    let report = run_campaign_with(&cfg, Some(&t)).unwrap();
    let row = &report.rows[0];
    assert!(row.is_ok());
    assert_eq!(row.provenance.as_deref(), Some("fallback"));
    assert_eq!((row.llm_requests, row.llm_fallbacks), (3, 1));
    assert_eq!(report.aggregates[0].llm_fallbacks, 1);
    assert_eq!(report.planner, "llm");
}

#[test]
fn config_file_paths_resolve_against_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(bench_path("c17"), dir.path().join("c17.bench")).unwrap();
    let path = dir.path().join("campaign.toml");
    fs::write(
        &path,
        "circuits = [\"c17.bench\"]\nkey_widths = [2]\nstyles = [\"mux_lock\"]\n\n[attack]\ndip_budget = 50\n",
    )
    .unwrap();
    let cfg = CampaignConfig::load(&path).unwrap();
    assert_eq!(cfg.circuits, vec![dir.path().join("c17.bench")]);
    assert_eq!(cfg.attack.dip_budget, 50);
    assert!(cfg.check().is_ok());
}
