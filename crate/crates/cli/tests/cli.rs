// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bench(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../benchmarks/iscas85")
        .join(format!("{name}.bench"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lockforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_json_lists_every_gate() {
    let v = json(&["analyze", s(&bench("c17")), "--json"]);
    assert_eq!(v["circuit_stats"]["gates"], 6);
    let nodes = v["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 6);
    assert!(nodes[0]["score"].as_f64().unwrap() >= nodes[5]["score"].as_f64().unwrap());
    assert!(nodes[0]["tfo_size"].is_number());
}

#[test]
fn lock_verify_attack_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let c432 = bench("c432");
    let lock = json(&[
        "lock",
        s(&c432),
        "-k",
        "8",
        "--style",
        "mux_lock",
        "--seed",
        "4",
        "--out",
        s(out),
        "--json",
    ]);
    let locked = out.join("c432_k8_mux_lock.bench");
    assert_eq!(lock["bench"], s(&locked));
    assert!(out.join("c432_k8_mux_lock.v").exists());
    assert!(out.join("c432_k8_mux_lock.plan.json").exists());

    let v = json(&["verify", s(&c432), s(&locked), "--json"]);
    assert_eq!(v["correct_key_ok"], true);
    assert_eq!(v["cec_equivalent"], true);
    assert!(v["corruption"]["bit_error_rate"].as_f64().unwrap() > 0.0);

    let cnf = out.join("k.cnf");
    let a = json(&[
        "attack",
        s(&c432),
        s(&locked),
        "--json",
        "--dimacs",
        s(&cnf),
        "--enumerate",
    ]);
    assert_eq!(a["attack"]["outcome"], "key_recovered");
    // mux locks may admit several equivalent keys
    let class = a["equivalent_keys"].as_array().unwrap();
    assert!(class.contains(&a["attack"]["recovered_key"]));
    assert!(class.contains(&lock["correct_key"]));
    assert_eq!(a["attack"]["remaining_keys"]["exact"], class.len());
    assert!(fs::read_to_string(&cnf).unwrap().starts_with("p cnf "));
}

#[test]
fn lock_from_plan_file_and_enumerate() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("p.json");
    fs::write(
        &plan,
        r#"{"version":"lockplan_v1","source_circuit":"c17","key_width":2,"seed":0,
           "instances":[{"style":"xor_xnor","targets":["22"],"key_bits":[0],"correct_bits":[1]},
                        {"style":"xor_xnor","targets":["23"],"key_bits":[1],"correct_bits":[0]}]}"#,
    )
    .unwrap();
    let c17 = bench("c17");
    ok(&["lock", s(&c17), "--plan", s(&plan), "--out", s(dir.path())]);
    let locked = dir.path().join("c17_k2_xor_xnor.bench");
    let text = ok(&["attack", s(&c17), s(&locked), "--enumerate"]);
    assert!(text.contains("equivalent keys  1"));
    assert!(text.contains("recovered_key    10"));
}

#[test]
fn verify_flags_wrong_locked_file() {
    let dir = tempfile::tempdir().unwrap();
    let c17 = bench("c17");
    ok(&["lock", s(&c17), "-k", "2", "--out", s(dir.path())]);
    let path = dir.path().join("c17_k2_xor_xnor.bench");
    let text = fs::read_to_string(&path).unwrap();
    let key_line = text.lines().next().unwrap();
    let flipped: String = key_line
        .chars()
        .map(|c| match c {
            '0' => '1',
            '1' => '0',
            c => c,
        })
        .collect();
    fs::write(&path, text.replacen(key_line, &flipped, 1)).unwrap();
    let out = run(&["verify", s(&c17), s(&path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn campaign_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        format!(
            "circuits = [{:?}, {:?}]\nkey_widths = [2, 4]\nstyles = [\"xor_xnor\", \"hybrid\"]\nseeds = [3, 9]\n",
            s(&bench("c17")),
            s(&bench("c432"))
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let text = ok(&[
        "campaign",
        s(&cfg),
        "--out",
        s(&out),
        "--seed",
        "5",
        "--jobs",
        "2",
    ]);
    assert!(text.contains("8 runs, 0 failed"), "{text}");
    // --seed replaces the seed list, so artifacts are not split by seed
    assert!(out.join("c432_k4_hybrid.bench").exists());
    assert!(out.join("run_c17_k2_hybrid_s5.json").exists());
    let checked = ok(&["report", s(&out), "--check"]);
    assert!(checked.contains("aggregates match campaign.csv"));
    let aggs = json(&["report", s(&out), "--json"]);
    assert_eq!(aggs.as_array().unwrap().len(), 3);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = run(&["analyze", "/nonexistent.bench"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = run(&["lock", s(&bench("c17")), "--style", "spiral"]);
    assert!(!out.status.success());
}
