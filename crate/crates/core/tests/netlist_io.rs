// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{bench_path, random_circuit, random_plan, ISCAS85};
use lockforge::compile::compile_plan;
use lockforge::netlist::{
    bind_key, emit_verilog, parse_bench, read_bench_file, validate, write_bench, BenchError,
    KeyVector,
};
use lockforge::sim::evaluate_scalar;
use proptest::prelude::*;

#[test]
fn iscas85_round_trip() {
    for name in ISCAS85.iter().chain(["c17"].iter()) {
        let n = read_bench_file(bench_path(name)).unwrap();
        assert!(validate(&n.to_raw()).is_ok());
        let again = parse_bench(name, &write_bench(&n)).unwrap();
        assert_eq!(n, again, "{name}");
    }
}

#[test]
fn iscas85_sizes() {
    // interface widths are those of the standard distribution; gate counts
    // are those of the shipped conversion
    let want = [
        ("c432", 171, 36, 7),
        ("c499", 174, 41, 32),
        ("c880", 323, 60, 26),
        ("c1355", 518, 41, 32),
        ("c1908", 479, 33, 25),
        ("c3540", 1043, 50, 22),
        ("c5315", 1605, 178, 123),
        ("c7552", 2381, 207, 108),
    ];
    for (name, gates, ins, outs) in want {
        let n = read_bench_file(bench_path(name)).unwrap();
        assert_eq!(
            (
                n.num_gates(),
                n.primary_inputs().len(),
                n.primary_outputs().len()
            ),
            (gates, ins, outs),
            "{name}"
        );
    }
}

#[test]
fn syntax_error_has_position() {
    let e = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = AND(a,, a)").unwrap_err();
    match e {
        BenchError::Syntax { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn verilog_names_every_port() {
    let n = read_bench_file(bench_path("c17")).unwrap();
    let v = emit_verilog(&n);
    assert!(v.contains("module c17"));
    assert!(v.trim_end().ends_with("endmodule"));
    assert_eq!(v.matches("assign ").count(), 6);
    for port in ["input n_1;", "input n_7;", "output n_22;", "output n_23;"] {
        assert!(v.contains(port), "{port}");
    }
}

#[test]
fn key_header_round_trip() {
    let n = read_bench_file(bench_path("c17")).unwrap();
    let plan = random_plan(&n, 3, 4).unwrap();
    let locked = compile_plan(&n, &plan).unwrap();
    let text = write_bench(&locked);
    assert!(text.starts_with(&format!("# key={}", plan.correct_key())));
    let back = parse_bench("c17", &text).unwrap();
    assert_eq!(back.correct_key(), Some(&plan.correct_key()));
    assert_eq!(back, locked);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn write_then_parse_is_identity(seed in any::<u64>()) {
        let n = random_circuit(seed, 10, 40);
        let back = parse_bench(n.name(), &write_bench(&n)).unwrap();
        prop_assert_eq!(back, n);
    }

    #[test]
    fn locked_round_trip_and_bind(seed in any::<u64>(), x in any::<u64>()) {
        let n = random_circuit(seed, 8, 25);
        let Some(plan) = random_plan(&n, seed, 6) else { return Ok(()) };
        let locked = compile_plan(&n, &plan).unwrap();
        prop_assert_eq!(parse_bench(n.name(), &write_bench(&locked)).unwrap(), locked.clone());
        let key = plan.correct_key();
        let bound = bind_key(&locked, &key).unwrap();
        prop_assert!(!bound.is_locked());
        let pattern: Vec<bool> = (0..n.primary_inputs().len()).map(|i| x >> i & 1 == 1).collect();
        let want = evaluate_scalar(&n, &pattern, None).unwrap();
        prop_assert_eq!(&evaluate_scalar(&bound, &pattern, None).unwrap(), &want);
        prop_assert_eq!(&evaluate_scalar(&locked, &pattern, Some(&key)).unwrap(), &want);
    }

    #[test]
    fn bind_wrong_key_matches_keyed_simulation(seed in any::<u64>(), kbits in any::<u64>(), x in any::<u64>()) {
        let n = random_circuit(seed, 8, 25);
        let Some(plan) = random_plan(&n, seed, 6) else { return Ok(()) };
        let locked = compile_plan(&n, &plan).unwrap();
        let key = KeyVector::from_u64(kbits, plan.key_width);
        let bound = bind_key(&locked, &key).unwrap();
        let pattern: Vec<bool> = (0..n.primary_inputs().len()).map(|i| x >> i & 1 == 1).collect();
        prop_assert_eq!(
            evaluate_scalar(&bound, &pattern, None).unwrap(),
            evaluate_scalar(&locked, &pattern, Some(&key)).unwrap()
        );
    }
}

#[test]
fn verilog_accepted_by_external_front_end() {
    let tool = ["iverilog", "yosys"]
        .into_iter()
        .find(|t| std::process::Command::new(t).arg("-V").output().is_ok());
    let Some(tool) = tool else {
        eprintln!("neither iverilog nor yosys on PATH; skipping external Verilog check");
        return;
    };
    let n = read_bench_file(bench_path("c17")).unwrap();
    let plan = random_plan(&n, 1, 3).unwrap();
    let locked = compile_plan(&n, &plan).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("c17.v");
    std::fs::write(&f, emit_verilog(&locked)).unwrap();
    let status = match tool {
        "iverilog" => std::process::Command::new("iverilog")
            .arg("-o")
            .arg(dir.path().join("a.out"))
            .arg(&f)
            .status(),
        _ => std::process::Command::new("yosys")
            .arg("-q")
            .arg("-p")
            .arg(format!("read_verilog {}", f.display()))
            .status(),
    }
    .unwrap();
    assert!(status.success());
}
