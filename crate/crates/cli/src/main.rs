// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lockforge::analysis::{compute_features, rank_nodes, score, CircuitStats, NodeFeatures};
use lockforge::attack::{
    attack_constraints, bits_from_str, dip_attack, enumerate_keys, AttackBudget, DEFAULT_COUNT_CAP,
    DEFAULT_DIP_BUDGET, DEFAULT_TIME_BUDGET_S,
};
use lockforge::campaign::{
    aggregate, read_csv_rows, read_report, run_campaign, verify_locked, AggregateRow,
    CampaignConfig, SimulationConfig, CSV_FILE,
};
use lockforge::compile::compile_plan;
use lockforge::netlist::{emit_verilog, read_bench_file, write_bench, Netlist};
use lockforge::plan::{parse_plan, LockPlan};
use lockforge::planner::{heuristic_plan, llm_plan, HttpTransport, LlmConfig, StylePolicy};

#[derive(Parser)]
#[command(
    name = "lockforge",
    version,
    about = "Logic locking and SAT-attack evaluation for .bench netlists"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for planning and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for campaigns (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Structural features and site ranking of a netlist.
    Analyze {
        bench: PathBuf,
        /// Rows shown in text mode.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Plan and compile a locked netlist.
    Lock {
        bench: PathBuf,
        #[arg(long, short = 'k', default_value_t = 8)]
        width: usize,
        /// xor_xnor, mux_lock, perturb_restore, pairwise_subgraph or hybrid.
        #[arg(long, default_value = "xor_xnor")]
        style: StylePolicy,
        /// Compile this lockplan_v1 file instead of planning.
        #[arg(long, conflicts_with = "llm")]
        plan: Option<PathBuf>,
        /// TOML file with LLM endpoint settings; plans through the endpoint.
        #[arg(long)]
        llm: Option<PathBuf>,
    },
    /// Check a locked netlist against its original.
    Verify {
        original: PathBuf,
        locked: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Run the DIP attack on a locked netlist, the original acting as oracle.
    Attack {
        original: PathBuf,
        locked: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DIP_BUDGET)]
        dip_budget: usize,
        #[arg(long, default_value_t = DEFAULT_TIME_BUDGET_S)]
        time_budget: f64,
        #[arg(long, default_value_t = DEFAULT_COUNT_CAP)]
        count_cap: u64,
        /// Also list every functionally correct key (small keys only).
        #[arg(long)]
        enumerate: bool,
        /// Write the final key-constraint CNF in DIMACS format.
        #[arg(long)]
        dimacs: Option<PathBuf>,
    },
    /// Run a campaign described by a TOML config.
    Campaign { config: PathBuf },
    /// Summarize a campaign output directory.
    Report {
        dir: PathBuf,
        /// Recompute the aggregates from campaign.csv and compare.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = SimulationConfig::default().correct_key_patterns)]
    key_patterns: usize,
    #[arg(long, default_value_t = SimulationConfig::default().corruption_inputs)]
    corruption_inputs: usize,
    #[arg(long, default_value_t = SimulationConfig::default().corruption_keys)]
    corruption_keys: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load(path: &Path) -> Result<Netlist> {
    read_bench_file(path).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = cli.global;
    let seed = g.seed.unwrap_or(1);
    match cli.cmd {
        Command::Analyze { bench, top } => analyze(&g, &bench, top),
        Command::Lock {
            bench,
            width,
            style,
            plan,
            llm,
        } => lock(&g, seed, &bench, width, style, plan, llm),
        Command::Verify {
            original,
            locked,
            sim,
        } => {
            let orig = load(&original)?;
            let locked = load(&locked)?;
            let cfg = SimulationConfig {
                correct_key_patterns: sim.key_patterns,
                corruption_inputs: sim.corruption_inputs,
                corruption_keys: sim.corruption_keys,
            };
            let r = verify_locked(&orig, &locked, &cfg, seed);
            if g.json {
                print_json(&r)?;
            } else {
                println!("correct_key_ok   {}", r.correct_key_ok);
                if let Some(k) = &r.key_check {
                    println!(
                        "simulation       {} mismatching of {} patterns{}",
                        k.mismatches,
                        k.patterns,
                        if k.exhaustive { " (exhaustive)" } else { "" }
                    );
                }
                println!("sat equivalence  {:?}", r.cec_equivalent);
                if let Some(c) = &r.corruption {
                    println!("bit_error_rate   {:.6}", c.bit_error_rate);
                    println!("pattern_error    {:.6}", c.pattern_error_rate);
                }
                if let Some(o) = &r.overhead {
                    println!(
                        "overhead         {:.4} ({} gates, {} key inputs)",
                        o.gate_overhead_ratio, o.key_gate_count, o.key_input_count
                    );
                }
                if let Some(e) = &r.error {
                    println!("error            {e}");
                }
            }
            Ok(if r.correct_key_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Attack {
            original,
            locked,
            dip_budget,
            time_budget,
            count_cap,
            enumerate,
            dimacs,
        } => {
            let orig = load(&original)?;
            let locked = load(&locked)?;
            let budget = AttackBudget {
                dip_budget,
                time_budget_s: time_budget,
                count_cap,
            };
            let r = dip_attack(&locked, &orig, &budget)?;
            if let Some(p) = dimacs {
                let parse = |v: &[String]| -> Vec<Vec<bool>> {
                    v.iter().filter_map(|s| bits_from_str(s)).collect()
                };
                let f = attack_constraints(&locked, &parse(&r.dips), &parse(&r.responses));
                fs::write(&p, f.to_dimacs()).with_context(|| format!("writing {}", p.display()))?;
            }
            let keys = if enumerate {
                Some(
                    enumerate_keys(&locked, &orig)?
                        .iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>(),
                )
            } else {
                None
            };
            if g.json {
                print_json(&serde_json::json!({ "attack": r, "equivalent_keys": keys }))?;
            } else {
                println!("outcome          {}", r.outcome.as_str());
                println!("dips             {}", r.dip_count);
                println!("solver_time_s    {:.3}", r.solver_time_s);
                if let Some(k) = &r.recovered_key {
                    println!("recovered_key    {k}");
                }
                println!("remaining_keys   {}", r.remaining_keys);
                if let Some(keys) = keys {
                    println!("equivalent keys  {}", keys.len());
                    for k in keys {
                        println!("  {k}");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Campaign { config } => {
            let mut cfg = CampaignConfig::load(&config)?;
            if let Some(s) = g.seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = g.out {
                cfg.out = o;
            }
            if let Some(j) = g.jobs {
                cfg.jobs = j;
            }
            let report = run_campaign(&cfg)?;
            if g.json {
                print_json(&report)?;
            } else {
                let failed = report.rows.iter().filter(|r| !r.is_ok()).count();
                println!(
                    "{} runs, {} failed; reports in {}",
                    report.rows.len(),
                    failed,
                    cfg.out.display()
                );
                print_aggregates(&report.aggregates);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir, check } => {
            let report = read_report(&dir)?;
            if check {
                let rows = read_csv_rows(&dir.join(CSV_FILE))?;
                if aggregate(&rows)? != report.aggregates {
                    bail!("aggregates recomputed from {CSV_FILE} differ from campaign.json");
                }
            }
            if g.json {
                print_json(&report.aggregates)?;
            } else {
                print_aggregates(&report.aggregates);
                if check {
                    println!("aggregates match {CSV_FILE}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[derive(Serialize)]
struct RankedFeature<'a> {
    #[serde(flatten)]
    features: &'a NodeFeatures,
    score: f64,
}

#[derive(Serialize)]
struct AnalysisReport<'a> {
    circuit: &'a str,
    circuit_stats: CircuitStats,
    nodes: Vec<RankedFeature<'a>>,
}

fn analyze(g: &Global, bench: &Path, top: usize) -> Result<ExitCode> {
    let n = load(bench)?;
    let feats = compute_features(&n);
    let ranked = rank_nodes(&n, &feats);
    let stats = ranked.circuit_stats;
    let report = AnalysisReport {
        circuit: n.name(),
        circuit_stats: stats,
        nodes: ranked
            .entries
            .iter()
            .filter_map(|e| feats.get(&e.node))
            .map(|f| RankedFeature {
                features: f,
                score: score(f, stats.gates, stats.max_depth),
            })
            .collect(),
    };
    if let Some(out) = &g.out {
        fs::create_dir_all(out)?;
        let p = out.join(format!("{}_analysis.json", n.name()));
        fs::write(&p, serde_json::to_string_pretty(&report)?)?;
    }
    if g.json {
        return print_json(&report).map(|_| ExitCode::SUCCESS);
    }
    println!(
        "{}: {} inputs, {} outputs, {} gates, depth {}",
        n.name(),
        stats.inputs,
        stats.outputs,
        stats.gates,
        stats.max_depth
    );
    println!(
        "{:<12} {:>7} {:>6} {:>6} {:>7} {:>8} {:>6}",
        "node", "score", "depth", "fanout", "tfo", "coverage", "obs"
    );
    for r in report.nodes.iter().take(top) {
        let f = r.features;
        println!(
            "{:<12} {:>7.4} {:>6} {:>6} {:>7} {:>8.3} {:>6.3}",
            f.node, r.score, f.depth, f.fanout, f.tfo_size, f.cone_coverage, f.observability
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn lock(
    g: &Global,
    seed: u64,
    bench: &Path,
    width: usize,
    style: StylePolicy,
    plan_file: Option<PathBuf>,
    llm: Option<PathBuf>,
) -> Result<ExitCode> {
    let n = load(bench)?;
    let feats = compute_features(&n);
    let ranked = rank_nodes(&n, &feats);
    let (plan, provenance): (LockPlan, &str) = if let Some(p) = plan_file {
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        (parse_plan(&text)?, "file")
    } else if let Some(p) = llm {
        let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        let cfg = LlmConfig::from_toml(&text).map_err(anyhow::Error::msg)?;
        let t = HttpTransport::from_config(&cfg).map_err(anyhow::Error::msg)?;
        let out = llm_plan(&n, &feats, &ranked, width, style, seed, &cfg, &t)?;
        for e in &out.errors {
            eprintln!("llm attempt rejected: {e}");
        }
        (out.plan, out.provenance.as_str())
    } else {
        (
            heuristic_plan(&n, &ranked, width, style, seed)?,
            "heuristic",
        )
    };
    let locked = compile_plan(&n, &plan)?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    let stem = format!("{}_k{}_{}", n.name(), plan.key_width, style.as_str());
    let bench_path = out.join(format!("{stem}.bench"));
    let v_path = out.join(format!("{stem}.v"));
    let plan_path = out.join(format!("{stem}.plan.json"));
    fs::write(&bench_path, write_bench(&locked))?;
    fs::write(&v_path, emit_verilog(&locked))?;
    fs::write(&plan_path, plan.to_json())?;
    let key = plan.correct_key().to_string();
    if g.json {
        print_json(&serde_json::json!({
            "bench": bench_path,
            "verilog": v_path,
            "plan": plan_path,
            "provenance": provenance,
            "correct_key": key,
            "gates": locked.num_gates(),
        }))?;
    } else {
        println!("wrote {}", bench_path.display());
        println!("wrote {}", v_path.display());
        println!("wrote {}", plan_path.display());
        println!("plan from {provenance}, key {key}");
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.prec$}"))
}

fn print_aggregates(rows: &[AggregateRow]) {
    println!(
        "{:<10} {:>6} {:>5} {:>7} {:>10} {:>8} {:>9} {:>10}",
        "planner", "width", "runs", "failed", "corruption", "dips", "overhead", "runtime_s"
    );
    for a in rows {
        println!(
            "{:<10} {:>6} {:>5} {:>7} {:>10} {:>8} {:>9} {:>10}",
            a.planner,
            a.key_width.map_or_else(|| "all".into(), |w| w.to_string()),
            a.runs,
            a.failed,
            fmt_opt(a.mean_bit_error_rate, 4),
            fmt_opt(a.mean_dip_count, 2),
            fmt_opt(a.mean_gate_overhead_ratio, 4),
            fmt_opt(a.mean_runtime_s, 3),
        );
    }
}
