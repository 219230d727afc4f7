use std::path::Path;
use std::process::Command;

use reluplan::commands::{cmd_plan, cmd_potentials, PlanArgs, PotentialsArgs};
use reluplan::format::{InstanceFile, PotentialsFile};
use reluplan_core::milp::lp_format::parse_lp;
use reluplan_core::milp::{solve_milp, MilpParams};
use reluplan_core::nn::{Activation, Layer, NeuralNet};
use reluplan_core::problem::{simple_instance, LinearForm, RewardSpec, VarDecl};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reluplan"))
}

fn run(args: &[&str]) -> std::process::Output {
    bin().args(args).output().unwrap()
}

fn write_instance(path: &Path, file: &InstanceFile) {
    std::fs::write(path, serde_json::to_string_pretty(file).unwrap()).unwrap();
}

/// `s' = relu(s)` on `s ∈ [0, 1]` with reward `s'`.
fn relu_toy() -> InstanceFile {
    let net = NeuralNet::new(
        vec![
            Layer::new(vec![vec![1.0]], vec![0.0], Activation::Relu),
            Layer::new(vec![vec![1.0]], vec![0.0], Activation::Linear),
        ],
        vec![0],
        vec![],
        vec![0],
    )
    .unwrap();
    let reward = RewardSpec { linear: LinearForm::new(vec![1.0], vec![]), ..Default::default() };
    let inst = simple_instance(vec![VarDecl::new("s", 0.0, 1.0)], vec![], vec![0.0], reward, 3);
    InstanceFile::from_parts(&inst, &net, false, None)
}

#[test]
fn gen_writes_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nav8.json");
    let o = run(&[
        "gen",
        "--domain",
        "navigation",
        "--size",
        "8",
        "--horizon",
        "100",
        "--seed",
        "1",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file: InstanceFile = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let (inst, _) = file.to_parts().unwrap();
    assert!(file.synthetic);
    assert_eq!(inst.horizon, 100);
}

#[test]
fn gen_is_deterministic() {
    let a = run(&["gen", "--domain", "random", "--widths", "4:6:2", "--seed", "7"]);
    let b = run(&["gen", "--domain", "random", "--widths", "4:6:2", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["gen", "--domain", "random", "--widths", "4:6:2", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn gen_reservoir_horizon() {
    let o = run(&["gen", "--domain", "reservoir", "--size", "3", "--horizon", "500"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["horizon"], 500);
    assert_eq!(v["state_vars"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(run(&["gen", "--domain", "maze"]).status.code(), Some(1));
    assert_eq!(run(&["gen", "--domain", "random"]).status.code(), Some(1));
    assert_eq!(run(&["plan"]).status.code(), Some(1));
    assert_eq!(run(&["plan", "/does/not/exist.json"]).status.code(), Some(1));
}

#[test]
fn toy_potentials_and_default_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("toy.json");
    write_instance(&inst, &relu_toy());
    let out = dir.path().join("pot.json");
    let o = run(&["potentials", inst.to_str().unwrap(), "--intervals", "1", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p: PotentialsFile = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(p.epsilon, 1e-6);
    assert_eq!(p.n, 1);
    assert!((p.units[0].v_on[0] - 1.0).abs() <= 1e-6);
    assert!(p.units[0].v_off.abs() <= 1e-6);
    assert!(dir.path().join("pot.trace.csv").exists());
}

#[test]
fn infeasible_plan_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = relu_toy();
    // relu(s) >= 0, so a negative goal is unreachable.
    file.state_vars[0].lo = -1.0;
    file.goal = vec![reluplan::format::Bound::Range([-1.0, -0.5])];
    let inst = dir.path().join("bad.json");
    write_instance(&inst, &file);
    let o = run(&["plan", inst.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}

#[test]
fn identity_toy_plans_zero_actions() {
    let net = NeuralNet::identity(1, 1);
    // s' = s + 0·a; the reward prefers a = 0.
    let mut weights = net.layers()[0].weights.clone();
    weights[0][1] = 0.0;
    let net =
        NeuralNet::new(vec![Layer::new(weights, vec![0.0], Activation::Linear)], vec![0], vec![1], vec![0]).unwrap();
    let reward = RewardSpec {
        constant: 2.0,
        linear: LinearForm::new(vec![1.0], vec![]),
        abs_terms: vec![reluplan_core::problem::AbsTerm {
            weight: 1.0,
            form: LinearForm::new(vec![], vec![1.0]),
            target: 0.0,
        }],
    };
    let mut inst =
        simple_instance(vec![VarDecl::new("s", -1.0, 1.0)], vec![VarDecl::new("a", -1.0, 1.0)], vec![0.5], reward, 4);
    inst.goal = vec![reluplan_core::Interval::point(0.5)];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("id.json");
    write_instance(&path, &InstanceFile::from_parts(&inst, &net, false, None));
    let out = cmd_plan(&PlanArgs {
        instance: path,
        strengthen: None,
        time_limit: 60.0,
        node_limit: None,
        export_lp: None,
        output: Some(dir.path().join("plan.json")),
        stats: None,
        timeline: None,
    })
    .unwrap();
    let plan = out.plan.unwrap();
    assert_eq!(out.exit_code, 0);
    assert!(plan.actions.iter().all(|a| a[0].abs() <= 1e-9));
    // Penalized as -|a|, the reward per step is 2 + 0.5 at a = 0.
    assert!((plan.objective - 4.0 * 2.5).abs() <= 1e-9);
}

#[test]
fn base_and_strengthened_agree_and_lp_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("nav.json");
    let o = run(&["gen", "--domain", "navigation", "--size", "4", "--horizon", "3", "-o", inst.to_str().unwrap()]);
    assert!(o.status.success());
    let pot = dir.path().join("pot.json");
    cmd_potentials(&PotentialsArgs {
        instance: inst.clone(),
        intervals: 2,
        lambda: None,
        epsilon: 1e-6,
        output: Some(pot.clone()),
        trace: None,
    })
    .unwrap();
    let lp = dir.path().join("m.lp");
    let plan = |strengthen: Option<std::path::PathBuf>, export: Option<std::path::PathBuf>| {
        cmd_plan(&PlanArgs {
            instance: inst.clone(),
            strengthen,
            time_limit: 0.0,
            node_limit: None,
            export_lp: export,
            output: Some(dir.path().join("plan.json")),
            stats: Some(dir.path().join("stats.json")),
            timeline: Some(dir.path().join("timeline.csv")),
        })
        .unwrap()
    };
    let base = plan(None, None);
    let strong = plan(Some(pot), Some(lp.clone()));
    let (b, s) = (base.plan.unwrap().objective, strong.plan.unwrap().objective);
    assert!((b - s).abs() <= 1e-5, "{b} vs {s}");
    let model = parse_lp(&std::fs::read_to_string(&lp).unwrap()).unwrap();
    let r = solve_milp(&model, &MilpParams::default()).unwrap();
    assert!((r.objective().unwrap() - s).abs() <= 1e-5);
    let timeline = std::fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    assert_eq!(timeline.lines().next().unwrap(), "t,dual,primal,open,closed");
}

#[test]
fn bench_csv_header_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("r.json");
    assert!(run(&[
        "gen",
        "--domain",
        "random",
        "--widths",
        "3:3:2",
        "--seed",
        "3",
        "--horizon",
        "2",
        "-o",
        inst.to_str().unwrap()
    ])
    .status
    .success());
    let csv = dir.path().join("b.csv");
    let o =
        run(&["bench", inst.to_str().unwrap(), "--settings", "base,n2", "--csv", csv.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "setting,alg1_time,cumul_time,primal,dual,open,closed,status,root_bound,best");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[7] == "optimal"));
    let (p0, p1): (f64, f64) = (rows[0][3].parse().unwrap(), rows[1][3].parse().unwrap());
    assert!((p0 - p1).abs() <= 1e-5);
    assert_eq!(rows.iter().filter(|r| r[9] == "*").count(), 1);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
}
