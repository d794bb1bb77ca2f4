use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use spinforge_core::{DesignResult, PhaseReport};
use tempfile::TempDir;

fn desk() -> Value {
    json!({ "omega1": 500.0, "omega2": 125.0, "J": 1.0, "gamma1": 1.0, "gamma2": 0.25 })
}

fn target(theta: [f64; 4], m: u32, n: u32, h1: f64) -> Value {
    json!({ "theta_targets": theta, "m": m, "n": n, "h1": h1 })
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn write_config(&self, name: &str, system: Value, task: &str, payload: Value, out: &str) -> PathBuf {
        let cfg = json!({ "system": system, "task": task, "task_payload": payload, "output_dir": out, "seed": 11 });
        let p = self.path(name);
        fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        p
    }

    fn spinforge(&self, args: &[&str], config: &Path) -> Output {
        self.spinforge_env(args, config, &[])
    }

    fn spinforge_env(&self, args: &[&str], config: &Path, env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_spinforge"));
        cmd.args(args).arg("--config").arg(config).arg("--quiet");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(rel)).unwrap()).unwrap()
    }

    fn csv(&self, rel: &str) -> Vec<Vec<String>> {
        fs::read_to_string(self.path(rel))
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

fn floats(col: Vec<String>) -> Vec<f64> {
    col.iter().map(|s| s.parse().unwrap()).collect()
}

fn design_desk(run: &Run, theta: [f64; 4], m: u32, n: u32) -> PathBuf {
    let cfg = run.write_config("design.cfg", desk(), "design", json!({ "target": target(theta, m, n, 0.1) }), "d");
    let o = run.spinforge(&["design"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    run.path("d/design.json")
}

#[test]
fn design_writes_result_and_feasibility() {
    let run = Run::new();
    design_desk(&run, [0.3, -1.0, 2.0, 0.5], 1, 2);
    let text = fs::read_to_string(run.path("d/design.json")).unwrap();
    let r: DesignResult = serde_json::from_str(&text).unwrap();
    assert!((r.pulse.tau - 2.0 * std::f64::consts::PI / 0.1).abs() < 1e-12);
    let f = run.json("d/feasibility.json");
    assert_eq!(f["feasible"], json!(true));
    assert_eq!(f["amplitude_ratios"][1], json!(8.0));
}

#[test]
fn hardware_scale_design_records_duration_and_amplitude_ratio() {
    let run = Run::new();
    let sys = json!({ "omega1": 5e8, "omega2": 1.25e8, "J": 200.0, "gamma1": 1.0, "gamma2": 0.25 });
    let cfg = run.write_config("p.cfg", sys, "design", json!({ "target": target([0.0; 4], 1, 1, 2.8e6) }), "p");
    let o = run.spinforge(&["design"], &cfg);
    // the quoted drive is far outside the guard band for J = 200
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let r = run.json("p/design.json");
    let tau = r["pulse"]["tau"].as_f64().unwrap();
    assert!((tau - 2.244e-6).abs() < 1e-3 * 2.244e-6, "{tau}");
    let ratios = &run.json("p/feasibility.json")["amplitude_ratios"];
    assert_eq!(ratios[1], json!(4.0));
}

#[test]
fn both_h1_and_tau_is_a_schema_error() {
    let run = Run::new();
    let mut t = target([0.0; 4], 1, 2, 0.1);
    t["tau"] = json!(10.0);
    let cfg = run.write_config("c.cfg", desk(), "design", json!({ "target": t }), "o");
    let o = run.spinforge(&["design"], &cfg);
    assert_eq!(code(&o), 1);
    let e = stderr(&o);
    assert!(e.contains("exactly one of h1, tau"), "{e}");
    assert!(e.contains("task_payload.target") && e.contains("line"), "{e}");
}

#[test]
fn unknown_key_names_its_path() {
    let run = Run::new();
    let cfg = run.write_config("c.cfg", desk(), "design", json!({ "target": target([0.0; 4], 1, 2, 0.1), "bogus": 1 }), "o");
    let o = run.spinforge(&["design"], &cfg);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

#[test]
fn uncoupled_system_is_infeasible() {
    let run = Run::new();
    let sys = json!({ "omega1": 500.0, "omega2": 125.0, "J": 0.0, "gamma1": 1.0, "gamma2": 0.25 });
    let cfg = run.write_config("c.cfg", sys, "design", json!({ "target": target([0.0; 4], 1, 2, 0.1) }), "o");
    let o = run.spinforge(&["design"], &cfg);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
    assert!(run.path("o/design.json").exists() && run.path("o/feasibility.json").exists());
}

#[test]
fn task_must_match_the_command() {
    let run = Run::new();
    let cfg = run.write_config("c.cfg", desk(), "design", json!({ "target": target([0.0; 4], 1, 2, 0.1) }), "o");
    let o = run.spinforge(&["phases"], &cfg);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("`task`"));
}

#[test]
fn usage_errors_exit_one_and_schema_prints() {
    let bin = env!("CARGO_BIN_EXE_spinforge");
    let o = Command::new(bin).arg("--no-such-flag").output().unwrap();
    assert_eq!(code(&o), 1);
    let o = Command::new(bin).arg("design").output().unwrap();
    assert_eq!(code(&o), 1);
    let o = Command::new(bin).arg("--emit-schema").output().unwrap();
    assert_eq!(code(&o), 0);
    let schema: Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["RunConfig", "SpinSystem", "GateTarget", "PulseSpec", "DesignResult", "PhaseReport", "SweepPayload"] {
        assert!(schema["$defs"].get(key).is_some(), "{key}");
    }
}

#[test]
fn simulate_analytic_gate_is_diagonal() {
    let run = Run::new();
    design_desk(&run, [0.3, -1.0, 2.0, 0.5], 1, 2);
    let payload = json!({ "propagator": "analytic", "design": "d/design.json", "samples": 200 });
    let cfg = run.write_config("s.cfg", desk(), "simulate", payload, "s");
    let o = run.spinforge(&["simulate"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = run.json("s/gate.json");
    assert!(g["off_diagonal_mass"].as_f64().unwrap() <= 1e-12);
    assert!(g["unitarity_defect"].as_f64().unwrap() <= 1e-12);
    let rows = run.csv("s/trajectory.csv");
    assert_eq!(rows[0][0], "t");
    assert_eq!(rows.len(), 202);
    for n in floats(column(&rows, "norm")) {
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_duration_pulse_gives_identity() {
    let run = Run::new();
    let design = design_desk(&run, [0.0; 4], 1, 2);
    let r: DesignResult = serde_json::from_str(&fs::read_to_string(design).unwrap()).unwrap();
    let mut pulse = serde_json::to_value(r.pulse).unwrap();
    pulse["tau"] = json!(0.0);
    for k in 0..4 {
        pulse["harmonics"][k]["phi"] = json!(0.0);
    }
    for prop in ["analytic", "rta-numeric", "exact-numeric"] {
        let cfg = run.write_config("z.cfg", desk(), "simulate", json!({ "propagator": prop, "pulse": pulse }), prop);
        let o = run.spinforge(&["simulate"], &cfg);
        assert_eq!(code(&o), 0, "{prop}: {}", stderr(&o));
        let g = run.json(&format!("{prop}/gate.json"));
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_eq!(g["gate"][r][c], json!([want, 0.0]), "{prop}");
            }
        }
    }
}

#[test]
fn exact_simulation_with_flip_flop_records_eta_diagnostics() {
    let run = Run::new();
    design_desk(&run, [0.3, -1.0, 2.0, 0.5], 1, 2);
    let payload = json!({ "propagator": "exact-numeric", "include_xy": true, "design": "d/design.json", "samples": 50 });
    let cfg = run.write_config("s.cfg", desk(), "simulate", payload, "s");
    let o = run.spinforge(&["simulate"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = run.json("s/gate.json");
    let d = &g["xy_diagnostics"];
    let eta = 1.0 / 375.0;
    assert!((d["eta_squared"].as_f64().unwrap() - eta * eta).abs() < 1e-18);
    assert!(d["xy_shift"].as_f64().unwrap().abs() > 0.0);
    assert!(g["certificate"]["difference"].as_f64().unwrap() <= 1e-8);
    assert_eq!(g["propagator"], json!("exact_numeric_xy"));
}

#[test]
fn unconverged_run_exits_three() {
    let run = Run::new();
    design_desk(&run, [0.0; 4], 1, 2);
    let control = json!({ "steps_per_period": 4, "max_steps_per_period": 8, "tolerance": 1e-12, "picture": "lab" });
    let payload = json!({ "propagator": "rta-numeric", "design": "d/design.json", "step_control": control });
    let cfg = run.write_config("s.cfg", desk(), "simulate", payload, "s");
    let o = run.spinforge(&["simulate"], &cfg);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!run.path("s/gate.json").exists());
}

#[test]
fn designed_pulse_has_no_dynamical_phase() {
    let run = Run::new();
    design_desk(&run, [0.3, -1.0, 2.0, 0.5], 1, 2);
    let cfg = run.write_config("p.cfg", desk(), "phases", json!({ "propagator": "analytic", "design": "d/design.json" }), "p");
    let o = run.spinforge(&["phases"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: PhaseReport = serde_json::from_str(&fs::read_to_string(run.path("p/phases.json")).unwrap()).unwrap();
    assert!(r.delta_d.iter().all(|d| d.abs() <= 1e-9), "{:?}", r.delta_d);
    assert!(r.aa_phase.is_none());
    assert!(r.warnings.is_empty());
}

#[test]
fn equal_phase_design_reports_aa_phase() {
    let run = Run::new();
    design_desk(&run, [0.7; 4], 1, 2);
    let cfg = run.write_config("p.cfg", desk(), "phases", json!({ "propagator": "analytic", "design": "d/design.json" }), "p");
    assert_eq!(code(&run.spinforge(&["phases"], &cfg)), 0);
    let aa = run.json("p/phases.json")["aa_phase"].as_f64().unwrap();
    assert!((aa - 0.7).abs() < 1e-9);
}

#[test]
fn equal_orders_keep_a_quarter_of_j_tau_with_a_warning() {
    let run = Run::new();
    let payload = json!({ "propagator": "analytic", "target": target([0.0; 4], 1, 1, 0.1) });
    let cfg = run.write_config("p.cfg", desk(), "phases", payload, "p");
    let o = run.spinforge(&["phases"], &cfg);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = run.json("p/phases.json");
    let tau = 2.0 * std::f64::consts::PI / 0.1;
    let d0 = r["delta_D"][0].as_f64().unwrap();
    // integration error budget: 1e-9 of max|ε|·τ
    assert!((d0 - tau / 4.0).abs() <= 1e-9 * 313.0 * tau, "{d0}");
    assert!(!r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn non_cyclic_duration_exits_four() {
    let run = Run::new();
    let design = design_desk(&run, [0.0; 4], 1, 2);
    let r: DesignResult = serde_json::from_str(&fs::read_to_string(design).unwrap()).unwrap();
    let mut pulse = serde_json::to_value(r.pulse).unwrap();
    pulse["tau"] = json!(r.pulse.tau * 1.1);
    let payload = json!({ "propagator": "analytic", "pulse": pulse, "theta1": r.frame.theta[0] });
    let cfg = run.write_config("p.cfg", desk(), "phases", payload, "p");
    assert_eq!(code(&run.spinforge(&["phases"], &cfg)), 4);
}

fn verify(run: &Run, out: &str, extra: &[&str]) -> (i32, Value) {
    let cfg = run.write_config(&format!("{out}.cfg"), desk(), "verify", json!({}), out);
    let o = run.spinforge(&[&["verify"], extra].concat(), &cfg);
    (code(&o), run.json(&format!("{out}/verify.json")))
}

fn verdicts(r: &Value) -> Vec<(String, bool)> {
    r["invariants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| (i["name"].as_str().unwrap().to_string(), i["passed"].as_bool().unwrap()))
        .collect()
}

#[test]
fn verify_passes_on_the_default_config() {
    let run = Run::new();
    let (c, r) = verify(&run, "v", &[]);
    assert_eq!(c, 0, "{r}");
    assert!(r["invariants"].as_array().unwrap().len() >= 20);
    assert_eq!(r["passed"], json!(true));
}

#[test]
fn injected_frame_sign_flip_fails_the_static_check() {
    let run = Run::new();
    let (c, r) = verify(&run, "v", &["--inject-fault", "flip-rotating-frame-sign"]);
    assert_eq!(c, 5);
    let failed: Vec<String> = verdicts(&r).into_iter().filter(|(_, p)| !p).map(|(n, _)| n).collect();
    assert_eq!(failed, ["rotating_frame_static"]);
}

#[test]
fn seeds_change_samples_but_not_verdicts() {
    let run = Run::new();
    let (_, a) = verify(&run, "a", &["--seed", "1"]);
    let (_, b) = verify(&run, "b", &["--seed", "2"]);
    assert_eq!(verdicts(&a), verdicts(&b));
    assert_eq!(a["seed"], json!(1));
    assert_ne!(a["invariants"], b["invariants"]);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let run = Run::new();
    design_desk(&run, [0.3, -1.0, 2.0, 0.5], 1, 2);
    let first = fs::read(run.path("d/design.json")).unwrap();
    design_desk(&run, [0.3, -1.0, 2.0, 0.5], 1, 2);
    assert_eq!(first, fs::read(run.path("d/design.json")).unwrap());

    let cfg = run.write_config("p.cfg", desk(), "phases", json!({ "propagator": "analytic", "design": "d/design.json" }), "p");
    run.spinforge(&["phases"], &cfg);
    let first = fs::read(run.path("p/phases.json")).unwrap();
    run.spinforge(&["phases"], &cfg);
    assert_eq!(first, fs::read(run.path("p/phases.json")).unwrap());

    verify(&run, "v", &[]);
    let first = fs::read(run.path("v/verify.json")).unwrap();
    verify(&run, "v", &[]);
    assert_eq!(first, fs::read(run.path("v/verify.json")).unwrap());
}

#[test]
fn output_flag_overrides_config() {
    let run = Run::new();
    let cfg = run.write_config("c.cfg", desk(), "design", json!({ "target": target([0.0; 4], 1, 2, 0.1) }), "o");
    let other = run.path("elsewhere");
    let o = run.spinforge(&["design", "--output", other.to_str().unwrap()], &cfg);
    assert_eq!(code(&o), 0);
    assert!(other.join("design.json").exists());
    assert!(!run.path("o/design.json").exists());
}

fn sweep(run: &Run, payload: Value, out: &str) -> (i32, Vec<Vec<String>>) {
    let cfg = run.write_config(&format!("{out}.cfg"), desk(), "sweep", payload, out);
    let o = run.spinforge_env(&["sweep"], &cfg, &[("SPINFORGE_THREADS", "2")]);
    (code(&o), run.csv(&format!("{out}/sweep.csv")))
}

#[test]
fn infidelity_grows_with_drive_strength() {
    let run = Run::new();
    let payload = json!({ "parameter": "h1_scale", "values": [2.0, 4.0, 8.0], "target": target([0.0; 4], 1, 2, 0.1) });
    let (c, rows) = sweep(&run, payload, "s");
    assert_eq!(c, 0);
    let inf = floats(column(&rows, "infidelity"));
    assert!(inf[0] < inf[1] && inf[1] < inf[2], "{inf:?}");
    assert_eq!(column(&rows, "index"), ["0", "1", "2"]);
    assert!(floats(column(&rows, "delta_d_residual")).iter().all(|d| *d < 1e-9));
}

#[test]
fn flip_flop_shift_scales_as_eta_squared() {
    let run = Run::new();
    let payload = json!({
        "parameter": "j", "values": [0.5, 1.0], "compare_xy": true, "target": target([0.3, -1.0, 2.0, 0.5], 1, 2, 0.1)
    });
    let (c, rows) = sweep(&run, payload, "s");
    assert_eq!(c, 0);
    let shift = floats(column(&rows, "xy_shift"));
    let ratio = shift[1].abs() / shift[0].abs();
    // η ∝ J at fixed Zeeman splitting
    assert!((2.0..=8.0).contains(&ratio), "{ratio}");
}

#[test]
fn step_refinement_converges_at_fourth_order() {
    let run = Run::new();
    let payload = json!({ "parameter": "steps_per_period", "values": [32.0, 64.0, 128.0], "target": target([0.0; 4], 1, 2, 0.1) });
    let (c, rows) = sweep(&run, payload, "s");
    assert_eq!(c, 0);
    let d = floats(column(&rows, "state_difference"));
    for w in d.windows(2) {
        let r = w[0] / w[1];
        assert!((8.0..=32.0).contains(&r), "{d:?}");
    }
}

#[test]
fn failed_rows_are_marked_in_place() {
    let run = Run::new();
    // J must stay below ω₂
    let payload = json!({ "parameter": "j", "values": [1.0, 200.0, 2.0], "target": target([0.0; 4], 1, 2, 0.05) });
    let (c, rows) = sweep(&run, payload, "s");
    assert_eq!(c, 0);
    let err = column(&rows, "error");
    assert!(err[0].is_empty() && !err[1].is_empty() && err[2].is_empty(), "{err:?}");
    assert_eq!(floats(column(&rows, "value")), [1.0, 200.0, 2.0]);

    let payload = json!({ "parameter": "j", "values": [200.0], "target": target([0.0; 4], 1, 2, 0.05) });
    let (c, _) = sweep(&run, payload, "t");
    assert_ne!(c, 0);
}
