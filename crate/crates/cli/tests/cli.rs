use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use minimax_core::grid::GridSolution;
use minimax_core::singular::{germ_fixture, Germ};
use tempfile::TempDir;

const BURGERS: &str = r#"
[problem]
H = "p^2/2"
u0 = "cos(q)"
t_max = 3.0

[grid]
nt = 48
nq = 96

[solver]
seeds = 512
"#;

fn hjmm(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hjmm"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_one_row_per_grid_point() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), &format!("{BURGERS}\n[output]\nsvg_times = [2.0]\nfronts = true\n"), &["solve"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("out/solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,q,u,branch_id"));
    assert_eq!(lines.clone().count(), 48 * 96);
    for l in lines {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert!(cols[..3].iter().all(|c| c.parse::<f64>().is_ok()));
        assert!(cols[3].parse::<i64>().unwrap() >= 0);
    }
    assert!(!csv.contains('\r'));
    let svg = fs::read_to_string(d.path().join("out/front_t2.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(fs::read_dir(d.path().join("out/fronts")).unwrap().count(), 48);
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/run.json")).unwrap()).unwrap();
    assert_eq!(run["grid"]["nq"], 96);
}

#[test]
fn bad_expression_is_a_config_error() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), &BURGERS.replace("p^2/2", "p^^2"), &["solve"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("problem.H"), "{}", stderr(&o));
}

#[test]
fn zero_horizon_is_a_config_error() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), &BURGERS.replace("t_max = 3.0", "t_max = 0"), &["solve"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("t_max"), "{}", stderr(&o));
}

#[test]
fn small_grids_and_missing_configs_are_rejected() {
    let d = TempDir::new().unwrap();
    assert_eq!(code(&hjmm(d.path(), BURGERS, &["solve", "--grid", "8x96"])), 2);
    assert_eq!(code(&hjmm(d.path(), BURGERS, &["solve", "--grid", "48"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_hjmm")).arg("solve").output().unwrap();
    assert_eq!(code(&o), 2);
    assert_eq!(code(&hjmm(d.path(), BURGERS, &["render", "--time", "5"])), 2);
}

#[test]
fn compare_passes_on_burgers() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), BURGERS, &["compare", "--grid", "64x128"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("minimax-lax_oleinik")).unwrap().to_string();
    assert!(line.ends_with("PASS"), "{line}");
}

#[test]
fn compare_only_reports_for_nonconvex_hamiltonians() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), &BURGERS.replace("p^2/2", "cos(p) - 1"), &["compare"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(!out.contains("lax_oleinik"));
    assert!(out.contains("minimax-lax_friedrichs") && out.contains("REPORT"));
}

#[test]
fn zero_hamiltonian_makes_all_three_agree() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), &BURGERS.replace("p^2/2", "0"), &["compare"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/compare.json")).unwrap()).unwrap();
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row["linf"].as_f64().unwrap() <= 1e-9, "{row}");
    }
}

#[test]
fn classify_burgers_finds_a_birth_and_a_shock() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), BURGERS, &["classify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ev: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/events.json")).unwrap()).unwrap();
    let kinds: Vec<&str> = ev["events"].as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["ShockBirth", "Shock"]);
    assert!(stdout(&o).starts_with("minimax: 1 shock, 1 birth, 0 merge"));
}

#[test]
fn classify_flags_the_forbidden_fixture() {
    let d = TempDir::new().unwrap();
    let mut buf = Vec::new();
    germ_fixture(Germ::A, 64).write_csv(&mut buf).unwrap();
    fs::write(d.path().join("germ.csv"), &buf).unwrap();
    let o = hjmm(d.path(), "[classify]\ngrid_csv = \"germ.csv\"\n", &["classify"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let ev: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/events.json")).unwrap()).unwrap();
    assert!(ev["report"]["forbidden_a"].as_u64().unwrap() >= 1);
}

#[test]
fn dump_front_writes_front_and_strands() {
    let d = TempDir::new().unwrap();
    let o = hjmm(d.path(), BURGERS, &["dump-front", "--time", "2.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("out/front_t2.5.json")).unwrap()).unwrap();
    assert_eq!(v["cusps"].as_array().unwrap().len(), 2);
    assert_eq!(v["sections"].as_array().unwrap().len(), 3);
    assert!(!v["minimax"].as_array().unwrap().is_empty());
    let strands = fs::read_to_string(d.path().join("out/strands_t2.5.csv")).unwrap();
    assert_eq!(strands.lines().next(), Some("q0,t,q,p,z"));
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let d = TempDir::new().unwrap();
    let config = format!("{BURGERS}\n[output]\nfronts = true\n");
    let mut runs = Vec::new();
    for workers in ["1", "4", "4"] {
        let o = hjmm(d.path(), &config, &["solve", "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = hjmm(d.path(), &config, &["classify", "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let read = |f: &str| fs::read(d.path().join("out").join(f)).unwrap();
        runs.push((read("solution.csv"), read("slices.json"), read("fronts/front_00040.json"), read("events.json")));
    }
    assert!(runs[0] == runs[1] && runs[1] == runs[2]);
    let back = GridSolution::read_csv(BufReader::new(&runs[0].0[..]), None).unwrap();
    assert_eq!(back.nt() * back.nq(), 48 * 96);
}
