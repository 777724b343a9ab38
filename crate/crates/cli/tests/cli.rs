use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const USERS: &str = r#"[
    {"task_bits": 1.6e6, "cycles_per_bit": 1e3, "cpu_freq": 1e9, "kappa": 1e-27},
    {"task_bits": 1.6e6, "cycles_per_bit": 1e3, "cpu_freq": 1e9, "kappa": 1e-28}
]"#;

fn config(users: &str, channel: &str, e_max: f64) -> String {
    format!(
        r#"{{"bandwidth": 1e6, "noise_density_dbm": -174, "p_max": 0.01, "e_max": {e_max},
        "path_loss_exp": 3.76, "cell_radius": 500, "users": {users}, "channel": {channel}}}"#
    )
}

fn reference() -> String {
    config(USERS, r#"{"seed": 2024, "trial": 0}"#, 0.2)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nomamec"))
        .args(args)
        .env_remove("NOMAMEC_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_auto_uses_closed_form_for_two_users() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "reference.json", &reference());
    let o = run(&["solve", &cfg, "--method", "auto"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("method      closed-form"), "{out}");
    assert!(out.contains("case        Case1"), "{out}");
}

#[test]
fn solve_reports_fourteen_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "reference.json", &reference());
    let o = run(&["solve", &cfg, "--method", "bss", "--eps", "1e-4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("iterations  14"));
}

#[test]
fn closed_form_with_four_users_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let users = format!("[{0}, {0}]", &USERS[1..USERS.len() - 1]);
    let cfg = write(dir.path(), "m4.json", &config(&users, r#"{"seed": 1}"#, 0.2));
    let o = run(&["solve", &cfg, "--method", "closed-form"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exactly 2 users"), "{}", stderr(&o));
}

#[test]
fn bad_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = reference().replace(r#""kappa": 1e-28"#, r#""kappa": "small""#);
    let cfg = write(dir.path(), "bad.json", &text);
    let o = run(&["solve", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("users[1].kappa"), "{}", stderr(&o));
    let cfg = write(dir.path(), "extra.json", &reference().replace(r#""p_max""#, r#""pmax_typo": 1, "p_max""#));
    let o = run(&["solve", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pmax_typo"), "{}", stderr(&o));
}

#[test]
fn infeasible_scenario_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tight.json", &config(USERS, r#"{"seed": 2024}"#, 1e-6));
    let o = run(&["solve", &cfg, "--method", "bss"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("infeasible"), "{}", stderr(&o));
}

#[test]
fn solve_writes_csv_to_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "reference.json", &reference());
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_nomamec"))
        .args(["solve", &cfg])
        .env("NOMAMEC_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("solve.csv")).unwrap();
    assert!(csv.starts_with("axis,value,scheme,seed,delay_s,"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",Case1"));
    assert!(out.join("solve.manifest.json").exists());
}

#[test]
fn verify_passes_on_reference_and_symmetric_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "reference.json", &reference());
    let o = run(&["verify", &cfg]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let same = r#"[
        {"task_bits": 1e6, "cycles_per_bit": 1e3, "cpu_freq": 1e9, "kappa": 1e-28},
        {"task_bits": 1e6, "cycles_per_bit": 1e3, "cpu_freq": 1e9, "kappa": 1e-28}
    ]"#;
    let cfg = write(dir.path(), "sym.json", &config(same, r#"{"gains": [1e8, 1e8]}"#, 0.2));
    let o = run(&["verify", &cfg]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn verify_flags_unsorted_gains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &config(USERS, r#"{"gains": [5e8, 2e7]}"#, 0.2));
    let o = run(&["verify", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL sorted_gains"), "{}", stdout(&o));
}

#[test]
fn single_value_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "reference.json", &reference());
    let out = dir.path().join("out");
    let o = run(&[
        "sweep", &cfg, "--axis", "p_max", "--values", "0.01", "--schemes", "noma-partial", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep_p_max.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep_p_max.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["params"]["axis"], "p_max");
    assert_eq!(manifest["seeds"][0][0], 2024);
}

#[test]
fn unknown_scheme_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "reference.json", &reference());
    let o = run(&["sweep", &cfg, "--axis", "p_max", "--values", "0.01", "--schemes", "tdma"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["sweep", &cfg, "--axis", "kappa", "--values", "0.01"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mean_delay_nonincreasing_in_energy_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "reference.json", &reference());
    let out = dir.path().join("out");
    let o = run(&[
        "sweep", &cfg, "--axis", "e_max", "--values", "0.1,0.2,0.4,0.8", "--schemes", "noma-partial",
        "--seeds", "60", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("sweep_e_max.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    // Seeds feasible at the smallest budget stay feasible at larger ones.
    let seeds: Vec<&str> = rows
        .iter()
        .filter(|r| &r[1] == "1.0000000000000001e-1" && &r[10] != "infeasible")
        .map(|r| r.get(3).unwrap())
        .collect();
    assert!(seeds.len() >= 50, "{} seeds", seeds.len());
    let means: Vec<f64> = ["1.0000000000000001e-1", "2.0000000000000001e-1", "4.0000000000000002e-1", "8.0000000000000004e-1"]
        .iter()
        .map(|v| {
            let d: Vec<f64> = rows
                .iter()
                .filter(|r| &r[1] == *v && seeds.contains(&&r[3]))
                .map(|r| r[4].parse().unwrap())
                .collect();
            d.iter().sum::<f64>() / d.len() as f64
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] <= w[0] + 1e-4), "{means:?}");
}
