use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eigslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigslab"))
        .args(args)
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .output()
        .expect("spawn eigslab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn dims_prints_the_dhl_row() {
    let o = eigslab(&["dims", "presets/dhl.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("dhl")).unwrap();
    let cells: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(
        cells,
        [
            "dhl",
            "2.0000",
            "2.0000",
            "0.0000",
            "2.0000",
            "1.0000",
            "2.0000",
            "transient"
        ]
    );
}

#[test]
fn presets_resolve_by_name_or_path() {
    let by_name = eigslab(&["dims", "fig2", "--json"]);
    let by_path = eigslab(&["dims", "presets/fig2.json", "--json"]);
    assert_eq!(json(&by_name), json(&by_path));
}

#[test]
fn validate_exit_codes() {
    let ok = eigslab(&["validate", "presets/fig2.json"]);
    assert_eq!(ok.status.code(), Some(0));
    let v = json(&ok);
    assert_eq!(v["canonical"], serde_json::json!([]));
    assert_eq!(v["distance_positive"], serde_json::json!([]));

    let bad = eigslab(&["validate", "vicsek"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(json(&bad)["canonical"][0]["kind"], "off_terminal_path");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(eigslab(&["bogus"]).status.code(), Some(2));
    assert_eq!(eigslab(&["build", "dhl"]).status.code(), Some(2));
    assert_eq!(
        eigslab(&["walk", "dhl", "--level", "2", "--mode", "fly"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn runtime_errors_exit_one_with_a_message() {
    let cap = eigslab(&["build", "dhl", "--level", "30", "--edge-cap", "1000"]);
    assert_eq!(cap.status.code(), Some(1));
    assert!(stderr(&cap).contains("above the cap"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, r#"{"colours": 1, "initial_colour": 1, "rules": [{"vertices": 3, "plant_plus": 0, "plant_minus": 0, "edges": [[0, 1, 1]]}]}"#).unwrap();
    let o = eigslab(&["dims", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("rules[0].plant_minus: planting vertices must differ"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn perc_alpha_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let traj = dir.path().join(name);
        let o = eigslab(&[
            "--workers",
            workers,
            "perc",
            "alpha",
            "--population",
            "5000",
            "--levels",
            "50",
            "--seed",
            "42",
            "--trajectory",
            traj.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (stdout(&o), fs::read(traj).unwrap())
    };
    let (a, ta) = run("a.csv", "1");
    let (b, tb) = run("b.csv", "2");
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let header = String::from_utf8(ta).unwrap();
    assert!(header
        .starts_with("level,quenched,annealed,gap,pop_std,product_moment,second_moment_ratio\n"));
    assert_eq!(header.lines().count(), 51);
}

#[test]
fn out_file_gets_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("walk.csv");
    let o = eigslab(&[
        "--out",
        out.to_str().unwrap(),
        "walk",
        "dhl",
        "--level",
        "4",
        "--mode",
        "exit",
        "--trials",
        "50",
        "--seed",
        "9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("radius_m,r,mean_tau,stderr,trials,censored\n"));
    let manifest_path = format!("{}.manifest.json", out.display());
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest_path).unwrap()).unwrap();
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["command_line"]
        .as_array()
        .unwrap()
        .iter()
        .any(|a| a == "walk"));
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn stdout_runs_report_the_manifest_on_stderr() {
    let o = eigslab(&["table1"]);
    assert!(o.status.success());
    let line = stderr(&o)
        .lines()
        .find(|l| l.starts_with("manifest: "))
        .unwrap()
        .to_string();
    let m: serde_json::Value = serde_json::from_str(line.trim_start_matches("manifest: ")).unwrap();
    assert_eq!(m["outputs"], serde_json::json!([]));
    assert!(stdout(&o).contains("percolation-dhl"));
}

#[test]
fn built_level_round_trips_through_json() {
    let o = eigslab(&["build", "fig2", "--level", "2", "--format", "json"]);
    assert!(o.status.success());
    let doc = json(&o);
    let edges = doc["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 33);
    let vertices = doc["birth_level"].as_array().unwrap().len();
    for e in edges {
        let e = e.as_array().unwrap();
        assert!(
            e[0].as_u64().unwrap() < vertices as u64 && e[1].as_u64().unwrap() < vertices as u64
        );
        assert!((1..=2).contains(&e[2].as_u64().unwrap()));
    }
}

#[test]
fn exported_config_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let source = Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../presets/fig2.json"
    ));
    let sys = eigslab::EigSystem::from_path(source).unwrap();
    let copy = dir.path().join("copy.json");
    fs::write(&copy, sys.to_json()).unwrap();
    assert_eq!(eigslab::EigSystem::from_path(&copy).unwrap(), sys);
    let a = eigslab(&["matrices", "fig2", "--json"]);
    let b = eigslab(&["matrices", copy.to_str().unwrap(), "--json"]);
    assert_eq!(json(&a), json(&b));
}

#[test]
fn resistance_and_psi_commands() {
    let r = json(&eigslab(&["resistance", "dhl", "--level", "3"]));
    assert!((r["resistance"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let p = json(&eigslab(&["psi", "fig2"]));
    assert!((p["rho"].as_f64().unwrap() - 1.10613).abs() < 1e-5);
}

#[test]
fn exact_law_is_a_csv() {
    let o = eigslab(&["perc", "exact", "--p", "0.5", "--levels", "1"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("value,numerator,denominator,probability")
    );
    let total: f64 = lines
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn table_command_prints_the_library_table() {
    let o = eigslab(&["table1", "--csv"]);
    assert!(o.status.success());
    let rows = eigslab::dims::table1(None).unwrap();
    assert_eq!(stdout(&o), eigslab::dims::format_table_csv(&rows));
}
