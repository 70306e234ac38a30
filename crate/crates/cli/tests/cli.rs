use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use radloc::experiment::table_scenario;
use radloc::scenario::save_scenario;

fn radloc(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radloc"));
    cmd.args(args).env_remove("RADLOC_THREADS");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().expect("radloc runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_one_row_per_pose_deterministically() {
    let a = radloc(&["simulate", "--scenario", "fig5_3src"], None);
    let b = radloc(&["simulate", "--scenario", "fig5_3src"], None);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("time_step,x_cm,y_cm,height_cm"));
    assert!(stderr(&a).contains("100 poses"));
}

#[test]
fn simulate_seed_changes_the_noise() {
    let a = radloc(&["simulate", "--scenario", "fig5_3src", "--seed", "1"], None);
    let b = radloc(&["simulate", "--scenario", "fig5_3src", "--seed", "2"], None);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn empty_scene_without_background_counts_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    fs::write(
        &path,
        r#"{
  "dimension": 2,
  "bounds": [[0, 1000], [0, 1000]],
  "background_cps": 0.0,
  "sources": [],
  "trajectory": { "type": "lawnmower", "rows": 4, "cols": 4 },
  "seed": 3
}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = radloc(&["simulate", "--scenario", path.to_str().unwrap()], Some(&out));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("measurements.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.ends_with(",0")), "{csv}");
}

#[test]
fn localize_resolves_the_three_source_replica() {
    let dir = tempfile::tempdir().unwrap();
    let o = radloc(
        &["localize", "--scenario", "fig5_3src", "--seed", "7"],
        Some(dir.path()),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&dir.path().join("result.json"));
    assert_eq!(report["result"]["terminated_by"], "checksum");
    assert_eq!(report["result"]["resolved"].as_array().unwrap().len(), 3);
    assert_eq!(report["score"]["f1"], 1.0);
    assert!(report["result"].get("timings").is_none());
    let timings = read_json(&dir.path().join("timings.json"));
    assert!(timings[0]["timings"]["total_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn single_iteration_on_four_sources_usually_hits_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let mut capped = 0;
    for seed in 0..6 {
        let path = dir.path().join(format!("four_{seed}.json"));
        save_scenario(&table_scenario::<f64>(4, 500 + seed).unwrap(), &path).unwrap();
        let out = dir.path().join(format!("out_{seed}"));
        let o = radloc(
            &[
                "localize",
                "--scenario",
                path.to_str().unwrap(),
                "--max-iterations",
                "1",
            ],
            Some(&out),
        );
        assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
        if code(&o) == 2 {
            capped += 1;
            assert_eq!(
                read_json(&out.join("result.json"))["result"]["terminated_by"],
                "max_iterations"
            );
        }
    }
    assert!(capped >= 4, "only {capped}/6 runs hit the iteration cap");
}

#[test]
fn identity_clusterer_agrees_on_a_sparse_scene() {
    let dir = tempfile::tempdir().unwrap();
    let count = |clusterer: &str| {
        let out = dir.path().join(clusterer);
        let o = radloc(
            &[
                "localize",
                "--scenario",
                "fig5_3src",
                "--seed",
                "7",
                "--clusterer",
                clusterer,
            ],
            Some(&out),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read_json(&out.join("result.json"))["result"]["resolved"]
            .as_array()
            .unwrap()
            .len()
    };
    assert_eq!(count("id"), count("meanshift"));
}

#[test]
fn repeats_write_one_report_per_seed_and_dump_particles() {
    let dir = tempfile::tempdir().unwrap();
    let o = radloc(
        &[
            "localize",
            "--scenario",
            "fig5_3src",
            "--seed",
            "40",
            "--repeats",
            "2",
            "--max-iterations",
            "1",
            "--time-steps",
            "2",
            "--dump-particles",
        ],
        Some(dir.path()),
    );
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    for seed in [40, 41] {
        assert_eq!(read_json(&dir.path().join(format!("result_{seed}.json")))["seed"], seed);
        let dump = fs::read_to_string(dir.path().join(format!("particles_{seed}.csv"))).unwrap();
        let mut lines = dump.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_step,measurement,id,x_cm,y_cm,strength_uci,weight"
        );
        // 1000 particles after each of the two time steps.
        assert_eq!(lines.count(), 2000);
    }
}

#[test]
fn recorded_measurements_replace_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(code(&radloc(&["simulate", "--scenario", "fig5_3src"], Some(&sim))), 0);
    let out = dir.path().join("out");
    let o = radloc(
        &[
            "localize",
            "--scenario",
            "fig5_3src",
            "--measurements",
            sim.join("measurements.csv").to_str().unwrap(),
        ],
        Some(&out),
    );
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    assert!(read_json(&out.join("result.json"))["result"]["resolved"].is_array());
}

#[test]
fn room_simulation_writes_a_prior_usable_by_localize() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = radloc(
        &["simulate", "--scenario", "room3d", "--prior-points", "500"],
        Some(&sim),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let prior = sim.join("prior.csv");
    assert_eq!(fs::read_to_string(&prior).unwrap().lines().count(), 501);
    let out = dir.path().join("out");
    let o = radloc(
        &["localize", "--scenario", "room3d", "--prior", prior.to_str().unwrap()],
        Some(&out),
    );
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
}

#[test]
fn dipole_flag_estimates_a_moment() {
    let dir = tempfile::tempdir().unwrap();
    let o = radloc(
        &[
            "localize",
            "--scenario",
            "wall_dipole",
            "--dipole",
            "--max-iterations",
            "1",
        ],
        Some(dir.path()),
    );
    assert!(matches!(code(&o), 0 | 2), "{}", stderr(&o));
    let report = read_json(&dir.path().join("result.json"));
    assert_eq!(report["options"]["dipole_max"], 10_000.0);
    let first = &report["result"]["iterations"][0]["candidates"][0]["params"];
    assert_eq!(first["dipole"].as_array().unwrap().len(), 2);
}

#[test]
fn configuration_errors_exit_with_one_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    for args in [
        vec!["localize", "--scenario", "fig5_3src", "--particles", "0"],
        vec!["localize", "--scenario", "fig5_3src", "--repeats", "0"],
        vec!["localize", "--scenario", "fig5_3src", "--k", "0"],
        vec![
            "localize",
            "--scenario",
            "fig5_3src",
            "--clusterer",
            "id",
            "--bandwidth",
            "0.1",
        ],
        vec!["localize", "--scenario", "fig5_3src", "--clusterer", "kmeans"],
        vec!["localize", "--scenario", "fig5_3src", "--bogus"],
        vec!["sweep", "--repeats", "0"],
    ] {
        let o = radloc(&args, Some(&out));
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert!(!out.exists(), "{args:?} wrote output");
    }
}

#[test]
fn missing_files_are_named_in_the_error() {
    let o = radloc(&["simulate", "--scenario", "/nonexistent/scene.json"], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("/nonexistent/scene.json"));
    let o = radloc(
        &[
            "localize",
            "--scenario",
            "fig5_3src",
            "--prior",
            "/nonexistent/prior.csv",
        ],
        None,
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("/nonexistent/prior.csv"));
}

#[test]
fn bad_thread_cap_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_radloc"))
        .args(["simulate", "--scenario", "fig5_3src"])
        .env("RADLOC_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("RADLOC_THREADS"));
}

#[test]
fn help_exits_cleanly() {
    let o = radloc(&["--help"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["simulate", "localize", "sweep"] {
        assert!(text.contains(sub));
    }
}

#[test]
fn sweep_table_is_reproducible() {
    let run = || {
        let o = radloc(
            &[
                "sweep",
                "--sources",
                "1,2",
                "--repeats",
                "2",
                "--seed",
                "9",
                "--steps",
                "2",
            ],
            None,
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        String::from_utf8(o.stdout).unwrap()
    };
    let table = run();
    assert_eq!(table, run());
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("config,time_steps,mean_iterations,loc_error,precision,recall,f1"));
    let configs: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(configs, ["1src_proposed", "1src_naive", "2src_proposed", "2src_naive"]);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("2")));
}

#[test]
fn sweep_writes_the_table_into_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = radloc(
        &["sweep", "--sources", "1", "--outer", "off", "--repeats", "1"],
        Some(dir.path()),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("1src_naive,5,1.0000"));
}
