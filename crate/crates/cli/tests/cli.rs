use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multifisher"))
        .args(args)
        .env_remove("MULTIFISHER_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario_file(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn example_optimal_area_region() {
    let data = fixture("example.csv");
    let out = run(&[
        "region",
        "--data",
        path(&data),
        "--method",
        "optimal-area",
        "--alpha",
        "0.025",
    ]);
    ok(&out);
    let v = json(&out);
    let r = &v["result"];
    assert_eq!(r["region"]["size"], 191);
    assert_eq!(
        format!("{:.2}", 100.0 * r["region"]["level"].as_f64().unwrap()),
        "2.48"
    );
    assert_eq!(r["confirmed_optimal"], true);
    assert_eq!(v["command"], "region");
    assert_eq!(v["config"]["alpha"], "1/40");
    assert_eq!(
        v["config"]["input"]["margins"],
        serde_json::json!([137, 25, 11, 2])
    );
}

#[test]
fn zero_alpha_gives_empty_region() {
    let out = run(&[
        "region",
        "--margins",
        "2,1,1,0",
        "--n-trt",
        "2",
        "--alpha",
        "0",
    ]);
    ok(&out);
    let v = json(&out);
    assert_eq!(v["result"]["region"]["size"], 0);
    assert_eq!(v["result"]["region"]["level_num"], "0");
}

/// Up-closed subsets of the toy support, weights 1 (2,2), 2 (2,1), 2 (1,2), 1 (1,1).
fn toy_oracle(cap: u64) -> (u64, usize) {
    let points = [([2, 2], 1u64), ([2, 1], 2), ([1, 2], 2), ([1, 1], 1)];
    let mut best = (0, 0);
    for mask in 0u32..16 {
        let inside = |i: usize| mask & (1 << i) != 0;
        let closed = (0..4).all(|i| {
            !inside(i)
                || (0..4).all(|j| {
                    let dominates =
                        points[j].0[0] >= points[i].0[0] && points[j].0[1] >= points[i].0[1];
                    !dominates || inside(j)
                })
        });
        let weight: u64 = (0..4).filter(|&i| inside(i)).map(|i| points[i].1).sum();
        if closed && weight <= cap {
            best.0 = best.0.max(weight);
            best.1 = best.1.max(mask.count_ones() as usize);
        }
    }
    best
}

#[test]
fn toy_regions_match_brute_force() {
    let data = fixture("toy.csv");
    for (alpha, cap) in [
        ("0.1", 0u64),
        ("0.2", 1),
        ("0.34", 2),
        ("0.5", 3),
        ("0.7", 4),
        ("0.9", 5),
        ("1", 6),
    ] {
        let (best_weight, best_size) = toy_oracle(cap);
        let out = run(&[
            "region",
            "--data",
            path(&data),
            "--method",
            "optimal-alpha",
            "--alpha",
            alpha,
        ]);
        ok(&out);
        let v = json(&out);
        assert_eq!(
            v["result"]["region"]["level_num"],
            best_weight.to_string(),
            "alpha {alpha}"
        );
        let out = run(&[
            "region",
            "--data",
            path(&data),
            "--method",
            "optimal-area",
            "--alpha",
            alpha,
        ]);
        ok(&out);
        assert_eq!(
            json(&out)["result"]["region"]["size"],
            best_size,
            "alpha {alpha}"
        );
    }
}

#[test]
fn toy_region_csv_golden() {
    let data = fixture("toy.csv");
    let out = run(&[
        "region",
        "--data",
        path(&data),
        "--method",
        "optimal-alpha",
        "--alpha",
        "0.9",
        "--format",
        "csv",
    ]);
    ok(&out);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        fs::read_to_string(fixture("toy_region.csv")).unwrap()
    );
}

#[test]
fn example_closed_test_with_greedy() {
    let data = fixture("example.csv");
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = run(&[
        "test",
        "--data",
        path(&data),
        "--method",
        "greedy",
        "-o",
        path(&report),
    ]);
    ok(&out);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(
        summary.contains("endpoint 1: adjusted p = 0.0005  rejected"),
        "{summary}"
    );
    assert!(
        summary.contains("endpoint 2: adjusted p = 0.3361  not rejected"),
        "{summary}"
    );
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let r = &v["result"];
    assert_eq!(r["global_rejected"], true);
    assert_eq!(r["elementary"][0]["rejected"], true);
    assert_eq!(r["elementary"][1]["rejected"], false);
    assert_eq!(
        format!("{:.4}", r["elementary"][0]["adjusted_p"].as_f64().unwrap()),
        "0.0005"
    );
    assert_eq!(
        format!("{:.4}", r["elementary"][1]["adjusted_p"].as_f64().unwrap()),
        "0.3361"
    );
}

#[test]
fn toy_closed_test_marginal_p_values() {
    // Endpoint 1: three successes among four subjects, two treated, both successes: 3/6.
    let data = fixture("toy.csv");
    let out = run(&[
        "test",
        "--data",
        path(&data),
        "--method",
        "bonf-unweighted",
        "--alpha",
        "0.5",
    ]);
    ok(&out);
    let v = json(&out);
    let subsets = v["result"]["subsets"].as_array().unwrap();
    let p = |e: &[u64]| {
        subsets
            .iter()
            .find(|s| s["endpoints"] == serde_json::json!(e))
            .map(|s| {
                (
                    s["p_num"].as_str().unwrap().to_string(),
                    s["p_den"].as_str().unwrap().to_string(),
                )
            })
            .unwrap()
    };
    assert_eq!(p(&[1]), ("1".to_string(), "2".to_string()));
    assert_eq!(p(&[2]), ("1".to_string(), "1".to_string()));
    assert_eq!(v["result"]["elementary"][0]["rejected"], false);
}

#[test]
fn single_endpoint_test_is_fisher() {
    // Treatment 4/5 successes, control 1/5: P(T >= 4) with 5 successes among 10, 5 treated.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    let mut body = String::from("group,ep\n");
    for (g, y) in [
        ("trt", 1),
        ("trt", 1),
        ("trt", 1),
        ("trt", 1),
        ("trt", 0),
        ("ctr", 1),
        ("ctr", 0),
        ("ctr", 0),
        ("ctr", 0),
        ("ctr", 0),
    ] {
        body.push_str(&format!("{g},{y}\n"));
    }
    fs::write(&csv, body).unwrap();
    let out = run(&[
        "test",
        "--data",
        path(&csv),
        "--method",
        "greedy",
        "--alpha",
        "0.05",
    ]);
    ok(&out);
    let v = json(&out);
    // (C(5,4) C(5,1) + C(5,5) C(5,0)) / C(10,5) = 26/252
    let e = &v["result"]["elementary"][0];
    assert_eq!(e["adjusted_p_num"], "13");
    assert_eq!(e["adjusted_p_den"], "126");
}

#[test]
fn dist_dump_of_toy_table() {
    let out = run(&[
        "dist",
        "--data",
        path(&fixture("toy.csv")),
        "--format",
        "csv",
    ]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let weights: Vec<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (format!("{},{}", f[0], f[1]), f[2].to_string())
        })
        .collect();
    let expected = [("2,1", "2"), ("1,2", "2"), ("2,2", "1"), ("1,1", "1")];
    assert_eq!(weights.len(), 4);
    for (t, w) in expected {
        assert!(weights.contains(&(t.to_string(), w.to_string())), "{text}");
    }
}

#[test]
fn export_goldens_are_byte_identical() {
    let toy = fixture("toy.csv");
    let out = run(&[
        "export-ilp",
        "--data",
        path(&toy),
        "--method",
        "optimal-alpha",
        "--alpha",
        "0.5",
    ]);
    ok(&out);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        fs::read_to_string(fixture("toy_optimal_alpha.lp")).unwrap()
    );
    let out = run(&[
        "export-ilp",
        "--data",
        path(&toy),
        "--method",
        "optimal-area",
        "--alpha",
        "0.9",
        "--no-reduce",
    ]);
    ok(&out);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        fs::read_to_string(fixture("toy_optimal_area_unreduced.lp")).unwrap()
    );
}

fn bin_section(lp: &str) -> Vec<&str> {
    lp.lines()
        .skip_while(|l| *l != "bin")
        .skip(1)
        .take_while(|l| *l != "end")
        .collect()
}

fn constraint_rows(lp: &str) -> Vec<&str> {
    lp.lines()
        .skip_while(|l| *l != "st")
        .skip(1)
        .take_while(|l| *l != "bin")
        .collect()
}

#[test]
fn export_shapes() {
    let out = run(&[
        "export-ilp",
        "--margins",
        "4,5",
        "--n-trt",
        "5",
        "--method",
        "optimal-alpha",
        "--alpha",
        "0.3",
        "--no-reduce",
    ]);
    ok(&out);
    let lp = String::from_utf8(out.stdout).unwrap();
    let rows = constraint_rows(&lp);
    assert_eq!(
        rows.iter().filter(|r| r.starts_with(" level:")).count(),
        1,
        "{lp}"
    );
    assert_eq!(bin_section(&lp).len(), 5);

    let example = fixture("example.csv");
    let out = run(&[
        "export-ilp",
        "--data",
        path(&example),
        "--method",
        "optimal-area",
    ]);
    ok(&out);
    let lp = String::from_utf8(out.stdout).unwrap();
    assert_eq!(bin_section(&lp).len(), 159);

    let out = run(&[
        "export-ilp",
        "--data",
        path(&example),
        "--method",
        "bonf-optimal-alpha",
    ]);
    ok(&out);
    let lp = String::from_utf8(out.stdout).unwrap();
    assert!(lp.contains(" pick_1:") && lp.contains(" pick_2:") && lp.contains(" level:"));
}

#[test]
fn non_linear_export_is_an_input_error() {
    let out = run(&[
        "export-ilp",
        "--data",
        path(&fixture("toy.csv")),
        "--method",
        "bonf-wt",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "export-ilp",
        "--data",
        path(&fixture("toy.csv")),
        "--method",
        "optimal-area",
        "--lex",
        "alpha",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = scenario_file(&dir, "bad.csv", "group,ep1\ntrt,2\nctr,0\n");
    assert_eq!(run(&["test", "--data", path(&bad)]).status.code(), Some(2));
    let unknown = scenario_file(&dir, "unknown.csv", "group,ep1\ntrt,1\nplacebo,0\n");
    assert_eq!(
        run(&["region", "--data", path(&unknown)]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["region", "--margins", "1,2,3", "--n-trt", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["region", "--data", "/nonexistent/file.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "region",
            "--margins",
            "2,2",
            "--n-trt",
            "2",
            "--alpha",
            "1.5"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "region",
            "--margins",
            "2,1,1,0",
            "--n-trt",
            "2",
            "--method",
            "optimal-power"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn unconfirmed_search_exits_with_three_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("region.json");
    let out = run(&[
        "region",
        "--data",
        path(&fixture("example.csv")),
        "--method",
        "optimal-alpha",
        "--max-iter",
        "1",
        "-o",
        path(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["result"]["confirmed_optimal"], false);
    assert_eq!(v["config"]["max_iter"], 1);
}

#[test]
fn null_power_stays_below_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(
        &dir,
        "null.json",
        r#"{"k": 2, "n": 6, "p_trt": [0.4, 0.5], "p_ctr": [0.4, 0.5], "rho": 0.2, "alpha": "0.05",
            "methods": ["bonf-unweighted", "greedy", "optimal-area consonant", "minp"]}"#,
    );
    let out = run(&["power", "--scenario", path(&s)]);
    ok(&out);
    let v = json(&out);
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r["global"].as_f64().unwrap() <= 0.05 + 1e-12, "{r}");
        assert!(r["any"].as_f64().unwrap() <= 0.05 + 1e-12, "{r}");
    }
    assert_eq!(v["config"]["mode"], "exact");
}

#[test]
fn three_endpoint_power_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(
        &dir,
        "three.json",
        r#"{"k": 3, "n": 6, "p_trt": [0.7, 0.6, 0.5], "p_ctr": [0.3, 0.3, 0.3], "rho": 0.3, "alpha": "0.05"}"#,
    );
    let out = run(&["power", "--scenario", path(&s), "--spec", "bonf-hkt"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "power",
        "--scenario",
        path(&s),
        "--spec",
        "bonf-hkt",
        "--sims",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "power",
        "--scenario",
        path(&s),
        "--spec",
        "bonf-hkt",
        "--sims",
        "200",
        "--seed",
        "1",
        "--format",
        "csv",
    ]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "method,global,any,all,H1,H2,H3,confirmed,q50,q90,max"
    );
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario_file(
        &dir,
        "sim.json",
        r#"{"k": 2, "n": 8, "p_trt": [0.7, 0.6], "p_ctr": [0.3, 0.3], "rho": 0.1, "alpha": "0.05"}"#,
    );
    let args = [
        "power",
        "--scenario",
        path(&s),
        "--spec",
        "optimal-area",
        "--spec",
        "bonf-greedy",
        "--sims",
        "300",
        "--seed",
        "9",
    ];
    let a = run(&args);
    ok(&a);
    let mut threaded: Vec<&str> = args.to_vec();
    threaded.extend(["--threads", "1"]);
    let b = run(&threaded);
    ok(&b);
    assert_eq!(a.stdout, b.stdout);

    let example = fixture("example.csv");
    let args = [
        "region",
        "--data",
        path(&example),
        "--method",
        "greedy",
        "--alt",
        "rates=0.9/0.75:0.9/0.75,rho=0",
    ];
    let a = run(&args);
    let b = run(&args);
    ok(&a);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn aggregated_json_input_matches_subject_csv() {
    let csv_out = run(&[
        "test",
        "--data",
        path(&fixture("example.csv")),
        "--method",
        "bonf-hkt",
    ]);
    let json_out = run(&[
        "test",
        "--data",
        path(&fixture("example.json")),
        "--method",
        "bonf-hkt",
    ]);
    ok(&csv_out);
    ok(&json_out);
    assert_eq!(json(&csv_out)["result"], json(&json_out)["result"]);
}
