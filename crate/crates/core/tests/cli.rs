use std::path::Path;
use std::process::{Command, Output};

const WELL: &str = r#"
interface_radius = 1.0
truncation_radius = 4.0
mode_cutoff = 2

[[potential.segments]]
r_left = 0.0
r_right = 1.0
re = -10.0
im = 0.0

[scan]
re_min = -12.0
re_max = -0.5
im_min = -1.0
im_max = 1.0
re_cells = 6
im_cells = 2
"#;

fn krein(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krein")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn dtn_rows_for_opposite_modes_agree() {
    let o = krein(&["dtn", "--lambda", "-2,0.5", "--modes", "-3,3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# krein dtn\n"));
    assert!(text.contains("# config_sha256 "));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 2);
    let strip = |r: &str| r.split_once(',').unwrap().1.to_owned();
    assert_eq!(strip(rows[0]), strip(rows[1]));
}

#[test]
fn free_dtn_matches_closed_form() {
    let o = krein(&["dtn", "--lambda", "-1,0", "--modes", "0"]);
    let text = stdout(&o);
    let row = data_rows(&text)[0];
    let d: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
    assert!((d - -1.876_015_364_156_936_3).abs() < 1e-12, "{d}");
}

#[test]
fn spectral_parameter_on_the_cut_exits_three() {
    let o = krein(&["dtn", "--lambda", "4,0", "--modes", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("mode 1") && err.contains("lambda 4"), "{err}");
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(krein(&["dtn", "--modes", "0"]).status.code(), Some(2));
    assert_eq!(krein(&["dtn", "--lambda", "1;2"]).status.code(), Some(2));
    assert_eq!(krein(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        krein(&["dtn", "--config", "/nonexistent/run.toml"]).status.code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "interface_radius = 2.0\ntruncation_radius = 1.0\n");
    assert_eq!(
        krein(&["dtn", "--config", &bad, "--lambda", "-1,0"]).status.code(),
        Some(2)
    );
    let unknown = write_config(dir.path(), "radius = 1.0\n");
    assert_eq!(
        krein(&["dtn", "--config", &unknown, "--lambda", "-1,0"]).status.code(),
        Some(2)
    );
    let o = krein(&["dtn", "--lambda", "-1,0", "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_zero() {
    assert!(krein(&["--help"]).status.success());
    assert!(krein(&["--version"]).status.success());
}

#[test]
fn eigscan_finds_real_well_eigenvalues_independently_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), WELL);
    let one = krein(&["eigscan", "--config", &cfg, "--threads", "1"]);
    let many = krein(&["eigscan", "--config", &cfg, "--threads", "8"]);
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
    let text = stdout(&one);
    let found: Vec<(i32, f64)> = data_rows(&text)
        .iter()
        .map(|r| {
            let c: Vec<&str> = r.split(',').collect();
            (c[0].parse().unwrap(), c[1].parse().unwrap())
        })
        .collect();
    let expected = [
        (-1, -2.288_398_767_448_363),
        (0, -6.766_865_519_043_489),
        (1, -2.288_398_767_448_363),
    ];
    assert_eq!(found.len(), expected.len(), "{text}");
    for ((m, l), (em, el)) in found.iter().zip(expected) {
        assert_eq!(*m, em);
        assert!((l - el).abs() < 1e-9, "{l} vs {el}");
    }
}

#[test]
fn eigscan_without_potential_has_no_rows() {
    let o = krein(&["eigscan", "--modes", "0..1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(data_rows(&text).is_empty(), "{text}");
    assert!(text.lines().any(|l| l.starts_with("mode,re_lambda")));
}

#[test]
fn eigscan_reports_clipping() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode_cutoff = 1\n[scan]\nre_min = -3.0\nre_max = 2.0\nim_min = -1.0\nim_max = 1.0\nre_cells = 4\nim_cells = 2\n",
    );
    let o = krein(&["eigscan", "--config", &cfg]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l.starts_with("# clipped")));
}

#[test]
fn config_hash_ignores_threads_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let a = krein(&["dtn", "--lambda", "-1,0", "--modes", "0", "--threads", "3"]);
    krein(&[
        "dtn",
        "--lambda",
        "-1,0",
        "--modes",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(stdout(&a), std::fs::read_to_string(&out).unwrap());
}

#[test]
fn resolve_reproduces_the_image_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode_cutoff = 3\nlambda = [[-2.0, 0.5]]\n[[potential.segments]]\nr_left = 0.0\nr_right = 1.0\nre = 2.0\nim = 1.0\n[source]\nkind = \"image\"\nmode = -1\n",
    );
    let out = dir.path().join("g.csv");
    let o = krein(&["resolve", "--config", &cfg, "--oracle", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    let result = &summary["results"][0];
    assert!(result["solution_rel_error"].as_f64().unwrap() < 1e-8);
    assert!(result["oracle_rel_error"].as_f64().unwrap() < 1e-6);
    assert!(result["gluing_pass"].as_bool().unwrap());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(data_rows(&csv).iter().all(|r| r.split(',').nth(3) == Some("-1")));
}

#[test]
fn resolve_without_lambda_exits_two() {
    assert_eq!(krein(&["resolve"]).status.code(), Some(2));
}

#[test]
fn verify_passes_and_sign_flip_fails() {
    let args = ["verify", "--modes", "0..2", "--lambda", "-2,0.5"];
    let ok = krein(&args);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["suites"].as_array().unwrap().len(), 5);

    let mut broken_args = args.to_vec();
    broken_args.push("--break-sign");
    let broken = krein(&broken_args);
    assert_eq!(broken.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&broken.stdout).unwrap();
    let gluing = report["suites"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "gluing")
        .unwrap();
    assert_eq!(gluing["pass"], false);
}
