use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grover-decoherence"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn mc_emits_one_row_per_step() {
    let out = run(&[
        "mc", "--n", "9", "--m", "17", "--p", "0.002", "--trials", "50000",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# {"));
    let rows = body(&text);
    assert_eq!(rows[0], "M,theta,probability,stderr");
    assert_eq!(rows.len(), 1 + 18);
    let last: Vec<&str> = rows[18].split(',').collect();
    assert_eq!(last[0], "17");
    let p: f64 = last[2].parse().unwrap();
    assert!(p > 0.5 && p < 1.0, "{p}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2)
        .map(|i| dir.path().join(format!("run{i}.csv")))
        .collect();
    for (i, path) in paths.iter().enumerate() {
        let threads = if i == 0 { "1" } else { "3" };
        let out = bin()
            .args([
                "mc", "--n", "6", "--m", "5", "--p", "0.01", "--trials", "3000", "--seed", "17",
            ])
            .arg("--out")
            .arg(path)
            .env("GROVER_DECOHERENCE_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(out.stdout.is_empty());
    }
    let a = std::fs::read_to_string(&paths[0]).unwrap();
    let b = std::fs::read_to_string(&paths[1]).unwrap();
    assert_eq!(body(&a), body(&b));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sidecar(&paths[0])).unwrap()).unwrap();
    assert_eq!(manifest["command"], "mc");
    assert_eq!(manifest["params"]["seed"], 17);
    assert!(manifest["duration_seconds"].as_f64().unwrap() >= 0.0);
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

#[test]
fn different_seeds_differ() {
    let a = run(&[
        "mc", "--n", "5", "--m", "3", "--p", "0.05", "--trials", "500", "--seed", "1",
    ]);
    let b = run(&[
        "mc", "--n", "5", "--m", "3", "--p", "0.05", "--trials", "500", "--seed", "2",
    ]);
    assert_ne!(body(&stdout(&a)), body(&stdout(&b)));
}

#[test]
fn exit_codes() {
    let cases: &[(&[&str], i32, &str)] = &[
        (&["mc", "--bogus"], 2, "error[usage]"),
        (&["frobnicate"], 2, "error[usage]"),
        (
            &["pbar-grid", "--theta", "0:1", "--x", "0:1:1"],
            2,
            "error[usage]",
        ),
        (&["mc", "--p", "1.5"], 3, "error[range]"),
        (&["mc", "--p", "0.1", "--trials", "1"], 3, "error[range]"),
        (
            &["pbar-grid", "--theta", "1:0:0.1", "--x", "0:1:1"],
            3,
            "error[range]",
        ),
        (
            &["phase", "--pth-start", "0.5", "--pth-end", "0.9"],
            3,
            "error[range]",
        ),
        (&["mc", "--n", "21", "--p", "0.1"], 4, "error[memory]"),
        (
            &["exact", "--n", "11", "--m", "1", "--p", "0.1"],
            4,
            "error[memory]",
        ),
    ];
    for (args, code, tag) in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(*code), "{args:?}: {}", stderr(&out));
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with(tag), "{err}");
    }
    let out = bin()
        .args(["exact", "--n", "2", "--m", "1", "--p", "0.1"])
        .env("GROVER_DECOHERENCE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let out = run(&[
        "exact",
        "--n",
        "2",
        "--m",
        "1",
        "--p",
        "0.1",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[io]"));
}

#[test]
fn phase_default_schedule_granularity() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("phase.csv");
    let ref_path = dir.path().join("reference.csv");
    let out = bin()
        .arg("phase")
        .arg("--out")
        .arg(&out_path)
        .arg("--reference-out")
        .arg(&ref_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let rows: Vec<Vec<f64>> = body(&text)[1..]
        .iter()
        .map(|l| {
            l.split(',')
                .map(|v| match v {
                    "true" => 1.0,
                    "false" => 0.0,
                    v => v.parse().unwrap(),
                })
                .collect()
        })
        .collect();
    assert_eq!(rows[0][0], 1.0);
    assert_eq!(rows[0][1], 0.0);
    let first_step = rows[0][0] - rows[1][0];
    assert!((first_step - 5e-4).abs() < 1e-12, "{first_step}");
    let n = rows.len();
    let last_step = rows[n - 2][0] - rows[n - 1][0];
    assert!((last_step / 5e-7 - 1.0).abs() < 0.01, "{last_step}");
    // ends at the first saturated point, near 3.7e-3
    assert_eq!(rows[n - 1][3], 1.0);
    assert!(rows[..n - 1].iter().all(|r| r[3] == 0.0));
    assert!((rows[n - 1][0] - 3.7e-3).abs() < 1e-5);
    // steps shrink monotonically and x_c never decreases
    for w in rows.windows(3) {
        assert!(w[1][0] - w[2][0] <= w[0][0] - w[1][0] + 1e-15);
        assert!(w[1][1] >= w[0][1]);
    }
    let reference = std::fs::read_to_string(&ref_path).unwrap();
    let ref_rows = body(&reference);
    assert_eq!(ref_rows[0], "p_th,x_c,tangent,log_bound");
    assert_eq!(ref_rows.len(), n + 1);
}

#[test]
fn coeffs_csv_and_json() {
    let out = run(&["coeffs", "--order", "1", "--degree", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows = body(&text);
    assert_eq!(rows[0], "kind,k,power,frequency,exact_re,exact_im,value");
    assert!(rows.contains(&"C,0,2,0,4,0,4.0"));
    assert!(rows.contains(&"C,1,2,0,-8/3,0,-2.6666666666666665"));
    assert_eq!(rows.len(), 1 + 2 * 5);

    let out = run(&[
        "coeffs",
        "--order",
        "2",
        "--degree",
        "6",
        "--closed-form",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["coefficients"].as_array().unwrap().len(), 3);
    assert_eq!(v["closed_forms"].as_array().unwrap().len(), 3);
    assert_eq!(v["manifest"]["command"], "coeffs");
}

#[test]
fn pbar_grid_shape() {
    let out = run(&["pbar-grid", "--theta", "0:1.5:0.5", "--x", "0:10:5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows = body(&text);
    assert_eq!(rows[0], "theta,x,p_bar,in_window");
    assert_eq!(rows.len(), 1 + 4 * 3);
    assert!(rows.contains(&"0.0,0.0,0.0,true"));
}

#[test]
fn exact_has_no_stderr_column_values() {
    let out = run(&["exact", "--n", "4", "--m", "2", "--p", "0.0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows = body(&text);
    assert_eq!(rows[1], "0,0.12634012757103932,0.0625,");
}

#[test]
fn validate_passes() {
    let out = run(&["validate"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() > 20);
    assert!(checks
        .iter()
        .all(|c| c["passed"] == true && c["gap"].is_number()));
}
