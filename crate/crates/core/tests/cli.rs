use instanton_lab::report::ReportDocument;
use instanton_lab::suites::Grid;
use proptest::prelude::*;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_instanton-lab")).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(
        &p,
        "masses = [1.0]\n\n[samples]\nlebrun = 200\nkahler = 5\nricci = 3\nframes = 5\ngrams = 10\nale_points = 5\nale_grams = 2\n",
    )
    .unwrap();
    p.display().to_string()
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = lab(&["normalize-so3", "--seed", "5"]);
    let b = lab(&["normalize-so3", "--seed", "5"]);
    let c = lab(&["normalize-so3", "--seed", "6"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let one = Command::new(env!("CARGO_BIN_EXE_instanton-lab"))
        .args(["verify-taubnut", "--config", &cfg])
        .env("INSTANTON_LAB_THREADS", "1")
        .output()
        .unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_instanton-lab"))
        .args(["verify-taubnut", "--config", &cfg])
        .env("INSTANTON_LAB_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert_eq!(lab(&["verify-taubnut", "--config", &cfg]).status.code(), Some(0));
    // an impossible tolerance fails honestly
    assert_eq!(lab(&["verify-taubnut", "--config", &cfg, "--tol-scale", "1e-30"]).status.code(), Some(1));
    assert_eq!(lab(&["normalize-so3", "--gram", "1,2,3"]).status.code(), Some(2));
    assert_eq!(lab(&["normalize-so3", "--radii", "5:1:3"]).status.code(), Some(2));
    assert_eq!(lab(&["normalize-so3", "--m", "-1"]).status.code(), Some(2));
    assert_eq!(lab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(lab(&["--help"]).status.code(), Some(0));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\n\nbogus = true\n").unwrap();
    let out = lab(&["normalize-so3", "--config", &bad.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");
}

#[test]
fn gram_flag_is_normalized_into_the_report() {
    let out = lab(&["normalize-so3", "--gram", "3,0,0,0,2,0,0,0,1"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = ReportDocument::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let n = &rep.extras["normalizations"][0]["normalized"];
    let want = [2.0, 0.0, -1.0, 0.0, 2.0, 0.0, -1.0, 0.0, 2.0];
    for (i, w) in want.iter().enumerate() {
        assert!((n[i].as_f64().unwrap() - w).abs() < 1e-12);
    }
    assert_eq!(rep.config_hash.len(), 40);
}

#[test]
fn out_dir_and_emit_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit");
    let o = lab(&["fit-decay", "--field", "rm_taubnut", "--m", "1", "--radii", "10:200:8", "--out", &out.display().to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("rm_taubnut.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("radius,value,fitted_model"));
    assert_eq!(lines.count(), 8);

    let again = dir.path().join("again");
    let o = lab(&["emit-plots", "--report", &out.join("report.json").display().to_string(), "--out", &again.display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("rm_taubnut.csv")).unwrap(), std::fs::read(again.join("rm_taubnut.csv")).unwrap());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(again.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["curves"][0]["rows"], 8);

    let o = lab(&["emit-plots", "--report", "/nonexistent/report.json", "--out", &again.display().to_string()]);
    assert_eq!(o.status.code(), Some(2));
}

proptest! {
    #[test]
    fn grid_roundtrips(lo in 0.1f64..100.0, span in 1.01f64..50.0, n in 2usize..64) {
        let hi = lo * span;
        let g: Grid = format!("{lo}:{hi}:{n}").parse().unwrap();
        prop_assert_eq!(g, Grid { lo, hi, n });
        let pts = g.points();
        prop_assert_eq!(pts.len(), n);
        prop_assert!((pts[0] - lo).abs() <= 1e-12 * lo && (pts[n - 1] - hi).abs() <= 1e-9 * hi);
    }

    #[test]
    fn malformed_grids_are_rejected(s in "[0-9:.a-z-]{0,12}") {
        if let Ok(g) = s.parse::<Grid>() {
            prop_assert!(g.lo > 0.0 && g.hi > g.lo && g.n >= 2);
        }
    }
}
