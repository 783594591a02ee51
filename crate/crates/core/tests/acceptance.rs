//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use instanton_lab::report::{CheckRecord, ReportDocument};
use instanton_lab::suites::{run_suite, Config, Suite};
use std::time::{Duration, Instant};

struct Timed {
    report: ReportDocument,
    elapsed: Duration,
}

fn run(suite: Suite, cfg: &Config) -> Timed {
    let t = Instant::now();
    let report = run_suite(suite, cfg).unwrap_or_else(|e| panic!("{}: {e}", suite.name()));
    Timed { report, elapsed: t.elapsed() }
}

fn pick<'a>(rep: &'a ReportDocument, prefixes: &[&str]) -> Vec<&'a CheckRecord> {
    rep.records.iter().filter(|r| prefixes.iter().any(|p| r.name.starts_with(p))).collect()
}

fn main() {
    let cfg = Config::default();

    // the solver alone, for the timing bound
    let mut solver_only = cfg.clone();
    solver_only.masses = vec![1.0];
    solver_only.decay_masses = vec![];
    solver_only.samples.kahler = 0;
    solver_only.samples.ricci = 0;
    solver_only.samples.frames = 0;
    let lebrun = run(Suite::TaubNut, &solver_only);

    let taub = run(Suite::TaubNut, &cfg);
    let asym = run(Suite::Asymptotics, &cfg);
    let so3 = run(Suite::So3, &cfg);
    let beth = run(Suite::Beth, &cfg);
    let glue = run(Suite::Glue, &cfg);

    let criteria: Vec<(&str, Vec<&CheckRecord>, Option<(Duration, Duration)>)> = vec![
        ("LeBrun solver", pick(&lebrun.report, &["lebrun."]), Some((lebrun.elapsed, Duration::from_secs(5)))),
        ("Monge-Ampere and det f_m = 1", pick(&taub.report, &["kahler."]), None),
        ("Ricci flatness", pick(&taub.report, &["ricci["]), None),
        ("frames and quaternion relations", pick(&taub.report, &["frame."]), None),
        ("|Rm| decay exponent", pick(&taub.report, &["rm_decay["]), None),
        ("SO(3) normalization", pick(&so3.report, &["so3."]), None),
        ("ALE tensor identities", pick(&asym.report, &["ale."]), None),
        ("beth suite", pick(&beth.report, &["beth."]), None),
        ("psi_c suite", pick(&glue.report, &["psi_c.", "coupling."]), None),
        ("gluing estimates and certificates", pick(&glue.report, &["glue.", "certificate."]), Some((glue.elapsed, Duration::from_secs(120)))),
        ("dihedral averaging", pick(&asym.report, &["averaging."]), None),
    ];

    let mut all = true;
    for (i, (label, recs, budget)) in criteria.iter().enumerate() {
        let mut ok = !recs.is_empty() && recs.iter().all(|r| r.pass);
        let mut extra = String::new();
        if let Some((took, limit)) = budget {
            ok &= took < limit;
            extra = format!(" ({:.2}s, limit {}s)", took.as_secs_f64(), limit.as_secs());
        }
        all &= ok;
        println!("criterion {:>2}: {} {label}: {} checks{extra}", i + 1, if ok { "PASS" } else { "FAIL" }, recs.len());
        for r in recs.iter().filter(|r| !r.pass) {
            println!("    failed {} = {:e}", r.name, r.value);
        }
    }
    if !all {
        std::process::exit(1);
    }
}
