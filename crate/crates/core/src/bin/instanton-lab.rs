use clap::{Args, Parser, Subcommand};
use instanton_lab::error::LabError;
use instanton_lab::report::{emit_plots, ReportDocument};
use instanton_lab::suites::{run_suite, BethParams, Config, Grid, Suite};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "instanton-lab", version, about = "Numerical checks for Taub-NUT, ALE asymptotics and ALF gluing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// LeBrun solver, Kähler identities, Ricci flatness, frames, |Rm| decay.
    VerifyTaubnut(Common),
    /// ALE tensor identities and dihedral averaging.
    VerifyAsymptotics(Common),
    /// Normalize Gram matrices under SO(3).
    NormalizeSo3(Common),
    /// Checks on the pulled-back Taub-NUT structure.
    BethCheck(Common),
    /// ψ_c, decay estimates and positivity certificates.
    GlueCheck(Common),
    /// Fit the decay exponent of one named field.
    FitDecay(Common),
    /// Write CSV curves and a manifest from a saved report.
    EmitPlots {
        /// report.json written by another subcommand
        #[arg(long)]
        report: PathBuf,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML or JSON config; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Taub-NUT mass
    #[arg(long)]
    m: Option<f64>,
    /// Gram matrix, 9 comma-separated entries in row-major order
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    gram: Option<Vec<f64>>,
    /// dihedral order
    #[arg(long)]
    k: Option<u32>,
    /// decay grid lo:hi:n
    #[arg(long)]
    radii: Option<Grid>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_scale: Option<f64>,
    /// output directory for report.json and curves; stdout if absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    a: Option<f64>,
    /// defaults to the smallest admissible value for --a
    #[arg(long)]
    kappa: Option<f64>,
    /// finite-difference stencil order
    #[arg(long)]
    order: Option<u8>,
    /// field for fit-decay
    #[arg(long)]
    field: Option<String>,
}

impl Common {
    fn config(&self) -> Result<Config, LabError> {
        let mut cfg = match &self.config {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        if let Some(m) = self.m {
            cfg.masses = vec![m];
            cfg.decay_masses = vec![m];
        }
        if let Some(g) = &self.gram {
            let row: [f64; 9] = g.as_slice().try_into().map_err(|_| LabError::Config {
                key: "gram".into(),
                message: format!("expected 9 comma-separated entries, got {}", g.len()),
            })?;
            cfg.grams = vec![row];
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if self.radii.is_some() {
            cfg.radii = self.radii;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tol_scale {
            cfg.tol_scale = t;
        }
        if let Some(o) = self.order {
            cfg.scheme.order = o;
        }
        if let Some(f) = &self.field {
            cfg.field = Some(f.clone());
        }
        match (self.a, self.kappa) {
            (Some(a), Some(kappa)) => cfg.beth = Some(BethParams { a, kappa }),
            (Some(a), None) => {
                let b = instanton_lab::beth::BethMap::with_default_kappa(a)?;
                cfg.beth = Some(BethParams { a, kappa: b.kappa });
            }
            (None, Some(_)) => return Err(LabError::Config { key: "kappa".into(), message: "--kappa needs --a".into() }),
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("INSTANTON_LAB_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or(format!("INSTANTON_LAB_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn write_outputs(rep: &ReportDocument, out: Option<&Path>) -> Result<(), LabError> {
    match out {
        None => {
            print!("{}", rep.to_json());
            Ok(())
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| LabError::Io(e.to_string()))?;
            std::fs::write(dir.join("report.json"), rep.to_json()).map_err(|e| LabError::Io(e.to_string()))?;
            emit_plots(rep, dir).map(|_| ())
        }
    }
}

fn summarize(rep: &ReportDocument) {
    let total = rep.records.len();
    let failed: Vec<&str> = rep.failures().map(|r| r.name.as_str()).collect();
    eprintln!("{}: {}/{} checks pass", rep.suite, total - failed.len(), total);
    for f in failed {
        eprintln!("  FAIL {f}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = set_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let (suite, common) = match &cli.command {
        Command::VerifyTaubnut(c) => (Suite::TaubNut, c),
        Command::VerifyAsymptotics(c) => (Suite::Asymptotics, c),
        Command::NormalizeSo3(c) => (Suite::So3, c),
        Command::BethCheck(c) => (Suite::Beth, c),
        Command::GlueCheck(c) => (Suite::Glue, c),
        Command::FitDecay(c) => (Suite::FitDecay, c),
        Command::EmitPlots { report, out } => {
            let rep = std::fs::read_to_string(report)
                .map_err(|e| LabError::Io(format!("{}: {e}", report.display())))
                .and_then(|t| ReportDocument::from_json(&t));
            return match rep.and_then(|r| emit_plots(&r, out)) {
                Ok(m) => {
                    for w in &m.warnings {
                        eprintln!("warning: {w}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let cfg = match common.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let rep = match run_suite(suite, &cfg) {
        Ok(r) => r,
        Err(e @ LabError::Config { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&rep, common.out.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    summarize(&rep);
    if rep.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
