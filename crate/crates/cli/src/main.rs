use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npb_core::harness::{
    emit_report, fitted_orders, run_protein_energy, run_sphere_spatial, run_sphere_temporal, run_stability_sweep,
    run_vacuum_check, stable_range, write_report, ExperimentKind, ExperimentSpec, ReportFormat, ReportRow,
};
use npb_core::NpbError;

/// Experiment driver for the pseudo-transient Poisson-Boltzmann solvers.
///
/// Reports are written as CSV to `--out` (or stdout); a short summary goes
/// to stderr. Diverged runs are reported in the CSV, not as failures.
#[derive(Debug, Parser)]
#[command(name = "npb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spatial convergence on the sphere benchmark (Δt = h²/20 by default).
    SphereSpatial {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dt_factor: Option<String>,
    },
    /// Temporal convergence against the smallest Δt of the ladder.
    SphereTemporal {
        #[command(flatten)]
        common: Common,
    },
    /// Stable/diverged classification over a Δt sample set.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Steps per cell.
        #[arg(long)]
        steps: Option<String>,
        /// Spacing used for cells with Δt ≥ 0.5.
        #[arg(long)]
        large_dt_h: Option<String>,
    },
    /// Solvation energies of a molecule (the bundled toy system by default).
    Protein {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        molecule: Molecule,
        /// Explicit-Euler reference step; enables the reference row.
        #[arg(long)]
        oracle_dt: Option<String>,
        #[arg(long = "oracle-T")]
        oracle_t: Option<String>,
    },
    /// Compare time-marched vacuum potentials with the fast Poisson solver.
    VacuumCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        molecule: Molecule,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` parameter file, applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated scheme names.
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated time steps.
    #[arg(long)]
    dt: Option<String>,
    /// Comma-separated grid spacings.
    #[arg(long)]
    h: Option<String>,
    /// Amplitude of the initial perturbation on the sphere.
    #[arg(long = "H")]
    amplitude: Option<String>,
    /// Final pseudo-time.
    #[arg(long = "T")]
    t_end: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// `exact` or `literal` AOS nonlinear branch.
    #[arg(long)]
    aos_nonlinear: Option<String>,
    /// Any config key, as `key=value`. Repeatable; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for independent cells.
    #[arg(long)]
    threads: Option<usize>,
    /// Write 0 in every wall-time column.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct Molecule {
    /// PQR structure file.
    #[arg(long, conflicts_with = "atoms")]
    pqr: Option<String>,
    /// `atom x y z q r` structure file.
    #[arg(long)]
    atoms: Option<String>,
    /// Comma-separated energy variants: Plain, RE, RE+V.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    padding: Option<String>,
    #[arg(long)]
    kappa_bar: Option<String>,
}

fn build_spec(kind: ExperimentKind, common: &Common, extra: &[(&str, &Option<String>)]) -> Result<ExperimentSpec, NpbError> {
    let mut spec = ExperimentSpec::new(kind);
    if let Some(path) = &common.config {
        spec.apply_config(&std::fs::read_to_string(path)?)?;
    }
    let flags = [
        ("scheme", &common.scheme),
        ("h", &common.h),
        ("dt", &common.dt),
        ("H", &common.amplitude),
        ("T", &common.t_end),
        ("alpha", &common.alpha),
        ("aos_nonlinear", &common.aos_nonlinear),
    ];
    for (key, value) in flags.iter().chain(extra) {
        if let Some(v) = value {
            spec.apply(key, v)?;
        }
    }
    for pair in &common.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| NpbError::InvalidParameter(format!("--set expects KEY=VALUE, found `{pair}`")))?;
        spec.apply(key.trim(), value)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn molecule_flags(m: &Molecule) -> [(&'static str, &Option<String>); 5] {
    [("pqr", &m.pqr), ("atoms", &m.atoms), ("variant", &m.variant), ("padding", &m.padding), ("kappa_bar", &m.kappa_bar)]
}

fn write_rows<R: ReportRow>(rows: &[R], common: &Common) -> Result<(), NpbError> {
    let format = ReportFormat { timing: !common.no_timing };
    match &common.out {
        Some(path) => emit_report(rows, path, &format),
        None => write_report(rows, io::stdout().lock(), &format),
    }
}

fn run(command: Command) -> Result<(), NpbError> {
    let common = match &command {
        Command::SphereSpatial { common, .. }
        | Command::SphereTemporal { common }
        | Command::Stability { common, .. }
        | Command::Protein { common, .. }
        | Command::VacuumCheck { common, .. } => common,
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| NpbError::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let mut err = io::stderr().lock();
    match &command {
        Command::SphereSpatial { common, dt_factor } => {
            let spec = build_spec(ExperimentKind::SphereSpatial, common, &[("dt_factor", dt_factor)])?;
            let rows = run_sphere_spatial(&spec)?;
            write_rows(&rows, common)?;
            for (scheme, order) in fitted_orders(&rows, false) {
                let _ = writeln!(err, "{scheme}: fitted L2 order {}", show(order));
            }
        }
        Command::SphereTemporal { common } => {
            let spec = build_spec(ExperimentKind::SphereTemporal, common, &[])?;
            let rows = run_sphere_temporal(&spec)?;
            write_rows(&rows, common)?;
            for (scheme, order) in fitted_orders(&rows, true) {
                let _ = writeln!(err, "{scheme}: fitted L2 order {}", show(order));
            }
        }
        Command::Stability { common, steps, large_dt_h } => {
            let spec = build_spec(
                ExperimentKind::StabilitySweep,
                common,
                &[("steps", steps), ("large_dt_h", large_dt_h)],
            )?;
            let rows = run_stability_sweep(&spec)?;
            write_rows(&rows, common)?;
            for &scheme in &spec.schemes {
                let range = match stable_range(&rows, scheme) {
                    Some((lo, hi)) => format!("[{lo},{hi}]"),
                    None => "none".into(),
                };
                let _ = writeln!(err, "{scheme}: stable range {range}");
            }
        }
        Command::Protein { common, molecule, oracle_dt, oracle_t } => {
            let mut extra = molecule_flags(molecule).to_vec();
            extra.extend([("oracle_T", oracle_t), ("oracle_dt", oracle_dt)]);
            let spec = build_spec(ExperimentKind::ProteinEnergy, common, &extra)?;
            let rows = run_protein_energy(&spec)?;
            write_rows(&rows, common)?;
            for r in &rows {
                let pct = r.percent_error.map(|p| format!("{p:.2}%")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    err,
                    "{} {} dt={} dG={:.4} kcal/mol error={pct} time={:.3}s{}",
                    r.scheme,
                    r.variant,
                    r.dt,
                    r.delta_g,
                    r.wall_time,
                    if r.diverged { " diverged" } else { "" }
                );
            }
        }
        Command::VacuumCheck { common, molecule } => {
            let spec = build_spec(ExperimentKind::VacuumCheck, common, &molecule_flags(molecule))?;
            let rows = run_vacuum_check(&spec)?;
            write_rows(&rows, common)?;
            if let Some(r) = rows.first() {
                let _ = writeln!(err, "fast solver relative residual {:.3e}", r.fast_residual);
            }
        }
    }
    Ok(())
}

fn show(order: Option<f64>) -> String {
    order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "n/a".into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
