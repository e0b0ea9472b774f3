//! Experiment drivers: sphere convergence and stability sweeps, molecular
//! energy runs, and the vacuum-solver check, each producing CSV-ready rows.
//!
//! Independent cells run on the rayon pool; rows are assembled in a fixed
//! order, so reports are byte-identical for any thread count once timing
//! columns are disabled.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::energy::{energy_pipeline, percent_error, richardson, vacuum_potential_fast, EnergyConfig, EnergyVariant};
use crate::error::{NpbError, Result};
use crate::geometry::{parse_atom_config, MolecularSystem};
use crate::grid::{relative_norms, relative_norms_where, NormPair, ScalarField};
use crate::problem::{protein_problem, sphere_benchmark, vacuum_problem, ProteinParams, SphereParams};
use crate::schemes::{march, AosNonlinear, MarchConfig, SchemeVariant};

/// The sampled time steps of the stability study.
pub const STABILITY_DT: [f64; 12] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0];

/// Five-atom neutral test molecule shipped with the crate.
pub fn toy_system() -> MolecularSystem {
    let mut system = parse_atom_config(include_str!("../data/toy5.atoms")).expect("bundled toy system parses");
    system.label = "toy5".into();
    system
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SphereSpatial,
    SphereTemporal,
    StabilitySweep,
    ProteinEnergy,
    VacuumCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SphereSpatial => "sphere-spatial",
            ExperimentKind::SphereTemporal => "sphere-temporal",
            ExperimentKind::StabilitySweep => "stability",
            ExperimentKind::ProteinEnergy => "protein",
            ExperimentKind::VacuumCheck => "vacuum-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Explicit-Euler reference run for energy experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    pub dt: f64,
    pub t_end: f64,
    pub alpha: f64,
}

/// Parameters of one experiment. Ladders are kept sorted in decreasing
/// order (coarse to fine) and free of duplicates.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub schemes: Vec<SchemeVariant>,
    /// Grid spacings. Sphere experiments use every entry; the molecular
    /// ones use the first.
    pub h: Vec<f64>,
    /// Time steps. The temporal study uses the smallest as its reference.
    pub dt: Vec<f64>,
    /// Amplitude `H` of the initial perturbation on the sphere.
    pub amplitude: f64,
    pub t_end: f64,
    pub alpha: f64,
    /// Spatial study: `Δt = dt_factor · h²`.
    pub dt_factor: f64,
    /// Half-width of the sphere domain.
    pub half_width: f64,
    /// Stability study: steps per cell.
    pub steps: usize,
    /// Stability study: cells with `Δt ≥ large_dt_from` run at this spacing.
    pub large_dt_h: Option<f64>,
    pub large_dt_from: f64,
    pub protein: ProteinParams,
    pub system: Option<MolecularSystem>,
    pub variants: Vec<EnergyVariant>,
    pub oracle: Option<OracleSpec>,
    pub aos_nonlinear: AosNonlinear,
}

impl ExperimentSpec {
    /// The default protocol for each experiment.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut spec = Self {
            kind,
            schemes: vec![SchemeVariant::LODIE1],
            h: vec![1.0, 0.5, 0.25],
            dt: vec![],
            amplitude: 1.0,
            t_end: 10.0,
            alpha: 1.0,
            dt_factor: 1.0 / 20.0,
            half_width: 3.0,
            steps: 10_000,
            large_dt_h: None,
            large_dt_from: 0.5,
            protein: ProteinParams::default(),
            system: None,
            variants: vec![EnergyVariant::RePlusV],
            oracle: None,
            aos_nonlinear: AosNonlinear::default(),
        };
        match kind {
            ExperimentKind::SphereSpatial => {}
            ExperimentKind::SphereTemporal => {
                spec.schemes = SchemeVariant::SPLITTING.to_vec();
                spec.h = vec![0.25];
                spec.dt = vec![8e-4, 4e-4, 2e-4, 1e-4, 5e-5, 2.5e-5];
                spec.t_end = 1.0;
            }
            ExperimentKind::StabilitySweep => {
                let mut schemes = SchemeVariant::SPLITTING.to_vec();
                schemes.extend([SchemeVariant::ADI1, SchemeVariant::ADI2]);
                spec.schemes = schemes;
                spec.h = vec![0.25];
                spec.dt = STABILITY_DT.to_vec();
                spec.amplitude = 20.0;
            }
            ExperimentKind::ProteinEnergy | ExperimentKind::VacuumCheck => {
                let defaults = EnergyConfig::re_plus_v_default();
                spec.schemes = vec![defaults.scheme];
                spec.h = vec![spec.protein.h];
                spec.dt = vec![defaults.dt];
                spec.t_end = defaults.t_end;
                spec.alpha = defaults.alpha;
            }
        }
        spec.normalize();
        spec
    }

    fn normalize(&mut self) {
        for ladder in [&mut self.h, &mut self.dt] {
            ladder.sort_by(|a, b| b.total_cmp(a));
            ladder.dedup();
        }
    }

    /// Set one parameter from its textual form. Keys match the config file.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "scheme" | "schemes" => {
                self.schemes = SchemeVariant::parse_list(value)?;
            }
            "h" => self.h = parse_list(key, value)?,
            "dt" => self.dt = parse_list(key, value)?,
            "H" | "amplitude" => self.amplitude = parse_num(key, value)?,
            "T" => {
                if self.kind == ExperimentKind::StabilitySweep {
                    return Err(NpbError::InvalidParameter(
                        "stability sweeps run a fixed number of steps; set `steps` instead of `T`".into(),
                    ));
                }
                self.t_end = parse_num(key, value)?;
            }
            "alpha" => self.alpha = parse_num(key, value)?,
            "dt_factor" => self.dt_factor = parse_num(key, value)?,
            "domain" | "half_width" => self.half_width = parse_num(key, value)?,
            "steps" => {
                self.steps = value
                    .parse()
                    .map_err(|_| NpbError::InvalidParameter(format!("`steps` must be a positive integer, found `{value}`")))?
            }
            "large_dt_h" => self.large_dt_h = Some(parse_num(key, value)?),
            "large_dt_from" => self.large_dt_from = parse_num(key, value)?,
            "padding" => self.protein.padding = parse_num(key, value)?,
            "eps_m" => self.protein.eps_m = parse_num(key, value)?,
            "eps_s" => self.protein.eps_s = parse_num(key, value)?,
            "kappa_bar" => self.protein.kappa_bar = parse_num(key, value)?,
            "probe_inflation" => self.protein.probe_inflation = parse_num(key, value)?,
            "variant" | "variants" => {
                self.variants = value
                    .split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(EnergyVariant::from_str)
                    .collect::<Result<_>>()?;
            }
            "oracle_dt" => {
                let dt = parse_num(key, value)?;
                let t_end = self.oracle.map_or(self.t_end, |o| o.t_end);
                self.oracle = Some(OracleSpec { dt, t_end, alpha: 1.0 });
            }
            "oracle_T" => {
                let t_end = parse_num(key, value)?;
                let oracle = self.oracle.get_or_insert(OracleSpec { dt: 1e-5, t_end, alpha: 1.0 });
                oracle.t_end = t_end;
            }
            "atoms" => self.system = Some(MolecularSystem::from_atom_config_file(value)?),
            "pqr" => self.system = Some(MolecularSystem::from_pqr_file(value)?),
            "aos_nonlinear" => self.aos_nonlinear = value.parse()?,
            other => return Err(NpbError::InvalidParameter(format!("unknown parameter `{other}`"))),
        }
        self.normalize();
        Ok(())
    }

    /// Apply every `key = value` line of a config file.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (line, key, value) in parse_config(text)? {
            self.apply(&key, &value).map_err(|e| match e {
                NpbError::Io(_) => e,
                other => NpbError::Parse { line, message: other.to_string() },
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NpbError::InvalidParameter(m));
        if self.schemes.is_empty() {
            return bad("scheme list is empty".into());
        }
        for (name, ladder) in [("h", &self.h), ("dt", &self.dt)] {
            let needed = name == "h" || self.kind != ExperimentKind::SphereSpatial;
            if needed && ladder.is_empty() {
                return bad(format!("`{name}` ladder is empty"));
            }
            if ladder.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return bad(format!("`{name}` values must be positive"));
            }
            if ladder.windows(2).any(|w| w[0] <= w[1]) {
                return bad(format!("`{name}` ladder must be strictly decreasing"));
            }
        }
        for (name, v) in [("T", self.t_end), ("alpha", self.alpha), ("dt_factor", self.dt_factor)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("`{name}` must be positive, found {v}"));
            }
        }
        if self.kind == ExperimentKind::SphereTemporal && self.dt.len() < 2 {
            return bad("the temporal study needs at least one step above the reference".into());
        }
        if self.kind == ExperimentKind::StabilitySweep && self.steps == 0 {
            return bad("`steps` must be positive".into());
        }
        if matches!(self.kind, ExperimentKind::ProteinEnergy | ExperimentKind::VacuumCheck) && self.variants.is_empty()
        {
            return bad("energy variant list is empty".into());
        }
        Ok(())
    }

    fn sphere(&self, h: f64) -> SphereParams {
        let mut p = SphereParams::new(h, self.amplitude);
        p.half_width = self.half_width;
        p.alpha = self.alpha;
        p
    }

    fn march_config(&self, variant: SchemeVariant, dt: f64, t_end: f64) -> MarchConfig {
        let mut cfg = MarchConfig::new(variant, dt, t_end, self.alpha);
        cfg.aos_nonlinear = self.aos_nonlinear;
        cfg
    }

    fn molecular(&self) -> (MolecularSystem, ProteinParams) {
        let system = self.system.clone().unwrap_or_else(toy_system);
        let mut params = self.protein;
        params.h = self.h[0];
        params.alpha = self.alpha;
        (system, params)
    }
}

fn parse_num(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| NpbError::InvalidParameter(format!("`{key}` must be a number, found `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| parse_num(key, t)).collect()
}

/// Split `key = value` lines, skipping blanks and `#` comments. Returns
/// `(line number, key, value)` triples.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| NpbError::Parse { line: n + 1, message: format!("expected `key = value`, found `{line}`") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(NpbError::Parse { line: n + 1, message: "empty key".into() });
        }
        out.push((n + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Observed orders between consecutive entries: `ln(e₀/e₁) / ln(x₀/x₁)`.
/// The first entry, and any pair with a zero or non-finite error, has none.
pub fn observed_orders(x: &[f64], err: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; x.len().min(err.len())];
    for i in 1..out.len() {
        let (e0, e1) = (err[i - 1], err[i]);
        if e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite() {
            out[i] = Some((e0 / e1).ln() / (x[i - 1] / x[i]).ln());
        }
    }
    out
}

/// Least-squares slope of `ln e` against `ln x`.
pub fn fitted_order(x: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(err)
        .filter(|(_, e)| **e > 0.0 && e.is_finite())
        .map(|(x, e)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

const NAN_PAIR: NormPair = NormPair { l2: f64::NAN, linf: f64::NAN };

fn relative_or_nan(reference: &ScalarField, approx: &ScalarField, diverged: bool) -> Result<NormPair> {
    if diverged {
        Ok(NAN_PAIR)
    } else {
        relative_norms(reference, approx)
    }
}

/// One row of a spatial or temporal convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: SchemeVariant,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub errors: NormPair,
    pub l2_order: Option<f64>,
    pub linf_order: Option<f64>,
    pub diverged: bool,
    pub wall_time: f64,
}

fn fill_orders(rows: &mut [ConvergenceRow], x: impl Fn(&ConvergenceRow) -> f64) {
    let xs: Vec<f64> = rows.iter().map(&x).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.errors.l2).collect();
    let linf: Vec<f64> = rows.iter().map(|r| r.errors.linf).collect();
    for (row, (a, b)) in rows.iter_mut().zip(observed_orders(&xs, &l2).into_iter().zip(observed_orders(&xs, &linf))) {
        row.l2_order = a;
        row.linf_order = b;
    }
}

/// Errors against the analytic sphere solution for each scheme and `h`,
/// with `Δt = dt_factor·h²`.
pub fn run_sphere_spatial(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    spec.validate()?;
    let cells: Vec<(SchemeVariant, f64)> =
        spec.schemes.iter().flat_map(|&s| spec.h.iter().map(move |&h| (s, h))).collect();
    let mut rows = cells
        .par_iter()
        .map(|&(scheme, h)| {
            let params = spec.sphere(h);
            let problem = sphere_benchmark(&params)?;
            let dt = spec.dt_factor * h * h;
            let report = march(&problem, &spec.march_config(scheme, dt, spec.t_end))?;
            let errors = if report.diverged {
                NAN_PAIR
            } else {
                relative_norms_where(&params.exact_field()?, &report.final_field, params.error_mask()?)?
            };
            Ok(ConvergenceRow {
                scheme,
                h,
                dt,
                t_end: spec.t_end,
                errors,
                l2_order: None,
                linf_order: None,
                diverged: report.diverged,
                wall_time: report.wall_time,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for chunk in rows.chunks_mut(spec.h.len()) {
        fill_orders(chunk, |r| r.h);
    }
    Ok(rows)
}

/// Errors against the same scheme at the smallest `Δt` of the ladder, on
/// the first grid spacing.
pub fn run_sphere_temporal(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    spec.validate()?;
    let h = spec.h[0];
    let params = spec.sphere(h);
    let problem = sphere_benchmark(&params)?;
    let cells: Vec<(SchemeVariant, f64)> =
        spec.schemes.iter().flat_map(|&s| spec.dt.iter().map(move |&dt| (s, dt))).collect();
    let reports = cells
        .par_iter()
        .map(|&(scheme, dt)| march(&problem, &spec.march_config(scheme, dt, spec.t_end)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(cells.len());
    for (chunk_cells, chunk_reports) in cells.chunks(spec.dt.len()).zip(reports.chunks(spec.dt.len())) {
        let reference = chunk_reports.last().expect("non-empty ladder");
        let mut block: Vec<ConvergenceRow> = chunk_cells
            .iter()
            .zip(chunk_reports)
            .map(|(&(scheme, dt), report)| {
                let diverged = report.diverged || reference.diverged;
                let errors = if diverged {
                    NAN_PAIR
                } else {
                    relative_norms(&reference.final_field, &report.final_field)?
                };
                Ok(ConvergenceRow {
                    scheme,
                    h,
                    dt,
                    t_end: spec.t_end,
                    errors,
                    l2_order: None,
                    linf_order: None,
                    diverged,
                    wall_time: report.wall_time,
                })
            })
            .collect::<Result<_>>()?;
        fill_orders(&mut block, |r| r.dt);
        rows.extend(block);
    }
    Ok(rows)
}

/// Least-squares order of each scheme's block of convergence rows, over the
/// rows with non-zero error. Sorted by scheme order of appearance.
pub fn fitted_orders(rows: &[ConvergenceRow], by_dt: bool) -> Vec<(SchemeVariant, Option<f64>)> {
    let mut schemes: Vec<SchemeVariant> = Vec::new();
    for r in rows {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme);
        }
    }
    schemes
        .into_iter()
        .map(|s| {
            let block: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.scheme == s).collect();
            let x: Vec<f64> = block.iter().map(|r| if by_dt { r.dt } else { r.h }).collect();
            let e: Vec<f64> = block.iter().map(|r| r.errors.l2).collect();
            (s, fitted_order(&x, &e))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub scheme: SchemeVariant,
    pub amplitude: f64,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub stable: bool,
    pub diverged_step: Option<usize>,
    pub l2_error: f64,
    pub max_abs: f64,
    pub wall_time: f64,
}

/// March every (scheme, Δt) cell for a fixed number of steps and classify
/// it: unstable if the march diverged or ends with `max|u| > 10¹²`.
pub fn run_stability_sweep(spec: &ExperimentSpec) -> Result<Vec<StabilityRow>> {
    spec.validate()?;
    let mut dts = spec.dt.clone();
    dts.reverse();
    let cells: Vec<(SchemeVariant, f64)> =
        spec.schemes.iter().flat_map(|&s| dts.iter().map(move |&dt| (s, dt))).collect();
    cells
        .par_iter()
        .map(|&(scheme, dt)| {
            let h = match spec.large_dt_h {
                Some(h) if dt >= spec.large_dt_from => h,
                _ => spec.h[0],
            };
            let params = spec.sphere(h);
            let problem = sphere_benchmark(&params)?;
            let cfg = spec.march_config(scheme, dt, spec.steps as f64 * dt);
            let report = march(&problem, &cfg)?;
            let max_abs = report.final_field.max_abs();
            let stable = !report.diverged && max_abs <= cfg.divergence_threshold;
            let l2_error = if stable {
                relative_norms_where(&params.exact_field()?, &report.final_field, params.error_mask()?)?.l2
            } else {
                f64::NAN
            };
            Ok(StabilityRow {
                scheme,
                amplitude: spec.amplitude,
                h,
                dt,
                steps: report.steps_taken,
                stable,
                diverged_step: report.diverged_step,
                l2_error,
                max_abs,
                wall_time: report.wall_time,
            })
        })
        .collect()
}

/// Stable range of one scheme in the style `[0.001,5]`: the contiguous run of
/// stable cells starting from the smallest sampled `Δt`.
pub fn stable_range(rows: &[StabilityRow], scheme: SchemeVariant) -> Option<(f64, f64)> {
    let mut cells: Vec<&StabilityRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
    cells.sort_by(|a, b| a.dt.total_cmp(&b.dt));
    let lo = cells.first().filter(|r| r.stable)?.dt;
    let hi = cells.iter().take_while(|r| r.stable).last()?.dt;
    Some((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub label: String,
    pub variant: EnergyVariant,
    pub scheme: SchemeVariant,
    pub dt: f64,
    pub t_end: f64,
    pub alpha: f64,
    pub delta_g: f64,
    pub diverged: bool,
    pub wall_time: f64,
    /// Against the explicit-Euler reference, when one was run.
    pub percent_error: Option<f64>,
}

/// Solvation energies for every (scheme, variant, Δt), preceded by the
/// explicit-Euler reference row when `spec.oracle` is set.
pub fn run_protein_energy(spec: &ExperimentSpec) -> Result<Vec<EnergyRow>> {
    spec.validate()?;
    let (system, params) = spec.molecular();
    let solvent = protein_problem(&system, &params)?;
    let vacuum = vacuum_problem(&system, &params)?;
    let label = system.label.clone();

    let mut configs: Vec<EnergyConfig> = Vec::new();
    if let Some(o) = spec.oracle {
        configs.push(EnergyConfig {
            variant: EnergyVariant::Plain,
            scheme: SchemeVariant::ExplicitEuler,
            dt: o.dt,
            t_end: o.t_end,
            alpha: o.alpha,
        });
    }
    for &scheme in &spec.schemes {
        for &variant in &spec.variants {
            for &dt in &spec.dt {
                configs.push(EnergyConfig { variant, scheme, dt, t_end: spec.t_end, alpha: spec.alpha });
            }
        }
    }
    let results = configs
        .par_iter()
        .map(|cfg| energy_pipeline(&solvent, &vacuum, params.eps_m, cfg))
        .collect::<Result<Vec<_>>>()?;
    let reference = spec.oracle.map(|_| results[0].delta_g).filter(|g| g.is_finite());
    Ok(results
        .into_iter()
        .map(|r| EnergyRow {
            label: label.clone(),
            variant: r.config.variant,
            scheme: r.config.scheme,
            dt: r.config.dt,
            t_end: r.config.t_end,
            alpha: r.config.alpha,
            delta_g: r.delta_g,
            diverged: r.diverged,
            wall_time: r.wall_time,
            percent_error: reference.map(|g| percent_error(r.delta_g, g)),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VacuumRow {
    pub label: String,
    pub variant: EnergyVariant,
    pub scheme: SchemeVariant,
    pub dt: f64,
    pub t_end: f64,
    pub alpha: f64,
    /// `‖−ε_m δ²φ − ρ‖∞ / ‖ρ‖∞` of the fast solution on interior nodes.
    pub fast_residual: f64,
    pub vs_fast: NormPair,
    pub diverged: bool,
    pub wall_time: f64,
}

/// Compare time-marched vacuum potentials (plain and Richardson) with the
/// fast Poisson solution, which is checked against its own residual.
pub fn run_vacuum_check(spec: &ExperimentSpec) -> Result<Vec<VacuumRow>> {
    spec.validate()?;
    let (system, params) = spec.molecular();
    let vacuum = vacuum_problem(&system, &params)?;
    let fast = vacuum_potential_fast(&vacuum.rho, params.eps_m, &vacuum.boundary)?;
    let rho_max = vacuum.rho.max_abs();
    let fast_residual = if rho_max > 0.0 { vacuum.residual(&fast).max_abs() / rho_max } else { 0.0 };

    let cells: Vec<(SchemeVariant, f64)> =
        spec.schemes.iter().flat_map(|&s| spec.dt.iter().map(move |&dt| (s, dt))).collect();
    let runs = cells
        .par_iter()
        .map(|&(scheme, dt)| {
            let cfg = spec.march_config(scheme, dt, spec.t_end);
            let full = march(&vacuum, &cfg)?;
            let half = march(&vacuum, &MarchConfig { dt: 0.5 * dt, ..cfg })?;
            Ok((full, half))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (&(scheme, dt), (full, half)) in cells.iter().zip(&runs) {
        let plain = relative_or_nan(&fast, &full.final_field, full.diverged)?;
        let diverged = full.diverged || half.diverged;
        let extrapolated = richardson(&full.final_field, &half.final_field)?;
        let re = relative_or_nan(&fast, &extrapolated, diverged)?;
        for &variant in &spec.variants {
            let (vs_fast, div, wall) = match variant {
                EnergyVariant::Plain => (plain, full.diverged, full.wall_time),
                _ => (re, diverged, full.wall_time + half.wall_time),
            };
            rows.push(VacuumRow {
                label: vacuum.label.clone(),
                variant,
                scheme,
                dt,
                t_end: spec.t_end,
                alpha: spec.alpha,
                fast_residual,
                vs_fast,
                diverged: div,
                wall_time: wall,
            });
        }
    }
    Ok(rows)
}

/// CSV rendering options.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportFormat {
    /// Write measured wall times; when false every timing cell is `0`, which
    /// makes reports byte-comparable across runs.
    pub timing: bool,
}

impl Default for ReportFormat {
    fn default() -> Self {
        Self { timing: true }
    }
}

/// A row that can be written to a CSV report.
pub trait ReportRow {
    fn header() -> &'static [&'static str];
    fn fields(&self, format: &ReportFormat) -> Vec<String>;
}

/// Scientific notation with 15 significant digits.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.14e}")
    }
}

fn fmt_param(v: f64) -> String {
    format!("{v}")
}

fn fmt_order(v: Option<f64>) -> String {
    v.map(fmt_value).unwrap_or_default()
}

fn fmt_time(v: f64, format: &ReportFormat) -> String {
    if format.timing {
        format!("{v:.6}")
    } else {
        "0".into()
    }
}

impl ReportRow for ConvergenceRow {
    fn header() -> &'static [&'static str] {
        &["scheme", "h", "dt", "T", "l2_error", "linf_error", "l2_order", "linf_order", "diverged", "wall_time_s"]
    }

    fn fields(&self, format: &ReportFormat) -> Vec<String> {
        vec![
            self.scheme.to_string(),
            fmt_param(self.h),
            fmt_param(self.dt),
            fmt_param(self.t_end),
            fmt_value(self.errors.l2),
            fmt_value(self.errors.linf),
            fmt_order(self.l2_order),
            fmt_order(self.linf_order),
            self.diverged.to_string(),
            fmt_time(self.wall_time, format),
        ]
    }
}

impl ReportRow for StabilityRow {
    fn header() -> &'static [&'static str] {
        &["scheme", "H", "h", "dt", "steps", "stable", "diverged_step", "l2_error", "max_abs", "wall_time_s"]
    }

    fn fields(&self, format: &ReportFormat) -> Vec<String> {
        vec![
            self.scheme.to_string(),
            fmt_param(self.amplitude),
            fmt_param(self.h),
            fmt_param(self.dt),
            self.steps.to_string(),
            self.stable.to_string(),
            self.diverged_step.map(|s| s.to_string()).unwrap_or_default(),
            fmt_value(self.l2_error),
            fmt_value(self.max_abs),
            fmt_time(self.wall_time, format),
        ]
    }
}

impl ReportRow for EnergyRow {
    fn header() -> &'static [&'static str] {
        &["label", "variant", "scheme", "dt", "T", "alpha", "delta_g_kcal", "diverged", "wall_time_s"]
    }

    fn fields(&self, format: &ReportFormat) -> Vec<String> {
        vec![
            self.label.clone(),
            self.variant.to_string(),
            self.scheme.to_string(),
            fmt_param(self.dt),
            fmt_param(self.t_end),
            fmt_param(self.alpha),
            fmt_value(self.delta_g),
            self.diverged.to_string(),
            fmt_time(self.wall_time, format),
        ]
    }
}

impl ReportRow for VacuumRow {
    fn header() -> &'static [&'static str] {
        &[
            "label",
            "variant",
            "scheme",
            "dt",
            "T",
            "alpha",
            "fast_residual",
            "l2_vs_fast",
            "linf_vs_fast",
            "diverged",
            "wall_time_s",
        ]
    }

    fn fields(&self, format: &ReportFormat) -> Vec<String> {
        vec![
            self.label.clone(),
            self.variant.to_string(),
            self.scheme.to_string(),
            fmt_param(self.dt),
            fmt_param(self.t_end),
            fmt_param(self.alpha),
            fmt_value(self.fast_residual),
            fmt_value(self.vs_fast.l2),
            fmt_value(self.vs_fast.linf),
            self.diverged.to_string(),
            fmt_time(self.wall_time, format),
        ]
    }
}

/// Write rows as CSV with a header line.
pub fn write_report<R: ReportRow, W: Write>(rows: &[R], out: W, format: &ReportFormat) -> Result<()> {
    let mut out = out;
    writeln!(out, "{}", R::header().join(","))?;
    for row in rows {
        writeln!(out, "{}", row.fields(format).join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Write rows to a CSV file. Empty reports are rejected.
pub fn emit_report<R: ReportRow>(rows: &[R], path: impl AsRef<Path>, format: &ReportFormat) -> Result<()> {
    if rows.is_empty() {
        return Err(NpbError::InvalidParameter("report has no rows".into()));
    }
    write_report(rows, BufWriter::new(File::create(path)?), format)
}

/// Render rows to a CSV string.
pub fn report_string<R: ReportRow>(rows: &[R], format: &ReportFormat) -> String {
    let mut buf = Vec::new();
    write_report(rows, &mut buf, format).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is UTF-8")
}
