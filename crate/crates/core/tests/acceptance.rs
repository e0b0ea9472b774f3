//! Acceptance gate: runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.
//!
//! Runs as a plain binary (`harness = false`) so the report is always
//! printed: `cargo test -p npb-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use npb_core::energy::{
    energy_pipeline, percent_error, recovered_surface_potential, vacuum_potential_fast, vacuum_potential_lod,
    EnergyConfig, EnergyVariant, RecoverySign,
};
use npb_core::harness::{
    fitted_order, fitted_orders, report_string, run_sphere_spatial, run_sphere_temporal, run_stability_sweep,
    ConvergenceRow, EnergyRow, ExperimentKind, ExperimentSpec, ReportFormat, StabilityRow, STABILITY_DT,
};
use npb_core::problem::{protein_problem, sphere_benchmark, vacuum_problem, BoundarySpec, ProteinParams, SphereParams};
use npb_core::schemes::{nonlinear_step, Stepper};
use npb_core::tridiag::{thomas_solve, TriDiagSystem};
use npb_core::{make_grid, relative_norms, Axis, MarchConfig, ScalarField, SchemeVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criterion 1
const SPATIAL_L2_REFERENCE: [(f64, f64); 3] = [(1.0, 4.58e-1), (0.5, 2.02e-1), (0.25, 1.13e-1)];
const SPATIAL_REL_TOL: f64 = 0.20;
const SPATIAL_ORDER_RANGE: (f64, f64) = (0.7, 1.2);
const SPATIAL_RUNTIME_LIMIT_S: f64 = 300.0;
// Criterion 2
const STABILITY_AMPLITUDE: f64 = 20.0;
const STABILITY_H: f64 = 0.25;
const STABILITY_LARGE_DT_H: f64 = 0.5;
const ADI1_LAST_STABLE_DT: f64 = 0.002;
// Criterion 3
const LOD_VERSION_REL_TOL: f64 = 1e-10;
// Criterion 4
const FLOW_RK4_TOL: f64 = 1e-10;
const FLOW_IDENTITY_TOL: f64 = 1e-12;
const FLOW_RK4_SUBSTEPS: usize = 10_000;
const FLOW_STIFFNESS: [f64; 3] = [0.01, 1.0, 100.0];
// Criterion 5
const THOMAS_RESIDUAL_TOL: f64 = 1e-11;
const FAST_POISSON_REL_TOL: f64 = 1e-10;
// Criterion 6
const TEMPORAL_ORDER_RANGE: (f64, f64) = (0.8, 1.8);
const TEMPORAL_RUNTIME_LIMIT_S: f64 = 1800.0;
// Criterion 7
const BRANCH_ORDER_TOL: f64 = 1e-13;
// Criterion 8
const TOY_H: f64 = 0.5;
const TOY_PADDING: f64 = 4.0;
const ORACLE_DT: f64 = 1e-5;
const ENERGY_T: f64 = 10.0;
const RE_PLUS_V_PERCENT_TOL: f64 = 10.0;
const RE_ORDERING_DT: [f64; 2] = [0.005, 0.0025];
const WALL_TIME_RATIO: f64 = 0.2;
const ENERGY_RUNTIME_LIMIT_S: f64 = 1800.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

struct Gate {
    results: Vec<(String, bool)>,
}

impl Gate {
    fn record(&mut self, id: &str, name: &str, outcome: Outcome) {
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:<3} {status}  {name}: {}", outcome.detail);
        self.results.push((id.to_string(), outcome.pass));
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

fn no_timing() -> ReportFormat {
    ReportFormat { timing: false }
}

fn spatial_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(ExperimentKind::SphereSpatial);
    spec.schemes = vec![SchemeVariant::LODIE1, SchemeVariant::LODIE2];
    spec.h = SPATIAL_L2_REFERENCE.iter().map(|r| r.0).collect();
    spec.amplitude = 1.0;
    spec.t_end = 10.0;
    spec
}

fn criterion_1(rows: &[ConvergenceRow], elapsed: f64) -> Outcome {
    let mut pass = elapsed < SPATIAL_RUNTIME_LIMIT_S;
    let mut parts = Vec::new();
    for scheme in [SchemeVariant::LODIE1, SchemeVariant::LODIE2] {
        let block: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
        let l2: Vec<f64> = block.iter().map(|r| r.errors.l2).collect();
        for (row, (h, expect)) in block.iter().zip(SPATIAL_L2_REFERENCE) {
            let ok = row.h == h && (row.errors.l2 / expect - 1.0).abs() <= SPATIAL_REL_TOL;
            pass &= ok;
        }
        let hs: Vec<f64> = block.iter().map(|r| r.h).collect();
        let order = fitted_order(&hs, &l2).unwrap_or(f64::NAN);
        pass &= (SPATIAL_ORDER_RANGE.0..=SPATIAL_ORDER_RANGE.1).contains(&order);
        parts.push(format!("{scheme} L2 [{}] fitted order {order:.3}", fmt_list(&l2)));
    }
    Outcome::new(
        pass,
        format!(
            "{}; targets [4.58e-1, 2.02e-1, 1.13e-1] +-{:.0}%, order in [{}, {}], {elapsed:.1}s",
            parts.join("; "),
            SPATIAL_REL_TOL * 100.0,
            SPATIAL_ORDER_RANGE.0,
            SPATIAL_ORDER_RANGE.1
        ),
    )
}

fn stability_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(ExperimentKind::StabilitySweep);
    let mut schemes = SchemeVariant::SPLITTING.to_vec();
    schemes.push(SchemeVariant::ADI1);
    spec.schemes = schemes;
    spec.h = vec![STABILITY_H];
    spec.large_dt_h = Some(STABILITY_LARGE_DT_H);
    spec.dt = STABILITY_DT.to_vec();
    spec.amplitude = STABILITY_AMPLITUDE;
    spec.steps = 10_000;
    spec.dt.sort_by(|a, b| b.total_cmp(a));
    spec
}

fn expected_stable(scheme: SchemeVariant, dt: f64) -> bool {
    scheme != SchemeVariant::ADI1 || dt <= ADI1_LAST_STABLE_DT
}

fn criterion_2(rows: &[StabilityRow], elapsed: f64) -> Outcome {
    let mismatches: Vec<String> = rows
        .iter()
        .filter(|r| r.stable != expected_stable(r.scheme, r.dt))
        .map(|r| {
            format!(
                "{} dt={} h={} {} (max|u| {:.3e})",
                r.scheme,
                r.dt,
                r.h,
                if r.stable { "stable" } else { "diverged" },
                r.max_abs
            )
        })
        .collect();
    let splitting_ok = rows.iter().filter(|r| r.scheme != SchemeVariant::ADI1).all(|r| r.stable);
    let expected_cells = (SchemeVariant::SPLITTING.len() + 1) * STABILITY_DT.len();
    let pass = mismatches.is_empty() && rows.len() == expected_cells;
    let detail = format!(
        "{} cells, splitting schemes all stable: {splitting_ok}; {} mismatches vs expected split{}{} ({elapsed:.0}s)",
        rows.len(),
        mismatches.len(),
        if mismatches.is_empty() { "" } else { ": " },
        mismatches.join("; ")
    );
    Outcome::new(pass, detail)
}

fn criterion_3(rows: &[ConvergenceRow]) -> Outcome {
    let at = |s: SchemeVariant| rows.iter().find(|r| r.scheme == s && r.h == 0.5).expect("h = 0.5 row");
    let (a, b) = (at(SchemeVariant::LODIE1), at(SchemeVariant::LODIE2));
    let rel_l2 = (a.errors.l2 - b.errors.l2).abs() / a.errors.l2;
    let rel_linf = (a.errors.linf - b.errors.linf).abs() / a.errors.linf;
    Outcome::new(
        rel_l2 <= LOD_VERSION_REL_TOL && rel_linf <= LOD_VERSION_REL_TOL,
        format!(
            "h=0.5 L2 {:.6e} vs {:.6e} (rel {rel_l2:.2e}), Linf {:.6e} vs {:.6e} (rel {rel_linf:.2e}); tolerance {LOD_VERSION_REL_TOL:.0e}",
            a.errors.l2, b.errors.l2, a.errors.linf, b.errors.linf
        ),
    )
}

fn rk4_flow(w0: f64, stiffness: f64) -> f64 {
    let f = |w: f64| -stiffness * w.sinh();
    let h = 1.0 / FLOW_RK4_SUBSTEPS as f64;
    let mut w = w0;
    for _ in 0..FLOW_RK4_SUBSTEPS {
        let a = f(w);
        let b = f(w + 0.5 * h * a);
        let c = f(w + 0.5 * h * b);
        let d = f(w + h * c);
        w += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
    }
    w
}

fn criterion_4() -> Outcome {
    let grid = make_grid([0.0; 3], [10.0, 0.2, 0.2], 0.1).expect("sample grid");
    let samples = ScalarField::from_fn(grid, |p| p[0] - 5.0);
    let (dt, alpha) = (0.5, 2.0);
    let (mut rk_err, mut id_err) = (0.0_f64, 0.0_f64);
    for s in FLOW_STIFFNESS {
        let kappa2 = ScalarField::from_fn(grid, |_| s * alpha / dt);
        let out = nonlinear_step(&samples, &kappa2, dt, alpha, 1.0).expect("same grid");
        for (&w, &u) in samples.data().iter().zip(out.data()) {
            rk_err = rk_err.max((u - rk4_flow(w, s)).abs());
            id_err = id_err.max(((u / 2.0).tanh() - (-s).exp() * (w / 2.0).tanh()).abs());
        }
    }
    Outcome::new(
        rk_err <= FLOW_RK4_TOL && id_err <= FLOW_IDENTITY_TOL,
        format!(
            "101 samples in [-5,5], stiffness {FLOW_STIFFNESS:?}: max |step - RK4| {rk_err:.2e} (tol {FLOW_RK4_TOL:.0e}), tanh identity {id_err:.2e} (tol {FLOW_IDENTITY_TOL:.0e})"
        ),
    )
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7417);
    let (mut worst_res, mut worst_diff) = (0.0_f64, 0.0_f64);
    for n in 1..=64 {
        for _ in 0..4 {
            let sub: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
            let sup: Vec<f64> = (0..n).map(|i| if i + 1 == n { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
            let diag: Vec<f64> =
                (0..n).map(|i| sub[i].abs() + sup[i].abs() + rng.gen_range(0.05..2.0)).collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let sys = TriDiagSystem { sub: sub.clone(), diag: diag.clone(), sup: sup.clone(), rhs: rhs.clone() };
            let x = thomas_solve(&sys).expect("diagonally dominant");
            let ax = sys.apply(&x);
            let scale = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let res = ax.iter().zip(&rhs).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                dense[i][i] = diag[i];
                if i > 0 {
                    dense[i][i - 1] = sub[i];
                }
                if i + 1 < n {
                    dense[i][i + 1] = sup[i];
                }
            }
            let xd = dense_solve(dense, rhs);
            let xs = xd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let diff = x.iter().zip(&xd).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) / xs;
            worst_res = worst_res.max(res);
            worst_diff = worst_diff.max(diff);
        }
    }

    let grid = make_grid([0.0; 3], [2.0; 3], 0.25).expect("9^3 grid");
    let eps_m = 2.5;
    let boundary = BoundarySpec::from_fn(grid, |p| Ok((p[0] - 0.3 * p[1]).sin() + p[2] * p[2])).expect("finite");
    let mut rho = ScalarField::zeros(grid);
    for k in 1..8 {
        for j in 1..8 {
            for i in 1..8 {
                rho.set(i, j, k, rng.gen_range(-50.0..50.0));
            }
        }
    }
    let fast = vacuum_potential_fast(&rho, eps_m, &boundary).expect("fast solve");
    let m = 7;
    let unknown = |i: usize, j: usize, k: usize| (i - 1) + m * ((j - 1) + m * (k - 1));
    let h2 = grid.h * grid.h;
    let mut a = vec![vec![0.0; m * m * m]; m * m * m];
    let mut b = vec![0.0; m * m * m];
    for k in 1..8 {
        for j in 1..8 {
            for i in 1..8 {
                let row = unknown(i, j, k);
                a[row][row] = 6.0 * eps_m / h2;
                b[row] = rho.get(i, j, k);
                for (di, dj, dk) in [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)] {
                    let (ni, nj, nk) = ((i as i64 + di) as usize, (j as i64 + dj) as usize, (k as i64 + dk) as usize);
                    if grid.is_boundary(ni, nj, nk) {
                        b[row] += eps_m / h2 * boundary.value(grid.index(ni, nj, nk));
                    } else {
                        a[row][unknown(ni, nj, nk)] = -eps_m / h2;
                    }
                }
            }
        }
    }
    let x = dense_solve(a, b);
    let mut dense = boundary.field().clone();
    for k in 1..8 {
        for j in 1..8 {
            for i in 1..8 {
                dense.set(i, j, k, x[unknown(i, j, k)]);
            }
        }
    }
    let fast_rel = relative_norms(&dense, &fast).expect("non-zero").linf;
    Outcome::new(
        worst_res <= THOMAS_RESIDUAL_TOL && worst_diff <= THOMAS_RESIDUAL_TOL && fast_rel <= FAST_POISSON_REL_TOL,
        format!(
            "Thomas n=1..64: residual {worst_res:.2e}, vs dense LU {worst_diff:.2e} (tol {THOMAS_RESIDUAL_TOL:.0e}); fast Poisson vs dense on 9^3: {fast_rel:.2e} (tol {FAST_POISSON_REL_TOL:.0e})"
        ),
    )
}

fn temporal_spec(schemes: &[SchemeVariant]) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(ExperimentKind::SphereTemporal);
    spec.schemes = schemes.to_vec();
    spec.h = vec![0.25];
    spec.t_end = 1.0;
    spec.amplitude = 1.0;
    spec.dt = vec![8e-4, 4e-4, 2e-4, 1e-4, 5e-5, 2.5e-5];
    spec
}

fn criterion_6(rows: &[ConvergenceRow], elapsed: f64) -> Outcome {
    let fits = fitted_orders(rows, true);
    let mut pass = elapsed < TEMPORAL_RUNTIME_LIMIT_S && fits.len() == SchemeVariant::SPLITTING.len();
    let mut parts = Vec::new();
    for (scheme, order) in &fits {
        let o = order.unwrap_or(f64::NAN);
        pass &= (TEMPORAL_ORDER_RANGE.0..=TEMPORAL_ORDER_RANGE.1).contains(&o);
        parts.push(format!("{scheme} {o:.3}"));
    }
    let zero_reference = rows.iter().filter(|r| r.dt == 2.5e-5).all(|r| r.errors.l2 == 0.0);
    pass &= zero_reference;
    Outcome::new(
        pass,
        format!(
            "fitted L2 orders: {}; range [{}, {}]; reference rows zero: {zero_reference} ({elapsed:.0}s)",
            parts.join(", "),
            TEMPORAL_ORDER_RANGE.0,
            TEMPORAL_ORDER_RANGE.1
        ),
    )
}

fn criterion_7() -> Outcome {
    let params = SphereParams::new(0.75, 20.0);
    let problem = sphere_benchmark(&params).expect("sphere");
    let mut rng = ChaCha8Rng::seed_from_u64(0xA05);
    let mut state: Vec<f64> = (0..problem.grid.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
    problem.boundary.impose(&mut state);
    let orders = [
        [Axis::X, Axis::Y, Axis::Z],
        [Axis::X, Axis::Z, Axis::Y],
        [Axis::Y, Axis::X, Axis::Z],
        [Axis::Y, Axis::Z, Axis::X],
        [Axis::Z, Axis::X, Axis::Y],
        [Axis::Z, Axis::Y, Axis::X],
    ];
    let additive = [
        SchemeVariant::AOSIE1,
        SchemeVariant::AOSIE2,
        SchemeVariant::AOSCN1,
        SchemeVariant::AOSCN2,
        SchemeVariant::MAOSIE,
        SchemeVariant::MAOSCN,
    ];
    let mut worst = 0.0_f64;
    for variant in additive {
        let cfg = MarchConfig::new(variant, 0.3, 0.3, 1.0);
        let mut base = state.clone();
        Stepper::new(&problem, &cfg).advance(&mut base);
        for order in &orders[1..] {
            let mut other = state.clone();
            Stepper::new(&problem, &cfg).with_branch_order(*order).advance(&mut other);
            worst = worst.max(base.iter().zip(&other).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())));
        }
    }
    Outcome::new(
        worst <= BRANCH_ORDER_TOL,
        format!("6 additive schemes x 6 branch orders on a random 9^3 state: max change {worst:.2e} (tol {BRANCH_ORDER_TOL:.0e})"),
    )
}

fn toy_params(alpha: f64) -> ProteinParams {
    ProteinParams { h: TOY_H, padding: TOY_PADDING, alpha, ..ProteinParams::default() }
}

struct EnergyRun {
    rows: Vec<EnergyRow>,
    reference: f64,
    re_plus_v: (f64, f64),
    re_ordering: Vec<(f64, f64, f64)>,
    adi_largest_stable: Option<(f64, f64)>,
    recovery: (f64, f64),
    elapsed: f64,
}

fn to_row(label: &str, r: &npb_core::energy::EnergyResult, reference: Option<f64>) -> EnergyRow {
    EnergyRow {
        label: label.to_string(),
        variant: r.config.variant,
        scheme: r.config.scheme,
        dt: r.config.dt,
        t_end: r.config.t_end,
        alpha: r.config.alpha,
        delta_g: r.delta_g,
        diverged: r.diverged,
        wall_time: r.wall_time,
        percent_error: reference.map(|g| percent_error(r.delta_g, g)),
    }
}

/// Every energy run except the explicit-Euler reference.
fn energy_rows_without_oracle(reference: Option<f64>) -> (Vec<npb_core::energy::EnergyResult>, Vec<EnergyRow>) {
    let toy = npb_core::harness::toy_system();
    let params = toy_params(1.0);
    let solvent = protein_problem(&toy, &params).expect("toy solvent");
    let vacuum = vacuum_problem(&toy, &params).expect("toy vacuum");
    let mut configs = vec![EnergyConfig::re_plus_v_default()];
    for dt in RE_ORDERING_DT {
        for variant in [EnergyVariant::Plain, EnergyVariant::Re] {
            configs.push(EnergyConfig { variant, scheme: SchemeVariant::LODIE2, dt, t_end: ENERGY_T, alpha: 1.0 });
        }
    }
    for dt in STABILITY_DT {
        configs.push(EnergyConfig {
            variant: EnergyVariant::Plain,
            scheme: SchemeVariant::ADI1,
            dt,
            t_end: ENERGY_T,
            alpha: 1.0,
        });
    }
    let results: Vec<_> =
        configs.iter().map(|c| energy_pipeline(&solvent, &vacuum, params.eps_m, c).expect("energy run")).collect();
    let rows = results.iter().map(|r| to_row(&toy.label, r, reference)).collect();
    (results, rows)
}

fn run_energy() -> EnergyRun {
    let t0 = Instant::now();
    let toy = npb_core::harness::toy_system();
    let params = toy_params(1.0);
    let solvent = protein_problem(&toy, &params).expect("toy solvent");
    let vacuum = vacuum_problem(&toy, &params).expect("toy vacuum");
    let oracle_cfg = EnergyConfig {
        variant: EnergyVariant::Plain,
        scheme: SchemeVariant::ExplicitEuler,
        dt: ORACLE_DT,
        t_end: ENERGY_T,
        alpha: 1.0,
    };
    let oracle = energy_pipeline(&solvent, &vacuum, params.eps_m, &oracle_cfg).expect("oracle");
    let reference = oracle.delta_g;

    let (results, mut rows) = energy_rows_without_oracle(Some(reference));
    rows.insert(0, to_row(&toy.label, &oracle, Some(reference)));
    let re_plus_v = (results[0].delta_g, results[0].wall_time);
    let re_ordering = RE_ORDERING_DT
        .iter()
        .enumerate()
        .map(|(i, &dt)| {
            let plain = percent_error(results[1 + 2 * i].delta_g, reference);
            let re = percent_error(results[2 + 2 * i].delta_g, reference);
            (dt, plain, re)
        })
        .collect();
    let adi_largest_stable = results[1 + 2 * RE_ORDERING_DT.len()..]
        .iter()
        .filter(|r| !r.diverged && r.delta_g.is_finite())
        .map(|r| (r.config.dt, r.wall_time))
        .last();

    // Recovered surface potential at the RE+V step, both sign conventions.
    let cfg = EnergyConfig::re_plus_v_default();
    let plain_m = energy_pipeline(
        &solvent,
        &vacuum,
        params.eps_m,
        &EnergyConfig { variant: EnergyVariant::Plain, ..cfg },
    )
    .expect("plain solvent");
    let phi_0_lod = vacuum_potential_lod(&vacuum, cfg.dt, cfg.t_end, cfg.alpha).expect("vacuum march").final_field;
    let phi_0_fast = vacuum_potential_fast(&vacuum.rho, params.eps_m, &vacuum.boundary).expect("fast");
    let recovery_err = |sign| {
        let rec = recovered_surface_potential(&plain_m.phi_m, &phi_0_lod, &phi_0_fast, sign).expect("same grid");
        relative_norms(&oracle.phi_m, &rec).expect("non-zero").l2
    };
    let recovery = (recovery_err(RecoverySign::Literal), recovery_err(RecoverySign::Corrected));

    EnergyRun {
        rows,
        reference,
        re_plus_v,
        re_ordering,
        adi_largest_stable,
        recovery,
        elapsed: t0.elapsed().as_secs_f64(),
    }
}

fn main() -> ExitCode {
    let mut gate = Gate { results: Vec::new() };
    let started = Instant::now();
    println!("acceptance suite ({} worker threads)", rayon::current_num_threads());

    gate.record("4", "analytic sinh step vs RK4", criterion_4());
    gate.record("5", "tridiagonal and fast Poisson oracles", criterion_5());
    gate.record("7", "additive branch order invariance", criterion_7());

    let t = Instant::now();
    let spatial = run_sphere_spatial(&spatial_spec()).expect("spatial sweep");
    gate.record("1", "sphere spatial convergence", criterion_1(&spatial, t.elapsed().as_secs_f64()));
    gate.record("3", "LODIE1 and LODIE2 agree", criterion_3(&spatial));

    let t = Instant::now();
    let temporal = run_sphere_temporal(&temporal_spec(&SchemeVariant::SPLITTING)).expect("temporal sweep");
    gate.record("6", "temporal order", criterion_6(&temporal, t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let stability = run_stability_sweep(&stability_spec()).expect("stability sweep");
    gate.record("2", "stability matrix", criterion_2(&stability, t.elapsed().as_secs_f64()));

    let energy = run_energy();
    gate.record(
        "8a",
        "explicit-Euler reference energy",
        Outcome::new(
            energy.reference.is_finite() && !energy.rows[0].diverged,
            format!("toy5 dG = {:.6} kcal/mol (dt {ORACLE_DT:e}, T {ENERGY_T})", energy.reference),
        ),
    );
    let pct = percent_error(energy.re_plus_v.0, energy.reference);
    gate.record(
        "8b",
        "LODIE2 RE+V energy",
        Outcome::new(
            pct <= RE_PLUS_V_PERCENT_TOL,
            format!(
                "dt 0.4, alpha 1/25: dG = {:.4} kcal/mol, error {pct:.2}% (tol {RE_PLUS_V_PERCENT_TOL}%)",
                energy.re_plus_v.0
            ),
        ),
    );
    let ordering_ok = energy.re_ordering.iter().all(|(_, plain, re)| re < plain);
    gate.record(
        "8c",
        "Richardson beats plain",
        Outcome::new(
            ordering_ok,
            energy
                .re_ordering
                .iter()
                .map(|(dt, plain, re)| format!("dt {dt}: plain {plain:.3}% vs RE {re:.3}%"))
                .collect::<Vec<_>>()
                .join("; "),
        ),
    );
    let (re_time, adi) = (energy.re_plus_v.1, energy.adi_largest_stable);
    let (timing_ok, timing_detail) = match adi {
        Some((dt, adi_time)) => (
            re_time < WALL_TIME_RATIO * adi_time,
            format!(
                "RE+V {re_time:.4}s vs ADI1 at its largest stable dt {dt}: {adi_time:.4}s (need ratio < {WALL_TIME_RATIO})"
            ),
        ),
        None => (false, "ADI1 had no stable dt".into()),
    };
    gate.record("8d", "RE+V cost vs ADI1", Outcome::new(timing_ok, timing_detail));
    gate.record(
        "8",
        "energy runtime",
        Outcome::new(
            energy.elapsed < ENERGY_RUNTIME_LIMIT_S,
            format!("{:.0}s including the reference (limit {ENERGY_RUNTIME_LIMIT_S}s)", energy.elapsed),
        ),
    );
    let (literal, corrected) = energy.recovery;
    println!(
        "info: recovered surface potential vs reference, relative L2: literal {literal:.4e}, corrected {corrected:.4e}; closer: {}",
        if literal <= corrected { "literal" } else { "corrected" }
    );

    gate.record("9", "deterministic reports", criterion_9(&spatial, &temporal, &stability, &energy.rows));

    let failed: Vec<&str> = gate.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed{} ({:.0}s)",
        gate.results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" [{}]", failed.join(", ")) },
        started.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Re-run a subset of every report in pools of 2 and 4 threads and compare
/// the timing-free CSV bytes with the first run.
fn criterion_9(
    spatial: &[ConvergenceRow],
    temporal: &[ConvergenceRow],
    stability: &[StabilityRow],
    energy: &[EnergyRow],
) -> Outcome {
    let fmt = no_timing();
    let mut checks = Vec::new();
    for threads in [2, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("pool");
        pool.install(|| {
            let rerun = run_sphere_spatial(&spatial_spec()).expect("spatial");
            checks.push(("spatial", threads, report_string(&rerun, &fmt) == report_string(spatial, &fmt)));

            let subset = [SchemeVariant::LODIE1, SchemeVariant::MAOSCN];
            let rerun = run_sphere_temporal(&temporal_spec(&subset)).expect("temporal");
            let first: Vec<ConvergenceRow> = temporal.iter().filter(|r| subset.contains(&r.scheme)).cloned().collect();
            checks.push(("temporal", threads, report_string(&rerun, &fmt) == report_string(&first, &fmt)));

            let mut spec = stability_spec();
            spec.dt.retain(|&dt| dt >= 0.5);
            let rerun = run_stability_sweep(&spec).expect("stability");
            let first: Vec<StabilityRow> = stability.iter().filter(|r| r.dt >= 0.5).cloned().collect();
            checks.push(("stability", threads, report_string(&rerun, &fmt) == report_string(&first, &fmt)));

            let reference = energy[0].percent_error.map(|_| energy[0].delta_g);
            let (_, rerun) = energy_rows_without_oracle(reference);
            checks.push(("energy", threads, report_string(&rerun, &fmt) == report_string(&energy[1..], &fmt)));

            let point_checks = [criterion_4().detail, criterion_5().detail, criterion_7().detail];
            let again = [criterion_4().detail, criterion_5().detail, criterion_7().detail];
            checks.push(("oracles", threads, point_checks == again));
        });
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.2).map(|c| format!("{} ({} threads)", c.0, c.1)).collect();
    Outcome::new(
        failed.is_empty(),
        if failed.is_empty() {
            format!(
                "{} reruns byte-identical (spatial full, temporal LODIE1/MAOSCN, stability dt >= 0.5, energy without reference, oracle summaries)",
                checks.len()
            )
        } else {
            format!("differences in {}", failed.join(", "))
        },
    )
}
