//! Electrostatic solvation free energy from solvent and vacuum potentials.
//!
//! `ΔG = ½ Σ qfrac (φ_m − φ_0) · 0.592183` kcal/mol. Both potentials are
//! computed from the same deposited source, so the grid self-energy of the
//! point charges cancels in the difference.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{NpbError, Result};
use crate::grid::{Grid3D, ScalarField};
use crate::problem::{BoundarySpec, NpbProblem, KCAL_PER_DIMENSIONLESS};
use crate::schemes::{march, MarchConfig, MarchReport, SchemeVariant};

/// `½ Σ qfrac (φ_m − φ_0)` in kcal/mol, summed in node order.
///
/// Returns NaN if either potential is flagged diverged.
pub fn solvation_energy(qfrac: &ScalarField, phi_m: &ScalarField, phi_0: &ScalarField) -> Result<f64> {
    qfrac.check_same_grid(phi_m, "phi_m")?;
    qfrac.check_same_grid(phi_0, "phi_0")?;
    if phi_m.is_diverged() || phi_0.is_diverged() {
        return Ok(f64::NAN);
    }
    let mut sum = 0.0;
    for ((q, m), z) in qfrac.data().iter().zip(phi_m.data()).zip(phi_0.data()) {
        sum += q * (m - z);
    }
    Ok(0.5 * sum * KCAL_PER_DIMENSIONLESS)
}

/// Type-I discrete sine transform `X_p = Σ_q x_q sin(π p q / (m+1))`,
/// evaluated through a complex FFT of the odd extension.
struct Dst1 {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Dst1 {
    fn new(m: usize, planner: &mut FftPlanner<f64>) -> Self {
        let n = 2 * (m + 1);
        let fft = planner.plan_fft_forward(n);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self { m, fft, buf: vec![Complex::default(); n], scratch }
    }

    fn apply(&mut self, x: &mut [f64]) {
        let (m, n) = (self.m, 2 * (self.m + 1));
        self.buf.fill(Complex::default());
        for q in 1..=m {
            self.buf[q].re = x[q - 1];
            self.buf[n - q].re = -x[q - 1];
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for p in 1..=m {
            x[p - 1] = -0.5 * self.buf[p].im;
        }
    }
}

/// Apply the sine transform along one axis of an interior-only array of
/// shape `m` (x fastest).
fn dst_axis(data: &mut [f64], m: [usize; 3], axis: usize, dst: &mut Dst1) {
    let stride = match axis {
        0 => 1,
        1 => m[0],
        _ => m[0] * m[1],
    };
    let mut line = vec![0.0; m[axis]];
    let (a, b) = match axis {
        0 => (m[1], m[2]),
        1 => (m[0], m[2]),
        _ => (m[0], m[1]),
    };
    for t in 0..b {
        for s in 0..a {
            let base = match axis {
                0 => m[0] * (s + m[1] * t),
                1 => s + m[0] * m[1] * t,
                _ => s + m[0] * t,
            };
            for (p, v) in line.iter_mut().enumerate() {
                *v = data[base + p * stride];
            }
            dst.apply(&mut line);
            for (p, v) in line.iter().enumerate() {
                data[base + p * stride] = *v;
            }
        }
    }
}

/// Solve `−ε_m δ²φ = rho` (7-point Laplacian) with Dirichlet data by sine
/// transform diagonalisation.
pub fn vacuum_potential_fast(rho: &ScalarField, eps_m: f64, boundary: &BoundarySpec) -> Result<ScalarField> {
    rho.check_same_grid(boundary.field(), "boundary")?;
    if !(eps_m > 0.0) {
        return Err(NpbError::InvalidParameter("eps_m must be positive".into()));
    }
    let grid: Grid3D = *rho.grid();
    let h2 = grid.h * grid.h;
    let m = grid.n.map(|n| n - 2);
    let interior = |i: usize, j: usize, k: usize| (i - 1) + m[0] * ((j - 1) + m[1] * (k - 1));
    let g = boundary.field().data();

    // Right-hand side with the Dirichlet values lifted in.
    let mut f = vec![0.0; m[0] * m[1] * m[2]];
    for k in 1..grid.nz() - 1 {
        for j in 1..grid.ny() - 1 {
            for i in 1..grid.nx() - 1 {
                let idx = grid.index(i, j, k);
                let mut lifted = 0.0;
                for (ni, nj, nk) in [(i - 1, j, k), (i + 1, j, k), (i, j - 1, k), (i, j + 1, k), (i, j, k - 1), (i, j, k + 1)] {
                    if grid.is_boundary(ni, nj, nk) {
                        lifted += g[grid.index(ni, nj, nk)];
                    }
                }
                f[interior(i, j, k)] = rho.data()[idx] / eps_m + lifted / h2;
            }
        }
    }

    let mut planner = FftPlanner::new();
    let mut dsts: Vec<Dst1> = m.iter().map(|&len| Dst1::new(len, &mut planner)).collect();
    for (axis, dst) in dsts.iter_mut().enumerate() {
        dst_axis(&mut f, m, axis, dst);
    }
    let eig = |axis: usize| -> Vec<f64> {
        (1..=m[axis])
            .map(|p| {
                let s = (std::f64::consts::PI * p as f64 / (2.0 * (m[axis] + 1) as f64)).sin();
                4.0 * s * s / h2
            })
            .collect()
    };
    let (ex, ey, ez) = (eig(0), eig(1), eig(2));
    let norm: f64 = m.iter().map(|&len| 2.0 / (len + 1) as f64).product();
    for r in 0..m[2] {
        for q in 0..m[1] {
            for p in 0..m[0] {
                f[p + m[0] * (q + m[1] * r)] *= norm / (ex[p] + ey[q] + ez[r]);
            }
        }
    }
    for (axis, dst) in dsts.iter_mut().enumerate() {
        dst_axis(&mut f, m, axis, dst);
    }

    let mut out = boundary.field().clone();
    for k in 1..grid.nz() - 1 {
        for j in 1..grid.ny() - 1 {
            for i in 1..grid.nx() - 1 {
                out.data_mut()[grid.index(i, j, k)] = f[interior(i, j, k)];
            }
        }
    }
    Ok(out)
}

/// Vacuum potential by marching LODIE2 on the vacuum problem (uniform `ε_m`,
/// no ions, so the nonlinear stage is the identity).
pub fn vacuum_potential_lod(vacuum: &NpbProblem, dt: f64, t_end: f64, alpha: f64) -> Result<MarchReport> {
    march(vacuum, &MarchConfig::new(SchemeVariant::LODIE2, dt, t_end, alpha))
}

/// Pointwise Richardson extrapolation `2 φ(Δt/2) − φ(Δt)` of a first-order
/// quantity.
pub fn richardson(phi_dt: &ScalarField, phi_halfdt: &ScalarField) -> Result<ScalarField> {
    phi_halfdt.combine(2.0, phi_dt, -1.0)
}

/// Which potentials enter ΔG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyVariant {
    /// One march for φ_m, fast Poisson for φ_0.
    Plain,
    /// Richardson-extrapolated φ_m, fast Poisson for φ_0.
    Re,
    /// Richardson-extrapolated φ_m and φ_0, both marched with the same scheme.
    RePlusV,
}

impl EnergyVariant {
    pub const ALL: [EnergyVariant; 3] = [EnergyVariant::Plain, EnergyVariant::Re, EnergyVariant::RePlusV];

    pub fn name(self) -> &'static str {
        match self {
            EnergyVariant::Plain => "Plain",
            EnergyVariant::Re => "RE",
            EnergyVariant::RePlusV => "RE+V",
        }
    }
}

impl fmt::Display for EnergyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnergyVariant {
    type Err = NpbError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| NpbError::InvalidParameter(format!("unknown energy variant `{s}`; valid: Plain, RE, RE+V")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    pub variant: EnergyVariant,
    pub scheme: SchemeVariant,
    pub dt: f64,
    pub t_end: f64,
    pub alpha: f64,
}

impl EnergyConfig {
    /// LODIE2 RE+V at `Δt = 0.4`, `α = 1/25`, `T = 10`.
    pub fn re_plus_v_default() -> Self {
        Self { variant: EnergyVariant::RePlusV, scheme: SchemeVariant::LODIE2, dt: 0.4, t_end: 10.0, alpha: 1.0 / 25.0 }
    }
}

#[derive(Debug, Clone)]
pub struct EnergyResult {
    pub label: String,
    pub config: EnergyConfig,
    /// kcal/mol; NaN when any march diverged.
    pub delta_g: f64,
    pub diverged: bool,
    /// Sum of the solver wall times (all marches plus the fast solve).
    pub wall_time: f64,
    pub phi_m: ScalarField,
    pub phi_0: ScalarField,
}

fn march_pair(problem: &NpbProblem, cfg: &MarchConfig) -> Result<(ScalarField, bool, f64)> {
    let half = MarchConfig { dt: 0.5 * cfg.dt, ..*cfg };
    let (a, b) = rayon::join(|| march(problem, cfg), || march(problem, &half));
    let (a, b) = (a?, b?);
    let mut phi = richardson(&a.final_field, &b.final_field)?;
    let diverged = a.diverged || b.diverged;
    if diverged {
        phi.mark_diverged();
    }
    Ok((phi, diverged, a.wall_time + b.wall_time))
}

/// ΔG for one solvent/vacuum problem pair. Both problems must share the
/// grid and the deposited charges.
pub fn energy_pipeline(
    solvent: &NpbProblem,
    vacuum: &NpbProblem,
    eps_m: f64,
    config: &EnergyConfig,
) -> Result<EnergyResult> {
    solvent.qfrac.check_same_grid(&vacuum.qfrac, "vacuum problem")?;
    if solvent.qfrac != vacuum.qfrac {
        return Err(NpbError::FieldMismatch("solvent and vacuum problems carry different charges".into()));
    }
    let cfg = MarchConfig::new(config.scheme, config.dt, config.t_end, config.alpha);
    cfg.validate()?;

    let fast = || -> Result<(ScalarField, f64)> {
        let t0 = Instant::now();
        let phi = vacuum_potential_fast(&vacuum.rho, eps_m, &vacuum.boundary)?;
        Ok((phi, t0.elapsed().as_secs_f64()))
    };
    let ((phi_m, div_m, t_m), (phi_0, div_0, t_0)) = match config.variant {
        EnergyVariant::Plain => {
            let r = march(solvent, &cfg)?;
            let (phi0, t0) = fast()?;
            ((r.final_field, r.diverged, r.wall_time), (phi0, false, t0))
        }
        EnergyVariant::Re => {
            let m = march_pair(solvent, &cfg)?;
            let (phi0, t0) = fast()?;
            (m, (phi0, false, t0))
        }
        EnergyVariant::RePlusV => {
            let (m, z) = rayon::join(|| march_pair(solvent, &cfg), || march_pair(vacuum, &cfg));
            (m?, z?)
        }
    };
    let delta_g = solvation_energy(&solvent.qfrac, &phi_m, &phi_0)?;
    Ok(EnergyResult {
        label: solvent.label.clone(),
        config: *config,
        delta_g,
        diverged: div_m || div_0,
        wall_time: t_m + t_0,
        phi_m,
        phi_0,
    })
}

/// `100 |value − reference| / |reference|`.
pub fn percent_error(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference).abs() / reference.abs()
}

/// Sign convention for [`recovered_surface_potential`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecoverySign {
    /// `φ_m + φ_0^LOD − φ_0^fast`.
    #[default]
    Literal,
    /// `φ_m − φ_0^LOD + φ_0^fast`: removes the vacuum splitting error.
    Corrected,
}

impl FromStr for RecoverySign {
    type Err = NpbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(RecoverySign::Literal),
            "corrected" => Ok(RecoverySign::Corrected),
            other => Err(NpbError::InvalidParameter(format!(
                "recovery sign must be `literal` or `corrected`, found `{other}`"
            ))),
        }
    }
}

/// Solvent potential adjusted by the difference between the marched and the
/// fast vacuum potentials.
pub fn recovered_surface_potential(
    phi_m_lod: &ScalarField,
    phi_0_lod: &ScalarField,
    phi_0_fast: &ScalarField,
    sign: RecoverySign,
) -> Result<ScalarField> {
    let d = phi_0_lod.combine(1.0, phi_0_fast, -1.0)?;
    let s = match sign {
        RecoverySign::Literal => 1.0,
        RecoverySign::Corrected => -1.0,
    };
    phi_m_lod.combine(1.0, &d, s)
}
