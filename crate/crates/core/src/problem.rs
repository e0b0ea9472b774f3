//! Physical constants and assembly of complete pseudo-time NPB problems:
//! the analytic sphere benchmark and molecular (protein-style) problems.

use std::f64::consts::PI;

use crate::error::{NpbError, Result};
use crate::geometry::{build_region_maps, dist2, norm, MolecularSystem, RegionMap, Surface};
use crate::grid::{deposit_charges, deposit_point_charges, make_grid, Grid3D, ScalarField};

/// Dimensionless potential (k_B T / e_c) to kcal/mol/e_c at 298 K.
pub const KCAL_PER_DIMENSIONLESS: f64 = 0.592183;

/// κ̄² per unit molar ionic strength, Å⁻² M⁻¹, at 298 K.
pub const KAPPA2_PER_MOLAR: f64 = 8.486902807;

/// Coulomb energy of two unit charges 1 Å apart in vacuum, kcal/mol.
pub const COULOMB_KCAL_ANGSTROM: f64 = 332.0636;

/// `e_c² / (k_B T)` expressed as a length in Å, so that a point charge `q`
/// in dielectric `ε` has dimensionless potential `C_es q / (ε r)`.
pub const COULOMB_PREFACTOR: f64 = COULOMB_KCAL_ANGSTROM / KCAL_PER_DIMENSIONLESS;

/// κ̄ used for the molecular problems unless overridden.
pub const PROTEIN_KAPPA_BAR: f64 = 0.1261;

/// Dirichlet data on the six faces of a grid. The same values apply to the
/// solution and to every intermediate stage field of a splitting scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    values: ScalarField,
    nodes: Vec<usize>,
}

impl BoundarySpec {
    /// Evaluate `f` at every boundary node.
    pub fn from_fn(grid: Grid3D, f: impl Fn([f64; 3]) -> Result<f64>) -> Result<Self> {
        let mut values = ScalarField::zeros(grid);
        let mut nodes = Vec::new();
        for idx in 0..grid.len() {
            let (i, j, k) = grid.ijk(idx);
            if grid.is_boundary(i, j, k) {
                let v = f(grid.point(i, j, k))?;
                if !v.is_finite() {
                    return Err(NpbError::InvalidParameter(format!("non-finite boundary value at node {idx}")));
                }
                values.data_mut()[idx] = v;
                nodes.push(idx);
            }
        }
        Ok(Self { values, nodes })
    }

    pub fn constant(grid: Grid3D, v: f64) -> Self {
        Self::from_fn(grid, |_| Ok(v)).expect("finite constant")
    }

    /// Node indices on the boundary, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values.data()[idx]
    }

    /// Values at all nodes (zero in the interior).
    pub fn field(&self) -> &ScalarField {
        &self.values
    }

    /// Overwrite the boundary nodes of `buf`.
    pub fn impose(&self, buf: &mut [f64]) {
        let v = self.values.data();
        for &idx in &self.nodes {
            buf[idx] = v[idx];
        }
    }
}

/// A complete time-dependent NPB problem
/// `α u_t = ∇·(ε∇u) − κ̄² sinh(u) + ρ` on a grid with Dirichlet data.
#[derive(Debug, Clone)]
pub struct NpbProblem {
    pub label: String,
    pub grid: Grid3D,
    pub region: RegionMap,
    /// PDE source.
    pub rho: ScalarField,
    /// Deposited charge per node (e_c); zero for problems without atoms.
    pub qfrac: ScalarField,
    pub boundary: BoundarySpec,
    pub alpha: f64,
    pub initial: ScalarField,
}

/// Screened Coulomb boundary potential
/// `C_es Σ q_i/(ε_s d_i) exp(−κ̄ d_i/√ε_s)`.
pub fn coulomb_screened_boundary(point: [f64; 3], atoms: &MolecularSystem, eps_s: f64, kappa_bar: f64) -> Result<f64> {
    let mut sum = 0.0;
    for (i, a) in atoms.atoms.iter().enumerate() {
        let d = dist2(point, a.center).sqrt();
        if d == 0.0 {
            return Err(NpbError::SingularPoint(i));
        }
        sum += a.charge / (eps_s * d) * (-kappa_bar * d / eps_s.sqrt()).exp();
    }
    Ok(COULOMB_PREFACTOR * sum)
}

/// Exact potential of a unit charge at the centre of a sphere of radius `r_sphere`,
/// with `eps_ratio = ε_s/ε_m`.
pub fn sphere_exact(point: [f64; 3], eps_ratio: f64, r_sphere: f64) -> Result<f64> {
    let r = norm(point);
    if r == 0.0 {
        return Err(NpbError::SingularPoint(0));
    }
    Ok(if r < r_sphere {
        1.0 / (eps_ratio * r_sphere) - 1.0 / r_sphere + 1.0 / r
    } else {
        1.0 / (eps_ratio * r)
    })
}

/// Parameters of the spherical-cavity benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereParams {
    pub h: f64,
    /// Amplitude of the cosine perturbation in the initial field.
    pub amplitude: f64,
    pub half_width: f64,
    pub radius: f64,
    pub eps_m: f64,
    pub eps_s: f64,
    pub kappa_bar: f64,
    pub alpha: f64,
}

impl SphereParams {
    pub fn new(h: f64, amplitude: f64) -> Self {
        Self { h, amplitude, half_width: 3.0, radius: 1.0, eps_m: 1.0, eps_s: 80.0, kappa_bar: 1.0, alpha: 1.0 }
    }

    pub fn eps_ratio(&self) -> f64 {
        self.eps_s / self.eps_m
    }

    pub fn grid(&self) -> Result<Grid3D> {
        make_grid([-self.half_width; 3], [self.half_width; 3], self.h)
    }

    /// The analytic solution at every node, with the singular origin node
    /// set to zero. Use [`SphereParams::error_mask`] to exclude it.
    pub fn exact_field(&self) -> Result<ScalarField> {
        let grid = self.grid()?;
        Ok(ScalarField::from_fn(grid, |p| {
            if norm(p) == 0.0 {
                0.0
            } else {
                sphere_exact(p, self.eps_ratio(), self.radius).expect("non-zero radius")
            }
        }))
    }

    /// True for nodes where the analytic solution is finite.
    pub fn error_mask(&self) -> Result<impl Fn(usize) -> bool> {
        let grid = self.grid()?;
        let origin = grid.node_at([0.0; 3]);
        Ok(move |idx| Some(idx) != origin)
    }
}

/// Assemble the spherical-cavity benchmark.
///
/// The unit charge at the origin contributes `4π ε_m / h³` at the origin
/// node; solvent nodes carry the smooth term `κ̄² sinh(1/(ε r))`. The initial
/// field is `H cos(πx/2L) cos(πy/2L) cos(πz/2L) + 1/(ε r)` with `r` floored at
/// `h/2` so the origin node stays finite.
pub fn sphere_benchmark(params: &SphereParams) -> Result<NpbProblem> {
    let grid = params.grid()?;
    if grid.node_at([0.0; 3]).is_none() {
        return Err(NpbError::InvalidGrid("origin is not a grid node".into()));
    }
    let eps = params.eps_ratio();
    let kappa2 = params.kappa_bar * params.kappa_bar;
    let surface = Surface::AnalyticSphere(params.radius);
    let region = build_region_maps(&grid, &surface, params.eps_m, params.eps_s, kappa2)?;

    let qfrac = deposit_point_charges(&grid, [([0.0; 3], 1.0)])?;
    let charge_scale = 4.0 * PI * params.eps_m / grid.h.powi(3);
    let mut rho = qfrac.scaled(charge_scale);
    for (idx, v) in rho.data_mut().iter_mut().enumerate() {
        let k2 = region.kappa2.data()[idx];
        if k2 > 0.0 {
            let (i, j, k) = grid.ijk(idx);
            let r = norm(grid.point(i, j, k));
            *v += k2 * (1.0 / (eps * r)).sinh();
        }
    }
    let boundary = BoundarySpec::from_fn(grid, |p| sphere_exact(p, eps, params.radius))?;
    for &idx in boundary.nodes() {
        rho.data_mut()[idx] = 0.0;
    }

    let wave = PI / (2.0 * params.half_width);
    let floor = 0.5 * grid.h;
    let mut initial = ScalarField::from_fn(grid, |p| {
        params.amplitude * (wave * p[0]).cos() * (wave * p[1]).cos() * (wave * p[2]).cos()
            + 1.0 / (eps * norm(p).max(floor))
    });
    boundary.impose(initial.data_mut());

    Ok(NpbProblem {
        label: format!("sphere_h{}", params.h),
        grid,
        region,
        rho,
        qfrac,
        boundary,
        alpha: params.alpha,
        initial,
    })
}

/// Parameters of a molecular problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProteinParams {
    pub h: f64,
    pub padding: f64,
    pub kappa_bar: f64,
    pub eps_m: f64,
    pub eps_s: f64,
    pub alpha: f64,
    pub probe_inflation: f64,
}

impl Default for ProteinParams {
    fn default() -> Self {
        Self {
            h: 0.5,
            padding: 8.0,
            kappa_bar: PROTEIN_KAPPA_BAR,
            eps_m: 1.0,
            eps_s: 80.0,
            alpha: 1.0,
            probe_inflation: 0.0,
        }
    }
}

/// Bounding box of the atoms, padded and snapped outward to multiples of `h`.
pub fn padded_grid(system: &MolecularSystem, h: f64, padding: f64) -> Result<Grid3D> {
    let (lo, hi) = system.bounding_box().ok_or(NpbError::NoAtoms)?;
    let snap_lo = lo.map(|v| ((v - padding) / h).floor() * h);
    let snap_hi = hi.map(|v| ((v + padding) / h).ceil() * h);
    let grid = make_grid(snap_lo, snap_hi, h)?;
    for (index, a) in system.atoms.iter().enumerate() {
        for d in 0..3 {
            if a.center[d] - grid.lo[d] < 2.0 * h || grid.hi[d] - a.center[d] < 2.0 * h {
                return Err(NpbError::InvalidParameter(format!(
                    "padding {padding} leaves atom {index} within 2h of a face"
                )));
            }
        }
    }
    Ok(grid)
}

/// Assemble the solvated problem for a molecular system: union-of-spheres
/// surface, trilinear charge deposition, screened Coulomb boundary values,
/// and a zero interior initial field.
pub fn protein_problem(system: &MolecularSystem, params: &ProteinParams) -> Result<NpbProblem> {
    if system.atoms.is_empty() {
        return Err(NpbError::NoAtoms);
    }
    let grid = padded_grid(system, params.h, params.padding)?;
    let surface = Surface::union_of(system, params.probe_inflation);
    let region = build_region_maps(
        &grid,
        &surface,
        params.eps_m,
        params.eps_s,
        params.kappa_bar * params.kappa_bar,
    )?;
    let boundary = BoundarySpec::from_fn(grid, |p| coulomb_screened_boundary(p, system, params.eps_s, params.kappa_bar))?;
    assemble_molecular(system, grid, region, boundary, params.alpha, "solvent")
}

/// The matching vacuum problem: uniform `ε_m`, no ions, and unscreened
/// Coulomb boundary values in `ε_m`.
pub fn vacuum_problem(system: &MolecularSystem, params: &ProteinParams) -> Result<NpbProblem> {
    if system.atoms.is_empty() {
        return Err(NpbError::NoAtoms);
    }
    let grid = padded_grid(system, params.h, params.padding)?;
    let region = RegionMap::uniform(grid, params.eps_m, 0.0);
    let boundary = BoundarySpec::from_fn(grid, |p| coulomb_screened_boundary(p, system, params.eps_m, 0.0))?;
    assemble_molecular(system, grid, region, boundary, params.alpha, "vacuum")
}

fn assemble_molecular(
    system: &MolecularSystem,
    grid: Grid3D,
    region: RegionMap,
    boundary: BoundarySpec,
    alpha: f64,
    tag: &str,
) -> Result<NpbProblem> {
    let (qfrac, rho) = deposit_charges(system, &grid)?;
    let mut initial = ScalarField::zeros(grid);
    boundary.impose(initial.data_mut());
    Ok(NpbProblem {
        label: format!("{}_{tag}", system.label),
        grid,
        region,
        rho,
        qfrac,
        boundary,
        alpha,
        initial,
    })
}

impl NpbProblem {
    /// Same problem with a different pseudo-time scaling.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Discrete steady-state residual `δ²u − κ̄² sinh(u) + ρ` at interior nodes
    /// (zero on the boundary).
    pub fn residual(&self, u: &ScalarField) -> ScalarField {
        let g = &self.grid;
        let mut out = ScalarField::zeros(*g);
        let h2 = g.h * g.h;
        let d = u.data();
        for k in 1..g.nz() - 1 {
            for j in 1..g.ny() - 1 {
                for i in 1..g.nx() - 1 {
                    let idx = g.index(i, j, k);
                    let mut lap = 0.0;
                    for axis in crate::grid::Axis::ALL {
                        let s = g.stride(axis);
                        let mut prev = [i, j, k];
                        prev[axis.index()] -= 1;
                        let em = self.region.eps_half(axis, prev[0], prev[1], prev[2]);
                        let ep = self.region.eps_half(axis, i, j, k);
                        lap += (ep * (d[idx + s] - d[idx]) + em * (d[idx - s] - d[idx])) / h2;
                    }
                    out.data_mut()[idx] =
                        lap - self.region.kappa2.data()[idx] * d[idx].sinh() + self.rho.data()[idx];
                }
            }
        }
        out
    }
}
