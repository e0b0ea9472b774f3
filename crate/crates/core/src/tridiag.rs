//! Thomas-algorithm tridiagonal solves and the grid-line systems of the
//! one-dimensional implicit sweeps.
//!
//! [`thomas_solve`] and [`assemble_line`] work on one explicit
//! [`TriDiagSystem`]. The marching loop instead uses [`AxisSolver`], which
//! factors every line of an axis once (the operator does not change between
//! steps) and then only performs the two substitution passes per sweep.

use crate::error::{NpbError, Result};
use crate::geometry::RegionMap;
use crate::grid::{Axis, Grid3D};

/// Tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TriDiagSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x` for this system's matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

const PIVOT_FLOOR: f64 = 1e-300;

/// Solve a tridiagonal system by forward elimination and back substitution.
pub fn thomas_solve(sys: &TriDiagSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    if n == 0 || sys.sub.len() != n || sys.sup.len() != n || sys.rhs.len() != n {
        return Err(NpbError::InvalidParameter(format!(
            "tridiagonal arrays must share a non-zero length (diag has {n})"
        )));
    }
    let mut x = sys.rhs.clone();
    let mut scratch = vec![0.0; n];
    thomas_solve_in_place(&sys.sub, &sys.diag, &sys.sup, &mut x, &mut scratch)?;
    Ok(x)
}

/// In-place variant: `x` holds the right-hand side on entry and the solution
/// on exit. `scratch` must have the same length and is overwritten.
pub fn thomas_solve_in_place(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    x: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = x.len();
    let mut pivot = diag[0];
    if pivot.abs() < PIVOT_FLOOR {
        return Err(NpbError::SingularSystem { row: 0, pivot });
    }
    x[0] /= pivot;
    for i in 1..n {
        scratch[i - 1] = sup[i - 1] / pivot;
        pivot = diag[i] - sub[i] * scratch[i - 1];
        if pivot.abs() < PIVOT_FLOOR || !pivot.is_finite() {
            return Err(NpbError::SingularSystem { row: i, pivot });
        }
        x[i] = (x[i] - sub[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= scratch[i] * x[i + 1];
    }
    Ok(())
}

/// Coefficient `c Δt / (α h²)` multiplying the half-edge dielectric values.
#[inline]
pub fn sweep_ratio(c: f64, dt: f64, alpha: f64, h: f64) -> f64 {
    c * dt / (alpha * h * h)
}

fn line_nodes(grid: &Grid3D, axis: Axis, line: (usize, usize)) -> impl Iterator<Item = [usize; 3]> {
    let n = grid.n[axis.index()];
    (0..n).map(move |p| match axis {
        Axis::X => [p, line.0, line.1],
        Axis::Y => [line.0, p, line.1],
        Axis::Z => [line.0, line.1, p],
    })
}

/// Assemble `(1 - cΔt/α δ²_axis) x = rhs` on the interior nodes of one grid
/// line. `line` holds the two perpendicular indices in axis order (`(j,k)`
/// for x, `(i,k)` for y, `(i,j)` for z); `rhs_line` has one entry per interior
/// node; the Dirichlet values at both ends are folded into the right-hand
/// side.
#[allow(clippy::too_many_arguments)]
pub fn assemble_line(
    axis: Axis,
    line: (usize, usize),
    region: &RegionMap,
    c: f64,
    dt: f64,
    alpha: f64,
    rhs_line: &[f64],
    boundary_values: (f64, f64),
) -> Result<TriDiagSystem> {
    let grid = region.grid();
    let n = grid.n[axis.index()];
    let perp: Vec<usize> = (0..3).filter(|&d| d != axis.index()).collect();
    if line.0 >= grid.n[perp[0]] || line.1 >= grid.n[perp[1]] {
        return Err(NpbError::InvalidParameter(format!("line {line:?} is outside the grid")));
    }
    if rhs_line.len() != n - 2 {
        return Err(NpbError::InvalidParameter(format!(
            "line has {} interior nodes, rhs has {}",
            n - 2,
            rhs_line.len()
        )));
    }
    let r = sweep_ratio(c, dt, alpha, grid.h);
    let nodes: Vec<[usize; 3]> = line_nodes(grid, axis, line).collect();
    let m = n - 2;
    let mut sys = TriDiagSystem {
        sub: vec![0.0; m],
        diag: vec![0.0; m],
        sup: vec![0.0; m],
        rhs: rhs_line.to_vec(),
    };
    for row in 0..m {
        let p = row + 1;
        let [i0, j0, k0] = nodes[p - 1];
        let [i1, j1, k1] = nodes[p];
        let e_minus = region.eps_half(axis, i0, j0, k0);
        let e_plus = region.eps_half(axis, i1, j1, k1);
        sys.diag[row] = 1.0 + r * (e_minus + e_plus);
        sys.sub[row] = -r * e_minus;
        sys.sup[row] = -r * e_plus;
        if row == 0 {
            sys.rhs[row] += r * e_minus * boundary_values.0;
        }
        if row + 1 == m {
            sys.rhs[row] += r * e_plus * boundary_values.1;
        }
    }
    if m > 0 {
        sys.sub[0] = 0.0;
        sys.sup[m - 1] = 0.0;
    }
    Ok(sys)
}

/// Every line of one axis, LU-factored for `(1 - r ε δ̃²) x = rhs` with the
/// line's end nodes held at their Dirichlet values.
///
/// Coefficients are stored per node. For an interior node at position `p`
/// along the axis: `lower` is `r ε_{p-1/2}`, `pivot_inv` the reciprocal of the
/// eliminated pivot, and `upper` is `r ε_{p+1/2} · pivot_inv`.
#[derive(Debug, Clone)]
pub struct AxisSolver {
    axis: Axis,
    grid: Grid3D,
    lower: Vec<f64>,
    pivot_inv: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisSolver {
    /// Factor the lines of `axis` for ratio `r = cΔt/(αh²)`.
    pub fn new(region: &RegionMap, axis: Axis, r: f64) -> Self {
        let grid = *region.grid();
        let len = grid.len();
        let (mut lower, mut pivot_inv, mut upper) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let stride = grid.stride(axis);
        for k in 0..grid.nz() {
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    let ijk = [i, j, k];
                    let p = ijk[axis.index()];
                    if grid.is_boundary(i, j, k) {
                        continue;
                    }
                    let idx = grid.index(i, j, k);
                    let mut prev = ijk;
                    prev[axis.index()] -= 1;
                    let e_minus = region.eps_half(axis, prev[0], prev[1], prev[2]);
                    let e_plus = region.eps_half(axis, i, j, k);
                    let a = r * e_minus;
                    let prev_upper = if p == 1 { 0.0 } else { upper[idx - stride] };
                    let pivot = 1.0 + r * (e_minus + e_plus) - a * prev_upper;
                    lower[idx] = a;
                    pivot_inv[idx] = 1.0 / pivot;
                    upper[idx] = r * e_plus / pivot;
                }
            }
        }
        Self { axis, grid, lower, pivot_inv, upper }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Solve in place. `buf` holds the right-hand side at interior nodes and
    /// the Dirichlet values at boundary nodes; on return the interior holds the
    /// solution and the boundary is untouched.
    pub fn solve_in_place(&self, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.grid.len());
        let [nx, ny, nz] = self.grid.n;
        match self.axis {
            Axis::X => {
                for k in 1..nz - 1 {
                    for j in 1..ny - 1 {
                        let base = nx * (j + ny * k);
                        let line = &mut buf[base..base + nx];
                        let lo = &self.lower[base..base + nx];
                        let pi = &self.pivot_inv[base..base + nx];
                        let up = &self.upper[base..base + nx];
                        for p in 1..nx - 1 {
                            line[p] = (line[p] + lo[p] * line[p - 1]) * pi[p];
                        }
                        for p in (1..nx - 1).rev() {
                            line[p] += up[p] * line[p + 1];
                        }
                    }
                }
            }
            Axis::Y => {
                let plane = nx * ny;
                for k in 1..nz - 1 {
                    let off = k * plane;
                    for j in 1..ny - 1 {
                        let row = off + j * nx;
                        for i in 1..nx - 1 {
                            let idx = row + i;
                            buf[idx] = (buf[idx] + self.lower[idx] * buf[idx - nx]) * self.pivot_inv[idx];
                        }
                    }
                    for j in (1..ny - 1).rev() {
                        let row = off + j * nx;
                        for i in 1..nx - 1 {
                            let idx = row + i;
                            buf[idx] += self.upper[idx] * buf[idx + nx];
                        }
                    }
                }
            }
            Axis::Z => {
                let plane = nx * ny;
                for k in 1..nz - 1 {
                    for j in 1..ny - 1 {
                        let row = k * plane + j * nx;
                        for i in 1..nx - 1 {
                            let idx = row + i;
                            buf[idx] =
                                (buf[idx] + self.lower[idx] * buf[idx - plane]) * self.pivot_inv[idx];
                        }
                    }
                }
                for k in (1..nz - 1).rev() {
                    for j in 1..ny - 1 {
                        let row = k * plane + j * nx;
                        for i in 1..nx - 1 {
                            let idx = row + i;
                            buf[idx] += self.upper[idx] * buf[idx + plane];
                        }
                    }
                }
            }
        }
    }
}
