//! Uniform Cartesian grids, node fields, relative error norms and
//! trilinear charge deposition.
//!
//! Fields are stored node-major with `x` varying fastest:
//! `index = i + nx * (j + ny * k)`. Lines along `x` are contiguous; lines
//! along `y` and `z` have strides `nx` and `nx * ny`.

use std::io::Write;

use crate::error::{NpbError, Result};
use crate::geometry::MolecularSystem;
use crate::problem::COULOMB_PREFACTOR;

/// Cartesian axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Uniform grid with identical spacing on all three axes. Node counts
/// include the boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3D {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub h: f64,
    pub n: [usize; 3],
}

/// Build a grid over `[lo, hi]` with spacing `h`. Every extent must be an
/// integer multiple of `h` (to 1e-9) and hold at least one interior node.
pub fn make_grid(lo: [f64; 3], hi: [f64; 3], h: f64) -> Result<Grid3D> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(NpbError::InvalidGrid(format!("spacing must be positive, got {h}")));
    }
    let mut n = [0usize; 3];
    for d in 0..3 {
        let extent = hi[d] - lo[d];
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(NpbError::InvalidGrid(format!(
                "axis {d}: upper bound {} must exceed lower bound {}",
                hi[d], lo[d]
            )));
        }
        let cells = extent / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 {
            return Err(NpbError::InvalidGrid(format!(
                "axis {d}: extent {extent} is not a multiple of spacing {h} ({cells} cells)"
            )));
        }
        n[d] = rounded as usize + 1;
        if n[d] < 3 {
            return Err(NpbError::InvalidGrid(format!(
                "axis {d}: {} nodes leave no interior node",
                n[d]
            )));
        }
    }
    Ok(Grid3D { lo, hi, h, n })
}

impl Grid3D {
    pub fn nx(&self) -> usize {
        self.n[0]
    }
    pub fn ny(&self) -> usize {
        self.n[1]
    }
    pub fn nz(&self) -> usize {
        self.n[2]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.n[0];
        let rest = idx / self.n[0];
        (i, rest % self.n[1], rest / self.n[1])
    }

    /// Distance in memory between neighbours along `axis`.
    #[inline]
    pub fn stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => 1,
            Axis::Y => self.n[0],
            Axis::Z => self.n[0] * self.n[1],
        }
    }

    #[inline]
    pub fn coord(&self, d: usize, i: usize) -> f64 {
        self.lo[d] + i as f64 * self.h
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i + 1 == self.n[0] || j + 1 == self.n[1] || k + 1 == self.n[2]
    }

    pub fn is_boundary_index(&self, idx: usize) -> bool {
        let (i, j, k) = self.ijk(idx);
        self.is_boundary(i, j, k)
    }

    /// Node index of `p` if it lies on a node (to 1e-9 of the spacing).
    pub fn node_at(&self, p: [f64; 3]) -> Option<usize> {
        let mut ijk = [0usize; 3];
        for d in 0..3 {
            let s = (p[d] - self.lo[d]) / self.h;
            let r = s.round();
            if (s - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.n[d] {
                return None;
            }
            ijk[d] = r as usize;
        }
        Some(self.index(ijk[0], ijk[1], ijk[2]))
    }

    /// Number of half-edges along `axis` (edges between neighbouring nodes).
    pub fn half_len(&self, axis: Axis) -> usize {
        let mut n = self.n;
        n[axis.index()] -= 1;
        n[0] * n[1] * n[2]
    }

    /// Index of the half-edge between node `(i,j,k)` and its `+axis`
    /// neighbour.
    #[inline]
    pub fn half_index(&self, axis: Axis, i: usize, j: usize, k: usize) -> usize {
        match axis {
            Axis::X => i + (self.n[0] - 1) * (j + self.n[1] * k),
            Axis::Y => i + self.n[0] * (j + (self.n[1] - 1) * k),
            Axis::Z => i + self.n[0] * (j + self.n[1] * k),
        }
    }
}

/// Real values at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid3D,
    data: Vec<f64>,
    diverged: bool,
}

impl ScalarField {
    pub fn zeros(grid: Grid3D) -> Self {
        Self { grid, data: vec![0.0; grid.len()], diverged: false }
    }

    pub fn from_fn(grid: Grid3D, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..grid.nz() {
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    data.push(f(grid.point(i, j, k)));
                }
            }
        }
        Self { grid, data, diverged: false }
    }

    pub fn from_vec(grid: Grid3D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(NpbError::FieldMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data, diverged: false })
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.grid.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Marked when a march produced non-finite or runaway values.
    pub fn is_diverged(&self) -> bool {
        self.diverged
    }

    pub fn mark_diverged(&mut self) {
        self.diverged = true;
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        self.grid == other.grid
    }

    pub(crate) fn check_same_grid(&self, other: &ScalarField, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(NpbError::FieldMismatch(format!("{what}: fields live on different grids")))
        }
    }

    /// Node-wise linear combination `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        self.check_same_grid(other, "combine")?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(ScalarField { grid: self.grid, data, diverged: self.diverged || other.diverged })
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|v| a * v).collect(),
            diverged: self.diverged,
        }
    }

    /// Write the field as CSV with columns `i,j,k,x,y,z,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,k,x,y,z,value")?;
        let g = &self.grid;
        for k in 0..g.nz() {
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let [x, y, z] = g.point(i, j, k);
                    writeln!(out, "{i},{j},{k},{x:.12e},{y:.12e},{z:.12e},{:.15e}", self.get(i, j, k))?;
                }
            }
        }
        Ok(())
    }
}

/// Relative discrete errors of an approximation against a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPair {
    pub l2: f64,
    pub linf: f64,
}

/// Relative L2 and L-infinity errors over all nodes.
pub fn relative_norms(exact: &ScalarField, approx: &ScalarField) -> Result<NormPair> {
    relative_norms_where(exact, approx, |_| true)
}

/// Relative errors restricted to nodes where `include(index)` holds. Used to
/// skip nodes where the reference solution is singular.
pub fn relative_norms_where(
    exact: &ScalarField,
    approx: &ScalarField,
    include: impl Fn(usize) -> bool,
) -> Result<NormPair> {
    exact.check_same_grid(approx, "relative_norms")?;
    let (mut num2, mut den2, mut num_inf, mut den_inf) = (0.0, 0.0, 0.0_f64, 0.0_f64);
    for (idx, (e, a)) in exact.data.iter().zip(&approx.data).enumerate() {
        if !include(idx) {
            continue;
        }
        let d = e - a;
        num2 += d * d;
        den2 += e * e;
        num_inf = num_inf.max(d.abs());
        den_inf = den_inf.max(e.abs());
        if d.is_nan() {
            num_inf = f64::NAN;
        }
    }
    if den_inf == 0.0 {
        return Err(NpbError::ZeroReference);
    }
    Ok(NormPair { l2: (num2 / den2).sqrt(), linf: num_inf / den_inf })
}

/// Trilinear weights of `p` on the 8 corners of its enclosing cell. Returns
/// `(corner index, weight)` pairs; `None` when `p` is not strictly inside the
/// grid interior.
pub fn trilinear_weights(grid: &Grid3D, p: [f64; 3]) -> Option<[(usize, f64); 8]> {
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for d in 0..3 {
        let s = (p[d] - grid.lo[d]) / grid.h;
        if !(s > 0.0 && s < (grid.n[d] - 1) as f64) {
            return None;
        }
        let cell = (s.floor() as usize).min(grid.n[d] - 2);
        base[d] = cell;
        frac[d] = s - cell as f64;
    }
    let mut out = [(0usize, 0.0); 8];
    for (c, slot) in out.iter_mut().enumerate() {
        let (di, dj, dk) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
        let w = |d: usize, bit: usize| if bit == 1 { frac[d] } else { 1.0 - frac[d] };
        *slot = (
            grid.index(base[0] + di, base[1] + dj, base[2] + dk),
            w(0, di) * w(1, dj) * w(2, dk),
        );
    }
    Some(out)
}

/// Spread point charges onto the grid with trilinear weights.
pub fn deposit_point_charges(
    grid: &Grid3D,
    charges: impl IntoIterator<Item = ([f64; 3], f64)>,
) -> Result<ScalarField> {
    let mut q = ScalarField::zeros(*grid);
    for (index, (p, charge)) in charges.into_iter().enumerate() {
        let weights = trilinear_weights(grid, p)
            .ok_or(NpbError::AtomOutsideGrid { index, x: p[0], y: p[1], z: p[2] })?;
        for (idx, w) in weights {
            q.data[idx] += charge * w;
        }
    }
    Ok(q)
}

/// Deposit the atoms of `atoms` onto `grid`.
///
/// Returns `(qfrac, rho)`: the per-node charge in units of `e_c`, and the
/// PDE source density `4π C_es / h³ · qfrac` in dimensionless potential per
/// squared Ångström.
pub fn deposit_charges(atoms: &MolecularSystem, grid: &Grid3D) -> Result<(ScalarField, ScalarField)> {
    let qfrac = deposit_point_charges(grid, atoms.atoms.iter().map(|a| (a.center, a.charge)))?;
    let scale = 4.0 * std::f64::consts::PI * COULOMB_PREFACTOR / grid.h.powi(3);
    let rho = qfrac.scaled(scale);
    Ok((qfrac, rho))
}
