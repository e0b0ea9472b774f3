//! Building blocks shared by every scheme: the analytic sinh substep,
//! explicit stencil application, implicit line sweeps and the source update.
//!
//! The buffer kernels work on raw node-major slices and touch interior nodes
//! only; callers keep the Dirichlet values in the boundary nodes.

use crate::error::Result;
use crate::geometry::RegionMap;
use crate::grid::{Axis, Grid3D, ScalarField};
use crate::problem::BoundarySpec;
use crate::tridiag::{sweep_ratio, AxisSolver};

/// One node's analytic update for `α w_t = −κ̄² sinh(w)` over a step whose
/// decay factor is `d = exp(−κ̄²Δt/α)`.
///
/// Equivalent to `2 artanh(d tanh(w/2))`, written so that no intermediate
/// overflows and small results keep full relative precision.
#[inline]
pub(crate) fn sinh_flow(w: f64, d: f64, one_minus_d: f64, one_plus_d: f64) -> f64 {
    let em = (-w.abs()).exp_m1();
    let e = 1.0 + em;
    let den = one_minus_d + e * one_plus_d;
    (-2.0 * d * em / den).ln_1p().copysign(w)
}

/// Pointwise analytic substep at every node of `w`:
/// `m · 2 artanh(exp(−κ̄²Δt/α) tanh(w/2))` where `κ̄² > 0`, `m · w` elsewhere.
pub fn nonlinear_step(w: &ScalarField, kappa2: &ScalarField, dt: f64, alpha: f64, m: f64) -> Result<ScalarField> {
    w.check_same_grid(kappa2, "kappa2")?;
    let mut out = w.clone();
    for (v, &k2) in out.data_mut().iter_mut().zip(kappa2.data()) {
        if k2 > 0.0 {
            let x = k2 * dt / alpha;
            *v = sinh_flow(*v, (-x).exp(), -(-x).exp_m1(), 1.0 + (-x).exp());
        }
        *v *= m;
    }
    Ok(out)
}

/// Precomputed analytic substep for the interior nodes with `κ̄² > 0`.
#[derive(Debug, Clone)]
pub(crate) struct NonlinearOp {
    nodes: Vec<usize>,
    coef: Vec<[f64; 3]>,
}

impl NonlinearOp {
    /// `scale` multiplies κ̄² (4 for the exact AOS branch, 1 otherwise).
    pub(crate) fn new(region: &RegionMap, dt: f64, alpha: f64, scale: f64) -> Self {
        let grid = region.grid();
        let mut nodes = Vec::new();
        let mut coef = Vec::new();
        for (idx, &k2) in region.kappa2.data().iter().enumerate() {
            if k2 <= 0.0 || grid.is_boundary_index(idx) {
                continue;
            }
            let x = scale * k2 * dt / alpha;
            let omd = -(-x).exp_m1();
            if omd == 0.0 {
                continue;
            }
            let d = (-x).exp();
            nodes.push(idx);
            coef.push([d, omd, 1.0 + d]);
        }
        Self { nodes, coef }
    }

    pub(crate) fn apply(&self, buf: &mut [f64]) {
        for (&idx, &[d, omd, opd]) in self.nodes.iter().zip(&self.coef) {
            buf[idx] = sinh_flow(buf[idx], d, omd, opd);
        }
    }
}

/// Half-edge dielectric values gathered per node so stencils read them with
/// unit stride. Entries at boundary nodes are zero.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    grid: Grid3D,
    minus: [Vec<f64>; 3],
    plus: [Vec<f64>; 3],
}

impl Stencil {
    pub(crate) fn new(region: &RegionMap) -> Self {
        let grid = *region.grid();
        let gather = |axis: Axis, plus: bool| {
            let mut out = vec![0.0; grid.len()];
            for_interior(&grid, |i, j, k, idx| {
                let mut at = [i, j, k];
                if !plus {
                    at[axis.index()] -= 1;
                }
                out[idx] = region.eps_half(axis, at[0], at[1], at[2]);
            });
            out
        };
        Self {
            grid,
            minus: Axis::ALL.map(|a| gather(a, false)),
            plus: Axis::ALL.map(|a| gather(a, true)),
        }
    }

    /// `out += coef · h² δ²_axis input` at interior nodes.
    pub(crate) fn add(&self, out: &mut [f64], input: &[f64], axis: Axis, coef: f64) {
        let s = self.grid.stride(axis);
        let (em, ep) = (&self.minus[axis.index()], &self.plus[axis.index()]);
        let [nx, ny, nz] = self.grid.n;
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                let row = nx * (j + ny * k);
                for idx in row + 1..row + nx - 1 {
                    let c = input[idx];
                    out[idx] += coef * (ep[idx] * (input[idx + s] - c) + em[idx] * (input[idx - s] - c));
                }
            }
        }
    }

    /// `h² Σ_axes δ²_axis input` at one interior node.
    #[inline]
    pub(crate) fn laplacian_at(&self, input: &[f64], idx: usize) -> f64 {
        let c = input[idx];
        let mut sum = 0.0;
        for axis in Axis::ALL {
            let s = self.grid.stride(axis);
            let d = axis.index();
            sum += self.plus[d][idx] * (input[idx + s] - c) + self.minus[d][idx] * (input[idx - s] - c);
        }
        sum
    }
}

/// Visit interior nodes in layout order.
pub(crate) fn for_interior(grid: &Grid3D, mut f: impl FnMut(usize, usize, usize, usize)) {
    let [nx, ny, nz] = grid.n;
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                f(i, j, k, i + nx * (j + ny * k));
            }
        }
    }
}

/// `buf += coef · src` at interior nodes. The source is zero on the
/// boundary, so looping over every node is equivalent and simpler.
#[inline]
pub(crate) fn add_scaled(buf: &mut [f64], src: &[f64], coef: f64) {
    for (b, &s) in buf.iter_mut().zip(src) {
        *b += coef * s;
    }
}

fn boundary_filled(rhs: &ScalarField, boundary: &BoundarySpec) -> Vec<f64> {
    let mut buf = rhs.data().to_vec();
    boundary.impose(&mut buf);
    buf
}

/// Solve `(1 − cΔt/α δ²_axis) out = rhs` line by line with the shared
/// Dirichlet values on the boundary nodes of `out`.
pub fn ie_sweep(
    axis: Axis,
    rhs: &ScalarField,
    c: f64,
    dt: f64,
    alpha: f64,
    region: &RegionMap,
    boundary: &BoundarySpec,
) -> Result<ScalarField> {
    rhs.check_same_grid(&region.eps_node, "region")?;
    rhs.check_same_grid(boundary.field(), "boundary")?;
    let solver = AxisSolver::new(region, axis, sweep_ratio(c, dt, alpha, rhs.grid().h));
    let mut buf = boundary_filled(rhs, boundary);
    solver.solve_in_place(&mut buf);
    ScalarField::from_vec(*rhs.grid(), buf)
}

/// Crank–Nicolson sweep: `(1 − ½cΔt/α δ²) out = (1 + ½cΔt/α δ²) input`.
/// The explicit half reads the Dirichlet values at boundary-adjacent nodes.
pub fn cn_sweep(
    axis: Axis,
    input: &ScalarField,
    c: f64,
    dt: f64,
    alpha: f64,
    region: &RegionMap,
    boundary: &BoundarySpec,
) -> Result<ScalarField> {
    input.check_same_grid(&region.eps_node, "region")?;
    input.check_same_grid(boundary.field(), "boundary")?;
    let r = sweep_ratio(0.5 * c, dt, alpha, input.grid().h);
    let src = boundary_filled(input, boundary);
    let mut buf = src.clone();
    Stencil::new(region).add(&mut buf, &src, axis, r);
    AxisSolver::new(region, axis, r).solve_in_place(&mut buf);
    ScalarField::from_vec(*input.grid(), buf)
}

/// `field + f·(Δt/α)·qsource` at every node.
pub fn source_step(field: &ScalarField, qsource: &ScalarField, dt: f64, alpha: f64, f: f64) -> Result<ScalarField> {
    field.combine(1.0, qsource, f * dt / alpha)
}
