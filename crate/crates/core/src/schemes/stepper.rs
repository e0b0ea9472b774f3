use crate::grid::{Axis, Grid3D};
use crate::problem::{BoundarySpec, NpbProblem};
use crate::tridiag::{sweep_ratio, AxisSolver};

use super::ops::{add_scaled, for_interior, NonlinearOp, Stencil};
use super::{AosNonlinear, MarchConfig, SchemeVariant};

/// One scheme with every operator factored for a fixed `(Δt, α)`, plus the
/// scratch buffers a step needs. Stepping allocates nothing.
#[derive(Debug, Clone)]
pub struct Stepper {
    variant: SchemeVariant,
    grid: Grid3D,
    boundary: BoundarySpec,
    /// `Δt/α · ρ`.
    rho_hat: Vec<f64>,
    /// `Δt/(αh²)`.
    r: f64,
    stencil: Stencil,
    solvers: Vec<AxisSolver>,
    nonlinear: NonlinearOp,
    aos_premultiplier: f64,
    kappa2: Vec<f64>,
    branch_order: [Axis; 3],
    scratch: Vec<f64>,
    branches: [Vec<f64>; 3],
}

impl Stepper {
    pub fn new(problem: &NpbProblem, config: &MarchConfig) -> Self {
        use SchemeVariant::*;
        let (dt, alpha) = (config.dt, config.alpha);
        let region = &problem.region;
        let grid = problem.grid;
        let r = sweep_ratio(1.0, dt, alpha, grid.h);
        let implicit_scale = match config.variant {
            LODIE1 | LODIE2 | ADI1 => 1.0,
            LODCN1 | LODCN2 | ADI2 => 0.5,
            AOSIE1 | AOSIE2 => 4.0,
            AOSCN1 | AOSCN2 => 2.0,
            MAOSIE => 3.0,
            MAOSCN => 1.5,
            ExplicitEuler => 0.0,
        };
        let solvers = if config.variant == ExplicitEuler {
            Vec::new()
        } else {
            Axis::ALL.iter().map(|&a| AxisSolver::new(region, a, implicit_scale * r)).collect()
        };
        let (nl_dt, nl_scale, aos_premultiplier) = match config.variant {
            ADI2 => (0.5 * dt, 1.0, 1.0),
            v if v.is_aos() => match config.aos_nonlinear {
                AosNonlinear::Exact => (dt, 4.0, 1.0),
                AosNonlinear::Literal => (dt, 1.0, 4.0),
            },
            _ => (dt, 1.0, 1.0),
        };
        let len = grid.len();
        Self {
            variant: config.variant,
            grid,
            boundary: problem.boundary.clone(),
            rho_hat: problem.rho.data().iter().map(|v| v * dt / alpha).collect(),
            r,
            stencil: Stencil::new(region),
            solvers,
            nonlinear: NonlinearOp::new(region, nl_dt, alpha, nl_scale),
            aos_premultiplier,
            kappa2: if config.variant == ExplicitEuler { region.kappa2.data().to_vec() } else { Vec::new() },
            branch_order: Axis::ALL,
            scratch: vec![0.0; len],
            branches: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
        }
    }

    /// Order in which the additive branches are evaluated. The combination
    /// order is fixed, so this never changes the result.
    pub fn with_branch_order(mut self, order: [Axis; 3]) -> Self {
        self.branch_order = order;
        self
    }

    pub fn variant(&self) -> SchemeVariant {
        self.variant
    }

    /// Advance `u` (node-major, boundary nodes holding the Dirichlet data)
    /// by one step in place.
    pub fn advance(&mut self, u: &mut [f64]) {
        use SchemeVariant::*;
        debug_assert_eq!(u.len(), self.grid.len());
        match self.variant {
            LODIE1 | LODCN1 => {
                self.nonlinear.apply(u);
                self.lod_sweeps(u);
                add_scaled(u, &self.rho_hat, 1.0);
            }
            LODIE2 | LODCN2 => {
                add_scaled(u, &self.rho_hat, 1.0);
                self.lod_sweeps(u);
                self.nonlinear.apply(u);
            }
            AOSIE1 | AOSCN1 => self.aos(u, [4.0, 0.0, 0.0]),
            AOSIE2 | AOSCN2 => self.aos(u, [4.0 / 3.0; 3]),
            MAOSIE | MAOSCN => self.maos(u),
            ADI1 | ADI2 => self.adi(u),
            ExplicitEuler => self.explicit_euler(u),
        }
    }

    fn implicit_ratio(&self) -> f64 {
        use SchemeVariant::*;
        match self.variant {
            LODIE1 | LODIE2 | ADI1 => self.r,
            LODCN1 | LODCN2 | ADI2 => 0.5 * self.r,
            AOSIE1 | AOSIE2 => 4.0 * self.r,
            AOSCN1 | AOSCN2 => 2.0 * self.r,
            MAOSIE => 3.0 * self.r,
            MAOSCN => 1.5 * self.r,
            ExplicitEuler => 0.0,
        }
    }

    fn lod_sweeps(&mut self, u: &mut [f64]) {
        let cn = self.variant.is_crank_nicolson();
        let r = self.implicit_ratio();
        for axis in Axis::ALL {
            if cn {
                self.scratch.copy_from_slice(u);
                self.stencil.add(&mut self.scratch, u, axis, r);
                self.solvers[axis.index()].solve_in_place(&mut self.scratch);
                u.copy_from_slice(&self.scratch);
            } else {
                self.solvers[axis.index()].solve_in_place(u);
            }
        }
    }

    /// Axis branch `(1−rδ²)⁻¹[(1+rδ²)start + f ρ̂]` (explicit half only for CN).
    fn branch(&mut self, axis: Axis, start: &[f64], source_factor: f64) {
        let cn = self.variant.is_crank_nicolson();
        let r = self.implicit_ratio();
        let buf = &mut self.branches[axis.index()];
        buf.copy_from_slice(start);
        if cn {
            self.stencil.add(buf, start, axis, r);
        }
        if source_factor != 0.0 {
            add_scaled(buf, &self.rho_hat, source_factor);
        }
        self.solvers[axis.index()].solve_in_place(buf);
    }

    fn aos(&mut self, u: &mut [f64], source: [f64; 3]) {
        for axis in self.branch_order {
            self.branch(axis, u, source[axis.index()]);
        }
        self.scratch.copy_from_slice(u);
        self.nonlinear.apply(&mut self.scratch);
        let m = self.aos_premultiplier;
        let [v, p, q] = &self.branches;
        for idx in 0..u.len() {
            u[idx] = 0.25 * (m * self.scratch[idx] + v[idx] + p[idx] + q[idx]);
        }
        self.boundary.impose(u);
    }

    fn maos(&mut self, u: &mut [f64]) {
        self.nonlinear.apply(u);
        for axis in self.branch_order {
            self.branch(axis, u, 1.0);
        }
        let [v, p, q] = &self.branches;
        for idx in 0..u.len() {
            u[idx] = (v[idx] + p[idx] + q[idx]) / 3.0;
        }
        self.boundary.impose(u);
    }

    fn adi(&mut self, u: &mut [f64]) {
        let second_order = self.variant == SchemeVariant::ADI2;
        let (rx, ry) = if second_order { (0.5 * self.r, 0.5 * self.r) } else { (0.0, self.r) };
        self.nonlinear.apply(u);
        let w: &[f64] = u;
        let a = &mut self.scratch;
        a.copy_from_slice(w);
        if second_order {
            self.stencil.add(a, w, Axis::X, rx);
        }
        self.stencil.add(a, w, Axis::Y, self.r);
        self.stencil.add(a, w, Axis::Z, self.r);
        add_scaled(a, &self.rho_hat, 1.0);
        self.solvers[0].solve_in_place(a);
        self.stencil.add(a, w, Axis::Y, -ry);
        self.solvers[1].solve_in_place(a);
        self.stencil.add(a, w, Axis::Z, -ry);
        self.solvers[2].solve_in_place(a);
        u.copy_from_slice(a);
        if second_order {
            self.nonlinear.apply(u);
        }
    }

    fn explicit_euler(&mut self, u: &mut [f64]) {
        let a = &mut self.scratch;
        a.copy_from_slice(u);
        let dt_alpha = self.r * self.grid.h * self.grid.h;
        let (r, stencil, kappa2, rho_hat) = (self.r, &self.stencil, &self.kappa2, &self.rho_hat);
        for_interior(&self.grid, |_, _, _, idx| {
            let v = u[idx];
            let reaction = if kappa2[idx] > 0.0 { dt_alpha * kappa2[idx] * v.sinh() } else { 0.0 };
            a[idx] = v + r * stencil.laplacian_at(u, idx) - reaction + rho_hat[idx];
        });
        u.copy_from_slice(a);
    }
}
