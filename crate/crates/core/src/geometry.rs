//! Molecular systems, the solute/solvent surface, and the dielectric and
//! ionic coefficient maps the solvers consume.

use std::path::Path;

use crate::error::{NpbError, Result};
use crate::grid::{Axis, Grid3D, ScalarField};

/// A point charge with a van der Waals radius. Lengths in Å, charge in e_c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub center: [f64; 3],
    pub charge: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MolecularSystem {
    pub label: String,
    pub atoms: Vec<Atom>,
}

impl MolecularSystem {
    pub fn total_charge(&self) -> f64 {
        self.atoms.iter().map(|a| a.charge).sum()
    }

    /// Axis-aligned bounding box of the atom centres.
    pub fn bounding_box(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = self.atoms.first()?;
        let (mut lo, mut hi) = (first.center, first.center);
        for a in &self.atoms {
            for d in 0..3 {
                lo[d] = lo[d].min(a.center[d]);
                hi[d] = hi[d].max(a.center[d]);
            }
        }
        Some((lo, hi))
    }

    /// Copy with all charges multiplied by `factor`.
    pub fn with_scaled_charges(&self, factor: f64) -> Self {
        let atoms = self.atoms.iter().map(|a| Atom { charge: a.charge * factor, ..*a }).collect();
        Self { label: self.label.clone(), atoms }
    }

    pub fn from_pqr_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut sys = parse_pqr(&text)?;
        sys.label = label_from_path(path.as_ref());
        Ok(sys)
    }

    pub fn from_atom_config_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut sys = parse_atom_config(&text)?;
        sys.label = label_from_path(path.as_ref());
        Ok(sys)
    }
}

fn label_from_path(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "system".into())
}

/// Solute (on or inside the surface) or solvent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Solute,
    Solvent,
}

/// Solute/solvent dividing surface.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    /// Sphere of radius `R` centred at the origin.
    AnalyticSphere(f64),
    /// Union of atom spheres, each inflated by `probe_inflation` Å.
    UnionOfSpheres { atoms: Vec<Atom>, probe_inflation: f64 },
}

impl Surface {
    pub fn union_of(system: &MolecularSystem, probe_inflation: f64) -> Self {
        Surface::UnionOfSpheres { atoms: system.atoms.clone(), probe_inflation }
    }
}

/// Classify a point. Points exactly on the surface are solute.
pub fn classify(point: [f64; 3], surface: &Surface) -> Region {
    let inside = match surface {
        Surface::AnalyticSphere(r) => norm(point) <= *r,
        Surface::UnionOfSpheres { atoms, probe_inflation } => atoms.iter().any(|a| {
            let reach = a.radius + probe_inflation;
            dist2(point, a.center) <= reach * reach
        }),
    };
    if inside {
        Region::Solute
    } else {
        Region::Solvent
    }
}

#[inline]
pub(crate) fn norm(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[inline]
pub(crate) fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Dielectric values at nodes and half-edge midpoints, plus the ionic
/// coefficient κ̄² at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub eps_node: ScalarField,
    pub eps_half: [Vec<f64>; 3],
    pub kappa2: ScalarField,
}

impl RegionMap {
    pub fn grid(&self) -> &Grid3D {
        self.eps_node.grid()
    }

    /// Dielectric on the half-edge between `(i,j,k)` and its `+axis`
    /// neighbour.
    #[inline]
    pub fn eps_half(&self, axis: Axis, i: usize, j: usize, k: usize) -> f64 {
        self.eps_half[axis.index()][self.grid().half_index(axis, i, j, k)]
    }

    /// Uniform dielectric `eps` and ionic coefficient `kappa2` everywhere.
    pub fn uniform(grid: Grid3D, eps: f64, kappa2: f64) -> Self {
        Self {
            eps_node: ScalarField::from_fn(grid, |_| eps),
            eps_half: Axis::ALL.map(|a| vec![eps; grid.half_len(a)]),
            kappa2: ScalarField::from_fn(grid, |_| kappa2),
        }
    }
}

/// Assign dielectric and κ̄² values by classifying every node and every
/// half-edge midpoint.
pub fn build_region_maps(
    grid: &Grid3D,
    surface: &Surface,
    eps_m: f64,
    eps_s: f64,
    kappa2_solvent: f64,
) -> Result<RegionMap> {
    if !(eps_m > 0.0 && eps_s > 0.0) {
        return Err(NpbError::InvalidParameter("dielectric constants must be positive".into()));
    }
    if !(kappa2_solvent >= 0.0) {
        return Err(NpbError::InvalidParameter("kappa^2 must be non-negative".into()));
    }
    let eps_of = |p: [f64; 3]| match classify(p, surface) {
        Region::Solute => eps_m,
        Region::Solvent => eps_s,
    };
    let eps_node = ScalarField::from_fn(*grid, eps_of);
    let kappa2 = ScalarField::from_fn(*grid, |p| match classify(p, surface) {
        Region::Solute => 0.0,
        Region::Solvent => kappa2_solvent,
    });
    let half = |axis: Axis| {
        let d = axis.index();
        let mut n = grid.n;
        n[d] -= 1;
        let mut out = Vec::with_capacity(n[0] * n[1] * n[2]);
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let mut p = grid.point(i, j, k);
                    p[d] += 0.5 * grid.h;
                    out.push(eps_of(p));
                }
            }
        }
        out
    };
    Ok(RegionMap { eps_node, eps_half: Axis::ALL.map(half), kappa2 })
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| NpbError::Parse { line, message: format!("expected a number, found `{tok}`") })
}

fn check_radius(r: f64, line: usize) -> Result<()> {
    if r > 0.0 {
        Ok(())
    } else {
        Err(NpbError::Parse { line, message: format!("radius must be positive, found {r}") })
    }
}

/// Read whitespace-delimited PQR `ATOM`/`HETATM` records. The last five
/// fields of each record are `x y z charge radius`; every other line is
/// ignored.
pub fn parse_pqr(text: &str) -> Result<MolecularSystem> {
    let mut atoms = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.first() {
            Some(&"ATOM") | Some(&"HETATM") => {}
            _ => continue,
        }
        if fields.len() < 6 {
            return Err(NpbError::Parse {
                line: line_no,
                message: "atom record has fewer than five numeric fields".into(),
            });
        }
        let tail = &fields[fields.len() - 5..];
        let v: Vec<f64> = tail.iter().map(|t| parse_number(t, line_no)).collect::<Result<_>>()?;
        check_radius(v[4], line_no)?;
        atoms.push(Atom { center: [v[0], v[1], v[2]], charge: v[3], radius: v[4] });
    }
    if atoms.is_empty() {
        return Err(NpbError::NoAtoms);
    }
    Ok(MolecularSystem { label: "pqr".into(), atoms })
}

/// Read the synthetic system format: one `atom x y z q r` per line, `#`
/// comments and blank lines allowed.
pub fn parse_atom_config(text: &str) -> Result<MolecularSystem> {
    let mut atoms = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "atom" || fields.len() != 6 {
            return Err(NpbError::Parse {
                line: line_no,
                message: "expected `atom x y z q r`".into(),
            });
        }
        let v: Vec<f64> = fields[1..].iter().map(|t| parse_number(t, line_no)).collect::<Result<_>>()?;
        check_radius(v[4], line_no)?;
        atoms.push(Atom { center: [v[0], v[1], v[2]], charge: v[3], radius: v[4] });
    }
    if atoms.is_empty() {
        return Err(NpbError::NoAtoms);
    }
    Ok(MolecularSystem { label: "synthetic".into(), atoms })
}
