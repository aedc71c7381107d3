//! Transfer between the sheet and the grid.
//!
//! Two discretizations of the same surface integral deliberately coexist:
//! the node-mass form (triangle fragments splatted onto nodes by trilinear
//! weights) keeps the field system SPD and diagonal in the coupling, while
//! the fragment-centroid quadrature gives exact vertex gradients for the
//! descent. Their mutual convergence as h -> 0 is an assertable property.

use thiserror::Error;

use crate::field::{self, PhaseField};
use crate::params::SolverParams;
use crate::sheet::{self, HomotopySheet};
use crate::tri;
use crate::vec3::{self, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum CouplingError {
    #[error("sheet extends outside the grid box")]
    SheetOutsideGrid,
}

/// Per-node nonnegative masses (units of area) carrying the surface measure
/// of a sheet on the grid.
#[derive(Debug, Clone)]
pub struct SurfaceMeasure {
    pub node_mass: Vec<f64>,
    pub total: f64,
}

impl SurfaceMeasure {
    pub fn zero(nodes: usize) -> Self {
        SurfaceMeasure { node_mass: vec![0.0; nodes], total: 0.0 }
    }

    pub fn from_node_mass(node_mass: Vec<f64>) -> Self {
        let total = vec3::neumaier_sum(node_mass.iter().copied());
        SurfaceMeasure { node_mass, total }
    }
}

fn check_inside(grid: &field::Grid, tris: &[[Vec3; 3]]) -> Result<(), CouplingError> {
    for t in tris {
        for v in t {
            if !grid.contains(*v) {
                return Err(CouplingError::SheetOutsideGrid);
            }
        }
    }
    Ok(())
}

/// Deposits each triangle, subdivided until the fragment diameter is below
/// h/2, onto the 8 surrounding nodes by trilinear weights. Total mass equals
/// the triangulated area up to rounding (the weights form a partition of
/// unity per fragment).
pub fn splat_triangles(
    tris: &[[Vec3; 3]],
    grid: &field::Grid,
) -> Result<SurfaceMeasure, CouplingError> {
    check_inside(grid, tris)?;
    let mut w = vec![0.0; grid.node_count()];
    let np = grid.nodes_per_axis();
    let target = grid.h / 2.0;
    let sy = np[0];
    let sz = np[0] * np[1];
    for t in tris {
        let depth = tri::subdivision_depth(tri::diameter(*t), target);
        tri::for_each_fragment(*t, depth, |c, _, fa| {
            let mut cell = [0usize; 3];
            let mut f = [0.0; 3];
            for d in 0..3 {
                let tc = (c[d] - grid.origin[d]) / grid.h;
                let i = (tc.floor() as isize).clamp(0, grid.dims[d] as isize - 1) as usize;
                cell[d] = i;
                f[d] = (tc - i as f64).clamp(0.0, 1.0);
            }
            let base = cell[0] + sy * cell[1] + sz * cell[2];
            for dz in 0..2 {
                let wz = if dz == 1 { f[2] } else { 1.0 - f[2] };
                for dy in 0..2 {
                    let wy = if dy == 1 { f[1] } else { 1.0 - f[1] };
                    for dx in 0..2 {
                        let wx = if dx == 1 { f[0] } else { 1.0 - f[0] };
                        w[base + dx + sy * dy + sz * dz] += fa * wx * wy * wz;
                    }
                }
            }
        });
    }
    Ok(SurfaceMeasure::from_node_mass(w))
}

pub fn splat_measure(
    sheet: &HomotopySheet,
    grid: &field::Grid,
) -> Result<SurfaceMeasure, CouplingError> {
    splat_triangles(&sheet::triangle_soup(sheet), grid)
}

/// Fragment-centroid quadrature of (u^2 + delta) over the triangles.
pub fn surface_energy_triangles(
    tris: &[[Vec3; 3]],
    u: &PhaseField,
    delta: f64,
) -> Result<f64, CouplingError> {
    check_inside(&u.grid, tris)?;
    let target = u.grid.h / 2.0;
    let per_tri: Vec<f64> = tris
        .iter()
        .map(|t| {
            let depth = tri::subdivision_depth(tri::diameter(*t), target);
            let mut acc = 0.0;
            tri::for_each_fragment(*t, depth, |c, _, fa| {
                let v = field::sample_field(u, c).expect("fragment centroid inside grid");
                acc += fa * (v * v + delta);
            });
            acc
        })
        .collect();
    Ok(vec3::neumaier_sum(per_tri))
}

/// Integral of (u^2 + delta) over the sheet by fragment-centroid quadrature.
pub fn surface_energy(
    sheet: &HomotopySheet,
    u: &PhaseField,
    delta: f64,
) -> Result<f64, CouplingError> {
    surface_energy_triangles(&sheet::triangle_soup(sheet), u, delta)
}

/// Components of the decoupled energy. `surface` uses the node-mass form of
/// the coupling (the same quadratic the field solve minimizes) plus the
/// (delta/c) * area term, so the alternating trace is a true Lyapunov
/// sequence for the recorded total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub dirichlet: f64,
    pub potential: f64,
    pub surface: f64,
    pub total: f64,
}

impl EnergyReport {
    pub fn zero() -> Self {
        EnergyReport { dirichlet: 0.0, potential: 0.0, surface: 0.0, total: 0.0 }
    }
}

pub fn total_energy_with_measure(
    u: &PhaseField,
    area: f64,
    measure: &SurfaceMeasure,
    params: &SolverParams,
) -> EnergyReport {
    let (dirichlet, potential, coupling) =
        field::energy_components(u, params.epsilon, &measure.node_mass);
    let surface = (coupling + params.delta_eps * area) / params.c_eps;
    EnergyReport {
        dirichlet,
        potential,
        surface,
        total: dirichlet + potential + surface,
    }
}

pub fn total_energy(
    u: &PhaseField,
    sheet: &HomotopySheet,
    params: &SolverParams,
) -> Result<EnergyReport, CouplingError> {
    let measure = splat_measure(sheet, &u.grid)?;
    Ok(total_energy_with_measure(
        u,
        sheet::sheet_area(sheet),
        &measure,
        params,
    ))
}
