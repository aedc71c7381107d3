//! Sheet descent under the Lipschitz cap and convex-region constraint, and
//! the alternating minimization over (field, sheet).
//!
//! Each outer iteration solves the field exactly (unique minimizer of the
//! strictly convex quadratic for the current sheet) and then runs a fixed
//! number of projected-gradient sweeps on the sheet. A sweep is accepted
//! only if it decreases the fragment-quadrature surface energy (Armijo) and
//! does not increase the node-mass surface energy the recorded trace uses,
//! so the recorded totals are nonincreasing up to solver tolerance.

use thiserror::Error;

use crate::ahlfors::{ahlfors_ratio_strided, RadiiSpec};
use crate::coupling::{self, CouplingError, EnergyReport};
use crate::field::{self, FieldError, Grid, PhaseField};
use crate::geometry::{BoundaryCurve, ConvexRegion, Domain};
use crate::params::SolverParams;
use crate::sheet::{self, HomotopySheet, InitMode, SheetError};
use crate::tri;
use crate::vec3::{self, Vec3};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("sheet Lipschitz estimate {lip} exceeds the cap {cap} at entry")]
    LambdaViolation { lip: f64, cap: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Sheet(#[from] SheetError),
}

/// Relative slack allowed on the Lipschitz cap for accepted iterates.
pub const LIP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    /// No admissible decreasing step was found; the input sheet is returned.
    StepFailure,
}

/// Exact gradient of the fragment-quadrature surface energy with respect to
/// the vertex positions. Boundary rows are pinned: their entries are zero.
pub fn sheet_gradient(
    sheet: &HomotopySheet,
    u: &PhaseField,
    delta: f64,
) -> Result<Vec<Vec3>, CouplingError> {
    let tris = sheet::triangulate(sheet);
    let nv = sheet.vertices().len();
    let mut grad = vec![[0.0; 3]; nv];
    let target = u.grid.h / 2.0;
    for (ti, idx) in tris.triangles.iter().enumerate() {
        let p = tris.vertex_positions(sheet, ti);
        for v in &p {
            if !u.grid.contains(*v) {
                return Err(CouplingError::SheetOutsideGrid);
            }
        }
        let (area, darea) = tri::area_gradient(p);
        if area == 0.0 {
            continue;
        }
        let depth = tri::subdivision_depth(tri::diameter(p), target);
        let frag_count = (1u64 << (2 * depth)) as f64;
        // Sum over fragments of the weight and of the chain-rule term.
        let mut weight_sum = 0.0;
        let mut chain = [[0.0; 3]; 3];
        tri::for_each_fragment(p, depth, |c, lam, fa| {
            let (val, g) = field::sample_field_gradient(u, c).expect("centroid inside grid");
            weight_sum += val * val + delta;
            let coeff = vec3::scale(g, 2.0 * val * fa);
            for k in 0..3 {
                chain[k] = vec3::add(chain[k], vec3::scale(coeff, lam[k]));
            }
        });
        let mean_weight = weight_sum / frag_count;
        for k in 0..3 {
            let gi = idx[k] as usize;
            let term = vec3::add(vec3::scale(darea[k], mean_weight), chain[k]);
            grad[gi] = vec3::add(grad[gi], term);
        }
    }
    // Boundary rows are fixed by the homotopy class.
    let k = sheet.k();
    for j in 0..k {
        grad[j] = [0.0; 3];
        grad[sheet.m() * k + j] = [0.0; 3];
    }
    Ok(grad)
}

fn node_surface_value(
    tris: &[[Vec3; 3]],
    grid: &Grid,
    u: &PhaseField,
    delta: f64,
) -> Result<f64, CouplingError> {
    let m = coupling::splat_triangles(tris, grid)?;
    let coupled: f64 = m
        .node_mass
        .iter()
        .zip(&u.values)
        .map(|(w, v)| w * v * v)
        .sum();
    Ok(coupled + delta * sheet::soup_area(tris))
}

/// One projected-gradient sweep with Armijo backtracking. The step length
/// is the maximum vertex displacement, starting at 0.1 h. After each trial
/// step every vertex is re-projected into the region; steps violating the
/// Lipschitz cap are halved (up to 30 times). Accepted steps decrease the
/// fragment surface energy and do not increase its node-mass counterpart.
pub fn descend_sheet(
    sheet: &HomotopySheet,
    u: &PhaseField,
    params: &SolverParams,
    region: &ConvexRegion,
) -> Result<(HomotopySheet, StepOutcome), OptimError> {
    let cap = params.lambda_cap * (1.0 + LIP_SLACK);
    let lip0 = sheet::lipschitz_estimate(sheet);
    if lip0 > cap {
        return Err(OptimError::LambdaViolation { lip: lip0, cap: params.lambda_cap });
    }
    let grad = sheet_gradient(sheet, u, params.delta_eps)?;
    let gmax = grad.iter().map(|g| vec3::norm(*g)).fold(0.0, f64::max);
    if gmax <= 1e-300 {
        return Ok((sheet.clone(), StepOutcome::StepFailure));
    }
    // Direction scaled so a step t moves the farthest vertex by t.
    let slope: f64 = grad.iter().map(|g| vec3::norm2(*g)).sum::<f64>() / gmax;

    let soup0 = sheet::triangle_soup(sheet);
    let e0 = coupling::surface_energy_triangles(&soup0, u, params.delta_eps)?;
    let n0 = node_surface_value(&soup0, &u.grid, u, params.delta_eps)?;

    let k = sheet.k();
    let m = sheet.m();
    let mut t = 0.1 * params.h;
    for _ in 0..30 {
        let mut verts = sheet.vertices().to_vec();
        for i in 1..m {
            for j in 0..k {
                let vi = i * k + j;
                let moved = vec3::sub(verts[vi], vec3::scale(grad[vi], t / gmax));
                verts[vi] = region.project(moved);
            }
        }
        let candidate = sheet.with_vertices(verts)?;
        if sheet::lipschitz_estimate(&candidate) > cap {
            t *= params.armijo_shrink;
            continue;
        }
        let soup = sheet::triangle_soup(&candidate);
        let e = coupling::surface_energy_triangles(&soup, u, params.delta_eps)?;
        if e > e0 - params.armijo_slope * t * slope {
            t *= params.armijo_shrink;
            continue;
        }
        let n = node_surface_value(&soup, &u.grid, u, params.delta_eps)?;
        if n > n0 {
            t *= params.armijo_shrink;
            continue;
        }
        return Ok((candidate, StepOutcome::Accepted));
    }
    Ok((sheet.clone(), StepOutcome::StepFailure))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Total energy reached zero exactly (global minimum).
    Converged,
    /// Relative energy decrease below 1e-10 for three outer iterations.
    Stalled,
    MaxOuter,
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iter: usize,
    pub report: EnergyReport,
    pub area: f64,
    pub lipschitz: f64,
    pub ahlfors_sup: f64,
}

#[derive(Debug)]
pub struct RunResult {
    pub field: PhaseField,
    pub sheet: HomotopySheet,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
}

const STALL_REL: f64 = 1e-10;
const STALL_STRIKES: usize = 3;
/// Vertex stride of the per-iteration Ahlfors monitor.
const MONITOR_STRIDE: usize = 8;

fn monitor_ahlfors(sheet: &HomotopySheet) -> f64 {
    let diam = sheet.diameter();
    if diam <= 0.0 {
        return 0.0;
    }
    let spec = RadiiSpec { r_max: diam / 2.0, levels: 4 };
    match ahlfors_ratio_strided(sheet, &spec, MONITOR_STRIDE) {
        Ok(rep) => rep.sup_ratio,
        Err(_) => f64::NAN,
    }
}

/// Alternating minimization: exact field solve for the current sheet, then
/// `inner_sweeps` descent sweeps on the sheet for the frozen field. The
/// trace records one row per outer iteration at the (field, sheet) pair the
/// solve produced; totals are nonincreasing within solver tolerance.
pub fn alternate_minimize(
    domain: &Domain,
    gamma0: &BoundaryCurve,
    gamma1: &BoundaryCurve,
    params: &SolverParams,
) -> Result<RunResult, OptimError> {
    let grid = field::make_grid(domain, params.h)?;
    let mut sheet = init_sheet_checked(domain, gamma0, gamma1, params)?;
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut stall = 0usize;
    let mut termination = Termination::MaxOuter;

    for iter in 0..params.max_outer.max(1) {
        let measure = coupling::splat_measure(&sheet, &grid)?;
        let u = field::solve_phase_field(&grid, &measure, params, params.cg_tol)?;
        let area = sheet::sheet_area(&sheet);
        let report = coupling::total_energy_with_measure(&u, area, &measure, params);
        trace.push(TraceRow {
            iter,
            report,
            area,
            lipschitz: sheet::lipschitz_estimate(&sheet),
            ahlfors_sup: monitor_ahlfors(&sheet),
        });

        if report.total <= 0.0 {
            termination = Termination::Converged;
            return Ok(RunResult { field: u, sheet, trace, termination });
        }
        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2].report.total;
            if prev - report.total <= STALL_REL * prev.abs().max(f64::MIN_POSITIVE) {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= STALL_STRIKES {
                termination = Termination::Stalled;
                return Ok(RunResult { field: u, sheet, trace, termination });
            }
        }
        if iter + 1 == params.max_outer.max(1) {
            return Ok(RunResult { field: u, sheet, trace, termination });
        }

        for _ in 0..params.inner_sweeps {
            let (next, outcome) = descend_sheet(&sheet, &u, params, &domain.inner)?;
            sheet = next;
            if outcome == StepOutcome::StepFailure {
                break;
            }
        }
    }
    unreachable!("loop returns from its last iteration");
}

fn init_sheet_checked(
    domain: &Domain,
    gamma0: &BoundaryCurve,
    gamma1: &BoundaryCurve,
    params: &SolverParams,
) -> Result<HomotopySheet, OptimError> {
    let m = default_rows(gamma0.samples.len());
    let sheet = sheet::init_sheet(
        &gamma0.samples,
        &gamma1.samples,
        m,
        InitMode::Linear,
        params.lambda_cap,
        Some(&domain.inner),
    )?;
    let lip = sheet::lipschitz_estimate(&sheet);
    if lip > params.lambda_cap * (1.0 + LIP_SLACK) {
        return Err(OptimError::LambdaViolation { lip, cap: params.lambda_cap });
    }
    Ok(sheet)
}

fn default_rows(k: usize) -> usize {
    (k / 4).max(2)
}

/// As `alternate_minimize` but with an explicit sheet row count.
pub fn alternate_minimize_with_rows(
    domain: &Domain,
    gamma0: &BoundaryCurve,
    gamma1: &BoundaryCurve,
    params: &SolverParams,
    rows: usize,
) -> Result<RunResult, OptimError> {
    let grid = field::make_grid(domain, params.h)?;
    let sheet = sheet::init_sheet(
        &gamma0.samples,
        &gamma1.samples,
        rows,
        InitMode::Linear,
        params.lambda_cap,
        Some(&domain.inner),
    )?;
    let lip = sheet::lipschitz_estimate(&sheet);
    if lip > params.lambda_cap * (1.0 + LIP_SLACK) {
        return Err(OptimError::LambdaViolation { lip, cap: params.lambda_cap });
    }
    run_loop(domain, grid, sheet, params)
}

fn run_loop(
    domain: &Domain,
    grid: Grid,
    mut sheet: HomotopySheet,
    params: &SolverParams,
) -> Result<RunResult, OptimError> {
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut stall = 0usize;
    for iter in 0..params.max_outer.max(1) {
        let measure = coupling::splat_measure(&sheet, &grid)?;
        let u = field::solve_phase_field(&grid, &measure, params, params.cg_tol)?;
        let area = sheet::sheet_area(&sheet);
        let report = coupling::total_energy_with_measure(&u, area, &measure, params);
        trace.push(TraceRow {
            iter,
            report,
            area,
            lipschitz: sheet::lipschitz_estimate(&sheet),
            ahlfors_sup: monitor_ahlfors(&sheet),
        });
        if report.total <= 0.0 {
            return Ok(RunResult { field: u, sheet, trace, termination: Termination::Converged });
        }
        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2].report.total;
            if prev - report.total <= STALL_REL * prev.abs().max(f64::MIN_POSITIVE) {
                stall += 1;
            } else {
                stall = 0;
            }
            if stall >= STALL_STRIKES {
                return Ok(RunResult { field: u, sheet, trace, termination: Termination::Stalled });
            }
        }
        if iter + 1 == params.max_outer.max(1) {
            return Ok(RunResult { field: u, sheet, trace, termination: Termination::MaxOuter });
        }
        for _ in 0..params.inner_sweeps {
            let (next, outcome) = descend_sheet(&sheet, &u, params, &domain.inner)?;
            sheet = next;
            if outcome == StepOutcome::StepFailure {
                break;
            }
        }
    }
    unreachable!("loop returns from its last iteration");
}
