//! Single-grid pseudo-time iterations: forward Euler with a global time
//! step and the four-direction fast sweeping (Gauss–Seidel) iteration with
//! local time steps.
//!
//! Both update `f ← f + Δt (R(f) - r)` and then move every updated cell
//! back to its Grad basis. `r` is an optional per-cell source, used by the
//! multigrid coarse problems; each entry carries its own basis and is
//! projected into the current cell basis when applied.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::{grad_normalize_in_place, max_hermite_root, MomentRep, MomentSpace};
use crate::spatial::{cell_residual, residual, CellField, Discretization};

/// Time-step policy: `Δt_ij = cfl / [(|u_1| + C√θ)/Δx + (|u_2| + C√θ)/Δy]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CflPolicy {
    pub cfl_number: f64,
    pub c_bound: f64,
}

impl CflPolicy {
    /// Policy for expansion order `order`, with `C = C_{order+1}`.
    pub fn new(cfl_number: f64, order: usize) -> Result<Self> {
        if !(cfl_number > 0.0 && cfl_number < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CFL number must lie in (0, 1), got {cfl_number}"
            )));
        }
        Ok(CflPolicy {
            cfl_number,
            c_bound: max_hermite_root(order + 1),
        })
    }
}

/// One traversal of the grid: outer loop over `i`, inner over `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepDirection {
    /// `i` ascending, `j` ascending.
    D1,
    /// `i` descending, `j` ascending.
    D2,
    /// `i` descending, `j` descending.
    D3,
    /// `i` ascending, `j` descending.
    D4,
}

impl SweepDirection {
    fn i_ascending(self) -> bool {
        matches!(self, SweepDirection::D1 | SweepDirection::D4)
    }

    fn j_ascending(self) -> bool {
        matches!(self, SweepDirection::D1 | SweepDirection::D2)
    }
}

/// The sequence of sweeps making up one fast sweeping iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepOrder(pub Vec<SweepDirection>);

impl Default for SweepOrder {
    fn default() -> Self {
        use SweepDirection::*;
        SweepOrder(vec![D1, D2, D3, D4])
    }
}

/// How fast sweeping is scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepSchedule {
    /// The sequential Gauss–Seidel sweep.
    Serial,
    /// The outer index range is split into this many contiguous blocks that
    /// are swept concurrently; cells outside a block are read as they were
    /// at the start of the sweep.
    Blocked(usize),
}

/// Work counters shared by the single-level and multigrid drivers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkCounters {
    /// Local residual evaluations in fast sweeping (one per cell update).
    pub cell_updates: u64,
    /// Full-grid residual evaluations, counted in cells.
    pub residual_cells: u64,
}

/// Local step for a cell with velocity `u`, temperature `theta`.
pub fn local_dt(u: [f64; 3], theta: f64, dx: f64, dy: f64, policy: &CflPolicy) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::NonphysicalState {
            cell: None,
            rho: f64::NAN,
            theta,
        });
    }
    let a = policy.c_bound * theta.sqrt();
    Ok(policy.cfl_number / ((u[0].abs() + a) / dx + (u[1].abs() + a) / dy))
}

fn cell_dt(field: &CellField, i: usize, j: usize, policy: &CflPolicy) -> Result<f64> {
    let c = field.get(i, j);
    local_dt(c.params.mean, c.params.spread, field.grid.dx[i], field.grid.dy[j], policy)
        .map_err(|e| e.at_cell(i, j))
}

/// `min_ij Δt_ij`.
pub fn global_dt(field: &CellField, policy: &CflPolicy) -> Result<f64> {
    let mut dt = f64::INFINITY;
    for i in 0..field.grid.nx {
        for j in 0..field.grid.ny {
            dt = dt.min(cell_dt(field, i, j, policy)?);
        }
    }
    Ok(dt)
}

/// `cell + dt (res - r)`, Grad-normalized; `None` if the result is not a
/// physical state.
fn advance_cell(
    space: &MomentSpace,
    cell: &MomentRep,
    res: &[f64],
    rhs: Option<&MomentRep>,
    dt: f64,
    buf: &mut Vec<f64>,
) -> std::result::Result<MomentRep, Error> {
    let mut next = cell.clone();
    match rhs {
        Some(r) => {
            buf.clear();
            buf.extend_from_slice(&r.coeffs);
            space.project_in_place(buf, &r.params, &cell.params);
            for k in 0..next.coeffs.len() {
                next.coeffs[k] += dt * (res[k] - buf[k]);
            }
        }
        None => {
            for k in 0..next.coeffs.len() {
                next.coeffs[k] += dt * res[k];
            }
        }
    }
    if next.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonphysicalState {
            cell: None,
            rho: next.coeffs[0],
            theta: f64::NAN,
        });
    }
    grad_normalize_in_place(space, &mut next)?;
    Ok(next)
}

/// One forward Euler step with the global time step. On a nonphysical
/// update the whole step is retried once with half the step. Returns the
/// step taken.
pub fn euler_step(
    field: &mut CellField,
    disc: &Discretization,
    rhs: Option<&[MomentRep]>,
    policy: &CflPolicy,
    counters: &mut WorkCounters,
) -> Result<f64> {
    let res = residual(field, disc)?;
    counters.residual_cells += field.grid.n_cells() as u64;
    euler_step_with_residual(field, &res, rhs, policy)
}

/// [`euler_step`] with `res = R(field)` already evaluated.
pub fn euler_step_with_residual(
    field: &mut CellField,
    res: &[Vec<f64>],
    rhs: Option<&[MomentRep]>,
    policy: &CflPolicy,
) -> Result<f64> {
    let dt = global_dt(field, policy)?;
    let space = MomentSpace::shared(field.order());
    let ny = field.grid.ny;
    let attempt = |dt: f64, field: &CellField| -> Result<Vec<MomentRep>> {
        field
            .cells
            .par_iter()
            .enumerate()
            .map_init(Vec::new, |buf, (k, cell)| {
                advance_cell(&space, cell, &res[k], rhs.map(|r| &r[k]), dt, buf)
                    .map_err(|e| e.at_cell(k / ny, k % ny))
            })
            .collect()
    };
    match attempt(dt, field) {
        Ok(cells) => {
            field.cells = cells;
            Ok(dt)
        }
        Err(_) => {
            let cells = attempt(0.5 * dt, field)?;
            field.cells = cells;
            Ok(0.5 * dt)
        }
    }
}

fn update_cell(
    field: &mut CellField,
    disc: &Discretization,
    rhs: Option<&[MomentRep]>,
    policy: &CflPolicy,
    space: &MomentSpace,
    i: usize,
    j: usize,
    res: &mut [f64],
    buf: &mut Vec<f64>,
) -> Result<()> {
    let dt = cell_dt(field, i, j, policy)?;
    cell_residual(field, disc, i, j, res)?;
    let k = field.grid.index(i, j);
    let r = rhs.map(|r| &r[k]);
    let next = match advance_cell(space, &field.cells[k], res, r, dt, buf) {
        Ok(next) => next,
        Err(_) => advance_cell(space, &field.cells[k], res, r, 0.5 * dt, buf).map_err(|e| e.at_cell(i, j))?,
    };
    field.cells[k] = next;
    Ok(())
}

fn sweep_range(field: &mut CellField, ctx: &SweepContext, dir: SweepDirection, i_range: std::ops::Range<usize>) -> Result<u64> {
    let space = MomentSpace::shared(field.order());
    let ny = field.grid.ny;
    let mut res = vec![0.0; space.len()];
    let mut buf = Vec::with_capacity(space.len());
    let is: Vec<usize> = if dir.i_ascending() {
        i_range.collect()
    } else {
        i_range.rev().collect()
    };
    let mut count = 0;
    for &i in &is {
        for jj in 0..ny {
            let j = if dir.j_ascending() { jj } else { ny - 1 - jj };
            update_cell(field, ctx.disc, ctx.rhs, ctx.policy, &space, i, j, &mut res, &mut buf)?;
            count += 1;
        }
    }
    Ok(count)
}

struct SweepContext<'a> {
    disc: &'a Discretization,
    rhs: Option<&'a [MomentRep]>,
    policy: &'a CflPolicy,
}

/// One fast sweeping iteration: every sweep in `order`, each visiting every
/// cell once with its own local time step.
pub fn fast_sweep_step(
    field: &mut CellField,
    disc: &Discretization,
    rhs: Option<&[MomentRep]>,
    policy: &CflPolicy,
    order: &SweepOrder,
    schedule: SweepSchedule,
    counters: &mut WorkCounters,
) -> Result<()> {
    let ctx = SweepContext { disc, rhs, policy };
    let nx = field.grid.nx;
    for &dir in &order.0 {
        let blocks = match schedule {
            SweepSchedule::Serial => 1,
            SweepSchedule::Blocked(b) => b.clamp(1, nx),
        };
        if blocks == 1 {
            counters.cell_updates += sweep_range(field, &ctx, dir, 0..nx)?;
            continue;
        }
        let bounds: Vec<(usize, usize)> = (0..blocks)
            .map(|b| (b * nx / blocks, (b + 1) * nx / blocks))
            .collect();
        let snapshot: &CellField = field;
        let results: Vec<Result<(CellField, u64)>> = bounds
            .par_iter()
            .map(|&(lo, hi)| {
                let mut local = snapshot.clone();
                let n = sweep_range(&mut local, &ctx, dir, lo..hi)?;
                Ok((local, n))
            })
            .collect();
        let ny = field.grid.ny;
        let mut updated = Vec::with_capacity(blocks);
        for r in results {
            updated.push(r?);
        }
        for ((lo, hi), (local, n)) in bounds.iter().zip(updated) {
            field.cells[lo * ny..hi * ny].clone_from_slice(&local.cells[lo * ny..hi * ny]);
            counters.cell_updates += n;
        }
    }
    Ok(())
}

/// Scale every coefficient so the total mass `Σ ρ Δs` equals `target`.
pub fn mass_correction(field: &mut CellField, target: f64) -> Result<()> {
    let current = field.total_mass();
    if !(current > 0.0) || !current.is_finite() {
        return Err(Error::NonphysicalState {
            cell: None,
            rho: current,
            theta: f64::NAN,
        });
    }
    let c = target / current;
    if c == 1.0 {
        return Ok(());
    }
    for cell in field.cells.iter_mut() {
        for v in cell.coeffs.iter_mut() {
            *v *= c;
        }
    }
    Ok(())
}
