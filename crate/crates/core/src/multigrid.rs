//! Nonlinear (FAS) multigrid on nested cell-centered grids, and the outer
//! steady-state driver shared by all three solvers.
//!
//! Coarse cells merge 2×2 fine cells. The solution is restricted so that
//! mass, momentum, and energy are conserved; the residual is restricted by
//! projecting each child into the coarse basis and area-averaging. The
//! prolongation is the identity: every child receives its parent's change.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::{
    grad_normalize_in_place, velocity_and_temperature, BasisParams, MomentRep, MomentSpace,
};
use crate::single_level::{
    euler_step_with_residual, fast_sweep_step, mass_correction, CflPolicy, SweepOrder,
    SweepSchedule, WorkCounters,
};
use crate::spatial::{residual, CellField, Discretization, Grid2D};

/// Smallest coarse grid the automatic hierarchy coarsens to.
pub const MIN_COARSE_CELLS: usize = 8;
/// Default steady-state tolerance on the relative residual.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default CFL number.
pub const DEFAULT_CFL: f64 = 0.9;

/// Nested grids, `levels[0]` coarsest and `levels[K]` finest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridHierarchy {
    pub levels: Vec<Grid2D>,
}

/// Requested hierarchy depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelChoice {
    /// Deepest hierarchy whose coarsest grid is at least 8×8.
    Auto,
    /// Exactly this many coarsenings below the finest grid.
    Coarsenings(usize),
}

impl GridHierarchy {
    pub fn build(finest: &Grid2D, choice: LevelChoice) -> Result<Self> {
        let mut levels = vec![finest.clone()];
        match choice {
            LevelChoice::Auto => {
                while let Some(c) = levels.last().unwrap().coarsen() {
                    if c.nx < MIN_COARSE_CELLS || c.ny < MIN_COARSE_CELLS {
                        break;
                    }
                    levels.push(c);
                }
            }
            LevelChoice::Coarsenings(k) => {
                for _ in 0..k {
                    let c = levels.last().unwrap().coarsen().ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "a {}x{} grid cannot be coarsened {k} times",
                            finest.nx, finest.ny
                        ))
                    })?;
                    levels.push(c);
                }
            }
        }
        levels.reverse();
        Ok(GridHierarchy { levels })
    }

    /// Index `K` of the finest level.
    pub fn finest_level(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Smoothing counts and recursion of one cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CyclePolicy {
    pub s1: usize,
    pub s2: usize,
    pub s3: usize,
    pub gamma: usize,
}

impl Default for CyclePolicy {
    fn default() -> Self {
        CyclePolicy {
            s1: 2,
            s2: 2,
            s3: 4,
            gamma: 1,
        }
    }
}

impl CyclePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.s1 == 0 || self.s2 == 0 || self.s3 == 0 {
            return Err(Error::InvalidParameter("smoothing counts must be at least 1".into()));
        }
        if !(1..=2).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "cycle recursion count must be 1 or 2, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// One row of the convergence history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub relative_residual: f64,
    pub seconds: f64,
}

/// Stopping rule on `‖R(f^n)‖ / ‖R(f^0)‖` and the recorded history.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceMonitor {
    pub tol: f64,
    pub r0_norm: Option<f64>,
    pub history: Vec<HistoryEntry>,
}

impl ConvergenceMonitor {
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        Ok(ConvergenceMonitor {
            tol,
            r0_norm: None,
            history: Vec::new(),
        })
    }

    /// Record the norm after `iteration` and return the relative residual.
    pub fn record(&mut self, iteration: usize, norm: f64, seconds: f64) -> f64 {
        let ratio = match self.r0_norm {
            Some(r0) => norm / r0,
            None => {
                self.r0_norm = Some(norm);
                1.0
            }
        };
        self.history.push(HistoryEntry {
            iteration,
            relative_residual: ratio,
            seconds,
        });
        ratio
    }

    pub fn converged(&self, ratio: f64) -> bool {
        ratio <= self.tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Euler,
    FastSweeping,
    Multigrid,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Euler => "euler",
            SolverKind::FastSweeping => "fs",
            SolverKind::Multigrid => "nmg",
        }
    }

    /// Default outer iteration cap.
    pub fn default_cap(self) -> usize {
        match self {
            SolverKind::Multigrid => 200,
            SolverKind::Euler | SolverKind::FastSweeping => 100_000,
        }
    }
}

/// Outcome of [`solve_steady`]; also attached to iteration errors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub solver: Option<SolverKind>,
    pub iterations: usize,
    pub converged: bool,
    pub final_ratio: f64,
    pub r0_norm: f64,
    pub history: Vec<HistoryEntry>,
    pub wall_seconds: f64,
    pub levels: usize,
    pub counters: WorkCounters,
}

/// Everything [`solve_steady`] needs besides the field and discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub cfl: CflPolicy,
    pub tol: f64,
    pub max_iterations: usize,
    pub cycle: CyclePolicy,
    pub levels: LevelChoice,
    pub schedule: SweepSchedule,
    pub sweep_order: SweepOrder,
}

impl SolverConfig {
    /// Defaults for `kind` at expansion order `order`.
    pub fn new(kind: SolverKind, order: usize) -> Result<Self> {
        Ok(SolverConfig {
            kind,
            cfl: CflPolicy::new(DEFAULT_CFL, order)?,
            tol: DEFAULT_TOL,
            max_iterations: kind.default_cap(),
            cycle: CyclePolicy::default(),
            levels: LevelChoice::Auto,
            schedule: SweepSchedule::Serial,
            sweep_order: SweepOrder::default(),
        })
    }
}

/// Weighted L² norm `sqrt(Σ_ij ‖R_ij‖² Δs_ij / (Lx Ly))` with
/// `‖R_ij‖² = Σ_α α! θ_ij^{|α|} R_{ij,α}²`.
pub fn residual_norm(residuals: &[Vec<f64>], field: &CellField) -> f64 {
    let g = &field.grid;
    let space = MomentSpace::shared(field.order());
    let fact = space.factorials();
    let deg = space.degrees();
    let mut total = 0.0;
    let mut pw = vec![0.0; space.order() + 1];
    for i in 0..g.nx {
        for j in 0..g.ny {
            let k = g.index(i, j);
            let theta = field.cells[k].params.spread;
            pw[0] = 1.0;
            for n in 1..pw.len() {
                pw[n] = pw[n - 1] * theta;
            }
            let mut local = 0.0;
            for (a, r) in residuals[k].iter().enumerate() {
                local += fact[a] * pw[deg[a]] * r * r;
            }
            total += local * g.area(i, j);
        }
    }
    (total / (g.lx() * g.ly())).sqrt()
}

fn children(i: usize, j: usize) -> [(usize, usize); 4] {
    [
        (2 * i, 2 * j),
        (2 * i + 1, 2 * j),
        (2 * i, 2 * j + 1),
        (2 * i + 1, 2 * j + 1),
    ]
}

/// Conservative restriction onto `coarse` (which must be `fine.grid.coarsen()`).
pub fn restrict_solution(fine: &CellField, coarse: &Grid2D) -> Result<CellField> {
    let space = MomentSpace::shared(fine.order());
    let fg = &fine.grid;
    let ny = coarse.ny;
    let cells: Vec<MomentRep> = (0..coarse.n_cells())
        .into_par_iter()
        .map(|k| {
            let (ci, cj) = (k / ny, k % ny);
            let kids = children(ci, cj);
            let mut mass = 0.0;
            let mut mom = [0.0; 3];
            let mut energy = 0.0;
            for &(i, j) in &kids {
                let c = fine.get(i, j);
                let a = fg.area(i, j);
                let rho = c.coeffs[0];
                let (u, theta) = velocity_and_temperature(&space, &c.coeffs, &c.params);
                mass += rho * a;
                let mut u2 = 0.0;
                for d in 0..3 {
                    mom[d] += rho * u[d] * a;
                    u2 += u[d] * u[d];
                }
                energy += rho * (u2 + 3.0 * theta) * a;
            }
            let area = coarse.area(ci, cj);
            let u = [mom[0] / mass, mom[1] / mass, mom[2] / mass];
            let theta = (energy / mass - (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])) / 3.0;
            if !(mass > 0.0) || !(theta > 0.0) || !theta.is_finite() {
                return Err(Error::NonphysicalState {
                    cell: Some((ci, cj)),
                    rho: mass / area,
                    theta,
                });
            }
            let params = BasisParams { mean: u, spread: theta };
            let mut out = MomentRep::zeros(fine.order(), params);
            let mut buf = vec![0.0; space.len()];
            for &(i, j) in &kids {
                let c = fine.get(i, j);
                let w = fg.area(i, j) / area;
                buf.copy_from_slice(&c.coeffs);
                space.project_in_place(&mut buf, &c.params, &params);
                for (o, v) in out.coeffs.iter_mut().zip(&buf) {
                    *o += w * v;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    CellField::new(coarse.clone(), cells)
}

/// Area-weighted restriction of per-cell arrays given in the bases of
/// `fine`'s cells, expressed in the bases of `coarse`'s cells.
pub fn restrict_residual(fine_res: &[Vec<f64>], fine: &CellField, coarse: &CellField) -> Vec<Vec<f64>> {
    let space = MomentSpace::shared(fine.order());
    let fg = &fine.grid;
    let cg = &coarse.grid;
    (0..cg.n_cells())
        .into_par_iter()
        .map(|k| {
            let (ci, cj) = (k / cg.ny, k % cg.ny);
            let target = coarse.cells[k].params;
            let area = cg.area(ci, cj);
            let mut out = vec![0.0; space.len()];
            let mut buf = vec![0.0; space.len()];
            for (i, j) in children(ci, cj) {
                let w = fg.area(i, j) / area;
                buf.copy_from_slice(&fine_res[fg.index(i, j)]);
                space.project_in_place(&mut buf, &fine.get(i, j).params, &target);
                for (o, v) in out.iter_mut().zip(&buf) {
                    *o += w * v;
                }
            }
            out
        })
        .collect()
}

/// `r_H = R_H(f̄_H) + I R̄_h`, each entry in the basis of the coarse cell.
pub fn coarse_rhs(
    coarse: &CellField,
    restricted: &[Vec<f64>],
    disc: &Discretization,
) -> Result<Vec<MomentRep>> {
    let res = residual(coarse, disc)?;
    Ok(coarse
        .cells
        .iter()
        .zip(res)
        .zip(restricted)
        .map(|((c, mut r), d)| {
            for (a, b) in r.iter_mut().zip(d) {
                *a += b;
            }
            MomentRep {
                order: c.order,
                params: c.params,
                coeffs: r,
            }
        })
        .collect())
}

/// Identity-prolongated FAS correction `f̂ = f̄_h + (f̃_H - f̄_H)` in each
/// child's basis, followed by Grad normalization.
pub fn fas_correct(fine: &mut CellField, coarse_before: &CellField, coarse_after: &CellField) -> Result<()> {
    let space = MomentSpace::shared(fine.order());
    let cg = &coarse_before.grid;
    let deltas: Vec<MomentRep> = coarse_after
        .cells
        .par_iter()
        .zip(&coarse_before.cells)
        .map(|(after, before)| {
            let mut d = before.coeffs.clone();
            space.project_in_place(&mut d, &before.params, &after.params);
            for (x, a) in d.iter_mut().zip(&after.coeffs) {
                *x = a - *x;
            }
            MomentRep {
                order: after.order,
                params: after.params,
                coeffs: d,
            }
        })
        .collect();
    let fny = fine.grid.ny;
    fine.cells
        .par_iter_mut()
        .enumerate()
        .try_for_each_init(
            || vec![0.0; space.len()],
            |buf, (k, cell)| {
                let (i, j) = (k / fny, k % fny);
                let delta = &deltas[cg.index(i / 2, j / 2)];
                if delta.coeffs.iter().all(|&v| v == 0.0) {
                    return Ok(());
                }
                buf.copy_from_slice(&delta.coeffs);
                space.project_in_place(buf, &delta.params, &cell.params);
                for (c, v) in cell.coeffs.iter_mut().zip(buf.iter()) {
                    *c += v;
                }
                if cell.coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonphysicalState {
                        cell: Some((i, j)),
                        rho: cell.coeffs[0],
                        theta: f64::NAN,
                    });
                }
                grad_normalize_in_place(&space, cell).map_err(|e| e.at_cell(i, j))
            },
        )
}

struct CycleContext<'a> {
    hierarchy: &'a GridHierarchy,
    disc: &'a Discretization,
    config: &'a SolverConfig,
}

fn smooth(
    field: &mut CellField,
    rhs: Option<&[MomentRep]>,
    steps: usize,
    ctx: &CycleContext,
    counters: &mut WorkCounters,
) -> Result<()> {
    for _ in 0..steps {
        fast_sweep_step(
            field,
            ctx.disc,
            rhs,
            &ctx.config.cfl,
            &ctx.config.sweep_order,
            ctx.config.schedule,
            counters,
        )?;
    }
    Ok(())
}

fn cycle_inner(
    level: usize,
    field: &mut CellField,
    rhs: Option<&[MomentRep]>,
    ctx: &CycleContext,
    counters: &mut WorkCounters,
) -> Result<()> {
    let tag = |e: Error| match e {
        Error::Level { .. } => e,
        other => Error::Level {
            level,
            source: Box::new(other),
        },
    };
    let policy = &ctx.config.cycle;
    if level == 0 {
        return smooth(field, rhs, policy.s3, ctx, counters).map_err(tag);
    }
    smooth(field, rhs, policy.s1, ctx, counters).map_err(tag)?;

    // R̄_h = r_h - R_h(f̄_h), in the fine cell bases.
    let mut defect = residual(field, ctx.disc).map_err(tag)?;
    counters.residual_cells += field.grid.n_cells() as u64;
    let space = MomentSpace::shared(field.order());
    for (k, d) in defect.iter_mut().enumerate() {
        match rhs {
            Some(r) => {
                let mut buf = r[k].coeffs.clone();
                space.project_in_place(&mut buf, &r[k].params, &field.cells[k].params);
                for (x, b) in d.iter_mut().zip(&buf) {
                    *x = b - *x;
                }
            }
            None => d.iter_mut().for_each(|x| *x = -*x),
        }
    }

    let coarse_grid = &ctx.hierarchy.levels[level - 1];
    let coarse = restrict_solution(field, coarse_grid).map_err(tag)?;
    let restricted = restrict_residual(&defect, field, &coarse);
    let coarse_r = coarse_rhs(&coarse, &restricted, ctx.disc).map_err(tag)?;
    counters.residual_cells += coarse.grid.n_cells() as u64;

    let mut corrected = coarse.clone();
    for _ in 0..policy.gamma {
        cycle_inner(level - 1, &mut corrected, Some(&coarse_r), ctx, counters)?;
    }
    fas_correct(field, &coarse, &corrected).map_err(tag)?;
    smooth(field, rhs, policy.s2, ctx, counters).map_err(tag)
}

/// One multigrid cycle on the finest level of `hierarchy`.
pub fn nmg_cycle(
    field: &mut CellField,
    rhs: Option<&[MomentRep]>,
    hierarchy: &GridHierarchy,
    disc: &Discretization,
    config: &SolverConfig,
    counters: &mut WorkCounters,
) -> Result<()> {
    if field.grid != hierarchy.levels[hierarchy.finest_level()] {
        return Err(Error::InvalidParameter("field grid does not match the hierarchy".into()));
    }
    let ctx = CycleContext {
        hierarchy,
        disc,
        config,
    };
    cycle_inner(hierarchy.finest_level(), field, rhs, &ctx, counters)
}

/// Iterate the configured solver until the relative residual drops to
/// `config.tol`. Every iteration ends with the total mass reset to its
/// initial value.
pub fn solve_steady(field: &mut CellField, disc: &Discretization, config: &SolverConfig) -> Result<SolveReport> {
    disc.walls.validate()?;
    config.cycle.validate()?;
    let start = Instant::now();
    let mut monitor = ConvergenceMonitor::new(config.tol)?;
    let hierarchy = match config.kind {
        SolverKind::Multigrid => GridHierarchy::build(&field.grid, config.levels)?,
        _ => GridHierarchy {
            levels: vec![field.grid.clone()],
        },
    };
    let mut report = SolveReport {
        solver: Some(config.kind),
        levels: hierarchy.levels.len(),
        ..SolveReport::default()
    };
    let target_mass = field.total_mass();
    let mut counters = WorkCounters::default();

    let mut res = residual(field, disc)?;
    counters.residual_cells += field.grid.n_cells() as u64;
    let r0 = residual_norm(&res, field);
    report.r0_norm = r0;
    monitor.r0_norm = Some(r0);

    // An exact discrete steady state needs no iterations. "Exact" is
    // relative to the size of one pseudo-time increment of the state.
    let dt = crate::single_level::global_dt(field, &config.cfl)?;
    let zero: Vec<Vec<f64>> = field.cells.iter().map(|c| c.coeffs.clone()).collect();
    let state_scale = residual_norm(&zero, field) / dt;
    if r0 <= 1e-12 * state_scale {
        report.converged = true;
        report.final_ratio = 0.0;
        report.counters = counters;
        report.wall_seconds = start.elapsed().as_secs_f64();
        return Ok(report);
    }

    let finish = |report: &mut SolveReport, monitor: &ConvergenceMonitor, counters: WorkCounters, n: usize, ratio: f64| {
        report.iterations = n;
        report.final_ratio = ratio;
        report.history = monitor.history.clone();
        report.counters = counters;
        report.wall_seconds = start.elapsed().as_secs_f64();
    };

    let mut ratio = 1.0;
    for n in 1..=config.max_iterations {
        let step = match config.kind {
            SolverKind::Euler => {
                euler_step_with_residual(field, &res, None, &config.cfl).map(|_| ())
            }
            SolverKind::FastSweeping => fast_sweep_step(
                field,
                disc,
                None,
                &config.cfl,
                &config.sweep_order,
                config.schedule,
                &mut counters,
            ),
            SolverKind::Multigrid => nmg_cycle(field, None, &hierarchy, disc, config, &mut counters),
        };
        let step = step
            .and_then(|_| mass_correction(field, target_mass))
            .and_then(|_| residual(field, disc));
        res = match step {
            Ok(r) => r,
            Err(e) => {
                finish(&mut report, &monitor, counters, n - 1, ratio);
                return Err(Error::Aborted {
                    iterations: n,
                    source: Box::new(e),
                    report: Box::new(report),
                });
            }
        };
        counters.residual_cells += field.grid.n_cells() as u64;
        ratio = monitor.record(n, residual_norm(&res, field), start.elapsed().as_secs_f64());
        if !ratio.is_finite() || ratio > 1e8 {
            finish(&mut report, &monitor, counters, n, ratio);
            return Err(Error::Divergence {
                iterations: n,
                ratio,
                report: Box::new(report),
            });
        }
        if monitor.converged(ratio) {
            finish(&mut report, &monitor, counters, n, ratio);
            report.converged = true;
            return Ok(report);
        }
    }
    let n = config.max_iterations;
    finish(&mut report, &monitor, counters, n, ratio);
    Err(Error::NonConvergence {
        iterations: n,
        ratio,
        report: Box::new(report),
    })
}
