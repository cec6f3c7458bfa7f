//! Benchmark cavity scenarios: configuration files, unit conversion, the
//! solve driver, and plain-text export of the results.
//!
//! The solver works in reduced units: lengths in `L_x`, densities in the
//! initial density, and temperatures in `θ_ref = k_B T_init / m*`, so
//! velocities are in `√θ_ref`. Exports are converted back to SI units.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::collision::{CollisionModel, GasParams, ModelKind};
use crate::error::{Error, Result};
use crate::hermite::{maxwellian_rep, MacroState, MIN_ORDER};
use crate::multigrid::{
    solve_steady, CyclePolicy, LevelChoice, SolveReport, SolverConfig, SolverKind, DEFAULT_CFL,
    DEFAULT_TOL, MIN_COARSE_CELLS,
};
use crate::single_level::{CflPolicy, SweepSchedule};
use crate::spatial::{CellField, Discretization, Grid2D, Reconstruction, Side, WallSpec, Walls};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Mass of an argon atom in kg.
pub const MOLECULE_MASS: f64 = 6.63e-26;
pub const PRANDTL: f64 = 2.0 / 3.0;
pub const VISCOSITY_INDEX: f64 = 0.81;

const DEFAULT_MOMENTS: usize = 5;
const DEFAULT_CELLS: usize = 32;

/// `θ = k_B T / m`.
pub fn kelvin_to_theta(kelvin: f64, molecule_mass: f64) -> f64 {
    BOLTZMANN * kelvin / molecule_mass
}

/// `T = m θ / k_B`.
pub fn theta_to_kelvin(theta: f64, molecule_mass: f64) -> f64 {
    theta * molecule_mass / BOLTZMANN
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    SingleLid,
    FourLid,
    BottomHeated,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::SingleLid => "single_lid",
            Preset::FourLid => "four_lid",
            Preset::BottomHeated => "bottom_heated",
            Preset::Custom => "custom",
        }
    }
}

/// Tangential wall speed (m/s) and temperature (K).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallCondition {
    pub velocity: f64,
    pub temperature: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallConditions {
    pub left: WallCondition,
    pub right: WallCondition,
    pub bottom: WallCondition,
    pub top: WallCondition,
}

impl WallConditions {
    fn uniform(temperature: f64) -> Self {
        let w = WallCondition {
            velocity: 0.0,
            temperature,
        };
        WallConditions {
            left: w,
            right: w,
            bottom: w,
            top: w,
        }
    }

    fn get_mut(&mut self, side: Side) -> &mut WallCondition {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
            Side::Bottom => &mut self.bottom,
            Side::Top => &mut self.top,
        }
    }

    fn get(&self, side: Side) -> WallCondition {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }
}

/// Initial Maxwellian in SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialState {
    pub density: f64,
    pub velocity: [f64; 2],
    pub temperature: f64,
}

/// A fully resolved scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Preset,
    pub collision: CollisionModel,
    pub moments: usize,
    pub nx: usize,
    pub ny: usize,
    pub order: usize,
    pub solver: SolverKind,
    pub levels: LevelChoice,
    pub cfl: f64,
    pub tol: f64,
    pub threads: usize,
    pub max_iterations: Option<usize>,
    pub gas: GasParams,
    pub lx: f64,
    pub ly: f64,
    pub walls: WallConditions,
    pub init: InitialState,
    pub cycle: CyclePolicy,
    pub output_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Preset,
    moments: Option<usize>,
    nx: Option<usize>,
    ny: Option<usize>,
    order: Option<usize>,
    solver: Option<String>,
    levels: Option<RawLevels>,
    cfl: Option<f64>,
    tol: Option<f64>,
    threads: Option<usize>,
    max_iterations: Option<usize>,
    output_dir: Option<PathBuf>,
    collision: Option<RawCollision>,
    gas: Option<RawGas>,
    geometry: Option<RawGeometry>,
    walls: Option<RawWalls>,
    init: Option<RawInit>,
    cycle: Option<RawCycle>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawLevels {
    Count(usize),
    Name(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCollision {
    model: Option<ModelKind>,
    prandtl: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGas {
    knudsen: Option<f64>,
    viscosity_index: Option<f64>,
    molecule_mass: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    lx: Option<f64>,
    ly: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWalls {
    left: Option<RawWall>,
    right: Option<RawWall>,
    bottom: Option<RawWall>,
    top: Option<RawWall>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWall {
    velocity: Option<f64>,
    temperature: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    density: Option<f64>,
    velocity: Option<[f64; 2]>,
    temperature: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCycle {
    s1: Option<usize>,
    s2: Option<usize>,
    s3: Option<usize>,
    gamma: Option<usize>,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {msg}"))
}

pub fn parse_solver(name: &str) -> Result<SolverKind> {
    match name {
        "euler" => Ok(SolverKind::Euler),
        "fs" => Ok(SolverKind::FastSweeping),
        "nmg" => Ok(SolverKind::Multigrid),
        other => Err(invalid("solver", format!("expected euler, fs or nmg, got {other:?}"))),
    }
}

pub fn parse_levels(text: &str) -> Result<LevelChoice> {
    if text == "auto" {
        return Ok(LevelChoice::Auto);
    }
    text.parse()
        .map(LevelChoice::Coarsenings)
        .map_err(|_| invalid("levels", format!("expected \"auto\" or a count, got {text:?}")))
}

/// Geometry, walls, initial state and Knudsen number of a preset.
struct PresetValues {
    length: f64,
    walls: WallConditions,
    init_temperature: f64,
    knudsen: f64,
    density: fn(f64) -> f64,
}

fn preset_values(p: Preset) -> Option<PresetValues> {
    match p {
        Preset::SingleLid => {
            let mut walls = WallConditions::uniform(273.0);
            walls.top.velocity = 50.0;
            Some(PresetValues {
                length: 9.63e-7,
                walls,
                init_temperature: 273.0,
                knudsen: 0.1,
                // 0.891 kg/m³ at Kn = 0.1 and 0.0891 kg/m³ at Kn = 1.
                density: |kn| 0.0891 / kn,
            })
        }
        Preset::FourLid => {
            let mut walls = WallConditions::uniform(273.0);
            walls.top.velocity = 50.0;
            walls.right.velocity = 50.0;
            walls.bottom.velocity = -50.0;
            walls.left.velocity = -50.0;
            Some(PresetValues {
                length: 1.0,
                walls,
                init_temperature: 273.0,
                knudsen: 0.777,
                density: |_| 1.1044e-7,
            })
        }
        Preset::BottomHeated => {
            let mut walls = WallConditions::uniform(300.0);
            walls.bottom.temperature = 600.0;
            Some(PresetValues {
                length: 1e-6,
                walls,
                init_temperature: 300.0,
                knudsen: 0.3,
                density: |_| 0.2733,
            })
        }
        Preset::Custom => None,
    }
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| invalid(key, "required for the custom scenario"))
}

/// Parse and validate a TOML scenario description.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let preset = preset_values(raw.scenario);

    let gas = raw.gas.unwrap_or(RawGas {
        knudsen: None,
        viscosity_index: None,
        molecule_mass: None,
    });
    let knudsen = match (&preset, gas.knudsen) {
        (_, Some(kn)) => kn,
        (Some(p), None) => p.knudsen,
        (None, None) => return Err(invalid("gas.knudsen", "required for the custom scenario")),
    };
    let gas = GasParams::new(
        knudsen,
        gas.viscosity_index.unwrap_or(VISCOSITY_INDEX),
        gas.molecule_mass.unwrap_or(MOLECULE_MASS),
    )
    .map_err(|e| invalid("gas", e))?;

    let geometry = raw.geometry.unwrap_or(RawGeometry { lx: None, ly: None });
    let (lx, ly) = match &preset {
        Some(p) => (geometry.lx.unwrap_or(p.length), geometry.ly.unwrap_or(p.length)),
        None => (required(geometry.lx, "geometry.lx")?, required(geometry.ly, "geometry.ly")?),
    };

    let mut walls = match &preset {
        Some(p) => p.walls,
        None => WallConditions::uniform(f64::NAN),
    };
    let raw_walls = raw.walls.unwrap_or(RawWalls {
        left: None,
        right: None,
        bottom: None,
        top: None,
    });
    for (side, w) in [
        (Side::Left, raw_walls.left),
        (Side::Right, raw_walls.right),
        (Side::Bottom, raw_walls.bottom),
        (Side::Top, raw_walls.top),
    ] {
        let slot = walls.get_mut(side);
        if let Some(w) = w {
            if let Some(v) = w.velocity {
                slot.velocity = v;
            }
            if let Some(t) = w.temperature {
                slot.temperature = t;
            }
        }
        if slot.temperature.is_nan() {
            return Err(invalid(
                &format!("walls.{}.temperature", side.name()),
                "required for the custom scenario",
            ));
        }
    }

    let init = raw.init.unwrap_or(RawInit {
        density: None,
        velocity: None,
        temperature: None,
    });
    let init = match &preset {
        Some(p) => InitialState {
            density: init.density.unwrap_or((p.density)(knudsen)),
            velocity: init.velocity.unwrap_or([0.0; 2]),
            temperature: init.temperature.unwrap_or(p.init_temperature),
        },
        None => InitialState {
            density: required(init.density, "init.density")?,
            velocity: init.velocity.unwrap_or([0.0; 2]),
            temperature: required(init.temperature, "init.temperature")?,
        },
    };

    let collision = raw.collision.unwrap_or(RawCollision {
        model: None,
        prandtl: None,
    });
    let collision = CollisionModel::new(
        collision.model.unwrap_or(ModelKind::Shakhov),
        collision.prandtl.unwrap_or(PRANDTL),
    )
    .map_err(|e| invalid("collision.prandtl", e))?;

    let defaults = CyclePolicy::default();
    let cycle = match raw.cycle {
        Some(c) => CyclePolicy {
            s1: c.s1.unwrap_or(defaults.s1),
            s2: c.s2.unwrap_or(defaults.s2),
            s3: c.s3.unwrap_or(defaults.s3),
            gamma: c.gamma.unwrap_or(defaults.gamma),
        },
        None => defaults,
    };

    let levels = match raw.levels {
        None => LevelChoice::Auto,
        Some(RawLevels::Count(k)) => LevelChoice::Coarsenings(k),
        Some(RawLevels::Name(s)) => parse_levels(&s)?,
    };

    let config = ScenarioConfig {
        scenario: raw.scenario,
        collision,
        moments: raw.moments.unwrap_or(DEFAULT_MOMENTS),
        nx: raw.nx.unwrap_or(DEFAULT_CELLS),
        ny: raw.ny.unwrap_or(DEFAULT_CELLS),
        order: raw.order.unwrap_or(1),
        solver: parse_solver(raw.solver.as_deref().unwrap_or("nmg"))?,
        levels,
        cfl: raw.cfl.unwrap_or(DEFAULT_CFL),
        tol: raw.tol.unwrap_or(DEFAULT_TOL),
        threads: raw.threads.unwrap_or(1),
        max_iterations: raw.max_iterations,
        gas,
        lx,
        ly,
        walls,
        init,
        cycle,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("output")),
    };
    config.validate()?;
    Ok(config)
}

/// Read and validate a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.moments < MIN_ORDER {
            return Err(invalid("moments", format!("must be at least {MIN_ORDER}")));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(invalid("nx/ny", "grid must have at least one cell per direction"));
        }
        Reconstruction::from_order(self.order).map_err(|e| invalid("order", e))?;
        CflPolicy::new(self.cfl, self.moments).map_err(|e| invalid("cfl", e))?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid("tol", "must lie in (0, 1)"));
        }
        if self.threads == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        if self.max_iterations == Some(0) {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(invalid("geometry", "cavity dimensions must be positive"));
        }
        for side in Side::ALL {
            let w = self.walls.get(side);
            if !(w.temperature > 0.0) || !w.velocity.is_finite() {
                return Err(invalid(
                    &format!("walls.{}", side.name()),
                    "needs a positive temperature and finite velocity",
                ));
            }
        }
        if !(self.init.density > 0.0) {
            return Err(invalid("init.density", "must be positive"));
        }
        if !(self.init.temperature > 0.0) {
            return Err(invalid("init.temperature", "must be positive"));
        }
        if self.init.velocity.iter().any(|v| !v.is_finite()) {
            return Err(invalid("init.velocity", "must be finite"));
        }
        self.cycle.validate().map_err(|e| invalid("cycle", e))?;
        if self.solver == SolverKind::Multigrid {
            let grid = Grid2D::uniform(self.nx, self.ny, self.lx, self.ly)?;
            crate::multigrid::GridHierarchy::build(&grid, self.levels).map_err(|e| invalid("levels", e))?;
        }
        Ok(())
    }

    pub fn scales(&self) -> ReferenceScales {
        ReferenceScales {
            length: self.lx,
            density: self.init.density,
            theta: kelvin_to_theta(self.init.temperature, self.gas.molecule_mass),
            molecule_mass: self.gas.molecule_mass,
        }
    }

    /// Grid, discretization and initial field in reduced units.
    pub fn build(&self) -> Result<(CellField, Discretization)> {
        let s = self.scales();
        let grid = Grid2D::uniform(self.nx, self.ny, 1.0, self.ly / s.length)?;
        let wall = |side: Side| {
            let w = self.walls.get(side);
            WallSpec {
                side,
                velocity: w.velocity / s.velocity(),
                theta: s.reduce_temperature(w.temperature),
            }
        };
        let walls = Walls {
            left: wall(Side::Left),
            right: wall(Side::Right),
            bottom: wall(Side::Bottom),
            top: wall(Side::Top),
        };
        let init = maxwellian_rep(
            self.init.density / s.density,
            [self.init.velocity[0] / s.velocity(), self.init.velocity[1] / s.velocity(), 0.0],
            s.reduce_temperature(self.init.temperature),
            self.moments,
        )?;
        let disc = Discretization {
            walls,
            model: self.collision,
            gas: self.gas,
            reconstruction: Reconstruction::from_order(self.order)?,
        };
        Ok((CellField::uniform(grid, &init), disc))
    }

    /// Solver settings. Fast sweeping and its use inside multigrid switch
    /// to the blocked schedule, one block per thread, when `threads > 1`.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::new(self.solver, self.moments)?;
        c.cfl = CflPolicy::new(self.cfl, self.moments)?;
        c.tol = self.tol;
        if let Some(n) = self.max_iterations {
            c.max_iterations = n;
        }
        c.cycle = self.cycle;
        c.levels = self.levels;
        c.schedule = if self.threads > 1 {
            SweepSchedule::Blocked(self.threads)
        } else {
            SweepSchedule::Serial
        };
        Ok(c)
    }
}

/// Conversion between reduced and SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceScales {
    pub length: f64,
    pub density: f64,
    pub theta: f64,
    pub molecule_mass: f64,
}

impl ReferenceScales {
    pub fn velocity(&self) -> f64 {
        self.theta.sqrt()
    }

    pub fn reduce_temperature(&self, kelvin: f64) -> f64 {
        kelvin_to_theta(kelvin, self.molecule_mass) / self.theta
    }

    pub fn kelvin(&self, reduced_theta: f64) -> f64 {
        theta_to_kelvin(reduced_theta * self.theta, self.molecule_mass)
    }
}

/// One exported cell, SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub rho: f64,
    pub u: [f64; 2],
    pub temperature: f64,
    pub sigma: [f64; 3],
    pub q: [f64; 2],
}

/// Macroscopic fields at cell centers, rows ordered `j` outer, `i` inner.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSnapshot {
    pub rows: Vec<FieldRow>,
}

impl FieldSnapshot {
    pub fn new(field: &CellField, scales: &ReferenceScales) -> Self {
        let g = &field.grid;
        let space = crate::hermite::MomentSpace::shared(field.order());
        let s = scales;
        let pressure = s.density * s.theta;
        let mut rows = Vec::with_capacity(g.n_cells());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let m = MacroState::from_normalized(&space, field.get(i, j));
                rows.push(FieldRow {
                    x: g.x_center(i) * s.length,
                    y: g.y_center(j) * s.length,
                    rho: m.rho * s.density,
                    u: [m.u[0] * s.velocity(), m.u[1] * s.velocity()],
                    temperature: s.kelvin(m.theta),
                    sigma: [m.sigma[0][0] * pressure, m.sigma[0][1] * pressure, m.sigma[1][1] * pressure],
                    q: [m.q[0] * pressure * s.velocity(), m.q[1] * pressure * s.velocity()],
                });
            }
        }
        FieldSnapshot { rows }
    }
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

pub fn format_history(report: &SolveReport) -> String {
    let mut out = String::from("iter\trel_residual\tseconds\n");
    for h in &report.history {
        let _ = write!(out, "{}\t", h.iteration);
        num(&mut out, h.relative_residual);
        out.push('\t');
        num(&mut out, h.seconds);
        out.push('\n');
    }
    out
}

pub fn format_field(snapshot: &FieldSnapshot) -> String {
    let mut out = String::from("x\ty\trho\tu1\tu2\tT\tsigma11\tsigma12\tsigma22\tq1\tq2\n");
    for r in &snapshot.rows {
        let vals = [
            r.x,
            r.y,
            r.rho,
            r.u[0],
            r.u[1],
            r.temperature,
            r.sigma[0],
            r.sigma[1],
            r.sigma[2],
            r.q[0],
            r.q[1],
        ];
        for (k, v) in vals.iter().enumerate() {
            if k > 0 {
                out.push('\t');
            }
            num(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn export_history(report: &SolveReport, path: &Path) -> Result<()> {
    write_file(path, &format_history(report))
}

pub fn export_field(snapshot: &FieldSnapshot, path: &Path) -> Result<()> {
    write_file(path, &format_field(snapshot))
}

/// Run parameters followed by the outcome, one `key<TAB>value` per line.
pub fn format_report(config: &ScenarioConfig, report: &SolveReport) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}\t{v}");
    };
    kv("scenario", config.scenario.name().into());
    kv("solver", config.solver.name().into());
    kv("collision_model", format!("{:?}", config.collision.kind));
    kv("prandtl", format!("{}", config.collision.prandtl));
    kv("viscosity_index", format!("{}", config.gas.viscosity_index));
    kv("molecule_mass", format!("{:e}", config.gas.molecule_mass));
    kv("boltzmann", format!("{BOLTZMANN:e}"));
    kv("knudsen", format!("{}", config.gas.knudsen));
    kv("moments", config.moments.to_string());
    kv("grid", format!("{}x{}", config.nx, config.ny));
    kv("cavity", format!("{:e}x{:e}", config.lx, config.ly));
    kv("reconstruction_order", config.order.to_string());
    kv("cfl", format!("{}", config.cfl));
    kv("tol", format!("{:e}", config.tol));
    kv("threads", config.threads.to_string());
    kv(
        "levels",
        match config.levels {
            LevelChoice::Auto => "auto".into(),
            LevelChoice::Coarsenings(k) => k.to_string(),
        },
    );
    kv("min_coarse_cells", MIN_COARSE_CELLS.to_string());
    kv(
        "cycle",
        format!(
            "s1={} s2={} s3={} gamma={}",
            config.cycle.s1, config.cycle.s2, config.cycle.s3, config.cycle.gamma
        ),
    );
    kv("init_density", format!("{:e}", config.init.density));
    kv("init_temperature", format!("{}", config.init.temperature));
    for side in Side::ALL {
        let w = config.walls.get(side);
        kv(
            &format!("wall_{}", side.name()),
            format!("velocity={} temperature={}", w.velocity, w.temperature),
        );
    }
    kv("hierarchy_levels", report.levels.to_string());
    kv("iterations", report.iterations.to_string());
    kv("converged", report.converged.to_string());
    kv("final_ratio", format!("{:e}", report.final_ratio));
    kv("initial_residual", format!("{:e}", report.r0_norm));
    kv("wall_seconds", format!("{:.3}", report.wall_seconds));
    kv("fs_cell_updates", report.counters.cell_updates.to_string());
    kv("residual_cells", report.counters.residual_cells.to_string());
    out
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: SolveReport,
    pub snapshot: FieldSnapshot,
}

/// Solve the scenario on a pool of `config.threads` workers and write
/// `history.tsv`, `field.tsv` and `report.txt` to the output directory.
/// The files are written on solver failure too; the error is returned
/// afterwards.
pub fn run(config: &ScenarioConfig) -> Result<RunOutcome> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", config.threads)))?;
    let (mut field, disc) = config.build()?;
    let solver = config.solver_config()?;
    let result = pool.install(|| solve_steady(&mut field, &disc, &solver));

    let report = match &result {
        Ok(r) => r.clone(),
        Err(e) => e.report().cloned().unwrap_or_default(),
    };
    let snapshot = FieldSnapshot::new(&field, &config.scales());
    fs::create_dir_all(&config.output_dir)?;
    export_history(&report, &config.output_dir.join("history.tsv"))?;
    export_field(&snapshot, &config.output_dir.join("field.tsv"))?;
    write_file(&config.output_dir.join("report.txt"), &format_report(config, &report))?;
    result.map(|report| RunOutcome { report, snapshot })
}
