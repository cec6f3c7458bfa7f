//! Finite-volume discretization on a rectangular grid.
//!
//! Each cell carries a Grad-normalized [`MomentRep`]. Interior face fluxes
//! are HLL fluxes evaluated in a face-local basis (the midpoint of the two
//! face states' parameters) and then projected into each adjacent cell's
//! basis. Wall faces use a diffuse (fully accommodating) Maxwell closure:
//! the outgoing half-space flux of the inside state plus the incoming flux
//! of a wall Maxwellian whose density cancels the normal mass flux.
//!
//! Cells are stored `i`-major: the flat index of cell `(i, j)` is
//! `i * ny + j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{add_collision, CollisionModel, GasParams};
use crate::error::{Error, Result};
use crate::hermite::{factorial, hermite_table, BasisParams, MomentRep, MomentSpace};

/// Rectangular tensor-product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl Grid2D {
    pub fn new(dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if dx.is_empty() || dy.is_empty() {
            return Err(Error::InvalidParameter("grid needs at least one cell per direction".into()));
        }
        if dx.iter().chain(&dy).any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidParameter("cell sizes must be positive".into()));
        }
        Ok(Grid2D {
            nx: dx.len(),
            ny: dy.len(),
            dx,
            dy,
        })
    }

    pub fn uniform(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("grid needs at least one cell per direction".into()));
        }
        Grid2D::new(vec![lx / nx as f64; nx], vec![ly / ny as f64; ny])
    }

    pub fn lx(&self) -> f64 {
        self.dx.iter().sum()
    }

    pub fn ly(&self) -> f64 {
        self.dy.iter().sum()
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn area(&self, i: usize, j: usize) -> f64 {
        self.dx[i] * self.dy[j]
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.dx[..i].iter().sum::<f64>() + 0.5 * self.dx[i]
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.dy[..j].iter().sum::<f64>() + 0.5 * self.dy[j]
    }

    /// Merge 2×2 blocks of cells; `None` if either count is odd.
    pub fn coarsen(&self) -> Option<Grid2D> {
        if self.nx % 2 != 0 || self.ny % 2 != 0 {
            return None;
        }
        let merge = |h: &[f64]| h.chunks(2).map(|c| c[0] + c[1]).collect::<Vec<_>>();
        Some(Grid2D {
            nx: self.nx / 2,
            ny: self.ny / 2,
            dx: merge(&self.dx),
            dy: merge(&self.dy),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }

    /// Axis normal to the wall.
    pub fn axis(self) -> Axis {
        match self {
            Side::Left | Side::Right => Axis::X,
            Side::Bottom | Side::Top => Axis::Y,
        }
    }

    /// Whether the wall lies on the positive end of its axis.
    fn is_upper(self) -> bool {
        matches!(self, Side::Right | Side::Top)
    }
}

/// Diffuse wall moving tangentially with `velocity` at temperature `theta`.
///
/// Bottom and top walls move along `x`, left and right walls along `y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallSpec {
    pub side: Side,
    pub velocity: f64,
    pub theta: f64,
}

impl WallSpec {
    /// Mean velocity of the emitted Maxwellian.
    pub fn velocity_vector(&self) -> [f64; 3] {
        match self.side.axis() {
            Axis::X => [0.0, self.velocity, 0.0],
            Axis::Y => [self.velocity, 0.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Walls {
    pub left: WallSpec,
    pub right: WallSpec,
    pub bottom: WallSpec,
    pub top: WallSpec,
}

impl Walls {
    /// Four walls at rest at the same temperature.
    pub fn at_rest(theta: f64) -> Self {
        let w = |side| WallSpec {
            side,
            velocity: 0.0,
            theta,
        };
        Walls {
            left: w(Side::Left),
            right: w(Side::Right),
            bottom: w(Side::Bottom),
            top: w(Side::Top),
        }
    }

    pub fn get(&self, side: Side) -> &WallSpec {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
            Side::Bottom => &self.bottom,
            Side::Top => &self.top,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for side in Side::ALL {
            let w = self.get(side);
            if w.side != side {
                return Err(Error::InvalidParameter(format!(
                    "wall spec for the {} side is tagged {}",
                    side.name(),
                    w.side.name()
                )));
            }
            if !(w.theta > 0.0) || !w.theta.is_finite() || !w.velocity.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{} wall needs a positive temperature and finite velocity",
                    side.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Spatial reconstruction order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reconstruction {
    First,
    Second,
}

impl Reconstruction {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            1 => Ok(Reconstruction::First),
            2 => Ok(Reconstruction::Second),
            other => Err(Error::InvalidParameter(format!(
                "spatial order must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Grid of per-cell expansions sharing one order.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    pub grid: Grid2D,
    order: usize,
    pub cells: Vec<MomentRep>,
}

impl CellField {
    pub fn new(grid: Grid2D, cells: Vec<MomentRep>) -> Result<Self> {
        if cells.len() != grid.n_cells() {
            return Err(Error::InvalidParameter(format!(
                "{} cells supplied for a {}x{} grid",
                cells.len(),
                grid.nx,
                grid.ny
            )));
        }
        let order = cells[0].order;
        if cells.iter().any(|c| c.order != order) {
            return Err(Error::InvalidParameter("cells must share one expansion order".into()));
        }
        Ok(CellField { grid, order, cells })
    }

    pub fn uniform(grid: Grid2D, rep: &MomentRep) -> Self {
        let cells = vec![rep.clone(); grid.n_cells()];
        CellField {
            grid,
            order: rep.order,
            cells,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> &MomentRep {
        &self.cells[self.grid.index(i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut MomentRep {
        let k = self.grid.index(i, j);
        &mut self.cells[k]
    }

    /// `Σ ρ_ij Δs_ij`, summed in storage order.
    pub fn total_mass(&self) -> f64 {
        let mut m = 0.0;
        for i in 0..self.grid.nx {
            for j in 0..self.grid.ny {
                m += self.get(i, j).coeffs[0] * self.grid.area(i, j);
            }
        }
        m
    }
}

/// The two one-sided states at a face, `left` on the lower-coordinate side.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceStates {
    pub left: MomentRep,
    pub right: MomentRep,
}

/// Everything besides the field that the residual depends on.
#[derive(Clone, Copy, Debug)]
pub struct Discretization {
    pub walls: Walls,
    pub model: CollisionModel,
    pub gas: GasParams,
    pub reconstruction: Reconstruction,
}

/// A face flux and the basis its coefficients are expressed in.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFlux {
    pub params: BasisParams,
    pub coeffs: Vec<f64>,
}

/// Face of the grid: `X { i, j }` is the face between cells `(i-1, j)` and
/// `(i, j)` (so `i = 0` and `i = nx` are walls); `Y` likewise in `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    X { i: usize, j: usize },
    Y { i: usize, j: usize },
}

// Reconstruction -------------------------------------------------------------

/// Central slope of `(u, θ, f_α)` in cell `(i, j)` along `axis`, or `None`
/// when the cell touches a wall in that direction (or is alone in it).
fn central_slope(field: &CellField, i: usize, j: usize, axis: Axis) -> Option<(Vec<f64>, [f64; 4])> {
    let g = &field.grid;
    let (lo, hi, dist) = match axis {
        Axis::X => {
            if i == 0 || i + 1 >= g.nx {
                return None;
            }
            (
                field.get(i - 1, j),
                field.get(i + 1, j),
                0.5 * g.dx[i - 1] + g.dx[i] + 0.5 * g.dx[i + 1],
            )
        }
        Axis::Y => {
            if j == 0 || j + 1 >= g.ny {
                return None;
            }
            (
                field.get(i, j - 1),
                field.get(i, j + 1),
                0.5 * g.dy[j - 1] + g.dy[j] + 0.5 * g.dy[j + 1],
            )
        }
    };
    let coeffs = hi
        .coeffs
        .iter()
        .zip(&lo.coeffs)
        .map(|(a, b)| (a - b) / dist)
        .collect();
    let params = [
        (hi.params.mean[0] - lo.params.mean[0]) / dist,
        (hi.params.mean[1] - lo.params.mean[1]) / dist,
        (hi.params.mean[2] - lo.params.mean[2]) / dist,
        (hi.params.spread - lo.params.spread) / dist,
    ];
    Some((coeffs, params))
}

/// Value of cell `(i, j)` extrapolated a signed distance `offset` along
/// `axis` with its central slope.
fn extrapolate(field: &CellField, i: usize, j: usize, axis: Axis, offset: f64) -> MomentRep {
    let cell = field.get(i, j);
    match central_slope(field, i, j, axis) {
        None => cell.clone(),
        Some((sc, sp)) => {
            let mut out = cell.clone();
            for (c, s) in out.coeffs.iter_mut().zip(&sc) {
                *c += offset * s;
            }
            for d in 0..3 {
                out.params.mean[d] += offset * sp[d];
            }
            out.params.spread += offset * sp[3];
            out
        }
    }
}

/// One-sided states at an interior face.
///
/// With second order, a nonpositive face density or temperature is
/// reported as [`Error::NonphysicalReconstruction`] for the offending cell.
pub fn face_states(field: &CellField, face: Face, order: Reconstruction) -> Result<InterfaceStates> {
    let g = &field.grid;
    let ((li, lj), (ri, rj), axis, hl, hr) = match face {
        Face::X { i, j } => {
            assert!(i > 0 && i < g.nx, "face_states needs an interior face");
            ((i - 1, j), (i, j), Axis::X, g.dx[i - 1], g.dx[i])
        }
        Face::Y { i, j } => {
            assert!(j > 0 && j < g.ny, "face_states needs an interior face");
            ((i, j - 1), (i, j), Axis::Y, g.dy[j - 1], g.dy[j])
        }
    };
    match order {
        Reconstruction::First => Ok(InterfaceStates {
            left: field.get(li, lj).clone(),
            right: field.get(ri, rj).clone(),
        }),
        Reconstruction::Second => {
            let left = extrapolate(field, li, lj, axis, 0.5 * hl);
            let right = extrapolate(field, ri, rj, axis, -0.5 * hr);
            for (rep, cell) in [(&left, (li, lj)), (&right, (ri, rj))] {
                if !(rep.params.spread > 0.0) || !(rep.coeffs[0] > 0.0) {
                    return Err(Error::NonphysicalReconstruction {
                        cell,
                        theta: rep.params.spread,
                    });
                }
            }
            Ok(InterfaceStates { left, right })
        }
    }
}

/// All interior face states: x-faces `i = 1..nx` (outer) by `j`, then
/// y-faces `i` (outer) by `j = 1..ny`.
pub fn reconstruct(
    field: &CellField,
    order: Reconstruction,
) -> Result<(Vec<InterfaceStates>, Vec<InterfaceStates>)> {
    let g = &field.grid;
    let mut xf = Vec::new();
    for i in 1..g.nx {
        for j in 0..g.ny {
            xf.push(face_states(field, Face::X { i, j }, order)?);
        }
    }
    let mut yf = Vec::new();
    for i in 0..g.nx {
        for j in 1..g.ny {
            yf.push(face_states(field, Face::Y { i, j }, order)?);
        }
    }
    Ok((xf, yf))
}

// Fluxes ---------------------------------------------------------------------

/// Coefficients of `ξ_n g` in the basis of `g`, truncated at the order:
/// `F_α = ϑ g_{α-e_n} + ϖ_n g_α + (α_n + 1) g_{α+e_n}`.
pub fn physical_flux(space: &MomentSpace, g: &[f64], params: &BasisParams, axis: Axis, out: &mut [f64]) {
    let n = axis.index();
    let mean = params.mean[n];
    let spread = params.spread;
    for k in 0..space.len() {
        let mut v = mean * g[k];
        if let Some(lo) = space.lower(k, n) {
            v += spread * g[lo];
        }
        if let Some(hi) = space.raise(k, n) {
            v += (space.indices()[k].0[n] + 1) as f64 * g[hi];
        }
        out[k] = v;
    }
}

/// HLL flux of an interface, expressed in the face basis.
fn hll_flux(space: &MomentSpace, states: &InterfaceStates, axis: Axis) -> FaceFlux {
    let n = axis.index();
    let c = space.max_root();
    let l = &states.left.params;
    let r = &states.right.params;
    let face = BasisParams::midpoint(l, r);
    let speeds = |p: &BasisParams| {
        let a = c * p.spread.sqrt();
        (p.mean[n] - a, p.mean[n] + a)
    };
    let (l_lo, l_hi) = speeds(l);
    let (r_lo, r_hi) = speeds(r);
    let (f_lo, f_hi) = speeds(&face);
    let s_l = l_lo.min(r_lo).min(f_lo);
    let s_r = l_hi.max(r_hi).max(f_hi);

    let mut gl = states.left.coeffs.clone();
    space.project_in_place(&mut gl, l, &face);
    let mut gr = states.right.coeffs.clone();
    space.project_in_place(&mut gr, r, &face);

    let mut out = vec![0.0; space.len()];
    if s_l >= 0.0 {
        physical_flux(space, &gl, &face, axis, &mut out);
    } else if s_r <= 0.0 {
        physical_flux(space, &gr, &face, axis, &mut out);
    } else {
        let mut fl = vec![0.0; space.len()];
        physical_flux(space, &gl, &face, axis, &mut fl);
        physical_flux(space, &gr, &face, axis, &mut out);
        let inv = 1.0 / (s_r - s_l);
        for k in 0..out.len() {
            out[k] = (s_r * fl[k] - s_l * out[k] + s_l * s_r * (gr[k] - gl[k])) * inv;
        }
    }
    FaceFlux {
        params: face,
        coeffs: out,
    }
}

/// Numerical flux through a face with normal `axis`, in basis `target`.
pub fn numerical_flux(states: &InterfaceStates, axis: Axis, target: &BasisParams) -> Result<Vec<f64>> {
    if states.left.order != states.right.order {
        return Err(Error::InvalidParameter("face states differ in order".into()));
    }
    if !(target.spread > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target spread must be positive, got {}",
            target.spread
        )));
    }
    let space = states.left.space();
    let mut f = hll_flux(&space, states, axis);
    space.project_in_place(&mut f.coeffs, &f.params, target);
    Ok(f.coeffs)
}

/// `U_{a,g} = ∫_{v0}^∞ He_a He_g φ dv` for `a ≤ amax`, `g ≤ gmax`, row-major
/// in `a` with row length `gmax + 1`; `φ` is the standard normal density.
pub fn half_range_table(v0: f64, amax: usize, gmax: usize) -> Vec<f64> {
    let nmax = amax.max(gmax);
    let mut he = vec![0.0; nmax + 1];
    hermite_table(nmax, v0, &mut he);
    let phi = (-0.5 * v0 * v0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let w = gmax + 1;
    let mut u = vec![0.0; (amax + 1) * w];
    u[0] = 0.5 * libm::erfc(v0 / std::f64::consts::SQRT_2);
    for a in 1..=amax {
        u[a * w] = he[a - 1] * phi;
    }
    for g in 1..=gmax {
        u[g] = he[g - 1] * phi;
    }
    for a in 1..=amax {
        for g in 1..=gmax {
            u[a * w + g] = he[a] * he[g - 1] * phi + a as f64 * u[(a - 1) * w + g - 1];
        }
    }
    u
}

/// `K_{a,g} = ∫_half ϑ^{a/2} He_a(v) ξ_n h_g(ξ_n) dξ_n` for the 1D basis
/// `h_g` with parameters `(mean, spread)`, over `ξ_n > 0` (`upper`) or
/// `ξ_n < 0`. Returned row-major in `a ≤ amax`, row length `gmax + 1`.
fn half_flux_kernel(mean: f64, spread: f64, upper: bool, amax: usize, gmax: usize) -> Vec<f64> {
    let s = spread.sqrt();
    let v0 = -mean / s;
    let w = gmax + 1;
    let mut h = half_range_table(v0, amax + 1, gmax);
    if !upper {
        for a in 0..=amax + 1 {
            for g in 0..=gmax {
                let full = if a == g { factorial(a) } else { 0.0 };
                h[a * w + g] = full - h[a * w + g];
            }
        }
    }
    let mut k = vec![0.0; (amax + 1) * w];
    for a in 0..=amax {
        for g in 0..=gmax {
            let mut inner = h[(a + 1) * w + g];
            if a > 0 {
                inner += a as f64 * h[(a - 1) * w + g];
            }
            let scale = s.powi(a as i32 - g as i32);
            k[a * w + g] = scale * (mean * h[a * w + g] + s * inner);
        }
    }
    k
}

/// Coefficients (basis of `rep`) of `χ ξ_n rep` where `χ` selects one half
/// of velocity space along `axis`.
pub fn half_space_flux(rep: &MomentRep, axis: Axis, upper: bool) -> Vec<f64> {
    let space = rep.space();
    let mut out = vec![0.0; space.len()];
    add_half_space_flux(&space, &rep.coeffs, &rep.params, axis, upper, &mut out);
    out
}

fn add_half_space_flux(
    space: &MomentSpace,
    coeffs: &[f64],
    params: &BasisParams,
    axis: Axis,
    upper: bool,
    out: &mut [f64],
) {
    let n = axis.index();
    let m = space.order();
    let k = half_flux_kernel(params.mean[n], params.spread, upper, m, m);
    let w = m + 1;
    for line in space.lines(n) {
        for a in 0..line.len() {
            let mut acc = 0.0;
            for (g, &idx) in line.iter().enumerate() {
                acc += coeffs[idx] * k[a * w + g];
            }
            out[line[a]] += acc / factorial(a);
        }
    }
}

/// Diffuse-wall flux through the face on `wall.side`, in the basis of the
/// adjacent cell `inside`, oriented along the positive axis direction.
pub fn wall_flux(inside: &MomentRep, wall: &WallSpec) -> Result<Vec<f64>> {
    let space = inside.space();
    let mut out = vec![0.0; space.len()];
    wall_flux_into(&space, inside, wall, &mut out)?;
    Ok(out)
}

fn wall_flux_into(space: &MomentSpace, inside: &MomentRep, wall: &WallSpec, out: &mut [f64]) -> Result<()> {
    let axis = wall.side.axis();
    let n = axis.index();
    let outgoing_upper = wall.side.is_upper();
    out.fill(0.0);
    add_half_space_flux(space, &inside.coeffs, &inside.params, axis, outgoing_upper, out);

    let wall_params = BasisParams {
        mean: wall.velocity_vector(),
        spread: wall.theta,
    };
    let m = space.order();
    let kw = half_flux_kernel(0.0, wall.theta, !outgoing_upper, m, 0);
    let density = -out[0] / kw[0];
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::NonphysicalWall {
            side: wall.side.name(),
            density,
        });
    }
    let mut incoming = vec![0.0; space.len()];
    let mut a_idx = 0;
    for a in 0..=m {
        incoming[a_idx] = density * kw[a] / factorial(a);
        if a < m {
            a_idx = space.raise(a_idx, n).unwrap();
        }
    }
    space.project_in_place(&mut incoming, &wall_params, &inside.params);
    for (o, v) in out.iter_mut().zip(&incoming) {
        *o += v;
    }
    out[0] = 0.0;
    Ok(())
}

// Residual -------------------------------------------------------------------

/// Flux through `face` in the basis reported alongside it.
pub(crate) fn face_flux(field: &CellField, disc: &Discretization, face: Face) -> Result<FaceFlux> {
    let g = &field.grid;
    let space = MomentSpace::shared(field.order());
    let wall_side = match face {
        Face::X { i, j } if i == 0 => Some((Side::Left, 0, j)),
        Face::X { i, j } if i == g.nx => Some((Side::Right, g.nx - 1, j)),
        Face::Y { i, j } if j == 0 => Some((Side::Bottom, i, 0)),
        Face::Y { i, j } if j == g.ny => Some((Side::Top, i, g.ny - 1)),
        _ => None,
    };
    if let Some((side, ci, cj)) = wall_side {
        let inside = field.get(ci, cj);
        let mut coeffs = vec![0.0; space.len()];
        wall_flux_into(&space, inside, disc.walls.get(side), &mut coeffs)?;
        return Ok(FaceFlux {
            params: inside.params,
            coeffs,
        });
    }
    let axis = match face {
        Face::X { .. } => Axis::X,
        Face::Y { .. } => Axis::Y,
    };
    let states = match face_states(field, face, disc.reconstruction) {
        Ok(s) => s,
        Err(Error::NonphysicalReconstruction { .. }) => face_states(field, face, Reconstruction::First)?,
        Err(e) => return Err(e),
    };
    Ok(hll_flux(&space, &states, axis))
}

/// Residual of one cell given its four face fluxes.
fn assemble(
    space: &MomentSpace,
    cell: &MomentRep,
    dx: f64,
    dy: f64,
    faces: [&FaceFlux; 4],
    disc: &Discretization,
    out: &mut [f64],
) -> Result<()> {
    let [west, east, south, north] = faces;
    let mut buf = vec![0.0; space.len()];
    let in_cell = |f: &FaceFlux, buf: &mut Vec<f64>| {
        buf.copy_from_slice(&f.coeffs);
        space.project_in_place(buf, &f.params, &cell.params);
    };
    out.fill(0.0);
    in_cell(east, &mut buf);
    for (o, v) in out.iter_mut().zip(&buf) {
        *o -= v / dx;
    }
    in_cell(west, &mut buf);
    for (o, v) in out.iter_mut().zip(&buf) {
        *o += v / dx;
    }
    in_cell(north, &mut buf);
    for (o, v) in out.iter_mut().zip(&buf) {
        *o -= v / dy;
    }
    in_cell(south, &mut buf);
    for (o, v) in out.iter_mut().zip(&buf) {
        *o += v / dy;
    }
    add_collision(space, cell, &disc.model, &disc.gas, &mut buf, out)
}

/// Steady residual `R_ij` of every cell, each in its cell's basis, in
/// storage order.
pub fn residual(field: &CellField, disc: &Discretization) -> Result<Vec<Vec<f64>>> {
    let g = &field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let xfaces: Vec<FaceFlux> = (0..(nx + 1) * ny)
        .into_par_iter()
        .map(|k| face_flux(field, disc, Face::X { i: k / ny, j: k % ny }))
        .collect::<Result<_>>()?;
    let yfaces: Vec<FaceFlux> = (0..nx * (ny + 1))
        .into_par_iter()
        .map(|k| face_flux(field, disc, Face::Y { i: k / (ny + 1), j: k % (ny + 1) }))
        .collect::<Result<_>>()?;
    let space = MomentSpace::shared(field.order());
    (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            let faces = [
                &xfaces[i * ny + j],
                &xfaces[(i + 1) * ny + j],
                &yfaces[i * (ny + 1) + j],
                &yfaces[i * (ny + 1) + j + 1],
            ];
            let mut out = vec![0.0; space.len()];
            assemble(&space, &field.cells[k], g.dx[i], g.dy[j], faces, disc, &mut out)
                .map_err(|e| e.at_cell(i, j))?;
            Ok(out)
        })
        .collect()
}

/// Residual of the single cell `(i, j)`, recomputing only its four faces.
/// Bitwise identical to the corresponding entry of [`residual`].
pub fn cell_residual(
    field: &CellField,
    disc: &Discretization,
    i: usize,
    j: usize,
    out: &mut [f64],
) -> Result<()> {
    let g = &field.grid;
    let west = face_flux(field, disc, Face::X { i, j })?;
    let east = face_flux(field, disc, Face::X { i: i + 1, j })?;
    let south = face_flux(field, disc, Face::Y { i, j })?;
    let north = face_flux(field, disc, Face::Y { i, j: j + 1 })?;
    let space = MomentSpace::shared(field.order());
    assemble(
        &space,
        field.get(i, j),
        g.dx[i],
        g.dy[j],
        [&west, &east, &south, &north],
        disc,
        out,
    )
    .map_err(|e| e.at_cell(i, j))
}
