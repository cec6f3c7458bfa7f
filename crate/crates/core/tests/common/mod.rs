#![allow(dead_code)]

pub use nmg_core::hermite::{BasisParams, MomentRep};
pub mod oracle;

use nmg_core::hermite::{extract_macro, grad_normalize};
use nmg_core::scenario::parse_config;
use nmg_core::spatial::{CellField, Discretization};
use proptest::prelude::*;

/// Grad-normalized state with the given macroscopic part and small
/// higher-order coefficients.
pub fn state(order: usize, rho: f64, u: [f64; 2], theta: f64, perturb: &[f64]) -> MomentRep {
    let params = BasisParams::new([u[0], u[1], 0.0], theta).unwrap();
    let mut rep = MomentRep::zeros(order, params);
    rep.coeffs[0] = rho;
    let space = rep.space();
    for (k, p) in (4..rep.coeffs.len()).zip(perturb) {
        rep.coeffs[k] = rho * theta.powf(0.5 * space.degrees()[k] as f64) * p;
    }
    grad_normalize(&rep).unwrap()
}

pub fn state_strategy(order: usize) -> impl Strategy<Value = MomentRep> + Clone {
    let len = nmg_core::hermite::coefficient_count(order);
    (
        0.5..2.0f64,
        -0.5..0.5f64,
        -0.5..0.5f64,
        0.5..2.0f64,
        proptest::collection::vec(-0.02..0.02f64, len),
    )
        .prop_map(move |(rho, u1, u2, theta, p)| state(order, rho, [u1, u2], theta, &p))
}

/// The single lid-driven cavity at Kn = 0.1 with the Shakhov model, in
/// reduced units.
pub fn lid_case(n: usize, moments: usize, order: usize) -> (CellField, Discretization) {
    let text = format!("scenario = \"single_lid\"\nmoments = {moments}\nnx = {n}\nny = {n}\norder = {order}\n");
    parse_config(&text).unwrap().build().unwrap()
}

/// Per-cell `(ρ, u1, u2, θ, σ11, σ12, σ22, q1, q2)`.
pub fn macro_fields(field: &CellField) -> Vec<[f64; 9]> {
    field
        .cells
        .iter()
        .map(|c| {
            let m = extract_macro(c).unwrap();
            [
                m.rho,
                m.u[0],
                m.u[1],
                m.theta,
                m.sigma[0][0],
                m.sigma[0][1],
                m.sigma[1][1],
                m.q[0],
                m.q[1],
            ]
        })
        .collect()
}

/// Largest over the nine quantities of `max|a - b| / max|a|`.
pub fn field_difference(a: &[[f64; 9]], b: &[[f64; 9]]) -> f64 {
    (0..9)
        .map(|k| {
            let scale = a.iter().map(|r| r[k].abs()).fold(0.0, f64::max);
            let diff = a.iter().zip(b).map(|(x, y)| (x[k] - y[k]).abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                diff
            } else {
                diff / scale
            }
        })
        .fold(0.0, f64::max)
}
