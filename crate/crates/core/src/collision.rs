//! BGK-family relaxation operators `Q[f] = ν (f^E - f)`.
//!
//! All three models share the collision frequency
//! `ν = β √(π/2) ρ θ^{1-w} / Kn` and differ only in the target `f^E`:
//! the local Maxwellian (BGK), an anisotropic Gaussian with covariance
//! `θI + (1 - 1/Pr) σ/ρ` (ES-BGK), or the Maxwellian times a cubic heat-flux
//! correction (Shakhov). Coefficients are produced in the Grad basis of the
//! state, so `Q_0` and `Q_{e_d}` vanish identically.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{MacroState, MomentRep, MomentSpace};

/// Which equilibrium the distribution relaxes toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Bgk,
    EsBgk,
    Shakhov,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionModel {
    pub kind: ModelKind,
    pub prandtl: f64,
}

impl CollisionModel {
    pub fn bgk() -> Self {
        CollisionModel {
            kind: ModelKind::Bgk,
            prandtl: 1.0,
        }
    }

    pub fn es_bgk(prandtl: f64) -> Self {
        CollisionModel {
            kind: ModelKind::EsBgk,
            prandtl,
        }
    }

    pub fn shakhov(prandtl: f64) -> Self {
        CollisionModel {
            kind: ModelKind::Shakhov,
            prandtl,
        }
    }

    pub fn new(kind: ModelKind, prandtl: f64) -> Result<Self> {
        if !(prandtl > 0.0 && prandtl <= 1.5) {
            return Err(Error::InvalidParameter(format!(
                "Prandtl number must lie in (0, 1.5], got {prandtl}"
            )));
        }
        Ok(CollisionModel { kind, prandtl })
    }

    /// Scaling of the collision frequency: `Pr` for ES-BGK, 1 otherwise.
    pub fn beta(&self) -> f64 {
        match self.kind {
            ModelKind::EsBgk => self.prandtl,
            ModelKind::Bgk | ModelKind::Shakhov => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GasParams {
    pub knudsen: f64,
    pub viscosity_index: f64,
    pub molecule_mass: f64,
}

impl GasParams {
    pub fn new(knudsen: f64, viscosity_index: f64, molecule_mass: f64) -> Result<Self> {
        if !(knudsen > 0.0) || !knudsen.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Knudsen number must be positive, got {knudsen}"
            )));
        }
        if !(molecule_mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "molecule mass must be positive, got {molecule_mass}"
            )));
        }
        Ok(GasParams {
            knudsen,
            viscosity_index,
            molecule_mass,
        })
    }
}

/// `ν = β √(π/2) ρ θ^{1-w} / Kn`.
pub fn collision_frequency(
    rho: f64,
    theta: f64,
    gas: &GasParams,
    model: &CollisionModel,
) -> Result<f64> {
    if !(rho > 0.0) || !(theta > 0.0) {
        return Err(Error::NonphysicalState {
            cell: None,
            rho,
            theta,
        });
    }
    Ok(model.beta() * std::f64::consts::FRAC_PI_2.sqrt() * rho * theta.powf(1.0 - gas.viscosity_index)
        / gas.knudsen)
}

/// Grad-basis coefficients of `f^E` for the macroscopic state `m`.
pub fn equilibrium_rep(model: &CollisionModel, m: &MacroState, order: usize) -> Result<MomentRep> {
    let mut rep = crate::hermite::maxwellian_rep(m.rho, m.u, m.theta, order)?;
    let space = rep.space();
    equilibrium_into(&space, model, m, &mut rep.coeffs)?;
    Ok(rep)
}

/// Write `f^E` coefficients into `out` (length of `space`), basis `(u, θ)`.
fn equilibrium_into(
    space: &MomentSpace,
    model: &CollisionModel,
    m: &MacroState,
    out: &mut [f64],
) -> Result<()> {
    out.fill(0.0);
    out[0] = m.rho;
    match model.kind {
        ModelKind::Bgk => {}
        ModelKind::Shakhov => {
            let w = 1.0 - model.prandtl;
            if w != 0.0 {
                for i in 0..3 {
                    let c = w * m.q[i] / 5.0;
                    for d in 0..3 {
                        let mut a = [0; 3];
                        a[i] += 1;
                        a[d] += 2;
                        out[space.index_of(a).unwrap()] = c;
                    }
                }
            }
        }
        ModelKind::EsBgk => {
            let w = 1.0 - 1.0 / model.prandtl;
            let mut s = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    s[i][j] = w * m.sigma[i][j] / m.rho;
                }
            }
            check_spd(&s, m.theta)?;
            if w != 0.0 {
                anisotropic_gaussian(space, &s, m.rho, out);
            }
        }
    }
    Ok(())
}

fn check_spd(s: &[[f64; 3]; 3], theta: f64) -> Result<()> {
    let lambda = Matrix3::from_fn(|i, j| {
        let sym = 0.5 * (s[i][j] + s[j][i]);
        if i == j {
            theta + sym
        } else {
            sym
        }
    });
    let min = SymmetricEigen::new(lambda).eigenvalues.min();
    if !(min > 1e-12 * theta) {
        return Err(Error::NonSpd { eigenvalue: min });
    }
    Ok(())
}

// g_α = [t^α] exp(½ tᵀ S t), from α_d g_α = Σ_j S_dj g_{α-e_d-e_j}.
fn anisotropic_gaussian(space: &MomentSpace, s: &[[f64; 3]; 3], rho: f64, out: &mut [f64]) {
    out[0] = 1.0;
    for k in 1..out.len() {
        let a = space.indices()[k].0;
        if space.degrees()[k] % 2 == 1 {
            out[k] = 0.0;
            continue;
        }
        let d = (0..3).find(|&d| a[d] > 0).unwrap();
        let down = space.lower(k, d).unwrap();
        let mut acc = 0.0;
        for (j, s_dj) in s[d].iter().enumerate() {
            if let Some(kk) = space.lower(down, j) {
                acc += s_dj * out[kk];
            }
        }
        out[k] = acc / a[d] as f64;
    }
    for c in out.iter_mut() {
        *c *= rho;
    }
}

/// `Q_α = ν (f^E_α - f_α)` in the basis of `rep`, which must be Grad-normalized.
pub fn collision_coeffs(rep: &MomentRep, model: &CollisionModel, gas: &GasParams) -> Result<Vec<f64>> {
    let space = rep.space();
    let mut out = vec![0.0; space.len()];
    let mut scratch = vec![0.0; space.len()];
    add_collision(&space, rep, model, gas, &mut scratch, &mut out)?;
    Ok(out)
}

/// Accumulate `Q[rep]` into `out`; `scratch` must have the space's length.
pub(crate) fn add_collision(
    space: &MomentSpace,
    rep: &MomentRep,
    model: &CollisionModel,
    gas: &GasParams,
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let rho = rep.coeffs[0];
    let theta = rep.params.spread;
    let nu = collision_frequency(rho, theta, gas, model)?;
    let m = MacroState::from_normalized(space, rep);
    equilibrium_into(space, model, &m, scratch)?;
    // Flat positions 0..4 hold f_0 and f_{e_d}, which the model conserves.
    for k in 4..out.len() {
        out[k] += nu * (scratch[k] - rep.coeffs[k]);
    }
    Ok(())
}
