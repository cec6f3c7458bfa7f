//! Test-only reference routines that never touch the solver's own recurrences:
//! Gauss–Hermite quadrature from the Jacobi-matrix eigenproblem, direct
//! pointwise evaluation of expansions, bisection for polynomial roots, and
//! composite Simpson rules for half-space integrals.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use super::{BasisParams, MomentRep};

/// Probabilists' Hermite polynomial evaluated from the explicit sum
/// `He_n(x) = n! Σ_m (-1)^m x^{n-2m} / (m! (n-2m)! 2^m)`.
pub fn he_explicit(n: usize, x: f64) -> f64 {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let mut s = 0.0;
    for m in 0..=n / 2 {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * x.powi((n - 2 * m) as i32) / (fact(m) * fact(n - 2 * m) * 2f64.powi(m as i32));
    }
    fact(n) * s
}

/// Largest root of `He_n` by bisection on a sign change scan.
pub fn bisect_max_root(n: usize) -> f64 {
    let mut hi = (4.0 * n as f64 + 4.0).sqrt();
    let step = 1e-3;
    let mut lo = hi - step;
    while he_explicit(n, lo).signum() == he_explicit(n, hi).signum() {
        hi = lo;
        lo -= step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if he_explicit(n, mid).signum() == he_explicit(n, hi).signum() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Nodes and weights for `∫ g(v) e^{-v²/2} / √(2π) dv` (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn indices(order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for n in 0..=order {
        for a1 in (0..=n).rev() {
            for a2 in (0..=n - a1).rev() {
                out.push([a1, a2, n - a1 - a2]);
            }
        }
    }
    out
}

/// Pointwise value of the expansion divided by the basis Gaussian, as a
/// function of the scaled velocity `v = (ξ - ϖ)/√ϑ`.
pub fn polynomial_part(rep: &MomentRep, v: [f64; 3]) -> f64 {
    let t = rep.params.spread;
    indices(rep.order)
        .iter()
        .zip(&rep.coeffs)
        .map(|(a, c)| {
            let deg = (a[0] + a[1] + a[2]) as i32;
            c * t.powf(-0.5 * deg as f64)
                * he_explicit(a[0], v[0])
                * he_explicit(a[1], v[1])
                * he_explicit(a[2], v[2])
        })
        .sum()
}

/// `∫ g(ξ) 𝓜^{[params]}(ξ) dξ` with an `n`-point tensor rule.
pub fn gaussian_expectation(params: &BasisParams, n: usize, g: impl Fn([f64; 3]) -> f64) -> f64 {
    let (x, w) = gauss_hermite(n);
    let s = params.spread.sqrt();
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let xi = [
                    params.mean[0] + s * x[a],
                    params.mean[1] + s * x[b],
                    params.mean[2] + s * x[c],
                ];
                acc += w[a] * w[b] * w[c] * g(xi);
            }
        }
    }
    acc
}

/// `∫ g(ξ) f(ξ) dξ` for an expansion `f`.
pub fn integrate_rep(rep: &MomentRep, n: usize, g: impl Fn([f64; 3]) -> f64) -> f64 {
    let p = rep.params;
    let s = p.spread.sqrt();
    gaussian_expectation(&p, n, |xi| {
        let v = [(xi[0] - p.mean[0]) / s, (xi[1] - p.mean[1]) / s, (xi[2] - p.mean[2]) / s];
        g(xi) * polynomial_part(rep, v)
    })
}

fn monomial(xi: [f64; 3], beta: [usize; 3]) -> f64 {
    xi[0].powi(beta[0] as i32) * xi[1].powi(beta[1] as i32) * xi[2].powi(beta[2] as i32)
}

/// `∫ w(ξ) ξ^β f dξ` for all `|β| ≤ max_degree`, accumulated in one pass
/// over an `n`-point tensor rule.
fn weighted_moments(rep: &MomentRep, n: usize, max_degree: usize, weight: impl Fn([f64; 3]) -> f64) -> BTreeMap<[usize; 3], f64> {
    let p = rep.params;
    let s = p.spread.sqrt();
    let (x, w) = gauss_hermite(n);
    let betas = indices(max_degree);
    let mut acc = vec![0.0; betas.len()];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let v = [x[a], x[b], x[c]];
                let xi = [p.mean[0] + s * v[0], p.mean[1] + s * v[1], p.mean[2] + s * v[2]];
                let base = w[a] * w[b] * w[c] * weight(xi) * polynomial_part(rep, v);
                for (slot, beta) in acc.iter_mut().zip(&betas) {
                    *slot += base * monomial(xi, *beta);
                }
            }
        }
    }
    betas.into_iter().zip(acc).collect()
}

/// Raw moments `∫ ξ^β f dξ` for all `|β| ≤ max_degree`.
pub fn raw_moments(rep: &MomentRep, max_degree: usize) -> BTreeMap<[usize; 3], f64> {
    weighted_moments(rep, rep.order + max_degree / 2 + 4, max_degree, |_| 1.0)
}

/// Raw flux moments `∫ ξ_axis ξ^β f dξ` for all `|β| ≤ max_degree`.
pub fn flux_moments(rep: &MomentRep, axis: usize, max_degree: usize) -> BTreeMap<[usize; 3], f64> {
    weighted_moments(rep, rep.order + max_degree / 2 + 5, max_degree, |xi| xi[axis])
}

/// Order-`M` coefficients (in basis `params`) of a function known only
/// through `integral(p)` = `∫ p(ξ) g(ξ) dξ` for polynomials `p`.
///
/// Uses `g_α = (1/α!) ∫ ϑ^{|α|/2} Π He_{α_d}((ξ_d - ϖ_d)/√ϑ) g dξ`.
pub fn coefficients_from_integrals(
    params: &BasisParams,
    order: usize,
    integral: impl Fn(&dyn Fn([f64; 3]) -> f64) -> f64,
) -> Vec<f64> {
    let s = params.spread.sqrt();
    indices(order)
        .into_iter()
        .map(|a| {
            let deg = (a[0] + a[1] + a[2]) as i32;
            let norm = fact(a[0]) * fact(a[1]) * fact(a[2]);
            let p = move |xi: [f64; 3]| {
                let v = [
                    (xi[0] - params.mean[0]) / s,
                    (xi[1] - params.mean[1]) / s,
                    (xi[2] - params.mean[2]) / s,
                ];
                s.powi(deg) * he_explicit(a[0], v[0]) * he_explicit(a[1], v[1]) * he_explicit(a[2], v[2])
            };
            integral(&p) / norm
        })
        .collect()
}

/// `∫_{±ξ_axis > 0} ξ_axis ξ^β f(ξ) dξ` for all `|β| ≤ max_degree`:
/// Gauss–Hermite across the tangential directions, composite Simpson along
/// the normal one.
pub fn half_space_flux_moments(
    rep: &MomentRep,
    axis: usize,
    positive: bool,
    max_degree: usize,
) -> BTreeMap<[usize; 3], f64> {
    let p = rep.params;
    let s = p.spread.sqrt();
    let n = rep.order + max_degree / 2 + 4;
    let (x, w) = gauss_hermite(n);
    let tang: Vec<usize> = (0..3).filter(|&d| d != axis).collect();
    let v0 = -p.mean[axis] / s;
    let (lo, hi) = if positive { (v0, v0.max(0.0) + 14.0) } else { (v0.min(0.0) - 14.0, v0) };
    let intervals = 3000;
    let h = (hi - lo) / intervals as f64;
    let phi = |v: f64| (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let betas = indices(max_degree);
    let mut acc = vec![0.0; betas.len()];
    for k in 0..=intervals {
        let vn = lo + h * k as f64;
        let wk = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
        for a in 0..n {
            for b in 0..n {
                let mut v = [0.0; 3];
                v[axis] = vn;
                v[tang[0]] = x[a];
                v[tang[1]] = x[b];
                let xi = [p.mean[0] + s * v[0], p.mean[1] + s * v[1], p.mean[2] + s * v[2]];
                let base = wk * phi(vn) * w[a] * w[b] * xi[axis] * polynomial_part(rep, v);
                for (slot, beta) in acc.iter_mut().zip(&betas) {
                    *slot += base * monomial(xi, *beta);
                }
            }
        }
    }
    betas.into_iter().zip(acc).collect()
}
