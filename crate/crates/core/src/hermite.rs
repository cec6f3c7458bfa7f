//! Hermite basis algebra for the velocity discretization.
//!
//! A distribution function is expanded as
//!
//! ```text
//! f(ξ) = Σ_{|α| ≤ M} f_α H_α^{[ϖ, ϑ]}(ξ),   H_α = (-∂_ξ)^α 𝓜^{[ϖ, ϑ]}
//! ```
//!
//! where `𝓜^{[ϖ, ϑ]}` is the normalized isotropic Gaussian with mean `ϖ` and
//! variance `ϑ`. With this scaling `f_0` is the density and every change of
//! basis parameters is a finite, lower-triangular recurrence on the
//! coefficients that preserves all raw velocity moments up to order `M`.
//!
//! Coefficients are stored in graded-lexicographic order of the multi-index
//! (total degree first, then lexicographic with `α_1` descending).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Smallest supported expansion order; heat flux needs `|α| = 3`.
pub const MIN_ORDER: usize = 3;

/// Hard cap on projection sweeps in [`grad_normalize`].
pub const GRAD_NORMALIZE_MAX_ITERS: usize = 30;

/// Relative tolerance on the Grad constraints.
pub const GRAD_TOLERANCE: f64 = 1e-12;

const NONE: usize = usize::MAX;

/// Multi-index `α ∈ ℕ³`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub [usize; 3]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0, 0, 0]);

    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    /// `α! = α_1! α_2! α_3!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    pub fn unit(d: usize) -> Self {
        let mut a = [0; 3];
        a[d] = 1;
        MultiIndex(a)
    }

    pub fn add(self, other: MultiIndex) -> Self {
        MultiIndex([
            self.0[0] + other.0[0],
            self.0[1] + other.0[1],
            self.0[2] + other.0[2],
        ])
    }
}

impl From<[usize; 3]> for MultiIndex {
    fn from(a: [usize; 3]) -> Self {
        MultiIndex(a)
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Number of multi-indices with `|α| ≤ order`.
pub fn coefficient_count(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

/// Probabilists' Hermite polynomial `He_n(x)` by the three-term recurrence.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(x), ..., He_n(x)` written into `out[..=n]`.
pub fn hermite_table(n: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n >= 1 {
        out[1] = x;
    }
    for k in 1..n {
        out[k + 1] = x * out[k] - k as f64 * out[k - 1];
    }
}

fn root_cache() -> &'static Mutex<HashMap<usize, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Largest real root of `He_degree`, cached per degree.
pub fn max_hermite_root(degree: usize) -> f64 {
    assert!(degree >= 1, "He_0 has no roots");
    if let Some(&r) = root_cache().lock().unwrap().get(&degree) {
        return r;
    }
    let r = compute_max_root(degree);
    root_cache().lock().unwrap().insert(degree, r);
    r
}

fn compute_max_root(n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    // Newton from the right of the largest root converges monotonically:
    // He_n is increasing and convex there.
    let mut x = (4.0 * n as f64 + 2.0).sqrt();
    for _ in 0..200 {
        let p = hermite_eval(n, x);
        let dp = n as f64 * hermite_eval(n - 1, x);
        let step = p / dp;
        x -= step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    x
}

/// Parameters `(ϖ, ϑ)` of the Hermite basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisParams {
    pub mean: [f64; 3],
    pub spread: f64,
}

impl BasisParams {
    pub fn new(mean: [f64; 3], spread: f64) -> Result<Self> {
        if !(spread > 0.0) || !spread.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "basis spread must be positive, got {spread}"
            )));
        }
        Ok(BasisParams { mean, spread })
    }

    /// Component-wise arithmetic mean of two parameter sets.
    pub fn midpoint(a: &BasisParams, b: &BasisParams) -> BasisParams {
        BasisParams {
            mean: [
                0.5 * (a.mean[0] + b.mean[0]),
                0.5 * (a.mean[1] + b.mean[1]),
                0.5 * (a.mean[2] + b.mean[2]),
            ],
            spread: 0.5 * (a.spread + b.spread),
        }
    }
}

/// Index tables for one expansion order, shared by every representation of
/// that order.
#[derive(Debug)]
pub struct MomentSpace {
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: Vec<usize>,
    raise: [Vec<usize>; 3],
    lower: [Vec<usize>; 3],
    factorials: Vec<f64>,
    degrees: Vec<usize>,
    // Per dimension: runs of flat indices with the other two components fixed,
    // ordered by the component along that dimension.
    line_offsets: [Vec<usize>; 3],
    line_indices: [Vec<usize>; 3],
    max_root: f64,
}

fn space_cache() -> &'static Mutex<HashMap<usize, Arc<MomentSpace>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<MomentSpace>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl MomentSpace {
    /// Shared tables for `order`, built on first use.
    pub fn shared(order: usize) -> Arc<MomentSpace> {
        let mut cache = space_cache().lock().unwrap();
        cache
            .entry(order)
            .or_insert_with(|| Arc::new(MomentSpace::build(order)))
            .clone()
    }

    fn build(order: usize) -> MomentSpace {
        let side = order + 1;
        let mut indices = Vec::with_capacity(coefficient_count(order));
        for n in 0..=order {
            for a1 in (0..=n).rev() {
                for a2 in (0..=n - a1).rev() {
                    indices.push(MultiIndex([a1, a2, n - a1 - a2]));
                }
            }
        }
        let mut lookup = vec![NONE; side * side * side];
        for (k, a) in indices.iter().enumerate() {
            lookup[(a.0[0] * side + a.0[1]) * side + a.0[2]] = k;
        }
        let find = |a: [usize; 3]| -> usize {
            if a.iter().sum::<usize>() > order {
                NONE
            } else {
                lookup[(a[0] * side + a[1]) * side + a[2]]
            }
        };
        let mut raise: [Vec<usize>; 3] = Default::default();
        let mut lower: [Vec<usize>; 3] = Default::default();
        for d in 0..3 {
            raise[d] = indices
                .iter()
                .map(|a| {
                    let mut b = a.0;
                    b[d] += 1;
                    find(b)
                })
                .collect();
            lower[d] = indices
                .iter()
                .map(|a| {
                    if a.0[d] == 0 {
                        NONE
                    } else {
                        let mut b = a.0;
                        b[d] -= 1;
                        find(b)
                    }
                })
                .collect();
        }
        let mut line_offsets: [Vec<usize>; 3] = Default::default();
        let mut line_indices: [Vec<usize>; 3] = Default::default();
        for d in 0..3 {
            let (p, q) = match d {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            line_offsets[d].push(0);
            for bp in 0..=order {
                for bq in 0..=order - bp {
                    for k in 0..=order - bp - bq {
                        let mut a = [0; 3];
                        a[p] = bp;
                        a[q] = bq;
                        a[d] = k;
                        line_indices[d].push(find(a));
                    }
                    line_offsets[d].push(line_indices[d].len());
                }
            }
        }
        let factorials = indices.iter().map(MultiIndex::factorial).collect();
        let degrees = indices.iter().map(MultiIndex::degree).collect();
        MomentSpace {
            order,
            indices,
            lookup,
            raise,
            lower,
            factorials,
            degrees,
            line_offsets,
            line_indices,
            max_root: max_hermite_root(order + 1),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Flat position of `α`, if `|α| ≤ order`.
    pub fn index_of(&self, a: impl Into<MultiIndex>) -> Option<usize> {
        let a = a.into();
        if a.degree() > self.order {
            return None;
        }
        let side = self.order + 1;
        Some(self.lookup[(a.0[0] * side + a.0[1]) * side + a.0[2]])
    }

    /// Flat position of `α + e_d`, if still within the order.
    #[inline]
    pub fn raise(&self, k: usize, d: usize) -> Option<usize> {
        let r = self.raise[d][k];
        (r != NONE).then_some(r)
    }

    /// Flat position of `α - e_d`, if `α_d > 0`.
    #[inline]
    pub fn lower(&self, k: usize, d: usize) -> Option<usize> {
        let r = self.lower[d][k];
        (r != NONE).then_some(r)
    }

    pub fn factorials(&self) -> &[f64] {
        &self.factorials
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `C_{M+1}`, the largest root of `He_{M+1}`.
    pub fn max_root(&self) -> f64 {
        self.max_root
    }

    /// Iterate the coefficient runs along dimension `d`.
    pub(crate) fn lines(&self, d: usize) -> impl Iterator<Item = &[usize]> + '_ {
        self.line_offsets[d]
            .windows(2)
            .map(move |w| &self.line_indices[d][w[0]..w[1]])
    }

    /// Re-express `coeffs` (in basis `from`) in basis `to`, in place.
    ///
    /// All raw moments of order `≤ M` are preserved. The map is a product
    /// of three mean translations and one spread change, each a finite
    /// recurrence along coefficient runs.
    pub fn project_in_place(&self, coeffs: &mut [f64], from: &BasisParams, to: &BasisParams) {
        debug_assert_eq!(coeffs.len(), self.len());
        for d in 0..3 {
            let delta = from.mean[d] - to.mean[d];
            if delta != 0.0 {
                self.mean_shift(coeffs, d, delta);
            }
        }
        let tau = from.spread - to.spread;
        if tau != 0.0 {
            for d in 0..3 {
                self.spread_shift(coeffs, d, tau);
            }
        }
    }

    // f'_β = Σ_k f_{β - k e_d} δ^k / k!
    fn mean_shift(&self, coeffs: &mut [f64], d: usize, delta: f64) {
        let mut pw = [0.0; 64];
        let n = self.order + 1;
        let pw = &mut pw[..n.min(64)];
        if n > 64 {
            // orders beyond 63 are far outside any practical use
            panic!("expansion order {} too large", self.order);
        }
        pw[0] = 1.0;
        for k in 1..n {
            pw[k] = pw[k - 1] * delta / k as f64;
        }
        for line in self.lines(d) {
            for m in (1..line.len()).rev() {
                let mut acc = coeffs[line[m]];
                for k in 1..=m {
                    acc += coeffs[line[m - k]] * pw[k];
                }
                coeffs[line[m]] = acc;
            }
        }
    }

    // f'_β = Σ_k f_{β - 2k e_d} (τ/2)^k / k!
    fn spread_shift(&self, coeffs: &mut [f64], d: usize, tau: f64) {
        let n = self.order / 2 + 1;
        let mut pw = [0.0; 64];
        pw[0] = 1.0;
        for k in 1..n {
            pw[k] = pw[k - 1] * 0.5 * tau / k as f64;
        }
        for line in self.lines(d) {
            for m in (2..line.len()).rev() {
                let mut acc = coeffs[line[m]];
                let mut k = 1;
                while 2 * k <= m {
                    acc += coeffs[line[m - 2 * k]] * pw[k];
                    k += 1;
                }
                coeffs[line[m]] = acc;
            }
        }
    }

    /// Flat positions of `e_1, e_2, e_3`.
    pub fn first_order(&self) -> [usize; 3] {
        [1, 2, 3]
    }

    /// Flat positions of `2e_1, 2e_2, 2e_3`.
    pub fn second_diag(&self) -> [usize; 3] {
        [
            self.index_of([2, 0, 0]).unwrap(),
            self.index_of([0, 2, 0]).unwrap(),
            self.index_of([0, 0, 2]).unwrap(),
        ]
    }
}

/// Truncated Hermite expansion together with its basis parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentRep {
    pub order: usize,
    pub params: BasisParams,
    pub coeffs: Vec<f64>,
}

impl MomentRep {
    /// All-zero representation in the given basis.
    pub fn zeros(order: usize, params: BasisParams) -> Self {
        MomentRep {
            order,
            params,
            coeffs: vec![0.0; coefficient_count(order)],
        }
    }

    pub fn density(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn space(&self) -> Arc<MomentSpace> {
        MomentSpace::shared(self.order)
    }

    /// Coefficient of `α`, zero beyond the order.
    pub fn coeff(&self, a: impl Into<MultiIndex>) -> f64 {
        let a = a.into();
        if a.degree() > self.order {
            return 0.0;
        }
        let space = self.space();
        self.coeffs[space.index_of(a).unwrap()]
    }

    /// Raw mean velocity and temperature of the represented function.
    pub fn velocity_and_temperature(&self) -> ([f64; 3], f64) {
        let space = self.space();
        velocity_and_temperature(&space, &self.coeffs, &self.params)
    }
}

/// Mean velocity and temperature from raw moments of order ≤ 2.
pub(crate) fn velocity_and_temperature(
    space: &MomentSpace,
    coeffs: &[f64],
    params: &BasisParams,
) -> ([f64; 3], f64) {
    let rho = coeffs[0];
    let e = space.first_order();
    let s = space.second_diag();
    let mut u = params.mean;
    let mut defect = 0.0;
    let mut trace = 0.0;
    for d in 0..3 {
        u[d] += coeffs[e[d]] / rho;
        defect += coeffs[e[d]] * coeffs[e[d]] / rho;
        trace += coeffs[s[d]];
    }
    let theta = params.spread + (2.0 * trace - defect) / (3.0 * rho);
    (u, theta)
}

/// Macroscopic quantities of a Grad-normalized representation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroState {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
    pub sigma: [[f64; 3]; 3],
    pub q: [f64; 3],
}

impl MacroState {
    /// Read macroscopic quantities without checking the Grad constraints.
    pub(crate) fn from_normalized(space: &MomentSpace, rep: &MomentRep) -> MacroState {
        let c = &rep.coeffs;
        let mut sigma = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut a = [0; 3];
                a[i] += 1;
                a[j] += 1;
                let v = c[space.index_of(a).unwrap()];
                sigma[i][j] = if i == j { 2.0 * v } else { v };
            }
        }
        let mut q = [0.0; 3];
        for i in 0..3 {
            let mut a = [0; 3];
            a[i] = 3;
            let mut acc = 2.0 * c[space.index_of(a).unwrap()];
            for d in 0..3 {
                let mut b = [0; 3];
                b[d] += 2;
                b[i] += 1;
                acc += c[space.index_of(b).unwrap()];
            }
            q[i] = acc;
        }
        MacroState {
            rho: c[0],
            u: rep.params.mean,
            theta: rep.params.spread,
            sigma,
            q,
        }
    }
}

/// Check the Grad constraints with relative tolerance `tol`; returns the
/// scaled violations `(|f_e| / (ρ√ϑ), |Σ f_2e| / (ρϑ))`.
pub fn grad_violation(space: &MomentSpace, rep: &MomentRep) -> (f64, f64) {
    let c = &rep.coeffs;
    let rho = c[0].abs();
    let sqrt_t = rep.params.spread.sqrt();
    let e = space.first_order();
    let s = space.second_diag();
    let first = e.iter().map(|&k| c[k].abs()).fold(0.0, f64::max) / (rho * sqrt_t);
    let trace = (c[s[0]] + c[s[1]] + c[s[2]]).abs() / (rho * rep.params.spread);
    (first, trace)
}

/// Density, velocity, temperature, stress, and heat flux of `rep`.
///
/// `rep` must be Grad-normalized; violations beyond a relative `1e-10`
/// are reported.
pub fn extract_macro(rep: &MomentRep) -> Result<MacroState> {
    extract_macro_with_tolerance(rep, 1e-10)
}

pub fn extract_macro_with_tolerance(rep: &MomentRep, tol: f64) -> Result<MacroState> {
    let space = rep.space();
    let (first, trace) = grad_violation(&space, rep);
    if !(first <= tol && trace <= tol) {
        return Err(Error::NotGradNormalized {
            first_order: first,
            trace,
        });
    }
    Ok(MacroState::from_normalized(&space, rep))
}

/// Local Maxwellian in its own Grad basis: `f_0 = ρ`, all else zero.
pub fn maxwellian_rep(rho: f64, u: [f64; 3], theta: f64, order: usize) -> Result<MomentRep> {
    if order < MIN_ORDER {
        return Err(Error::InvalidParameter(format!(
            "expansion order must be at least {MIN_ORDER}, got {order}"
        )));
    }
    if !(rho > 0.0) || !(theta > 0.0) || !rho.is_finite() || !theta.is_finite() {
        return Err(Error::NonphysicalState {
            cell: None,
            rho,
            theta,
        });
    }
    let mut rep = MomentRep::zeros(order, BasisParams::new(u, theta)?);
    rep.coeffs[0] = rho;
    Ok(rep)
}

/// Re-express `rep` in the basis `to`, preserving raw moments up to the order.
pub fn project(rep: &MomentRep, to: &BasisParams) -> Result<MomentRep> {
    if !(to.spread > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target spread must be positive, got {}",
            to.spread
        )));
    }
    let mut out = rep.clone();
    rep.space()
        .project_in_place(&mut out.coeffs, &rep.params, to);
    out.params = *to;
    Ok(out)
}

/// Move `rep` into the Grad basis of the function it represents.
pub fn grad_normalize(rep: &MomentRep) -> Result<MomentRep> {
    let mut out = rep.clone();
    grad_normalize_in_place(&rep.space(), &mut out)?;
    Ok(out)
}

pub(crate) fn grad_normalize_in_place(space: &MomentSpace, rep: &mut MomentRep) -> Result<()> {
    for _ in 0..GRAD_NORMALIZE_MAX_ITERS {
        let rho = rep.coeffs[0];
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::NonphysicalState {
                cell: None,
                rho,
                theta: f64::NAN,
            });
        }
        let (first, trace) = grad_violation(space, rep);
        if first <= GRAD_TOLERANCE && trace <= GRAD_TOLERANCE {
            return Ok(());
        }
        let (u, theta) = velocity_and_temperature(space, &rep.coeffs, &rep.params);
        if !(theta > 0.0) || !theta.is_finite() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonphysicalState {
                cell: None,
                rho,
                theta,
            });
        }
        let to = BasisParams { mean: u, spread: theta };
        space.project_in_place(&mut rep.coeffs, &rep.params, &to);
        rep.params = to;
    }
    Ok(())
}

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
#[allow(dead_code)]
pub(crate) mod oracle;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rep(rng: &mut ChaCha8Rng, order: usize) -> MomentRep {
        let params = BasisParams {
            mean: [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.0],
            spread: rng.gen_range(0.8..1.2),
        };
        let mut rep = MomentRep::zeros(order, params);
        for c in rep.coeffs.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        rep.coeffs[0] = 2.0 + rng.gen::<f64>();
        rep
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_eval(2, 0.0), -1.0);
        assert_eq!(hermite_eval(3, 2.0), 2.0);
        assert_eq!(hermite_eval(4, 1.0), -2.0);
    }

    #[test]
    fn max_roots_against_bisection() {
        assert_eq!(max_hermite_root(2), 1.0);
        assert_relative_eq!(
            max_hermite_root(4),
            (3.0 + 6f64.sqrt()).sqrt(),
            max_relative = 1e-14
        );
        for n in 1..=26 {
            let r = oracle::bisect_max_root(n);
            assert_relative_eq!(max_hermite_root(n), r, epsilon = 1e-11);
        }
        assert!((max_hermite_root(6) - 3.324257).abs() < 1e-6);
    }

    #[test]
    fn counts_and_ordering() {
        for m in 3..=12 {
            let space = MomentSpace::shared(m);
            assert_eq!(space.len(), coefficient_count(m));
            for w in space.indices().windows(2) {
                assert!(w[0].degree() <= w[1].degree());
            }
            for (k, a) in space.indices().iter().enumerate() {
                assert_eq!(space.index_of(*a), Some(k));
            }
        }
        assert_eq!(coefficient_count(5), 56);
        let space = MomentSpace::shared(3);
        assert_eq!(space.indices()[1], MultiIndex([1, 0, 0]));
        assert_eq!(space.indices()[3], MultiIndex([0, 0, 1]));
    }

    #[test]
    fn maxwellian_round_trip() {
        let rep = maxwellian_rep(1.0, [0.0; 3], 1.0, 5).unwrap();
        assert_eq!(rep.coeffs.len(), 56);
        assert_eq!(rep.coeffs.iter().filter(|c| **c != 0.0).count(), 1);
        let m = extract_macro(&rep).unwrap();
        assert_eq!(m.rho, 1.0);
        assert_eq!(m.sigma, [[0.0; 3]; 3]);
        assert_eq!(m.q, [0.0; 3]);

        let theta = 273.0 * 1.380649e-23 / 6.63e-26;
        let rep = maxwellian_rep(2.0, [50.0, 0.0, 0.0], theta, 10).unwrap();
        assert_eq!(rep.coeffs[0], 2.0);
        assert_eq!(rep.params.mean, [50.0, 0.0, 0.0]);

        assert!(maxwellian_rep(-1.0, [0.0; 3], 1.0, 3).is_err());
        assert!(maxwellian_rep(1.0, [0.0; 3], 0.0, 3).is_err());
        assert!(maxwellian_rep(1.0, [0.0; 3], 1.0, 2).is_err());
    }

    #[test]
    fn macro_from_coefficients() {
        let mut rep = maxwellian_rep(2.0, [0.0; 3], 1.0, 3).unwrap();
        let space = rep.space();
        rep.coeffs[space.index_of([1, 1, 0]).unwrap()] = 0.3;
        let m = extract_macro(&rep).unwrap();
        assert_eq!(m.sigma[0][1], 0.3);
        assert_eq!(m.sigma[1][0], 0.3);

        let mut rep = maxwellian_rep(1.0, [0.0; 3], 1.0, 3).unwrap();
        rep.coeffs[space.index_of([3, 0, 0]).unwrap()] = 0.1;
        rep.coeffs[space.index_of([1, 2, 0]).unwrap()] = 0.2;
        let m = extract_macro(&rep).unwrap();
        assert_relative_eq!(m.q[0], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn extract_rejects_unnormalized() {
        let mut rep = maxwellian_rep(1.0, [0.0; 3], 1.0, 3).unwrap();
        rep.coeffs[1] = 0.1;
        assert!(matches!(
            extract_macro(&rep),
            Err(Error::NotGradNormalized { .. })
        ));
    }

    #[test]
    fn projection_identity_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = random_rep(&mut rng, 6);
        let out = project(&rep, &rep.params).unwrap();
        assert_eq!(out, rep);
        assert!(project(&rep, &BasisParams { mean: [0.0; 3], spread: 0.0 }).is_err());
    }

    #[test]
    fn projection_preserves_raw_moments() {
        let rep = maxwellian_rep(1.0, [0.0; 3], 1.0, 5).unwrap();
        let to = BasisParams { mean: [0.5, 0.0, 0.0], spread: 1.0 };
        let out = project(&rep, &to).unwrap();
        let before = oracle::raw_moments(&rep, 5);
        let after = oracle::raw_moments(&out, 5);
        assert_relative_eq!(after[&[0, 0, 0]], 1.0, epsilon = 1e-12);
        assert!(after[&[1, 0, 0]].abs() < 1e-12);
        for (beta, v) in &before {
            assert!((v - after[beta]).abs() <= 1e-12 * (1.0 + v.abs()), "{beta:?}");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let rep = random_rep(&mut rng, 5);
            let to = BasisParams {
                mean: [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), 0.1],
                spread: rng.gen_range(0.6..1.6),
            };
            let out = project(&rep, &to).unwrap();
            let a = oracle::raw_moments(&rep, 5);
            let b = oracle::raw_moments(&out, 5);
            for (beta, v) in &a {
                assert!((v - b[beta]).abs() <= 1e-10 * (1.0 + v.abs()), "{beta:?}");
            }
        }
    }

    #[test]
    fn grad_normalize_cases() {
        let rep = maxwellian_rep(1.0, [0.0; 3], 1.0, 5).unwrap();
        assert_eq!(grad_normalize(&rep).unwrap(), rep);

        let shifted = project(&rep, &BasisParams { mean: [0.2, 0.0, 0.0], spread: 1.0 }).unwrap();
        let back = grad_normalize(&shifted).unwrap();
        assert!(back.params.mean[0].abs() < 1e-14);
        assert_relative_eq!(back.params.spread, 1.0, max_relative = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pert = random_rep(&mut rng, 5);
        pert.coeffs[1] = 0.3;
        let out = grad_normalize(&pert).unwrap();
        let space = out.space();
        for d in 0..3 {
            assert!(out.coeffs[space.first_order()[d]].abs() < 1e-10);
        }
        let s = space.second_diag();
        assert!((out.coeffs[s[0]] + out.coeffs[s[1]] + out.coeffs[s[2]]).abs() < 1e-10);

        let mut bad = maxwellian_rep(1.0, [0.0; 3], 1.0, 3).unwrap();
        bad.coeffs[0] = -1.0;
        assert!(matches!(
            grad_normalize(&bad),
            Err(Error::NonphysicalState { .. })
        ));
        let mut cold = maxwellian_rep(1.0, [0.0; 3], 1.0, 3).unwrap();
        cold.coeffs[space_index(3, [2, 0, 0])] = -3.0;
        assert!(grad_normalize(&cold).is_err());
    }

    fn space_index(order: usize, a: [usize; 3]) -> usize {
        MomentSpace::shared(order).index_of(a).unwrap()
    }

    proptest! {
        #[test]
        fn recurrence_consistency(n in 1usize..12, x in -5.0f64..5.0) {
            let lhs = hermite_eval(n + 1, x);
            let rhs = x * hermite_eval(n, x) - n as f64 * hermite_eval(n - 1, x);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn projection_round_trip(seed in 0u64..1000, dx in -1.0f64..1.0, dy in -1.0f64..1.0,
                                 ratio in 0.5f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = random_rep(&mut rng, 6);
            let s = rep.params.spread;
            let to = BasisParams {
                mean: [rep.params.mean[0] + dx * s.sqrt() / 2f64.sqrt(),
                       rep.params.mean[1] + dy * s.sqrt() / 2f64.sqrt(), 0.0],
                spread: s * ratio,
            };
            let back = project(&project(&rep, &to).unwrap(), &rep.params).unwrap();
            for (a, b) in rep.coeffs.iter().zip(&back.coeffs) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b);
            }
        }

        #[test]
        fn grad_normalize_idempotent(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = random_rep(&mut rng, 5);
            let once = grad_normalize(&rep).unwrap();
            let twice = grad_normalize(&once).unwrap();
            for (a, b) in once.coeffs.iter().zip(&twice.coeffs) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn maxwellian_extract_identity(rho in 0.1f64..10.0, ux in -2.0f64..2.0, uy in -2.0f64..2.0,
                                       theta in 0.1f64..5.0, order in 3usize..9) {
            let m = extract_macro(&maxwellian_rep(rho, [ux, uy, 0.0], theta, order).unwrap()).unwrap();
            prop_assert_eq!(m.rho, rho);
            prop_assert_eq!(m.u, [ux, uy, 0.0]);
            prop_assert_eq!(m.theta, theta);
            prop_assert_eq!(m.sigma, [[0.0; 3]; 3]);
            prop_assert_eq!(m.q, [0.0; 3]);
        }
    }
}
