//! Optimal dual-band filter polynomials.
//!
//! For a stop-band `[0, α]` and pass-band `[β, 1]`, the degree-`t` polynomial
//! with `f(0) = 0`, `f(1) = 1` minimizing `max_{[0,α]} |f| / min_{[β,1]} |f|`
//! is a shifted, rescaled Chebyshev polynomial of the first kind:
//!
//! ```text
//! f*_t(λ) = Π_{s=0}^{t-1} (λ - r_{s,t}) / (1 - r_{s,t})
//! r_{s,t} = α (cos(π(s+½)/t) + cos(π/2t)) / (1 + cos(π/2t))
//! ```
//!
//! Equivalently `f*_t(λ) = T_t(z λ - r) / T_t(z - r)` with `r = cos(π/2t)`,
//! `z = (1 + r)/α`. The roots depend on `α` only. Finite-horizon algorithms
//! apply the factors one at a time; asymptotic ones use the three-term
//! recurrence `f̃_t = a_t((λ + b_t) f̃_{t-1} + c_t f̃_{t-2})`, which agrees with
//! `f*_t` in its three leading monomial coefficients.

use std::f64::consts::PI;

use crate::error::{GravError, Result};

/// Coefficients of one step of the three-term recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebRecurrence {
    pub t: usize,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(GravError::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Root `r_{s,t}` of the optimal degree-`degree` filter, `0 <= s < degree`.
///
/// The numerator is evaluated as `2 sin(π(t-1-s)/2t) cos(πs/2t)`, the
/// sum-to-product form of `cos(π(s+½)/t) + cos(π/2t)`, so the root at zero
/// (`s = t-1`) comes out exactly.
pub fn chebyshev_root(s: usize, degree: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if s >= degree {
        return Err(GravError::InvalidParameter(format!(
            "root index must satisfy 0 <= s < t, got s={s}, t={degree}"
        )));
    }
    Ok(root_unchecked(s, degree, alpha))
}

fn root_unchecked(s: usize, degree: usize, alpha: f64) -> f64 {
    let t = degree as f64;
    let s_f = s as f64;
    let num = 2.0 * (PI * (t - 1.0 - s_f) / (2.0 * t)).sin() * (PI * s_f / (2.0 * t)).cos();
    alpha * num / (1.0 + (PI / (2.0 * t)).cos())
}

/// All roots of `f*_t`, in schedule order `s = 0, …, t-1` (decreasing).
pub fn optimal_roots(degree: usize, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    Ok((0..degree).map(|s| root_unchecked(s, degree, alpha)).collect())
}

// cos(π/2s) computed as sin(π(s-1)/2s) so that s = 1 yields exactly 0.
fn half_angle_cos(s: usize) -> f64 {
    let s = s as f64;
    (PI * (s - 1.0) / (2.0 * s)).sin()
}

// ln g_s with g_s = T_s(z_s - r_s) / z_s^s. Log space keeps large s finite.
fn log_g(s: usize, alpha: f64) -> f64 {
    if s == 0 {
        return 0.0;
    }
    let r = half_angle_cos(s);
    let z = (1.0 + r) / alpha;
    let sf = s as f64;
    // T_s(x) = cosh(s · acosh x) for x >= 1.
    let theta = sf * (z - r).acosh();
    let log_tau = theta + (0.5 * (1.0 + (-2.0 * theta).exp())).ln();
    log_tau - sf * z.ln()
}

/// Recurrence coefficients `(a_t, b_t, c_t)` for `t >= 2`.
pub fn chebyshev_coefficients(t: usize, alpha: f64) -> Result<ChebRecurrence> {
    check_alpha(alpha)?;
    if t < 2 {
        return Err(GravError::InvalidParameter(format!(
            "recurrence coefficients need t >= 2, got {t}"
        )));
    }
    Ok(coefficients_unchecked(t, alpha))
}

fn coefficients_unchecked(t: usize, alpha: f64) -> ChebRecurrence {
    let lg = |s: usize| log_g(s, alpha);
    let a_of = |s: usize| 2.0 * (lg(s - 1) - lg(s)).exp();
    let z_of = |s: usize| (1.0 + half_angle_cos(s)) / alpha;
    let q_of = |s: usize| -half_angle_cos(s) / z_of(s);

    let a_t = a_of(t);
    let (q_t, q_prev) = (q_of(t), q_of(t - 1));
    let tf = t as f64;
    let b = tf * q_t - (tf - 1.0) * q_prev;
    let c = if t == 2 {
        0.0
    } else {
        let (z_t, z_prev) = (z_of(t), z_of(t - 1));
        let dq = q_t - q_prev;
        0.25 * a_of(t - 1)
            * (2.0 * tf * (tf - 1.0) * dq * dq - tf / (z_t * z_t) + (tf - 1.0) / (z_prev * z_prev))
    };
    ChebRecurrence {
        t,
        alpha,
        a: a_t,
        b,
        c,
    }
}

/// `f*_t(λ)` by its product form. `t = 0` is the constant 1.
pub fn eval_f_star(t: usize, alpha: f64, lambda: f64) -> f64 {
    (0..t)
        .map(|s| root_unchecked(s, t, alpha))
        .fold(1.0, |acc, r| acc * (lambda - r) / (1.0 - r))
}

/// `f̃_t(λ)` by the three-term recurrence from `f̃_0 = 1`, `f̃_1 = λ`.
pub fn eval_f_tilde(t: usize, alpha: f64, lambda: f64) -> f64 {
    match t {
        0 => 1.0,
        1 => eval_f_star(1, alpha, lambda),
        _ => {
            let (mut older, mut prev) = (1.0, eval_f_star(1, alpha, lambda));
            for s in 2..=t {
                let rec = coefficients_unchecked(s, alpha);
                let next = rec.a * ((lambda + rec.b) * prev + rec.c * older);
                older = prev;
                prev = next;
            }
            prev
        }
    }
}

/// Extremal points `γ_s` of `f*_t` on `[0, α]`, `s = 0, …, t-1`, decreasing
/// from `γ_0 = α`.
pub fn equioscillation_points(t: usize, alpha: f64) -> Vec<f64> {
    let tf = t as f64;
    let c = (PI / (2.0 * tf)).cos();
    (0..t)
        .map(|s| alpha * ((PI * s as f64 / tf).cos() + c) / (1.0 + c))
        .collect()
}

/// Polynomial in the monomial basis, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialPoly {
    pub coeffs: Vec<f64>,
}

impl MonomialPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        MonomialPoly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        MonomialPoly { coeffs: vec![c] }
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Index of the highest nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// `self · (x + shift)`.
    pub fn mul_linear(&self, shift: f64) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i + 1] += c;
            out[i] += c * shift;
        }
        MonomialPoly { coeffs: out }
    }

    pub fn scale(&self, k: f64) -> Self {
        MonomialPoly {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        MonomialPoly {
            coeffs: (0..len).map(|i| self.coeff(i) + other.coeff(i)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }
}

/// Monomial expansion of `f*_t` by multiplying out its factors.
pub fn f_star_poly(t: usize, alpha: f64) -> MonomialPoly {
    (0..t)
        .map(|s| root_unchecked(s, t, alpha))
        .fold(MonomialPoly::constant(1.0), |p, r| {
            p.mul_linear(-r).scale(1.0 / (1.0 - r))
        })
}

/// Monomial expansion of `f̃_t` by running the recurrence on coefficients.
pub fn f_tilde_poly(t: usize, alpha: f64) -> MonomialPoly {
    let p0 = MonomialPoly::constant(1.0);
    if t == 0 {
        return p0;
    }
    let mut older = p0;
    let mut prev = f_star_poly(1, alpha);
    for s in 2..=t {
        let rec = coefficients_unchecked(s, alpha);
        let next = prev
            .mul_linear(rec.b)
            .add(&older.scale(rec.c))
            .scale(rec.a);
        older = prev;
        prev = next;
    }
    prev
}

/// Monomial coefficients of a degree-`degree` polynomial given only as an
/// evaluator, by Newton interpolation at Chebyshev nodes of `[0, 1]`.
pub fn expand_poly<F: Fn(f64) -> f64>(evaluator: F, degree: usize) -> MonomialPoly {
    let n = degree + 1;
    let nodes: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (PI * (i as f64 + 0.5) / n as f64).cos())
        .collect();
    let mut dd: Vec<f64> = nodes.iter().map(|&x| evaluator(x)).collect();
    for level in 1..n {
        for i in (level..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (nodes[i] - nodes[i - level]);
        }
    }
    // Nested Newton form back to monomials.
    let mut poly = MonomialPoly::constant(dd[n - 1]);
    for i in (0..n - 1).rev() {
        poly = poly.mul_linear(-nodes[i]).add(&MonomialPoly::constant(dd[i]));
    }
    poly.coeffs.truncate(n);
    poly
}

/// Worst-case stop-band to pass-band magnitude ratio of `f`.
///
/// Both bands are sampled on uniform grids of `grid_size` points; every grid
/// local extremum of `|f|` is then refined by golden-section search so the
/// result does not depend on where the grid happens to fall. A sign change of
/// `f` inside `[β, 1]` means a root there and an unbounded ratio.
pub fn band_ratio<F: Fn(f64) -> f64>(f: F, alpha: f64, beta: f64, grid_size: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < beta && beta <= 1.0) {
        return Err(GravError::InvalidParameter(format!(
            "band_ratio needs 0 < alpha < beta <= 1, got alpha={alpha}, beta={beta}"
        )));
    }
    if grid_size < 1000 {
        return Err(GravError::InvalidParameter(format!(
            "band_ratio needs grid_size >= 1000, got {grid_size}"
        )));
    }
    let stop = band_extremum(&f, 0.0, alpha, grid_size, Extremum::Max);
    let (pass, sign_change) = {
        let xs = grid(beta, 1.0, grid_size);
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let change = vals.windows(2).any(|w| w[0] * w[1] <= 0.0);
        (band_extremum(&f, beta, 1.0, grid_size, Extremum::Min), change)
    };
    if sign_change || !(pass >= 1e-300) {
        return Err(GravError::UnboundedObjective(if sign_change { 0.0 } else { pass }));
    }
    Ok(stop / pass)
}

#[derive(Clone, Copy, PartialEq)]
enum Extremum {
    Max,
    Min,
}

fn grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    let step = (hi - lo) / (size - 1) as f64;
    (0..size)
        .map(|i| if i + 1 == size { hi } else { lo + step * i as f64 })
        .collect()
}

fn band_extremum<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, size: usize, kind: Extremum) -> f64 {
    let xs = grid(lo, hi, size);
    let mags: Vec<f64> = xs.iter().map(|&x| f(x).abs()).collect();
    let better = |a: f64, b: f64| match kind {
        Extremum::Max => a > b,
        Extremum::Min => a < b,
    };
    let mut best = mags[0];
    for &m in &mags {
        if better(m, best) {
            best = m;
        }
    }
    for i in 1..size - 1 {
        let is_local = !better(mags[i - 1], mags[i]) && !better(mags[i + 1], mags[i]);
        if is_local {
            let refined = golden_section(|x| f(x).abs(), xs[i - 1], xs[i + 1], kind);
            if better(refined, best) {
                best = refined;
            }
        }
    }
    best
}

fn golden_section<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, kind: Extremum) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let sign = if kind == Extremum::Max { -1.0 } else { 1.0 };
    let h = |x: f64| sign * g(x);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut h1, mut h2) = (h(x1), h(x2));
    for _ in 0..80 {
        if h1 < h2 {
            hi = x2;
            x2 = x1;
            h2 = h1;
            x1 = hi - inv_phi * (hi - lo);
            h1 = h(x1);
        } else {
            lo = x1;
            x1 = x2;
            h1 = h2;
            x2 = lo + inv_phi * (hi - lo);
            h2 = h(x2);
        }
    }
    sign * h1.min(h2)
}
