//! Exterior tails beyond the truncation radius `X`.
//!
//! Past `X` the potential vanishes, so exterior solutions of interest are finite
//! sums of `c K_ν(κ r) / K_ν(κ X)` with `Re κ > 0`. Integrals of products of two
//! such terms have closed forms (Lommel integrals) written through the
//! logarithmic derivative `h(x) = x K_ν'(x) / K_ν(x)`, which stays well scaled even
//! when `K_ν` itself under- or overflows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::special::{self, bessel_k_ratio, k_scaled_sequence};

/// `coeff · K_ν(kappa r) / K_ν(kappa X)` for `r >= X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTerm {
    pub coeff: Complex64,
    pub kappa: Complex64,
}

impl TailTerm {
    pub fn new(coeff: Complex64, kappa: Complex64) -> Self {
        Self { coeff, kappa }
    }

    pub fn value(&self, order: u32, truncation: f64, r: f64) -> Result<Complex64> {
        Ok(self.coeff * bessel_k_ratio(order, self.kappa * r, self.kappa * truncation)?)
    }

    /// Derivative in `r` of [`TailTerm::value`].
    pub fn derivative(&self, order: u32, truncation: f64, r: f64) -> Result<Complex64> {
        let x = self.kappa * r;
        Ok(self.value(order, truncation, r)? * log_derivative(order, x)? / r)
    }

    /// `-κ²`: the term solves `(-Δ_m - mu) T = 0` beyond `X`.
    pub fn mu(&self) -> Complex64 {
        -self.kappa * self.kappa
    }
}

/// `h(x) = x K_ν'(x) / K_ν(x)`.
pub fn log_derivative(order: u32, x: Complex64) -> Result<Complex64> {
    let n = order as usize;
    let seq = k_scaled_sequence(n + 1, x)?;
    let below = if n == 0 { seq[1] } else { seq[n - 1] };
    Ok(-x * 0.5 * (below + seq[n + 1]) / seq[n])
}

/// `∫_X^∞ K_ν(a s) K_ν(b s) s ds / (K_ν(aX) K_ν(bX))` for `Re a, Re b > 0`.
pub fn lommel_normalized(order: u32, a: Complex64, b: Complex64, x: f64) -> Result<Complex64> {
    let nu2 = (order as f64).powi(2);
    let delta = 0.5 * (a - b);
    let mid = 0.5 * (a + b);
    if delta.norm() < 5e-4 * mid.norm() {
        // Taylor expansion in delta around the midpoint, even terms only
        let xm = mid * x;
        let h = log_derivative(order, xm)?;
        let h1 = (xm * xm + nu2 - h * h) / xm;
        let h2 = 1.0 - nu2 / (xm * xm) - 2.0 * h * h1 / xm + h * h / (xm * xm);
        let h3 = 2.0 * nu2 / (xm * xm * xm) - 2.0 * (h1 * h1 + h * h2) / xm + 4.0 * h * h1 / (xm * xm)
            - 2.0 * h * h / (xm * xm * xm);
        let e2 = delta * delta * x * x;
        return Ok(-x * (h1 + e2 * h3 / 6.0) / (2.0 * mid));
    }
    let ra = log_derivative(order, a * x)?;
    let rb = log_derivative(order, b * x)?;
    // ρ = h / X, so X (ρ_b - ρ_a) = h_b - h_a
    Ok((rb - ra) / (a * a - b * b))
}

/// `∫_X^∞ u v̄ s ds` for tails `u` and `v` (or `∫ u v s ds` when `conjugate` is false).
pub fn tail_pairing(order: u32, u: &[TailTerm], v: &[TailTerm], x: f64, conjugate: bool) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in u {
        for q in v {
            let (coeff, kappa) = if conjugate {
                (q.coeff.conj(), q.kappa.conj())
            } else {
                (q.coeff, q.kappa)
            };
            acc += p.coeff * coeff * lommel_normalized(order, p.kappa, kappa, x)?;
        }
    }
    Ok(acc)
}

/// Adds `term` into `terms`, merging with an existing term of identical wavenumber.
pub fn push_term(terms: &mut Vec<TailTerm>, term: TailTerm) {
    if term.coeff == Complex64::new(0.0, 0.0) {
        return;
    }
    match terms.iter_mut().find(|t| t.kappa == term.kappa) {
        Some(t) => t.coeff += term.coeff,
        None => terms.push(term),
    }
}

/// Value at `r` of a sum of tail terms.
pub fn tail_sum(order: u32, terms: &[TailTerm], x: f64, r: f64) -> Result<Complex64> {
    terms.iter().map(|t| t.value(order, x, r)).sum()
}

/// Guard used by tail producers: a decaying wavenumber must have `Re κ > 0`.
pub(crate) fn check_decaying(kappa: Complex64) -> bool {
    kappa.re > 0.0 && kappa.norm() <= special::MAX_ARGUMENT
}
