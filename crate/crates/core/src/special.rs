//! Modified Bessel functions `I_m(z)` and `K_m(z)` of integer order and complex argument.
//!
//! Algorithms:
//!
//! * `I_m`: ascending power series for `|z| <= 2`; otherwise Miller's backward
//!   recurrence normalized with `e^z = I_0(z) + 2 Σ_{k≥1} I_k(z)`. Arguments with
//!   `Re z < 0` are reflected through `I_m(-z) = (-1)^m I_m(z)` so the
//!   normalization sum never cancels.
//! * `K_0`, `K_1`: the logarithmic ascending series for `|z| <= 2`; Steed's
//!   evaluation of Temme's second continued fraction otherwise. Higher orders come
//!   from the forward recurrence `K_{k+1} = K_{k-1} + (2k/z) K_k`, which is stable
//!   for the dominant solution `K`.
//!
//! Error model: relative error of a few ulps times the order for `|z| <= 50`
//! and `m <= 64`, checked against the Wronskian `I_m K_m' - I_m' K_m = -1/z`,
//! the three-term recurrence and independent quadrature oracles in the tests.
//! `I_m` is entire for integer order, so it accepts every `z` with
//! `|z| <= MAX_ARGUMENT`; `K_m` is evaluated on the closed right half plane
//! `Re z >= 0, z != 0` (principal branch).
//!
//! The scaled variants return `I_m(z) e^{-|Re z|}` and `K_m(z) e^{|Re z|}`.

use num_complex::Complex64;

use crate::error::{KreinError, Result};

/// Largest supported order.
pub const MAX_ORDER: u32 = 64;

/// Largest supported modulus of the argument. Beyond it `e^{|Re z|}` leaves the
/// double range and unscaled values are meaningless.
pub const MAX_ARGUMENT: f64 = 700.0;

const SERIES_RADIUS: f64 = 2.0;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const CF_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselValue {
    pub value: Complex64,
    pub derivative: Complex64,
}

/// Values and derivatives of `I_m` and `K_m` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: u32,
    pub argument: Complex64,
    pub value_i: Complex64,
    pub value_k: Complex64,
    pub derivative_i: Complex64,
    pub derivative_k: Complex64,
}

impl BesselEval {
    pub fn new(order: u32, z: Complex64) -> Result<Self> {
        let (i, k) = bessel_ik(order, z)?;
        Ok(Self {
            order,
            argument: z,
            value_i: i.value,
            value_k: k.value,
            derivative_i: i.derivative,
            derivative_k: k.derivative,
        })
    }

    /// `|I' K - I K' - 1/z|`, which vanishes identically.
    pub fn wronskian_residual(&self) -> f64 {
        (self.derivative_i * self.value_k - self.value_i * self.derivative_k - self.argument.inv()).norm()
    }

    /// Tolerance scale `|I K| + 1/|z|` used to make the Wronskian residual relative.
    pub fn wronskian_scale(&self) -> f64 {
        (self.value_i * self.value_k).norm() + 1.0 / self.argument.norm()
    }
}

/// `I_m(z)` and `I_m'(z)`.
pub fn bessel_i(order: u32, z: Complex64) -> Result<BesselValue> {
    check_order(order)?;
    check_modulus(z)?;
    let seq = i_scaled_sequence(order as usize + 1, z);
    let scale = z.re.abs().exp();
    Ok(i_from_sequence(order as usize, &seq, scale))
}

/// `I_m(z) e^{-|Re z|}` and its derivative with the same scaling.
pub fn bessel_i_scaled(order: u32, z: Complex64) -> Result<BesselValue> {
    check_order(order)?;
    check_modulus(z)?;
    let seq = i_scaled_sequence(order as usize + 1, z);
    Ok(i_from_sequence(order as usize, &seq, 1.0))
}

/// `K_m(z)` and `K_m'(z)` on `Re z >= 0`, `z != 0`.
pub fn bessel_k(order: u32, z: Complex64) -> Result<BesselValue> {
    check_order(order)?;
    check_modulus(z)?;
    let seq = k_scaled_sequence(order as usize + 1, z)?;
    let scale = (-z.re.abs()).exp();
    Ok(k_from_sequence(order as usize, &seq, scale))
}

/// `K_m(z) e^{|Re z|}` and its derivative with the same scaling.
pub fn bessel_k_scaled(order: u32, z: Complex64) -> Result<BesselValue> {
    check_order(order)?;
    check_modulus(z)?;
    let seq = k_scaled_sequence(order as usize + 1, z)?;
    Ok(k_from_sequence(order as usize, &seq, 1.0))
}

/// Unscaled `(I_m, K_m)` pair with derivatives, sharing one evaluation of each sequence.
pub fn bessel_ik(order: u32, z: Complex64) -> Result<(BesselValue, BesselValue)> {
    check_order(order)?;
    check_modulus(z)?;
    let n = order as usize;
    let iseq = i_scaled_sequence(n + 1, z);
    let kseq = k_scaled_sequence(n + 1, z)?;
    let e = z.re.abs().exp();
    Ok((i_from_sequence(n, &iseq, e), k_from_sequence(n, &kseq, 1.0 / e)))
}

/// Ratio `K_m(a) / K_m(b)` computed from scaled values, safe when both are tiny.
pub fn bessel_k_ratio(order: u32, a: Complex64, b: Complex64) -> Result<Complex64> {
    let ka = bessel_k_scaled(order, a)?.value;
    let kb = bessel_k_scaled(order, b)?.value;
    Ok(ka / kb * (b.re.abs() - a.re.abs()).exp())
}

/// `a / b` without the overflow of `Complex64` division when `|b|` exceeds ~1e154.
pub(crate) fn cdiv(a: Complex64, b: Complex64) -> Complex64 {
    let s = b.re.abs().max(b.im.abs());
    if s == 0.0 || !s.is_finite() {
        return a / b;
    }
    (a / s) / (b / s)
}

fn check_order(order: u32) -> Result<()> {
    if order > MAX_ORDER {
        return Err(KreinError::BesselOrder { order, max: MAX_ORDER });
    }
    Ok(())
}

fn check_modulus(z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(KreinError::BesselDomain {
            z,
            reason: "non-finite argument",
        });
    }
    if z.norm() > MAX_ARGUMENT {
        return Err(KreinError::BesselDomain {
            z,
            reason: "modulus exceeds the supported range",
        });
    }
    Ok(())
}

fn i_from_sequence(n: usize, seq: &[Complex64], scale: f64) -> BesselValue {
    let derivative = if n == 0 {
        seq[1]
    } else {
        0.5 * (seq[n - 1] + seq[n + 1])
    };
    BesselValue {
        value: seq[n] * scale,
        derivative: derivative * scale,
    }
}

fn k_from_sequence(n: usize, seq: &[Complex64], scale: f64) -> BesselValue {
    let derivative = if n == 0 {
        -seq[1]
    } else {
        -0.5 * (seq[n - 1] + seq[n + 1])
    };
    BesselValue {
        value: seq[n] * scale,
        derivative: derivative * scale,
    }
}

/// `I_k(z) e^{-|Re z|}` for `k = 0..=nmax`.
pub(crate) fn i_scaled_sequence(nmax: usize, z: Complex64) -> Vec<Complex64> {
    if z.re < 0.0 {
        let mut seq = i_scaled_sequence(nmax, -z);
        for (k, v) in seq.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
        return seq;
    }
    if z.norm() <= SERIES_RADIUS {
        let scale = (-z.re).exp();
        return (0..=nmax).map(|k| i_series(k, z) * scale).collect();
    }
    i_miller(nmax, z)
}

fn i_series(order: usize, z: Complex64) -> Complex64 {
    let half = z * 0.5;
    let mut term = Complex64::new(1.0, 0.0);
    for j in 1..=order {
        term = term * half / j as f64;
    }
    let quarter = half * half;
    let mut sum = term;
    let mut k = 0usize;
    loop {
        k += 1;
        term = term * quarter / ((k * (k + order)) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() || k > 500 {
            break;
        }
    }
    sum
}

/// Miller backward recurrence for `Re z >= 0`, `|z| > SERIES_RADIUS`.
fn i_miller(nmax: usize, z: Complex64) -> Vec<Complex64> {
    let size = (nmax as f64).max(z.norm());
    let start = 2 * ((size + 20.0 + (50.0 * size).sqrt()) as usize / 2 + 1);
    let zinv2 = 2.0 / z;
    let mut out = vec![Complex64::new(0.0, 0.0); nmax + 1];
    let mut next = Complex64::new(0.0, 0.0);
    let mut current = Complex64::new(1e-30, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in (1..=start).rev() {
        if k <= nmax {
            out[k] = current;
        }
        sum += 2.0 * current;
        let prev = next + zinv2 * (k as f64) * current;
        next = current;
        current = prev;
        if current.norm() > 1e100 {
            let s = 1e-100;
            current *= s;
            next *= s;
            sum *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = current;
    sum += current;
    // I_k e^{-Re z} = b_k e^{i Im z} / sum
    let phase = Complex64::from_polar(1.0, z.im);
    // divide through the modulus first: Complex division squares it
    let modulus = sum.norm();
    let factor = phase / (sum / modulus) / modulus;
    for v in out.iter_mut() {
        *v *= factor;
    }
    out
}

/// `K_k(z) e^{|Re z|}` for `k = 0..=nmax`.
pub(crate) fn k_scaled_sequence(nmax: usize, z: Complex64) -> Result<Vec<Complex64>> {
    if z.re < 0.0 {
        return Err(KreinError::BesselDomain {
            z,
            reason: "K requires Re z >= 0",
        });
    }
    if z.norm() == 0.0 {
        return Err(KreinError::BesselDomain {
            z,
            reason: "K is singular at z = 0",
        });
    }
    let (k0, k1) = if z.norm() <= SERIES_RADIUS {
        let (k0, k1) = k01_series(z);
        let scale = z.re.exp();
        (k0 * scale, k1 * scale)
    } else {
        k01_continued_fraction(z)?
    };
    let mut seq = Vec::with_capacity(nmax + 1);
    seq.push(k0);
    if nmax >= 1 {
        seq.push(k1);
    }
    for k in 1..nmax {
        let next = seq[k - 1] + (2.0 * k as f64) / z * seq[k];
        if !next.re.is_finite() || !next.im.is_finite() {
            return Err(KreinError::Overflow(format!("K_{} overflows at z = {z}", k + 1)));
        }
        seq.push(next);
    }
    Ok(seq)
}

fn k01_series(z: Complex64) -> (Complex64, Complex64) {
    let half = z * 0.5;
    let t = half * half;
    let log_half = half.ln();
    let i0 = i_series(0, z);
    let i1 = i_series(1, z);

    // K0 = -(ln(z/2) + γ) I0 + Σ_{k≥1} H_k t^k / (k!)^2
    let mut term = Complex64::new(1.0, 0.0);
    let mut harmonic = 0.0;
    let mut tail0 = Complex64::new(0.0, 0.0);
    // K1 = 1/z + ln(z/2) I1 - (z/4) Σ_{k≥0} (ψ(k+1) + ψ(k+2)) t^k / (k! (k+1)!)
    let mut term1 = Complex64::new(1.0, 0.0);
    let mut tail1 = Complex64::new(2.0 * -EULER_GAMMA + 1.0, 0.0);
    for k in 1..200 {
        let kf = k as f64;
        term = term * t / (kf * kf);
        harmonic += 1.0 / kf;
        let add0 = term * harmonic;
        tail0 += add0;
        term1 = term1 * t / (kf * (kf + 1.0));
        let psi_sum = 2.0 * -EULER_GAMMA + 2.0 * harmonic + 1.0 / (kf + 1.0);
        let add1 = term1 * psi_sum;
        tail1 += add1;
        if add0.norm() <= 1e-17 * tail0.norm() && add1.norm() <= 1e-17 * tail1.norm() {
            break;
        }
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + tail0;
    let k1 = z.inv() + log_half * i1 - z * 0.25 * tail1;
    (k0, k1)
}

/// Steed's algorithm for Temme's CF2 at order zero; returns scaled `(K_0, K_1)`.
fn k01_continued_fraction(z: Complex64) -> Result<(Complex64, Complex64)> {
    let one = Complex64::new(1.0, 0.0);
    let mut b = 2.0 * (one + z);
    let mut d = b.inv();
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex64::new(0.0, 0.0);
    let mut q2 = one;
    let a1 = 0.25;
    let mut q = Complex64::new(a1, 0.0);
    let mut c = Complex64::new(a1, 0.0);
    let mut a = -a1;
    let mut s = one + q * delh;
    let mut converged = false;
    for i in 2..CF_MAX_ITER {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = (b + a * d).inv();
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < 1e-17 * s.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KreinError::BesselDomain {
            z,
            reason: "continued fraction for K did not converge",
        });
    }
    h *= a1;
    // K0 e^{Re z} = sqrt(pi / 2z) e^{-i Im z} / s
    let phase = Complex64::from_polar(1.0, -z.im);
    let k0 = (Complex64::new(std::f64::consts::FRAC_PI_2, 0.0) / z).sqrt() * phase / s;
    let k1 = k0 * (z + 0.5 - h) / z;
    Ok((k0, k1))
}
