//! Per-mode solutions of `(L_m - λ) u = f` on either side of the interface.
//!
//! `L_m = -(d²/dr² + (1/r) d/dr - m²/r²) + V(r)` with `V` replaced by `conj V` for
//! the conjugated expression. On every constant-potential layer the homogeneous
//! solutions are `I_ν(κ_j r)` and `K_ν(κ_j r)`, `κ_j = √(V_j - λ)` with `Re κ_j >= 0`
//! (ties on the imaginary axis go to `Im κ_j > 0`), and solutions are carried
//! from layer to layer by matching value and derivative. Layers with
//! `|κ_j| r_end < 1e-8` use the limiting power basis instead.
//!
//! Normalizations: the regular solution behaves like `r^ν` at the origin (entire
//! in `λ`), the decaying solution equals `K_ν(κ r)/K_ν(κ b)` past the last
//! breakpoint `b`.
//!
//! Boundary conventions: interior `Γ^N = +∂_r` at `R`, exterior `Γ^N = -∂_r`.

use num_complex::Complex64;

use crate::error::{KreinError, Result};
use crate::field::ModeFunction;
use crate::geometry::{check_mode, layer_index, Layer, Problem, RadialGrid, Side};
use crate::special::{bessel_i, bessel_i_scaled, bessel_k_scaled, cdiv};
use crate::tail::{self, push_term, TailTerm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative width of the band around `[0, ∞)` treated as essential spectrum.
pub const CUT_TOLERANCE: f64 = 1e-10;

/// Relative threshold below which a boundary value counts as a Dirichlet eigenvalue.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Nodes sampled when estimating `max |u|` for the degeneracy test.
const DEGENERACY_SAMPLES: usize = 64;

/// `dist(λ, [0, ∞)) < CUT_TOLERANCE (1 + |λ|)`.
pub fn on_cut(lambda: Complex64) -> bool {
    let dist = if lambda.re >= 0.0 {
        lambda.im.abs()
    } else {
        lambda.norm()
    };
    dist < CUT_TOLERANCE * (1.0 + lambda.norm())
}

/// Principal `√(-λ)` with `Re κ > 0`.
pub fn kappa(lambda: Complex64) -> Result<Complex64> {
    if on_cut(lambda) || !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(KreinError::EssentialSpectrum { lambda });
    }
    Ok(principal_root(-lambda))
}

/// Square root with `Re >= 0`, and `Im > 0` when the real part vanishes.
pub(crate) fn principal_root(w: Complex64) -> Complex64 {
    let s = w.sqrt();
    if s.re < 0.0 || (s.re == 0.0 && s.im < 0.0) {
        -s
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    end: f64,
    potential: Complex64,
    kappa: Complex64,
    power: bool,
    /// `f1 = I_ν(κ r) e^{-Re κ i_shift}` keeps values near unity on the layer.
    i_shift: f64,
    /// `f2 = K_ν(κ r) e^{Re κ k_shift}`.
    k_shift: f64,
}

impl Piece {
    fn new(layer: &Layer, lambda: Complex64) -> Self {
        let kappa = principal_root(layer.potential - lambda);
        Self {
            start: layer.start,
            end: layer.end,
            potential: layer.potential,
            kappa,
            power: layer.end.is_finite() && kappa.norm() * layer.end < 1e-8,
            i_shift: if layer.end.is_finite() { layer.end } else { layer.start },
            k_shift: if layer.start > 0.0 { layer.start } else { layer.end },
        }
    }

    /// `[[f1, f1'], [f2, f2']]` at `r`; entries not requested are left zero.
    fn basis(&self, nu: u32, r: f64, need: [bool; 2]) -> Result<[[Complex64; 2]; 2]> {
        let mut out = [[ZERO; 2]; 2];
        if self.power {
            let n = nu as f64;
            if need[0] {
                out[0] = if nu == 0 {
                    [ONE, ZERO]
                } else {
                    let v = (r / self.i_shift).powi(nu as i32);
                    [v.into(), (n * v / r).into()]
                };
            }
            if need[1] {
                out[1] = if nu == 0 {
                    [(r / self.k_shift).ln().into(), (1.0 / r).into()]
                } else {
                    let v = (r / self.k_shift).powi(-(nu as i32));
                    [v.into(), (-n * v / r).into()]
                };
            }
        } else {
            let z = self.kappa * r;
            let re = self.kappa.re;
            if need[0] {
                let b = bessel_i_scaled(nu, z)?;
                let s = (re * (r - self.i_shift)).exp();
                out[0] = [b.value * s, b.derivative * s * self.kappa];
            }
            if need[1] {
                let b = bessel_k_scaled(nu, z)?;
                let s = (-re * (r - self.k_shift)).exp();
                out[1] = [b.value * s, b.derivative * s * self.kappa];
            }
        }
        Ok(out)
    }

    /// Coefficients `(a, b)` with `a f1 + b f2 = u`, `a f1' + b f2' = du` at `r`.
    fn coefficients(&self, nu: u32, r: f64, u: Complex64, du: Complex64) -> Result<[Complex64; 2]> {
        let [[f1, d1], [f2, d2]] = self.basis(nu, r, [true, true])?;
        let det = f1 * d2 - f2 * d1;
        if det.norm() == 0.0 || !det.re.is_finite() || !det.im.is_finite() {
            return Err(KreinError::Overflow(format!(
                "layer basis degenerate at r = {r} (kappa = {})",
                self.kappa
            )));
        }
        Ok([cdiv(u * d2 - f2 * du, det), cdiv(f1 * du - d1 * u, det)])
    }
}

/// A homogeneous solution of one side, stored as per-layer coefficients.
#[derive(Debug, Clone)]
pub(crate) struct RadialSolution {
    nu: u32,
    side: Side,
    lambda: Complex64,
    pieces: Vec<Piece>,
    coeffs: Vec<[Complex64; 2]>,
}

impl RadialSolution {
    fn pieces(problem: &Problem, side: Side, lambda: Complex64, conjugated: bool) -> Vec<Piece> {
        problem
            .layers(side, conjugated)
            .iter()
            .map(|l| Piece::new(l, lambda))
            .collect()
    }

    /// Propagates `anchor_coeffs` on layer `anchor` to all other layers.
    fn propagate(
        nu: u32,
        side: Side,
        lambda: Complex64,
        pieces: Vec<Piece>,
        anchor: usize,
        anchor_coeffs: [Complex64; 2],
    ) -> Result<Self> {
        let mut sol = Self {
            nu,
            side,
            lambda,
            coeffs: vec![[ZERO; 2]; pieces.len()],
            pieces,
        };
        sol.coeffs[anchor] = anchor_coeffs;
        for j in anchor + 1..sol.pieces.len() {
            let b = sol.pieces[j].start;
            let (u, du) = sol.state_in(j - 1, b)?;
            sol.coeffs[j] = sol.pieces[j].coefficients(nu, b, u, du)?;
        }
        for j in (0..anchor).rev() {
            let b = sol.pieces[j].end;
            let (u, du) = sol.state_in(j + 1, b)?;
            sol.coeffs[j] = sol.pieces[j].coefficients(nu, b, u, du)?;
        }
        Ok(sol)
    }

    /// Regular at the origin, `~ r^ν`.
    fn regular(problem: &Problem, m: i32, lambda: Complex64, conjugated: bool) -> Result<Self> {
        let nu = check_mode(m)?;
        let pieces = Self::pieces(problem, Side::Interior, lambda, conjugated);
        let p0 = pieces[0];
        let c = if p0.power {
            Complex64::from(p0.i_shift.powi(nu as i32))
        } else {
            // ν! (2/κ)^ν e^{Re κ i_shift} turns f1 into r^ν (1 + O(r²))
            let mut c = Complex64::new((p0.kappa.re * p0.i_shift).exp(), 0.0);
            for k in 1..=nu {
                c *= 2.0 * k as f64 / p0.kappa;
            }
            c
        };
        Self::propagate(nu, Side::Interior, lambda, pieces, 0, [c, ZERO])
    }

    /// Decaying at infinity, equal to `K_ν(κ r) / K_ν(κ b)` on the last layer.
    fn decaying(problem: &Problem, m: i32, lambda: Complex64, conjugated: bool) -> Result<Self> {
        let nu = check_mode(m)?;
        kappa(lambda)?;
        let pieces = Self::pieces(problem, Side::Exterior, lambda, conjugated);
        let last = pieces.len() - 1;
        let b = pieces[last].start;
        let kb = bessel_k_scaled(nu, pieces[last].kappa * b)?.value;
        Self::propagate(nu, Side::Exterior, lambda, pieces, last, [ZERO, cdiv(ONE, kb)])
    }

    /// `q(R) = 0`, `q'(R) = 1`.
    fn vanishing(problem: &Problem, side: Side, m: i32, lambda: Complex64, conjugated: bool) -> Result<Self> {
        let nu = check_mode(m)?;
        let pieces = Self::pieces(problem, side, lambda, conjugated);
        let r = problem.interface_radius();
        let anchor = match side {
            Side::Interior => pieces.len() - 1,
            Side::Exterior => 0,
        };
        let coeffs = pieces[anchor].coefficients(nu, r, ZERO, ONE)?;
        Self::propagate(nu, side, lambda, pieces, anchor, coeffs)
    }

    fn state_in(&self, j: usize, r: f64) -> Result<(Complex64, Complex64)> {
        let [a, b] = self.coeffs[j];
        let [[f1, d1], [f2, d2]] = self.pieces[j].basis(self.nu, r, [a != ZERO, b != ZERO])?;
        Ok((a * f1 + b * f2, a * d1 + b * d2))
    }

    fn piece_index(&self, r: f64) -> usize {
        if self.side == Side::Exterior && r <= self.pieces[0].start {
            return 0;
        }
        self.pieces
            .iter()
            .position(|p| r <= p.end)
            .unwrap_or(self.pieces.len() - 1)
    }

    /// `(u, u', u'')` at `r`, with `u''` from the differential equation on the owning layer.
    fn eval(&self, r: f64) -> Result<(Complex64, Complex64, Complex64)> {
        let j = self.piece_index(r);
        let (u, du) = self.state_in(j, r)?;
        let nu2 = (self.nu as f64).powi(2);
        let d2 = -du / r + (nu2 / (r * r) + self.pieces[j].potential - self.lambda) * u;
        Ok((u, du, d2))
    }

    fn sample(&self, nodes: &[f64]) -> Result<[Vec<Complex64>; 3]> {
        let mut out = [
            Vec::with_capacity(nodes.len()),
            Vec::with_capacity(nodes.len()),
            Vec::with_capacity(nodes.len()),
        ];
        for &r in nodes {
            let (u, d1, d2) = self.eval(r)?;
            out[0].push(u);
            out[1].push(d1);
            out[2].push(d2);
        }
        Ok(out)
    }

    /// Largest `|u|` over a subsample of `nodes` (at most 64 points plus the last).
    fn max_abs(&self, nodes: &[f64]) -> Result<f64> {
        let stride = (nodes.len() / DEGENERACY_SAMPLES).max(1);
        let mut max = 0.0f64;
        for &r in nodes.iter().step_by(stride).chain(nodes.last()) {
            max = max.max(self.eval(r)?.0.norm());
        }
        Ok(max)
    }

    fn tail_kappa(&self) -> Complex64 {
        self.pieces.last().map_or(ZERO, |p| p.kappa)
    }
}

/// Regular (interior) or decaying (exterior) solution with its boundary state,
/// after the Dirichlet-eigenvalue test.
fn side_solution(
    problem: &Problem,
    side: Side,
    m: i32,
    lambda: Complex64,
    conjugated: bool,
) -> Result<(RadialSolution, Complex64, Complex64)> {
    let r = problem.interface_radius();
    let sol = match side {
        Side::Interior => RadialSolution::regular(problem, m, lambda, conjugated)?,
        Side::Exterior => RadialSolution::decaying(problem, m, lambda, conjugated)?,
    };
    let (u, du, _) = sol.eval(r)?;
    let max = sol.max_abs(&problem.grid().side(side).nodes)?;
    if u.norm() < DEGENERACY_TOLERANCE * max || u.norm() == 0.0 {
        return Err(match side {
            Side::Interior => KreinError::DegenerateInterior { mode: m, lambda },
            Side::Exterior => KreinError::DegenerateExterior { mode: m, lambda },
        });
    }
    Ok((sol, u, du))
}

/// Regular and decaying solutions of one mode with their boundary values.
#[derive(Debug, Clone)]
pub struct HomogeneousBasis {
    pub mode: i32,
    pub lambda: Complex64,
    pub conjugated: bool,
    /// `~ r^{|m|}` at the origin, sampled on `(0, R]`.
    pub regular_solution: ModeFunction,
    /// `K_{|m|}(κ r)`-like, sampled on `[R, R_max]` with its analytic tail.
    pub decaying_solution: ModeFunction,
    /// `(u(R), u'(R))` of the regular solution.
    pub regular_at_interface: (Complex64, Complex64),
    /// `(u(R), u'(R))` of the decaying solution.
    pub decaying_at_interface: (Complex64, Complex64),
}

pub fn homogeneous_basis(problem: &Problem, m: i32, lambda: Complex64, conjugated: bool) -> Result<HomogeneousBasis> {
    kappa(lambda)?;
    let grid = problem.grid();
    let r = problem.interface_radius();
    let x = problem.truncation_radius();
    let reg = RadialSolution::regular(problem, m, lambda, conjugated)?;
    let dec = RadialSolution::decaying(problem, m, lambda, conjugated)?;
    let sample = |sol: &RadialSolution, side: Side| -> Result<ModeFunction> {
        let [values, first, second] = sol.sample(&grid.side(side).nodes)?;
        Ok(ModeFunction {
            mode: m,
            side,
            values,
            jet: Some(crate::field::Jet { first, second }),
            tail: Vec::new(),
        })
    };
    let regular_solution = sample(&reg, Side::Interior)?;
    let mut decaying_solution = sample(&dec, Side::Exterior)?;
    decaying_solution.tail = vec![TailTerm::new(dec.eval(x)?.0, dec.tail_kappa())];
    let (u, du, _) = reg.eval(r)?;
    let (v, dv, _) = dec.eval(r)?;
    Ok(HomogeneousBasis {
        mode: m,
        lambda,
        conjugated,
        regular_solution,
        decaying_solution,
        regular_at_interface: (u, du),
        decaying_at_interface: (v, dv),
    })
}

fn with_jet(m: i32, side: Side, [values, first, second]: [Vec<Complex64>; 3]) -> ModeFunction {
    ModeFunction {
        mode: m,
        side,
        values,
        jet: Some(crate::field::Jet { first, second }),
        tail: Vec::new(),
    }
}

/// Poisson operator of one mode: the homogeneous solution with boundary value `phi`.
pub fn gamma_apply(
    problem: &Problem,
    side: Side,
    m: i32,
    lambda: Complex64,
    phi: Complex64,
    conjugated: bool,
) -> Result<ModeFunction> {
    let (sol, u_r, _) = side_solution(problem, side, m, lambda, conjugated)?;
    let scale = cdiv(phi, u_r);
    let mut out = with_jet(m, side, sol.sample(&problem.grid().side(side).nodes)?).scale(scale);
    if side == Side::Exterior {
        let x = problem.truncation_radius();
        out.tail = vec![TailTerm::new(sol.eval(x)?.0 * scale, sol.tail_kappa())];
    }
    Ok(out)
}

/// `(A - λ)^{-1} f` for the Dirichlet realization on the side of `f`
/// (`conjugated` selects `conj V`).
pub fn dirichlet_resolvent_apply(
    problem: &Problem,
    lambda: Complex64,
    f: &ModeFunction,
    conjugated: bool,
) -> Result<ModeFunction> {
    let side = f.side;
    let m = f.mode;
    let grid = problem.grid();
    let sg = grid.side(side);
    if f.values.len() != sg.len() {
        return Err(KreinError::Mismatch(format!(
            "source mode {m} has {} samples, grid has {}",
            f.values.len(),
            sg.len()
        )));
    }
    let r_int = problem.interface_radius();
    let x = problem.truncation_radius();
    let (hom, h_r, _) = side_solution(problem, side, m, lambda, conjugated)?;
    let van = RadialSolution::vanishing(problem, side, m, lambda, conjugated)?;
    let nodes = &sg.nodes;
    let [h, dh, _] = hom.sample(nodes)?;
    let [q, dq, _] = van.sample(nodes)?;
    let nu2 = (hom.nu as f64).powi(2);
    let layers = problem.layers(side, conjugated);
    // r times the Wronskian of (left, right) solutions, evaluated at R where q = 0, q' = 1
    let w = match side {
        Side::Interior => r_int * h_r,
        Side::Exterior => -r_int * h_r,
    };
    let c = -cdiv(ONE, w);

    let hf: Vec<Complex64> = (0..nodes.len()).map(|j| h[j] * f.values[j] * nodes[j]).collect();
    let qf: Vec<Complex64> = (0..nodes.len()).map(|j| q[j] * f.values[j] * nodes[j]).collect();
    // Interior: u = c [q ∫_0^r h f s ds + h ∫_r^R q f s ds]
    // Exterior: u = c [h ∫_R^r q f s ds + q ∫_r^∞ h f s ds]
    let (near, far) = match side {
        Side::Interior => {
            let mut far = sg.cumulative_backward(&qf);
            correct_near_origin(sg, &van, &q, &f.values, &mut far)?;
            (sg.cumulative_forward(&hf), far)
        }
        Side::Exterior => {
            let mut far = sg.cumulative_backward(&hf);
            if !f.tail.is_empty() {
                let tail_kappa = hom.tail_kappa();
                let h_x = hom.eval(x)?.0;
                let beyond = h_x * tail::tail_pairing(hom.nu, &[TailTerm::new(ONE, tail_kappa)], &f.tail, x, false)?;
                for v in far.iter_mut() {
                    *v += beyond;
                }
            }
            (sg.cumulative_forward(&qf), far)
        }
    };
    let n = nodes.len();
    let mut values = Vec::with_capacity(n);
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for j in 0..n {
        let r = nodes[j];
        // (a, b) multiply (q, h) for the interior and (h, q) for the exterior
        let (alpha, beta) = (c * near[j], c * far[j]);
        let (u, du) = match side {
            Side::Interior => (alpha * q[j] + beta * h[j], alpha * dq[j] + beta * dh[j]),
            Side::Exterior => (alpha * h[j] + beta * q[j], alpha * dh[j] + beta * dq[j]),
        };
        let v = layers[layer_index(layers, side, r)].potential;
        values.push(u);
        first.push(du);
        second.push(-du / r + (nu2 / (r * r) + v - lambda) * u - f.values[j]);
    }
    let mut out = ModeFunction {
        mode: m,
        side,
        values,
        jet: Some(crate::field::Jet { first, second }),
        tail: Vec::new(),
    };
    if side == Side::Exterior {
        out.tail = resolvent_tail(hom.nu, lambda, hom.tail_kappa(), *out.values.last().unwrap(), &f.tail)?;
    }
    Ok(out)
}

/// Replaces `∫_r^R q f s ds` near the origin by product integration.
///
/// For `ν = 0` the vanishing solution contains `ln(s) I_0(κ s)` (or `ln s` in
/// the power basis) on the first layer, which spoils the Simpson rules on the
/// first panels. The logarithmic part is integrated against exact weights and
/// only the remainder is interpolated. Higher orders need no correction.
fn correct_near_origin(
    sg: &crate::geometry::SideGrid,
    van: &RadialSolution,
    q: &[Complex64],
    f: &[Complex64],
    far: &mut [Complex64],
) -> Result<()> {
    let piece = van.pieces[0];
    if van.nu > 0 {
        return Ok(());
    }
    let b = van.coeffs[0][1];
    if b == ZERO {
        return Ok(());
    }
    let (_, last, _) = sg.layer_ranges().next().expect("interior has a first layer");
    // padded indices: 0 is the origin, node j sits at j + 1
    let e0 = last + 1;
    let reach = if piece.power {
        piece.end
    } else {
        (LOG_REGION / piece.kappa.norm()).min(piece.end)
    };
    let mut top = 0;
    while top + 2 <= e0 && sg.nodes[top + 1] <= reach * (1.0 + 1e-12) {
        top += 2;
    }
    if top < 2 || e0 < 2 {
        return Ok(());
    }
    let step = sg.nodes[0];
    let log_coeff = if piece.power {
        b
    } else {
        // K_0(z) = -ln(z/2) I_0(z) + (entire function)
        -b * (piece.kappa.re * piece.k_shift).exp()
    };
    let x = |i: usize| if i == 0 { 0.0 } else { sg.nodes[i - 1] };
    let mut smooth = vec![ZERO; e0 + 1];
    let mut weight = vec![ZERO; e0 + 1];
    for i in 1..=e0 {
        let s = x(i);
        let iv = if piece.power {
            ONE
        } else {
            bessel_i(0, piece.kappa * s)?.value
        };
        let fs = f[i - 1] * s;
        weight[i] = log_coeff * iv * fs;
        smooth[i] = q[i - 1] * fs - s.ln() * weight[i];
    }
    let width = (e0 + 1).min(STENCIL);
    let mut acc = far[top - 1];
    for i in (0..top).rev() {
        let start = i.saturating_sub(STENCIL / 2 - 1).min(e0 + 1 - width);
        let (w_plain, w_log) = interval_weights(width, i - start, x(start), step);
        let mut piece_integral = ZERO;
        for k in 0..width {
            piece_integral += w_plain[k] * smooth[start + k] + w_log[k] * weight[start + k];
        }
        acc += piece_integral;
        if i > 0 {
            far[i - 1] = acc;
        }
    }
    Ok(())
}

/// Product-integration region near the origin, in units of `1/|κ|`.
const LOG_REGION: f64 = 4.0;

/// Interpolation nodes per interval in the product rule.
const STENCIL: usize = 6;

/// Weights for `∫ g ds` and `∫ ln(s) g ds` over `[x0 + k h, x0 + (k+1) h]` from
/// samples of `g` at `x0 + j h`, `j < width`, using the interpolating polynomial.
fn interval_weights(width: usize, k: usize, x0: f64, h: f64) -> ([f64; STENCIL], [f64; STENCIL]) {
    let mut plain = [0.0; STENCIL];
    let mut log = [0.0; STENCIL];
    let lagrange = |j: usize, t: f64| -> f64 {
        (0..width)
            .filter(|&i| i != j)
            .map(|i| (t - i as f64) / (j as f64 - i as f64))
            .product()
    };
    let (gx, gw) = gauss_legendre_16();
    let a = k as f64;
    for j in 0..width {
        let mut p = 0.0;
        let mut l = 0.0;
        for (&xi, &wi) in gx.iter().zip(gw.iter()) {
            let t = a + 0.5 * (xi + 1.0);
            let v = lagrange(j, t) * 0.5 * wi;
            p += v;
            if !(x0 == 0.0 && k == 0) {
                l += v * (x0 + h * t).ln();
            }
        }
        plain[j] = p * h;
        log[j] = if x0 == 0.0 && k == 0 {
            // ∫_0^1 ln(h t) ℓ_j(t) dt from the monomial coefficients of ℓ_j
            let coeffs = monomial_coefficients(width, j);
            let log_moment: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| -c / ((n + 1) * (n + 1)) as f64)
                .sum();
            h * (h.ln() * p + log_moment)
        } else {
            l * h
        };
    }
    (plain, log)
}

/// Monomial coefficients of the Lagrange polynomial `ℓ_j` on the nodes `0..width`.
fn monomial_coefficients(width: usize, j: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut denom = 1.0;
    for i in (0..width).filter(|&i| i != j) {
        let mut next = vec![0.0; poly.len() + 1];
        for (n, &c) in poly.iter().enumerate() {
            next[n + 1] += c;
            next[n] -= c * i as f64;
        }
        poly = next;
        denom *= j as f64 - i as f64;
    }
    poly.iter().map(|c| c / denom).collect()
}

fn gauss_legendre_16() -> &'static ([f64; 16], [f64; 16]) {
    static RULE: std::sync::OnceLock<([f64; 16], [f64; 16])> = std::sync::OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut x = [0.0; N];
        let mut w = [0.0; N];
        for i in 0..N {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for n in 2..=N {
                    let p2 = ((2 * n - 1) as f64 * z * p1 - (n - 1) as f64 * p0) / n as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = N as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, z);
                    for n in 2..=N {
                        let q2 = ((2 * n - 1) as f64 * z * q1 - (n - 1) as f64 * q0) / n as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let d = N as f64 * (z * q1 - q0) / (z * z - 1.0);
                    w[i] = 2.0 / ((1.0 - z * z) * d * d);
                    break;
                }
            }
            x[i] = z;
        }
        (x, w)
    })
}

/// Tail of the decaying solution of `(L - λ) u = Σ c_k T_k` beyond `X` with value `u_x` at `X`.
fn resolvent_tail(
    nu: u32,
    lambda: Complex64,
    kappa_lambda: Complex64,
    u_x: Complex64,
    source: &[TailTerm],
) -> Result<Vec<TailTerm>> {
    let mut out = Vec::new();
    let mut rest = u_x;
    for t in source {
        if t.kappa == kappa_lambda || (t.mu() - lambda).norm() < 1e-14 * (1.0 + lambda.norm()) {
            return Err(KreinError::UnsupportedTail {
                side: Side::Exterior,
                reason: format!("source tail wavenumber {} is resonant with lambda {lambda}", t.kappa),
            });
        }
        if !tail::check_decaying(t.kappa) {
            return Err(KreinError::UnsupportedTail {
                side: Side::Exterior,
                reason: format!("source tail wavenumber {} does not decay", t.kappa),
            });
        }
        let coeff = t.coeff / (t.mu() - lambda);
        push_term(&mut out, TailTerm::new(coeff, t.kappa));
        rest -= coeff;
    }
    let _ = nu;
    push_term(&mut out, TailTerm::new(rest, kappa_lambda));
    Ok(out)
}

/// `∂_ν u(R)`: `+u'(R)` on the interior, `-u'(R)` on the exterior.
pub fn neumann_trace(grid: &RadialGrid, u: &ModeFunction) -> Complex64 {
    let d = u.boundary_derivative(grid);
    match u.side {
        Side::Interior => d,
        Side::Exterior => -d,
    }
}

/// Dirichlet-to-Neumann value of one side (with `conj V` when `conjugated`).
pub fn dtn(problem: &Problem, side: Side, m: i32, lambda: Complex64, conjugated: bool) -> Result<Complex64> {
    let (_, u, du) = side_solution(problem, side, m, lambda, conjugated)?;
    Ok(match side {
        Side::Interior => -cdiv(du, u),
        Side::Exterior => cdiv(du, u),
    })
}

/// `M_m(λ) = -p'(R)/p(R)` for the regular solution `p`.
pub fn dtn_interior(problem: &Problem, m: i32, lambda: Complex64) -> Result<Complex64> {
    dtn(problem, Side::Interior, m, lambda, false)
}

/// `τ_m(λ) = d'(R)/d(R)` for the decaying solution `d`.
pub fn dtn_exterior(problem: &Problem, m: i32, lambda: Complex64) -> Result<Complex64> {
    dtn(problem, Side::Exterior, m, lambda, false)
}

/// Mode coefficient of `γ(λ)^* f` (or `γ̃(λ)^* f` when `conjugated`):
/// `-Γ^N` applied to the Dirichlet resolvent of the other expression at `conj λ`.
pub fn gamma_star_apply(problem: &Problem, lambda: Complex64, f: &ModeFunction, conjugated: bool) -> Result<Complex64> {
    let u = dirichlet_resolvent_apply(problem, lambda.conj(), f, !conjugated)?;
    Ok(-neumann_trace(problem.grid(), &u))
}

/// `(L_m - λ) u` on the grid; exterior tails are mapped analytically.
pub fn apply_operator(
    problem: &Problem,
    u: &ModeFunction,
    lambda: Complex64,
    conjugated: bool,
) -> Result<ModeFunction> {
    let grid = problem.grid();
    let nodes = &grid.side(u.side).nodes;
    let (d1, d2) = u.derivatives(grid);
    let nu2 = (u.order() as f64).powi(2);
    let layers = problem.layers(u.side, conjugated);
    let values = nodes
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let v = layers[layer_index(layers, u.side, r)].potential;
            -d2[j] - d1[j] / r + (nu2 / (r * r) + v - lambda) * u.values[j]
        })
        .collect();
    let tail = u
        .tail
        .iter()
        .map(|t| TailTerm::new(t.coeff * (t.mu() - lambda), t.kappa))
        .collect();
    Ok(ModeFunction {
        mode: u.mode,
        side: u.side,
        values,
        jet: None,
        tail,
    })
}

/// `max |(L - λ) u - f| / max |f|` on the grid.
pub fn ode_residual(
    problem: &Problem,
    u: &ModeFunction,
    f: &ModeFunction,
    lambda: Complex64,
    conjugated: bool,
) -> Result<f64> {
    let lu = apply_operator(problem, u, lambda, conjugated)?;
    if lu.values.len() != f.values.len() {
        return Err(KreinError::Mismatch("residual operands differ in length".into()));
    }
    let scale = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = lu
        .values
        .iter()
        .zip(&f.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Boundary data of the regular and decaying solutions and the matching function
/// `J = p d' - p' d = p d (M + τ)`, which is analytic in `λ` off the cut and
/// vanishes exactly at eigenvalues not shared with the interior Dirichlet problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matching {
    pub regular: (Complex64, Complex64),
    pub decaying: (Complex64, Complex64),
    pub value: Complex64,
}

pub fn matching_function(problem: &Problem, m: i32, lambda: Complex64) -> Result<Matching> {
    let r = problem.interface_radius();
    let reg = RadialSolution::regular(problem, m, lambda, false)?;
    let dec = RadialSolution::decaying(problem, m, lambda, false)?;
    let (p, dp, _) = reg.eval(r)?;
    let (d, dd, _) = dec.eval(r)?;
    Ok(Matching {
        regular: (p, dp),
        decaying: (d, dd),
        value: p * dd - dp * d,
    })
}
