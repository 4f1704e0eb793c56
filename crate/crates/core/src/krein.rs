//! Resolvent of the coupled operator from the decoupled Dirichlet problems.
//!
//! Per mode, with `P` the interior and `D` the exterior Poisson solution of unit
//! boundary value, `s = (M + τ)^{-1}`, `u = (A_Ω - λ)^{-1} f` and
//! `u' = (A_Ω' - λ)^{-1} f'`:
//!
//! ```text
//! g  = u  - s (t + t') P
//! g' = u' - s (t + t') D        t = -∂_ν u(R),  t' = -∂_ν u'(R)
//! ```
//!
//! The compressed resolvent is the interior part with `f' = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{KreinError, Result};
use crate::field::{
    boundary_inner_product, dirichlet_trace, field_norm, inner_product, mode_norm, neumann_trace_field, BoundaryData,
    Field, FieldSide, ModeFunction,
};
use crate::geometry::{Problem, Side};
use crate::radial::{self, dirichlet_resolvent_apply, dtn_exterior, dtn_interior, gamma_apply, neumann_trace};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `|M + τ| < SINGULAR_TOLERANCE (|M| + |τ| + 1)` counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// `(M_m(λ), τ_m(λ))`.
pub fn dtn_pair(problem: &Problem, m: i32, lambda: Complex64) -> Result<(Complex64, Complex64)> {
    Ok((dtn_interior(problem, m, lambda)?, dtn_exterior(problem, m, lambda)?))
}

/// `1 / (M_m(λ) + τ_m(λ))`.
pub fn mt_inverse(problem: &Problem, m: i32, lambda: Complex64) -> Result<Complex64> {
    let (mi, tau) = dtn_pair(problem, m, lambda)?;
    invert_sum(m, lambda, mi, tau)
}

fn invert_sum(m: i32, lambda: Complex64, mi: Complex64, tau: Complex64) -> Result<Complex64> {
    let d = mi + tau;
    if d.norm() < SINGULAR_TOLERANCE * (mi.norm() + tau.norm() + 1.0) {
        return Err(KreinError::NearSingular {
            mode: m,
            lambda,
            magnitude: d.norm(),
        });
    }
    Ok(ONE / d)
}

/// `Θ(λ)`: every block is the diagonal operator `(M + τ)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaBlock {
    pub lambda: Complex64,
    /// `s_m` for `m = -N..=N`.
    pub coefficients: Vec<(i32, Complex64)>,
}

impl ThetaBlock {
    pub fn new(problem: &Problem, lambda: Complex64) -> Result<Self> {
        let coefficients = problem
            .spec()
            .modes()
            .map(|m| Ok((m, mt_inverse(problem, m, lambda)?)))
            .collect::<Result<_>>()?;
        Ok(Self { lambda, coefficients })
    }

    pub fn coefficient(&self, m: i32) -> Result<Complex64> {
        self.coefficients
            .iter()
            .find(|(k, _)| *k == m)
            .map(|(_, s)| *s)
            .ok_or_else(|| KreinError::InvalidArgument(format!("mode {m} outside the cutoff")))
    }

    /// `Θ (a, b) = (s (a + b), s (a + b))`.
    pub fn apply(&self, a: &BoundaryData, b: &BoundaryData) -> Result<(BoundaryData, BoundaryData)> {
        if a.mode_cutoff != b.mode_cutoff {
            return Err(KreinError::Mismatch("boundary data with different cutoffs".into()));
        }
        let mut out = BoundaryData::zeros(a.radius, a.mode_cutoff);
        for (m, x) in a.iter() {
            out.set(m, self.coefficient(m)? * (x + b.get(m)?))?;
        }
        Ok((out.clone(), out))
    }
}

/// Test hooks that deliberately break the coupling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CouplingOptions {
    /// Uses `+∂_r` instead of `-∂_r` as the exterior Neumann trace in `t'`.
    pub flip_exterior_normal: bool,
}

/// Interior part of `(A - λ)^{-1} (f, 0)`.
pub fn compressed_resolvent_apply(problem: &Problem, lambda: Complex64, f: &Field) -> Result<Field> {
    if f.side() != FieldSide::Interior {
        return Err(KreinError::Mismatch(
            "compressed resolvent needs an interior field".into(),
        ));
    }
    radial::kappa(lambda)?;
    let grid = problem.grid();
    let mut out = Field::new(FieldSide::Interior);
    for fm in f.modes(Side::Interior) {
        let m = fm.mode;
        let s = mt_inverse(problem, m, lambda)?;
        let u = dirichlet_resolvent_apply(problem, lambda, fm, false)?;
        let t = -neumann_trace(grid, &u);
        let p = gamma_apply(problem, Side::Interior, m, lambda, ONE, false)?;
        let mut g = u;
        g.axpy(-s * t, &p)?;
        out.insert(grid, g)?;
    }
    Ok(out)
}

/// `(A - λ)^{-1} (f, f')` for a whole-space field.
pub fn full_resolvent_apply(problem: &Problem, lambda: Complex64, f: &Field) -> Result<Field> {
    full_resolvent_apply_with(problem, lambda, f, CouplingOptions::default())
}

pub fn full_resolvent_apply_with(
    problem: &Problem,
    lambda: Complex64,
    f: &Field,
    options: CouplingOptions,
) -> Result<Field> {
    if f.side() != FieldSide::Whole {
        return Err(KreinError::Mismatch("full resolvent needs a whole-space field".into()));
    }
    radial::kappa(lambda)?;
    let grid = problem.grid();
    let mut out = Field::new(FieldSide::Whole);
    for m in f.mode_numbers() {
        let s = mt_inverse(problem, m, lambda)?;
        let fi = f
            .mode(Side::Interior, m)
            .cloned()
            .unwrap_or_else(|| ModeFunction::zeros(m, Side::Interior, grid));
        let fe = f
            .mode(Side::Exterior, m)
            .cloned()
            .unwrap_or_else(|| ModeFunction::zeros(m, Side::Exterior, grid));
        let u = dirichlet_resolvent_apply(problem, lambda, &fi, false)?;
        let ue = dirichlet_resolvent_apply(problem, lambda, &fe, false)?;
        let t = -neumann_trace(grid, &u);
        let te = if options.flip_exterior_normal {
            -ue.boundary_derivative(grid)
        } else {
            -neumann_trace(grid, &ue)
        };
        let c = s * (t + te);
        let p = gamma_apply(problem, Side::Interior, m, lambda, ONE, false)?;
        let d = gamma_apply(problem, Side::Exterior, m, lambda, ONE, false)?;
        let mut g = u;
        g.axpy(-c, &p)?;
        let mut ge = ue;
        ge.axpy(-c, &d)?;
        out.insert(grid, g)?;
        out.insert(grid, ge)?;
    }
    Ok(out)
}

/// Field-level Poisson operator `γ(λ) φ` (or `γ̃` when `conjugated`).
pub fn poisson_apply(
    problem: &Problem,
    side: Side,
    lambda: Complex64,
    phi: &BoundaryData,
    conjugated: bool,
) -> Result<Field> {
    let grid = problem.grid();
    let mut out = Field::new(match side {
        Side::Interior => FieldSide::Interior,
        Side::Exterior => FieldSide::Exterior,
    });
    let norm = (2.0 * PI).sqrt();
    for (m, value) in phi.iter() {
        out.insert(grid, gamma_apply(problem, side, m, lambda, value / norm, conjugated)?)?;
    }
    Ok(out)
}

/// Field-level `γ(λ)^* f = -Γ^N (Ã - conj λ)^{-1} f` (roles swapped when `conjugated`).
pub fn poisson_adjoint_apply(
    problem: &Problem,
    side: Side,
    lambda: Complex64,
    f: &Field,
    conjugated: bool,
) -> Result<BoundaryData> {
    let mut out = BoundaryData::zeros(problem.interface_radius(), problem.mode_cutoff());
    let norm = (2.0 * PI).sqrt();
    for fm in f.modes(side) {
        out.set(
            fm.mode,
            radial::gamma_star_apply(problem, lambda, fm, conjugated)? * norm,
        )?;
    }
    Ok(out)
}

/// `|(γ φ, f) - (φ, γ^* f)| / (‖γ φ‖ ‖f‖)`.
pub fn adjoint_pairing_residual(
    problem: &Problem,
    side: Side,
    lambda: Complex64,
    phi: &BoundaryData,
    f: &Field,
    conjugated: bool,
) -> Result<f64> {
    let grid = problem.grid();
    let gp = poisson_apply(problem, side, lambda, phi, conjugated)?;
    let lhs = inner_product(grid, &gp, f)?;
    let rhs = boundary_inner_product(phi, &poisson_adjoint_apply(problem, side, lambda, f, conjugated)?)?;
    let scale = field_norm(grid, &gp)? * field_norm(grid, f)?;
    Ok((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE))
}

/// Interface mismatch of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GluingResidual {
    pub mode: i32,
    /// `|g(R⁻) - g(R⁺)|`.
    pub dirichlet: f64,
    /// `|∂_ν g(R⁻) + ∂_ν g(R⁺)|` with each side's outward normal.
    pub neumann: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GluingReport {
    pub modes: Vec<GluingResidual>,
    /// Largest one-sided value or normal derivative at `R`.
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GluingReport {
    pub fn max_dirichlet(&self) -> f64 {
        self.modes.iter().map(|r| r.dirichlet).fold(0.0, f64::max)
    }

    pub fn max_neumann(&self) -> f64 {
        self.modes.iter().map(|r| r.neumann).fold(0.0, f64::max)
    }
}

/// Relative tolerance of [`gluing_check`].
pub const GLUING_TOLERANCE: f64 = 1e-8;

/// Checks `Γ^D g = Γ^D g'` and `Γ^N g + Γ^N g' = 0` mode by mode.
pub fn gluing_check(problem: &Problem, g: &Field) -> GluingReport {
    let grid = problem.grid();
    let mut modes = Vec::new();
    let mut scale = 0.0f64;
    for m in g.mode_numbers() {
        let one_sided = |side: Side| -> (Complex64, Complex64) {
            match g.mode(side, m) {
                Some(u) => (u.boundary_value(), neumann_trace(grid, u)),
                None => (ZERO, ZERO),
            }
        };
        let (vi, ni) = one_sided(Side::Interior);
        let (ve, ne) = one_sided(Side::Exterior);
        scale = scale.max(vi.norm()).max(ve.norm()).max(ni.norm()).max(ne.norm());
        modes.push(GluingResidual {
            mode: m,
            dirichlet: (vi - ve).norm(),
            neumann: (ni + ne).norm(),
        });
    }
    let bound = GLUING_TOLERANCE * scale;
    let pass = modes.iter().all(|r| r.dirichlet <= bound && r.neumann <= bound);
    GluingReport {
        modes,
        scale,
        tolerance: GLUING_TOLERANCE,
        pass,
    }
}

/// `(L f, g) - (f, L' g) - [(Γ^D f, Γ^N g) - (Γ^N f, Γ^D g)]` on one side, where
/// `L' = L̃` when `conjugated_on_g` and `L' = L` otherwise.
pub fn green_identity_residual(
    problem: &Problem,
    f: &Field,
    g: &Field,
    side: Side,
    conjugated_on_g: bool,
) -> Result<Complex64> {
    let grid = problem.grid();
    let n = problem.mode_cutoff();
    let f = f.restrict(side);
    let g = g.restrict(side);
    let lf = apply_operator_field(problem, &f, ZERO, false)?;
    let lg = apply_operator_field(problem, &g, ZERO, conjugated_on_g)?;
    let volume = inner_product(grid, &lf, &g)? - inner_product(grid, &f, &lg)?;
    let boundary = boundary_inner_product(
        &dirichlet_trace(grid, &f, side, n)?,
        &neumann_trace_field(grid, &g, side, n)?,
    )? - boundary_inner_product(
        &neumann_trace_field(grid, &f, side, n)?,
        &dirichlet_trace(grid, &g, side, n)?,
    )?;
    Ok(volume - boundary)
}

/// `(L - λ) f` mode by mode.
pub fn apply_operator_field(problem: &Problem, f: &Field, lambda: Complex64, conjugated: bool) -> Result<Field> {
    let grid = problem.grid();
    let mut out = Field::new(f.side());
    for side in [Side::Interior, Side::Exterior] {
        for u in f.modes(side) {
            out.insert(grid, radial::apply_operator(problem, u, lambda, conjugated)?)?;
        }
    }
    Ok(out)
}

/// Which resolvent family [`resolvent_identity_residual`] exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolventFamily {
    Compressed,
    Full,
}

/// `‖R(λ)f - R(μ)f - (λ - μ) R(λ) R(μ) f‖ / ‖R(λ) f‖`.
///
/// Holds up to discretization error for a true resolvent; the compressed family
/// violates it because `R_c(λ) R_c(μ) ≠ P_Ω R(λ) R(μ)|_Ω`.
pub fn resolvent_identity_residual(
    problem: &Problem,
    family: ResolventFamily,
    lambda: Complex64,
    mu: Complex64,
    f: &Field,
) -> Result<f64> {
    let apply = |z: Complex64, x: &Field| match family {
        ResolventFamily::Compressed => compressed_resolvent_apply(problem, z, x),
        ResolventFamily::Full => full_resolvent_apply(problem, z, x),
    };
    let grid = problem.grid();
    let a = apply(lambda, f)?;
    let b = apply(mu, f)?;
    let ab = apply(lambda, &b)?;
    let residual = a.sub(&b)?.combine(ONE, &ab, -(lambda - mu))?;
    Ok(field_norm(grid, &residual)? / field_norm(grid, &a)?.max(f64::MIN_POSITIVE))
}

/// Size of the Kreĭn correction term of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectionNorm {
    pub mode: i32,
    /// `|s_m|`.
    pub theta: f64,
    /// `‖γ_m(λ)‖` for unit boundary value `u(R) = 1`.
    pub poisson: f64,
    /// `|t_m|`.
    pub trace: f64,
    pub norm: f64,
}

/// `|s_m| ‖γ_m(λ)‖ |t_m|` for every mode of an interior source.
pub fn correction_norms(problem: &Problem, lambda: Complex64, f: &Field) -> Result<Vec<CorrectionNorm>> {
    let grid = problem.grid();
    let mut out = Vec::new();
    for fm in f.modes(Side::Interior) {
        let m = fm.mode;
        let s = mt_inverse(problem, m, lambda)?;
        let u = dirichlet_resolvent_apply(problem, lambda, fm, false)?;
        let t = -neumann_trace(grid, &u);
        let p = gamma_apply(problem, Side::Interior, m, lambda, ONE, false)?;
        let poisson = (2.0 * PI).sqrt() * mode_norm(grid, &p)?;
        out.push(CorrectionNorm {
            mode: m,
            theta: s.norm(),
            poisson,
            trace: t.norm(),
            norm: s.norm() * poisson * t.norm(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ProblemSpec, RadialPotential};
    use crate::special::{bessel_i, bessel_k};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn problem(v: Complex64, n: u32, points: usize) -> Problem {
        let potential = if v == ZERO {
            RadialPotential::zero()
        } else {
            RadialPotential::disk(1.0, v)
        };
        Problem::new(ProblemSpec::new(1.0, 4.0, n, points, potential)).unwrap()
    }

    fn bump(m: i32, side: Side, p: &Problem, center: f64, phase: f64) -> ModeFunction {
        ModeFunction::from_fn(m, side, p.grid(), |r| {
            let w = r.powi(m.abs()) * (-4.0 * (r - center).powi(2)).exp();
            Complex64::from_polar(w, phase * r)
        })
    }

    #[test]
    fn mt_inverse_free_value() {
        let p = problem(ZERO, 4, 100);
        let s = mt_inverse(&p, 0, c(-1.0, 0.0)).unwrap();
        assert!((s.re + 0.533_044_674_956_268_6).abs() < 1e-13);
        for m in -4..=4 {
            for lambda in [c(-0.01, 0.0), c(-3.0, 7.0), c(2.0, 0.5)] {
                assert!(mt_inverse(&p, m, lambda).is_ok());
            }
        }
    }

    #[test]
    fn theta_blocks_are_identical() {
        let p = problem(c(2.0, 1.0), 3, 60);
        let theta = ThetaBlock::new(&p, c(-2.0, 0.5)).unwrap();
        let mut a = BoundaryData::zeros(1.0, 3);
        let mut b = BoundaryData::zeros(1.0, 3);
        for m in -3..=3 {
            a.set(m, c(m as f64, 1.0)).unwrap();
            b.set(m, c(0.5, -(m as f64))).unwrap();
        }
        let (x, y) = theta.apply(&a, &b).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.get(2).unwrap(), theta.coefficient(2).unwrap() * c(2.5, -1.0));
    }

    #[test]
    fn compressed_matches_free_green_kernel() {
        // free whole-space mode kernel: G_m(r, s) = I_m(κ r_<) K_m(κ r_>)
        let p = problem(ZERO, 0, 200);
        let lambda = c(-1.0, 0.0);
        let grid = p.grid();
        let f = bump(0, Side::Interior, &p, 0.5, 0.0);
        let mut field = Field::new(FieldSide::Interior);
        field.insert(grid, f.clone()).unwrap();
        let g = compressed_resolvent_apply(&p, lambda, &field).unwrap();
        let g0 = g.mode(Side::Interior, 0).unwrap();
        // quadrature of the kernel on a much finer grid with exact source samples
        let n = 20_000;
        let h = 1.0 / n as f64;
        let src = |s: f64| (-4.0 * (s - 0.5f64).powi(2)).exp();
        let i0 = |x: f64| bessel_i(0, c(x, 0.0)).unwrap().value.re;
        let k0 = |x: f64| bessel_k(0, c(x, 0.0)).unwrap().value.re;
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for (j, &r) in grid.interior.nodes.iter().enumerate().step_by(10) {
            let mut acc = 0.0;
            for k in 0..=n {
                let s = k as f64 * h;
                let w = if k == 0 || k == n {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let kern = if s == 0.0 {
                    0.0
                } else if s < r {
                    i0(s) * k0(r)
                } else {
                    i0(r) * k0(s)
                };
                acc += w * kern * src(s) * s;
            }
            let want = acc * h / 3.0;
            err = err.max((g0.values[j].re - want).abs() + g0.values[j].im.abs());
            scale = scale.max(want.abs());
        }
        assert!(err < 1e-8 * scale, "{err} vs {scale}");
    }

    #[test]
    fn zero_source_gives_zero() {
        let p = problem(c(2.0, 1.0), 2, 60);
        let mut f = Field::new(FieldSide::Interior);
        f.insert(p.grid(), ModeFunction::zeros(1, Side::Interior, p.grid()))
            .unwrap();
        let g = compressed_resolvent_apply(&p, c(-2.0, 0.5), &f).unwrap();
        assert!(g
            .mode(Side::Interior, 1)
            .unwrap()
            .values
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn compressed_adjoint_for_real_potential() {
        let p = problem(c(-3.0, 0.0), 2, 150);
        let grid = p.grid();
        let lambda = c(-1.5, 0.7);
        let mut f = Field::new(FieldSide::Interior);
        let mut h = Field::new(FieldSide::Interior);
        for m in -2..=2 {
            f.insert(grid, bump(m, Side::Interior, &p, 0.4, 1.0 + m as f64))
                .unwrap();
            h.insert(grid, bump(m, Side::Interior, &p, 0.7, -0.5 * m as f64))
                .unwrap();
        }
        let a = inner_product(grid, &compressed_resolvent_apply(&p, lambda, &f).unwrap(), &h).unwrap();
        let b = inner_product(grid, &f, &compressed_resolvent_apply(&p, lambda.conj(), &h).unwrap()).unwrap();
        assert!((a - b).norm() < 1e-8 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn full_resolvent_inverts_compactly_supported_profile() {
        let p = problem(ZERO, 0, 200);
        let lambda = c(-2.0, 0.5);
        let grid = p.grid();
        // w = (1 - r²)² on the disk, zero outside
        let f = ModeFunction::from_fn(0, Side::Interior, grid, |r| {
            c(8.0 - 16.0 * r * r, 0.0) - lambda * (1.0 - r * r).powi(2)
        });
        let mut field = Field::new(FieldSide::Whole);
        field.insert(grid, f).unwrap();
        let g = full_resolvent_apply(&p, lambda, &field).unwrap();
        for (j, &r) in grid.interior.nodes.iter().enumerate() {
            let want = (1.0 - r * r).powi(2);
            assert!((g.mode(Side::Interior, 0).unwrap().values[j] - want).norm() < 1e-9);
        }
        assert!(g
            .mode(Side::Exterior, 0)
            .unwrap()
            .values
            .iter()
            .all(|v| v.norm() < 1e-9));
        assert!(gluing_check(&p, &g).pass);
    }

    #[test]
    fn compression_consistency() {
        let p = problem(c(2.0, 1.0), 3, 100);
        let grid = p.grid();
        let lambda = c(-2.0, 0.5);
        let mut f = Field::new(FieldSide::Interior);
        for m in -3..=3 {
            f.insert(grid, bump(m, Side::Interior, &p, 0.6, 0.3 * m as f64))
                .unwrap();
        }
        let compressed = compressed_resolvent_apply(&p, lambda, &f).unwrap();
        let full = full_resolvent_apply(&p, lambda, &f.extend_by_zero(grid)).unwrap();
        let diff = full.restrict(Side::Interior).sub(&compressed).unwrap();
        assert!(field_norm(grid, &diff).unwrap() <= 1e-12 * field_norm(grid, &compressed).unwrap());
    }

    #[test]
    fn exterior_source_gives_homogeneous_interior() {
        let p = problem(ZERO, 1, 100);
        let grid = p.grid();
        let lambda = c(-1.0, 0.3);
        let mut f = Field::new(FieldSide::Whole);
        f.insert(grid, bump(1, Side::Exterior, &p, 2.0, 0.0)).unwrap();
        let g = full_resolvent_apply(&p, lambda, &f).unwrap();
        let gi = g.mode(Side::Interior, 1).unwrap();
        let zero = ModeFunction::zeros(1, Side::Interior, grid);
        let res = radial::ode_residual(&p, gi, &zero, lambda, false).unwrap();
        let scale = gi.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(res < 1e-10 * scale.max(1.0));
        assert!(scale > 1e-6);
        assert!(gluing_check(&p, &g).pass);
    }

    #[test]
    fn gluing_examples() {
        let p = problem(ZERO, 2, 100);
        let grid = p.grid();
        let mut g = Field::new(FieldSide::Whole);
        g.insert(grid, ModeFunction::from_fn(0, Side::Interior, grid, |_| ONE))
            .unwrap();
        g.insert(grid, ModeFunction::zeros(0, Side::Exterior, grid)).unwrap();
        let report = gluing_check(&p, &g);
        assert!(!report.pass);
        assert!((report.modes[0].dirichlet - 1.0).abs() < 1e-15);

        let mut h = Field::new(FieldSide::Whole);
        h.insert(
            grid,
            ModeFunction::from_jet_fn(2, Side::Interior, grid, |r| {
                (c(r * r, 0.0), c(2.0 * r, 0.0), c(2.0, 0.0))
            }),
        )
        .unwrap();
        h.insert(
            grid,
            ModeFunction::from_jet_fn(2, Side::Exterior, grid, |r| {
                (c(r.powi(-2), 0.0), c(-2.0 * r.powi(-3), 0.0), c(6.0 * r.powi(-4), 0.0))
            }),
        )
        .unwrap();
        let report = gluing_check(&p, &h);
        assert!(report.modes[0].dirichlet < 1e-15);
        assert!((report.modes[0].neumann - 4.0).abs() < 1e-14);
        assert!(!report.pass);
    }

    #[test]
    fn broken_sign_fails_gluing() {
        let p = problem(c(2.0, 1.0), 1, 100);
        let grid = p.grid();
        let mut f = Field::new(FieldSide::Whole);
        for side in [Side::Interior, Side::Exterior] {
            f.insert(grid, bump(1, side, &p, 1.2, 0.5)).unwrap();
        }
        let lambda = c(-2.0, 0.5);
        assert!(gluing_check(&p, &full_resolvent_apply(&p, lambda, &f).unwrap()).pass);
        let broken = full_resolvent_apply_with(
            &p,
            lambda,
            &f,
            CouplingOptions {
                flip_exterior_normal: true,
            },
        )
        .unwrap();
        let report = gluing_check(&p, &broken);
        assert!(!report.pass);
        assert!(report.max_dirichlet() <= 1e-12 * report.scale);
    }

    #[test]
    fn green_identity_examples() {
        let p = problem(ZERO, 0, 100);
        let grid = p.grid();
        let mut f = Field::new(FieldSide::Interior);
        f.insert(
            grid,
            ModeFunction::from_jet_fn(0, Side::Interior, grid, |r| {
                (c(1.0 - r * r, 0.0), c(-2.0 * r, 0.0), c(-2.0, 0.0))
            }),
        )
        .unwrap();
        let r = green_identity_residual(&p, &f, &f, Side::Interior, true).unwrap();
        assert!(r.norm() < 1e-8);
        let zero = Field::new(FieldSide::Interior);
        assert_eq!(
            green_identity_residual(&p, &f, &zero, Side::Interior, true).unwrap(),
            ZERO
        );
    }

    #[test]
    fn green_identity_with_solver_output() {
        let p = problem(c(2.0, 1.0), 1, 200);
        let grid = p.grid();
        let lambda = c(-2.0, 0.5);
        for side in [Side::Interior, Side::Exterior] {
            let mut f = Field::new(FieldSide::Whole);
            f.insert(
                grid,
                ModeFunction::from_jet_fn(1, side, grid, |r| {
                    let e = (-2.0 * r * r).exp();
                    let u = r * e;
                    let d1 = (1.0 - 4.0 * r * r) * e;
                    let d2 = (16.0 * r * r - 12.0) * r * e;
                    (c(u, 0.0), c(d1, 0.0), c(d2, 0.0))
                }),
            )
            .unwrap();
            let mut src = Field::new(FieldSide::Whole);
            src.insert(grid, bump(1, side, &p, 1.3, 0.7)).unwrap();
            let g = full_resolvent_apply(&p, lambda, &src.extend_by_zero(grid)).unwrap();
            let res = green_identity_residual(&p, &f, &g, side, true).unwrap();
            let scale = field_norm(grid, &f.restrict(side)).unwrap() * field_norm(grid, &g.restrict(side)).unwrap();
            assert!(res.norm() < 1e-6 * scale, "{side:?}: {res}");
            // L on both sides differs by ((V - conj V) f, g) inside the well
            if side == Side::Interior {
                assert!(green_identity_residual(&p, &f, &g, side, false).unwrap().norm() > 1e-3 * scale);
            }
        }
    }

    #[test]
    fn adjoint_pairing_both_sides() {
        let p = problem(c(2.0, 1.0), 2, 150);
        let grid = p.grid();
        let lambda = c(-2.0, 0.5);
        let mut phi = BoundaryData::zeros(1.0, 2);
        for m in -2..=2 {
            phi.set(m, c(1.0 + m as f64, 0.5 - m as f64)).unwrap();
        }
        for side in [Side::Interior, Side::Exterior] {
            let mut f = Field::new(match side {
                Side::Interior => FieldSide::Interior,
                Side::Exterior => FieldSide::Exterior,
            });
            for m in -2..=2 {
                f.insert(grid, bump(m, side, &p, 0.8 + 0.4 * m as f64, 0.2)).unwrap();
            }
            for conj in [false, true] {
                let r = adjoint_pairing_residual(&p, side, lambda, &phi, &f, conj).unwrap();
                assert!(r < 1e-10, "{side:?} {conj}: {r}");
            }
        }
    }

    #[test]
    fn full_family_satisfies_resolvent_identity() {
        let p = problem(c(2.0, 1.0), 2, 150);
        let grid = p.grid();
        let mut f = Field::new(FieldSide::Whole);
        for m in -2..=2 {
            f.insert(grid, bump(m, Side::Interior, &p, 0.5, 0.3)).unwrap();
            f.insert(grid, bump(m, Side::Exterior, &p, 1.5, -0.3)).unwrap();
        }
        let (l, mu) = (c(-2.0, 0.5), c(-1.0, -1.0));
        let full = resolvent_identity_residual(&p, ResolventFamily::Full, l, mu, &f).unwrap();
        assert!(full < 1e-8, "{full}");
        let compressed =
            resolvent_identity_residual(&p, ResolventFamily::Compressed, l, mu, &f.restrict(Side::Interior)).unwrap();
        assert!(compressed > 1e-3, "{compressed}");
    }

    #[test]
    fn correction_norms_decay() {
        let p = problem(c(2.0, 1.0), 10, 100);
        let grid = p.grid();
        let mut f = Field::new(FieldSide::Interior);
        for m in -10..=10 {
            f.insert(
                grid,
                ModeFunction::from_fn(m, Side::Interior, grid, |r| c(r.powi(m.abs()), 0.0)),
            )
            .unwrap();
        }
        let norms = correction_norms(&p, c(-2.0, 0.5), &f).unwrap();
        let by_order = |k: i32| norms.iter().find(|n| n.mode == k).unwrap().norm;
        for k in 4..10 {
            assert!(by_order(k + 1) < by_order(k));
            assert!((by_order(k) - by_order(-k)).abs() <= 1e-12 * by_order(k));
        }
    }
}
