//! Analytic source profiles and seeded random test data.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{BoundaryData, Field, FieldSide, ModeFunction};
use crate::geometry::{Problem, RadialGrid, Side};

/// `amplitude · (r/center)^{|m|} · exp(-width (r² - center²)² / (4 center²))` on one side.
///
/// Near `center` this is a Gaussian of the given width; being a function of `r²`
/// times `r^{|m|}`, it is smooth on the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub mode: i32,
    pub side: Side,
    pub amplitude: Complex64,
    pub center: f64,
    pub width: f64,
}

impl GaussianTerm {
    /// Value, first and second radial derivative at `r`.
    pub fn jet(&self, r: f64) -> (Complex64, Complex64, Complex64) {
        let (a, c2) = (self.width, self.center * self.center);
        let nu = self.mode.unsigned_abs() as f64;
        let g0 = -a * (r * r - c2).powi(2) / (4.0 * c2);
        let g1 = -a * (r * r - c2) * r / c2;
        let g2 = -a * (3.0 * r * r - c2) / c2;
        let w = self.amplitude * (r / self.center).powf(nu) * g0.exp();
        if r == 0.0 {
            let e = self.amplitude * g0.exp();
            let zero = Complex64::new(0.0, 0.0);
            return match self.mode.unsigned_abs() {
                0 => (w, zero, w * g2),
                1 => (zero, e / self.center, zero),
                2 => (zero, zero, 2.0 * e / c2),
                _ => (zero, zero, zero),
            };
        }
        let l = nu / r + g1;
        (w, w * l, w * (l * l - nu / (r * r) + g2))
    }
}

/// A sum of [`GaussianTerm`]s.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SourceProfile {
    pub terms: Vec<GaussianTerm>,
}

impl SourceProfile {
    /// One interior and one exterior term per mode `|m| <= mode_cutoff`, with
    /// amplitudes, centres and widths drawn from a ChaCha8 stream seeded by `seed`.
    pub fn random(seed: u64, mode_cutoff: u32, interface_radius: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mode_cutoff as i32;
        let mut terms = Vec::new();
        for m in -n..=n {
            for side in [Side::Interior, Side::Exterior] {
                let amplitude = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let (center, width) = match side {
                    Side::Interior => (
                        interface_radius * rng.gen_range(0.3..0.9),
                        rng.gen_range(4.0..8.0) / interface_radius.powi(2),
                    ),
                    Side::Exterior => (
                        interface_radius * rng.gen_range(1.1..1.8),
                        rng.gen_range(4.0..8.0) / interface_radius.powi(2),
                    ),
                };
                terms.push(GaussianTerm {
                    mode: m,
                    side,
                    amplitude,
                    center,
                    width,
                });
            }
        }
        Self { terms }
    }

    pub fn value(&self, side: Side, m: i32, r: f64) -> Complex64 {
        self.terms
            .iter()
            .filter(|t| t.side == side && t.mode == m)
            .map(|t| t.jet(r).0)
            .sum()
    }

    fn jet(&self, side: Side, m: i32, r: f64) -> (Complex64, Complex64, Complex64) {
        self.terms
            .iter()
            .filter(|t| t.side == side && t.mode == m)
            .fold(Default::default(), |(a, b, c), t| {
                let (x, y, z) = t.jet(r);
                (a + x, b + y, c + z)
            })
    }

    /// Modes carrying at least one term, ascending.
    pub fn modes(&self) -> Vec<i32> {
        let mut m: Vec<i32> = self.terms.iter().map(|t| t.mode).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// The profile sampled on `grid`, with exact derivatives attached.
    pub fn to_field(&self, grid: &RadialGrid, which: FieldSide) -> Result<Field> {
        let mut field = Field::new(which);
        for m in self.modes() {
            for side in [Side::Interior, Side::Exterior] {
                if which.contains(side) {
                    field.insert(grid, ModeFunction::from_jet_fn(m, side, grid, |r| self.jet(side, m, r)))?;
                }
            }
        }
        Ok(field)
    }
}

/// `w = amplitude · r^{|m|} e^{-width r²}` on the whole plane and `f = (L - λ) w`,
/// so that the resolvent maps `f` back to `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageProfile {
    pub mode: i32,
    pub amplitude: Complex64,
    pub width: f64,
}

impl ImageProfile {
    pub fn solution(&self, r: f64) -> Complex64 {
        self.amplitude * r.powi(self.mode.abs()) * (-self.width * r * r).exp()
    }

    /// `-w'' - w'/r + ν²w/r² + (V - λ) w = w (2a(2ν + 2) - 4a²r² + V - λ)`.
    pub fn source(&self, problem: &Problem, side: Side, lambda: Complex64, r: f64) -> Complex64 {
        let a = self.width;
        let nu = self.mode.unsigned_abs() as f64;
        let v = problem.potential_on_side(side, r, false);
        self.solution(r) * (2.0 * a * (2.0 * nu + 2.0) - 4.0 * a * a * r * r + v - lambda)
    }

    pub fn solution_field(&self, grid: &RadialGrid) -> Result<Field> {
        let mut f = Field::new(FieldSide::Whole);
        for side in [Side::Interior, Side::Exterior] {
            f.insert(grid, ModeFunction::from_fn(self.mode, side, grid, |r| self.solution(r)))?;
        }
        Ok(f)
    }

    pub fn source_field(&self, problem: &Problem, lambda: Complex64) -> Result<Field> {
        let grid = problem.grid();
        let mut f = Field::new(FieldSide::Whole);
        for side in [Side::Interior, Side::Exterior] {
            f.insert(
                grid,
                ModeFunction::from_fn(self.mode, side, grid, |r| self.source(problem, side, lambda, r)),
            )?;
        }
        Ok(f)
    }
}

/// Coefficients uniform in the unit square for every `|m| <= mode_cutoff`.
pub fn random_boundary_data(seed: u64, radius: f64, mode_cutoff: u32) -> BoundaryData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = BoundaryData::zeros(radius, mode_cutoff);
    let n = mode_cutoff as i32;
    for m in -n..=n {
        let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        phi.set(m, v).expect("mode within cutoff");
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ProblemSpec, RadialPotential};
    use proptest::prelude::*;

    fn problem() -> Problem {
        Problem::new(ProblemSpec::new(
            1.0,
            4.0,
            3,
            100,
            RadialPotential::disk(1.0, Complex64::new(2.0, 1.0)),
        ))
        .unwrap()
    }

    #[test]
    fn same_seed_same_profile() {
        assert_eq!(SourceProfile::random(5, 3, 1.0), SourceProfile::random(5, 3, 1.0));
        assert_ne!(SourceProfile::random(5, 3, 1.0), SourceProfile::random(6, 3, 1.0));
        assert_eq!(random_boundary_data(1, 1.0, 2), random_boundary_data(1, 1.0, 2));
    }

    #[test]
    fn random_fields_are_admissible() {
        let p = problem();
        let f = SourceProfile::random(11, 3, 1.0)
            .to_field(p.grid(), FieldSide::Whole)
            .unwrap();
        assert_eq!(f.mode_numbers(), vec![-3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn image_source_matches_operator() {
        let p = problem();
        let lambda = Complex64::new(-2.0, 0.5);
        for mode in [0, 1, 3] {
            let w = ImageProfile {
                mode,
                amplitude: Complex64::new(0.5, -1.0),
                width: 2.0,
            };
            let exact = w.source_field(&p, lambda).unwrap();
            let fd =
                crate::krein::apply_operator_field(&p, &w.solution_field(p.grid()).unwrap(), lambda, false).unwrap();
            let diff = crate::field::field_norm(p.grid(), &exact.sub(&fd).unwrap()).unwrap();
            assert!(
                diff < 1e-4 * crate::field::field_norm(p.grid(), &exact).unwrap(),
                "{mode}: {diff}"
            );
        }
    }

    proptest! {
        #[test]
        fn gaussian_jet_matches_differences(
            mode in -4i32..=4, center in 0.3f64..2.0, width in 1.0f64..8.0, r in 0.2f64..3.0
        ) {
            let t = GaussianTerm { mode, side: Side::Exterior, amplitude: Complex64::new(1.0, 0.5), center, width };
            let h = 1e-4;
            let (_, d1, d2) = t.jet(r);
            let fd1 = (t.jet(r + h).0 - t.jet(r - h).0) / (2.0 * h);
            let fd2 = (t.jet(r + h).0 - 2.0 * t.jet(r).0 + t.jet(r - h).0) / (h * h);
            let scale = 1.0 + t.jet(r).0.norm() * (1.0 + width * width) * 10.0;
            prop_assert!((d1 - fd1).norm() < 1e-5 * scale);
            prop_assert!((d2 - fd2).norm() < 1e-3 * scale);
        }
    }
}
