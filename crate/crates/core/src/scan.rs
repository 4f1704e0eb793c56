//! Eigenvalues of the whole-space operator as zeros of `d_m(λ) = M_m(λ) + τ_m(λ)`.
//!
//! Cells of a rectangular grid in the `λ`-plane are screened with the argument
//! principle, cells holding several zeros are quartered, and every cell with one
//! zero is polished by damped Newton from its centre. Winding numbers and Newton
//! use the matching function `J = p d' - p' d = p d (M + τ)`, which has the zeros
//! of `d_m` but not its poles at Dirichlet eigenvalues of either side.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KreinError, Result};
use crate::geometry::Problem;
use crate::krein::dtn_pair;
use crate::radial::{matching_function, CUT_TOLERANCE};

/// Boundary samples per cell before adaptive doubling.
pub const WINDING_SAMPLES: usize = 64;
const MAX_WINDING_SAMPLES: usize = 4096;
/// Largest phase step along the contour accepted as resolved.
const MAX_PHASE_STEP: f64 = 0.5;
const MAX_DEPTH: usize = 6;
const MAX_NEWTON: usize = 60;

/// `d_m(λ) = M_m(λ) + τ_m(λ)`.
pub fn evaluate_d(problem: &Problem, m: i32, lambda: Complex64) -> Result<Complex64> {
    let (mi, tau) = dtn_pair(problem, m, lambda)?;
    Ok(mi + tau)
}

/// `1e-10 (1 + |M| + |τ|)`.
pub fn zero_tolerance(mi: Complex64, tau: Complex64) -> f64 {
    1e-10 * (1.0 + mi.norm() + tau.norm())
}

/// `1e-8 (1 + |λ|)`.
pub fn merge_tolerance(lambda: Complex64) -> f64 {
    1e-8 * (1.0 + lambda.norm())
}

/// Closed rectangle in the `λ`-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    fn is_empty(&self) -> bool {
        !(self.re_max > self.re_min && self.im_max > self.im_min)
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn quarters(&self) -> [Rect; 4] {
        let c = self.center();
        [
            Rect {
                re_max: c.re,
                im_max: c.im,
                ..*self
            },
            Rect {
                re_min: c.re,
                im_max: c.im,
                ..*self
            },
            Rect {
                re_max: c.re,
                im_min: c.im,
                ..*self
            },
            Rect {
                re_min: c.re,
                im_min: c.im,
                ..*self
            },
        ]
    }

    /// Point at arc-length fraction `t ∈ [0, 1)` of the counter-clockwise boundary.
    fn boundary_point(&self, t: f64) -> Complex64 {
        let (w, h) = (self.re_max - self.re_min, self.im_max - self.im_min);
        let mut s = t * 2.0 * (w + h);
        if s < w {
            return Complex64::new(self.re_min + s, self.im_min);
        }
        s -= w;
        if s < h {
            return Complex64::new(self.re_max, self.im_min + s);
        }
        s -= h;
        if s < w {
            return Complex64::new(self.re_max - s, self.im_max);
        }
        s -= w;
        Complex64::new(self.re_min, self.im_max - s)
    }
}

/// Search rectangle, its cell grid, and the half-width of the band excluded around `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_cells: usize,
    pub im_cells: usize,
    pub cut_band: f64,
}

impl ScanRegion {
    pub fn validate(&self) -> Result<()> {
        let bounds = [self.re_min, self.re_max, self.im_min, self.im_max, self.cut_band];
        if bounds.iter().any(|v| !v.is_finite()) {
            return Err(KreinError::InvalidArgument("scan region bounds must be finite".into()));
        }
        if !(self.re_max > self.re_min && self.im_max > self.im_min) {
            return Err(KreinError::InvalidArgument("scan region is empty".into()));
        }
        if self.re_cells == 0 || self.im_cells == 0 {
            return Err(KreinError::InvalidArgument(
                "scan region needs at least one cell per direction".into(),
            ));
        }
        let scale = 1.0
            + self
                .re_min
                .abs()
                .max(self.re_max.abs())
                .max(self.im_min.abs())
                .max(self.im_max.abs());
        if !(self.cut_band > CUT_TOLERANCE * scale) {
            return Err(KreinError::InvalidArgument(format!(
                "cut_band must exceed {:e}",
                CUT_TOLERANCE * scale
            )));
        }
        Ok(())
    }

    fn outer(&self) -> Rect {
        Rect {
            re_min: self.re_min,
            re_max: self.re_max,
            im_min: self.im_min,
            im_max: self.im_max,
        }
    }

    /// Whether the rectangle meets the excluded band `Re λ > -ε, |Im λ| < ε`.
    pub fn is_clipped(&self) -> bool {
        let e = self.cut_band;
        self.re_max > -e && self.im_max > -e && self.im_min < e
    }

    /// The rectangle minus the excluded band, as up to three rectangles.
    pub fn pieces(&self) -> Vec<Rect> {
        let outer = self.outer();
        if !self.is_clipped() {
            return vec![outer];
        }
        let e = self.cut_band;
        let candidates = [
            Rect {
                im_max: outer.im_max.min(-e),
                ..outer
            },
            Rect {
                im_min: outer.im_min.max(e),
                ..outer
            },
            Rect {
                re_max: outer.re_max.min(-e),
                im_min: outer.im_min.max(-e),
                im_max: outer.im_max.min(e),
                ..outer
            },
        ];
        candidates.into_iter().filter(|r| !r.is_empty()).collect()
    }

    /// Cells of each piece at the region's cell size. Interior edges are kept off the
    /// real axis so real eigenvalues are never on a contour.
    pub fn cells(&self) -> Vec<Rect> {
        let dx = (self.re_max - self.re_min) / self.re_cells as f64;
        let dy = (self.im_max - self.im_min) / self.im_cells as f64;
        let mut out = Vec::new();
        for piece in self.pieces() {
            let nx = ((piece.re_max - piece.re_min) / dx).round().max(1.0) as usize;
            let mut ny = ((piece.im_max - piece.im_min) / dy).round().max(1.0) as usize;
            let edge_on_axis = |ny: usize| {
                let h = (piece.im_max - piece.im_min) / ny as f64;
                (1..ny).any(|k| (piece.im_min + k as f64 * h).abs() < 0.05 * h)
            };
            while edge_on_axis(ny) {
                ny += 1;
            }
            let hx = (piece.re_max - piece.re_min) / nx as f64;
            let hy = (piece.im_max - piece.im_min) / ny as f64;
            for j in 0..ny {
                for i in 0..nx {
                    out.push(Rect {
                        re_min: piece.re_min + i as f64 * hx,
                        re_max: if i + 1 == nx {
                            piece.re_max
                        } else {
                            piece.re_min + (i + 1) as f64 * hx
                        },
                        im_min: piece.im_min + j as f64 * hy,
                        im_max: if j + 1 == ny {
                            piece.im_max
                        } else {
                            piece.im_min + (j + 1) as f64 * hy
                        },
                    });
                }
            }
        }
        out
    }
}

/// One located zero of `d_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroRecord {
    pub mode: i32,
    pub lambda: Complex64,
    /// `|d_m(λ*)|`; NaN when `d_m` is undefined there.
    pub abs_d: f64,
    /// Winding number of the cell the zero was polished from.
    pub winding: i32,
    pub newton_iterations: usize,
    pub converged: bool,
}

/// A cell whose zeros could not be resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnresolvedCell {
    pub mode: i32,
    pub cell: Rect,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub zeros: Vec<ZeroRecord>,
    pub unresolved: Vec<UnresolvedCell>,
    /// Sum over cells and modes of the winding numbers.
    pub total_winding: i64,
    pub clipped: bool,
}

/// Worker threads; `0` lets rayon decide.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanOptions {
    pub threads: usize,
}

/// Winding number of `f` around the counter-clockwise boundary of `cell`.
pub fn winding_number(f: &dyn Fn(Complex64) -> Result<Complex64>, cell: &Rect) -> Result<i32> {
    let mut samples = WINDING_SAMPLES;
    let mut previous: Option<i32> = None;
    while samples <= MAX_WINDING_SAMPLES {
        let values = (0..samples)
            .map(|k| f(cell.boundary_point(k as f64 / samples as f64)))
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        let mut largest: f64 = 0.0;
        for k in 0..samples {
            let (a, b) = (values[k], values[(k + 1) % samples]);
            if a.norm() == 0.0 || b.norm() == 0.0 {
                return Err(KreinError::Singular("zero on a cell boundary".into()));
            }
            let step = (b / a).arg();
            largest = largest.max(step.abs());
            total += step;
        }
        let w = (total / (2.0 * std::f64::consts::PI)).round() as i32;
        if largest < MAX_PHASE_STEP && previous == Some(w) {
            return Ok(w);
        }
        previous = Some(w);
        samples *= 2;
    }
    Err(KreinError::Singular("winding number did not stabilize".into()))
}

fn matching(problem: &Problem, m: i32) -> impl Fn(Complex64) -> Result<Complex64> + '_ {
    move |lambda| Ok(matching_function(problem, m, lambda)?.value)
}

/// Damped Newton on the matching function with a central-difference derivative.
/// Returns the final point, the iteration count and whether the step converged.
fn newton(problem: &Problem, m: i32, start: Complex64) -> Result<(Complex64, usize, bool)> {
    let f = matching(problem, m);
    let mut z = start;
    let mut fz = f(z)?;
    for it in 1..=MAX_NEWTON {
        let delta = 1e-5 * (1.0 + z.norm());
        let h = Complex64::new(delta, 0.0);
        let derivative = (f(z + h)? - f(z - h)?) / (2.0 * delta);
        if derivative.norm() == 0.0 || !derivative.re.is_finite() {
            return Ok((z, it, false));
        }
        let mut step = -fz / derivative;
        let mut next = z + step;
        let mut f_next = f(next);
        let mut halvings = 0;
        while f_next.as_ref().map_or(true, |v| v.norm() > fz.norm()) && halvings < 30 {
            step *= 0.5;
            next = z + step;
            f_next = f(next);
            halvings += 1;
        }
        let f_next = match f_next {
            Ok(v) => v,
            Err(_) => return Ok((z, it, false)),
        };
        z = next;
        fz = f_next;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) || fz.norm() == 0.0 {
            return Ok((z, it, true));
        }
    }
    Ok((z, MAX_NEWTON, false))
}

enum CellOutcome {
    Zero(ZeroRecord),
    Unresolved(UnresolvedCell),
}

/// Zeros inside `cell` for mode `m`, quartering cells with winding above one.
fn resolve_cell(problem: &Problem, m: i32, cell: Rect, depth: usize, out: &mut Vec<CellOutcome>) -> i64 {
    let f = matching(problem, m);
    let winding = match winding_number(&f, &cell) {
        Ok(w) => w,
        Err(e) => {
            if depth < MAX_DEPTH {
                return cell
                    .quarters()
                    .iter()
                    .map(|q| resolve_cell(problem, m, *q, depth + 1, out))
                    .sum();
            }
            out.push(CellOutcome::Unresolved(UnresolvedCell {
                mode: m,
                cell,
                reason: e.to_string(),
            }));
            return 0;
        }
    };
    if winding == 0 {
        return 0;
    }
    if winding < 0 {
        out.push(CellOutcome::Unresolved(UnresolvedCell {
            mode: m,
            cell,
            reason: format!("negative winding number {winding}"),
        }));
        return winding as i64;
    }
    if winding > 1 && depth < MAX_DEPTH {
        let inner: i64 = cell
            .quarters()
            .iter()
            .map(|q| resolve_cell(problem, m, *q, depth + 1, out))
            .sum();
        return inner;
    }
    match newton(problem, m, cell.center()) {
        Ok((z, iterations, step_converged)) => {
            let width = (cell.re_max - cell.re_min).max(cell.im_max - cell.im_min);
            let grown = Rect {
                re_min: cell.re_min - 0.1 * width,
                re_max: cell.re_max + 0.1 * width,
                im_min: cell.im_min - 0.1 * width,
                im_max: cell.im_max + 0.1 * width,
            };
            if !grown.contains(z) && depth < MAX_DEPTH {
                return cell
                    .quarters()
                    .iter()
                    .map(|q| resolve_cell(problem, m, *q, depth + 1, out))
                    .sum();
            }
            let (abs_d, small) = match dtn_pair(problem, m, z) {
                Ok((mi, tau)) => {
                    let d = (mi + tau).norm();
                    (d, d <= zero_tolerance(mi, tau))
                }
                Err(_) => (f64::NAN, false),
            };
            out.push(CellOutcome::Zero(ZeroRecord {
                mode: m,
                lambda: z,
                abs_d,
                winding,
                newton_iterations: iterations,
                converged: step_converged && small && grown.contains(z),
            }));
        }
        Err(e) => out.push(CellOutcome::Unresolved(UnresolvedCell {
            mode: m,
            cell,
            reason: e.to_string(),
        })),
    }
    winding as i64
}

fn sort_key(a: &ZeroRecord, b: &ZeroRecord) -> std::cmp::Ordering {
    a.mode
        .cmp(&b.mode)
        .then(a.lambda.re.total_cmp(&b.lambda.re))
        .then(a.lambda.im.total_cmp(&b.lambda.im))
}

/// Locates the zeros of `d_m` in `region` for every mode in `modes`.
///
/// The output is sorted by `(m, Re λ, Im λ)` and does not depend on the thread count.
pub fn scan(problem: &Problem, region: &ScanRegion, modes: &[i32], options: ScanOptions) -> Result<ScanReport> {
    region.validate()?;
    for &m in modes {
        crate::geometry::check_mode(m)?;
    }
    let cells = region.cells();
    let tasks: Vec<(i32, Rect)> = modes.iter().flat_map(|&m| cells.iter().map(move |c| (m, *c))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .map_err(|e| KreinError::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<(i64, Vec<CellOutcome>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, cell)| {
                let mut out = Vec::new();
                let w = resolve_cell(problem, m, cell, 0, &mut out);
                (w, out)
            })
            .collect()
    });
    let mut candidates = Vec::new();
    let mut unresolved = Vec::new();
    let mut total_winding = 0;
    for (w, outcomes) in results {
        total_winding += w;
        for o in outcomes {
            match o {
                CellOutcome::Zero(z) => candidates.push(z),
                CellOutcome::Unresolved(u) => unresolved.push(u),
            }
        }
    }
    candidates.sort_by(sort_key);
    let mut zeros: Vec<ZeroRecord> = Vec::new();
    for z in candidates {
        let duplicate = zeros
            .iter()
            .any(|k| k.mode == z.mode && (k.lambda - z.lambda).norm() <= merge_tolerance(z.lambda));
        if !duplicate {
            zeros.push(z);
        }
    }
    Ok(ScanReport {
        zeros,
        unresolved,
        total_winding,
        clipped: region.is_clipped(),
    })
}
