//! Disk / exterior decomposition of the plane, radial potentials and the radial grid.
//!
//! The interface `Σ` is the circle of radius `R`; `Ω` is the open disk and `Ω'`
//! its exterior. Functions are stored per angular mode on a radial grid that is
//! uniform inside every layer delimited by potential breakpoints, the interface
//! and the truncation radius. Each layer has an even number of intervals so that
//! composite Simpson panels never straddle a point where the potential jumps.
//!
//! Quadrature: composite Simpson (fourth order) on every layer. Integrals that
//! start at the origin treat `r = 0` as an implicit node whose integrand value is
//! zero; every integrand carries the area factor `r`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{KreinError, Result};
use crate::special;

/// Largest mode cutoff accepted by [`validate_spec`].
pub const MAX_MODE_CUTOFF: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Interior,
    Exterior,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Interior => "interior",
            Side::Exterior => "exterior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSegment {
    pub r_left: f64,
    pub r_right: f64,
    pub value: Complex64,
}

/// Piecewise-constant radial potential, zero beyond the last segment.
///
/// A point `r` belongs to the segment with `r_left < r <= r_right` (the first
/// segment also owns `r = 0`); at a breakpoint the potential takes the value of
/// the segment on the left.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RadialPotential {
    pub segments: Vec<PotentialSegment>,
}

impl RadialPotential {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Checked constructor.
    pub fn new(segments: Vec<PotentialSegment>) -> Result<Self> {
        let p = Self { segments };
        let violations = p.violations();
        if violations.is_empty() {
            Ok(p)
        } else {
            Err(KreinError::InvalidSpec(violations.join("; ")))
        }
    }

    /// `value` on `[0, radius]`, zero outside.
    pub fn disk(radius: f64, value: Complex64) -> Self {
        Self {
            segments: vec![PotentialSegment {
                r_left: 0.0,
                r_right: radius,
                value,
            }],
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut expected_left = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.r_left != expected_left {
                out.push(format!(
                    "potential segment {i} starts at {} but must start at {expected_left}",
                    s.r_left
                ));
            }
            if !(s.r_right > s.r_left) || !s.r_right.is_finite() {
                out.push(format!("potential segment {i} has an empty or unbounded range"));
            }
            if !s.value.re.is_finite() || !s.value.im.is_finite() {
                out.push(format!("potential segment {i} has a non-finite value"));
            }
            expected_left = s.r_right;
        }
        out
    }

    pub fn support_radius(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.r_right)
    }

    pub fn value_at(&self, r: f64) -> Complex64 {
        for s in &self.segments {
            if r <= s.r_right {
                return s.value;
            }
        }
        Complex64::new(0.0, 0.0)
    }

    /// Potential of the formally adjoint expression `-Δ + conj(V)`.
    pub fn conjugate(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| PotentialSegment {
                    value: s.value.conj(),
                    ..*s
                })
                .collect(),
        }
    }

    pub fn is_real(&self) -> bool {
        self.segments.iter().all(|s| s.value.im == 0.0)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.r_right).collect()
    }
}

/// Configuration of a computation: geometry, potential, angular and radial resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Radius `R` of the interface circle.
    pub interface_radius: f64,
    /// Outer end `R_max` of the stored exterior grid.
    pub truncation_radius: f64,
    /// Modes `|m| <= mode_cutoff` are represented.
    pub mode_cutoff: u32,
    /// Number of radial intervals on `(0, R]`; the same spacing is used outside.
    pub grid_points: usize,
    pub potential: RadialPotential,
}

impl ProblemSpec {
    pub fn new(
        interface_radius: f64,
        truncation_radius: f64,
        mode_cutoff: u32,
        grid_points: usize,
        potential: RadialPotential,
    ) -> Self {
        Self {
            interface_radius,
            truncation_radius,
            mode_cutoff,
            grid_points,
            potential,
        }
    }

    /// Layered grid for this spec (no validation beyond what grid construction needs).
    pub fn radial_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(
            self.interface_radius,
            self.truncation_radius,
            &self.potential.breakpoints(),
            self.grid_points,
        )
    }

    pub fn modes(&self) -> impl Iterator<Item = i32> {
        let m = self.mode_cutoff as i32;
        -m..=m
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_spec(spec: &ProblemSpec) -> ValidationReport {
    let mut v = Vec::new();
    let r = spec.interface_radius;
    let r_max = spec.truncation_radius;
    if !(r > 0.0) || !r.is_finite() {
        v.push("interface_radius must be positive".to_string());
    }
    if !(r_max > r) || !r_max.is_finite() {
        v.push("truncation_radius must exceed interface_radius".to_string());
    }
    if spec.mode_cutoff > MAX_MODE_CUTOFF {
        v.push(format!("mode_cutoff must not exceed {MAX_MODE_CUTOFF}"));
    }
    if spec.grid_points < 4 {
        v.push("grid_points must be at least 4".to_string());
    }
    v.extend(spec.potential.violations());
    let support = spec.potential.support_radius();
    if support > r_max {
        v.push(format!(
            "potential support radius {support} exceeds truncation_radius {r_max}"
        ));
    }
    if v.is_empty() {
        match spec.radial_grid() {
            Ok(grid) => {
                let min_spacing = grid.min_spacing();
                if min_spacing < 1e-9 * r_max {
                    v.push(format!(
                        "radial grid spacing {min_spacing:e} is not bounded away from zero"
                    ));
                }
                if grid.interior.nodes.last() != Some(&r) {
                    v.push("radial grid must contain the interface radius".to_string());
                }
            }
            Err(e) => v.push(e.to_string()),
        }
    }
    ValidationReport { violations: v }
}

/// One composite-Simpson panel `(x0, x0 + h, x0 + 2h)` given by indices into the
/// padded node list of a [`SideGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
struct Panel {
    first: usize,
    half_width: f64,
    /// Neighbouring nodes in the same layer, used by the half-panel rules.
    before: bool,
    after: bool,
}

/// Nodes and quadrature for one side of the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct SideGrid {
    side: Side,
    /// Sample nodes: `(0, R]` for the interior, `[R, R_max]` for the exterior.
    pub nodes: Vec<f64>,
    /// Simpson weights for `∫ g(r) dr` (the caller supplies the factor `r`).
    pub weights: Vec<f64>,
    /// Layer ranges `[start, end]` as indices into `nodes`; the interior's first
    /// layer starts at the implicit origin and is recorded with `start = usize::MAX`.
    layers: Vec<(usize, usize)>,
    panels: Vec<Panel>,
    /// Number of implicit leading nodes (1 for the origin on the interior side).
    offset: usize,
}

impl SideGrid {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node on the interface circle.
    pub fn interface_index(&self) -> usize {
        match self.side {
            Side::Interior => self.nodes.len() - 1,
            Side::Exterior => 0,
        }
    }

    /// `∫ g dr` for samples `g` on the nodes.
    pub fn integrate(&self, g: &[Complex64]) -> Complex64 {
        debug_assert_eq!(g.len(), self.nodes.len());
        g.iter().zip(&self.weights).map(|(v, w)| v * *w).sum()
    }

    /// `F[j] = ∫_{start}^{r_j} g dr`, starting at the origin (interior) or at `R` (exterior).
    pub fn cumulative_forward(&self, g: &[Complex64]) -> Vec<Complex64> {
        let padded = self.pad(g);
        let mut out = vec![Complex64::new(0.0, 0.0); padded.len()];
        for p in &self.panels {
            let (a, h) = (p.first, p.half_width);
            let (g0, g1, g2) = (padded[a], padded[a + 1], padded[a + 2]);
            out[a + 1] = out[a]
                + if p.after {
                    h / 24.0 * (9.0 * g0 + 19.0 * g1 - 5.0 * g2 + padded[a + 3])
                } else if p.before {
                    h / 24.0 * (-padded[a - 1] + 13.0 * g0 + 13.0 * g1 - g2)
                } else {
                    h / 12.0 * (5.0 * g0 + 8.0 * g1 - g2)
                };
            out[a + 2] = out[a] + h / 3.0 * (g0 + 4.0 * g1 + g2);
        }
        out.split_off(self.offset)
    }

    /// `B[j] = ∫_{r_j}^{end} g dr` where `end` is `R` (interior) or `R_max` (exterior).
    pub fn cumulative_backward(&self, g: &[Complex64]) -> Vec<Complex64> {
        let padded = self.pad(g);
        let mut out = vec![Complex64::new(0.0, 0.0); padded.len()];
        for p in self.panels.iter().rev() {
            let (a, h) = (p.first, p.half_width);
            let (g0, g1, g2) = (padded[a], padded[a + 1], padded[a + 2]);
            out[a + 1] = out[a + 2]
                + if p.before {
                    h / 24.0 * (padded[a - 1] - 5.0 * g0 + 19.0 * g1 + 9.0 * g2)
                } else if p.after {
                    h / 24.0 * (-g0 + 13.0 * g1 + 13.0 * g2 - padded[a + 3])
                } else {
                    h / 12.0 * (-g0 + 8.0 * g1 + 5.0 * g2)
                };
            out[a] = out[a + 2] + h / 3.0 * (g0 + 4.0 * g1 + g2);
        }
        out.split_off(self.offset)
    }

    fn pad(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut padded = Vec::with_capacity(g.len() + self.offset);
        padded.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), self.offset));
        padded.extend_from_slice(g);
        padded
    }

    /// Layers as node-index ranges; the first interior layer begins at node 0
    /// and is flagged `from_origin`.
    pub(crate) fn layer_ranges(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        self.layers
            .iter()
            .map(|&(s, e)| if s == usize::MAX { (0, e, true) } else { (s, e, false) })
    }

    /// Derivative of samples at every node by fourth-order finite differences
    /// taken inside each layer. Used only when a function carries no jet.
    pub fn differentiate(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        // reverse order: a node shared by two layers keeps the value from the left one
        let ranges: Vec<_> = self.layer_ranges().collect();
        for &(s, e, _) in ranges.iter().rev() {
            let n = e - s + 1;
            let h = if n > 1 {
                (self.nodes[e] - self.nodes[s]) / (n - 1) as f64
            } else {
                1.0
            };
            for j in s..=e {
                out[j] = finite_difference(&u[s..=e], j - s, h, 1);
            }
        }
        out
    }

    /// Second derivative by finite differences inside each layer.
    pub fn differentiate2(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        let ranges: Vec<_> = self.layer_ranges().collect();
        for &(s, e, _) in ranges.iter().rev() {
            let n = e - s + 1;
            let h = (self.nodes[e] - self.nodes[s]) / (n - 1).max(1) as f64;
            for j in s..=e {
                out[j] = finite_difference(&u[s..=e], j - s, h, 2);
            }
        }
        out
    }
}

/// Five-point finite difference (derivative order 1 or 2) at index `j` of a
/// uniformly spaced slice, shifting the stencil inward near the ends.
fn finite_difference(u: &[Complex64], j: usize, h: f64, order: u8) -> Complex64 {
    let n = u.len();
    if n < 5 {
        // short layer: second-order differences
        let j0 = j.clamp(1, n.saturating_sub(2).max(1));
        if n < 3 {
            return if order == 1 && n == 2 {
                (u[1] - u[0]) / h
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        return if order == 1 {
            let c = (u[j0 + 1] - u[j0 - 1]) / (2.0 * h);
            let d2 = (u[j0 + 1] - 2.0 * u[j0] + u[j0 - 1]) / (h * h);
            c + d2 * (j as f64 - j0 as f64) * h
        } else {
            (u[j0 + 1] - 2.0 * u[j0] + u[j0 - 1]) / (h * h)
        };
    }
    let start = j.saturating_sub(2).min(n - 5);
    let x = (j - start) as f64;
    // Lagrange weights of the derivative at x for nodes 0..5
    let nodes = [0.0, 1.0, 2.0, 3.0, 4.0];
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &xi) in nodes.iter().enumerate() {
        let w = if order == 1 {
            lagrange_d1(&nodes, i, x)
        } else {
            lagrange_d2(&nodes, i, x)
        };
        acc += u[start + i] * w;
        let _ = xi;
    }
    if order == 1 {
        acc / h
    } else {
        acc / (h * h)
    }
}

fn lagrange_d1(nodes: &[f64], i: usize, x: f64) -> f64 {
    let xi = nodes[i];
    let denom: f64 = nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, &xk)| xi - xk)
        .product();
    let mut sum = 0.0;
    for (k, &xk) in nodes.iter().enumerate() {
        if k == i {
            continue;
        }
        let mut prod = 1.0;
        for (l, &xl) in nodes.iter().enumerate() {
            if l != i && l != k {
                prod *= x - xl;
            }
        }
        let _ = xk;
        sum += prod;
    }
    sum / denom
}

fn lagrange_d2(nodes: &[f64], i: usize, x: f64) -> f64 {
    let xi = nodes[i];
    let denom: f64 = nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, &xk)| xi - xk)
        .product();
    let mut sum = 0.0;
    for k in 0..nodes.len() {
        for l in 0..nodes.len() {
            if k == i || l == i || k == l {
                continue;
            }
            let mut prod = 1.0;
            for (p, &xp) in nodes.iter().enumerate() {
                if p != i && p != k && p != l {
                    prod *= x - xp;
                }
            }
            sum += prod;
        }
    }
    sum / denom
}

/// Radial grid on `(0, R_max]` split at the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub interface_radius: f64,
    pub truncation_radius: f64,
    pub interior: SideGrid,
    pub exterior: SideGrid,
}

impl RadialGrid {
    /// Builds layers between consecutive points of `{0} ∪ breakpoints ∪ {R, R_max}`,
    /// each with an even number of intervals of width close to `R / grid_points`.
    pub fn new(interface_radius: f64, truncation_radius: f64, breakpoints: &[f64], grid_points: usize) -> Result<Self> {
        let r = interface_radius;
        let r_max = truncation_radius;
        if !(r > 0.0 && r_max > r && grid_points >= 2) {
            return Err(KreinError::InvalidSpec(
                "grid needs 0 < interface_radius < truncation_radius and grid_points >= 2".into(),
            ));
        }
        let h = r / grid_points as f64;
        let tol = 1e-12 * r_max;
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > tol && b < r_max - tol && (b - r).abs() > tol)
            .collect();
        cuts.push(r);
        cuts.push(r_max);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() <= tol);

        let build = |side: Side, lo: f64, hi: f64| -> SideGrid {
            let offset = usize::from(side == Side::Interior);
            let mut padded = vec![lo];
            let mut layers = Vec::new();
            let mut panels = Vec::new();
            let mut a = lo;
            for &b in cuts.iter().filter(|&&c| c > lo + tol && c <= hi + tol) {
                let intervals = 2 * (((b - a) / (2.0 * h)).ceil() as usize).max(1);
                let step = (b - a) / intervals as f64;
                let start = padded.len() - 1;
                for j in 1..=intervals {
                    padded.push(if j == intervals { b } else { a + step * j as f64 });
                }
                for p in (0..intervals).step_by(2) {
                    panels.push(Panel {
                        first: start + p,
                        half_width: step,
                        before: p > 0,
                        after: p + 2 < intervals,
                    });
                }
                let end = padded.len() - 1;
                let s = if start < offset { usize::MAX } else { start - offset };
                layers.push((s, end - offset));
                a = b;
            }
            let mut weights = vec![0.0; padded.len()];
            for p in &panels {
                weights[p.first] += p.half_width / 3.0;
                weights[p.first + 1] += 4.0 * p.half_width / 3.0;
                weights[p.first + 2] += p.half_width / 3.0;
            }
            SideGrid {
                side,
                nodes: padded.split_off(offset),
                weights: weights.split_off(offset),
                layers,
                panels,
                offset,
            }
        };
        Ok(Self {
            interface_radius: r,
            truncation_radius: r_max,
            interior: build(Side::Interior, 0.0, r),
            exterior: build(Side::Exterior, r, r_max),
        })
    }

    pub fn side(&self, side: Side) -> &SideGrid {
        match side {
            Side::Interior => &self.interior,
            Side::Exterior => &self.exterior,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        let mut min = f64::INFINITY;
        let mut prev = 0.0;
        for &x in self.interior.nodes.iter().chain(self.exterior.nodes.iter().skip(1)) {
            min = min.min(x - prev);
            prev = x;
        }
        min
    }
}

/// Constant-potential interval `(start, end]` of one side, as seen by the radial solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Layer {
    pub start: f64,
    pub end: f64,
    pub potential: Complex64,
}

/// A validated spec with its grid: the context every solver operation runs in.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    grid: RadialGrid,
    interior_layers: [Vec<Layer>; 2],
    exterior_layers: [Vec<Layer>; 2],
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let report = validate_spec(&spec);
        if !report.is_ok() {
            return Err(KreinError::InvalidSpec(report.violations.join("; ")));
        }
        let grid = spec.radial_grid()?;
        let conj = spec.potential.conjugate();
        let r = spec.interface_radius;
        let interior_layers = [
            side_layers(&spec.potential, Side::Interior, r),
            side_layers(&conj, Side::Interior, r),
        ];
        let exterior_layers = [
            side_layers(&spec.potential, Side::Exterior, r),
            side_layers(&conj, Side::Exterior, r),
        ];
        Ok(Self {
            spec,
            grid,
            interior_layers,
            exterior_layers,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn interface_radius(&self) -> f64 {
        self.spec.interface_radius
    }

    pub fn truncation_radius(&self) -> f64 {
        self.spec.truncation_radius
    }

    pub fn mode_cutoff(&self) -> u32 {
        self.spec.mode_cutoff
    }

    pub(crate) fn layers(&self, side: Side, conjugated: bool) -> &[Layer] {
        let idx = usize::from(conjugated);
        match side {
            Side::Interior => &self.interior_layers[idx],
            Side::Exterior => &self.exterior_layers[idx],
        }
    }

    /// Potential value used at radius `r` on the given side; at the interface the
    /// exterior side sees the limit from outside.
    pub fn potential_on_side(&self, side: Side, r: f64, conjugated: bool) -> Complex64 {
        let layers = self.layers(side, conjugated);
        let idx = layer_index(layers, side, r);
        layers[idx].potential
    }
}

/// Index of the layer owning `r`: `(start, end]`, except that the first
/// exterior layer also owns its start `R`.
pub(crate) fn layer_index(layers: &[Layer], side: Side, r: f64) -> usize {
    if side == Side::Exterior && r <= layers[0].start {
        return 0;
    }
    layers.iter().position(|l| r <= l.end).unwrap_or(layers.len() - 1)
}

fn side_layers(potential: &RadialPotential, side: Side, r: f64) -> Vec<Layer> {
    let (lo, hi) = match side {
        Side::Interior => (0.0, r),
        Side::Exterior => (r, f64::INFINITY),
    };
    let mut layers = Vec::new();
    let mut a = lo;
    for s in &potential.segments {
        if s.r_right <= lo {
            continue;
        }
        if s.r_left >= hi {
            break;
        }
        let end = s.r_right.min(hi);
        layers.push(Layer {
            start: a,
            end,
            potential: s.value,
        });
        a = end;
    }
    if a < hi {
        layers.push(Layer {
            start: a,
            end: hi,
            potential: Complex64::new(0.0, 0.0),
        });
    }
    layers
}

/// Guard used by callers that evaluate Bessel functions on a layer.
pub(crate) fn check_mode(mode: i32) -> Result<u32> {
    let nu = mode.unsigned_abs();
    if nu > special::MAX_ORDER - 1 {
        return Err(KreinError::BesselOrder {
            order: nu,
            max: special::MAX_ORDER - 1,
        });
    }
    Ok(nu)
}
