//! Finite-difference reference solutions, independent of the Bessel transfer path.
//!
//! Each mode is discretized on `[0, X]` by the conservative three-point scheme
//!
//! `-(r_{i+1/2}(u_{i+1}-u_i)/h_+ - r_{i-1/2}(u_i-u_{i-1})/h_-) + a_i (ν²/r_i² + V_i - λ) u_i = a_i f_i`
//!
//! with cell areas `a_i = (r_{i+1/2}² - r_{i-1/2}²)/2` and cell averages of `V`
//! and `f`. The mesh is uniform on each layer so breakpoints are nodes. The row at
//! the origin is the two-dimensional cell `[0, h/2]` for `m = 0` and `u_0 = 0`
//! otherwise. At `X` the flux is closed with the exact free exterior condition
//! `u'(X) = κ K_ν'(κX)/K_ν(κX) u(X)`. Solutions on a sequence of halved meshes are
//! Richardson-extrapolated in `h²`.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{KreinError, Result};
use crate::field::{Field, FieldSide, ModeFunction};
use crate::geometry::{check_mode, Problem, RadialPotential, Side};
use crate::radial::kappa;
use crate::tail::{log_derivative, TailTerm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Mesh density and number of Richardson levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Intervals per unit length on the coarsest mesh.
    pub points_per_unit: usize,
    /// Meshes `h, h/2, ..., h/2^(levels-1)`.
    pub levels: usize,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            points_per_unit: 64,
            levels: 4,
        }
    }
}

/// Piecewise-uniform mesh on `[0, end]` with the breakpoints as nodes.
#[derive(Debug, Clone)]
struct Mesh {
    nodes: Vec<f64>,
    /// `(first, last)` node index of each uniform segment.
    segments: Vec<(usize, usize)>,
}

impl Mesh {
    fn new(breaks: &[f64], per_unit: usize) -> Self {
        let mut nodes = vec![breaks[0]];
        let mut segments = Vec::new();
        for w in breaks.windows(2) {
            let n = ((w[1] - w[0]) * per_unit as f64).ceil().max(2.0) as usize;
            let start = nodes.len() - 1;
            let h = (w[1] - w[0]) / n as f64;
            for k in 1..n {
                nodes.push(w[0] + k as f64 * h);
            }
            nodes.push(w[1]);
            segments.push((start, nodes.len() - 1));
        }
        Self { nodes, segments }
    }

    /// Mesh with every interval halved; node `i` here is node `2i` there.
    fn refined(&self) -> Self {
        let mut nodes = vec![self.nodes[0]];
        for w in self.nodes.windows(2) {
            nodes.push(0.5 * (w[0] + w[1]));
            nodes.push(w[1]);
        }
        let segments = self.segments.iter().map(|&(a, b)| (2 * a, 2 * b)).collect();
        Self { nodes, segments }
    }
}

fn breakpoints(potential: &RadialPotential, radius: f64, end: f64) -> Vec<f64> {
    let mut b = vec![0.0, radius, end];
    b.extend(potential.breakpoints().into_iter().filter(|&x| x > 0.0 && x < end));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * end);
    b
}

/// Tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
#[derive(Debug, Clone)]
struct Tridiagonal {
    sub: Vec<Complex64>,
    diag: Vec<Complex64>,
    sup: Vec<Complex64>,
}

impl Tridiagonal {
    fn len(&self) -> usize {
        self.diag.len()
    }

    /// Gaussian elimination with partial pivoting.
    fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.len();
        // rows hold (a, b, c) = entries in columns i, i+1, i+2 after elimination
        let mut a = self.diag.clone();
        let mut b: Vec<Complex64> = (0..n).map(|i| if i + 1 < n { self.sup[i] } else { ZERO }).collect();
        let mut c = vec![ZERO; n];
        let mut x = rhs.to_vec();
        let mut low: Vec<Complex64> = (0..n).map(|i| if i > 0 { self.sub[i] } else { ZERO }).collect();
        for i in 0..n.saturating_sub(1) {
            let next = i + 1;
            if low[next].norm() > a[i].norm() {
                // swap rows i and next; next originally has (low, diag, sup) in columns i, i+1, i+2
                let (na, nb, nc) = (low[next], a[next], b[next]);
                let (oa, ob, oc) = (a[i], b[i], c[i]);
                a[i] = na;
                b[i] = nb;
                c[i] = nc;
                low[next] = oa;
                a[next] = ob;
                b[next] = oc;
                x.swap(i, next);
            }
            if a[i].norm() == 0.0 {
                return Err(KreinError::Singular("finite-difference matrix is singular".into()));
            }
            let f = low[next] / a[i];
            a[next] -= f * b[i];
            b[next] -= f * c[i];
            let xi = x[i];
            x[next] -= f * xi;
        }
        if a[n - 1].norm() == 0.0 {
            return Err(KreinError::Singular("finite-difference matrix is singular".into()));
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= b[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= c[i] * x[i + 2];
            }
            x[i] = s / a[i];
        }
        Ok(x)
    }
}

/// Stiffness, cell areas and first unknown index of one mode on `mesh`.
struct Discretization {
    matrix: Tridiagonal,
    areas: Vec<f64>,
    first: usize,
}

/// Cell-averaged potential and half-cell areas `(left, right)` at node `i`.
fn half_cells(nodes: &[f64], i: usize) -> (f64, f64) {
    let r = nodes[i];
    let left = if i == 0 { r } else { 0.5 * (nodes[i - 1] + r) };
    let right = if i + 1 == nodes.len() {
        r
    } else {
        0.5 * (r + nodes[i + 1])
    };
    (0.5 * (r * r - left * left), 0.5 * (right * right - r * r))
}

fn discretize(
    mesh: &Mesh,
    nu: u32,
    potential: &dyn Fn(Side, f64) -> Complex64,
    radius: f64,
    lambda: Complex64,
    outer_log_derivative: Option<Complex64>,
) -> Discretization {
    let nodes = &mesh.nodes;
    let n = nodes.len();
    let first = if nu == 0 { 0 } else { 1 };
    let mut sub = Vec::with_capacity(n - first);
    let mut diag = Vec::with_capacity(n - first);
    let mut sup = Vec::with_capacity(n - first);
    let mut areas = Vec::with_capacity(n - first);
    let nu2 = (nu * nu) as f64;
    for i in first..n {
        let r = nodes[i];
        let (al, ar) = half_cells(nodes, i);
        let area = al + ar;
        let side_left = if r <= radius { Side::Interior } else { Side::Exterior };
        let side_right = if r < radius { Side::Interior } else { Side::Exterior };
        let v_area =
            potential(side_left, r - 1e-12 * (1.0 + r)) * al + potential(side_right, r + 1e-12 * (1.0 + r)) * ar;
        let mut d = v_area - lambda * area;
        if r > 0.0 {
            d += nu2 / (r * r) * area;
        }
        let mut lo = ZERO;
        let mut hi = ZERO;
        if i > 0 {
            let flux = 0.5 * (nodes[i - 1] + r) / (r - nodes[i - 1]);
            d += flux;
            lo = Complex64::from(-flux);
        }
        if i + 1 < n {
            let flux = 0.5 * (r + nodes[i + 1]) / (nodes[i + 1] - r);
            d += flux;
            hi = Complex64::from(-flux);
        } else if let Some(rho) = outer_log_derivative {
            d -= r * rho;
        }
        sub.push(lo);
        diag.push(d);
        sup.push(hi);
        areas.push(area);
    }
    Discretization {
        matrix: Tridiagonal { sub, diag, sup },
        areas,
        first,
    }
}

fn problem_potential(problem: &Problem) -> impl Fn(Side, f64) -> Complex64 + '_ {
    move |side, r| problem.potential_on_side(side, r, false)
}

/// One mode of `(A - λ)^{-1} f` on `mesh`, with `u_0 = 0` prepended for `m ≠ 0`.
fn solve_mode(
    problem: &Problem,
    mesh: &Mesh,
    m: i32,
    lambda: Complex64,
    source: &dyn Fn(Side, i32, f64) -> Complex64,
) -> Result<Vec<Complex64>> {
    let nu = check_mode(m)?;
    let radius = problem.interface_radius();
    let end = *mesh.nodes.last().unwrap();
    let rho = log_derivative(nu, kappa(lambda)? * end)? / end;
    let potential = problem_potential(problem);
    let disc = discretize(mesh, nu, &potential, radius, lambda, Some(rho));
    let nodes = &mesh.nodes;
    let rhs: Vec<Complex64> = (disc.first..nodes.len())
        .map(|i| {
            let r = nodes[i];
            let (al, ar) = half_cells(nodes, i);
            let left = if r <= radius { Side::Interior } else { Side::Exterior };
            let right = if r < radius { Side::Interior } else { Side::Exterior };
            source(left, m, r) * al + source(right, m, r) * ar
        })
        .collect();
    let mut u = disc.matrix.solve(&rhs)?;
    if disc.first == 1 {
        u.insert(0, ZERO);
    }
    Ok(u)
}

/// Richardson tableau over halved meshes; returns the extrapolated coarse-node values.
fn extrapolate(levels: Vec<Vec<Complex64>>) -> Vec<Complex64> {
    let coarse = levels[0].len();
    let mut table: Vec<Vec<Complex64>> = levels
        .iter()
        .enumerate()
        .map(|(l, v)| (0..coarse).map(|i| v[i << l]).collect())
        .collect();
    for k in 1..table.len() {
        let factor = 4f64.powi(k as i32) - 1.0;
        for l in (k..table.len()).rev() {
            let (lo, hi) = table.split_at_mut(l);
            for (a, b) in hi[0].iter_mut().zip(&lo[l - 1]) {
                *a += (*a - *b) / factor;
            }
        }
    }
    table.pop().unwrap()
}

/// Lagrange interpolation from the segment of `mesh` containing `r`, 8 nodes.
fn interpolate(mesh: &Mesh, values: &[Complex64], r: f64, prefer_left: bool) -> Complex64 {
    const STENCIL: usize = 8;
    let seg = mesh
        .segments
        .iter()
        .copied()
        .filter(|&(a, b)| mesh.nodes[a] <= r && r <= mesh.nodes[b])
        .nth(if prefer_left { 0 } else { 1 })
        .or_else(|| {
            mesh.segments
                .iter()
                .copied()
                .find(|&(a, b)| mesh.nodes[a] <= r && r <= mesh.nodes[b])
        })
        .unwrap_or(*mesh.segments.last().unwrap());
    let (a, b) = seg;
    let len = STENCIL.min(b - a + 1);
    let h = (mesh.nodes[b] - mesh.nodes[a]) / (b - a) as f64;
    let pos = ((r - mesh.nodes[a]) / h).round() as isize;
    let start = a + (pos - len as isize / 2 + 1).clamp(0, (b - a + 1 - len) as isize) as usize;
    let mut acc = ZERO;
    for j in start..start + len {
        let mut w = 1.0;
        for k in start..start + len {
            if k != j {
                w *= (r - mesh.nodes[k]) / (mesh.nodes[j] - mesh.nodes[k]);
            }
        }
        acc += values[j] * w;
    }
    acc
}

/// Inside the first cell, interpolates `u / r^ν` from the nodes to its right and
/// multiplies back, so the result keeps the `r^ν` behaviour at the origin.
fn interpolate_interior(mesh: &Mesh, values: &[Complex64], r: f64, nu: u32) -> Complex64 {
    const STENCIL: usize = 8;
    if nu == 0 || r >= mesh.nodes[1] {
        return interpolate(mesh, values, r, true);
    }
    let nodes = &mesh.nodes[1..=STENCIL.min(mesh.segments[0].1)];
    let mut acc = ZERO;
    for (j, &rj) in nodes.iter().enumerate() {
        let mut w = (r / rj).powi(nu as i32);
        for (k, &rk) in nodes.iter().enumerate() {
            if k != j {
                w *= (r - rk) / (rj - rk);
            }
        }
        acc += values[j + 1] * w;
    }
    acc
}

/// `(A - λ)^{-1} f` for a source given pointwise, sampled on the problem grid.
///
/// The source is taken to vanish past `X`, where each exterior mode continues as
/// `u(X) K_ν(κr)/K_ν(κX)`.
pub fn fd_resolvent(
    problem: &Problem,
    lambda: Complex64,
    modes: &[i32],
    source: &(dyn Fn(Side, i32, f64) -> Complex64 + Sync),
    options: FdOptions,
) -> Result<Field> {
    if options.levels == 0 || options.points_per_unit == 0 {
        return Err(KreinError::InvalidArgument("oracle needs at least one mesh".into()));
    }
    let grid = problem.grid();
    let end = problem.truncation_radius();
    let coarse = Mesh::new(
        &breakpoints(&problem.spec().potential, problem.interface_radius(), end),
        options.points_per_unit,
    );
    let mut out = Field::new(FieldSide::Whole);
    for &m in modes {
        let mut mesh = coarse.clone();
        let mut levels = Vec::with_capacity(options.levels);
        for l in 0..options.levels {
            if l > 0 {
                mesh = mesh.refined();
            }
            levels.push(solve_mode(problem, &mesh, m, lambda, source)?);
        }
        let values = extrapolate(levels);
        out.insert(
            grid,
            ModeFunction::from_fn(m, Side::Interior, grid, |r| {
                interpolate_interior(&coarse, &values, r, m.unsigned_abs())
            }),
        )?;
        let tail = vec![TailTerm::new(*values.last().unwrap(), kappa(lambda)?)];
        out.insert(
            grid,
            ModeFunction::from_fn(m, Side::Exterior, grid, |r| interpolate(&coarse, &values, r, false)).with_tail(tail),
        )?;
    }
    Ok(out)
}

/// Settings for [`fd_eigenvalue`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Dirichlet wall; eigenfunctions must have decayed there.
    pub outer_radius: f64,
    /// Intervals per unit length of the dense coarse problem.
    pub coarse_points_per_unit: usize,
    /// Intervals per unit length of the first refined mesh.
    pub points_per_unit: usize,
    pub levels: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            outer_radius: 12.0,
            coarse_points_per_unit: 12,
            points_per_unit: 64,
            levels: 4,
        }
    }
}

/// Eigenvalues of the dense coarse mode-`m` discretization with a Dirichlet wall.
pub fn fd_dense_eigenvalues(
    potential: &RadialPotential,
    radius: f64,
    m: i32,
    options: EigenOptions,
) -> Result<Vec<Complex64>> {
    let nu = check_mode(m)?;
    let mesh = Mesh::new(
        &breakpoints(potential, radius, options.outer_radius),
        options.coarse_points_per_unit,
    );
    let disc = wall_discretization(potential, radius, &mesh, nu, ZERO);
    let n = disc.matrix.len();
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = disc.matrix.diag[i] / disc.areas[i];
        if i > 0 {
            a[(i, i - 1)] = disc.matrix.sub[i] / disc.areas[i];
        }
        if i + 1 < n {
            a[(i, i + 1)] = disc.matrix.sup[i] / disc.areas[i];
        }
    }
    let schur = Schur::try_new(a, f64::EPSILON, 10_000)
        .ok_or_else(|| KreinError::Singular("dense eigensolver did not converge".into()))?;
    let mut ev: Vec<Complex64> = schur
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

/// Drops the wall node so the last unknown sits next to `u(outer) = 0`.
fn wall_discretization(
    potential: &RadialPotential,
    radius: f64,
    mesh: &Mesh,
    nu: u32,
    lambda: Complex64,
) -> Discretization {
    let pot = |_: Side, r: f64| potential.value_at(r);
    let mut disc = discretize(mesh, nu, &pot, radius, lambda, None);
    disc.matrix.sub.pop();
    disc.matrix.diag.pop();
    disc.matrix.sup.pop();
    disc.areas.pop();
    if let Some(last) = disc.matrix.sup.last_mut() {
        *last = ZERO;
    }
    disc
}

/// Eigenvalue of mode `m` nearest `target`, from the dense coarse problem polished by
/// inverse iteration on refined meshes and extrapolated in `h²`.
pub fn fd_eigenvalue(
    potential: &RadialPotential,
    radius: f64,
    m: i32,
    target: Complex64,
    options: EigenOptions,
) -> Result<Complex64> {
    let nu = check_mode(m)?;
    let dense = fd_dense_eigenvalues(potential, radius, m, options)?;
    let mut guess = *dense
        .iter()
        .min_by(|a, b| (*a - target).norm().total_cmp(&(*b - target).norm()))
        .ok_or_else(|| KreinError::Singular("no eigenvalues in the dense problem".into()))?;
    let mut mesh = Mesh::new(
        &breakpoints(potential, radius, options.outer_radius),
        options.points_per_unit,
    );
    let mut values = Vec::with_capacity(options.levels);
    for l in 0..options.levels {
        if l > 0 {
            mesh = mesh.refined();
        }
        guess = inverse_iteration(potential, radius, &mesh, nu, guess)?;
        values.push(vec![guess]);
    }
    Ok(extrapolate(values)[0])
}

/// Shifted inverse iteration with the complex-symmetric Rayleigh quotient
/// `uᵀ K u / uᵀ D u` of the pencil `(K, D)`, `D` the cell areas.
fn inverse_iteration(
    potential: &RadialPotential,
    radius: f64,
    mesh: &Mesh,
    nu: u32,
    shift: Complex64,
) -> Result<Complex64> {
    let stiffness = wall_discretization(potential, radius, mesh, nu, ZERO);
    let n = stiffness.matrix.len();
    let areas = &stiffness.areas;
    let apply_k = |u: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let mut s = stiffness.matrix.diag[i] * u[i];
                if i > 0 {
                    s += stiffness.matrix.sub[i] * u[i - 1];
                }
                if i + 1 < n {
                    s += stiffness.matrix.sup[i] * u[i + 1];
                }
                s
            })
            .collect()
    };
    let quotient = |u: &[Complex64]| -> Complex64 {
        let ku = apply_k(u);
        let num: Complex64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
        let den: Complex64 = u.iter().zip(areas).map(|(a, w)| a * a * *w).sum();
        num / den
    };
    let mut u = vec![Complex64::new(1.0, 0.0); n];
    let mut sigma = shift;
    let mut previous = sigma;
    for it in 0..100 {
        let mut shifted = stiffness.matrix.clone();
        for i in 0..n {
            shifted.diag[i] -= sigma * areas[i];
        }
        let rhs: Vec<Complex64> = u.iter().zip(areas).map(|(a, w)| a * *w).collect();
        let x = shifted.solve(&rhs)?;
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        u = x.iter().map(|v| v / norm).collect();
        let next = quotient(&u);
        // Rayleigh shifts only once the vector has locked onto the eigenvalue
        if it >= 3 {
            sigma = next;
        }
        if it >= 4 && (next - previous).norm() <= 1e-14 * (1.0 + next.norm()) {
            return Ok(next);
        }
        previous = next;
    }
    Ok(previous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ProblemSpec;
    use crate::krein::full_resolvent_apply;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn problem(v: Complex64, n: u32) -> Problem {
        let potential = if v == ZERO {
            RadialPotential::zero()
        } else {
            RadialPotential::disk(1.0, v)
        };
        Problem::new(ProblemSpec::new(1.0, 4.0, n, 200, potential)).unwrap()
    }

    #[test]
    fn tridiagonal_solve_with_pivoting() {
        let t = Tridiagonal {
            sub: vec![ZERO, c(3.0, 0.0), c(1.0, 1.0), c(2.0, 0.0)],
            diag: vec![c(1e-3, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(4.0, -1.0)],
            sup: vec![c(2.0, 0.0), c(-1.0, 2.0), c(5.0, 0.0), ZERO],
        };
        let x = [c(1.0, 2.0), c(-1.0, 0.5), c(0.3, 0.0), c(2.0, -2.0)];
        let b: Vec<Complex64> = (0..4)
            .map(|i| {
                let mut s = t.diag[i] * x[i];
                if i > 0 {
                    s += t.sub[i] * x[i - 1];
                }
                if i < 3 {
                    s += t.sup[i] * x[i + 1];
                }
                s
            })
            .collect();
        let y = t.solve(&b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn mesh_contains_breakpoints() {
        let mesh = Mesh::new(&[0.0, 0.35, 1.0, 4.0], 10);
        for b in [0.35, 1.0, 4.0] {
            assert!(mesh.nodes.contains(&b));
        }
        let fine = mesh.refined();
        for (i, r) in mesh.nodes.iter().enumerate() {
            assert_eq!(fine.nodes[2 * i], *r);
        }
    }

    fn gaussian(m: i32, r: f64, center: f64) -> Complex64 {
        c(r.powi(m.abs()) * (-3.0 * (r - center).powi(2)).exp(), 0.0)
    }

    #[test]
    fn oracle_matches_transfer_solver() {
        let p = problem(c(2.0, 1.0), 3);
        let grid = p.grid();
        let lambda = c(-2.0, 0.5);
        let modes = [0, 1, -3];
        let source = |side: Side, m: i32, r: f64| match side {
            Side::Interior => gaussian(m, r, 0.6),
            Side::Exterior => gaussian(m, r, 1.6) * c(0.5, -1.0),
        };
        let mut f = Field::new(FieldSide::Whole);
        for &m in &modes {
            for side in [Side::Interior, Side::Exterior] {
                f.insert(grid, ModeFunction::from_fn(m, side, grid, |r| source(side, m, r)))
                    .unwrap();
            }
        }
        let exact = full_resolvent_apply(&p, lambda, &f).unwrap();
        let oracle = fd_resolvent(&p, lambda, &modes, &source, FdOptions::default()).unwrap();
        let diff = exact.sub(&oracle).unwrap();
        let rel = crate::field::field_norm(grid, &diff).unwrap() / crate::field::field_norm(grid, &exact).unwrap();
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn real_well_eigenvalue() {
        let v = RadialPotential::disk(1.0, c(-10.0, 0.0));
        let ev = fd_eigenvalue(&v, 1.0, 0, c(-6.0, 0.0), EigenOptions::default()).unwrap();
        assert!((ev - c(-6.766_865_519_043_489, 0.0)).norm() < 1e-6, "{ev}");
        let ev = fd_eigenvalue(&v, 1.0, 1, c(-2.0, 0.0), EigenOptions::default()).unwrap();
        assert!((ev - c(-2.288_398_767_448_363, 0.0)).norm() < 1e-6, "{ev}");
    }

    #[test]
    fn complex_well_eigenvalue() {
        let v = RadialPotential::disk(1.0, c(-10.0, -2.0));
        let ev = fd_eigenvalue(&v, 1.0, 0, c(-7.0, -2.0), EigenOptions::default()).unwrap();
        let reference = c(-6.745_388_181_154_147, -1.822_086_664_888_403_3);
        assert!((ev - reference).norm() < 1e-6, "{ev}");
    }
}
