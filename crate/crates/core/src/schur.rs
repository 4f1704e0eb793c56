//! Finite-dimensional Kreĭn identity for a partitioned five-point operator.
//!
//! The grid operator `A = -Δ_h + V` on `[-L, L]²` is split into interior nodes `I`
//! (strictly inside the disk), an interface layer `S` (outside nodes touching `I`)
//! and the rest `E`. Since `A_IE = 0`, eliminating `I` and `E` gives Schur
//! complements on `S` that play the roles of the two DtN maps, and the compressed
//! inverse has the block-elimination form
//!
//! `[(A - λ)^{-1}]_II = (A_II - λ)^{-1} + γ_h (M_h + τ_h)^{-1} γ̃_h*`
//!
//! with `γ_h = -(A_II - λ)^{-1} A_IS` and `γ̃_h* = -A_SI (A_II - λ)^{-1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{KreinError, Result};
use crate::geometry::Side;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest pivot, relative to the largest, accepted in a block solve.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Default pass threshold of [`discrete_krein_identity`].
pub const IDENTITY_TOLERANCE: f64 = 1e-11;

/// How the interface block `A_SS` and the identity on `S` are shared between sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    /// Interior part: legs into `I` plus half the self term; `w_i = 1/2`.
    Half,
    /// `A_SS^i = A_SS`, `w_i = 1`.
    AllInterior,
}

/// Compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(ZERO, |e| e.1)
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    /// Dense submatrix on `rows × cols`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
        let mut position = vec![usize::MAX; self.n];
        for (k, &j) in cols.iter().enumerate() {
            position[j] = k;
        }
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for &(j, v) in &self.rows[i] {
                if position[j] != usize::MAX {
                    out[(a, position[j])] = v;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let all: Vec<usize> = (0..self.n).collect();
        self.block(&all, &all)
    }

    fn from_dense(a: &DMatrix<Complex64>) -> Self {
        let rows = (0..a.nrows())
            .map(|i| {
                (0..a.ncols())
                    .filter(|&j| a[(i, j)] != ZERO)
                    .map(|j| (j, a[(i, j)]))
                    .collect()
            })
            .collect();
        Self { n: a.nrows(), rows }
    }
}

/// A grid operator with its interior / interface / exterior partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedOperator {
    pub matrix: SparseMatrix,
    pub interior: Vec<usize>,
    pub interface: Vec<usize>,
    pub exterior: Vec<usize>,
    pub splitting: Splitting,
    /// `A_SS^i`, the interior share of the interface block.
    interior_share: DMatrix<Complex64>,
    /// `w_i`.
    identity_share: f64,
}

/// Row-major node index of grid point `(i, j)`, `x = -L + (i + 1) h`.
fn node(n: usize, i: usize, j: usize) -> usize {
    j * n + i
}

/// Five-point `-Δ_h + V` on the `n × n` interior nodes of `[-L, L]²` (Dirichlet
/// walls, `h = 2L/(n+1)`), partitioned by the disk of radius `disk_radius`.
///
/// `potential_values` are per node in row-major order.
pub fn build_partitioned(
    n: usize,
    half_width: f64,
    disk_radius: f64,
    potential_values: &[Complex64],
    splitting: Splitting,
) -> Result<PartitionedOperator> {
    if n < 8 {
        return Err(KreinError::InvalidArgument(format!("grid size {n} is below 8")));
    }
    if !(half_width > 0.0) || !(disk_radius > 0.0) {
        return Err(KreinError::InvalidArgument(
            "box half-width and disk radius must be positive".into(),
        ));
    }
    if potential_values.len() != n * n {
        return Err(KreinError::Mismatch(format!(
            "{} potential values for {} nodes",
            potential_values.len(),
            n * n
        )));
    }
    let h = 2.0 * half_width / (n + 1) as f64;
    // the interface layer and one exterior layer must fit inside the outermost nodes
    if disk_radius + h >= half_width - h {
        return Err(KreinError::InvalidArgument(format!(
            "disk of radius {disk_radius} reaches the boundary layer of the box (h = {h})"
        )));
    }
    let coord = |i: usize| -half_width + (i + 1) as f64 * h;
    let inside = |i: usize, j: usize| coord(i).hypot(coord(j)) < disk_radius;
    let neighbours = |i: usize, j: usize| {
        let mut v = Vec::with_capacity(4);
        if i > 0 {
            v.push((i - 1, j));
        }
        if i + 1 < n {
            v.push((i + 1, j));
        }
        if j > 0 {
            v.push((i, j - 1));
        }
        if j + 1 < n {
            v.push((i, j + 1));
        }
        v
    };
    let inv_h2 = 1.0 / (h * h);
    let mut rows = vec![Vec::new(); n * n];
    let (mut interior, mut interface, mut exterior) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..n {
        for i in 0..n {
            let k = node(n, i, j);
            let mut row = vec![(k, Complex64::from(4.0 * inv_h2) + potential_values[k])];
            for (a, b) in neighbours(i, j) {
                row.push((node(n, a, b), Complex64::from(-inv_h2)));
            }
            row.sort_by_key(|e| e.0);
            rows[k] = row;
            if inside(i, j) {
                interior.push(k);
            } else if neighbours(i, j).into_iter().any(|(a, b)| inside(a, b)) {
                interface.push(k);
            } else {
                exterior.push(k);
            }
        }
    }
    for (name, class) in [
        ("interior", &interior),
        ("interface", &interface),
        ("exterior", &exterior),
    ] {
        if class.is_empty() {
            return Err(KreinError::InvalidArgument(format!("{name} node set is empty")));
        }
    }
    let matrix = SparseMatrix { n: n * n, rows };
    let in_interior = {
        let mut v = vec![false; n * n];
        interior.iter().for_each(|&k| v[k] = true);
        v
    };
    let a_ss = matrix.block(&interface, &interface);
    let (interior_share, identity_share) = match splitting {
        Splitting::AllInterior => (a_ss, 1.0),
        Splitting::Half => {
            let mut share = DMatrix::zeros(interface.len(), interface.len());
            for (a, &k) in interface.iter().enumerate() {
                let legs = matrix.rows[k].iter().filter(|e| e.0 != k && in_interior[e.0]).count();
                share[(a, a)] = Complex64::from(legs as f64 * inv_h2) + 0.5 * potential_values[k];
            }
            (share, 0.5)
        }
    };
    let op = PartitionedOperator {
        matrix,
        interior,
        interface,
        exterior,
        splitting,
        interior_share,
        identity_share,
    };
    op.check_separation()?;
    Ok(op)
}

impl PartitionedOperator {
    /// Explicit matrix and partition; `interior_share` is `A_SS^i` and `identity_share` is `w_i`.
    pub fn from_dense(
        matrix: &DMatrix<Complex64>,
        interior: Vec<usize>,
        interface: Vec<usize>,
        exterior: Vec<usize>,
        interior_share: DMatrix<Complex64>,
        identity_share: f64,
    ) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(KreinError::Mismatch("operator matrix is not square".into()));
        }
        let mut seen = vec![0u8; n];
        for &k in interior.iter().chain(&interface).chain(&exterior) {
            if k >= n {
                return Err(KreinError::InvalidArgument(format!("index {k} outside the matrix")));
            }
            seen[k] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(KreinError::InvalidArgument(
                "partition classes must cover every index exactly once".into(),
            ));
        }
        if interior.is_empty() || interface.is_empty() {
            return Err(KreinError::InvalidArgument(
                "interior and interface sets must be nonempty".into(),
            ));
        }
        if interior_share.shape() != (interface.len(), interface.len()) {
            return Err(KreinError::Mismatch(
                "interior share must be square on the interface".into(),
            ));
        }
        let op = Self {
            matrix: SparseMatrix::from_dense(matrix),
            interior,
            interface,
            exterior,
            splitting: Splitting::AllInterior,
            interior_share,
            identity_share,
        };
        op.check_separation()?;
        Ok(op)
    }

    fn check_separation(&self) -> Result<()> {
        let mut is_exterior = vec![false; self.matrix.n];
        self.exterior.iter().for_each(|&k| is_exterior[k] = true);
        let mut is_interior = vec![false; self.matrix.n];
        self.interior.iter().for_each(|&k| is_interior[k] = true);
        for i in 0..self.matrix.n {
            for &(j, v) in &self.matrix.rows[i] {
                if v != ZERO && ((is_interior[i] && is_exterior[j]) || (is_exterior[i] && is_interior[j])) {
                    return Err(KreinError::InvalidArgument(format!(
                        "interior and exterior nodes {i}, {j} are coupled directly"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `A_SS^i`.
    pub fn interior_share(&self) -> &DMatrix<Complex64> {
        &self.interior_share
    }

    /// `A_SS^e = A_SS - A_SS^i`.
    pub fn exterior_share(&self) -> DMatrix<Complex64> {
        self.matrix.block(&self.interface, &self.interface) - &self.interior_share
    }

    /// `w_i`; the exterior share of the identity is `1 - w_i`.
    pub fn identity_share(&self) -> f64 {
        self.identity_share
    }

    fn class(&self, side: Side) -> &[usize] {
        match side {
            Side::Interior => &self.interior,
            Side::Exterior => &self.exterior,
        }
    }
}

/// LU with partial pivoting of `A_XX - λ`, confined to the band of the block.
/// Refuses nearly singular blocks.
struct BlockSolver {
    /// `L` below the diagonal (unit diagonal implied), `U` on and above.
    lu: DMatrix<Complex64>,
    /// Row swapped with row `k` at step `k`.
    swaps: Vec<usize>,
    lower: usize,
    /// Upper bandwidth of `U`, grown by pivoting to at most `lower + upper`.
    upper: usize,
}

impl BlockSolver {
    fn new(mut a: DMatrix<Complex64>, lambda: Complex64, what: &str) -> Result<Self> {
        let n = a.nrows();
        for i in 0..n {
            a[(i, i)] -= lambda;
        }
        let (mut lower, mut upper) = (0, 0);
        for j in 0..n {
            for i in 0..n {
                if a[(i, j)] != ZERO {
                    lower = lower.max(i.saturating_sub(j));
                    upper = upper.max(j.saturating_sub(i));
                }
            }
        }
        let upper = (lower + upper).min(n.saturating_sub(1));
        let mut swaps = Vec::with_capacity(n);
        for k in 0..n {
            let last_row = (k + lower).min(n - 1);
            let last_col = (k + upper).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&x, &y| a[(x, k)].norm().total_cmp(&a[(y, k)].norm()))
                .unwrap_or(k);
            swaps.push(p);
            if p != k {
                for j in k..=last_col {
                    a.swap((k, j), (p, j));
                }
            }
            let pivot = a[(k, k)];
            if pivot == ZERO {
                continue;
            }
            for i in k + 1..=last_row {
                let l = a[(i, k)] / pivot;
                a[(i, k)] = l;
                if l != ZERO {
                    for j in k + 1..=last_col {
                        let u = a[(k, j)];
                        a[(i, j)] -= l * u;
                    }
                }
            }
        }
        let pivots = (0..n).map(|k| a[(k, k)].norm());
        let max = pivots.clone().fold(0.0, f64::max);
        let min = pivots.fold(f64::INFINITY, f64::min);
        if !(min > PIVOT_TOLERANCE * max) {
            return Err(KreinError::Singular(format!(
                "{what} block is singular at lambda = {lambda} (pivot ratio {:e})",
                min / max
            )));
        }
        Ok(Self {
            lu: a,
            swaps,
            lower,
            upper,
        })
    }

    fn solve(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.lu.nrows();
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            for k in 0..n {
                col.swap_rows(k, self.swaps[k]);
                let v = col[k];
                if v != ZERO {
                    for i in k + 1..=(k + self.lower).min(n - 1) {
                        col[i] -= self.lu[(i, k)] * v;
                    }
                }
            }
            for k in (0..n).rev() {
                let mut v = col[k];
                for j in k + 1..=(k + self.upper).min(n - 1) {
                    v -= self.lu[(k, j)] * col[j];
                }
                col[k] = v / self.lu[(k, k)];
            }
        }
        x
    }
}

/// `M_h(λ)` for the interior or `τ_h(λ)` for the exterior, a dense matrix on `S`.
pub fn discrete_dtn(op: &PartitionedOperator, side: Side, lambda: Complex64) -> Result<DMatrix<Complex64>> {
    let (share, w) = match side {
        Side::Interior => (op.interior_share.clone(), op.identity_share),
        Side::Exterior => (op.exterior_share(), 1.0 - op.identity_share),
    };
    let s = op.interface.len();
    let mut out = share - DMatrix::from_diagonal_element(s, s, lambda * w);
    let class = op.class(side);
    if class.is_empty() {
        return Ok(out);
    }
    let solver = BlockSolver::new(op.matrix.block(class, class), lambda, side.as_str())?;
    let a_xs = op.matrix.block(class, &op.interface);
    let a_sx = op.matrix.block(&op.interface, class);
    out -= a_sx * solver.solve(&a_xs);
    Ok(out)
}

/// Residuals of the discrete Kreĭn identities at one `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteKreinReport {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub interior_nodes: usize,
    pub interface_nodes: usize,
    pub exterior_nodes: usize,
    pub splitting: Splitting,
    /// `max |[(A-λ)^{-1}]_II - formula| / max |[(A-λ)^{-1}]_II|`.
    pub compressed_residual: f64,
    /// Same on the `(I ∪ E)²` blocks with the four-fold `Θ` correction.
    pub full_residual: f64,
    /// `max |(M_h + τ_h) [(A-λ)^{-1}]_SS - Id|`.
    pub sum_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Both sides of the compressed and the two-block identities, against a dense
/// inverse of the whole operator.
pub fn discrete_krein_identity(op: &PartitionedOperator, lambda: Complex64) -> Result<DiscreteKreinReport> {
    let (i_set, s_set, e_set) = (&op.interior, &op.interface, &op.exterior);
    let whole = BlockSolver::new(op.matrix.to_dense(), lambda, "whole-space")?;
    let n = op.matrix.order();
    let resolvent = whole.solve(&DMatrix::identity(n, n));
    let pick =
        |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |a, b| resolvent[(rows[a], cols[b])]);

    let interior = BlockSolver::new(op.matrix.block(i_set, i_set), lambda, "interior")?;
    let exterior = if e_set.is_empty() {
        None
    } else {
        Some(BlockSolver::new(op.matrix.block(e_set, e_set), lambda, "exterior")?)
    };
    let m = discrete_dtn(op, Side::Interior, lambda)?;
    let tau = discrete_dtn(op, Side::Exterior, lambda)?;
    let sum = &m + &tau;
    let sum_lu = BlockSolver::new(sum.clone(), ZERO, "M_h + tau_h")?;
    let ns = s_set.len();
    let theta = sum_lu.solve(&DMatrix::identity(ns, ns));

    let r_ii = interior.solve(&DMatrix::identity(i_set.len(), i_set.len()));
    let gamma_i = -(interior.solve(&op.matrix.block(i_set, s_set)));
    let gamma_i_adj = -(op.matrix.block(s_set, i_set) * &r_ii);
    let formula = &r_ii + &gamma_i * &theta * &gamma_i_adj;
    let exact_ii = pick(i_set, i_set);
    let compressed_residual = max_abs(&(&exact_ii - &formula)) / max_abs(&exact_ii);

    // full identity on I ∪ E: block-diagonal Dirichlet resolvent plus the Θ coupling
    let ie: Vec<usize> = i_set.iter().chain(e_set.iter()).copied().collect();
    let (ni, ne) = (i_set.len(), e_set.len());
    let mut gamma = DMatrix::zeros(ni + ne, ns);
    let mut gamma_adj = DMatrix::zeros(ns, ni + ne);
    let mut base = DMatrix::zeros(ni + ne, ni + ne);
    gamma.view_mut((0, 0), (ni, ns)).copy_from(&gamma_i);
    gamma_adj.view_mut((0, 0), (ns, ni)).copy_from(&gamma_i_adj);
    base.view_mut((0, 0), (ni, ni)).copy_from(&r_ii);
    if let Some(ext) = &exterior {
        let r_ee = ext.solve(&DMatrix::identity(ne, ne));
        let gamma_e = -(ext.solve(&op.matrix.block(e_set, s_set)));
        let gamma_e_adj = -(op.matrix.block(s_set, e_set) * &r_ee);
        gamma.view_mut((ni, 0), (ne, ns)).copy_from(&gamma_e);
        gamma_adj.view_mut((0, ni), (ns, ne)).copy_from(&gamma_e_adj);
        base.view_mut((ni, ni), (ne, ne)).copy_from(&r_ee);
    }
    let full = base + &gamma * &theta * &gamma_adj;
    let exact_full = pick(&ie, &ie);
    let full_residual = max_abs(&(&exact_full - &full)) / max_abs(&exact_full);

    let sum_residual = max_abs(&(&sum * pick(s_set, s_set) - DMatrix::<Complex64>::identity(ns, ns)));

    let tolerance = IDENTITY_TOLERANCE;
    Ok(DiscreteKreinReport {
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        interior_nodes: ni,
        interface_nodes: ns,
        exterior_nodes: ne,
        splitting: op.splitting,
        compressed_residual,
        full_residual,
        sum_residual,
        tolerance,
        pass: compressed_residual <= tolerance && full_residual <= tolerance && sum_residual <= tolerance,
    })
}

/// Per-node values `value` on nodes with `|x| < radius`, zero elsewhere.
pub fn disk_potential(n: usize, half_width: f64, radius: f64, value: Complex64) -> Vec<Complex64> {
    let h = 2.0 * half_width / (n + 1) as f64;
    let coord = |i: usize| -half_width + (i + 1) as f64 * h;
    (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            if coord(i).hypot(coord(j)) < radius {
                value
            } else {
                ZERO
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn band_solver_matches_dense_lu() {
        // small diagonal forces row exchanges
        let n = 12;
        let a = DMatrix::from_fn(n, n, |i, j| match i as i64 - j as i64 {
            0 => c(1e-3 * (i + 1) as f64, 0.1),
            -2..=-1 => c(1.0 + j as f64, -0.5),
            1..=3 => c(0.7, i as f64 * 0.3),
            _ => ZERO,
        });
        let b = DMatrix::from_fn(n, 3, |i, j| c(i as f64 - j as f64, 1.0));
        let band = BlockSolver::new(a.clone(), c(0.2, 0.0), "test").unwrap().solve(&b);
        let mut shifted = a;
        for i in 0..n {
            shifted[(i, i)] -= c(0.2, 0.0);
        }
        let dense = shifted.lu().solve(&b).unwrap();
        assert!(max_abs(&(band - &dense)) < 1e-12 * max_abs(&dense));
    }

    fn operator(n: usize, v: Complex64, splitting: Splitting) -> PartitionedOperator {
        build_partitioned(n, 2.0, 1.0, &disk_potential(n, 2.0, 1.0, v), splitting).unwrap()
    }

    #[test]
    fn partition_classes_and_separation() {
        let op = operator(16, ZERO, Splitting::Half);
        assert!(!op.interior.is_empty() && !op.interface.is_empty() && !op.exterior.is_empty());
        assert_eq!(op.interior.len() + op.interface.len() + op.exterior.len(), 256);
        assert!(max_abs(&op.matrix.block(&op.interior, &op.exterior)) == 0.0);
        assert!(max_abs(&op.matrix.block(&op.exterior, &op.interior)) == 0.0);
    }

    #[test]
    fn disk_touching_the_boundary_layer_is_rejected() {
        let err = build_partitioned(8, 2.0, 1.99, &vec![ZERO; 64], Splitting::Half).unwrap_err();
        assert!(matches!(err, KreinError::InvalidArgument(_)));
        assert!(build_partitioned(6, 2.0, 1.0, &vec![ZERO; 36], Splitting::Half).is_err());
        assert!(build_partitioned(16, 2.0, 1.0, &[ZERO; 10], Splitting::Half).is_err());
    }

    #[test]
    fn potential_sits_on_interior_diagonal() {
        let v = c(2.0, 1.0);
        let a = operator(16, v, Splitting::Half);
        let b = operator(16, ZERO, Splitting::Half);
        let (ai, bi) = (
            a.matrix.block(&a.interior, &a.interior),
            b.matrix.block(&b.interior, &b.interior),
        );
        let d = ai - bi;
        assert!(d
            .iter()
            .enumerate()
            .all(|(k, x)| if k % (d.nrows() + 1) == 0 { *x == v } else { *x == ZERO }));
        assert_eq!(
            a.matrix.block(&a.exterior, &a.exterior),
            b.matrix.block(&b.exterior, &b.exterior)
        );
    }

    #[test]
    fn splitting_is_exact() {
        for split in [Splitting::Half, Splitting::AllInterior] {
            let op = operator(16, c(2.0, 1.0), split);
            let total = op.interior_share() + op.exterior_share();
            assert_eq!(total, op.matrix.block(&op.interface, &op.interface));
        }
    }

    #[test]
    fn toy_three_by_three() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]).map(Complex64::from);
        let op = PartitionedOperator::from_dense(&a, vec![0], vec![1], vec![2], DMatrix::from_element(1, 1, ONE), 0.5)
            .unwrap();
        let m = discrete_dtn(&op, Side::Interior, ZERO).unwrap();
        let t = discrete_dtn(&op, Side::Exterior, ZERO).unwrap();
        assert!((m[(0, 0)] - 0.5).norm() < 1e-15);
        assert!((t[(0, 0)] - 0.5).norm() < 1e-15);
        // direct Schur complement 2 - 1/2 - 1/2
        assert!((m[(0, 0)] + t[(0, 0)] - 1.0).norm() < 1e-15);
        let report = discrete_krein_identity(&op, ZERO).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn uncoupled_interior_leaves_only_the_share() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 3.0, 1.0, 0.0, 1.0, 2.0]).map(Complex64::from);
        let share = DMatrix::from_element(1, 1, c(1.25, 0.0));
        let op = PartitionedOperator::from_dense(&a, vec![0], vec![1], vec![2], share, 0.5).unwrap();
        let lambda = c(-1.0, 0.5);
        let m = discrete_dtn(&op, Side::Interior, lambda).unwrap();
        assert!((m[(0, 0)] - (c(1.25, 0.0) - lambda * 0.5)).norm() < 1e-15);
    }

    #[test]
    fn direct_coupling_is_rejected() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]).map(Complex64::from);
        let share = DMatrix::from_element(1, 1, ONE);
        assert!(PartitionedOperator::from_dense(&a, vec![0], vec![1], vec![2], share, 0.5).is_err());
    }

    #[test]
    fn identity_holds_for_both_splittings() {
        for split in [Splitting::Half, Splitting::AllInterior] {
            for v in [ZERO, c(2.0, 1.0)] {
                for lambda in [c(-1.0, 0.0), c(-2.0, 0.5)] {
                    let report = discrete_krein_identity(&operator(16, v, split), lambda).unwrap();
                    assert!(report.pass, "{report:?}");
                }
            }
        }
    }

    #[test]
    fn sum_of_dtn_maps_is_splitting_independent() {
        let lambda = c(-2.0, 0.5);
        let a = operator(16, c(2.0, 1.0), Splitting::Half);
        let b = operator(16, c(2.0, 1.0), Splitting::AllInterior);
        let sa = discrete_dtn(&a, Side::Interior, lambda).unwrap() + discrete_dtn(&a, Side::Exterior, lambda).unwrap();
        let sb = discrete_dtn(&b, Side::Interior, lambda).unwrap() + discrete_dtn(&b, Side::Exterior, lambda).unwrap();
        assert!(max_abs(&(&sa - &sb)) <= 1e-13 * max_abs(&sa));
    }

    #[test]
    fn interior_eigenvalue_is_refused() {
        let op = operator(12, c(2.0, 1.0), Splitting::Half);
        let a_ii = op.matrix.block(&op.interior, &op.interior);
        let ev = a_ii.clone().schur().eigenvalues().unwrap();
        let lambda = ev[0];
        assert!(matches!(
            discrete_krein_identity(&op, lambda),
            Err(KreinError::Singular(_))
        ));
        assert!(discrete_dtn(&op, Side::Interior, lambda).is_err());
    }

    #[test]
    fn eigenvalues_of_the_whole_operator_make_the_sum_singular() {
        let op = operator(10, c(-40.0, -5.0), Splitting::Half);
        let whole = op.matrix.to_dense();
        let a_ii = op.matrix.block(&op.interior, &op.interior);
        let a_ee = op.matrix.block(&op.exterior, &op.exterior);
        let block_ev: Vec<Complex64> = a_ii
            .schur()
            .eigenvalues()
            .unwrap()
            .iter()
            .chain(a_ee.schur().eigenvalues().unwrap().iter())
            .copied()
            .collect();
        let ev = whole.schur().eigenvalues().unwrap();
        let mut checked = 0;
        for &lambda in ev.iter() {
            if block_ev
                .iter()
                .any(|b| (b - lambda).norm() < 1e-3 * (1.0 + lambda.norm()))
            {
                continue;
            }
            let sum =
                discrete_dtn(&op, Side::Interior, lambda).unwrap() + discrete_dtn(&op, Side::Exterior, lambda).unwrap();
            let sv = sum.clone().singular_values();
            let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(smallest <= 1e-8 * sv.max(), "{lambda}: {smallest}");
            checked += 1;
            if checked == 5 {
                break;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn real_potential_gives_hermitian_symmetry() {
        let op = operator(16, c(-3.0, 0.0), Splitting::Half);
        let lambda = c(-1.5, 0.7);
        for side in [Side::Interior, Side::Exterior] {
            let a = discrete_dtn(&op, side, lambda.conj()).unwrap();
            let b = discrete_dtn(&op, side, lambda).unwrap().adjoint();
            assert!(max_abs(&(&a - &b)) <= 1e-13 * max_abs(&a));
        }
    }
}
