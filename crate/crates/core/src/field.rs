//! Functions on `Ω`, `Ω'` and `ℝ²` in the angular Fourier representation, and
//! boundary data on `Σ`.
//!
//! A [`Field`] stores, per mode `m`, radial samples `f_m(r)` of
//! `f(r, θ) = Σ_m f_m(r) e^{imθ}` (unnormalized angular basis), so that
//! `(f, g) = 2π Σ_m ∫ f_m conj(g_m) r dr`. [`BoundaryData`] uses the orthonormal
//! basis `e^{imθ}/√(2π)` on the circle and the arc-length measure `R dθ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{KreinError, Result};
use crate::geometry::{RadialGrid, Side};
use crate::tail::{push_term, tail_pairing, TailTerm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// First and second radial derivatives at the sample nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub first: Vec<Complex64>,
    pub second: Vec<Complex64>,
}

/// Radial samples of one angular mode on one side of the interface.
///
/// Exterior functions may carry analytic tail terms describing them beyond the
/// truncation radius; samples then cover `[R, R_max]` and the tail `r >= R_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFunction {
    pub mode: i32,
    pub side: Side,
    pub values: Vec<Complex64>,
    /// Exact derivatives when the producer knows them (solver output, analytic
    /// test functions); otherwise grid differentiation is used.
    pub jet: Option<Jet>,
    pub tail: Vec<TailTerm>,
}

impl ModeFunction {
    pub fn zeros(mode: i32, side: Side, grid: &RadialGrid) -> Self {
        let n = grid.side(side).len();
        Self {
            mode,
            side,
            values: vec![ZERO; n],
            jet: Some(Jet {
                first: vec![ZERO; n],
                second: vec![ZERO; n],
            }),
            tail: Vec::new(),
        }
    }

    /// Samples `f` on the grid; derivatives will come from grid differentiation.
    pub fn from_fn(mode: i32, side: Side, grid: &RadialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            mode,
            side,
            values: grid.side(side).nodes.iter().map(|&r| f(r)).collect(),
            jet: None,
            tail: Vec::new(),
        }
    }

    /// Samples `f(r) = (u, u', u'')`, keeping the exact derivatives.
    pub fn from_jet_fn(
        mode: i32,
        side: Side,
        grid: &RadialGrid,
        f: impl Fn(f64) -> (Complex64, Complex64, Complex64),
    ) -> Self {
        let nodes = &grid.side(side).nodes;
        let mut values = Vec::with_capacity(nodes.len());
        let mut first = Vec::with_capacity(nodes.len());
        let mut second = Vec::with_capacity(nodes.len());
        for &r in nodes {
            let (u, d1, d2) = f(r);
            values.push(u);
            first.push(d1);
            second.push(d2);
        }
        Self {
            mode,
            side,
            values,
            jet: Some(Jet { first, second }),
            tail: Vec::new(),
        }
    }

    pub fn order(&self) -> u32 {
        self.mode.unsigned_abs()
    }

    pub fn with_tail(mut self, tail: Vec<TailTerm>) -> Self {
        self.tail = tail;
        self
    }

    pub fn without_jet(mut self) -> Self {
        self.jet = None;
        self
    }

    /// Value at the interface `R`.
    pub fn boundary_value(&self) -> Complex64 {
        match self.side {
            Side::Interior => *self.values.last().unwrap_or(&ZERO),
            Side::Exterior => *self.values.first().unwrap_or(&ZERO),
        }
    }

    /// One-sided radial derivative `∂_r u` at `R`.
    pub fn boundary_derivative(&self, grid: &RadialGrid) -> Complex64 {
        let idx = grid.side(self.side).interface_index();
        match &self.jet {
            Some(jet) => jet.first[idx],
            None => grid.side(self.side).differentiate(&self.values)[idx],
        }
    }

    /// `(u', u'')` at every node.
    pub fn derivatives(&self, grid: &RadialGrid) -> (Vec<Complex64>, Vec<Complex64>) {
        match &self.jet {
            Some(jet) => (jet.first.clone(), jet.second.clone()),
            None => {
                let g = grid.side(self.side);
                (g.differentiate(&self.values), g.differentiate2(&self.values))
            }
        }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self {
            mode: self.mode,
            side: self.side,
            values: self.values.iter().map(|v| v * a).collect(),
            jet: self.jet.as_ref().map(|j| Jet {
                first: j.first.iter().map(|v| v * a).collect(),
                second: j.second.iter().map(|v| v * a).collect(),
            }),
            tail: self.tail.iter().map(|t| TailTerm::new(t.coeff * a, t.kappa)).collect(),
        }
    }

    /// `self += a · other`. The jet survives only if both operands carry one.
    pub fn axpy(&mut self, a: Complex64, other: &ModeFunction) -> Result<()> {
        if self.mode != other.mode || self.side != other.side || self.values.len() != other.values.len() {
            return Err(KreinError::Mismatch(format!(
                "cannot combine mode {} ({}) with mode {} ({})",
                self.mode,
                self.side.as_str(),
                other.mode,
                other.side.as_str()
            )));
        }
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        self.jet = match (self.jet.take(), &other.jet) {
            (Some(mut j), Some(k)) => {
                for (x, y) in j.first.iter_mut().zip(&k.first) {
                    *x += a * y;
                }
                for (x, y) in j.second.iter_mut().zip(&k.second) {
                    *x += a * y;
                }
                Some(j)
            }
            _ => None,
        };
        for t in &other.tail {
            push_term(&mut self.tail, TailTerm::new(t.coeff * a, t.kappa));
        }
        Ok(())
    }

    fn check_shape(&self, grid: &RadialGrid) -> Result<()> {
        let n = grid.side(self.side).len();
        if self.values.len() != n {
            return Err(KreinError::Mismatch(format!(
                "mode {} has {} samples, {} grid has {n}",
                self.mode,
                self.values.len(),
                self.side.as_str()
            )));
        }
        if let Some(j) = &self.jet {
            if j.first.len() != n || j.second.len() != n {
                return Err(KreinError::Mismatch(format!("mode {} jet length", self.mode)));
            }
        }
        if self.side == Side::Interior && !self.tail.is_empty() {
            return Err(KreinError::Mismatch("interior functions carry no tail".into()));
        }
        if self.side == Side::Interior && self.mode != 0 && !self.regular_at_origin(grid) {
            return Err(KreinError::InvalidArgument(format!(
                "interior mode {} does not vanish like r^{} at the origin",
                self.mode,
                self.order()
            )));
        }
        Ok(())
    }

    /// `|u(r_1)| <= 10 max |u(r_i)| (r_1/r_i)^{|m|}` over nodes `r_i >= R/8`, plus roundoff slack.
    pub fn regular_at_origin(&self, grid: &RadialGrid) -> bool {
        let max = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if max == 0.0 || self.mode == 0 {
            return true;
        }
        let nodes = &grid.interior.nodes;
        let nu = self.order() as i32;
        let envelope = nodes
            .iter()
            .zip(&self.values)
            .filter(|(&r, _)| r >= grid.interface_radius / 8.0)
            .map(|(&r, v)| v.norm() * (nodes[0] / r).powi(nu))
            .fold(0.0, f64::max);
        self.values[0].norm() <= 10.0 * envelope + 1e-10 * max
    }
}

/// `∫ u conj(v) r dr` over the side's grid plus, on the exterior, the analytic tail.
pub fn mode_inner(grid: &RadialGrid, u: &ModeFunction, v: &ModeFunction) -> Result<Complex64> {
    if u.side != v.side || u.values.len() != v.values.len() {
        return Err(KreinError::Mismatch("mode functions live on different grids".into()));
    }
    let g = grid.side(u.side);
    let integrand: Vec<Complex64> = u
        .values
        .iter()
        .zip(&v.values)
        .zip(&g.nodes)
        .map(|((a, b), &r)| a * b.conj() * r)
        .collect();
    let mut acc = g.integrate(&integrand);
    if !u.tail.is_empty() && !v.tail.is_empty() {
        acc += tail_pairing(u.order(), &u.tail, &v.tail, grid.truncation_radius, true)?;
    }
    Ok(acc)
}

/// `(∫ |u|² r dr)^{1/2}`.
pub fn mode_norm(grid: &RadialGrid, u: &ModeFunction) -> Result<f64> {
    Ok(mode_inner(grid, u, u)?.re.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSide {
    Interior,
    Exterior,
    Whole,
}

impl FieldSide {
    pub fn contains(self, side: Side) -> bool {
        matches!(
            (self, side),
            (FieldSide::Whole, _) | (FieldSide::Interior, Side::Interior) | (FieldSide::Exterior, Side::Exterior)
        )
    }
}

/// Collection of mode functions; absent modes are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    side: FieldSide,
    interior: BTreeMap<i32, ModeFunction>,
    exterior: BTreeMap<i32, ModeFunction>,
}

impl Field {
    pub fn new(side: FieldSide) -> Self {
        Self {
            side,
            interior: BTreeMap::new(),
            exterior: BTreeMap::new(),
        }
    }

    pub fn side(&self) -> FieldSide {
        self.side
    }

    /// Adds or replaces the mode function for `(f.side, f.mode)`.
    pub fn insert(&mut self, grid: &RadialGrid, f: ModeFunction) -> Result<()> {
        if !self.side.contains(f.side) {
            return Err(KreinError::Mismatch(format!(
                "{} mode function in a {:?} field",
                f.side.as_str(),
                self.side
            )));
        }
        f.check_shape(grid)?;
        match f.side {
            Side::Interior => self.interior.insert(f.mode, f),
            Side::Exterior => self.exterior.insert(f.mode, f),
        };
        Ok(())
    }

    /// Field from explicit samples; reading them back is bit-exact.
    pub fn from_samples(grid: &RadialGrid, side: Side, samples: BTreeMap<i32, Vec<Complex64>>) -> Result<Self> {
        let mut field = Field::new(match side {
            Side::Interior => FieldSide::Interior,
            Side::Exterior => FieldSide::Exterior,
        });
        for (m, values) in samples {
            field.insert(
                grid,
                ModeFunction {
                    mode: m,
                    side,
                    values,
                    jet: None,
                    tail: Vec::new(),
                },
            )?;
        }
        Ok(field)
    }

    pub fn mode(&self, side: Side, m: i32) -> Option<&ModeFunction> {
        match side {
            Side::Interior => self.interior.get(&m),
            Side::Exterior => self.exterior.get(&m),
        }
    }

    pub fn modes(&self, side: Side) -> impl Iterator<Item = &ModeFunction> {
        match side {
            Side::Interior => self.interior.values(),
            Side::Exterior => self.exterior.values(),
        }
    }

    /// Sorted union of mode numbers present on either side.
    pub fn mode_numbers(&self) -> Vec<i32> {
        let mut ms: Vec<i32> = self.interior.keys().chain(self.exterior.keys()).copied().collect();
        ms.sort_unstable();
        ms.dedup();
        ms
    }

    /// The interior or exterior part as a one-sided field.
    pub fn restrict(&self, side: Side) -> Field {
        match side {
            Side::Interior => Field {
                side: FieldSide::Interior,
                interior: self.interior.clone(),
                exterior: BTreeMap::new(),
            },
            Side::Exterior => Field {
                side: FieldSide::Exterior,
                interior: BTreeMap::new(),
                exterior: self.exterior.clone(),
            },
        }
    }

    /// `(f, 0)` or `(0, f')` embedded in a whole-space field.
    pub fn extend_by_zero(&self, grid: &RadialGrid) -> Field {
        let mut out = Field {
            side: FieldSide::Whole,
            interior: self.interior.clone(),
            exterior: self.exterior.clone(),
        };
        for m in self.mode_numbers() {
            out.interior
                .entry(m)
                .or_insert_with(|| ModeFunction::zeros(m, Side::Interior, grid));
            out.exterior
                .entry(m)
                .or_insert_with(|| ModeFunction::zeros(m, Side::Exterior, grid));
        }
        out
    }

    /// `a · self + b · other`.
    pub fn combine(&self, a: Complex64, other: &Field, b: Complex64) -> Result<Field> {
        if self.side != other.side {
            return Err(KreinError::Mismatch("fields on different sides".into()));
        }
        let merge =
            |x: &BTreeMap<i32, ModeFunction>, y: &BTreeMap<i32, ModeFunction>| -> Result<BTreeMap<i32, ModeFunction>> {
                let mut out = BTreeMap::new();
                for (m, f) in x {
                    out.insert(*m, f.scale(a));
                }
                for (m, g) in y {
                    match out.get_mut(m) {
                        Some(f) => f.axpy(b, g)?,
                        None => {
                            out.insert(*m, g.scale(b));
                        }
                    }
                }
                Ok(out)
            };
        Ok(Field {
            side: self.side,
            interior: merge(&self.interior, &other.interior)?,
            exterior: merge(&self.exterior, &other.exterior)?,
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, a: Complex64) -> Field {
        Field {
            side: self.side,
            interior: self.interior.iter().map(|(m, f)| (*m, f.scale(a))).collect(),
            exterior: self.exterior.iter().map(|(m, f)| (*m, f.scale(a))).collect(),
        }
    }
}

/// `2π Σ_m ∫ f_m conj(g_m) r dr` (plus exterior tails), linear in `f`.
pub fn inner_product(grid: &RadialGrid, f: &Field, g: &Field) -> Result<Complex64> {
    if f.side != g.side {
        return Err(KreinError::Mismatch(format!(
            "inner product of {:?} and {:?} fields",
            f.side, g.side
        )));
    }
    let mut acc = ZERO;
    for side in [Side::Interior, Side::Exterior] {
        for a in f.modes(side) {
            if let Some(b) = g.mode(side, a.mode) {
                acc += mode_inner(grid, a, b)?;
            }
        }
    }
    Ok(acc * (2.0 * PI))
}

pub fn field_norm(grid: &RadialGrid, f: &Field) -> Result<f64> {
    Ok(inner_product(grid, f, f)?.re.max(0.0).sqrt())
}

/// Fourier coefficients of a function on the circle of radius `radius` with
/// respect to `e^{imθ}/√(2π)`, for `|m| <= mode_cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub radius: f64,
    pub mode_cutoff: u32,
    coeffs: Vec<Complex64>,
}

impl BoundaryData {
    pub fn zeros(radius: f64, mode_cutoff: u32) -> Self {
        Self {
            radius,
            mode_cutoff,
            coeffs: vec![ZERO; 2 * mode_cutoff as usize + 1],
        }
    }

    fn index(&self, m: i32) -> Result<usize> {
        if m.unsigned_abs() > self.mode_cutoff {
            return Err(KreinError::InvalidArgument(format!(
                "mode {m} exceeds cutoff {}",
                self.mode_cutoff
            )));
        }
        Ok((m + self.mode_cutoff as i32) as usize)
    }

    pub fn get(&self, m: i32) -> Result<Complex64> {
        Ok(self.coeffs[self.index(m)?])
    }

    pub fn set(&mut self, m: i32, value: Complex64) -> Result<()> {
        let i = self.index(m)?;
        self.coeffs[i] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        let n = self.mode_cutoff as i32;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i32 - n, *c))
    }
}

/// `R Σ_m φ_m conj(ψ_m)`.
pub fn boundary_inner_product(phi: &BoundaryData, psi: &BoundaryData) -> Result<Complex64> {
    if phi.mode_cutoff != psi.mode_cutoff {
        return Err(KreinError::Mismatch(format!(
            "boundary data with cutoffs {} and {}",
            phi.mode_cutoff, psi.mode_cutoff
        )));
    }
    if phi.radius != psi.radius {
        return Err(KreinError::Mismatch("boundary data on different circles".into()));
    }
    let sum: Complex64 = phi.coeffs.iter().zip(&psi.coeffs).map(|(a, b)| a * b.conj()).sum();
    Ok(sum * phi.radius)
}

/// `Γ^D f` on `Σ` taken from the given side.
pub fn dirichlet_trace(grid: &RadialGrid, f: &Field, side: Side, mode_cutoff: u32) -> Result<BoundaryData> {
    let mut out = BoundaryData::zeros(grid.interface_radius, mode_cutoff);
    for u in f.modes(side) {
        out.set(u.mode, u.boundary_value() * (2.0 * PI).sqrt())?;
    }
    Ok(out)
}

/// `Γ^N f = ∂_ν f` on `Σ` with the outward normal of the given side.
pub fn neumann_trace_field(grid: &RadialGrid, f: &Field, side: Side, mode_cutoff: u32) -> Result<BoundaryData> {
    let sign = match side {
        Side::Interior => 1.0,
        Side::Exterior => -1.0,
    };
    let mut out = BoundaryData::zeros(grid.interface_radius, mode_cutoff);
    for u in f.modes(side) {
        out.set(u.mode, u.boundary_derivative(grid) * sign * (2.0 * PI).sqrt())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> RadialGrid {
        RadialGrid::new(1.0, 4.0, &[], 100).unwrap()
    }

    fn interior(g: &RadialGrid, m: i32, f: impl Fn(f64) -> Complex64) -> Field {
        let mut field = Field::new(FieldSide::Interior);
        field.insert(g, ModeFunction::from_fn(m, Side::Interior, g, f)).unwrap();
        field
    }

    #[test]
    fn unit_disk_area() {
        let g = grid();
        let f = interior(&g, 0, |_| c(1.0, 0.0));
        let ip = inner_product(&g, &f, &f).unwrap();
        assert!((ip - c(PI, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn distinct_modes_are_orthogonal() {
        let g = grid();
        let f = interior(&g, 1, |r| c(r, 0.0));
        let h = interior(&g, 2, |r| c(r * r, 0.0));
        assert_eq!(inner_product(&g, &f, &h).unwrap(), ZERO);
    }

    #[test]
    fn r_to_the_m_norm() {
        let g = grid();
        let f = interior(&g, 1, |r| c(r, 0.0));
        let ip = inner_product(&g, &f, &f).unwrap();
        assert!((ip.re - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn mismatched_sides_are_rejected() {
        let g = grid();
        let f = interior(&g, 0, |_| c(1.0, 0.0));
        let mut h = Field::new(FieldSide::Exterior);
        h.insert(&g, ModeFunction::from_fn(0, Side::Exterior, &g, |_| c(1.0, 0.0)))
            .unwrap();
        assert!(matches!(inner_product(&g, &f, &h), Err(KreinError::Mismatch(_))));
        let mut bad = Field::new(FieldSide::Interior);
        assert!(bad
            .insert(&g, ModeFunction::from_fn(0, Side::Exterior, &g, |_| ZERO))
            .is_err());
    }

    #[test]
    fn irregular_interior_modes_are_rejected() {
        let g = grid();
        let mut field = Field::new(FieldSide::Interior);
        assert!(field
            .insert(&g, ModeFunction::from_fn(2, Side::Interior, &g, |_| c(1.0, 0.0)))
            .is_err());
    }

    #[test]
    fn boundary_inner_product_examples() {
        let mut phi = BoundaryData::zeros(1.0, 3);
        phi.set(0, c(1.0, 0.0)).unwrap();
        assert_eq!(boundary_inner_product(&phi, &phi).unwrap(), c(1.0, 0.0));

        let mut a = BoundaryData::zeros(1.0, 3);
        let mut b = BoundaryData::zeros(1.0, 3);
        a.set(1, c(1.0, 0.0)).unwrap();
        b.set(-1, c(1.0, 0.0)).unwrap();
        assert_eq!(boundary_inner_product(&a, &b).unwrap(), ZERO);

        let mut d = BoundaryData::zeros(2.0, 1);
        d.set(0, c(1.0, 0.0)).unwrap();
        d.set(1, c(0.0, 1.0)).unwrap();
        assert_eq!(boundary_inner_product(&d, &d).unwrap(), c(4.0, 0.0));

        assert!(boundary_inner_product(&d, &BoundaryData::zeros(2.0, 2)).is_err());
    }

    #[test]
    fn explicit_samples_round_trip_exactly() {
        let g = grid();
        let samples: Vec<Complex64> = g
            .interior
            .nodes
            .iter()
            .map(|&r| c((r * 7.3).sin() / 3.0, r.powf(1.7)))
            .collect();
        let mut map = BTreeMap::new();
        map.insert(0, samples.clone());
        let f = Field::from_samples(&g, Side::Interior, map).unwrap();
        assert_eq!(f.mode(Side::Interior, 0).unwrap().values, samples);
    }

    #[test]
    fn traces_use_outward_normals() {
        let g = grid();
        let mut f = Field::new(FieldSide::Whole);
        f.insert(&g, ModeFunction::from_fn(2, Side::Interior, &g, |r| c(r * r, 0.0)))
            .unwrap();
        f.insert(&g, ModeFunction::from_fn(2, Side::Exterior, &g, |r| c(r.powi(-2), 0.0)))
            .unwrap();
        let s = (2.0 * PI).sqrt();
        let ni = neumann_trace_field(&g, &f, Side::Interior, 2).unwrap();
        let ne = neumann_trace_field(&g, &f, Side::Exterior, 2).unwrap();
        assert!((ni.get(2).unwrap() - c(2.0 * s, 0.0)).norm() < 1e-5);
        assert!(
            (ne.get(2).unwrap() - c(2.0 * s, 0.0)).norm() < 1e-5,
            "{}",
            ne.get(2).unwrap()
        );
        let di = dirichlet_trace(&g, &f, Side::Interior, 2).unwrap();
        assert!((di.get(2).unwrap() - c(s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn combine_merges_modes_and_tails() {
        let g = grid();
        let mut a = Field::new(FieldSide::Exterior);
        let k = c(1.0, 0.5);
        a.insert(
            &g,
            ModeFunction::from_fn(1, Side::Exterior, &g, |_| c(1.0, 0.0))
                .with_tail(vec![TailTerm::new(c(1.0, 0.0), k)]),
        )
        .unwrap();
        let b = a.scale(c(2.0, 0.0));
        let s = a.combine(c(1.0, 0.0), &b, c(-0.5, 0.0)).unwrap();
        let m = s.mode(Side::Exterior, 1).unwrap();
        assert!(m.values.iter().all(|v| v.norm() == 0.0));
        assert_eq!(m.tail.len(), 1);
        assert_eq!(m.tail[0].coeff, ZERO);
    }

    proptest::proptest! {
        #[test]
        fn inner_product_is_hermitian_and_positive(
            a in proptest::collection::vec(-2.0f64..2.0, 6),
            m in -3i32..=3,
        ) {
            let g = RadialGrid::new(1.0, 3.0, &[0.5], 40).unwrap();
            let nu = m.unsigned_abs() as i32;
            let f = interior(&g, m, |r| c(a[0] + a[1] * r, a[2] * r * r) * r.powi(nu));
            let h = interior(&g, m, |r| c(a[3] * r, a[4] + a[5] * r * r) * r.powi(nu));
            let fh = inner_product(&g, &f, &h).unwrap();
            let hf = inner_product(&g, &h, &f).unwrap();
            proptest::prop_assert!((fh - hf.conj()).norm() <= 1e-12 * (1.0 + fh.norm()));
            let ff = inner_product(&g, &f, &f).unwrap();
            proptest::prop_assert!(ff.im.abs() <= 1e-14 * ff.re.abs().max(1.0));
            proptest::prop_assert!(ff.re >= 0.0);
        }
    }
}
