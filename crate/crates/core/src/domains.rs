//! Uniformly convex domains described by concave quadratic defining functions.
//!
//! Every supported domain is an ellipsoid `{p : (p - c)ᵀ Q (p - c) < 1}`; intervals
//! and balls are the special cases `Q = 4/(d-c)²` and `Q = I/ρ²`. The defining
//! function is
//!
//! ```text
//! h(p) = (1 - (p - c)ᵀ Q (p - c)) / s,    s = 2 sqrt(λ_max(Q))
//! ```
//!
//! which is positive inside, zero on the boundary, negative outside, has constant
//! Hessian `-2Q/s`, and satisfies `max_{∂} |Dh| = 1`. For intervals and balls
//! `|Dh| = 1` on the whole boundary.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::BOUNDARY_TOL;

/// The user-facing description of a domain.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Interval { lower: f64, upper: f64 },
    Ball { center: DVector<f64>, radius: f64 },
    Ellipse { center: DVector<f64>, shape: DMatrix<f64> },
}

/// Value, gradient and Hessian of a defining function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DefiningJet {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain {
    kind: DomainKind,
    center: DVector<f64>,
    shape: DMatrix<f64>,
    scale: f64,
    theta: f64,
    // x = frame * z + center maps the closed unit ball onto the closed domain.
    frame: DMatrix<f64>,
}

impl ConvexDomain {
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Domain(format!("interval ({lower}, {upper}) is empty or not finite")));
        }
        let half = 0.5 * (upper - lower);
        let center = DVector::from_element(1, 0.5 * (lower + upper));
        let shape = DMatrix::from_element(1, 1, 1.0 / (half * half));
        Self::build(DomainKind::Interval { lower, upper }, center, shape)
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || center.is_empty() {
            return Err(Error::Domain(format!("ball radius {radius} must be positive")));
        }
        let n = center.len();
        let shape = DMatrix::identity(n, n) / (radius * radius);
        Self::build(DomainKind::Ball { center: center.clone(), radius }, center, shape)
    }

    /// Ellipse (or ellipsoid) `{p : (p - c)ᵀ Q (p - c) < 1}` with `Q` symmetric positive definite.
    pub fn ellipse(center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if n == 0 || shape.nrows() != n || shape.ncols() != n {
            return Err(Error::Domain("ellipse shape matrix does not match center dimension".into()));
        }
        if (&shape - shape.transpose()).amax() > 1e-12 * shape.amax().max(1.0) {
            return Err(Error::Domain("ellipse shape matrix is not symmetric".into()));
        }
        Self::build(DomainKind::Ellipse { center: center.clone(), shape: shape.clone() }, center, shape)
    }

    fn build(kind: DomainKind, center: DVector<f64>, shape: DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(shape.clone());
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        if !(lmin > 0.0 && lmax.is_finite()) {
            return Err(Error::Domain(format!(
                "shape matrix is not positive definite (eigenvalues in [{lmin}, {lmax}])"
            )));
        }
        let scale = 2.0 * lmax.sqrt();
        let theta = 2.0 * lmin / scale;
        let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
        let frame = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();
        Ok(Self { kind, center, shape, scale, theta, frame })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// The matrix `Q` of the quadratic form.
    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// Uniform concavity constant: `D²h ≤ -θ I`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Symmetric positive definite `A` with `Ω = A·B₁(0) + center`.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        let d = p - &self.center;
        (1.0 - d.dot(&(&self.shape * &d))) / self.scale
    }

    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        let d = p - &self.center;
        (&self.shape * d) * (-2.0 / self.scale)
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        &self.shape * (-2.0 / self.scale)
    }

    pub fn defining_jet(&self, p: &DVector<f64>) -> DefiningJet {
        DefiningJet { value: self.value(p), gradient: self.gradient(p), hessian: self.hessian() }
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        self.value(p) > 0.0
    }

    /// Unit inward normal `Dh/|Dh|` at a boundary point.
    pub fn inward_normal(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let value = self.value(q);
        if value.abs() > BOUNDARY_TOL {
            return Err(Error::NotOnBoundary { value });
        }
        let g = self.gradient(q);
        Ok(&g / g.norm())
    }

    /// Image of a unit vector under the boundary parameterization.
    pub fn boundary_point(&self, unit: &DVector<f64>) -> DVector<f64> {
        &self.frame * unit + &self.center
    }

    /// Smallest and largest Euclidean norm over the closed domain.
    pub fn norm_range(&self) -> (f64, f64) {
        let n = self.dimension();
        if n == 1 {
            let lo = self.center[0] - self.frame[(0, 0)];
            let hi = self.center[0] + self.frame[(0, 0)];
            let max = lo.abs().max(hi.abs());
            let min = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
            return (min, max);
        }
        let dirs = sphere_samples(n);
        let norm = |z: &DVector<f64>| self.boundary_point(z).norm();
        let mut min = f64::INFINITY;
        let mut max: f64 = 0.0;
        for z in &dirs {
            let r = norm(z);
            min = min.min(r);
            max = max.max(r);
        }
        if n == 2 {
            // golden-section polish around the best samples
            let angle = |a: f64| DVector::from_vec(vec![a.cos(), a.sin()]);
            let step = std::f64::consts::TAU / dirs.len() as f64;
            let best = |sign: f64| {
                let (k, _) = dirs
                    .iter()
                    .enumerate()
                    .map(|(k, z)| (k, sign * norm(z)))
                    .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
                let a0 = k as f64 * step;
                sign * golden_max(|a| sign * norm(&angle(a)), a0 - step, a0 + step)
            };
            max = max.max(best(1.0));
            min = min.min(best(-1.0));
        }
        if self.contains(&DVector::zeros(n)) {
            min = 0.0;
        }
        (min, max)
    }

    /// Symmetric positive definite `A` and offset `b` with `A·self + b = target`, when one exists.
    ///
    /// For ellipsoids `E₁ = c₁ + Q₁^{-1/2} B`, `E₂ = c₂ + Q₂^{-1/2} B` the unique SPD solution of
    /// `A Q₁⁻¹ A = Q₂⁻¹` is `A = Q₁^{1/2} (Q₁^{-1/2} Q₂⁻¹ Q₁^{-1/2})^{1/2} Q₁^{1/2}`.
    pub fn affine_map_to(&self, target: &ConvexDomain) -> Option<(DMatrix<f64>, DVector<f64>)> {
        if self.dimension() != target.dimension() {
            return None;
        }
        let q1_half = sym_sqrt(&self.shape);
        let q1_inv_half = &self.frame;
        let q2_inv = &target.frame * &target.frame;
        let middle = sym_sqrt(&(q1_inv_half * q2_inv * q1_inv_half));
        let a = &q1_half * middle * &q1_half;
        let a = (&a + a.transpose()) * 0.5;
        let b = &target.center - &a * &self.center;
        Some((a, b))
    }

    /// Human-readable form matching the configuration syntax.
    pub fn describe(&self) -> String {
        match &self.kind {
            DomainKind::Interval { lower, upper } => format!("interval {lower} {upper}"),
            DomainKind::Ball { center, radius } => {
                let c: Vec<String> = center.iter().map(|x| x.to_string()).collect();
                format!("ball {} {radius}", c.join(" "))
            }
            DomainKind::Ellipse { center, shape } if center.len() == 2 => {
                format!("ellipse {} {} {} {} {}", center[0], center[1], shape[(0, 0)], shape[(0, 1)], shape[(1, 1)])
            }
            DomainKind::Ellipse { center, shape } => format!("ellipse center={center:?} shape={shape:?}"),
        }
    }
}

pub(crate) fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let s = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose()
}

fn sphere_samples(n: usize) -> Vec<DVector<f64>> {
    match n {
        2 => (0..4096)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 4096.0;
                DVector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect(),
        _ => {
            // Fibonacci lattice on S², padded with zeros for higher dimension
            let count = 20_000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    let mut v = DVector::zeros(n);
                    v[0] = r * phi.cos();
                    v[1] = r * phi.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn interval_jet_at_midpoint() {
        let d = ConvexDomain::interval(-0.5, 0.5).unwrap();
        let jet = d.defining_jet(&v(&[0.0]));
        assert_relative_eq!(jet.value, 0.25, epsilon = 1e-15);
        assert_relative_eq!(jet.gradient[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(jet.hessian[(0, 0)], -2.0, epsilon = 1e-14);
        assert_relative_eq!(d.theta(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn interval_matches_product_formula() {
        let (c, dd) = (0.2, 1.7);
        let d = ConvexDomain::interval(c, dd).unwrap();
        for k in 0..=20 {
            let p = -1.0 + 0.2 * k as f64;
            let expect = (dd - p) * (p - c) / (dd - c);
            assert_relative_eq!(d.value(&v(&[p])), expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn ball_jet() {
        let d = ConvexDomain::ball(v(&[0.0, 0.0]), 0.5).unwrap();
        let jet = d.defining_jet(&v(&[0.3, 0.0]));
        assert_relative_eq!(jet.value, 0.16, epsilon = 1e-14);
        assert_relative_eq!(jet.gradient[0], -0.6, epsilon = 1e-14);
        assert_relative_eq!(jet.gradient[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(jet.hessian, DMatrix::identity(2, 2) * -2.0, epsilon = 1e-14);

        let b = d.defining_jet(&v(&[0.5, 0.0]));
        assert_relative_eq!(b.value, 0.0, epsilon = 1e-15);
        assert_relative_eq!(b.gradient.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn inward_normals() {
        let unit = ConvexDomain::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let n = unit.inward_normal(&v(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(n, v(&[-1.0, 0.0]), epsilon = 1e-15);

        let seg = ConvexDomain::interval(0.0, 1.0).unwrap();
        assert_relative_eq!(seg.inward_normal(&v(&[0.0])).unwrap()[0], 1.0);
        assert_relative_eq!(seg.inward_normal(&v(&[1.0])).unwrap()[0], -1.0);

        let e = ConvexDomain::ellipse(v(&[0.0, 0.0]), DMatrix::from_diagonal(&v(&[0.25, 1.0]))).unwrap();
        let n = e.inward_normal(&v(&[2.0, 0.0])).unwrap();
        assert_relative_eq!(n, v(&[-1.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn off_boundary_normal_is_rejected() {
        let unit = ConvexDomain::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(matches!(unit.inward_normal(&v(&[0.9, 0.0])), Err(Error::NotOnBoundary { .. })));
    }

    #[test]
    fn ellipse_normalization_and_concavity() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0 / 0.16, 0.0, 0.0, 1.0 / 0.0625]);
        let e = ConvexDomain::ellipse(v(&[0.0, 0.0]), q).unwrap();
        let mut max_grad: f64 = 0.0;
        for k in 0..720 {
            let a = std::f64::consts::TAU * k as f64 / 720.0;
            let p = e.boundary_point(&v(&[a.cos(), a.sin()]));
            assert!(e.value(&p).abs() < 1e-14);
            let g = e.gradient(&p);
            assert!(g.dot(&p) < 0.0);
            max_grad = max_grad.max(g.norm());
        }
        assert_relative_eq!(max_grad, 1.0, epsilon = 1e-12);
        let eig = SymmetricEigen::new(e.hessian()).eigenvalues;
        assert!(eig.iter().all(|&l| l <= -e.theta() + 1e-14));
        assert_relative_eq!(eig.max(), -e.theta(), epsilon = 1e-14);
    }

    #[test]
    fn sign_on_rays() {
        let e = ConvexDomain::ellipse(v(&[0.1, -0.2]), DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0])).unwrap();
        for k in 0..64 {
            let a = std::f64::consts::TAU * k as f64 / 64.0;
            let z = v(&[a.cos(), a.sin()]);
            let inside = e.boundary_point(&(&z * 0.9));
            let outside = e.boundary_point(&(&z * 1.1));
            assert!(e.value(&inside) > 0.0);
            assert!(e.value(&outside) < 0.0);
        }
    }

    #[test]
    fn finite_difference_jet() {
        let e = ConvexDomain::ellipse(v(&[0.1, -0.2]), DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 2.0])).unwrap();
        let p = v(&[0.2, 0.1]);
        let eps = 1e-5;
        let g = e.gradient(&p);
        let hess = e.hessian();
        for i in 0..2 {
            let mut dp = DVector::zeros(2);
            dp[i] = eps;
            let fd = (e.value(&(&p + &dp)) - e.value(&(&p - &dp))) / (2.0 * eps);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
            let fdg = (e.gradient(&(&p + &dp)) - e.gradient(&(&p - &dp))) / (2.0 * eps);
            for j in 0..2 {
                assert!((fdg[j] - hess[(j, i)]).abs() <= 1e-6 * hess[(j, i)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn affine_maps() {
        let unit = ConvexDomain::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let half = ConvexDomain::ball(v(&[0.0, 0.0]), 0.5).unwrap();
        let (a, b) = unit.affine_map_to(&half).unwrap();
        assert_relative_eq!(a, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-14);
        assert_relative_eq!(b.norm(), 0.0, epsilon = 1e-15);

        let e1 = ConvexDomain::ellipse(v(&[0.3, 0.0]), DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let e2 =
            ConvexDomain::ellipse(v(&[0.0, 0.1]), DMatrix::from_row_slice(2, 2, &[9.0, -1.0, -1.0, 16.0])).unwrap();
        let (a, b) = e1.affine_map_to(&e2).unwrap();
        assert!(SymmetricEigen::new(a.clone()).eigenvalues.min() > 0.0);
        for k in 0..32 {
            let t = std::f64::consts::TAU * k as f64 / 32.0;
            let x = e1.boundary_point(&v(&[t.cos(), t.sin()]));
            assert!(e2.value(&(&a * x + &b)).abs() < 1e-12);
        }

        let seg = ConvexDomain::interval(0.0, 1.0).unwrap();
        let target = ConvexDomain::interval(-0.5, 0.5).unwrap();
        let (a, b) = seg.affine_map_to(&target).unwrap();
        assert_relative_eq!(a[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(b[0], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn norm_ranges() {
        let e = ConvexDomain::ellipse(v(&[0.0, 0.0]), DMatrix::from_diagonal(&v(&[1.0 / 0.16, 1.0 / 0.0625]))).unwrap();
        let (lo, hi) = e.norm_range();
        assert_eq!(lo, 0.0);
        assert_relative_eq!(hi, 0.4, epsilon = 1e-12);
        let off = ConvexDomain::ball(v(&[0.5, 0.0]), 0.2).unwrap();
        let (lo, hi) = off.norm_range();
        assert_relative_eq!(lo, 0.3, epsilon = 1e-12);
        assert_relative_eq!(hi, 0.7, epsilon = 1e-12);
        let (lo, hi) = ConvexDomain::interval(0.2, 0.6).unwrap().norm_range();
        assert_relative_eq!(lo, 0.2, epsilon = 1e-15);
        assert_relative_eq!(hi, 0.6, epsilon = 1e-15);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(ConvexDomain::interval(1.0, 1.0).is_err());
        assert!(ConvexDomain::ball(v(&[0.0]), 0.0).is_err());
        assert!(ConvexDomain::ellipse(v(&[0.0, 0.0]), DMatrix::from_diagonal(&v(&[1.0, -1.0]))).is_err());
    }
}
