//! Structured grids and their derivative stencils.
//!
//! Every node carries a precomputed [`Stencil`]: the physical gradient and Hessian
//! at that node are fixed linear combinations of nodal values. Interior stencils are
//! second-order centered; boundary stencils are second-order one-sided in the
//! normal (radial) direction.
//!
//! The disk grid lives on a polar reference grid over the unit disk and is mapped
//! to the physical ellipse by `x = A x̂ + c`, so `Du = A⁻¹ D̂u` and
//! `D²u = A⁻¹ D̂²u A⁻¹`. Node 0 is the pole; node `1 + (j-1) Nθ + k` sits at
//! `ρ = j Δρ`, `θ = k Δθ` for `j = 1..=Nρ`. The pole gradient and Hessian come
//! from the least-squares quadratic through the pole value and the first ring.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::domains::ConvexDomain;
use crate::error::{Error, Result};
use crate::geometry::PointJet;

/// Requested resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpec {
    /// `intervals + 1` equispaced nodes on an interval.
    Line { intervals: usize },
    /// Polar reference grid with `rings` rings (the last on the boundary) and `angles` rays.
    Disk { rings: usize, angles: usize },
}

/// Linear derivative weights of one node.
#[derive(Debug, Clone, Default)]
pub struct Stencil {
    nodes: Vec<usize>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Stencil {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Gradient weights of the `k`-th stencil entry (length `n`).
    pub fn grad_weights(&self, k: usize, n: usize) -> &[f64] {
        &self.grad[k * n..(k + 1) * n]
    }

    /// Hessian weights of the `k`-th stencil entry (row-major `n×n`).
    pub fn hess_weights(&self, k: usize, n: usize) -> &[f64] {
        &self.hess[k * n * n..(k + 1) * n * n]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Line { intervals: usize },
    Disk { rings: usize, angles: usize },
}

#[derive(Debug, Clone)]
pub struct Grid {
    layout: Layout,
    dim: usize,
    coords: Vec<DVector<f64>>,
    boundary: Vec<bool>,
    stencils: Vec<Stencil>,
    spacing: f64,
    min_spacing: f64,
    anchor: usize,
}

impl Grid {
    pub fn new(domain: &ConvexDomain, spec: GridSpec) -> Result<Self> {
        match spec {
            GridSpec::Line { intervals } => {
                if domain.dimension() != 1 {
                    return Err(Error::Argument("line grids need a one-dimensional domain".into()));
                }
                let c = domain.center()[0];
                let r = domain.frame()[(0, 0)];
                Self::line(c - r, c + r, intervals)
            }
            GridSpec::Disk { rings, angles } => {
                if domain.dimension() != 2 {
                    return Err(Error::Argument("disk grids need a two-dimensional domain".into()));
                }
                Self::mapped_disk(domain.frame().clone(), domain.center().clone(), rings, angles)
            }
        }
    }

    pub fn line(a: f64, b: f64, intervals: usize) -> Result<Self> {
        if intervals < 4 || !(a < b) {
            return Err(Error::Argument(format!("line grid needs a < b and at least 4 intervals (got {intervals})")));
        }
        let h = (b - a) / intervals as f64;
        let len = intervals + 1;
        let coords =
            (0..len).map(|i| DVector::from_element(1, if i == intervals { b } else { a + i as f64 * h })).collect();
        let mut boundary = vec![false; len];
        boundary[0] = true;
        boundary[intervals] = true;
        let stencils = (0..len)
            .map(|i| {
                let mut acc = Accumulator::new(1);
                let (nodes, g, hh): (Vec<usize>, Vec<f64>, Vec<f64>) = if i == 0 {
                    (vec![0, 1, 2, 3], vec![-1.5, 2.0, -0.5, 0.0], vec![2.0, -5.0, 4.0, -1.0])
                } else if i == intervals {
                    let n = intervals;
                    (vec![n, n - 1, n - 2, n - 3], vec![1.5, -2.0, 0.5, 0.0], vec![2.0, -5.0, 4.0, -1.0])
                } else {
                    (vec![i - 1, i, i + 1], vec![-0.5, 0.0, 0.5], vec![1.0, -2.0, 1.0])
                };
                for k in 0..nodes.len() {
                    acc.add(nodes[k], &[g[k] / h], &[hh[k] / (h * h)]);
                }
                acc.finish()
            })
            .collect();
        Ok(Self {
            layout: Layout::Line { intervals },
            dim: 1,
            coords,
            boundary,
            stencils,
            spacing: h,
            min_spacing: h,
            anchor: intervals / 2,
        })
    }

    /// Polar grid on the image of the unit disk under `x = frame·x̂ + center`.
    pub fn mapped_disk(frame: DMatrix<f64>, center: DVector<f64>, rings: usize, angles: usize) -> Result<Self> {
        if rings < 4 || angles < 8 || !angles.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "disk grid needs at least 4 rings and an even number (≥ 8) of angles (got {rings}×{angles})"
            )));
        }
        if frame.shape() != (2, 2) || center.len() != 2 {
            return Err(Error::Argument("disk map must be 2×2".into()));
        }
        let eig = nalgebra::SymmetricEigen::new(frame.clone());
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::Argument("disk map must be positive definite".into()));
        }
        let a_inv = frame.clone().try_inverse().ok_or_else(|| Error::Argument("disk map is singular".into()))?;
        let dr = 1.0 / rings as f64;
        let dt = TAU / angles as f64;
        let len = 1 + rings * angles;
        let node = |j: usize, k: isize| -> usize {
            if j == 0 {
                0
            } else {
                1 + (j - 1) * angles + k.rem_euclid(angles as isize) as usize
            }
        };

        let mut coords = Vec::with_capacity(len);
        let mut boundary = vec![false; len];
        coords.push(center.clone());
        for j in 1..=rings {
            for k in 0..angles {
                let rho = if j == rings { 1.0 } else { j as f64 * dr };
                let th = k as f64 * dt;
                let xr = DVector::from_vec(vec![rho * th.cos(), rho * th.sin()]);
                coords.push(&frame * xr + &center);
                if j == rings {
                    boundary[node(j, k as isize)] = true;
                }
            }
        }

        let to_physical = |acc: &mut Accumulator, m: usize, g: [f64; 2], h: [[f64; 2]; 2]| {
            let g = &a_inv * DVector::from_vec(g.to_vec());
            let hm = DMatrix::from_row_slice(2, 2, &[h[0][0], h[0][1], h[1][0], h[1][1]]);
            let hm = &a_inv * hm * &a_inv;
            acc.add(m, g.as_slice(), &[hm[(0, 0)], hm[(0, 1)], hm[(1, 0)], hm[(1, 1)]]);
        };

        let mut stencils = Vec::with_capacity(len);
        // pole: Fourier modes 0, 1, 2 of the first ring
        {
            let mut acc = Accumulator::new(2);
            let nt = angles as f64;
            let mut pole_trace = 0.0;
            for k in 0..angles {
                let th = k as f64 * dt;
                let (c, s) = (th.cos(), th.sin());
                let (c2, s2) = ((2.0 * th).cos(), (2.0 * th).sin());
                let g = [2.0 * c / (nt * dr), 2.0 * s / (nt * dr)];
                let trace = 4.0 / (nt * dr * dr);
                let diff = 8.0 * c2 / (nt * dr * dr);
                let off = 4.0 * s2 / (nt * dr * dr);
                let h = [[0.5 * (trace + diff), off], [off, 0.5 * (trace - diff)]];
                pole_trace += trace;
                to_physical(&mut acc, node(1, k as isize), g, h);
            }
            let h = [[-0.5 * pole_trace, 0.0], [0.0, -0.5 * pole_trace]];
            to_physical(&mut acc, 0, [0.0, 0.0], h);
            stencils.push(acc.finish());
        }
        for j in 1..=rings {
            for k in 0..angles {
                let k = k as isize;
                let rho = j as f64 * dr;
                let th = k as f64 * dt;
                let er = [th.cos(), th.sin()];
                let et = [-th.sin(), th.cos()];

                // reference derivative coefficients: (node, weight)
                let mut ur: Vec<(usize, f64)> = Vec::new();
                let mut urr: Vec<(usize, f64)> = Vec::new();
                let mut ut: Vec<(usize, f64)> = Vec::new();
                let mut utt: Vec<(usize, f64)> = Vec::new();
                let mut urt: Vec<(usize, f64)> = Vec::new();
                // angular differences scaled to be exact on the first Fourier mode, so affine fields are exact
                let theta_diff = |jj: usize, w: f64, out: &mut Vec<(usize, f64)>| {
                    if jj > 0 {
                        out.push((node(jj, k + 1), w / (2.0 * dt.sin())));
                        out.push((node(jj, k - 1), -w / (2.0 * dt.sin())));
                    }
                };
                if j < rings {
                    ur.push((node(j + 1, k), 1.0 / (2.0 * dr)));
                    ur.push((node(j - 1, k), -1.0 / (2.0 * dr)));
                    urr.push((node(j + 1, k), 1.0 / (dr * dr)));
                    urr.push((node(j, k), -2.0 / (dr * dr)));
                    urr.push((node(j - 1, k), 1.0 / (dr * dr)));
                    theta_diff(j + 1, 1.0 / (2.0 * dr), &mut urt);
                    theta_diff(j - 1, -1.0 / (2.0 * dr), &mut urt);
                } else {
                    for (m, w) in [(0usize, 1.5), (1, -2.0), (2, 0.5)] {
                        ur.push((node(j - m, k), w / dr));
                        theta_diff(j - m, w / dr, &mut urt);
                    }
                    for (m, w) in [(0usize, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)] {
                        urr.push((node(j - m, k), w / (dr * dr)));
                    }
                }
                theta_diff(j, 1.0, &mut ut);
                let dtt = 2.0 * (1.0 - dt.cos());
                utt.push((node(j, k + 1), 1.0 / dtt));
                utt.push((node(j, k), -2.0 / dtt));
                utt.push((node(j, k - 1), 1.0 / dtt));

                let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
                let err = outer(er, er);
                let ett = outer(et, et);
                let ert = outer(er, et);
                let sym = [[2.0 * ert[0][0], ert[0][1] + ert[1][0]], [ert[1][0] + ert[0][1], 2.0 * ert[1][1]]];
                let mut acc = Accumulator::new(2);
                let mut push = |m: usize, g: [f64; 2], h: [[f64; 2]; 2]| to_physical(&mut acc, m, g, h);
                for &(m, w) in &ur {
                    push(m, [w * er[0], w * er[1]], scale(ett, w / rho));
                }
                for &(m, w) in &ut {
                    push(m, [w * et[0] / rho, w * et[1] / rho], scale(sym, -w / (rho * rho)));
                }
                for &(m, w) in &urr {
                    push(m, [0.0, 0.0], scale(err, w));
                }
                for &(m, w) in &utt {
                    push(m, [0.0, 0.0], scale(ett, w / (rho * rho)));
                }
                for &(m, w) in &urt {
                    push(m, [0.0, 0.0], scale(sym, w / rho));
                }
                stencils.push(acc.finish());
            }
        }

        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        Ok(Self {
            layout: Layout::Disk { rings, angles },
            dim: 2,
            coords,
            boundary,
            stencils,
            spacing: dr * lmax,
            min_spacing: dr * dt * lmin,
            anchor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> GridSpec {
        match self.layout {
            Layout::Line { intervals } => GridSpec::Line { intervals },
            Layout::Disk { rings, angles } => GridSpec::Disk { rings, angles },
        }
    }

    pub fn coord(&self, i: usize) -> &DVector<f64> {
        &self.coords[i]
    }

    pub fn coords(&self) -> &[DVector<f64>] {
        &self.coords
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.boundary[i])
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.boundary[i])
    }

    /// Characteristic (largest) physical spacing.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Smallest physical node separation, for explicit stability bounds.
    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    /// Node nearest the centroid of the domain.
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn stencil(&self, i: usize) -> &Stencil {
        &self.stencils[i]
    }

    /// Structured index pair: `(i, 0)` on a line; `(ring, angle)` on a disk, `(0, 0)` at the pole.
    pub fn label(&self, i: usize) -> (usize, usize) {
        match self.layout {
            Layout::Line { .. } => (i, 0),
            Layout::Disk { angles, .. } => {
                if i == 0 {
                    (0, 0)
                } else {
                    (1 + (i - 1) / angles, (i - 1) % angles)
                }
            }
        }
    }

    /// Stencil hops to the boundary.
    pub fn depth(&self, i: usize) -> usize {
        match self.layout {
            Layout::Line { intervals } => i.min(intervals - i),
            Layout::Disk { rings, .. } => rings - self.label(i).0,
        }
    }

    /// True when the node is at least `margin` hops from the boundary and, on a disk,
    /// from the pole.
    pub fn is_regular(&self, i: usize, margin: usize) -> bool {
        match self.layout {
            Layout::Line { .. } => self.depth(i) >= margin,
            Layout::Disk { .. } => self.depth(i) >= margin && self.label(i).0 >= margin,
        }
    }

    pub fn gradient(&self, field: &[f64], i: usize) -> DVector<f64> {
        let n = self.dim;
        let st = &self.stencils[i];
        let mut g = DVector::zeros(n);
        for (k, &m) in st.nodes.iter().enumerate() {
            let w = st.grad_weights(k, n);
            for a in 0..n {
                g[a] += w[a] * field[m];
            }
        }
        g
    }

    pub fn hessian(&self, field: &[f64], i: usize) -> DMatrix<f64> {
        let n = self.dim;
        let st = &self.stencils[i];
        let mut h = DMatrix::zeros(n, n);
        for (k, &m) in st.nodes.iter().enumerate() {
            let w = st.hess_weights(k, n);
            for a in 0..n {
                for b in 0..n {
                    h[(a, b)] += w[a * n + b] * field[m];
                }
            }
        }
        (&h + h.transpose()) * 0.5
    }

    pub fn jet(&self, field: &[f64], i: usize) -> PointJet {
        PointJet { x: self.coords[i].clone(), u: field[i], du: self.gradient(field, i), d2u: self.hessian(field, i) }
    }

    /// Samples a function of position at every node.
    pub fn sample(&self, f: impl Fn(&DVector<f64>) -> f64) -> Vec<f64> {
        self.coords.iter().map(f).collect()
    }
}

fn scale(m: [[f64; 2]; 2], w: f64) -> [[f64; 2]; 2] {
    [[m[0][0] * w, m[0][1] * w], [m[1][0] * w, m[1][1] * w]]
}

struct Accumulator {
    n: usize,
    entries: BTreeMap<usize, (Vec<f64>, Vec<f64>)>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self { n, entries: BTreeMap::new() }
    }

    fn add(&mut self, node: usize, grad: &[f64], hess: &[f64]) {
        let n = self.n;
        let e = self.entries.entry(node).or_insert_with(|| (vec![0.0; n], vec![0.0; n * n]));
        for (a, g) in e.0.iter_mut().zip(grad) {
            *a += g;
        }
        for (a, h) in e.1.iter_mut().zip(hess) {
            *a += h;
        }
    }

    fn finish(self) -> Stencil {
        let mut st = Stencil::default();
        for (node, (g, h)) in self.entries {
            st.nodes.push(node);
            st.grad.extend(g);
            st.hess.extend(h);
        }
        st
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_disk(rings: usize, angles: usize) -> Grid {
        Grid::mapped_disk(DMatrix::identity(2, 2), DVector::zeros(2), rings, angles).unwrap()
    }

    #[test]
    fn line_quadratics_are_exact() {
        let g = Grid::line(0.0, 1.0, 10).unwrap();
        let u = g.sample(|x| 3.0 * x[0] * x[0] - x[0] + 2.0);
        for i in 0..g.len() {
            let x = g.coord(i)[0];
            assert_relative_eq!(g.gradient(&u, i)[0], 6.0 * x - 1.0, epsilon = 1e-11);
            assert_relative_eq!(g.hessian(&u, i)[(0, 0)], 6.0, epsilon = 1e-9);
        }
        // one-sided second derivative is exact for cubics
        let c = g.sample(|x| x[0].powi(3));
        assert_relative_eq!(g.hessian(&c, 0)[(0, 0)], 0.0, epsilon = 1e-9);
        assert_relative_eq!(g.hessian(&c, 10)[(0, 0)], 6.0, epsilon = 1e-9);
    }

    #[test]
    fn disk_affine_fields_are_exact_and_quadratics_close() {
        let frame = DMatrix::from_row_slice(2, 2, &[0.8, 0.1, 0.1, 0.5]);
        let center = DVector::from_vec(vec![0.2, -0.1]);
        let g = Grid::mapped_disk(frame, center, 8, 16).unwrap();
        let b = DVector::from_vec(vec![0.3, -0.2]);
        let lin = g.sample(|x| b.dot(x) + 0.7);
        let q = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.7]);
        let u = g.sample(|x| 0.5 * x.dot(&(&q * x)) + b.dot(x));
        for i in 0..g.len() {
            let x = g.coord(i);
            assert_relative_eq!(g.gradient(&lin, i), b.clone(), epsilon = 1e-12);
            assert!(g.hessian(&lin, i).amax() < 1e-10);
            assert!((g.gradient(&u, i) - (&q * x + &b)).amax() < 0.1);
            assert!((g.hessian(&u, i) - &q).amax() < 0.2);
        }
        // quadratics without angular dependence in reference coordinates are exact, the pole fit included
        let frame = DMatrix::from_row_slice(2, 2, &[0.8, 0.1, 0.1, 0.5]);
        let m = frame.clone().try_inverse().unwrap();
        let m = m.transpose() * &m;
        let c = g.coord(0).clone();
        let r = g.sample(|x| (x - &c).dot(&(&m * (x - &c))));
        for i in 0..g.len() {
            assert_relative_eq!(g.gradient(&r, i), &m * (g.coord(i) - &c) * 2.0, epsilon = 1e-10);
            assert_relative_eq!(g.hessian(&r, i), &m * 2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn disk_second_order_convergence() {
        let f = |x: &DVector<f64>| (x[0] + 0.5 * x[1]).sin() + x[0] * x[1] * x[1];
        let grad = |x: &DVector<f64>| {
            let c = (x[0] + 0.5 * x[1]).cos();
            DVector::from_vec(vec![c + x[1] * x[1], 0.5 * c + 2.0 * x[0] * x[1]])
        };
        let err = |rings: usize| {
            let g = unit_disk(rings, 2 * rings);
            let u = g.sample(f);
            (0..g.len()).map(|i| (g.gradient(&u, i) - grad(g.coord(i))).amax()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn bookkeeping() {
        let g = unit_disk(4, 8);
        assert_eq!(g.len(), 33);
        assert_eq!(g.boundary_nodes().count(), 8);
        assert_eq!(g.label(0), (0, 0));
        assert_eq!(g.label(1), (1, 0));
        assert_eq!(g.label(32), (4, 7));
        assert_eq!(g.depth(32), 0);
        assert_eq!(g.depth(0), 4);
        assert!(g.coord(32).norm() - 1.0 < 1e-15);
        assert!(!g.is_regular(0, 1));
        assert!(Grid::mapped_disk(DMatrix::identity(2, 2), DVector::zeros(2), 4, 7).is_err());
        let l = Grid::line(0.0, 1.0, 8).unwrap();
        assert_eq!(l.anchor(), 4);
        assert_eq!(l.interior().count(), 7);
    }
}
