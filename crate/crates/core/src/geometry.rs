//! Pointwise geometry of graphs `x ↦ (x, u(x))`.
//!
//! For Minkowski space `R^{n,1}` the induced metric of a spacelike graph is
//! `g_ij = δ_ij - p_i p_j` with `p = Du`, `v = sqrt(1 - |p|²)`. For Euclidean
//! `R^{n+1}` it is `g_ij = δ_ij + p_i p_j`, `v = sqrt(1 + |p|²)`. Writing
//! `s = +1` (Minkowski) or `s = -1` (Euclidean):
//!
//! ```text
//! g^ij = δ_ij + s p_i p_j / v²
//! b^ij = δ_ij + s p_i p_j / (v (1 + v))      (b^ik b^kj = g^ij)
//! b_ij = δ_ij - s p_i p_j / (1 + v)          (b^ik b_kj = δ_ij)
//! a_ij = b^ik D_kl u b^lj / v
//! ```
//!
//! The principal curvatures are the eigenvalues of `a` and `H = tr a`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::SPACELIKE_MARGIN;

/// Ambient space of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signature {
    Minkowski,
    Euclidean,
}

/// Which form of the Minkowski square-root matrices and operator gradient to use.
///
/// `AsPrinted` reproduces the published closed forms, whose signs are inconsistent:
/// `b^ij = δ - p p/(v(1+v))`, `b_ij = δ + p p/(1+v)` and the printed `G_i`. It exists so
/// that the identity checks can demonstrate the failure; the solver always uses
/// `Corrected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transcription {
    #[default]
    Corrected,
    AsPrinted,
}

impl Signature {
    /// `+1` for Minkowski, `-1` for Euclidean.
    pub fn sign(self) -> f64 {
        match self {
            Signature::Minkowski => 1.0,
            Signature::Euclidean => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Signature::Minkowski => "minkowski",
            Signature::Euclidean => "euclidean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minkowski" => Some(Signature::Minkowski),
            "euclidean" => Some(Signature::Euclidean),
            _ => None,
        }
    }

    /// `v² = 1 ∓ |p|²`.
    pub fn v_squared(self, p_norm_sq: f64) -> f64 {
        1.0 - self.sign() * p_norm_sq
    }

    /// Refuses gradients within [`SPACELIKE_MARGIN`] of the light cone (Minkowski only).
    pub fn check_gradient(self, p: &DVector<f64>) -> Result<()> {
        if self == Signature::Minkowski {
            let norm = p.norm();
            if !(norm <= 1.0 - SPACELIKE_MARGIN) {
                return Err(Error::Spacelike { norm, margin: SPACELIKE_MARGIN });
            }
        }
        Ok(())
    }

    /// `g^ij(p)`, also used as the coefficient matrix of the flow operator.
    pub fn inverse_metric(self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = p.len();
        let v2 = self.v_squared(p.norm_squared());
        DMatrix::identity(n, n) + p * p.transpose() * (self.sign() / v2)
    }

    pub fn metric(self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = p.len();
        DMatrix::identity(n, n) - p * p.transpose() * self.sign()
    }
}

/// Position, value, gradient and Hessian of `u` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointJet {
    pub x: DVector<f64>,
    pub u: f64,
    pub du: DVector<f64>,
    pub d2u: DMatrix<f64>,
}

impl PointJet {
    pub fn new(x: DVector<f64>, u: f64, du: DVector<f64>, d2u: DMatrix<f64>) -> Result<Self> {
        let jet = Self { x, u, du, d2u };
        jet.check_shape()?;
        Ok(jet)
    }

    /// Jet with only gradient and Hessian, placed at the origin.
    pub fn derivatives(du: DVector<f64>, d2u: DMatrix<f64>) -> Result<Self> {
        let n = du.len();
        Self::new(DVector::zeros(n), 0.0, du, d2u)
    }

    pub fn dimension(&self) -> usize {
        self.du.len()
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.du.len();
        if n == 0 || self.d2u.nrows() != n || self.d2u.ncols() != n || self.x.len() != n {
            return Err(Error::Argument("jet dimensions are inconsistent".into()));
        }
        let asym = (&self.d2u - self.d2u.transpose()).amax();
        if asym > 1e-14 * self.d2u.amax().max(1.0) {
            return Err(Error::Argument(format!("Hessian is not symmetric (defect {asym:e})")));
        }
        Ok(())
    }

    pub fn validate(&self, sig: Signature) -> Result<()> {
        self.check_shape()?;
        sig.check_gradient(&self.du)
    }
}

/// Geometric quantities of the graph at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphGeometry {
    pub v: f64,
    pub g_lo: DMatrix<f64>,
    pub g_up: DMatrix<f64>,
    pub b_up: DMatrix<f64>,
    pub b_lo: DMatrix<f64>,
    /// Second fundamental form `h_ij = D_ij u / v`.
    pub second_form: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Principal curvatures in ascending order.
    pub kappa: Vec<f64>,
    pub mean_curvature: f64,
    /// Unit normal in `R^{n+1}` coordinates: `(p, 1)/v` (Minkowski, timelike) or `(-p, 1)/v`.
    pub normal: DVector<f64>,
}

impl GraphGeometry {
    /// `|A|² = Σ κ_i²`.
    pub fn norm_second_form_sq(&self) -> f64 {
        self.kappa.iter().map(|k| k * k).sum()
    }
}

pub fn graph_geometry(jet: &PointJet, sig: Signature) -> Result<GraphGeometry> {
    graph_geometry_with(jet, sig, Transcription::Corrected)
}

pub fn graph_geometry_with(jet: &PointJet, sig: Signature, form: Transcription) -> Result<GraphGeometry> {
    jet.validate(sig)?;
    let p = &jet.du;
    let n = p.len();
    let s = sig.sign();
    let v = sig.v_squared(p.norm_squared()).sqrt();
    let ppt = p * p.transpose();

    let g_lo = sig.metric(p);
    let g_up = sig.inverse_metric(p);
    let (b_up, b_lo) = square_root_pair(&ppt, v, s, sig, form);

    let a = (&b_up * &jet.d2u * &b_up) / v;
    let a = (&a + a.transpose()) * 0.5;
    let mut kappa: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    kappa.sort_by(|x, y| x.total_cmp(y));
    let mean_curvature = a.trace();

    let mut normal = DVector::zeros(n + 1);
    for i in 0..n {
        normal[i] = s * p[i] / v;
    }
    normal[n] = 1.0 / v;

    Ok(GraphGeometry { v, g_lo, g_up, b_up, b_lo, second_form: &jet.d2u / v, a, kappa, mean_curvature, normal })
}

fn square_root_pair(
    ppt: &DMatrix<f64>,
    v: f64,
    s: f64,
    sig: Signature,
    form: Transcription,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ppt.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let s = if sig == Signature::Minkowski && form == Transcription::AsPrinted { -s } else { s };
    let b_up = &id + ppt * (s / (v * (1.0 + v)));
    let b_lo = &id - ppt * (s / (1.0 + v));
    (b_up, b_lo)
}

/// `b^ij(p)` under the chosen transcription.
pub fn square_root_inverse_metric(p: &DVector<f64>, sig: Signature, form: Transcription) -> DMatrix<f64> {
    let v = sig.v_squared(p.norm_squared()).sqrt();
    square_root_pair(&(p * p.transpose()), v, sig.sign(), sig, form).0
}

/// Elementary symmetric function `S_k(κ)`.
pub fn mean_curvature_k(kappa: &[f64], k: usize) -> Result<f64> {
    let n = kappa.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} must lie in 1..={n}")));
    }
    // e[j] holds S_j of the prefix processed so far
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &x in kappa {
        for j in (1..=k).rev() {
            e[j] += x * e[j - 1];
        }
    }
    Ok(e[k])
}

/// Minkowski inner product `y·y' - s s'` on `R^{n,1}`.
pub fn minkowski_pairing(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() - 1;
    a.rows(0, n).dot(&b.rows(0, n)) - a[n] * b[n]
}

/// Laplace–Beltrami operator of the graph of `u` applied to `f`.
///
/// Uses `Δ_M f = g^ij f_ij + v⁻¹ ∂_i(v g^ij) f_j` with `sqrt(det g) = v` and the grid's
/// second-order stencils. Boundary nodes are set to NaN.
pub fn laplace_beltrami(f: &[f64], u: &[f64], grid: &Grid, sig: Signature) -> Result<Vec<f64>> {
    let n = grid.dim();
    let len = grid.len();
    if f.len() != len || u.len() != len {
        return Err(Error::Argument("field length does not match grid".into()));
    }
    let mut coef: Vec<DMatrix<f64>> = Vec::with_capacity(len);
    let mut vs = Vec::with_capacity(len);
    for i in 0..len {
        let p = grid.gradient(u, i);
        sig.check_gradient(&p)?;
        let v = sig.v_squared(p.norm_squared()).sqrt();
        coef.push(sig.inverse_metric(&p) * v);
        vs.push(v);
    }
    // entries of v g^ij as scalar fields, for differentiation
    let mut comp = vec![vec![0.0; len]; n * n];
    for (node, c) in coef.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                comp[i * n + j][node] = c[(i, j)];
            }
        }
    }
    let mut out = vec![f64::NAN; len];
    for node in 0..len {
        if grid.is_boundary(node) {
            continue;
        }
        let df = grid.gradient(f, node);
        let d2f = grid.hessian(f, node);
        let g_up = &coef[node] / vs[node];
        let mut value = (g_up.component_mul(&d2f)).sum();
        for j in 0..n {
            let mut div = 0.0;
            for i in 0..n {
                div += grid.gradient(&comp[i * n + j], node)[i];
            }
            value += div * df[j] / vs[node];
        }
        out[node] = value;
    }
    Ok(out)
}
