//! The flow operator, its derivatives, the Legendre-dual operator and transform.
//!
//! With `F = Σκ` the operator is `G(p, r) = v F[a] = g^ij(p) r_ij`, i.e.
//!
//! ```text
//! G(p, r)  = tr r + s pᵀ r p / v²
//! ∂G/∂r_ij = g^ij(p)
//! ∂G/∂p_k  = 2 s (r p)_k / v² + 2 (pᵀ r p) p_k / v⁴
//! ```
//!
//! with `s = ±1`, `v² = 1 - s|p|²` as in [`crate::geometry`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::domains::ConvexDomain;
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::geometry::{graph_geometry, square_root_inverse_metric, PointJet, Signature, Transcription};
use crate::grid::Grid;

/// `∂G/∂r` and `∂G/∂p` at one jet.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDerivatives {
    pub g_r: DMatrix<f64>,
    pub g_p: DVector<f64>,
}

/// `G(p, r)` without validation; `r` need not be symmetric.
pub fn g_kernel(p: &DVector<f64>, r: &DMatrix<f64>, sig: Signature) -> f64 {
    let v2 = sig.v_squared(p.norm_squared());
    r.trace() + sig.sign() * p.dot(&(r * p)) / v2
}

pub fn g_value(jet: &PointJet, sig: Signature) -> Result<f64> {
    jet.validate(sig)?;
    Ok(g_kernel(&jet.du, &jet.d2u, sig))
}

pub fn g_derivatives(jet: &PointJet, sig: Signature) -> Result<OperatorDerivatives> {
    jet.validate(sig)?;
    Ok(derivative_kernel(&jet.du, &jet.d2u, sig, Transcription::Corrected))
}

pub fn g_derivatives_with(jet: &PointJet, sig: Signature, form: Transcription) -> Result<OperatorDerivatives> {
    jet.validate(sig)?;
    Ok(derivative_kernel(&jet.du, &jet.d2u, sig, form))
}

pub(crate) fn derivative_kernel(
    p: &DVector<f64>,
    r: &DMatrix<f64>,
    sig: Signature,
    form: Transcription,
) -> OperatorDerivatives {
    let s = sig.sign();
    let v2 = sig.v_squared(p.norm_squared());
    if form == Transcription::AsPrinted && sig == Signature::Minkowski {
        // G_ij = b F b with the printed b; G_i = -(p_i/v) F_kl a_kl - 2 F_kl a_lm b^ik p_m - (p_i/v) F
        let printed_b = square_root_inverse_metric(p, sig, Transcription::AsPrinted);
        let b = square_root_inverse_metric(p, sig, Transcription::Corrected);
        let v = v2.sqrt();
        let a = &b * r * &b / v;
        let f = a.trace();
        let g_p = -p * (2.0 * f / v) - (&b * &a * p) * 2.0;
        return OperatorDerivatives { g_r: &printed_b * &printed_b, g_p };
    }
    let rp = r * p;
    let prp = p.dot(&rp);
    OperatorDerivatives { g_r: sig.inverse_metric(p), g_p: rp * (2.0 * s / v2) + p * (2.0 * prp / (v2 * v2)) }
}

/// `G̃(y, M) = -s_ij(y) (M⁻¹)_ij`, the operator of the Legendre-dual flow.
pub fn g_dual(y: &DVector<f64>, m: &DMatrix<f64>, sig: Signature) -> Result<f64> {
    if m.nrows() != y.len() || m.ncols() != y.len() {
        return Err(Error::Argument("dual Hessian does not match dimension".into()));
    }
    if sig == Signature::Minkowski && y.norm() >= 1.0 {
        return Err(Error::Domain(format!("dual point |y| = {} is outside the unit ball", y.norm())));
    }
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues;
    if !(eig.min() > 0.0) {
        return Err(Error::Argument("dual Hessian is not positive definite".into()));
    }
    let inv = m.clone().try_inverse().ok_or_else(|| Error::Argument("dual Hessian is singular".into()))?;
    Ok(-sig.inverse_metric(y).component_mul(&inv).sum())
}

/// Dual point cloud `y_k = Du(x_k)`, `ũ_k = x_k·y_k - u(x_k)` carrying the grid topology.
#[derive(Debug, Clone)]
pub struct DualSamples<'g> {
    grid: &'g Grid,
    pub points: Vec<DVector<f64>>,
    pub values: Vec<f64>,
}

/// Nodewise Legendre transform from discrete gradients.
pub fn legendre_transform<'g>(grid: &'g Grid, u: &[f64]) -> Result<DualSamples<'g>> {
    if u.len() != grid.len() {
        return Err(Error::Argument("field length does not match grid".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let eig = SymmetricEigen::new(grid.hessian(u, i)).eigenvalues.min();
        if !(eig > 0.0) {
            return Err(Error::NotConvex { node: i, eigenvalue: eig });
        }
        let y = grid.gradient(u, i);
        values.push(grid.coord(i).dot(&y) - u[i]);
        points.push(y);
    }
    Ok(DualSamples { grid, points, values })
}

impl<'g> DualSamples<'g> {
    pub fn grid(&self) -> &'g Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∂y/∂x` at every node, from the grid's gradient stencil applied to each component of `y`.
    fn jacobians(&self) -> Result<Vec<DMatrix<f64>>> {
        let n = self.grid.dim();
        let comps: Vec<Vec<f64>> = (0..n).map(|a| self.points.iter().map(|y| y[a]).collect()).collect();
        (0..self.len())
            .map(|i| {
                let mut j = DMatrix::zeros(n, n);
                for a in 0..n {
                    let g = self.grid.gradient(&comps[a], i);
                    for l in 0..n {
                        j[(a, l)] = g[l];
                    }
                }
                j.try_inverse().ok_or_else(|| Error::Argument(format!("degenerate dual map at node {i}")))
            })
            .collect()
    }

    /// `Dũ` with respect to `y`, by the chain rule `∇ₓũ = Jᵀ D_yũ`.
    pub fn dual_gradients(&self) -> Result<Vec<DVector<f64>>> {
        let inv = self.jacobians()?;
        Ok((0..self.len()).map(|i| inv[i].transpose() * self.grid.gradient(&self.values, i)).collect())
    }

    /// `D²ũ` with respect to `y`, differentiating the dual gradient field once more.
    pub fn dual_hessians(&self) -> Result<Vec<DMatrix<f64>>> {
        let n = self.grid.dim();
        let inv = self.jacobians()?;
        let grads: Vec<DVector<f64>> =
            (0..self.len()).map(|i| inv[i].transpose() * self.grid.gradient(&self.values, i)).collect();
        let comps: Vec<Vec<f64>> = (0..n).map(|b| grads.iter().map(|g| g[b]).collect()).collect();
        Ok((0..self.len())
            .map(|i| {
                let mut m = DMatrix::zeros(n, n);
                for b in 0..n {
                    let g = self.grid.gradient(&comps[b], i);
                    for l in 0..n {
                        m[(l, b)] = g[l];
                    }
                }
                let h = inv[i].transpose() * m;
                (&h + h.transpose()) * 0.5
            })
            .collect())
    }

    /// Second transform evaluated back at the original nodes: `y·D_yũ - ũ`.
    pub fn inverse_transform(&self) -> Result<Vec<f64>> {
        let grads = self.dual_gradients()?;
        Ok((0..self.len()).map(|i| self.points[i].dot(&grads[i]) - self.values[i]).collect())
    }

    /// Largest violation `max(0, -h̃(y))` of the target domain over the samples.
    pub fn containment_defect(&self, target: &ConvexDomain) -> f64 {
        self.points.iter().map(|y| (-target.value(y)).max(0.0)).fold(0.0, f64::max)
    }
}

/// Structure constants evaluated over a flow state.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    /// `Σ ∂F/∂κ_i`, equal to `n` for the trace operator.
    pub trace_f: f64,
    pub tg_min: f64,
    pub tg_max: f64,
    /// Range of `Σκ` over interior nodes.
    pub f_min: f64,
    pub f_max: f64,
    /// Range of `Σκ²` over interior nodes.
    pub fk2_min: f64,
    pub fk2_max: f64,
    /// Extreme eigenvalues of `D²u` over all nodes.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Empirical `sup |∂G/∂p|`.
    pub gp_max: f64,
    /// Bounds on `Σκ` implied by the initial rates and the gradient image.
    pub sandwich: (f64, f64),
}

impl StructureReport {
    /// Signed margins `(f_min - lower, upper - f_max)`; both nonnegative when the sandwich holds.
    pub fn sandwich_margins(&self) -> (f64, f64) {
        (self.f_min - self.sandwich.0, self.sandwich.1 - self.f_max)
    }

    pub fn sandwich_holds(&self, tol: f64) -> bool {
        let (lo, hi) = self.sandwich_margins();
        lo >= -tol && hi >= -tol
    }
}

/// Bounds `[min 1/v · min G₀, max 1/v · max G₀]` with `1/v` ranging over `Ω̃`.
pub fn curvature_sandwich(target: &ConvexDomain, initial_rates: (f64, f64), sig: Signature) -> (f64, f64) {
    let (pmin, pmax) = target.norm_range();
    let inv_v = |r: f64| 1.0 / sig.v_squared(r * r).sqrt();
    let (a, b) = (inv_v(pmin), inv_v(pmax));
    let (lo_w, hi_w) = (a.min(b), a.max(b));
    let lo = if initial_rates.0 >= 0.0 { lo_w * initial_rates.0 } else { hi_w * initial_rates.0 };
    let hi = if initial_rates.1 >= 0.0 { hi_w * initial_rates.1 } else { lo_w * initial_rates.1 };
    (lo, hi)
}

pub fn structure_report(state: &FlowState, sig: Signature) -> Result<StructureReport> {
    let grid = state.grid();
    let u = state.u();
    let n = grid.dim();
    let mut r = StructureReport {
        trace_f: n as f64,
        tg_min: f64::INFINITY,
        tg_max: f64::NEG_INFINITY,
        f_min: f64::INFINITY,
        f_max: f64::NEG_INFINITY,
        fk2_min: f64::INFINITY,
        fk2_max: f64::NEG_INFINITY,
        lambda_min: f64::INFINITY,
        lambda_max: f64::NEG_INFINITY,
        gp_max: 0.0,
        sandwich: curvature_sandwich(state.omega_tilde(), state.initial_rates(), sig),
    };
    for i in 0..grid.len() {
        let jet = grid.jet(u, i);
        let geo = graph_geometry(&jet, sig)?;
        let d = g_derivatives(&jet, sig)?;
        let tg = d.g_r.trace();
        r.tg_min = r.tg_min.min(tg);
        r.tg_max = r.tg_max.max(tg);
        r.gp_max = r.gp_max.max(d.g_p.amax());
        let eig = SymmetricEigen::new(jet.d2u.clone()).eigenvalues;
        r.lambda_min = r.lambda_min.min(eig.min());
        r.lambda_max = r.lambda_max.max(eig.max());
        if !grid.is_boundary(i) {
            let f = geo.mean_curvature;
            let f2 = geo.norm_second_form_sq();
            r.f_min = r.f_min.min(f);
            r.f_max = r.f_max.max(f);
            r.fk2_min = r.fk2_min.min(f2);
            r.fk2_max = r.fk2_max.max(f2);
        }
    }
    Ok(r)
}
