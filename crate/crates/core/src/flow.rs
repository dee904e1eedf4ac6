//! Time stepping of the second boundary value problem and translator extraction.
//!
//! Interior nodes carry `u_t = G(Du, D²u)`; boundary nodes carry `h̃(Du) = 0`, which
//! in one dimension reduces to the gradient Dirichlet rows `u'(a) = c`, `u'(b) = d`.
//! Implicit Euler steps are solved by Newton's method with the exact Jacobian.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DVector, SymmetricEigen};

use crate::domains::{ConvexDomain, DomainKind};
use crate::error::{Error, Result};
use crate::geometry::Signature;
use crate::geometry::Transcription;
use crate::grid::{Grid, GridSpec};
use crate::linsolve::SparseLu;
use crate::operators::{derivative_kernel, g_kernel};
use crate::SPACELIKE_MARGIN;

/// Solver and stopping tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub tau_min: f64,
    pub tau_max: f64,
    pub tol_newton: f64,
    pub max_newton: usize,
    /// Stop when `max u_t - min u_t` falls below this.
    pub tol_c: f64,
    pub tol_b: f64,
    /// Translator residual bound relative to `max(1, |C∞|)`.
    pub tol_r: f64,
    pub max_steps: usize,
    /// Constant in the explicit stability bound `τ ≤ c h² (1 - max|Du|²)`.
    pub explicit_c: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tau_min: 1e-14,
            tau_max: 1.0,
            tol_newton: 1e-10,
            max_newton: 30,
            tol_c: 1e-8,
            tol_b: 1e-9,
            tol_r: 1e-6,
            max_steps: 20_000,
            explicit_c: 0.2,
        }
    }
}

/// Summary of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// Step size used for this step.
    pub tau: f64,
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub rejections: usize,
    pub udot_min: f64,
    pub udot_max: f64,
    pub boundary_residual: f64,
}

impl StepRecord {
    pub fn oscillation(&self) -> f64 {
        self.udot_max - self.udot_min
    }
}

/// Evolving discrete solution.
///
/// `u` is stored relative to its value at the anchor node; the subtracted amount is
/// accumulated in `shift`, so the actual solution is `u + shift`.
#[derive(Debug, Clone)]
pub struct FlowState {
    grid: Arc<Grid>,
    u: Vec<f64>,
    shift: f64,
    t: f64,
    u_dot: Vec<f64>,
    tau: f64,
    step: usize,
    sig: Signature,
    omega: ConvexDomain,
    omega_tilde: ConvexDomain,
    boundary_targets: Vec<f64>,
    initial_rates: (f64, f64),
    lu: SparseLu,
}

/// Converged translating soliton.
#[derive(Debug, Clone)]
pub struct SolitonResult {
    pub c_inf: f64,
    /// Profile normalized to zero at the anchor node.
    pub u_inf: Vec<f64>,
    /// `max |G(Du∞, D²u∞) - C∞|` over interior nodes.
    pub residual: f64,
    pub steps: usize,
    pub t: f64,
    pub newton_total: usize,
    pub wall_clock: Duration,
    pub history: Vec<StepRecord>,
}

/// Starts the flow from the quadratic whose gradient maps `Ω` affinely onto `Ω̃`.
pub fn initialize(omega: ConvexDomain, omega_tilde: ConvexDomain, spec: GridSpec, sig: Signature) -> Result<FlowState> {
    let grid = Grid::new(&omega, spec)?;
    FlowState::on_grid(Arc::new(grid), omega, omega_tilde, sig)
}

impl FlowState {
    /// Starts the flow on a prebuilt grid of `Ω`.
    pub fn on_grid(grid: Arc<Grid>, omega: ConvexDomain, omega_tilde: ConvexDomain, sig: Signature) -> Result<Self> {
        let (a, b) = check_pair(&omega, &omega_tilde, sig)?;
        let u0 = grid.sample(|x| 0.5 * x.dot(&(&a * x)) + b.dot(x));
        Self::from_field(grid, omega, omega_tilde, sig, u0)
    }

    /// Starts the flow from an arbitrary strictly convex field on the grid.
    pub fn from_field(
        grid: Arc<Grid>,
        omega: ConvexDomain,
        omega_tilde: ConvexDomain,
        sig: Signature,
        u0: Vec<f64>,
    ) -> Result<Self> {
        check_pair(&omega, &omega_tilde, sig)?;
        if u0.len() != grid.len() {
            return Err(Error::Argument("initial field length does not match grid".into()));
        }
        let boundary_targets = match omega_tilde.kind() {
            DomainKind::Interval { lower, upper } => {
                grid.coords().iter().map(|x| if x[0] < omega.center()[0] { *lower } else { *upper }).collect()
            }
            _ => Vec::new(),
        };
        let tau = 0.1 * grid.spacing() * grid.spacing();
        let mut state = Self {
            grid,
            u: u0,
            shift: 0.0,
            t: 0.0,
            u_dot: Vec::new(),
            tau,
            step: 0,
            sig,
            omega,
            omega_tilde,
            boundary_targets,
            initial_rates: (0.0, 0.0),
            lu: SparseLu::default(),
        };
        state.check_admissible(&state.u)?;
        state.u_dot = state.rates(&state.u)?;
        state.initial_rates = min_max(&state.u_dot);
        state.normalize();
        Ok(state)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<Grid> {
        Arc::clone(&self.grid)
    }

    /// Field relative to its anchor value.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Field including the accumulated vertical translation.
    pub fn absolute_u(&self) -> Vec<f64> {
        self.u.iter().map(|x| x + self.shift).collect()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn u_dot(&self) -> &[f64] {
        &self.u_dot
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn set_tau(&mut self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Argument(format!("time step {tau} must be positive")));
        }
        self.tau = tau;
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn omega(&self) -> &ConvexDomain {
        &self.omega
    }

    pub fn omega_tilde(&self) -> &ConvexDomain {
        &self.omega_tilde
    }

    /// Range of `G(Du₀, D²u₀)` over the grid at `t = 0`.
    pub fn initial_rates(&self) -> (f64, f64) {
        self.initial_rates
    }

    /// `(min, max)` of the last rate field.
    pub fn udot_range(&self) -> (f64, f64) {
        min_max(&self.u_dot)
    }

    /// `max |h̃(Du)|` over boundary nodes.
    pub fn boundary_residual(&self) -> f64 {
        self.grid
            .boundary_nodes()
            .map(|i| self.omega_tilde.value(&self.grid.gradient(&self.u, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest nodewise Hessian eigenvalue and its node.
    pub fn min_hessian_eigenvalue(&self) -> (usize, f64) {
        min_hessian(&self.grid, &self.u)
    }

    /// Largest stable explicit step `c h² / λmax(g^ij)` for the current field.
    pub fn explicit_bound(&self, c: f64) -> f64 {
        let p2 = (0..self.grid.len()).map(|i| self.grid.gradient(&self.u, i).norm_squared()).fold(0.0, f64::max);
        let h = self.grid.min_spacing();
        c * h * h * self.sig.v_squared(p2).min(1.0)
    }

    /// One implicit Euler step with adaptive `τ`.
    pub fn step_implicit(&mut self, tol: &Tolerances) -> Result<StepRecord> {
        let mut rejections = 0;
        loop {
            let tau = self.tau.min(tol.tau_max);
            let guess: Vec<f64> = self.u.iter().zip(&self.u_dot).map(|(u, r)| u + tau * r).collect();
            let target = self.u.clone();
            match self.newton(&target, tau, guess, tol) {
                Ok((next, iters, res)) => {
                    let record = self.accept(next, tau, iters, res, rejections);
                    if iters <= 4 {
                        self.tau = (1.5 * tau).min(tol.tau_max);
                    }
                    return Ok(record);
                }
                Err(_) => {
                    rejections += 1;
                    self.tau = 0.5 * tau;
                    if self.tau < tol.tau_min {
                        return Err(Error::StepFailure { tau: self.tau });
                    }
                }
            }
        }
    }

    /// One forward Euler step of size `τ` on the interior; boundary nodes are then
    /// re-solved so that `h̃(Du) = 0` holds again.
    pub fn step_explicit(&mut self, tau: f64, tol: &Tolerances) -> Result<StepRecord> {
        let bound = self.explicit_bound(tol.explicit_c);
        if !(tau > 0.0) || tau > bound {
            return Err(Error::Argument(format!("explicit step {tau:e} violates the stability bound {bound:e}")));
        }
        let rates = self.rates(&self.u)?;
        let target: Vec<f64> = self.u.iter().zip(&rates).map(|(u, r)| u + tau * r).collect();
        let (next, iters, res) = self.newton(&target, 0.0, target.clone(), tol)?;
        Ok(self.accept(next, tau, iters, res, 0))
    }

    fn accept(&mut self, next: Vec<f64>, tau: f64, iters: usize, res: f64, rejections: usize) -> StepRecord {
        self.u_dot = next.iter().zip(&self.u).map(|(a, b)| (a - b) / tau).collect();
        self.u = next;
        self.t += tau;
        self.step += 1;
        self.normalize();
        let (udot_min, udot_max) = min_max(&self.u_dot);
        StepRecord {
            step: self.step,
            t: self.t,
            tau,
            newton_iters: iters,
            newton_residual: res,
            rejections,
            udot_min,
            udot_max,
            boundary_residual: self.boundary_residual(),
        }
    }

    /// Record describing the state before any step.
    pub fn initial_record(&self) -> StepRecord {
        let (udot_min, udot_max) = min_max(&self.u_dot);
        StepRecord {
            step: self.step,
            t: self.t,
            tau: self.tau,
            newton_iters: 0,
            newton_residual: 0.0,
            rejections: 0,
            udot_min,
            udot_max,
            boundary_residual: self.boundary_residual(),
        }
    }

    fn normalize(&mut self) {
        let s = self.u[self.grid.anchor()];
        self.u.iter_mut().for_each(|x| *x -= s);
        self.shift += s;
    }

    /// `G(Du, D²u)` at every node.
    fn rates(&self, u: &[f64]) -> Result<Vec<f64>> {
        (0..self.grid.len())
            .map(|i| {
                let p = self.grid.gradient(u, i);
                self.sig.check_gradient(&p)?;
                Ok(g_kernel(&p, &self.grid.hessian(u, i), self.sig))
            })
            .collect()
    }

    fn check_admissible(&self, u: &[f64]) -> Result<()> {
        if self.sig == Signature::Minkowski {
            for i in 0..self.grid.len() {
                let norm = self.grid.gradient(u, i).norm();
                if norm > 1.0 - SPACELIKE_MARGIN || !norm.is_finite() {
                    return Err(Error::Spacelike { norm, margin: SPACELIKE_MARGIN });
                }
            }
        }
        let (node, eigenvalue) = min_hessian(&self.grid, u);
        if !(eigenvalue > 0.0) {
            return Err(Error::NotConvex { node, eigenvalue });
        }
        Ok(())
    }

    /// Residual of the step system: `U - target - τ G(DU, D²U)` inside, the boundary condition on the boundary.
    fn residual(&self, u: &[f64], target: &[f64], tau: f64) -> Result<Vec<f64>> {
        let grid = &self.grid;
        (0..grid.len())
            .map(|i| {
                let p = grid.gradient(u, i);
                if grid.is_boundary(i) {
                    Ok(self.boundary_row(i, &p))
                } else if tau == 0.0 {
                    Ok(u[i] - target[i])
                } else {
                    self.sig.check_gradient(&p)?;
                    Ok(u[i] - target[i] - tau * g_kernel(&p, &grid.hessian(u, i), self.sig))
                }
            })
            .collect()
    }

    fn boundary_row(&self, i: usize, p: &DVector<f64>) -> f64 {
        if self.boundary_targets.is_empty() {
            self.omega_tilde.value(p)
        } else {
            p[0] - self.boundary_targets[i]
        }
    }

    fn assemble(&mut self, u: &[f64], tau: f64) {
        let grid = Arc::clone(&self.grid);
        let n = grid.dim();
        self.lu.clear();
        for i in 0..grid.len() {
            let st = grid.stencil(i);
            let p = grid.gradient(u, i);
            if grid.is_boundary(i) {
                let hp = if self.boundary_targets.is_empty() {
                    self.omega_tilde.gradient(&p)
                } else {
                    DVector::from_element(1, 1.0)
                };
                for (k, &m) in st.nodes().iter().enumerate() {
                    let w = st.grad_weights(k, n);
                    self.lu.push(i, m, (0..n).map(|a| hp[a] * w[a]).sum());
                }
                continue;
            }
            self.lu.push(i, i, 1.0);
            if tau == 0.0 {
                continue;
            }
            let d = derivative_kernel(&p, &grid.hessian(u, i), self.sig, Transcription::Corrected);
            for (k, &m) in st.nodes().iter().enumerate() {
                let gw = st.grad_weights(k, n);
                let hw = st.hess_weights(k, n);
                let mut w = 0.0;
                for a in 0..n {
                    w += d.g_p[a] * gw[a];
                    for b in 0..n {
                        w += d.g_r[(a, b)] * hw[a * n + b];
                    }
                }
                self.lu.push(i, m, -tau * w);
            }
        }
    }

    /// Newton iteration for the step system; returns the accepted field, iteration count and final residual.
    fn newton(
        &mut self,
        target: &[f64],
        tau: f64,
        guess: Vec<f64>,
        tol: &Tolerances,
    ) -> Result<(Vec<f64>, usize, f64)> {
        let mut u = guess;
        let mut prev = f64::INFINITY;
        for it in 0..=tol.max_newton {
            let f = self.residual(&u, target, tau)?;
            let norm = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !norm.is_finite() {
                break;
            }
            // the second test accepts a residual stuck at the roundoff floor just above tolerance
            if norm <= tol.tol_newton || (norm <= 10.0 * tol.tol_newton && norm > 0.5 * prev) {
                self.check_admissible(&u)?;
                return Ok((u, it, norm));
            }
            if it == tol.max_newton {
                break;
            }
            prev = norm;
            self.assemble(&u, tau);
            let delta = self.lu.solve(u.len(), &f)?;
            u.iter_mut().zip(&delta).for_each(|(x, d)| *x -= d);
        }
        Err(Error::StepFailure { tau })
    }
}

fn check_pair(
    omega: &ConvexDomain,
    omega_tilde: &ConvexDomain,
    sig: Signature,
) -> Result<(nalgebra::DMatrix<f64>, DVector<f64>)> {
    if omega.dimension() != omega_tilde.dimension() {
        return Err(Error::Domain("Ω and Ω̃ have different dimensions".into()));
    }
    if sig == Signature::Minkowski {
        let outer = omega_tilde.norm_range().1;
        if outer > 1.0 - SPACELIKE_MARGIN {
            return Err(Error::Domain(format!("Ω̃ reaches |p| = {outer} and is not inside the unit ball")));
        }
    }
    omega.affine_map_to(omega_tilde).ok_or_else(|| Error::Domain("no affine map between Ω and Ω̃".into()))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn min_hessian(grid: &Grid, u: &[f64]) -> (usize, f64) {
    (0..grid.len())
        .map(|i| (i, SymmetricEigen::new(grid.hessian(u, i)).eigenvalues.min()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 || x.1.is_nan() { x } else { acc })
}

/// `max |G(Du, D²u) - C|` over interior nodes of a strictly convex field.
pub fn translator_residual(grid: &Grid, u: &[f64], c: f64, sig: Signature) -> Result<f64> {
    if u.len() != grid.len() {
        return Err(Error::Argument("field length does not match grid".into()));
    }
    let (node, eigenvalue) = min_hessian(grid, u);
    if !(eigenvalue > 0.0) {
        return Err(Error::NotConvex { node, eigenvalue });
    }
    grid.interior().try_fold(0.0f64, |m, i| {
        let p = grid.gradient(u, i);
        sig.check_gradient(&p)?;
        Ok(m.max((g_kernel(&p, &grid.hessian(u, i), sig) - c).abs()))
    })
}

/// Runs implicit steps until the rate field is constant.
pub fn run_to_translator(state: &mut FlowState, tol: &Tolerances) -> Result<SolitonResult> {
    run_observed(state, tol, |_, _| {})
}

/// As [`run_to_translator`], calling `observer` on the initial state and after every accepted step.
pub fn run_observed(
    state: &mut FlowState,
    tol: &Tolerances,
    mut observer: impl FnMut(&FlowState, &StepRecord),
) -> Result<SolitonResult> {
    let start = Instant::now();
    let first = state.step;
    let mut history = Vec::new();
    let initial = state.initial_record();
    observer(state, &initial);
    let mut newton_total = 0;
    loop {
        if state.step - first >= tol.max_steps {
            let last_osc = history.last().map(StepRecord::oscillation).unwrap_or(f64::INFINITY);
            return Err(Error::NonConvergence { steps: state.step - first, last_osc, history });
        }
        let record = state.step_implicit(tol)?;
        newton_total += record.newton_iters;
        observer(state, &record);
        let done = record.oscillation() < tol.tol_c && record.boundary_residual < tol.tol_b;
        history.push(record);
        if done {
            break;
        }
    }
    let grid = state.grid();
    let interior: Vec<usize> = grid.interior().collect();
    let c_inf = interior.iter().map(|&i| state.u_dot[i]).sum::<f64>() / interior.len() as f64;
    let anchor = state.u[grid.anchor()];
    let u_inf: Vec<f64> = state.u.iter().map(|x| x - anchor).collect();
    let residual = translator_residual(grid, &u_inf, c_inf, state.sig)?;
    let tolerance = tol.tol_r * c_inf.abs().max(1.0);
    if residual > tolerance {
        return Err(Error::TranslatorResidual { residual, tolerance });
    }
    Ok(SolitonResult {
        c_inf,
        u_inf,
        residual,
        steps: state.step - first,
        t: state.t,
        newton_total,
        wall_clock: start.elapsed(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_1d(sig: Signature, intervals: usize) -> FlowState {
        let (lo, hi) = match sig {
            Signature::Minkowski => (-0.5, 0.5),
            Signature::Euclidean => (-1.0, 1.0),
        };
        initialize(
            ConvexDomain::interval(0.0, 1.0).unwrap(),
            ConvexDomain::interval(lo, hi).unwrap(),
            GridSpec::Line { intervals },
            sig,
        )
        .unwrap()
    }

    #[test]
    fn initial_quadratic_matches_affine_pair() {
        let s = reference_1d(Signature::Minkowski, 40);
        let grid = s.grid();
        for i in 0..grid.len() {
            let x = grid.coord(i)[0];
            assert_relative_eq!(s.absolute_u()[i], 0.5 * (x - 0.5).powi(2) - 0.125, epsilon = 1e-14);
        }
        assert!(s.boundary_residual() < 1e-12);

        let s = initialize(
            ConvexDomain::ball(DVector::zeros(2), 1.0).unwrap(),
            ConvexDomain::ball(DVector::zeros(2), 0.5).unwrap(),
            GridSpec::Disk { rings: 8, angles: 16 },
            Signature::Minkowski,
        )
        .unwrap();
        for i in 0..s.grid().len() {
            assert_relative_eq!(s.absolute_u()[i], s.grid().coord(i).norm_squared() / 4.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_target_outside_light_cone() {
        let r = initialize(
            ConvexDomain::interval(0.0, 1.0).unwrap(),
            ConvexDomain::interval(-1.0, 1.0).unwrap(),
            GridSpec::Line { intervals: 10 },
            Signature::Minkowski,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn first_step_keeps_boundary_condition() {
        let mut s = reference_1d(Signature::Minkowski, 40);
        let tol = Tolerances::default();
        let rec = s.step_implicit(&tol).unwrap();
        assert!(rec.boundary_residual <= tol.tol_newton);
        assert!(s.min_hessian_eigenvalue().1 > 0.0);
    }

    #[test]
    fn implicit_and_explicit_agree_for_small_steps() {
        let tol = Tolerances::default();
        let base = reference_1d(Signature::Minkowski, 20);
        let bound = base.explicit_bound(tol.explicit_c);
        let mut diffs = Vec::new();
        for tau in [bound, bound / 2.0] {
            let mut a = base.clone();
            let mut b = base.clone();
            a.set_tau(tau).unwrap();
            let mut tight = tol.clone();
            tight.tol_newton = 1e-14;
            a.step_implicit(&tight).unwrap();
            b.step_explicit(tau, &tight).unwrap();
            let d = a.absolute_u().iter().zip(b.absolute_u()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            diffs.push(d);
        }
        assert!(diffs[0] / diffs[1] > 3.0, "{diffs:?}");
    }

    #[test]
    fn explicit_step_checks_stability() {
        let mut s = reference_1d(Signature::Minkowski, 20);
        let tol = Tolerances::default();
        let bound = s.explicit_bound(tol.explicit_c);
        assert!(matches!(s.step_explicit(2.0 * bound, &tol), Err(Error::Argument(_))));
    }

    #[test]
    fn translator_residual_examples() {
        let grid = Grid::line(0.0, 1.0, 20).unwrap();
        assert!(matches!(
            translator_residual(&grid, &[1.0; 21], 0.0, Signature::Minkowski),
            Err(Error::NotConvex { .. })
        ));
        let u = grid.sample(|x| 0.5 * (x[0] - 0.5).powi(2));
        let r = translator_residual(&grid, &u, 1.0, Signature::Minkowski).unwrap();
        assert!(r > 0.1);
    }

    #[test]
    fn short_minkowski_run() {
        let mut s = reference_1d(Signature::Minkowski, 100);
        let r = run_to_translator(&mut s, &Tolerances::default()).unwrap();
        assert!((r.c_inf - 3f64.ln()).abs() < 1e-3, "{}", r.c_inf);
        assert_eq!(r.u_inf[s.grid().anchor()], 0.0);
    }
}
