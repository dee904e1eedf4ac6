//! Empirical audits of the a priori estimates along a flow.
//!
//! Each estimate is checked as an inequality between quantities computed from the
//! discrete state and constants computed from the initial data, with the
//! truncation-scaled slack `tol_mon = 10 (h² + τ_max h)`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::flow::{FlowState, StepRecord};
use crate::geometry::{graph_geometry, laplace_beltrami, Signature};
use crate::grid::Grid;
use crate::operators::curvature_sandwich;

/// Normalized obliqueness below this fails the run.
pub const OBLIQUENESS_FLOOR: f64 = 1e-3;
/// Hessian eigenvalues below this are reported as a loss of strict convexity.
pub const HESSIAN_FLOOR: f64 = 1e-8;

/// One row of the monitor log.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub udot_min: f64,
    pub udot_max: f64,
    pub obliq_min: f64,
    pub hess_min: f64,
    pub hess_max: f64,
    pub grad_max: f64,
    pub tg_min: f64,
    pub tg_max: f64,
    pub convex_margin: f64,
    pub evo_residual: Option<f64>,
    pub newton_iters: usize,
}

pub fn monitor_tolerance(h: f64, tau_max: f64) -> f64 {
    10.0 * (h * h + tau_max * h)
}

/// Worst signed margin of `m - tol ≤ u_t ≤ M + tol` over recorded rate ranges; nonnegative means pass.
pub fn udot_bounds_check(history: &[(f64, f64)], rates: (f64, f64), tol: f64) -> (bool, f64) {
    let worst =
        history.iter().map(|&(lo, hi)| (lo - rates.0 + tol).min(rates.1 + tol - hi)).fold(f64::INFINITY, f64::min);
    (worst >= 0.0, worst)
}

/// Minimum over boundary nodes of `⟨β, ν⟩ / |β|` with `β = Dh̃(Du)` and `ν` the inward normal of `Ω`.
pub fn obliqueness(state: &FlowState) -> Result<f64> {
    let grid = state.grid();
    grid.boundary_nodes().try_fold(f64::INFINITY, |m, i| {
        let beta = state.omega_tilde().gradient(&grid.gradient(state.u(), i));
        let nu = state.omega().inward_normal(grid.coord(i))?;
        Ok(m.min(beta.dot(&nu) / beta.norm()))
    })
}

/// Extreme eigenvalues of the nodewise Hessians.
pub fn hessian_bounds(state: &FlowState) -> (f64, f64) {
    let grid = state.grid();
    (0..grid.len())
        .map(|i| SymmetricEigen::new(grid.hessian(state.u(), i)).eigenvalues)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e.min()), hi.max(e.max())))
}

/// `1 - max|Du|` in Minkowski space (an error below the spacelike margin), `max|Du|` in Euclidean space.
pub fn spacelike_margin(state: &FlowState) -> Result<f64> {
    let grid = state.grid();
    let max = (0..grid.len()).map(|i| grid.gradient(state.u(), i).norm()).fold(0.0, f64::max);
    match state.signature() {
        Signature::Minkowski => {
            if max > 1.0 - crate::SPACELIKE_MARGIN {
                return Err(Error::Spacelike { norm: max, margin: crate::SPACELIKE_MARGIN });
            }
            Ok(1.0 - max)
        }
        Signature::Euclidean => Ok(max),
    }
}

/// Smallest `κ_min / H` over the given nodes: the largest `ε₀` keeping `h - ε₀ H g ≥ 0` there.
pub fn eps0_over(grid: &Grid, u: &[f64], sig: Signature, nodes: impl Iterator<Item = usize>) -> Result<f64> {
    nodes.into_iter().try_fold(f64::INFINITY, |m, i| {
        let geo = graph_geometry(&grid.jet(u, i), sig)?;
        Ok(m.min(geo.kappa[0] / geo.mean_curvature))
    })
}

/// Minimum over interior nodes of `λ_min(h_ij - ε₀ H g_ij)`.
pub fn convexity_margin(state: &FlowState, eps0: f64) -> Result<f64> {
    let grid = state.grid();
    grid.interior().try_fold(f64::INFINITY, |m, i| {
        let geo = graph_geometry(&grid.jet(state.u(), i), state.signature())?;
        let mat: DMatrix<f64> = &geo.second_form - &geo.g_lo * (eps0 * geo.mean_curvature);
        Ok(m.min(SymmetricEigen::new(mat).eigenvalues.min()))
    })
}

/// Mean curvature at every node.
pub fn mean_curvature_field(grid: &Grid, u: &[f64], sig: Signature) -> Result<Vec<f64>> {
    (0..grid.len()).map(|i| Ok(graph_geometry(&grid.jet(u, i), sig)?.mean_curvature)).collect()
}

/// One state of a flow for the evolution residual.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub t: f64,
    pub u: &'a [f64],
    /// Rate `u_t` at the same time; when present, interior mean curvature is taken as `u_t / v`.
    pub rate: Option<&'a [f64]>,
}

/// Mean curvature of a snapshot: `u_t / v` at interior nodes when the rate is known (the
/// graph flow equation, free of second-difference roundoff), stencil curvature elsewhere.
fn snapshot_curvature(grid: &Grid, sig: Signature, snap: &Snapshot<'_>) -> Result<Vec<f64>> {
    let Some(rate) = snap.rate else {
        return mean_curvature_field(grid, snap.u, sig);
    };
    (0..grid.len())
        .map(|i| {
            if grid.is_boundary(i) {
                Ok(graph_geometry(&grid.jet(snap.u, i), sig)?.mean_curvature)
            } else {
                let p = grid.gradient(snap.u, i);
                sig.check_gradient(&p)?;
                Ok(rate[i] / sig.v_squared(p.norm_squared()).sqrt())
            }
        })
        .collect()
}

/// Residual of the mean curvature evolution at the regular interior nodes of the last snapshot.
///
/// `snapshots` holds at least three states in time order; `∂ₜH` is the
/// variable-step BDF2 difference over the last three. Minkowski:
/// `∂ₜH + (H/v) Du·DH - Δ_M H + |A|² H`; Euclidean flips the signs of the last two terms
/// after `∂ₜH`. Nodes within two stencil hops of the boundary (or the pole) are skipped.
/// Returns the max norm and the nodal residual (NaN where skipped).
pub fn evolution_residual(grid: &Grid, sig: Signature, snapshots: &[Snapshot<'_>]) -> Result<(f64, Vec<f64>)> {
    if snapshots.len() < 3 {
        return Err(Error::Argument("evolution residual needs three snapshots".into()));
    }
    let w = &snapshots[snapshots.len() - 3..];
    let (t0, t1, t2) = (w[0].t, w[1].t, w[2].t);
    if !(t0 < t1 && t1 < t2) {
        return Err(Error::Argument("snapshots must be strictly increasing in time".into()));
    }
    let hs: Vec<Vec<f64>> = w.iter().map(|snap| snapshot_curvature(grid, sig, snap)).collect::<Result<_>>()?;
    let (k1, k2) = (t1 - t0, t2 - t1);
    let om = k2 / k1;
    let u = w[2].u;
    let h = &hs[2];
    let lap = laplace_beltrami(h, u, grid, sig)?;
    let s = sig.sign();
    let mut out = vec![f64::NAN; grid.len()];
    let mut max = 0.0f64;
    for i in (0..grid.len()).filter(|&i| grid.is_regular(i, 2)) {
        let dt = ((1.0 + 2.0 * om) / (1.0 + om) * h[i] - (1.0 + om) * hs[1][i] + om * om / (1.0 + om) * hs[0][i]) / k2;
        let geo = graph_geometry(&grid.jet(u, i), sig)?;
        let du = grid.gradient(u, i);
        let dh = grid.gradient(h, i);
        let r = dt + s * (h[i] / geo.v) * du.dot(&dh) - lap[i] + s * geo.norm_second_form_sq() * h[i];
        out[i] = r;
        max = max.max(r.abs());
    }
    Ok((max, out))
}

/// Pass/fail state of every audit after a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSummary {
    pub tol_mon: f64,
    pub observed: usize,
    pub udot_margin: f64,
    pub obliq_min: f64,
    pub hess_min: f64,
    pub hess_max: f64,
    pub eps0: f64,
    /// Smallest interior convexity margin seen.
    pub convex_min: f64,
    /// Worst signed margin of `Σκ` inside the sandwich.
    pub sandwich_margin: f64,
    pub evo_max: Option<f64>,
    pub failures: Vec<String>,
}

impl AuditSummary {
    pub fn udot_ok(&self) -> bool {
        self.udot_margin >= 0.0
    }

    pub fn obliqueness_ok(&self) -> bool {
        self.obliq_min >= OBLIQUENESS_FLOOR
    }

    pub fn hessian_ok(&self) -> bool {
        self.hess_min >= HESSIAN_FLOOR && self.hess_max.is_finite()
    }

    pub fn convexity_ok(&self) -> bool {
        self.convex_min >= -self.tol_mon
    }

    pub fn sandwich_ok(&self) -> bool {
        self.sandwich_margin >= -self.tol_mon
    }

    pub fn all_ok(&self) -> bool {
        self.udot_ok() && self.obliqueness_ok() && self.hessian_ok() && self.convexity_ok() && self.sandwich_ok()
    }
}

/// Stateful auditor fed with every accepted state; keeps monitor rows at a fixed cadence.
#[derive(Debug, Clone)]
pub struct Auditor {
    cadence: usize,
    with_evolution: bool,
    sig: Signature,
    rates: (f64, f64),
    sandwich: (f64, f64),
    window: VecDeque<(f64, Vec<f64>, Vec<f64>)>,
    records: Vec<MonitorRecord>,
    summary: AuditSummary,
    started: bool,
}

impl Auditor {
    /// `cadence` is the number of accepted steps between logged rows (row 0 is the initial state).
    pub fn new(state: &FlowState, cadence: usize, tau_max: f64) -> Self {
        let rates = state.initial_rates();
        Self {
            cadence: cadence.max(1),
            with_evolution: true,
            sig: state.signature(),
            rates,
            sandwich: curvature_sandwich(state.omega_tilde(), rates, state.signature()),
            window: VecDeque::with_capacity(3),
            records: Vec::new(),
            summary: AuditSummary {
                tol_mon: monitor_tolerance(state.grid().spacing(), tau_max),
                observed: 0,
                udot_margin: f64::INFINITY,
                obliq_min: f64::INFINITY,
                hess_min: f64::INFINITY,
                hess_max: f64::NEG_INFINITY,
                eps0: f64::INFINITY,
                convex_min: f64::INFINITY,
                sandwich_margin: f64::INFINITY,
                evo_max: None,
                failures: Vec::new(),
            },
            started: false,
        }
    }

    /// Skips the evolution residual (it needs a Laplace–Beltrami evaluation per step).
    pub fn without_evolution(mut self) -> Self {
        self.with_evolution = false;
        self
    }

    pub fn records(&self) -> &[MonitorRecord] {
        &self.records
    }

    pub fn summary(&self) -> &AuditSummary {
        &self.summary
    }

    /// Audits one accepted state; the first call must be the initial state.
    pub fn observe(&mut self, state: &FlowState, record: &StepRecord) -> Result<()> {
        let grid = state.grid();
        let u = state.u();
        let tol = self.summary.tol_mon;
        let s = &mut self.summary;
        s.observed += 1;

        let (ok, margin) = udot_bounds_check(&[(record.udot_min, record.udot_max)], self.rates, tol);
        s.udot_margin = s.udot_margin.min(margin);
        if !ok {
            s.failures.push(format!(
                "step {}: u_t range [{}, {}] leaves initial bounds",
                record.step, record.udot_min, record.udot_max
            ));
        }

        let obliq = obliqueness(state)?;
        s.obliq_min = s.obliq_min.min(obliq);
        let (hmin, hmax) = hessian_bounds(state);
        s.hess_min = s.hess_min.min(hmin);
        s.hess_max = s.hess_max.max(hmax);

        // ε₀ tracks the parabolic boundary: every node at t = 0, boundary nodes afterwards
        let eps_now = if self.started {
            eps0_over(grid, u, self.sig, grid.boundary_nodes())?
        } else {
            eps0_over(grid, u, self.sig, 0..grid.len())?
        };
        self.started = true;
        s.eps0 = s.eps0.min(eps_now);
        let convex = convexity_margin(state, s.eps0)?;
        s.convex_min = s.convex_min.min(convex);

        let mut grad_max = 0.0f64;
        let mut tg = (f64::INFINITY, f64::NEG_INFINITY);
        let mut sandwich = f64::INFINITY;
        for i in 0..grid.len() {
            let jet = grid.jet(u, i);
            let p2 = jet.du.norm_squared();
            grad_max = grad_max.max(p2.sqrt());
            let t = grid.dim() as f64 + self.sig.sign() * p2 / self.sig.v_squared(p2);
            tg = (tg.0.min(t), tg.1.max(t));
            if !grid.is_boundary(i) {
                let f = graph_geometry(&jet, self.sig)?.mean_curvature;
                sandwich = sandwich.min(f - self.sandwich.0).min(self.sandwich.1 - f);
            }
        }
        s.sandwich_margin = s.sandwich_margin.min(sandwich);

        let mut evo = None;
        if self.with_evolution {
            if self.window.len() == 3 {
                self.window.pop_front();
            }
            self.window.push_back((state.t(), u.to_vec(), state.u_dot().to_vec()));
            if self.window.len() == 3 {
                let snaps: Vec<Snapshot<'_>> = self
                    .window
                    .iter()
                    .map(|(t, u, r)| Snapshot { t: *t, u: u.as_slice(), rate: Some(r.as_slice()) })
                    .collect();
                let (r, _) = evolution_residual(grid, self.sig, &snaps)?;
                evo = Some(r);
                s.evo_max = Some(s.evo_max.map_or(r, |m| m.max(r)));
            }
        }

        if record.step.is_multiple_of(self.cadence) {
            self.records.push(MonitorRecord {
                step: record.step,
                t: record.t,
                tau: record.tau,
                udot_min: record.udot_min,
                udot_max: record.udot_max,
                obliq_min: obliq,
                hess_min: hmin,
                hess_max: hmax,
                grad_max,
                tg_min: tg.0,
                tg_max: tg.1,
                convex_margin: convex,
                evo_residual: evo,
                newton_iters: record.newton_iters,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::ConvexDomain;
    use crate::flow::initialize;
    use crate::grid::GridSpec;
    use crate::oracles::translator_1d_closed_form;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use std::sync::Arc;

    fn interval_state() -> FlowState {
        initialize(
            ConvexDomain::interval(0.0, 1.0).unwrap(),
            ConvexDomain::interval(-0.5, 0.5).unwrap(),
            GridSpec::Line { intervals: 200 },
            Signature::Minkowski,
        )
        .unwrap()
    }

    #[test]
    fn initial_rates_and_bounds() {
        let s = interval_state();
        let (m, mm) = s.initial_rates();
        assert_relative_eq!(m, 1.0, epsilon = 1e-12);
        assert_relative_eq!(mm, 4.0 / 3.0, epsilon = 1e-12);
        assert!(m < 3f64.ln() && 3f64.ln() < mm);
        let (lo, hi) = hessian_bounds(&s);
        assert_relative_eq!(lo, 1.0, epsilon = 1e-10);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-10);
        assert!(udot_bounds_check(&[(1.0, 4.0 / 3.0)], (m, mm), 1e-12).0);
        assert!(!udot_bounds_check(&[(0.9, 1.0)], (m, mm), 1e-3).0);
    }

    #[test]
    fn obliqueness_examples() {
        let s = interval_state();
        assert_relative_eq!(obliqueness(&s).unwrap(), 1.0, epsilon = 1e-12);
        let s = initialize(
            ConvexDomain::ball(DVector::zeros(2), 1.0).unwrap(),
            ConvexDomain::ball(DVector::zeros(2), 0.5).unwrap(),
            GridSpec::Disk { rings: 8, angles: 16 },
            Signature::Minkowski,
        )
        .unwrap();
        assert_relative_eq!(obliqueness(&s).unwrap(), 1.0, epsilon = 1e-10);
        assert!(spacelike_margin(&s).unwrap() >= 0.5 - 1e-10);
    }

    #[test]
    fn convexity_margin_isotropic_and_1d() {
        let s = initialize(
            ConvexDomain::ball(DVector::zeros(2), 1.0).unwrap(),
            ConvexDomain::ball(DVector::zeros(2), 0.5).unwrap(),
            GridSpec::Disk { rings: 8, angles: 16 },
            Signature::Minkowski,
        )
        .unwrap();
        let eps0 = eps0_over(s.grid(), s.u(), Signature::Minkowski, 0..1).unwrap();
        assert_relative_eq!(eps0, 0.5, epsilon = 1e-12);
        let s = interval_state();
        let eps0 = eps0_over(s.grid(), s.u(), Signature::Minkowski, 0..s.grid().len()).unwrap();
        assert_relative_eq!(eps0, 1.0, epsilon = 1e-14);
        assert!(convexity_margin(&s, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn evolution_residual_on_translator() {
        let mut errs = Vec::new();
        for intervals in [100, 200] {
            let grid = Grid::line(0.0, 1.0, intervals).unwrap();
            let tr = translator_1d_closed_form(0.0, 1.0, -0.5, 0.5, Signature::Minkowski).unwrap();
            let u = grid.sample(|x| tr.value(x[0]));
            let fields: Vec<Vec<f64>> =
                (0..3).map(|k| u.iter().map(|v| v + tr.speed * k as f64 * 0.1).collect()).collect();
            let snaps: Vec<Snapshot<'_>> = fields
                .iter()
                .enumerate()
                .map(|(k, f)| Snapshot { t: 0.1 * k as f64, u: f.as_slice(), rate: None })
                .collect();
            errs.push(evolution_residual(&grid, Signature::Minkowski, &snaps).unwrap().0);
        }
        assert!(errs[1] < 1e-3, "{errs:?}");
        assert!(errs[0] / errs[1] > 2.8, "{errs:?}");
        let grid = Grid::line(0.0, 1.0, 20).unwrap();
        assert!(evolution_residual(&grid, Signature::Minkowski, &[]).is_err());
    }

    #[test]
    fn evolution_residual_vanishes_on_planes() {
        let grid = Arc::new(Grid::line(0.0, 1.0, 20).unwrap());
        let u = grid.sample(|x| 0.3 * x[0]);
        let snaps: Vec<Snapshot<'_>> = (0..3).map(|k| Snapshot { t: k as f64, u: u.as_slice(), rate: None }).collect();
        for sig in [Signature::Minkowski, Signature::Euclidean] {
            assert!(evolution_residual(&grid, sig, &snaps).unwrap().0 < 1e-9);
        }
    }

    #[test]
    fn auditor_logs_at_cadence() {
        let mut s = interval_state();
        let tol = crate::flow::Tolerances::default();
        let mut auditor = Auditor::new(&s, 3, tol.tau_max);
        auditor.observe(&s, &s.initial_record()).unwrap();
        for _ in 0..7 {
            let rec = s.step_implicit(&tol).unwrap();
            auditor.observe(&s, &rec).unwrap();
        }
        assert_eq!(auditor.records().len(), 1 + 7 / 3);
        assert!(auditor.summary().all_ok(), "{:?}", auditor.summary());
        assert!(auditor.summary().evo_max.is_some());
    }
}
