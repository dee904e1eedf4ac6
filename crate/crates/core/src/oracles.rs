//! Reference solutions independent of the grid solver.
//!
//! One-dimensional translators solve `u'' = C(1 - s u'²)` in closed form. Radial
//! translators on balls reduce to
//!
//! ```text
//! φ' = (C - (n-1) φ / r) (1 - s φ²),   φ(0) = 0,   φ(R) = ρ
//! ```
//!
//! for `φ = u'(r)`, which is shot from the regular start `φ ≈ C r / n`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Signature, Transcription};
use crate::operators::{derivative_kernel, g_kernel};

/// Exact 1D translator with `u'(a) = c`, `u'(b) = d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormTranslator {
    pub speed: f64,
    /// Point where `u' = 0`.
    pub x0: f64,
    pub signature: Signature,
}

pub fn translator_1d_closed_form(a: f64, b: f64, c: f64, d: f64, sig: Signature) -> Result<ClosedFormTranslator> {
    if !(a < b) || !(c < d) {
        return Err(Error::Argument(format!("need a < b and c < d, got ({a}, {b}) and ({c}, {d})")));
    }
    if sig == Signature::Minkowski && !(c > -1.0 && d < 1.0) {
        return Err(Error::Argument(format!("slopes ({c}, {d}) must lie in (-1, 1)")));
    }
    let inv = |q: f64| match sig {
        Signature::Minkowski => q.atanh(),
        Signature::Euclidean => q.atan(),
    };
    let speed = (inv(d) - inv(c)) / (b - a);
    Ok(ClosedFormTranslator { speed, x0: a - inv(c) / speed, signature: sig })
}

impl ClosedFormTranslator {
    pub fn slope(&self, x: f64) -> f64 {
        let z = self.speed * (x - self.x0);
        match self.signature {
            Signature::Minkowski => z.tanh(),
            Signature::Euclidean => z.tan(),
        }
    }

    /// Profile normalized by `u(x0) = 0`.
    pub fn value(&self, x: f64) -> f64 {
        let z = self.speed * (x - self.x0);
        match self.signature {
            Signature::Minkowski => z.cosh().ln() / self.speed,
            Signature::Euclidean => -z.cos().ln() / self.speed,
        }
    }
}

/// Shooting solution of the radial translator equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub slopes: Vec<f64>,
    /// `u(r)` with `u(0) = 0`.
    pub values: Vec<f64>,
    pub speed: f64,
    pub dimension: usize,
    pub signature: Signature,
}

const R_START: f64 = 1e-8;

fn radial_rhs(r: f64, phi: f64, c: f64, n: usize, s: f64) -> f64 {
    (c - (n as f64 - 1.0) * phi / r) * (1.0 - s * phi * phi)
}

/// Dormand–Prince 5(4) integration of `(φ, u)` from the regular start to `r_end`.
/// Returns the accepted nodes `(r, φ, u)`, or `None` if `φ` leaves the admissible range.
fn shoot(c: f64, n: usize, s: f64, r_end: f64, tol: f64) -> Option<Vec<(f64, f64, f64)>> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const NODES: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const E: [f64; 7] =
        [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
    let f = |r: f64, phi: f64| [radial_rhs(r, phi, c, n, s), phi];
    let mut r = R_START;
    let mut y = [c * R_START / n as f64, 0.0];
    let mut out = vec![(0.0, 0.0, 0.0), (r, y[0], y[1])];
    let mut h = 1e-6 * r_end;
    while r < r_end {
        h = h.min(r_end - r);
        let mut k = [[0.0; 2]; 7];
        k[0] = f(r, y[0]);
        for stage in 1..7 {
            let mut yy = y;
            for (j, kj) in k.iter().enumerate().take(stage) {
                yy[0] += h * A[stage - 1][j] * kj[0];
                yy[1] += h * A[stage - 1][j] * kj[1];
            }
            k[stage] = f(r + NODES[stage] * h, yy[0]);
        }
        let y_new = [
            y[0] + h * (0..6).map(|j| A[5][j] * k[j][0]).sum::<f64>(),
            y[1] + h * (0..6).map(|j| A[5][j] * k[j][1]).sum::<f64>(),
        ];
        let err = (0..2)
            .map(|d| {
                let e = h * (0..7).map(|j| E[j] * k[j][d]).sum::<f64>();
                e.abs() / (tol + tol * y_new[d].abs().max(y[d].abs()))
            })
            .fold(0.0f64, f64::max);
        if err <= 1.0 {
            r += h;
            y = y_new;
            if !y[0].is_finite() || (s > 0.0 && y[0].abs() >= 1.0) {
                return None;
            }
            out.push((r, y[0], y[1]));
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * r_end {
            return None;
        }
    }
    Some(out)
}

/// Bisects on the speed `C` until the shot slope hits `rho` at `radius`.
pub fn translator_radial_shooting(radius: f64, rho: f64, n: usize, sig: Signature, tol: f64) -> Result<RadialProfile> {
    if !(radius > 0.0) || n == 0 || !(rho > 0.0) {
        return Err(Error::Argument("need R > 0, rho > 0 and n >= 1".into()));
    }
    if sig == Signature::Minkowski && rho >= 1.0 {
        return Err(Error::Argument(format!("rho = {rho} must be below 1")));
    }
    let s = sig.sign();
    let ode_tol = (tol * 1e-3).max(1e-13);
    let g = match sig {
        Signature::Minkowski => rho.atanh(),
        Signature::Euclidean => rho.atan(),
    };
    // None means the slope blew up before R, i.e. C is too large
    let end_slope = |c: f64| shoot(c, n, s, radius, ode_tol).map(|p| p.last().map(|q| q.1).unwrap_or(0.0));
    let mut lo = 0.0;
    let mut hi = 2.0 * n as f64 * g / radius + 1.0;
    let mut expansions = 0;
    while end_slope(hi).is_some_and(|phi| phi < rho) {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 40 {
            return Err(Error::Oracle("no bracket for the shooting speed".into()));
        }
    }
    while hi - lo > tol * hi.max(1.0) * 1e-2 {
        let mid = 0.5 * (lo + hi);
        match end_slope(mid) {
            Some(phi) if phi < rho => lo = mid,
            _ => hi = mid,
        }
    }
    let speed = 0.5 * (lo + hi);
    let nodes = shoot(speed, n, s, radius, ode_tol).ok_or_else(|| Error::Oracle("final shot failed".into()))?;
    Ok(RadialProfile {
        radii: nodes.iter().map(|q| q.0).collect(),
        slopes: nodes.iter().map(|q| q.1).collect(),
        values: nodes.iter().map(|q| q.2).collect(),
        speed,
        dimension: n,
        signature: sig,
    })
}

impl RadialProfile {
    fn slope_derivative(&self, k: usize) -> f64 {
        let r = self.radii[k];
        if r == 0.0 {
            self.speed / self.dimension as f64
        } else {
            radial_rhs(r, self.slopes[k], self.speed, self.dimension, self.signature.sign())
        }
    }

    /// `(u(r), u'(r))` by cubic Hermite interpolation between integrator nodes.
    pub fn sample(&self, r: f64) -> (f64, f64) {
        let last = self.radii.len() - 1;
        let k = match self.radii.partition_point(|&q| q <= r) {
            0 => 0,
            i if i > last => last - 1,
            i => i - 1,
        };
        let (r0, r1) = (self.radii[k], self.radii[k + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (h00, h10, h01, h11) = (
            2.0 * t.powi(3) - 3.0 * t * t + 1.0,
            t.powi(3) - 2.0 * t * t + t,
            -2.0 * t.powi(3) + 3.0 * t * t,
            t.powi(3) - t * t,
        );
        let u =
            h00 * self.values[k] + h10 * h * self.slopes[k] + h01 * self.values[k + 1] + h11 * h * self.slopes[k + 1];
        let phi = h00 * self.slopes[k]
            + h10 * h * self.slope_derivative(k)
            + h01 * self.slopes[k + 1]
            + h11 * h * self.slope_derivative(k + 1);
        (u, phi)
    }

    /// Largest `|φ'(r) - rhs|` at the interior integrator nodes, with `φ'` from centered differences.
    pub fn ode_defect(&self) -> f64 {
        (2..self.radii.len() - 1)
            .map(|k| {
                let (a, b) = (self.radii[k - 1], self.radii[k + 1]);
                let fd = (self.slopes[k + 1] - self.slopes[k - 1]) / (b - a);
                let curv = (self.slope_derivative(k + 1) - self.slope_derivative(k - 1)) / (b - a);
                // the centered difference is second order only on uniform spacing; correct for the skew
                let skew = 0.5 * ((b - self.radii[k]) - (self.radii[k] - a)) * curv;
                (fd - skew - self.slope_derivative(k)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Worst relative error between analytic and central-difference derivatives of `G`
/// over random jets with `|p| ≤ 0.9` and `n` cycling through 1, 2, 3.
pub fn fd_check_derivatives(samples: usize, sig: Signature, eps: f64, form: Transcription, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..samples {
        let n = 1 + k % 3;
        let (p, r) = random_jet(&mut rng, n);
        worst = worst.max(fd_error(&p, &r, sig, eps, form));
    }
    worst
}

/// Random gradient in the ball of radius 0.9 and random symmetric second derivative.
pub fn random_jet(rng: &mut impl Rng, n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let p = loop {
        let p = DVector::from_fn(n, |_, _| rng.gen_range(-0.9..0.9));
        if p.norm() <= 0.9 {
            break p;
        }
    };
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (p, (&m + m.transpose()) * 0.5)
}

/// Relative error `‖fd - analytic‖∞ / max(‖analytic‖∞, 1)` at one jet.
pub fn fd_error(p: &DVector<f64>, r: &DMatrix<f64>, sig: Signature, eps: f64, form: Transcription) -> f64 {
    let n = p.len();
    let d = derivative_kernel(p, r, sig, form);
    let mut err = 0.0f64;
    let mut scale = 1.0f64;
    for a in 0..n {
        let mut pp = p.clone();
        let mut pm = p.clone();
        pp[a] += eps;
        pm[a] -= eps;
        let fd = (g_kernel(&pp, r, sig) - g_kernel(&pm, r, sig)) / (2.0 * eps);
        err = err.max((fd - d.g_p[a]).abs());
        scale = scale.max(d.g_p[a].abs());
        for b in 0..n {
            let mut rp = r.clone();
            let mut rm = r.clone();
            rp[(a, b)] += eps;
            rm[(a, b)] -= eps;
            let fd = (g_kernel(p, &rp, sig) - g_kernel(p, &rm, sig)) / (2.0 * eps);
            err = err.max((fd - d.g_r[(a, b)]).abs());
            scale = scale.max(d.g_r[(a, b)].abs());
        }
    }
    err / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_speeds() {
        let t = translator_1d_closed_form(0.0, 1.0, -0.5, 0.5, Signature::Minkowski).unwrap();
        assert_relative_eq!(t.speed, 3f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(t.x0, 0.5, epsilon = 1e-15);
        let t = translator_1d_closed_form(0.0, 1.0, -1.0, 1.0, Signature::Euclidean).unwrap();
        assert_relative_eq!(t.speed, std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        for d in [0.5, 0.1, 1e-6] {
            let t = translator_1d_closed_form(-1.0, 1.0, -d, d, Signature::Minkowski).unwrap();
            assert_relative_eq!(t.speed, f64::atanh(d), epsilon = 1e-15);
        }
        assert!(translator_1d_closed_form(0.0, 1.0, -1.0, 0.5, Signature::Minkowski).is_err());
        assert!(translator_1d_closed_form(1.0, 0.0, -0.5, 0.5, Signature::Euclidean).is_err());
    }

    #[test]
    fn closed_form_solves_ode() {
        for (sig, c, d) in [(Signature::Minkowski, -0.3, 0.7), (Signature::Euclidean, -2.0, 0.5)] {
            let t = translator_1d_closed_form(0.2, 1.5, c, d, sig).unwrap();
            assert_relative_eq!(t.slope(0.2), c, epsilon = 1e-13);
            assert_relative_eq!(t.slope(1.5), d, epsilon = 1e-13);
            let h = 1e-4;
            for x in [0.3, 0.8, 1.4] {
                let du = (t.value(x + h) - t.value(x - h)) / (2.0 * h);
                let d2u = (t.value(x + h) - 2.0 * t.value(x) + t.value(x - h)) / (h * h);
                assert_relative_eq!(du, t.slope(x), epsilon = 1e-7);
                assert_relative_eq!(d2u / sig.v_squared(du * du), t.speed, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn shooting_reduces_to_closed_form_in_one_dimension() {
        for sig in [Signature::Minkowski, Signature::Euclidean] {
            let p = translator_radial_shooting(1.0, 0.5, 1, sig, 1e-10).unwrap();
            let c = translator_1d_closed_form(-1.0, 1.0, -0.5, 0.5, sig).unwrap();
            assert_relative_eq!(p.speed, c.speed, epsilon = 1e-9);
            let (u, phi) = p.sample(0.7);
            assert_relative_eq!(phi, c.slope(0.7), epsilon = 1e-8);
            assert_relative_eq!(u, c.value(0.7), epsilon = 1e-8);
        }
    }

    #[test]
    fn frozen_disk_speed() {
        let p = translator_radial_shooting(1.0, 0.5, 2, Signature::Minkowski, 1e-10).unwrap();
        assert_relative_eq!(p.speed, 1.0735826836105615, epsilon = 1e-8);
        assert!(p.slopes.windows(2).all(|w| w[1] > w[0]));
        assert_relative_eq!(*p.slopes.last().unwrap(), 0.5, epsilon = 1e-8);
        assert!(p.ode_defect() < 1e-4);
    }

    #[test]
    fn shooting_speed_grows_with_rho() {
        let speeds: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|&rho| translator_radial_shooting(1.0, rho, 2, Signature::Minkowski, 1e-8).unwrap().speed)
            .collect();
        assert!(speeds.windows(2).all(|w| w[1] > w[0]), "{speeds:?}");
        let tiny = translator_radial_shooting(1.0, 1e-6, 3, Signature::Euclidean, 1e-12).unwrap();
        assert!(tiny.speed < 1e-5);
    }

    #[test]
    fn derivative_check_passes_and_scales() {
        for sig in [Signature::Minkowski, Signature::Euclidean] {
            assert!(fd_check_derivatives(300, sig, 1e-5, Transcription::Corrected, 7) < 1e-6);
        }
        let p = DVector::from_vec(vec![0.5, -0.3]);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, -0.7]);
        let e1 = fd_error(&p, &r, Signature::Minkowski, 1e-3, Transcription::Corrected);
        let e2 = fd_error(&p, &r, Signature::Minkowski, 5e-4, Transcription::Corrected);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "{}", e1 / e2);
        let zero = derivative_kernel(&DVector::zeros(2), &r, Signature::Minkowski, Transcription::Corrected);
        assert_eq!(zero.g_p.amax(), 0.0);
    }

    #[test]
    fn printed_transcription_fails_the_check() {
        assert!(fd_check_derivatives(100, Signature::Minkowski, 1e-5, Transcription::AsPrinted, 7) > 0.1);
    }
}
