//! Switching geometry of the cubic curve in polar coordinates.
//!
//! On the circle of radius r the curve `y = x^3` is met at exactly two angles:
//! `theta1(r)` in `[0, pi/2)` solving `sin(theta) = r^2 cos^3(theta)`, and
//! `theta2 = theta1 + pi`. The identities `r^2 = x^2 + x^6`,
//! `cos(theta1) = x/r`, `sin(theta1) = x^3/r` link the crossing abscissa x to
//! the radius.

use crate::error::{Error, Result};
use crate::melnikov::NonsmoothSystem;

/// Switching angles of the cubic at radius r, with the analytic r-derivative
/// of the first angle.
#[derive(Debug, Clone, Copy)]
pub struct SwitchingAngle {
    pub r: f64,
    /// Unique root of `sin(theta) - r^2 cos^3(theta)` in `[0, pi/2)`.
    pub theta1: f64,
    /// `theta1 + pi`.
    pub theta2: f64,
    /// `dtheta1/dr = 2 r cos^2(theta1) / (1 + 3 r^2 cos(theta1) sin(theta1))`,
    /// from implicit differentiation of the defining equation.
    pub dtheta1_dr: f64,
}

const RESIDUAL_TOL: f64 = 1e-14;

/// Bracketed Newton iteration for a strictly increasing function on `[lo, hi]`
/// with `f(lo) < 0 < f(hi)`; falls back to bisection whenever the Newton step
/// leaves the bracket.
fn newton_bracketed(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= RESIDUAL_TOL {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let step = fx / d;
        let candidate = x - step;
        x = if d > 0.0 && candidate > lo && candidate < hi {
            candidate
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    x
}

/// Solves for the switching angle at radius r > 0.
///
/// `g(theta) = sin(theta) - r^2 cos^3(theta)` is strictly increasing on
/// `[0, pi/2]` with `g(0) = -r^2 < 0` and `g(pi/2) = 1 > 0`. For large r the
/// root crowds `pi/2`, so the equation is solved in `u = pi/2 - theta`
/// (`cos(u) = r^2 sin^3(u)`) to avoid cancellation in `cos^3`.
pub fn solve_theta1(r: f64) -> Result<SwitchingAngle> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("solve_theta1 requires r > 0, got {r}")));
    }
    let r2 = r * r;
    let theta1 = if r < 10.0 {
        let f = |th: f64| th.sin() - r2 * th.cos().powi(3);
        let df = |th: f64| th.cos() + 3.0 * r2 * th.cos().powi(2) * th.sin();
        newton_bracketed(f, df, 0.0, std::f64::consts::FRAC_PI_2)
    } else {
        // u = pi/2 - theta: cos(u) - r^2 sin^3(u), strictly decreasing in u
        let f = |u: f64| r2 * u.sin().powi(3) - u.cos();
        let df = |u: f64| 3.0 * r2 * u.sin().powi(2) * u.cos() + u.sin();
        let u = newton_bracketed(f, df, 0.0, std::f64::consts::FRAC_PI_2);
        std::f64::consts::FRAC_PI_2 - u
    };
    let (s, c) = theta1.sin_cos();
    let dtheta1_dr = 2.0 * r * c * c / (1.0 + 3.0 * r2 * c * s);
    Ok(SwitchingAngle {
        r,
        theta1,
        theta2: theta1 + std::f64::consts::PI,
        dtheta1_dr,
    })
}

/// `r = sqrt(x^2 + x^6)` for x >= 0.
pub fn r_of_x(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    x * (1.0 + x.powi(4)).sqrt()
}

/// Inverse of [`r_of_x`]: the unique x >= 0 with `x^2 + x^6 = r^2`.
pub fn x_of_r(r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    if r == 0.0 {
        return 0.0;
    }
    let r2 = r * r;
    // x <= max(1, r^(1/3)) always: x > 1 forces x^6 < r^2.
    let hi = r.cbrt().max(1.0).min(r.max(1.0));
    let f = |x: f64| x * x + x.powi(6) - r2;
    let df = |x: f64| 2.0 * x + 6.0 * x.powi(5);
    let scale = r2.max(1.0);
    let mut lo = 0.0;
    let mut hi = hi * (1.0 + 1e-12);
    let mut x = r.min(hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let candidate = x - fx / df(x);
        x = if candidate > lo && candidate < hi {
            candidate
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// The transversality pairing `D_x theta_j(x) . int_0^{theta_j(x)} F1(s, x) ds`
/// of the j-th switching surface (1-based j).
///
/// A nonzero value certifies that the averaged first-order perturbation is
/// transversal to the switching manifold at this point, which is what makes a
/// nonzero jump correction `f2*` possible there.
pub fn transversality_defect(sys: &NonsmoothSystem, x: &[f64], j: usize) -> Result<f64> {
    if j == 0 || j > sys.switch_count() {
        return Err(Error::Domain(format!(
            "switch index {j} out of range 1..={}",
            sys.switch_count()
        )));
    }
    let theta_j = sys.switch_time(j - 1, x);
    let grad = sys.switch_gradient(j - 1, x);
    let prefix = sys.integrate_f1_prefix(x, theta_j)?;
    Ok(grad.iter().zip(prefix.iter()).map(|(g, p)| g * p).sum())
}
