//! Numerical kernels: adaptive quadrature, an embedded Runge-Kutta
//! integrator with dense output, and bracketed 1D solvers.

pub mod ode;
pub mod optimize;
pub mod quadrature;

use std::f64::consts::PI;

/// Wrap an angle into (-pi, pi].
///
/// Odd under negation for every input, so mirror-image trajectories stay
/// bitwise mirrored.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// sin(x)/x with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}
