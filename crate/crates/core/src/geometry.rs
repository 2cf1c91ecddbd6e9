//! Trap parameters of the ring: closed forms in the resonance-tracked
//! regime, and a numerical survey of the averaged potential that works for
//! any configuration.

use crate::constants::{G_GRAV, HBAR};
use crate::fields::{averaged_linear_forms, AtomState, Branch, FieldConfig, PotentialOptions};
use crate::numerics::optimize::brent_root;
use crate::numerics::quadrature::{integrate, QuadOptions};
use crate::numerics::wrap_angle;
use crate::vec3::Vec3;
use crate::{Error, Result};
use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryOrigin {
    Analytic,
    Numeric,
}

/// Harmonic description of the bucket sitting on the ring.
///
/// `phi0` is the bucket angle parameter: the `-` branch sits at `+phi0` and
/// the `+` branch at `-phi0` (see [`TrapGeometry::branch_minimum`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapGeometry {
    /// m
    pub radius: f64,
    /// rad/s
    pub omega_r: f64,
    /// rad/s
    pub omega_z: f64,
    /// rad/s
    pub omega_phi: f64,
    /// J
    pub v0: f64,
    /// rad, in [0, 2 pi)
    pub phi0: f64,
    /// False when the ring is flat and `phi0` carries no information.
    pub phi0_defined: bool,
    pub beta: f64,
    /// rad/s
    pub omega0: f64,
    pub origin: GeometryOrigin,
}

impl TrapGeometry {
    /// Azimuth of the bucket minimum for one dressed branch.
    pub fn branch_minimum(&self, branch: Branch) -> f64 {
        positive_angle(-branch.sign() * self.phi0)
    }

    /// Depth from azimuthal frequency, m omega_phi^2 R^2.
    pub fn depth_from_frequency(&self, mass: f64) -> f64 {
        mass * self.omega_phi * self.omega_phi * self.radius * self.radius
    }

    /// Geometry with a different azimuthal depth and the matching frequency.
    pub fn with_depth(mut self, v0: f64, mass: f64) -> Self {
        self.v0 = v0;
        self.omega_phi = azimuthal_frequency(v0, mass, self.radius);
        self
    }
}

fn positive_angle(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Radius where the static quadrupole field is resonant with the rf carrier, m.
pub fn resonance_radius(cfg: &FieldConfig, atom: &AtomState) -> f64 {
    HBAR * cfg.omega_rf0 / (atom.zeeman_moment() * cfg.alpha)
}

/// Ring radius hbar omega_rf0 / (|g_F| mu_B alpha), m.
pub fn ring_radius(cfg: &FieldConfig, atom: &AtomState) -> Result<f64> {
    if !cfg.rf_tracking {
        return Err(Error::invalid(
            "closed-form ring radius requires rf_tracking; use numeric_trap_geometry",
        ));
    }
    Ok(resonance_radius(cfg, atom))
}

/// Frequency scale |g_F| mu_B alpha / sqrt(m hbar Omega_0c), rad/s.
pub fn frequency_scale(cfg: &FieldConfig, atom: &AtomState) -> f64 {
    atom.zeeman_moment() * cfg.alpha / (atom.mass * HBAR * cfg.rabi0c).sqrt()
}

/// Radial and vertical trap frequencies `(omega_r, omega_z)`, rad/s.
pub fn trap_frequencies(cfg: &FieldConfig, atom: &AtomState) -> (f64, f64) {
    let w0 = frequency_scale(cfg, atom);
    let q = 1.0 + cfg.beta(atom).powi(2);
    let omega_r = w0 * q.powf(-0.25);
    let omega_z = 2.0 * w0 * (1.0 - q.powf(-0.5)).max(0.0).sqrt();
    (omega_r, omega_z)
}

/// Complete elliptic integral of the second kind at imaginary modulus,
/// E(i beta) = integral over [0, pi/2] of sqrt(1 + beta^2 sin^2).
pub fn elliptic_e_imag(beta: f64) -> f64 {
    let b2 = beta * beta;
    let opts = QuadOptions {
        rtol: 1e-13,
        initial_intervals: 2,
        ..Default::default()
    };
    integrate(|t| Ok((1.0 + b2 * t.sin().powi(2)).sqrt()), 0.0, PI / 2.0, &opts).expect("smooth bounded integrand")
}

/// sqrt(V0 / m) / R
pub fn azimuthal_frequency(v0: f64, mass: f64, radius: f64) -> f64 {
    (v0.max(0.0) / mass).sqrt() / radius
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AzimuthalTrap {
    pub v0: f64,
    /// None when both the ellipticity and the tilt vanish.
    pub phi0: Option<f64>,
    pub omega_phi: f64,
}

/// Bucket depth, angle and frequency from ellipticity and tilt.
pub fn azimuthal_trap(cfg: &FieldConfig, atom: &AtomState) -> Result<AzimuthalTrap> {
    let radius = ring_radius(cfg, atom)?;
    let e = elliptic_e_imag(cfg.beta(atom));
    let coupling_term = 2.0 / PI * e * HBAR * cfg.rabi0c * cfg.ellipticity;
    let gravity_term = 0.5 * atom.mass * G_GRAV * radius * cfg.delta;
    let v0 = coupling_term.hypot(gravity_term);
    let phi0 = if coupling_term == 0.0 && gravity_term == 0.0 {
        None
    } else {
        Some(positive_angle(coupling_term.atan2(gravity_term)))
    };
    Ok(AzimuthalTrap {
        v0,
        phi0,
        omega_phi: azimuthal_frequency(v0, atom.mass, radius),
    })
}

/// Closed-form geometry; requires resonance-tracked rf.
pub fn analytic_trap_geometry(cfg: &FieldConfig, atom: &AtomState) -> Result<TrapGeometry> {
    cfg.validate()?;
    let radius = ring_radius(cfg, atom)?;
    let (omega_r, omega_z) = trap_frequencies(cfg, atom);
    let az = azimuthal_trap(cfg, atom)?;
    Ok(TrapGeometry {
        radius,
        omega_r,
        omega_z,
        omega_phi: az.omega_phi,
        v0: az.v0,
        phi0: az.phi0.unwrap_or(0.0),
        phi0_defined: az.phi0.is_some(),
        beta: cfg.beta(atom),
        omega0: frequency_scale(cfg, atom),
        origin: GeometryOrigin::Analytic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericOptions {
    /// Azimuthal samples of the valley floor.
    pub samples: usize,
    /// Finite-difference step relative to the ring radius.
    pub step_rel: f64,
    pub potential: PotentialOptions,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            samples: 24,
            step_rel: 1e-4,
            potential: PotentialOptions::with_gravity(),
        }
    }
}

/// Local frame at azimuth phi: radial, tangential, vertical.
fn frame(phi: f64) -> [Vec3; 3] {
    let (s, c) = phi.sin_cos();
    [Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0), Vec3::Z]
}

/// Value, gradient and Hessian of the averaged potential in a local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExpansion {
    pub value: f64,
    pub gradient: [f64; 3],
    pub hessian: [[f64; 3]; 3],
}

/// Fourth-order stencils along the selected frame axes plus second-order
/// mixed terms, averaged in one quadrature.
fn local_expansion(
    center: Vec3,
    axes: &[Vec3; 3],
    active: &[usize],
    h: f64,
    cfg: &FieldConfig,
    atom: &AtomState,
    opts: &PotentialOptions,
) -> Result<LocalExpansion> {
    let mut points = vec![center];
    let mut axis_idx = [[0usize; 4]; 3];
    for &a in active {
        for (k, m) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
            axis_idx[a][k] = points.len();
            points.push(center + axes[a] * (m * h));
        }
    }
    let mut pairs = Vec::new();
    for (i, &a) in active.iter().enumerate() {
        for &b in &active[i + 1..] {
            let base = points.len();
            for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                points.push(center + axes[a] * (sa * h) + axes[b] * (sb * h));
            }
            pairs.push((a, b, base));
        }
    }
    let n = points.len();
    let mut forms = Vec::new();
    let mut value = vec![0.0; n];
    value[0] = 1.0;
    forms.push(value);
    for &a in active {
        let mut g = vec![0.0; n];
        let [m2, m1, p1, p2] = axis_idx[a];
        g[m2] = 1.0 / (12.0 * h);
        g[m1] = -8.0 / (12.0 * h);
        g[p1] = 8.0 / (12.0 * h);
        g[p2] = -1.0 / (12.0 * h);
        forms.push(g);
        let mut d = vec![0.0; n];
        let h2 = 12.0 * h * h;
        d[m2] = -1.0 / h2;
        d[m1] = 16.0 / h2;
        d[0] = -30.0 / h2;
        d[p1] = 16.0 / h2;
        d[p2] = -1.0 / h2;
        forms.push(d);
    }
    for &(_, _, base) in &pairs {
        let mut m = vec![0.0; n];
        let w = 1.0 / (4.0 * h * h);
        m[base] = w;
        m[base + 1] = -w;
        m[base + 2] = -w;
        m[base + 3] = w;
        forms.push(m);
    }
    let out = averaged_linear_forms(&points, &forms, cfg, atom, opts)?;
    let mut gradient = [0.0; 3];
    let mut hessian = [[0.0; 3]; 3];
    for (k, &a) in active.iter().enumerate() {
        gradient[a] = out[1 + 2 * k];
        hessian[a][a] = out[2 + 2 * k];
    }
    let off = 1 + 2 * active.len();
    for (k, &(a, b, _)) in pairs.iter().enumerate() {
        hessian[a][b] = out[off + k];
        hessian[b][a] = out[off + k];
    }
    Ok(LocalExpansion {
        value: out[0],
        gradient,
        hessian,
    })
}

/// Point of the valley floor at one azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValleyPoint {
    pub phi: f64,
    pub rho: f64,
    pub z: f64,
    /// J
    pub energy: f64,
    /// Tangential gradient, J/m.
    pub tangential_gradient: f64,
}

struct Surveyor<'a> {
    cfg: &'a FieldConfig,
    atom: &'a AtomState,
    opts: &'a NumericOptions,
    h: f64,
    scale: f64,
}

impl Surveyor<'_> {
    fn expansion(&self, rho: f64, phi: f64, z: f64, axes: &[Vec3; 3]) -> Result<LocalExpansion> {
        let center = Vec3::cylindrical(rho, phi, z);
        local_expansion(
            center,
            axes,
            &[0, 1, 2],
            self.h,
            self.cfg,
            self.atom,
            &self.opts.potential,
        )
    }

    /// Damped Newton search for the (rho, z) minimum at fixed azimuth.
    fn valley(&self, phi: f64, guess: (f64, f64)) -> Result<ValleyPoint> {
        let axes = frame(phi);
        let (mut rho, mut z) = guess;
        let mut e = self.expansion(rho, phi, z, &axes)?;
        for _ in 0..100 {
            let (g0, g2) = (e.gradient[0], e.gradient[2]);
            let (a, b, c) = (e.hessian[0][0], e.hessian[0][2], e.hessian[2][2]);
            let det = a * c - b * b;
            let (mut dr, mut dz) = if a > 0.0 && det > 0.0 {
                ((-c * g0 + b * g2) / det, (b * g0 - a * g2) / det)
            } else {
                // outside the convex basin: descend along the gradient
                let gn = g0.hypot(g2).max(f64::MIN_POSITIVE);
                (-0.01 * self.scale * g0 / gn, -0.01 * self.scale * g2 / gn)
            };
            let len = dr.hypot(dz);
            let max_step = 0.05 * self.scale;
            if len > max_step {
                dr *= max_step / len;
                dz *= max_step / len;
            }
            if len < 1e-10 * self.scale {
                return Ok(ValleyPoint {
                    phi,
                    rho,
                    z,
                    energy: e.value,
                    tangential_gradient: e.gradient[1],
                });
            }
            // backtrack while the energy rises; tiny steps are taken as is
            let mut accepted = None;
            for _ in 0..30 {
                if rho + dr <= 0.0 {
                    dr *= 0.5;
                    dz *= 0.5;
                    continue;
                }
                let trial = self.expansion(rho + dr, phi, z + dz, &axes)?;
                let small = dr.hypot(dz) < 1e-6 * self.scale;
                if trial.value <= e.value || small {
                    accepted = Some(trial);
                    break;
                }
                dr *= 0.5;
                dz *= 0.5;
            }
            match accepted {
                Some(t) => {
                    rho += dr;
                    z += dz;
                    e = t;
                }
                None => return Err(Error::Minimization(format!("no descent direction at phi = {phi}"))),
            }
        }
        Err(Error::Minimization(format!(
            "valley search did not converge at phi = {phi}"
        )))
    }
}

/// First-harmonic fit of the valley energy, a0 - V0 cos(phi - phi_min).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicFit {
    pub mean: f64,
    pub v0: f64,
    pub phi_min: f64,
    /// Largest deviation from the fit relative to V0.
    pub residual: f64,
}

fn harmonic_fit(points: &[ValleyPoint]) -> HarmonicFit {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.energy).sum::<f64>() / n;
    let a1 = 2.0 / n * points.iter().map(|p| (p.energy - mean) * p.phi.cos()).sum::<f64>();
    let b1 = 2.0 / n * points.iter().map(|p| (p.energy - mean) * p.phi.sin()).sum::<f64>();
    let v0 = a1.hypot(b1);
    let phi_min = positive_angle((-b1).atan2(-a1));
    let residual = points
        .iter()
        .map(|p| (p.energy - (mean + a1 * p.phi.cos() + b1 * p.phi.sin())).abs())
        .fold(0.0, f64::max)
        / v0.max(f64::MIN_POSITIVE);
    HarmonicFit {
        mean,
        v0,
        phi_min,
        residual,
    }
}

/// Full numerical description of the ring for one branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingSurvey {
    pub valley: Vec<ValleyPoint>,
    pub fit: HarmonicFit,
    pub minimum: ValleyPoint,
    pub geometry: TrapGeometry,
}

/// Survey the averaged potential: valley floor at evenly spaced azimuths,
/// first-harmonic fit, stationary point of the valley energy, and curvatures
/// there.
pub fn ring_survey(cfg: &FieldConfig, atom: &AtomState, opts: &NumericOptions) -> Result<RingSurvey> {
    cfg.validate()?;
    atom.validate()?;
    if opts.samples < 4 {
        return Err(Error::invalid("numeric survey needs at least 4 azimuthal samples"));
    }
    let r_guess = resonance_radius(cfg, atom);
    let sv = Surveyor {
        cfg,
        atom,
        opts,
        h: opts.step_rel * r_guess,
        scale: r_guess,
    };
    let mut valley = Vec::with_capacity(opts.samples);
    let mut guess = (r_guess, 0.5 * r_guess * cfg.delta.tan());
    for k in 0..opts.samples {
        let phi = 2.0 * PI * k as f64 / opts.samples as f64;
        let p = sv.valley(phi, guess)?;
        guess = (p.rho, p.z);
        valley.push(p);
    }
    let fit = harmonic_fit(&valley);
    let flat = fit.v0 <= 1e-8 * fit.mean.abs();

    let minimum = if flat {
        valley[0]
    } else {
        let width = 2.0 * PI / opts.samples as f64;
        let start = sv.valley(fit.phi_min, guess_near(&valley, fit.phi_min))?;
        let tangential = |phi: f64| -> Result<f64> { Ok(sv.valley(phi, (start.rho, start.z))?.tangential_gradient) };
        let (mut lo, mut hi) = (fit.phi_min - width, fit.phi_min + width);
        let (glo, ghi) = (tangential(lo)?, tangential(hi)?);
        if !(glo < 0.0 && ghi > 0.0) {
            // widen once before giving up
            lo -= width;
            hi += width;
            if !(tangential(lo)? < 0.0 && tangential(hi)? > 0.0) {
                return Err(Error::Minimization("azimuthal minimum not bracketed".into()));
            }
        }
        let phi = brent_root(tangential, lo, hi, 1e-10)?;
        let mut p = sv.valley(phi, (start.rho, start.z))?;
        p.phi = positive_angle(phi);
        p
    };

    let axes = frame(minimum.phi);
    let center = Vec3::cylindrical(minimum.rho, minimum.phi, minimum.z);
    let e = local_expansion(center, &axes, &[0, 1, 2], sv.h, cfg, atom, &opts.potential)?;
    let hm = Matrix3::from_fn(|i, j| e.hessian[i][j]);
    let eig = SymmetricEigen::new(hm);
    let mut idx = [0usize, 1, 2];
    // azimuthal mode: largest tangential weight; vertical: largest z weight
    idx.sort_by(|&a, &b| {
        eig.eigenvectors[(1, b)]
            .abs()
            .total_cmp(&eig.eigenvectors[(1, a)].abs())
    });
    let phi_mode = idx[0];
    let (m1, m2) = (idx[1], idx[2]);
    let (z_mode, r_mode) = if eig.eigenvectors[(2, m1)].abs() >= eig.eigenvectors[(2, m2)].abs() {
        (m1, m2)
    } else {
        (m2, m1)
    };
    let lam_r = eig.eigenvalues[r_mode];
    let lam_z = eig.eigenvalues[z_mode];
    let lam_phi = eig.eigenvalues[phi_mode];
    for (lam, name) in [(lam_r, "radial"), (lam_z, "vertical")] {
        if lam <= 0.0 {
            return Err(Error::NonPositiveCurvature {
                curvature: lam,
                direction: name.into(),
            });
        }
    }
    let noise = 1e-6 * lam_r;
    if lam_phi < -noise {
        return Err(Error::NonPositiveCurvature {
            curvature: lam_phi,
            direction: "azimuthal".into(),
        });
    }
    let mass = atom.mass;
    let omega_phi = (lam_phi.max(0.0) / mass).sqrt();
    let raw_phi0 = positive_angle(-atom.branch.sign() * minimum.phi);
    let geometry = TrapGeometry {
        radius: minimum.rho,
        omega_r: (lam_r / mass).sqrt(),
        omega_z: (lam_z / mass).sqrt(),
        omega_phi,
        v0: if flat { 0.0 } else { fit.v0 },
        phi0: if flat { 0.0 } else { raw_phi0 },
        phi0_defined: !flat,
        beta: cfg.beta(atom),
        omega0: frequency_scale(cfg, atom),
        origin: GeometryOrigin::Numeric,
    };
    Ok(RingSurvey {
        valley,
        fit,
        minimum,
        geometry,
    })
}

fn guess_near(valley: &[ValleyPoint], phi: f64) -> (f64, f64) {
    let best = valley
        .iter()
        .min_by(|a, b| wrap_angle(a.phi - phi).abs().total_cmp(&wrap_angle(b.phi - phi).abs()))
        .expect("non-empty valley");
    (best.rho, best.z)
}

/// Geometry extracted numerically from the averaged potential.
pub fn numeric_trap_geometry(cfg: &FieldConfig, atom: &AtomState, opts: &NumericOptions) -> Result<TrapGeometry> {
    Ok(ring_survey(cfg, atom, opts)?.geometry)
}
