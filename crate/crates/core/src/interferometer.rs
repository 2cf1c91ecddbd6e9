//! Full interferometer sequences on the ring and their readout.
//!
//! Both arms are integrated with the pendulum model and the Sagnac phase is
//! taken from the difference of their accumulated actions. The closed forms
//! below serve as cross-checks on that number.

use crate::constants::{HBAR, H_PLANCK};
use crate::dynamics::{
    accelerator_drive, constant_velocity_bucket, integrate_harmonic_cartesian, integrate_pendulum,
    smooth_bucket_schedule, AzimuthalProfile, CartesianOptions, IntegrationOptions, PlanarState, Trajectory,
    Trajectory2D, TrapDrive,
};
use crate::fields::{AtomState, Branch, FieldConfig};
use crate::geometry::{analytic_trap_geometry, numeric_trap_geometry, NumericOptions, TrapGeometry};
use crate::numerics::sinc;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Angular separation of the two arms when both have completed a full turn.
pub const FULL_CLOSURE: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketMotion {
    /// Buckets start moving at 2 pi / T from rest.
    #[default]
    ConstantVelocity,
    /// Quarter-period launch, constant velocity, quarter-period stop.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheme {
    /// Free propagation in a flat waveguide after opposite momentum kicks.
    BraggWaveguide {
        /// Single-photon recoil velocity, m/s. Each arm moves at twice this.
        #[serde(default)]
        recoil_velocity: Option<f64>,
        /// Fractional excess speed of the `+` arm.
        #[serde(default)]
        velocity_asymmetry: f64,
        /// Azimuthal frequency of the trap the packets were prepared in, rad/s.
        /// Needed for the visibility when the ring itself is flat.
        #[serde(default)]
        packet_omega_phi: Option<f64>,
    },
    /// Pendulum launch into a bucket displaced by `jump_angle`, swapped at the
    /// turning point.
    Accelerator {
        #[serde(default = "default_jump")]
        jump_angle: f64,
    },
    MovingBucket {
        #[serde(default)]
        motion: BucketMotion,
        /// Initial bucket offset for the smooth schedule, rad.
        #[serde(default)]
        phi_a: Option<f64>,
        #[serde(default = "default_bucket_profile")]
        profile: AzimuthalProfile,
    },
}

fn default_jump() -> f64 {
    PI / 2.0
}

fn default_bucket_profile() -> AzimuthalProfile {
    AzimuthalProfile::Harmonic
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::BraggWaveguide { .. } => "bragg_waveguide",
            Scheme::Accelerator { .. } => "accelerator",
            Scheme::MovingBucket { .. } => "moving_bucket",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub scheme: Scheme,
    /// rad/s
    #[serde(default)]
    pub omega_rot: f64,
    /// s; derived for the accelerator and the smooth bucket.
    #[serde(default)]
    pub transit_time: Option<f64>,
    /// Output samples per arm.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    IntegrationOptions::default().samples
}

impl SequenceSpec {
    pub fn new(scheme: Scheme, omega_rot: f64, transit_time: Option<f64>) -> Self {
        SequenceSpec {
            scheme,
            omega_rot,
            transit_time,
            samples: default_samples(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !self.omega_rot.is_finite() {
            v.push("omega_rot must be finite".to_string());
        }
        if let Some(t) = self.transit_time {
            if !(t > 0.0 && t.is_finite()) {
                v.push("transit_time must be positive".to_string());
            }
        }
        if self.samples < 2 {
            v.push("samples must be at least 2".to_string());
        }
        match &self.scheme {
            Scheme::BraggWaveguide {
                recoil_velocity,
                velocity_asymmetry,
                packet_omega_phi,
            } => {
                match (recoil_velocity, self.transit_time) {
                    (Some(_), Some(_)) => {
                        v.push("bragg_waveguide takes either recoil_velocity or transit_time, not both".into())
                    }
                    (None, None) => v.push("bragg_waveguide needs recoil_velocity or transit_time".into()),
                    (Some(u), None) if !(*u > 0.0 && u.is_finite()) => {
                        v.push("recoil_velocity must be positive".into())
                    }
                    _ => {}
                }
                if !(velocity_asymmetry.abs() < 1.0) {
                    v.push("velocity_asymmetry must satisfy |x| < 1".into());
                }
                if packet_omega_phi.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
                    v.push("packet_omega_phi must be positive".into());
                }
            }
            Scheme::Accelerator { jump_angle } => {
                if self.transit_time.is_some() {
                    v.push("transit_time is derived for the accelerator scheme".into());
                }
                if !(*jump_angle > 0.0 && *jump_angle <= PI / 2.0) {
                    v.push("jump_angle must lie in (0, pi/2]".into());
                }
            }
            Scheme::MovingBucket { motion, phi_a, .. } => match motion {
                BucketMotion::ConstantVelocity => {
                    if self.transit_time.is_none() {
                        v.push("constant_velocity bucket needs transit_time".into());
                    }
                    if phi_a.is_some() {
                        v.push("phi_a applies only to the smooth bucket".into());
                    }
                }
                BucketMotion::Smooth => {
                    if self.transit_time.is_some() {
                        v.push("transit_time is derived for the smooth bucket".into());
                    }
                    match phi_a {
                        None => v.push("smooth bucket needs phi_a".into()),
                        Some(a) if !(*a > 0.0 && *a < PI) => v.push("phi_a must lie in (0, pi)".into()),
                        _ => {}
                    }
                }
            },
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub plus: f64,
    pub minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferometerResult {
    pub scheme: String,
    /// s
    pub transit_time: f64,
    /// rad/s
    pub omega_rot: f64,
    /// rad, from the action difference of the two arms
    pub sagnac_phase: f64,
    /// rad, full-turn Sagnac phase
    pub sagnac_ideal: f64,
    pub sagnac_ratio: f64,
    /// rad, closed form from the final arm separation
    pub sagnac_incomplete: f64,
    /// rad, closed form from the arm velocities; free-flight schemes only
    pub sagnac_modified: Option<f64>,
    /// rad
    pub delta_phi_final: f64,
    /// rad/s
    pub delta_phi_dot_final: f64,
    /// rad/s, velocity mismatch left after the recombination pulse
    pub residual_phi_dot: f64,
    /// rad, separation expected for a closed loop
    pub closure: f64,
    pub visibility: f64,
    pub populations: Populations,
    /// Upper bound on the relative area error from radial sag.
    pub area_correction: f64,
}

/// Trajectories and readout of one sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceRun {
    pub geometry: TrapGeometry,
    pub plus: Trajectory,
    pub minus: Trajectory,
    pub result: InterferometerResult,
}

/// m R^2 / hbar, s
fn inertia_over_hbar(radius: f64, atom: &AtomState) -> f64 {
    atom.mass * radius * radius / HBAR
}

/// Sagnac phase of a full turn, 4 pi Omega A / (h / m) with A = 2 pi R^2.
pub fn sagnac_ideal(radius: f64, omega_rot: f64, atom: &AtomState) -> f64 {
    4.0 * PI * omega_rot * (2.0 * PI * radius * radius) * atom.mass / H_PLANCK
}

/// Sagnac phase when the arms end `delta_phi_t` apart.
pub fn sagnac_incomplete(delta_phi_t: f64, radius: f64, omega_rot: f64, atom: &AtomState) -> f64 {
    delta_phi_t / FULL_CLOSURE * sagnac_ideal(radius, omega_rot, atom)
}

/// Sagnac phase of two arms moving at constant angular velocities for `transit_time`.
pub fn sagnac_modified(
    phi_dot_plus: f64,
    phi_dot_minus: f64,
    transit_time: f64,
    radius: f64,
    omega_rot: f64,
    atom: &AtomState,
) -> f64 {
    let pre = 2.0 * PI * radius * radius * transit_time * atom.mass / H_PLANCK;
    pre * ((phi_dot_plus - phi_dot_minus) * omega_rot
        + 0.5 * (phi_dot_plus * phi_dot_plus - phi_dot_minus * phi_dot_minus))
}

/// Ratio of the moving-bucket Sagnac phase to the full-turn value.
pub fn bucket_phase_factor(omega_phi: f64, transit_time: f64) -> f64 {
    1.0 - sinc(omega_phi * transit_time)
}

/// Closed-form log visibility of the constant-velocity bucket.
pub fn bucket_log_visibility(omega_phi: f64, transit_time: f64, radius: f64, atom: &AtomState) -> f64 {
    let x = omega_phi * transit_time;
    -inertia_over_hbar(radius, atom) * omega_phi * (FULL_CLOSURE * (0.5 * x).sin() / x).powi(2)
}

/// Bound on the relative area change from centrifugal radial sag.
pub fn radial_area_correction(max_phi_dot: f64, omega_r: f64) -> Result<f64> {
    if !(omega_r > 0.0) {
        return Err(Error::invalid("omega_r must be positive"));
    }
    Ok(2.0 * (max_phi_dot / omega_r).powi(2))
}

/// Log of the fringe visibility for a given final mismatch of the arms.
pub fn log_visibility_with_closure(
    delta_phi_t: f64,
    delta_phi_dot_t: f64,
    closure: f64,
    omega_phi: f64,
    radius: f64,
    atom: &AtomState,
) -> Result<f64> {
    if !(omega_phi > 0.0 && omega_phi.is_finite()) {
        return Err(Error::invalid("visibility requires omega_phi > 0"));
    }
    let miss = delta_phi_t - closure;
    Ok(
        -inertia_over_hbar(radius, atom) * (omega_phi * omega_phi * miss * miss + delta_phi_dot_t * delta_phi_dot_t)
            / (4.0 * omega_phi),
    )
}

/// Fringe visibility for arms that should close after a full turn each.
pub fn visibility(delta_phi_t: f64, delta_phi_dot_t: f64, geom: &TrapGeometry, atom: &AtomState) -> Result<f64> {
    log_visibility_with_closure(
        delta_phi_t,
        delta_phi_dot_t,
        FULL_CLOSURE,
        geom.omega_phi,
        geom.radius,
        atom,
    )
    .map(f64::exp)
}

/// Output-port populations for tight radial confinement.
pub fn populations(
    sagnac_phase: f64,
    visibility: f64,
    mean_phi_dot: f64,
    delta_phi_t: f64,
    closure: f64,
    radius: f64,
    atom: &AtomState,
) -> Populations {
    let offset = inertia_over_hbar(radius, atom) * mean_phi_dot * (delta_phi_t - closure);
    let c = 0.5 * visibility * (sagnac_phase - offset).cos();
    Populations {
        plus: 0.5 + c,
        minus: 0.5 - c,
    }
}

/// Geometry used for a sequence: closed form when the rf tracks the
/// modulation, numerical survey otherwise.
pub fn sequence_geometry(cfg: &FieldConfig, atom: &AtomState) -> Result<TrapGeometry> {
    if cfg.rf_tracking {
        analytic_trap_geometry(cfg, atom)
    } else {
        numeric_trap_geometry(cfg, atom, &NumericOptions::default())
    }
}

pub fn run_sequence(spec: &SequenceSpec, cfg: &FieldConfig, atom: &AtomState) -> Result<SequenceRun> {
    spec.validate()?;
    let geom = sequence_geometry(cfg, atom)?;
    run_sequence_with_geometry(spec, &geom, atom)
}

struct Plan {
    drive: TrapDrive,
    transit_time: f64,
    init_plus: (f64, f64),
    init_minus: (f64, f64),
    /// angular frequency setting the packet width
    packet_omega_phi: f64,
    /// Velocity difference removed by the recombination pulse, rad/s.
    recombined_velocity_difference: f64,
    /// Arms move at constant angular velocity throughout.
    free_flight: bool,
}

fn plan(spec: &SequenceSpec, geom: &TrapGeometry) -> Result<Plan> {
    match &spec.scheme {
        Scheme::BraggWaveguide {
            recoil_velocity,
            velocity_asymmetry,
            packet_omega_phi,
        } => {
            let t = match recoil_velocity {
                Some(u) => PI * geom.radius / u,
                None => spec.transit_time.expect("validated"),
            };
            let rate = 2.0 * PI / t;
            let packet = packet_omega_phi.unwrap_or(geom.omega_phi);
            if !(packet > 0.0) {
                return Err(Error::invalid("bragg_waveguide on a flat ring needs packet_omega_phi"));
            }
            Ok(Plan {
                drive: TrapDrive::static_trap(0.0, 0.0),
                transit_time: t,
                init_plus: (0.0, rate * (1.0 + velocity_asymmetry)),
                init_minus: (0.0, -rate),
                packet_omega_phi: packet,
                recombined_velocity_difference: 2.0 * rate,
                free_flight: true,
            })
        }
        Scheme::Accelerator { jump_angle } => {
            let (drive, t) = accelerator_drive(geom, *jump_angle)?;
            Ok(Plan {
                drive,
                transit_time: t,
                init_plus: (0.0, 0.0),
                init_minus: (0.0, 0.0),
                packet_omega_phi: geom.omega_phi,
                recombined_velocity_difference: 0.0,
                free_flight: false,
            })
        }
        Scheme::MovingBucket { motion, phi_a, profile } => {
            let (mut drive, t) = match motion {
                BucketMotion::ConstantVelocity => {
                    let t = spec.transit_time.expect("validated");
                    (constant_velocity_bucket(geom, t, *profile)?, t)
                }
                BucketMotion::Smooth => {
                    let s = smooth_bucket_schedule(phi_a.expect("validated"), geom)?;
                    (s.drive, s.transit_time)
                }
            };
            drive.profile = *profile;
            Ok(Plan {
                drive,
                transit_time: t,
                init_plus: (0.0, 0.0),
                init_minus: (0.0, 0.0),
                packet_omega_phi: geom.omega_phi,
                recombined_velocity_difference: 0.0,
                free_flight: false,
            })
        }
    }
}

/// Run a sequence in a given trap. The `+` arm is the one launched towards
/// increasing angle.
pub fn run_sequence_with_geometry(spec: &SequenceSpec, geom: &TrapGeometry, atom: &AtomState) -> Result<SequenceRun> {
    spec.validate()?;
    let plan = plan(spec, geom)?;
    let drive = plan.drive.clone().with_rotation(spec.omega_rot);
    let opts = IntegrationOptions {
        samples: spec.samples,
        ..Default::default()
    };
    let span = (0.0, plan.transit_time);
    let plus = integrate_pendulum(
        &drive,
        &atom.with_branch(Branch::Plus),
        geom,
        plan.init_plus,
        span,
        &opts,
    )?;
    let minus = integrate_pendulum(
        &drive,
        &atom.with_branch(Branch::Minus),
        geom,
        plan.init_minus,
        span,
        &opts,
    )?;
    let result = readout(spec, &plan, geom, atom, &plus, &minus)?;
    Ok(SequenceRun {
        geometry: *geom,
        plus,
        minus,
        result,
    })
}

fn readout(
    spec: &SequenceSpec,
    plan: &Plan,
    geom: &TrapGeometry,
    atom: &AtomState,
    plus: &Trajectory,
    minus: &Trajectory,
) -> Result<InterferometerResult> {
    let omega = spec.omega_rot;
    let (a, b) = (plus.action, minus.action);
    // difference taken order by order so the large rotation-free parts cancel first
    let sagnac = (a.order0 - b.order0) + omega * ((a.order1 - b.order1) + omega * (a.order2 - b.order2));
    let ideal = sagnac_ideal(geom.radius, omega, atom);
    let dphi = plus.final_phi() - minus.final_phi();
    let ddot = plus.final_phi_dot() - minus.final_phi_dot();
    let closure = FULL_CLOSURE;
    let residual = ddot - plan.recombined_velocity_difference;
    let vis = log_visibility_with_closure(dphi, residual, closure, plan.packet_omega_phi, geom.radius, atom)?.exp();
    let mean_dot = 0.5 * (plus.final_phi_dot() + minus.final_phi_dot());
    let max_dot = plus
        .phi_dot
        .iter()
        .chain(&minus.phi_dot)
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let area_correction = if geom.omega_r > 0.0 {
        radial_area_correction(max_dot, geom.omega_r)?
    } else {
        f64::NAN
    };
    Ok(InterferometerResult {
        scheme: spec.scheme.name().to_string(),
        transit_time: plan.transit_time,
        omega_rot: omega,
        sagnac_phase: sagnac,
        sagnac_ideal: ideal,
        sagnac_ratio: if ideal != 0.0 { sagnac / ideal } else { f64::NAN },
        sagnac_incomplete: sagnac_incomplete(dphi, geom.radius, omega, atom),
        sagnac_modified: plan.free_flight.then(|| {
            sagnac_modified(
                plus.phi_dot[0],
                minus.phi_dot[0],
                plan.transit_time,
                geom.radius,
                omega,
                atom,
            )
        }),
        delta_phi_final: dphi,
        delta_phi_dot_final: ddot,
        residual_phi_dot: residual,
        closure,
        visibility: vis,
        populations: populations(sagnac, vis, mean_dot, dphi, closure, geom.radius, atom),
        area_correction,
    })
}

/// Both sides of the unclosed-area relation for one rotation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaTheoremCheck {
    /// rad, action-phase difference at the rotation rate minus that at rest
    pub lhs: f64,
    /// rad, enclosed-area term plus boundary term
    pub rhs: f64,
    pub residual: f64,
    /// rad, the enclosed-area term alone
    pub area_term: f64,
    /// rad
    pub boundary_term: f64,
}

fn ensure_same_grid(a: &Trajectory2D, b: &Trajectory2D, what: &str) -> Result<()> {
    if a.times != b.times {
        return Err(Error::MismatchedGrid(format!("{what}: sample times differ")));
    }
    Ok(())
}

fn action_difference(plus: &Trajectory2D, minus: &Trajectory2D, omega: f64) -> f64 {
    let (a, b) = (plus.action, minus.action);
    (a.order0 - b.order0) + omega * ((a.order1 - b.order1) + omega * (a.order2 - b.order2))
}

/// Compare the action phase induced by rotation with the area and boundary
/// terms evaluated on the non-rotating trajectories.
///
/// `rotating` and `resting` are `(plus, minus)` pairs with identical grids,
/// integrated about the same rotation axis.
pub fn area_theorem_check(
    rotating: (&Trajectory2D, &Trajectory2D),
    resting: (&Trajectory2D, &Trajectory2D),
    atom: &AtomState,
) -> Result<AreaTheoremCheck> {
    let (rp, rm) = rotating;
    let (sp, sm) = resting;
    ensure_same_grid(rp, sp, "plus arm")?;
    ensure_same_grid(rm, sm, "minus arm")?;
    ensure_same_grid(rp, rm, "arms")?;
    if sp.omega_rot != 0.0 || sm.omega_rot != 0.0 {
        return Err(Error::MismatchedGrid("reference trajectories must be at rest".into()));
    }
    if rp.omega_rot != rm.omega_rot {
        return Err(Error::MismatchedGrid(
            "arms integrated at different rotation rates".into(),
        ));
    }
    if [rm, sp, sm].iter().any(|t| t.rotation_axis != rp.rotation_axis) {
        return Err(Error::MismatchedGrid("trajectories use different rotation axes".into()));
    }
    let omega = rp.omega_rot;
    let lhs = action_difference(rp, rm, omega) - action_difference(sp, sm, 0.0);
    let area_term = omega * (sp.action.order1 - sm.action.order1);
    let boundary = |rot: &Trajectory2D, rest: &Trajectory2D| {
        let (a, b) = (rot.final_state(), rest.final_state());
        b.vel[0] * (a.pos[0] - b.pos[0]) + b.vel[1] * (a.pos[1] - b.pos[1])
    };
    let boundary_term = atom.mass / HBAR * (boundary(rp, sp) - boundary(rm, sm));
    let rhs = area_term + boundary_term;
    Ok(AreaTheoremCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        area_term,
        boundary_term,
    })
}

/// Integrate both arms of `drive` in the planar harmonic model at rest and
/// at `omega_rot`, then evaluate [`area_theorem_check`].
pub fn area_theorem_for_drive(
    drive: &TrapDrive,
    geom: &TrapGeometry,
    atom: &AtomState,
    omega_rot: f64,
    t_span: (f64, f64),
    opts: &CartesianOptions,
) -> Result<AreaTheoremCheck> {
    let arm = |branch: Branch, omega: f64| -> Result<Trajectory2D> {
        let d = drive.clone().with_rotation(omega);
        let c = d.center(branch, t_span.0, t_span.0)?;
        let init = PlanarState {
            pos: [
                opts.ring_center[0] + geom.radius * c.cos(),
                opts.ring_center[1] + geom.radius * c.sin(),
            ],
            vel: [0.0; 2],
        };
        integrate_harmonic_cartesian(&d, geom, &atom.with_branch(branch), init, t_span, opts)
    };
    let rp = arm(Branch::Plus, omega_rot)?;
    let rm = arm(Branch::Minus, omega_rot)?;
    let sp = arm(Branch::Plus, 0.0)?;
    let sm = arm(Branch::Minus, 0.0)?;
    area_theorem_check((&rp, &rm), (&sp, &sm), atom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::MASS_RB87;
    use crate::dynamics::Schedule;
    use crate::geometry::GeometryOrigin;

    fn rb() -> AtomState {
        AtomState::rb87(Branch::Plus)
    }

    fn geometry(radius: f64, omega_phi: f64) -> TrapGeometry {
        TrapGeometry {
            radius,
            omega_r: 2.0 * PI * 400.0,
            omega_z: 2.0 * PI * 400.0,
            omega_phi,
            v0: MASS_RB87 * (omega_phi * radius).powi(2),
            phi0: PI / 2.0,
            phi0_defined: true,
            beta: 1.0,
            omega0: 2.0 * PI * 400.0,
            origin: GeometryOrigin::Analytic,
        }
    }

    #[test]
    fn ideal_sagnac_scale_factor() {
        let k = sagnac_ideal(1.5e-3, 1.0, &rb());
        // 8 pi^2 R^2 m / h by hand
        let oracle = 8.0 * PI * PI * 2.25e-6 * MASS_RB87 / H_PLANCK;
        assert!((k / oracle - 1.0).abs() < 1e-14);
        assert!((k / 3.87e4 - 1.0).abs() < 2e-3);
        assert_eq!(sagnac_ideal(1.5e-3, 0.0, &rb()), 0.0);
    }

    #[test]
    fn incomplete_and_modified_forms() {
        let (r, w) = (1e-3, 1e-4);
        let full = sagnac_ideal(r, w, &rb());
        assert_eq!(sagnac_incomplete(FULL_CLOSURE, r, w, &rb()), full);
        assert!((sagnac_incomplete(2.0 * PI, r, w, &rb()) - 0.5 * full).abs() < 1e-15 * full);
        let t = 0.3;
        let v = 2.0 * PI / t;
        assert!((sagnac_modified(v, -v, t, r, w, &rb()) / full - 1.0).abs() < 1e-14);
        assert_eq!(sagnac_modified(v, v, t, r, w, &rb()), 0.0);
        assert!(sagnac_modified(1.01 * v, -v, t, r, 0.0, &rb()) > 0.0);
    }

    #[test]
    fn bucket_factor_values() {
        assert!((bucket_phase_factor(1.0, 2.0 * PI * 3.0) - 1.0).abs() < 1e-15);
        assert!(bucket_phase_factor(1.0, 1e-9).abs() < 1e-15);
        assert!((bucket_phase_factor(1.0, 1.5 * PI) - (1.0 + 2.0 / (3.0 * PI))).abs() < 1e-15);
    }

    #[test]
    fn radial_bound_example() {
        let b = radial_area_correction(2.0 * PI, 2.0 * PI * 400.0).unwrap();
        assert!((b - 1.25e-5).abs() < 1e-18);
        assert_eq!(radial_area_correction(0.0, 1.0).unwrap(), 0.0);
        assert!((radial_area_correction(4.0 * PI, 2.0 * PI * 400.0).unwrap() / b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn visibility_examples() {
        let g = geometry(1e-4, 2.0 * PI * 10.0);
        assert_eq!(visibility(FULL_CLOSURE, 0.0, &g, &rb()).unwrap(), 1.0);
        let k = MASS_RB87 * g.radius * g.radius / HBAR;
        let dd = (4.0 * g.omega_phi / k).sqrt();
        assert!((visibility(FULL_CLOSURE, dd, &g, &rb()).unwrap() - (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn populations_sum_to_one() {
        let p = populations(0.7, 0.4, 3.0, 4.0 * PI + 1e-3, FULL_CLOSURE, 1e-4, &rb());
        assert!((p.plus + p.minus - 1.0).abs() < 1e-15);
        let q = populations(0.0, 1.0, 0.0, FULL_CLOSURE, FULL_CLOSURE, 1e-4, &rb());
        assert_eq!((q.plus, q.minus), (1.0, 0.0));
    }

    #[test]
    fn spec_validation_lists_problems() {
        let spec = SequenceSpec::new(Scheme::Accelerator { jump_angle: 2.0 }, 0.0, Some(1.0));
        match spec.validate() {
            Err(Error::InvalidConfig(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
        let bucket = Scheme::MovingBucket {
            motion: BucketMotion::ConstantVelocity,
            phi_a: None,
            profile: AzimuthalProfile::Harmonic,
        };
        assert!(SequenceSpec::new(bucket, 0.0, None).validate().is_err());
    }

    #[test]
    fn bragg_recovers_ideal_phase() {
        let g = geometry(1e-3, 2.0 * PI * 5.0);
        let scheme = Scheme::BraggWaveguide {
            recoil_velocity: Some(5.9e-3),
            velocity_asymmetry: 0.0,
            packet_omega_phi: None,
        };
        let run = run_sequence_with_geometry(&SequenceSpec::new(scheme, 1e-4, None), &g, &rb()).unwrap();
        assert!((run.result.sagnac_ratio - 1.0).abs() < 1e-9);
        assert!((run.result.delta_phi_final - FULL_CLOSURE).abs() < 1e-9);
        assert!(run.result.residual_phi_dot.abs() < 1e-12);
        assert!((run.result.visibility - 1.0).abs() < 1e-12);
        assert!((run.result.sagnac_modified.unwrap() / run.result.sagnac_phase - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bucket_resonance_closes() {
        let g = geometry(1e-4, 2.0 * PI * 10.0);
        let t = 5.0 * 2.0 * PI / g.omega_phi;
        let scheme = Scheme::MovingBucket {
            motion: BucketMotion::ConstantVelocity,
            phi_a: None,
            profile: AzimuthalProfile::Harmonic,
        };
        let run = run_sequence_with_geometry(&SequenceSpec::new(scheme, 1e-3, Some(t)), &g, &rb()).unwrap();
        assert!((run.result.sagnac_ratio - 1.0).abs() < 1e-6);
        assert!((run.result.visibility - 1.0).abs() < 1e-6);
    }

    #[test]
    fn accelerator_at_rest_gives_no_fringe() {
        let g = geometry(1e-3, 2.0 * PI * 5.0);
        let run = run_sequence_with_geometry(
            &SequenceSpec::new(Scheme::Accelerator { jump_angle: PI / 2.0 }, 0.0, None),
            &g,
            &rb(),
        )
        .unwrap();
        assert!(run.result.sagnac_phase.abs() < 1e-9);
        assert!((run.result.delta_phi_final - FULL_CLOSURE).abs() < 1e-6);
        assert!(run.result.populations.plus > 1.0 - 1e-6);
    }

    #[test]
    fn area_check_rejects_mismatched_grids() {
        let g = geometry(1e-4, 2.0 * PI * 5.0);
        let drive = TrapDrive::static_trap(0.0, g.v0);
        let a = |n: usize| {
            let opts = CartesianOptions {
                integration: IntegrationOptions {
                    samples: n,
                    ..Default::default()
                },
                ..Default::default()
            };
            integrate_harmonic_cartesian(
                &drive,
                &g,
                &rb(),
                PlanarState {
                    pos: [g.radius, 0.0],
                    vel: [0.0; 2],
                },
                (0.0, 0.01),
                &opts,
            )
            .unwrap()
        };
        let (x, y) = (a(5), a(6));
        assert!(matches!(
            area_theorem_check((&x, &x), (&y, &y), &rb()),
            Err(Error::MismatchedGrid(_))
        ));
        let zero = area_theorem_check((&x, &x), (&x, &x), &rb()).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
    }

    #[test]
    fn area_check_short_half_loop() {
        // quick variant of the acceptance run: half loop, moderate stiffness
        let mut g = geometry(5e-5, 2.0 * PI * 20.0);
        g.omega_r = 40.0 * g.omega_phi;
        let t = 60.0 / g.omega_phi;
        let drive = TrapDrive {
            phi0: Schedule::SmoothRamp {
                t0: 0.0,
                t1: t,
                from: 0.0,
                to: PI,
            },
            ..TrapDrive::static_trap(0.0, g.v0)
        };
        let omega = 1e-3 * g.omega_phi;
        let opts = CartesianOptions {
            integration: IntegrationOptions {
                samples: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let c = area_theorem_for_drive(&drive, &g, &rb(), omega, (0.0, t), &opts).unwrap();
        let half = 0.5 * sagnac_ideal(g.radius, omega, &rb());
        assert!((c.rhs / half - 1.0).abs() < 1e-2, "{c:?} {half}");
        assert!(c.residual / half < 1e-3, "{c:?}");
    }
}
