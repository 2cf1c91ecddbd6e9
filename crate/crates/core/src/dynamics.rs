//! Centre-of-mass motion of one interferometer arm and its action phase.
//!
//! Two models are provided. The azimuthal pendulum follows the angle on the
//! ring in a bucket of depth V0(t) centred on a scheduled angle. The planar
//! Cartesian model keeps finite radial confinement and includes Coriolis and
//! centrifugal forces, which the area-theorem check needs.
//!
//! Coordinates are those of the rotating apparatus; `omega_rot` is its
//! angular velocity relative to an inertial frame. The action is kept split
//! by powers of the rotation rate, `Phi = Phi0 + Omega Phi1 + Omega^2 Phi2`,
//! so that phase differences linear in the rotation do not cancel against the
//! much larger rotation-independent part.

use crate::constants::HBAR;
use crate::fields::{AtomState, Branch};
use crate::geometry::TrapGeometry;
use crate::numerics::ode::{Dopri5, OdeOptions};
use crate::numerics::quadrature::{integrate, QuadOptions};
use crate::numerics::wrap_angle;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Piecewise-analytic function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant {
        value: f64,
    },
    Linear {
        t0: f64,
        value0: f64,
        rate: f64,
    },
    /// Half-cosine ramp from `from` to `to` over `[t0, t1]`, flat outside.
    SmoothRamp {
        t0: f64,
        t1: f64,
        from: f64,
        to: f64,
    },
    /// Each segment applies from its start time to the next start.
    Piecewise {
        segments: Vec<Segment>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: f64,
    pub schedule: Schedule,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.value_in(t, t)
    }

    /// Value at `t` using the piece active at time `hint`.
    ///
    /// Integrating across a breakpoint evaluates stages exactly at the
    /// segment boundary; the hint keeps them on the segment being integrated.
    pub fn value_in(&self, t: f64, hint: f64) -> Result<f64> {
        match self {
            Schedule::Constant { value } => Ok(*value),
            Schedule::Linear { t0, value0, rate } => Ok(value0 + rate * (t - t0)),
            Schedule::SmoothRamp { t0, t1, from, to } => {
                if hint < *t0 {
                    Ok(*from)
                } else if hint >= *t1 {
                    Ok(*to)
                } else {
                    let u = (t - t0) / (t1 - t0);
                    Ok(from + (to - from) * 0.5 * (1.0 - (PI * u).cos()))
                }
            }
            Schedule::Piecewise { segments } => {
                let seg = segments
                    .iter()
                    .rev()
                    .find(|s| s.start <= hint)
                    .ok_or(Error::ScheduleUndefined { t: hint })?;
                seg.schedule.value_in(t, hint)
            }
        }
    }

    /// Times where the schedule or one of its derivatives may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Schedule::Constant { .. } | Schedule::Linear { .. } => Vec::new(),
            Schedule::SmoothRamp { t0, t1, .. } => vec![*t0, *t1],
            Schedule::Piecewise { segments } => segments
                .iter()
                .flat_map(|s| std::iter::once(s.start).chain(s.schedule.breakpoints()))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::SmoothRamp { t0, t1, .. } if !(t1 > t0) => Err(Error::invalid("smooth_ramp requires t1 > t0")),
            Schedule::Piecewise { segments } => {
                if segments.is_empty() {
                    return Err(Error::invalid("piecewise schedule needs at least one segment"));
                }
                if segments.windows(2).any(|w| !(w[1].start > w[0].start)) {
                    return Err(Error::invalid("piecewise segments must have increasing start times"));
                }
                segments.iter().try_for_each(|s| s.schedule.validate())
            }
            _ => Ok(()),
        }
    }
}

/// Shape of the azimuthal bucket around its centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AzimuthalProfile {
    /// -V0 cos(phi - c), the full ring potential
    #[default]
    Cosine,
    /// V0 (wrap(phi - c)^2 / 2 - 1), its harmonic approximation
    Harmonic,
}

impl AzimuthalProfile {
    /// Potential in units of V0 at offset `d` from the centre.
    fn shape(self, d: f64) -> f64 {
        match self {
            AzimuthalProfile::Cosine => -d.cos(),
            AzimuthalProfile::Harmonic => {
                let w = wrap_angle(d);
                0.5 * w * w - 1.0
            }
        }
    }

    /// Derivative of [`Self::shape`].
    fn slope(self, d: f64) -> f64 {
        match self {
            AzimuthalProfile::Cosine => d.sin(),
            AzimuthalProfile::Harmonic => wrap_angle(d),
        }
    }
}

/// Time-dependent bucket seen by the two arms.
///
/// The `+` arm is centred on `phi0(t)` and the `-` arm on `-phi0(t)`. A swap
/// time exchanges the two potentials, as an ideal pi pulse does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapDrive {
    pub phi0: Schedule,
    /// J
    pub v0: Schedule,
    /// rad/s
    pub omega_rot: f64,
    #[serde(default)]
    pub swap_time: Option<f64>,
    #[serde(default)]
    pub profile: AzimuthalProfile,
}

impl TrapDrive {
    pub fn static_trap(phi0: f64, v0: f64) -> Self {
        TrapDrive {
            phi0: Schedule::constant(phi0),
            v0: Schedule::constant(v0),
            omega_rot: 0.0,
            swap_time: None,
            profile: AzimuthalProfile::Cosine,
        }
    }

    pub fn with_rotation(mut self, omega_rot: f64) -> Self {
        self.omega_rot = omega_rot;
        self
    }

    /// Bucket centre for the arm that started in `branch`.
    pub fn center(&self, branch: Branch, t: f64, hint: f64) -> Result<f64> {
        let swapped = self.swap_time.is_some_and(|ts| hint >= ts);
        let sign = if swapped { -branch.sign() } else { branch.sign() };
        Ok(sign * self.phi0.value_in(t, hint)?)
    }

    pub fn depth(&self, t: f64, hint: f64) -> Result<f64> {
        let v = self.v0.value_in(t, hint)?;
        if v < 0.0 {
            return Err(Error::invalid(format!("trap depth is negative at t = {t:e} s")));
        }
        Ok(v)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.phi0.breakpoints();
        b.extend(self.v0.breakpoints());
        b.extend(self.swap_time);
        b
    }

    pub fn validate(&self) -> Result<()> {
        self.phi0.validate()?;
        self.v0.validate()?;
        if !self.omega_rot.is_finite() {
            return Err(Error::invalid("omega_rot must be finite"));
        }
        Ok(())
    }
}

/// Action phase split by powers of the rotation rate, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionParts {
    pub order0: f64,
    /// rad per (rad/s)
    pub order1: f64,
    /// rad per (rad/s)^2
    pub order2: f64,
}

impl ActionParts {
    pub fn total(&self, omega: f64) -> f64 {
        self.order0 + omega * (self.order1 + omega * self.order2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub ode: OdeOptions,
    /// Number of evenly spaced output samples including both endpoints.
    pub samples: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            ode: OdeOptions::default(),
            samples: 201,
        }
    }
}

/// Sampled motion of one arm on the ring.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// s, monotone in the direction of integration
    pub times: Vec<f64>,
    /// rad
    pub phi: Vec<f64>,
    /// rad/s
    pub phi_dot: Vec<f64>,
    /// rad, zero at the first sample
    pub action_phase: Vec<f64>,
    pub branch: Branch,
    pub omega_rot: f64,
    /// Action at the final time.
    pub action: ActionParts,
}

impl Trajectory {
    pub fn final_phi(&self) -> f64 {
        *self.phi.last().expect("non-empty trajectory")
    }

    pub fn final_phi_dot(&self) -> f64 {
        *self.phi_dot.last().expect("non-empty trajectory")
    }

    /// Linear interpolation of the angle at `t`.
    pub fn phi_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        let dir = if n > 1 && self.times[n - 1] < self.times[0] {
            -1.0
        } else {
            1.0
        };
        let k = self.times.partition_point(|&s| dir * (s - t) <= 0.0);
        if k == 0 {
            return (self.times[0] == t).then(|| self.phi[0]);
        }
        if k == n {
            return (self.times[n - 1] == t).then(|| self.phi[n - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let u = (t - t0) / (t1 - t0);
        Some(self.phi[k - 1] + u * (self.phi[k] - self.phi[k - 1]))
    }
}

fn sample_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            if k + 1 == n {
                t1
            } else {
                t0 + (t1 - t0) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Breakpoints strictly inside the span, in integration order, with the
/// span end appended.
fn segment_ends(breaks: Vec<f64>, t0: f64, t1: f64) -> Vec<f64> {
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut inner: Vec<f64> = breaks
        .into_iter()
        .filter(|&b| dir * (b - t0) > 0.0 && dir * (t1 - b) > 0.0)
        .collect();
    inner.sort_by(|a, b| (dir * a).total_cmp(&(dir * b)));
    inner.dedup();
    inner.push(t1);
    inner
}

fn check_span(t0: f64, t1: f64) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
        return Err(Error::invalid("time span must be finite and non-empty"));
    }
    Ok(())
}

/// Integrate the nonlinear pendulum
/// `m R^2 phi'' = -V0(t) dU/dphi` for the arm that starts in `branch`.
pub fn integrate_pendulum(
    drive: &TrapDrive,
    atom: &AtomState,
    geom: &TrapGeometry,
    init: (f64, f64),
    t_span: (f64, f64),
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    check_span(t0, t1)?;
    drive.validate()?;
    let inertia = atom.mass * geom.radius * geom.radius;
    let k = inertia / HBAR;
    let branch = atom.branch;
    let profile = drive.profile;
    let samples = sample_grid(t0, t1, opts.samples);

    let mut out = Trajectory {
        times: Vec::with_capacity(samples.len()),
        phi: Vec::with_capacity(samples.len()),
        phi_dot: Vec::with_capacity(samples.len()),
        action_phase: Vec::with_capacity(samples.len()),
        branch,
        omega_rot: drive.omega_rot,
        action: ActionParts::default(),
    };
    let omega = drive.omega_rot;
    let mut emit = |t: f64, y: &[f64; 5]| {
        out.times.push(t);
        out.phi.push(y[0]);
        out.phi_dot.push(y[1]);
        out.action_phase.push(y[2] + omega * (y[3] + omega * y[4]));
    };

    let mut y = [init.0, init.1, 0.0, 0.0, 0.0];
    let mut start = t0;
    let mut failure = None;
    for (idx, end) in segment_ends(drive.breakpoints(), t0, t1).into_iter().enumerate() {
        let hint = 0.5 * (start + end);
        let rhs = |t: f64, s: &[f64; 5]| -> [f64; 5] {
            let eval = || -> Result<(f64, f64)> { Ok((drive.center(branch, t, hint)?, drive.depth(t, hint)?)) };
            match eval() {
                Ok((c, v0)) => {
                    let d = s[0] - c;
                    [
                        s[1],
                        -v0 * profile.slope(d) / inertia,
                        0.5 * k * s[1] * s[1] - v0 * profile.shape(d) / HBAR,
                        k * s[1],
                        0.5 * k,
                    ]
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    [f64::NAN; 5]
                }
            }
        };
        let mut stepper = Dopri5::new(rhs, start, y, opts.ode);
        let outs: Vec<f64> = if idx == 0 {
            samples.clone()
        } else {
            samples
                .iter()
                .copied()
                .filter(|&s| (s - start) * (end - start) > 0.0)
                .collect()
        };
        let res = stepper.advance_to(end, &outs, &mut emit);
        y = *stepper.y();
        if let Some(e) = failure.take() {
            return Err(e);
        }
        res?;
        start = end;
    }
    out.action = ActionParts {
        order0: y[2],
        order1: y[3],
        order2: y[4],
    };
    Ok(out)
}

/// Energy of the pendulum in a static bucket, J.
pub fn pendulum_energy(
    phi: f64,
    phi_dot: f64,
    center: f64,
    v0: f64,
    mass: f64,
    radius: f64,
    profile: AzimuthalProfile,
) -> f64 {
    0.5 * mass * radius * radius * phi_dot * phi_dot + v0 * profile.shape(phi - center)
}

/// Planar state of one arm: position (m) and velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarState {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianOptions {
    pub integration: IntegrationOptions,
    /// Centre of the ring in the coordinates used, m.
    pub ring_center: [f64; 2],
    /// Point the apparatus rotates about, m.
    pub rotation_axis: [f64; 2],
}

impl Default for CartesianOptions {
    fn default() -> Self {
        CartesianOptions {
            integration: IntegrationOptions::default(),
            ring_center: [0.0; 2],
            rotation_axis: [0.0; 2],
        }
    }
}

/// Sampled planar motion of one arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory2D {
    pub times: Vec<f64>,
    pub pos: Vec<[f64; 2]>,
    pub vel: Vec<[f64; 2]>,
    pub action_phase: Vec<f64>,
    pub branch: Branch,
    pub omega_rot: f64,
    pub rotation_axis: [f64; 2],
    pub action: ActionParts,
}

impl Trajectory2D {
    pub fn final_state(&self) -> PlanarState {
        PlanarState {
            pos: *self.pos.last().expect("non-empty trajectory"),
            vel: *self.vel.last().expect("non-empty trajectory"),
        }
    }
}

/// Position of the bucket centre for an arm, m.
pub fn trap_center(
    drive: &TrapDrive,
    geom: &TrapGeometry,
    branch: Branch,
    ring_center: [f64; 2],
    t: f64,
) -> Result<[f64; 2]> {
    let c = drive.center(branch, t, t)?;
    Ok([
        ring_center[0] + geom.radius * c.cos(),
        ring_center[1] + geom.radius * c.sin(),
    ])
}

/// Integrate an arm in a moving planar harmonic trap with radial frequency
/// `geom.omega_r` and tangential frequency `geom.omega_phi`, in the rotating
/// apparatus frame.
pub fn integrate_harmonic_cartesian(
    drive: &TrapDrive,
    geom: &TrapGeometry,
    atom: &AtomState,
    init: PlanarState,
    t_span: (f64, f64),
    opts: &CartesianOptions,
) -> Result<Trajectory2D> {
    let (t0, t1) = t_span;
    check_span(t0, t1)?;
    drive.validate()?;
    let m = atom.mass;
    let branch = atom.branch;
    let omega = drive.omega_rot;
    let (wr2, wt2) = (geom.omega_r.powi(2), geom.omega_phi.powi(2));
    let radius = geom.radius;
    let rc = opts.ring_center;
    let ax = opts.rotation_axis;
    let samples = sample_grid(t0, t1, opts.integration.samples);

    let mut out = Trajectory2D {
        times: Vec::with_capacity(samples.len()),
        pos: Vec::with_capacity(samples.len()),
        vel: Vec::with_capacity(samples.len()),
        action_phase: Vec::with_capacity(samples.len()),
        branch,
        omega_rot: omega,
        rotation_axis: ax,
        action: ActionParts::default(),
    };
    let mut emit = |t: f64, y: &[f64; 7]| {
        out.times.push(t);
        out.pos.push([y[0], y[1]]);
        out.vel.push([y[2], y[3]]);
        out.action_phase.push(y[4] + omega * (y[5] + omega * y[6]));
    };

    let mut y = [init.pos[0], init.pos[1], init.vel[0], init.vel[1], 0.0, 0.0, 0.0];
    let mut start = t0;
    let mut failure = None;
    for (idx, end) in segment_ends(drive.breakpoints(), t0, t1).into_iter().enumerate() {
        let hint = 0.5 * (start + end);
        let rhs = |t: f64, s: &[f64; 7]| -> [f64; 7] {
            let c = match drive.center(branch, t, hint) {
                Ok(c) => c,
                Err(e) => {
                    failure.get_or_insert(e);
                    return [f64::NAN; 7];
                }
            };
            let (sc, cc) = c.sin_cos();
            let dx = s[0] - (rc[0] + radius * cc);
            let dy = s[1] - (rc[1] + radius * sc);
            let along_r = dx * cc + dy * sc;
            let along_t = -dx * sc + dy * cc;
            // force per mass from the rotated frequency tensor
            let fx = -(wr2 * along_r * cc - wt2 * along_t * sc);
            let fy = -(wr2 * along_r * sc + wt2 * along_t * cc);
            let (wx, wy) = (s[0] - ax[0], s[1] - ax[1]);
            let pot = 0.5 * m * (wr2 * along_r * along_r + wt2 * along_t * along_t);
            [
                s[2],
                s[3],
                fx + 2.0 * omega * s[3] + omega * omega * wx,
                fy - 2.0 * omega * s[2] + omega * omega * wy,
                (0.5 * m * (s[2] * s[2] + s[3] * s[3]) - pot) / HBAR,
                m * (wx * s[3] - wy * s[2]) / HBAR,
                0.5 * m * (wx * wx + wy * wy) / HBAR,
            ]
        };
        let mut stepper = Dopri5::new(rhs, start, y, opts.integration.ode);
        let outs: Vec<f64> = if idx == 0 {
            samples.clone()
        } else {
            samples
                .iter()
                .copied()
                .filter(|&s| (s - start) * (end - start) > 0.0)
                .collect()
        };
        let res = stepper.advance_to(end, &outs, &mut emit);
        y = *stepper.y();
        if let Some(e) = failure.take() {
            return Err(e);
        }
        res?;
        start = end;
    }
    out.action = ActionParts {
        order0: y[4],
        order1: y[5],
        order2: y[6],
    };
    Ok(out)
}

fn require_bucket(geom: &TrapGeometry) -> Result<()> {
    if !(geom.omega_phi > 0.0 && geom.omega_phi.is_finite()) {
        return Err(Error::invalid("scheme requires an azimuthal bucket (omega_phi > 0)"));
    }
    Ok(())
}

/// Time for an arm released at rest to swing from 0 to its turning point in
/// a bucket centred at `jump_angle`, s.
pub fn accelerator_half_time(geom: &TrapGeometry, jump_angle: f64) -> Result<f64> {
    require_bucket(geom)?;
    let a = jump_angle.abs();
    if !(a > 0.0 && a <= PI / 2.0) {
        return Err(Error::invalid("accelerator jump angle must lie in (0, pi/2]"));
    }
    // phi - a = a sin(u) removes both square-root endpoint singularities
    let cos_a = a.cos();
    let opts = QuadOptions {
        rtol: 1e-12,
        initial_intervals: 2,
        ..Default::default()
    };
    let integral = integrate(
        |u| {
            let gap = (a * u.sin()).cos() - cos_a;
            if gap <= 0.0 {
                // endpoint: limit of a cos u / sqrt(gap)
                return Ok((2.0 * a / a.sin()).sqrt());
            }
            Ok(a * u.cos() / gap.sqrt())
        },
        -PI / 2.0,
        PI / 2.0,
        &opts,
    )?;
    Ok(integral / (2f64.sqrt() * geom.omega_phi))
}

/// Full out-and-back transit time of the accelerator scheme with the bucket
/// jumped by pi/2: about 7.416 / omega_phi.
pub fn transit_time_accelerator(geom: &TrapGeometry) -> Result<f64> {
    Ok(2.0 * accelerator_half_time(geom, PI / 2.0)?)
}

/// Accelerator drive: bucket jumped to `jump_angle` at t = 0 and swapped at
/// the turning point. Returns the drive and its full transit time.
pub fn accelerator_drive(geom: &TrapGeometry, jump_angle: f64) -> Result<(TrapDrive, f64)> {
    let half = accelerator_half_time(geom, jump_angle)?;
    let drive = TrapDrive {
        phi0: Schedule::constant(jump_angle),
        v0: Schedule::constant(geom.v0),
        omega_rot: 0.0,
        swap_time: Some(half),
        profile: AzimuthalProfile::Cosine,
    };
    Ok((drive, 2.0 * half))
}

/// First time after `t0` at which the angular velocity of a pendulum arm
/// changes sign, found from the dense output. Only the piece of the drive
/// active just after `t0` is used.
pub fn pendulum_turning_time(
    drive: &TrapDrive,
    atom: &AtomState,
    geom: &TrapGeometry,
    init: (f64, f64),
    t0: f64,
    t_max: f64,
    ode: &OdeOptions,
) -> Result<Option<f64>> {
    check_span(t0, t_max)?;
    drive.validate()?;
    let inertia = atom.mass * geom.radius * geom.radius;
    let hint = t0 + 1e-12 * (t_max - t0);
    let (c, v0) = (drive.center(atom.branch, t0, hint)?, drive.depth(t0, hint)?);
    let profile = drive.profile;
    let rhs = move |_t: f64, s: &[f64; 2]| [s[1], -v0 * profile.slope(s[0] - c) / inertia];
    let mut stepper = Dopri5::new(rhs, t0, [init.0, init.1], *ode);
    // skip a start exactly at rest
    let sign = if init.1 != 0.0 {
        init.1.signum()
    } else {
        -profile.slope(init.0 - c).signum()
    };
    let hit = stepper.advance_until(t_max, |_, y| sign * y[1] + if y[1] == 0.0 { 1.0 } else { 0.0 })?;
    Ok(hit.map(|(t, _)| t))
}

/// Buckets moving at constant angular velocity 2 pi / T, swapped at T/2.
pub fn constant_velocity_bucket(
    geom: &TrapGeometry,
    transit_time: f64,
    profile: AzimuthalProfile,
) -> Result<TrapDrive> {
    require_bucket(geom)?;
    if !(transit_time > 0.0 && transit_time.is_finite()) {
        return Err(Error::invalid("transit_time must be positive"));
    }
    let rate = 2.0 * PI / transit_time;
    let half = 0.5 * transit_time;
    Ok(TrapDrive {
        phi0: Schedule::Piecewise {
            segments: vec![
                Segment {
                    start: 0.0,
                    schedule: Schedule::Linear {
                        t0: 0.0,
                        value0: 0.0,
                        rate,
                    },
                },
                Segment {
                    start: half,
                    schedule: Schedule::Linear {
                        t0: half,
                        value0: PI,
                        rate: -rate,
                    },
                },
            ],
        },
        v0: Schedule::constant(geom.v0),
        omega_rot: 0.0,
        swap_time: Some(half),
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketSchedule {
    pub drive: TrapDrive,
    /// Full round-trip time, s.
    pub transit_time: f64,
}

/// Three-stage bucket drive: hold at `phi_a` for a quarter trap period, move
/// at angular velocity `omega_phi phi_a`, stop at `2 pi - phi_a` and hold for
/// another quarter period; mirrored in time after the swap.
pub fn smooth_bucket_schedule(phi_a: f64, geom: &TrapGeometry) -> Result<BucketSchedule> {
    require_bucket(geom)?;
    if !(phi_a > 0.0 && phi_a < PI) {
        return Err(Error::invalid("phi_a must lie in (0, pi)"));
    }
    let w = geom.omega_phi;
    let hold = PI / (2.0 * w);
    let speed = w * phi_a;
    let transit = 2.0 * PI / w * (0.5 - 1.0 / PI + 1.0 / phi_a);
    let half = 0.5 * transit;
    let segments = vec![
        Segment {
            start: 0.0,
            schedule: Schedule::constant(phi_a),
        },
        Segment {
            start: hold,
            schedule: Schedule::Linear {
                t0: hold,
                value0: phi_a,
                rate: speed,
            },
        },
        Segment {
            start: half,
            schedule: Schedule::Linear {
                t0: hold,
                value0: 2.0 * PI - phi_a,
                rate: -speed,
            },
        },
        Segment {
            start: transit - hold,
            schedule: Schedule::constant(phi_a),
        },
    ];
    Ok(BucketSchedule {
        drive: TrapDrive {
            phi0: Schedule::Piecewise { segments },
            v0: Schedule::constant(geom.v0),
            omega_rot: 0.0,
            swap_time: Some(half),
            profile: AzimuthalProfile::Harmonic,
        },
        transit_time: transit,
    })
}

/// Local azimuthal trap frequency at angle `phi`, rad/s.
pub fn effective_phi_frequency_at(
    geom: &TrapGeometry,
    drive: &TrapDrive,
    atom: &AtomState,
    phi: f64,
    t: f64,
) -> Result<f64> {
    let c = drive.center(atom.branch, t, t)?;
    let v0 = drive.depth(t, t)?;
    let curvature = match drive.profile {
        AzimuthalProfile::Cosine => (phi - c).cos(),
        AzimuthalProfile::Harmonic => 1.0,
    };
    if curvature <= 1e-12 {
        return Err(Error::InvertedTrap { cosine: curvature });
    }
    Ok((v0 * curvature / atom.mass).sqrt() / geom.radius)
}

/// Local azimuthal trap frequency along a sampled trajectory, rad/s.
pub fn effective_phi_frequency(
    geom: &TrapGeometry,
    drive: &TrapDrive,
    traj: &Trajectory,
    atom: &AtomState,
    t: f64,
) -> Result<f64> {
    let phi = traj
        .phi_at(t)
        .ok_or_else(|| Error::invalid(format!("t = {t:e} s lies outside the trajectory")))?;
    effective_phi_frequency_at(geom, drive, &atom.with_branch(traj.branch), phi, t)
}
