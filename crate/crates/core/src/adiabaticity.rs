//! Diagnostics: Landau-Zener safety of the dressed states, modulation
//! frequency margin, phase diffusion of a condensate in the bucket, and
//! shot-noise limited rotation sensitivity.

use crate::constants::HBAR;
use crate::fields::{larmor_frequency, rabi_coupling, total_field, AtomState, Branch, FieldConfig};
use crate::geometry::TrapGeometry;
use crate::interferometer::sagnac_ideal;
use crate::vec3::Vec3;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Reported in place of an infinite adiabaticity parameter.
pub const GAMMA_CAP: f64 = 1e12;

/// s-wave scattering length of 87Rb, about 100 Bohr radii, m.
pub const SCATTERING_LENGTH_RB87: f64 = 5.3e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMethod {
    #[default]
    Analytic,
    /// Central differences with step 1e-4 / omega_mod.
    FiniteDifference,
}

/// Static points visited across whole modulation periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LzPath {
    pub points: Vec<Vec3>,
    /// Time samples per modulation period.
    pub samples_per_period: usize,
    pub periods: usize,
}

impl LzPath {
    pub fn new(points: Vec<Vec3>, samples_per_period: usize) -> Self {
        LzPath {
            points,
            samples_per_period,
            periods: 1,
        }
    }

    /// Points one oscillator length away from the ring in radius and height,
    /// at eight azimuths.
    pub fn around_ring(geom: &TrapGeometry, atom: &AtomState, samples_per_period: usize) -> Self {
        let a_r = oscillator_length(geom.omega_r, atom.mass);
        let a_z = oscillator_length(geom.omega_z, atom.mass);
        let points = (0..8)
            .flat_map(|k| {
                let phi = 2.0 * PI * k as f64 / 8.0;
                [
                    (geom.radius + a_r, 0.0),
                    (geom.radius - a_r, 0.0),
                    (geom.radius, a_z),
                    (geom.radius, -a_z),
                ]
                .map(|(rho, z)| Vec3::cylindrical(rho, phi, z))
            })
            .collect();
        LzPath::new(points, samples_per_period)
    }

    fn times(&self, omega_mod: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.samples_per_period.max(1);
        let period = 2.0 * PI / omega_mod;
        (0..n * self.periods.max(1)).map(move |k| period * k as f64 / n as f64)
    }
}

/// sqrt(hbar / (m omega)), m.
pub fn oscillator_length(omega: f64, mass: f64) -> f64 {
    (HBAR / (mass * omega)).sqrt()
}

fn detuning(r: Vec3, t: f64, cfg: &FieldConfig, atom: &AtomState) -> f64 {
    larmor_frequency(total_field(r, t, cfg), atom) - cfg.rf_frequency(t, atom)
}

/// Time derivative of the detuning and a scale for judging when it vanishes.
fn detuning_rate(r: Vec3, t: f64, cfg: &FieldConfig, atom: &AtomState, method: DerivativeMethod) -> (f64, f64) {
    match method {
        DerivativeMethod::Analytic => {
            let b = total_field(r, t, cfg);
            let phase = cfg.omega_mod * t;
            let db = cfg.modulation_axis() * (cfg.b_mod * cfg.omega_mod * phase.cos());
            let larmor_rate = atom.zeeman_moment() * b.dot(db) / (b.norm() * HBAR);
            let rf_rate = if cfg.rf_tracking {
                let beta = cfg.beta(atom);
                let (s, c) = phase.sin_cos();
                cfg.omega_rf0 * beta * beta * s * c * cfg.omega_mod / (1.0 + beta * beta * s * s).sqrt()
            } else {
                0.0
            };
            (larmor_rate - rf_rate, larmor_rate.abs() + rf_rate.abs())
        }
        DerivativeMethod::FiniteDifference => {
            let h = 1e-4 / cfg.omega_mod;
            let (up, down) = (detuning(r, t + h, cfg, atom), detuning(r, t - h, cfg, atom));
            let scale = larmor_frequency(total_field(r, t, cfg), atom) + cfg.rf_frequency(t, atom);
            // differences below rounding of the two terms count as zero
            ((up - down) / (2.0 * h), 1e4 * scale * cfg.omega_mod)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSummary {
    /// Minimum of the adiabaticity parameter, capped at [`GAMMA_CAP`].
    pub gamma_min: f64,
    /// exp(-2 pi gamma_min)
    pub loss_probability_max: f64,
    /// Samples where the detuning is stationary and the parameter unbounded.
    pub skipped: usize,
    pub evaluated: usize,
}

/// Minimum Landau-Zener parameter Omega^2 / |d(detuning)/dt| over a path.
pub fn landau_zener_gamma(
    path: &LzPath,
    cfg: &FieldConfig,
    atom: &AtomState,
    method: DerivativeMethod,
) -> Result<GammaSummary> {
    cfg.validate()?;
    if path.points.is_empty() {
        return Err(Error::invalid("Landau-Zener path has no points"));
    }
    let mut gamma_min = GAMMA_CAP;
    let (mut skipped, mut evaluated) = (0, 0);
    for &r in &path.points {
        for t in path.times(cfg.omega_mod) {
            let (rate, scale) = detuning_rate(r, t, cfg, atom, method);
            if rate.abs() <= 1e-12 * scale {
                skipped += 1;
                continue;
            }
            let coupling = rabi_coupling(r, t, cfg, atom)?;
            gamma_min = gamma_min.min(coupling * coupling / rate.abs());
            evaluated += 1;
        }
    }
    Ok(GammaSummary {
        gamma_min,
        loss_probability_max: (-2.0 * PI * gamma_min).exp(),
        skipped,
        evaluated,
    })
}

/// Ratio omega_mod omega_phi a_ho / (Omega_0c^2 R); spin flips stay
/// suppressed while it is well below one.
pub fn modulation_bound(cfg: &FieldConfig, atom: &AtomState, geom: &TrapGeometry) -> Result<f64> {
    if !(geom.omega_phi > 0.0) {
        return Err(Error::invalid("modulation bound requires omega_phi > 0"));
    }
    let a_ho = oscillator_length(geom.omega_phi, atom.mass);
    Ok(cfg.omega_mod * geom.omega_phi * a_ho / (cfg.rabi0c * cfg.rabi0c * geom.radius))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseDiffusion {
    /// 1/s
    pub rate: f64,
    /// s; absent when the rate vanishes
    pub time: Option<f64>,
    /// Thomas-Fermi chemical potential at N, J.
    pub chemical_potential: f64,
    /// N a / a_ho; the Thomas-Fermi profile needs this well above one.
    pub thomas_fermi_parameter: f64,
}

/// Thomas-Fermi chemical potential in an anisotropic harmonic trap, J.
pub fn thomas_fermi_mu(n_atoms: f64, scattering_length: f64, geom: &TrapGeometry, atom: &AtomState) -> f64 {
    let w = (geom.omega_phi * geom.omega_r * geom.omega_z).cbrt();
    let a_ho = oscillator_length(w, atom.mass);
    0.5 * HBAR * w * (15.0 * n_atoms * scattering_length / a_ho).powf(0.4)
}

/// Phase diffusion from Poissonian number fluctuations,
/// rate = sqrt(N) dmu/dN at N/2 over hbar.
pub fn phase_diffusion(
    n_atoms: f64,
    scattering_length: f64,
    geom: &TrapGeometry,
    atom: &AtomState,
) -> Result<PhaseDiffusion> {
    if !(n_atoms >= 2.0) {
        return Err(Error::invalid("n_atoms must be at least 2"));
    }
    if !(scattering_length >= 0.0) {
        return Err(Error::invalid("scattering_length must be non-negative"));
    }
    if !(geom.omega_phi > 0.0 && geom.omega_r > 0.0 && geom.omega_z > 0.0) {
        return Err(Error::invalid("phase diffusion requires a fully confining trap"));
    }
    let half = 0.5 * n_atoms;
    let dmu_dn = 0.4 * thomas_fermi_mu(half, scattering_length, geom, atom) / half;
    let rate = n_atoms.sqrt() * dmu_dn / HBAR;
    let w = (geom.omega_phi * geom.omega_r * geom.omega_z).cbrt();
    Ok(PhaseDiffusion {
        rate,
        time: (rate > 0.0).then(|| 1.0 / rate),
        chemical_potential: thomas_fermi_mu(n_atoms, scattering_length, geom, atom),
        thomas_fermi_parameter: n_atoms * scattering_length / oscillator_length(w, atom.mass),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityReport {
    /// rad per rad/s
    pub scale_factor: f64,
    /// rad per cycle
    pub shot_noise_phase: f64,
    /// rad/s/sqrt(Hz)
    pub rotation_sensitivity: f64,
}

pub fn sensitivity_report(radius: f64, n_atoms: f64, cycle_time: f64, atom: &AtomState) -> Result<SensitivityReport> {
    if !(radius > 0.0 && n_atoms > 0.0 && cycle_time > 0.0) {
        return Err(Error::invalid("radius, n_atoms and cycle_time must be positive"));
    }
    let scale_factor = sagnac_ideal(radius, 1.0, atom);
    let shot_noise_phase = 1.0 / n_atoms.sqrt();
    Ok(SensitivityReport {
        scale_factor,
        shot_noise_phase,
        rotation_sensitivity: shot_noise_phase / scale_factor * cycle_time.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportParams {
    #[serde(default = "default_atoms")]
    pub n_atoms: f64,
    /// m
    #[serde(default = "default_scattering")]
    pub scattering_length: f64,
    /// s
    #[serde(default = "default_cycle")]
    pub cycle_time: f64,
    #[serde(default = "default_lz_samples")]
    pub lz_samples: usize,
}

fn default_atoms() -> f64 {
    3000.0
}
fn default_scattering() -> f64 {
    SCATTERING_LENGTH_RB87
}
fn default_cycle() -> f64 {
    30.0
}
fn default_lz_samples() -> usize {
    256
}

impl Default for ReportParams {
    fn default() -> Self {
        ReportParams {
            n_atoms: default_atoms(),
            scattering_length: default_scattering(),
            cycle_time: default_cycle(),
            lz_samples: default_lz_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabaticityReport {
    pub gamma_min: f64,
    pub loss_probability_max: f64,
    /// Present when the ring has an azimuthal bucket.
    pub modulation_margin: Option<f64>,
    /// m, present when the ring has an azimuthal bucket.
    pub a_ho: Option<f64>,
    pub phase_diffusion: Option<PhaseDiffusion>,
    pub sensitivity: SensitivityReport,
}

impl AdiabaticityReport {
    pub fn scale_factor(&self) -> f64 {
        self.sensitivity.scale_factor
    }
}

/// All diagnostics for one configuration, worst case over both branches.
pub fn adiabaticity_report(
    cfg: &FieldConfig,
    atom: &AtomState,
    geom: &TrapGeometry,
    params: &ReportParams,
) -> Result<AdiabaticityReport> {
    let path = LzPath::around_ring(geom, atom, params.lz_samples);
    let mut lz = landau_zener_gamma(&path, cfg, &atom.with_branch(Branch::Plus), DerivativeMethod::Analytic)?;
    let minus = landau_zener_gamma(&path, cfg, &atom.with_branch(Branch::Minus), DerivativeMethod::Analytic)?;
    if minus.gamma_min < lz.gamma_min {
        lz = minus;
    }
    let bucket = geom.omega_phi > 0.0;
    Ok(AdiabaticityReport {
        gamma_min: lz.gamma_min,
        loss_probability_max: lz.loss_probability_max,
        modulation_margin: bucket.then(|| modulation_bound(cfg, atom, geom)).transpose()?,
        a_ho: bucket.then(|| oscillator_length(geom.omega_phi, atom.mass)),
        phase_diffusion: bucket
            .then(|| phase_diffusion(params.n_atoms, params.scattering_length, geom, atom))
            .transpose()?,
        sensitivity: sensitivity_report(geom.radius, params.n_atoms, params.cycle_time, atom)?,
    })
}
