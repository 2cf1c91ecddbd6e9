//! Magnetic fields, rf dressing in the rotating-wave approximation, and the
//! resulting adiabatic potentials with their modulation-period average.

use crate::constants::{G_F_RB87, G_GRAV, HBAR, MASS_RB87, MU_B};
use crate::numerics::quadrature::{integrate_vec_with_floors, QuadOptions};
use crate::vec3::Vec3;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Field magnitude below which the dressed-state picture is rejected, T.
pub const DEGENERATE_FIELD_T: f64 = 1e-10;

/// Dressed hyperfine branch of one interferometer arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// |F=2, m=1> dressed state.
    Plus,
    /// |F=1, m=1> dressed state.
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    /// kg
    pub mass: f64,
    pub g_f_magnitude: f64,
    pub branch: Branch,
}

impl AtomState {
    pub fn rb87(branch: Branch) -> Self {
        AtomState {
            mass: MASS_RB87,
            g_f_magnitude: G_F_RB87,
            branch,
        }
    }

    pub fn with_branch(self, branch: Branch) -> Self {
        AtomState { branch, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            v.push("mass must be positive".to_string());
        }
        if !(self.g_f_magnitude > 0.0 && self.g_f_magnitude.is_finite()) {
            v.push("g_f_magnitude must be positive".to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Zeeman energy per tesla, |g_F| mu_B, J/T.
    pub fn zeeman_moment(&self) -> f64 {
        self.g_f_magnitude * MU_B
    }
}

/// Applied fields in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Quadrupole gradient, T/m.
    pub alpha: f64,
    /// Modulation amplitude, T.
    pub b_mod: f64,
    /// Modulation angular frequency, rad/s.
    pub omega_mod: f64,
    /// Modulation axis tilt from vertical toward +x, rad.
    pub delta: f64,
    /// rf carrier angular frequency, rad/s.
    pub omega_rf0: f64,
    /// Resonant Rabi angular frequency, rad/s.
    pub rabi0c: f64,
    /// rf polarization ellipticity (B+ - B-)/(B+ + B-).
    pub ellipticity: f64,
    /// Modulate rf frequency and amplitude so the resonance follows the
    /// modulation field.
    pub rf_tracking: bool,
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let mut positive = |name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive"));
            }
        };
        positive("alpha", self.alpha);
        positive("omega_mod", self.omega_mod);
        positive("omega_rf0", self.omega_rf0);
        positive("rabi0c", self.rabi0c);
        if !(self.b_mod >= 0.0 && self.b_mod.is_finite()) {
            v.push("b_mod must be non-negative".to_string());
        }
        if !(self.ellipticity.abs() <= 1.0) {
            v.push("ellipticity must satisfy |s| <= 1".to_string());
        }
        if !(self.delta.abs() < PI / 2.0) {
            v.push("delta must satisfy |delta| < pi/2".to_string());
        }
        if self.omega_mod.is_finite() && self.omega_rf0.is_finite() && self.omega_mod >= self.omega_rf0 {
            v.push("omega_mod must be smaller than omega_rf0".to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Modulation index g_F mu_B B_m / (hbar omega_rf0).
    pub fn beta(&self, atom: &AtomState) -> f64 {
        atom.zeeman_moment() * self.b_mod / (HBAR * self.omega_rf0)
    }

    fn tracking_factor(&self, phase: f64, atom: &AtomState) -> f64 {
        if self.rf_tracking {
            let b = self.beta(atom) * phase.sin();
            (1.0 + b * b).sqrt()
        } else {
            1.0
        }
    }

    /// Instantaneous rf angular frequency.
    pub fn rf_frequency(&self, t: f64, atom: &AtomState) -> f64 {
        self.omega_rf0 * self.tracking_factor(self.omega_mod * t, atom)
    }

    /// Instantaneous Rabi amplitude Omega_0(t).
    pub fn rabi_amplitude(&self, t: f64, atom: &AtomState) -> f64 {
        self.rabi0c * self.tracking_factor(self.omega_mod * t, atom)
    }

    /// Unit vector of the modulation axis.
    pub fn modulation_axis(&self) -> Vec3 {
        let (s, c) = self.delta.sin_cos();
        Vec3::new(s, 0.0, c)
    }

    pub fn modulation_field(&self, t: f64) -> Vec3 {
        self.modulation_axis() * (self.b_mod * (self.omega_mod * t).sin())
    }

    /// rf amplitude vectors multiplying cos(omega_rf t) and sin(omega_rf t).
    pub fn rf_amplitudes(&self, t: f64, atom: &AtomState) -> (Vec3, Vec3) {
        let total = 2.0 * HBAR * self.rabi_amplitude(t, atom) / atom.zeeman_moment();
        (Vec3::Z * total, Vec3::X * (self.ellipticity * total))
    }
}

pub fn quadrupole_field(r: Vec3, cfg: &FieldConfig) -> Vec3 {
    Vec3::new(cfg.alpha * r.x, cfg.alpha * r.y, -2.0 * cfg.alpha * r.z)
}

pub fn total_field(r: Vec3, t: f64, cfg: &FieldConfig) -> Vec3 {
    quadrupole_field(r, cfg) + cfg.modulation_field(t)
}

fn field_at_phase(r: Vec3, phase: f64, cfg: &FieldConfig) -> Vec3 {
    quadrupole_field(r, cfg) + cfg.modulation_axis() * (cfg.b_mod * phase.sin())
}

pub fn larmor_frequency(b: Vec3, atom: &AtomState) -> f64 {
    atom.zeeman_moment() * b.norm() / HBAR
}

fn check_field(b: Vec3) -> Result<f64> {
    let m = b.norm();
    if m < DEGENERATE_FIELD_T || !m.is_finite() {
        Err(Error::DegenerateField { magnitude: m })
    } else {
        Ok(m)
    }
}

/// Rotating-frame decomposition of an rf field perpendicular to a static
/// field: `b1p` is the major and `b2p` the minor semi-axis of the projected
/// polarization ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwaDecomposition {
    pub b1p: Vec3,
    pub b2p: Vec3,
    pub chi: f64,
    /// Co-rotating amplitude, T.
    pub b_plus: f64,
    /// Counter-rotating amplitude, T.
    pub b_minus: f64,
}

/// Split `b_rf_1 cos(wt) + b_rf_2 sin(wt)` into circular components about
/// `b_static`.
pub fn rwa_decomposition(b_rf_1: Vec3, b_rf_2: Vec3, b_static: Vec3) -> Result<RwaDecomposition> {
    let m = check_field(b_static)?;
    let n = b_static * (1.0 / m);
    let p1 = b_rf_1.reject_unit(n);
    let p2 = b_rf_2.reject_unit(n);
    // rotation angle that diagonalizes the ellipse, major axis first
    let chi = 0.5 * (-2.0 * p1.dot(p2)).atan2(p1.norm_sq() - p2.norm_sq());
    let (s, c) = chi.sin_cos();
    let b1p = p1 * c - p2 * s;
    let b2p = p1 * s + p2 * c;
    let handed = p1.cross(p2).dot(n);
    let sigma = if handed < 0.0 { -1.0 } else { 1.0 };
    let (major, minor) = (b1p.norm(), b2p.norm());
    Ok(RwaDecomposition {
        b1p,
        b2p,
        chi,
        b_plus: 0.5 * (major + sigma * minor),
        b_minus: 0.5 * (major - sigma * minor),
    })
}

fn coupling_from_field(b: Vec3, rabi: f64, cfg: &FieldConfig, atom: &AtomState) -> Result<f64> {
    let m = check_field(b)?;
    let s = cfg.ellipticity;
    let first = 1.0 + atom.branch.sign() * s * b.y / m;
    let bz = b.z / m;
    let radicand = first * first - (1.0 - s * s) * bz * bz;
    Ok(rabi * radicand.max(0.0).sqrt())
}

/// Rabi angular frequency of the selected branch at (r, t).
pub fn rabi_coupling(r: Vec3, t: f64, cfg: &FieldConfig, atom: &AtomState) -> Result<f64> {
    coupling_from_field(total_field(r, t, cfg), cfg.rabi_amplitude(t, atom), cfg, atom)
}

/// Rabi angular frequency obtained from the explicit rotating-frame
/// decomposition of the rf vectors.
pub fn rabi_coupling_rwa(r: Vec3, t: f64, cfg: &FieldConfig, atom: &AtomState) -> Result<f64> {
    let (b1, b2) = cfg.rf_amplitudes(t, atom);
    let d = rwa_decomposition(b1, b2, total_field(r, t, cfg))?;
    let amp = match atom.branch {
        Branch::Plus => d.b_plus,
        Branch::Minus => d.b_minus,
    };
    Ok(atom.zeeman_moment() * amp / HBAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialForm {
    /// hbar sqrt(detuning^2 + Rabi^2)
    #[default]
    Exact,
    /// Second-order expansion about the resonance.
    Expanded,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PotentialOptions {
    pub form: PotentialForm,
    /// Add the gravitational energy; +z points along gravity.
    pub gravity: bool,
}

impl PotentialOptions {
    pub fn with_gravity() -> Self {
        PotentialOptions {
            form: PotentialForm::Exact,
            gravity: true,
        }
    }
}

fn potential_at_phase(r: Vec3, phase: f64, cfg: &FieldConfig, atom: &AtomState, form: PotentialForm) -> Result<f64> {
    let b = field_at_phase(r, phase, cfg);
    let track = cfg.tracking_factor(phase, atom);
    let rabi = coupling_from_field(b, cfg.rabi0c * track, cfg, atom)?;
    let detuning = larmor_frequency(b, atom) - cfg.omega_rf0 * track;
    match form {
        PotentialForm::Exact => Ok(HBAR * detuning.hypot(rabi)),
        PotentialForm::Expanded => {
            if rabi == 0.0 {
                return Err(Error::invalid("expanded potential is undefined at zero Rabi coupling"));
            }
            Ok(HBAR * (rabi + detuning * detuning / (2.0 * rabi)))
        }
    }
}

/// Instantaneous dressed potential of the selected branch, J.
pub fn adiabatic_potential(r: Vec3, t: f64, cfg: &FieldConfig, atom: &AtomState) -> Result<f64> {
    adiabatic_potential_with(r, t, cfg, atom, PotentialForm::Exact)
}

pub fn adiabatic_potential_with(
    r: Vec3,
    t: f64,
    cfg: &FieldConfig,
    atom: &AtomState,
    form: PotentialForm,
) -> Result<f64> {
    potential_at_phase(r, cfg.omega_mod * t, cfg, atom, form)
}

/// Gravitational energy with +z along gravity, J.
pub fn gravity_potential(r: Vec3, atom: &AtomState) -> f64 {
    -atom.mass * G_GRAV * r.z
}

fn average_options() -> QuadOptions {
    QuadOptions {
        rtol: 1e-9,
        atol: 0.0,
        l1_floor: 1.0,
        initial_intervals: 4,
        max_intervals: 400,
    }
}

/// Modulation-period averages of linear combinations of the potential at a
/// set of points, evaluated on shared quadrature nodes. `forms[k][j]` weights
/// point `j` in output `k`. Differences such as finite-difference stencils
/// are formed before integration, so they do not inherit the rounding of the
/// much larger absolute potential.
pub fn averaged_linear_forms(
    points: &[Vec3],
    forms: &[Vec<f64>],
    cfg: &FieldConfig,
    atom: &AtomState,
    opts: &PotentialOptions,
) -> Result<Vec<f64>> {
    if forms.iter().any(|f| f.len() != points.len()) {
        return Err(Error::MismatchedGrid(
            "stencil weights and points differ in length".into(),
        ));
    }
    let nforms = forms.len();
    let mut values = vec![0.0; points.len()];
    let integrand = |phase: f64, out: &mut [f64]| -> Result<()> {
        for (v, p) in values.iter_mut().zip(points) {
            *v = potential_at_phase(*p, phase, cfg, atom, opts.form)?;
        }
        for (o, w) in out.iter_mut().zip(forms) {
            *o = w.iter().zip(&values).map(|(a, b)| a * b).sum();
        }
        Ok(())
    };
    let qopts = average_options();
    let floors = rounding_floors(points, forms, cfg, atom, opts)?;
    let res = match integrate_vec_with_floors(integrand, nforms, 0.0, 2.0 * PI, &qopts, &floors) {
        Err(Error::QuadratureNonConvergence { .. }) => simpson_fallback(points, forms, cfg, atom, opts)?,
        other => other?.value,
    };
    let mut out: Vec<f64> = res.iter().map(|v| v / (2.0 * PI)).collect();
    if opts.gravity {
        for (o, w) in out.iter_mut().zip(forms) {
            *o += w
                .iter()
                .zip(points)
                .map(|(a, p)| a * gravity_potential(*p, atom))
                .sum::<f64>();
        }
    }
    Ok(out)
}

/// Absolute tolerance per output set by floating-point rounding of the
/// weighted potential values, sampled at a few phases.
fn rounding_floors(
    points: &[Vec3],
    forms: &[Vec<f64>],
    cfg: &FieldConfig,
    atom: &AtomState,
    opts: &PotentialOptions,
) -> Result<Vec<f64>> {
    let mut floors = vec![0.0_f64; forms.len()];
    for k in 0..8 {
        let phase = (k as f64 + 0.5) * PI / 4.0;
        let vals = points
            .iter()
            .map(|p| potential_at_phase(*p, phase, cfg, atom, opts.form))
            .collect::<Result<Vec<_>>>()?;
        for (fl, w) in floors.iter_mut().zip(forms) {
            let s: f64 = w.iter().zip(&vals).map(|(a, v)| (a * v).abs()).sum();
            *fl = fl.max(s);
        }
    }
    Ok(floors.into_iter().map(|s| 2.0 * PI * 1e3 * f64::EPSILON * s).collect())
}

fn simpson_fallback(
    points: &[Vec3],
    forms: &[Vec<f64>],
    cfg: &FieldConfig,
    atom: &AtomState,
    opts: &PotentialOptions,
) -> Result<Vec<f64>> {
    let rule = |panels: usize| -> Result<Vec<f64>> {
        let h = 2.0 * PI / panels as f64;
        let mut acc = vec![0.0; forms.len()];
        for k in 0..=panels {
            let w = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let phase = k as f64 * h;
            let vals = points
                .iter()
                .map(|p| potential_at_phase(*p, phase, cfg, atom, opts.form))
                .collect::<Result<Vec<_>>>()?;
            for (a, f) in acc.iter_mut().zip(forms) {
                *a += w * f.iter().zip(&vals).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        Ok(acc.into_iter().map(|a| a * h / 3.0).collect())
    };
    let fine = rule(1024)?;
    let coarse = rule(512)?;
    for (f, c) in fine.iter().zip(&coarse) {
        let tol = 1e-6 * f.abs().max(1e-300);
        if (f - c).abs() > tol {
            return Err(Error::QuadratureNonConvergence {
                error: (f - c).abs(),
                tolerance: tol,
            });
        }
    }
    Ok(fine)
}

/// Modulation-period average of the dressed potential, J (exact form, no
/// gravity).
pub fn time_averaged_potential(r: Vec3, cfg: &FieldConfig, atom: &AtomState) -> Result<f64> {
    time_averaged_potential_with(r, cfg, atom, &PotentialOptions::default())
}

pub fn time_averaged_potential_with(
    r: Vec3,
    cfg: &FieldConfig,
    atom: &AtomState,
    opts: &PotentialOptions,
) -> Result<f64> {
    Ok(averaged_linear_forms(&[r], &[vec![1.0]], cfg, atom, opts)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{khz_to_angular, mhz_to_angular, GAUSS, GAUSS_PER_CM};

    fn cfg() -> FieldConfig {
        FieldConfig {
            alpha: 50.0 * GAUSS_PER_CM,
            b_mod: 2.0 * GAUSS,
            omega_mod: khz_to_angular(5.0),
            delta: 0.0,
            omega_rf0: mhz_to_angular(2.62),
            rabi0c: khz_to_angular(60.0),
            ellipticity: 0.0,
            rf_tracking: true,
        }
    }

    fn ring_radius(c: &FieldConfig, a: &AtomState) -> f64 {
        HBAR * c.omega_rf0 / (a.zeeman_moment() * c.alpha)
    }

    #[test]
    fn quadrupole_examples() {
        let c = cfg();
        let b = quadrupole_field(Vec3::new(1e-3, 0.0, 0.0), &c);
        assert!((b.x - 5.0 * GAUSS).abs() < 1e-15 && b.y == 0.0 && b.z == 0.0);
        let b = quadrupole_field(Vec3::new(0.0, 0.0, 1e-3), &c);
        assert!((b.z + 10.0 * GAUSS).abs() < 1e-15);
        assert_eq!(quadrupole_field(Vec3::ZERO, &c), Vec3::ZERO);
    }

    #[test]
    fn modulation_direction_follows_tilt() {
        let mut c = cfg();
        let t = PI / (2.0 * c.omega_mod);
        let b = total_field(Vec3::ZERO, t, &c);
        assert!((b.z - c.b_mod).abs() < 1e-18 && b.x.abs() < 1e-20);
        c.delta = PI / 2.0 - 1e-15;
        let b = total_field(Vec3::ZERO, t, &c);
        assert!((b.x - c.b_mod).abs() < 1e-18);
        let r = Vec3::new(1e-4, 2e-4, -3e-4);
        assert_eq!(total_field(r, 0.0, &c), quadrupole_field(r, &c));
    }

    #[test]
    fn rwa_linear_and_circular_limits() {
        let d = rwa_decomposition(Vec3::X * 2.0e-6, Vec3::ZERO, Vec3::Z * 1e-4).unwrap();
        assert!((d.b_plus - 1e-6).abs() < 1e-18 && (d.b_minus - 1e-6).abs() < 1e-18);
        let d = rwa_decomposition(Vec3::X * 1e-6, Vec3::Y * 1e-6, Vec3::Z * 1e-4).unwrap();
        assert!((d.b_plus - 1e-6).abs() < 1e-18 && d.b_minus.abs() < 1e-18);
        let d = rwa_decomposition(Vec3::X * 1e-6, -Vec3::Y * 1e-6, Vec3::Z * 1e-4).unwrap();
        assert!(d.b_plus.abs() < 1e-18 && (d.b_minus - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn rwa_rejects_field_zero() {
        let r = rwa_decomposition(Vec3::X, Vec3::Y, Vec3::Z * 1e-11);
        assert!(matches!(r, Err(Error::DegenerateField { .. })));
    }

    #[test]
    fn coupling_axis_examples() {
        let mut c = cfg();
        let a = AtomState::rb87(Branch::Plus);
        let om = rabi_coupling(Vec3::new(1e-3, 0.0, 0.0), 0.0, &c, &a).unwrap();
        assert!((om / c.rabi0c - 1.0).abs() < 1e-15);
        c.ellipticity = 0.1;
        let y = Vec3::new(0.0, 1e-3, 0.0);
        assert!((rabi_coupling(y, 0.0, &c, &a).unwrap() / c.rabi0c - 1.1).abs() < 1e-14);
        assert!((rabi_coupling(y, 0.0, &c, &a.with_branch(Branch::Minus)).unwrap() / c.rabi0c - 0.9).abs() < 1e-14);
        c.ellipticity = 0.0;
        assert_eq!(rabi_coupling(Vec3::new(0.0, 0.0, 1e-3), 0.0, &c, &a).unwrap(), 0.0);
    }

    #[test]
    fn tracked_ring_point_is_constant() {
        let c = cfg();
        let a = AtomState::rb87(Branch::Plus);
        let r = Vec3::new(ring_radius(&c, &a), 0.0, 0.0);
        for k in 0..64 {
            let t = k as f64 / 64.0 * 2.0 * PI / c.omega_mod;
            let v = adiabatic_potential(r, t, &c, &a).unwrap();
            assert!((v / (HBAR * c.rabi0c) - 1.0).abs() < 1e-9, "k = {k}");
        }
        let avg = time_averaged_potential(r, &c, &a).unwrap();
        assert!((avg / (HBAR * c.rabi0c) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn far_detuned_potential_is_detuning() {
        let c = cfg();
        let a = AtomState::rb87(Branch::Plus);
        let r = Vec3::new(3.0 * ring_radius(&c, &a), 0.0, 0.0);
        let b = total_field(r, 0.0, &c);
        let det = (larmor_frequency(b, &a) - c.rf_frequency(0.0, &a)).abs();
        let v = adiabatic_potential(r, 0.0, &c, &a).unwrap();
        assert!((v / (HBAR * det) - 1.0).abs() < 0.01);
    }

    #[test]
    fn no_modulation_average_equals_instantaneous() {
        let mut c = cfg();
        c.b_mod = 0.0;
        let a = AtomState::rb87(Branch::Minus);
        let r = Vec3::new(5e-4, 3e-4, 1e-5);
        let inst = adiabatic_potential(r, 0.0, &c, &a).unwrap();
        let avg = time_averaged_potential(r, &c, &a).unwrap();
        assert!((avg / inst - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expanded_form_agrees_near_resonance() {
        let c = cfg();
        let a = AtomState::rb87(Branch::Plus);
        let r = Vec3::new(ring_radius(&c, &a) * 1.0001, 0.0, 0.0);
        let exact = adiabatic_potential_with(r, 0.0, &c, &a, PotentialForm::Exact).unwrap();
        let approx = adiabatic_potential_with(r, 0.0, &c, &a, PotentialForm::Expanded).unwrap();
        assert!((exact / approx - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gravity_is_added_to_average() {
        let c = cfg();
        let a = AtomState::rb87(Branch::Plus);
        let r = Vec3::new(ring_radius(&c, &a), 0.0, 1e-6);
        let plain = time_averaged_potential(r, &c, &a).unwrap();
        let with = time_averaged_potential_with(r, &c, &a, &PotentialOptions::with_gravity()).unwrap();
        assert!((with - plain - gravity_potential(r, &a)).abs() < 1e-12 * plain.abs());
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut c = cfg();
        c.alpha = -5.0;
        c.ellipticity = 2.0;
        match c.validate() {
            Err(Error::InvalidConfig(v)) => {
                assert!(v.contains(&"alpha must be positive".to_string()));
                assert_eq!(v.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
