//! Physical constants (CODATA 2018) and laboratory unit conversions.

use std::f64::consts::PI;

pub const CONSTANTS_VERSION: &str = "CODATA-2018";

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const H_PLANCK: f64 = 2.0 * PI * HBAR;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Mass of 87Rb, kg.
pub const MASS_RB87: f64 = 1.443_160_60e-25;
/// Standard gravity, m/s^2.
pub const G_GRAV: f64 = 9.806_65;
/// |g_F| for both 87Rb ground hyperfine manifolds.
pub const G_F_RB87: f64 = 0.5;

pub const GAUSS: f64 = 1e-4;
pub const GAUSS_PER_CM: f64 = 1e-2;
pub const MICRON: f64 = 1e-6;

/// Angular frequency in rad/s for a frequency given in kHz.
pub fn khz_to_angular(f_khz: f64) -> f64 {
    2.0 * PI * f_khz * 1e3
}

/// Angular frequency in rad/s for a frequency given in MHz.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e6
}

/// Ordinary frequency in Hz for an angular frequency.
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Energy expressed as a frequency in kHz (E / h).
pub fn joule_to_khz(energy: f64) -> f64 {
    energy / H_PLANCK / 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planck_constant_matches_exact_si_value() {
        assert!((H_PLANCK / 6.626_070_15e-34 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conversions_round_trip() {
        assert!((angular_to_hz(khz_to_angular(2.5)) - 2500.0).abs() < 1e-9);
        assert!((angular_to_hz(mhz_to_angular(2.62)) - 2.62e6).abs() < 1e-6);
    }
}
