//! Adaptive Gauss-Kronrod (7/15) quadrature for scalar and vector
//! integrands, plus composite Simpson for cross-checks and fallback.

#![allow(clippy::excessive_precision)]

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Components whose integral nearly cancels are judged against
    /// `l1_floor * integral(|f|)` instead of their own magnitude.
    pub l1_floor: f64,
    pub initial_intervals: usize,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rtol: 1e-9,
            atol: 0.0,
            l1_floor: 0.0,
            initial_intervals: 1,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
    abs: Vec<f64>,
}

fn gk15<F>(f: &mut F, dim: usize, a: f64, b: f64, buf: &mut [f64]) -> Result<Panel>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut abs = vec![0.0; dim];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for &s in nodes {
            f(center + s * half * x, buf)?;
            for i in 0..dim {
                kron[i] += wk * buf[i];
                abs[i] += wk * buf[i].abs();
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let value: Vec<f64> = kron.iter().map(|k| k * half).collect();
    let error = kron.iter().zip(&gauss).map(|(k, g)| ((k - g) * half).abs()).collect();
    let abs = abs.iter().map(|v| v * half.abs()).collect();
    Ok(Panel {
        a,
        b,
        value,
        error,
        abs,
    })
}

/// Globally adaptive Gauss-Kronrod integration of a vector-valued integrand.
///
/// The integrand writes its `dim` components into the provided buffer.
pub fn integrate_vec<F>(f: F, dim: usize, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    integrate_vec_with_floors(f, dim, a, b, opts, &[])
}

/// As [`integrate_vec`], with per-component absolute tolerance floors for
/// components that are known to be limited by rounding in the integrand.
pub fn integrate_vec_with_floors<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    opts: &QuadOptions,
    floors: &[f64],
) -> Result<QuadResult>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut buf = vec![0.0; dim];
    let n0 = opts.initial_intervals.max(1);
    let mut panels = Vec::with_capacity(opts.max_intervals);
    for k in 0..n0 {
        let lo = a + (b - a) * k as f64 / n0 as f64;
        let hi = if k + 1 == n0 {
            b
        } else {
            a + (b - a) * (k + 1) as f64 / n0 as f64
        };
        panels.push(gk15(&mut f, dim, lo, hi, &mut buf)?);
    }
    let mut evaluations = 15 * n0;
    loop {
        let mut value = vec![0.0; dim];
        let mut error = vec![0.0; dim];
        let mut l1 = vec![0.0; dim];
        for p in &panels {
            for i in 0..dim {
                value[i] += p.value[i];
                error[i] += p.error[i];
                l1[i] += p.abs[i];
            }
        }
        let tol: Vec<f64> = (0..dim)
            .map(|i| {
                let floor = floors.get(i).copied().unwrap_or(0.0);
                opts.atol
                    .max(floor)
                    .max(opts.rtol * value[i].abs().max(opts.l1_floor * l1[i]))
            })
            .collect();
        let converged = (0..dim).all(|i| error[i] <= tol[i]);
        if converged {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
            });
        }
        if panels.len() >= opts.max_intervals {
            let (worst, worst_tol) = (0..dim)
                .map(|i| (error[i], tol[i]))
                .max_by(|x, y| (x.0 / x.1.max(f64::MIN_POSITIVE)).total_cmp(&(y.0 / y.1.max(f64::MIN_POSITIVE))))
                .unwrap_or((0.0, 0.0));
            return Err(Error::QuadratureNonConvergence {
                error: worst,
                tolerance: worst_tol,
            });
        }
        let score = |p: &Panel| {
            (0..dim)
                .map(|i| p.error[i] / tol[i].max(f64::MIN_POSITIVE))
                .fold(0.0_f64, f64::max)
        };
        let (idx, _) = panels
            .iter()
            .enumerate()
            .map(|(k, p)| (k, score(p)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("at least one panel");
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk15(&mut f, dim, p.a, mid, &mut buf)?);
        panels.push(gk15(&mut f, dim, mid, p.b, &mut buf)?);
        evaluations += 30;
    }
}

/// Adaptive Gauss-Kronrod integration of a scalar integrand.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let res = integrate_vec(
        |x, out| {
            out[0] = f(x)?;
            Ok(())
        },
        1,
        a,
        b,
        opts,
    )?;
    Ok(res.value[0])
}

/// Composite Simpson rule with an even number of panels.
pub fn simpson<F>(mut f: F, a: f64, b: f64, panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a)? + f(b)?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// Gauss-Kronrod with a composite-Simpson fallback when adaptivity runs out.
///
/// The fallback result is accepted only if 512 and 1024 panel estimates agree
/// to `sqrt(rtol)`.
pub fn integrate_with_fallback<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    match integrate(&mut f, a, b, opts) {
        Err(Error::QuadratureNonConvergence { .. }) => {
            let fine = simpson(&mut f, a, b, 1024)?;
            let coarse = simpson(&mut f, a, b, 512)?;
            let diff = (fine - coarse).abs();
            let tol = opts.rtol.sqrt() * fine.abs().max(opts.atol);
            if diff <= tol {
                Ok(fine)
            } else {
                Err(Error::QuadratureNonConvergence {
                    error: diff,
                    tolerance: tol,
                })
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn kronrod_weights_integrate_constants() {
        let sum: f64 = WGK[..7].iter().sum::<f64>() * 2.0 + WGK[7];
        assert!((sum - 2.0).abs() < 1e-15);
        let gsum: f64 = WG[..3].iter().sum::<f64>() * 2.0 + WG[3];
        assert!((gsum - 2.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| Ok(x.powi(9) - 3.0 * x * x), -1.0, 2.0, &QuadOptions::default()).unwrap();
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn periodic_integrand_over_full_period() {
        // integral of exp(cos x) over a period is 2 pi I0(1)
        let v = integrate(|x| Ok(x.cos().exp()), 0.0, 2.0 * PI, &QuadOptions::default()).unwrap();
        assert!((v / (2.0 * PI * 1.266_065_877_752_008_4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_converges_adaptively() {
        let opts = QuadOptions {
            max_intervals: 2000,
            rtol: 1e-8,
            ..Default::default()
        };
        let v = integrate(|x| Ok(1.0 / x.sqrt()), 0.0, 1.0, &opts).unwrap();
        assert!((v - 2.0).abs() < 1e-7);
    }

    #[test]
    fn vector_components_converge_independently() {
        let res = integrate_vec(
            |x, out| {
                out[0] = x.sin();
                out[1] = 1e-8 * x.cos();
                Ok(())
            },
            2,
            0.0,
            1.0,
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((res.value[0] - (1.0 - 1f64.cos())).abs() < 1e-12);
        assert!((res.value[1] / (1e-8 * 1f64.sin()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_matches_gauss_kronrod() {
        let f = |x: f64| Ok((3.0 * x).sin() + x * x);
        let s = simpson(f, 0.0, 2.0, 1024).unwrap();
        let g = integrate(f, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((s - g).abs() < 1e-10);
    }

    #[test]
    fn fallback_engages_when_subdivision_is_exhausted() {
        let opts = QuadOptions {
            max_intervals: 1,
            rtol: 1e-12,
            ..Default::default()
        };
        let f = |x: f64| Ok((20.0 * x).sin().powi(2));
        let v = integrate_with_fallback(f, 0.0, PI, &opts).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-8);
    }

    #[test]
    fn integrand_errors_propagate() {
        let r = integrate(
            |_| Err(Error::DegenerateField { magnitude: 0.0 }),
            0.0,
            1.0,
            &QuadOptions::default(),
        );
        assert!(matches!(r, Err(Error::DegenerateField { .. })));
    }
}
