//! Dormand-Prince 5(4) integrator with step-size control and the
//! fourth-order continuous extension, for fixed-size states.

use super::optimize::brent_root;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest step magnitude in seconds.
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 5_000_000,
            h_max: f64::INFINITY,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Adaptive stepper holding the current state and the dense-output
/// polynomial for the last accepted step.
pub struct Dopri5<const N: usize, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    rhs: F,
    opts: OdeOptions,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    steps: usize,
    t_old: f64,
    h_last: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize, F> Dopri5<N, F>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], opts: OdeOptions) -> Self {
        let k1 = rhs(t0, &y0);
        Dopri5 {
            rhs,
            opts,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            steps: 0,
            t_old: t0,
            h_last: 0.0,
            rcont: [[0.0; N]; 5],
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn scale(&self, y: &[f64; N], i: usize) -> f64 {
        self.opts.atol + self.opts.rtol * y[i].abs()
    }

    fn initial_step(&mut self, dir: f64) -> f64 {
        let norm = |v: &[f64; N], s: &Self| -> f64 {
            ((0..N).map(|i| (v[i] / s.scale(&s.y, i)).powi(2)).sum::<f64>() / N as f64).sqrt()
        };
        let d0 = norm(&self.y, self);
        let d1 = norm(&self.k1, self);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.opts.h_max);
        let y1 = axpy(&self.y, dir * h0, &[(1.0, &self.k1)]);
        let f1 = (self.rhs)(self.t + dir * h0, &y1);
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - self.k1[i];
        }
        let d2 = norm(&diff, self) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// Advance by one accepted step without passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<()> {
        let dir = if t_end >= self.t { 1.0 } else { -1.0 };
        if self.h == 0.0 {
            self.h = self.initial_step(dir);
        }
        loop {
            if self.steps >= self.opts.max_steps {
                return Err(Error::StepFailure {
                    t: self.t,
                    reason: "step budget exhausted".into(),
                });
            }
            let remaining = (t_end - self.t).abs();
            let mut h = self.h.min(self.opts.h_max);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h <= 1e-14 * self.t.abs().max(remaining) {
                return Err(Error::StepFailure {
                    t: self.t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let hs = dir * h;
            let t = self.t;
            let y = self.y;
            let k1 = self.k1;
            let k2 = (self.rhs)(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
            let k3 = (self.rhs)(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = (self.rhs)(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = (self.rhs)(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let t_new = if last { t_end } else { t + hs };
            let k6 = (self.rhs)(
                t + hs,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = (self.rhs)(t_new, &y_new);
            self.steps += 1;

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..N {
                let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sk = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sk).powi(2);
                finite &= y_new[i].is_finite();
            }
            let err = (err / N as f64).sqrt();
            if !finite || !err.is_finite() {
                self.h = 0.25 * h;
                continue;
            }
            if err <= 1.0 {
                let mut rc = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = hs * k1[i] - ydiff;
                    rc[0][i] = y[i];
                    rc[1][i] = ydiff;
                    rc[2][i] = bspl;
                    rc[3][i] = ydiff - hs * k7[i] - bspl;
                    rc[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                self.rcont = rc;
                self.t_old = t;
                self.h_last = hs;
                self.t = t_new;
                self.y = y_new;
                self.k1 = k7;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // keep the pre-truncation step when the last step was clipped
                self.h = if last { self.h.max(h) } else { h * fac };
                return Ok(());
            }
            self.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    /// Dense-output state at `t` within the last accepted step.
    pub fn dense(&self, t: f64) -> [f64; N] {
        if self.h_last == 0.0 {
            return self.y;
        }
        let s = (t - self.t_old) / self.h_last;
        let s1 = 1.0 - s;
        let rc = &self.rcont;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = rc[0][i] + s * (rc[1][i] + s1 * (rc[2][i] + s * (rc[3][i] + s1 * rc[4][i])));
        }
        out
    }

    /// Integrate to `t_end`, reporting the state at each requested output
    /// time. Outputs must be ordered along the direction of integration.
    pub fn advance_to<G>(&mut self, t_end: f64, outputs: &[f64], mut emit: G) -> Result<()>
    where
        G: FnMut(f64, &[f64; N]),
    {
        let dir = if t_end >= self.t { 1.0 } else { -1.0 };
        let mut next = 0;
        while next < outputs.len() && dir * (outputs[next] - self.t) <= 0.0 {
            if outputs[next] == self.t {
                emit(self.t, &self.y);
            }
            next += 1;
        }
        while self.t != t_end {
            self.step(t_end)?;
            while next < outputs.len() && dir * (outputs[next] - self.t) <= 0.0 {
                let ts = outputs[next];
                if ts == self.t {
                    emit(ts, &self.y);
                } else {
                    emit(ts, &self.dense(ts));
                }
                next += 1;
            }
        }
        Ok(())
    }

    /// Integrate until `event(t, y)` changes sign or `t_end` is reached.
    /// Returns the refined event time and state if one was found.
    pub fn advance_until<G>(&mut self, t_end: f64, mut event: G) -> Result<Option<(f64, [f64; N])>>
    where
        G: FnMut(f64, &[f64; N]) -> f64,
    {
        let mut g_old = event(self.t, &self.y);
        while self.t != t_end {
            self.step(t_end)?;
            let g_new = event(self.t, &self.y);
            if g_old != 0.0 && g_old.signum() != g_new.signum() {
                let (a, b) = (self.t_old, self.t);
                let root = brent_root(
                    |t| Ok(event(t, &self.dense(t))),
                    a.min(b),
                    a.max(b),
                    1e-15 * a.abs().max(b.abs()).max(1e-300),
                )?;
                return Ok(Some((root, self.dense(root))));
            }
            g_old = g_new;
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_at_default_tolerance() {
        let mut s = Dopri5::new(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], OdeOptions::default());
        s.advance_to(5.0, &[], |_, _| {}).unwrap();
        assert!((s.y()[0] - (-5f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let w = 3.0;
        let mut s = Dopri5::new(
            move |_, y: &[f64; 2]| [y[1], -w * w * y[0]],
            0.0,
            [1.0, 0.0],
            OdeOptions::default(),
        );
        let outs: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let mut worst = 0.0_f64;
        s.advance_to(5.0, &outs, |t, y| worst = worst.max((y[0] - (w * t).cos()).abs()))
            .unwrap();
        assert!(worst < 1e-8, "dense output error {worst:e}");
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let f = |_: f64, y: &[f64; 2]| [y[1], -y[0].sin()];
        let mut s = Dopri5::new(f, 0.0, [0.5, 0.0], OdeOptions::default());
        s.advance_to(7.0, &[], |_, _| {}).unwrap();
        let mid = *s.y();
        let mut b = Dopri5::new(f, 7.0, mid, OdeOptions::default());
        b.advance_to(0.0, &[], |_, _| {}).unwrap();
        assert!((b.y()[0] - 0.5).abs() < 1e-9 && b.y()[1].abs() < 1e-9);
    }

    #[test]
    fn event_location_finds_quarter_period() {
        let mut s = Dopri5::new(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], OdeOptions::default());
        let (t, _) = s.advance_until(10.0, |_, y| y[0]).unwrap().unwrap();
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn requested_outputs_include_endpoints() {
        let mut s = Dopri5::new(|_, _: &[f64; 1]| [1.0], 0.0, [0.0], OdeOptions::default());
        let mut seen = Vec::new();
        s.advance_to(2.0, &[0.0, 1.0, 2.0], |t, y| seen.push((t, y[0])))
            .unwrap();
        assert_eq!(seen.len(), 3);
        assert!((seen[2].1 - 2.0).abs() < 1e-14);
    }
}
