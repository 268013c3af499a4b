//! Dormand-Prince 5(4) integrator with continuous extension.

use crate::{Error, Result};

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

pub const MIN_STEP: f64 = 1e-14;

/// One accepted step with its dense-output polynomial.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub err: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    /// Fourth-order interpolant, valid for t in [t0, t1].
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let th1 = 1.0 - th;
        let r = &self.rcont;
        std::array::from_fn(|i| r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i]))))
    }

    /// First zero of `g` on this step if `g` changes sign between the ends,
    /// located by bisection in time to `ttol`.
    pub fn locate<G: Fn(&[f64; N]) -> f64>(&self, g: G, ttol: f64) -> Option<(f64, [f64; N])> {
        let g0 = g(&self.y0);
        let g1 = g(&self.y1);
        if g0 == 0.0 || g0.signum() == g1.signum() {
            return None;
        }
        let (mut lo, mut hi) = (self.t0, self.t1);
        while hi - lo > ttol {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if g(&self.eval(mid)).signum() == g0.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        Some((t, self.eval(t)))
    }
}

pub struct Dopri5<F, const N: usize> {
    f: F,
    pub t: f64,
    pub y: [f64; N],
    k1: [f64; N],
    h: f64,
    pub tol: f64,
    pub h_max: f64,
    pub steps: usize,
    pub rejected: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

impl<F: FnMut(f64, &[f64; N]) -> [f64; N], const N: usize> Dopri5<F, N> {
    /// `tol` is used as both absolute and relative tolerance.
    pub fn new(mut f: F, t0: f64, y0: [f64; N], tol: f64) -> Self {
        let k1 = f(t0, &y0);
        let mut s = Self { f, t: t0, y: y0, k1, h: 0.0, tol, h_max: f64::INFINITY, steps: 0, rejected: 0 };
        s.h = s.initial_step();
        s
    }

    fn scale(&self, i: usize, y1: &[f64; N]) -> f64 {
        self.tol + self.tol * self.y[i].abs().max(y1[i].abs())
    }

    fn initial_step(&mut self) -> f64 {
        let sk: [f64; N] = std::array::from_fn(|i| self.tol + self.tol * self.y[i].abs());
        let nrm = |v: &[f64; N]| (v.iter().zip(&sk).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt();
        let d0 = nrm(&self.y);
        let d1 = nrm(&self.k1);
        let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = axpy(&self.y, h0, &[(1.0, &self.k1)]);
        let f1 = (self.f)(self.t + h0, &y1);
        let diff: [f64; N] = std::array::from_fn(|i| f1[i] - self.k1[i]);
        let d2 = nrm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Takes one accepted step, never beyond `t_stop`.
    pub fn step(&mut self, t_stop: f64) -> Result<Step<N>> {
        loop {
            let mut h = self.h.min(self.h_max);
            let last = self.t + h >= t_stop;
            if last {
                h = t_stop - self.t;
            }
            if h < MIN_STEP {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let (t, y, k1) = (self.t, self.y, self.k1);
            let f = &mut self.f;
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + h, &y1);
            let mut err = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                err += (e / self.scale(i, &y1)).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() || y1.iter().any(|x| !x.is_finite()) {
                self.h = h * 0.1;
                self.rejected += 1;
                continue;
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
            if err <= 1.0 {
                let ydiff: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
                let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
                let r4: [f64; N] = std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]);
                let r5: [f64; N] =
                    std::array::from_fn(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]));
                let t1 = if last { t_stop } else { t + h };
                let step = Step { t0: t, t1, y0: y, y1, err, rcont: [y, ydiff, bspl, r4, r5] };
                self.t = t1;
                self.y = y1;
                self.k1 = k7;
                self.steps += 1;
                if !last {
                    self.h = h * fac.min(if self.rejected > 0 { 1.0 } else { 10.0 });
                }
                return Ok(step);
            }
            self.rejected += 1;
            self.h = h * fac.min(1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_: f64, y: &[f64; 2]) -> [f64; 2] {
        [-y[1], y[0]]
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let mut s = Dopri5::new(oscillator, 0.0, [1.0, 0.0], 1e-10);
        let t_end = 20.0;
        while s.t < t_end {
            s.step(t_end).unwrap();
        }
        assert!((s.y[0] - t_end.cos()).abs() < 1e-8);
        assert!((s.y[1] - t_end.sin()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_is_accurate() {
        let mut s = Dopri5::new(oscillator, 0.0, [1.0, 0.0], 1e-9);
        let mut worst: f64 = 0.0;
        while s.t < 10.0 {
            let st = s.step(10.0).unwrap();
            for k in 1..10 {
                let t = st.t0 + (st.t1 - st.t0) * k as f64 / 10.0;
                let y = st.eval(t);
                worst = worst.max((y[0] - t.cos()).abs()).max((y[1] - t.sin()).abs());
            }
        }
        assert!(worst < 1e-7, "dense error {worst}");
    }

    #[test]
    fn event_location() {
        let mut s = Dopri5::new(oscillator, 0.0, [1.0, 0.0], 1e-10);
        loop {
            let st = s.step(10.0).unwrap();
            if let Some((t, _)) = st.locate(|y| y[0], 1e-12) {
                assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
                break;
            }
        }
    }

    #[test]
    fn fifth_order_convergence() {
        // Error against the exact solution of y' = -y^2 shrinks about tol^(5/6)
        // or faster; check a reduction factor when tol drops by 1e3.
        let run = |tol: f64| {
            let mut s = Dopri5::new(|_, y: &[f64; 1]| [-y[0] * y[0]], 0.0, [1.0], tol);
            while s.t < 5.0 {
                s.step(5.0).unwrap();
            }
            (s.y[0] - 1.0 / 6.0).abs()
        };
        let e1 = run(1e-6);
        let e2 = run(1e-9);
        assert!(e2 < e1 / 50.0, "{e1} {e2}");
    }
}
