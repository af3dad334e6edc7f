//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! Step-size control and the fourth-order continuous extension follow the
//! DOPRI5 code of Hairer, Nørsett and Wanner. The state is a flat `f64`
//! vector; complex-valued systems are integrated on their interleaved real
//! view.

use crate::error::{Error, Result};

/// Mixed absolute/relative local error tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Tolerance {
    pub const fn new(atol: f64, rtol: f64) -> Self {
        Self { atol, rtol }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            atol: self.atol * factor,
            rtol: self.rtol * factor,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-9, 1e-7)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub rhs_evals: usize,
    pub accepted: usize,
    pub rejected: usize,
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

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// Adaptive DOPRI5 stepper for `dy/dt = f(t, y)`.
pub struct Dopri5<F> {
    rhs: F,
    tol: Tolerance,
    h_max: f64,
    t: f64,
    y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    // continuous extension of the last accepted step on [t_old, t]
    t_old: f64,
    h_old: f64,
    cont: [Vec<f64>; 5],
    fac_old: f64,
    stats: OdeStats,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(mut rhs: F, t0: f64, y0: Vec<f64>, tol: Tolerance) -> Result<Self> {
        if !(tol.atol > 0.0 && tol.rtol >= 0.0) {
            return Err(crate::error::invalid("tolerance", "atol must be > 0 and rtol >= 0"));
        }
        let n = y0.len();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        rhs(t0, &y0, &mut k[0]);
        let mut s = Self {
            rhs,
            tol,
            h_max: f64::INFINITY,
            t: t0,
            h: 0.0,
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
            t_old: t0,
            h_old: 0.0,
            cont: std::array::from_fn(|_| y0.clone()),
            y: y0,
            k,
            fac_old: 1e-4,
            stats: OdeStats {
                rhs_evals: 1,
                ..Default::default()
            },
        };
        for c in s.cont.iter_mut().skip(1) {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        s.h = s.initial_step();
        Ok(s)
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self.h = self.h.min(h_max);
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current point (first stage of the next step).
    pub fn dydt(&self) -> &[f64] {
        &self.k[0]
    }

    pub fn stats(&self) -> OdeStats {
        self.stats
    }

    fn scale(&self, y0: f64, y1: f64) -> f64 {
        self.tol.atol + self.tol.rtol * y0.abs().max(y1.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len().max(1) as f64;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for (yi, fi) in self.y.iter().zip(&self.k[0]) {
            let sk = self.scale(*yi, *yi);
            dnf += (fi / sk).powi(2);
            dny += (yi / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            0.01 * (dny / dnf).sqrt()
        };
        h = h.min(self.h_max);
        for i in 0..self.y.len() {
            self.y_stage[i] = self.y[i] + h * self.k[0][i];
        }
        (self.rhs)(self.t + h, &self.y_stage, &mut self.k[1]);
        self.stats.rhs_evals += 1;
        let mut der2 = 0.0;
        for i in 0..self.y.len() {
            let sk = self.scale(self.y[i], self.y[i]);
            der2 += ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let der2 = (der2 / n).sqrt() / h;
        let der12 = der2.max((dnf / n).sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Take one accepted step. Returns the step size used.
    pub fn step(&mut self) -> Result<f64> {
        let n = self.y.len();
        let mut rejected_last = false;
        loop {
            let h = self.h;
            let t = self.t;
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let y = &self.y;
            let ys = &mut self.y_stage;
            for i in 0..n {
                ys[i] = y[i] + h * A21 * k1[i];
            }
            (self.rhs)(t + C2 * h, ys, k2);
            for i in 0..n {
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.rhs)(t + C3 * h, ys, k3);
            for i in 0..n {
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.rhs)(t + C4 * h, ys, k4);
            for i in 0..n {
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.rhs)(t + C5 * h, ys, k5);
            for i in 0..n {
                ys[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            (self.rhs)(t + h, ys, k6);
            let yn = &mut self.y_new;
            for i in 0..n {
                yn[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            (self.rhs)(t + h, yn, k7);
            self.stats.rhs_evals += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sk = self.tol.atol + self.tol.rtol * y[i].abs().max(yn[i].abs());
                err += (e / sk).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();

            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h *= FAC_MIN;
                rejected_last = true;
                continue;
            }

            let fac11 = err.powf(0.2 - BETA * 0.75);
            if err <= 1.0 {
                let fac = (fac11 / self.fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = (h / fac).min(self.h_max);
                if rejected_last {
                    h_new = h_new.min(h);
                }
                self.fac_old = err.max(1e-4);

                // continuous extension
                let [c0, c1, c2, c3, c4] = &mut self.cont;
                for i in 0..n {
                    let dy = yn[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    c0[i] = y[i];
                    c1[i] = dy;
                    c2[i] = bspl;
                    c3[i] = dy - h * k7[i] - bspl;
                    c4[i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                self.t_old = t;
                self.h_old = h;
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.t = t + h;
                self.h = h_new;
                self.stats.accepted += 1;
                if self.y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { t: self.t });
                }
                return Ok(h);
            }
            self.stats.rejected += 1;
            self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
            rejected_last = true;
        }
    }

    /// Evaluate the continuous extension of the last step at `t`.
    fn interpolate(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t_old) / self.h_old;
        let theta1 = 1.0 - theta;
        let [c0, c1, c2, c3, c4] = &self.cont;
        for i in 0..out.len() {
            out[i] = c0[i] + theta * (c1[i] + theta1 * (c2[i] + theta * (c3[i] + theta1 * c4[i])));
        }
    }

    /// Integrate forward until `t_target` is covered and write `y(t_target)`.
    ///
    /// Targets must be non-decreasing across calls (a target inside the last
    /// accepted step is served from the continuous extension).
    pub fn advance_to(&mut self, t_target: f64, out: &mut [f64]) -> Result<()> {
        while self.t < t_target {
            self.step()?;
        }
        if t_target == self.t || self.h_old == 0.0 {
            out.copy_from_slice(&self.y);
        } else {
            self.interpolate(t_target, out);
        }
        Ok(())
    }
}

/// Integrate from `times[0]` and return the state at each entry of `times`.
pub fn integrate_on_grid<F>(rhs: F, y0: Vec<f64>, times: &[f64], tol: Tolerance) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    let n = y0.len();
    let mut solver = Dopri5::new(rhs, t0, y0, tol)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut buf = vec![0.0; n];
        solver.advance_to(t, &mut buf)?;
        out.push(buf);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_dense_output() {
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.137).collect();
        let ys = integrate_on_grid(
            |_, y, dy| dy[0] = -y[0],
            vec![1.0],
            &times,
            Tolerance::new(1e-12, 1e-12),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-10, "t={t} y={}", y[0]);
        }
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let times = [0.0, 10.0, 50.0, 100.0];
        let ys = integrate_on_grid(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            vec![1.0, 0.0],
            &times,
            Tolerance::new(1e-12, 1e-12),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-8);
            assert!((y[1] + t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn dense_output_is_fourth_order_between_steps() {
        // One large step then interpolate inside it.
        let mut s = Dopri5::new(|t, _, dy| dy[0] = t.cos(), 0.0, vec![0.0], Tolerance::new(1e-6, 1e-6))
            .unwrap()
            .with_max_step(0.5);
        s.step().unwrap();
        let h = s.t();
        let mut out = [0.0];
        for j in 1..10 {
            let t = h * j as f64 / 10.0;
            s.interpolate(t, &mut out);
            assert!((out[0] - t.sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_rhs_is_exact() {
        let ys = integrate_on_grid(|_, _, dy| dy.fill(0.0), vec![0.3, -2.0], &[0.0, 5.0, 1e3], Tolerance::default()).unwrap();
        for y in ys {
            assert_eq!(y, vec![0.3, -2.0]);
        }
    }

    #[test]
    fn blow_up_reports_failure() {
        let r = integrate_on_grid(|_, y, dy| dy[0] = y[0] * y[0], vec![1.0], &[0.0, 2.0], Tolerance::default());
        assert!(r.is_err());
    }
}
