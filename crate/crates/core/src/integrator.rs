//! Dormand–Prince 5(4) integrator with the classic 4th-order dense output.
//!
//! The error norm is taken per *group* of components: each group is scaled
//! by its own magnitude (∞-norm), which is the natural choice for
//! matrix-valued states whose individual entries oscillate through zero.

use std::ops::Range;

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Component ranges that share one error scale. Default: every component alone.
    fn error_groups(&self) -> Vec<Range<usize>> {
        (0..self.dim()).map(|i| i..i + 1).collect()
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

/// Dense-output coefficients of one accepted step `[t, t + h]`.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let th = (t - self.t) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }
}

/// Piecewise-polynomial solution over `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    steps: Vec<DenseStep>,
    y_end: Vec<f64>,
}

impl DenseTrajectory {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.t)
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t + s.h)
    }

    pub fn y_end(&self) -> &[f64] {
        &self.y_end
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y_end.len()];
        if t >= self.t_end() {
            out.copy_from_slice(&self.y_end);
            return out;
        }
        let idx = self
            .steps
            .partition_point(|s| s.t + s.h <= t)
            .min(self.steps.len() - 1);
        self.steps[idx].eval_into(t, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    /// Integrates from `t0` to `t1`, reporting the state at each of the
    /// (ascending) `samples` in `[t0, t1]`. Returns the state at `t1`.
    pub fn integrate<S, F>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t1: f64,
        samples: &[f64],
        mut on_sample: F,
    ) -> Result<Vec<f64>>
    where
        S: OdeSystem + ?Sized,
        F: FnMut(f64, &[f64]) -> Result<()>,
    {
        let mut next = 0;
        while next < samples.len() && samples[next] <= t0 {
            on_sample(samples[next], y0)?;
            next += 1;
        }
        let mut buf = vec![0.0; y0.len()];
        let mut sample_err = None;
        let y = self.run(sys, t0, y0, t1, |step, y_new| {
            let end = step.t + step.h;
            while next < samples.len() && samples[next] <= end && sample_err.is_none() {
                let ts = samples[next];
                let res = if ts >= end {
                    on_sample(ts, y_new)
                } else {
                    step.eval_into(ts, &mut buf);
                    on_sample(ts, &buf)
                };
                if let Err(e) = res {
                    sample_err = Some(e);
                }
                next += 1;
            }
            sample_err.is_none()
        })?;
        if let Some(e) = sample_err {
            return Err(e);
        }
        Ok(y)
    }

    /// Integrates and keeps every step for later interpolation.
    pub fn solve_dense<S>(&self, sys: &S, t0: f64, y0: &[f64], t1: f64) -> Result<DenseTrajectory>
    where
        S: OdeSystem + ?Sized,
    {
        let mut steps = Vec::new();
        let y_end = self.run(sys, t0, y0, t1, |step, _| {
            steps.push(step.clone());
            true
        })?;
        if steps.is_empty() {
            steps.push(DenseStep {
                t: t0,
                h: 0.0,
                r: [y0.to_vec(), vec![0.0; y0.len()], vec![0.0; y0.len()], vec![0.0; y0.len()], vec![0.0; y0.len()]],
            });
        }
        Ok(DenseTrajectory { steps, y_end })
    }

    fn run<S, F>(&self, sys: &S, t0: f64, y0: &[f64], t1: f64, mut on_step: F) -> Result<Vec<f64>>
    where
        S: OdeSystem + ?Sized,
        F: FnMut(&DenseStep, &[f64]) -> bool,
    {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state dimension mismatch");
        let mut y = y0.to_vec();
        if t1 <= t0 {
            return Ok(y);
        }
        let groups = sys.error_groups();
        let span = t1 - t0;

        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        let mut err = vec![0.0; n];

        sys.rhs(t0, &y, &mut k1);
        let mut t = t0;
        let mut h = self.initial_step(&groups, &y, &k1, span);
        let mut reject = false;
        let mut steps = 0usize;

        while t < t1 {
            if steps >= self.max_steps {
                return Err(Error::Integration {
                    t_last: t,
                    reason: format!("step budget of {} exhausted", self.max_steps),
                });
            }
            let h_floor = 1e-14 * t.abs().max(span);
            if h < h_floor {
                return Err(Error::Integration {
                    t_last: t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }

            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            sys.rhs(t + C2 * h, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            sys.rhs(t + C3 * h, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            sys.rhs(t + C4 * h, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            sys.rhs(t + C5 * h, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if last { t1 } else { t + h };
            sys.rhs(t_new, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            sys.rhs(t_new, &ynew, &mut k7);
            for i in 0..n {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }

            let mut acc = 0.0;
            for g in &groups {
                let scale_old = g.clone().map(|i| y[i].abs()).fold(0.0, f64::max);
                let scale_new = g.clone().map(|i| ynew[i].abs()).fold(0.0, f64::max);
                let sc = self.atol + self.rtol * scale_old.max(scale_new);
                let e = g.clone().map(|i| err[i].abs()).fold(0.0, f64::max) / sc;
                acc += e * e;
            }
            let enorm = (acc / groups.len() as f64).sqrt();
            if !enorm.is_finite() {
                reject = true;
                h *= 0.1;
                continue;
            }

            if enorm <= 1.0 {
                steps += 1;
                let mut r5 = vec![0.0; n];
                for i in 0..n {
                    r5[i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let r2: Vec<f64> = (0..n).map(|i| ynew[i] - y[i]).collect();
                let r3: Vec<f64> = (0..n).map(|i| h * k1[i] - r2[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k7[i] - r3[i]).collect();
                let step = DenseStep {
                    t,
                    h,
                    r: [y.clone(), r2, r3, r4, r5],
                };
                if !on_step(&step, &ynew) {
                    return Ok(ynew);
                }
                y.copy_from_slice(&ynew);
                k1.copy_from_slice(&k7);
                t = t_new;
                let fac = (0.9 * enorm.max(1e-10).powf(-0.2)).clamp(0.2, if reject { 1.0 } else { 5.0 });
                h = (h * fac).min(self.h_max);
                reject = false;
            } else {
                let fac = (0.9 * enorm.powf(-0.2)).max(0.2);
                h *= fac;
                reject = true;
            }
        }
        Ok(y)
    }

    fn initial_step(&self, groups: &[Range<usize>], y: &[f64], f: &[f64], span: f64) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for g in groups {
            let sc = self.atol + self.rtol * g.clone().map(|i| y[i].abs()).fold(0.0, f64::max);
            let yn = g.clone().map(|i| y[i].abs()).fold(0.0, f64::max) / sc;
            let fn_ = g.clone().map(|i| f[i].abs()).fold(0.0, f64::max) / sc;
            d0 += yn * yn;
            d1 += fn_ * fn_;
        }
        let h = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6 * span
        } else {
            0.01 * (d0 / d1).sqrt()
        };
        h.min(self.h_max).min(span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator {
        w: f64,
    }

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = self.w * y[1];
            dy[1] = -self.w * y[0];
        }
    }

    struct Decay;

    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -2.0 * t * y[0];
        }
    }

    #[test]
    fn harmonic_oscillator_end_state() {
        let sys = Oscillator { w: 3.0 };
        let y = Dopri5::new(1e-12, 1e-14).integrate(&sys, 0.0, &[1.0, 0.0], 10.0, &[], |_, _| Ok(())).unwrap();
        assert!((y[0] - 30f64.cos()).abs() < 1e-9);
        assert!((y[1] + 30f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let samples: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
        let mut worst: f64 = 0.0;
        Dopri5::new(1e-11, 1e-13)
            .integrate(&Decay, 0.0, &[1.0], 2.0, &samples, |t, y| {
                worst = worst.max((y[0] - (-t * t).exp()).abs());
                Ok(())
            })
            .unwrap();
        assert!(worst < 1e-9, "{worst}");
        let traj = Dopri5::new(1e-11, 1e-13).solve_dense(&Decay, 0.0, &[1.0], 2.0).unwrap();
        assert!((traj.eval(1.234)[0] - (-1.234f64 * 1.234).exp()).abs() < 1e-9);
        assert_eq!(traj.eval(2.0), traj.y_end().to_vec());
    }

    #[test]
    fn step_budget_exhaustion_reports_last_time() {
        let mut solver = Dopri5::new(1e-12, 1e-14);
        solver.max_steps = 3;
        match solver.integrate(&Oscillator { w: 50.0 }, 0.0, &[1.0, 0.0], 10.0, &[], |_, _| Ok(())) {
            Err(Error::Integration { t_last, .. }) => assert!(t_last > 0.0 && t_last < 10.0),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn samples_at_the_endpoints_are_reported() {
        let mut seen = Vec::new();
        Dopri5::default()
            .integrate(&Decay, 0.0, &[1.0], 1.0, &[0.0, 0.5, 1.0], |t, _| {
                seen.push(t);
                Ok(())
            })
            .unwrap();
        assert_eq!(seen, vec![0.0, 0.5, 1.0]);
    }
}
