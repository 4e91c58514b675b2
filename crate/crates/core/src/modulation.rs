//! Periodic permittivity-modulation profiles.
//!
//! A profile provides the instantaneous mode frequency `f(t)` and the pump
//! rate `g(t) = -½ d(log f)/dt`. Rectangular profiles have jumps in `f`; at a
//! jump the pump rate is a delta kick of weight `-½ log(f_after/f_before)`,
//! which the dynamics consume analytically (see [`Breakpoint`]).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Piecewise-constant frequency: `f1` for `t1`, then `f2` for `t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangularModulation {
    pub f1: f64,
    pub f2: f64,
    pub t1: f64,
    pub t2: f64,
}

impl RectangularModulation {
    pub fn new(f1: f64, f2: f64, t1: f64, t2: f64) -> Result<Self> {
        for (name, v) in [("f1", f1), ("f2", f2), ("t1", t1), ("t2", t2)] {
            if !(v > 0.0 && v.is_finite()) {
                return config(format!("rectangular modulation needs {name} > 0, got {v}"));
            }
        }
        Ok(Self { f1, f2, t1, t2 })
    }

    /// Profile with equal rotation angle `phase = t1·f1 = t2·f2` in both segments.
    pub fn with_segment_phase(ratio: f64, phase: f64, period: f64) -> Result<Self> {
        if !(ratio > 0.0 && phase > 0.0 && period > 0.0) {
            return config(format!(
                "need ratio, phase and period > 0, got {ratio}, {phase}, {period}"
            ));
        }
        let f1 = phase * (1.0 + 1.0 / ratio) / period;
        let f2 = ratio * f1;
        Self::new(f1, f2, phase / f1, phase / f2)
    }

    pub fn period(&self) -> f64 {
        self.t1 + self.t2
    }

    /// `f_r = f2/f1`.
    pub fn ratio(&self) -> f64 {
        self.f2 / self.f1
    }
}

/// `f(t)² = f0²·(1 - h·sin(Ω t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidalModulation {
    pub f0: f64,
    pub h: f64,
    pub omega: f64,
}

impl SinusoidalModulation {
    pub fn new(f0: f64, h: f64, omega: f64) -> Result<Self> {
        if !(f0 > 0.0 && f0.is_finite()) {
            return config(format!("sinusoidal modulation needs f0 > 0, got {f0}"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return config(format!("sinusoidal modulation needs omega > 0, got {omega}"));
        }
        if !(h.abs() < 1.0) {
            return domain(format!("|h| must be < 1 so that f² stays positive, got {h}"));
        }
        Ok(Self { f0, h, omega })
    }

    /// Unmodulated carrier with an arbitrary bookkeeping period.
    pub fn unmodulated(f0: f64, period: f64) -> Result<Self> {
        Self::new(f0, 0.0, TAU / period)
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }
}

/// Frequency samples on a uniform grid over one period, joined by a periodic
/// cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledModulation {
    period: f64,
    samples: Vec<f64>,
    second_derivs: Vec<f64>,
}

impl SampledModulation {
    /// `samples[k]` is `f(k·T/N)` for `k = 0..N`; the point at `T` is implied
    /// by periodicity and must not be repeated.
    pub fn new(period: f64, samples: Vec<f64>) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return config(format!("sampled modulation needs period > 0, got {period}"));
        }
        if samples.len() < 3 {
            return config("sampled modulation needs at least 3 samples");
        }
        if let Some(bad) = samples.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return config(format!("frequency samples must be > 0, got {bad}"));
        }
        let dx = period / samples.len() as f64;
        let second_derivs = periodic_spline_second_derivatives(&samples, dx);
        let profile = Self {
            period,
            samples,
            second_derivs,
        };
        let n_check = 16 * profile.samples.len();
        for k in 0..n_check {
            let f = profile.eval(period * k as f64 / n_check as f64);
            if f <= 0.0 {
                return config("cubic interpolant of the samples is not positive");
            }
        }
        Ok(profile)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.samples.len();
        let dx = self.period / n as f64;
        let tau = t.rem_euclid(self.period);
        let i = ((tau / dx).floor() as usize).min(n - 1);
        let j = (i + 1) % n;
        let a = (dx * (i + 1) as f64 - tau) / dx;
        let b = 1.0 - a;
        let (yi, yj) = (self.samples[i], self.samples[j]);
        let (mi, mj) = (self.second_derivs[i], self.second_derivs[j]);
        a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * dx * dx / 6.0
    }
}

/// Second derivatives of the periodic cubic spline on a uniform grid:
/// `M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]) / dx²`, indices mod n.
/// Cyclic tridiagonal solve by Sherman-Morrison.
fn periodic_spline_second_derivatives(y: &[f64], dx: f64) -> Vec<f64> {
    let n = y.len();
    let rhs: Vec<f64> = (0..n)
        .map(|i| 6.0 * (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n]) / (dx * dx))
        .collect();
    // A = T + u vᵀ with corners folded into u = (γ, 0, .., 1), v = (1, 0, .., 1/γ).
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let solve = |d: &[f64], r: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        c[0] = 1.0 / d[0];
        x[0] = r[0] / d[0];
        for i in 1..n {
            let m = d[i] - c[i - 1];
            c[i] = 1.0 / m;
            x[i] = (r[i] - x[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let x = solve(&diag, &rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let z = solve(&diag, &u);
    let factor = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

/// A discontinuity of `f` inside one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoint {
    /// Offset in `(0, T]` from the start of the period.
    pub offset: f64,
    pub f_before: f64,
    pub f_after: f64,
}

impl Breakpoint {
    /// Integrated pump rate across the jump, `-½ log(f_after/f_before)`.
    pub fn kick_weight(&self) -> f64 {
        -0.5 * (self.f_after / self.f_before).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Rectangular(RectangularModulation),
    Sinusoidal(SinusoidalModulation),
    Sampled(SampledModulation),
}

impl From<RectangularModulation> for Profile {
    fn from(p: RectangularModulation) -> Self {
        Profile::Rectangular(p)
    }
}

impl From<SinusoidalModulation> for Profile {
    fn from(p: SinusoidalModulation) -> Self {
        Profile::Sinusoidal(p)
    }
}

impl From<SampledModulation> for Profile {
    fn from(p: SampledModulation) -> Self {
        Profile::Sampled(p)
    }
}

impl Profile {
    pub fn period(&self) -> f64 {
        match self {
            Profile::Rectangular(p) => p.period(),
            Profile::Sinusoidal(p) => p.period(),
            Profile::Sampled(p) => p.period(),
        }
    }

    /// `f(t mod T)`; right-continuous at rectangular jumps.
    pub fn frequency_at(&self, t: f64) -> f64 {
        match self {
            Profile::Rectangular(p) => {
                if t.rem_euclid(p.period()) < p.t1 {
                    p.f1
                } else {
                    p.f2
                }
            }
            Profile::Sinusoidal(p) => p.f0 * (1.0 - p.h * (p.omega * t).sin()).sqrt(),
            Profile::Sampled(p) => p.eval(t),
        }
    }

    /// `g(t) = -½ d(log f)/dt`.
    pub fn pump_rate_at(&self, t: f64) -> Result<f64> {
        match self {
            Profile::Rectangular(p) => {
                let tau = t.rem_euclid(p.period());
                if tau == 0.0 || tau == p.t1 {
                    let bp = self
                        .breakpoints()
                        .into_iter()
                        .find(|b| (b.offset.rem_euclid(p.period())) == tau)
                        .expect("jump instant has a breakpoint");
                    return Err(Error::ImpulsivePump {
                        t,
                        weight: bp.kick_weight(),
                    });
                }
                Ok(0.0)
            }
            Profile::Sinusoidal(p) => {
                let phase = p.omega * t;
                Ok(p.h * p.omega * phase.cos() / (4.0 * (1.0 - p.h * phase.sin())))
            }
            Profile::Sampled(p) => {
                let dt = 1e-6 * p.period();
                Ok(-0.25 * (p.eval(t + dt).ln() - p.eval(t - dt).ln()) / dt)
            }
        }
    }

    /// Jumps within one period, ordered by offset. Empty for smooth profiles.
    pub fn breakpoints(&self) -> Vec<Breakpoint> {
        match self {
            Profile::Rectangular(p) => vec![
                Breakpoint {
                    offset: p.t1,
                    f_before: p.f1,
                    f_after: p.f2,
                },
                Breakpoint {
                    offset: p.period(),
                    f_before: p.f2,
                    f_after: p.f1,
                },
            ],
            _ => Vec::new(),
        }
    }

    /// Largest time step that keeps smooth pieces well resolved.
    pub(crate) fn max_frequency(&self) -> f64 {
        match self {
            Profile::Rectangular(p) => p.f1.max(p.f2),
            Profile::Sinusoidal(p) => p.f0 * (1.0 + p.h.abs()).sqrt(),
            Profile::Sampled(p) => p.samples.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// Rectangular profile maximizing the Floquet exponent for ratio `f_r`:
/// `t1·f1 = t2·f2 = π/2` with `t1 + t2 = period`.
pub fn resonant_rectangular(ratio: f64, period: f64) -> Result<RectangularModulation> {
    if !(ratio > 0.0 && ratio.is_finite()) || !(period > 0.0 && period.is_finite()) {
        return config(format!(
            "need ratio > 0 and period > 0, got {ratio} and {period}"
        ));
    }
    if ratio == 1.0 {
        return config("ratio 1 is no modulation at all");
    }
    RectangularModulation::with_segment_phase(ratio, FRAC_PI_2, period)
}

/// Sinusoidal profile at the first parametric resonance, `T = π/f0`.
pub fn resonant_sinusoidal(f0: f64, h: f64) -> Result<SinusoidalModulation> {
    if !(f0 > 0.0) {
        return config(format!("need f0 > 0, got {f0}"));
    }
    if !(h != 0.0 && h.abs() < 1.0) {
        return domain(format!("need 0 < |h| < 1, got {h}"));
    }
    SinusoidalModulation::new(f0, h, 2.0 * f0)
}

/// First-resonance drive period for carrier `f0`.
pub fn first_resonance_period(f0: f64) -> f64 {
    PI / f0
}
