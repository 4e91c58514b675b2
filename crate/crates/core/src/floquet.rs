//! Floquet analysis of the undamped block dynamics: period maps, Lyapunov
//! exponents, stability charts and resonance search.

use nalgebra::{Complex, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{block_monodromy_ode, block_propagator, period_map, Block};
use crate::error::{config, domain, Result};
use crate::modulation::{Profile, RectangularModulation, SinusoidalModulation};

/// Traces within this margin of ±2 are reported as stable.
pub const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    pub block: Block,
    pub matrix: Matrix2<f64>,
    pub period: f64,
}

impl Monodromy {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    pub fn exponent(&self) -> Result<LyapunovExponent> {
        lyapunov_exponent(self, self.period)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovExponent {
    /// Growth rate in the real part (≥ 0), rotation rate in the imaginary part.
    pub nu: Complex<f64>,
    pub stable: bool,
}

/// Period map of block `block`; exact product of rotations and kicks for
/// rectangular profiles, ODE integration otherwise.
pub fn monodromy(profile: &Profile, block: Block) -> Result<Monodromy> {
    Ok(Monodromy {
        block,
        matrix: block_propagator(profile, block, profile.period())?,
        period: profile.period(),
    })
}

/// Period map obtained by integrating inside every segment, even where an
/// exact product form exists.
pub fn monodromy_ode(profile: &Profile, block: Block) -> Result<Monodromy> {
    Ok(Monodromy {
        block,
        matrix: block_monodromy_ode(profile, block)?,
        period: profile.period(),
    })
}

pub fn lyapunov_exponent(m: &Monodromy, period: f64) -> Result<LyapunovExponent> {
    if !(period > 0.0 && period.is_finite()) {
        return domain(format!("period must be > 0, got {period}"));
    }
    let tr = m.trace();
    if tr.abs() > 2.0 + MARGINAL_TOL {
        Ok(LyapunovExponent {
            nu: Complex::new((tr.abs() / 2.0).acosh() / period, 0.0),
            stable: false,
        })
    } else {
        Ok(LyapunovExponent {
            nu: Complex::new(0.0, (tr / 2.0).clamp(-1.0, 1.0).acos() / period),
            stable: true,
        })
    }
}

/// Growth rate of an optimally tuned rectangular profile, `|log f_r|/T`.
pub fn meissner_nu(ratio: f64, period: f64) -> f64 {
    ratio.ln().abs() / period
}

/// First-order growth rate at the first sinusoidal resonance, `f0·|h|/4`.
pub fn mathieu_nu(f0: f64, h: f64) -> f64 {
    f0 * h.abs() / 4.0
}

/// Period map of `ÿ + f(t)² y = 0` for `(y, ẏ)`.
///
/// `y` and `ẏ` are continuous across jumps of `f`, so rectangular profiles
/// reduce to a product of two harmonic propagators.
pub fn hill_monodromy(profile: &Profile) -> Result<Monodromy> {
    let harmonic = |f: f64, tau: f64| {
        let (s, c) = (f * tau).sin_cos();
        Matrix2::new(c, s / f, -f * s, c)
    };
    let matrix = match profile {
        Profile::Rectangular(p) => harmonic(p.f2, p.t2) * harmonic(p.f1, p.t1),
        _ => period_map(profile, |f, _g| Matrix2::new(0.0, 1.0, -f * f, 0.0), |_| Matrix2::identity())?,
    };
    // The Hill form is not one of the two blocks; it shares their spectrum.
    Ok(Monodromy {
        block: Block::Minus,
        matrix,
        period: profile.period(),
    })
}

// ---------------------------------------------------------------------------
// Stability charts.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if values.is_empty() {
            return config(format!("axis {name} is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return config(format!("axis {name} has non-finite values"));
        }
        let up = values.windows(2).all(|w| w[0] < w[1]);
        let down = values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return config(format!("axis {name} is not strictly monotone"));
        }
        Ok(Self { name, values })
    }

    /// `n` evenly spaced points from `lo` to `hi` inclusive.
    pub fn linspace(name: impl Into<String>, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let values = match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(name, values)
    }
}

/// Parameter family scanned by a stability chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ChartFamily {
    /// Axes: drive period `T`, modulation depth `h`; carrier `f0` fixed.
    Sinusoidal { f0: f64 },
    /// Axes: ratio `f_r`, segment phase `θ = t1·f1 = t2·f2`; period fixed.
    Rectangular { period: f64 },
}

impl ChartFamily {
    pub fn axis_names(&self) -> (&'static str, &'static str) {
        match self {
            ChartFamily::Sinusoidal { .. } => ("period", "h"),
            ChartFamily::Rectangular { .. } => ("ratio", "phase"),
        }
    }

    pub fn profile(&self, a: f64, b: f64) -> Result<Profile> {
        Ok(match *self {
            ChartFamily::Sinusoidal { f0 } => {
                if !(a > 0.0) {
                    return config(format!("period must be > 0, got {a}"));
                }
                SinusoidalModulation::new(f0, b, std::f64::consts::TAU / a)?.into()
            }
            ChartFamily::Rectangular { period } => {
                RectangularModulation::with_segment_phase(a, b, period)?.into()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityChart {
    pub family: ChartFamily,
    pub axis1: Axis,
    pub axis2: Axis,
    /// `Re ν`, row-major with `axis1` outer.
    pub re_nu: Vec<f64>,
}

impl StabilityChart {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.re_nu[i * self.axis2.values.len() + j]
    }

    /// `(axis1, axis2, re_nu)` rows in output order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n2 = self.axis2.values.len();
        self.re_nu
            .iter()
            .enumerate()
            .map(move |(k, v)| (self.axis1.values[k / n2], self.axis2.values[k % n2], *v))
    }
}

/// Growth rate on the decoherence-free block.
pub fn growth_rate(profile: &Profile) -> Result<f64> {
    Ok(monodromy(profile, Block::Minus)?.exponent()?.nu.re)
}

/// `Re ν` on every grid point; evaluated in parallel, reduced in grid order.
pub fn stability_chart(family: ChartFamily, axis1: Axis, axis2: Axis) -> Result<StabilityChart> {
    let (n1, n2) = (axis1.values.len(), axis2.values.len());
    let re_nu = (0..n1 * n2)
        .into_par_iter()
        .map(|k| growth_rate(&family.profile(axis1.values[k / n2], axis2.values[k % n2])?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(StabilityChart {
        family,
        axis1,
        axis2,
        re_nu,
    })
}

// ---------------------------------------------------------------------------
// Resonance search.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
        }
    }

    pub fn fixed(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, value)
    }

    pub fn is_fixed(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizeFamily {
    /// Parameters `f1`, `ratio`, `t1`, `period`; `t2 = period − t1`, `f2 = ratio·f1`.
    Rectangular,
    /// Parameters `f0`, `h`, `period`.
    Sinusoidal,
}

impl OptimizeFamily {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            OptimizeFamily::Rectangular => &["f1", "ratio", "t1", "period"],
            OptimizeFamily::Sinusoidal => &["f0", "h", "period"],
        }
    }

    pub fn profile(&self, p: &[f64]) -> Result<Profile> {
        Ok(match self {
            OptimizeFamily::Rectangular => {
                let (f1, ratio, t1, period) = (p[0], p[1], p[2], p[3]);
                RectangularModulation::new(f1, ratio * f1, t1, period - t1)?.into()
            }
            OptimizeFamily::Sinusoidal => {
                let (f0, h, period) = (p[0], p[1], p[2]);
                if !(period > 0.0) {
                    return config(format!("period must be > 0, got {period}"));
                }
                SinusoidalModulation::new(f0, h, std::f64::consts::TAU / period)?.into()
            }
        })
    }

    /// Bounds in parameter order, validated by building both corner profiles.
    fn ordered_bounds(&self, bounds: &[Bound]) -> Result<Vec<Bound>> {
        let names = self.parameter_names();
        for b in bounds {
            if !names.contains(&b.name.as_str()) {
                return config(format!("unknown parameter {:?}; expected one of {names:?}", b.name));
            }
        }
        let ordered = names
            .iter()
            .map(|name| {
                let matches: Vec<&Bound> = bounds.iter().filter(|b| b.name == *name).collect();
                match matches.as_slice() {
                    [b] if b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi => Ok((*b).clone()),
                    [b] => config(format!("invalid bounds for {name}: [{}, {}]", b.lo, b.hi)),
                    [] => config(format!("missing bounds for {name}")),
                    _ => config(format!("duplicate bounds for {name}")),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let lo: Vec<f64> = ordered.iter().map(|b| b.lo).collect();
        let hi: Vec<f64> = ordered.iter().map(|b| b.hi).collect();
        self.profile(&lo)?;
        self.profile(&hi)?;
        Ok(ordered)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Total number of growth-rate evaluations.
    pub budget: usize,
    /// Grid points per free parameter in the initial scan; by default about
    /// half the budget goes to the scan.
    pub grid_per_axis: Option<usize>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            budget: 2000,
            grid_per_axis: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub family: OptimizeFamily,
    pub params: Vec<(String, f64)>,
    pub nu: f64,
    pub evaluations: usize,
}

impl OptimizationResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizes `Re ν` over the box `bounds`: a parallel grid scan followed by
/// cyclic golden-section searches along each free coordinate around the best
/// point. Deterministic for a given budget.
pub fn optimize_resonance(
    family: OptimizeFamily,
    bounds: &[Bound],
    options: OptimizeOptions,
) -> Result<OptimizationResult> {
    let bounds = family.ordered_bounds(bounds)?;
    let free: Vec<usize> = (0..bounds.len()).filter(|&i| !bounds[i].is_fixed()).collect();
    let eval = |p: &[f64]| -> f64 {
        // Points outside the family's domain count as non-resonant.
        family
            .profile(p)
            .and_then(|prof| growth_rate(&prof))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut best: Vec<f64> = bounds.iter().map(|b| b.lo).collect();
    let finish = |best: Vec<f64>, nu: f64, evaluations: usize| OptimizationResult {
        family,
        params: bounds.iter().map(|b| b.name.clone()).zip(best).collect(),
        nu,
        evaluations,
    };
    if free.is_empty() {
        let nu = eval(&best);
        return Ok(finish(best, nu, 1));
    }

    let k = free.len() as u32;
    let per_axis = options
        .grid_per_axis
        .unwrap_or_else(|| ((options.budget as f64 / 2.0).powf(1.0 / k as f64).floor() as usize).max(2));
    let grid_size = per_axis.checked_pow(k).unwrap_or(usize::MAX);
    if per_axis < 2 || options.budget < grid_size {
        return config(format!(
            "budget {} is smaller than the scan grid ({per_axis}^{k} = {grid_size} points)",
            options.budget
        ));
    }
    let node = |i: usize, j: usize| {
        let b = &bounds[free[i]];
        b.lo + (b.hi - b.lo) * j as f64 / (per_axis - 1) as f64
    };
    let scores: Vec<f64> = (0..grid_size)
        .into_par_iter()
        .map(|mut idx| {
            let mut p = best.clone();
            for i in 0..free.len() {
                p[free[i]] = node(i, idx % per_axis);
                idx /= per_axis;
            }
            eval(&p)
        })
        .collect();
    let (mut best_idx, mut best_nu) = (0, f64::NEG_INFINITY);
    for (i, v) in scores.iter().enumerate() {
        if *v > best_nu {
            best_idx = i;
            best_nu = *v;
        }
    }
    let mut idx = best_idx;
    for i in 0..free.len() {
        best[free[i]] = node(i, idx % per_axis);
        idx /= per_axis;
    }
    let mut evaluations = grid_size;

    // Brackets start at one grid spacing and shrink with each sweep.
    let mut radius: Vec<f64> = free
        .iter()
        .map(|&p| (bounds[p].hi - bounds[p].lo) / (per_axis - 1) as f64)
        .collect();
    'sweeps: loop {
        let mut progressed = false;
        for (i, &p) in free.iter().enumerate() {
            let b = &bounds[p];
            let mut lo = (best[p] - radius[i]).max(b.lo);
            let mut hi = (best[p] + radius[i]).min(b.hi);
            if hi - lo <= 1e-13 * (b.hi - b.lo).max(f64::MIN_POSITIVE) {
                continue;
            }
            progressed = true;
            let mut probe = best.clone();
            let at = |x: f64, probe: &mut Vec<f64>| {
                probe[p] = x;
                eval(probe)
            };
            if evaluations + 2 > options.budget {
                break 'sweeps;
            }
            let mut x1 = hi - GOLDEN * (hi - lo);
            let mut x2 = lo + GOLDEN * (hi - lo);
            let mut v1 = at(x1, &mut probe);
            let mut v2 = at(x2, &mut probe);
            evaluations += 2;
            while hi - lo > 1e-3 * radius[i] && evaluations < options.budget {
                if v1 >= v2 {
                    hi = x2;
                    x2 = x1;
                    v2 = v1;
                    x1 = hi - GOLDEN * (hi - lo);
                    v1 = at(x1, &mut probe);
                } else {
                    lo = x1;
                    x1 = x2;
                    v1 = v2;
                    x2 = lo + GOLDEN * (hi - lo);
                    v2 = at(x2, &mut probe);
                }
                evaluations += 1;
            }
            let (x, v) = if v1 >= v2 { (x1, v1) } else { (x2, v2) };
            if v > best_nu {
                best[p] = x;
                best_nu = v;
            }
            radius[i] *= 0.25;
        }
        if !progressed || evaluations >= options.budget {
            break;
        }
    }
    Ok(finish(best, best_nu, evaluations))
}
