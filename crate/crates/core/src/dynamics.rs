//! Moment equations of the damped, parametrically driven mode pair.
//!
//! In the original frame the mean and covariance obey
//!
//! ```text
//! ẋ = B x,   Σ̇ = B Σ + Σ Bᵀ + D,   B = A(t) − (γ/2) Λ,   D = γ (n̄ + ½) Λ
//! ```
//!
//! with `Λ = [[I, I], [I, I]]` (collective dissipation). The orthogonal
//! symplectic mixing `Γ` splits the pair into a damped symmetric block ("+")
//! and an undamped antisymmetric block ("−", decoherence free).
//!
//! Rectangular profiles are integrated segment by segment; at a jump the
//! state is mapped through `K = exp(κ G)` where `G` is the pump part of the
//! drift and `κ = −½ log(f_after/f_before)`. States at a jump instant are
//! reported after the kick.

use nalgebra::{Matrix2, Matrix4, Vector4};

use crate::error::{domain, Error, Result};
use crate::gaussian::{
    logarithmic_negativity_from_precision, symplectic_eigenvalues, BathParams, GaussianState,
    PHYSICALITY_TOL, VACUUM_VARIANCE,
};
use crate::integrator::{DenseTrajectory, Dopri5, OdeSystem};
use crate::modulation::{Breakpoint, Profile};
use crate::quadrature;

/// Local relative tolerance of the moment integrator.
pub const RTOL: f64 = 1e-12;
/// Local absolute tolerance of the moment integrator.
pub const ATOL: f64 = 1e-14;

/// Decoupled blocks of the mixed frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    /// Symmetric combination; damped by the bath.
    Plus,
    /// Antisymmetric combination; decoherence free.
    Minus,
}

/// Drift `A` for frequency `f` and pump rate `g`:
/// `ẋ₊ = f p₊ + g x₋`, `ṗ₊ = −f x₊ − g p₋`, `ẋ₋ = f p₋ + g x₊`, `ṗ₋ = −f x₋ − g p₊`.
pub fn drift_matrix(f: f64, g: f64) -> Matrix4<f64> {
    Matrix4::new(
        0.0, f, g, 0.0, //
        -f, 0.0, 0.0, -g, //
        g, 0.0, 0.0, f, //
        0.0, -g, -f, 0.0,
    )
}

/// Pump part of the drift, `∂A/∂g`. Squares to the identity.
pub fn pump_generator() -> Matrix4<f64> {
    drift_matrix(0.0, 1.0)
}

/// `exp(κ G)` for the integrated pump weight `κ`.
pub fn kick_matrix(kappa: f64) -> Matrix4<f64> {
    Matrix4::identity() * kappa.cosh() + pump_generator() * kappa.sinh()
}

/// Jump map of a frequency discontinuity.
pub fn jump_map(bp: &Breakpoint) -> Matrix4<f64> {
    kick_matrix(bp.kick_weight())
}

/// Collective dissipation matrix `[[I, I], [I, I]]`.
pub fn dissipation_matrix() -> Matrix4<f64> {
    let mut l = Matrix4::identity();
    l[(0, 2)] = 1.0;
    l[(2, 0)] = 1.0;
    l[(1, 3)] = 1.0;
    l[(3, 1)] = 1.0;
    l
}

/// `Γ = (1/√2)[[I, I], [I, −I]]`; orthogonal, symplectic and an involution.
pub fn mixing_matrix() -> Matrix4<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Matrix4::new(
        s, 0.0, s, 0.0, //
        0.0, s, 0.0, s, //
        s, 0.0, -s, 0.0, //
        0.0, s, 0.0, -s,
    )
}

/// Covariance in the mixed frame, `Γ Σ Γᵀ`.
pub fn to_mixed_frame(m: &Matrix4<f64>) -> Matrix4<f64> {
    let g = mixing_matrix();
    g * m * g.transpose()
}

/// Inverse of [`to_mixed_frame`].
pub fn from_mixed_frame(m: &Matrix4<f64>) -> Matrix4<f64> {
    let g = mixing_matrix();
    g.transpose() * m * g
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAndBath {
    pub mixing: Matrix4<f64>,
    pub dissipation: Matrix4<f64>,
    pub dissipation_mixed: Matrix4<f64>,
    pub sigma_inf: Matrix4<f64>,
}

pub fn frame_and_bath(nbar: f64) -> Result<FrameAndBath> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return domain(format!("bath occupation must be finite and >= 0, got {nbar}"));
    }
    let mixing = mixing_matrix();
    let dissipation = dissipation_matrix();
    let dissipation_mixed = mixing * dissipation * mixing.transpose();
    let expected = Matrix4::from_diagonal(&Vector4::new(2.0, 2.0, 0.0, 0.0));
    debug_assert!((dissipation_mixed - expected).amax() < 1e-14);
    Ok(FrameAndBath {
        mixing,
        dissipation,
        dissipation_mixed,
        sigma_inf: Matrix4::identity() * (nbar + VACUUM_VARIANCE),
    })
}

/// Block generator: `[[g, f], [−f, −g]]` for "+" and `[[−g, f], [−f, g]]` for "−".
pub fn block_generator(block: Block, f: f64, g: f64) -> Matrix2<f64> {
    let s = match block {
        Block::Plus => g,
        Block::Minus => -g,
    };
    Matrix2::new(s, f, -f, -s)
}

/// `(ℳ₊, ℳ₋)`.
pub fn block_drift(f: f64, g: f64) -> (Matrix2<f64>, Matrix2<f64>) {
    (block_generator(Block::Plus, f, g), block_generator(Block::Minus, f, g))
}

fn block_kick(block: Block, kappa: f64) -> Matrix2<f64> {
    let k = match block {
        Block::Plus => kappa,
        Block::Minus => -kappa,
    };
    Matrix2::new(k.exp(), 0.0, 0.0, (-k).exp())
}

fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, s, -s, c)
}

// ---------------------------------------------------------------------------
// Piecewise-smooth time stepping.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub start: f64,
    pub end: f64,
    /// Frequency on a constant segment; `None` for smooth profiles.
    pub frequency: Option<f64>,
    /// Jump applied at `end`, if `end` is a jump instant.
    pub kick: Option<Breakpoint>,
}

/// Times closer than this fraction of a period to a jump count as the jump.
const SNAP: f64 = 1e-10;

pub(crate) fn segments(profile: &Profile, t_end: f64) -> Vec<Segment> {
    let bps = profile.breakpoints();
    if bps.is_empty() {
        return vec![Segment {
            start: 0.0,
            end: t_end,
            frequency: None,
            kick: None,
        }];
    }
    let period = profile.period();
    let snap = SNAP * period;
    let mut out = Vec::new();
    let mut k = 0u64;
    let mut start = 0.0;
    'periods: loop {
        let base = k as f64 * period;
        for (i, bp) in bps.iter().enumerate() {
            let at = if i + 1 == bps.len() {
                (k + 1) as f64 * period
            } else {
                base + bp.offset
            };
            if at <= start {
                continue;
            }
            if at > t_end + snap {
                out.push(Segment {
                    start,
                    end: t_end,
                    frequency: Some(bp.f_before),
                    kick: None,
                });
                break 'periods;
            }
            let end = if (at - t_end).abs() <= snap { t_end } else { at };
            out.push(Segment {
                start,
                end,
                frequency: Some(bp.f_before),
                kick: Some(*bp),
            });
            if end >= t_end {
                break 'periods;
            }
            start = end;
        }
        k += 1;
    }
    out
}

fn coefficients(profile: &Profile, frequency: Option<f64>, t: f64) -> (f64, f64) {
    match frequency {
        Some(f) => (f, 0.0),
        None => (
            profile.frequency_at(t),
            profile.pump_rate_at(t).unwrap_or(0.0),
        ),
    }
}

/// Drives `step` over every segment and `kick` at every jump, handing each
/// segment the samples that fall inside it (samples at a jump go after it).
fn walk<Y, S, K, E>(
    profile: &Profile,
    t_end: f64,
    samples: &[f64],
    mut y: Y,
    mut step: S,
    mut kick: K,
    mut emit_final: E,
) -> Result<Y>
where
    S: FnMut(&Segment, Y, &[f64]) -> Result<Y>,
    K: FnMut(&Breakpoint, Y) -> Y,
    E: FnMut(f64, &Y) -> Result<()>,
{
    let snap = SNAP * profile.period();
    let segs = segments(profile, t_end);
    let mut next = 0;
    for seg in &segs {
        let from = next;
        while next < samples.len() && samples[next] < seg.end - snap {
            next += 1;
        }
        let own: Vec<f64> = samples[from..next].iter().map(|s| s.max(seg.start)).collect();
        y = step(seg, y, &own)?;
        if let Some(bp) = &seg.kick {
            y = kick(bp, y);
        }
    }
    for &s in &samples[next..] {
        emit_final(s, &y)?;
    }
    Ok(y)
}

fn check_samples(samples: &[f64], t_end: f64) -> Result<()> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return domain(format!("end time must be finite and >= 0, got {t_end}"));
    }
    if samples.windows(2).any(|w| !(w[0] <= w[1])) {
        return domain("sample times must be ascending");
    }
    if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
        if *first < 0.0 || *last > t_end * (1.0 + 1e-12) + 1e-12 {
            return domain(format!("sample times must lie in [0, {t_end}]"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Moment integration, block by block in the mixed frame.
//
// The two diagonal blocks of the mixed-frame covariance evolve autonomously,
// so each is integrated as its own small system: covariance, inverse,
// log-determinant and mean propagator. The inter-block covariance and the
// mean follow from the propagators. Carrying the inverse and log-determinant
// matters once the blocks are squeezed: their small eigenvalues are no longer
// resolved by the covariance entries, but the large eigenvalues of the
// inverse resolve exactly those directions.

const BLOCK_COV: usize = 0;
const BLOCK_INV: usize = 3;
const BLOCK_LOGDET: usize = 6;
const BLOCK_PROP: usize = 7;
const BLOCK_DIM: usize = 11;

fn pack_sym2(m: &Matrix2<f64>, out: &mut [f64]) {
    out[0] = m[(0, 0)];
    out[1] = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    out[2] = m[(1, 1)];
}

fn unpack_sym2(v: &[f64]) -> Matrix2<f64> {
    Matrix2::new(v[0], v[1], v[1], v[2])
}

fn max_eigenvalue2(m: &Matrix2<f64>) -> f64 {
    let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    0.5 * (a + d + ((a - d).powi(2) + 4.0 * b * b).sqrt())
}

#[derive(Debug, Clone, Copy)]
struct BlockMoments {
    cov: Matrix2<f64>,
    inv: Matrix2<f64>,
    log_det: f64,
    /// Propagator of the block mean since `t = 0`.
    prop: Matrix2<f64>,
}

impl BlockMoments {
    fn new(cov: Matrix2<f64>) -> Result<Self> {
        let det = cov.determinant();
        if !(cov[(0, 0)] > 0.0 && det > 0.0) {
            return domain("initial covariance is not positive definite");
        }
        let inv = cov.try_inverse().expect("positive definite");
        Ok(Self {
            cov,
            inv,
            log_det: det.ln(),
            prop: Matrix2::identity(),
        })
    }

    fn pack(&self) -> [f64; BLOCK_DIM] {
        let mut y = [0.0; BLOCK_DIM];
        pack_sym2(&self.cov, &mut y[BLOCK_COV..BLOCK_INV]);
        pack_sym2(&self.inv, &mut y[BLOCK_INV..BLOCK_LOGDET]);
        y[BLOCK_LOGDET] = self.log_det;
        y[BLOCK_PROP..].copy_from_slice(self.prop.as_slice());
        y
    }

    fn unpack(y: &[f64]) -> Self {
        Self {
            cov: unpack_sym2(&y[BLOCK_COV..BLOCK_INV]),
            inv: unpack_sym2(&y[BLOCK_INV..BLOCK_LOGDET]),
            log_det: y[BLOCK_LOGDET],
            prop: Matrix2::from_column_slice(&y[BLOCK_PROP..]),
        }
    }

    fn kicked(self, k: &Matrix2<f64>, k_inv: &Matrix2<f64>) -> Self {
        Self {
            cov: k * self.cov * k.transpose(),
            inv: k_inv.transpose() * self.inv * k_inv,
            log_det: self.log_det,
            prop: k * self.prop,
        }
    }

    /// `det` as `λmax(Σ_b)/λmax(Σ_b⁻¹)`: a ratio of two resolved eigenvalues.
    fn det_from_eigenvalues(&self) -> f64 {
        max_eigenvalue2(&self.cov) / max_eigenvalue2(&self.inv)
    }
}

struct BlockSystem<'a> {
    profile: &'a Profile,
    frequency: Option<f64>,
    block: Block,
    damping: f64,
    diffusion: f64,
}

impl OdeSystem for BlockSystem<'_> {
    fn dim(&self) -> usize {
        BLOCK_DIM
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let m = BlockMoments::unpack(y);
        let (f, g) = coefficients(self.profile, self.frequency, t);
        let b = block_generator(self.block, f, g) - Matrix2::identity() * self.damping;
        let d = self.diffusion;
        let dcov = b * m.cov + m.cov * b.transpose() + Matrix2::identity() * d;
        let dinv = -(m.inv * b) - b.transpose() * m.inv - m.inv * m.inv * d;
        pack_sym2(&dcov, &mut dy[BLOCK_COV..BLOCK_INV]);
        pack_sym2(&dinv, &mut dy[BLOCK_INV..BLOCK_LOGDET]);
        dy[BLOCK_LOGDET] = 2.0 * b.trace() + d * m.inv.trace();
        dy[BLOCK_PROP..].copy_from_slice((b * m.prop).as_slice());
    }

    fn error_groups(&self) -> Vec<std::ops::Range<usize>> {
        vec![
            BLOCK_COV..BLOCK_INV,
            BLOCK_INV..BLOCK_LOGDET,
            BLOCK_LOGDET..BLOCK_PROP,
            BLOCK_PROP..BLOCK_DIM,
        ]
    }
}

fn integrate_block(
    cov0: Matrix2<f64>,
    block: Block,
    profile: &Profile,
    bath: &BathParams,
    t_end: f64,
    dt_max: f64,
    samples: &[f64],
) -> Result<Vec<BlockMoments>> {
    let (damping, diffusion) = match block {
        Block::Plus => (bath.gamma, 2.0 * bath.gamma * bath.thermal_variance()),
        Block::Minus => (0.0, 0.0),
    };
    let solver = Dopri5::new(RTOL, ATOL).with_max_step(dt_max);
    let out = std::cell::RefCell::new(Vec::with_capacity(samples.len()));
    walk(
        profile,
        t_end,
        samples,
        BlockMoments::new(cov0)?,
        |seg, m, own| {
            let sys = BlockSystem {
                profile,
                frequency: seg.frequency,
                block,
                damping,
                diffusion,
            };
            let y = solver.integrate(&sys, seg.start, &m.pack(), seg.end, own, |_, y| {
                out.borrow_mut().push(BlockMoments::unpack(y));
                Ok(())
            })?;
            Ok(BlockMoments::unpack(&y))
        },
        |bp, m| {
            let w = bp.kick_weight();
            m.kicked(&block_kick(block, w), &block_kick(block, -w))
        },
        |_, m| {
            out.borrow_mut().push(*m);
            Ok(())
        },
    )?;
    Ok(out.into_inner())
}

/// Logarithmic negativity of `Σ = Γᵀ diag(A, B) Γ` from its blocks.
///
/// The partially transposed invariant is `Δ̃ = det B · tr(A B⁻¹)`, a trace of
/// products of the large eigen-directions, so it stays accurate where the
/// 4×4 route loses everything to cancellation.
fn block_log_negativity(a: &BlockMoments, b: &BlockMoments, det_a: f64, det_b: f64) -> f64 {
    let delta = det_b * (a.cov * b.inv).trace();
    let det = det_a * det_b;
    let nu_plus_sq = 0.5 * (delta + (delta * delta - 4.0 * det).max(0.0).sqrt());
    let nu_minus_sq = det / nu_plus_sq;
    (-0.5 * (4.0 * nu_minus_sq).log2()).max(0.0)
}

/// Derived quantities of one simulated state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// Total photon number over both modes.
    pub photon_number: f64,
    pub log_negativity: f64,
    pub purity: f64,
    /// `log₂(N + 1)`.
    pub max_entanglement: f64,
    pub min_symplectic_eigenvalue: f64,
}

impl Observables {
    /// `E_N / E_max`; NaN when `E_max` vanishes.
    pub fn entanglement_ratio(&self) -> f64 {
        if self.max_entanglement > 0.0 {
            self.log_negativity / self.max_entanglement
        } else {
            f64::NAN
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: GaussianState,
    /// `Σ⁻¹`, integrated alongside `Σ`.
    pub precision: Matrix4<f64>,
    /// `log det Σ`, integrated alongside `Σ`.
    pub log_det: f64,
    pub observables: Observables,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub samples: Vec<Sample>,
}

impl SimulationResult {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

fn block_diag(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(b);
    m
}

/// Initial data in the mixed frame.
struct MixedStart {
    mean_plus: nalgebra::Vector2<f64>,
    mean_minus: nalgebra::Vector2<f64>,
    cross: Matrix2<f64>,
}

fn make_sample(t: f64, start: &MixedStart, a: &BlockMoments, b: &BlockMoments) -> Result<Sample> {
    let cross = a.prop * start.cross * b.prop.transpose();
    let mut mixed = block_diag(&a.cov, &b.cov);
    mixed.fixed_view_mut::<2, 2>(0, 2).copy_from(&cross);
    mixed.fixed_view_mut::<2, 2>(2, 0).copy_from(&cross.transpose());
    let mp = a.prop * start.mean_plus;
    let mm = b.prop * start.mean_minus;
    let mean_mixed = Vector4::new(mp[0], mp[1], mm[0], mm[1]);
    let g = mixing_matrix();
    let state = GaussianState::new(g.transpose() * mean_mixed, from_mixed_frame(&mixed));

    let (precision, log_det, nu_min, log_negativity) = if start.cross == Matrix2::zeros() {
        let det_a = a.det_from_eigenvalues();
        let det_b = b.det_from_eigenvalues();
        let nu_min = (0.5 * a.log_det).exp().min((0.5 * b.log_det).exp());
        (
            from_mixed_frame(&block_diag(&a.inv, &b.inv)),
            a.log_det + b.log_det,
            nu_min,
            block_log_negativity(a, b, det_a, det_b),
        )
    } else {
        let chol = state
            .cov
            .cholesky()
            .ok_or(Error::Unphysical { t, nu_min: f64::NAN })?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let precision = chol.inverse();
        let (nu_min, _) = symplectic_eigenvalues(&state.cov)?;
        (precision, log_det, nu_min, logarithmic_negativity_from_precision(&precision))
    };
    if !(nu_min >= VACUUM_VARIANCE - PHYSICALITY_TOL) {
        return Err(Error::Unphysical { t, nu_min });
    }
    let photon_number = state.photon_number();
    let observables = Observables {
        photon_number,
        log_negativity,
        purity: 0.25 * (-0.5 * log_det).exp(),
        max_entanglement: (photon_number.max(0.0) + 1.0).log2(),
        min_symplectic_eigenvalue: nu_min,
    };
    Ok(Sample {
        t,
        state,
        precision,
        log_det,
        observables,
    })
}

/// Integrates the moment equations from `t = 0` (start of a period) to `t_end`,
/// recording a sample at each of the ascending `samples`.
pub fn integrate_moments(
    state0: &GaussianState,
    profile: &Profile,
    bath: &BathParams,
    t_end: f64,
    dt_max: f64,
    samples: &[f64],
) -> Result<SimulationResult> {
    check_samples(samples, t_end)?;
    if !(dt_max > 0.0) {
        return domain(format!("maximum step must be > 0, got {dt_max}"));
    }
    state0.check_physical(0.0)?;
    let mixed = to_mixed_frame(&state0.cov);
    let mean = mixing_matrix() * state0.mean;
    let start = MixedStart {
        mean_plus: nalgebra::Vector2::new(mean[0], mean[1]),
        mean_minus: nalgebra::Vector2::new(mean[2], mean[3]),
        cross: mixed.fixed_view::<2, 2>(0, 2).into(),
    };
    let block = |off: usize| -> Matrix2<f64> { mixed.fixed_view::<2, 2>(off, off).into() };
    let plus = integrate_block(block(0), Block::Plus, profile, bath, t_end, dt_max, samples)?;
    let minus = integrate_block(block(2), Block::Minus, profile, bath, t_end, dt_max, samples)?;
    let samples = samples
        .iter()
        .zip(plus.iter().zip(&minus))
        .map(|(&t, (a, b))| make_sample(t, &start, a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationResult { samples })
}

/// Samples at `t = k·T/per_period` for `k = 0..=n_periods·per_period`.
pub fn uniform_samples(period: f64, n_periods: usize, per_period: usize) -> Vec<f64> {
    let per = per_period.max(1);
    (0..=n_periods * per)
        .map(|k| {
            if k % per == 0 {
                (k / per) as f64 * period
            } else {
                k as f64 * period / per as f64
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Propagators.

struct LinearSystem<'a, F: Fn(f64, f64) -> Matrix2<f64>> {
    profile: &'a Profile,
    frequency: Option<f64>,
    generator: F,
}

impl<F: Fn(f64, f64) -> Matrix2<f64>> OdeSystem for LinearSystem<'_, F> {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let (f, g) = coefficients(self.profile, self.frequency, t);
        let u = Matrix2::from_column_slice(y);
        let du = (self.generator)(f, g) * u;
        dy.copy_from_slice(du.as_slice());
    }

    fn error_groups(&self) -> Vec<std::ops::Range<usize>> {
        vec![0..4]
    }
}

const PROPAGATOR_RTOL: f64 = 1e-13;
const PROPAGATOR_ATOL: f64 = 1e-15;

/// Solves `U̇ = ℳ_b(t) U`, `U(0) = I`. Rectangular profiles use the exact
/// product of rotations and jump kicks.
pub fn block_propagator(profile: &Profile, block: Block, t: f64) -> Result<Matrix2<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be finite and >= 0, got {t}"));
    }
    if let Profile::Rectangular(_) = profile {
        let mut u = Matrix2::identity();
        for seg in segments(profile, t) {
            let f = seg.frequency.expect("rectangular segments are constant");
            u = rotation(f * (seg.end - seg.start)) * u;
            if let Some(bp) = seg.kick {
                u = block_kick(block, bp.kick_weight()) * u;
            }
        }
        return Ok(u);
    }
    let sys = LinearSystem {
        profile,
        frequency: None,
        generator: move |f, g| block_generator(block, f, g),
    };
    let y = Dopri5::new(PROPAGATOR_RTOL, PROPAGATOR_ATOL).integrate(
        &sys,
        0.0,
        Matrix2::<f64>::identity().as_slice(),
        t,
        &[],
        |_, _| Ok(()),
    )?;
    Ok(Matrix2::from_column_slice(&y))
}

/// Propagator of a generic 2×2 linear system over one period, integrated
/// with the same segment/kick machinery. `kick` maps a jump weight to the
/// jump matrix.
pub(crate) fn period_map<F, K>(profile: &Profile, generator: F, kick: K) -> Result<Matrix2<f64>>
where
    F: Fn(f64, f64) -> Matrix2<f64> + Copy,
    K: Fn(&Breakpoint) -> Matrix2<f64>,
{
    let solver = Dopri5::new(PROPAGATOR_RTOL, PROPAGATOR_ATOL);
    walk(
        profile,
        profile.period(),
        &[],
        Matrix2::identity(),
        |seg, u, _| {
            let sys = LinearSystem {
                profile,
                frequency: seg.frequency,
                generator,
            };
            let y = solver.integrate(&sys, seg.start, u.as_slice(), seg.end, &[], |_, _| Ok(()))?;
            Ok(Matrix2::from_column_slice(&y))
        },
        |bp, u| kick(bp) * u,
        |_, _| Ok(()),
    )
}

/// Block period map computed by ODE integration on every profile,
/// including within rectangular segments (kicks stay analytic).
pub fn block_monodromy_ode(profile: &Profile, block: Block) -> Result<Matrix2<f64>> {
    period_map(
        profile,
        move |f, g| block_generator(block, f, g),
        move |bp| block_kick(block, bp.kick_weight()),
    )
}

/// Full 4×4 propagator of the undamped drift in the original frame.
pub fn propagator(profile: &Profile, t: f64) -> Result<Matrix4<f64>> {
    struct Full<'a> {
        profile: &'a Profile,
        frequency: Option<f64>,
    }
    impl OdeSystem for Full<'_> {
        fn dim(&self) -> usize {
            16
        }
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
            let (f, g) = coefficients(self.profile, self.frequency, t);
            let s = Matrix4::from_column_slice(y);
            dy.copy_from_slice((drift_matrix(f, g) * s).as_slice());
        }
        fn error_groups(&self) -> Vec<std::ops::Range<usize>> {
            vec![0..16]
        }
    }
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be finite and >= 0, got {t}"));
    }
    let solver = Dopri5::new(RTOL, ATOL);
    walk(
        profile,
        t,
        &[],
        Matrix4::identity(),
        |seg, s, _| {
            let sys = Full {
                profile,
                frequency: seg.frequency,
            };
            let y = solver.integrate(&sys, seg.start, s.as_slice(), seg.end, &[], |_, _| Ok(()))?;
            Ok(Matrix4::from_column_slice(&y))
        },
        |bp, s| jump_map(bp) * s,
        |_, _| Ok(()),
    )
}

// ---------------------------------------------------------------------------
// Mixed-frame solution at finite temperature.

/// One period of a block propagator, evaluable at any phase in `[0, T]`.
/// `at(τ)` excludes a kick at `τ = T`; `monodromy` includes it.
enum PeriodPropagator {
    Rectangular {
        block: Block,
        f1: f64,
        f2: f64,
        t1: f64,
        kick_mid: f64,
        monodromy: Matrix2<f64>,
    },
    Smooth {
        trajectory: DenseTrajectory,
        monodromy: Matrix2<f64>,
    },
}

impl PeriodPropagator {
    fn new(profile: &Profile, block: Block) -> Result<Self> {
        match profile {
            Profile::Rectangular(p) => Ok(Self::Rectangular {
                block,
                f1: p.f1,
                f2: p.f2,
                t1: p.t1,
                kick_mid: profile.breakpoints()[0].kick_weight(),
                monodromy: block_propagator(profile, block, p.period())?,
            }),
            _ => {
                let sys = LinearSystem {
                    profile,
                    frequency: None,
                    generator: move |f, g| block_generator(block, f, g),
                };
                let trajectory = Dopri5::new(PROPAGATOR_RTOL, PROPAGATOR_ATOL).solve_dense(
                    &sys,
                    0.0,
                    Matrix2::<f64>::identity().as_slice(),
                    profile.period(),
                )?;
                let monodromy = Matrix2::from_column_slice(trajectory.y_end());
                Ok(Self::Smooth { trajectory, monodromy })
            }
        }
    }

    fn monodromy(&self) -> Matrix2<f64> {
        match self {
            Self::Rectangular { monodromy, .. } | Self::Smooth { monodromy, .. } => *monodromy,
        }
    }

    fn at(&self, tau: f64) -> Matrix2<f64> {
        match self {
            Self::Rectangular {
                block,
                f1,
                f2,
                t1,
                kick_mid,
                ..
            } => {
                if tau < *t1 {
                    rotation(f1 * tau)
                } else {
                    rotation(f2 * (tau - t1)) * block_kick(*block, *kick_mid) * rotation(f1 * t1)
                }
            }
            Self::Smooth { trajectory, .. } => Matrix2::from_column_slice(&trajectory.eval(tau)),
        }
    }

    /// Points where `at` is discontinuous inside `(0, T)`.
    fn discontinuities(&self) -> Vec<f64> {
        match self {
            Self::Rectangular { t1, .. } => vec![*t1],
            Self::Smooth { .. } => Vec::new(),
        }
    }
}

const QUAD_TOL: f64 = 1e-10;

/// `∫_a^b e^{2γσ} U(σ)⁻¹ U(σ)⁻ᵀ dσ`, split at discontinuities of `U`.
fn weighted_gram_integral(prop: &PeriodPropagator, gamma: f64, a: f64, b: f64) -> Result<Matrix2<f64>> {
    let mut cuts = vec![a];
    cuts.extend(prop.discontinuities().into_iter().filter(|c| *c > a && *c < b));
    cuts.push(b);
    let mut total = Matrix2::zeros();
    for w in cuts.windows(2) {
        let v = quadrature::integrate(
            |s| {
                let u_inv = prop.at(s).try_inverse().unwrap_or_else(Matrix2::zeros);
                let w = u_inv * u_inv.transpose() * (2.0 * gamma * s).exp();
                vec![w[(0, 0)], w[(0, 1)], w[(1, 1)]]
            },
            w[0],
            w[1],
            QUAD_TOL,
            QUAD_TOL,
        )?;
        total += Matrix2::new(v[0], v[1], v[1], v[2]);
    }
    Ok(total)
}

/// Particular covariance integral of the damped block,
/// `𝒱(t) = 2γ ∫₀ᵗ e^{−2γ(t−s)} U(t)U(s)⁻¹U(s)⁻ᵀU(t)ᵀ ds`, accumulated
/// period by period with `U(kT + τ) = U(τ) Mᵏ`.
fn particular_integral(prop: &PeriodPropagator, gamma: f64, period: f64, n: u64, tau: f64) -> Result<Matrix2<f64>> {
    if gamma == 0.0 {
        return Ok(Matrix2::zeros());
    }
    let m = prop.monodromy();
    let decay = (-2.0 * gamma * period).exp();
    let q = if n > 0 {
        weighted_gram_integral(prop, gamma, 0.0, period)?
    } else {
        Matrix2::zeros()
    };
    let mut s = Matrix2::zeros();
    for _ in 0..n {
        s = m * (q + s) * m.transpose() * decay;
    }
    let q_tau = if tau > 0.0 {
        weighted_gram_integral(prop, gamma, 0.0, tau)?
    } else {
        Matrix2::zeros()
    };
    let u = prop.at(tau);
    Ok(u * (q_tau + s) * u.transpose() * (2.0 * gamma * (-2.0 * gamma * tau).exp()))
}

fn split_time(t: f64, period: f64) -> (u64, f64) {
    let x = t / period;
    let r = x.round();
    if (x - r).abs() <= SNAP {
        return (r as u64, 0.0);
    }
    let n = x.floor();
    (n as u64, (t - n * period).max(0.0))
}

/// Finite-temperature solution assembled in the mixed frame from the block
/// propagators: homogeneous part `U_th Σ'₀ U_thᵀ` with
/// `U_th = diag(e^{−γt} U₊, U₋)`, plus `diag((n̄+½)·𝒱, 0)`.
pub fn thermal_covariance_solution(
    state0: &GaussianState,
    profile: &Profile,
    bath: &BathParams,
    t: f64,
) -> Result<GaussianState> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be finite and >= 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(*state0);
    }
    let period = profile.period();
    let (n, tau) = split_time(t, period);
    let plus = PeriodPropagator::new(profile, Block::Plus)?;
    let minus = PeriodPropagator::new(profile, Block::Minus)?;
    let at = |p: &PeriodPropagator| -> Matrix2<f64> {
        let mut m = Matrix2::identity();
        let mono = p.monodromy();
        for _ in 0..n {
            m = mono * m;
        }
        p.at(tau) * m
    };
    let u_plus = at(&plus) * (-bath.gamma * t).exp();
    let u_minus = at(&minus);
    let mut u_th = Matrix4::zeros();
    u_th.fixed_view_mut::<2, 2>(0, 0).copy_from(&u_plus);
    u_th.fixed_view_mut::<2, 2>(2, 2).copy_from(&u_minus);

    let gamma_mix = mixing_matrix();
    let mean = gamma_mix.transpose() * (u_th * (gamma_mix * state0.mean));
    let cov0 = to_mixed_frame(&state0.cov);
    let mut cov = u_th * cov0 * u_th.transpose();
    let v = particular_integral(&plus, bath.gamma, period, n, tau)? * bath.thermal_variance();
    let mut block = cov.fixed_view_mut::<2, 2>(0, 0);
    block += v;
    Ok(GaussianState::new(mean, from_mixed_frame(&cov)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{symplectic_form, thermal_state};
    use crate::modulation::{resonant_rectangular, resonant_sinusoidal, SinusoidalModulation};
    use std::f64::consts::PI;

    fn sine() -> Profile {
        resonant_sinusoidal(PI, 0.01).unwrap().into()
    }

    fn rect() -> Profile {
        resonant_rectangular(2.0, 1.0).unwrap().into()
    }

    fn rect_weak() -> Profile {
        resonant_rectangular((PI / 400.0).exp(), 1.0).unwrap().into()
    }

    fn flat() -> Profile {
        SinusoidalModulation::unmodulated(2.0, 1.0).unwrap().into()
    }

    fn mixed_block(m: &Matrix4<f64>, block: Block) -> Matrix2<f64> {
        let off = if block == Block::Plus { 0 } else { 2 };
        to_mixed_frame(m).fixed_view::<2, 2>(off, off).into()
    }

    #[test]
    fn drift_examples() {
        let a = drift_matrix(1.0, 0.0);
        let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
        assert_eq!(a.fixed_view::<2, 2>(0, 0), j);
        assert_eq!(a.fixed_view::<2, 2>(2, 2), j);
        assert_eq!(a.fixed_view::<2, 2>(0, 2), Matrix2::zeros());

        let mut eig: Vec<f64> = drift_matrix(0.0, 1.0).symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (e, x) in eig.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((e - x).abs() < 1e-14);
        }

        let omega = symplectic_form();
        for (f, g) in [(1.0, 0.3), (-2.0, 5.0), (0.7, -0.1)] {
            let a = drift_matrix(f, g);
            assert!((a * omega + omega * a.transpose()).amax() < 1e-15);
        }
    }

    #[test]
    fn frame_and_bath_examples() {
        let fb = frame_and_bath(0.0).unwrap();
        assert_eq!(fb.sigma_inf, Matrix4::identity() * 0.5);
        let expected = Matrix4::from_diagonal(&Vector4::new(2.0, 2.0, 0.0, 0.0));
        assert!((fb.dissipation_mixed - expected).amax() < 1e-15);
        assert!((fb.mixing * fb.mixing - Matrix4::identity()).amax() < 1e-15);
        assert!((fb.mixing * fb.mixing.transpose() - Matrix4::identity()).amax() < 1e-15);
        let omega = symplectic_form();
        assert!((fb.mixing * omega * fb.mixing.transpose() - omega).amax() < 1e-15);
        let eig = fb.dissipation.symmetric_eigenvalues();
        assert_eq!(eig.iter().filter(|v| v.abs() < 1e-12).count(), 2);
        assert!(eig.iter().all(|v| *v > -1e-12));
        assert!(frame_and_bath(-1.0).is_err());
    }

    #[test]
    fn blocks_are_the_mixed_frame_drift() {
        let (f, g) = (1.3, 0.4);
        let a = to_mixed_frame(&drift_matrix(f, g));
        let (mp, mm) = block_drift(f, g);
        assert!((a.fixed_view::<2, 2>(0, 0) - mp).amax() < 1e-15);
        assert!((a.fixed_view::<2, 2>(2, 2) - mm).amax() < 1e-15);
        assert!(a.fixed_view::<2, 2>(0, 2).amax() < 1e-15);
        assert_eq!(mp.trace(), 0.0);
        assert_eq!(block_generator(Block::Plus, f, -g), mm);
    }

    #[test]
    fn segments_follow_the_jumps() {
        let segs = segments(&rect(), 2.0);
        assert_eq!(segs.len(), 4);
        assert!((segs[0].end - 2.0 / 3.0).abs() < 1e-15);
        assert!(segs[0].kick.is_some() && segs[3].kick.is_some());
        assert_eq!(segs[3].end, 2.0);
        let partial = segments(&rect(), 0.5);
        assert_eq!(partial.len(), 1);
        assert!(partial[0].kick.is_none());
    }

    #[test]
    fn unmodulated_thermal_state_is_stationary() {
        let s0 = thermal_state(1.0).unwrap();
        let bath = BathParams::new(0.0, 1.0).unwrap();
        let res = integrate_moments(&s0, &flat(), &bath, 10.0, 0.1, &[0.0, 3.3, 10.0]).unwrap();
        for s in &res.samples {
            assert!((s.state.cov - s0.cov).amax() < 1e-12);
            assert!(s.observables.log_negativity == 0.0);
        }
    }

    #[test]
    fn relaxation_without_modulation() {
        // Vacuum into an n̄ = 1 bath, no drive. Damped block variance relaxes
        // as ½ + (n̄+½ − ½)(1 − e^{−2γt}); the other block stays at vacuum.
        let (gamma, nbar) = (0.3, 1.0);
        let bath = BathParams::new(gamma, nbar).unwrap();
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
        let res = integrate_moments(&GaussianState::vacuum(), &flat(), &bath, 4.0, 0.05, &times).unwrap();
        for s in &res.samples {
            let expected = 0.5 + nbar * (1.0 - (-2.0 * gamma * s.t).exp());
            let plus = mixed_block(&s.state.cov, Block::Plus);
            let minus = mixed_block(&s.state.cov, Block::Minus);
            assert!((plus - Matrix2::identity() * expected).amax() < 1e-9, "{plus}");
            assert!((minus - Matrix2::identity() * 0.5).amax() < 1e-12);
        }
        // Mean of the damped block decays at rate γ.
        let mut s0 = GaussianState::vacuum();
        s0.mean = Vector4::new(1.0, 0.0, 1.0, 0.0);
        let res = integrate_moments(&s0, &flat(), &bath, 2.0, 0.05, &[2.0]).unwrap();
        let m = mixing_matrix() * res.samples[0].state.mean;
        let amp = (m[0] * m[0] + m[1] * m[1]).sqrt();
        assert!((amp - 2f64.sqrt() * (-gamma * 2.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn block_propagator_examples() {
        let f = 2.0;
        let u = block_propagator(&flat(), Block::Plus, 2.0 * PI / f).unwrap();
        assert!((u - Matrix2::identity()).amax() < 1e-10);
        for block in [Block::Plus, Block::Minus] {
            let m = block_propagator(&rect(), block, 1.0).unwrap();
            assert!((m.trace().abs() - 2.5).abs() < 1e-12);
            assert!((m.determinant() - 1.0).abs() < 1e-12);
            let ms = block_propagator(&sine(), block, 7.3).unwrap();
            assert!((ms.determinant() - 1.0).abs() < 1e-9);
        }
        // Hand product: kicks diag(1/s, s) at t1 and diag(s, 1/s) at T around quarter turns.
        let m = block_propagator(&rect(), Block::Plus, 1.0).unwrap();
        assert!((m - Matrix2::new(-2.0, 0.0, 0.0, -0.5)).amax() < 1e-12);
        let ode = block_monodromy_ode(&rect(), Block::Plus).unwrap();
        assert!((ode - m).amax() < 1e-10);
    }

    #[test]
    fn kick_matches_block_kicks() {
        let kappa = 0.37;
        let k = to_mixed_frame(&kick_matrix(kappa));
        assert!((k.fixed_view::<2, 2>(0, 0) - block_kick(Block::Plus, kappa)).amax() < 1e-14);
        assert!((k.fixed_view::<2, 2>(2, 2) - block_kick(Block::Minus, kappa)).amax() < 1e-14);
        assert!((kick_matrix(kappa) * kick_matrix(-kappa) - Matrix4::identity()).amax() < 1e-14);
    }

    #[test]
    fn propagator_is_symplectic_over_long_runs() {
        let omega = symplectic_form();
        for p in [sine(), rect_weak()] {
            let s = propagator(&p, 100.0).unwrap();
            let scale = s.amax().powi(2);
            assert!((s * omega * s.transpose() - omega).amax() < 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn decoherence_free_block_ignores_the_bath() {
        for p in [sine(), rect_weak()] {
            for nbar in [0.0, 2.0] {
                let s0 = thermal_state(nbar).unwrap();
                let blocks: Vec<Matrix2<f64>> = [0.0, 0.1, 1.0]
                    .iter()
                    .map(|&gamma| {
                        let bath = BathParams::new(gamma, nbar).unwrap();
                        let res = integrate_moments(&s0, &p, &bath, 100.0, 0.1, &[100.0]).unwrap();
                        mixed_block(&res.samples[0].state.cov, Block::Minus)
                    })
                    .collect();
                assert!((blocks[0] - blocks[1]).amax() < 1e-8);
                assert!((blocks[0] - blocks[2]).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn thermal_solution_examples() {
        let s0 = thermal_state(1.0).unwrap();
        let bath = BathParams::new(0.05, 1.0).unwrap();
        assert_eq!(thermal_covariance_solution(&s0, &sine(), &bath, 0.0).unwrap(), s0);

        // γ = 0: pure block propagation.
        let cold = BathParams::new(0.0, 1.0).unwrap();
        let s = thermal_covariance_solution(&s0, &sine(), &cold, 3.25).unwrap();
        let up = block_propagator(&sine(), Block::Plus, 3.25).unwrap();
        let expected = up * up.transpose() * 1.5;
        assert!((mixed_block(&s.cov, Block::Plus) - expected).amax() < 1e-9);
    }

    #[test]
    fn thermal_solution_matches_direct_integration() {
        let s0 = thermal_state(1.0).unwrap();
        let bath = BathParams::new(0.05, 1.0).unwrap();
        for (p, t) in [(sine(), 20.0), (rect_weak(), 20.0), (sine(), 7.4), (rect_weak(), 7.8)] {
            let direct = integrate_moments(&s0, &p, &bath, t, 0.1, &[t]).unwrap();
            let direct = direct.samples[0].state.cov;
            let mixed = thermal_covariance_solution(&s0, &p, &bath, t).unwrap().cov;
            let scale = direct.amax();
            for (a, b) in direct.iter().zip(mixed.iter()) {
                assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn frame_consistency_with_displaced_state() {
        let mut s0 = thermal_state(0.5).unwrap();
        s0.mean = Vector4::new(0.3, -0.2, 0.1, 0.4);
        let bath = BathParams::new(0.1, 0.5).unwrap();
        let t = 13.0;
        let direct = integrate_moments(&s0, &sine(), &bath, t, 0.1, &[t]).unwrap();
        let mixed = thermal_covariance_solution(&s0, &sine(), &bath, t).unwrap();
        let d = &direct.samples[0].state;
        assert!((to_mixed_frame(&d.cov) - to_mixed_frame(&mixed.cov)).amax() < 1e-8);
        assert!((d.mean - mixed.mean).amax() < 1e-8);
    }

    #[test]
    fn ramped_jump_converges_to_the_kick() {
        // Replace the jump f1 → f2 at t = 0 by a log-linear ramp of width w
        // (constant pump rate −½ log(f2/f1)/w) and compare with the kick.
        struct Ramp {
            f1: f64,
            f2: f64,
            w: f64,
        }
        impl OdeSystem for Ramp {
            fn dim(&self) -> usize {
                16
            }
            fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
                let r = (self.f2 / self.f1).ln();
                let (f, g) = if t < 0.0 {
                    (self.f1, 0.0)
                } else if t < self.w {
                    (self.f1 * (r * t / self.w).exp(), -0.5 * r / self.w)
                } else {
                    (self.f2, 0.0)
                };
                let s = Matrix4::from_column_slice(y);
                dy.copy_from_slice((drift_matrix(f, g) * s).as_slice());
            }
        }
        let (f1, f2, before, after) = (1.0, 3.0, 0.4, 0.4);
        let rot = |f: f64, t: f64| {
            let mut r = Matrix4::zeros();
            let b = rotation(f * t);
            r.fixed_view_mut::<2, 2>(0, 0).copy_from(&b);
            r.fixed_view_mut::<2, 2>(2, 2).copy_from(&b);
            r
        };
        let bp = Breakpoint {
            offset: 0.0,
            f_before: f1,
            f_after: f2,
        };
        let exact = rot(f2, after) * jump_map(&bp) * rot(f1, before);
        let solver = Dopri5::new(1e-12, 1e-14);
        let errors: Vec<f64> = [0.04, 0.02, 0.01, 0.005]
            .iter()
            .map(|&w| {
                let sys = Ramp { f1, f2, w };
                let y = solver
                    .integrate(&sys, -before, Matrix4::<f64>::identity().as_slice(), w + after, &[], |_, _| Ok(()))
                    .unwrap();
                // Compare against the kick followed by rotation over the same
                // total time after the jump.
                let exact_w = rot(f2, after + w) * jump_map(&bp) * rot(f1, before);
                (Matrix4::from_column_slice(&y) - exact_w).amax()
            })
            .collect();
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(ratio > 1.6 && ratio < 2.5, "{errors:?}");
        }
        assert!(errors[3] < 0.05);
        assert!(exact.amax().is_finite());
    }

    #[test]
    fn block_negativity_matches_the_direct_route() {
        let s = GaussianState::two_mode_squeezed_vacuum(0.7);
        let mixed = to_mixed_frame(&s.cov);
        let blk = |off: usize| BlockMoments::new(mixed.fixed_view::<2, 2>(off, off).into()).unwrap();
        let (a, b) = (blk(0), blk(2));
        let direct = crate::gaussian::logarithmic_negativity(&s.cov).unwrap();
        let en = block_log_negativity(&a, &b, a.det_from_eigenvalues(), b.det_from_eigenvalues());
        assert!((en - direct).abs() < 1e-12, "{en} vs {direct}");
        assert!((direct - 1.4 / std::f64::consts::LN_2).abs() < 1e-12);

        // A generic block-diagonal state.
        let a = BlockMoments::new(Matrix2::new(2.0, 0.3, 0.3, 0.4)).unwrap();
        let b = BlockMoments::new(Matrix2::new(0.7, -0.2, -0.2, 1.1)).unwrap();
        let cov = from_mixed_frame(&block_diag(&a.cov, &b.cov));
        let direct = crate::gaussian::logarithmic_negativity(&cov).unwrap();
        let en = block_log_negativity(&a, &b, a.cov.determinant(), b.cov.determinant());
        assert!(direct > 0.0 && (en - direct).abs() < 1e-12, "{en} vs {direct}");
    }

    #[test]
    fn correlated_initial_state_uses_the_general_route() {
        let s0 = GaussianState::two_mode_squeezed_vacuum(0.3);
        let bath = BathParams::new(0.1, 0.5).unwrap();
        let t = 5.0;
        let r = integrate_moments(&s0, &sine(), &bath, t, 0.1, &[t]).unwrap();
        let mixed = thermal_covariance_solution(&s0, &sine(), &bath, t);
        let cov = &r.samples[0].state.cov;
        if let Ok(m) = mixed {
            assert!((cov - m.cov).amax() < 1e-6 * cov.amax());
        }
        let direct = crate::gaussian::logarithmic_negativity(cov).unwrap();
        assert!((r.samples[0].observables.log_negativity - direct).abs() < 1e-8);
    }
}
