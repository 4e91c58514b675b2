//! Two-mode Gaussian states and their diagnostics.
//!
//! Quadratures are ordered `[x₊, p₊, x₋, p₋]`, with `a = (x + i p)/√2`, so
//! the vacuum covariance is `½·I₄`. Natural units `ħ = k_B = 1` throughout.
//! Photon numbers are totals over both modes.

use nalgebra::{Matrix2, Matrix4, Vector4};

use crate::error::{domain, Result};

/// Slack allowed below ½ for the smallest symplectic eigenvalue.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Variance of a single vacuum quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// `Ω = diag(J, J)` with `J = [[0, 1], [-1, 0]]`.
pub fn symplectic_form() -> Matrix4<f64> {
    let mut omega = Matrix4::zeros();
    omega[(0, 1)] = 1.0;
    omega[(1, 0)] = -1.0;
    omega[(2, 3)] = 1.0;
    omega[(3, 2)] = -1.0;
    omega
}

/// Partial transposition of the `-k` mode: `p₋ → -p₋`.
pub fn partial_transpose(cov: &Matrix4<f64>) -> Matrix4<f64> {
    let theta = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0));
    theta * cov * theta
}

pub(crate) fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// First and second moments of a two-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl GaussianState {
    /// Builds a state, symmetrizing `cov`. No physicality check is made here;
    /// see [`GaussianState::check_physical`].
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self {
            mean,
            cov: symmetrize(&cov),
        }
    }

    pub fn vacuum() -> Self {
        Self::new(Vector4::zeros(), Matrix4::identity() * VACUUM_VARIANCE)
    }

    /// Two-mode squeezed vacuum with squeezing parameter `r`.
    pub fn two_mode_squeezed_vacuum(r: f64) -> Self {
        let c = (2.0 * r).cosh() / 2.0;
        let s = (2.0 * r).sinh() / 2.0;
        let mut cov = Matrix4::identity() * c;
        cov[(0, 2)] = s;
        cov[(2, 0)] = s;
        cov[(1, 3)] = -s;
        cov[(3, 1)] = -s;
        Self::new(Vector4::zeros(), cov)
    }

    pub fn photon_number(&self) -> f64 {
        photon_number(self)
    }

    /// Fails with [`crate::Error::Unphysical`] when the smallest symplectic
    /// eigenvalue drops below `½ - PHYSICALITY_TOL`.
    pub fn check_physical(&self, t: f64) -> Result<()> {
        let (nu_min, _) = symplectic_eigenvalues(&self.cov)?;
        if nu_min < VACUUM_VARIANCE - PHYSICALITY_TOL {
            return Err(crate::Error::Unphysical { t, nu_min });
        }
        Ok(())
    }
}

/// Coupling to a Markovian bath: rate `gamma` and mean occupation `nbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    pub gamma: f64,
    pub nbar: f64,
}

impl BathParams {
    pub fn new(gamma: f64, nbar: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return domain(format!("bath coupling must be finite and >= 0, got {gamma}"));
        }
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return domain(format!("bath occupation must be finite and >= 0, got {nbar}"));
        }
        Ok(Self { gamma, nbar })
    }

    /// Same bath, different coupling.
    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(gamma, self.nbar)
    }

    /// Variance of a bath-equilibrium quadrature, `n̄ + ½`.
    pub fn thermal_variance(&self) -> f64 {
        self.nbar + VACUUM_VARIANCE
    }
}

/// Thermal state of both modes; also the unmodulated steady state of the bath.
pub fn thermal_state(nbar: f64) -> Result<GaussianState> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return domain(format!("thermal occupation must be finite and >= 0, got {nbar}"));
    }
    Ok(GaussianState::new(
        Vector4::zeros(),
        Matrix4::identity() * (nbar + VACUUM_VARIANCE),
    ))
}

/// Bose-Einstein occupation for `freq_over_temp = ħw/(k_B T)`.
pub fn bath_occupation(freq_over_temp: f64) -> Result<f64> {
    if !(freq_over_temp > 0.0) {
        return domain(format!(
            "frequency/temperature ratio must be > 0, got {freq_over_temp}"
        ));
    }
    Ok(1.0 / freq_over_temp.exp_m1())
}

/// Total photon number `(tr Σ + |x̄|² - 2)/2`.
pub fn photon_number(state: &GaussianState) -> f64 {
    (state.cov.trace() + state.mean.norm_squared() - 2.0) / 2.0
}

fn check_positive_definite(cov: &Matrix4<f64>) -> Result<()> {
    if cov.iter().any(|v| !v.is_finite()) {
        return domain("covariance has non-finite entries");
    }
    if symmetrize(cov).cholesky().is_none() {
        return domain("covariance is not positive definite");
    }
    Ok(())
}

/// Symplectic spectrum `[ν₁, ν₁, ν₂, ν₂]` (ascending) of a positive-definite
/// matrix. `K = M^{1/2} Ω M^{1/2}` is antisymmetric and similar to `Ω M`, so
/// `KᵀK` is symmetric with eigenvalues `ν²`. Only symmetric eigenproblems are
/// solved, which keeps the largest `ν` accurate even when `M` is too
/// ill-conditioned to factor.
fn symplectic_spectrum(m: &Matrix4<f64>) -> [f64; 4] {
    let eig = symmetrize(m).symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let root = eig.eigenvectors * Matrix4::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let k = root * symplectic_form() * root;
    let nu2 = (k.transpose() * k).symmetric_eigenvalues();
    let mut nu = [0.0; 4];
    for (slot, v) in nu.iter_mut().zip(nu2.iter()) {
        *slot = v.max(0.0).sqrt();
    }
    nu.sort_by(|a, b| a.total_cmp(b));
    nu
}

/// The two symplectic eigenvalues `(ν₋, ν₊)`, ascending.
pub fn symplectic_eigenvalues(cov: &Matrix4<f64>) -> Result<(f64, f64)> {
    check_positive_definite(cov)?;
    let m = symplectic_spectrum(cov);
    Ok((0.5 * (m[0] + m[1]), 0.5 * (m[2] + m[3])))
}

/// Symplectic eigenvalues from the two-mode invariants `Δ = det A + det B + 2 det C`
/// and `det Σ`. Used to cross-check [`symplectic_eigenvalues`].
pub fn symplectic_eigenvalues_from_invariants(cov: &Matrix4<f64>) -> Result<(f64, f64)> {
    check_positive_definite(cov)?;
    let a: Matrix2<f64> = cov.fixed_view::<2, 2>(0, 0).into();
    let b: Matrix2<f64> = cov.fixed_view::<2, 2>(2, 2).into();
    let c: Matrix2<f64> = cov.fixed_view::<2, 2>(0, 2).into();
    let delta = a.determinant() + b.determinant() + 2.0 * c.determinant();
    let det = cov.determinant();
    let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
    let big = 0.5 * (delta + disc);
    let small = if big > 0.0 { det / big } else { 0.0 };
    Ok((small.max(0.0).sqrt(), big.sqrt()))
}

/// `max{0, -log₂(2ν̃₋)}` with `ν̃₋` the smallest symplectic eigenvalue of the
/// partially transposed covariance.
pub fn logarithmic_negativity(cov: &Matrix4<f64>) -> Result<f64> {
    let (nu_min, _) = symplectic_eigenvalues(cov)?;
    if nu_min < VACUUM_VARIANCE - PHYSICALITY_TOL {
        return domain(format!(
            "covariance is unphysical (smallest symplectic eigenvalue {nu_min})"
        ));
    }
    let (nu_pt, _) = symplectic_eigenvalues(&partial_transpose(cov))?;
    Ok((-(2.0 * nu_pt).log2()).max(0.0))
}

/// Logarithmic negativity from the precision matrix `Σ⁻¹`.
///
/// The symplectic spectrum of `Σ⁻¹` is the reciprocal of that of `Σ`, so the
/// smallest partially-transposed eigenvalue of `Σ` is the reciprocal of the
/// largest one of `Θ Σ⁻¹ Θ`. Unlike [`logarithmic_negativity`], this stays
/// accurate when `Σ` is strongly squeezed: the largest eigenvalue of a
/// symmetric matrix is resolved to relative precision.
pub fn logarithmic_negativity_from_precision(precision: &Matrix4<f64>) -> f64 {
    let m = symplectic_spectrum(&partial_transpose(precision));
    (0.5 * (m[2] + m[3]) / 2.0).log2().max(0.0)
}

/// `1/(4 √det Σ)`; equals one for pure states.
pub fn purity(cov: &Matrix4<f64>) -> f64 {
    1.0 / (4.0 * cov.determinant().sqrt())
}

/// Entanglement of a maximally entangled symmetric state with `n_total` photons,
/// `log₂(n_total + 1)`.
pub fn max_entanglement_bound(n_total: f64) -> Result<f64> {
    if !(n_total >= 0.0) {
        return domain(format!("photon number must be >= 0, got {n_total}"));
    }
    Ok((n_total + 1.0).log2())
}
