//! Cross-module properties of the simulated and closed-form observables.

use std::f64::consts::PI;

use parametric_ring::dynamics::{integrate_moments, uniform_samples, SimulationResult};
use parametric_ring::floquet::growth_rate;
use parametric_ring::gaussian::{thermal_state, BathParams};
use parametric_ring::modulation::{resonant_rectangular, resonant_sinusoidal, Profile};
use parametric_ring::observables::{logneg_closed, photon_number_closed, ClosedFormParams};

fn rectangular() -> Profile {
    resonant_rectangular((PI / 400.0).exp(), 1.0).unwrap().into()
}

fn sinusoidal() -> Profile {
    resonant_sinusoidal(PI, 0.01).unwrap().into()
}

fn run(profile: &Profile, gamma: f64, nbar: f64, n_periods: usize) -> SimulationResult {
    let bath = BathParams::new(gamma, nbar).unwrap();
    let t_end = n_periods as f64 * profile.period();
    let samples = uniform_samples(profile.period(), n_periods, 1);
    integrate_moments(&thermal_state(nbar).unwrap(), profile, &bath, t_end, 0.25, &samples).unwrap()
}

/// Largest violation score over `n ≤ 2000`: ≤ 1 when ⟨N+1⟩ is within 1e-4
/// relative and `E_N` within 1e-4 relative or 1e-6 absolute.
fn oracle_score(profile: &Profile, gamma: f64, nbar: f64) -> f64 {
    let params = ClosedFormParams::for_profile(profile, &BathParams::new(gamma, nbar).unwrap()).unwrap();
    let mut score = 0.0f64;
    for (k, s) in run(profile, gamma, nbar, 2000).samples.iter().enumerate() {
        let n = k as u64;
        let closed_n = photon_number_closed(&params, n);
        score = score.max(((s.observables.photon_number + 1.0) - closed_n).abs() / closed_n / 1e-4);
        let closed_en = logneg_closed(&params, n).unwrap();
        let diff = (s.observables.log_negativity - closed_en).abs();
        score = score.max((diff / (1e-4 * closed_en.abs())).min(diff / 1e-6));
    }
    score
}

fn oracle_grid(profile: &Profile) {
    let mut failures = Vec::new();
    for gamma in [0.0, 0.02, 0.05, 0.1] {
        for nbar in [0.0, 0.5, 1.0, 3.0] {
            let score = oracle_score(profile, gamma, nbar);
            if !(score <= 1.0) {
                failures.push((gamma, nbar, score));
            }
        }
    }
    assert!(failures.is_empty(), "(gamma, nbar, score) over tolerance: {failures:?}");
}

#[test]
fn rectangular_closed_forms_match_integration() {
    oracle_grid(&rectangular());
}

#[test]
fn sinusoidal_closed_forms_match_integration() {
    oracle_grid(&sinusoidal());
}

#[test]
fn entanglement_depends_weakly_on_the_shape() {
    let (rect, sine) = (rectangular(), sinusoidal());
    let nu_r = growth_rate(&rect).unwrap();
    let nu_s = growth_rate(&sine).unwrap();
    assert!((nu_r - nu_s).abs() < 1e-3 * nu_r, "{nu_r} vs {nu_s}");
    for (gamma, nbar) in [(0.0, 0.0), (0.02, 1.0), (0.05, 3.0)] {
        let a = run(&rect, gamma, nbar, 2000);
        let b = run(&sine, gamma, nbar, 2000);
        let mut worst = 0.0f64;
        for (x, y) in a.samples.iter().zip(&b.samples) {
            let (ex, ey) = (x.observables.log_negativity, y.observables.log_negativity);
            if ex > 0.0 && ey > 0.0 {
                worst = worst.max((ex - ey).abs() / ex.max(ey));
            }
        }
        assert!(worst <= 0.02, "gamma={gamma} nbar={nbar}: {worst}");
    }
}
