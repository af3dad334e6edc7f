use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

use super::full::MeanFieldState;
use crate::ensemble::EnsembleParams;
use crate::error::{invalid, Error, Result};
use crate::ode::{Dopri5, Tolerance};

/// Reduced mean-field variables `⟨σ⁺⟩ = A e^{i·phase}`, `⟨σᶻ⟩ = z`.
///
/// For the symmetric model `phase` is the common phase φ; for the
/// two-ensemble model it is the spread ζ, with the `+δ` group at `π/4 + ζ`
/// and the `-δ` group at `π/4 - ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub amplitude: f64,
    pub phase: f64,
    pub inversion: f64,
}

impl ReducedState {
    pub fn to_array(self) -> [f64; 3] {
        [self.amplitude, self.phase, self.inversion]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        ReducedState {
            amplitude: y[0],
            phase: y[1],
            inversion: y[2],
        }
    }

    /// Largest violation of `A² ≤ 1/4` and `|z| ≤ 1` (≤ 0 when both hold).
    pub fn bound_excess(&self) -> f64 {
        (self.amplitude * self.amplitude - 0.25).max(self.inversion.abs() - 1.0)
    }
}

/// Symmetric reduction, evaluated in non-divided form:
///
/// ```text
/// dA/dt = A (-2ηz sin 2φ - 2Γ₂A² + NΓ₂zA²)
/// dφ/dt = -2ηzA cos 2φ
/// dz/dt = A² (8η sin 2φ - 4Γ₂(1 + z) - 4Γ₂NA²)
/// ```
pub fn mf_rhs_symmetric(state: ReducedState, params: &EnsembleParams) -> ReducedState {
    let mut dy = [0.0; 3];
    symmetric_rhs_flat(params, &state.to_array(), &mut dy);
    ReducedState::from_slice(&dy)
}

fn symmetric_rhs_flat(params: &EnsembleParams, y: &[f64], dy: &mut [f64]) {
    let (a, phi, z) = (y[0], y[1], y[2]);
    let (eta, gamma, n) = (params.eta, params.gamma2, params.n_spins as f64);
    let a2 = a * a;
    let (sin2, cos2) = (2.0 * phi).sin_cos();
    dy[0] = a * (-2.0 * eta * z * sin2 - 2.0 * gamma * a2 + n * gamma * z * a2);
    dy[1] = -2.0 * eta * z * a * cos2;
    dy[2] = a2 * (8.0 * eta * sin2 - 4.0 * gamma * (1.0 + z) - 4.0 * gamma * n * a2);
}

/// `√(1 - 16η/(NΓ₂))`, or the synchronization-breakdown error past `1/16`.
fn sync_root(n: usize, eta: f64, gamma2: f64) -> Result<f64> {
    if n == 0 || !eta.is_finite() || eta < 0.0 || !(gamma2 > 0.0) {
        return Err(invalid("eta", "need N ≥ 1, η ≥ 0 and Γ₂ > 0"));
    }
    let ratio = eta / (n as f64 * gamma2);
    if ratio > 1.0 / 16.0 {
        return Err(Error::SyncBroken { ratio });
    }
    Ok((1.0 - 16.0 * ratio).max(0.0).sqrt())
}

/// Closed-form synchronized steady state
/// `A² = (4η̃ - 1 + r)/(2N)`, `φ = π/4`, `z = -(1 + r)/2` with
/// `r = √(1 - 16η̃/N)` and `η̃ = η/Γ₂`.
pub fn symmetric_steady_state(n: usize, eta: f64) -> Result<ReducedState> {
    let r = sync_root(n, eta, 1.0)?;
    let a2 = ((4.0 * eta - 1.0 + r) / (2.0 * n as f64)).max(0.0);
    Ok(ReducedState {
        amplitude: a2.sqrt(),
        phase: FRAC_PI_4,
        inversion: -0.5 * (1.0 + r),
    })
}

/// Exact nonzero fixed point of [`mf_rhs_symmetric`] at `φ = π/4` (with
/// `Γ₂ = 1`): `1 + z = [(N + 2) - √((N + 2)² - 16η̃N)]/(2N)` and
/// `NA² = 2η̃ - (1 + z)`.
pub fn symmetric_fixed_point(n: usize, eta: f64) -> Result<ReducedState> {
    sync_root(n, eta, 1.0)?;
    let nf = n as f64;
    let disc = (nf + 2.0) * (nf + 2.0) - 16.0 * eta * nf;
    // rationalized root avoids cancellation at small η
    let excited = 8.0 * eta / ((nf + 2.0) + disc.sqrt());
    let a2 = ((2.0 * eta - excited) / nf).max(0.0);
    Ok(ReducedState {
        amplitude: a2.sqrt(),
        phase: FRAC_PI_4,
        inversion: excited - 1.0,
    })
}

/// Two-ensemble reduction of the full mean-field equations: half the spins
/// at detuning `+δ` with `⟨σ⁺⟩ = A e^{i(π/4 + ζ)}`, the other half at `-δ`
/// with `A e^{i(π/4 - ζ)}`, both with inversion `z`.
///
/// With `u = ((N - 1) cos ζ - i sin ζ)/N`, `c₂ = (N - 1)(1 + z)/(2N)` and
/// `B = 2c₂ + NA²|u|²`, the squeezing phase set to zero and every 1/N
/// finite-size factor kept:
///
/// ```text
/// dA/dt = A[-2ηz(cos²ζ - cos 2ζ/N) - 2Γ₂(c₂/N + A²|u|²) + Γ₂zB(cos²ζ - 1/N)]
/// dζ/dt = δ + ηz(1 - 2/N) sin 2ζ - ½Γ₂zB sin 2ζ
/// dz/dt = 8ηA² Im(e^{i(π/2 + ζ)}u) - 4Γ₂(1 + z)(c₂/N + A²|u|²)
///         - 4Γ₂A²B Re(e^{iζ}u*)
/// ```
pub fn mf_rhs_two_ensemble(state: ReducedState, params: &EnsembleParams, delta: f64) -> ReducedState {
    let mut dy = [0.0; 3];
    two_ensemble_rhs_flat(params, delta, &state.to_array(), &mut dy);
    ReducedState::from_slice(&dy)
}

fn two_ensemble_rhs_flat(params: &EnsembleParams, delta: f64, y: &[f64], dy: &mut [f64]) {
    let (a, zeta, z) = (y[0], y[1], y[2]);
    let (eta, gamma, n) = (params.eta, params.gamma2, params.n_spins as f64);
    let a2 = a * a;
    let (s, c) = zeta.sin_cos();
    let u = Complex64::new((n - 1.0) * c, -s) / n;
    let u2 = u.norm_sqr();
    let c2 = (n - 1.0) * (1.0 + z) / (2.0 * n);
    let loss = c2 / n + a2 * u2;
    let pump = 2.0 * c2 + n * a2 * u2;
    let cos_sq = c * c;
    let sin2 = 2.0 * s * c;
    let coherent_re = cos_sq - (2.0 * zeta).cos() / n;
    let dissipative_re = cos_sq - 1.0 / n;
    dy[0] = a * (-2.0 * eta * z * coherent_re - 2.0 * gamma * loss + gamma * z * pump * dissipative_re);
    dy[1] = delta + eta * z * (1.0 - 2.0 / n) * sin2 - 0.5 * gamma * z * pump * sin2;
    let rotated = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 + zeta) * u;
    let aligned = Complex64::from_polar(1.0, zeta) * u.conj();
    dy[2] = 8.0 * eta * a2 * rotated.im - 4.0 * gamma * (1.0 + z) * loss - 4.0 * gamma * a2 * pump * aligned.re;
}

/// Linear-response steady state of the two-ensemble model:
/// the symmetric closed form with `ζ = (1 + r)/(32η̃²) · N²δ/Γ₂`.
pub fn two_ensemble_steady_state_small_delta(n: usize, eta: f64, delta: f64) -> Result<ReducedState> {
    let sym = symmetric_steady_state(n, eta)?;
    if eta == 0.0 {
        return Err(invalid("eta", "the linear-response phase spread diverges at η = 0"));
    }
    let r = (1.0 - 16.0 * eta / n as f64).max(0.0).sqrt();
    let nf = n as f64;
    Ok(ReducedState {
        phase: (1.0 + r) / (32.0 * eta * eta) * nf * nf * delta,
        ..sym
    })
}

/// Which reduced model to integrate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReducedModel {
    Symmetric,
    TwoEnsemble { delta: f64 },
}

/// Right-hand side of `model` on the flat `[A, phase, z]` layout.
pub(crate) fn reduced_rhs(model: ReducedModel, params: &EnsembleParams, y: &[f64], dy: &mut [f64]) {
    match model {
        ReducedModel::Symmetric => symmetric_rhs_flat(params, y, dy),
        ReducedModel::TwoEnsemble { delta } => two_ensemble_rhs_flat(params, delta, y, dy),
    }
}

/// Reduced-model trajectory sampled at `times`.
pub fn integrate_reduced(
    model: ReducedModel,
    state0: ReducedState,
    params: &EnsembleParams,
    times: &[f64],
    tol: Tolerance,
) -> Result<Vec<ReducedState>> {
    params.validate()?;
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("times", "must be non-decreasing"));
    }
    let mut ode = Dopri5::new(
        |_t, y: &[f64], dy: &mut [f64]| reduced_rhs(model, params, y, dy),
        t0,
        state0.to_array().to_vec(),
        tol,
    )?;
    let mut buf = [0.0; 3];
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        ode.advance_to(t, &mut buf)?;
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        out.push(ReducedState::from_slice(&buf));
    }
    Ok(out)
}

/// Full mean-field state in which every spin carries `A e^{iφ}` and `z`.
pub fn symmetric_full_state(n: usize, state: ReducedState) -> MeanFieldState {
    MeanFieldState::uniform(n, Complex64::from_polar(state.amplitude, state.phase), state.inversion)
}

/// Full mean-field state matching a two-ensemble state; the first half of
/// the spins (the `+δ` group) sits at phase `π/4 + ζ`.
pub fn two_group_full_state(n: usize, state: ReducedState) -> Result<MeanFieldState> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddSpinCount(n));
    }
    let half = n / 2;
    let coherences = (0..n)
        .map(|m| {
            let sign = if m < half { 1.0 } else { -1.0 };
            Complex64::from_polar(state.amplitude, FRAC_PI_4 + sign * state.phase)
        })
        .collect();
    MeanFieldState::new(coherences, vec![state.inversion; n])
}

/// Project a full mean-field state onto the two-ensemble variables:
/// group-averaged `|⟨σ⁺⟩|` and `z`, and half the phase difference between
/// the group-averaged coherences.
pub fn project_two_group(state: &MeanFieldState) -> Result<ReducedState> {
    let n = state.n_spins();
    if n % 2 != 0 {
        return Err(Error::OddSpinCount(n));
    }
    let half = n / 2;
    let mean = |range: std::ops::Range<usize>| -> (Complex64, f64, f64) {
        let len = range.len() as f64;
        let coh: Complex64 = state.coherences[range.clone()].iter().sum::<Complex64>() / len;
        let amp: f64 = state.coherences[range.clone()].iter().map(|c| c.norm()).sum::<f64>() / len;
        let z: f64 = state.inversions[range].iter().sum::<f64>() / len;
        (coh, amp, z)
    };
    let (c_plus, amp_plus, z_plus) = mean(0..half);
    let (c_minus, amp_minus, z_minus) = mean(half..n);
    Ok(ReducedState {
        amplitude: 0.5 * (amp_plus + amp_minus),
        phase: 0.5 * (c_plus * c_minus.conj()).arg(),
        inversion: 0.5 * (z_plus + z_minus),
    })
}
