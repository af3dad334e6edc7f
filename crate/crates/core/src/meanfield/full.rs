use num_complex::Complex64;

use crate::ensemble::EnsembleParams;
use crate::error::{invalid, Error, Result};
use crate::ode::{Dopri5, Tolerance};

/// Product-state mean-field variables: the coherence `⟨σₘ⁺⟩` and inversion
/// `⟨σₘᶻ⟩` of every spin.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub coherences: Vec<Complex64>,
    pub inversions: Vec<f64>,
}

impl MeanFieldState {
    pub fn new(coherences: Vec<Complex64>, inversions: Vec<f64>) -> Result<Self> {
        if coherences.len() != inversions.len() || coherences.is_empty() {
            return Err(invalid("state", "need one coherence and one inversion per spin"));
        }
        Ok(MeanFieldState { coherences, inversions })
    }

    /// Every spin in the ground state.
    pub fn ground(n: usize) -> Self {
        MeanFieldState {
            coherences: vec![Complex64::new(0.0, 0.0); n],
            inversions: vec![-1.0; n],
        }
    }

    /// Every spin with the same coherence and inversion.
    pub fn uniform(n: usize, coherence: Complex64, inversion: f64) -> Self {
        MeanFieldState {
            coherences: vec![coherence; n],
            inversions: vec![inversion; n],
        }
    }

    pub fn n_spins(&self) -> usize {
        self.coherences.len()
    }

    /// Largest `4|⟨σ⁺⟩|² + ⟨σᶻ⟩² - 1` over the spins (≤ 0 inside the Bloch ball).
    pub fn bloch_excess(&self) -> f64 {
        self.coherences
            .iter()
            .zip(&self.inversions)
            .map(|(s, z)| 4.0 * s.norm_sqr() + z * z - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Flat layout used by the integrator: interleaved `(re, im)` coherences
    /// followed by the inversions.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(3 * self.n_spins());
        for c in &self.coherences {
            y.push(c.re);
            y.push(c.im);
        }
        y.extend_from_slice(&self.inversions);
        y
    }

    pub fn from_flat(y: &[f64]) -> Self {
        let n = y.len() / 3;
        MeanFieldState {
            coherences: (0..n).map(|m| Complex64::new(y[2 * m], y[2 * m + 1])).collect(),
            inversions: y[2 * n..].to_vec(),
        }
    }
}

fn check_lengths(n: usize, params: &EnsembleParams, detunings: &[f64]) -> Result<()> {
    if n != params.n_spins || detunings.len() != n {
        return Err(invalid(
            "state",
            format!(
                "{n} spins in the state, {} in params, {} detunings",
                params.n_spins,
                detunings.len()
            ),
        ));
    }
    Ok(())
}

/// Mean-field equations on the flat layout, in O(N) through global sums.
///
/// With `c₁ = (1/N) Σ_{j≠m} ⟨σⱼ⁺⟩` and `c₂ = (1/2N) Σ_{j≠m} (1 + ⟨σⱼᶻ⟩)`:
///
/// ```text
/// d⟨σₘ⁺⟩/dt = iδₘ⟨σₘ⁺⟩ - 2iη e^{iθ} ⟨σₘᶻ⟩ c₁* - 2Γ₂⟨σₘ⁺⟩(c₂/N + |c₁|²)
///             + Γ₂⟨σₘᶻ⟩ c₁ (2c₂ + N|c₁|²)
/// d⟨σₘᶻ⟩/dt = 8η Im(e^{-iθ}⟨σₘ⁺⟩c₁) - 4Γ₂(1 + ⟨σₘᶻ⟩)(c₂/N + |c₁|²)
///             - 4Γ₂ Re[⟨σₘ⁺⟩ c₁* (2c₂ + N|c₁|²)]
/// ```
///
/// where θ is the squeezing phase.
pub(crate) fn full_rhs_flat(params: &EnsembleParams, detunings: &[f64], y: &[f64], dy: &mut [f64]) {
    let n = detunings.len();
    let nf = n as f64;
    let (eta, gamma) = (params.eta, params.gamma2);
    let squeeze = Complex64::from_polar(1.0, params.squeezing_phase);
    let (coh, inv) = y.split_at(2 * n);
    let mut total_coh = Complex64::new(0.0, 0.0);
    for m in 0..n {
        total_coh += Complex64::new(coh[2 * m], coh[2 * m + 1]);
    }
    let total_exc: f64 = inv.iter().map(|z| 1.0 + z).sum();
    let (dcoh, dinv) = dy.split_at_mut(2 * n);
    for m in 0..n {
        let s = Complex64::new(coh[2 * m], coh[2 * m + 1]);
        let z = inv[m];
        let c1 = (total_coh - s) / nf;
        let c2 = (total_exc - (1.0 + z)) / (2.0 * nf);
        let c1_sq = c1.norm_sqr();
        let loss = c2 / nf + c1_sq;
        let pump = 2.0 * c2 + nf * c1_sq;
        let ds = Complex64::new(0.0, detunings[m]) * s - Complex64::new(0.0, 2.0 * eta) * squeeze * z * c1.conj()
            - 2.0 * gamma * s * loss
            + gamma * z * c1 * pump;
        let dz = 8.0 * eta * (squeeze.conj() * s * c1).im
            - 4.0 * gamma * (1.0 + z) * loss
            - 4.0 * gamma * (s * c1.conj() * pump).re;
        dcoh[2 * m] = ds.re;
        dcoh[2 * m + 1] = ds.im;
        dinv[m] = dz;
    }
}

/// Time derivative of the full mean-field state.
pub fn mf_rhs_full(state: &MeanFieldState, params: &EnsembleParams, detunings: &[f64]) -> Result<MeanFieldState> {
    check_lengths(state.n_spins(), params, detunings)?;
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    full_rhs_flat(params, detunings, &y, &mut dy);
    Ok(MeanFieldState::from_flat(&dy))
}

/// Full mean-field trajectory sampled at `times` (starting at the initial time).
pub fn integrate_full(
    state0: &MeanFieldState,
    params: &EnsembleParams,
    detunings: &[f64],
    times: &[f64],
    tol: Tolerance,
) -> Result<Vec<MeanFieldState>> {
    params.validate()?;
    check_lengths(state0.n_spins(), params, detunings)?;
    let Some(&t0) = times.first() else {
        return Ok(Vec::new());
    };
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("times", "must be non-decreasing"));
    }
    let mut ode = Dopri5::new(
        |_t, y: &[f64], dy: &mut [f64]| full_rhs_flat(params, detunings, y, dy),
        t0,
        state0.to_flat(),
        tol,
    )?;
    let mut buf = vec![0.0; 3 * state0.n_spins()];
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        ode.advance_to(t, &mut buf)?;
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        out.push(MeanFieldState::from_flat(&buf));
    }
    Ok(out)
}
