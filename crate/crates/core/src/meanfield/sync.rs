use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reduced::{reduced_rhs, symmetric_steady_state, ReducedModel, ReducedState};
use crate::ensemble::EnsembleParams;
use crate::error::{invalid, Result};
use crate::ode::{Dopri5, Tolerance};

/// Outcome of a synchronization run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SyncStatus {
    Synchronized,
    Unsynchronized,
    Unconverged,
}

impl SyncStatus {
    pub fn label(self) -> &'static str {
        match self {
            SyncStatus::Synchronized => "Synchronized",
            SyncStatus::Unsynchronized => "Unsynchronized",
            SyncStatus::Unconverged => "Unconverged",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        match label {
            "Synchronized" => Some(SyncStatus::Synchronized),
            "Unsynchronized" => Some(SyncStatus::Unsynchronized),
            "Unconverged" => Some(SyncStatus::Unconverged),
            _ => None,
        }
    }
}

/// One point of the phase diagram. `delta_tilde` is `N²δ/Γ₂`; `zeta_ss` is
/// present exactly when the point is synchronized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncPhasePoint {
    pub eta_tilde: f64,
    pub delta_tilde: f64,
    pub zeta_ss: Option<f64>,
    pub status: SyncStatus,
}

/// Initial condition of a synchronization run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncStart {
    /// The zero-detuning synchronized closed form with `ζ = 0`.
    SteadyState,
    /// All spins near the ground state with a small seed coherence.
    Ground,
}

const GROUND_SEED_AMPLITUDE: f64 = 1e-3;

/// Settings of [`classify_sync`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncOptions {
    /// Longest integration time `Γ₂t`.
    pub budget: f64,
    /// Spacing of the `ζ` samples.
    pub sample_interval: f64,
    /// Length of the trailing window over which the drift is measured.
    pub window: f64,
    /// Largest `|dζ/dt|` (range over the window divided by its length)
    /// accepted as settled.
    pub drift_threshold: f64,
    /// `|ζ|` beyond which the groups count as unlocked.
    pub zeta_limit: f64,
    pub atol: f64,
    pub rtol: f64,
    pub start: SyncStart,
    /// Bisection steps used to refine each column's boundary.
    pub bisection_steps: usize,
}

impl Default for SyncOptions {
    fn default() -> Self {
        SyncOptions {
            budget: 1e4,
            sample_interval: 1.0,
            window: 10.0,
            drift_threshold: 1e-8,
            zeta_limit: std::f64::consts::FRAC_PI_2,
            atol: 1e-10,
            rtol: 1e-8,
            start: SyncStart::SteadyState,
            bisection_steps: 8,
        }
    }
}

impl SyncOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.budget,
            self.sample_interval,
            self.window,
            self.drift_threshold,
            self.zeta_limit,
            self.atol,
            self.rtol,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("sync", "budget, intervals, thresholds and tolerances must be positive"));
        }
        if self.window < self.sample_interval {
            return Err(invalid("sync", "window must cover at least one sample interval"));
        }
        Ok(())
    }
}

/// Integrate the two-ensemble model at `(η̃, δ̃ = N²δ/Γ₂)` and classify
/// the long-time behaviour of the phase spread ζ.
///
/// Past `η̃/N = 1/16` no synchronized state exists and the point is
/// `Unsynchronized` without integration. Otherwise the run is
/// `Unsynchronized` once `|ζ|` exceeds the limit, `Synchronized` once the
/// trailing-window drift of ζ falls below the threshold, and `Unconverged`
/// if neither happens within the budget or the integrator fails.
pub fn classify_sync(n: usize, eta_tilde: f64, delta_tilde: f64, opts: &SyncOptions) -> Result<SyncPhasePoint> {
    opts.validate()?;
    if n < 2 || n % 2 != 0 {
        return Err(crate::error::Error::OddSpinCount(n));
    }
    let params = EnsembleParams::new(n, eta_tilde)?;
    let outcome = |status, zeta_ss| SyncPhasePoint {
        eta_tilde,
        delta_tilde,
        zeta_ss,
        status,
    };
    let steady = match symmetric_steady_state(n, eta_tilde) {
        Ok(s) => s,
        Err(_) => return Ok(outcome(SyncStatus::Unsynchronized, None)),
    };
    let start = match opts.start {
        SyncStart::SteadyState => ReducedState { phase: 0.0, ..steady },
        SyncStart::Ground => ReducedState {
            amplitude: GROUND_SEED_AMPLITUDE,
            phase: 0.0,
            inversion: -1.0,
        },
    };
    let delta = delta_tilde / (n as f64 * n as f64);
    let model = ReducedModel::TwoEnsemble { delta };
    let Ok(mut ode) = Dopri5::new(
        |_t, y: &[f64], dy: &mut [f64]| reduced_rhs(model, &params, y, dy),
        0.0,
        start.to_array().to_vec(),
        Tolerance::new(opts.atol, opts.rtol),
    ) else {
        return Ok(outcome(SyncStatus::Unconverged, None));
    };
    let per_window = (opts.window / opts.sample_interval).round().max(1.0) as usize;
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(per_window + 1);
    recent.push_back(start.phase);
    let mut buf = [0.0; 3];
    let mut step = 0usize;
    loop {
        step += 1;
        let t = step as f64 * opts.sample_interval;
        if t > opts.budget {
            return Ok(outcome(SyncStatus::Unconverged, None));
        }
        if ode.advance_to(t, &mut buf).is_err() || buf.iter().any(|v| !v.is_finite()) {
            return Ok(outcome(SyncStatus::Unconverged, None));
        }
        let zeta = buf[1];
        if zeta.abs() > opts.zeta_limit {
            return Ok(outcome(SyncStatus::Unsynchronized, None));
        }
        recent.push_back(zeta);
        if recent.len() > per_window + 1 {
            recent.pop_front();
        }
        if recent.len() == per_window + 1 {
            let (lo, hi) = recent
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(*z), hi.max(*z)));
            if (hi - lo) / opts.window < opts.drift_threshold {
                return Ok(outcome(SyncStatus::Synchronized, Some(zeta)));
            }
        }
    }
}

/// [`classify_sync`] at every `(η̃, δ̃)` pair, η̃-major, in grid order.
pub fn sync_phase_sweep(
    n: usize,
    eta_grid: &[f64],
    delta_grid: &[f64],
    opts: &SyncOptions,
) -> Result<Vec<SyncPhasePoint>> {
    if eta_grid.is_empty() || delta_grid.is_empty() {
        return Err(invalid("grid", "η̃ and δ̃ grids must be non-empty"));
    }
    let pairs: Vec<(f64, f64)> = eta_grid
        .iter()
        .flat_map(|&e| delta_grid.iter().map(move |&d| (e, d)))
        .collect();
    pairs
        .par_iter()
        .map(|&(e, d)| classify_sync(n, e, d, opts))
        .collect()
}

/// Per η̃ column, the largest synchronized δ̃ that lies below a larger
/// unsynchronized δ̃, as `(η̃, δ̃_sync, δ̃_unsync)`. Columns without such a
/// bracket are skipped. Columns come out in order of first appearance.
pub fn boundary_brackets(points: &[SyncPhasePoint]) -> Vec<(f64, f64, f64)> {
    let mut columns: Vec<f64> = Vec::new();
    for p in points {
        if !columns.iter().any(|c| c.to_bits() == p.eta_tilde.to_bits()) {
            columns.push(p.eta_tilde);
        }
    }
    columns
        .into_iter()
        .filter_map(|eta| {
            let column = points.iter().filter(|p| p.eta_tilde.to_bits() == eta.to_bits());
            let best_sync = column
                .clone()
                .filter(|p| p.status == SyncStatus::Synchronized)
                .map(|p| p.delta_tilde)
                .fold(f64::NEG_INFINITY, f64::max);
            if !best_sync.is_finite() {
                return None;
            }
            let first_unsync = column
                .filter(|p| p.status == SyncStatus::Unsynchronized && p.delta_tilde > best_sync)
                .map(|p| p.delta_tilde)
                .fold(f64::INFINITY, f64::min);
            first_unsync.is_finite().then_some((eta, best_sync, first_unsync))
        })
        .collect()
}

/// Bisection between each column's bracket (see [`boundary_brackets`]);
/// returns every classified midpoint, column by column.
///
/// An `Unconverged` midpoint stops the refinement of its column.
pub fn refine_boundary(n: usize, points: &[SyncPhasePoint], opts: &SyncOptions) -> Result<Vec<SyncPhasePoint>> {
    let brackets = boundary_brackets(points);
    let refined: Result<Vec<Vec<SyncPhasePoint>>> = brackets
        .par_iter()
        .map(|&(eta, mut lo, mut hi)| {
            let mut extra = Vec::with_capacity(opts.bisection_steps);
            for _ in 0..opts.bisection_steps {
                let mid = 0.5 * (lo + hi);
                let p = classify_sync(n, eta, mid, opts)?;
                extra.push(p);
                match p.status {
                    SyncStatus::Synchronized => lo = mid,
                    SyncStatus::Unsynchronized => hi = mid,
                    SyncStatus::Unconverged => break,
                }
            }
            Ok(extra)
        })
        .collect();
    Ok(refined?.into_iter().flatten().collect())
}
