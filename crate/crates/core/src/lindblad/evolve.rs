use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use super::density::{amplitude_expectation, parity_expectation, DensityMatrix, PureState};
use super::blocks::{BlockGenerator, Parity};
use super::generator::{Generator, Workspace};
use super::states::{prepare_state, StateKind};
use crate::ensemble::{EnsembleParams, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::ode::{Dopri5, Tolerance};

fn flatten(rho: &DensityMatrix) -> Vec<f64> {
    bytemuck::cast_slice::<Complex64, f64>(rho.data()).to_vec()
}

fn unflatten(basis: Basis, y: &[f64]) -> DensityMatrix {
    let data = bytemuck::cast_slice::<f64, Complex64>(y).to_vec();
    DensityMatrix::new(basis, data).expect("state length matches basis")
}

fn solver<'a>(
    generator: &'a Generator,
    rho0: &DensityMatrix,
    t0: f64,
    tol: Tolerance,
) -> Result<Dopri5<impl FnMut(f64, &[f64], &mut [f64]) + 'a>> {
    generator.basis().ensure_same(&rho0.basis())?;
    let mut ws = Workspace::new(generator.dim());
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        generator.apply(
            bytemuck::cast_slice(y),
            bytemuck::cast_slice_mut(dy),
            &mut ws,
        );
    };
    Dopri5::new(rhs, t0, flatten(rho0), tol)
}

/// Integrate the master equation and call `observe(t, ρ(t))` at each of
/// `times` (non-decreasing, starting at the initial time).
pub fn integrate_master_with<O>(
    generator: &Generator,
    rho0: &DensityMatrix,
    times: &[f64],
    tol: Tolerance,
    mut observe: O,
) -> Result<()>
where
    O: FnMut(f64, &DensityMatrix) -> Result<()>,
{
    let Some(&t0) = times.first() else {
        return Ok(());
    };
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("times", "must be non-decreasing"));
    }
    let mut ode = solver(generator, rho0, t0, tol)?;
    let mut buf = vec![0.0; 2 * generator.dim() * generator.dim()];
    for &t in times {
        ode.advance_to(t, &mut buf)?;
        observe(t, &unflatten(generator.basis(), &buf))?;
    }
    Ok(())
}

/// Density-matrix snapshots at every point of `grid`.
pub fn integrate_master(
    generator: &Generator,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    tol: Tolerance,
) -> Result<Vec<DensityMatrix>> {
    grid.validate()?;
    let mut out = Vec::with_capacity(grid.n_points);
    integrate_master_with(generator, rho0, &grid.times(), tol, |_, rho| {
        out.push(rho.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Observables recorded per snapshot, in export column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub t: f64,
    pub fidelity: f64,
    pub trace: f64,
    pub parity: f64,
    pub re_a: f64,
    pub im_a: f64,
}

impl SnapshotRow {
    pub const COLUMNS: [&'static str; 6] = ["t", "fidelity", "trace", "parity", "re_a", "im_a"];

    pub fn measure(t: f64, rho: &DensityMatrix, reference: &PureState) -> Result<Self> {
        let a = amplitude_expectation(rho);
        Ok(SnapshotRow {
            t,
            fidelity: super::density::fidelity_to(rho, reference)?,
            trace: rho.trace().re,
            parity: parity_expectation(rho),
            re_a: a.re,
            im_a: a.im,
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [self.t, self.fidelity, self.trace, self.parity, self.re_a, self.im_a]
    }
}

/// Snapshot observables along a trajectory, with the worst conservation
/// violations seen at any snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<SnapshotRow>,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub max_parity_drift: f64,
    /// Smallest eigenvalue over the snapshots that were spectrally checked.
    pub min_eigenvalue: f64,
}

/// Integrate and record [`SnapshotRow`]s against `reference`, checking the
/// spectrum of every `eigen_stride`-th snapshot (0 disables the check).
pub fn record_trajectory(
    generator: &Generator,
    rho0: &DensityMatrix,
    reference: &PureState,
    times: &[f64],
    tol: Tolerance,
    eigen_stride: usize,
) -> Result<Trajectory> {
    let parity0 = parity_expectation(rho0);
    let mut traj = Trajectory {
        rows: Vec::with_capacity(times.len()),
        max_trace_error: 0.0,
        max_hermiticity_error: 0.0,
        max_parity_drift: 0.0,
        min_eigenvalue: f64::INFINITY,
    };
    let mut index = 0usize;
    integrate_master_with(generator, rho0, times, tol, |t, rho| {
        let row = SnapshotRow::measure(t, rho, reference)?;
        traj.max_trace_error = traj.max_trace_error.max((rho.trace() - 1.0).norm());
        traj.max_hermiticity_error = traj.max_hermiticity_error.max(rho.hermiticity_error());
        traj.max_parity_drift = traj.max_parity_drift.max((row.parity - parity0).abs());
        if eigen_stride > 0 && index % eigen_stride == 0 {
            traj.min_eigenvalue = traj.min_eigenvalue.min(rho.min_eigenvalue());
        }
        index += 1;
        traj.rows.push(row);
        Ok(())
    })?;
    Ok(traj)
}

/// Stopping rule of the steady-state search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyStateOptions {
    /// Give up (and flag the point unconverged) at this time.
    pub t_max: f64,
    /// Spacing of the amplitude samples.
    pub sample_interval: f64,
    /// Length of the trailing window the drift is measured over.
    pub window: f64,
    /// Largest accepted drift rate of `|⟨a⟩|` over the window.
    pub drift_threshold: f64,
    pub atol: f64,
    pub rtol: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions {
            t_max: 2000.0,
            sample_interval: 1.0,
            window: 10.0,
            drift_threshold: 1e-6,
            atol: 1e-9,
            rtol: 1e-7,
        }
    }
}

impl SteadyStateOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.t_max) || !positive(self.sample_interval) || !positive(self.window) {
            return Err(invalid("steady", "t_max, sample_interval and window must be positive"));
        }
        if !positive(self.drift_threshold) || !positive(self.atol) || !(self.rtol >= 0.0) {
            return Err(invalid("steady", "drift_threshold and atol must be positive, rtol non-negative"));
        }
        if self.window > self.t_max {
            return Err(invalid("steady", "window exceeds t_max"));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.atol, self.rtol)
    }
}

/// Outcome of one steady-state search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyAmplitude {
    pub eta: f64,
    /// `|⟨a⟩|` at the final time.
    pub amplitude: f64,
    pub t_final: f64,
    pub converged: bool,
}

/// Largest `|x(t_i) - x(t_j)| / window` within the trailing window.
fn window_drift(samples: &[(f64, f64)], window: f64) -> f64 {
    let t_now = samples.last().map_or(0.0, |s| s.0);
    let recent = samples.iter().rev().take_while(|s| s.0 >= t_now - window - 1e-12);
    let (lo, hi) = recent.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)));
    (hi - lo) / window
}

/// Sample `observable` every `sample_interval` until its trailing-window
/// drift falls below the threshold or `t_max` is reached. Returns the final
/// state, time and whether the drift criterion was met.
fn relax_until_settled<F, O>(ode: &mut Dopri5<F>, y0: &[f64], opts: &SteadyStateOptions, observable: O) -> Result<(Vec<f64>, f64, bool)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: Fn(&[f64]) -> f64,
{
    let mut buf = y0.to_vec();
    let mut samples = vec![(0.0, observable(&buf))];
    let mut step = 0usize;
    loop {
        step += 1;
        let t = (step as f64 * opts.sample_interval).min(opts.t_max);
        ode.advance_to(t, &mut buf)?;
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        samples.push((t, observable(&buf)));
        let settled = t >= opts.window && window_drift(&samples, opts.window) < opts.drift_threshold;
        if settled || t >= opts.t_max {
            return Ok((buf, t, settled));
        }
    }
}

/// Integrate any generator from `rho0` until `|⟨a⟩|` stops drifting.
pub fn relax_to_steady_state(
    generator: &Generator,
    rho0: &DensityMatrix,
    opts: &SteadyStateOptions,
) -> Result<(DensityMatrix, f64, bool)> {
    opts.validate()?;
    let mut ode = solver(generator, rho0, 0.0, opts.tolerance())?;
    let basis = generator.basis();
    let (y, t, settled) = relax_until_settled(&mut ode, &flatten(rho0), opts, |y| {
        amplitude_expectation(&unflatten(basis, y)).norm()
    })?;
    Ok((unflatten(basis, &y), t, settled))
}

fn coherent_start(params: &EnsembleParams) -> Result<DensityMatrix> {
    let alpha = Complex64::from_polar((2.0 * params.eta / params.gamma2).sqrt(), -std::f64::consts::FRAC_PI_4);
    let prepared = prepare_state(
        StateKind::BosonicCoherent {
            re: alpha.re,
            im: alpha.im,
        },
        Basis::Collective {
            n_spins: params.n_spins,
        },
    )?;
    Ok(prepared.density())
}

fn block_solver<'a>(
    block: &'a BlockGenerator,
    y0: Vec<f64>,
    tol: Tolerance,
) -> Result<Dopri5<impl FnMut(f64, &[f64], &mut [f64]) + 'a>> {
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        block.apply(bytemuck::cast_slice(y), bytemuck::cast_slice_mut(dy));
    };
    Dopri5::new(rhs, 0.0, y0, tol)
}

/// Steady amplitude of the collective model started from the bosonic
/// coherent state `α = √(2η/Γ₂) e^{-iπ/4}`.
///
/// Only the block of coherences between even and odd excitation numbers
/// enters `⟨a⟩`, and it evolves on its own, so only that block is
/// integrated.
pub fn steady_amplitude(params: &EnsembleParams, opts: &SteadyStateOptions) -> Result<SteadyAmplitude> {
    Ok(coherence_search(params, opts)?.0)
}

fn coherence_search(params: &EnsembleParams, opts: &SteadyStateOptions) -> Result<(SteadyAmplitude, DensityMatrix, Vec<f64>)> {
    opts.validate()?;
    let rho0 = coherent_start(params)?;
    let block = BlockGenerator::new(params, Parity::Even, Parity::Odd)?;
    let y0: Vec<f64> = bytemuck::cast_slice(&block.extract(&rho0)?).to_vec();
    let mut ode = block_solver(&block, y0.clone(), opts.tolerance())?;
    let (y, t_final, converged) = relax_until_settled(&mut ode, &y0, opts, |y| {
        block.amplitude_from_coherences(bytemuck::cast_slice(y)).norm()
    })?;
    let amplitude = block.amplitude_from_coherences(bytemuck::cast_slice(&y)).norm();
    Ok((
        SteadyAmplitude {
            eta: params.eta,
            amplitude,
            t_final,
            converged,
        },
        rho0,
        y,
    ))
}

/// [`steady_amplitude`] together with the full density matrix at the final
/// time; the population blocks are integrated to the same time.
pub fn steady_state(params: &EnsembleParams, opts: &SteadyStateOptions) -> Result<(SteadyAmplitude, DensityMatrix)> {
    let (result, rho0, coherences) = coherence_search(params, opts)?;
    let d = params.n_spins + 1;
    let mut full = vec![Complex64::new(0.0, 0.0); d * d];
    BlockGenerator::new(params, Parity::Even, Parity::Odd)?.insert(bytemuck::cast_slice(&coherences), &mut full);
    for parity in [Parity::Even, Parity::Odd] {
        let block = BlockGenerator::new(params, parity, parity)?;
        let y0: Vec<f64> = bytemuck::cast_slice(&block.extract(&rho0)?).to_vec();
        let mut ode = block_solver(&block, y0.clone(), opts.tolerance())?;
        let mut y = y0;
        ode.advance_to(result.t_final, &mut y)?;
        block.insert(bytemuck::cast_slice(&y), &mut full);
    }
    let rho = DensityMatrix::new(Basis::Collective { n_spins: params.n_spins }, full)?;
    Ok((result, rho))
}

/// [`steady_amplitude`] over a grid of `η/Γ₂`, evaluated in parallel and
/// returned in grid order.
pub fn steady_amplitude_sweep(n: usize, eta_grid: &[f64], opts: &SteadyStateOptions) -> Result<Vec<SteadyAmplitude>> {
    opts.validate()?;
    eta_grid
        .par_iter()
        .map(|&eta| steady_amplitude(&EnsembleParams::new(n, eta)?, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_measures_trailing_window() {
        let samples: Vec<(f64, f64)> = (0..=20).map(|i| (i as f64, if i < 8 { i as f64 } else { 8.0 })).collect();
        assert_eq!(window_drift(&samples, 10.0), 0.0);
        assert!((window_drift(&samples, 15.0) - 3.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn block_search_matches_full_relaxation() {
        let params = EnsembleParams::new(20, 1.0).unwrap();
        let opts = SteadyStateOptions {
            t_max: 30.0,
            ..Default::default()
        };
        let (fast, rho) = steady_state(&params, &opts).unwrap();
        let generator = crate::lindblad::build_collective_generator(&params, &[]).unwrap();
        let (slow, t_slow, converged) = relax_to_steady_state(&generator, &coherent_start(&params).unwrap(), &opts).unwrap();
        assert_eq!((fast.t_final, fast.converged), (t_slow, converged));
        assert!((fast.amplitude - amplitude_expectation(&slow).norm()).abs() < 1e-7);
        for (a, b) in rho.data().iter().zip(slow.data()) {
            assert!((a - b).norm() < 1e-7);
        }
        assert!(rho.validate(true).is_ok());
    }

    #[test]
    fn zero_drive_has_zero_amplitude() {
        let r = steady_amplitude(&EnsembleParams::new(30, 0.0).unwrap(), &SteadyStateOptions::default()).unwrap();
        assert_eq!(r.amplitude, 0.0);
        assert!(r.converged);
    }
}
