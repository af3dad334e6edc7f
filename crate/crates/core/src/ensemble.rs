//! Shared parameter types: ensemble couplings, detuning models, seeding and
//! time grids.
//!
//! All rates and times are measured in units of the two-excitation loss rate
//! Γ₂: `eta` is η/Γ₂, detunings are δ/Γ₂ and times are Γ₂t.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Size and couplings of the driven-dissipative spin ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleParams {
    pub n_spins: usize,
    /// Squeezing strength η/Γ₂.
    #[serde(default)]
    pub eta: f64,
    /// Two-excitation loss rate; the unit of every other rate.
    #[serde(default = "one")]
    pub gamma2: f64,
    /// Squeezing phase (radians).
    #[serde(default)]
    pub squeezing_phase: f64,
}

fn one() -> f64 {
    1.0
}

impl EnsembleParams {
    pub fn new(n_spins: usize, eta: f64) -> Result<Self> {
        let p = Self {
            n_spins,
            eta,
            gamma2: 1.0,
            squeezing_phase: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_gamma2(mut self, gamma2: f64) -> Self {
        self.gamma2 = gamma2;
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.squeezing_phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(invalid("n_spins", "must be at least 1"));
        }
        if !self.eta.is_finite() {
            return Err(invalid("eta", "must be finite"));
        }
        // gamma2 = 0 is allowed: it switches off the loss channel for
        // free-evolution comparisons.
        if !(self.gamma2 >= 0.0) || !self.gamma2.is_finite() {
            return Err(invalid("gamma2", "must be finite and non-negative"));
        }
        if !self.squeezing_phase.is_finite() {
            return Err(invalid("squeezing_phase", "must be finite"));
        }
        Ok(())
    }
}

/// How per-spin detunings δᵢ are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetuningModel {
    /// Every spin detuned by the same `delta0`.
    Identical { delta0: f64 },
    /// First half at `+delta`, second half at `-delta`.
    TwoGroup { delta: f64 },
    /// I.i.d. normal draws with zero mean and standard deviation `sigma`.
    Gaussian { sigma: f64 },
}

impl DetuningModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DetuningModel::Identical { delta0 } if !delta0.is_finite() => {
                Err(invalid("delta0", "must be finite"))
            }
            DetuningModel::TwoGroup { delta } if !(delta >= 0.0) || !delta.is_finite() => {
                Err(invalid("delta", "must be finite and non-negative"))
            }
            DetuningModel::Gaussian { sigma } if !(sigma >= 0.0) || !sigma.is_finite() => {
                Err(invalid("sigma", "must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// True when every realization is identical, so a single sample suffices.
    pub fn is_deterministic(&self) -> bool {
        match *self {
            DetuningModel::Gaussian { sigma } => sigma == 0.0,
            _ => true,
        }
    }

    /// The width scale δ of the model (|δ₀|, δ or σ).
    pub fn scale(&self) -> f64 {
        match *self {
            DetuningModel::Identical { delta0 } => delta0.abs(),
            DetuningModel::TwoGroup { delta } => delta,
            DetuningModel::Gaussian { sigma } => sigma,
        }
    }
}

/// Generate `n` detunings from `model`.
///
/// Deterministic in `(model, n, seed)`. Gaussian draws come from a ChaCha8
/// stream seeded with `seed`, transformed by the ziggurat sampler of
/// `rand_distr`; the stream is platform independent.
pub fn sample_detunings(model: &DetuningModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    model.validate()?;
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    match *model {
        DetuningModel::Identical { delta0 } => Ok(vec![delta0; n]),
        DetuningModel::TwoGroup { delta } => {
            if n % 2 != 0 {
                return Err(Error::OddSpinCount(n));
            }
            let half = n / 2;
            Ok((0..n).map(|i| if i < half { delta } else { -delta }).collect())
        }
        DetuningModel::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(vec![0.0; n]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sigma * z
                })
                .collect())
        }
    }
}

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed plus the number of disorder realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one_realization")]
    pub realization_count: usize,
}

fn one_realization() -> usize {
    1
}

impl SeedSpec {
    pub fn new(master_seed: u64, realization_count: usize) -> Result<Self> {
        let s = Self {
            master_seed,
            realization_count,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.realization_count == 0 {
            return Err(invalid("realization_count", "must be at least 1"));
        }
        Ok(())
    }

    /// Seed of realization `index`: the SplitMix64 output at counter
    /// position `index + 1` of the stream started at `master_seed`.
    ///
    /// `seed_i = splitmix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15)`
    /// (wrapping arithmetic). Realizations can therefore be generated in any
    /// order and on any worker.
    pub fn realization_seed(&self, index: usize) -> u64 {
        let counter = (index as u64).wrapping_add(1);
        splitmix64(
            self.master_seed
                .wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        )
    }
}

/// Polar and azimuthal angles of a spin coherent state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinCoherentParams {
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
}

impl SpinCoherentParams {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        let p = Self { theta, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..std::f64::consts::PI).contains(&self.theta) {
            return Err(invalid("theta", "must lie in [0, pi)"));
        }
        if !self.phi.is_finite() {
            return Err(invalid("phi", "must be finite"));
        }
        Ok(())
    }

    /// Polar angle whose weak-excitation bosonic amplitude is `alpha_abs`,
    /// using |α| = √N tan(θ/2).
    pub fn theta_for_amplitude(alpha_abs: f64, n_spins: usize) -> f64 {
        2.0 * (alpha_abs / (n_spins as f64).sqrt()).atan()
    }
}

/// Uniform grid of output times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_points: usize) -> Result<Self> {
        let g = Self {
            t_start,
            t_end,
            n_points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start >= 0.0) || !self.t_start.is_finite() {
            return Err(invalid("t_start", "must be finite and non-negative"));
        }
        if !(self.t_end > self.t_start) || !self.t_end.is_finite() {
            return Err(invalid("t_end", "must be finite and exceed t_start"));
        }
        if self.n_points < 2 {
            return Err(invalid("n_points", "must be at least 2"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_points - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.spacing();
        (0..self.n_points)
            .map(|i| {
                if i + 1 == self.n_points {
                    self.t_end
                } else {
                    self.t_start + dt * i as f64
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_zero() {
        let d = sample_detunings(&DetuningModel::Identical { delta0: 0.0 }, 4, 7).unwrap();
        assert_eq!(d, vec![0.0; 4]);
    }

    #[test]
    fn two_group_layout() {
        let d = sample_detunings(&DetuningModel::TwoGroup { delta: 0.5 }, 4, 7).unwrap();
        assert_eq!(d, vec![0.5, 0.5, -0.5, -0.5]);
    }

    #[test]
    fn two_group_rejects_odd() {
        let err = sample_detunings(&DetuningModel::TwoGroup { delta: 0.5 }, 5, 7).unwrap_err();
        assert_eq!(err, Error::OddSpinCount(5));
    }

    #[test]
    fn gaussian_moments() {
        let n = 100_000;
        let d = sample_detunings(&DetuningModel::Gaussian { sigma: 1.0 }, n, 12345).unwrap();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn gaussian_zero_width_is_identical_zero() {
        let g = sample_detunings(&DetuningModel::Gaussian { sigma: 0.0 }, 9, 3).unwrap();
        let i = sample_detunings(&DetuningModel::Identical { delta0: 0.0 }, 9, 3).unwrap();
        assert_eq!(
            g.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            i.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s = SeedSpec::new(42, 10).unwrap();
        let seeds: Vec<u64> = (0..10).map(|i| s.realization_seed(i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        // SplitMix64 reference: first output of the stream seeded with 0.
        assert_eq!(SeedSpec::new(0, 1).unwrap().realization_seed(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn zero_realizations_rejected() {
        assert!(SeedSpec::new(1, 0).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = TimeGrid::new(0.0, 3.0, 4).unwrap();
        assert_eq!(g.times(), vec![0.0, 1.0, 2.0, 3.0]);
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn theta_from_amplitude() {
        let th = SpinCoherentParams::theta_for_amplitude((0.4f64).sqrt(), 8);
        assert!(((th / 2.0).tan() * 8f64.sqrt() - 0.4f64.sqrt()).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn detunings_pure(seed in proptest::prelude::any::<u64>(), n in 1usize..64, sigma in 0.0f64..5.0) {
            let m = DetuningModel::Gaussian { sigma };
            let a = sample_detunings(&m, n, seed).unwrap();
            let b = sample_detunings(&m, n, seed).unwrap();
            proptest::prop_assert_eq!(
                a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
