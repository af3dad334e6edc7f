use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{ln_binomial, ln_factorial, Basis};
use super::density::{DensityMatrix, PureState};
use crate::analytic::{cat_norm, CatParity};
use crate::ensemble::SpinCoherentParams;
use crate::error::{invalid, Error, Result};

/// Largest out-of-sector weight tolerated when a state is written into a
/// parity sector of the full basis.
const SECTOR_LEAK_TOL: f64 = 1e-12;

/// Initial states that can be prepared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateKind {
    Css { theta: f64, phi: f64 },
    Cat { theta: f64, phi: f64, parity: CatParity },
    /// Fock-space coherent state `|α⟩` truncated to `N + 1` levels.
    BosonicCoherent { re: f64, im: f64 },
}

/// A prepared pure state with an optional truncation warning.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedState {
    pub psi: PureState,
    pub warning: Option<String>,
}

impl PreparedState {
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(&self.psi)
    }
}

/// Per-excitation amplitude `cos^{N-k}(θ/2) sin^k(θ/2) e^{ikφ}` of one
/// product-state configuration with `k` excited spins.
fn css_config_amplitude(state: &SpinCoherentParams, n: usize, k: u32) -> Complex64 {
    let c = (0.5 * state.theta).cos();
    let s = (0.5 * state.theta).sin();
    let mag = c.powi((n - k as usize) as i32) * s.powi(k as i32);
    Complex64::from_polar(mag, k as f64 * state.phi)
}

/// Amplitude of the Dicke state `|k⟩` in a spin coherent state.
fn css_dicke_amplitude(state: &SpinCoherentParams, n: usize, k: usize) -> Complex64 {
    let c = (0.5 * state.theta).cos();
    let s = (0.5 * state.theta).sin();
    let ln_mag = 0.5 * ln_binomial(n, k) + ln_pow(c, n - k) + ln_pow(s, k);
    Complex64::from_polar(ln_mag.exp(), k as f64 * state.phi)
}

fn ln_pow(x: f64, p: usize) -> f64 {
    if p == 0 {
        0.0
    } else {
        p as f64 * x.ln()
    }
}

/// Amplitude of configuration weight `k` in `|θ,φ⟩ ± |θ,φ+π⟩`, normalized.
fn cat_factor(k: u32, parity: CatParity, norm: f64) -> f64 {
    let branch = if k % 2 == 0 { 1.0 } else { -1.0 };
    (1.0 + parity.sign() * branch) / norm
}

/// Build a pure state in `basis`.
pub fn prepare_state(kind: StateKind, basis: Basis) -> Result<PreparedState> {
    let n = basis.n_spins();
    if n == 0 {
        return Err(invalid("n_spins", "must be at least 1"));
    }
    let mut warning = None;
    let amplitudes: Vec<Complex64> = match (kind, basis) {
        (StateKind::Css { theta, phi }, _) | (StateKind::Cat { theta, phi, .. }, _) => {
            let state = SpinCoherentParams::new(theta, phi)?;
            let cat = match kind {
                StateKind::Cat { parity, .. } => Some((parity, cat_norm(theta, n, parity)?)),
                _ => None,
            };
            let weight = |k: u32| cat.map_or(1.0, |(p, norm)| cat_factor(k, p, norm));
            match basis {
                Basis::FullProduct { n_spins, .. } => {
                    let all: Vec<u32> = (0..1u32 << n_spins).collect();
                    let kept = basis.product_states();
                    let leaked: f64 = all
                        .iter()
                        .filter(|s| !basis_contains(&basis, **s))
                        .map(|s| {
                            let k = s.count_ones();
                            (css_config_amplitude(&state, n, k) * weight(k)).norm_sqr()
                        })
                        .sum();
                    check_leak(leaked)?;
                    kept.iter()
                        .map(|s| {
                            let k = s.count_ones();
                            css_config_amplitude(&state, n, k) * weight(k)
                        })
                        .collect()
                }
                Basis::Collective { .. } => (0..=n)
                    .map(|k| css_dicke_amplitude(&state, n, k) * weight(k as u32))
                    .collect(),
            }
        }
        (StateKind::BosonicCoherent { re, im }, Basis::Collective { .. }) => {
            let alpha = Complex64::new(re, im);
            if !(re.is_finite() && im.is_finite()) {
                return Err(invalid("alpha", "must be finite"));
            }
            if alpha.norm_sqr() > 0.5 * n as f64 {
                warning = Some(format!(
                    "|alpha|^2 = {:.3} exceeds N/2 = {:.1}; truncation to N + 1 levels degrades the coherent state",
                    alpha.norm_sqr(),
                    0.5 * n as f64
                ));
            }
            let (r, arg) = alpha.to_polar();
            let mut v: Vec<Complex64> = (0..=n)
                .map(|k| {
                    let ln_mag = if r == 0.0 {
                        if k == 0 {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        -0.5 * r * r + k as f64 * r.ln() - 0.5 * ln_factorial(k)
                    };
                    Complex64::from_polar(ln_mag.exp(), k as f64 * arg)
                })
                .collect();
            let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            v
        }
        (StateKind::BosonicCoherent { .. }, Basis::FullProduct { .. }) => {
            return Err(Error::BasisMismatch(
                "bosonic coherent states are only defined on the collective basis".into(),
            ))
        }
    };
    Ok(PreparedState {
        psi: PureState::new(basis, amplitudes)?,
        warning,
    })
}

fn basis_contains(basis: &Basis, s: u32) -> bool {
    match *basis {
        Basis::FullProduct { sector, .. } => sector.contains(s.count_ones()),
        Basis::Collective { .. } => true,
    }
}

fn check_leak(leaked: f64) -> Result<()> {
    if leaked > SECTOR_LEAK_TOL {
        Err(Error::BasisMismatch(format!(
            "state has weight {leaked:.3e} outside the requested parity sector"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::basis::Sector;
    use crate::lindblad::density::{amplitude_expectation, fidelity_to, parity_expectation};

    fn ground_projector_weight(rho: &DensityMatrix) -> f64 {
        rho.get(0, 0).re
    }

    #[test]
    fn css_at_zero_is_ground_state() {
        for basis in [Basis::full(4), Basis::Collective { n_spins: 4 }] {
            let p = prepare_state(StateKind::Css { theta: 0.0, phi: 1.0 }, basis).unwrap();
            assert_eq!(ground_projector_weight(&p.density()), 1.0);
        }
    }

    #[test]
    fn even_cat_tends_to_ground_state() {
        let p = prepare_state(
            StateKind::Cat {
                theta: 1e-4,
                phi: 0.0,
                parity: CatParity::Even,
            },
            Basis::full(5),
        )
        .unwrap();
        assert!(1.0 - ground_projector_weight(&p.density()) < 1e-7);
    }

    #[test]
    fn cat_matches_direct_branch_construction() {
        // each branch built spin by spin as a tensor product
        let n = 8;
        let (theta, phi) = (0.7f64, 0.3f64);
        let branch = |phi: f64| -> Vec<Complex64> {
            let single = [
                Complex64::new((0.5 * theta).cos(), 0.0),
                Complex64::from_polar((0.5 * theta).sin(), phi),
            ];
            let mut v = vec![Complex64::new(1.0, 0.0)];
            for spin in 0..n {
                let mut next = vec![Complex64::new(0.0, 0.0); v.len() * 2];
                for (idx, a) in v.iter().enumerate() {
                    next[idx] += a * single[0];
                    next[idx | (1 << spin)] += a * single[1];
                }
                v = next;
            }
            v
        };
        let b0 = branch(phi);
        let b1 = branch(phi + std::f64::consts::PI);
        for parity in [CatParity::Even, CatParity::Odd] {
            let p = prepare_state(StateKind::Cat { theta, phi, parity }, Basis::full(n)).unwrap();
            assert!((p.psi.norm_sqr() - 1.0).abs() < 1e-12);
            let norm = cat_norm(theta, n, parity).unwrap();
            for (i, a) in p.psi.amplitudes.iter().enumerate() {
                let direct = (b0[i] + parity.sign() * b1[i]) / norm;
                assert!((a - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cat_parities() {
        for basis in [Basis::full(6), Basis::Collective { n_spins: 6 }] {
            for (parity, expected) in [(CatParity::Even, 1.0), (CatParity::Odd, -1.0)] {
                let p = prepare_state(StateKind::Cat { theta: 0.9, phi: 0.2, parity }, basis).unwrap();
                assert!((parity_expectation(&p.density()) - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sector_restriction_matches_full_space() {
        let kind = StateKind::Cat {
            theta: 0.5,
            phi: -0.4,
            parity: CatParity::Odd,
        };
        let full = prepare_state(kind, Basis::full(5)).unwrap();
        let odd = prepare_state(
            kind,
            Basis::FullProduct {
                n_spins: 5,
                sector: Sector::Odd,
            },
        )
        .unwrap();
        assert!((odd.psi.norm_sqr() - 1.0).abs() < 1e-12);
        let sym_full = full.density().symmetric_projection();
        let sym_odd = odd.density().symmetric_projection();
        for (a, b) in sym_full.data().iter().zip(sym_odd.data()) {
            assert!((a - b).norm() < 1e-13);
        }
        let wrong = prepare_state(
            kind,
            Basis::FullProduct {
                n_spins: 5,
                sector: Sector::Even,
            },
        );
        assert!(matches!(wrong, Err(Error::BasisMismatch(_))));
    }

    #[test]
    fn collective_css_is_symmetric_projection_of_full() {
        let kind = StateKind::Css { theta: 1.1, phi: 0.6 };
        let full = prepare_state(kind, Basis::full(6)).unwrap().density().symmetric_projection();
        let coll = prepare_state(kind, Basis::Collective { n_spins: 6 }).unwrap();
        assert!((fidelity_to(&full, &coll.psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bosonic_coherent_state() {
        let basis = Basis::Collective { n_spins: 60 };
        let p = prepare_state(StateKind::BosonicCoherent { re: 1.0, im: -1.0 }, basis).unwrap();
        assert!(p.warning.is_none());
        let a = amplitude_expectation(&p.density());
        assert!((a - Complex64::new(1.0, -1.0)).norm() < 1e-10);
        let big = prepare_state(StateKind::BosonicCoherent { re: 6.0, im: 0.0 }, basis).unwrap();
        assert!(big.warning.is_some());
        assert!((big.psi.norm_sqr() - 1.0).abs() < 1e-12);
        let vac = prepare_state(StateKind::BosonicCoherent { re: 0.0, im: 0.0 }, basis).unwrap();
        assert_eq!(vac.psi.amplitudes[0], Complex64::new(1.0, 0.0));
        assert!(prepare_state(StateKind::BosonicCoherent { re: 1.0, im: 0.0 }, Basis::full(3)).is_err());
    }

    #[test]
    fn odd_cat_at_zero_angle_rejected() {
        let r = prepare_state(
            StateKind::Cat {
                theta: 0.0,
                phi: 0.0,
                parity: CatParity::Odd,
            },
            Basis::full(3),
        );
        assert_eq!(r, Err(Error::DegenerateOddCat));
    }
}
