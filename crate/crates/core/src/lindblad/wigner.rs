use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::Basis;
use super::density::DensityMatrix;
use crate::error::{invalid, Error, Result};

/// Rectangular window of `β` values sampled on a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl WignerWindow {
    /// Square window `|Re β|, |Im β| ≤ √(2η/Γ₂) + 3` with `points` per axis.
    pub fn around_amplitude(eta_over_gamma: f64, points: usize) -> Self {
        let half = (2.0 * eta_over_gamma.max(0.0)).sqrt() + 3.0;
        WignerWindow {
            re_min: -half,
            re_max: half,
            im_min: -half,
            im_max: half,
            n_re: points,
            n_im: points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite());
        if !finite || !(self.re_max > self.re_min) || !(self.im_max > self.im_min) {
            return Err(invalid("window", "bounds must be finite with max > min"));
        }
        if self.n_re < 2 || self.n_im < 2 {
            return Err(invalid("window", "need at least 2 points per axis"));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| if i + 1 == n { hi } else { lo + step * i as f64 }).collect()
    }

    pub fn re_axis(&self) -> Vec<f64> {
        Self::axis(self.re_min, self.re_max, self.n_re)
    }

    pub fn im_axis(&self) -> Vec<f64> {
        Self::axis(self.im_min, self.im_max, self.n_im)
    }

    /// Largest `|β|²` inside the window.
    pub fn max_abs_sqr(&self) -> f64 {
        let re = self.re_min.abs().max(self.re_max.abs());
        let im = self.im_min.abs().max(self.im_max.abs());
        re * re + im * im
    }
}

/// Wigner function sampled on a grid; `values[[i, j]]` is `W` at
/// `β = re_axis[j] + i im_axis[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    pub values: Array2<f64>,
    /// Set when part of the window lies beyond `|β|² = N/2`, where the
    /// finite spin length makes the bosonic picture unreliable.
    pub truncation_warning: bool,
}

impl WignerGrid {
    /// `∫ W d²β` by the trapezoid rule over the window.
    pub fn integral(&self) -> f64 {
        let weights = |axis: &[f64]| -> Vec<f64> {
            let n = axis.len();
            (0..n)
                .map(|i| {
                    let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect()
        };
        let wr = weights(&self.re_axis);
        let wi = weights(&self.im_axis);
        let mut total = 0.0;
        for (i, w_im) in wi.iter().enumerate() {
            for (j, w_re) in wr.iter().enumerate() {
                total += w_im * w_re * self.values[[i, j]];
            }
        }
        total
    }

    /// Strict local maxima over the 8-neighbourhood with value above
    /// `min_value`, as `(re β, im β, W)`, largest first.
    pub fn local_maxima(&self, min_value: f64) -> Vec<(f64, f64, f64)> {
        let (n_im, n_re) = self.values.dim();
        let mut peaks = Vec::new();
        for i in 0..n_im {
            for j in 0..n_re {
                let v = self.values[[i, j]];
                if v <= min_value {
                    continue;
                }
                let mut is_max = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii < 0 || jj < 0 || ii >= n_im as i64 || jj >= n_re as i64 {
                            continue;
                        }
                        if self.values[[ii as usize, jj as usize]] >= v {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    peaks.push((self.re_axis[j], self.im_axis[i], v));
                }
            }
        }
        peaks.sort_by(|a, b| b.2.total_cmp(&a.2));
        peaks
    }
}

/// `W(β)` from the Fock-basis matrix elements `W_mn(β)` of `|m⟩⟨n|`.
///
/// `W_mn` is built row by row from `W_00 = e^{-2|β|²}/π` with
/// `W_0n = 2β W_0,n-1/√n`, `W_mm = (2β* W_m-1,m - √m W_m-1,m-1)/√m` and
/// `W_mn = (2β W_m,n-1 - √m W_m-1,n-1)/√n`; every element is bounded, so the
/// recursion is stable for any `|β|`. The result carries the factor 2.
fn wigner_point(rho: &[Complex64], d: usize, beta: Complex64, row: &mut [Complex64]) -> f64 {
    let two_beta = 2.0 * beta;
    row[0] = Complex64::new((-2.0 * beta.norm_sqr()).exp() / PI, 0.0);
    let mut w = rho[0].re * row[0].re;
    for n in 1..d {
        row[n] = two_beta * row[n - 1] / (n as f64).sqrt();
        w += 2.0 * (rho[n] * row[n]).re;
    }
    for m in 1..d {
        let sqrt_m = (m as f64).sqrt();
        let mut previous = row[m];
        row[m] = (two_beta.conj() * previous - sqrt_m * row[m - 1]) / sqrt_m;
        w += (rho[m * d + m] * row[m]).re;
        for n in m + 1..d {
            let next = (two_beta * row[n - 1] - sqrt_m * previous) / (n as f64).sqrt();
            previous = row[n];
            row[n] = next;
            w += 2.0 * (rho[m * d + n] * row[n]).re;
        }
    }
    2.0 * w
}

/// `W(β) = (2/π) Tr[ρ D(β) Π D(β)†]` of the collective state read as a
/// bosonic mode on its `N + 1` Fock levels, evaluated exactly through the
/// Fock matrix elements of the displaced parity.
pub fn wigner(rho: &DensityMatrix, window: &WignerWindow) -> Result<WignerGrid> {
    window.validate()?;
    let Basis::Collective { n_spins } = rho.basis() else {
        return Err(Error::BasisMismatch("the Wigner function needs the collective basis".into()));
    };
    let d = rho.dim();
    let data = rho.data();
    let re_axis = window.re_axis();
    let im_axis = window.im_axis();
    let points: Vec<(usize, usize)> = (0..im_axis.len())
        .flat_map(|i| (0..re_axis.len()).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = points
        .par_iter()
        .map_init(
            || vec![Complex64::new(0.0, 0.0); d],
            |row, &(i, j)| wigner_point(data, d, Complex64::new(re_axis[j], im_axis[i]), row),
        )
        .collect();
    Ok(WignerGrid {
        values: Array2::from_shape_vec((im_axis.len(), re_axis.len()), values).expect("grid shape"),
        re_axis,
        im_axis,
        truncation_warning: window.max_abs_sqr() > 0.5 * n_spins as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::states::{prepare_state, StateKind};

    #[test]
    fn vacuum_peak() {
        let rho = prepare_state(StateKind::Css { theta: 0.0, phi: 0.0 }, Basis::Collective { n_spins: 30 })
            .unwrap()
            .density();
        let window = WignerWindow {
            re_min: -1.0,
            re_max: 1.0,
            im_min: -1.0,
            im_max: 1.0,
            n_re: 3,
            n_im: 3,
        };
        let w = wigner(&rho, &window).unwrap();
        assert!((w.values[[1, 1]] - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        // Gaussian fall-off (2/π) e^{-2|β|²}
        let expected = 2.0 / std::f64::consts::PI * (-2.0f64 * 2.0).exp();
        assert!((w.values[[0, 0]] - expected).abs() < 1e-10);
    }

    #[test]
    fn coherent_state_blob() {
        let alpha = Complex64::new(1.0, -1.0);
        let rho = prepare_state(
            StateKind::BosonicCoherent {
                re: alpha.re,
                im: alpha.im,
            },
            Basis::Collective { n_spins: 80 },
        )
        .unwrap()
        .density();
        let window = WignerWindow {
            re_min: -3.0,
            re_max: 3.0,
            im_min: -3.0,
            im_max: 3.0,
            n_re: 25,
            n_im: 25,
        };
        let w = wigner(&rho, &window).unwrap();
        let peaks = w.local_maxima(0.05);
        assert_eq!(peaks.len(), 1, "{peaks:?}");
        let (re, im, v) = peaks[0];
        assert!((re - 1.0).abs() < 1e-9 && (im + 1.0).abs() < 1e-9);
        assert!((v - 2.0 / std::f64::consts::PI).abs() / (2.0 / std::f64::consts::PI) < 0.02);
        assert!((w.integral() - 1.0).abs() < 1e-2);
        assert!(!w.truncation_warning);
    }

    #[test]
    fn single_excitation_is_negative_at_origin() {
        let n = 12;
        let d = n + 1;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        data[d + 1] = Complex64::new(1.0, 0.0);
        let rho = DensityMatrix::new(Basis::Collective { n_spins: n }, data).unwrap();
        let window = WignerWindow {
            re_min: -2.0,
            re_max: 2.0,
            im_min: -1.5,
            im_max: 1.5,
            n_re: 9,
            n_im: 7,
        };
        let w = wigner(&rho, &window).unwrap();
        for (i, &im) in w.im_axis.iter().enumerate() {
            for (j, &re) in w.re_axis.iter().enumerate() {
                let r2 = re * re + im * im;
                let exact = -2.0 / PI * (-2.0 * r2).exp() * (1.0 - 4.0 * r2);
                assert!((w.values[[i, j]] - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn displaced_blob_is_exact_far_from_origin() {
        let alpha = Complex64::new(3.0, 4.0);
        let rho = prepare_state(
            StateKind::BosonicCoherent {
                re: alpha.re,
                im: alpha.im,
            },
            Basis::Collective { n_spins: 100 },
        )
        .unwrap()
        .density();
        let window = WignerWindow {
            re_min: -9.0,
            re_max: 9.0,
            im_min: -9.0,
            im_max: 9.0,
            n_re: 37,
            n_im: 37,
        };
        let w = wigner(&rho, &window).unwrap();
        let mut worst: f64 = 0.0;
        for (i, &im) in w.im_axis.iter().enumerate() {
            for (j, &re) in w.re_axis.iter().enumerate() {
                let exact = 2.0 / PI * (-2.0 * (Complex64::new(re, im) - alpha).norm_sqr()).exp();
                worst = worst.max((w.values[[i, j]] - exact).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
        assert!((w.integral() - 1.0).abs() < 1e-2);
        assert!(w.truncation_warning);
    }

    #[test]
    fn full_basis_rejected() {
        let rho = prepare_state(StateKind::Css { theta: 0.0, phi: 0.0 }, Basis::full(2)).unwrap().density();
        assert!(wigner(&rho, &WignerWindow::around_amplitude(0.0, 5)).is_err());
    }
}
