use nalgebra::DMatrix;
use num_complex::Complex64;

use super::basis::{ln_binomial, Basis};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerances of [`DensityMatrix::validate`].
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Normalized state vector in a given basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub basis: Basis,
    pub amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(basis: Basis, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} amplitudes for a {}-dimensional basis",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(PureState { basis, amplitudes })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn overlap(&self, other: &PureState) -> Result<Complex64> {
        self.basis.ensure_same(&other.basis)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

/// Complex density matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    basis: Basis,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn new(basis: Basis, data: Vec<Complex64>) -> Result<Self> {
        let d = basis.dim();
        if data.len() != d * d {
            return Err(Error::BasisMismatch(format!(
                "{} entries for a {d}x{d} density matrix",
                data.len()
            )));
        }
        Ok(DensityMatrix { basis, data })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let d = psi.amplitudes.len();
        let mut data = vec![ZERO; d * d];
        for (i, a) in psi.amplitudes.iter().enumerate() {
            for (j, b) in psi.amplitudes.iter().enumerate() {
                data[i * d + j] = a * b.conj();
            }
        }
        DensityMatrix {
            basis: psi.basis,
            data,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// `max |ρ - ρ†|` over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (self.data[i * d + j] + self.data[j * d + i].conj()));
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Check Hermiticity, unit trace and (when `check_positivity`) positivity.
    pub fn validate(&self, check_positivity: bool) -> Result<()> {
        let herm = self.hermiticity_error();
        if !(herm <= HERMITICITY_TOL) {
            return Err(crate::error::invalid("rho", format!("not Hermitian: max |rho - rho^dag| = {herm:.3e}")));
        }
        let tr = self.trace();
        if !((tr - 1.0).norm() <= TRACE_TOL) {
            return Err(crate::error::invalid("rho", format!("trace {tr} differs from 1")));
        }
        if check_positivity {
            let lo = self.min_eigenvalue();
            if !(lo >= -POSITIVITY_TOL) {
                return Err(crate::error::invalid("rho", format!("minimum eigenvalue {lo:.3e} is negative")));
            }
        }
        Ok(())
    }

    /// Population of each excitation number `0..=N`.
    pub fn excitation_populations(&self) -> Vec<f64> {
        let d = self.dim();
        let mut pops = vec![0.0; self.basis.n_spins() + 1];
        for (i, k) in self.basis.excitations().into_iter().enumerate() {
            pops[k as usize] += self.data[i * d + i].re;
        }
        pops
    }

    /// Restriction to the symmetric Dicke states, as a matrix in the
    /// collective basis. Equal to `ρ` itself for collective input.
    pub fn symmetric_projection(&self) -> DensityMatrix {
        let n = self.basis.n_spins();
        match self.basis {
            Basis::Collective { .. } => self.clone(),
            Basis::FullProduct { .. } => {
                let d = self.dim();
                let ks = self.basis.excitations();
                let weights: Vec<f64> = (0..=n).map(|k| (-0.5 * ln_binomial(n, k)).exp()).collect();
                let mut sym = vec![ZERO; (n + 1) * (n + 1)];
                for i in 0..d {
                    let ki = ks[i] as usize;
                    let row = &self.data[i * d..(i + 1) * d];
                    for (j, v) in row.iter().enumerate() {
                        sym[ki * (n + 1) + ks[j] as usize] += v;
                    }
                }
                for a in 0..=n {
                    for b in 0..=n {
                        sym[a * (n + 1) + b] *= weights[a] * weights[b];
                    }
                }
                DensityMatrix {
                    basis: Basis::Collective { n_spins: n },
                    data: sym,
                }
            }
        }
    }
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_to(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    rho.basis.ensure_same(&psi.basis)?;
    let d = rho.dim();
    let mut acc = ZERO;
    for i in 0..d {
        let row = &rho.data[i * d..(i + 1) * d];
        let r: Complex64 = row.iter().zip(&psi.amplitudes).map(|(x, b)| x * b).sum();
        acc += psi.amplitudes[i].conj() * r;
    }
    Ok(acc.re)
}

/// Excitation-number parity `⟨(-1)^{n_exc}⟩`; `+1` for an even cat.
///
/// On the full basis this equals `(-1)^N ⟨∏ σᶻ⟩` with `σᶻ = +1` on the
/// excited state, and on the collective basis `⟨(-1)^{a†a}⟩`.
pub fn parity_expectation(rho: &DensityMatrix) -> f64 {
    let d = rho.dim();
    rho.basis
        .excitations()
        .into_iter()
        .enumerate()
        .map(|(i, k)| if k % 2 == 0 { rho.data[i * d + i].re } else { -rho.data[i * d + i].re })
        .sum()
}

/// Bosonic amplitude `⟨a⟩ = Tr(a ρ)` on the symmetric sector, with
/// `a|k⟩ = √k |k-1⟩` on Dicke states.
pub fn amplitude_expectation(rho: &DensityMatrix) -> Complex64 {
    let sym = rho.symmetric_projection();
    let d = sym.dim();
    (1..d).map(|k| (k as f64).sqrt() * sym.data[k * d + k - 1]).sum()
}
