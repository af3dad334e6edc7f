use num_complex::Complex64;

use super::basis::Basis;
use super::density::DensityMatrix;
use crate::ensemble::EnsembleParams;
use crate::error::{invalid, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Excitation parity of the rows or columns of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn offset(self) -> usize {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    fn count(self, n_spins: usize) -> usize {
        match self {
            Parity::Even => n_spins / 2 + 1,
            Parity::Odd => n_spins.div_ceil(2),
        }
    }
}

/// Collective-model generator restricted to one parity block
/// `ρ[k, l]` with `k` of parity `rows` and `l` of parity `cols`.
///
/// Both the squeezing Hamiltonian and the pair-loss jump change the
/// excitation number by two, so the four blocks evolve independently and
/// each is a two-dimensional stencil on the reduced indices.
#[derive(Debug, Clone)]
pub struct BlockGenerator {
    n_spins: usize,
    rows: Parity,
    cols: Parity,
    drive: Complex64,
    rate: f64,
    // pair_lowering[k] = ⟨k-2|S₋²|k⟩, zero for k < 2 and padded past N
    pair_lowering: Vec<f64>,
}

impl BlockGenerator {
    pub fn new(params: &EnsembleParams, rows: Parity, cols: Parity) -> Result<Self> {
        params.validate()?;
        let n = params.n_spins;
        if n < 1 {
            return Err(invalid("n_spins", "must be at least 1"));
        }
        let nf = n as f64;
        let pair_lowering = (0..n + 4)
            .map(|k| {
                if k < 2 || k > n {
                    0.0
                } else {
                    let (kf, lower) = (k as f64, (k - 1) as f64);
                    (kf * (nf - kf + 1.0) * lower * (nf - lower + 1.0)).sqrt()
                }
            })
            .collect();
        Ok(BlockGenerator {
            n_spins: n,
            rows,
            cols,
            drive: Complex64::from_polar(params.eta / nf, params.squeezing_phase),
            rate: params.gamma2 / (nf * nf),
            pair_lowering,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.count(self.n_spins), self.cols.count(self.n_spins))
    }

    /// Excitation numbers of the block rows and columns.
    pub fn row_excitations(&self) -> impl Iterator<Item = usize> {
        let r = self.rows.offset();
        (0..self.shape().0).map(move |p| 2 * p + r)
    }

    pub fn col_excitations(&self) -> impl Iterator<Item = usize> {
        let c = self.cols.offset();
        (0..self.shape().1).map(move |q| 2 * q + c)
    }

    /// Copy this block out of a collective density matrix.
    pub fn extract(&self, rho: &DensityMatrix) -> Result<Vec<Complex64>> {
        if rho.basis() != (Basis::Collective { n_spins: self.n_spins }) {
            return Err(crate::error::Error::BasisMismatch(
                "parity blocks need a collective density matrix of matching size".into(),
            ));
        }
        let cols: Vec<usize> = self.col_excitations().collect();
        Ok(self
            .row_excitations()
            .flat_map(|k| cols.iter().map(move |&l| (k, l)))
            .map(|(k, l)| rho.get(k, l))
            .collect())
    }

    /// Write this block (and, for an off-diagonal block, its adjoint) into a
    /// row-major `(N + 1) × (N + 1)` buffer.
    pub fn insert(&self, block: &[Complex64], full: &mut [Complex64]) {
        let d = self.n_spins + 1;
        let cols: Vec<usize> = self.col_excitations().collect();
        for (p, k) in self.row_excitations().enumerate() {
            for (q, &l) in cols.iter().enumerate() {
                let v = block[p * cols.len() + q];
                full[k * d + l] = v;
                if self.rows != self.cols {
                    full[l * d + k] = v.conj();
                }
            }
        }
    }

    /// `dX/dt = -i(HX - XH) - (γ/2)(KX + XK) + γ J X J†` on the block,
    /// with `J = S₋²`, `K = J†J` and `H = g J + g* J†`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let (nr, nc) = self.shape();
        let (r, c) = (self.rows.offset(), self.cols.offset());
        let s = &self.pair_lowering;
        let g = self.drive;
        let gc = g.conj();
        let half_rate = 0.5 * self.rate;
        let at = |p: usize, q: usize| x[p * nc + q];
        for p in 0..nr {
            let k = 2 * p + r;
            for q in 0..nc {
                let l = 2 * q + c;
                let mut h_x = ZERO;
                if p + 1 < nr {
                    h_x += g * s[k + 2] * at(p + 1, q);
                }
                if p > 0 {
                    h_x += gc * s[k] * at(p - 1, q);
                }
                let mut x_h = ZERO;
                if q > 0 {
                    x_h += g * s[l] * at(p, q - 1);
                }
                if q + 1 < nc {
                    x_h += gc * s[l + 2] * at(p, q + 1);
                }
                let loss = -half_rate * (s[k] * s[k] + s[l] * s[l]) * at(p, q);
                let feed = if p + 1 < nr && q + 1 < nc {
                    self.rate * s[k + 2] * s[l + 2] * at(p + 1, q + 1)
                } else {
                    ZERO
                };
                out[p * nc + q] = -I * (h_x - x_h) + loss + feed;
            }
        }
    }

    /// `⟨a⟩ = Σ_k √k ρ[k, k-1]` from the even-row, odd-column block.
    pub fn amplitude_from_coherences(&self, block: &[Complex64]) -> Complex64 {
        debug_assert!(self.rows == Parity::Even && self.cols == Parity::Odd);
        let (nr, nc) = self.shape();
        let mut acc = ZERO;
        for p in 0..nr {
            // k = 2p: ρ[2p, 2p - 1] sits at column p - 1
            if p > 0 && p - 1 < nc {
                acc += (2.0 * p as f64).sqrt() * block[p * nc + p - 1];
            }
            // k = 2p + 1: ρ[2p + 1, 2p] = conj ρ[2p, 2p + 1]
            if p < nc {
                acc += ((2 * p + 1) as f64).sqrt() * block[p * nc + p].conj();
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::density::amplitude_expectation;
    use crate::lindblad::generator::{build_collective_generator, Workspace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(d: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = vec![ZERO; d * d];
        for i in 0..d {
            for j in i..d {
                let v = Complex64::new(rng.random_range(-1.0..1.0), if i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
                m[i * d + j] = v;
                m[j * d + i] = v.conj();
            }
        }
        m
    }

    #[test]
    fn blocks_reproduce_full_generator() {
        for n in [5usize, 6] {
            let params = EnsembleParams::new(n, 0.7).unwrap().with_phase(0.4).with_gamma2(1.3);
            let gen = build_collective_generator(&params, &[]).unwrap();
            let d = n + 1;
            let rho_data = random_hermitian(d, 11 + n as u64);
            let rho = DensityMatrix::new(gen.basis(), rho_data.clone()).unwrap();
            let mut full = vec![ZERO; d * d];
            gen.apply(&rho_data, &mut full, &mut Workspace::new(d));
            let mut assembled = vec![ZERO; d * d];
            for (rows, cols) in [(Parity::Even, Parity::Even), (Parity::Odd, Parity::Odd), (Parity::Even, Parity::Odd)] {
                let block = BlockGenerator::new(&params, rows, cols).unwrap();
                let x = block.extract(&rho).unwrap();
                let mut dx = vec![ZERO; x.len()];
                block.apply(&x, &mut dx);
                block.insert(&dx, &mut assembled);
            }
            for (a, b) in full.iter().zip(&assembled) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b}");
            }
            let block = BlockGenerator::new(&params, Parity::Even, Parity::Odd).unwrap();
            let a = block.amplitude_from_coherences(&block.extract(&rho).unwrap());
            assert!((a - amplitude_expectation(&rho)).norm() < 1e-12);
        }
    }

    #[test]
    fn block_shapes() {
        let p = EnsembleParams::new(7, 1.0).unwrap();
        assert_eq!(BlockGenerator::new(&p, Parity::Even, Parity::Odd).unwrap().shape(), (4, 4));
        let p = EnsembleParams::new(8, 1.0).unwrap();
        assert_eq!(BlockGenerator::new(&p, Parity::Even, Parity::Odd).unwrap().shape(), (5, 4));
    }
}
