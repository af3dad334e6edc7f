use num_complex::Complex64;

use super::basis::{Basis, Sector};
use super::sparse::SparseMatrix;
use crate::ensemble::EnsembleParams;
use crate::error::{invalid, Error, Result};

/// Default largest spin count accepted by the full product-space backend.
pub const FULL_SPACE_CAP: usize = 12;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Collective lowering and bosonic annihilation matrices on the `N + 1`
/// Dicke states.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveOperators {
    pub n_spins: usize,
    /// `S₋|k⟩ = √(k(N - k + 1)) |k - 1⟩`, i.e. `√(N - a†a + 1)`-weighted `a`.
    pub s_minus: SparseMatrix,
    /// Truncated `a|k⟩ = √k |k - 1⟩`.
    pub a_op: SparseMatrix,
}

impl CollectiveOperators {
    pub fn new(n_spins: usize) -> Self {
        let d = n_spins + 1;
        let s_minus = SparseMatrix::from_triplets(
            d,
            (1..d)
                .map(|k| (k - 1, k, Complex64::new(((k * (n_spins - k + 1)) as f64).sqrt(), 0.0)))
                .collect(),
        );
        let a_op = SparseMatrix::from_triplets(
            d,
            (1..d).map(|k| (k - 1, k, Complex64::new((k as f64).sqrt(), 0.0))).collect(),
        );
        CollectiveOperators {
            n_spins,
            s_minus,
            a_op,
        }
    }
}

/// `S₋² = (Σᵢ σᵢ⁻)²` on a full-product basis: `2 Σ_{i<j}` over excited pairs.
fn full_pair_lowering(basis: &Basis) -> SparseMatrix {
    let Basis::FullProduct { n_spins, .. } = *basis else {
        unreachable!("full basis expected")
    };
    let states = basis.product_states();
    let index = basis.product_index();
    let mut entries = Vec::new();
    for (col, &s) in states.iter().enumerate() {
        for i in 0..n_spins {
            if s & (1 << i) == 0 {
                continue;
            }
            for j in (i + 1)..n_spins {
                if s & (1 << j) == 0 {
                    continue;
                }
                let target = s & !(1 << i) & !(1 << j);
                entries.push((index[target as usize], col, Complex64::new(2.0, 0.0)));
            }
        }
    }
    SparseMatrix::from_triplets(states.len(), entries)
}

/// Right-hand side of the master equation
/// `dρ/dt = -i[H, ρ] + (Γ₂/N²)(J ρ J† - ½{J†J, ρ})` with `J = S₋²`.
///
/// Every term is evaluated in a manifestly Hermitian form, so rounding
/// cannot seed a growing anti-Hermitian component.
#[derive(Debug, Clone)]
pub struct Generator {
    basis: Basis,
    hamiltonian: SparseMatrix,
    jump: SparseMatrix,
    jump_adj: SparseMatrix,
    rate: f64,
}

/// Scratch buffers for [`Generator::apply`].
#[derive(Debug, Clone)]
pub struct Workspace {
    x: Vec<Complex64>,
    y: Vec<Complex64>,
    z: Vec<Complex64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Workspace {
            x: vec![ZERO; dim * dim],
            y: vec![ZERO; dim * dim],
            z: vec![ZERO; dim * dim],
        }
    }
}

impl Generator {
    fn assemble(basis: Basis, params: &EnsembleParams, diagonal: Vec<f64>, pair_lowering: SparseMatrix) -> Self {
        let n = params.n_spins as f64;
        let d = basis.dim();
        let drive = Complex64::from_polar(params.eta / n, params.squeezing_phase);
        let pair_raising = pair_lowering.adjoint();
        let hamiltonian = SparseMatrix::from_triplets(
            d,
            diagonal
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i, i, Complex64::new(v, 0.0)))
                .collect(),
        )
        .add(&pair_lowering.scaled(drive))
        .add(&pair_raising.scaled(drive.conj()));
        Generator {
            basis,
            hamiltonian,
            jump_adj: pair_raising,
            jump: pair_lowering,
            rate: params.gamma2 / (n * n),
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn hamiltonian(&self) -> &SparseMatrix {
        &self.hamiltonian
    }

    pub fn jump(&self) -> &SparseMatrix {
        &self.jump
    }

    /// Collective loss rate `Γ₂/N²` multiplying the dissipator.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `out = L(ρ)` for a Hermitian row-major `ρ`.
    pub fn apply(&self, rho: &[Complex64], out: &mut [Complex64], ws: &mut Workspace) {
        let d = self.dim();
        let half_rate = 0.5 * self.rate;
        // y = J ρ, z = J† y, x = H ρ - i(γ/2) J†J ρ
        self.jump.mul_dense(rho, &mut ws.y);
        self.jump_adj.mul_dense(&ws.y, &mut ws.z);
        self.hamiltonian.mul_dense(rho, &mut ws.x);
        for (x, z) in ws.x.iter_mut().zip(&ws.z) {
            *x -= I * half_rate * z;
        }
        // z = y†, then y = J y† = J ρ J†
        for i in 0..d {
            for j in 0..d {
                ws.z[i * d + j] = ws.y[j * d + i].conj();
            }
        }
        self.jump.mul_dense(&ws.z, &mut ws.y);
        for i in 0..d {
            for j in i..d {
                let (ij, ji) = (i * d + j, j * d + i);
                let commutator = -I * (ws.x[ij] - ws.x[ji].conj());
                let recycle = half_rate * (ws.y[ij] + ws.y[ji].conj());
                let v = commutator + recycle;
                out[ij] = v;
                out[ji] = v.conj();
            }
        }
    }

    /// Dense `d² × d²` superoperator acting on row-major `vec(ρ)`, built
    /// column by column from Hermitian basis elements. Meant for tiny
    /// systems only.
    pub fn dense_superoperator(&self) -> Vec<Vec<Complex64>> {
        let d = self.dim();
        let mut ws = Workspace::new(d);
        let mut out = vec![ZERO; d * d];
        let mut columns = vec![vec![ZERO; d * d]; d * d];
        // L is linear over complex matrices; recover L(E_ij) from the
        // Hermitian combinations E_ij + E_ji and i(E_ij - E_ji).
        for i in 0..d {
            for j in i..d {
                let mut h = vec![ZERO; d * d];
                h[i * d + j] += 1.0;
                h[j * d + i] += 1.0;
                self.apply(&h, &mut out, &mut ws);
                let sym = out.clone();
                if i == j {
                    columns[i * d + i] = sym.iter().map(|v| v * 0.5).collect();
                    continue;
                }
                let mut a = vec![ZERO; d * d];
                a[i * d + j] = I;
                a[j * d + i] = -I;
                self.apply(&a, &mut out, &mut ws);
                // E_ij = (S - i A)/2, E_ji = (S + i A)/2
                columns[i * d + j] = sym.iter().zip(&out).map(|(s, a)| 0.5 * (s - I * a)).collect();
                columns[j * d + i] = sym.iter().zip(&out).map(|(s, a)| 0.5 * (s + I * a)).collect();
            }
        }
        columns
    }
}

/// Generator on the full product space for arbitrary detunings.
pub fn build_full_generator(params: &EnsembleParams, detunings: &[f64]) -> Result<Generator> {
    build_full_generator_in_sector(params, detunings, Sector::All, FULL_SPACE_CAP)
}

/// Generator on one excitation-parity sector of the full product space.
///
/// Both the Hamiltonian and `S₋²` conserve excitation parity, so a parity
/// eigenstate never leaves its sector.
pub fn build_full_generator_in_sector(
    params: &EnsembleParams,
    detunings: &[f64],
    sector: Sector,
    cap: usize,
) -> Result<Generator> {
    params.validate()?;
    let n = params.n_spins;
    if n > cap || n >= 31 {
        let dim = 1u128 << n.min(127);
        return Err(Error::TooManySpins {
            n_spins: n,
            cap,
            bytes: dim.saturating_mul(dim).saturating_mul(16),
        });
    }
    if detunings.len() != n {
        return Err(invalid("detunings", format!("expected {n} values, got {}", detunings.len())));
    }
    if detunings.iter().any(|d| !d.is_finite()) {
        return Err(invalid("detunings", "must be finite"));
    }
    let basis = Basis::FullProduct { n_spins: n, sector };
    let diagonal = basis
        .product_states()
        .iter()
        .map(|&s| {
            0.5 * detunings
                .iter()
                .enumerate()
                .map(|(i, d)| if s & (1 << i) != 0 { *d } else { -*d })
                .sum::<f64>()
        })
        .collect();
    let pair = full_pair_lowering(&basis);
    Ok(Generator::assemble(basis, params, diagonal, pair))
}

/// Generator on the `N + 1` symmetric Dicke states. Requires every
/// detuning to vanish, since only then is the symmetric sector closed.
pub fn build_collective_generator(params: &EnsembleParams, detunings: &[f64]) -> Result<Generator> {
    params.validate()?;
    if detunings.iter().any(|d| *d != 0.0) {
        return Err(Error::NonzeroDetunings);
    }
    let ops = CollectiveOperators::new(params.n_spins);
    let pair = ops.s_minus.matmul(&ops.s_minus);
    let basis = Basis::Collective {
        n_spins: params.n_spins,
    };
    Ok(Generator::assemble(basis, params, vec![0.0; basis.dim()], pair))
}
