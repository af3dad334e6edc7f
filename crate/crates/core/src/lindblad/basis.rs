use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Excitation-number parity sector of the full product space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    #[default]
    All,
    Even,
    Odd,
}

impl Sector {
    pub fn contains(self, excitations: u32) -> bool {
        match self {
            Sector::All => true,
            Sector::Even => excitations % 2 == 0,
            Sector::Odd => excitations % 2 == 1,
        }
    }
}

/// Hilbert-space basis a density matrix lives in.
///
/// `FullProduct` states are bitmasks over the spins (bit set = excited),
/// restricted to `sector` and listed in increasing order. `Collective`
/// states are the symmetric Dicke states labelled by excitation number
/// `k = 0..=N`, identified with the Fock states of the Holstein–Primakoff
/// boson.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    FullProduct { n_spins: usize, sector: Sector },
    Collective { n_spins: usize },
}

impl Basis {
    pub fn full(n_spins: usize) -> Self {
        Basis::FullProduct {
            n_spins,
            sector: Sector::All,
        }
    }

    pub fn n_spins(&self) -> usize {
        match *self {
            Basis::FullProduct { n_spins, .. } | Basis::Collective { n_spins } => n_spins,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Basis::FullProduct { n_spins, sector } => match sector {
                Sector::All => 1 << n_spins,
                _ if n_spins == 0 => usize::from(sector == Sector::Even),
                _ => 1 << (n_spins - 1),
            },
            Basis::Collective { n_spins } => n_spins + 1,
        }
    }

    /// Excitation number of every basis state, in basis order.
    pub fn excitations(&self) -> Vec<u32> {
        match *self {
            Basis::FullProduct { .. } => self.product_states().iter().map(|s| s.count_ones()).collect(),
            Basis::Collective { n_spins } => (0..=n_spins as u32).collect(),
        }
    }

    /// Bitmask of every product state, in basis order. Empty for the
    /// collective basis.
    pub fn product_states(&self) -> Vec<u32> {
        match *self {
            Basis::FullProduct { n_spins, sector } => (0..1u32 << n_spins)
                .filter(|s| sector.contains(s.count_ones()))
                .collect(),
            Basis::Collective { .. } => Vec::new(),
        }
    }

    /// Position of each bitmask in basis order (`usize::MAX` if outside the sector).
    pub(crate) fn product_index(&self) -> Vec<usize> {
        let Basis::FullProduct { n_spins, .. } = *self else {
            return Vec::new();
        };
        let mut index = vec![usize::MAX; 1 << n_spins];
        for (i, s) in self.product_states().into_iter().enumerate() {
            index[s as usize] = i;
        }
        index
    }

    pub(crate) fn ensure_same(&self, other: &Basis) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::BasisMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// `ln C(n, k)`.
pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}
