//! Van der Waals truncated Hilbert space.
//!
//! A basis state is an excitation bitmask (bit `i` set when atom `i` is in
//! the Rydberg state). Only masks whose pair energy stays below the cutoff
//! `E_C` are kept. Because every `V_ij` is positive, removing an excitation
//! never raises the energy, so the retained set is closed under bit removal
//! and can be grown level by level without ever visiting a pruned mask.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::InteractionTable;

/// Excitation bitmask; supports up to 128 atoms.
pub type Mask = u128;

pub const MAX_ATOMS: usize = Mask::BITS as usize;

/// Default memory budget, in basis states.
pub const DEFAULT_MAX_STATES: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisState {
    pub mask: Mask,
    pub vdw_energy: f64,
}

impl BasisState {
    pub fn excitations(&self) -> u32 {
        self.mask.count_ones()
    }
}

/// Iterates the set bits of a mask in ascending order.
pub fn set_bits(mut mask: Mask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// Pair energy of a mask.
///
/// Summation order matches the incremental construction in
/// [`TruncatedBasis::build`]: for each set bit `j` in ascending order, the
/// partial sum over lower set bits `i < j` is added to the running total.
pub fn vdw_energy(mask: Mask, table: &InteractionTable) -> f64 {
    let mut total = 0.0;
    let mut below: Mask = 0;
    for j in set_bits(mask) {
        total += shift_from(below, j, table);
        below |= 1 << j;
    }
    total
}

#[inline]
fn shift_from(mask: Mask, j: usize, table: &InteractionTable) -> f64 {
    let row = table.row(j);
    set_bits(mask).map(|i| row[i]).sum()
}

#[derive(Clone, Debug)]
pub struct TruncatedBasis {
    atoms: usize,
    cutoff: f64,
    states: Vec<BasisState>,
    index: HashMap<Mask, u32>,
    // Retained single-flip partners of state k are neighbors[offsets[k]..offsets[k + 1]].
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl TruncatedBasis {
    /// Enumerates `{ mask : vdw(mask) <= cutoff }` with the default budget.
    pub fn build(table: &InteractionTable, cutoff: f64) -> Result<Self> {
        Self::build_with_budget(table, cutoff, DEFAULT_MAX_STATES)
    }

    pub fn build_with_budget(table: &InteractionTable, cutoff: f64, max_states: usize) -> Result<Self> {
        let atoms = table.len();
        if !(cutoff >= 0.0) {
            return Err(Error::Parameter(format!("cutoff must be non-negative, got {cutoff}")));
        }
        if atoms > MAX_ATOMS {
            return Err(Error::Parameter(format!("at most {MAX_ATOMS} atoms are supported, got {atoms}")));
        }
        if max_states > u32::MAX as usize {
            return Err(Error::Parameter("max_states must fit in a 32-bit index".into()));
        }
        let capacity = || Error::Capacity { atoms, cutoff, budget: max_states };

        let mut states = vec![BasisState { mask: 0, vdw_energy: 0.0 }];
        let mut level_start = 0;
        while level_start < states.len() {
            let level_end = states.len();
            for s in level_start..level_end {
                let BasisState { mask, vdw_energy } = states[s];
                // Extend only above the highest set bit so each mask is generated once.
                let first = if mask == 0 { 0 } else { MAX_ATOMS - mask.leading_zeros() as usize };
                for j in first..atoms {
                    let energy = vdw_energy + shift_from(mask, j, table);
                    if energy <= cutoff {
                        if states.len() >= max_states {
                            return Err(capacity());
                        }
                        states.push(BasisState { mask: mask | (1 << j), vdw_energy: energy });
                    }
                }
            }
            level_start = level_end;
        }

        states.sort_unstable_by_key(|s| s.mask);
        let index: HashMap<Mask, u32> = states.iter().enumerate().map(|(k, s)| (s.mask, k as u32)).collect();
        let mut offsets = Vec::with_capacity(states.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for s in &states {
            for i in 0..atoms {
                if let Some(&p) = index.get(&(s.mask ^ (1 << i))) {
                    neighbors.push(p);
                }
            }
            offsets.push(neighbors.len());
        }
        Ok(Self { atoms, cutoff, states, index, offsets, neighbors })
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn position(&self, mask: Mask) -> Option<usize> {
        self.index.get(&mask).map(|&k| k as usize)
    }

    /// Retained single-flip partners of state `k`, in atom order.
    #[inline]
    pub fn neighbors(&self, k: usize) -> &[u32] {
        &self.neighbors[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Partner of state `k` with atom `i` flipped, `None` if pruned.
    pub fn flip(&self, k: usize, i: usize) -> Option<usize> {
        self.position(self.states[k].mask ^ (1 << i))
    }

    /// Number of retained hopping pairs, each counted once per direction.
    pub fn hops(&self) -> usize {
        self.neighbors.len()
    }

    pub fn max_excitations(&self) -> u32 {
        self.states.iter().map(BasisState::excitations).max().unwrap_or(0)
    }

    pub fn max_vdw_energy(&self) -> f64 {
        self.states.iter().map(|s| s.vdw_energy).fold(0.0, f64::max)
    }
}
