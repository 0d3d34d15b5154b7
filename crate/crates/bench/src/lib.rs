//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use wearsar::solver::{Medium, SolverModel};
use wearsar::{SarField, TissueTable, VoxelPhantom};

/// Lossy block of `n` cells per side surrounded by the default margin and PML.
pub fn lossy_block(n: usize) -> SolverModel {
    SolverModel::uniform([n, n, n], 2e-3, Medium::new(40.0, 1.0))
}

/// Random tissue cube with random SAR in tissue voxels.
pub fn random_sar(n: usize, seed: u64) -> (VoxelPhantom, SarField) {
    let table = Arc::new(TissueTable::builtin());
    let ids: Vec<u8> = table.tissues().map(|t| t.id.0).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dims = [n, n, n];
    let len = n * n * n;
    let raw: Vec<u8> = (0..len).map(|_| if rng.gen_bool(0.1) { 0 } else { ids[rng.gen_range(0..ids.len())] }).collect();
    let values = raw.iter().map(|&id| if id == 0 { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
    let phantom = VoxelPhantom::new(dims, 2e-3, raw, table).expect("valid ids");
    (phantom, SarField { dims, spacing: 2e-3, frequency: 2.45e9, input_power: 0.01, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_consistent() {
        let (p, s) = random_sar(8, 1);
        assert_eq!(p.len(), s.values.len());
        assert_eq!(lossy_block(4).cells.len(), 64);
    }
}
