//! Benchmark inputs shared by the criterion targets.

use structdiag::matching::CostMatrix;
use structdiag::random::{random_model, GeneratorConfig};
use structdiag::StructuralModel;

/// A random model with `n` constraints and roughly `n - 2` unknowns.
pub fn model_of_size(seed: u64, n: usize) -> StructuralModel {
    let cfg = GeneratorConfig {
        constraints: n,
        unknowns: n.saturating_sub(2).max(1),
        knowns: 3,
        edge_probability: 0.3,
        ..Default::default()
    };
    random_model(seed, &cfg)
}

/// Dense `n x n` assignment costs in `0..100`, about one cell in seven forbidden.
pub fn cost_matrix(seed: u64, n: usize) -> CostMatrix {
    let mut m = CostMatrix::new(n);
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    for i in 0..n {
        for j in 0..n {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            if i == j || !state.is_multiple_of(7) {
                m.set(i, j, state % 100);
            }
        }
    }
    m
}
