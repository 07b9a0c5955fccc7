//! Reproducible random streams.
//!
//! Every stream is ChaCha8 keyed by the 64-bit master seed (expanded with
//! `seed_from_u64`, i.e. PCG32 key expansion), with the ChaCha stream id set
//! to the chain index. Draw number `k` of chain `c` is therefore a fixed
//! function of `(seed, c, k)`: results do not depend on thread count or on
//! the order in which chains run. Uniforms are `rand`'s standard `f64` in
//! `[0, 1)` (53 random bits). This scheme is part of the output contract and
//! must not change between releases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ifs::IfsModel;

/// Generator for chain `chain` under master seed `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Inverse-CDF sampler over an IFS probability vector.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    cdf: Vec<f64>,
}

impl IndexSampler {
    pub fn new(ifs: &IfsModel) -> Self {
        Self { cdf: ifs.cumulative() }
    }

    #[inline]
    pub fn index_for(&self, u: f64) -> usize {
        if self.cdf.len() <= 8 {
            self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
        } else {
            self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        self.index_for(rng.gen::<f64>())
    }
}
