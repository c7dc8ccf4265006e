//! Derived RNG streams.
//!
//! Every randomized operation takes a `StreamId` derived from a 64-bit master
//! seed plus a list of role/index tags. Two properties matter: the derivation
//! is platform-independent, and distinct tag paths give independent streams,
//! so Monte Carlo loops can hand one stream to each trial and parallelize
//! without changing any result.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Role tags keeping the per-operation streams disjoint.
pub mod domain {
    pub const SANITIZE: u64 = 1;
    pub const TRUNCATION: u64 = 2;
    pub const CONCENTRATION: u64 = 3;
    pub const DOMINANCE: u64 = 4;
    pub const GENERATE: u64 = 5;
}

/// Identifier of one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StreamId(u64);

impl StreamId {
    pub fn id(self) -> u64 {
        self.0
    }

    /// Seeds a counter-based generator from this identifier.
    pub fn rng(self) -> ChaCha12Rng {
        let mut seed = [0u8; 32];
        let mut s = self.0;
        for chunk in seed.chunks_exact_mut(8) {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            chunk.copy_from_slice(&mix64(s).to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a master seed and a tag path into one stream identifier.
pub fn derive_stream(master: u64, tags: &[u64]) -> StreamId {
    let mut state = mix64(master ^ 0x9E37_79B9_7F4A_7C15);
    for &t in tags {
        state = mix64(state.wrapping_add(0x9E37_79B9_7F4A_7C15) ^ mix64(t));
    }
    StreamId(state)
}

/// rows x cols matrix of i.i.d. N(0, 1) entries drawn from the stream.
pub fn standard_normal_matrix(rows: usize, cols: usize, stream: StreamId) -> Array2<f64> {
    let mut rng = stream.rng();
    let data: Vec<f64> = (&mut rng)
        .sample_iter::<f64, _>(StandardNormal)
        .take(rows * cols)
        .collect();
    Array2::from_shape_vec((rows, cols), data).expect("length rows*cols by construction")
}
