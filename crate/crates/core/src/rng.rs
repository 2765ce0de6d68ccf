//! Counter-based random streams keyed by `(seed, interval, iteration, sample)`.
//!
//! Every draw in a run comes from a stream that is a pure function of its key, so the
//! output of a run does not depend on how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SAMPLE_BITS: u32 = 32;
const INTERVAL_BITS: u32 = 20;
const ITERATION_BITS: u32 = 12;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random stream; see [`make_rng_stream`].
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Deterministic stream for sample `sample` of interval `interval` at iteration `iteration`.
///
/// The seed expands to the ChaCha key and the triple is packed losslessly into the
/// 64-bit stream id, so distinct keys never share a stream.
pub fn make_rng_stream(seed: u64, interval: usize, iteration: usize, sample: usize) -> RngStream {
    assert!(
        (sample as u64) < (1 << SAMPLE_BITS)
            && (interval as u64) < (1 << INTERVAL_BITS)
            && (iteration as u64) < (1 << ITERATION_BITS),
        "rng key out of range: interval {interval}, iteration {iteration}, sample {sample}"
    );
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    let stream = ((iteration as u64) << (SAMPLE_BITS + INTERVAL_BITS))
        | ((interval as u64) << SAMPLE_BITS)
        | sample as u64;
    rng.set_stream(stream);
    RngStream(rng)
}
