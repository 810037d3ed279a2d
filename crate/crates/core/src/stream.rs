//! Deterministic random streams.
//!
//! Every Monte Carlo realization owns a set of independent ChaCha streams
//! addressed by `(seed, realization, attempt, purpose)`. Streams never share
//! state, so realizations can be evaluated in any order or on any number of
//! workers and still produce bit-identical draws.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a stream is used for inside one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Channel from the array to the intended receiver.
    Channel = 0,
    /// Channel from the array to an unintended receiver.
    UnintendedChannel = 1,
    /// Transmitted bits.
    Bits = 2,
    /// Receiver noise.
    Noise = 3,
}

const PURPOSE_BITS: u32 = 4;
const ATTEMPT_BITS: u32 = 12;

/// Largest number of draws per realization addressable by [`stream`].
pub const MAX_ATTEMPTS: u32 = 1 << ATTEMPT_BITS;

/// Returns the stream for `purpose` in draw `attempt` of `realization`.
///
/// # Panics
///
/// Panics if `attempt >= MAX_ATTEMPTS` or `realization >= 2^48`.
pub fn stream(seed: u64, realization: u64, attempt: u32, purpose: Purpose) -> ChaCha12Rng {
    assert!(attempt < MAX_ATTEMPTS, "attempt index out of range");
    assert!(realization < 1 << 48, "realization index out of range");
    let id = (realization << (ATTEMPT_BITS + PURPOSE_BITS)) | (u64::from(attempt) << PURPOSE_BITS) | purpose as u64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
