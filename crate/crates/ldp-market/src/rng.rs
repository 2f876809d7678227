//! Seeded, splittable random streams.
//!
//! Every stochastic operation in the crate draws from a [`ChaCha12Rng`]
//! stream derived from a root seed, a party domain, and an index. Streams
//! are independent, so adding providers never perturbs the draws of
//! earlier providers, and the same seed reproduces a run bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Consumer-side draws (the session nonce s1).
pub const DOMAIN_CONSUMER: u64 = 0;
/// Operator-side draws (the session nonce s2 and the operator address).
pub const DOMAIN_OPERATOR: u64 = 1;
/// Per-provider draws (psk, address, choice, coins, encryption IV).
pub const DOMAIN_PROVIDER: u64 = 2;
/// Attacker-side draws in the sequential-observation experiment.
pub const DOMAIN_ATTACKER: u64 = 3;

const INDEX_BITS: u32 = 48;

/// Derives the stream for `(seed, domain, index)`.
///
/// Panics if `index` does not fit in 48 bits; domains are small constants.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha12Rng {
    assert!(index < 1 << INDEX_BITS, "stream index out of range");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((domain << INDEX_BITS) | index);
    rng
}
