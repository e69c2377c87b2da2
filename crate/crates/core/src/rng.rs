//! Seed derivation for independent random substreams.
//!
//! A substream seed is obtained by folding a list of tags into the master
//! seed with the SplitMix64 finaliser:
//!
//! ```text
//! s_0     = splitmix64(master)
//! s_{i+1} = splitmix64(s_i ^ splitmix64(tag_i + 0x632BE59BD9B4E019))
//! ```
//!
//! The first tag is always a domain constant so that, for example, the
//! projection for cell `(a, b)` and the Gaussian row `i` never share a stream.
//! Each substream seed initialises a ChaCha8 generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_PROJECTION: u64 = 0x5052_4f4a; // "PROJ"
pub const DOMAIN_GAUSSIAN: u64 = 0x4741_5553; // "GAUS"
pub const DOMAIN_DEFLATION: u64 = 0x4445_464c; // "DEFL"
pub const DOMAIN_EXPERIMENT: u64 = 0x4558_5052; // "EXPR"

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

pub fn substream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
