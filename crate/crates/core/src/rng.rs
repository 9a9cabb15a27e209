//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 keystream selected by
//! `(root seed, purpose tag)` with the replicate index as the ChaCha stream id.
//! A replicate therefore sees the same numbers whichever worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep independent consumers of one root seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Dataset = 1,
    Bootstrap = 2,
    BootstrapSeed = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a root seed with a tag into a derived 64-bit key.
pub fn derive_key(root: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(root) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// The keystream for replicate `index` of consumer `purpose` under `root`.
pub fn substream(root: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_key(root, purpose as u64));
    rng.set_stream(index);
    rng
}
