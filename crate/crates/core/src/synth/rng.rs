use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one pixel of one named stream.
pub fn pixel_rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index as u64);
    ChaCha8Rng::seed_from_u64(key)
}
