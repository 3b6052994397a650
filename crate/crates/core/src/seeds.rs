//! Seed derivation for independent random streams.

/// SplitMix64 finalizer.
pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines several words into one seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    words.iter().fold(0x5EED_u64, |acc, w| splitmix(acc ^ splitmix(*w)))
}
