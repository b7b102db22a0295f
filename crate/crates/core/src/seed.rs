/// Derives an independent child seed from a master seed and a stream id.
///
/// Uses the SplitMix64 finalizer, so neighbouring ids give uncorrelated
/// seeds. Per-block sampling seeds come from here, which keeps schedules
/// identical no matter in which order blocks are processed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
