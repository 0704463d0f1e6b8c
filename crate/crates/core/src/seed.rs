//! Deterministic per-cell seeds so parallel sweeps do not depend on execution order.

/// Mixes a master seed with grid coordinates (SplitMix64 finalizer per step).
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    let mut state = mix(master ^ 0x9E37_79B9_7F4A_7C15);
    for &c in coords {
        state = mix(state ^ mix(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    state
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
