//! Stable hashing and per-component seed derivation.
//!
//! Everything random in a run flows from one master seed. Each component
//! (embedder, split, sampler, model init, batch shuffling) gets its own
//! stream derived here, so advancing one stream never perturbs another.
//! `std::hash` is deliberately avoided: its output is not guaranteed stable
//! across releases or platforms and reproducibility is a hard contract.

/// 64-bit FNV-1a over a byte slice.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// splitmix64 finalizer; decorrelates nearby inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a component seed from the master seed and a label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    mix(master ^ fnv1a64(label.as_bytes()))
}

/// Derive a per-index seed (parallel trials, per-class streams, ...).
pub fn derive_seed_indexed(master: u64, label: &str, index: u64) -> u64 {
    mix(derive_seed(master, label) ^ mix(index))
}
