//! Seed fan-out. Every random stream in an experiment is derived from one
//! master seed through fixed labels, so a run is reproducible from that
//! single number.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Sub-seed for the stream named `label` under `master`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a(label.as_bytes()))
}

/// Per-entry seed for shot-estimated kernel matrices: `base ⊕ hash(i, j)`.
pub fn pair_seed(base: u64, i: usize, j: usize) -> u64 {
    base ^ splitmix64(((i as u64) << 32) ^ (j as u64))
}
