//! Seed derivation and uniform sampling helpers shared by the stochastic
//! modules. All randomness in a run flows from one `u64` scenario seed
//! through these functions, which keeps every sampled quantity exactly
//! reproducible.

use rand_core::RngCore;

/// One step of the splitmix64 sequence, advancing `state` in place.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a salt.
pub(crate) fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut state = base ^ salt.wrapping_mul(0xA24B_AED4_963E_E407);
    let first = splitmix64(&mut state);
    splitmix64(&mut state) ^ first.rotate_left(17)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub(crate) fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Hashes a tuple of indices into a uniform `[0, 1)` value without any
/// stream state, so callers can query time-indexed randomness out of
/// order and still get identical values.
pub(crate) fn indexed_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let mut state = derive_seed(seed, a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b);
    let bits = splitmix64(&mut state);
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
