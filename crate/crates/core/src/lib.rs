pub mod codegraph;
pub mod encoders;
pub mod evalkit;
pub mod explainer;
pub mod minic;
pub mod tensorcore;
pub mod training;
pub mod transforms;

/// Per-record seed derived from a run seed and a record id, independent of
/// processing order.
pub fn derive_seed(global_seed: u64, record_id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in record_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ global_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
