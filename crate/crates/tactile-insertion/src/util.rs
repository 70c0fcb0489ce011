//! Seed derivation, text-format float round-tripping, and atomic file writes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

/// SplitMix64 step, used to turn (seed, tag...) tuples into stream keys.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent deterministic RNG stream from a master seed and a
/// list of integer tags (stage index, episode index, purpose hash, ...).
pub fn derive_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    let mut key = [0u8; 32];
    for t in tags {
        state ^= t.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        splitmix64(&mut state);
    }
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// FNV-1a hash of a string, for deriving per-name RNG tags.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Formats an f64 with 17 significant digits so parsing recovers the exact
/// bit pattern.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a file atomically: the content lands under the final name only
/// once fully written, so partial results never overwrite prior outputs.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Serializes the full state of a ChaCha8 stream as a text line.
pub fn rng_state_line(rng: &ChaCha8Rng) -> String {
    let seed = rng.get_seed();
    let hex: String = seed.iter().map(|b| format!("{b:02x}")).collect();
    format!("{} {} {}", hex, rng.get_stream(), rng.get_word_pos())
}

/// Restores a ChaCha8 stream serialized by [`rng_state_line`].
pub fn rng_state_from_line(line: &str) -> Option<ChaCha8Rng> {
    let mut it = line.split_whitespace();
    let hex = it.next()?;
    let stream: u64 = it.next()?.parse().ok()?;
    let word_pos: u128 = it.next()?.parse().ok()?;
    if hex.len() != 64 {
        return None;
    }
    let mut seed = [0u8; 32];
    for i in 0..32 {
        seed[i] = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    Some(rng)
}
