//! Content hashing for provenance echoes.

/// FNV-1a over raw bytes, rendered as fixed-width hex. Reports echo these so
/// a reader can tie every number back to exact input bytes.
pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    format!("{hash:016x}")
}
