//! Stable hashing used for seed derivation and store integrity.
//!
//! Both helpers are SHA-256 based so results are identical across platforms
//! and crate versions. Never swap these for `std::hash`: derived RNG seeds are
//! part of the reproducibility contract.

use sha2::{Digest, Sha256};

/// Derives a 64-bit seed from an ordered list of string components.
///
/// Components are length-prefixed before hashing so `["ab", "c"]` and
/// `["a", "bc"]` cannot collide. The result is the first 8 digest bytes
/// interpreted little-endian.
pub fn stable_hash64(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// Hex-encoded SHA-256 of raw bytes, for content addressing and ledger hashes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::new_with_prefix(bytes).finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
