//! SHA-256 helpers used for content-addressed identifiers and fixture keys.

use sha2::{Digest, Sha256};

/// Hex digest of the given byte parts joined by NUL separators.
pub fn digest_parts(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0u8]);
        }
        hasher.update(part);
    }
    hex::encode(hasher.finalize())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short identifier: a prefix plus the first 16 hex digits of the digest.
pub fn short_id(prefix: &str, parts: &[&[u8]]) -> String {
    let full = digest_parts(parts);
    format!("{prefix}-{}", &full[..16])
}

/// Stable 64-bit value derived from arbitrary parts, used to seed per-item
/// generators.
pub fn stable_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_digest_is_the_sha256_of_nothing() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn separators_disambiguate_parts() {
        assert_ne!(digest_parts(&[b"ab", b"c"]), digest_parts(&[b"a", b"bc"]));
        assert_ne!(stable_u64(&[b"ab", b"c"]), stable_u64(&[b"a", b"bc"]));
    }
}
