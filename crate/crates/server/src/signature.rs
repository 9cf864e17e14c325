use hmac::{Hmac, Mac};
use sha2::Sha256;
use subtle::ConstantTimeEq;

type HmacSha256 = Hmac<Sha256>;

const PREFIX: &str = "sha256=";

/// `sha256=` followed by the lowercase hex HMAC-SHA256 of `body` under `secret`.
pub fn sign(body: &[u8], secret: &[u8]) -> String {
    let mut mac = HmacSha256::new_from_slice(secret).expect("HMAC accepts keys of any length");
    mac.update(body);
    format!("{PREFIX}{}", hex::encode(mac.finalize().into_bytes()))
}

/// Checks an `X-Hub-Signature-256` header. Malformed headers are rejected, never an error.
pub fn verify_signature(raw_body: &[u8], secret: &[u8], signature_header: &str) -> bool {
    let Some(hex_part) = signature_header.strip_prefix(PREFIX) else {
        return false;
    };
    // Uppercase hex is not what the forge sends; the header must match bit for bit.
    if hex_part.len() != 64 || !hex_part.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return false;
    }
    let Ok(claimed) = hex::decode(hex_part) else {
        return false;
    };
    let mut mac = HmacSha256::new_from_slice(secret).expect("HMAC accepts keys of any length");
    mac.update(raw_body);
    mac.verify_slice(&claimed).is_ok()
}

/// Checks an `X-Gitlab-Token` header, a shared secret sent verbatim.
pub fn verify_token(secret: &[u8], token_header: &str) -> bool {
    !secret.is_empty() && bool::from(token_header.as_bytes().ct_eq(secret))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Computed independently: printf hello | openssl dgst -sha256 -hmac key
    const VECTOR: &str = "sha256=9307b3b915efb5171ff14d8cb55fbcc798c6c0ef1456d66ded1a6aa723a58b7b";

    #[test]
    fn known_vector() {
        assert!(verify_signature(b"hello", b"key", VECTOR));
        assert_eq!(sign(b"hello", b"key"), VECTOR);
    }

    #[test]
    fn malformed_headers() {
        for h in ["", "sha256=", "sha1=abc", &VECTOR.to_uppercase(), &VECTOR[..VECTOR.len() - 1], &format!("{VECTOR}0")] {
            assert!(!verify_signature(b"hello", b"key", h), "{h:?}");
        }
        assert!(!verify_signature(b"hello", b"other", VECTOR));
    }

    #[test]
    fn gitlab_token() {
        assert!(verify_token(b"s3cret", "s3cret"));
        assert!(!verify_token(b"s3cret", "s3cre"));
        assert!(!verify_token(b"s3cret", ""));
        assert!(!verify_token(b"", ""));
    }

    proptest! {
        #[test]
        fn signatures_round_trip(body in proptest::collection::vec(any::<u8>(), 0..256), key in proptest::collection::vec(any::<u8>(), 1..64)) {
            prop_assert!(verify_signature(&body, &key, &sign(&body, &key)));
        }

        #[test]
        fn any_body_change_is_rejected(body in proptest::collection::vec(any::<u8>(), 1..256), at in any::<prop::sample::Index>(), flip in 1u8..=255) {
            let header = sign(&body, b"key");
            let mut tampered = body.clone();
            let i = at.index(body.len());
            tampered[i] ^= flip;
            prop_assert!(!verify_signature(&tampered, b"key", &header));
        }
    }
}
