//! Compact JWS serialization with EdDSA (Ed25519).
//!
//! Segments are unpadded base64url; the signature covers
//! `ASCII(header_b64 "." payload_b64)`. Header and payload are serialized
//! from structs, so key order follows field declaration order.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{b64url, b64url_decode, verify_with, KeyPair, PublicKey, Signature};

pub const ALG_EDDSA: &str = "EdDSA";
pub const TYP_JWT: &str = "JWT";
pub const TYP_VC_JWT: &str = "vc+jwt";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JoseError {
    #[error("malformed token: {0}")]
    Malformed(String),
    #[error("signature does not verify")]
    BadSignature,
}

/// `{"alg":"EdDSA","typ":...,"kid":...}` in that key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub alg: String,
    pub typ: String,
    pub kid: String,
}

impl Header {
    pub fn eddsa(typ: &str, kid: &str) -> Self {
        Self { alg: ALG_EDDSA.to_string(), typ: typ.to_string(), kid: kid.to_string() }
    }
}

/// Signs `payload` under `key`, producing `header.payload.signature`.
pub fn sign_compact<P: Serialize>(typ: &str, payload: &P, key: &KeyPair) -> String {
    let header = Header::eddsa(typ, key.key_id());
    let header_b64 = b64url(&serde_json::to_vec(&header).expect("header serializes"));
    let payload_b64 = b64url(&serde_json::to_vec(payload).expect("payload serializes"));
    let signing_input = format!("{header_b64}.{payload_b64}");
    let sig = key.sign(signing_input.as_bytes());
    format!("{signing_input}.{}", sig.to_b64url())
}

/// The three decoded segments of a compact token, signature unchecked.
#[derive(Debug, Clone)]
pub struct DecodedToken {
    pub header: Header,
    pub payload_json: Vec<u8>,
    pub signature: Signature,
    signing_input: String,
}

impl DecodedToken {
    pub fn signature_valid(&self, public_key: &PublicKey) -> bool {
        verify_with(public_key, self.signing_input.as_bytes(), &self.signature)
    }

    pub fn payload<T: DeserializeOwned>(&self) -> Result<T, JoseError> {
        serde_json::from_slice(&self.payload_json).map_err(|e| JoseError::Malformed(format!("payload: {e}")))
    }
}

/// Splits and decodes a compact token without checking the signature.
pub fn decode_compact(token: &str) -> Result<DecodedToken, JoseError> {
    let mut parts = token.split('.');
    let (Some(h), Some(p), Some(s), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(JoseError::Malformed("expected three dot-separated segments".into()));
    };
    let header_json = b64url_decode(h).map_err(|e| JoseError::Malformed(format!("header: {e}")))?;
    let header: Header = serde_json::from_slice(&header_json).map_err(|e| JoseError::Malformed(format!("header: {e}")))?;
    if header.alg != ALG_EDDSA {
        return Err(JoseError::Malformed(format!("unsupported alg {:?}", header.alg)));
    }
    let payload_json = b64url_decode(p).map_err(|e| JoseError::Malformed(format!("payload: {e}")))?;
    let signature = Signature::from_b64url(s).map_err(|e| JoseError::Malformed(format!("signature: {e}")))?;
    Ok(DecodedToken { header, payload_json, signature, signing_input: format!("{h}.{p}") })
}

/// Decodes, checks the expected `typ`, verifies the signature and parses the payload.
pub fn verify_compact<T: DeserializeOwned>(token: &str, typ: &str, public_key: &PublicKey) -> Result<T, JoseError> {
    let decoded = decode_compact(token)?;
    if decoded.header.typ != typ {
        return Err(JoseError::Malformed(format!("unexpected typ {:?}", decoded.header.typ)));
    }
    if !decoded.signature_valid(public_key) {
        return Err(JoseError::BadSignature);
    }
    decoded.payload()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Demo {
        b: u32,
        a: String,
    }

    #[test]
    fn header_is_bit_exact() {
        let key = keygen(Some(&[5u8; 32])).unwrap();
        let token = sign_compact(TYP_JWT, &Demo { b: 1, a: "x".into() }, &key);
        let header_b64 = token.split('.').next().unwrap();
        let header = String::from_utf8(b64url_decode(header_b64).unwrap()).unwrap();
        assert_eq!(header, format!(r#"{{"alg":"EdDSA","typ":"JWT","kid":"{}"}}"#, key.key_id()));
        assert!(!token.contains('='));
    }

    #[test]
    fn round_trip_and_wrong_key() {
        let key = keygen(Some(&[5u8; 32])).unwrap();
        let other = keygen(Some(&[6u8; 32])).unwrap();
        let demo = Demo { b: 7, a: "hello".into() };
        let token = sign_compact(TYP_JWT, &demo, &key);
        assert_eq!(verify_compact::<Demo>(&token, TYP_JWT, &key.public_key()).unwrap(), demo);
        assert_eq!(verify_compact::<Demo>(&token, TYP_JWT, &other.public_key()), Err(JoseError::BadSignature));
        assert!(matches!(verify_compact::<Demo>(&token, TYP_VC_JWT, &key.public_key()), Err(JoseError::Malformed(_))));
    }

    #[test]
    fn structural_errors_are_malformed() {
        for bad in ["", "a.b", "a.b.c.d", "!!.e30.AA", "e30.e30.AA"] {
            assert!(matches!(decode_compact(bad), Err(JoseError::Malformed(_))), "{bad}");
        }
    }
}
