//! Hashing, Ed25519 signatures, key material and the length-prefixed
//! canonical encoding used for every hash and signature in the toolkit.
//!
//! The canonical encoding writes each `(label, value)` pair as
//!
//! ```text
//! u32be(len(label)) || label || u32be(len(value)) || value
//! ```
//!
//! in declaration order. Length prefixes make the encoding injective, so
//! `("N","Ali"),("P","ceCS")` and `("N","Alice"),("P","CS")` never collide.

use std::collections::BTreeMap;
use std::fmt;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const SEED_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("canonical record has no fields")]
    EmptyRecord,
    #[error("duplicate label {0:?} in canonical record")]
    DuplicateLabel(String),
    #[error("seed must be {SEED_LEN} bytes, got {0}")]
    BadSeedLength(usize),
    #[error("malformed public or private key")]
    MalformedKey,
    #[error("malformed signature")]
    MalformedSignature,
    #[error("invalid base64url: {0}")]
    Base64(String),
}

/// Encodes bytes as unpadded base64url.
pub fn b64url(bytes: &[u8]) -> String {
    URL_SAFE_NO_PAD.encode(bytes)
}

/// Strict unpadded base64url decode; non-canonical trailing bits are rejected.
pub fn b64url_decode(text: &str) -> Result<Vec<u8>, CryptoError> {
    URL_SAFE_NO_PAD.decode(text).map_err(|e| CryptoError::Base64(e.to_string()))
}

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Self)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_b64url(&self) -> String {
        b64url(&self.0)
    }

    pub fn from_b64url(text: &str) -> Result<Self, CryptoError> {
        let bytes = b64url_decode(text)?;
        Self::from_slice(&bytes).ok_or_else(|| CryptoError::Base64("digest must be 32 bytes".into()))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_b64url())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Digest::from_b64url(&text).map_err(serde::de::Error::custom)
    }
}

/// SHA-256 (FIPS 180-4).
pub fn hash(data: &[u8]) -> Digest {
    use sha2::Digest as _;
    Digest(Sha256::digest(data).into())
}

/// Ordered `(label, value)` pairs. Labels are unique and keep insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalRecord {
    fields: Vec<(String, String)>,
}

impl CanonicalRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: impl Into<String>, value: impl Into<String>) -> Result<(), CryptoError> {
        let label = label.into();
        if self.fields.iter().any(|(l, _)| *l == label) {
            return Err(CryptoError::DuplicateLabel(label));
        }
        self.fields.push((label, value.into()));
        Ok(())
    }

    /// Builder-style `push`.
    pub fn with(mut self, label: impl Into<String>, value: impl Into<String>) -> Result<Self, CryptoError> {
        self.push(label, value)?;
        Ok(self)
    }

    pub fn from_pairs<L, V, I>(pairs: I) -> Result<Self, CryptoError>
    where
        L: Into<String>,
        V: Into<String>,
        I: IntoIterator<Item = (L, V)>,
    {
        let mut record = Self::new();
        for (l, v) in pairs {
            record.push(l, v)?;
        }
        Ok(record)
    }

    pub fn fields(&self) -> &[(String, String)] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

fn put_len_prefixed(out: &mut Vec<u8>, bytes: &[u8]) {
    let len = u32::try_from(bytes.len()).expect("field longer than u32::MAX bytes");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
}

pub fn canonical_encode(record: &CanonicalRecord) -> Result<Vec<u8>, CryptoError> {
    if record.is_empty() {
        return Err(CryptoError::EmptyRecord);
    }
    let mut out = Vec::new();
    for (label, value) in &record.fields {
        put_len_prefixed(&mut out, label.as_bytes());
        put_len_prefixed(&mut out, value.as_bytes());
    }
    Ok(out)
}

/// Length-prefixes each part in order; used where parts carry no labels
/// (state roots, block hashes).
pub(crate) fn encode_parts<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Vec<u8> {
    let mut out = Vec::new();
    for part in parts {
        put_len_prefixed(&mut out, part);
    }
    out
}

/// An Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature([u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_bytes(bytes: [u8; SIGNATURE_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        bytes.try_into().map(Self).map_err(|_| CryptoError::MalformedSignature)
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }

    pub fn to_b64url(&self) -> String {
        b64url(&self.0)
    }

    pub fn from_b64url(text: &str) -> Result<Self, CryptoError> {
        Self::from_slice(&b64url_decode(text).map_err(|_| CryptoError::MalformedSignature)?)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", &self.to_b64url()[..12])
    }
}

impl Serialize for Signature {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_b64url())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Signature::from_b64url(&text).map_err(serde::de::Error::custom)
    }
}

/// A 32-byte Ed25519 verification key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey([u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bytes: [u8; PUBLIC_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::MalformedKey)?;
        VerifyingKey::from_bytes(&bytes).map_err(|_| CryptoError::MalformedKey)?;
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_b64url(&self) -> String {
        b64url(&self.0)
    }

    pub fn from_b64url(text: &str) -> Result<Self, CryptoError> {
        Self::from_slice(&b64url_decode(text).map_err(|_| CryptoError::MalformedKey)?)
    }

    /// First 8 bytes of SHA-256(public key), hex.
    pub fn key_id(&self) -> String {
        hash(&self.0).to_hex()[..16].to_string()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_b64url())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_b64url())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        PublicKey::from_b64url(&text).map_err(serde::de::Error::custom)
    }
}

/// Ed25519 key pair with a short stable identifier.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: PublicKey,
    key_id: String,
}

impl KeyPair {
    pub fn from_private_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let seed: [u8; SEED_LEN] = bytes.try_into().map_err(|_| CryptoError::MalformedKey)?;
        let signing = SigningKey::from_bytes(&seed);
        let public = PublicKey(signing.verifying_key().to_bytes());
        let key_id = public.key_id();
        Ok(Self { signing, public, key_id })
    }

    pub fn public_key(&self) -> PublicKey {
        self.public
    }

    pub fn private_key_bytes(&self) -> [u8; SEED_LEN] {
        self.signing.to_bytes()
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    pub fn sign(&self, data: &[u8]) -> Signature {
        sign(self, data)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("key_id", &self.key_id).field("public", &self.public).finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.signing.to_bytes() == other.signing.to_bytes()
    }
}

impl Eq for KeyPair {}

/// Ed25519 key generation. A 32-byte seed gives a reproducible key pair;
/// `None` draws from the operating system.
pub fn keygen(seed: Option<&[u8]>) -> Result<KeyPair, CryptoError> {
    match seed {
        Some(seed) if seed.len() != SEED_LEN => Err(CryptoError::BadSeedLength(seed.len())),
        Some(seed) => KeyPair::from_private_bytes(seed),
        None => {
            let mut seed = [0u8; SEED_LEN];
            rand::rngs::OsRng.fill_bytes(&mut seed);
            KeyPair::from_private_bytes(&seed)
        }
    }
}

/// Draws a key pair from a caller-supplied RNG (seeded RNGs give reproducible keys).
pub fn keygen_from_rng<R: RngCore + ?Sized>(rng: &mut R) -> KeyPair {
    let mut seed = [0u8; SEED_LEN];
    rng.fill_bytes(&mut seed);
    KeyPair::from_private_bytes(&seed).expect("32-byte seed")
}

pub fn sign(key: &KeyPair, data: &[u8]) -> Signature {
    Signature(key.signing.sign(data).to_bytes())
}

/// Strict Ed25519 verification (rejects non-canonical and small-order encodings).
pub fn verify(public_key: &[u8], data: &[u8], sig: &[u8]) -> Result<bool, CryptoError> {
    let key_bytes: [u8; PUBLIC_KEY_LEN] = public_key.try_into().map_err(|_| CryptoError::MalformedKey)?;
    let key = VerifyingKey::from_bytes(&key_bytes).map_err(|_| CryptoError::MalformedKey)?;
    let sig_bytes: [u8; SIGNATURE_LEN] = sig.try_into().map_err(|_| CryptoError::MalformedSignature)?;
    let sig = ed25519_dalek::Signature::from_bytes(&sig_bytes);
    Ok(key.verify_strict(data, &sig).is_ok())
}

/// Typed convenience over [`verify`]; malformed keys simply fail.
pub fn verify_with(public_key: &PublicKey, data: &[u8], sig: &Signature) -> bool {
    verify(public_key.as_bytes(), data, sig.as_bytes()).unwrap_or(false)
}

/// On-disk keystore entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeystoreEntry {
    pub public_key: String,
    pub private_key: String,
    pub alg: String,
}

/// `key_id -> {public_key, private_key, alg}`, serialized as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Keystore {
    entries: BTreeMap<String, KeystoreEntry>,
}

#[derive(Debug, Error)]
pub enum KeystoreError {
    #[error("key id {0:?} already present")]
    DuplicateKeyId(String),
    #[error("unknown key id {0:?}")]
    UnknownKeyId(String),
    #[error("entry {key_id:?}: {reason}")]
    BadEntry { key_id: String, reason: String },
    #[error("keystore json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Keystore {
    pub const ALG: &'static str = "Ed25519";

    pub fn insert(&mut self, key: &KeyPair) -> Result<(), KeystoreError> {
        self.insert_as(key.key_id(), key)
    }

    /// Stores `key` under a caller-chosen identifier (e.g. a peer name).
    pub fn insert_as(&mut self, key_id: &str, key: &KeyPair) -> Result<(), KeystoreError> {
        if self.entries.contains_key(key_id) {
            return Err(KeystoreError::DuplicateKeyId(key_id.to_string()));
        }
        self.entries.insert(
            key_id.to_string(),
            KeystoreEntry {
                public_key: key.public_key().to_b64url(),
                private_key: b64url(&key.private_key_bytes()),
                alg: Self::ALG.to_string(),
            },
        );
        Ok(())
    }

    pub fn get(&self, key_id: &str) -> Result<KeyPair, KeystoreError> {
        let entry = self.entries.get(key_id).ok_or_else(|| KeystoreError::UnknownKeyId(key_id.to_string()))?;
        let bad = |reason: &str| KeystoreError::BadEntry { key_id: key_id.to_string(), reason: reason.to_string() };
        if entry.alg != Self::ALG {
            return Err(bad("unsupported alg"));
        }
        let private = b64url_decode(&entry.private_key).map_err(|_| bad("private_key is not base64url"))?;
        let key = KeyPair::from_private_bytes(&private).map_err(|_| bad("private_key must be 32 bytes"))?;
        if key.public_key().to_b64url() != entry.public_key {
            return Err(bad("public_key does not match private_key"));
        }
        Ok(key)
    }

    pub fn key_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses and validates every entry.
    pub fn from_json(text: &str) -> Result<Self, KeystoreError> {
        let store: Keystore = serde_json::from_str(text)?;
        for id in store.entries.keys() {
            store.get(id)?;
        }
        Ok(store)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("keystore serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_field_encoding_layout() {
        let record = CanonicalRecord::from_pairs([("N", "Alice")]).unwrap();
        let bytes = canonical_encode(&record).unwrap();
        let mut expected = vec![0, 0, 0, 1, b'N', 0, 0, 0, 5];
        expected.extend_from_slice(b"Alice");
        assert_eq!(bytes, expected);
        assert_eq!(bytes.len(), 14);
    }

    #[test]
    fn length_prefix_separates_shifted_fields() {
        let a = CanonicalRecord::from_pairs([("N", "Ali"), ("P", "ceCS")]).unwrap();
        let b = CanonicalRecord::from_pairs([("N", "Alice"), ("P", "CS")]).unwrap();
        assert_ne!(canonical_encode(&a).unwrap(), canonical_encode(&b).unwrap());
    }

    #[test]
    fn empty_record_and_duplicate_labels_rejected() {
        assert_eq!(canonical_encode(&CanonicalRecord::new()), Err(CryptoError::EmptyRecord));
        assert_eq!(CanonicalRecord::from_pairs([("N", "a"), ("N", "b")]), Err(CryptoError::DuplicateLabel("N".into())));
    }

    #[test]
    fn keygen_seed_handling() {
        let zero = [0u8; 32];
        assert_eq!(keygen(Some(&zero)).unwrap(), keygen(Some(&zero)).unwrap());
        assert_ne!(keygen(None).unwrap().public_key(), keygen(None).unwrap().public_key());
        assert_eq!(keygen(Some(&[0u8; 31])).unwrap_err(), CryptoError::BadSeedLength(31));
    }

    #[test]
    fn sign_verify_and_key_mismatch() {
        let a = keygen(Some(&[1u8; 32])).unwrap();
        let b = keygen(Some(&[2u8; 32])).unwrap();
        let sig = a.sign(b"message");
        assert!(verify(a.public_key().as_bytes(), b"message", sig.as_bytes()).unwrap());
        assert!(!verify(b.public_key().as_bytes(), b"message", sig.as_bytes()).unwrap());
        assert_eq!(verify(&[0u8; 5], b"m", sig.as_bytes()), Err(CryptoError::MalformedKey));
        assert_eq!(verify(a.public_key().as_bytes(), b"m", &[0u8; 10]), Err(CryptoError::MalformedSignature));
    }

    #[test]
    fn keystore_round_trip_and_validation() {
        let mut store = Keystore::default();
        let key = keygen(Some(&[3u8; 32])).unwrap();
        store.insert(&key).unwrap();
        assert!(matches!(store.insert(&key), Err(KeystoreError::DuplicateKeyId(_))));
        let text = store.to_json();
        let parsed = Keystore::from_json(&text).unwrap();
        assert_eq!(parsed.get(key.key_id()).unwrap(), key);

        let broken = text.replace(&key.public_key().to_b64url(), &keygen(Some(&[4u8; 32])).unwrap().public_key().to_b64url());
        assert!(matches!(Keystore::from_json(&broken), Err(KeystoreError::BadEntry { .. })));
    }
}
