//! Verifiable credentials with salted per-attribute commitments.
//!
//! The issuer signs an ordered list of commitment digests, one per attribute,
//! where each digest is `H(enc([(label, value), ("salt", b64(salt))]))`. The
//! holder keeps the openings and later reveals a subset inside a presentation
//! signed over a verifier-chosen challenge. Issuer keys and credential status
//! live in a [`RegistryStore`]; three backends are provided.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    b64url, b64url_decode, canonical_encode, hash, verify_with, CanonicalRecord, Digest, KeyPair, PublicKey, Signature,
};
use crate::ledger::{
    Contract, ContractContext, ContractError, Ledger, LedgerError, LedgerProfile, Transaction, TxBody, DEFAULT_CHANNEL,
};
use crate::UnixTime;

pub const SALT_LEN: usize = 16;
/// Label used for the salt inside a commitment record.
pub const SALT_LABEL: &str = "salt";

/// Failure reasons reported by [`verify_presentation`].
pub mod reason {
    pub const UNKNOWN_ISSUER: &str = "unknown issuer";
    pub const BAD_ISSUER_SIGNATURE: &str = "bad issuer signature";
    pub const COMMITMENT_MISMATCH: &str = "commitment mismatch";
    pub const BAD_HOLDER_SIGNATURE: &str = "bad holder signature";
    pub const CHALLENGE_MISMATCH: &str = "challenge mismatch";
    pub const NOT_YET_VALID: &str = "not yet valid";
    pub const EXPIRED: &str = "expired";
    pub const REVOKED: &str = "revoked";
    pub const UNKNOWN_STATUS: &str = "unknown status";
    pub const REGISTRY_UNAVAILABLE: &str = "registry unavailable";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VcError {
    #[error("unknown issuer {0:?}")]
    UnknownIssuer(String),
    #[error("issuer {0:?} already registered")]
    DuplicateIssuer(String),
    #[error("issuer key does not match the registry entry for {0:?}")]
    IssuerKeyMismatch(String),
    #[error("credential needs at least one attribute")]
    EmptyAttributes,
    #[error("valid_from must be earlier than valid_until")]
    BadValidity,
    #[error("attribute label {0:?} is reserved")]
    ReservedLabel(String),
    #[error("label {0:?} is not part of this credential")]
    UnknownLabel(String),
    #[error("holder key does not match the credential")]
    WrongHolderKey,
    #[error("unknown status id {0:?}")]
    UnknownStatusId(String),
    #[error("status id {0:?} already registered")]
    DuplicateStatusId(String),
    #[error("registry storage: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CredentialStatus {
    Active,
    Revoked,
}

/// Issuer keys and credential status, however they are stored.
pub trait RegistryStore {
    fn register_issuer(&mut self, issuer_id: &str, public_key: PublicKey) -> Result<(), VcError>;
    fn issuer_key(&self, issuer_id: &str) -> Result<Option<PublicKey>, VcError>;
    fn register_status(&mut self, status_id: &str) -> Result<(), VcError>;
    fn status(&self, status_id: &str) -> Result<Option<CredentialStatus>, VcError>;
    /// Active to revoked; revoking twice is a no-op.
    fn revoke(&mut self, status_id: &str) -> Result<(), VcError>;
}

/// In-memory registry; also the JSON document behind [`FileRegistry`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRegistry {
    pub issuers: BTreeMap<String, PublicKey>,
    pub status: BTreeMap<String, CredentialStatus>,
}

impl DataRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(text: &str) -> Result<Self, VcError> {
        serde_json::from_str(text).map_err(|e| VcError::Storage(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }
}

impl RegistryStore for DataRegistry {
    fn register_issuer(&mut self, issuer_id: &str, public_key: PublicKey) -> Result<(), VcError> {
        if self.issuers.contains_key(issuer_id) {
            return Err(VcError::DuplicateIssuer(issuer_id.to_string()));
        }
        self.issuers.insert(issuer_id.to_string(), public_key);
        Ok(())
    }

    fn issuer_key(&self, issuer_id: &str) -> Result<Option<PublicKey>, VcError> {
        Ok(self.issuers.get(issuer_id).copied())
    }

    fn register_status(&mut self, status_id: &str) -> Result<(), VcError> {
        if self.status.contains_key(status_id) {
            return Err(VcError::DuplicateStatusId(status_id.to_string()));
        }
        self.status.insert(status_id.to_string(), CredentialStatus::Active);
        Ok(())
    }

    fn status(&self, status_id: &str) -> Result<Option<CredentialStatus>, VcError> {
        Ok(self.status.get(status_id).copied())
    }

    fn revoke(&mut self, status_id: &str) -> Result<(), VcError> {
        let entry = self.status.get_mut(status_id).ok_or_else(|| VcError::UnknownStatusId(status_id.to_string()))?;
        *entry = CredentialStatus::Revoked;
        Ok(())
    }
}

/// A [`DataRegistry`] kept in a JSON file. Every call re-reads the file;
/// writes go through a sibling temp file and a rename.
#[derive(Debug, Clone)]
pub struct FileRegistry {
    path: PathBuf,
}

impl FileRegistry {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<DataRegistry, VcError> {
        match fs::read_to_string(&self.path) {
            Ok(text) => DataRegistry::from_json(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(DataRegistry::new()),
            Err(e) => Err(VcError::Storage(e.to_string())),
        }
    }

    pub fn store(&self, data: &DataRegistry) -> Result<(), VcError> {
        let tmp = self.path.with_extension("json.tmp");
        let io = |e: std::io::Error| VcError::Storage(e.to_string());
        let mut file = fs::File::create(&tmp).map_err(io)?;
        file.write_all(data.to_json().as_bytes()).map_err(io)?;
        file.sync_all().map_err(io)?;
        fs::rename(&tmp, &self.path).map_err(io)
    }

    fn update<T>(&mut self, f: impl FnOnce(&mut DataRegistry) -> Result<T, VcError>) -> Result<T, VcError> {
        let mut data = self.load()?;
        let out = f(&mut data)?;
        self.store(&data)?;
        Ok(out)
    }
}

impl RegistryStore for FileRegistry {
    fn register_issuer(&mut self, issuer_id: &str, public_key: PublicKey) -> Result<(), VcError> {
        self.update(|d| d.register_issuer(issuer_id, public_key))
    }

    fn issuer_key(&self, issuer_id: &str) -> Result<Option<PublicKey>, VcError> {
        self.load()?.issuer_key(issuer_id)
    }

    fn register_status(&mut self, status_id: &str) -> Result<(), VcError> {
        self.update(|d| d.register_status(status_id))
    }

    fn status(&self, status_id: &str) -> Result<Option<CredentialStatus>, VcError> {
        self.load()?.status(status_id)
    }

    fn revoke(&mut self, status_id: &str) -> Result<(), VcError> {
        self.update(|d| d.revoke(status_id))
    }
}

pub const REGISTRY_CONTRACT_ID: &str = "vc-registry";

mod registry_code {
    pub const DUPLICATE_ISSUER: &str = "duplicate issuer";
    pub const DUPLICATE_STATUS: &str = "duplicate status";
    pub const UNKNOWN_STATUS: &str = "unknown status id";
    pub const NOT_STATUS_OWNER: &str = "not status owner";
    pub const BAD_ARGUMENTS: &str = "bad arguments";
    pub const UNKNOWN_METHOD: &str = "unknown method";
}

/// Registry state as a ledger contract: `register_issuer(id, key)`,
/// `register_status(status_id)`, `revoke(status_id)`. Only the account that
/// registered a status may revoke it.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegistryContract;

impl Contract for RegistryContract {
    fn id(&self) -> &'static str {
        REGISTRY_CONTRACT_ID
    }

    fn execute(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<Option<String>, ContractError> {
        use registry_code::*;
        let sender = ctx.sender().map(PublicKey::to_b64url);
        match (method, args) {
            ("register_issuer", [id, key]) => {
                PublicKey::from_b64url(key).map_err(|e| ContractError::with_detail(BAD_ARGUMENTS, e.to_string()))?;
                let slot = format!("issuer/{id}");
                if ctx.contains(&slot) {
                    return Err(ContractError::new(DUPLICATE_ISSUER));
                }
                ctx.put(&slot, key.as_str())?;
                Ok(None)
            }
            ("register_status", [sid]) => {
                let slot = format!("status/{sid}");
                if ctx.contains(&slot) {
                    return Err(ContractError::new(DUPLICATE_STATUS));
                }
                ctx.put(&slot, "active")?;
                ctx.put(&format!("status_owner/{sid}"), sender.unwrap_or_default())?;
                Ok(None)
            }
            ("revoke", [sid]) => {
                if !ctx.contains(&format!("status/{sid}")) {
                    return Err(ContractError::new(UNKNOWN_STATUS));
                }
                if ctx.get(&format!("status_owner/{sid}")) != sender {
                    return Err(ContractError::new(NOT_STATUS_OWNER));
                }
                ctx.put(&format!("status/{sid}"), "revoked")?;
                Ok(None)
            }
            ("register_issuer" | "register_status" | "revoke", _) => Err(ContractError::new(BAD_ARGUMENTS)),
            _ => Err(ContractError::new(UNKNOWN_METHOD)),
        }
    }
}

/// Registry stored in a permissionless simulated ledger, written by one
/// operator account. Block timestamps are the block height.
#[derive(Debug, Clone)]
pub struct LedgerRegistry {
    ledger: Ledger,
    operator: KeyPair,
}

impl LedgerRegistry {
    pub fn new(operator: KeyPair) -> Self {
        let ledger = Ledger::init(LedgerProfile::permissionless([operator.public_key()])).expect("permissionless genesis");
        Self { ledger, operator }
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    fn submit(&mut self, method: &str, args: Vec<String>) -> Result<(), String> {
        let body = TxBody::new(self.operator.public_key(), DEFAULT_CHANNEL, REGISTRY_CONTRACT_ID, method, args);
        let now = self.ledger.height() + 1;
        let receipt = self.ledger.submit(Transaction::new(body, &self.operator), now);
        if receipt.accepted {
            Ok(())
        } else {
            Err(receipt.reason.unwrap_or_default())
        }
    }

    fn read(&self, key: &str) -> Result<Option<String>, VcError> {
        self.ledger
            .read(None, DEFAULT_CHANNEL, REGISTRY_CONTRACT_ID, key)
            .map_err(|e: LedgerError| VcError::Storage(e.to_string()))
    }
}

impl RegistryStore for LedgerRegistry {
    fn register_issuer(&mut self, issuer_id: &str, public_key: PublicKey) -> Result<(), VcError> {
        self.submit("register_issuer", vec![issuer_id.to_string(), public_key.to_b64url()]).map_err(|r| match r.as_str() {
            registry_code::DUPLICATE_ISSUER => VcError::DuplicateIssuer(issuer_id.to_string()),
            _ => VcError::Storage(r),
        })
    }

    fn issuer_key(&self, issuer_id: &str) -> Result<Option<PublicKey>, VcError> {
        self.read(&format!("issuer/{issuer_id}"))?
            .map(|k| PublicKey::from_b64url(&k).map_err(|e| VcError::Storage(e.to_string())))
            .transpose()
    }

    fn register_status(&mut self, status_id: &str) -> Result<(), VcError> {
        self.submit("register_status", vec![status_id.to_string()]).map_err(|r| match r.as_str() {
            registry_code::DUPLICATE_STATUS => VcError::DuplicateStatusId(status_id.to_string()),
            _ => VcError::Storage(r),
        })
    }

    fn status(&self, status_id: &str) -> Result<Option<CredentialStatus>, VcError> {
        Ok(match self.read(&format!("status/{status_id}"))?.as_deref() {
            None => None,
            Some("active") => Some(CredentialStatus::Active),
            Some(_) => Some(CredentialStatus::Revoked),
        })
    }

    fn revoke(&mut self, status_id: &str) -> Result<(), VcError> {
        self.submit("revoke", vec![status_id.to_string()]).map_err(|r| match r.as_str() {
            registry_code::UNKNOWN_STATUS => VcError::UnknownStatusId(status_id.to_string()),
            _ => VcError::Storage(r),
        })
    }
}

/// 16 random bytes, base64url in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Salt(pub [u8; SALT_LEN]);

impl Salt {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; SALT_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn to_b64url(&self) -> String {
        b64url(&self.0)
    }

    pub fn from_b64url(s: &str) -> Result<Self, crate::crypto::CryptoError> {
        let bytes = b64url_decode(s)?;
        let arr: [u8; SALT_LEN] = bytes.try_into().map_err(|b: Vec<u8>| {
            crate::crypto::CryptoError::Base64(format!("salt must be {SALT_LEN} bytes, got {}", b.len()))
        })?;
        Ok(Self(arr))
    }
}

impl Serialize for Salt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_b64url())
    }
}

impl<'de> Deserialize<'de> for Salt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::from_b64url(&s).map_err(serde::de::Error::custom)
    }
}

/// `H(enc([(label, value), ("salt", b64(salt))]))`.
pub fn commit(label: &str, value: &str, salt: &Salt) -> Digest {
    let record = CanonicalRecord::from_pairs([(label, value), (SALT_LABEL, salt.to_b64url().as_str())])
        .expect("label is not the salt label");
    hash(&canonical_encode(&record).expect("nonempty"))
}

/// A commitment together with its opening, held by the holder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeCommitment {
    pub label: String,
    pub salt: Salt,
    pub commitment: Digest,
}

/// The holder's private openings: label to (value, salt).
pub type HolderAttributeStore = BTreeMap<String, AttributeOpening>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeOpening {
    pub value: String,
    pub salt: Salt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifiableCredential {
    pub id: String,
    pub issuer_id: String,
    pub holder_public_key: PublicKey,
    pub commitments: Vec<Digest>,
    pub valid_from: UnixTime,
    pub valid_until: UnixTime,
    pub status_id: String,
    pub issuer_signature: Signature,
}

impl VerifiableCredential {
    /// The bytes the issuer signs.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut record = CanonicalRecord::new();
        record.push("id", &self.id).expect("fresh label");
        record.push("issuer_id", &self.issuer_id).expect("fresh label");
        record.push("holder_key", self.holder_public_key.to_b64url()).expect("fresh label");
        for (i, c) in self.commitments.iter().enumerate() {
            record.push(format!("c{i}"), c.to_b64url()).expect("fresh label");
        }
        record.push("valid_from", self.valid_from.to_string()).expect("fresh label");
        record.push("valid_until", self.valid_until.to_string()).expect("fresh label");
        record.push("status_id", &self.status_id).expect("fresh label");
        canonical_encode(&record).expect("nonempty")
    }
}

/// Output of [`issue_credential`]: the credential and the holder's openings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedCredential {
    pub credential: VerifiableCredential,
    pub holder_store: HolderAttributeStore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisclosedAttribute {
    pub label: String,
    pub value: String,
    pub salt: Salt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Presentation {
    pub credential: VerifiableCredential,
    pub disclosed: Vec<DisclosedAttribute>,
    pub challenge: String,
    pub holder_signature: Signature,
}

impl Presentation {
    /// The bytes the holder signs.
    pub fn signing_bytes(&self) -> Vec<u8> {
        holder_signing_bytes(&self.credential.id, &self.disclosed, &self.challenge)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("presentation serializes")
    }
}

fn holder_signing_bytes(credential_id: &str, disclosed: &[DisclosedAttribute], challenge: &str) -> Vec<u8> {
    let mut record = CanonicalRecord::new();
    record.push("credential_id", credential_id).expect("fresh label");
    for (i, d) in disclosed.iter().enumerate() {
        record.push(format!("d{i}.label"), &d.label).expect("fresh label");
        record.push(format!("d{i}.value"), &d.value).expect("fresh label");
        record.push(format!("d{i}.salt"), d.salt.to_b64url()).expect("fresh label");
    }
    record.push("challenge", challenge).expect("fresh label");
    canonical_encode(&record).expect("nonempty")
}

/// Verifier output; failures land in `reasons`, never in an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentationReport {
    pub valid: bool,
    pub disclosed: BTreeMap<String, String>,
    pub reasons: Vec<String>,
}

pub fn register_issuer(registry: &mut dyn RegistryStore, issuer_id: &str, public_key: PublicKey) -> Result<(), VcError> {
    registry.register_issuer(issuer_id, public_key)
}

fn random_id<R: RngCore + CryptoRng>(rng: &mut R, prefix: &str) -> String {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    format!("{prefix}{}", b64url(&bytes))
}

/// Issues a credential over `attributes` (iterated in map order) and
/// registers its status as active.
#[allow(clippy::too_many_arguments)]
pub fn issue_credential<R: RngCore + CryptoRng>(
    issuer_key: &KeyPair,
    issuer_id: &str,
    holder_public_key: PublicKey,
    attributes: &BTreeMap<String, String>,
    valid_from: UnixTime,
    valid_until: UnixTime,
    registry: &mut dyn RegistryStore,
    rng: &mut R,
) -> Result<IssuedCredential, VcError> {
    match registry.issuer_key(issuer_id)? {
        None => return Err(VcError::UnknownIssuer(issuer_id.to_string())),
        Some(pk) if pk != issuer_key.public_key() => return Err(VcError::IssuerKeyMismatch(issuer_id.to_string())),
        Some(_) => {}
    }
    if attributes.is_empty() {
        return Err(VcError::EmptyAttributes);
    }
    if let Some(label) = attributes.keys().find(|l| l.as_str() == SALT_LABEL) {
        return Err(VcError::ReservedLabel(label.clone()));
    }
    if valid_from >= valid_until {
        return Err(VcError::BadValidity);
    }

    let mut holder_store = HolderAttributeStore::new();
    let mut commitments = Vec::with_capacity(attributes.len());
    for (label, value) in attributes {
        let salt = Salt::random(rng);
        commitments.push(commit(label, value, &salt));
        holder_store.insert(label.clone(), AttributeOpening { value: value.clone(), salt });
    }
    let mut credential = VerifiableCredential {
        id: random_id(rng, "urn:vc:"),
        issuer_id: issuer_id.to_string(),
        holder_public_key,
        commitments,
        valid_from,
        valid_until,
        status_id: random_id(rng, "status:"),
        issuer_signature: Signature::from_bytes([0; 64]),
    };
    credential.issuer_signature = issuer_key.sign(&credential.signing_bytes());
    registry.register_status(&credential.status_id)?;
    Ok(IssuedCredential { credential, holder_store })
}

/// Builds a presentation revealing exactly the labels in `disclose`.
pub fn derive_presentation(
    credential: &VerifiableCredential,
    holder_key: &KeyPair,
    disclose: &BTreeSet<String>,
    challenge: &str,
    holder_store: &HolderAttributeStore,
) -> Result<Presentation, VcError> {
    if holder_key.public_key() != credential.holder_public_key {
        return Err(VcError::WrongHolderKey);
    }
    let mut disclosed: Vec<(usize, DisclosedAttribute)> = Vec::with_capacity(disclose.len());
    for label in disclose {
        let opening = holder_store.get(label).ok_or_else(|| VcError::UnknownLabel(label.clone()))?;
        let digest = commit(label, &opening.value, &opening.salt);
        let position =
            credential.commitments.iter().position(|c| *c == digest).ok_or_else(|| VcError::UnknownLabel(label.clone()))?;
        disclosed.push((position, DisclosedAttribute { label: label.clone(), value: opening.value.clone(), salt: opening.salt }));
    }
    // issued order, independent of the caller's set
    disclosed.sort_by_key(|(pos, _)| *pos);
    let disclosed: Vec<DisclosedAttribute> = disclosed.into_iter().map(|(_, d)| d).collect();
    let holder_signature = holder_key.sign(&holder_signing_bytes(&credential.id, &disclosed, challenge));
    Ok(Presentation { credential: credential.clone(), disclosed, challenge: challenge.to_string(), holder_signature })
}

/// Runs every check and reports each failure.
pub fn verify_presentation(
    presentation: &Presentation,
    registry: &dyn RegistryStore,
    expected_challenge: &str,
    now: UnixTime,
) -> PresentationReport {
    let credential = &presentation.credential;
    let mut reasons = Vec::new();

    match registry.issuer_key(&credential.issuer_id) {
        Ok(Some(pk)) => {
            if !verify_with(&pk, &credential.signing_bytes(), &credential.issuer_signature) {
                reasons.push(reason::BAD_ISSUER_SIGNATURE);
            }
        }
        Ok(None) => reasons.push(reason::UNKNOWN_ISSUER),
        Err(_) => reasons.push(reason::REGISTRY_UNAVAILABLE),
    }

    let mut disclosed = BTreeMap::new();
    let mut commitment_ok = true;
    for d in &presentation.disclosed {
        let digest = commit(&d.label, &d.value, &d.salt);
        if d.label == SALT_LABEL || !credential.commitments.contains(&digest) || disclosed.contains_key(&d.label) {
            commitment_ok = false;
        } else {
            disclosed.insert(d.label.clone(), d.value.clone());
        }
    }
    if !commitment_ok {
        reasons.push(reason::COMMITMENT_MISMATCH);
    }

    if !verify_with(&credential.holder_public_key, &presentation.signing_bytes(), &presentation.holder_signature) {
        reasons.push(reason::BAD_HOLDER_SIGNATURE);
    }
    if presentation.challenge != expected_challenge {
        reasons.push(reason::CHALLENGE_MISMATCH);
    }
    if now < credential.valid_from {
        reasons.push(reason::NOT_YET_VALID);
    } else if now >= credential.valid_until {
        reasons.push(reason::EXPIRED);
    }

    match registry.status(&credential.status_id) {
        Ok(Some(CredentialStatus::Active)) => {}
        Ok(Some(CredentialStatus::Revoked)) => reasons.push(reason::REVOKED),
        Ok(None) => reasons.push(reason::UNKNOWN_STATUS),
        Err(_) => reasons.push(reason::REGISTRY_UNAVAILABLE),
    }

    let reasons: Vec<String> = reasons.into_iter().map(String::from).collect();
    PresentationReport { valid: reasons.is_empty(), disclosed, reasons }
}

pub fn revoke_credential(registry: &mut dyn RegistryStore, status_id: &str) -> Result<(), VcError> {
    registry.revoke(status_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        issuer: KeyPair,
        holder: KeyPair,
        issued: IssuedCredential,
        registry: DataRegistry,
    }

    fn student() -> BTreeMap<String, String> {
        [("name", "Alice"), ("program", "CS"), ("graduation_date", "2023-05-15"), ("gpa", "3.90")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn fixture() -> Fixture {
        let issuer = keygen(Some(&[3; 32])).unwrap();
        let holder = keygen(Some(&[4; 32])).unwrap();
        let mut registry = DataRegistry::new();
        register_issuer(&mut registry, "uni:ksu", issuer.public_key()).unwrap();
        let mut rng = ChaCha20Rng::from_seed([9; 32]);
        let issued =
            issue_credential(&issuer, "uni:ksu", holder.public_key(), &student(), 100, 1000, &mut registry, &mut rng).unwrap();
        Fixture { issuer, holder, issued, registry }
    }

    fn labels(ls: &[&str]) -> BTreeSet<String> {
        ls.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn issuance_preconditions() {
        let f = fixture();
        assert_eq!(f.issued.credential.commitments.len(), 4);
        assert_eq!(f.registry.status(&f.issued.credential.status_id).unwrap(), Some(CredentialStatus::Active));
        let mut reg = f.registry.clone();
        let mut rng = ChaCha20Rng::from_seed([1; 32]);
        let pk = f.holder.public_key();
        assert_eq!(
            issue_credential(&f.issuer, "uni:ksu", pk, &BTreeMap::new(), 1, 2, &mut reg, &mut rng),
            Err(VcError::EmptyAttributes)
        );
        assert_eq!(issue_credential(&f.issuer, "uni:ksu", pk, &student(), 5, 5, &mut reg, &mut rng), Err(VcError::BadValidity));
        assert_eq!(
            issue_credential(&f.issuer, "uni:other", pk, &student(), 1, 2, &mut reg, &mut rng),
            Err(VcError::UnknownIssuer("uni:other".into()))
        );
        assert_eq!(
            issue_credential(&f.holder, "uni:ksu", pk, &student(), 1, 2, &mut reg, &mut rng),
            Err(VcError::IssuerKeyMismatch("uni:ksu".into()))
        );
        let mut salted = student();
        salted.insert("salt".into(), "x".into());
        assert_eq!(
            issue_credential(&f.issuer, "uni:ksu", pk, &salted, 1, 2, &mut reg, &mut rng),
            Err(VcError::ReservedLabel("salt".into()))
        );
        assert_eq!(register_issuer(&mut reg, "uni:ksu", pk), Err(VcError::DuplicateIssuer("uni:ksu".into())));
    }

    #[test]
    fn selective_disclosure_happy_path() {
        let f = fixture();
        let cred = &f.issued.credential;
        let p = derive_presentation(cred, &f.holder, &labels(&["name"]), "nonce-1", &f.issued.holder_store).unwrap();
        assert_eq!(p.disclosed.len(), 1);
        let report = verify_presentation(&p, &f.registry, "nonce-1", 500);
        assert!(report.valid, "{:?}", report.reasons);
        assert_eq!(report.disclosed.keys().collect::<Vec<_>>(), vec!["name"]);
        assert!(!p.to_json().contains("3.90"));

        let none = derive_presentation(cred, &f.holder, &BTreeSet::new(), "n", &f.issued.holder_store).unwrap();
        assert!(verify_presentation(&none, &f.registry, "n", 500).valid);
        let all = derive_presentation(
            cred,
            &f.holder,
            &labels(&["gpa", "name", "program", "graduation_date"]),
            "n",
            &f.issued.holder_store,
        )
        .unwrap();
        assert_eq!(verify_presentation(&all, &f.registry, "n", 500).disclosed, student());
    }

    #[test]
    fn derive_errors() {
        let f = fixture();
        let cred = &f.issued.credential;
        assert_eq!(
            derive_presentation(cred, &f.issuer, &labels(&["name"]), "n", &f.issued.holder_store),
            Err(VcError::WrongHolderKey)
        );
        assert_eq!(
            derive_presentation(cred, &f.holder, &labels(&["email"]), "n", &f.issued.holder_store),
            Err(VcError::UnknownLabel("email".into()))
        );
    }

    #[test]
    fn verification_reasons() {
        let f = fixture();
        let p = derive_presentation(&f.issued.credential, &f.holder, &labels(&["name"]), "n", &f.issued.holder_store).unwrap();
        assert_eq!(verify_presentation(&p, &f.registry, "other", 500).reasons, vec!["challenge mismatch"]);
        assert_eq!(verify_presentation(&p, &f.registry, "n", 99).reasons, vec!["not yet valid"]);
        assert_eq!(verify_presentation(&p, &f.registry, "n", 1000).reasons, vec!["expired"]);
        assert_eq!(verify_presentation(&p, &DataRegistry::new(), "n", 500).reasons, vec!["unknown issuer", "unknown status"]);

        let mut reg = f.registry.clone();
        revoke_credential(&mut reg, &p.credential.status_id).unwrap();
        revoke_credential(&mut reg, &p.credential.status_id).unwrap();
        assert_eq!(verify_presentation(&p, &reg, "n", 500).reasons, vec!["revoked"]);
        assert_eq!(revoke_credential(&mut reg, "status:nope"), Err(VcError::UnknownStatusId("status:nope".into())));

        let mut forged = p.clone();
        forged.disclosed[0].value = "Mallory".into();
        let report = verify_presentation(&forged, &f.registry, "n", 500);
        assert_eq!(report.reasons, vec!["commitment mismatch", "bad holder signature"]);
    }

    #[test]
    fn backends_agree() {
        let dir = tempfile::tempdir().unwrap();
        let issuer = keygen(Some(&[3; 32])).unwrap();
        let mut stores: Vec<Box<dyn RegistryStore>> = vec![
            Box::new(DataRegistry::new()),
            Box::new(FileRegistry::new(dir.path().join("registry.json"))),
            Box::new(LedgerRegistry::new(keygen(Some(&[8; 32])).unwrap())),
        ];
        for store in &mut stores {
            store.register_issuer("uni:ksu", issuer.public_key()).unwrap();
            assert_eq!(store.register_issuer("uni:ksu", issuer.public_key()), Err(VcError::DuplicateIssuer("uni:ksu".into())));
            assert_eq!(store.issuer_key("uni:ksu").unwrap(), Some(issuer.public_key()));
            assert_eq!(store.issuer_key("x").unwrap(), None);
            store.register_status("status:a").unwrap();
            assert_eq!(store.status("status:a").unwrap(), Some(CredentialStatus::Active));
            store.revoke("status:a").unwrap();
            store.revoke("status:a").unwrap();
            assert_eq!(store.status("status:a").unwrap(), Some(CredentialStatus::Revoked));
            assert_eq!(store.revoke("status:b"), Err(VcError::UnknownStatusId("status:b".into())));
            assert_eq!(store.status("status:b").unwrap(), None);
        }
    }
}
