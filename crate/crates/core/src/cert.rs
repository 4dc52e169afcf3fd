//! The `student-certificate` contract.
//!
//! Issuance hashes the canonical encoding of (N, P, GD, G) and stores the
//! digest as the certificate's `Sig`; verification recomputes the digest from
//! the presented attributes and compares. The digest is unkeyed: who may issue
//! is decided by the ledger (owner account on a permissionless ledger,
//! endorsement policy on a permissioned one). Each certificate also mints a
//! dense token id mapped to a subject party, and the owner can revoke.
//!
//! Contract methods (argument order is part of the journal format):
//! `deploy()`, `issue(N, P, GD, G[, subject[, issuer_sig]])`,
//! `verify(id, N, P, GD, G)`, `revoke(id)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{canonical_encode, hash, verify_with, CanonicalRecord, Digest, KeyPair, PublicKey, Signature};
use crate::ledger::{
    Contract, ContractContext, ContractError, Ledger, LedgerError, ProfileKind, Transaction, TxBody, DEFAULT_CHANNEL,
};
use crate::UnixTime;

pub const CONTRACT_ID: &str = "student-certificate";

/// Contract error codes; these appear verbatim as receipt reasons.
pub mod code {
    pub const NOT_OWNER: &str = "not owner";
    pub const NOT_DEPLOYED: &str = "not deployed";
    pub const ALREADY_DEPLOYED: &str = "already deployed";
    pub const DUPLICATE: &str = "duplicate certificate";
    pub const BAD_GPA: &str = "bad gpa";
    pub const EMPTY_FIELD: &str = "empty field";
    pub const UNKNOWN_CERTIFICATE: &str = "unknown certificate";
    pub const BAD_ISSUER_SIGNATURE: &str = "bad issuer signature";
    pub const BAD_ARGUMENTS: &str = "bad arguments";
    pub const UNKNOWN_METHOD: &str = "unknown method";
}

const KEY_OWNER: &str = "owner";
const KEY_NEXT_TOKEN: &str = "next_token";
const PREFIX_CERT: &str = "cert/";
const PREFIX_TOKEN: &str = "token/";
const PREFIX_REVOKED: &str = "revoked/";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertError {
    #[error("caller is not the contract owner")]
    NotOwner,
    #[error("transaction lacks the endorsements required by the channel policy")]
    InsufficientEndorsements,
    #[error("certificate already issued")]
    DuplicateCertificate,
    #[error("gpa must be a two-decimal value in [0.00, 4.00]")]
    BadGpa,
    #[error("certificate fields must be nonempty")]
    EmptyField,
    #[error("unknown certificate")]
    UnknownCertificate,
    #[error("unknown token {0}")]
    UnknownToken(u64),
    #[error("contract has not been deployed")]
    NotDeployed,
    #[error("contract already deployed")]
    AlreadyDeployed,
    #[error("transaction rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("corrupt contract state: {0}")]
    CorruptState(String),
}

impl CertError {
    /// Stable reason code, matching receipt reasons where one exists.
    pub fn reason(&self) -> &'static str {
        match self {
            CertError::NotOwner => code::NOT_OWNER,
            CertError::InsufficientEndorsements => crate::ledger::reason::INSUFFICIENT_ENDORSEMENTS,
            CertError::DuplicateCertificate => code::DUPLICATE,
            CertError::BadGpa => code::BAD_GPA,
            CertError::EmptyField => code::EMPTY_FIELD,
            CertError::UnknownCertificate => code::UNKNOWN_CERTIFICATE,
            CertError::UnknownToken(_) => "unknown token",
            CertError::NotDeployed => code::NOT_DEPLOYED,
            CertError::AlreadyDeployed => code::ALREADY_DEPLOYED,
            CertError::Rejected(_) => "rejected",
            CertError::Ledger(_) => "ledger error",
            CertError::CorruptState(_) => "corrupt state",
        }
    }

    fn from_reason(reason: &str) -> Self {
        match reason {
            code::NOT_OWNER => CertError::NotOwner,
            crate::ledger::reason::INSUFFICIENT_ENDORSEMENTS => CertError::InsufficientEndorsements,
            code::DUPLICATE => CertError::DuplicateCertificate,
            code::BAD_GPA => CertError::BadGpa,
            code::EMPTY_FIELD => CertError::EmptyField,
            code::UNKNOWN_CERTIFICATE => CertError::UnknownCertificate,
            code::NOT_DEPLOYED => CertError::NotDeployed,
            code::ALREADY_DEPLOYED => CertError::AlreadyDeployed,
            other => CertError::Rejected(other.to_string()),
        }
    }
}

/// The four certificate fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CertificateAttributes {
    pub name: String,
    pub program: String,
    pub graduation_date: String,
    pub gpa: String,
}

impl CertificateAttributes {
    pub fn new(
        name: impl Into<String>,
        program: impl Into<String>,
        graduation_date: impl Into<String>,
        gpa: impl Into<String>,
    ) -> Self {
        Self { name: name.into(), program: program.into(), graduation_date: graduation_date.into(), gpa: gpa.into() }
    }

    pub fn canonical_record(&self) -> CanonicalRecord {
        CanonicalRecord::from_pairs([
            ("N", self.name.as_str()),
            ("P", self.program.as_str()),
            ("GD", self.graduation_date.as_str()),
            ("G", self.gpa.as_str()),
        ])
        .expect("fixed distinct labels")
    }

    /// `Sig = H(S)` over the canonical encoding.
    pub fn signature(&self) -> Digest {
        hash(&canonical_encode(&self.canonical_record()).expect("nonempty"))
    }

    pub fn id(&self) -> CertificateId {
        CertificateId::from_signature(&self.signature())
    }

    fn to_args(&self) -> Vec<String> {
        vec![self.name.clone(), self.program.clone(), self.graduation_date.clone(), self.gpa.clone()]
    }

    fn from_args(args: &[String]) -> Self {
        Self::new(args[0].clone(), args[1].clone(), args[2].clone(), args[3].clone())
    }
}

/// Parses a fixed two-decimal GPA string into hundredths, if within [0.00, 4.00].
pub fn parse_gpa(gpa: &str) -> Option<u32> {
    let bytes = gpa.as_bytes();
    if bytes.len() != 4 || bytes[1] != b'.' || ![bytes[0], bytes[2], bytes[3]].iter().all(u8::is_ascii_digit) {
        return None;
    }
    let hundredths = u32::from(bytes[0] - b'0') * 100 + u32::from(bytes[2] - b'0') * 10 + u32::from(bytes[3] - b'0');
    (hundredths <= 400).then_some(hundredths)
}

/// base64url of the certificate's signature digest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CertificateId(pub String);

impl CertificateId {
    pub fn from_signature(sig: &Digest) -> Self {
        Self(sig.to_b64url())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CertificateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Extended mode: the issuer's Ed25519 signature over `Sig`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssuerAttestation {
    pub public_key: PublicKey,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub name: String,
    pub program: String,
    pub graduation_date: String,
    pub gpa: String,
    pub signature: Digest,
    pub token_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer_attestation: Option<IssuerAttestation>,
}

impl Certificate {
    pub fn attributes(&self) -> CertificateAttributes {
        CertificateAttributes::new(&self.name, &self.program, &self.graduation_date, &self.gpa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyReason {
    Unknown,
    Mismatch,
    Revoked,
}

impl VerifyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            VerifyReason::Unknown => "unknown",
            VerifyReason::Mismatch => "mismatch",
            VerifyReason::Revoked => "revoked",
        }
    }

    fn parse(s: &str) -> Option<Option<Self>> {
        match s {
            "valid" => Some(None),
            "unknown" => Some(Some(VerifyReason::Unknown)),
            "mismatch" => Some(Some(VerifyReason::Mismatch)),
            "revoked" => Some(Some(VerifyReason::Revoked)),
            _ => None,
        }
    }
}

/// `V` plus the reason it is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertVerification {
    pub valid: bool,
    pub reason: Option<VerifyReason>,
}

/// Who submits a contract transaction and which peers endorse it.
#[derive(Debug, Clone)]
pub struct Submitter<'a> {
    pub key: &'a KeyPair,
    pub channel: String,
    pub endorsers: Vec<(String, &'a KeyPair)>,
}

impl<'a> Submitter<'a> {
    /// Account on a permissionless ledger.
    pub fn account(key: &'a KeyPair) -> Self {
        Self { key, channel: DEFAULT_CHANNEL.to_string(), endorsers: Vec::new() }
    }

    /// Channel member on a permissioned ledger.
    pub fn peer(key: &'a KeyPair, channel: &str) -> Self {
        Self { key, channel: channel.to_string(), endorsers: Vec::new() }
    }

    pub fn endorsed_by(mut self, peer_id: &str, key: &'a KeyPair) -> Self {
        self.endorsers.push((peer_id.to_string(), key));
        self
    }

    fn transact(&self, ledger: &mut Ledger, method: &str, args: Vec<String>, now: UnixTime) -> Result<Option<String>, CertError> {
        let body = TxBody::new(self.key.public_key(), &self.channel, CONTRACT_ID, method, args);
        let mut tx = Transaction::new(body.clone(), self.key);
        for (peer_id, key) in &self.endorsers {
            tx = tx.with_endorsement(ledger.endorse(peer_id, key, &body)?);
        }
        let receipt = ledger.submit(tx, now);
        if receipt.accepted {
            Ok(receipt.output)
        } else {
            Err(CertError::from_reason(receipt.reason.as_deref().unwrap_or("rejected")))
        }
    }
}

/// Whose view a read uses. Permissioned channels only admit members.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reader<'a> {
    pub peer: Option<&'a str>,
    pub channel: &'a str,
}

impl<'a> Reader<'a> {
    pub fn public() -> Self {
        Self { peer: None, channel: DEFAULT_CHANNEL }
    }

    pub fn peer(peer: &'a str, channel: &'a str) -> Self {
        Self { peer: Some(peer), channel }
    }
}

/// Optional issuance arguments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IssueOptions {
    /// Token recipient; defaults to the certificate name.
    pub subject: Option<String>,
    /// Also store the issuer's Ed25519 signature over `Sig`.
    pub attest: bool,
}

/// Sets the submitting account as contract owner.
pub fn deploy(ledger: &mut Ledger, submitter: &Submitter<'_>, now: UnixTime) -> Result<(), CertError> {
    submitter.transact(ledger, "deploy", Vec::new(), now).map(|_| ())
}

pub fn issue_certificate(
    ledger: &mut Ledger,
    submitter: &Submitter<'_>,
    attributes: &CertificateAttributes,
    now: UnixTime,
) -> Result<CertificateId, CertError> {
    issue_certificate_with(ledger, submitter, attributes, &IssueOptions::default(), now)
}

pub fn issue_certificate_with(
    ledger: &mut Ledger,
    submitter: &Submitter<'_>,
    attributes: &CertificateAttributes,
    options: &IssueOptions,
    now: UnixTime,
) -> Result<CertificateId, CertError> {
    let mut args = attributes.to_args();
    if options.subject.is_some() || options.attest {
        args.push(options.subject.clone().unwrap_or_else(|| attributes.name.clone()));
    }
    if options.attest {
        args.push(submitter.key.sign(attributes.signature().as_bytes()).to_b64url());
    }
    let output = submitter.transact(ledger, "issue", args, now)?;
    output.map(CertificateId).ok_or_else(|| CertError::CorruptState("issue returned no id".into()))
}

/// Recomputes `H(S')` and compares it with the stored `Sig`; also false when revoked.
pub fn verify_certificate(
    ledger: &Ledger,
    reader: Reader<'_>,
    id: &CertificateId,
    attributes: &CertificateAttributes,
) -> Result<CertVerification, CertError> {
    let mut args = vec![id.0.clone()];
    args.extend(attributes.to_args());
    let out = ledger.query(reader.peer, reader.channel, CONTRACT_ID, "verify", &args)?;
    let reason = out
        .as_deref()
        .and_then(VerifyReason::parse)
        .ok_or_else(|| CertError::CorruptState(format!("unexpected verify output {out:?}")))?;
    Ok(CertVerification { valid: reason.is_none(), reason })
}

pub fn revoke_certificate(
    ledger: &mut Ledger,
    submitter: &Submitter<'_>,
    id: &CertificateId,
    now: UnixTime,
) -> Result<(), CertError> {
    submitter.transact(ledger, "revoke", vec![id.0.clone()], now).map(|_| ())
}

pub fn get_certificate(ledger: &Ledger, reader: Reader<'_>, id: &CertificateId) -> Result<Certificate, CertError> {
    let raw = ledger
        .read(reader.peer, reader.channel, CONTRACT_ID, &format!("{PREFIX_CERT}{}", id.0))?
        .ok_or(CertError::UnknownCertificate)?;
    serde_json::from_str(&raw).map_err(|e| CertError::CorruptState(e.to_string()))
}

pub fn is_revoked(ledger: &Ledger, reader: Reader<'_>, id: &CertificateId) -> Result<bool, CertError> {
    Ok(ledger.read(reader.peer, reader.channel, CONTRACT_ID, &format!("{PREFIX_REVOKED}{}", id.0))?.is_some())
}

/// ERC721-style `ownerOf`.
pub fn owner_of(ledger: &Ledger, reader: Reader<'_>, token_id: u64) -> Result<String, CertError> {
    ledger
        .read(reader.peer, reader.channel, CONTRACT_ID, &format!("{PREFIX_TOKEN}{token_id}"))?
        .ok_or(CertError::UnknownToken(token_id))
}

/// (stored certificates, minted tokens) on the reader's channel.
pub fn counts(ledger: &Ledger, reader: Reader<'_>) -> Result<(usize, usize), CertError> {
    let entries = ledger.scan(reader.peer, reader.channel, CONTRACT_ID)?;
    let certs = entries.iter().filter(|(k, _)| k.starts_with(PREFIX_CERT)).count();
    let tokens = entries.iter().filter(|(k, _)| k.starts_with(PREFIX_TOKEN)).count();
    Ok((certs, tokens))
}

/// Native contract implementation registered under [`CONTRACT_ID`].
#[derive(Debug, Clone, Copy, Default)]
pub struct StudentCertificate;

impl StudentCertificate {
    fn authorize(ctx: &ContractContext<'_>) -> Result<PublicKey, ContractError> {
        let sender = *ctx.sender().ok_or_else(|| ContractError::new("read only"))?;
        if ctx.profile() == ProfileKind::Permissionless {
            // the ledger already enforced the endorsement policy on permissioned profiles
            let owner = ctx.get(KEY_OWNER).ok_or_else(|| ContractError::new(code::NOT_DEPLOYED))?;
            if owner != sender.to_b64url() {
                return Err(ContractError::new(code::NOT_OWNER));
            }
        }
        Ok(sender)
    }

    fn deploy(ctx: &mut ContractContext<'_>) -> Result<Option<String>, ContractError> {
        let sender = *ctx.sender().ok_or_else(|| ContractError::new("read only"))?;
        if ctx.contains(KEY_OWNER) {
            return Err(ContractError::new(code::ALREADY_DEPLOYED));
        }
        ctx.put(KEY_OWNER, sender.to_b64url())?;
        Ok(None)
    }

    fn issue(ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Option<String>, ContractError> {
        if !(4..=6).contains(&args.len()) {
            return Err(ContractError::new(code::BAD_ARGUMENTS));
        }
        let sender = Self::authorize(ctx)?;
        let attrs = CertificateAttributes::from_args(args);
        let subject = args.get(4).cloned().unwrap_or_else(|| attrs.name.clone());
        if args[..4].iter().any(|a| a.is_empty()) || subject.is_empty() {
            return Err(ContractError::new(code::EMPTY_FIELD));
        }
        if parse_gpa(&attrs.gpa).is_none() {
            return Err(ContractError::new(code::BAD_GPA));
        }
        let sig = attrs.signature();
        let id = CertificateId::from_signature(&sig);
        let cert_key = format!("{PREFIX_CERT}{id}");
        if ctx.contains(&cert_key) {
            return Err(ContractError::new(code::DUPLICATE));
        }
        let issuer_attestation = match args.get(5) {
            Some(raw) => {
                let signature = Signature::from_b64url(raw).map_err(|_| ContractError::new(code::BAD_ISSUER_SIGNATURE))?;
                if !verify_with(&sender, sig.as_bytes(), &signature) {
                    return Err(ContractError::new(code::BAD_ISSUER_SIGNATURE));
                }
                Some(IssuerAttestation { public_key: sender, signature })
            }
            None => None,
        };
        let token_id: u64 = match ctx.get(KEY_NEXT_TOKEN) {
            Some(n) => n.parse().map_err(|_| ContractError::new("corrupt token counter"))?,
            None => 1,
        };
        let cert = Certificate {
            name: attrs.name,
            program: attrs.program,
            graduation_date: attrs.graduation_date,
            gpa: attrs.gpa,
            signature: sig,
            token_id,
            issuer_attestation,
        };
        ctx.put(&cert_key, serde_json::to_string(&cert).expect("certificate serializes"))?;
        ctx.put(&format!("{PREFIX_TOKEN}{token_id}"), subject)?;
        ctx.put(KEY_NEXT_TOKEN, (token_id + 1).to_string())?;
        Ok(Some(id.0))
    }

    fn verify(ctx: &ContractContext<'_>, args: &[String]) -> Result<Option<String>, ContractError> {
        let [id, rest @ ..] = args else {
            return Err(ContractError::new(code::BAD_ARGUMENTS));
        };
        if rest.len() != 4 {
            return Err(ContractError::new(code::BAD_ARGUMENTS));
        }
        let Some(raw) = ctx.get(&format!("{PREFIX_CERT}{id}")) else {
            return Ok(Some(VerifyReason::Unknown.as_str().into()));
        };
        let stored: Certificate =
            serde_json::from_str(&raw).map_err(|e| ContractError::with_detail("corrupt certificate", e.to_string()))?;
        let recomputed = CertificateAttributes::from_args(rest).signature();
        let outcome = if recomputed != stored.signature {
            VerifyReason::Mismatch.as_str()
        } else if ctx.contains(&format!("{PREFIX_REVOKED}{id}")) {
            VerifyReason::Revoked.as_str()
        } else {
            "valid"
        };
        Ok(Some(outcome.into()))
    }

    fn revoke(ctx: &mut ContractContext<'_>, args: &[String]) -> Result<Option<String>, ContractError> {
        let [id] = args else {
            return Err(ContractError::new(code::BAD_ARGUMENTS));
        };
        Self::authorize(ctx)?;
        if !ctx.contains(&format!("{PREFIX_CERT}{id}")) {
            return Err(ContractError::new(code::UNKNOWN_CERTIFICATE));
        }
        ctx.put(&format!("{PREFIX_REVOKED}{id}"), "1")?;
        Ok(None)
    }
}

impl Contract for StudentCertificate {
    fn id(&self) -> &'static str {
        CONTRACT_ID
    }

    fn execute(&self, ctx: &mut ContractContext<'_>, method: &str, args: &[String]) -> Result<Option<String>, ContractError> {
        match method {
            "deploy" if args.is_empty() => Self::deploy(ctx),
            "issue" => Self::issue(ctx, args),
            "verify" => Self::verify(ctx, args),
            "revoke" => Self::revoke(ctx, args),
            "deploy" => Err(ContractError::new(code::BAD_ARGUMENTS)),
            _ => Err(ContractError::new(code::UNKNOWN_METHOD)),
        }
    }
}
