//! Operations shared by the CLI and the HTTP service.
//!
//! Every function takes the workspace plus already-resolved `now` and seed
//! values, so both surfaces produce identical results for identical inputs.
//! Verification operations never fail on a negative outcome: they return a
//! response with `valid: false` and the reasons.

use std::collections::{BTreeMap, BTreeSet};

use credbench_core::bridge::{self, BridgeReport, BridgedCredential};
use credbench_core::cert::{self, CertError, CertificateAttributes, CertificateId, IssueOptions, Reader, Submitter};
use credbench_core::crypto::{keygen, Digest, KeyPair, PublicKey};
use credbench_core::jose;
use credbench_core::ledger::journal::LoadedJournal;
use credbench_core::ledger::{
    EndorsementPolicy, Ledger, LedgerError, LedgerProfile, ProfileKind, Receipt, Transaction, TxBody, DEFAULT_CHANNEL,
};
use credbench_core::scitokens::{self, AccessToken, IssuerConfig, RefreshToken, TokenClaims, TokenError, TokenOptions};
use credbench_core::vcred::{self, IssuedCredential, Presentation, PresentationReport, VcError};
use credbench_core::UnixTime;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workspace::{Workspace, WorkspaceError};

/// Reason reported when a token's `kid` is not in the keystore.
pub const UNKNOWN_KEY: &str = "unknown key";

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("{0}")]
    Usage(String),
    /// The operation ran and said no (e.g. a rejected ledger transaction).
    #[error("{reason}{}", detail.as_ref().map(|d| format!(": {d}")).unwrap_or_default())]
    Rejected { reason: String, detail: Option<String> },
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

impl OpsError {
    fn usage(msg: impl ToString) -> Self {
        OpsError::Usage(msg.to_string())
    }

    fn rejected(reason: impl Into<String>) -> Self {
        OpsError::Rejected { reason: reason.into(), detail: None }
    }

    /// Process exit code: 1 negative result, 2 usage, 3 corrupt workspace.
    pub fn exit_code(&self) -> u8 {
        match self {
            OpsError::Rejected { .. } => 1,
            OpsError::Usage(_) => 2,
            OpsError::Workspace(e) if e.is_usage() => 2,
            OpsError::Workspace(_) => 3,
        }
    }

    /// HTTP status for the same error.
    pub fn http_status(&self) -> u16 {
        match self.exit_code() {
            1 => 422,
            2 => 400,
            _ => 500,
        }
    }
}

impl From<TokenError> for OpsError {
    fn from(e: TokenError) -> Self {
        match e {
            TokenError::BadScope(_) | TokenError::TtlTooLong { .. } | TokenError::BadTtlConfig => OpsError::usage(e),
            other => OpsError::Rejected { reason: other.reason().to_string(), detail: None },
        }
    }
}

impl From<VcError> for OpsError {
    fn from(e: VcError) -> Self {
        match e {
            VcError::Storage(detail) => WorkspaceError::Corrupt { file: crate::workspace::REGISTRY_FILE.into(), detail }.into(),
            VcError::UnknownStatusId(_) => {
                OpsError::Rejected { reason: vcred::reason::UNKNOWN_STATUS.into(), detail: Some(e.to_string()) }
            }
            other => OpsError::usage(other),
        }
    }
}

impl From<CertError> for OpsError {
    fn from(e: CertError) -> Self {
        match e {
            CertError::Ledger(err) => ledger_error(err),
            CertError::CorruptState(detail) => {
                WorkspaceError::Corrupt { file: crate::workspace::JOURNAL_FILE.into(), detail }.into()
            }
            CertError::Rejected(reason) => OpsError::rejected(reason),
            other => OpsError::rejected(other.reason()),
        }
    }
}

fn ledger_error(err: LedgerError) -> OpsError {
    match err {
        LedgerError::BrokenChain { .. } | LedgerError::BadJournalHeader(_) => {
            WorkspaceError::Corrupt { file: crate::workspace::JOURNAL_FILE.into(), detail: err.to_string() }.into()
        }
        other => OpsError::usage(other),
    }
}

// ---------------------------------------------------------------- keys

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeygenResponse {
    pub key_id: String,
    pub public_key: PublicKey,
    /// True when this key became the workspace's token issuer key.
    pub issuer_key: bool,
}

/// Generates a key from `seed` and stores it under `name` (default: its key id).
/// The first key generated in a workspace becomes the token issuer key.
pub fn keygen_op(ws: &Workspace, name: Option<&str>, seed: [u8; 32]) -> Result<KeygenResponse, OpsError> {
    let key = keygen(Some(&seed)).expect("32-byte seed");
    let mut keystore = ws.keystore()?;
    let key_id = name.unwrap_or(key.key_id()).to_string();
    keystore.insert_as(&key_id, &key).map_err(OpsError::usage)?;
    ws.save_keystore(&keystore)?;
    let mut cfg = ws.config()?;
    let issuer_key = cfg.issuer_key.is_none();
    if issuer_key {
        cfg.issuer_key = Some(key_id.clone());
        ws.save_config(&cfg)?;
    }
    Ok(KeygenResponse { key_id, public_key: key.public_key(), issuer_key })
}

fn key_for_public(ws: &Workspace, pk: &PublicKey) -> Result<KeyPair, OpsError> {
    let keystore = ws.keystore()?;
    for id in keystore.key_ids() {
        let key = ws.key(id)?;
        if key.public_key() == *pk {
            return Ok(key);
        }
    }
    Err(OpsError::usage(format!("no keystore entry for public key {}", pk.to_b64url())))
}

/// The key a JOSE `kid` names: a keystore id, or the derived key id of a stored key.
fn key_for_kid(ws: &Workspace, kid: &str) -> Result<Option<KeyPair>, OpsError> {
    match ws.key(kid) {
        Ok(key) => return Ok(Some(key)),
        Err(WorkspaceError::UnknownKey(_)) => {}
        Err(e) => return Err(e.into()),
    }
    let keystore = ws.keystore()?;
    for id in keystore.key_ids() {
        let key = ws.key(id)?;
        if key.key_id() == kid {
            return Ok(Some(key));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------- tokens

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenIssueRequest {
    pub sub: String,
    #[serde(default)]
    pub scopes: Vec<String>,
    #[serde(default)]
    pub ttl: Option<u64>,
    #[serde(default)]
    pub aud: Option<String>,
    #[serde(default)]
    pub nbf: Option<UnixTime>,
    /// Also issue a refresh token for the same subject and scopes.
    #[serde(default)]
    pub refresh: bool,
    #[serde(default)]
    pub now: Option<UnixTime>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenIssueResponse {
    pub token: AccessToken,
    pub claims: TokenClaims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh_token: Option<RefreshToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenVerifyRequest {
    pub token: String,
    #[serde(default)]
    pub aud: Option<String>,
    #[serde(default)]
    pub now: Option<UnixTime>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVerifyResponse {
    pub valid: bool,
    pub reasons: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claims: Option<TokenClaims>,
}

fn token_issuer(ws: &Workspace, seed: [u8; 32]) -> Result<IssuerConfig, OpsError> {
    let cfg = ws.config()?;
    let key_id = cfg.issuer_key.clone().ok_or_else(|| OpsError::usage("no issuer key configured; run keygen first"))?;
    let key = ws.key(&key_id)?;
    let issuer = IssuerConfig::new(cfg.issuer.clone(), key, seed)
        .with_ttls(cfg.access_ttl, cfg.refresh_ttl)
        .map_err(|e| WorkspaceError::Corrupt { file: crate::workspace::CONFIG_FILE.into(), detail: e.to_string() })?;
    Ok(issuer.with_state(ws.issuer_state()?))
}

fn decoded_claims(token: &AccessToken) -> TokenClaims {
    jose::decode_compact(&token.compact).and_then(|d| d.payload()).expect("freshly issued tokens decode")
}

pub fn token_issue(
    ws: &Workspace,
    req: &TokenIssueRequest,
    seed: [u8; 32],
    now: UnixTime,
) -> Result<TokenIssueResponse, OpsError> {
    let mut issuer = token_issuer(ws, seed)?;
    let options = TokenOptions { ttl: req.ttl, aud: req.aud.clone(), nbf: req.nbf };
    let token = issuer.issue_access_token_with(&req.sub, &req.scopes, &options, now)?;
    let refresh_token = if req.refresh { Some(issuer.issue_refresh_token(&req.sub, &req.scopes, now)?) } else { None };
    ws.save_issuer_state(issuer.state())?;
    Ok(TokenIssueResponse { claims: decoded_claims(&token), token, refresh_token })
}

/// Looks the verification key up by the token header's `kid`.
pub fn token_verify(ws: &Workspace, req: &TokenVerifyRequest, now: UnixTime) -> Result<TokenVerifyResponse, OpsError> {
    let negative = |reason: &str| TokenVerifyResponse { valid: false, reasons: vec![reason.to_string()], claims: None };
    let Ok(decoded) = jose::decode_compact(&req.token) else {
        return Ok(negative(TokenError::Malformed(String::new()).reason()));
    };
    let Some(key) = key_for_kid(ws, &decoded.header.kid)? else {
        return Ok(negative(UNKNOWN_KEY));
    };
    let token = AccessToken { compact: req.token.clone() };
    Ok(match scitokens::verify_access_token(&token, &key.public_key(), now, req.aud.as_deref()) {
        Ok(claims) => TokenVerifyResponse { valid: true, reasons: Vec::new(), claims: Some(claims) },
        Err(e) => negative(e.reason()),
    })
}

pub fn token_refresh(ws: &Workspace, refresh_id: &str, seed: [u8; 32], now: UnixTime) -> Result<TokenIssueResponse, OpsError> {
    let mut issuer = token_issuer(ws, seed)?;
    let token = issuer.refresh(refresh_id, now)?;
    ws.save_issuer_state(issuer.state())?;
    Ok(TokenIssueResponse { claims: decoded_claims(&token), token, refresh_token: None })
}

pub fn token_revoke(ws: &Workspace, refresh_id: &str) -> Result<(), OpsError> {
    let mut issuer = token_issuer(ws, [0; 32])?;
    issuer.revoke_refresh(refresh_id)?;
    ws.save_issuer_state(issuer.state())?;
    Ok(())
}

// ---------------------------------------------------------------- credentials

pub fn vc_register_issuer(ws: &Workspace, issuer_id: &str, key_id: &str) -> Result<PublicKey, OpsError> {
    let pk = ws.key(key_id)?.public_key();
    let mut registry = ws.registry()?;
    vcred::register_issuer(&mut registry, issuer_id, pk)?;
    Ok(pk)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcIssueRequest {
    pub issuer_id: String,
    /// Keystore id of the issuer's signing key.
    pub issuer_key: String,
    /// Keystore id of the holder's key.
    pub holder_key: String,
    pub attributes: BTreeMap<String, String>,
    pub valid_from: UnixTime,
    pub valid_until: UnixTime,
}

pub fn vc_issue(ws: &Workspace, req: &VcIssueRequest, seed: [u8; 32]) -> Result<IssuedCredential, OpsError> {
    let issuer_key = ws.key(&req.issuer_key)?;
    let holder = ws.key(&req.holder_key)?.public_key();
    let mut registry = ws.registry()?;
    let mut rng = ChaCha20Rng::from_seed(seed);
    Ok(vcred::issue_credential(
        &issuer_key,
        &req.issuer_id,
        holder,
        &req.attributes,
        req.valid_from,
        req.valid_until,
        &mut registry,
        &mut rng,
    )?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcPresentRequest {
    pub credential: IssuedCredential,
    pub holder_key: String,
    #[serde(default)]
    pub disclose: BTreeSet<String>,
    pub challenge: String,
}

pub fn vc_present(ws: &Workspace, req: &VcPresentRequest) -> Result<Presentation, OpsError> {
    let holder = ws.key(&req.holder_key)?;
    Ok(vcred::derive_presentation(
        &req.credential.credential,
        &holder,
        &req.disclose,
        &req.challenge,
        &req.credential.holder_store,
    )?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcVerifyRequest {
    pub presentation: Presentation,
    pub challenge: String,
    #[serde(default)]
    pub now: Option<UnixTime>,
}

pub fn vc_verify(ws: &Workspace, req: &VcVerifyRequest, now: UnixTime) -> Result<PresentationReport, OpsError> {
    let registry = ws.registry()?;
    Ok(vcred::verify_presentation(&req.presentation, &registry, &req.challenge, now))
}

pub fn vc_revoke(ws: &Workspace, status_id: &str) -> Result<(), OpsError> {
    let mut registry = ws.registry()?;
    Ok(vcred::revoke_credential(&mut registry, status_id)?)
}

// ---------------------------------------------------------------- ledger

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerInitRequest {
    pub profile: ProfileKind,
    /// Permissionless: keystore id of the certificate contract owner, deployed at init.
    #[serde(default)]
    pub owner: Option<String>,
    /// Permissionless: further account key ids.
    #[serde(default)]
    pub accounts: Vec<String>,
    /// Permissioned: `peer_id` or `peer_id=key_id` entries.
    #[serde(default)]
    pub peers: Vec<String>,
    #[serde(default = "default_channel")]
    pub channel: String,
    #[serde(default)]
    pub threshold: usize,
}

fn default_channel() -> String {
    DEFAULT_CHANNEL.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerStatus {
    pub profile: ProfileKind,
    pub height: u64,
    pub state_root: Digest,
    /// Bytes of torn tail found (and cut) by replay.
    #[serde(default)]
    pub truncated_bytes: usize,
}

fn status_of(ledger: &Ledger, truncated_bytes: usize) -> LedgerStatus {
    LedgerStatus { profile: ledger.kind(), height: ledger.height(), state_root: ledger.state_root(), truncated_bytes }
}

fn split_peer(entry: &str) -> (&str, &str) {
    entry.split_once('=').unwrap_or((entry, entry))
}

pub fn ledger_init(ws: &Workspace, req: &LedgerInitRequest, now: UnixTime) -> Result<LedgerStatus, OpsError> {
    if ws.ledger()?.is_some() {
        return Err(WorkspaceError::LedgerExists.into());
    }
    let ledger = match req.profile {
        ProfileKind::Permissionless => {
            let owner = req.owner.as_deref().map(|id| ws.key(id)).transpose()?;
            let mut accounts = Vec::new();
            for id in &req.accounts {
                accounts.push(ws.key(id)?.public_key());
            }
            accounts.extend(owner.as_ref().map(KeyPair::public_key));
            let mut ledger = Ledger::init(LedgerProfile::permissionless(accounts)).map_err(ledger_error)?;
            if let Some(owner) = &owner {
                cert::deploy(&mut ledger, &Submitter::account(owner), now)?;
            }
            ledger
        }
        ProfileKind::Permissioned => {
            if req.peers.is_empty() {
                return Err(OpsError::usage("a permissioned ledger needs at least one peer"));
            }
            let mut peers = Vec::new();
            for entry in &req.peers {
                let (peer, key_id) = split_peer(entry);
                peers.push((peer.to_string(), ws.key(key_id)?.public_key()));
            }
            let profile = LedgerProfile::permissioned_single_channel(peers, &req.channel, req.threshold);
            Ledger::init(profile).map_err(ledger_error)?
        }
    };
    ws.init_ledger(&ledger)?;
    Ok(status_of(&ledger, 0))
}

/// Runs `f` on the current ledger and appends whatever blocks it added.
fn with_ledger<T>(ws: &Workspace, f: impl FnOnce(&mut Ledger) -> Result<T, OpsError>) -> Result<T, OpsError> {
    let loaded: LoadedJournal = ws.require_ledger()?;
    let mut ledger = loaded.ledger.clone();
    let out = f(&mut ledger);
    if ledger.height() > loaded.ledger.height() || loaded.truncated_bytes > 0 {
        ws.append_blocks(&loaded, &ledger)?;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    /// Keystore id of the sending key.
    pub sender: String,
    #[serde(default = "default_channel")]
    pub channel: String,
    pub contract: String,
    pub method: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Endorsing peer ids; their keys are found in the keystore.
    #[serde(default)]
    pub endorsers: Vec<String>,
}

fn endorser_keys(ws: &Workspace, ledger: &Ledger, endorsers: &[String]) -> Result<Vec<(String, KeyPair)>, OpsError> {
    let LedgerProfile::Permissioned { peers, .. } = ledger.profile() else {
        if endorsers.is_empty() {
            return Ok(Vec::new());
        }
        return Err(OpsError::usage("endorsements only apply to a permissioned ledger"));
    };
    endorsers
        .iter()
        .map(|peer| {
            let pk = peers.get(peer).ok_or_else(|| OpsError::usage(format!("unknown peer {peer:?}")))?;
            Ok((peer.clone(), key_for_public(ws, pk)?))
        })
        .collect()
}

pub fn ledger_submit(ws: &Workspace, req: &SubmitRequest, now: UnixTime) -> Result<Receipt, OpsError> {
    let sender = ws.key(&req.sender)?;
    with_ledger(ws, |ledger| {
        let body = TxBody::new(sender.public_key(), &req.channel, &req.contract, &req.method, req.args.clone());
        let mut tx = Transaction::new(body.clone(), &sender);
        for (peer, key) in endorser_keys(ws, ledger, &req.endorsers)? {
            tx = tx.with_endorsement(ledger.endorse(&peer, &key, &body).map_err(ledger_error)?);
        }
        Ok(ledger.submit(tx, now))
    })
}

/// Replays the journal, cutting a torn final line if present.
pub fn ledger_replay(ws: &Workspace) -> Result<LedgerStatus, OpsError> {
    let loaded = ws.require_ledger()?;
    if loaded.truncated_bytes > 0 {
        ws.append_blocks(&loaded, &loaded.ledger)?;
    }
    Ok(status_of(&loaded.ledger, loaded.truncated_bytes))
}

pub fn ledger_root(ws: &Workspace) -> Result<LedgerStatus, OpsError> {
    Ok(status_of(&ws.require_ledger()?.ledger, 0))
}

// ---------------------------------------------------------------- certificates

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertFields {
    pub name: String,
    pub program: String,
    pub graduation_date: String,
    pub gpa: String,
}

impl CertFields {
    pub fn attributes(&self) -> CertificateAttributes {
        CertificateAttributes::new(&self.name, &self.program, &self.graduation_date, &self.gpa)
    }
}

/// Who signs a contract transaction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderSpec {
    pub sender: String,
    #[serde(default)]
    pub channel: Option<String>,
    #[serde(default)]
    pub endorsers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertIssueRequest {
    #[serde(flatten)]
    pub from: SenderSpec,
    #[serde(flatten)]
    pub fields: CertFields,
    #[serde(default)]
    pub subject: Option<String>,
    /// Store the sender's Ed25519 signature over the certificate digest as well.
    #[serde(default)]
    pub attest: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertIssueResponse {
    pub certificate_id: CertificateId,
    pub token_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertVerifyRequest {
    pub id: CertificateId,
    #[serde(flatten)]
    pub fields: CertFields,
    /// Reading peer on a permissioned ledger; defaults to the channel's first member.
    #[serde(default)]
    pub peer: Option<String>,
    #[serde(default)]
    pub channel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertVerifyResponse {
    pub valid: bool,
    pub reasons: Vec<String>,
    pub certificate_id: CertificateId,
}

/// Owned reader identity, resolved against the ledger profile.
struct ReaderSpec {
    peer: Option<String>,
    channel: String,
}

impl ReaderSpec {
    fn resolve(ledger: &Ledger, peer: Option<&str>, channel: Option<&str>) -> Result<Self, OpsError> {
        let channel = channel.unwrap_or(DEFAULT_CHANNEL).to_string();
        let peer = match (ledger.kind(), peer) {
            (ProfileKind::Permissionless, _) => None,
            (ProfileKind::Permissioned, Some(p)) => Some(p.to_string()),
            (ProfileKind::Permissioned, None) => {
                let config =
                    ledger.channel_config(&channel).ok_or_else(|| OpsError::usage(format!("unknown channel {channel:?}")))?;
                config.members.iter().next().cloned()
            }
        };
        Ok(Self { peer, channel })
    }

    fn reader(&self) -> Reader<'_> {
        Reader { peer: self.peer.as_deref(), channel: &self.channel }
    }
}

fn contract_call<T>(
    ws: &Workspace,
    from: &SenderSpec,
    f: impl FnOnce(&mut Ledger, &Submitter<'_>) -> Result<T, OpsError>,
) -> Result<T, OpsError> {
    let key = ws.key(&from.sender)?;
    with_ledger(ws, |ledger| {
        let endorsers = endorser_keys(ws, ledger, &from.endorsers)?;
        let channel = from.channel.as_deref().unwrap_or(DEFAULT_CHANNEL);
        let mut submitter = match ledger.kind() {
            ProfileKind::Permissionless => Submitter::account(&key),
            ProfileKind::Permissioned => Submitter::peer(&key, channel),
        };
        for (peer, k) in &endorsers {
            submitter = submitter.endorsed_by(peer, k);
        }
        f(ledger, &submitter)
    })
}

fn sender_peer(ledger: &Ledger, key: &PublicKey) -> Option<String> {
    match ledger.profile() {
        LedgerProfile::Permissioned { peers, .. } => peers.iter().find(|(_, pk)| *pk == key).map(|(id, _)| id.clone()),
        LedgerProfile::Permissionless { .. } => None,
    }
}

pub fn cert_issue(ws: &Workspace, req: &CertIssueRequest, now: UnixTime) -> Result<CertIssueResponse, OpsError> {
    contract_call(ws, &req.from, |ledger, submitter| {
        let options = IssueOptions { subject: req.subject.clone(), attest: req.attest };
        let id = cert::issue_certificate_with(ledger, submitter, &req.fields.attributes(), &options, now)?;
        let peer = sender_peer(ledger, &submitter.key.public_key());
        let reader = Reader { peer: peer.as_deref(), channel: &submitter.channel };
        let token_id = cert::get_certificate(ledger, reader, &id)?.token_id;
        Ok(CertIssueResponse { certificate_id: id, token_id })
    })
}

pub fn cert_verify(ws: &Workspace, req: &CertVerifyRequest) -> Result<CertVerifyResponse, OpsError> {
    let ledger = ws.require_ledger()?.ledger;
    let spec = ReaderSpec::resolve(&ledger, req.peer.as_deref(), req.channel.as_deref())?;
    let outcome = cert::verify_certificate(&ledger, spec.reader(), &req.id, &req.fields.attributes())?;
    Ok(CertVerifyResponse {
        valid: outcome.valid,
        reasons: outcome.reason.into_iter().map(|r| r.as_str().to_string()).collect(),
        certificate_id: req.id.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertRevokeRequest {
    #[serde(flatten)]
    pub from: SenderSpec,
    pub id: CertificateId,
}

pub fn cert_revoke(ws: &Workspace, req: &CertRevokeRequest, now: UnixTime) -> Result<(), OpsError> {
    contract_call(ws, &req.from, |ledger, submitter| Ok(cert::revoke_certificate(ledger, submitter, &req.id, now)?))
}

// ---------------------------------------------------------------- bridge

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeIssueRequest {
    #[serde(flatten)]
    pub from: SenderSpec,
    #[serde(flatten)]
    pub fields: CertFields,
    /// Keystore id of the JWT signing key; defaults to the sender.
    #[serde(default)]
    pub issuer_key: Option<String>,
    pub issuer_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeIssueResponse {
    pub jwt: BridgedCredential,
    pub certificate_id: CertificateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeVerifyRequest {
    pub jwt: String,
    #[serde(default)]
    pub peer: Option<String>,
    #[serde(default)]
    pub channel: Option<String>,
}

pub fn bridge_issue(ws: &Workspace, req: &BridgeIssueRequest, now: UnixTime) -> Result<BridgeIssueResponse, OpsError> {
    let signer = ws.key(req.issuer_key.as_deref().unwrap_or(&req.from.sender))?;
    contract_call(ws, &req.from, |ledger, submitter| {
        let attrs = req.fields.attributes();
        let jwt = bridge::issue_bridged_credential(ledger, &signer, &req.issuer_id, submitter, &attrs, now)
            .map_err(|bridge::BridgeError::Cert(e)| OpsError::from(e))?;
        Ok(BridgeIssueResponse { jwt, certificate_id: attrs.id() })
    })
}

/// The JWT's `kid` selects the verification key from the keystore.
pub fn bridge_verify(ws: &Workspace, req: &BridgeVerifyRequest) -> Result<BridgeReport, OpsError> {
    let negative = |reason: &str| BridgeReport { valid: false, reasons: vec![reason.to_string()] };
    let Ok(decoded) = jose::decode_compact(&req.jwt) else {
        return Ok(negative(bridge::reason::MALFORMED));
    };
    let Some(key) = key_for_kid(ws, &decoded.header.kid)? else {
        return Ok(negative(UNKNOWN_KEY));
    };
    let ledger = ws.require_ledger()?.ledger;
    let spec = ReaderSpec::resolve(&ledger, req.peer.as_deref(), req.channel.as_deref())?;
    Ok(bridge::verify_bridged_credential(&req.jwt, &ledger, spec.reader(), &key.public_key()))
}

/// Adds a channel to a permissioned ledger.
pub fn ledger_create_channel(
    ws: &Workspace,
    channel: &str,
    members: BTreeSet<String>,
    threshold: usize,
    now: UnixTime,
) -> Result<LedgerStatus, OpsError> {
    with_ledger(ws, |ledger| {
        let policy = EndorsementPolicy { threshold, peers: members.clone() };
        ledger.create_channel(channel, members, policy, now).map_err(ledger_error)?;
        Ok(status_of(ledger, 0))
    })
}
