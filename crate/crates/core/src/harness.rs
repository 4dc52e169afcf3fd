//! Scenario suite comparing the three mechanisms criterion by criterion.
//!
//! Each scenario builds its own keys, issuer, registry and ledger from the
//! environment seed and the scenario name, runs a fixed script, and reports
//! what it observed as a short `fact: outcome; ...` string. Expected strings
//! live in `fixtures/expected_matrix.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge;
use crate::cert::{self, CertError, CertificateAttributes, Reader, Submitter};
use crate::crypto::{b64url, b64url_decode, encode_parts, hash, keygen, KeyPair};
use crate::ledger::{journal, Ledger, LedgerProfile, Transaction, TxBody};
use crate::scitokens::{self, Action, IssuerConfig, ResourceRequest, TokenError};
use crate::vcred::{self, DataRegistry, LedgerRegistry, RegistryStore};
use crate::UnixTime;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_NOW: UnixTime = 1_700_000_000;
pub const DEFAULT_SEED: [u8; 32] = [42; 32];

const EXPECTED_FIXTURE: &str = include_str!("../fixtures/expected_matrix.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Trust,
    Revocation,
    Privacy,
    Security,
    Validity,
    Verification,
    Authentication,
    Functionality,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Criterion::Trust,
        Criterion::Revocation,
        Criterion::Privacy,
        Criterion::Security,
        Criterion::Validity,
        Criterion::Verification,
        Criterion::Authentication,
        Criterion::Functionality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Trust => "trust",
            Criterion::Revocation => "revocation",
            Criterion::Privacy => "privacy",
            Criterion::Security => "security",
            Criterion::Validity => "validity",
            Criterion::Verification => "verification",
            Criterion::Authentication => "authentication",
            Criterion::Functionality => "functionality",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Scitokens,
    Vc,
    Contract,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Scitokens, Mechanism::Vc, Mechanism::Contract];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Scitokens => "scitokens",
            Mechanism::Vc => "vc",
            Mechanism::Contract => "contract",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("scenario {scenario} panicked: {detail}")]
    ScenarioPanic { scenario: String, detail: String },
    #[error("expected-behavior fixture is invalid: {0}")]
    BadFixture(String),
}

/// Builds a fresh registry for one scenario from a derived seed.
pub type RegistryFactory = Arc<dyn Fn([u8; 32]) -> Box<dyn RegistryStore> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistryBackend {
    Memory,
    Ledger,
}

impl RegistryBackend {
    pub fn factory(self) -> RegistryFactory {
        match self {
            RegistryBackend::Memory => Arc::new(|_| Box::new(DataRegistry::new())),
            RegistryBackend::Ledger => Arc::new(|seed| Box::new(LedgerRegistry::new(keygen(Some(&seed)).expect("32-byte seed")))),
        }
    }
}

/// Everything a scenario may draw on.
#[derive(Clone)]
pub struct HarnessEnv {
    pub seed: [u8; 32],
    pub now: UnixTime,
    pub registry: RegistryFactory,
}

impl Default for HarnessEnv {
    fn default() -> Self {
        Self::new(DEFAULT_SEED, DEFAULT_NOW)
    }
}

impl fmt::Debug for HarnessEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HarnessEnv").field("seed", &self.seed).field("now", &self.now).finish_non_exhaustive()
    }
}

impl HarnessEnv {
    pub fn new(seed: [u8; 32], now: UnixTime) -> Self {
        Self { seed, now, registry: RegistryBackend::Memory.factory() }
    }

    pub fn with_registry(mut self, factory: RegistryFactory) -> Self {
        self.registry = factory;
        self
    }
}

/// Per-scenario deterministic material.
struct Ctx<'a> {
    env: &'a HarnessEnv,
    scenario: &'a str,
}

impl Ctx<'_> {
    fn seed(&self, label: &str) -> [u8; 32] {
        *hash(&encode_parts([self.env.seed.as_slice(), self.scenario.as_bytes(), label.as_bytes()])).as_bytes()
    }

    fn key(&self, label: &str) -> KeyPair {
        keygen(Some(&self.seed(label))).expect("32-byte seed")
    }

    fn rng(&self, label: &str) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.seed(label))
    }

    fn issuer(&self) -> IssuerConfig {
        IssuerConfig::new("https://issuer.example", self.key("issuer"), self.seed("issuer-rng"))
    }

    fn registry(&self) -> Box<dyn RegistryStore> {
        (self.env.registry)(self.seed("registry"))
    }

    fn now(&self) -> UnixTime {
        self.env.now
    }
}

type Outcome = Result<String, String>;

fn fail<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

fn token_outcome<T>(r: &Result<T, TokenError>) -> &'static str {
    match r {
        Ok(_) => "valid",
        Err(e) => e.reason(),
    }
}

fn vc_outcome(report: &vcred::PresentationReport) -> String {
    if report.valid {
        "valid".into()
    } else {
        report.reasons.join("+")
    }
}

fn cert_outcome<T>(r: &Result<T, CertError>) -> String {
    match r {
        Ok(_) => "accepted".into(),
        Err(CertError::Rejected(reason)) => reason.clone(),
        Err(e) => e.reason().into(),
    }
}

fn student() -> BTreeMap<String, String> {
    [("name", "Alice"), ("program", "CS"), ("graduation_date", "2023-05-15"), ("gpa", "3.90")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn alice() -> CertificateAttributes {
    CertificateAttributes::new("Alice", "CS", "2023-05-15", "3.90")
}

fn labels(ls: &[&str]) -> BTreeSet<String> {
    ls.iter().map(|s| s.to_string()).collect()
}

/// Permissionless ledger with the contract deployed by `owner`; `others` are extra accounts.
fn owned_ledger(owner: &KeyPair, others: &[&KeyPair], now: UnixTime) -> Result<Ledger, String> {
    let accounts = std::iter::once(owner.public_key()).chain(others.iter().map(|k| k.public_key()));
    let mut ledger = Ledger::init(LedgerProfile::permissionless(accounts)).map_err(fail)?;
    cert::deploy(&mut ledger, &Submitter::account(owner), now).map_err(fail)?;
    Ok(ledger)
}

/// Three peers p1..p3 on one channel with a 2-of-3 policy.
fn peer_ledger(ctx: &Ctx<'_>, channel: &str) -> Result<(Ledger, Vec<KeyPair>), String> {
    let keys: Vec<KeyPair> = ["p1", "p2", "p3"].iter().map(|p| ctx.key(p)).collect();
    let profile = LedgerProfile::permissioned_single_channel(
        [("p1", keys[0].public_key()), ("p2", keys[1].public_key()), ("p3", keys[2].public_key())],
        channel,
        2,
    );
    Ok((Ledger::init(profile).map_err(fail)?, keys))
}

struct VcSetup {
    issuer: KeyPair,
    holder: KeyPair,
    registry: Box<dyn RegistryStore>,
    issued: vcred::IssuedCredential,
}

fn vc_setup(ctx: &Ctx<'_>, valid_from: UnixTime, valid_until: UnixTime) -> Result<VcSetup, String> {
    let issuer = ctx.key("vc-issuer");
    let holder = ctx.key("holder");
    let mut registry = ctx.registry();
    vcred::register_issuer(registry.as_mut(), "uni:ksu", issuer.public_key()).map_err(fail)?;
    let issued = vcred::issue_credential(
        &issuer,
        "uni:ksu",
        holder.public_key(),
        &student(),
        valid_from,
        valid_until,
        registry.as_mut(),
        &mut ctx.rng("salts"),
    )
    .map_err(fail)?;
    Ok(VcSetup { issuer, holder, registry, issued })
}

impl VcSetup {
    fn present(&self, disclose: &[&str], challenge: &str) -> Result<vcred::Presentation, String> {
        vcred::derive_presentation(&self.issued.credential, &self.holder, &labels(disclose), challenge, &self.issued.holder_store)
            .map_err(fail)
    }
}

// ---- scitokens ----

fn sci_trust(ctx: &Ctx<'_>) -> Outcome {
    let mut issuer = ctx.issuer();
    let token = issuer.issue_access_token("u1", &["read:/data"], None, ctx.now()).map_err(fail)?;
    let own = scitokens::verify_access_token(&token, &issuer.public_key(), ctx.now(), None);
    let other = scitokens::verify_access_token(&token, &ctx.key("other-issuer").public_key(), ctx.now(), None);
    Ok(format!("issuer key: {}; other key: {}", token_outcome(&own), token_outcome(&other)))
}

fn sci_revocation(ctx: &Ctx<'_>) -> Outcome {
    let mut issuer = ctx.issuer();
    let t0 = ctx.now();
    let refresh = issuer.issue_refresh_token("u1", &["read:/data"], t0).map_err(fail)?;
    let access = issuer.refresh(&refresh.id, t0).map_err(fail)?;
    issuer.revoke_refresh(&refresh.id).map_err(fail)?;
    let denied = issuer.refresh(&refresh.id, t0 + 1);
    let pk = issuer.public_key();
    let before_exp = scitokens::verify_access_token(&access, &pk, t0 + 599, None);
    let at_exp = scitokens::verify_access_token(&access, &pk, t0 + 600, None);
    Ok(format!(
        "refresh after revoke: {}; issued access token before exp: {}; at exp: {}",
        token_outcome(&denied),
        token_outcome(&before_exp),
        token_outcome(&at_exp)
    ))
}

fn sci_privacy(ctx: &Ctx<'_>) -> Outcome {
    let mut issuer = ctx.issuer();
    let token = issuer.issue_access_token("u1", &["read:/data", "write:/scratch"], None, ctx.now()).map_err(fail)?;
    let payload = b64url_decode(token.compact.split('.').nth(1).ok_or("no payload")?).map_err(fail)?;
    let value: serde_json::Value = serde_json::from_slice(&payload).map_err(fail)?;
    let keys: Vec<&str> = value.as_object().ok_or("payload not an object")?.keys().map(String::as_str).collect();
    Ok(format!(
        "readable payload keys: {}; sub: {}; scope: {}",
        keys.join(","),
        value["sub"].as_str().unwrap_or("-"),
        value["scope"].as_str().unwrap_or("-")
    ))
}

fn sci_security(ctx: &Ctx<'_>) -> Outcome {
    let mut issuer = ctx.issuer();
    let token = issuer.issue_access_token("u1", &["read:/data"], None, ctx.now()).map_err(fail)?;
    let pk = issuer.public_key();
    let intact = scitokens::verify_access_token(&token, &pk, ctx.now(), None);
    let mut claims = intact.clone().map_err(fail)?;
    claims.scope = "write:/".into();
    let parts: Vec<&str> = token.compact.split('.').collect();
    let forged = scitokens::AccessToken {
        compact: format!("{}.{}.{}", parts[0], b64url(&serde_json::to_vec(&claims).map_err(fail)?), parts[2]),
    };
    let escalated = scitokens::verify_access_token(&forged, &pk, ctx.now(), None);
    Ok(format!("signed token: {}; scope edited without key: {}", token_outcome(&intact), token_outcome(&escalated)))
}

fn sci_validity(ctx: &Ctx<'_>) -> Outcome {
    let mut issuer = ctx.issuer();
    let t0 = ctx.now();
    let default = issuer.issue_access_token("u1", &["read:/data"], None, t0).map_err(fail)?;
    let claims = scitokens::verify_access_token(&default, &issuer.public_key(), t0, None).map_err(fail)?;
    let short = issuer.issue_access_token("u1", &["read:/data"], Some(60), t0).map_err(fail)?;
    let short_claims = scitokens::verify_access_token(&short, &issuer.public_key(), t0, None).map_err(fail)?;
    let too_long = issuer.issue_access_token("u1", &["read:/data"], Some(601), t0);
    let too_long = match too_long {
        Err(TokenError::TtlTooLong { .. }) => "ttl too long",
        Err(_) => "other error",
        Ok(_) => "issued",
    };
    Ok(format!(
        "default lifetime: {}s; override lifetime: {}s; override above issuer max: {}",
        claims.exp - claims.iat,
        short_claims.exp - short_claims.iat,
        too_long
    ))
}

fn sci_verification(ctx: &Ctx<'_>) -> Outcome {
    let (token, pk) = {
        let mut issuer = ctx.issuer();
        let token = issuer.issue_access_token("u1", &["read:/data"], None, ctx.now()).map_err(fail)?;
        (token, issuer.public_key())
    };
    // the issuer and its state are gone; only the public key remains
    let result = scitokens::verify_access_token(&token, &pk, ctx.now() + 1, None);
    Ok(format!("with public key only, issuer state dropped: {}", token_outcome(&result)))
}

fn sci_authentication(ctx: &Ctx<'_>) -> Outcome {
    let mut issuer = ctx.issuer();
    let token = issuer.issue_access_token("u1", &["read:/data"], None, ctx.now()).map_err(fail)?;
    // a copy presented by someone other than u1 carries the same rights
    let stolen = scitokens::AccessToken { compact: token.compact.clone() };
    let result = scitokens::verify_access_token(&stolen, &issuer.public_key(), ctx.now(), None);
    let allowed = result
        .as_ref()
        .map(|c| scitokens::authorize(c, &ResourceRequest { action: Action::Read, path: "/data/x" }))
        .unwrap_or(false);
    Ok(format!(
        "copied token from another presenter: {}; access granted: {}",
        token_outcome(&result),
        if allowed { "yes" } else { "no" }
    ))
}

fn sci_functionality(ctx: &Ctx<'_>) -> Outcome {
    let mut issuer = ctx.issuer();
    let token = issuer.issue_access_token("u1", &["read:/data", "write:/scratch"], None, ctx.now()).map_err(fail)?;
    let claims = scitokens::verify_access_token(&token, &issuer.public_key(), ctx.now(), None).map_err(fail)?;
    let cases = [
        (Action::Read, "/data/run1/file.csv"),
        (Action::Read, "/database"),
        (Action::Write, "/data/x"),
        (Action::Read, "/scratch/tmp"),
    ];
    let parts: Vec<String> = cases
        .iter()
        .map(|(action, path)| {
            let ok = scitokens::authorize(&claims, &ResourceRequest { action: *action, path });
            format!("{} {}: {}", action.as_str(), path, if ok { "allow" } else { "deny" })
        })
        .collect();
    Ok(parts.join("; "))
}

// ---- verifiable credentials ----

fn vc_trust(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let s = vc_setup(ctx, t0, t0 + 3600)?;
    let p = s.present(&["name"], "n1")?;
    let registered = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);

    // a self-declared issuer that never registered
    let rogue = ctx.key("rogue");
    let mut scratch = DataRegistry::new();
    scratch.register_issuer("uni:rogue", rogue.public_key()).map_err(fail)?;
    let forged = vcred::issue_credential(
        &rogue,
        "uni:rogue",
        s.holder.public_key(),
        &student(),
        t0,
        t0 + 3600,
        &mut scratch,
        &mut ctx.rng("rogue-salts"),
    )
    .map_err(fail)?;
    let fp = vcred::derive_presentation(&forged.credential, &s.holder, &labels(&["name"]), "n1", &forged.holder_store)
        .map_err(fail)?;
    let unregistered = vcred::verify_presentation(&fp, s.registry.as_ref(), "n1", t0);
    Ok(format!("registered issuer: {}; unregistered issuer: {}", vc_outcome(&registered), vc_outcome(&unregistered)))
}

fn vc_revocation(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let mut s = vc_setup(ctx, t0, t0 + 3600)?;
    let p = s.present(&["name"], "n1")?;
    let before = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);
    vcred::revoke_credential(s.registry.as_mut(), &s.issued.credential.status_id).map_err(fail)?;
    let after = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);
    Ok(format!("before registry revocation: {}; after: {}", vc_outcome(&before), vc_outcome(&after)))
}

fn vc_privacy(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let s = vc_setup(ctx, t0, t0 + 3600)?;
    let p = s.present(&["name"], "n1")?;
    let report = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);
    let seen: Vec<String> = report.disclosed.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let leaked = p.to_json().contains("3.90");
    Ok(format!(
        "report: {}; verifier sees: {}; gpa in report: {}; gpa value in presentation bytes: {}",
        vc_outcome(&report),
        seen.join(","),
        if report.disclosed.contains_key("gpa") { "yes" } else { "no" },
        if leaked { "yes" } else { "no" }
    ))
}

fn vc_security(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let s = vc_setup(ctx, t0, t0 + 3600)?;
    let p = s.present(&["name"], "n1")?;
    let checked = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);
    // a registry that never saw this credential's status entry
    let mut elsewhere = ctx.registry();
    elsewhere.register_issuer("uni:ksu", s.issuer.public_key()).map_err(fail)?;
    let unknown = vcred::verify_presentation(&p, elsewhere.as_ref(), "n1", t0);
    let mut edited = p.clone();
    edited.credential.valid_until += 1_000_000;
    let tampered = vcred::verify_presentation(&edited, s.registry.as_ref(), "n1", t0);
    Ok(format!(
        "checked against registry: {}; registry without status entry: {}; validity edited: {}",
        vc_outcome(&checked),
        vc_outcome(&unknown),
        vc_outcome(&tampered)
    ))
}

fn vc_validity(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let s = vc_setup(ctx, t0 + 100, t0 + 200)?;
    let p = s.present(&[], "n1")?;
    let at = |now| vc_outcome(&vcred::verify_presentation(&p, s.registry.as_ref(), "n1", now));
    Ok(format!("before valid_from: {}; inside window: {}; at valid_until: {}", at(t0 + 99), at(t0 + 150), at(t0 + 200)))
}

fn vc_verification(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let s = vc_setup(ctx, t0, t0 + 3600)?;
    let p = s.present(&["program"], "n1")?;
    let ok = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);
    // the registry maps the issuer id to a different key
    let mut swapped = ctx.registry();
    swapped.register_issuer("uni:ksu", ctx.key("impostor").public_key()).map_err(fail)?;
    swapped.register_status(&s.issued.credential.status_id).map_err(fail)?;
    let wrong_key = vcred::verify_presentation(&p, swapped.as_ref(), "n1", t0);
    Ok(format!("attestation + registry: {}; registry key differs: {}", vc_outcome(&ok), vc_outcome(&wrong_key)))
}

fn vc_authentication(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let s = vc_setup(ctx, t0, t0 + 3600)?;
    let p = s.present(&["name"], "n1")?;
    let holder = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);
    let thief = ctx.key("thief");
    let mut stolen = p.clone();
    stolen.holder_signature = thief.sign(&stolen.signing_bytes());
    let not_holder = vcred::verify_presentation(&stolen, s.registry.as_ref(), "n1", t0);
    let replay = vcred::verify_presentation(&p, s.registry.as_ref(), "n2", t0);
    let wrong_key = vcred::derive_presentation(&s.issued.credential, &thief, &labels(&["name"]), "n1", &s.issued.holder_store);
    Ok(format!(
        "holder signature: {}; signed by another key: {}; replayed to new challenge: {}; derive with another key: {}",
        vc_outcome(&holder),
        vc_outcome(&not_holder),
        vc_outcome(&replay),
        match wrong_key {
            Ok(_) => "derived".to_string(),
            Err(_) => "wrong holder key".to_string(),
        }
    ))
}

fn vc_functionality(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let s = vc_setup(ctx, t0, t0 + 3600)?;
    // access rule: program must be CS
    let decide = |disclose: &[&str]| -> Result<&'static str, String> {
        let p = s.present(disclose, "n1")?;
        let report = vcred::verify_presentation(&p, s.registry.as_ref(), "n1", t0);
        Ok(match report.disclosed.get("program") {
            Some(v) if report.valid && v == "CS" => "grant",
            Some(_) => "deny",
            None => "attribute missing",
        })
    };
    Ok(format!("program disclosed: {}; program withheld: {}", decide(&["program"])?, decide(&["name"])?))
}

// ---- smart contracts ----

fn contract_trust(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let owner = ctx.key("owner");
    let stranger = ctx.key("stranger");
    let mut ledger = owned_ledger(&owner, &[&stranger], t0)?;
    let non_owner = cert::issue_certificate(&mut ledger, &Submitter::account(&stranger), &alice(), t0);

    let (mut pl, keys) = peer_ledger(ctx, "certs")?;
    let one = Submitter::peer(&keys[0], "certs").endorsed_by("p1", &keys[0]);
    let single = cert::issue_certificate(&mut pl, &one, &alice(), t0);
    let two = one.clone().endorsed_by("p2", &keys[1]);
    let pair = cert::issue_certificate(&mut pl, &two, &alice(), t0 + 1);
    Ok(format!(
        "non-owner issuance: {}; 1 of 3 endorsements: {}; 2 of 3 endorsements: {}",
        cert_outcome(&non_owner),
        cert_outcome(&single),
        cert_outcome(&pair)
    ))
}

fn contract_revocation(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let owner = ctx.key("owner");
    let mut ledger = owned_ledger(&owner, &[], t0)?;
    let who = Submitter::account(&owner);
    let bc = bridge::issue_bridged_credential(&mut ledger, &owner, "uni:ksu", &who, &alice(), t0).map_err(fail)?;
    let id = alice().id();
    let before = cert::verify_certificate(&ledger, Reader::public(), &id, &alice()).map_err(fail)?;
    cert::revoke_certificate(&mut ledger, &who, &id, t0 + 1).map_err(fail)?;
    let after = cert::verify_certificate(&ledger, Reader::public(), &id, &alice()).map_err(fail)?;
    let bridged = bridge::verify_bridged_credential(&bc.jwt, &ledger, Reader::public(), &owner.public_key());
    let jwt_ok = crate::jose::decode_compact(&bc.jwt).map(|d| d.signature_valid(&owner.public_key())).unwrap_or(false);
    let show = |v: cert::CertVerification| v.reason.map_or("valid", |r| r.as_str());
    Ok(format!(
        "before revoke: {}; after revoke: {}; bridged credential: {}; jwt signature: {}",
        show(before),
        show(after),
        if bridged.valid { "valid".to_string() } else { bridged.reasons.join("+") },
        if jwt_ok { "intact" } else { "broken" }
    ))
}

fn contract_privacy(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let (mut ledger, keys) = peer_ledger(ctx, "certs")?;
    ledger
        .create_channel("registrar", labels(&["p1", "p2"]), crate::ledger::EndorsementPolicy::new(1, ["p1", "p2"]), t0)
        .map_err(fail)?;
    let who = Submitter::peer(&keys[0], "registrar").endorsed_by("p1", &keys[0]);
    let id = cert::issue_certificate(&mut ledger, &who, &alice(), t0 + 1).map_err(fail)?;
    let read = |peer: &str, channel: &str| match cert::get_certificate(&ledger, Reader::peer(peer, channel), &id) {
        Ok(_) => "visible",
        Err(CertError::UnknownCertificate) => "absent",
        Err(CertError::Ledger(crate::ledger::LedgerError::AccessDenied(_))) => "access denied",
        Err(_) => "error",
    };
    Ok(format!(
        "member p2 on channel: {}; non-member p3: {}; member view of other channel: {}",
        read("p2", "registrar"),
        read("p3", "registrar"),
        read("p1", "certs")
    ))
}

fn contract_security(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let owner = ctx.key("owner");
    let mut ledger = owned_ledger(&owner, &[], t0)?;
    cert::issue_certificate(&mut ledger, &Submitter::account(&owner), &alice(), t0).map_err(fail)?;
    let text = journal::encode(&ledger);
    let replayed = match journal::load(text.as_bytes()) {
        Ok(l) if l.ledger.state_root() == ledger.state_root() => "same state root",
        Ok(_) => "different state root",
        Err(_) => "broken chain",
    };
    // change the gpa inside the stored issuance transaction
    let tampered = text.replacen("\"3.90\"", "\"4.00\"", 1);
    let edited = match journal::load(tampered.as_bytes()) {
        Ok(_) => "accepted",
        Err(crate::ledger::LedgerError::BrokenChain { .. }) => "broken chain",
        Err(_) => "other error",
    };
    Ok(format!("replay of journal: {replayed}; stored tx edited: {edited}"))
}

fn contract_validity(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let owner = ctx.key("owner");
    let mut ledger = owned_ledger(&owner, &[], t0)?;
    let who = Submitter::account(&owner);
    let mut high = alice();
    high.gpa = "4.50".into();
    let out_of_range = cert::issue_certificate(&mut ledger, &who, &high, t0);
    let mut blank = alice();
    blank.graduation_date.clear();
    let empty = cert::issue_certificate(&mut ledger, &who, &blank, t0);
    let first = cert::issue_certificate(&mut ledger, &who, &alice(), t0);
    let again = cert::issue_certificate(&mut ledger, &who, &alice(), t0 + 1);
    Ok(format!(
        "gpa 4.50: {}; empty field: {}; well-formed: {}; reissue: {}",
        cert_outcome(&out_of_range),
        cert_outcome(&empty),
        cert_outcome(&first),
        cert_outcome(&again)
    ))
}

fn contract_verification(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let owner = ctx.key("owner");
    let mut ledger = owned_ledger(&owner, &[], t0)?;
    let id = cert::issue_certificate(&mut ledger, &Submitter::account(&owner), &alice(), t0).map_err(fail)?;
    let mut other = alice();
    other.gpa = "3.91".into();
    let check = |attrs: &CertificateAttributes, id: &cert::CertificateId| -> Result<&'static str, String> {
        let v = cert::verify_certificate(&ledger, Reader::public(), id, attrs).map_err(fail)?;
        Ok(v.reason.map_or("valid", |r| r.as_str()))
    };
    Ok(format!(
        "recomputed hash equal: {}; gpa 3.91: {}; unknown id: {}",
        check(&alice(), &id)?,
        check(&other, &id)?,
        check(&alice(), &other.id())?
    ))
}

fn contract_authentication(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let owner = ctx.key("owner");
    let outsider = ctx.key("outsider");
    let mut ledger = owned_ledger(&owner, &[], t0)?;
    let root = ledger.state_root();
    let body = |sender: &KeyPair| {
        let a = alice();
        TxBody::new(
            sender.public_key(),
            crate::ledger::DEFAULT_CHANNEL,
            cert::CONTRACT_ID,
            "issue",
            vec![a.name, a.program, a.graduation_date, a.gpa],
        )
    };
    // owner's key in the sender field, signed by someone else
    let mut forged = Transaction::new(body(&owner), &outsider);
    forged.sender_signature = outsider.sign(&body(&owner).encode());
    let forged_r = ledger.submit(forged, t0);
    let outsider_r = ledger.submit(Transaction::new(body(&outsider), &outsider), t0);
    let neutral = ledger.state_root() == root;
    let owner_r = ledger.submit(Transaction::new(body(&owner), &owner), t0);
    let show = |r: &crate::ledger::Receipt| r.reason.clone().unwrap_or_else(|| "accepted".into());
    Ok(format!(
        "forged sender signature: {}; unregistered account: {}; state unchanged: {}; owner signed: {}",
        show(&forged_r),
        show(&outsider_r),
        if neutral { "yes" } else { "no" },
        show(&owner_r)
    ))
}

fn contract_functionality(ctx: &Ctx<'_>) -> Outcome {
    let t0 = ctx.now();
    let owner = ctx.key("owner");
    let mut ledger = owned_ledger(&owner, &[], t0)?;
    let who = Submitter::account(&owner);
    let opts = cert::IssueOptions { subject: Some("student:alice".into()), attest: false };
    cert::issue_certificate_with(&mut ledger, &who, &alice(), &opts, t0).map_err(fail)?;
    // the credential signer here is a separate party from the contract owner
    let vc_issuer = ctx.key("vc-issuer");
    let bob = CertificateAttributes::new("Bob", "Physics", "2024-06-01", "3.20");
    let bc = bridge::issue_bridged_credential(&mut ledger, &vc_issuer, "registrar", &who, &bob, t0 + 1).map_err(fail)?;
    let bridged = bridge::verify_bridged_credential(&bc.jwt, &ledger, Reader::public(), &vc_issuer.public_key());
    let owner_of = |n: u64| cert::owner_of(&ledger, Reader::public(), n).unwrap_or_else(|e| e.reason().to_string());
    let (certs, tokens) = cert::counts(&ledger, Reader::public()).map_err(fail)?;
    Ok(format!(
        "token 1 owner: {}; token 2 owner: {}; token 3: {}; certificates/tokens: {}/{}; credential from separate signer: {}",
        owner_of(1),
        owner_of(2),
        owner_of(3),
        certs,
        tokens,
        if bridged.valid { "valid".to_string() } else { bridged.reasons.join("+") }
    ))
}

type ScriptFn = fn(&Ctx<'_>) -> Outcome;

/// One (criterion, mechanism) script.
#[derive(Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub criterion: Criterion,
    pub mechanism: Mechanism,
    script: ScriptFn,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("criterion", &self.criterion)
            .field("mechanism", &self.mechanism)
            .finish()
    }
}

macro_rules! scenarios {
    ($(($name:literal, $criterion:ident, $mechanism:ident, $script:path)),* $(,)?) => {
        [$(Scenario { name: $name, criterion: Criterion::$criterion, mechanism: Mechanism::$mechanism, script: $script }),*]
    };
}

/// All 24 scenarios, criterion-major.
pub fn scenarios() -> [Scenario; 24] {
    scenarios![
        ("trust/scitokens", Trust, Scitokens, sci_trust),
        ("trust/vc", Trust, Vc, vc_trust),
        ("trust/contract", Trust, Contract, contract_trust),
        ("revocation/scitokens", Revocation, Scitokens, sci_revocation),
        ("revocation/vc", Revocation, Vc, vc_revocation),
        ("revocation/contract", Revocation, Contract, contract_revocation),
        ("privacy/scitokens", Privacy, Scitokens, sci_privacy),
        ("privacy/vc", Privacy, Vc, vc_privacy),
        ("privacy/contract", Privacy, Contract, contract_privacy),
        ("security/scitokens", Security, Scitokens, sci_security),
        ("security/vc", Security, Vc, vc_security),
        ("security/contract", Security, Contract, contract_security),
        ("validity/scitokens", Validity, Scitokens, sci_validity),
        ("validity/vc", Validity, Vc, vc_validity),
        ("validity/contract", Validity, Contract, contract_validity),
        ("verification/scitokens", Verification, Scitokens, sci_verification),
        ("verification/vc", Verification, Vc, vc_verification),
        ("verification/contract", Verification, Contract, contract_verification),
        ("authentication/scitokens", Authentication, Scitokens, sci_authentication),
        ("authentication/vc", Authentication, Vc, vc_authentication),
        ("authentication/contract", Authentication, Contract, contract_authentication),
        ("functionality/scitokens", Functionality, Scitokens, sci_functionality),
        ("functionality/vc", Functionality, Vc, vc_functionality),
        ("functionality/contract", Functionality, Contract, contract_functionality),
    ]
}

pub fn find_scenario(name: &str) -> Option<Scenario> {
    scenarios().into_iter().find(|s| s.name == name)
}

/// One row of the expected-behavior fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedCell {
    pub scenario: String,
    pub criterion: Criterion,
    pub mechanism: Mechanism,
    /// What the scenario demonstrates, in prose.
    pub behavior: String,
    pub expected: String,
}

pub fn expected_cells() -> Result<Vec<ExpectedCell>, HarnessError> {
    let cells: Vec<ExpectedCell> = serde_json::from_str(EXPECTED_FIXTURE).map_err(|e| HarnessError::BadFixture(e.to_string()))?;
    let names: BTreeSet<&str> = cells.iter().map(|c| c.scenario.as_str()).collect();
    if cells.len() != 24 || names.len() != 24 {
        return Err(HarnessError::BadFixture(format!("{} rows, {} distinct", cells.len(), names.len())));
    }
    for cell in &cells {
        let Some(s) = find_scenario(&cell.scenario) else {
            return Err(HarnessError::BadFixture(format!("unknown scenario {:?}", cell.scenario)));
        };
        if (s.criterion, s.mechanism) != (cell.criterion, cell.mechanism) {
            return Err(HarnessError::BadFixture(format!("{} has the wrong criterion/mechanism", cell.scenario)));
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub criterion: Criterion,
    pub mechanism: Mechanism,
    pub observed: String,
}

pub fn run_scenario(scenario: &Scenario, env: &HarnessEnv) -> Result<ScenarioResult, HarnessError> {
    let ctx = Ctx { env, scenario: scenario.name };
    let observed =
        (scenario.script)(&ctx).map_err(|detail| HarnessError::ScenarioPanic { scenario: scenario.name.to_string(), detail })?;
    Ok(ScenarioResult {
        scenario: scenario.name.to_string(),
        criterion: scenario.criterion,
        mechanism: scenario.mechanism,
        observed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub criterion: Criterion,
    pub mechanism: Mechanism,
    pub scenario: String,
    pub observed: String,
    pub expected: String,
    pub matches_expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonExecutable {
    pub criterion: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub schema_version: u32,
    pub cells: Vec<MatrixCell>,
    pub non_executable: Vec<NonExecutable>,
}

pub fn non_executable() -> Vec<NonExecutable> {
    [
        ("scalability", "qualitative; no measurement procedure, so no numbers are produced"),
        ("interoperability", "only wire-format conformance is tested (JOSE compact encoding, key order)"),
        ("ease of integration", "qualitative; depends on deployment context"),
        ("credential management", "qualitative; organisational rather than protocol behavior"),
    ]
    .into_iter()
    .map(|(c, n)| NonExecutable { criterion: c.to_string(), note: n.to_string() })
    .collect()
}

pub fn run_matrix(env: &HarnessEnv) -> Result<ComparisonMatrix, HarnessError> {
    let expected = expected_cells()?;
    let mut cells = Vec::with_capacity(24);
    for scenario in scenarios() {
        let result = run_scenario(&scenario, env)?;
        let want = expected.iter().find(|c| c.scenario == scenario.name).expect("fixture validated against the scenario list");
        cells.push(MatrixCell {
            criterion: result.criterion,
            mechanism: result.mechanism,
            scenario: result.scenario,
            matches_expected: result.observed == want.expected,
            observed: result.observed,
            expected: want.expected.clone(),
        });
    }
    Ok(ComparisonMatrix { schema_version: SCHEMA_VERSION, cells, non_executable: non_executable() })
}

impl ComparisonMatrix {
    pub fn all_match(&self) -> bool {
        self.cells.iter().all(|c| c.matches_expected)
    }

    pub fn matched(&self) -> usize {
        self.cells.iter().filter(|c| c.matches_expected).count()
    }

    pub fn cell(&self, criterion: Criterion, mechanism: Mechanism) -> Option<&MatrixCell> {
        self.cells.iter().find(|c| c.criterion == criterion && c.mechanism == mechanism)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matrix serializes");
        s.push('\n');
        s
    }

    /// Aligned text: a summary grid, then each cell's observation.
    pub fn to_text(&self) -> String {
        let width = Criterion::ALL.iter().map(|c| c.as_str().len()).max().unwrap_or(0);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "criterion");
        for m in Mechanism::ALL {
            let _ = write!(out, "  {:<9}", m.as_str());
        }
        out.push('\n');
        for c in Criterion::ALL {
            let _ = write!(out, "{:<width$}", c.as_str());
            for m in Mechanism::ALL {
                let mark = match self.cell(c, m) {
                    Some(cell) if cell.matches_expected => "match",
                    Some(_) => "MISMATCH",
                    None => "missing",
                };
                let _ = write!(out, "  {mark:<9}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "\n{}/{} cells match\n", self.matched(), self.cells.len());
        let name_width = self.cells.iter().map(|c| c.scenario.len()).max().unwrap_or(0);
        for cell in &self.cells {
            let _ = writeln!(out, "{:<name_width$}  {}", cell.scenario, cell.observed);
        }
        out.push_str("\nnot executable:\n");
        for n in &self.non_executable {
            let _ = writeln!(out, "  {}: {}", n.criterion, n.note);
        }
        out.lines().map(|l| format!("{}\n", l.trim_end())).collect()
    }
}
