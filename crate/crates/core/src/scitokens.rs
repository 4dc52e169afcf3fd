//! Capability tokens in the SciTokens style: issuer-signed JWTs carrying a
//! subject and `<action>:<path>` scopes, short-lived access tokens, and
//! revocable refresh tokens held in issuer state.
//!
//! Verification needs only the token string and the issuer public key.
//! Revoking a refresh token never invalidates access tokens already issued;
//! those expire on their own.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{b64url, KeyPair, PublicKey};
use crate::jose::{self, JoseError, TYP_JWT};
use crate::UnixTime;

pub const DEFAULT_ACCESS_TTL: u64 = 600;
pub const DEFAULT_REFRESH_TTL: u64 = 2_592_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("bad scope {0:?}: expected read:/path or write:/path")]
    BadScope(String),
    #[error("requested ttl {requested}s exceeds the issuer maximum of {max}s")]
    TtlTooLong { requested: u64, max: u64 },
    #[error("access_ttl must be positive and no longer than refresh_ttl")]
    BadTtlConfig,
    #[error("token signature does not verify")]
    BadSignature,
    #[error("token expired")]
    Expired,
    #[error("token not yet valid")]
    NotYetValid,
    #[error("audience mismatch")]
    AudienceMismatch,
    #[error("malformed token: {0}")]
    Malformed(String),
    #[error("unknown refresh token")]
    UnknownRefreshToken,
    #[error("refresh token revoked")]
    RevokedToken,
}

impl TokenError {
    /// Stable machine-readable reason code.
    pub fn reason(&self) -> &'static str {
        match self {
            TokenError::BadScope(_) => "bad scope",
            TokenError::TtlTooLong { .. } => "ttl too long",
            TokenError::BadTtlConfig => "bad ttl config",
            TokenError::BadSignature => "bad signature",
            TokenError::Expired => "expired",
            TokenError::NotYetValid => "not yet valid",
            TokenError::AudienceMismatch => "audience mismatch",
            TokenError::Malformed(_) => "malformed",
            TokenError::UnknownRefreshToken => "unknown refresh token",
            TokenError::RevokedToken => "revoked",
        }
    }
}

impl From<JoseError> for TokenError {
    fn from(err: JoseError) -> Self {
        match err {
            JoseError::BadSignature => TokenError::BadSignature,
            JoseError::Malformed(m) => TokenError::Malformed(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Read,
    Write,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Read => "read",
            Action::Write => "write",
        }
    }

    /// `write` implies `read`.
    pub fn permits(self, requested: Action) -> bool {
        self == requested || (self == Action::Write && requested == Action::Read)
    }
}

impl FromStr for Action {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "read" => Ok(Action::Read),
            "write" => Ok(Action::Write),
            _ => Err(()),
        }
    }
}

fn is_absolute_path(path: &str) -> bool {
    path.starts_with('/') && !path.chars().any(char::is_whitespace)
}

/// One `<action>:<path>` capability.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scope {
    pub action: Action,
    pub path: String,
}

impl FromStr for Scope {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TokenError::BadScope(s.to_string());
        let (action, path) = s.split_once(':').ok_or_else(bad)?;
        let action = action.parse().map_err(|_| bad())?;
        if !is_absolute_path(path) {
            return Err(bad());
        }
        Ok(Scope { action, path: path.to_string() })
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.action.as_str(), self.path)
    }
}

impl Scope {
    /// True when `self.path` equals `path` or is a prefix of it ending on a `/` boundary.
    pub fn covers_path(&self, path: &str) -> bool {
        match path.strip_prefix(self.path.as_str()) {
            Some(rest) => rest.is_empty() || self.path.ends_with('/') || rest.starts_with('/'),
            None => false,
        }
    }
}

/// Parses every scope string, failing on the first bad one.
pub fn parse_scopes<S: AsRef<str>>(scopes: &[S]) -> Result<Vec<Scope>, TokenError> {
    scopes.iter().map(|s| s.as_ref().parse()).collect()
}

/// JWT claims. Field order is the on-the-wire key order:
/// iss, sub, aud?, scope, nbf?, iat, exp, jti.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenClaims {
    pub iss: String,
    pub sub: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aud: Option<String>,
    pub scope: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbf: Option<UnixTime>,
    pub iat: UnixTime,
    pub exp: UnixTime,
    pub jti: String,
}

impl TokenClaims {
    /// Scope strings that parse; malformed entries authorize nothing.
    pub fn scopes(&self) -> Vec<Scope> {
        self.scope.split_whitespace().filter_map(|s| s.parse().ok()).collect()
    }
}

/// A compact JOSE serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccessToken {
    pub compact: String,
}

impl fmt::Display for AccessToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.compact)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefreshToken {
    pub id: String,
    pub sub: String,
    pub scope: Vec<String>,
    pub issued_at: UnixTime,
    pub revoked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceRequest<'a> {
    pub action: Action,
    pub path: &'a str,
}

/// Optional claims for [`IssuerConfig::issue_access_token_with`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenOptions {
    pub ttl: Option<u64>,
    pub aud: Option<String>,
    pub nbf: Option<UnixTime>,
}

/// Persistent issuer bookkeeping: issued jti values and refresh tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssuerState {
    pub issued_jti: BTreeSet<String>,
    pub refresh_tokens: BTreeMap<String, RefreshToken>,
    pub revocations: BTreeSet<String>,
}

/// Token issuer. Randomness (jti, refresh ids) comes from an injected seeded RNG.
pub struct IssuerConfig {
    pub iss: String,
    key: KeyPair,
    access_ttl: u64,
    refresh_ttl: u64,
    state: IssuerState,
    rng: ChaCha20Rng,
}

impl fmt::Debug for IssuerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IssuerConfig")
            .field("iss", &self.iss)
            .field("key", &self.key)
            .field("access_ttl", &self.access_ttl)
            .field("refresh_ttl", &self.refresh_ttl)
            .finish_non_exhaustive()
    }
}

impl IssuerConfig {
    pub fn new(iss: impl Into<String>, key: KeyPair, rng_seed: [u8; 32]) -> Self {
        Self {
            iss: iss.into(),
            key,
            access_ttl: DEFAULT_ACCESS_TTL,
            refresh_ttl: DEFAULT_REFRESH_TTL,
            state: IssuerState::default(),
            rng: ChaCha20Rng::from_seed(rng_seed),
        }
    }

    pub fn with_ttls(mut self, access_ttl: u64, refresh_ttl: u64) -> Result<Self, TokenError> {
        if access_ttl == 0 || access_ttl > refresh_ttl {
            return Err(TokenError::BadTtlConfig);
        }
        self.access_ttl = access_ttl;
        self.refresh_ttl = refresh_ttl;
        Ok(self)
    }

    pub fn with_state(mut self, state: IssuerState) -> Self {
        self.state = state;
        self
    }

    pub fn state(&self) -> &IssuerState {
        &self.state
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public_key()
    }

    pub fn key_id(&self) -> &str {
        self.key.key_id()
    }

    pub fn access_ttl(&self) -> u64 {
        self.access_ttl
    }

    pub fn refresh_ttl(&self) -> u64 {
        self.refresh_ttl
    }

    fn random_id(&mut self, len: usize) -> String {
        let mut bytes = vec![0u8; len];
        self.rng.fill_bytes(&mut bytes);
        b64url(&bytes)
    }

    fn fresh_jti(&mut self) -> String {
        loop {
            let jti = self.random_id(16);
            if self.state.issued_jti.insert(jti.clone()) {
                return jti;
            }
        }
    }

    pub fn issue_access_token<S: AsRef<str>>(
        &mut self,
        sub: &str,
        scopes: &[S],
        ttl_override: Option<u64>,
        now: UnixTime,
    ) -> Result<AccessToken, TokenError> {
        let options = TokenOptions { ttl: ttl_override, ..TokenOptions::default() };
        self.issue_access_token_with(sub, scopes, &options, now)
    }

    pub fn issue_access_token_with<S: AsRef<str>>(
        &mut self,
        sub: &str,
        scopes: &[S],
        options: &TokenOptions,
        now: UnixTime,
    ) -> Result<AccessToken, TokenError> {
        let parsed = parse_scopes(scopes)?;
        let ttl = match options.ttl {
            Some(ttl) if ttl > self.access_ttl => return Err(TokenError::TtlTooLong { requested: ttl, max: self.access_ttl }),
            Some(0) => return Err(TokenError::BadTtlConfig),
            Some(ttl) => ttl,
            None => self.access_ttl,
        };
        let claims = TokenClaims {
            iss: self.iss.clone(),
            sub: sub.to_string(),
            aud: options.aud.clone(),
            scope: parsed.iter().map(Scope::to_string).collect::<Vec<_>>().join(" "),
            nbf: options.nbf,
            iat: now,
            exp: now + ttl,
            jti: self.fresh_jti(),
        };
        Ok(AccessToken { compact: jose::sign_compact(TYP_JWT, &claims, &self.key) })
    }

    pub fn issue_refresh_token<S: AsRef<str>>(
        &mut self,
        sub: &str,
        scopes: &[S],
        now: UnixTime,
    ) -> Result<RefreshToken, TokenError> {
        let parsed = parse_scopes(scopes)?;
        let id = loop {
            let id = self.random_id(32);
            if !self.state.refresh_tokens.contains_key(&id) {
                break id;
            }
        };
        let token = RefreshToken {
            id: id.clone(),
            sub: sub.to_string(),
            scope: parsed.iter().map(Scope::to_string).collect(),
            issued_at: now,
            revoked: false,
        };
        self.state.refresh_tokens.insert(id, token.clone());
        Ok(token)
    }

    /// Exchanges a live refresh token for a new access token with the same sub and scopes.
    pub fn refresh(&mut self, refresh_id: &str, now: UnixTime) -> Result<AccessToken, TokenError> {
        let token = self.state.refresh_tokens.get(refresh_id).ok_or(TokenError::UnknownRefreshToken)?;
        if token.revoked || self.state.revocations.contains(refresh_id) {
            return Err(TokenError::RevokedToken);
        }
        if now >= token.issued_at.saturating_add(self.refresh_ttl) {
            return Err(TokenError::Expired);
        }
        let (sub, scope) = (token.sub.clone(), token.scope.clone());
        self.issue_access_token(&sub, &scope, None, now)
    }

    /// Permanently revokes a refresh token. Idempotent.
    pub fn revoke_refresh(&mut self, refresh_id: &str) -> Result<(), TokenError> {
        let token = self.state.refresh_tokens.get_mut(refresh_id).ok_or(TokenError::UnknownRefreshToken)?;
        token.revoked = true;
        self.state.revocations.insert(refresh_id.to_string());
        Ok(())
    }
}

/// Stateless verification: signature, then `nbf`, `exp` and audience.
pub fn verify_access_token(
    token: &AccessToken,
    issuer_public_key: &PublicKey,
    now: UnixTime,
    expected_aud: Option<&str>,
) -> Result<TokenClaims, TokenError> {
    let claims: TokenClaims = jose::verify_compact(&token.compact, TYP_JWT, issuer_public_key)?;
    if claims.exp <= claims.iat {
        return Err(TokenError::Malformed("exp must follow iat".into()));
    }
    if let Some(nbf) = claims.nbf {
        if now < nbf {
            return Err(TokenError::NotYetValid);
        }
    }
    if now >= claims.exp {
        return Err(TokenError::Expired);
    }
    if let Some(expected) = expected_aud {
        if claims.aud.as_deref() != Some(expected) {
            return Err(TokenError::AudienceMismatch);
        }
    }
    Ok(claims)
}

/// True iff some scope grants the requested action on the requested path
/// (or a `/`-boundary ancestor of it). Paths with `.` or `..` segments are refused.
pub fn authorize(claims: &TokenClaims, request: &ResourceRequest<'_>) -> bool {
    if !is_absolute_path(request.path) || request.path.split('/').any(|seg| seg == "." || seg == "..") {
        return false;
    }
    claims.scopes().iter().any(|scope| scope.action.permits(request.action) && scope.covers_path(request.path))
}
