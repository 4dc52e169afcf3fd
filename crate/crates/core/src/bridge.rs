//! Certificates on the ledger wrapped as credential JWTs.
//!
//! Issuing stores the certificate through the contract and signs a `vc+jwt`
//! carrying the same attributes. Verifying always runs three checks: the JWT
//! signature, the payload against the stored certificate, and the contract's
//! own verification (which also sees revocation).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cert::{self, CertError, CertificateAttributes, CertificateId, Reader, Submitter};
use crate::crypto::{KeyPair, PublicKey};
use crate::jose::{self, TYP_VC_JWT};
use crate::ledger::{Ledger, ProfileKind};
use crate::UnixTime;

pub mod reason {
    pub const MALFORMED: &str = "malformed";
    pub const BAD_SIGNATURE: &str = "bad signature";
    pub const PAYLOAD_MISMATCH: &str = "payload mismatch";
    pub const LEDGER_UNAVAILABLE: &str = "ledger unavailable";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BridgeError {
    #[error(transparent)]
    Cert(#[from] CertError),
}

/// JWT payload, keys in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgePayload {
    pub certificate_id: CertificateId,
    pub name: String,
    pub program: String,
    pub graduation_date: String,
    pub gpa: String,
    pub ledger_profile: ProfileKind,
    pub issuer_id: String,
}

impl BridgePayload {
    pub fn attributes(&self) -> CertificateAttributes {
        CertificateAttributes::new(&self.name, &self.program, &self.graduation_date, &self.gpa)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BridgedCredential {
    pub jwt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub valid: bool,
    pub reasons: Vec<String>,
}

/// Issues the certificate on `ledger`, then signs the credential JWT with
/// `issuer_key`. Nothing is signed if issuance is rejected.
pub fn issue_bridged_credential(
    ledger: &mut Ledger,
    issuer_key: &KeyPair,
    issuer_id: &str,
    submitter: &Submitter<'_>,
    attributes: &CertificateAttributes,
    now: UnixTime,
) -> Result<BridgedCredential, BridgeError> {
    let certificate_id = cert::issue_certificate(ledger, submitter, attributes, now)?;
    let payload = BridgePayload {
        certificate_id,
        name: attributes.name.clone(),
        program: attributes.program.clone(),
        graduation_date: attributes.graduation_date.clone(),
        gpa: attributes.gpa.clone(),
        ledger_profile: ledger.kind(),
        issuer_id: issuer_id.to_string(),
    };
    Ok(BridgedCredential { jwt: jose::sign_compact(TYP_VC_JWT, &payload, issuer_key) })
}

pub fn verify_bridged_credential(jwt: &str, ledger: &Ledger, reader: Reader<'_>, issuer_public_key: &PublicKey) -> BridgeReport {
    let decoded = match jose::decode_compact(jwt) {
        Ok(d) if d.header.typ == TYP_VC_JWT => d,
        _ => return BridgeReport { valid: false, reasons: vec![reason::MALFORMED.into()] },
    };
    let Ok(payload) = decoded.payload::<BridgePayload>() else {
        return BridgeReport { valid: false, reasons: vec![reason::MALFORMED.into()] };
    };

    let mut reasons: Vec<String> = Vec::new();
    if !decoded.signature_valid(issuer_public_key) {
        reasons.push(reason::BAD_SIGNATURE.into());
    }

    match cert::get_certificate(ledger, reader, &payload.certificate_id) {
        Ok(stored) => {
            if stored.attributes() != payload.attributes() || payload.ledger_profile != ledger.kind() {
                reasons.push(reason::PAYLOAD_MISMATCH.into());
            }
        }
        Err(CertError::UnknownCertificate) => reasons.push(reason::PAYLOAD_MISMATCH.into()),
        Err(_) => reasons.push(reason::LEDGER_UNAVAILABLE.into()),
    }

    match cert::verify_certificate(ledger, reader, &payload.certificate_id, &payload.attributes()) {
        Ok(v) => {
            if let Some(r) = v.reason {
                reasons.push(r.as_str().into());
            }
        }
        Err(_) => {
            if !reasons.iter().any(|r| r == reason::LEDGER_UNAVAILABLE) {
                reasons.push(reason::LEDGER_UNAVAILABLE.into());
            }
        }
    }

    BridgeReport { valid: reasons.is_empty(), reasons }
}
