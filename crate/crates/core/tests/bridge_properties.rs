use credbench_core::bridge::{issue_bridged_credential, verify_bridged_credential, BridgePayload};
use credbench_core::cert::{self, CertificateAttributes, Reader, Submitter};
use credbench_core::crypto::{keygen, KeyPair};
use credbench_core::jose::{self, TYP_VC_JWT};
use credbench_core::ledger::{Ledger, LedgerProfile};

fn alice() -> CertificateAttributes {
    CertificateAttributes::new("Alice", "CS", "2023-05-15", "3.90")
}

fn edits(p: &BridgePayload) -> Vec<BridgePayload> {
    let mut out = Vec::new();
    for field in 0..4 {
        let mut m = p.clone();
        match field {
            0 => m.name = "Alicia".into(),
            1 => m.program = "EE".into(),
            2 => m.graduation_date = "2024-05-15".into(),
            _ => m.gpa = "4.00".into(),
        }
        out.push(m);
    }
    out
}

#[test]
fn single_field_edits_fail_signature_and_both_ledger_checks() {
    let owner = keygen(Some(&[70; 32])).unwrap();
    let attacker = keygen(Some(&[71; 32])).unwrap();
    let mut ledger = Ledger::init(LedgerProfile::permissionless([owner.public_key()])).unwrap();
    cert::deploy(&mut ledger, &Submitter::account(&owner), 0).unwrap();
    let bc = issue_bridged_credential(&mut ledger, &owner, "uni:ksu", &Submitter::account(&owner), &alice(), 1).unwrap();
    let payload: BridgePayload = jose::decode_compact(&bc.jwt).unwrap().payload().unwrap();
    for edited in edits(&payload) {
        for signer in [&attacker, &owner] {
            let jwt = jose::sign_compact(TYP_VC_JWT, &edited, signer);
            let report = verify_bridged_credential(&jwt, &ledger, Reader::public(), &owner.public_key());
            assert!(!report.valid);
            assert!(report.reasons.contains(&"payload mismatch".to_string()));
            assert!(report.reasons.contains(&"mismatch".to_string()));
            assert_eq!(report.reasons.contains(&"bad signature".to_string()), signer.public_key() != owner.public_key());
        }
    }
}

fn permissioned() -> (Ledger, Vec<KeyPair>) {
    let keys: Vec<KeyPair> = (1..=3).map(|n| keygen(Some(&[72 + n; 32])).unwrap()).collect();
    let profile = LedgerProfile::permissioned_single_channel(
        [("p1", keys[0].public_key()), ("p2", keys[1].public_key()), ("p3", keys[2].public_key())],
        "certs",
        2,
    );
    (Ledger::init(profile).unwrap(), keys)
}

#[test]
fn ledger_revocation_dominates_on_both_profiles() {
    let vc_issuer = keygen(Some(&[80; 32])).unwrap();

    let owner = keygen(Some(&[81; 32])).unwrap();
    let mut open = Ledger::init(LedgerProfile::permissionless([owner.public_key()])).unwrap();
    let who = Submitter::account(&owner);
    cert::deploy(&mut open, &who, 0).unwrap();
    let jwt = issue_bridged_credential(&mut open, &vc_issuer, "uni:ksu", &who, &alice(), 1).unwrap().jwt;
    assert!(verify_bridged_credential(&jwt, &open, Reader::public(), &vc_issuer.public_key()).valid);
    cert::revoke_certificate(&mut open, &who, &alice().id(), 2).unwrap();
    let report = verify_bridged_credential(&jwt, &open, Reader::public(), &vc_issuer.public_key());
    assert_eq!(report.reasons, ["revoked"]);

    let (mut closed, keys) = permissioned();
    let who = Submitter::peer(&keys[0], "certs").endorsed_by("p1", &keys[0]).endorsed_by("p2", &keys[1]);
    let jwt = issue_bridged_credential(&mut closed, &vc_issuer, "uni:ksu", &who, &alice(), 1).unwrap().jwt;
    let reader = Reader::peer("p3", "certs");
    assert!(verify_bridged_credential(&jwt, &closed, reader, &vc_issuer.public_key()).valid);
    cert::revoke_certificate(&mut closed, &who, &alice().id(), 2).unwrap();
    let report = verify_bridged_credential(&jwt, &closed, reader, &vc_issuer.public_key());
    assert_eq!(report.reasons, ["revoked"]);
    assert!(jose::decode_compact(&jwt).unwrap().signature_valid(&vc_issuer.public_key()));
}

#[test]
fn distinct_students_get_distinct_ids() {
    let owner = keygen(Some(&[82; 32])).unwrap();
    let mut ledger = Ledger::init(LedgerProfile::permissionless([owner.public_key()])).unwrap();
    let who = Submitter::account(&owner);
    cert::deploy(&mut ledger, &who, 0).unwrap();
    let bob = CertificateAttributes::new("Bob", "CS", "2023-05-15", "3.90");
    let a: BridgePayload =
        jose::decode_compact(&issue_bridged_credential(&mut ledger, &owner, "u", &who, &alice(), 1).unwrap().jwt)
            .unwrap()
            .payload()
            .unwrap();
    let b: BridgePayload = jose::decode_compact(&issue_bridged_credential(&mut ledger, &owner, "u", &who, &bob, 2).unwrap().jwt)
        .unwrap()
        .payload()
        .unwrap();
    assert_ne!(a.certificate_id, b.certificate_id);
    assert_eq!(cert::get_certificate(&ledger, Reader::public(), &a.certificate_id).unwrap().attributes(), alice());
}
