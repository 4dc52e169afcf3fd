#[allow(dead_code)]
#[path = "support/sha256_oracle.rs"]
mod oracle;

use credbench_core::cert::{
    self, counts, get_certificate, issue_certificate, owner_of, verify_certificate, CertError, CertificateAttributes, Reader,
    Submitter, VerifyReason,
};
use credbench_core::crypto::{keygen, KeyPair};
use credbench_core::ledger::{Ledger, LedgerProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_text(rng: &mut ChaCha20Rng, max: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'Z', ' ', '-', 'é', '字', '0', '9', '.', '|'];
    let len = rng.gen_range(1..=max);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

fn random_gpa(rng: &mut ChaCha20Rng) -> String {
    let hundredths: u32 = rng.gen_range(0..=400);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

fn random_attributes(rng: &mut ChaCha20Rng, i: usize) -> CertificateAttributes {
    CertificateAttributes::new(
        format!("{}#{i}", random_text(rng, 12)),
        random_text(rng, 10),
        format!("20{:02}-{:02}-{:02}", rng.gen_range(0..30), rng.gen_range(1..13), rng.gen_range(1..29)),
        random_gpa(rng),
    )
}

fn mutate_field(attrs: &CertificateAttributes, field: usize) -> CertificateAttributes {
    let mut m = attrs.clone();
    match field {
        0 => m.name.push('x'),
        1 => m.program.insert(0, 'y'),
        2 => m.graduation_date = m.graduation_date.replace('-', "/"),
        _ => m.gpa = if m.gpa == "0.00" { "0.01".into() } else { "0.00".into() },
    }
    m
}

fn owned(owner: &KeyPair, extra: &[&KeyPair]) -> Ledger {
    let accounts = std::iter::once(owner.public_key()).chain(extra.iter().map(|k| k.public_key()));
    let mut ledger = Ledger::init(LedgerProfile::permissionless(accounts)).unwrap();
    cert::deploy(&mut ledger, &Submitter::account(owner), 0).unwrap();
    ledger
}

#[test]
fn thousand_certificates_round_trip_and_reject_single_field_changes() {
    let owner = keygen(Some(&[11; 32])).unwrap();
    let mut ledger = owned(&owner, &[]);
    let who = Submitter::account(&owner);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for i in 0..1000 {
        let attrs = random_attributes(&mut rng, i);
        let id = issue_certificate(&mut ledger, &who, &attrs, i as u64).unwrap();

        let stored = get_certificate(&ledger, Reader::public(), &id).unwrap();
        let expected = oracle::sha256(&oracle::encode_pairs(&[
            ("N", &attrs.name),
            ("P", &attrs.program),
            ("GD", &attrs.graduation_date),
            ("G", &attrs.gpa),
        ]));
        assert_eq!(stored.signature.as_bytes(), &expected);
        assert_eq!(stored.token_id, i as u64 + 1);

        assert!(verify_certificate(&ledger, Reader::public(), &id, &attrs).unwrap().valid);
        for field in 0..4 {
            let v = verify_certificate(&ledger, Reader::public(), &id, &mutate_field(&attrs, field)).unwrap();
            assert_eq!(v.reason, Some(VerifyReason::Mismatch), "cert {i} field {field}");
        }
    }
    assert_eq!(counts(&ledger, Reader::public()).unwrap(), (1000, 1000));
    let replayed = Ledger::replay(ledger.profile_at_genesis().clone(), ledger.chain()).unwrap();
    assert_eq!(replayed.state_root(), ledger.state_root());
}

#[test]
fn certificate_id_is_frozen_for_the_reference_record() {
    let attrs = CertificateAttributes::new("Alice", "CS", "2023-05-15", "3.90");
    assert_eq!(attrs.signature().to_hex(), "5d302f3fb611c63478cb1b85766e69632d0e035f2623872ba0107b33daeb349a");
    assert_eq!(attrs.id().as_str(), "XTAvP7YRxjR4yxuFdm5pYy0OA18mI4croBB7M9rrNJo");
}

#[test]
fn permissioned_under_endorsed_calls_never_mutate_state() {
    let keys: Vec<KeyPair> = (1..=3).map(|n| keygen(Some(&[n; 32])).unwrap()).collect();
    let profile = LedgerProfile::permissioned_single_channel(
        [("p1", keys[0].public_key()), ("p2", keys[1].public_key()), ("p3", keys[2].public_key())],
        "certs",
        2,
    );
    let mut ledger = Ledger::init(profile).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for i in 0..50 {
        let attrs = random_attributes(&mut rng, i);
        let before = ledger.state_root();
        let lone = Submitter::peer(&keys[i % 3], "certs").endorsed_by(["p1", "p2", "p3"][i % 3], &keys[i % 3]);
        assert_eq!(issue_certificate(&mut ledger, &lone, &attrs, i as u64), Err(CertError::InsufficientEndorsements));
        assert_eq!(ledger.state_root(), before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn non_owner_calls_never_mutate_state(ops in prop::collection::vec((any::<bool>(), 0u8..3, 0usize..4), 1..12)) {
        let owner = keygen(Some(&[21; 32])).unwrap();
        let other = keygen(Some(&[22; 32])).unwrap();
        let mut ledger = owned(&owner, &[&other]);
        let mut issued = Vec::new();
        for (n, (by_owner, op, pick)) in ops.into_iter().enumerate() {
            let key = if by_owner { &owner } else { &other };
            let who = Submitter::account(key);
            let before = ledger.state_root();
            let attrs = CertificateAttributes::new(format!("S{n}"), "CS", "2023-05-15", "3.00");
            let result = match op {
                0 => issue_certificate(&mut ledger, &who, &attrs, n as u64).map(|id| { issued.push(id); }),
                1 => match issued.get(pick) {
                    Some(id) => cert::revoke_certificate(&mut ledger, &who, id, n as u64),
                    None => Ok(()),
                },
                _ => cert::deploy(&mut ledger, &who, n as u64),
            };
            if !by_owner {
                prop_assert!(result.is_err() || op == 1 && issued.get(pick).is_none());
                prop_assert_eq!(ledger.state_root(), before);
            }
            let (certs, tokens) = counts(&ledger, Reader::public()).unwrap();
            prop_assert_eq!(certs, tokens);
        }
    }

    #[test]
    fn tokens_are_dense_from_one(n in 1usize..15) {
        let owner = keygen(Some(&[23; 32])).unwrap();
        let mut ledger = owned(&owner, &[]);
        for i in 0..n {
            let attrs = CertificateAttributes::new(format!("S{i}"), "CS", "2023-05-15", "3.00");
            issue_certificate(&mut ledger, &Submitter::account(&owner), &attrs, i as u64).unwrap();
        }
        for t in 1..=n as u64 {
            prop_assert!(owner_of(&ledger, Reader::public(), t).is_ok());
        }
        prop_assert_eq!(owner_of(&ledger, Reader::public(), n as u64 + 1), Err(CertError::UnknownToken(n as u64 + 1)));
    }
}
