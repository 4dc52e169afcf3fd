use std::collections::{BTreeMap, BTreeSet};

use credbench_core::crypto::{keygen, Digest, KeyPair};
use credbench_core::vcred::{
    derive_presentation, issue_credential, register_issuer, revoke_credential, verify_presentation, DataRegistry, FileRegistry,
    IssuedCredential, LedgerRegistry, Presentation, RegistryStore, Salt,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const NOW: u64 = 1_000;

struct Parties {
    issuer: KeyPair,
    holder: KeyPair,
}

fn parties() -> Parties {
    Parties { issuer: keygen(Some(&[31; 32])).unwrap(), holder: keygen(Some(&[32; 32])).unwrap() }
}

fn registry_with_issuer(p: &Parties) -> DataRegistry {
    let mut r = DataRegistry::new();
    register_issuer(&mut r, "uni:ksu", p.issuer.public_key()).unwrap();
    r
}

fn random_value(rng: &mut ChaCha20Rng) -> String {
    // at least 8 bytes, drawn from characters JSON leaves unescaped
    let len = rng.gen_range(8..24);
    (0..len).map(|_| char::from(rng.gen_range(b'a'..=b'z'))).collect()
}

fn random_attributes(rng: &mut ChaCha20Rng) -> BTreeMap<String, String> {
    let n = rng.gen_range(1..7);
    (0..n).map(|i| (format!("attr{i}"), random_value(rng))).collect()
}

fn issue(
    p: &Parties,
    registry: &mut dyn RegistryStore,
    attrs: &BTreeMap<String, String>,
    rng: &mut ChaCha20Rng,
) -> IssuedCredential {
    issue_credential(&p.issuer, "uni:ksu", p.holder.public_key(), attrs, 0, 2_000, registry, rng).unwrap()
}

#[test]
fn hidden_values_never_reach_the_wire() {
    let p = parties();
    let mut registry = registry_with_issuer(&p);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let attrs = random_attributes(&mut rng);
        let issued = issue(&p, &mut registry, &attrs, &mut rng);
        let disclose: BTreeSet<String> = attrs.keys().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        let pres = derive_presentation(&issued.credential, &p.holder, &disclose, "c", &issued.holder_store).unwrap();
        let wire = pres.to_json();
        for (label, value) in &attrs {
            if !disclose.contains(label) {
                assert!(!wire.contains(value.as_str()), "hidden {label} leaked");
            }
        }
        assert!(verify_presentation(&pres, &registry, "c", NOW).valid);
    }
}

#[test]
fn fresh_salts_make_identical_attributes_commit_differently() {
    let p = parties();
    let mut registry = registry_with_issuer(&p);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let attrs: BTreeMap<String, String> = [("name".to_string(), "Alice".to_string())].into();
    let mut seen = BTreeSet::new();
    for _ in 0..1000 {
        let issued = issue(&p, &mut registry, &attrs, &mut rng);
        assert!(seen.insert(issued.credential.commitments[0]));
    }
}

/// Every single-field mutation a verifier could be handed.
fn mutations(pres: &Presentation) -> Vec<(String, Presentation)> {
    let mut out = Vec::new();
    let mut push = |name: String, f: &dyn Fn(&mut Presentation)| {
        let mut m = pres.clone();
        f(&mut m);
        out.push((name, m));
    };
    for i in 0..pres.disclosed.len() {
        push(format!("value {i}"), &|m| m.disclosed[i].value.push('!'));
        push(format!("label {i}"), &|m| m.disclosed[i].label.push('!'));
        push(format!("salt {i}"), &|m| m.disclosed[i].salt.0[0] ^= 1);
    }
    for i in 0..pres.credential.commitments.len() {
        push(format!("commitment {i}"), &|m| {
            let mut bytes = *m.credential.commitments[i].as_bytes();
            bytes[31] ^= 0x80;
            m.credential.commitments[i] = Digest::from_bytes(bytes);
        });
    }
    push("valid_from".into(), &|m| m.credential.valid_from += 1);
    push("valid_until".into(), &|m| m.credential.valid_until -= 1);
    push("challenge".into(), &|m| m.challenge.push('x'));
    push("credential id".into(), &|m| m.credential.id.push('x'));
    push("issuer id".into(), &|m| m.credential.issuer_id.push('x'));
    push("status id".into(), &|m| m.credential.status_id.push('x'));
    push("holder key".into(), &|m| m.credential.holder_public_key = keygen(Some(&[99; 32])).unwrap().public_key());
    push("issuer signature".into(), &|m| {
        let mut b = *m.credential.issuer_signature.as_bytes();
        b[0] ^= 1;
        m.credential.issuer_signature = credbench_core::crypto::Signature::from_bytes(b);
    });
    push("holder signature".into(), &|m| {
        let mut b = *m.holder_signature.as_bytes();
        b[63] ^= 1;
        m.holder_signature = credbench_core::crypto::Signature::from_bytes(b);
    });
    push("dropped disclosure".into(), &|m| {
        m.disclosed.pop();
    });
    out
}

#[test]
fn every_single_field_mutation_invalidates() {
    let p = parties();
    let mut registry = registry_with_issuer(&p);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..100 {
        let attrs = random_attributes(&mut rng);
        let issued = issue(&p, &mut registry, &attrs, &mut rng);
        let all: BTreeSet<String> = attrs.keys().cloned().collect();
        let pres = derive_presentation(&issued.credential, &p.holder, &all, "c", &issued.holder_store).unwrap();
        assert!(verify_presentation(&pres, &registry, "c", NOW).valid);
        for (name, mutated) in mutations(&pres) {
            let report = verify_presentation(&mutated, &registry, "c", NOW);
            assert!(!report.valid, "mutation {name} still verified");
        }
    }
}

#[test]
fn backends_give_identical_reports() {
    let p = parties();
    let dir = tempfile::tempdir().unwrap();
    let mut backends: Vec<Box<dyn RegistryStore>> = vec![
        Box::new(DataRegistry::new()),
        Box::new(FileRegistry::new(dir.path().join("registry.json"))),
        Box::new(LedgerRegistry::new(keygen(Some(&[33; 32])).unwrap())),
    ];
    let mut reports = Vec::new();
    for backend in &mut backends {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        register_issuer(backend.as_mut(), "uni:ksu", p.issuer.public_key()).unwrap();
        let mut per_backend = Vec::new();
        for n in 0..20 {
            let attrs = random_attributes(&mut rng);
            let issued = issue(&p, backend.as_mut(), &attrs, &mut rng);
            let first: BTreeSet<String> = attrs.keys().take(1).cloned().collect();
            let pres = derive_presentation(&issued.credential, &p.holder, &first, "c", &issued.holder_store).unwrap();
            if n % 3 == 0 {
                revoke_credential(backend.as_mut(), &issued.credential.status_id).unwrap();
            }
            per_backend.push(verify_presentation(&pres, backend.as_ref(), "c", NOW));
            per_backend.push(verify_presentation(&pres, backend.as_ref(), "other", 5_000));
        }
        reports.push(per_backend);
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
    assert!(reports[0].iter().any(|r| r.reasons == ["revoked"]));
}

#[test]
fn salt_serializes_as_unpadded_base64url() {
    let salt = Salt([0xff; 16]);
    assert_eq!(serde_json::to_string(&salt).unwrap(), "\"_____________________w\"");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disclosure_is_monotone(n in 1usize..7, mask in any::<u8>(), sub in any::<u8>(), seed in any::<u64>()) {
        let p = parties();
        let mut registry = registry_with_issuer(&p);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let attrs: BTreeMap<String, String> = (0..n).map(|i| (format!("a{i}"), format!("value-{i}-{seed}"))).collect();
        let issued = issue(&p, &mut registry, &attrs, &mut rng);
        let labels: Vec<&String> = attrs.keys().collect();
        let d: BTreeSet<String> = labels.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, l)| (*l).clone()).collect();
        let d_sub: BTreeSet<String> = d.iter().enumerate().filter(|(i, _)| sub >> i & 1 == 1).map(|(_, l)| l.clone()).collect();
        let full = derive_presentation(&issued.credential, &p.holder, &d, "c", &issued.holder_store).unwrap();
        prop_assert!(verify_presentation(&full, &registry, "c", NOW).valid);
        let smaller = derive_presentation(&issued.credential, &p.holder, &d_sub, "c", &issued.holder_store).unwrap();
        let report = verify_presentation(&smaller, &registry, "c", NOW);
        prop_assert!(report.valid);
        prop_assert_eq!(report.disclosed.keys().cloned().collect::<BTreeSet<_>>(), d_sub);
    }
}
