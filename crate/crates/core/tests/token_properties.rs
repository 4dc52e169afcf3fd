use credbench_core::crypto::{b64url_decode, keygen};
use credbench_core::scitokens::{
    authorize, verify_access_token, AccessToken, Action, IssuerConfig, ResourceRequest, TokenClaims, TokenError, TokenOptions,
};
use indexmap::IndexMap;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const T0: u64 = 1_700_000_000;
const B64URL: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

fn issuer() -> IssuerConfig {
    IssuerConfig::new("https://issuer.example", keygen(Some(&[60; 32])).unwrap(), [61; 32])
}

fn keys_in_order(segment: &str) -> Vec<String> {
    let bytes = b64url_decode(segment).unwrap();
    let map: IndexMap<String, serde_json::Value> = serde_json::from_slice(&bytes).unwrap();
    map.keys().cloned().collect()
}

#[test]
fn header_and_payload_keys_follow_the_wire_order() {
    let mut iss = issuer();
    let plain = iss.issue_access_token("u1", &["read:/data"], None, T0).unwrap();
    let full = iss
        .issue_access_token_with(
            "u1",
            &["read:/data"],
            &TokenOptions { ttl: Some(60), aud: Some("https://dtn.example".into()), nbf: Some(T0) },
            T0,
        )
        .unwrap();
    let segs: Vec<&str> = plain.compact.split('.').collect();
    assert_eq!(keys_in_order(segs[0]), ["alg", "typ", "kid"]);
    assert_eq!(keys_in_order(segs[1]), ["iss", "sub", "scope", "iat", "exp", "jti"]);
    let segs: Vec<&str> = full.compact.split('.').collect();
    assert_eq!(keys_in_order(segs[1]), ["iss", "sub", "aud", "scope", "nbf", "iat", "exp", "jti"]);
}

#[test]
fn thousand_single_character_tamperings_are_rejected() {
    let mut iss = issuer();
    let pk = iss.public_key();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for trial in 0..1000 {
        let token = iss.issue_access_token(&format!("user{trial}"), &["read:/data", "write:/out"], None, T0).unwrap();
        let mut chars: Vec<u8> = token.compact.clone().into_bytes();
        let pos = rng.gen_range(0..chars.len());
        let replacement = loop {
            let c = if rng.gen_bool(0.05) { b'.' } else { B64URL[rng.gen_range(0..B64URL.len())] };
            if c != chars[pos] {
                break c;
            }
        };
        chars[pos] = replacement;
        let tampered = AccessToken { compact: String::from_utf8(chars).unwrap() };
        assert!(verify_access_token(&tampered, &pk, T0 + 1, None).is_err(), "trial {trial} pos {pos}");
    }
}

#[test]
fn verification_needs_no_issuer_state() {
    let (token, pk) = {
        let mut iss = issuer();
        (iss.issue_access_token("u1", &["read:/data"], None, T0).unwrap(), iss.public_key())
    };
    let claims = verify_access_token(&token, &pk, T0 + 10, None).unwrap();
    assert_eq!(claims.sub, "u1");
}

#[test]
fn revoking_refresh_leaves_issued_access_tokens_alone() {
    let mut iss = issuer();
    let refresh = iss.issue_refresh_token("u1", &["read:/data"], T0).unwrap();
    let access = iss.refresh(&refresh.id, T0 + 5).unwrap();
    iss.revoke_refresh(&refresh.id).unwrap();
    assert_eq!(iss.refresh(&refresh.id, T0 + 6), Err(TokenError::RevokedToken));
    for now in [T0 + 5, T0 + 300, T0 + 604] {
        assert!(verify_access_token(&access, &iss.public_key(), now, None).is_ok());
    }
    assert_eq!(verify_access_token(&access, &iss.public_key(), T0 + 605, None), Err(TokenError::Expired));
}

fn claims_with(scopes: &[String]) -> TokenClaims {
    TokenClaims {
        iss: "i".into(),
        sub: "s".into(),
        aud: None,
        scope: scopes.join(" "),
        nbf: None,
        iat: 0,
        exp: 1,
        jti: "j".into(),
    }
}

fn path_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "data", "x1"]), 0..4)
        .prop_map(|segs| format!("/{}", segs.join("/")))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tokens_verify_exactly_inside_their_lifetime(ttl in 1u64..=600, offset in 0u64..1200) {
        let mut iss = issuer();
        let token = iss.issue_access_token("u1", &["read:/data"], Some(ttl), T0).unwrap();
        let result = verify_access_token(&token, &iss.public_key(), T0 + offset, None);
        if offset < ttl {
            prop_assert!(result.is_ok());
        } else {
            prop_assert_eq!(result, Err(TokenError::Expired));
        }
    }

    #[test]
    fn adding_scopes_never_removes_access(
        granted in prop::collection::vec((any::<bool>(), path_strategy()), 1..4),
        extra in prop::collection::vec((any::<bool>(), path_strategy()), 0..4),
        write in any::<bool>(),
        path in path_strategy(),
        suffix in prop::sample::select(vec!["", "/deeper", "/x1/y"]),
    ) {
        let render = |v: &[(bool, String)]| v.iter().map(|(w, p)| format!("{}:{}", if *w { "write" } else { "read" }, p)).collect::<Vec<_>>();
        let base = render(&granted);
        let mut wider = base.clone();
        wider.extend(render(&extra));
        let action = if write { Action::Write } else { Action::Read };
        let req = ResourceRequest { action, path: &path };
        if authorize(&claims_with(&base), &req) {
            prop_assert!(authorize(&claims_with(&wider), &req));
            let deeper = format!("{}{}", path.trim_end_matches('/'), suffix);
            let deeper = if deeper.is_empty() { "/".to_string() } else { deeper };
            let deeper_req = ResourceRequest { action, path: &deeper };
            prop_assert!(authorize(&claims_with(&base), &deeper_req));
        }
    }
}
