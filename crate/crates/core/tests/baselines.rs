use accrl_core::baselines::*;
use accrl_core::crl::{concat_identity, generate_synthetic_crl, CrlKind};
use ed25519_dalek::SigningKey;
use proptest::prelude::*;

fn ca() -> SigningKey {
    SigningKey::from_bytes(&[0x11; 32])
}

fn ids(n: u32, tag: u8) -> Vec<[u8; 52]> {
    (0..n)
        .map(|i| {
            let mut id = [tag; 52];
            id[..4].copy_from_slice(&i.to_be_bytes());
            id
        })
        .collect()
}

#[test]
fn bloom_has_no_false_negatives() {
    let members = ids(10_000, 0xA0);
    let s = BloomSizing::for_target(members.len(), 0.01);
    let bloom = bloom_build(&members, s.m_bits, s.k_hashes);
    assert_eq!(bloom.inserted(), 10_000);
    assert!(members.iter().all(|id| bloom_query(&bloom, id)));
}

#[test]
fn bloom_false_positive_rate_near_target() {
    let members = ids(10_000, 0xA0);
    let s = BloomSizing::for_target(members.len(), 0.01);
    let bloom = bloom_build(&members, s.m_bits, s.k_hashes);
    let hits = ids(1_000_000, 0x5B).iter().filter(|id| bloom_query(&bloom, *id)).count();
    let rate = hits as f64 / 1e6;
    assert!((0.005..=0.02).contains(&rate), "{rate}");
    assert!((s.expected_fpr(10_000) - 0.01).abs() < 1e-4);
}

#[test]
fn bloom_over_crl_entries_answers_identity_queries() {
    let crl = generate_synthetic_crl(2000, CrlKind::Full, 0, [3; 32], &ca());
    let bloom = bloom_from_entries(&crl.entries, 0.01);
    for e in &crl.entries {
        assert!(bloom_query_identity(&bloom, &e.serial, &e.issuer_key_hash));
        assert!(bloom_query(&bloom, &concat_identity(e)));
    }
}

#[test]
fn storage_at_thirty_thousand_entries() {
    let rows = storage_report(30_000, 2048, 0.01);
    let bytes: Vec<_> = rows.iter().map(|r| (r.method, r.bytes)).collect();
    assert_eq!(
        bytes,
        vec![
            (Method::Accumulator, 924),
            (Method::Bloom, 46_366),
            (Method::FullCrl, 1_800_098)
        ]
    );
    assert_eq!(
        storage_csv(&rows),
        "method,entries,bytes\naccumulator,30000,924\nbloom,30000,46366\ncrl,30000,1800098\n"
    );
}

#[test]
fn optimal_sizing_differs_from_three_hash_default() {
    let opt = BloomSizing::optimal(30_000, 0.01);
    assert_eq!((opt.m_bits, opt.k_hashes), (287_552, 7));
    assert!(opt.bytes() < BloomSizing::for_target(30_000, 0.01).bytes());
}

proptest! {
    #[test]
    fn accumulator_storage_is_flat_and_crl_linear(n in 0usize..200_000, k in prop::sample::select(vec![1024u32, 2048, 3072])) {
        prop_assert_eq!(method_bytes(Method::Accumulator, n, k, 0.01), method_bytes(Method::Accumulator, 0, k, 0.01));
        prop_assert_eq!(method_bytes(Method::FullCrl, n + 1, k, 0.01) - method_bytes(Method::FullCrl, n, k, 0.01), 60);
        prop_assert!(method_bytes(Method::Bloom, n + 1000, k, 0.01) >= method_bytes(Method::Bloom, n, k, 0.01));
    }

    #[test]
    fn crl_lookup_matches_membership(present in 1usize..300, probe in 0usize..600) {
        let crl = generate_synthetic_crl(present, CrlKind::Full, 0, [present as u8; 32], &ca());
        let store = LocalCrlStore::from_crl(&crl);
        prop_assert_eq!(store.len(), present);
        if probe < present {
            let e = crl.entries[probe];
            prop_assert!(crl_lookup(&store, &e.serial, &e.issuer_key_hash));
        } else {
            let serial = [(probe % 251) as u8 | 0x80; 20];
            prop_assert!(!crl_lookup(&store, &serial, &[0xDE; 32]));
        }
    }
}

#[test]
fn crl_store_applies_deltas() {
    let full = generate_synthetic_crl(100, CrlKind::Full, 0, [1; 32], &ca());
    let delta = generate_synthetic_crl(10, CrlKind::Delta, 0, [2; 32], &ca());
    let mut store = LocalCrlStore::from_crl(&full);
    assert!(!crl_lookup(&store, &delta.entries[0].serial, &delta.entries[0].issuer_key_hash));
    store.apply_delta(&delta).unwrap();
    assert_eq!(store.len(), 110);
    assert!(delta
        .entries
        .iter()
        .all(|e| crl_lookup(&store, &e.serial, &e.issuer_key_hash)));
    assert!(store.apply_delta(&full).is_err());
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(Method::parse(m.name()), Some(m));
    }
    assert_eq!(Method::parse("acc"), Some(Method::Accumulator));
    assert_eq!(Method::parse("ocsp"), None);
}
