//! Adversarial request corpus shared by the protocol and acceptance tests.
#![allow(dead_code)]

use accrl_core::accumulator::{
    compute_non_revoked_proof, AccumulatorParams, AccumulatorValue, NonRevokedProof, SetupMode,
};
use accrl_core::crl::{generate_synthetic_crl, CrlFile, CrlKind, RevokedEntry, SYNTHETIC_THIS_UPDATE};
use accrl_core::manager::{setup_phase, DeviceId, SetupOptions};
use accrl_core::protocol::{FailedStep, PeerCertificate, VerificationRequest};
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub struct Case {
    pub name: String,
    pub req: VerificationRequest,
    pub expected: Option<FailedStep>,
}

pub struct World {
    pub params: AccumulatorParams,
    pub acc: AccumulatorValue,
    pub manager: VerifyingKey,
    pub cases: Vec<Case>,
}

fn peer_key(serial: &[u8; 20]) -> SigningKey {
    SigningKey::from_bytes(&[serial[0]; 32])
}

fn cert(serial: [u8; 20]) -> PeerCertificate {
    PeerCertificate {
        serial,
        issuer_key_hash: [0xD0; 32],
        peer_pubkey: peer_key(&serial).verifying_key().to_bytes(),
    }
}

fn request(proof: Option<NonRevokedProof>, serial: [u8; 20]) -> VerificationRequest {
    VerificationRequest::signed(cert(serial), proof, b"GET /meter/reading".to_vec(), &peer_key(&serial))
}

/// Eight registered devices at 1024 bits; devices 7 and 8 are revoked by the
/// first delta. Returns the world at epoch 1 with `random` extra
/// bit-flip cases on top of the fixed ones.
pub fn world(random: usize) -> World {
    let ca = SigningKey::from_bytes(&[0xCA; 32]);
    let signer = SigningKey::from_bytes(&[0x33; 32]);
    let devices: Vec<DeviceId> = (1..=8u8).map(|i| ([i; 20], [0xD0; 32])).collect();
    let full = generate_synthetic_crl(50, CrlKind::Full, 0, [3; 32], &ca);
    let opts = SetupOptions {
        bit_len_k: 1024,
        mode: SetupMode::Test,
        seed: Some([0x42; 32]),
        signer: signer.clone(),
        ca: ca.verifying_key(),
    };
    let (mut state, p0) = setup_phase(&full, &devices, opts).unwrap();
    let this_update = SYNTHETIC_THIS_UPDATE + 7 * 24 * 3600;
    let entries = devices[6..]
        .iter()
        .map(|&(serial, issuer_key_hash)| RevokedEntry {
            serial,
            revoked_at: this_update,
            issuer_key_hash,
        })
        .collect();
    let delta = CrlFile::new_signed(CrlKind::Delta, 0, this_update, this_update + 1, entries, &ca).unwrap();
    let p1 = state.update_phase(&delta).unwrap();
    let params = p1.params.clone();
    let acc = p1.acc.clone();
    let secrets = state.secrets.clone().unwrap();

    let mut cases = Vec::new();
    let mut push = |name: String, req, expected| cases.push(Case { name, req, expected });
    let resign = |mut p: NonRevokedProof| {
        p.sign(&signer).unwrap();
        p
    };
    let live = &p1.proofs;

    for p in live {
        let s = p.serial;
        let tag = s[0];
        push(format!("honest {tag}"), request(Some(p.clone()), s), None);
        push(format!("no proof {tag}"), request(None, s), Some(FailedStep::ProofSig));

        let mut q = p.clone();
        q.nw1 += 1u32;
        push(format!("unsigned nw1 {tag}"), request(Some(q.clone()), s), Some(FailedStep::ProofSig));
        push(format!("re-signed nw1 {tag}"), request(Some(resign(q)), s), Some(FailedStep::RevocationCheck));

        let mut q = p.clone();
        q.nw2 += 1u32;
        push(format!("re-signed nw2 {tag}"), request(Some(resign(q)), s), Some(FailedStep::RevocationCheck));

        let mut q = p.clone();
        q.x += 2u32;
        push(format!("re-signed x {tag}"), request(Some(resign(q)), s), Some(FailedStep::RevocationCheck));

        let mut q = p.clone();
        q.signature = SigningKey::from_bytes(&[0x66; 32]).sign(&q.signed_bytes().unwrap()).to_bytes();
        push(format!("foreign signer {tag}"), request(Some(q), s), Some(FailedStep::ProofSig));

        let mut q = p.clone();
        q.field_bytes += 1;
        push(format!("widened fields {tag}"), request(Some(resign(q)), s), Some(FailedStep::LengthCheck));

        let mut q = p.clone();
        q.field_bytes += 1;
        q.nw2 = BigUint::from(1u32) << params.bit_len_k;
        push(format!("oversized nw2 {tag}"), request(Some(resign(q)), s), Some(FailedStep::LengthCheck));

        let mut q = p.clone();
        q.epoch += 1;
        push(format!("future epoch {tag}"), request(Some(resign(q)), s), Some(FailedStep::EpochMismatch));

        let other = live.iter().find(|o| o.serial != s).unwrap();
        push(
            format!("borrowed proof {tag}"),
            request(Some(other.clone()), s),
            Some(FailedStep::SerialMismatch),
        );

        let mut req = request(Some(p.clone()), s);
        req.request_body.extend_from_slice(b"&all=1");
        push(format!("altered body {tag}"), req, Some(FailedStep::RequestSig));

        let mut req = request(Some(p.clone()), s);
        req.request_sig = SigningKey::from_bytes(&[0x77; 32]).sign(&req.request_body).to_bytes();
        push(format!("stolen proof replay {tag}"), req, Some(FailedStep::RequestSig));
    }

    // Epoch-0 proofs: valid signatures, replayed after the update.
    for p in &p0.proofs {
        push(
            format!("replayed epoch 0 {}", p.serial[0]),
            request(Some(p.clone()), p.serial),
            Some(FailedStep::EpochMismatch),
        );
        let mut q = p.clone();
        q.epoch = acc.epoch;
        let revoked = state.device_registry.get(&p.serial).is_none();
        // Stale proofs never satisfy the new accumulator, revoked or not.
        push(
            format!("replayed epoch 0 relabelled {} revoked={revoked}", p.serial[0]),
            request(Some(resign(q)), p.serial),
            Some(FailedStep::RevocationCheck),
        );
    }

    // A manager-signed proof computed for each revoked identity as if it were
    // not in the set.
    for (i, rep) in state.accumulated.iter().enumerate().filter(|(i, _)| i % 5 == 0) {
        let others: Vec<_> = state
            .accumulated
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, r)| r.clone())
            .collect();
        let forged =
            compute_non_revoked_proof(rep, &others, &params, Some(&secrets), &state.r_k, acc.epoch, &signer).unwrap();
        let serial = forged.serial;
        push(
            format!("revoked identity {i}"),
            request(Some(forged), serial),
            Some(FailedStep::RevocationCheck),
        );
    }

    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for n in 0..random {
        let p = &live[rng.gen_range(0..live.len())];
        let mut q = p.clone();
        let field = rng.gen_range(0..3);
        let width = if field == 2 { 511 } else { params.bit_len_k as u64 - 1 };
        let bit = rng.gen_range(0..width);
        let target = match field {
            0 => &mut q.nw1,
            1 => &mut q.nw2,
            _ => &mut q.x,
        };
        let set = !target.bit(bit);
        target.set_bit(bit, set);
        push(
            format!("random flip {n} field {field} bit {bit}"),
            request(Some(resign(q)), p.serial),
            Some(FailedStep::RevocationCheck),
        );
    }

    World {
        params,
        acc,
        manager: signer.verifying_key(),
        cases,
    }
}
