//! Device-side verification of a peer: certificate, manager-signed
//! non-revoked proof and a request signed by the peer's own key.

use std::time::Instant;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use num_bigint::BigUint;

use crate::accumulator::{revocation_check, AccumulatorParams, AccumulatorValue, NonRevokedProof};

/// Simplified certificate: identity plus the peer's Ed25519 key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerCertificate {
    pub serial: [u8; 20],
    pub issuer_key_hash: [u8; 32],
    pub peer_pubkey: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationRequest {
    pub peer_certificate: PeerCertificate,
    /// `None` models a peer that presents no proof at all.
    pub peer_proof: Option<NonRevokedProof>,
    pub request_body: Vec<u8>,
    pub request_sig: [u8; 64],
}

impl VerificationRequest {
    /// Builds a request whose body is signed with `peer_key`.
    pub fn signed(
        peer_certificate: PeerCertificate,
        peer_proof: Option<NonRevokedProof>,
        request_body: Vec<u8>,
        peer_key: &SigningKey,
    ) -> Self {
        let request_sig = peer_key.sign(&request_body).to_bytes();
        Self {
            peer_certificate,
            peer_proof,
            request_body,
            request_sig,
        }
    }
}

/// Checks in the order they run; the first failure is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailedStep {
    ProofSig,
    SerialMismatch,
    LengthCheck,
    EpochMismatch,
    RevocationCheck,
    RequestSig,
}

impl std::fmt::Display for FailedStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerificationOutcome {
    pub accepted: bool,
    pub failed_step: Option<FailedStep>,
}

impl VerificationOutcome {
    fn accept() -> Self {
        Self {
            accepted: true,
            failed_step: None,
        }
    }

    fn reject(step: FailedStep) -> Self {
        Self {
            accepted: false,
            failed_step: Some(step),
        }
    }
}

fn step(ok: bool, on_fail: FailedStep) -> Result<(), FailedStep> {
    if ok {
        Ok(())
    } else {
        Err(on_fail)
    }
}

/// Runs the checks in order:
///
/// 1. manager signature on the proof,
/// 2. proof serial equals certificate serial,
/// 3. `nw1` and `nw2` are encoded at the modulus width,
/// 4. proof epoch equals the local accumulator epoch,
/// 5. `a^nw1 ≡ nw2^x · g (mod N)`,
/// 6. request signature under the certificate's key.
pub fn verify_peer(
    req: &VerificationRequest,
    local_acc: &AccumulatorValue,
    params: &AccumulatorParams,
    manager_pubkey: &VerifyingKey,
) -> VerificationOutcome {
    match run_steps(req, local_acc, params, manager_pubkey) {
        Ok(()) => VerificationOutcome::accept(),
        Err(s) => VerificationOutcome::reject(s),
    }
}

fn run_steps(
    req: &VerificationRequest,
    acc: &AccumulatorValue,
    params: &AccumulatorParams,
    manager_pubkey: &VerifyingKey,
) -> Result<(), FailedStep> {
    let proof = req.peer_proof.as_ref().ok_or(FailedStep::ProofSig)?;
    step(proof.verify_signature(manager_pubkey), FailedStep::ProofSig)?;
    step(proof.serial == req.peer_certificate.serial, FailedStep::SerialMismatch)?;

    let k = u64::from(params.bit_len_k);
    step(
        proof.field_bytes == params.field_bytes() && proof.nw1.bits() <= k && proof.nw2.bits() <= k,
        FailedStep::LengthCheck,
    )?;
    step(proof.epoch == acc.epoch, FailedStep::EpochMismatch)?;
    // a ∈ {0, 1} makes the left side constant and the check forgeable.
    step(
        acc.a >= BigUint::from(2u32) && revocation_check(proof, acc, params),
        FailedStep::RevocationCheck,
    )?;

    let peer = VerifyingKey::from_bytes(&req.peer_certificate.peer_pubkey).map_err(|_| FailedStep::RequestSig)?;
    step(
        peer.verify_strict(&req.request_body, &Signature::from_bytes(&req.request_sig))
            .is_ok(),
        FailedStep::RequestSig,
    )
}

/// Mean wall-clock milliseconds of `revocation_check` over `iterations` runs.
pub fn check_timing_bench(
    proof: &NonRevokedProof,
    acc: &AccumulatorValue,
    params: &AccumulatorParams,
    iterations: usize,
) -> f64 {
    assert!(iterations > 0);
    let start = Instant::now();
    let mut passed = 0usize;
    for _ in 0..iterations {
        passed += usize::from(std::hint::black_box(revocation_check(
            std::hint::black_box(proof),
            acc,
            params,
        )));
    }
    std::hint::black_box(passed);
    start.elapsed().as_secs_f64() * 1e3 / iterations as f64
}
