//! The accumulator manager: ingests CRLs, owns the revoked set and the device
//! registry, and issues signed distribution payloads.
//!
//! Payload file (`.apay`):
//!
//! ```text
//! "APAY" | version u8 = 1 | k u32 | N[k/8] | g[k/8] | manager_pubkey[32]
//!        | a[k/8] | epoch u64 | manager_sig[64] | count u32 | count × proof
//! ```
//!
//! `manager_sig` is an Ed25519 signature over `a[k/8] ‖ epoch`. The public
//! parameters and the manager key travel with the payload so a device can
//! check it stand-alone; a real deployment would pin both at provisioning.
//!
//! State file (`.amgr`) holds everything needed to resume, including the
//! trapdoor when it has not been deleted (unencrypted, flagged), and ends
//! with the SHA-256 of all preceding bytes.

use std::collections::{BTreeMap, HashSet};

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use num_bigint::BigUint;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::accumulator::{
    compute_acc, compute_non_revoked_proofs, prime_representative, revocation_check, setup,
    update_acc, AccumulatorError, AccumulatorParams, AccumulatorValue, ManagerSecrets,
    NonRevokedProof, PrimeRep, RepSource, SetupMode,
};
use crate::crl::{CrlError, CrlFile, CrlKind, RevokedEntry};
use crate::encoding::{put_fixed, put_var, CodecError, Reader};

pub const PAYLOAD_MAGIC: &[u8; 4] = b"APAY";
pub const STATE_MAGIC: &[u8; 4] = b"AMGR";
pub const FORMAT_VERSION: u8 = 1;
/// Largest modulus a payload may declare.
pub const MAX_BIT_LEN: u32 = 8192;

const FLAG_SECRETS: u8 = 0x01;
const DIGEST_LEN: usize = 32;

/// A device certificate identity: serial and issuer key hash.
pub type DeviceId = ([u8; 20], [u8; 32]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManagerError {
    #[error("CRL signature does not verify under the CA key")]
    BadCrlSignature,
    #[error("expected a {expected:?} CRL")]
    WrongCrlKind { expected: CrlKind },
    #[error("device {} appears in the CRL", hex_serial(.0))]
    DeviceRevoked([u8; 20]),
    #[error("device {} registered twice", hex_serial(.0))]
    DuplicateDevice([u8; 20]),
    #[error("delta extends epoch {got} but the manager is at epoch {expected}")]
    StaleDelta { expected: u64, got: u64 },
    #[error("delta revokes an identity that is already accumulated")]
    DuplicateRevocation,
    #[error("state file is corrupt")]
    CorruptState,
    #[error(transparent)]
    Accumulator(#[from] AccumulatorError),
    #[error(transparent)]
    Crl(#[from] CrlError),
}

fn hex_serial(s: &[u8; 20]) -> String {
    s.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unsupported modulus length {0}")]
    BadBitLength(u32),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// One record per device dropped from the registry because it was revoked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditEntry {
    pub epoch: u64,
    pub serial: [u8; 20],
}

/// Accumulator value, per-device proofs and the manager's signature over
/// `(a, epoch)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionPayload {
    pub params: AccumulatorParams,
    pub manager_pubkey: [u8; 32],
    pub acc: AccumulatorValue,
    pub manager_sig: [u8; 64],
    pub proofs: Vec<NonRevokedProof>,
}

fn acc_signed_bytes(acc: &AccumulatorValue, params: &AccumulatorParams) -> Result<Vec<u8>, CodecError> {
    let mut buf = Vec::with_capacity(params.field_bytes() + 8);
    put_fixed(&mut buf, &acc.a, params.field_bytes())?;
    buf.extend_from_slice(&acc.epoch.to_be_bytes());
    Ok(buf)
}

impl DistributionPayload {
    fn new(
        params: &AccumulatorParams,
        acc: &AccumulatorValue,
        proofs: Vec<NonRevokedProof>,
        signer: &SigningKey,
    ) -> Result<Self, CodecError> {
        let sig = signer.sign(&acc_signed_bytes(acc, params)?);
        Ok(Self {
            params: params.clone(),
            manager_pubkey: signer.verifying_key().to_bytes(),
            acc: acc.clone(),
            manager_sig: sig.to_bytes(),
            proofs,
        })
    }

    /// Checks `manager_sig` under `manager`.
    pub fn verify_signature(&self, manager: &VerifyingKey) -> bool {
        let Ok(msg) = acc_signed_bytes(&self.acc, &self.params) else {
            return false;
        };
        manager
            .verify_strict(&msg, &Signature::from_bytes(&self.manager_sig))
            .is_ok()
    }

    /// Unicast view carrying only the proof for `serial`.
    pub fn for_device(&self, serial: &[u8; 20]) -> Option<Self> {
        let proof = self.proofs.iter().find(|p| &p.serial == serial)?;
        Some(Self {
            proofs: vec![proof.clone()],
            ..self.clone()
        })
    }

    pub fn encoded_len(&self) -> usize {
        let fb = self.params.field_bytes();
        4 + 1 + 4 + 3 * fb + 32 + 8 + 64 + 4 + self.proofs.len() * NonRevokedProof::wire_len(fb)
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let fb = self.params.field_bytes();
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(PAYLOAD_MAGIC);
        buf.push(FORMAT_VERSION);
        buf.extend_from_slice(&self.params.bit_len_k.to_be_bytes());
        put_fixed(&mut buf, &self.params.modulus_n, fb)?;
        put_fixed(&mut buf, &self.params.base_g, fb)?;
        buf.extend_from_slice(&self.manager_pubkey);
        put_fixed(&mut buf, &self.acc.a, fb)?;
        buf.extend_from_slice(&self.acc.epoch.to_be_bytes());
        buf.extend_from_slice(&self.manager_sig);
        buf.extend_from_slice(&(self.proofs.len() as u32).to_be_bytes());
        for p in &self.proofs {
            buf.extend_from_slice(&p.to_bytes()?);
        }
        Ok(buf)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != PAYLOAD_MAGIC {
            return Err(PayloadError::BadMagic);
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(PayloadError::BadVersion(version));
        }
        let k = r.u32()?;
        if k == 0 || k > MAX_BIT_LEN {
            return Err(PayloadError::BadBitLength(k));
        }
        let fb = (k as usize).div_ceil(8);
        let params = AccumulatorParams {
            modulus_n: r.fixed_uint(fb)?,
            base_g: r.fixed_uint(fb)?,
            bit_len_k: k,
        };
        let manager_pubkey = r.array()?;
        let acc = AccumulatorValue {
            a: r.fixed_uint(fb)?,
            epoch: r.u64()?,
        };
        let manager_sig = r.array()?;
        let count = r.u32()? as usize;
        let proof_len = NonRevokedProof::wire_len(fb);
        if r.remaining() < count.saturating_mul(proof_len) {
            return Err(CodecError::Truncated.into());
        }
        let proofs = (0..count)
            .map(|_| NonRevokedProof::read(&mut r, fb))
            .collect::<Result<Vec<_>, _>>()?;
        if r.remaining() != 0 {
            return Err(PayloadError::TrailingBytes(r.remaining()));
        }
        Ok(Self {
            params,
            manager_pubkey,
            acc,
            manager_sig,
            proofs,
        })
    }
}

/// Inputs to [`setup_phase`] besides the CRL and devices.
pub struct SetupOptions {
    pub bit_len_k: u32,
    pub mode: SetupMode,
    pub seed: Option<[u8; 32]>,
    /// Key the manager signs proofs and payloads with.
    pub signer: SigningKey,
    /// CA key the CRLs must verify under.
    pub ca: VerifyingKey,
}

/// Manager state between phases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManagerState {
    pub params: AccumulatorParams,
    /// Trapdoor; `None` once deleted, after which every operation runs
    /// trapdoorless.
    pub secrets: Option<ManagerSecrets>,
    /// Freshness exponent, kept apart from the deletable trapdoor.
    pub r_k: BigUint,
    pub signer: SigningKey,
    pub ca: VerifyingKey,
    /// Revoked prime representatives in accumulation order.
    pub accumulated: Vec<PrimeRep>,
    pub acc: AccumulatorValue,
    pub device_registry: BTreeMap<[u8; 20], PrimeRep>,
    /// `(epoch, digest of the CRL ingested at that epoch)`.
    pub epoch_log: Vec<(u64, [u8; 32])>,
    pub audit_log: Vec<AuditEntry>,
}

fn check_crl(crl: &CrlFile, ca: &VerifyingKey, kind: CrlKind) -> Result<(), ManagerError> {
    if crl.kind != kind {
        return Err(ManagerError::WrongCrlKind { expected: kind });
    }
    crl.verify(ca).map_err(|_| ManagerError::BadCrlSignature)
}

/// Prime representatives for CRL entries, computed in parallel.
pub fn entry_reps(entries: &[RevokedEntry]) -> Result<Vec<PrimeRep>, AccumulatorError> {
    entries
        .par_iter()
        .map(|e| prime_representative(&e.serial, &e.issuer_key_hash))
        .collect()
}

fn device_reps(devices: &[DeviceId]) -> Result<BTreeMap<[u8; 20], PrimeRep>, ManagerError> {
    let reps: Vec<PrimeRep> = devices
        .par_iter()
        .map(|(serial, issuer)| prime_representative(serial, issuer))
        .collect::<Result<_, _>>()?;
    let mut registry = BTreeMap::new();
    for rep in reps {
        let serial = rep.serial();
        if registry.insert(serial, rep).is_some() {
            return Err(ManagerError::DuplicateDevice(serial));
        }
    }
    Ok(registry)
}

/// Builds the initial state from a full CRL: accumulates every entry, draws
/// fresh parameters and `r_k`, and issues one proof per device at epoch 0.
pub fn setup_phase(
    full_crl: &CrlFile,
    devices: &[DeviceId],
    opts: SetupOptions,
) -> Result<(ManagerState, DistributionPayload), ManagerError> {
    check_crl(full_crl, &opts.ca, CrlKind::Full)?;
    let revoked: HashSet<DeviceId> = full_crl
        .entries
        .iter()
        .map(|e| (e.serial, e.issuer_key_hash))
        .collect();
    if let Some((serial, _)) = devices.iter().find(|d| revoked.contains(*d)) {
        return Err(ManagerError::DeviceRevoked(*serial));
    }
    let device_registry = device_reps(devices)?;
    let accumulated = entry_reps(&full_crl.entries)?;
    let (params, secrets) = setup(opts.bit_len_k, opts.mode, opts.seed)?;
    let r_k = secrets.r_k.clone();
    let acc = compute_acc(&accumulated, &params, Some(&secrets), &r_k)?;
    let mut state = ManagerState {
        params,
        secrets: Some(secrets),
        r_k,
        signer: opts.signer,
        ca: opts.ca,
        accumulated,
        acc,
        device_registry,
        epoch_log: Vec::new(),
        audit_log: Vec::new(),
    };
    state.epoch_log.push((0, full_crl.digest()));
    let payload = state.issue_payload(None)?;
    state.debug_check();
    Ok((state, payload))
}

impl ManagerState {
    pub fn manager_pubkey(&self) -> VerifyingKey {
        self.signer.verifying_key()
    }

    /// Applies a delta CRL: accumulates its entries, drops newly revoked
    /// devices from the registry and re-issues every remaining proof at the
    /// next epoch. On error the state is left untouched.
    pub fn update_phase(&mut self, delta: &CrlFile) -> Result<DistributionPayload, ManagerError> {
        self.update_phase_with(delta, None)
    }

    /// [`Self::update_phase`] with an explicit proof-generation thread count.
    pub fn update_phase_with(
        &mut self,
        delta: &CrlFile,
        threads: Option<usize>,
    ) -> Result<DistributionPayload, ManagerError> {
        check_crl(delta, &self.ca, CrlKind::Delta)?;
        if delta.base_epoch != self.acc.epoch {
            return Err(ManagerError::StaleDelta {
                expected: self.acc.epoch,
                got: delta.base_epoch,
            });
        }
        let new_reps = entry_reps(&delta.entries)?;
        let known: HashSet<&BigUint> = self.accumulated.iter().map(PrimeRep::y).collect();
        if new_reps.iter().any(|r| known.contains(r.y())) {
            return Err(ManagerError::DuplicateRevocation);
        }
        let next_acc = update_acc(&self.acc, &new_reps, &self.params, self.secrets.as_ref())
            .map_err(|e| match e {
                AccumulatorError::DuplicateRep => ManagerError::DuplicateRevocation,
                other => other.into(),
            })?;

        let newly: HashSet<&BigUint> = new_reps.iter().map(PrimeRep::y).collect();
        let dropped: Vec<[u8; 20]> = self
            .device_registry
            .iter()
            .filter(|(_, rep)| newly.contains(rep.y()))
            .map(|(serial, _)| *serial)
            .collect();

        let mut next = self.clone();
        next.accumulated.extend(new_reps);
        next.acc = next_acc;
        for serial in dropped {
            next.device_registry.remove(&serial);
            next.audit_log.push(AuditEntry {
                epoch: next.acc.epoch,
                serial,
            });
        }
        next.epoch_log.push((next.acc.epoch, delta.digest()));
        let payload = next.issue_payload(threads)?;
        next.debug_check();
        *self = next;
        Ok(payload)
    }

    /// Proofs for every registered device against the current accumulator,
    /// in registry order.
    pub fn issue_payload(&self, threads: Option<usize>) -> Result<DistributionPayload, ManagerError> {
        let devices: Vec<PrimeRep> = self.device_registry.values().cloned().collect();
        let proofs = compute_non_revoked_proofs(
            &devices,
            &self.accumulated,
            &self.params,
            self.secrets.as_ref(),
            &self.r_k,
            self.acc.epoch,
            &self.signer,
            threads,
        )?
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        Ok(DistributionPayload::new(&self.params, &self.acc, proofs, &self.signer)
            .map_err(AccumulatorError::from)?)
    }

    /// Single-device proof, for unicast delivery.
    pub fn prove(&self, serial: &[u8; 20]) -> Option<Result<NonRevokedProof, ManagerError>> {
        let rep = self.device_registry.get(serial)?;
        let proof = compute_non_revoked_proofs(
            std::slice::from_ref(rep),
            &self.accumulated,
            &self.params,
            self.secrets.as_ref(),
            &self.r_k,
            self.acc.epoch,
            &self.signer,
            Some(1),
        )
        .and_then(|mut v| v.pop().expect("one item"));
        Some(proof.map_err(Into::into))
    }

    /// Discards `p`, `q` and `φ(N)`; later operations run trapdoorless.
    pub fn delete_trapdoor(&mut self) {
        self.secrets = None;
    }

    /// Recovery after suspected compromise: fresh modulus and `r_k` over the
    /// same revoked set and registry, issued at the next epoch.
    pub fn rebuild(
        &self,
        bit_len_k: u32,
        mode: SetupMode,
        seed: Option<[u8; 32]>,
    ) -> Result<(ManagerState, DistributionPayload), ManagerError> {
        let (params, secrets) = setup(bit_len_k, mode, seed)?;
        let r_k = secrets.r_k.clone();
        let mut acc = compute_acc(&self.accumulated, &params, Some(&secrets), &r_k)?;
        acc.epoch = self.acc.epoch + 1;
        let mut next = ManagerState {
            params,
            secrets: Some(secrets),
            r_k,
            acc,
            ..self.clone()
        };
        let digest = self.epoch_log.last().map(|(_, d)| *d).unwrap_or([0; 32]);
        next.epoch_log.push((next.acc.epoch, digest));
        let payload = next.issue_payload(None)?;
        next.debug_check();
        Ok((next, payload))
    }

    /// Checks the state invariants: the accumulator matches the revoked set
    /// and no registered device is revoked.
    pub fn check_invariants(&self) -> bool {
        let revoked: HashSet<&BigUint> = self.accumulated.iter().map(PrimeRep::y).collect();
        if revoked.len() != self.accumulated.len()
            || self.device_registry.values().any(|r| revoked.contains(r.y()))
        {
            return false;
        }
        match compute_acc(&self.accumulated, &self.params, self.secrets.as_ref(), &self.r_k) {
            Ok(fresh) => fresh.a == self.acc.a,
            Err(_) => false,
        }
    }

    fn debug_check(&self) {
        // Trapdoorless recomputation costs one full exponentiation per
        // revoked entry, so large sets are only checked with the trapdoor.
        if cfg!(debug_assertions) && (self.secrets.is_some() || self.accumulated.len() <= 256) {
            assert!(self.check_invariants(), "manager state invariant violated");
        }
    }

    // ---- persistence ----------------------------------------------------

    pub fn persist(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(STATE_MAGIC);
        buf.push(FORMAT_VERSION);
        buf.extend_from_slice(&self.params.bit_len_k.to_be_bytes());
        put_var(&mut buf, &self.params.modulus_n);
        put_var(&mut buf, &self.params.base_g);
        match &self.secrets {
            Some(s) => {
                buf.push(FLAG_SECRETS);
                put_var(&mut buf, &s.p);
                put_var(&mut buf, &s.q);
                put_var(&mut buf, &s.totient);
            }
            None => buf.push(0),
        }
        put_var(&mut buf, &self.r_k);
        buf.extend_from_slice(self.signer.as_bytes());
        buf.extend_from_slice(self.ca.as_bytes());
        put_var(&mut buf, &self.acc.a);
        buf.extend_from_slice(&self.acc.epoch.to_be_bytes());

        buf.extend_from_slice(&(self.accumulated.len() as u32).to_be_bytes());
        for rep in &self.accumulated {
            put_rep(&mut buf, rep);
        }
        buf.extend_from_slice(&(self.device_registry.len() as u32).to_be_bytes());
        for (serial, rep) in &self.device_registry {
            buf.extend_from_slice(serial);
            put_rep(&mut buf, rep);
        }
        buf.extend_from_slice(&(self.epoch_log.len() as u32).to_be_bytes());
        for (epoch, digest) in &self.epoch_log {
            buf.extend_from_slice(&epoch.to_be_bytes());
            buf.extend_from_slice(digest);
        }
        buf.extend_from_slice(&(self.audit_log.len() as u32).to_be_bytes());
        for entry in &self.audit_log {
            buf.extend_from_slice(&entry.epoch.to_be_bytes());
            buf.extend_from_slice(&entry.serial);
        }
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        buf
    }

    /// Restores a state written by [`Self::persist`]. Any damage, including
    /// truncation, is reported as [`ManagerError::CorruptState`].
    pub fn restore(bytes: &[u8]) -> Result<Self, ManagerError> {
        if bytes.len() < DIGEST_LEN {
            return Err(ManagerError::CorruptState);
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(ManagerError::CorruptState);
        }
        parse_state(body).ok_or(ManagerError::CorruptState)
    }
}

fn put_rep(buf: &mut Vec<u8>, rep: &PrimeRep) {
    put_var(buf, rep.y());
    match rep.source() {
        Some(src) => {
            buf.push(1);
            buf.extend_from_slice(&src.serial);
            buf.extend_from_slice(&src.issuer_key_hash);
            put_var(buf, &src.nonce_d);
        }
        None => buf.push(0),
    }
}

fn read_rep(r: &mut Reader<'_>) -> Option<PrimeRep> {
    let y = r.var_uint().ok()?;
    let source = match r.u8().ok()? {
        0 => None,
        1 => Some(RepSource {
            serial: r.array().ok()?,
            issuer_key_hash: r.array().ok()?,
            nonce_d: r.var_uint().ok()?,
        }),
        _ => return None,
    };
    Some(PrimeRep::from_trusted(y, source))
}

fn read_count(r: &mut Reader<'_>, min_item: usize) -> Option<usize> {
    let n = r.u32().ok()? as usize;
    (r.remaining() >= n.saturating_mul(min_item)).then_some(n)
}

fn parse_state(body: &[u8]) -> Option<ManagerState> {
    let mut r = Reader::new(body);
    if r.take(4).ok()? != STATE_MAGIC || r.u8().ok()? != FORMAT_VERSION {
        return None;
    }
    let bit_len_k = r.u32().ok()?;
    let params = AccumulatorParams {
        modulus_n: r.var_uint().ok()?,
        base_g: r.var_uint().ok()?,
        bit_len_k,
    };
    let trapdoor = match r.u8().ok()? {
        FLAG_SECRETS => Some((r.var_uint().ok()?, r.var_uint().ok()?, r.var_uint().ok()?)),
        0 => None,
        _ => return None,
    };
    let r_k = r.var_uint().ok()?;
    let secrets = trapdoor.map(|(p, q, totient)| ManagerSecrets {
        p,
        q,
        totient,
        r_k: r_k.clone(),
    });
    let signer = SigningKey::from_bytes(&r.array().ok()?);
    let ca = VerifyingKey::from_bytes(&r.array().ok()?).ok()?;
    let acc = AccumulatorValue {
        a: r.var_uint().ok()?,
        epoch: r.u64().ok()?,
    };

    let n = read_count(&mut r, 5)?;
    let accumulated = (0..n).map(|_| read_rep(&mut r)).collect::<Option<Vec<_>>>()?;
    let n = read_count(&mut r, 25)?;
    let mut device_registry = BTreeMap::new();
    for _ in 0..n {
        let serial: [u8; 20] = r.array().ok()?;
        device_registry.insert(serial, read_rep(&mut r)?);
    }
    let n = read_count(&mut r, 40)?;
    let epoch_log = (0..n)
        .map(|_| Some((r.u64().ok()?, r.array().ok()?)))
        .collect::<Option<Vec<_>>>()?;
    let n = read_count(&mut r, 28)?;
    let audit_log = (0..n)
        .map(|_| {
            Some(AuditEntry {
                epoch: r.u64().ok()?,
                serial: r.array().ok()?,
            })
        })
        .collect::<Option<Vec<_>>>()?;
    if r.remaining() != 0 {
        return None;
    }
    Some(ManagerState {
        params,
        secrets,
        r_k,
        signer,
        ca,
        accumulated,
        acc,
        device_registry,
        epoch_log,
        audit_log,
    })
}

/// Checks the payload invariants: one epoch throughout and every proof
/// passing the revocation check.
pub fn payload_is_consistent(payload: &DistributionPayload) -> bool {
    payload
        .proofs
        .iter()
        .all(|p| p.epoch == payload.acc.epoch && revocation_check(p, &payload.acc, &payload.params))
}
