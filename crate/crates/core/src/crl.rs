//! Signed full and delta CRLs in a fixed-width binary layout (`.acrl`).
//!
//! ```text
//! "ACRL" | version u8 = 1 | kind u8 | base_epoch u64 | this_update u64
//!        | next_update u64 | count u32 | count × entry | signature[64]
//! entry = serial[20] | revoked_at u64 | issuer_key_hash[32]
//! ```
//!
//! Integers are big-endian. The Ed25519 signature covers every preceding
//! byte. Entries are strictly ascending by `(issuer_key_hash, serial)`.

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::encoding::{CodecError, Reader};

pub const MAGIC: &[u8; 4] = b"ACRL";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 1 + 8 + 8 + 8 + 4;
pub const ENTRY_LEN: usize = 60;
pub const SIGNATURE_LEN: usize = 64;

/// Identity bytes fed to the prime-representative oracle.
pub const IDENTITY_LEN: usize = 52;

/// First `this_update` stamped by the synthetic generator.
pub const SYNTHETIC_THIS_UPDATE: u64 = 1_700_000_000;
const WEEK: u64 = 7 * 24 * 3600;
const YEAR: u64 = 365 * 24 * 3600;
const SYNTHETIC_ISSUERS: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CrlError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown CRL kind {0}")]
    BadKind(u8),
    #[error("file truncated")]
    TruncatedFile,
    #[error("{0} trailing bytes after signature")]
    TrailingBytes(usize),
    #[error("entries not strictly ascending by (issuer, serial)")]
    UnsortedEntries,
    #[error("entry has a zero serial or zero revocation time")]
    InvalidEntry,
    #[error("this_update must precede next_update")]
    InvalidValidity,
    #[error("signature does not verify under the CA key")]
    BadSignature,
    #[error("delta repeats an entry of its base CRL")]
    DuplicateEntry,
    #[error("expected a {expected:?} CRL")]
    WrongKind { expected: CrlKind },
}

impl From<CodecError> for CrlError {
    fn from(_: CodecError) -> Self {
        CrlError::TruncatedFile
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrlKind {
    Full,
    Delta,
}

impl CrlKind {
    fn code(self) -> u8 {
        match self {
            CrlKind::Full => 0,
            CrlKind::Delta => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RevokedEntry {
    pub serial: [u8; 20],
    pub revoked_at: u64,
    pub issuer_key_hash: [u8; 32],
}

impl RevokedEntry {
    fn sort_key(&self) -> ([u8; 32], [u8; 20]) {
        (self.issuer_key_hash, self.serial)
    }

    fn is_valid(&self) -> bool {
        self.serial != [0; 20] && self.revoked_at > 0
    }
}

/// `serial ‖ issuer_key_hash`, the preimage of the entry's prime
/// representative. Including the issuer keeps equal serials from different
/// CAs apart.
pub fn concat_identity(entry: &RevokedEntry) -> [u8; IDENTITY_LEN] {
    identity(&entry.serial, &entry.issuer_key_hash)
}

pub fn identity(serial: &[u8; 20], issuer_key_hash: &[u8; 32]) -> [u8; IDENTITY_LEN] {
    let mut out = [0u8; IDENTITY_LEN];
    out[..20].copy_from_slice(serial);
    out[20..].copy_from_slice(issuer_key_hash);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrlFile {
    pub kind: CrlKind,
    /// Epoch a delta extends; 0 for full CRLs.
    pub base_epoch: u64,
    pub this_update: u64,
    pub next_update: u64,
    pub entries: Vec<RevokedEntry>,
    pub signature: [u8; SIGNATURE_LEN],
}

/// Size in bytes of an encoded CRL with `count` entries.
pub fn encoded_len(count: usize) -> usize {
    HEADER_LEN + count * ENTRY_LEN + SIGNATURE_LEN
}

impl CrlFile {
    /// Sorts `entries`, checks the invariants and signs.
    pub fn new_signed(
        kind: CrlKind,
        base_epoch: u64,
        this_update: u64,
        next_update: u64,
        mut entries: Vec<RevokedEntry>,
        signer: &SigningKey,
    ) -> Result<Self, CrlError> {
        entries.sort_by_key(RevokedEntry::sort_key);
        let mut crl = Self {
            kind,
            base_epoch: if kind == CrlKind::Full { 0 } else { base_epoch },
            this_update,
            next_update,
            entries,
            signature: [0; SIGNATURE_LEN],
        };
        crl.validate()?;
        crl.signature = signer.sign(&crl.signed_bytes()).to_bytes();
        Ok(crl)
    }

    pub fn validate(&self) -> Result<(), CrlError> {
        if self.this_update >= self.next_update {
            return Err(CrlError::InvalidValidity);
        }
        if self.entries.iter().any(|e| !e.is_valid()) {
            return Err(CrlError::InvalidEntry);
        }
        if self
            .entries
            .windows(2)
            .any(|w| w[0].sort_key() >= w[1].sort_key())
        {
            return Err(CrlError::UnsortedEntries);
        }
        Ok(())
    }

    fn signed_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(encoded_len(self.entries.len()));
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.push(self.kind.code());
        buf.extend_from_slice(&self.base_epoch.to_be_bytes());
        buf.extend_from_slice(&self.this_update.to_be_bytes());
        buf.extend_from_slice(&self.next_update.to_be_bytes());
        buf.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for e in &self.entries {
            buf.extend_from_slice(&e.serial);
            buf.extend_from_slice(&e.revoked_at.to_be_bytes());
            buf.extend_from_slice(&e.issuer_key_hash);
        }
        buf
    }

    pub fn verify(&self, ca: &VerifyingKey) -> Result<(), CrlError> {
        ca.verify_strict(&self.signed_bytes(), &Signature::from_bytes(&self.signature))
            .map_err(|_| CrlError::BadSignature)
    }

    /// SHA-256 of the encoded file.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.signed_bytes());
        h.update(self.signature);
        h.finalize().into()
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.entries.len())
    }
}

pub fn encode_crl(crl: &CrlFile) -> Result<Vec<u8>, CrlError> {
    crl.validate()?;
    let mut buf = crl.signed_bytes();
    buf.extend_from_slice(&crl.signature);
    Ok(buf)
}

/// Decodes and validates a CRL. The signature is checked when `ca` is given.
pub fn decode_crl(bytes: &[u8], ca: Option<&VerifyingKey>) -> Result<CrlFile, CrlError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(CrlError::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(CrlError::BadVersion(version));
    }
    let kind = match r.u8()? {
        0 => CrlKind::Full,
        1 => CrlKind::Delta,
        other => return Err(CrlError::BadKind(other)),
    };
    let base_epoch = r.u64()?;
    let this_update = r.u64()?;
    let next_update = r.u64()?;
    let count = r.u32()? as usize;
    if r.remaining() < count.saturating_mul(ENTRY_LEN).saturating_add(SIGNATURE_LEN) {
        return Err(CrlError::TruncatedFile);
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        entries.push(RevokedEntry {
            serial: r.array()?,
            revoked_at: r.u64()?,
            issuer_key_hash: r.array()?,
        });
    }
    let signature = r.array()?;
    if r.remaining() != 0 {
        return Err(CrlError::TrailingBytes(r.remaining()));
    }
    let crl = CrlFile {
        kind,
        base_epoch,
        this_update,
        next_update,
        entries,
        signature,
    };
    crl.validate()?;
    if let Some(ca) = ca {
        crl.verify(ca)?;
    }
    Ok(crl)
}

/// Union of a full CRL and a delta, sorted. Fails if the delta repeats a base
/// entry, so the result always has `|full| + |delta|` entries.
pub fn merge(full: &CrlFile, delta: &CrlFile) -> Result<Vec<RevokedEntry>, CrlError> {
    if full.kind != CrlKind::Full {
        return Err(CrlError::WrongKind { expected: CrlKind::Full });
    }
    if delta.kind != CrlKind::Delta {
        return Err(CrlError::WrongKind { expected: CrlKind::Delta });
    }
    let mut out = Vec::with_capacity(full.entries.len() + delta.entries.len());
    let (mut i, mut j) = (0, 0);
    let (a, b) = (&full.entries, &delta.entries);
    while i < a.len() && j < b.len() {
        match a[i].sort_key().cmp(&b[j].sort_key()) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => return Err(CrlError::DuplicateEntry),
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Ok(out)
}

/// Issuer key hashes used by the synthetic generator.
pub fn synthetic_issuers() -> Vec<[u8; 32]> {
    (0..SYNTHETIC_ISSUERS)
        .map(|i| Sha256::digest([b"accrl synthetic issuer ".as_slice(), &[i]].concat()).into())
        .collect()
}

/// Deterministic pseudo-random CRL of `count` entries spread over the
/// synthetic issuers. Serials are uniform 160-bit values, so independently
/// seeded files are disjoint with overwhelming probability.
pub fn generate_synthetic_crl(
    count: usize,
    kind: CrlKind,
    base_epoch: u64,
    seed: [u8; 32],
    signer: &SigningKey,
) -> CrlFile {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let issuers = synthetic_issuers();
    let this_update = SYNTHETIC_THIS_UPDATE + base_epoch * WEEK;
    let mut seen = std::collections::HashSet::with_capacity(count);
    let mut entries = Vec::with_capacity(count);
    while entries.len() < count {
        let mut serial = [0u8; 20];
        rng.fill_bytes(&mut serial);
        let entry = RevokedEntry {
            serial,
            revoked_at: this_update - rng.gen_range(1..=YEAR),
            issuer_key_hash: issuers[rng.gen_range(0..issuers.len())],
        };
        if entry.is_valid() && seen.insert(entry.sort_key()) {
            entries.push(entry);
        }
    }
    CrlFile::new_signed(kind, base_epoch, this_update, this_update + WEEK, entries, signer)
        .expect("generated entries satisfy the invariants")
}
