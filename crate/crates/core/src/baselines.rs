//! The two comparison methods, a locally stored CRL and a Bloom filter over
//! revoked identities, plus per-method storage accounting.

use std::fmt::Write as _;
use std::io::Cursor;

use crate::accumulator::NonRevokedProof;
use crate::crl::{self, identity, CrlError, CrlFile, RevokedEntry, IDENTITY_LEN};

/// Hash count used by the default Bloom sizing.
pub const DEFAULT_BLOOM_HASHES: u32 = 3;
/// Smallest bit array a filter is built with.
pub const MIN_BLOOM_BITS: u64 = 64;

// ---- local CRL -------------------------------------------------------------

/// Sorted `(issuer_key_hash, serial)` index of a full CRL plus applied deltas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalCrlStore {
    index: Vec<([u8; 32], [u8; 20])>,
}

impl LocalCrlStore {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a RevokedEntry>) -> Self {
        let mut index: Vec<_> = entries
            .into_iter()
            .map(|e| (e.issuer_key_hash, e.serial))
            .collect();
        index.sort_unstable();
        index.dedup();
        Self { index }
    }

    pub fn from_crl(full: &CrlFile) -> Self {
        Self::from_entries(&full.entries)
    }

    /// Merges a delta into the index.
    pub fn apply_delta(&mut self, delta: &CrlFile) -> Result<(), CrlError> {
        for e in &delta.entries {
            let key = (e.issuer_key_hash, e.serial);
            match self.index.binary_search(&key) {
                Ok(_) => return Err(CrlError::DuplicateEntry),
                Err(pos) => self.index.insert(pos, key),
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// Binary search of the local index.
pub fn crl_lookup(store: &LocalCrlStore, serial: &[u8; 20], issuer_key_hash: &[u8; 32]) -> bool {
    store.index.binary_search(&(*issuer_key_hash, *serial)).is_ok()
}

// ---- Bloom filter ----------------------------------------------------------

/// Bit-array size and hash count for a Bloom filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BloomSizing {
    pub m_bits: u64,
    pub k_hashes: u32,
}

impl BloomSizing {
    /// Smallest `m` reaching `fpr` with a fixed `k_hashes`:
    /// `m = -k·n / ln(1 - fpr^(1/k))`.
    pub fn with_hashes(n: usize, fpr: f64, k_hashes: u32) -> Self {
        assert!(fpr > 0.0 && fpr < 1.0 && k_hashes >= 1);
        let k = f64::from(k_hashes);
        let m = -k * n as f64 / (1.0 - fpr.powf(1.0 / k)).ln();
        Self {
            m_bits: (m.ceil() as u64).max(MIN_BLOOM_BITS),
            k_hashes,
        }
    }

    /// Default sizing, three hash functions.
    pub fn for_target(n: usize, fpr: f64) -> Self {
        Self::with_hashes(n, fpr, DEFAULT_BLOOM_HASHES)
    }

    /// Textbook optimum `m = -n·ln p / (ln 2)²`, `k = round(m/n · ln 2)`.
    pub fn optimal(n: usize, fpr: f64) -> Self {
        assert!(fpr > 0.0 && fpr < 1.0);
        let ln2 = std::f64::consts::LN_2;
        let m = (-(n as f64) * fpr.ln() / (ln2 * ln2)).ceil() as u64;
        let m_bits = m.max(MIN_BLOOM_BITS);
        let k = if n == 0 {
            1
        } else {
            ((m_bits as f64 / n as f64) * ln2).round().max(1.0) as u32
        };
        Self { m_bits, k_hashes: k }
    }

    pub fn bytes(&self) -> usize {
        self.m_bits.div_ceil(8) as usize
    }

    /// Analytic false-positive rate `(1 - e^(-k·n/m))^k`.
    pub fn expected_fpr(&self, n: usize) -> f64 {
        let k = f64::from(self.k_hashes);
        (1.0 - (-k * n as f64 / self.m_bits as f64).exp()).powf(k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilterStore {
    bits: Vec<u64>,
    m_bits: u64,
    k_hashes: u32,
    inserted: usize,
}

fn bit_index(id: &[u8], seed: u32, m_bits: u64) -> u64 {
    let h = murmur3::murmur3_x64_128(&mut Cursor::new(id), seed).expect("in-memory read");
    (h % u128::from(m_bits)) as u64
}

impl BloomFilterStore {
    pub fn new(sizing: BloomSizing) -> Self {
        assert!(sizing.m_bits > 0 && sizing.k_hashes >= 1);
        Self {
            bits: vec![0; sizing.m_bits.div_ceil(64) as usize],
            m_bits: sizing.m_bits,
            k_hashes: sizing.k_hashes,
            inserted: 0,
        }
    }

    pub fn insert(&mut self, id: &[u8]) {
        for i in 0..self.k_hashes {
            let b = bit_index(id, i, self.m_bits);
            self.bits[(b / 64) as usize] |= 1 << (b % 64);
        }
        self.inserted += 1;
    }

    pub fn m_bits(&self) -> u64 {
        self.m_bits
    }

    pub fn k_hashes(&self) -> u32 {
        self.k_hashes
    }

    pub fn inserted(&self) -> usize {
        self.inserted
    }

    /// Serialized size, `ceil(m / 8)`.
    pub fn bytes(&self) -> usize {
        self.m_bits.div_ceil(8) as usize
    }
}

/// Builds a filter holding every id.
pub fn bloom_build<I, T>(entries: I, m_bits: u64, k_hashes: u32) -> BloomFilterStore
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    let mut store = BloomFilterStore::new(BloomSizing { m_bits, k_hashes });
    for id in entries {
        store.insert(id.as_ref());
    }
    store
}

/// Filter over the identities of CRL entries, sized for `fpr`.
pub fn bloom_from_entries(entries: &[RevokedEntry], fpr: f64) -> BloomFilterStore {
    let s = BloomSizing::for_target(entries.len(), fpr);
    bloom_build(entries.iter().map(crl::concat_identity), s.m_bits, s.k_hashes)
}

pub fn bloom_query(store: &BloomFilterStore, id: &[u8]) -> bool {
    (0..store.k_hashes).all(|i| {
        let b = bit_index(id, i, store.m_bits);
        store.bits[(b / 64) as usize] & (1 << (b % 64)) != 0
    })
}

/// [`bloom_query`] on a certificate identity.
pub fn bloom_query_identity(store: &BloomFilterStore, serial: &[u8; 20], issuer_key_hash: &[u8; 32]) -> bool {
    let id: [u8; IDENTITY_LEN] = identity(serial, issuer_key_hash);
    bloom_query(store, &id)
}

// ---- storage accounting ----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Accumulator,
    Bloom,
    FullCrl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Accumulator, Method::Bloom, Method::FullCrl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Accumulator => "accumulator",
            Method::Bloom => "bloom",
            Method::FullCrl => "crl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "acc" | "accumulator" => Some(Method::Accumulator),
            "bloom" => Some(Method::Bloom),
            "crl" | "full_crl" => Some(Method::FullCrl),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Bytes one device stores under the accumulator method: `a` plus its proof.
pub fn accumulator_device_bytes(k_bits: u32) -> usize {
    let fb = (k_bits as usize).div_ceil(8);
    fb + NonRevokedProof::wire_len(fb)
}

/// Bytes a device stores for `method` with `entries` revoked certificates.
pub fn method_bytes(method: Method, entries: usize, k_bits: u32, bloom_fpr: f64) -> usize {
    match method {
        Method::Accumulator => accumulator_device_bytes(k_bits),
        Method::Bloom => BloomSizing::for_target(entries, bloom_fpr).bytes(),
        Method::FullCrl => crl::encoded_len(entries),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageRow {
    pub method: Method,
    pub entries: usize,
    pub bytes: usize,
}

pub fn storage_report(crl_size_entries: usize, k_bits: u32, bloom_target_fpr: f64) -> Vec<StorageRow> {
    Method::ALL
        .iter()
        .map(|&method| StorageRow {
            method,
            entries: crl_size_entries,
            bytes: method_bytes(method, crl_size_entries, k_bits, bloom_target_fpr),
        })
        .collect()
}

pub const STORAGE_CSV_HEADER: &str = "method,entries,bytes";

pub fn storage_csv(rows: &[StorageRow]) -> String {
    let mut out = format!("{STORAGE_CSV_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.method, r.entries, r.bytes).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_hash_sizing_at_thirty_thousand() {
        let s = BloomSizing::for_target(30_000, 0.01);
        assert_eq!(s.k_hashes, 3);
        assert_eq!(s.bytes(), 46_366);
        assert!((s.expected_fpr(30_000) - 0.01).abs() < 1e-4);
        let opt = BloomSizing::optimal(30_000, 0.01);
        assert_eq!(opt.k_hashes, 7);
        assert_eq!(opt.m_bits, 287_552);
    }

    #[test]
    fn murmur_matches_reference_vectors() {
        // Reference values from an independent MurmurHash3 x64_128.
        let h = |data: &[u8], seed| murmur3::murmur3_x64_128(&mut Cursor::new(data), seed).unwrap();
        assert_eq!(h(b"hello", 0), 0x5b1e906a48ae1d19cbd8a7b341bd9b02);
        assert_eq!(h(&[0; 52], 0), 0x7b8546807814c92ee20e68b7b5c3217e);
        assert_eq!(h(&[0; 52], 1), 0x4e1732e7a3da7704aadb99606528cc1d);
        assert_eq!(h(&[0; 52], 2), 0xefe74d51ac0d4a87ead0befb14568789);
    }

    #[test]
    fn tiny_filters_are_clamped() {
        assert_eq!(BloomSizing::for_target(0, 0.01).m_bits, MIN_BLOOM_BITS);
        assert_eq!(BloomSizing::optimal(0, 0.01).m_bits, MIN_BLOOM_BITS);
    }

    #[test]
    fn storage_rows() {
        let rows = storage_report(30_000, 2048, 0.01);
        let bytes: Vec<usize> = rows.iter().map(|r| r.bytes).collect();
        assert_eq!(bytes, vec![924, 46_366, 1_800_098]);
        let csv = storage_csv(&rows);
        assert!(csv.starts_with("method,entries,bytes\naccumulator,30000,924\n"));
    }

    #[test]
    fn local_store_lookup() {
        let e = RevokedEntry {
            serial: [1; 20],
            revoked_at: 5,
            issuer_key_hash: [2; 32],
        };
        let store = LocalCrlStore::from_entries([&e]);
        assert!(crl_lookup(&store, &[1; 20], &[2; 32]));
        assert!(!crl_lookup(&store, &[1; 20], &[3; 32]));
        assert_eq!(store.len(), 1);
    }
}
