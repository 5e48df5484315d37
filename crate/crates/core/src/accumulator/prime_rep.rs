use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use sha2::{Digest, Sha256};

use super::AccumulatorError;
use crate::primes::{is_prime_deterministic, mod_small, mr_deterministic, small_primes};

/// Miller–Rabin rounds a prime representative must pass.
pub const PRIME_REP_ROUNDS: u32 = 40;
/// Rounds used when admitting an externally supplied prime.
pub const SPOT_CHECK_ROUNDS: u32 = 5;

const HALF_BITS: u32 = 256;
const WINDOW: usize = 4096;

/// Identity a prime representative was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RepSource {
    pub serial: [u8; 20],
    pub issuer_key_hash: [u8; 32],
    /// Offset `d` with `y = 2^256 · Ω + d`.
    pub nonce_d: BigUint,
}

/// A prime accepted by the accumulator, optionally tagged with the
/// certificate identity it represents.
///
/// Only constructed through [`prime_representative`] or
/// [`PrimeRep::from_prime`], both of which establish primality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrimeRep {
    y: BigUint,
    source: Option<Arc<RepSource>>,
}

impl PrimeRep {
    /// Admits a raw prime after a spot primality check.
    pub fn from_prime(y: BigUint) -> Result<Self, AccumulatorError> {
        if !is_prime_deterministic(&y, SPOT_CHECK_ROUNDS) {
            return Err(AccumulatorError::NonPrimeInput);
        }
        Ok(Self { y, source: None })
    }

    /// Rebuilds a representative from integrity-protected storage.
    pub(crate) fn from_trusted(y: BigUint, source: Option<RepSource>) -> Self {
        Self {
            y,
            source: source.map(Arc::new),
        }
    }

    pub fn y(&self) -> &BigUint {
        &self.y
    }

    pub fn source(&self) -> Option<&RepSource> {
        self.source.as_deref()
    }

    /// Serial of the source identity; all zeros for raw primes.
    pub fn serial(&self) -> [u8; 20] {
        self.source.as_ref().map(|s| s.serial).unwrap_or([0; 20])
    }
}

/// The 256-bit oracle digest Ω of a certificate identity.
pub fn oracle_digest(serial: &[u8; 20], issuer_key_hash: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(serial);
    h.update(issuer_key_hash);
    h.finalize().into()
}

/// Deterministic 512-bit prime representative of `(serial, issuer_key_hash)`.
///
/// `y = 2^256 · Ω + d` for the smallest odd `d` such that `y` passes
/// [`PRIME_REP_ROUNDS`] Miller–Rabin rounds with deterministic bases.
pub fn prime_representative(
    serial: &[u8; 20],
    issuer_key_hash: &[u8; 32],
) -> Result<PrimeRep, AccumulatorError> {
    let omega = BigUint::from_bytes_be(&oracle_digest(serial, issuer_key_hash));
    let high = &omega << HALF_BITS;
    let limit = BigUint::one() << HALF_BITS;

    if omega.is_zero() {
        // Unreachable for SHA-256 in practice; the plain search is correct.
        let mut d = BigUint::one();
        while d < limit {
            if is_prime_deterministic(&d, PRIME_REP_ROUNDS) {
                return Ok(rep(serial, issuer_key_hash, d.clone(), d));
            }
            d += 2u32;
        }
        return Err(AccumulatorError::SearchExhausted);
    }

    let primes = small_primes();
    let high_res: Vec<u32> = primes.iter().map(|&p| mod_small(&high, p)).collect();
    let mut d0 = BigUint::one();
    let mut dead = vec![false; WINDOW];
    while d0 < limit {
        dead.iter_mut().for_each(|x| *x = false);
        for (&p, &hr) in primes.iter().zip(&high_res) {
            let r = (hr as u64 + mod_small(&d0, p) as u64) % p as u64;
            let pm = p as u64;
            let inv2 = (pm + 1) / 2;
            let mut i = ((pm - r) % pm * inv2 % pm) as usize;
            while i < WINDOW {
                dead[i] = true;
                i += p as usize;
            }
        }
        for (i, _) in dead.iter().enumerate().filter(|(_, d)| !**d) {
            let d = &d0 + BigUint::from(2 * i as u64);
            if d >= limit {
                return Err(AccumulatorError::SearchExhausted);
            }
            let y = &high + &d;
            if mr_deterministic(&y, PRIME_REP_ROUNDS) {
                return Ok(rep(serial, issuer_key_hash, y, d));
            }
        }
        d0 += BigUint::from(2 * WINDOW as u64);
    }
    Err(AccumulatorError::SearchExhausted)
}

fn rep(serial: &[u8; 20], issuer_key_hash: &[u8; 32], y: BigUint, nonce_d: BigUint) -> PrimeRep {
    PrimeRep {
        y,
        source: Some(Arc::new(RepSource {
            serial: *serial,
            issuer_key_hash: *issuer_key_hash,
            nonce_d,
        })),
    }
}
