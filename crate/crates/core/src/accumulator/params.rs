use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::One;
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::AccumulatorError;
use crate::primes::{gen_prime, gen_safe_prime};

/// Modulus label used by the fixed hand-checkable test parameters.
pub const TEST_BIT_LEN: u32 = 32;

const SECURE_BIT_LENS: [u32; 4] = [1024, 2048, 3072, 4096];
const MAX_SIEVE_WINDOWS: usize = 20_000;
const FRESHNESS_PRIME_BITS: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetupMode {
    /// Safe primes from the OS RNG (or from the seed when one is supplied).
    Secure,
    /// Deterministic from a mandatory seed. `k = 32` selects the fixed
    /// vector `N = 253, g = 4, r_k = 1`.
    Test,
}

/// Public accumulator parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulatorParams {
    pub modulus_n: BigUint,
    pub base_g: BigUint,
    pub bit_len_k: u32,
}

impl AccumulatorParams {
    /// Wire width in bytes of `a`, `nw1` and `nw2`.
    pub fn field_bytes(&self) -> usize {
        (self.bit_len_k as usize).div_ceil(8)
    }

    pub fn is_test_vector(&self) -> bool {
        self.bit_len_k == TEST_BIT_LEN
    }
}

/// Trapdoor material and the freshness exponent.
#[derive(Clone, PartialEq, Eq)]
pub struct ManagerSecrets {
    pub p: BigUint,
    pub q: BigUint,
    /// `φ(N) = (p-1)(q-1)`.
    pub totient: BigUint,
    pub r_k: BigUint,
}

impl std::fmt::Debug for ManagerSecrets {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManagerSecrets").finish_non_exhaustive()
    }
}

impl ManagerSecrets {
    pub fn from_primes(p: BigUint, q: BigUint, r_k: BigUint) -> Self {
        let totient = (&p - 1u32) * (&q - 1u32);
        Self { p, q, totient, r_k }
    }
}

/// Generates parameters and secrets.
///
/// `k = 32` is only valid in [`SetupMode::Test`] and always yields the fixed
/// vector (`p = 11`, `q = 23`, `g = 4`, `r_k = 1`). Other sizes draw two
/// distinct safe primes whose product has exactly `k` bits, `g = s² mod N` for
/// random `s`, and a 256-bit freshness prime `r_k` coprime to `φ(N)`.
pub fn setup(
    bit_len_k: u32,
    mode: SetupMode,
    seed: Option<[u8; 32]>,
) -> Result<(AccumulatorParams, ManagerSecrets), AccumulatorError> {
    if bit_len_k == TEST_BIT_LEN {
        if mode != SetupMode::Test {
            return Err(AccumulatorError::UnsupportedBitLength(bit_len_k));
        }
        if seed.is_none() {
            return Err(AccumulatorError::MissingSeed);
        }
        let params = AccumulatorParams {
            modulus_n: BigUint::from(253u32),
            base_g: BigUint::from(4u32),
            bit_len_k,
        };
        let secrets = ManagerSecrets::from_primes(11u32.into(), 23u32.into(), BigUint::one());
        return Ok((params, secrets));
    }
    if !SECURE_BIT_LENS.contains(&bit_len_k) {
        return Err(AccumulatorError::UnsupportedBitLength(bit_len_k));
    }
    match (mode, seed) {
        (SetupMode::Test, None) => Err(AccumulatorError::MissingSeed),
        (_, Some(seed)) => generate(bit_len_k, &mut ChaCha20Rng::from_seed(seed)),
        (SetupMode::Secure, None) => generate(bit_len_k, &mut OsRng),
    }
}

fn generate<R: RngCore>(
    bit_len_k: u32,
    rng: &mut R,
) -> Result<(AccumulatorParams, ManagerSecrets), AccumulatorError> {
    let half = u64::from(bit_len_k / 2);
    let p = gen_safe_prime(half, rng, MAX_SIEVE_WINDOWS).ok_or(AccumulatorError::PrimeGenerationTimeout)?;
    let q = loop {
        let q = gen_safe_prime(half, rng, MAX_SIEVE_WINDOWS)
            .ok_or(AccumulatorError::PrimeGenerationTimeout)?;
        if q != p {
            break q;
        }
    };
    let modulus_n = &p * &q;
    debug_assert_eq!(modulus_n.bits(), u64::from(bit_len_k));

    let two = BigUint::from(2u8);
    let base_g = loop {
        let s = rng.gen_biguint_range(&two, &modulus_n);
        if !s.gcd(&modulus_n).is_one() {
            continue;
        }
        let g = (&s * &s) % &modulus_n;
        if g > BigUint::one() {
            break g;
        }
    };

    let totient = (&p - 1u32) * (&q - 1u32);
    let r_k = loop {
        let r = gen_prime(FRESHNESS_PRIME_BITS, rng, MAX_SIEVE_WINDOWS)
            .ok_or(AccumulatorError::PrimeGenerationTimeout)?;
        if r.gcd(&totient).is_one() {
            break r;
        }
    };

    Ok((
        AccumulatorParams {
            modulus_n,
            base_g,
            bit_len_k,
        },
        ManagerSecrets { p, q, totient, r_k },
    ))
}
