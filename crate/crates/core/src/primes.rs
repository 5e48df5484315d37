//! Primality testing and prime generation over `BigUint`.
//!
//! Candidate searches sieve against the odd primes below [`SIEVE_BOUND`]
//! before running any modular exponentiation. Miller–Rabin bases come either
//! from a caller-supplied RNG or from a deterministic per-candidate sequence
//! (SHA-256 of the candidate and the round index), which makes the result of
//! a test a pure function of its input.

use std::sync::OnceLock;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use sha2::{Digest, Sha256};

/// Upper bound (exclusive) of the small-prime table used for sieving.
pub const SIEVE_BOUND: u32 = 1 << 16;

/// Odd primes below [`SIEVE_BOUND`].
pub fn small_primes() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = SIEVE_BOUND as usize;
        let mut composite = vec![false; n];
        let mut out = Vec::new();
        for i in 2..n {
            if composite[i] {
                continue;
            }
            if i > 2 {
                out.push(i as u32);
            }
            let mut j = i * i;
            while j < n {
                composite[j] = true;
                j += i;
            }
        }
        out
    })
}

/// `n mod m` for a word-sized modulus without allocating.
pub fn mod_small(n: &BigUint, m: u32) -> u32 {
    let m = m as u128;
    let mut acc: u128 = 0;
    for limb in n.iter_u64_digits().rev() {
        acc = ((acc << 64) | limb as u128) % m;
    }
    acc as u32
}

/// Outcome of trial division by the small-prime table.
enum Trial {
    Prime,
    Composite,
    Unknown,
}

fn trial_division(n: &BigUint) -> Trial {
    if n < &BigUint::from(2u8) {
        return Trial::Composite;
    }
    if n.is_even() {
        return if n == &BigUint::from(2u8) {
            Trial::Prime
        } else {
            Trial::Composite
        };
    }
    let small = n.bits() <= 32;
    let n32 = if small { n.iter_u32_digits().next().unwrap_or(0) } else { 0 };
    for &p in small_primes() {
        if small && p == n32 {
            return Trial::Prime;
        }
        if mod_small(n, p) == 0 {
            return Trial::Composite;
        }
        if small && (p as u64) * (p as u64) > n32 as u64 {
            return Trial::Prime;
        }
    }
    Trial::Unknown
}

/// One Miller–Rabin round. `n` must be odd and greater than 3.
fn mr_round(n: &BigUint, n_minus_1: &BigUint, d: &BigUint, s: u64, base: &BigUint) -> bool {
    let mut x = base.modpow(d, n);
    if x.is_one() || &x == n_minus_1 {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if &x == n_minus_1 {
            return true;
        }
        if x.is_one() {
            return false;
        }
    }
    false
}

fn decompose(n: &BigUint) -> (BigUint, BigUint, u64) {
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    (n_minus_1, d, s)
}

/// Deterministic base for round `round` of a test on `n`, in `[2, n-2]`.
pub fn deterministic_base(n: &BigUint, round: u32) -> BigUint {
    let mut h = Sha256::new();
    h.update(b"accrl-mr-base");
    h.update(n.to_bytes_be());
    h.update(round.to_be_bytes());
    let span = n - 3u32;
    BigUint::from_bytes_be(&h.finalize()) % span + 2u32
}

/// Miller–Rabin with `rounds` bases from [`deterministic_base`], after trial
/// division. Pure in its inputs.
pub fn is_prime_deterministic(n: &BigUint, rounds: u32) -> bool {
    match trial_division(n) {
        Trial::Prime => return true,
        Trial::Composite => return false,
        Trial::Unknown => {}
    }
    mr_deterministic(n, rounds)
}

/// Deterministic-base Miller–Rabin without trial division, for candidates
/// that already survived a sieve. `n` must be odd and greater than 3.
pub(crate) fn mr_deterministic(n: &BigUint, rounds: u32) -> bool {
    let (n_minus_1, d, s) = decompose(n);
    (0..rounds).all(|i| mr_round(n, &n_minus_1, &d, s, &deterministic_base(n, i)))
}

/// Miller–Rabin with `rounds` uniformly random bases, after trial division.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: u32, rng: &mut R) -> bool {
    match trial_division(n) {
        Trial::Prime => return true,
        Trial::Composite => return false,
        Trial::Unknown => {}
    }
    let (n_minus_1, d, s) = decompose(n);
    let two = BigUint::from(2u8);
    (0..rounds).all(|_| {
        let base = rng.gen_biguint_range(&two, &n_minus_1);
        mr_round(n, &n_minus_1, &d, s, &base)
    })
}

/// Single round with base 2, skipping trial division. Cheap pre-filter for
/// sieved candidates.
fn passes_base2(n: &BigUint) -> bool {
    let (n_minus_1, d, s) = decompose(n);
    mr_round(n, &n_minus_1, &d, s, &BigUint::from(2u8))
}

/// Rounds used when generating RSA and freshness primes.
pub const GENERATION_ROUNDS: u32 = 40;

/// Number of odd offsets examined per sieve window.
const WINDOW: usize = 1 << 14;

/// Random odd integer with exactly `bits` bits and its top two bits set.
fn random_start<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    debug_assert!(bits >= 3);
    let mut n = rng.gen_biguint(bits);
    n.set_bit(bits - 1, true);
    n.set_bit(bits - 2, true);
    n.set_bit(0, true);
    n
}

/// Random prime with exactly `bits` bits (top two bits set), or `None` once
/// `max_windows` sieve windows have been exhausted.
pub fn gen_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R, max_windows: usize) -> Option<BigUint> {
    assert!(bits >= 32, "gen_prime is for cryptographic sizes");
    for _ in 0..max_windows {
        let start = random_start(bits, rng);
        let residues: Vec<u32> = small_primes().iter().map(|&p| mod_small(&start, p)).collect();
        let mut dead = vec![false; WINDOW];
        for (&p, &r) in small_primes().iter().zip(&residues) {
            // start + 2i ≡ 0 (mod p)  <=>  i ≡ -r * 2^{-1} (mod p)
            let inv2 = (p as u64 + 1) / 2;
            let mut i = ((p - r) as u64 % p as u64 * inv2 % p as u64) as usize;
            while i < WINDOW {
                dead[i] = true;
                i += p as usize;
            }
        }
        for (i, _) in dead.iter().enumerate().filter(|(_, d)| !**d) {
            let cand = &start + BigUint::from(2 * i as u64);
            if cand.bits() != bits {
                break;
            }
            if passes_base2(&cand) && is_probable_prime(&cand, GENERATION_ROUNDS, rng) {
                return Some(cand);
            }
        }
    }
    None
}

/// Random safe prime `p = 2p' + 1` with exactly `bits` bits, `p'` odd (so
/// `p ≡ 3 mod 4`), or `None` after `max_windows` windows.
pub fn gen_safe_prime<R: RngCore + ?Sized>(
    bits: u64,
    rng: &mut R,
    max_windows: usize,
) -> Option<BigUint> {
    assert!(bits >= 32, "gen_safe_prime is for cryptographic sizes");
    for _ in 0..max_windows {
        // Search over odd p' with bits-1 bits.
        let start = random_start(bits - 1, rng);
        let mut dead = vec![false; WINDOW];
        for &p in small_primes() {
            let r = mod_small(&start, p) as u64;
            let pm = p as u64;
            let inv2 = (pm + 1) / 2;
            // p' ≡ 0 and p' ≡ (p-1)/2 (mod p) are excluded: the latter makes
            // 2p'+1 divisible by p.
            for target in [0u64, (pm - 1) / 2] {
                let mut i = ((target + pm - r) % pm * inv2 % pm) as usize;
                while i < WINDOW {
                    dead[i] = true;
                    i += p as usize;
                }
            }
        }
        for (i, _) in dead.iter().enumerate().filter(|(_, d)| !**d) {
            let half = &start + BigUint::from(2 * i as u64);
            if half.bits() != bits - 1 {
                break;
            }
            if !passes_base2(&half) {
                continue;
            }
            let full: BigUint = (&half << 1u32) + 1u32;
            if !passes_base2(&full) {
                continue;
            }
            if is_probable_prime(&half, GENERATION_ROUNDS, rng)
                && is_probable_prime(&full, GENERATION_ROUNDS, rng)
            {
                return Some(full);
            }
        }
    }
    None
}

/// Modular inverse via the extended Euclidean algorithm, `None` when
/// `gcd(a, m) != 1`.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    if m.is_zero() {
        return None;
    }
    let e = BigInt::from(a % m).extended_gcd(&BigInt::from(m.clone()));
    if !e.gcd.is_one() {
        return None;
    }
    e.x.mod_floor(&BigInt::from(m.clone())).to_biguint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn naive_is_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn small_range_matches_trial_division() {
        for n in 0u64..5000 {
            let b = BigUint::from(n);
            assert_eq!(is_prime_deterministic(&b, 5), naive_is_prime(n), "n = {n}");
        }
    }

    #[test]
    fn carmichael_and_strong_pseudoprimes_rejected() {
        // 3215031751 is a strong pseudoprime to bases 2, 3, 5 and 7.
        for n in [561u64, 41041, 825265, 3215031751, 3825123056546413051] {
            assert!(!is_prime_deterministic(&BigUint::from(n), 40), "n = {n}");
        }
        // Mersenne prime 2^127 - 1.
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(is_prime_deterministic(&m127, 40));
        assert!(!is_prime_deterministic(&(&m127 + 2u32), 40));
    }

    #[test]
    fn mod_small_matches_bigint_rem() {
        let n = BigUint::parse_bytes(b"123456789012345678901234567890123456789", 10).unwrap();
        for p in [3u32, 65521, 4294967291] {
            assert_eq!(BigUint::from(mod_small(&n, p)), &n % p);
        }
    }

    #[test]
    fn generated_primes_have_requested_shape() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let p = gen_prime(256, &mut rng, 100).unwrap();
        assert_eq!(p.bits(), 256);
        assert!(is_prime_deterministic(&p, 40));

        let q = gen_safe_prime(128, &mut rng, 1000).unwrap();
        assert_eq!(q.bits(), 128);
        assert_eq!(mod_small(&q, 4), 3);
        let half: BigUint = (&q - 1u32) >> 1u32;
        assert!(is_prime_deterministic(&half, 40));
    }

    #[test]
    fn inverse_round_trips() {
        let m = BigUint::from(220u32);
        assert_eq!(mod_inverse(&BigUint::from(3u32), &m), Some(BigUint::from(147u32)));
        assert_eq!(mod_inverse(&BigUint::from(10u32), &m), None);
    }
}
