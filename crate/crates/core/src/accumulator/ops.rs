use std::collections::HashSet;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{AccumulatorError, AccumulatorParams, ManagerSecrets, PrimeRep};

/// The accumulator value `a` and the number of updates applied to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulatorValue {
    pub a: BigUint,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipWitness {
    pub w: BigUint,
    pub y: BigUint,
}

/// Signed solution of `nw1_raw · u + b · x = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BezoutPair {
    pub nw1_raw: BigInt,
    pub b: BigInt,
}

impl BezoutPair {
    /// Extended Euclid on `(u, x)`; `None` unless `gcd(u, x) = 1`.
    pub fn solve(u: &BigUint, x: &BigUint) -> Option<Self> {
        let e = BigInt::from(u.clone()).extended_gcd(&BigInt::from(x.clone()));
        if !e.gcd.is_one() {
            return None;
        }
        Some(Self { nw1_raw: e.x, b: e.y })
    }

    /// Shifts the pair so that `0 <= nw1 < x`, returning `nw1` and the
    /// recomputed exact coefficient `b' = (1 - nw1·u) / x`.
    pub fn normalize(&self, u: &BigUint, x: &BigUint) -> (BigUint, BigInt) {
        let xi = BigInt::from(x.clone());
        let nw1 = self.nw1_raw.mod_floor(&xi);
        let num = BigInt::one() - &nw1 * BigInt::from(u.clone());
        let (b, rem) = num.div_rem(&xi);
        debug_assert!(rem.is_zero());
        (nw1.to_biguint().expect("mod_floor is non-negative"), b)
    }
}

/// `base^exp mod n` for a signed exponent; negative exponents go through the
/// inverse of `base`.
pub(crate) fn pow_signed(base: &BigUint, exp: &BigInt, n: &BigUint) -> BigUint {
    match exp.sign() {
        Sign::Minus => {
            let inv = crate::primes::mod_inverse(base, n).expect("base is a unit mod N");
            inv.modpow(exp.abs().magnitude(), n)
        }
        _ => base.modpow(exp.magnitude(), n),
    }
}

pub(crate) fn check_distinct<'a>(
    reps: impl IntoIterator<Item = &'a PrimeRep>,
) -> Result<HashSet<&'a BigUint>, AccumulatorError> {
    let mut seen = HashSet::new();
    for rep in reps {
        if !seen.insert(rep.y()) {
            return Err(AccumulatorError::DuplicateRep);
        }
    }
    Ok(seen)
}

/// Exact product via a balanced tree, keeping operand sizes even.
pub(crate) fn product_tree<'a>(values: impl IntoIterator<Item = &'a BigUint>) -> BigUint {
    let mut layer: Vec<BigUint> = values.into_iter().cloned().collect();
    if layer.is_empty() {
        return BigUint::one();
    }
    while layer.len() > 1 {
        layer = layer
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a * b,
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    layer.pop().unwrap()
}

pub(crate) fn product_mod<'a>(values: impl IntoIterator<Item = &'a BigUint>, m: &BigUint) -> BigUint {
    values.into_iter().fold(BigUint::one() % m, |acc, v| (acc * v) % m)
}

/// `start^(∏ ys) mod N`, reducing the exponent by `φ(N)` when available and
/// exponentiating one prime at a time otherwise.
fn raise<'a>(
    start: &BigUint,
    ys: impl IntoIterator<Item = &'a BigUint>,
    params: &AccumulatorParams,
    secrets: Option<&ManagerSecrets>,
) -> BigUint {
    let n = &params.modulus_n;
    match secrets {
        Some(s) => start.modpow(&product_mod(ys, &s.totient), n),
        None => ys.into_iter().fold(start % n, |acc, y| acc.modpow(y, n)),
    }
}

/// `a = g^(r_k · ∏ y) mod N` at epoch 0.
pub fn compute_acc(
    reps: &[PrimeRep],
    params: &AccumulatorParams,
    secrets: Option<&ManagerSecrets>,
    r_k: &BigUint,
) -> Result<AccumulatorValue, AccumulatorError> {
    check_distinct(reps)?;
    let a = raise(
        &params.base_g,
        std::iter::once(r_k).chain(reps.iter().map(PrimeRep::y)),
        params,
        secrets,
    );
    Ok(AccumulatorValue { a, epoch: 0 })
}

/// Witness `w = g^(r_k · ∏_{y ≠ target} y)` for a member `target`.
pub fn compute_membership_witness(
    target: &PrimeRep,
    reps: &[PrimeRep],
    params: &AccumulatorParams,
    secrets: Option<&ManagerSecrets>,
    r_k: &BigUint,
) -> Result<MembershipWitness, AccumulatorError> {
    check_distinct(reps)?;
    if !reps.iter().any(|r| r.y() == target.y()) {
        return Err(AccumulatorError::NotAMember);
    }
    let others = reps.iter().map(PrimeRep::y).filter(|y| *y != target.y());
    let w = raise(&params.base_g, std::iter::once(r_k).chain(others), params, secrets);
    Ok(MembershipWitness {
        w,
        y: target.y().clone(),
    })
}

/// `w^y ≡ a (mod N)`.
pub fn verify_membership(
    witness: &MembershipWitness,
    y: &BigUint,
    acc: &AccumulatorValue,
    params: &AccumulatorParams,
) -> bool {
    witness.w.modpow(y, &params.modulus_n) == acc.a
}

/// `a' = a^(∏ y') mod N`, one epoch later.
pub fn update_acc(
    acc: &AccumulatorValue,
    new_reps: &[PrimeRep],
    params: &AccumulatorParams,
    secrets: Option<&ManagerSecrets>,
) -> Result<AccumulatorValue, AccumulatorError> {
    check_distinct(new_reps)?;
    Ok(AccumulatorValue {
        a: raise(&acc.a, new_reps.iter().map(PrimeRep::y), params, secrets),
        epoch: acc.epoch + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accumulator::{setup, SetupMode};

    fn reps(ys: &[u32]) -> Vec<PrimeRep> {
        ys.iter()
            .map(|&y| PrimeRep::from_prime(BigUint::from(y)).unwrap())
            .collect()
    }

    fn toy() -> (AccumulatorParams, ManagerSecrets) {
        setup(32, SetupMode::Test, Some([0; 32])).unwrap()
    }

    #[test]
    fn empty_set_accumulates_to_g() {
        let (p, s) = toy();
        for secrets in [Some(&s), None] {
            let acc = compute_acc(&[], &p, secrets, &s.r_k).unwrap();
            assert_eq!(acc.a, BigUint::from(4u32));
            assert_eq!(acc.epoch, 0);
        }
    }

    #[test]
    fn duplicates_are_rejected() {
        let (p, s) = toy();
        assert_eq!(
            compute_acc(&reps(&[3, 3]), &p, Some(&s), &s.r_k).unwrap_err(),
            AccumulatorError::DuplicateRep
        );
        let acc = compute_acc(&reps(&[3]), &p, Some(&s), &s.r_k).unwrap();
        assert_eq!(
            update_acc(&acc, &reps(&[7, 7]), &p, None).unwrap_err(),
            AccumulatorError::DuplicateRep
        );
    }

    #[test]
    fn witness_for_singleton_is_g() {
        let (p, s) = toy();
        let set = reps(&[13]);
        let w = compute_membership_witness(&set[0], &set, &p, Some(&s), &s.r_k).unwrap();
        assert_eq!(w.w, BigUint::from(4u32));
    }

    #[test]
    fn witness_for_non_member_fails() {
        let (p, s) = toy();
        let set = reps(&[3, 7]);
        let five = &reps(&[5])[0];
        assert_eq!(
            compute_membership_witness(five, &set, &p, Some(&s), &s.r_k).unwrap_err(),
            AccumulatorError::NotAMember
        );
    }

    #[test]
    fn empty_update_bumps_epoch_only() {
        let (p, s) = toy();
        let acc = compute_acc(&reps(&[3, 7]), &p, Some(&s), &s.r_k).unwrap();
        let next = update_acc(&acc, &[], &p, Some(&s)).unwrap();
        assert_eq!(next.a, acc.a);
        assert_eq!(next.epoch, 1);
    }

    #[test]
    fn bezout_normalization() {
        let u = BigUint::from(21u32);
        let x = BigUint::from(5u32);
        let pair = BezoutPair::solve(&u, &x).unwrap();
        assert_eq!(&pair.nw1_raw * BigInt::from(21) + &pair.b * BigInt::from(5), BigInt::one());
        let (nw1, b) = pair.normalize(&u, &x);
        assert_eq!(nw1, BigUint::from(1u32));
        assert_eq!(b, BigInt::from(-4));
        assert!(BezoutPair::solve(&BigUint::from(15u32), &x).is_none());
    }

    #[test]
    fn product_tree_matches_fold() {
        let vals: Vec<BigUint> = (1u32..40).map(BigUint::from).collect();
        let folded = vals.iter().fold(BigUint::one(), |a, v| a * v);
        assert_eq!(product_tree(&vals), folded);
        assert_eq!(product_tree(&[]), BigUint::one());
    }

    #[test]
    fn negative_exponent_uses_inverse() {
        let n = BigUint::from(253u32);
        let g = BigUint::from(4u32);
        let inv = pow_signed(&g, &BigInt::from(-1), &n);
        assert_eq!((inv * &g) % &n, BigUint::one());
    }
}
