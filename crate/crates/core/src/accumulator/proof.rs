use std::collections::HashSet;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::Zero;
use rayon::prelude::*;

use super::ops::{check_distinct, pow_signed, product_mod, product_tree};
use super::{AccumulatorError, AccumulatorParams, AccumulatorValue, BezoutPair, ManagerSecrets, PrimeRep};
use crate::encoding::{put_fixed, CodecError, Reader};

pub const SERIAL_LEN: usize = 20;
/// Wire width of a 512-bit prime representative.
pub const X_BYTES: usize = 64;
const SIG_LEN: usize = 64;

/// Signed non-revoked proof `(serial, x, nw1, nw2)` for one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonRevokedProof {
    pub serial: [u8; SERIAL_LEN],
    pub x: BigUint,
    pub nw1: BigUint,
    pub nw2: BigUint,
    pub epoch: u64,
    /// Byte width `nw1` and `nw2` are encoded with; `k/8` for honest proofs.
    pub field_bytes: usize,
    pub signature: [u8; SIG_LEN],
}

impl NonRevokedProof {
    pub fn wire_len(field_bytes: usize) -> usize {
        SERIAL_LEN + X_BYTES + 2 * field_bytes + 8 + SIG_LEN
    }

    /// Canonical bytes covered by the manager signature.
    pub fn signed_bytes(&self) -> Result<Vec<u8>, CodecError> {
        let mut buf = Vec::with_capacity(Self::wire_len(self.field_bytes));
        buf.extend_from_slice(&self.serial);
        put_fixed(&mut buf, &self.x, X_BYTES)?;
        put_fixed(&mut buf, &self.nw1, self.field_bytes)?;
        put_fixed(&mut buf, &self.nw2, self.field_bytes)?;
        buf.extend_from_slice(&self.epoch.to_be_bytes());
        Ok(buf)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CodecError> {
        let mut buf = self.signed_bytes()?;
        buf.extend_from_slice(&self.signature);
        Ok(buf)
    }

    pub fn read(r: &mut Reader<'_>, field_bytes: usize) -> Result<Self, CodecError> {
        Ok(Self {
            serial: r.array()?,
            x: r.fixed_uint(X_BYTES)?,
            nw1: r.fixed_uint(field_bytes)?,
            nw2: r.fixed_uint(field_bytes)?,
            epoch: r.u64()?,
            field_bytes,
            signature: r.array()?,
        })
    }

    /// Decodes exactly one proof; trailing bytes are an error.
    pub fn from_bytes(data: &[u8], field_bytes: usize) -> Result<Self, CodecError> {
        if data.len() != Self::wire_len(field_bytes) {
            return Err(CodecError::Truncated);
        }
        Self::read(&mut Reader::new(data), field_bytes)
    }

    pub fn sign(&mut self, signer: &SigningKey) -> Result<(), CodecError> {
        self.signature = signer.sign(&self.signed_bytes()?).to_bytes();
        Ok(())
    }

    pub fn verify_signature(&self, manager: &VerifyingKey) -> bool {
        let Ok(msg) = self.signed_bytes() else {
            return false;
        };
        manager
            .verify_strict(&msg, &Signature::from_bytes(&self.signature))
            .is_ok()
    }
}

enum Route {
    /// `u mod φ(N)`.
    Trapdoor { u_mod_totient: BigUint },
    /// The full product `u`.
    Exact { u: BigUint },
}

/// Revoked-set data shared by every proof issued against one accumulator.
///
/// `u = r_k · ∏ y` over the revoked set is prepared once, reduced by `φ(N)`
/// when the trapdoor is present, so that per-device work is independent and
/// can run in parallel.
pub struct ProofContext<'a> {
    params: &'a AccumulatorParams,
    secrets: Option<&'a ManagerSecrets>,
    r_k: &'a BigUint,
    ys: Vec<&'a BigUint>,
    revoked: HashSet<&'a BigUint>,
    route: Route,
}

impl<'a> ProofContext<'a> {
    pub fn new(
        revoked: &'a [PrimeRep],
        params: &'a AccumulatorParams,
        secrets: Option<&'a ManagerSecrets>,
        r_k: &'a BigUint,
    ) -> Result<Self, AccumulatorError> {
        let set = check_distinct(revoked)?;
        let ys: Vec<&BigUint> = revoked.iter().map(PrimeRep::y).collect();
        let factors = || std::iter::once(r_k).chain(ys.iter().copied());
        let route = match secrets {
            Some(s) => Route::Trapdoor {
                u_mod_totient: product_mod(factors(), &s.totient),
            },
            None => Route::Exact {
                u: product_tree(factors()),
            },
        };
        Ok(Self {
            params,
            secrets,
            r_k,
            ys,
            revoked: set,
            route,
        })
    }

    fn factors(&self) -> impl Iterator<Item = &BigUint> + '_ {
        std::iter::once(self.r_k).chain(self.ys.iter().copied())
    }

    /// Returns `(nw1, nw2)` for the prime `x`.
    pub fn witness(&self, x: &BigUint) -> Result<(BigUint, BigUint), AccumulatorError> {
        if self.revoked.contains(x) {
            return Err(AccumulatorError::IsRevoked);
        }
        let u_mod_x = match &self.route {
            Route::Trapdoor { .. } => product_mod(self.factors(), x),
            Route::Exact { u } => u % x,
        };
        if u_mod_x.is_zero() {
            return Err(AccumulatorError::NotCoprime);
        }
        let pair = BezoutPair::solve(&u_mod_x, x).ok_or(AccumulatorError::NotCoprime)?;
        let g = &self.params.base_g;
        let n = &self.params.modulus_n;

        match (&self.route, self.secrets) {
            (Route::Exact { u }, _) => {
                let (nw1, b) = pair.normalize(u, x);
                Ok((nw1, pow_signed(g, &-b, n)))
            }
            (Route::Trapdoor { u_mod_totient }, Some(s)) => {
                let nw1 = pair.nw1_raw.mod_floor(&BigInt::from(x.clone()));
                let nw1 = nw1.to_biguint().expect("non-negative");
                // -b' = (nw1·u - 1) / x, reduced mod φ(N).
                let phi = &s.totient;
                let exp = match crate::primes::mod_inverse(x, phi) {
                    Some(x_inv) => ((&nw1 * u_mod_totient + phi - 1u32) % phi) * x_inv % phi,
                    None => {
                        // x shares a factor with φ(N) (only possible with toy
                        // parameters): reduce mod φ·x so the division stays exact.
                        let m = phi * x;
                        let u_m = product_mod(self.factors(), &m);
                        let t = (&nw1 * u_m + &m - 1u32) % &m;
                        debug_assert!((&t % x).is_zero());
                        t / x
                    }
                };
                Ok((nw1, g.modpow(&exp, n)))
            }
            (Route::Trapdoor { .. }, None) => unreachable!("trapdoor route requires secrets"),
        }
    }

    /// Issues a signed proof for `x` at `epoch`.
    pub fn prove(
        &self,
        x: &PrimeRep,
        epoch: u64,
        signer: &SigningKey,
    ) -> Result<NonRevokedProof, AccumulatorError> {
        let (nw1, nw2) = self.witness(x.y())?;
        let mut proof = NonRevokedProof {
            serial: x.serial(),
            x: x.y().clone(),
            nw1,
            nw2,
            epoch,
            field_bytes: self.params.field_bytes(),
            signature: [0; SIG_LEN],
        };
        proof.sign(signer)?;
        Ok(proof)
    }
}

/// Non-revoked proof for `x` against the revoked set.
pub fn compute_non_revoked_proof(
    x: &PrimeRep,
    revoked: &[PrimeRep],
    params: &AccumulatorParams,
    secrets: Option<&ManagerSecrets>,
    r_k: &BigUint,
    epoch: u64,
    signer: &SigningKey,
) -> Result<NonRevokedProof, AccumulatorError> {
    ProofContext::new(revoked, params, secrets, r_k)?.prove(x, epoch, signer)
}

/// Batch form of [`compute_non_revoked_proof`]. Items are independent; the
/// result order matches `xs` regardless of `threads`. `None` uses the
/// ambient rayon pool.
#[allow(clippy::too_many_arguments)]
pub fn compute_non_revoked_proofs(
    xs: &[PrimeRep],
    revoked: &[PrimeRep],
    params: &AccumulatorParams,
    secrets: Option<&ManagerSecrets>,
    r_k: &BigUint,
    epoch: u64,
    signer: &SigningKey,
    threads: Option<usize>,
) -> Result<Vec<Result<NonRevokedProof, AccumulatorError>>, AccumulatorError> {
    let ctx = ProofContext::new(revoked, params, secrets, r_k)?;
    let run = || -> Vec<_> { xs.par_iter().map(|x| ctx.prove(x, epoch, signer)).collect() };
    Ok(match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    })
}

/// `a^nw1 ≡ nw2^x · g (mod N)`.
pub fn revocation_check(
    proof: &NonRevokedProof,
    acc: &AccumulatorValue,
    params: &AccumulatorParams,
) -> bool {
    let n = &params.modulus_n;
    let lhs = acc.a.modpow(&proof.nw1, n);
    let rhs = proof.nw2.modpow(&proof.x, n) * &params.base_g % n;
    lhs == rhs
}

/// Proof for `x` after `new_reps` join the revoked set, recomputed over the
/// union and stamped with `new_acc.epoch`.
#[allow(clippy::too_many_arguments)]
pub fn update_non_revoked_proof(
    x: &PrimeRep,
    old_revoked: &[PrimeRep],
    new_reps: &[PrimeRep],
    new_acc: &AccumulatorValue,
    params: &AccumulatorParams,
    secrets: Option<&ManagerSecrets>,
    r_k: &BigUint,
    signer: &SigningKey,
) -> Result<NonRevokedProof, AccumulatorError> {
    let union: Vec<PrimeRep> = old_revoked.iter().chain(new_reps).cloned().collect();
    compute_non_revoked_proof(x, &union, params, secrets, r_k, new_acc.epoch, signer)
}
