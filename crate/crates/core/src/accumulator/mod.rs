//! RSA accumulator over prime representatives of certificate identities.
//!
//! The accumulator value is `a = g^(r_k · ∏ y) mod N`. A device whose prime
//! `x` is not accumulated holds a non-revoked proof `(nw1, nw2)` with
//! `a^nw1 ≡ nw2^x · g (mod N)`. Every operation runs either with the trapdoor
//! (`φ(N)`, which lets exponents be reduced before exponentiation) or without
//! it; both routes produce identical values.

mod ops;
mod params;
mod prime_rep;
mod proof;

pub use ops::{
    compute_acc, compute_membership_witness, update_acc, verify_membership, AccumulatorValue,
    BezoutPair, MembershipWitness,
};
pub use params::{setup, AccumulatorParams, ManagerSecrets, SetupMode, TEST_BIT_LEN};
pub use prime_rep::{prime_representative, PrimeRep, RepSource, PRIME_REP_ROUNDS, SPOT_CHECK_ROUNDS};
pub use proof::{
    compute_non_revoked_proof, compute_non_revoked_proofs, revocation_check,
    update_non_revoked_proof, NonRevokedProof, ProofContext, SERIAL_LEN, X_BYTES,
};

use crate::encoding::CodecError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AccumulatorError {
    #[error("unsupported modulus length {0} bits for this mode")]
    UnsupportedBitLength(u32),
    #[error("test mode requires a seed")]
    MissingSeed,
    #[error("prime generation gave up after the attempt bound")]
    PrimeGenerationTimeout,
    #[error("prime representative search exhausted the nonce space")]
    SearchExhausted,
    #[error("input is not prime")]
    NonPrimeInput,
    #[error("prime representative supplied twice")]
    DuplicateRep,
    #[error("element is not a member of the accumulated set")]
    NotAMember,
    #[error("element is in the revoked set")]
    IsRevoked,
    #[error("element is not coprime to the accumulated product")]
    NotCoprime,
    #[error(transparent)]
    Codec(#[from] CodecError),
}
