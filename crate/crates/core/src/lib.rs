//! Certificate revocation through an RSA accumulator.
//!
//! A CRL is condensed into one accumulator value plus a signed non-revoked
//! proof per device. The crate covers the accumulator itself, a compact
//! signed CRL format, the manager that runs setup and delta updates, the
//! device-side verification protocol, the two classic baselines (local CRL
//! and Bloom filter), and a discrete-event simulator for comparing how long
//! each method takes to distribute over a multi-hop mesh.

pub mod accumulator;
pub mod baselines;
pub mod bench;
pub mod crl;
pub mod encoding;
pub mod manager;
pub mod primes;
pub mod protocol;
pub mod sim;
