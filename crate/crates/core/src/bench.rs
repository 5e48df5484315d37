//! Timing harnesses behind `accrl bench`.

use std::fmt::Write as _;
use std::time::Instant;

use ed25519_dalek::SigningKey;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::accumulator::{
    compute_acc, compute_non_revoked_proofs, setup, AccumulatorError, AccumulatorParams, ManagerSecrets,
    PrimeRep, SetupMode,
};
use crate::baselines::{bloom_from_entries, bloom_query_identity, crl_lookup, LocalCrlStore, Method};
use crate::crl::{generate_synthetic_crl, CrlKind};
use crate::manager::entry_reps;
use crate::protocol::check_timing_bench;

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Fixed key for signing benchmark artefacts.
fn bench_key() -> SigningKey {
    SigningKey::from_bytes(&[0xBE; 32])
}

/// `count` device identities disjoint from the synthetic CRL issuers.
pub fn synthetic_devices(count: usize, seed: [u8; 32]) -> Vec<([u8; 20], [u8; 32])> {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let issuer = [0xDE; 32];
    (0..count)
        .map(|_| {
            let mut serial = [0u8; 20];
            rng.fill_bytes(&mut serial);
            serial[0] |= 0x80;
            (serial, issuer)
        })
        .collect()
}

/// Revoked-set and device prime representatives for a benchmark run.
pub struct Workload {
    pub revoked: Vec<PrimeRep>,
    pub devices: Vec<PrimeRep>,
    pub prime_rep_ms: f64,
}

pub fn workload(size: usize, devices: usize, seed: [u8; 32]) -> Result<Workload, AccumulatorError> {
    let crl = generate_synthetic_crl(size, CrlKind::Full, 0, seed, &bench_key());
    let ids = synthetic_devices(devices, seed);
    let t = Instant::now();
    let revoked = entry_reps(&crl.entries)?;
    let prime_rep_ms = ms_since(t);
    let devices = ids
        .iter()
        .map(|(s, i)| crate::accumulator::prime_representative(s, i))
        .collect::<Result<_, _>>()?;
    Ok(Workload {
        revoked,
        devices,
        prime_rep_ms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeRow {
    pub bits: u32,
    pub size: usize,
    pub trapdoor: bool,
    pub threads: usize,
    pub devices: usize,
    /// Time to derive the revoked set's prime representatives.
    pub prime_rep_ms: f64,
    pub accumulate_ms: f64,
    /// Time to issue proofs for all devices.
    pub proof_ms: f64,
}

/// Times accumulation and batch proof generation for one workload.
pub fn time_compute(
    params: &AccumulatorParams,
    secrets: &ManagerSecrets,
    work: &Workload,
    trapdoor: bool,
    threads: usize,
) -> Result<ComputeRow, AccumulatorError> {
    let sec = trapdoor.then_some(secrets);
    let t = Instant::now();
    compute_acc(&work.revoked, params, sec, &secrets.r_k)?;
    let accumulate_ms = ms_since(t);
    let t = Instant::now();
    let proofs = compute_non_revoked_proofs(
        &work.devices,
        &work.revoked,
        params,
        sec,
        &secrets.r_k,
        0,
        &bench_key(),
        Some(threads),
    )?;
    let proof_ms = ms_since(t);
    proofs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ComputeRow {
        bits: params.bit_len_k,
        size: work.revoked.len(),
        trapdoor,
        threads,
        devices: work.devices.len(),
        prime_rep_ms: work.prime_rep_ms,
        accumulate_ms,
        proof_ms,
    })
}

pub const COMPUTE_CSV_HEADER: &str =
    "bits,size,trapdoor,threads,devices,prime_rep_ms,accumulate_ms,proof_ms";

pub fn compute_csv(rows: &[ComputeRow]) -> String {
    let mut out = format!("{COMPUTE_CSV_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.3},{:.3},{:.3}",
            r.bits, r.size, r.trapdoor, r.threads, r.devices, r.prime_rep_ms, r.accumulate_ms, r.proof_ms
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub method: Method,
    pub bits: u32,
    pub entries: usize,
    pub iterations: usize,
    pub mean_ms: f64,
}

/// Mean per-check latency of the three methods: accumulator revocation
/// check at `bits`, binary search in a local CRL and a Bloom query, both over
/// `entries` revoked identities.
pub fn check_bench(
    bits: u32,
    entries: usize,
    revoked_for_proof: usize,
    iterations: usize,
    seed: [u8; 32],
) -> Result<Vec<CheckRow>, AccumulatorError> {
    let crl = generate_synthetic_crl(entries, CrlKind::Full, 0, seed, &bench_key());
    let (params, secrets) = setup(bits, SetupMode::Test, Some(seed))?;
    let work = workload(revoked_for_proof, 1, seed)?;
    let acc = compute_acc(&work.revoked, &params, Some(&secrets), &secrets.r_k)?;
    let proof = compute_non_revoked_proofs(
        &work.devices,
        &work.revoked,
        &params,
        Some(&secrets),
        &secrets.r_k,
        0,
        &bench_key(),
        Some(1),
    )?
    .pop()
    .expect("one device")?;
    let acc_ms = check_timing_bench(&proof, &acc, &params, iterations);

    let probes = synthetic_devices(iterations.max(1), seed);
    let store = LocalCrlStore::from_crl(&crl);
    let t = Instant::now();
    let mut hits = 0usize;
    for (s, i) in &probes {
        hits += usize::from(crl_lookup(std::hint::black_box(&store), s, i));
    }
    let crl_ms = ms_since(t) / probes.len() as f64;

    let bloom = bloom_from_entries(&crl.entries, 0.01);
    let t = Instant::now();
    for (s, i) in &probes {
        hits += usize::from(bloom_query_identity(std::hint::black_box(&bloom), s, i));
    }
    let bloom_ms = ms_since(t) / probes.len() as f64;
    std::hint::black_box(hits);

    let row = |method, mean_ms| CheckRow {
        method,
        bits,
        entries,
        iterations,
        mean_ms,
    };
    Ok(vec![
        row(Method::Accumulator, acc_ms),
        row(Method::Bloom, bloom_ms),
        row(Method::FullCrl, crl_ms),
    ])
}

pub const CHECK_CSV_HEADER: &str = "method,bits,entries,iterations,mean_ms";

pub fn check_csv(rows: &[CheckRow]) -> String {
    let mut out = format!("{CHECK_CSV_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{:.6}", r.method, r.bits, r.entries, r.iterations, r.mean_ms).unwrap();
    }
    out
}
