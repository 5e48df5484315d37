//! `accrl`: operator command line for accumulator-based certificate
//! revocation.
//!
//! Exit codes: 0 success, 1 verification or assertion failure, 2 usage,
//! 3 I/O or format error.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use accrl_core::accumulator::{AccumulatorError, SetupMode};
use accrl_core::baselines::{storage_csv, storage_report, Method};
use accrl_core::bench::{check_bench, check_csv, compute_csv, synthetic_devices, time_compute, workload};
use accrl_core::crl::{decode_crl, encode_crl, generate_synthetic_crl, CrlError, CrlKind};
use accrl_core::manager::{
    setup_phase, DeviceId, DistributionPayload, ManagerError, ManagerState, PayloadError, SetupOptions,
};
use accrl_core::protocol::{verify_peer, PeerCertificate, VerificationRequest};
use accrl_core::sim::{build_grid, sweep, sweep_csv, update_sweep, BaselineDelivery, SimConfig, SweepOptions};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ed25519_dalek::{SigningKey, VerifyingKey};
use sha2::{Digest, Sha256};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "accrl", version, about = "RSA-accumulator certificate revocation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a signed synthetic CRL (.acrl).
    GenCrl {
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// 64 hex digits, or any string (hashed). ACCRL_SEED takes precedence.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Epoch a delta CRL extends.
        #[arg(long, default_value_t = 0)]
        base_epoch: u64,
    },
    /// Generate a device list (serial_hex,issuer_key_hash_hex).
    GenDevices {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the setup phase: accumulate a full CRL and issue device proofs.
    Setup {
        #[arg(long)]
        bits: u32,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        crl: PathBuf,
        #[arg(long)]
        devices: PathBuf,
        #[arg(long)]
        out_state: PathBuf,
        #[arg(long)]
        out_payload: PathBuf,
        #[arg(long)]
        seed: Option<String>,
        /// Drop p, q and φ(N) from the saved state.
        #[arg(long)]
        delete_trapdoor: bool,
    },
    /// Apply a delta CRL and issue the next epoch's payload.
    Update {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        delta: PathBuf,
        #[arg(long)]
        out_payload: PathBuf,
        /// Where to write the new state; defaults to overwriting --state.
        #[arg(long)]
        out_state: Option<PathBuf>,
        /// Drop the trapdoor before updating.
        #[arg(long)]
        delete_trapdoor: bool,
    },
    /// Print one device's proof as hex.
    Prove {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        serial: String,
    },
    /// Verify one proof from a payload through the full protocol.
    Check {
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        proof_index: usize,
        #[arg(long, value_enum)]
        tamper: Option<TamperArg>,
        /// Manager state used to re-sign a tampered proof, so the tamper
        /// reaches the check it targets instead of the signature check.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Per-device storage of each method, as CSV.
    Storage {
        #[arg(long)]
        entries: usize,
        #[arg(long)]
        bits: u32,
        #[arg(long, default_value_t = 0.01)]
        fpr: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate distribution over a grid mesh, as CSV.
    Simulate {
        #[arg(long)]
        nodes: usize,
        #[arg(long, value_delimiter = ',', default_value = "acc,crl,bloom")]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,30000")]
        crl_sizes: Vec<usize>,
        #[arg(long)]
        seed: Option<String>,
        /// Simulate an update of this many entries on top of each CRL size.
        #[arg(long)]
        delta: Option<usize>,
        #[arg(long, default_value_t = 2048)]
        bits: u32,
        #[arg(long, default_value_t = 0.01)]
        fpr: f64,
        #[arg(long, value_enum, default_value_t = DeliveryArg::Unicast)]
        baseline_delivery: DeliveryArg,
        #[arg(long, default_value_t = 0.01)]
        loss: f64,
        /// Link rate in bit/s.
        #[arg(long, default_value_t = 6e6)]
        rate: f64,
        #[arg(long, default_value_t = 1500)]
        mtu: usize,
        #[arg(long, default_value_t = 0.5)]
        latency_ms: f64,
        #[arg(long, default_value_t = 7)]
        max_retries: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Prime-representative, accumulate and proof timings.
    Compute {
        #[arg(long)]
        bits: u32,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        no_trapdoor: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Devices to issue proofs for at each size.
        #[arg(long, default_value_t = 10)]
        devices: usize,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean check latency of the three methods.
    Check {
        #[arg(long)]
        bits: u32,
        #[arg(long)]
        iters: usize,
        /// Revoked entries behind the CRL and Bloom baselines.
        #[arg(long, default_value_t = 30_000)]
        entries: usize,
        /// Revoked entries behind the accumulator proof.
        #[arg(long, default_value_t = 100)]
        revoked: usize,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Full,
    Delta,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Secure,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeliveryArg {
    Unicast,
    Shared,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TamperArg {
    Nw1,
    Nw2,
    X,
    Epoch,
    Width,
    Serial,
    ProofSig,
    RequestSig,
}

// ---- errors and exit codes ---------------------------------------------------

#[derive(Debug)]
struct Exit {
    code: u8,
    message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Exit {
        code: 2,
        message: message.into(),
    }
    .into()
}

fn failure(message: impl Into<String>) -> anyhow::Error {
    Exit {
        code: 1,
        message: message.into(),
    }
    .into()
}

fn accumulator_code(e: &AccumulatorError) -> u8 {
    match e {
        AccumulatorError::MissingSeed | AccumulatorError::UnsupportedBitLength(_) => 2,
        _ => 3,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<ManagerError>() {
            return match e {
                ManagerError::BadCrlSignature
                | ManagerError::DeviceRevoked(_)
                | ManagerError::StaleDelta { .. }
                | ManagerError::DuplicateRevocation => 1,
                ManagerError::Accumulator(a) => accumulator_code(a),
                _ => 3,
            };
        }
        if let Some(CrlError::BadSignature) = cause.downcast_ref::<CrlError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<AccumulatorError>() {
            return accumulator_code(e);
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            if code == 1 && err.downcast_ref::<Exit>().is_some() {
                println!("{err}");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}

// ---- helpers -----------------------------------------------------------------

/// `ACCRL_SEED` overrides the flag.
fn resolve_seed(flag: Option<String>) -> Option<String> {
    std::env::var("ACCRL_SEED")
        .ok()
        .filter(|s| !s.is_empty())
        .or(flag)
}

/// 64 hex digits are taken literally; anything else is hashed.
fn seed_bytes(seed: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    if seed.len() == 64 && hex::decode_to_slice(seed, &mut out).is_ok() {
        return out;
    }
    Sha256::digest(seed.as_bytes()).into()
}

fn require_seed(flag: Option<String>) -> Result<String> {
    resolve_seed(flag).ok_or_else(|| usage("a seed is required (--seed or ACCRL_SEED)"))
}

fn derive_key(label: &str, seed: &[u8]) -> SigningKey {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update(seed);
    SigningKey::from_bytes(&h.finalize().into())
}

/// Fixed demonstration CA that signs every generated CRL.
fn demo_ca() -> SigningKey {
    derive_key("accrl demo ca", &[])
}

/// Fixed per-serial peer key used to sign verification requests.
fn demo_peer_key(serial: &[u8; 20]) -> SigningKey {
    derive_key("accrl demo peer", serial)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn parse_serial(s: &str) -> Result<[u8; 20]> {
    let mut out = [0u8; 20];
    hex::decode_to_slice(s.trim(), &mut out).map_err(|_| usage(format!("serial must be 40 hex digits: {s:?}")))?;
    Ok(out)
}

fn parse_devices(text: &str) -> Result<Vec<DeviceId>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("serial")) {
            continue;
        }
        let (s, issuer) = line
            .split_once(',')
            .with_context(|| format!("device line {}: expected serial_hex,issuer_key_hash_hex", i + 1))?;
        let mut serial = [0u8; 20];
        let mut ikh = [0u8; 32];
        hex::decode_to_slice(s.trim(), &mut serial).with_context(|| format!("device line {}: bad serial", i + 1))?;
        hex::decode_to_slice(issuer.trim(), &mut ikh).with_context(|| format!("device line {}: bad issuer", i + 1))?;
        out.push((serial, ikh));
    }
    Ok(out)
}

fn emit(manifest: &mut RunManifest, out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            write(p, text.as_bytes())?;
            manifest.output(&p.display().to_string(), text.as_bytes());
        }
        None => {
            print!("{text}");
            manifest.output("-", text.as_bytes());
        }
    }
    Ok(())
}

fn finish(manifest: RunManifest) -> Result<()> {
    manifest.append().context("appending run manifest")
}

// ---- commands ----------------------------------------------------------------

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenCrl {
            count,
            kind,
            seed,
            out,
            base_epoch,
        } => {
            let seed = require_seed(seed)?;
            let mut m = RunManifest::new("gen-crl");
            let kind = match kind {
                KindArg::Full => CrlKind::Full,
                KindArg::Delta => CrlKind::Delta,
            };
            let crl = m.phase("generate", || {
                generate_synthetic_crl(count, kind, base_epoch, seed_bytes(&seed), &demo_ca())
            });
            let bytes = encode_crl(&crl)?;
            write(&out, &bytes)?;
            m.seed = Some(seed);
            m.output(&out.display().to_string(), &bytes);
            finish(m)
        }
        Command::GenDevices { count, seed, out } => {
            let seed = require_seed(seed)?;
            let mut m = RunManifest::new("gen-devices");
            let mut text = String::from("serial_hex,issuer_key_hash_hex\n");
            for (s, i) in synthetic_devices(count, seed_bytes(&seed)) {
                text.push_str(&format!("{},{}\n", hex::encode(s), hex::encode(i)));
            }
            write(&out, text.as_bytes())?;
            m.seed = Some(seed);
            m.output(&out.display().to_string(), text.as_bytes());
            finish(m)
        }
        Command::Setup {
            bits,
            mode,
            crl,
            devices,
            out_state,
            out_payload,
            seed,
            delete_trapdoor,
        } => {
            let seed = resolve_seed(seed);
            let mode = match mode {
                ModeArg::Secure => SetupMode::Secure,
                ModeArg::Test => SetupMode::Test,
            };
            if mode == SetupMode::Test && seed.is_none() {
                return Err(usage("test mode requires a seed (--seed or ACCRL_SEED)"));
            }
            let mut m = RunManifest::new("setup");
            let crl_bytes = read(&crl)?;
            let dev_text = read(&devices)?;
            m.input(&crl, &crl_bytes);
            m.input(&devices, &dev_text);
            let full = decode_crl(&crl_bytes, None).context("decoding CRL")?;
            let device_ids = parse_devices(&String::from_utf8_lossy(&dev_text))?;
            let seed_b = seed.as_deref().map(seed_bytes);
            let signer = match seed_b {
                Some(s) => derive_key("accrl manager", &s),
                None => SigningKey::generate(&mut rand::rngs::OsRng),
            };
            let opts = SetupOptions {
                bit_len_k: bits,
                mode,
                seed: seed_b,
                signer,
                ca: demo_ca().verifying_key(),
            };
            let (mut state, payload) = m.phase("setup_phase", || setup_phase(&full, &device_ids, opts))?;
            if delete_trapdoor {
                state.delete_trapdoor();
            }
            let state_bytes = state.persist();
            let payload_bytes = payload.encode()?;
            write(&out_state, &state_bytes)?;
            write(&out_payload, &payload_bytes)?;
            m.seed = seed;
            m.output(&out_state.display().to_string(), &state_bytes);
            m.output(&out_payload.display().to_string(), &payload_bytes);
            eprintln!(
                "epoch {} accumulated {} devices {}",
                state.acc.epoch,
                state.accumulated.len(),
                payload.proofs.len()
            );
            finish(m)
        }
        Command::Update {
            state,
            delta,
            out_payload,
            out_state,
            delete_trapdoor,
        } => {
            let mut m = RunManifest::new("update");
            let state_bytes = read(&state)?;
            let delta_bytes = read(&delta)?;
            m.input(&state, &state_bytes);
            m.input(&delta, &delta_bytes);
            let mut st = ManagerState::restore(&state_bytes)?;
            let delta_crl = decode_crl(&delta_bytes, None).context("decoding delta CRL")?;
            if delete_trapdoor {
                st.delete_trapdoor();
            }
            let before = st.device_registry.len();
            let payload = m.phase("update_phase", || st.update_phase(&delta_crl))?;
            let new_state = st.persist();
            let payload_bytes = payload.encode()?;
            let state_out = out_state.unwrap_or(state);
            write(&state_out, &new_state)?;
            write(&out_payload, &payload_bytes)?;
            m.output(&state_out.display().to_string(), &new_state);
            m.output(&out_payload.display().to_string(), &payload_bytes);
            eprintln!(
                "epoch {} accumulated {} devices {} (dropped {})",
                st.acc.epoch,
                st.accumulated.len(),
                payload.proofs.len(),
                before - st.device_registry.len()
            );
            finish(m)
        }
        Command::Prove { state, serial } => {
            let mut m = RunManifest::new("prove");
            let state_bytes = read(&state)?;
            m.input(&state, &state_bytes);
            let st = ManagerState::restore(&state_bytes)?;
            let serial = parse_serial(&serial)?;
            let proof = st
                .prove(&serial)
                .ok_or_else(|| failure(format!("serial {} is not a registered device", hex::encode(serial))))??;
            let text = format!("{}\n", hex::encode(proof.to_bytes()?));
            emit(&mut m, None, &text)?;
            finish(m)
        }
        Command::Check {
            payload,
            proof_index,
            tamper,
            state,
        } => check(&payload, proof_index, tamper, state.as_deref()),
        Command::Bench(b) => bench(b),
        Command::Storage { entries, bits, fpr, out } => {
            if !(fpr > 0.0 && fpr < 1.0) {
                return Err(usage("--fpr must lie in (0, 1)"));
            }
            let mut m = RunManifest::new("storage");
            let csv = storage_csv(&storage_report(entries, bits, fpr));
            emit(&mut m, out.as_deref(), &csv)?;
            finish(m)
        }
        Command::Simulate {
            nodes,
            methods,
            crl_sizes,
            seed,
            delta,
            bits,
            fpr,
            baseline_delivery,
            loss,
            rate,
            mtu,
            latency_ms,
            max_retries,
            out,
        } => {
            let seed = require_seed(seed)?;
            let topo = build_grid(nodes).map_err(|e| usage(e.to_string()))?;
            let methods = methods
                .iter()
                .map(|s| Method::parse(s.trim()).ok_or_else(|| usage(format!("unknown method {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let seed_b = seed_bytes(&seed);
            let config = SimConfig {
                link_rate: rate,
                frame_payload: mtu,
                per_hop_latency: latency_ms * 1e-3,
                loss_prob: loss,
                max_retries,
                rng_seed: u64::from_be_bytes(seed_b[..8].try_into().unwrap()),
            };
            config.validate().map_err(|e| usage(e.to_string()))?;
            let opts = SweepOptions {
                k_bits: bits,
                bloom_fpr: fpr,
                baseline_delivery: match baseline_delivery {
                    DeliveryArg::Unicast => BaselineDelivery::Unicast,
                    DeliveryArg::Shared => BaselineDelivery::Shared,
                },
            };
            let mut m = RunManifest::new("simulate");
            let rows = m.phase("simulate", || match delta {
                None => sweep(&methods, &crl_sizes, &topo, &config, &opts),
                Some(d) => crl_sizes
                    .iter()
                    .flat_map(|&base| update_sweep(&methods, base, &[d], &topo, &config, &opts))
                    .collect(),
            });
            m.seed = Some(seed);
            emit(&mut m, out.as_deref(), &sweep_csv(&rows))?;
            finish(m)
        }
    }
}

fn check(payload_path: &Path, index: usize, tamper: Option<TamperArg>, state: Option<&Path>) -> Result<()> {
    let bytes = read(payload_path)?;
    let payload = DistributionPayload::decode(&bytes)
        .map_err(|e: PayloadError| anyhow::Error::new(e).context("decoding payload"))?;
    let manager = VerifyingKey::from_bytes(&payload.manager_pubkey).context("payload manager key")?;
    if !payload.verify_signature(&manager) {
        return Err(failure("rejected payload_signature"));
    }
    let mut proof = payload
        .proofs
        .get(index)
        .cloned()
        .ok_or_else(|| usage(format!("payload holds {} proofs", payload.proofs.len())))?;
    let resigner = match state {
        Some(p) => {
            let st = ManagerState::restore(&read(p)?)?;
            if st.manager_pubkey() != manager {
                return Err(usage("state does not belong to the payload's manager"));
            }
            Some(st.signer)
        }
        None => None,
    };

    let peer = demo_peer_key(&proof.serial);
    let mut cert = PeerCertificate {
        serial: proof.serial,
        issuer_key_hash: [0; 32],
        peer_pubkey: peer.verifying_key().to_bytes(),
    };
    let mut request_key = peer.clone();
    let n = &payload.params.modulus_n;
    match tamper {
        None => {}
        Some(TamperArg::Nw1) => proof.nw1 += 1u32,
        Some(TamperArg::Nw2) => proof.nw2 = (&proof.nw2 + 1u32) % n,
        Some(TamperArg::X) => proof.x += 2u32,
        Some(TamperArg::Epoch) => proof.epoch += 1,
        Some(TamperArg::Width) => proof.field_bytes += 1,
        Some(TamperArg::Serial) => cert.serial[19] ^= 1,
        Some(TamperArg::ProofSig) => proof.signature[0] ^= 1,
        Some(TamperArg::RequestSig) => request_key = derive_key("accrl stolen proof", &proof.serial),
    }
    let proof_field = matches!(
        tamper,
        Some(TamperArg::Nw1 | TamperArg::Nw2 | TamperArg::X | TamperArg::Epoch | TamperArg::Width)
    );
    if proof_field {
        if let Some(key) = &resigner {
            proof.sign(key)?;
        }
    }

    let req = VerificationRequest::signed(cert, Some(proof), b"accrl check request".to_vec(), &request_key);
    let outcome = verify_peer(&req, &payload.acc, &payload.params, &manager);
    match outcome.failed_step {
        None => {
            println!("accepted");
            Ok(())
        }
        Some(step) => {
            if state.is_none() && proof_field {
                eprintln!("note: without --state the tampered proof is not re-signed");
            }
            Err(failure(format!("failed_step={step}")))
        }
    }
}

fn bench(cmd: BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Compute {
            bits,
            sizes,
            no_trapdoor,
            threads,
            devices,
            seed,
            out,
        } => {
            if sizes.is_empty() {
                bail!(usage("--sizes needs at least one value"));
            }
            let seed = resolve_seed(seed).unwrap_or_else(|| "accrl-bench".into());
            let seed_b = seed_bytes(&seed);
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let mut m = RunManifest::new("bench compute");
            let (params, secrets) = m.phase("setup", || {
                accrl_core::accumulator::setup(bits, SetupMode::Test, Some(seed_b))
            })?;
            let mut rows = Vec::new();
            for &size in &sizes {
                let work = m.phase(&format!("prime_reps_{size}"), || workload(size, devices, seed_b))?;
                let row = m.phase(&format!("compute_{size}"), || {
                    time_compute(&params, &secrets, &work, !no_trapdoor, threads)
                })?;
                rows.push(row);
            }
            m.seed = Some(seed);
            emit(&mut m, out.as_deref(), &compute_csv(&rows))?;
            finish(m)
        }
        BenchCommand::Check {
            bits,
            iters,
            entries,
            revoked,
            seed,
            out,
        } => {
            if iters < 100 {
                return Err(usage("--iters must be at least 100"));
            }
            let seed = resolve_seed(seed).unwrap_or_else(|| "accrl-bench".into());
            let mut m = RunManifest::new("bench check");
            let rows = m.phase("check", || check_bench(bits, entries, revoked, iters, seed_bytes(&seed)))?;
            m.seed = Some(seed);
            emit(&mut m, out.as_deref(), &check_csv(&rows))?;
            finish(m)
        }
    }
}
