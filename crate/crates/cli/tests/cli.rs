use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn manifest(&self) -> PathBuf {
        self.path("manifest.jsonl")
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_accrl"))
            .args(args)
            .current_dir(self.dir.path())
            .env("ACCRL_MANIFEST", self.manifest())
            .env_remove("ACCRL_SEED")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    /// CRL, devices, state and payload at 1024 bits.
    fn deploy(&self) {
        self.ok(&["gen-crl", "--count", "50", "--kind", "full", "--seed", "crl", "--out", "full.acrl"]);
        self.ok(&["gen-devices", "--count", "4", "--seed", "dev", "--out", "devices.csv"]);
        self.ok(&[
            "setup", "--bits", "1024", "--mode", "test", "--crl", "full.acrl", "--devices", "devices.csv",
            "--out-state", "mgr.state", "--out-payload", "p0.apay", "--seed", "mgr",
        ]);
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn manifest_lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn honest_check_is_accepted() {
    let s = Sandbox::new();
    s.deploy();
    for i in ["0", "3"] {
        assert_eq!(s.ok(&["check", "--payload", "p0.apay", "--proof-index", i]).trim(), "accepted");
    }
}

#[test]
fn tampering_lands_on_the_targeted_step() {
    let s = Sandbox::new();
    s.deploy();
    let cases = [
        ("nw2", "RevocationCheck"),
        ("nw1", "RevocationCheck"),
        ("x", "RevocationCheck"),
        ("epoch", "EpochMismatch"),
        ("width", "LengthCheck"),
        ("serial", "SerialMismatch"),
        ("proof-sig", "ProofSig"),
        ("request-sig", "RequestSig"),
    ];
    for (tamper, step) in cases {
        let out = s.run(&["check", "--payload", "p0.apay", "--proof-index", "1", "--tamper", tamper, "--state", "mgr.state"]);
        assert_eq!(code(&out), 1, "{tamper}");
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("failed_step={step}"));
    }
    // Without the manager state the tampered proof keeps a stale signature.
    let out = s.run(&["check", "--payload", "p0.apay", "--proof-index", "1", "--tamper", "nw2"]);
    assert_eq!(code(&out), 1);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "failed_step=ProofSig");
}

#[test]
fn update_advances_and_rejects_replayed_delta() {
    let s = Sandbox::new();
    s.deploy();
    s.ok(&["gen-crl", "--count", "5", "--kind", "delta", "--seed", "d1", "--out", "d1.acrl"]);
    s.ok(&["update", "--state", "mgr.state", "--delta", "d1.acrl", "--out-payload", "p1.apay"]);
    assert_eq!(s.ok(&["check", "--payload", "p1.apay", "--proof-index", "2"]).trim(), "accepted");
    let again = s.run(&["update", "--state", "mgr.state", "--delta", "d1.acrl", "--out-payload", "p2.apay"]);
    assert_eq!(code(&again), 1);

    let devices = std::fs::read_to_string(s.path("devices.csv")).unwrap();
    let serial = devices.lines().find(|l| !l.starts_with("serial")).unwrap().split(',').next().unwrap();
    let proof = s.ok(&["prove", "--state", "mgr.state", "--serial", serial]);
    assert_eq!(proof.trim().len(), 2 * 412);
}

#[test]
fn usage_and_format_errors_have_distinct_codes() {
    let s = Sandbox::new();
    assert_eq!(code(&s.run(&["gen-crl", "--count", "3", "--kind", "full", "--out", "x.acrl"])), 2);
    assert_eq!(code(&s.run(&["no-such-command"])), 2);
    std::fs::write(s.path("junk.apay"), b"definitely not a payload").unwrap();
    assert_eq!(code(&s.run(&["check", "--payload", "junk.apay", "--proof-index", "0"])), 3);
    assert_eq!(code(&s.run(&["check", "--payload", "missing.apay", "--proof-index", "0"])), 3);
}

#[test]
fn same_seeds_reproduce_artifacts() {
    let a = Sandbox::new();
    let b = Sandbox::new();
    a.deploy();
    b.deploy();
    let (ma, mb) = (manifest_lines(&a.manifest()), manifest_lines(&b.manifest()));
    assert_eq!(ma.len(), 3);
    for (x, y) in ma.iter().zip(&mb) {
        assert_eq!(x["command"], y["command"]);
        assert_eq!(x["outputs"], y["outputs"]);
    }
    for name in ["full.acrl", "devices.csv", "p0.apay"] {
        assert_eq!(std::fs::read(a.path(name)).unwrap(), std::fs::read(b.path(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let s = Sandbox::new();
    let run = |seed_env: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_accrl"))
            .args(["gen-crl", "--count", "3", "--kind", "full", "--seed", "flag", "--out", out])
            .current_dir(s.dir.path())
            .env("ACCRL_MANIFEST", s.manifest())
            .env("ACCRL_SEED", seed_env)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(s.path(out)).unwrap()
    };
    s.ok(&["gen-crl", "--count", "3", "--kind", "full", "--seed", "env", "--out", "plain.acrl"]);
    assert_eq!(run("env", "a.acrl"), std::fs::read(s.path("plain.acrl")).unwrap());
}

#[test]
fn csv_reports_have_headers() {
    let s = Sandbox::new();
    let storage = s.ok(&["storage", "--entries", "30000", "--bits", "2048"]);
    assert_eq!(
        storage,
        "method,entries,bytes\naccumulator,30000,924\nbloom,30000,46366\ncrl,30000,1800098\n"
    );
    let sim = s.ok(&["simulate", "--nodes", "25", "--crl-sizes", "1000", "--seed", "1"]);
    assert!(sim.starts_with("method,nodes,crl_entries,payload_bytes,completion_s,frames,retx\n"));
    assert_eq!(sim.lines().count(), 4);
    let check = s.ok(&["bench", "check", "--bits", "1024", "--iters", "100", "--entries", "500", "--revoked", "5", "--seed", "b"]);
    assert!(check.starts_with("method,bits,entries,iterations,mean_ms\n"));
    let compute = s.ok(&[
        "bench", "compute", "--bits", "1024", "--sizes", "5", "--devices", "2", "--threads", "1", "--seed", "b",
    ]);
    assert!(compute.starts_with("bits,size,trapdoor,threads,devices,prime_rep_ms,accumulate_ms,proof_ms\n"));
}
