use accrl_core::baselines::Method;
use accrl_core::sim::*;
use proptest::prelude::*;

fn lossless() -> SimConfig {
    SimConfig {
        loss_prob: 0.0,
        ..SimConfig::default()
    }
}

#[test]
fn same_seed_same_result() {
    let topo = build_grid(49).unwrap();
    let cfg = SimConfig::default();
    let a = simulate_distribution(&topo, &cfg, 40_000, false);
    let b = simulate_distribution(&topo, &cfg, 40_000, false);
    assert_eq!(a, b);
    let c = simulate_distribution(&topo, &SimConfig { rng_seed: 9, ..cfg }, 40_000, false);
    assert_ne!(a.retransmissions, 0);
    assert_ne!((a.total_frames, a.completion_time), (c.total_frames, c.completion_time));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_receiver_gets_every_byte(
        side in 1usize..7,
        payload in 1usize..6000,
        shared in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let topo = build_grid(side * side).unwrap();
        let cfg = SimConfig { loss_prob: 0.05, rng_seed: seed, ..SimConfig::default() };
        let r = simulate_distribution(&topo, &cfg, payload, shared);
        prop_assert!(r.undeliverable.is_empty());
        prop_assert_eq!(r.bytes_delivered, ((topo.node_count - 1) * payload) as u64);
        prop_assert!(r.total_frames >= r.retransmissions);
    }

    #[test]
    fn lossless_line_matches_pipeline_bound(hops in 1usize..12, frames in 1usize..20) {
        let topo = build_line(hops + 1).unwrap();
        let cfg = lossless();
        let r = simulate_distribution(&topo, &cfg, frames * cfg.frame_payload, true);
        let t = cfg.frame_payload as f64 * 8.0 / cfg.link_rate + cfg.per_hop_latency;
        let bound = (frames + hops - 1) as f64 * t;
        prop_assert!((r.completion_time - bound).abs() <= t, "{} vs {}", r.completion_time, bound);
        prop_assert_eq!(r.retransmissions, 0);
        prop_assert_eq!(r.total_frames, (frames * hops) as u64);
    }
}

#[test]
fn accumulator_delivery_is_flat_in_crl_size() {
    let topo = build_grid(81).unwrap();
    let rows = sweep(&Method::ALL, &[1000, 10_000, 30_000], &topo, &SimConfig::default(), &SweepOptions::default());
    let acc: Vec<_> = rows.iter().filter(|r| r.method == Method::Accumulator).collect();
    assert!(acc.windows(2).all(|w| w[0].result == w[1].result));
    for size in [1000, 10_000, 30_000] {
        let t = |m| rows.iter().find(|r| r.method == m && r.crl_entries == size).unwrap().result.completion_time;
        assert!(t(Method::Accumulator) < t(Method::Bloom));
        assert!(t(Method::Bloom) < t(Method::FullCrl));
    }
    let csv = sweep_csv(&rows);
    assert!(csv.starts_with("method,nodes,crl_entries,payload_bytes,completion_s,frames,retx\n"));
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn hopeless_links_report_undeliverable_nodes() {
    let topo = build_line(6).unwrap();
    let cfg = SimConfig {
        loss_prob: 0.95,
        max_retries: 1,
        ..SimConfig::default()
    };
    let r = simulate_distribution(&topo, &cfg, 20_000, false);
    assert!(!r.undeliverable.is_empty());
    assert!(r.bytes_delivered < 5 * 20_000);
}

#[test]
fn bad_inputs_are_rejected() {
    assert_eq!(build_grid(50).unwrap_err(), TopologyError::NotASquare(50));
    assert_eq!(build_line(0).unwrap_err(), TopologyError::Empty);
    let bad = SimConfig {
        loss_prob: 1.0,
        ..SimConfig::default()
    };
    assert_eq!(bad.validate().unwrap_err(), ConfigError::LossProb(1.0));
    assert!(SimConfig { frame_payload: 10, ..SimConfig::default() }.validate().is_err());
}

#[test]
fn update_rows_use_delta_sizes() {
    let topo = build_grid(25).unwrap();
    let opts = SweepOptions::default();
    let rows = update_sweep(&Method::ALL, 30_000, &[1000], &topo, &lossless(), &opts);
    assert!(rows.iter().all(|r| r.crl_entries == 1000));
    let bytes = |m| rows.iter().find(|r| r.method == m).unwrap().payload_bytes;
    assert_eq!(bytes(Method::Accumulator), 924);
    assert_eq!(bytes(Method::FullCrl), 60_098);
    assert_eq!(bytes(Method::Bloom), update_payload_bytes(Method::Bloom, 30_000, 1000, &opts));
}
