mod common;

use accrl_core::accumulator::AccumulatorValue;
use accrl_core::protocol::{verify_peer, FailedStep};

#[test]
fn every_case_stops_at_its_step() {
    let w = common::world(40);
    assert!(w.cases.len() >= 100, "{}", w.cases.len());
    for c in &w.cases {
        let out = verify_peer(&c.req, &w.acc, &w.params, &w.manager);
        assert_eq!(out.failed_step, c.expected, "{}", c.name);
        assert_eq!(out.accepted, c.expected.is_none(), "{}", c.name);
    }
}

#[test]
fn only_honest_requests_are_accepted() {
    let w = common::world(0);
    let accepted: Vec<_> = w
        .cases
        .iter()
        .filter(|c| verify_peer(&c.req, &w.acc, &w.params, &w.manager).accepted)
        .map(|c| c.name.as_str())
        .collect();
    assert_eq!(accepted.len(), 6);
    assert!(accepted.iter().all(|n| n.starts_with("honest")));
}

#[test]
fn local_accumulator_behind_the_proof_rejects() {
    let w = common::world(0);
    let behind = AccumulatorValue {
        a: w.acc.a.clone(),
        epoch: w.acc.epoch - 1,
    };
    let honest = &w.cases[0];
    assert_eq!(
        verify_peer(&honest.req, &behind, &w.params, &w.manager).failed_step,
        Some(FailedStep::EpochMismatch)
    );
}
