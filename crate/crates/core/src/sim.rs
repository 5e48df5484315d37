//! Discrete-event simulation of revocation-data distribution over a
//! multi-hop mesh.
//!
//! Nodes form a routing tree rooted at a gateway. Every tree link carries at
//! most one frame at a time; a frame occupies its link for the transmission
//! time plus the per-hop latency, is lost independently with `loss_prob`, and
//! is retried on the same hop up to `max_retries` times. Intermediate nodes
//! store and forward whole frames.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{method_bytes, Method};
use crate::crl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("{0} is not a perfect square")]
    NotASquare(usize),
    #[error("a topology needs at least one node")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshTopology {
    pub node_count: usize,
    /// `(columns, rows)`; a line of `n` nodes is `(n, 1)`.
    pub dims: (usize, usize),
    pub gateway: usize,
    pub adjacency: Vec<Vec<usize>>,
    /// Parent in the shortest-path tree; `None` for the gateway.
    pub parent: Vec<Option<usize>>,
    pub depth: Vec<u32>,
    pub children: Vec<Vec<usize>>,
}

impl MeshTopology {
    fn from_adjacency(dims: (usize, usize), gateway: usize, adjacency: Vec<Vec<usize>>) -> Self {
        let n = adjacency.len();
        let mut parent = vec![None; n];
        let mut depth = vec![u32::MAX; n];
        let mut children = vec![Vec::new(); n];
        depth[gateway] = 0;
        let mut queue = VecDeque::from([gateway]);
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if depth[w] == u32::MAX {
                    depth[w] = depth[v] + 1;
                    parent[w] = Some(v);
                    children[v].push(w);
                    queue.push_back(w);
                }
            }
        }
        assert!(depth.iter().all(|&d| d != u32::MAX), "topology must be connected");
        Self {
            node_count: n,
            dims,
            gateway,
            adjacency,
            parent,
            depth,
            children,
        }
    }

    /// Nodes that receive a payload: everything except the gateway.
    pub fn receivers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count).filter(move |&v| v != self.gateway)
    }

    /// Mean hop depth over the receivers, 0 for a lone gateway.
    pub fn mean_depth(&self) -> f64 {
        let n = self.node_count - 1;
        if n == 0 {
            return 0.0;
        }
        self.receivers().map(|v| f64::from(self.depth[v])).sum::<f64>() / n as f64
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Child of `from` on the tree path towards `dest`.
    fn next_hop(&self, from: usize, dest: usize) -> usize {
        let mut v = dest;
        loop {
            let p = self.parent[v].expect("dest lies below from");
            if p == from {
                return v;
            }
            v = p;
        }
    }
}

/// `√n × √n` grid with 8-neighbour links and the gateway in a corner.
pub fn build_grid(n: usize) -> Result<MeshTopology, TopologyError> {
    if n == 0 {
        return Err(TopologyError::Empty);
    }
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(TopologyError::NotASquare(n));
    }
    let id = |r: usize, c: usize| r * side + c;
    let mut adjacency = vec![Vec::new(); n];
    for r in 0..side {
        for c in 0..side {
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= side as i64 || cc >= side as i64 {
                        continue;
                    }
                    adjacency[id(r, c)].push(id(rr as usize, cc as usize));
                }
            }
        }
    }
    Ok(MeshTopology::from_adjacency((side, side), 0, adjacency))
}

/// Chain of `n` nodes with the gateway at one end.
pub fn build_line(n: usize) -> Result<MeshTopology, TopologyError> {
    if n == 0 {
        return Err(TopologyError::Empty);
    }
    let adjacency = (0..n)
        .map(|i| {
            let mut v = Vec::new();
            if i > 0 {
                v.push(i - 1);
            }
            if i + 1 < n {
                v.push(i + 1);
            }
            v
        })
        .collect();
    Ok(MeshTopology::from_adjacency((n, 1), 0, adjacency))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Link rate in bits per second.
    pub link_rate: f64,
    /// Maximum payload bytes per frame.
    pub frame_payload: usize,
    /// Seconds a link stays occupied after each transmission.
    pub per_hop_latency: f64,
    pub loss_prob: f64,
    pub max_retries: u32,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            link_rate: 6e6,
            frame_payload: 1500,
            per_hop_latency: 0.5e-3,
            loss_prob: 0.01,
            max_retries: 7,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("loss probability {0} outside [0, 1)")]
    LossProb(f64),
    #[error("frame payload {0} below 64 bytes")]
    FramePayload(usize),
    #[error("link rate must be positive")]
    LinkRate,
    #[error("latency must be non-negative")]
    Latency,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.loss_prob) {
            return Err(ConfigError::LossProb(self.loss_prob));
        }
        if self.frame_payload < 64 {
            return Err(ConfigError::FramePayload(self.frame_payload));
        }
        if !(self.link_rate > 0.0) {
            return Err(ConfigError::LinkRate);
        }
        if !(self.per_hop_latency >= 0.0) {
            return Err(ConfigError::Latency);
        }
        Ok(())
    }

    fn frame_time(&self, bytes: usize) -> f64 {
        bytes as f64 * 8.0 / self.link_rate + self.per_hop_latency
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Time the last receiver finished, in seconds.
    pub completion_time: f64,
    /// Frame transmissions on all links, retransmissions included.
    pub total_frames: u64,
    pub retransmissions: u64,
    /// Payload bytes that reached receivers.
    pub bytes_delivered: u64,
    /// Receivers that missed at least one frame after retries ran out.
    pub undeliverable: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    /// Final destination for unicast; `None` when flooded to the subtree.
    dest: Option<usize>,
    bytes: usize,
}

struct Event {
    time: f64,
    seq: u64,
    link_child: usize,
    frame: Frame,
    delivered: bool,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Min-heap on (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Per-link state, indexed by the child end of the tree link.
#[derive(Default)]
struct Link {
    queue: VecDeque<Frame>,
    busy: bool,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    links: Vec<Link>,
    heap: BinaryHeap<Event>,
    seq: u64,
    total_frames: u64,
    retransmissions: u64,
}

impl Engine<'_> {
    fn enqueue(&mut self, now: f64, child: usize, frame: Frame) {
        self.links[child].queue.push_back(frame);
        if !self.links[child].busy {
            self.start(now, child);
        }
    }

    fn start(&mut self, now: f64, child: usize) {
        let Some(frame) = self.links[child].queue.pop_front() else {
            self.links[child].busy = false;
            return;
        };
        self.links[child].busy = true;
        let mut attempts = 1u32;
        let mut delivered = true;
        while self.cfg.loss_prob > 0.0 && self.rng.gen::<f64>() < self.cfg.loss_prob {
            if attempts > self.cfg.max_retries {
                delivered = false;
                break;
            }
            attempts += 1;
        }
        self.total_frames += u64::from(attempts);
        self.retransmissions += u64::from(attempts - 1);
        let done = now + f64::from(attempts) * self.cfg.frame_time(frame.bytes);
        self.seq += 1;
        self.heap.push(Event {
            time: done,
            seq: self.seq,
            link_child: child,
            frame,
            delivered,
        });
    }
}

/// Splits `bytes` into frame sizes of at most `mtu`.
fn frames_of(bytes: usize, mtu: usize) -> impl Iterator<Item = usize> {
    let full = bytes / mtu;
    let rest = bytes % mtu;
    std::iter::repeat(mtu)
        .take(full)
        .chain((rest > 0).then_some(rest))
}

/// Simulates delivering `payload_bytes_per_node` to every receiver.
///
/// With `shared` the payload is one blob flooded down the tree, each node
/// forwarding every frame to all of its children. Otherwise every receiver
/// gets its own unicast copy, sent farthest receivers first.
pub fn simulate_distribution(
    topo: &MeshTopology,
    config: &SimConfig,
    payload_bytes_per_node: usize,
    shared: bool,
) -> SimResult {
    config.validate().expect("valid SimConfig");
    assert!(payload_bytes_per_node > 0, "payload must be non-empty");
    let n = topo.node_count;
    let frames: Vec<usize> = frames_of(payload_bytes_per_node, config.frame_payload).collect();
    let mut eng = Engine {
        cfg: config,
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        links: (0..n).map(|_| Link::default()).collect(),
        heap: BinaryHeap::new(),
        seq: 0,
        total_frames: 0,
        retransmissions: 0,
    };

    let gw = topo.gateway;
    if shared {
        for &bytes in &frames {
            for &c in &topo.children[gw] {
                eng.enqueue(0.0, c, Frame { dest: None, bytes });
            }
        }
    } else {
        let mut order: Vec<usize> = topo.receivers().collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(topo.depth[v]), v));
        for dest in order {
            let hop = topo.next_hop(gw, dest);
            for &bytes in &frames {
                eng.enqueue(0.0, hop, Frame { dest: Some(dest), bytes });
            }
        }
    }

    let mut received = vec![0usize; n];
    let mut finished = vec![0.0f64; n];
    let mut failed = vec![false; n];
    while let Some(ev) = eng.heap.pop() {
        let node = ev.link_child;
        if ev.delivered {
            match ev.frame.dest {
                None => {
                    received[node] += ev.frame.bytes;
                    finished[node] = ev.time;
                    for &c in &topo.children[node] {
                        eng.enqueue(ev.time, c, ev.frame);
                    }
                }
                Some(dest) if dest == node => {
                    received[node] += ev.frame.bytes;
                    finished[node] = ev.time;
                }
                Some(dest) => {
                    let hop = topo.next_hop(node, dest);
                    eng.enqueue(ev.time, hop, ev.frame);
                }
            }
        } else {
            match ev.frame.dest {
                Some(dest) => failed[dest] = true,
                None => mark_subtree(topo, node, &mut failed),
            }
        }
        eng.start(ev.time, node);
    }

    let undeliverable: Vec<usize> = topo.receivers().filter(|&v| failed[v]).collect();
    SimResult {
        completion_time: topo.receivers().map(|v| finished[v]).fold(0.0, f64::max),
        total_frames: eng.total_frames,
        retransmissions: eng.retransmissions,
        bytes_delivered: received.iter().map(|&b| b as u64).sum(),
        undeliverable,
    }
}

fn mark_subtree(topo: &MeshTopology, root: usize, failed: &mut [bool]) {
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        failed[v] = true;
        stack.extend(&topo.children[v]);
    }
}

// ---- sweeps ------------------------------------------------------------------

/// How the two baselines reach the meters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineDelivery {
    /// One copy per meter, like the per-device accumulator payloads.
    Unicast,
    /// One blob flooded down the routing tree.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub k_bits: u32,
    pub bloom_fpr: f64,
    pub baseline_delivery: BaselineDelivery,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            k_bits: 2048,
            bloom_fpr: 0.01,
            baseline_delivery: BaselineDelivery::Unicast,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub nodes: usize,
    pub crl_entries: usize,
    pub payload_bytes: usize,
    pub result: SimResult,
}

fn run_row(
    method: Method,
    entries: usize,
    payload_bytes: usize,
    topo: &MeshTopology,
    config: &SimConfig,
    opts: &SweepOptions,
) -> SweepRow {
    let shared = method != Method::Accumulator && opts.baseline_delivery == BaselineDelivery::Shared;
    SweepRow {
        method,
        nodes: topo.node_count,
        crl_entries: entries,
        payload_bytes,
        result: simulate_distribution(topo, config, payload_bytes, shared),
    }
}

/// Full distribution of each method at each CRL size.
pub fn sweep(
    methods: &[Method],
    crl_sizes: &[usize],
    topo: &MeshTopology,
    config: &SimConfig,
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    let jobs: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| crl_sizes.iter().map(move |&s| (m, s)))
        .collect();
    jobs.par_iter()
        .map(|&(m, s)| {
            let bytes = method_bytes(m, s, opts.k_bits, opts.bloom_fpr);
            run_row(m, s, bytes, topo, config, opts)
        })
        .collect()
}

/// Bytes each method ships when `delta` entries are revoked on top of a base
/// of `base`: a fresh proof, the delta CRL, or a rebuilt Bloom filter.
pub fn update_payload_bytes(method: Method, base: usize, delta: usize, opts: &SweepOptions) -> usize {
    match method {
        Method::Accumulator => method_bytes(method, base + delta, opts.k_bits, opts.bloom_fpr),
        Method::FullCrl => crl::encoded_len(delta),
        Method::Bloom => method_bytes(method, base + delta, opts.k_bits, opts.bloom_fpr),
    }
}

/// Update distribution after a delta; `crl_entries` in the rows is the delta
/// size.
pub fn update_sweep(
    methods: &[Method],
    base: usize,
    deltas: &[usize],
    topo: &MeshTopology,
    config: &SimConfig,
    opts: &SweepOptions,
) -> Vec<SweepRow> {
    let jobs: Vec<(Method, usize)> = methods
        .iter()
        .flat_map(|&m| deltas.iter().map(move |&d| (m, d)))
        .collect();
    jobs.par_iter()
        .map(|&(m, d)| run_row(m, d, update_payload_bytes(m, base, d, opts), topo, config, opts))
        .collect()
}

pub const SIM_CSV_HEADER: &str = "method,nodes,crl_entries,payload_bytes,completion_s,frames,retx";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SIM_CSV_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.6},{},{}",
            r.method,
            r.nodes,
            r.crl_entries,
            r.payload_bytes,
            r.result.completion_time,
            r.result.total_frames,
            r.result.retransmissions
        )
        .unwrap();
    }
    out
}
