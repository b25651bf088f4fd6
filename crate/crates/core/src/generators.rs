//! Seeded history and trace generators for testing and benchmarking.
//!
//! Three sources: a witness-based generator whose construction guarantees a
//! staleness bound, a sloppy-quorum replicated-register simulator with no
//! guarantee at all (for exploration and fuzzing), and small random
//! anomaly-free histories for differential corpora. All are deterministic
//! per seed.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::history::{History, OpKind, Operation, Time, Trace, TraceRecord};

/// Configuration for the witnessed generator.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub seed: u64,
    pub ops: usize,
    /// Probability that an operation is a write (the first op always is).
    pub writes_fraction: f64,
    /// Every read returns one of this many freshest writes at its commit.
    pub staleness_k: u32,
    /// Maximum ticks an interval stretches back before its commit point.
    pub max_back: u64,
    /// Maximum ticks an interval stretches forward after its commit point.
    pub max_forward: u64,
    pub key: String,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            ops: 100,
            writes_fraction: 0.5,
            staleness_k: 2,
            max_back: 1500,
            max_forward: 1500,
            key: "r0".to_string(),
        }
    }
}

/// Spacing between consecutive commit points. Stretches larger than this
/// make neighboring operations overlap.
const COMMIT_GAP: u64 = 1000;

/// Generates a history that is k-atomic by construction.
///
/// Commit points are laid out left to right; each read's dictating write is
/// drawn from the `staleness_k` most recent writes at its commit point, and
/// each interval is a random stretch around its commit point. The
/// construction order is therefore itself a valid k-atomic total order. All
/// endpoints are distinct.
pub fn gen_witnessed(cfg: &GenConfig) -> History {
    assert!(cfg.staleness_k >= 1, "staleness_k must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used: HashSet<u64> = HashSet::with_capacity(cfg.ops * 2);
    let max_back = cfg.max_back.max(1);
    let max_forward = cfg.max_forward.max(1);

    let mut ops: Vec<Operation> = Vec::with_capacity(cfg.ops);
    let mut writes_so_far: Vec<usize> = Vec::new();

    for i in 0..cfg.ops {
        let commit = (i as u64 + 1) * COMMIT_GAP;
        let is_write = i == 0 || rng.random::<f64>() < cfg.writes_fraction;

        let back = rng.random_range(1..=max_back.min(commit - 1));
        let start = claim_downward(&mut used, commit - back, commit);
        let fwd = rng.random_range(1..=max_forward);
        let finish = claim_upward(&mut used, commit + fwd);

        if is_write {
            let widx = writes_so_far.len();
            writes_so_far.push(widx);
            ops.push(Operation {
                id: crate::history::OpId::new(format!("op{i}")),
                kind: OpKind::Write,
                value: crate::history::Value::new(format!("w{widx}")),
                start: Time(start),
                finish: Time(finish),
            });
        } else {
            let window = (cfg.staleness_k as usize).min(writes_so_far.len());
            let pick = writes_so_far.len() - 1 - rng.random_range(0..window);
            ops.push(Operation {
                id: crate::history::OpId::new(format!("op{i}")),
                kind: OpKind::Read,
                value: crate::history::Value::new(format!("w{pick}")),
                start: Time(start),
                finish: Time(finish),
            });
        }
    }
    History::new(cfg.key.clone(), ops)
}

/// Claims a free tick at or below `want`, staying strictly below `ceiling`
/// and above zero.
fn claim_downward(used: &mut HashSet<u64>, want: u64, ceiling: u64) -> u64 {
    let mut t = want.min(ceiling - 1).max(1);
    while used.contains(&t) {
        if t == 1 {
            // Walk upward instead; the region below the commit is full.
            t = want + 1;
            while used.contains(&t) {
                t += 1;
                assert!(t < ceiling, "no free tick below commit point");
            }
            break;
        }
        t -= 1;
    }
    used.insert(t);
    t
}

/// Claims a free tick at or above `want`.
fn claim_upward(used: &mut HashSet<u64>, want: u64) -> u64 {
    let mut t = want;
    while used.contains(&t) {
        t += 1;
    }
    used.insert(t);
    t
}

/// Configuration for the sloppy-quorum simulator.
#[derive(Clone, Debug)]
pub struct QuorumConfig {
    pub seed: u64,
    pub replicas: usize,
    pub write_quorum: usize,
    pub read_quorum: usize,
    pub clients: usize,
    pub ops: usize,
    /// Inclusive per-message latency range.
    pub latency: (u64, u64),
    pub key: String,
}

impl Default for QuorumConfig {
    fn default() -> Self {
        QuorumConfig {
            seed: 0,
            replicas: 3,
            write_quorum: 2,
            read_quorum: 2,
            clients: 2,
            ops: 20,
            latency: (1, 20),
            key: "r0".to_string(),
        }
    }
}

#[derive(Debug)]
enum Event {
    /// A client considers issuing its next operation.
    Issue { client: usize },
    /// A write message reaches a replica.
    Deliver { replica: usize, version: u64 },
    /// A write acknowledgment reaches the issuing client.
    WriteAck { client: usize, op: usize },
    /// A read request reaches a replica; the reply takes `reply_delay`.
    ReadArrive { replica: usize, client: usize, op: usize, reply_delay: u64 },
    /// A read reply reaches the issuing client.
    ReadReply { client: usize, op: usize, version: u64 },
}

struct PendingOp {
    op_index: usize,
    kind: OpKind,
    version: u64,
    responses: usize,
    needed: usize,
    best_version: u64,
}

struct OpRecord {
    id: String,
    kind: OpKind,
    value: String,
    start_marker: (u64, u64),
    finish_marker: (u64, u64),
}

/// Discrete-event simulation of a replicated register behind sloppy quorums.
///
/// Writes carry monotonically increasing versions and complete after
/// `write_quorum` acks; reads return the highest version among
/// `read_quorum` replica responses. Quorums need not intersect, so reads may
/// be stale; there is no staleness guarantee here. Every replica
/// starts with a synthetic version-0 write at time zero, so a read that
/// reaches only untouched replicas still has a dictating write. Recorded
/// start/finish ticks are the rank of each event in the simulation, which
/// keeps all endpoints distinct.
pub fn simulate_quorum(cfg: &QuorumConfig) -> Trace {
    assert!(cfg.replicas >= 1, "need at least one replica");
    assert!(
        (1..=cfg.replicas).contains(&cfg.write_quorum)
            && (1..=cfg.replicas).contains(&cfg.read_quorum),
        "quorums must be between 1 and the replica count"
    );
    assert!(cfg.clients >= 1, "need at least one client");
    assert!(cfg.latency.0 >= 1 && cfg.latency.0 <= cfg.latency.1, "bad latency range");

    if cfg.ops == 0 {
        return Trace::default();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lat = |rng: &mut ChaCha8Rng| rng.random_range(cfg.latency.0..=cfg.latency.1);

    // Heap keyed by (time, seq); seq breaks ties deterministically.
    let mut heap: BinaryHeap<Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let mut payloads: Vec<Event> = Vec::new();
    let mut seq: u64 = 2; // (0,0) and (0,1) are the synthetic initial write
    let schedule = |heap: &mut BinaryHeap<_>, payloads: &mut Vec<Event>, seq: &mut u64, time: u64, ev: Event| {
        heap.push(Reverse((time, *seq, payloads.len())));
        payloads.push(ev);
        *seq += 1;
    };

    let mut replica_version = vec![0u64; cfg.replicas];
    let mut next_version: u64 = 1;
    let mut issued: usize = 0;
    let mut pending: Vec<Option<PendingOp>> = (0..cfg.clients).map(|_| None).collect();
    let mut per_client_count = vec![0usize; cfg.clients];

    let mut records: Vec<OpRecord> = vec![OpRecord {
        id: "init".to_string(),
        kind: OpKind::Write,
        value: "v0".to_string(),
        start_marker: (0, 0),
        finish_marker: (0, 1),
    }];

    for c in 0..cfg.clients {
        schedule(&mut heap, &mut payloads, &mut seq, 1 + c as u64, Event::Issue { client: c });
    }

    while let Some(Reverse((time, sq, idx))) = heap.pop() {
        let marker = (time, sq);
        // Payloads are taken by index; replace with a tombstone.
        let event = std::mem::replace(&mut payloads[idx], Event::Issue { client: usize::MAX });
        match event {
            Event::Issue { client } => {
                if client == usize::MAX || pending[client].is_some() || issued >= cfg.ops {
                    continue;
                }
                issued += 1;
                let op_index = records.len();
                let is_write = rng.random::<f64>() < 0.5;
                if is_write {
                    let version = next_version;
                    next_version += 1;
                    for replica in 0..cfg.replicas {
                        let d1 = lat(&mut rng);
                        let d2 = lat(&mut rng);
                        schedule(&mut heap, &mut payloads, &mut seq, time + d1, Event::Deliver { replica, version });
                        schedule(
                            &mut heap,
                            &mut payloads,
                            &mut seq,
                            time + d1 + d2,
                            Event::WriteAck { client, op: op_index },
                        );
                    }
                    pending[client] = Some(PendingOp {
                        op_index,
                        kind: OpKind::Write,
                        version,
                        responses: 0,
                        needed: cfg.write_quorum,
                        best_version: 0,
                    });
                } else {
                    let picks = sample(&mut rng, cfg.replicas, cfg.read_quorum);
                    for replica in picks {
                        let d1 = lat(&mut rng);
                        let d2 = lat(&mut rng);
                        schedule(
                            &mut heap,
                            &mut payloads,
                            &mut seq,
                            time + d1,
                            Event::ReadArrive { replica, client, op: op_index, reply_delay: d2 },
                        );
                    }
                    pending[client] = Some(PendingOp {
                        op_index,
                        kind: OpKind::Read,
                        version: 0,
                        responses: 0,
                        needed: cfg.read_quorum,
                        best_version: 0,
                    });
                }
                per_client_count[client] += 1;
                records.push(OpRecord {
                    id: format!("c{client}op{}", per_client_count[client]),
                    kind: if is_write { OpKind::Write } else { OpKind::Read },
                    value: String::new(),
                    start_marker: marker,
                    finish_marker: marker, // patched at completion
                });
            }
            Event::Deliver { replica, version } => {
                replica_version[replica] = replica_version[replica].max(version);
            }
            Event::WriteAck { client, op } => {
                let Some(p) = pending[client].as_mut() else { continue };
                if p.kind != OpKind::Write || p.op_index != op {
                    continue; // stale ack for an already-completed write
                }
                p.responses += 1;
                if p.responses == p.needed {
                    records[op].value = format!("v{}", p.version);
                    records[op].finish_marker = marker;
                    pending[client] = None;
                    schedule(&mut heap, &mut payloads, &mut seq, time + 1, Event::Issue { client });
                }
            }
            Event::ReadArrive { replica, client, op, reply_delay } => {
                let version = replica_version[replica];
                schedule(
                    &mut heap,
                    &mut payloads,
                    &mut seq,
                    time + reply_delay,
                    Event::ReadReply { client, op, version },
                );
            }
            Event::ReadReply { client, op, version } => {
                let Some(p) = pending[client].as_mut() else { continue };
                if p.kind != OpKind::Read || p.op_index != op {
                    continue;
                }
                p.responses += 1;
                p.best_version = p.best_version.max(version);
                if p.responses == p.needed {
                    records[op].value = format!("v{}", p.best_version);
                    records[op].finish_marker = marker;
                    pending[client] = None;
                    schedule(&mut heap, &mut payloads, &mut seq, time + 1, Event::Issue { client });
                }
            }
        }
    }

    // Remap (time, seq) markers to their rank, giving distinct integer ticks.
    let mut markers: Vec<(u64, u64)> = records
        .iter()
        .flat_map(|r| [r.start_marker, r.finish_marker])
        .collect();
    markers.sort_unstable();
    markers.dedup();
    let tick = |m: (u64, u64)| -> u64 { markers.binary_search(&m).expect("known marker") as u64 };

    let trace_records = records
        .into_iter()
        .map(|r| TraceRecord {
            key: cfg.key.clone(),
            op: Operation {
                id: crate::history::OpId::new(r.id),
                kind: r.kind,
                value: crate::history::Value::new(r.value),
                start: Time(tick(r.start_marker)),
                finish: Time(tick(r.finish_marker)),
            },
            weight: None,
        })
        .collect();
    Trace { records: trace_records }
}

/// Generates a small random anomaly-free history: random distinct interval
/// endpoints, random kinds (the earliest operation is always a write), and
/// each read dictated by a uniformly chosen earlier-starting write.
pub fn gen_random_small(seed: u64, n: usize) -> History {
    assert!(n <= 12, "gen_random_small is for small differential corpora");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let span = (8 * n.max(1)) as u64;
    let mut used: HashSet<u64> = HashSet::with_capacity(2 * n);
    let mut points: Vec<u64> = Vec::with_capacity(2 * n);
    while points.len() < 2 * n {
        let t = rng.random_range(0..span);
        if used.insert(t) {
            points.push(t);
        }
    }

    // Random pairing of endpoints into intervals.
    for i in (1..points.len()).rev() {
        let j = rng.random_range(0..=i);
        points.swap(i, j);
    }
    let mut intervals: Vec<(u64, u64)> = points
        .chunks_exact(2)
        .map(|p| (p[0].min(p[1]), p[0].max(p[1])))
        .collect();
    intervals.sort_unstable();

    let mut ops: Vec<Operation> = Vec::with_capacity(n);
    let mut writes: Vec<usize> = Vec::new();
    for (i, (start, finish)) in intervals.into_iter().enumerate() {
        let is_write = i == 0 || rng.random::<f64>() < 0.5;
        if is_write {
            let widx = writes.len();
            writes.push(widx);
            ops.push(Operation::write(format!("op{i}"), format!("w{widx}"), start, finish));
        } else {
            // Any earlier-starting write is a legal dictating write: its
            // start is below this read's start, hence below its finish.
            let pick = writes[rng.random_range(0..writes.len())];
            ops.push(Operation::read(format!("op{i}"), format!("w{pick}"), start, finish));
        }
    }
    History::new("r0", ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{normalize, partition_by_key, validate};
    use crate::oracle::brute_force_k_atomic;

    #[test]
    fn witnessed_is_deterministic() {
        let cfg = GenConfig { seed: 7, ops: 50, ..GenConfig::default() };
        assert_eq!(gen_witnessed(&cfg), gen_witnessed(&cfg));
    }

    #[test]
    fn witnessed_zero_ops_is_empty() {
        let cfg = GenConfig { ops: 0, ..GenConfig::default() };
        assert!(gen_witnessed(&cfg).is_empty());
    }

    #[test]
    fn witnessed_outputs_validate_and_meet_k() {
        for seed in 0..50 {
            let cfg = GenConfig { seed, ops: 10, staleness_k: 1, ..GenConfig::default() };
            let h = gen_witnessed(&cfg);
            assert!(validate(&h).is_empty(), "seed {seed}");
            assert!(brute_force_k_atomic(&h, 1).unwrap().is_yes(), "seed {seed}");
        }
    }

    #[test]
    fn witnessed_k2_passes_fzf() {
        for seed in 0..1000 {
            let cfg = GenConfig {
                seed,
                ops: 10 + (seed as usize % 40),
                staleness_k: 2,
                ..GenConfig::default()
            };
            let h = normalize(&gen_witnessed(&cfg));
            assert!(crate::fzf::check_2atomic_fzf(&h).is_yes(), "seed {seed}");
        }
    }

    #[test]
    fn quorum_zero_ops_is_empty() {
        let cfg = QuorumConfig { ops: 0, ..QuorumConfig::default() };
        assert!(simulate_quorum(&cfg).records.is_empty());
    }

    #[test]
    fn quorum_is_deterministic_and_validates() {
        let cfg = QuorumConfig { seed: 3, ops: 12, ..QuorumConfig::default() };
        let t1 = simulate_quorum(&cfg);
        let t2 = simulate_quorum(&cfg);
        assert_eq!(t1, t2);
        let h = partition_by_key(&t1).remove("r0").unwrap();
        assert!(validate(&h).is_empty());
    }

    #[test]
    fn single_replica_single_quorum_is_atomic() {
        for seed in 0..500 {
            let cfg = QuorumConfig {
                seed,
                replicas: 1,
                write_quorum: 1,
                read_quorum: 1,
                clients: 2,
                ops: 9,
                ..QuorumConfig::default()
            };
            let t = simulate_quorum(&cfg);
            let h = partition_by_key(&t).remove("r0").unwrap();
            assert!(validate(&h).is_empty(), "seed {seed}");
            assert!(brute_force_k_atomic(&h, 1).unwrap().is_yes(), "seed {seed}");
        }
    }

    #[test]
    fn sloppy_quorum_produces_stale_reads_for_some_seed() {
        let mut found = None;
        for seed in 0..500 {
            let cfg = QuorumConfig {
                seed,
                replicas: 3,
                write_quorum: 1,
                read_quorum: 1,
                clients: 3,
                ops: 10,
                latency: (1, 30),
                ..QuorumConfig::default()
            };
            let t = simulate_quorum(&cfg);
            let h = partition_by_key(&t).remove("r0").unwrap();
            if !validate(&h).is_empty() {
                continue;
            }
            if !brute_force_k_atomic(&h, 1).unwrap().is_yes() {
                found = Some(seed);
                break;
            }
        }
        assert!(found.is_some(), "no stale-read seed found in 0..500");
    }

    #[test]
    fn random_small_is_deterministic_and_anomaly_free() {
        assert_eq!(gen_random_small(42, 8), gen_random_small(42, 8));
        for seed in 0..200 {
            let h = gen_random_small(seed, (seed as usize % 10) + 1);
            assert!(validate(&h).is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn random_small_single_op_is_a_write() {
        let h = gen_random_small(5, 1);
        assert_eq!(h.len(), 1);
        assert!(h.ops()[0].is_write());
        assert!(brute_force_k_atomic(&h, 1).unwrap().is_yes());
    }
}
