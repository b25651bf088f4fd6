//! Clusters, zones and the 1-atomicity (linearizability) check.
//!
//! A cluster is a write together with its dictated reads. Its zone is the
//! interval from the cluster's minimum finish time to its maximum start time;
//! the zone is forward when the minimum finish comes first, backward
//! otherwise. A normalized history is 1-atomic iff no two forward zones
//! overlap and no backward zone lies entirely inside a forward zone.

use serde::{Deserialize, Serialize};

use crate::history::{History, Operation, Time, Value};
use crate::index::{sort_cost, Indexed};
use crate::verdict::{Certificate, Verdict, VerdictStats};

/// A write and its dictated reads. Clusters partition a history's operations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub write: Operation,
    pub reads: Vec<Operation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneKind {
    Forward,
    Backward,
}

/// The time interval a cluster occupies for atomicity checking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub cluster_value: Value,
    /// Minimum finish time of any operation in the cluster.
    pub min_finish: Time,
    /// Maximum start time of any operation in the cluster.
    pub max_start: Time,
    pub kind: ZoneKind,
    pub low: Time,
    pub high: Time,
}

/// Groups a normalized history into clusters, one per write.
pub fn clusters(h: &History) -> Vec<Cluster> {
    let idx = Indexed::new(h);
    let ops = h.ops();
    let mut out: Vec<Cluster> = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        if op.is_write() {
            let reads = idx.reads_of[i].iter().map(|&r| ops[r as usize].clone()).collect();
            out.push(Cluster { write: op.clone(), reads });
        }
    }
    out
}

/// Computes the zone of a cluster.
pub fn zone(c: &Cluster) -> Zone {
    let mut min_finish = c.write.finish;
    let mut max_start = c.write.start;
    for r in &c.reads {
        min_finish = min_finish.min(r.finish);
        max_start = max_start.max(r.start);
    }
    let kind = if min_finish < max_start { ZoneKind::Forward } else { ZoneKind::Backward };
    Zone {
        cluster_value: c.write.value.clone(),
        min_finish,
        max_start,
        kind,
        low: min_finish.min(max_start),
        high: min_finish.max(max_start),
    }
}

/// Decides 1-atomicity of a normalized history.
///
/// Sorts zones by low endpoint and sweeps once, tracking the
/// highest-reaching forward zone seen so far. Zone intervals are closed;
/// normalization guarantees distinct endpoints, so overlap and containment
/// tests reduce to strict comparisons. On NO the certificate names the
/// violating zone pair.
pub fn check_1atomic(h: &History) -> Verdict {
    let cs = clusters(h);
    let mut zones: Vec<Zone> = cs.iter().map(zone).collect();
    zones.sort_by_key(|z| z.low);
    let mut steps = sort_cost(zones.len());

    // Highest-reaching forward zone among those already swept.
    let mut best_forward: Option<&Zone> = None;
    for z in &zones {
        steps += 1;
        match z.kind {
            ZoneKind::Forward => {
                if let Some(f) = best_forward {
                    // f.low < z.low by sweep order; closed intervals overlap
                    // iff z starts before f ends.
                    if z.low < f.high {
                        return Verdict::no(
                            Certificate::ForwardZonesOverlap {
                                first_value: f.cluster_value.0.clone(),
                                first_interval: (f.low.0, f.high.0),
                                second_value: z.cluster_value.0.clone(),
                                second_interval: (z.low.0, z.high.0),
                            },
                            steps,
                        );
                    }
                }
                if best_forward.map_or(true, |f| z.high > f.high) {
                    best_forward = Some(z);
                }
            }
            ZoneKind::Backward => {
                if let Some(f) = best_forward {
                    if z.high < f.high {
                        // f.low < z.low and z.high < f.high: entirely inside.
                        return Verdict::no(
                            Certificate::BackwardZoneContained {
                                forward_value: f.cluster_value.0.clone(),
                                forward_interval: (f.low.0, f.high.0),
                                backward_value: z.cluster_value.0.clone(),
                                backward_interval: (z.low.0, z.high.0),
                            },
                            steps,
                        );
                    }
                }
            }
        }
    }
    Verdict {
        answer: crate::verdict::Answer::Yes,
        witness: None,
        certificate: None,
        stats: VerdictStats { steps },
    }
}
