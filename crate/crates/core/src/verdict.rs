//! Verdicts, witness orders and no-certificates shared by all verifiers.

use serde::{Deserialize, Serialize};

use crate::history::OpId;

/// Outcome of a verification run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

/// A total order presented as write slots and read containers, front to back.
///
/// Each write slot holds exactly one write; each read container holds zero or
/// more reads. Flattening the entries in order (reads within a container in
/// any order consistent with `precedes`; this implementation uses start-time
/// order) yields the claimed total order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WitnessOrder {
    pub entries: Vec<WitnessEntry>,
}

/// One witness entry. Serializes as `{"slot": id}` or `{"container": [ids]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessEntry {
    Slot(OpId),
    Container(Vec<OpId>),
}

impl WitnessOrder {
    pub fn flatten(&self) -> Vec<&OpId> {
        let mut out = Vec::new();
        for entry in &self.entries {
            match entry {
                WitnessEntry::Slot(id) => out.push(id),
                WitnessEntry::Container(ids) => out.extend(ids.iter()),
            }
        }
        out
    }

    pub fn op_count(&self) -> usize {
        self.entries
            .iter()
            .map(|e| match e {
                WitnessEntry::Slot(_) => 1,
                WitnessEntry::Container(ids) => ids.len(),
            })
            .sum()
    }
}

/// Machine-checkable reason attached to a NO verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Certificate {
    /// Two forward zones overlap (violates 1-atomicity condition 1). The
    /// values identify the clusters; the intervals are the zones' [low, high].
    ForwardZonesOverlap {
        first_value: String,
        first_interval: (u64, u64),
        second_value: String,
        second_interval: (u64, u64),
    },
    /// A backward zone lies entirely inside a forward zone (violates
    /// 1-atomicity condition 2).
    BackwardZoneContained {
        forward_value: String,
        forward_interval: (u64, u64),
        backward_value: String,
        backward_interval: (u64, u64),
    },
    /// Every candidate first write for the current epoch failed.
    EpochCandidatesExhausted {
        candidates: Vec<OpId>,
        remaining_ops: usize,
    },
    /// A chunk admits no viable candidate write order. With three or more
    /// backward clusters no candidates exist at all.
    UnviableChunk {
        interval: (u64, u64),
        forward_writes: Vec<OpId>,
        backward_writes: Vec<OpId>,
        orders_tried: usize,
    },
    /// Exhaustive search ended without finding a conforming total order.
    SearchExhausted { explored: u64 },
}

/// Deterministic work counters for a verification run.
///
/// `steps` counts algorithm-specific elementary events: explored nodes for
/// the exhaustive oracle, removals plus undo relinks for the backtracking
/// verifier, and scan/sort steps for the zone-based verifiers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictStats {
    pub steps: u64,
}

/// Result of a verification run: YES with an optional checkable witness, or
/// NO with a machine-checkable certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub answer: Answer,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    pub stats: VerdictStats,
}

impl Verdict {
    pub fn yes(witness: Option<WitnessOrder>, steps: u64) -> Self {
        Verdict {
            answer: Answer::Yes,
            witness,
            certificate: None,
            stats: VerdictStats { steps },
        }
    }

    pub fn no(certificate: Certificate, steps: u64) -> Self {
        Verdict {
            answer: Answer::No,
            witness: None,
            certificate: Some(certificate),
            stats: VerdictStats { steps },
        }
    }

    pub fn is_yes(&self) -> bool {
        self.answer == Answer::Yes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witness_serde_shape() {
        let w = WitnessOrder {
            entries: vec![
                WitnessEntry::Slot(OpId::new("w1")),
                WitnessEntry::Container(vec![OpId::new("r1"), OpId::new("r2")]),
            ],
        };
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"[{"slot":"w1"},{"container":["r1","r2"]}]"#);
        let back: WitnessOrder = serde_json::from_str(&json).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn flatten_preserves_order() {
        let w = WitnessOrder {
            entries: vec![
                WitnessEntry::Slot(OpId::new("a")),
                WitnessEntry::Container(vec![]),
                WitnessEntry::Slot(OpId::new("b")),
                WitnessEntry::Container(vec![OpId::new("c")]),
            ],
        };
        let flat: Vec<&str> = w.flatten().into_iter().map(|id| id.as_str()).collect();
        assert_eq!(flat, ["a", "b", "c"]);
        assert_eq!(w.op_count(), 3);
    }
}
