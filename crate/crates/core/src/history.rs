//! Operation/history data model, trace ingestion, anomaly detection and
//! normalization.
//!
//! A [`History`] is the unit of verification: all timed read/write operations
//! on a single register. Traces (multi-register operation logs) are parsed
//! from JSON-lines input and partitioned per register key; each per-key group
//! is validated against the model assumptions and then normalized before it is
//! handed to a verifier.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Abstract time in integer ticks.
///
/// Only the relative order of ticks is meaningful. Ingestion is expected to
/// map real timestamps (e.g. nanoseconds) onto ticks; [`normalize`] remaps
/// them again so that "slightly smaller than" adjustments are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Time(pub u64);

impl Time {
    pub fn ticks(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque unique operation identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpId(pub String);

impl OpId {
    pub fn new(id: impl Into<String>) -> Self {
        OpId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque value token stored by a write and returned by its dictated reads.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(pub String);

impl Value {
    pub fn new(v: impl Into<String>) -> Self {
        Value(v.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Operation type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Read,
    Write,
}

/// One timed read or write on a register.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub id: OpId,
    pub kind: OpKind,
    pub value: Value,
    pub start: Time,
    pub finish: Time,
}

impl Operation {
    pub fn read(id: impl Into<String>, value: impl Into<String>, start: u64, finish: u64) -> Self {
        Operation {
            id: OpId::new(id),
            kind: OpKind::Read,
            value: Value::new(value),
            start: Time(start),
            finish: Time(finish),
        }
    }

    pub fn write(id: impl Into<String>, value: impl Into<String>, start: u64, finish: u64) -> Self {
        Operation {
            id: OpId::new(id),
            kind: OpKind::Write,
            value: Value::new(value),
            start: Time(start),
            finish: Time(finish),
        }
    }

    pub fn is_read(&self) -> bool {
        self.kind == OpKind::Read
    }

    pub fn is_write(&self) -> bool {
        self.kind == OpKind::Write
    }
}

/// True iff `a` finishes before `b` starts.
///
/// This is the real-time partial order on operations; two operations are
/// concurrent when neither precedes the other. Callers should not pass the
/// same operation for both arguments.
pub fn precedes(a: &Operation, b: &Operation) -> bool {
    a.finish < b.start
}

/// All operations on one register.
///
/// Operation ids are expected to be unique within a history; they are opaque
/// tokens used only to reference operations in witnesses and reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    key: String,
    ops: Vec<Operation>,
}

impl History {
    pub fn new(key: impl Into<String>, ops: Vec<Operation>) -> Self {
        History { key: key.into(), ops }
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn writes(&self) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(|op| op.is_write())
    }

    pub fn reads(&self) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(|op| op.is_read())
    }

    pub fn op_by_id(&self, id: &OpId) -> Option<&Operation> {
        self.ops.iter().find(|op| &op.id == id)
    }
}

/// One trace record: an operation tagged with its register key.
///
/// `weight` is only meaningful on write records of weighted traces; plain
/// verification ignores it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub key: String,
    pub op: Operation,
    pub weight: Option<u64>,
}

/// A multi-register operation log in arbitrary order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    key: String,
    id: OpId,
    kind: OpKind,
    value: Value,
    start: u64,
    finish: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<u64>,
}

/// Trace ingestion failure.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses a JSON-lines trace.
///
/// One JSON object per line with fields `key`, `id`, `kind` ("read"|"write"),
/// `value`, `start`, `finish` and an optional `weight`; unknown fields are
/// ignored. Parsing performs per-line syntax checks only; semantic problems
/// (e.g. an inverted interval) are reported later by [`validate`].
pub fn parse_trace(input: impl std::io::Read) -> Result<Trace, ParseError> {
    let reader = std::io::BufReader::new(input);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| ParseError::Syntax {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        records.push(TraceRecord {
            key: raw.key,
            op: Operation {
                id: raw.id,
                kind: raw.kind,
                value: raw.value,
                start: Time(raw.start),
                finish: Time(raw.finish),
            },
            weight: raw.weight,
        });
    }
    Ok(Trace { records })
}

/// Serializes a trace in the JSON-lines format accepted by [`parse_trace`].
pub fn write_trace(trace: &Trace, mut out: impl std::io::Write) -> std::io::Result<()> {
    for rec in &trace.records {
        let raw = RawRecord {
            key: rec.key.clone(),
            id: rec.op.id.clone(),
            kind: rec.op.kind,
            value: rec.op.value.clone(),
            start: rec.op.start.0,
            finish: rec.op.finish.0,
            weight: rec.weight,
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Groups trace records by register key.
///
/// Staleness is a per-register property, so each group can be verified
/// independently of all others. Keys come out in sorted order.
pub fn partition_by_key(trace: &Trace) -> BTreeMap<String, History> {
    let mut map: BTreeMap<String, Vec<Operation>> = BTreeMap::new();
    for rec in &trace.records {
        map.entry(rec.key.clone()).or_default().push(rec.op.clone());
    }
    map.into_iter()
        .map(|(key, ops)| (key.clone(), History::new(key, ops)))
        .collect()
}

/// Model-assumption violations that prevent verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// An operation with `finish < start`.
    InvertedInterval,
    /// Two endpoints (across all operations) share the same tick.
    DuplicateTimestamp,
    /// Two writes store the same value.
    DuplicateWriteValue,
    /// A read returns a value no write stored.
    ReadWithoutDictatingWrite,
    /// A read finishes before its dictating write starts.
    ReadPrecedesDictatingWrite,
}

/// One validation finding, with the operations involved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub op_ids: Vec<OpId>,
}

/// Checks a history candidate against the model assumptions.
///
/// Returns an empty list iff the history is fit for normalization: intervals
/// are well formed, all endpoints are pairwise distinct, write values are
/// unique, and every read has a dictating write that it does not precede.
/// Anomalies are data, not errors; each violation is reported once.
pub fn validate(h: &History) -> Vec<Anomaly> {
    let mut anomalies = Vec::new();

    for op in h.ops() {
        if op.finish < op.start {
            anomalies.push(Anomaly {
                kind: AnomalyKind::InvertedInterval,
                op_ids: vec![op.id.clone()],
            });
        }
    }

    // Endpoint collisions, including a start colliding with a finish.
    let mut by_tick: BTreeMap<Time, Vec<OpId>> = BTreeMap::new();
    for op in h.ops() {
        by_tick.entry(op.start).or_default().push(op.id.clone());
        by_tick.entry(op.finish).or_default().push(op.id.clone());
    }
    for (_, mut ids) in by_tick {
        if ids.len() > 1 {
            ids.sort();
            ids.dedup();
            anomalies.push(Anomaly {
                kind: AnomalyKind::DuplicateTimestamp,
                op_ids: ids,
            });
        }
    }

    let mut writes_by_value: BTreeMap<&Value, Vec<OpId>> = BTreeMap::new();
    for op in h.writes() {
        writes_by_value.entry(&op.value).or_default().push(op.id.clone());
    }
    for (_, ids) in writes_by_value.iter() {
        if ids.len() > 1 {
            anomalies.push(Anomaly {
                kind: AnomalyKind::DuplicateWriteValue,
                op_ids: ids.clone(),
            });
        }
    }

    for read in h.reads() {
        match writes_by_value.get(&read.value) {
            None => anomalies.push(Anomaly {
                kind: AnomalyKind::ReadWithoutDictatingWrite,
                op_ids: vec![read.id.clone()],
            }),
            Some(write_ids) if write_ids.len() == 1 => {
                let w = h.op_by_id(&write_ids[0]).expect("write id from this history");
                if precedes(read, w) {
                    anomalies.push(Anomaly {
                        kind: AnomalyKind::ReadPrecedesDictatingWrite,
                        op_ids: vec![read.id.clone(), w.id.clone()],
                    });
                }
            }
            // Ambiguous dictating write; already reported as DuplicateWriteValue.
            Some(_) => {}
        }
    }

    anomalies.sort_by(|a, b| (a.kind, &a.op_ids).cmp(&(b.kind, &b.op_ids)));
    anomalies
}

/// Normalizes a validated history.
///
/// Two deterministic steps:
///
/// 1. every endpoint is remapped order-preservingly onto distinct even ticks
///    `0, 2, 4, ...`;
/// 2. each write with dictated reads has its finish shortened to
///    `min(finish, minReadFinish - 1)` where `minReadFinish` is the smallest
///    finish among its dictated reads.
///
/// The odd tick produced by step 2 cannot collide with anything else, so the
/// result has distinct endpoints and satisfies "a write ends before any of
/// its dictated reads finishes". A write's commit cannot happen after one of
/// its reads has already returned, so the staleness verdict at every k is
/// unchanged. Requires `validate(h)` to be empty.
pub fn normalize(h: &History) -> History {
    let mut endpoints: Vec<Time> = Vec::with_capacity(h.len() * 2);
    for op in h.ops() {
        endpoints.push(op.start);
        endpoints.push(op.finish);
    }
    endpoints.sort_unstable();
    debug_assert!(endpoints.windows(2).all(|w| w[0] < w[1]), "endpoints must be distinct");
    let rank = |t: Time| -> Time {
        let i = endpoints.binary_search(&t).expect("endpoint present");
        Time(i as u64 * 2)
    };

    let mut ops: Vec<Operation> = h
        .ops()
        .iter()
        .map(|op| Operation {
            id: op.id.clone(),
            kind: op.kind,
            value: op.value.clone(),
            start: rank(op.start),
            finish: rank(op.finish),
        })
        .collect();

    // Minimum dictated-read finish per written value, over remapped ticks.
    let mut min_read_finish: BTreeMap<&Value, Time> = BTreeMap::new();
    for op in ops.iter().filter(|op| op.is_read()) {
        min_read_finish
            .entry(&op.value)
            .and_modify(|t| *t = (*t).min(op.finish))
            .or_insert(op.finish);
    }
    let shortened: Vec<Option<Time>> = ops
        .iter()
        .map(|op| {
            if op.is_write() {
                min_read_finish
                    .get(&op.value)
                    .map(|mrf| op.finish.min(Time(mrf.0 - 1)))
                    .filter(|t| *t != op.finish)
            } else {
                None
            }
        })
        .collect();
    for (op, cut) in ops.iter_mut().zip(shortened) {
        if let Some(t) = cut {
            op.finish = t;
        }
    }

    History::new(h.key.clone(), ops)
}

/// Deterministic order-preserving fix for duplicate timestamps.
///
/// Collapses all endpoints onto their rank in the global endpoint order,
/// breaking ties by operation id (a start ties before the same operation's
/// finish). Intended as an opt-in pre-validation step for raw traces whose
/// clock granularity produced collisions; histories with distinct endpoints
/// come back order-isomorphic.
pub fn perturb_duplicate_timestamps(h: &History) -> History {
    // (tick, op id, is_finish) sorted lexicographically fixes a total order.
    let mut endpoints: Vec<(Time, &OpId, bool)> = Vec::with_capacity(h.len() * 2);
    for op in h.ops() {
        endpoints.push((op.start, &op.id, false));
        endpoints.push((op.finish, &op.id, true));
    }
    endpoints.sort();
    let mut new_tick: BTreeMap<(&OpId, bool), Time> = BTreeMap::new();
    for (i, (_, id, is_finish)) in endpoints.into_iter().enumerate() {
        new_tick.insert((id, is_finish), Time(i as u64));
    }
    let ops = h
        .ops()
        .iter()
        .map(|op| Operation {
            id: op.id.clone(),
            kind: op.kind,
            value: op.value.clone(),
            start: new_tick[&(&op.id, false)],
            finish: new_tick[&(&op.id, true)],
        })
        .collect();
    History::new(h.key.clone(), ops)
}

/// Drops reads implicated in read anomalies and returns the remainder.
///
/// Used by lenient ingestion: writes are never dropped, and the caller is
/// expected to re-validate the result (write-side anomalies cannot be fixed
/// by discarding reads).
pub fn drop_anomalous_reads(h: &History, anomalies: &[Anomaly]) -> (History, Vec<OpId>) {
    let mut doomed: Vec<&OpId> = Vec::new();
    for a in anomalies {
        match a.kind {
            AnomalyKind::ReadWithoutDictatingWrite | AnomalyKind::ReadPrecedesDictatingWrite => {
                doomed.extend(a.op_ids.iter());
            }
            _ => {}
        }
    }
    let mut dropped = Vec::new();
    let ops = h
        .ops()
        .iter()
        .filter(|op| {
            let drop = op.is_read() && doomed.contains(&&op.id);
            if drop {
                dropped.push(op.id.clone());
            }
            !drop
        })
        .cloned()
        .collect();
    (History::new(h.key.clone(), ops), dropped)
}
