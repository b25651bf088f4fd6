//! Weighted staleness: every write carries a positive integer weight, and the
//! bound applies to the total weight of the writes separating a dictating
//! write from each of its dictated reads, including the dictating write
//! itself. Unit weights recover the plain problem.
//!
//! No polynomial verifier is attempted for the weighted variant; deciding it
//! reduces from bin packing, so this module provides the exhaustive checker,
//! an exact bin-packing solver, and the reduction construction as an
//! instance generator.

use std::collections::BTreeMap;

use crate::history::{History, OpKind, Operation, Trace, TraceRecord, Value};
use crate::oracle::OracleError;
use crate::verdict::{Certificate, Verdict, WitnessEntry, WitnessOrder};

/// A history whose writes carry positive integer weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedHistory {
    pub base: History,
    pub weight: BTreeMap<Value, u64>,
}

impl WeightedHistory {
    /// Wraps a history with explicit weights; writes without an entry get
    /// weight 1. Panics on a zero weight.
    pub fn new(base: History, weight: BTreeMap<Value, u64>) -> Self {
        assert!(weight.values().all(|&w| w >= 1), "weights must be positive");
        WeightedHistory { base, weight }
    }

    pub fn unit(base: History) -> Self {
        WeightedHistory { base, weight: BTreeMap::new() }
    }

    pub fn weight_of(&self, value: &Value) -> u64 {
        self.weight.get(value).copied().unwrap_or(1)
    }

    /// Reassembles the weighted trace rows for one register.
    pub fn to_trace(&self) -> Trace {
        let records = self
            .base
            .ops()
            .iter()
            .map(|op| TraceRecord {
                key: self.base.key().to_string(),
                op: op.clone(),
                weight: op.is_write().then(|| self.weight_of(&op.value)),
            })
            .collect();
        Trace { records }
    }

    /// Collects one key's records of a weighted trace.
    pub fn from_trace(trace: &Trace, key: &str) -> Self {
        let mut ops = Vec::new();
        let mut weight = BTreeMap::new();
        for rec in trace.records.iter().filter(|r| r.key == key) {
            if let Some(w) = rec.weight {
                weight.insert(rec.op.value.clone(), w);
            }
            ops.push(rec.op.clone());
        }
        WeightedHistory::new(History::new(key, ops), weight)
    }
}

/// Decides weighted k-atomicity by exhaustive enumeration of valid total
/// orders (cap-limited), accepting iff some order keeps, for every read, the
/// weight of the writes from its dictating write up to the read at or
/// below k.
pub fn brute_force_weighted(h: &WeightedHistory, k: u64, cap: usize) -> Result<Verdict, OracleError> {
    assert!(k >= 1, "k must be positive");
    let n = h.base.len();
    if n > cap {
        return Err(OracleError::CapExceeded { ops: n, cap });
    }
    let ops = h.base.ops();
    let weights: Vec<u64> = ops.iter().map(|op| h.weight_of(&op.value)).collect();
    let dict: Vec<Option<usize>> = ops
        .iter()
        .map(|op| {
            op.is_read()
                .then(|| ops.iter().position(|w| w.is_write() && w.value == op.value))
                .flatten()
        })
        .collect();
    let total_reads: Vec<u32> = (0..n)
        .map(|w| dict.iter().filter(|d| **d == Some(w)).count() as u32)
        .collect();

    let mut search = WeightedSearch {
        ops,
        weights,
        dict,
        pending: total_reads,
        placed: vec![false; n],
        seq: Vec::with_capacity(n),
        k,
        nodes: 0,
    };
    if search.dfs() {
        let witness = witness_from_sequence(ops, &search.seq);
        Ok(Verdict::yes(Some(witness), search.nodes))
    } else {
        Ok(Verdict::no(Certificate::SearchExhausted { explored: search.nodes }, search.nodes))
    }
}

struct WeightedSearch<'a> {
    ops: &'a [Operation],
    weights: Vec<u64>,
    dict: Vec<Option<usize>>,
    pending: Vec<u32>,
    placed: Vec<bool>,
    seq: Vec<usize>,
    k: u64,
    nodes: u64,
}

impl WeightedSearch<'_> {
    fn minimal(&self, o: usize) -> bool {
        (0..self.ops.len())
            .all(|p| p == o || self.placed[p] || !(self.ops[p].finish < self.ops[o].start))
    }

    /// Weight of the writes placed from `w`'s position through the end of
    /// the current sequence, including `w` itself.
    fn span_weight(&self, w: usize) -> u64 {
        let from = self.seq.iter().position(|&x| x == w).expect("placed write");
        self.seq[from..]
            .iter()
            .filter(|&&x| self.ops[x].is_write())
            .map(|&x| self.weights[x])
            .sum()
    }

    fn dfs(&mut self) -> bool {
        let n = self.ops.len();
        if self.seq.len() == n {
            return true;
        }
        self.nodes += 1;
        for o in 0..n {
            if self.placed[o] || !self.minimal(o) {
                continue;
            }
            match self.ops[o].kind {
                OpKind::Read => {
                    let w = self.dict[o].expect("anomaly-free history");
                    if !self.placed[w] || self.span_weight(w) > self.k {
                        continue;
                    }
                    self.pending[w] -= 1;
                    self.placed[o] = true;
                    self.seq.push(o);
                    if self.dfs() {
                        return true;
                    }
                    self.seq.pop();
                    self.placed[o] = false;
                    self.pending[w] += 1;
                }
                OpKind::Write => {
                    let blocked = (self.pending[o] > 0 && self.weights[o] > self.k)
                        || (0..n).any(|w| {
                            self.placed[w]
                                && self.ops[w].is_write()
                                && self.pending[w] > 0
                                && self.span_weight(w) + self.weights[o] > self.k
                        });
                    if blocked {
                        continue;
                    }
                    self.placed[o] = true;
                    self.seq.push(o);
                    if self.dfs() {
                        return true;
                    }
                    self.seq.pop();
                    self.placed[o] = false;
                }
            }
        }
        false
    }
}

fn witness_from_sequence(ops: &[Operation], seq: &[usize]) -> WitnessOrder {
    let mut entries = Vec::new();
    let mut container: Vec<crate::history::OpId> = Vec::new();
    for &i in seq {
        if ops[i].is_write() {
            if !container.is_empty() {
                entries.push(WitnessEntry::Container(std::mem::take(&mut container)));
            }
            entries.push(WitnessEntry::Slot(ops[i].id.clone()));
        } else {
            container.push(ops[i].id.clone());
        }
    }
    if !container.is_empty() {
        entries.push(WitnessEntry::Container(container));
    }
    WitnessOrder { entries }
}

/// A bin-packing question: can `sizes` be split into `bins` groups each
/// summing to at most `capacity`?
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinPackingInstance {
    pub sizes: Vec<u64>,
    pub bins: u64,
    pub capacity: u64,
}

impl BinPackingInstance {
    pub fn new(sizes: Vec<u64>, bins: u64, capacity: u64) -> Self {
        assert!(sizes.iter().all(|&s| s >= 1), "item sizes must be positive");
        assert!(bins >= 1 && capacity >= 1, "bins and capacity must be positive");
        BinPackingInstance { sizes, bins, capacity }
    }
}

/// Exact bin-packing feasibility by exhaustive assignment.
///
/// Items are assigned in descending size order and a fresh bin is only opened
/// as the next unused one, which prunes bin-permutation symmetry.
pub fn brute_force_binpacking(inst: &BinPackingInstance) -> Result<bool, OracleError> {
    const CAP: usize = 10;
    if inst.sizes.len() > CAP {
        return Err(OracleError::CapExceeded { ops: inst.sizes.len(), cap: CAP });
    }
    let mut sizes = inst.sizes.clone();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let mut loads = vec![0u64; inst.bins as usize];
    fn place(sizes: &[u64], item: usize, loads: &mut [u64], used: usize, cap: u64) -> bool {
        if item == sizes.len() {
            return true;
        }
        let open = used.min(loads.len().saturating_sub(1));
        for b in 0..=open {
            if loads[b] + sizes[item] <= cap {
                loads[b] += sizes[item];
                if place(sizes, item + 1, loads, used.max(b + 1), cap) {
                    return true;
                }
                loads[b] -= sizes[item];
            }
            // Equal-load bins are interchangeable; trying one empty bin is
            // enough.
            if loads[b] == 0 {
                break;
            }
        }
        false
    }
    Ok(place(&sizes, 0, &mut loads, 0, inst.capacity))
}

/// Builds the weighted-history instance whose weighted verdict at the
/// returned k equals the bin-packing answer.
///
/// The skeleton is m+1 unit-weight short writes and m reads on point-like
/// disjoint intervals whose only valid order is
/// `w(1) w(2) r(1) w(3) r(2) ... w(m+1) r(m)`; each item becomes a long
/// write of that item's weight spanning everything strictly between `w(1)`
/// and `w(m+1)`, so its only freedom is which gap takes it. Each gap
/// `w(i)..r(i)` already holds one short write plus the dictating write, so
/// k = capacity + 2.
pub fn binpacking_to_kwav(inst: &BinPackingInstance) -> (WeightedHistory, u64) {
    let n = inst.sizes.len() as u64;
    let m = inst.bins;
    let unit = 10 * (n + 2);

    let slot = |j: u64| -> (u64, u64) { (unit * (j + 1), unit * (j + 1) + 1) };

    let mut ops: Vec<Operation> = Vec::new();
    let mut weight: BTreeMap<Value, u64> = BTreeMap::new();

    // Short skeleton in target order: w(1), w(2), r(1), w(3), r(2), ...
    // w(i) for i >= 2 occupies slot 2i-3 and r(i) slot 2i.
    let (s, f) = slot(0);
    ops.push(Operation::write("w1", "s1", s, f));
    for i in 2..=(m + 1) {
        let (s, f) = slot(2 * i - 3);
        ops.push(Operation::write(format!("w{i}"), format!("s{i}"), s, f));
    }
    for i in 1..=m {
        let (s, f) = slot(2 * i);
        ops.push(Operation::read(format!("r{i}"), format!("s{i}"), s, f));
    }
    for i in 1..=(m + 1) {
        weight.insert(Value::new(format!("s{i}")), 1);
    }

    // Long writes: strictly after w(1) finishes, strictly before w(m+1)
    // starts, pairwise concurrent, all endpoints distinct.
    let w1_finish = slot(0).1;
    let wm1_start = slot(2 * m - 1).0;
    for (i, &size) in inst.sizes.iter().enumerate() {
        let j = i as u64 + 1;
        ops.push(Operation::write(
            format!("l{j}"),
            format!("l{j}"),
            w1_finish + j,
            wm1_start - j,
        ));
        weight.insert(Value::new(format!("l{j}")), size);
    }

    let history = History::new("binpack", ops);
    debug_assert!(crate::history::validate(&history).is_empty());
    (WeightedHistory::new(history, weight), inst.capacity + 2)
}
