//! Exhaustive ground-truth decision for small instances, witness checking,
//! and minimal-k computation.
//!
//! The brute-force oracle enumerates valid total orders depth first, always
//! extending the `precedes` partial order by picking a currently-minimal
//! operation, and prunes any branch in which a placed write with pending
//! dictated reads already has more than `k` writes at-or-after it (counting
//! itself). It accepts unnormalized anomaly-free histories so it can
//! adjudicate normalization invariance; the polynomial verifiers require
//! normalized input.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fzf::check_2atomic_fzf;
use crate::history::{History, OpId, OpKind, Operation};
use crate::index::{Indexed, NONE};
use crate::verdict::{Certificate, Verdict, WitnessEntry, WitnessOrder};
use crate::zones::check_1atomic;

/// Default enumeration cap: the search is factorial in the worst case, so
/// anything larger must be opted into.
pub const DEFAULT_ORACLE_CAP: usize = 12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("history has {ops} operations, above the enumeration cap {cap}")]
    CapExceeded { ops: usize, cap: usize },
}

/// Knobs for the exhaustive search.
#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub cap: usize,
    /// When set, candidate order at each node is shuffled with this seed.
    /// The verdict must not depend on it; tests use it to confirm that.
    pub tie_seed: Option<u64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { cap: DEFAULT_ORACLE_CAP, tie_seed: None }
    }
}

/// Decides k-atomicity by exhaustive enumeration with the default options.
pub fn brute_force_k_atomic(h: &History, k: u32) -> Result<Verdict, OracleError> {
    brute_force_k_atomic_with(h, k, &OracleOptions::default())
}

/// Decides k-atomicity by exhaustive enumeration.
pub fn brute_force_k_atomic_with(
    h: &History,
    k: u32,
    opts: &OracleOptions,
) -> Result<Verdict, OracleError> {
    assert!(k >= 1, "k must be positive");
    if h.len() > opts.cap {
        return Err(OracleError::CapExceeded { ops: h.len(), cap: opts.cap });
    }
    let mut search = Search::new(h, u64::from(k), opts);
    let found = search.dfs();
    let steps = search.nodes;
    if found {
        Ok(Verdict::yes(Some(search.witness(h)), steps))
    } else {
        Ok(Verdict::no(Certificate::SearchExhausted { explored: steps }, steps))
    }
}

struct Search<'h> {
    ops: &'h [Operation],
    n: usize,
    k: u64,
    dictating: Vec<u32>,
    /// Successors in the `precedes` order.
    succ: Vec<Vec<u32>>,
    /// Number of unplaced predecessors; an op is placeable when this is 0.
    pred_count: Vec<u32>,
    placed: Vec<bool>,
    /// For placed writes: unplaced dictated reads remaining.
    pending: Vec<u32>,
    /// For placed writes with pending reads: writes at-or-after, incl. self.
    load: Vec<u64>,
    sequence: Vec<u32>,
    nodes: u64,
    failed: HashSet<(u32, u128)>,
    memo_enabled: bool,
    rng: Option<ChaCha8Rng>,
}

impl<'h> Search<'h> {
    fn new(h: &'h History, k: u64, opts: &OracleOptions) -> Self {
        let idx = Indexed::new(h);
        let ops = h.ops();
        let n = ops.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred_count = vec![0u32; n];
        for a in 0..n {
            for b in 0..n {
                if a != b && ops[a].finish < ops[b].start {
                    succ[a].push(b as u32);
                    pred_count[b] += 1;
                }
            }
        }
        let pending: Vec<u32> = (0..n).map(|i| idx.reads_of[i].len() as u32).collect();
        Search {
            ops,
            n,
            k,
            dictating: idx.dictating,
            succ,
            pred_count,
            placed: vec![false; n],
            pending,
            load: vec![0; n],
            sequence: Vec::with_capacity(n),
            nodes: 0,
            failed: HashSet::new(),
            memo_enabled: n <= 16 && k <= 255,
            rng: opts.tie_seed.map(ChaCha8Rng::seed_from_u64),
        }
    }

    fn state_key(&self) -> (u32, u128) {
        let mut mask = 0u32;
        let mut loads = 0u128;
        for i in 0..self.n {
            if self.placed[i] {
                mask |= 1 << i;
                if self.ops[i].is_write() && self.pending[i] > 0 {
                    loads |= (self.load[i] as u128) << (8 * i);
                }
            }
        }
        (mask, loads)
    }

    fn dfs(&mut self) -> bool {
        if self.sequence.len() == self.n {
            return true;
        }
        self.nodes += 1;
        let key = if self.memo_enabled { self.state_key() } else { (0, 0) };
        if self.memo_enabled && self.failed.contains(&key) {
            return false;
        }
        let mut candidates: Vec<u32> = (0..self.n as u32)
            .filter(|&i| !self.placed[i as usize] && self.pred_count[i as usize] == 0)
            .collect();
        if let Some(rng) = self.rng.as_mut() {
            candidates.shuffle(rng);
        }
        for op in candidates {
            if self.try_place(op) {
                if self.dfs() {
                    return true;
                }
                self.unplace(op);
            }
        }
        if self.memo_enabled {
            self.failed.insert(key);
        }
        false
    }

    fn try_place(&mut self, op: u32) -> bool {
        let i = op as usize;
        match self.ops[i].kind {
            OpKind::Read => {
                let w = self.dictating[i] as usize;
                debug_assert_ne!(self.dictating[i], NONE);
                // The read must follow its dictating write, and the writes
                // accumulated since that write must not already exceed k.
                if !self.placed[w] || self.load[w] > self.k {
                    return false;
                }
                self.pending[w] -= 1;
            }
            OpKind::Write => {
                for w in 0..self.n {
                    if self.placed[w]
                        && self.ops[w].is_write()
                        && self.pending[w] > 0
                        && self.load[w] + 1 > self.k
                    {
                        return false;
                    }
                }
                for w in 0..self.n {
                    if self.placed[w] && self.ops[w].is_write() && self.pending[w] > 0 {
                        self.load[w] += 1;
                    }
                }
                self.load[i] = 1;
            }
        }
        self.placed[i] = true;
        self.sequence.push(op);
        for &q in &self.succ[i] {
            self.pred_count[q as usize] -= 1;
        }
        true
    }

    fn unplace(&mut self, op: u32) {
        let i = op as usize;
        debug_assert_eq!(self.sequence.last(), Some(&op));
        self.sequence.pop();
        self.placed[i] = false;
        for &q in &self.succ[i] {
            self.pred_count[q as usize] += 1;
        }
        match self.ops[i].kind {
            OpKind::Read => {
                let w = self.dictating[i] as usize;
                self.pending[w] += 1;
            }
            OpKind::Write => {
                self.load[i] = 0;
                for w in 0..self.n {
                    if self.placed[w] && self.ops[w].is_write() && self.pending[w] > 0 {
                        self.load[w] -= 1;
                    }
                }
            }
        }
    }

    fn witness(&self, h: &History) -> WitnessOrder {
        let mut entries = Vec::new();
        let mut container: Vec<OpId> = Vec::new();
        for &i in &self.sequence {
            let op = &h.ops()[i as usize];
            if op.is_write() {
                if !container.is_empty() {
                    entries.push(WitnessEntry::Container(std::mem::take(&mut container)));
                }
                entries.push(WitnessEntry::Slot(op.id.clone()));
            } else {
                container.push(op.id.clone());
            }
        }
        if !container.is_empty() {
            entries.push(WitnessEntry::Container(container));
        }
        WitnessOrder { entries }
    }
}

/// Checks a claimed witness order against a history, independently of every
/// verifier code path.
///
/// True iff the witness covers exactly the history's operations (writes in
/// slots, reads in containers), its flattening (containers taken in
/// start-time order) extends `precedes`, and every read follows its
/// dictating write with at most `k - 1` writes in between.
pub fn check_witness(h: &History, w: &WitnessOrder, k: u32) -> bool {
    assert!(k >= 1, "k must be positive");
    let by_id: HashMap<&str, &Operation> = h.ops().iter().map(|op| (op.id.as_str(), op)).collect();
    if by_id.len() != h.len() {
        return false; // duplicate ids cannot be covered unambiguously
    }

    let mut flat: Vec<&Operation> = Vec::with_capacity(h.len());
    for entry in &w.entries {
        match entry {
            WitnessEntry::Slot(id) => match by_id.get(id.as_str()) {
                Some(op) if op.is_write() => flat.push(op),
                _ => return false,
            },
            WitnessEntry::Container(ids) => {
                let mut reads: Vec<&Operation> = Vec::with_capacity(ids.len());
                for id in ids {
                    match by_id.get(id.as_str()) {
                        Some(op) if op.is_read() => reads.push(op),
                        _ => return false,
                    }
                }
                reads.sort_by_key(|op| op.start);
                flat.append(&mut reads);
            }
        }
    }

    // Exact coverage.
    if flat.len() != h.len() {
        return false;
    }
    let mut seen: HashSet<&str> = HashSet::with_capacity(flat.len());
    if !flat.iter().all(|op| seen.insert(op.id.as_str())) {
        return false;
    }

    // Validity: nothing later in the order may precede anything earlier,
    // i.e. every finish clears the running maximum of earlier starts.
    let mut max_start = None;
    for op in &flat {
        if let Some(ms) = max_start {
            if op.finish < ms {
                return false;
            }
        }
        max_start = Some(max_start.map_or(op.start, |ms: crate::history::Time| ms.max(op.start)));
    }

    // Staleness bound.
    let mut writes_before = vec![0usize; flat.len()];
    let mut count = 0usize;
    let mut write_pos: HashMap<&str, usize> = HashMap::new();
    for (pos, op) in flat.iter().enumerate() {
        writes_before[pos] = count;
        if op.is_write() {
            write_pos.insert(op.value.as_str(), pos);
            count += 1;
        }
    }
    for (pos, op) in flat.iter().enumerate() {
        if op.is_read() {
            let Some(&wp) = write_pos.get(op.value.as_str()) else {
                return false;
            };
            if wp > pos {
                return false;
            }
            let between = writes_before[pos] - writes_before[wp] - 1;
            if between as u64 > u64::from(k) - 1 {
                return false;
            }
        }
    }
    true
}

/// Result of a minimal-k query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinK {
    Exact(u32),
    /// The history is too large for the exhaustive scan; the exact verifiers
    /// established that the answer is at least this.
    Unknown { lower_bound: u32 },
}

/// Smallest k for which a normalized history is k-atomic.
///
/// k = 1 and k = 2 are decided by the exact verifiers; beyond that the
/// exhaustive oracle scans upward while the history fits under `cap`.
/// Monotonicity in k makes the first YES the answer.
pub fn min_k(h: &History, cap: usize) -> MinK {
    if check_1atomic(h).is_yes() {
        return MinK::Exact(1);
    }
    if check_2atomic_fzf(h).is_yes() {
        return MinK::Exact(2);
    }
    if h.len() > cap {
        return MinK::Unknown { lower_bound: 3 };
    }
    let opts = OracleOptions { cap, tie_seed: None };
    let writes = h.writes().count() as u32;
    for k in 3..=writes.max(3) {
        let v = brute_force_k_atomic_with(h, k, &opts).expect("within cap");
        if v.is_yes() {
            return MinK::Exact(k);
        }
    }
    unreachable!("an anomaly-free history is always k-atomic for k = number of writes");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::normalize;

    fn ha() -> History {
        History::new(
            "x",
            vec![Operation::write("w", "a", 0, 2), Operation::read("r", "a", 4, 6)],
        )
    }

    fn hb() -> History {
        History::new(
            "x",
            vec![
                Operation::write("w1", "a", 0, 2),
                Operation::write("w2", "b", 4, 6),
                Operation::read("r1", "a", 8, 10),
            ],
        )
    }

    fn hc() -> History {
        History::new(
            "x",
            vec![
                Operation::write("w1", "a", 0, 2),
                Operation::write("w2", "b", 4, 6),
                Operation::write("w3", "c", 8, 10),
                Operation::read("r1", "a", 12, 14),
            ],
        )
    }

    #[test]
    fn ha_is_1atomic() {
        assert!(brute_force_k_atomic(&ha(), 1).unwrap().is_yes());
    }

    #[test]
    fn hb_needs_k2() {
        assert!(!brute_force_k_atomic(&hb(), 1).unwrap().is_yes());
        assert!(brute_force_k_atomic(&hb(), 2).unwrap().is_yes());
    }

    #[test]
    fn hc_needs_k3() {
        assert!(!brute_force_k_atomic(&hc(), 2).unwrap().is_yes());
        assert!(brute_force_k_atomic(&hc(), 3).unwrap().is_yes());
    }

    #[test]
    fn yes_comes_with_checkable_witness() {
        for (h, k) in [(ha(), 1), (hb(), 2), (hc(), 3)] {
            let v = brute_force_k_atomic(&h, k).unwrap();
            assert!(v.is_yes());
            assert!(check_witness(&h, v.witness.as_ref().unwrap(), k));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let opts = OracleOptions { cap: 3, tie_seed: None };
        let err = brute_force_k_atomic_with(&hc(), 2, &opts).unwrap_err();
        match err {
            OracleError::CapExceeded { ops, cap } => {
                assert_eq!((ops, cap), (4, 3));
            }
        }
    }

    #[test]
    fn witness_check_examples() {
        // HA slot/container forms flatten to w < r.
        let w = WitnessOrder {
            entries: vec![
                WitnessEntry::Slot(OpId::new("w")),
                WitnessEntry::Container(vec![OpId::new("r")]),
            ],
        };
        assert!(check_witness(&ha(), &w, 1));

        // HC as the single valid order w1 w2 w3 r1 has two intervening
        // writes: fails at k = 2, passes at k = 3.
        let w = WitnessOrder {
            entries: vec![
                WitnessEntry::Slot(OpId::new("w1")),
                WitnessEntry::Slot(OpId::new("w2")),
                WitnessEntry::Slot(OpId::new("w3")),
                WitnessEntry::Container(vec![OpId::new("r1")]),
            ],
        };
        assert!(!check_witness(&hc(), &w, 2));
        assert!(check_witness(&hc(), &w, 3));

        // Coverage violation: an omitted op fails.
        let w = WitnessOrder { entries: vec![WitnessEntry::Slot(OpId::new("w"))] };
        assert!(!check_witness(&ha(), &w, 1));
    }

    #[test]
    fn witness_check_rejects_invalid_order() {
        let w = WitnessOrder {
            entries: vec![
                WitnessEntry::Slot(OpId::new("w2")),
                WitnessEntry::Slot(OpId::new("w1")),
                WitnessEntry::Container(vec![OpId::new("r1")]),
            ],
        };
        // w1 precedes w2 in real time, so this order is invalid.
        assert!(!check_witness(&hb(), &w, 2));
    }

    #[test]
    fn min_k_examples() {
        assert_eq!(min_k(&normalize(&ha()), DEFAULT_ORACLE_CAP), MinK::Exact(1));
        assert_eq!(min_k(&normalize(&hb()), DEFAULT_ORACLE_CAP), MinK::Exact(2));
        assert_eq!(min_k(&normalize(&hc()), DEFAULT_ORACLE_CAP), MinK::Exact(3));
        assert_eq!(min_k(&normalize(&hc()), 3), MinK::Unknown { lower_bound: 3 });
    }

    #[test]
    fn verdict_is_independent_of_tie_order() {
        for seed in 0..20u64 {
            let opts = OracleOptions { cap: 12, tie_seed: Some(seed) };
            for (h, k, expect) in [(hb(), 1, false), (hb(), 2, true), (hc(), 2, false)] {
                let v = brute_force_k_atomic_with(&h, k, &opts).unwrap();
                assert_eq!(v.is_yes(), expect, "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn empty_history_is_trivially_atomic() {
        let h = History::new("x", vec![]);
        assert!(brute_force_k_atomic(&h, 1).unwrap().is_yes());
    }
}
