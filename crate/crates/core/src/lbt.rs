//! 2-atomicity via limited backtracking over epochs.
//!
//! The verifier builds a 2-atomic total order back to front as a sequence of
//! write slots and read containers. Each epoch tentatively seats a candidate
//! write in the latest unfilled slot; that placement forces every later
//! placement in the epoch, so search only happens at epoch starts. Candidate
//! first-writes are raced with iterative deepening (doubling removal
//! budgets), and a failed attempt is rolled back through an undo log. The
//! remaining history and write set are kept as doubly linked lists sorted by
//! start and finish time respectively, so a removal, an undo and a frontier
//! scan are all constant-time per element.

use crate::history::{History, OpId, Time};
use crate::index::{sort_cost, Indexed, NONE};
use crate::verdict::{Certificate, Verdict, WitnessEntry, WitnessOrder};

/// Doubly linked list over op indices with head/tail sentinels.
///
/// `unlink` leaves the removed node's own pointers intact, so `relink` in
/// exact reverse removal order restores the list.
struct Links {
    next: Vec<u32>,
    prev: Vec<u32>,
    head: u32,
    tail: u32,
    len: usize,
}

impl Links {
    fn new(n: usize, order: impl Iterator<Item = u32>) -> Links {
        let head = n as u32;
        let tail = n as u32 + 1;
        let mut next = vec![NONE; n + 2];
        let mut prev = vec![NONE; n + 2];
        let mut cur = head;
        let mut len = 0;
        for i in order {
            next[cur as usize] = i;
            prev[i as usize] = cur;
            cur = i;
            len += 1;
        }
        next[cur as usize] = tail;
        prev[tail as usize] = cur;
        Links { next, prev, head, tail, len }
    }

    fn unlink(&mut self, x: u32) {
        let p = self.prev[x as usize];
        let n = self.next[x as usize];
        self.next[p as usize] = n;
        self.prev[n as usize] = p;
        self.len -= 1;
    }

    fn relink(&mut self, x: u32) {
        let p = self.prev[x as usize];
        let n = self.next[x as usize];
        self.next[p as usize] = x;
        self.prev[n as usize] = x;
        self.len += 1;
    }

    fn last(&self) -> u32 {
        self.prev[self.tail as usize]
    }
}

/// Per-write lists of dictated reads still present in the history.
struct ReadLists {
    head: Vec<u32>,
    next: Vec<u32>,
    prev: Vec<u32>,
}

impl ReadLists {
    fn new(idx: &Indexed<'_>) -> ReadLists {
        let n = idx.n();
        let mut lists =
            ReadLists { head: vec![NONE; n], next: vec![NONE; n], prev: vec![NONE; n] };
        for w in 0..n {
            let mut cur = NONE;
            for &r in &idx.reads_of[w] {
                if cur == NONE {
                    lists.head[w] = r;
                } else {
                    lists.next[cur as usize] = r;
                }
                lists.prev[r as usize] = cur;
                cur = r;
            }
        }
        lists
    }

    fn unlink(&mut self, r: u32, dictating: u32) {
        let p = self.prev[r as usize];
        let n = self.next[r as usize];
        if p == NONE {
            self.head[dictating as usize] = n;
        } else {
            self.next[p as usize] = n;
        }
        if n != NONE {
            self.prev[n as usize] = p;
        }
    }

    fn relink(&mut self, r: u32, dictating: u32) {
        let p = self.prev[r as usize];
        let n = self.next[r as usize];
        if p == NONE {
            self.head[dictating as usize] = r;
        } else {
            self.next[p as usize] = r;
        }
        if n != NONE {
            self.prev[n as usize] = r;
        }
    }
}

enum Undo {
    H(u32),
    W(u32),
    Read(u32),
}

enum EpochOutcome {
    Success,
    Fail,
    BudgetExhausted,
}

/// Mutable verification state: the remaining history, the remaining writes in
/// finish order, and the undo log that reverts a failed epoch exactly.
pub struct EpochState<'h> {
    idx: Indexed<'h>,
    h_list: Links,
    w_list: Links,
    reads: ReadLists,
    undo: Vec<Undo>,
    /// (write, its read container) pairs in back-to-front construction order.
    pairs: Vec<(u32, Vec<u32>)>,
    /// Removals plus undo relinks, cumulative over the whole run.
    steps: u64,
    attempt_removed: u64,
}

impl<'h> EpochState<'h> {
    /// Builds the state for a normalized, anomaly-free history.
    pub fn new(h: &'h History) -> Self {
        let idx = Indexed::new(h);
        let h_list = Links::new(idx.n(), idx.start_order.iter().copied());
        let w_list = Links::new(idx.n(), idx.writes_by_finish.iter().copied());
        let reads = ReadLists::new(&idx);
        EpochState {
            h_list,
            w_list,
            reads,
            idx,
            undo: Vec::new(),
            pairs: Vec::new(),
            steps: 0,
            attempt_removed: 0,
        }
    }

    pub fn remaining_ops(&self) -> usize {
        self.h_list.len
    }

    pub fn remaining_writes(&self) -> usize {
        self.w_list.len
    }

    /// Undo-log position to pass to [`EpochState::revert_to`].
    pub fn checkpoint(&self) -> usize {
        self.undo.len()
    }

    /// Replays the undo log back to a checkpoint, restoring the remaining
    /// history and write list exactly.
    pub fn revert_to(&mut self, checkpoint: usize) {
        while self.undo.len() > checkpoint {
            match self.undo.pop().expect("nonempty") {
                Undo::H(x) => {
                    self.h_list.relink(x);
                    self.steps += 1;
                }
                Undo::W(x) => self.w_list.relink(x),
                Undo::Read(r) => self.reads.relink(r, self.idx.dictating[r as usize]),
            }
        }
    }

    fn start(&self, i: u32) -> Time {
        self.idx.h.ops()[i as usize].start
    }

    fn finish(&self, i: u32) -> Time {
        self.idx.h.ops()[i as usize].finish
    }

    fn is_write(&self, i: u32) -> bool {
        self.idx.h.ops()[i as usize].is_write()
    }

    fn op_index(&self, id: &OpId) -> Option<u32> {
        self.idx.h.ops().iter().position(|op| &op.id == id).map(|i| i as u32)
    }

    fn remove_read(&mut self, r: u32) {
        self.h_list.unlink(r);
        self.undo.push(Undo::H(r));
        self.reads.unlink(r, self.idx.dictating[r as usize]);
        self.undo.push(Undo::Read(r));
        self.steps += 1;
        self.attempt_removed += 1;
    }

    fn remove_write(&mut self, w: u32) {
        self.h_list.unlink(w);
        self.undo.push(Undo::H(w));
        self.w_list.unlink(w);
        self.undo.push(Undo::W(w));
        self.steps += 1;
        self.attempt_removed += 1;
    }

    /// Writes that precede no other remaining write. They form a suffix of
    /// the finish-sorted write list, returned in ascending finish order.
    fn frontier(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let mut max_start_after: Option<Time> = None;
        let mut cur = self.w_list.last();
        while cur != self.w_list.head {
            if max_start_after.is_some_and(|ms| self.finish(cur) < ms) {
                break;
            }
            out.push(cur);
            let s = self.start(cur);
            if max_start_after.is_none_or(|ms| s > ms) {
                max_start_after = Some(s);
            }
            cur = self.w_list.prev[cur as usize];
        }
        out.reverse();
        out
    }

    fn run_epoch_bounded(&mut self, mut w: u32, budget: u64) -> EpochOutcome {
        self.attempt_removed = 0;
        loop {
            let mut forced: u32 = NONE;
            let wf = self.finish(w);
            let mut container: Vec<u32> = Vec::new();

            // Every remaining op starting after w's finish must be placed in
            // the read container adjacent to w's slot. They sit at the tail
            // of the start-sorted history list.
            let mut cur = self.h_list.last();
            while cur != self.h_list.head && self.start(cur) > wf {
                let before = self.h_list.prev[cur as usize];
                if self.is_write(cur) {
                    return EpochOutcome::Fail;
                }
                let dw = self.idx.dictating[cur as usize];
                if dw != w && dw != forced {
                    if forced != NONE {
                        return EpochOutcome::Fail;
                    }
                    forced = dw;
                }
                if self.attempt_removed >= budget {
                    return EpochOutcome::BudgetExhausted;
                }
                self.remove_read(cur);
                container.push(cur);
                cur = before;
            }

            // Remaining dictated reads of w join the same container; then w
            // itself takes the write slot.
            let mut r = self.reads.head[w as usize];
            while r != NONE {
                let next = self.reads.next[r as usize];
                if self.attempt_removed >= budget {
                    return EpochOutcome::BudgetExhausted;
                }
                self.remove_read(r);
                container.push(r);
                r = next;
            }
            if self.attempt_removed >= budget {
                return EpochOutcome::BudgetExhausted;
            }
            self.remove_write(w);
            self.pairs.push((w, container));

            if forced == NONE {
                return EpochOutcome::Success;
            }
            w = forced;
        }
    }
}

/// Runs one epoch starting from the given write, per the epoch rule: ops
/// starting after the current write's finish go into its read container (a
/// remaining write there, or reads of more than one other write, abort the
/// epoch), then the write and its leftover reads are consumed, and the one
/// foreign dictating write observed (if any) seats the next slot.
///
/// Returns whether the epoch succeeded. On failure the state is left
/// partially consumed; revert through a checkpoint taken beforehand.
pub fn run_epoch(st: &mut EpochState<'_>, first: &OpId) -> bool {
    let w = st.op_index(first).expect("unknown op id");
    assert!(st.is_write(w), "epoch candidate must be a write");
    matches!(st.run_epoch_bounded(w, u64::MAX), EpochOutcome::Success)
}

/// Decides 2-atomicity of a normalized history, returning a witness on YES.
///
/// Epoch candidates are raced with iterative deepening: round i gives every
/// surviving candidate a budget of 2^i removals, and the first success
/// (candidates tried from latest finish down) wins the epoch. A candidate
/// that fails outright is dropped; one that runs out of budget is retried in
/// the next round. If every candidate fails, the history is not 2-atomic.
pub fn check_2atomic_lbt(h: &History) -> Verdict {
    let mut st = EpochState::new(h);
    st.steps += sort_cost(h.len());

    while st.remaining_ops() > 0 {
        let frontier = st.frontier();
        debug_assert!(!frontier.is_empty());
        let mut alive = frontier.clone();
        let mut budget: u64 = 1;
        let mut won = false;

        while !won && !alive.is_empty() {
            let mut survivors = Vec::new();
            for &w in alive.iter().rev() {
                let cp = st.checkpoint();
                let pairs_mark = st.pairs.len();
                match st.run_epoch_bounded(w, budget) {
                    EpochOutcome::Success => {
                        won = true;
                        break;
                    }
                    EpochOutcome::Fail => {
                        st.pairs.truncate(pairs_mark);
                        st.revert_to(cp);
                    }
                    EpochOutcome::BudgetExhausted => {
                        st.pairs.truncate(pairs_mark);
                        st.revert_to(cp);
                        survivors.push(w);
                    }
                }
            }
            if !won {
                survivors.reverse();
                alive = survivors;
                budget = budget.saturating_mul(2);
            }
        }

        if !won {
            let candidates =
                frontier.iter().map(|&w| h.ops()[w as usize].id.clone()).collect();
            return Verdict::no(
                Certificate::EpochCandidatesExhausted {
                    candidates,
                    remaining_ops: st.remaining_ops(),
                },
                st.steps,
            );
        }
    }

    let witness = witness_from_pairs(h, &st.pairs);
    Verdict::yes(Some(witness), st.steps)
}

/// Turns back-to-front (write, container) pairs into a front-to-back witness.
pub(crate) fn witness_from_pairs(h: &History, pairs: &[(u32, Vec<u32>)]) -> WitnessOrder {
    let ops = h.ops();
    let mut entries = Vec::with_capacity(pairs.len() * 2);
    for (w, container) in pairs.iter().rev() {
        entries.push(WitnessEntry::Slot(ops[*w as usize].id.clone()));
        let mut reads = container.clone();
        reads.sort_by_key(|&r| ops[r as usize].start);
        entries.push(WitnessEntry::Container(
            reads.into_iter().map(|r| ops[r as usize].id.clone()).collect(),
        ));
    }
    WitnessOrder { entries }
}

/// Remaining-write frontier of a finish-sorted write slice: every write that
/// precedes no other write in the slice.
pub fn candidate_frontier<'a>(writes_by_finish: &[&'a crate::history::Operation]) -> Vec<&'a crate::history::Operation> {
    let mut out = Vec::new();
    let mut max_start_after: Option<Time> = None;
    for w in writes_by_finish.iter().rev() {
        if max_start_after.is_some_and(|ms| w.finish < ms) {
            break;
        }
        out.push(*w);
        if max_start_after.is_none_or(|ms| w.start > ms) {
            max_start_after = Some(w.start);
        }
    }
    out.reverse();
    out
}
