//! Index-based view of a history used internally by the verifiers.

use std::collections::HashMap;

use crate::history::{History, Value};

pub(crate) const NONE: u32 = u32::MAX;

/// Per-operation index structure: dictating-write links, per-write dictated
/// read lists, and the start-time order. Requires an anomaly-free history
/// (unique write values, every read dictated by some write).
pub(crate) struct Indexed<'h> {
    pub h: &'h History,
    /// Op indices sorted by start time.
    pub start_order: Vec<u32>,
    /// For reads: index of the dictating write. NONE for writes.
    pub dictating: Vec<u32>,
    /// For writes: indices of dictated reads, in history order.
    pub reads_of: Vec<Vec<u32>>,
    /// Write op indices sorted by finish time.
    pub writes_by_finish: Vec<u32>,
}

impl<'h> Indexed<'h> {
    pub fn new(h: &'h History) -> Self {
        let n = h.len();
        let ops = h.ops();
        let mut write_of_value: HashMap<&Value, u32> = HashMap::with_capacity(n);
        for (i, op) in ops.iter().enumerate() {
            if op.is_write() {
                let prev = write_of_value.insert(&op.value, i as u32);
                assert!(prev.is_none(), "history not validated: duplicate write value");
            }
        }
        let mut dictating = vec![NONE; n];
        let mut reads_of = vec![Vec::new(); n];
        for (i, op) in ops.iter().enumerate() {
            if op.is_read() {
                let w = *write_of_value
                    .get(&op.value)
                    .expect("history not validated: read without dictating write");
                dictating[i] = w;
                reads_of[w as usize].push(i as u32);
            }
        }
        let mut start_order: Vec<u32> = (0..n as u32).collect();
        start_order.sort_unstable_by_key(|&i| ops[i as usize].start);
        let mut writes_by_finish: Vec<u32> =
            (0..n as u32).filter(|&i| ops[i as usize].is_write()).collect();
        writes_by_finish.sort_unstable_by_key(|&i| ops[i as usize].finish);
        Indexed {
            h,
            start_order,
            dictating,
            reads_of,
            writes_by_finish,
        }
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }
}

/// `m * ceil(log2(m))`, the deterministic step cost charged for sorting.
pub(crate) fn sort_cost(m: usize) -> u64 {
    let m = m as u64;
    if m < 2 {
        return m;
    }
    m * (u64::BITS - (m - 1).leading_zeros()) as u64
}
