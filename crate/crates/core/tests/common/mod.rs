//! Shared fixtures and helpers for the integration test suites.

use kav::history::{History, Operation};

/// A history whose zone structure is the three-chunk layout used as a
/// regression fixture: eight forward zones FZ1..FZ8 and seven backward zones
/// BZ1..BZ7 arranged so that the chunks are {FZ1, BZ1},
/// {FZ2, FZ3, FZ4, BZ3, BZ4} and {FZ5, FZ6, FZ7, FZ8, BZ6}, with BZ2, BZ5
/// and BZ7 dangling.
///
/// A forward zone [l, h] is realized as a write [l-1, l] plus one read
/// [h, h+1]; a backward zone [l, h] as a lone write [l, h]. All endpoints
/// are distinct.
pub fn three_chunk_fixture() -> History {
    let forward: &[(&str, u64, u64)] = &[
        ("fz1", 100, 200),
        ("fz2", 300, 400),
        ("fz3", 380, 480),
        ("fz4", 460, 600),
        ("fz5", 700, 800),
        ("fz6", 780, 880),
        ("fz7", 860, 960),
        ("fz8", 940, 1040),
    ];
    let backward: &[(&str, u64, u64)] = &[
        ("bz1", 120, 180),
        ("bz2", 220, 280),
        ("bz3", 320, 360),
        ("bz4", 500, 560),
        ("bz5", 580, 660),
        ("bz6", 820, 900),
        ("bz7", 1000, 1100),
    ];
    let mut ops = Vec::new();
    for &(value, low, high) in forward {
        ops.push(Operation::write(format!("w-{value}"), value, low - 1, low));
        ops.push(Operation::read(format!("r-{value}"), value, high, high + 1));
    }
    for &(value, low, high) in backward {
        ops.push(Operation::write(format!("w-{value}"), value, low, high));
    }
    History::new("fig", ops)
}

/// Sizes used for the seeded differential corpus: history i has
/// `(i % max_n) + 1` operations.
pub fn corpus_history(base_seed: u64, i: u64, max_n: u64) -> History {
    kav::generators::gen_random_small(base_seed + i, ((i % max_n) + 1) as usize)
}

/// All permutations of the input, in a deterministic order.
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// Maximum number of writes concurrent at any single point in time.
pub fn max_concurrent_writes(h: &History) -> usize {
    let mut events: Vec<(u64, i32)> = Vec::new();
    for op in h.writes() {
        events.push((op.start.0, 1));
        events.push((op.finish.0, -1));
    }
    events.sort_unstable();
    let mut current = 0i32;
    let mut max = 0i32;
    for (_, delta) in events {
        current += delta;
        max = max.max(current);
    }
    max as usize
}

/// Prints the acceptance line for a criterion and fails the test if it did
/// not hold.
pub fn conclude(criterion: &str, ok: bool) {
    println!("acceptance {criterion}: {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "acceptance {criterion} failed");
}
