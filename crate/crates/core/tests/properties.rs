//! Module-level invariants beyond the acceptance criteria: the large
//! cross-verifier differential, the backtracking work bound, oracle
//! self-consistency, weighted degeneration, and order-theoretic properties.

mod common;

use common::{corpus_history, max_concurrent_writes};
use kav::fzf::check_2atomic_fzf;
use kav::generators::{gen_random_small, gen_witnessed, simulate_quorum, GenConfig, QuorumConfig};
use kav::history::{normalize, partition_by_key, precedes, validate, History};
use kav::lbt::check_2atomic_lbt;
use kav::oracle::{
    brute_force_k_atomic, brute_force_k_atomic_with, check_witness, OracleOptions,
};
use kav::verdict::Certificate;
use kav::weighted::{brute_force_weighted, WeightedHistory};
use kav::zones::check_1atomic;

const SEED: u64 = 0xFACADE;

/// FZF and LBT agree on histories far beyond the oracle cap, and their YES
/// witnesses stay checkable.
#[test]
fn fzf_and_lbt_agree_on_large_histories() {
    let mut yes = 0u32;
    let mut no = 0u32;
    let mut case = 0u64;
    let mut check = |h: History| {
        case += 1;
        let h = normalize(&h);
        let f = check_2atomic_fzf(&h);
        let l = check_2atomic_lbt(&h);
        assert_eq!(f.answer, l.answer, "case {case}: fzf {:?} vs lbt {:?}", f.answer, l.answer);
        if f.is_yes() {
            yes += 1;
            assert!(check_witness(&h, f.witness.as_ref().unwrap(), 2), "fzf witness, case {case}");
            assert!(check_witness(&h, l.witness.as_ref().unwrap(), 2), "lbt witness, case {case}");
        } else {
            no += 1;
        }
    };

    for i in 0..40u64 {
        let k = 1 + (i % 3) as u32;
        let stretch = 500 + (i % 5) * 700;
        let cfg = GenConfig {
            seed: SEED + i,
            ops: 200 + (i as usize * 45) % 1800,
            staleness_k: k,
            writes_fraction: 0.3 + (i % 4) as f64 * 0.15,
            max_back: stretch,
            max_forward: stretch,
            ..GenConfig::default()
        };
        check(gen_witnessed(&cfg));
    }

    for i in 0..40u64 {
        let cfg = QuorumConfig {
            seed: SEED + 1000 + i,
            replicas: 3 + (i % 3) as usize,
            write_quorum: 1 + (i % 2) as usize,
            read_quorum: 1 + (i % 3) as usize,
            clients: 2 + (i % 4) as usize,
            ops: 150 + (i as usize * 37) % 450,
            latency: (1, 10 + (i % 4) * 20),
            ..QuorumConfig::default()
        };
        let trace = simulate_quorum(&cfg);
        let h = partition_by_key(&trace).remove("r0").unwrap();
        assert!(validate(&h).is_empty(), "quorum output {i} must validate");
        check(h);
    }

    for i in 0..30u64 {
        check(gen_random_small(SEED + 2000 + i, 10));
    }

    // Large histories that are definitely not 2-atomic: a clean prefix with
    // a read two writes stale appended past its dictating write.
    for i in 0..25u64 {
        let cfg = GenConfig {
            seed: SEED + 3000 + i,
            ops: 100 + (i as usize * 53) % 1500,
            staleness_k: 2,
            ..GenConfig::default()
        };
        let h = gen_witnessed(&cfg);
        let top = h.ops().iter().map(|op| op.finish.0.max(op.start.0)).max().unwrap() + 10;
        let mut ops = h.ops().to_vec();
        ops.push(kav::history::Operation::write("bad-w1", "bad-a", top, top + 2));
        ops.push(kav::history::Operation::write("bad-w2", "bad-b", top + 4, top + 6));
        ops.push(kav::history::Operation::write("bad-w3", "bad-c", top + 8, top + 10));
        ops.push(kav::history::Operation::read("bad-r1", "bad-a", top + 12, top + 14));
        check(History::new(h.key(), ops));
    }

    println!("large differential: {yes} YES / {no} NO across {case} histories");
    assert!(yes >= 20 && no >= 20, "differential needs both outcomes ({yes} YES / {no} NO)");
}

/// The backtracking verifier's removals + undo replays stay within a fixed
/// multiple of c * n on generated traces.
#[test]
fn lbt_work_bound() {
    const C: u64 = 16;
    for (ops, stretch, seed) in
        [(1_000usize, 800u64, 1u64), (10_000, 800, 2), (10_000, 2500, 3), (50_000, 1200, 4)]
    {
        let cfg = GenConfig {
            seed,
            ops,
            staleness_k: 2,
            max_back: stretch,
            max_forward: stretch,
            ..GenConfig::default()
        };
        let h = normalize(&gen_witnessed(&cfg));
        let c = max_concurrent_writes(&h).max(1) as u64;
        let v = check_2atomic_lbt(&h);
        assert!(v.is_yes());
        let bound = C * c * ops as u64;
        println!("lbt work: n={ops} c={c} steps={} bound={bound}", v.stats.steps);
        assert!(v.stats.steps <= bound, "steps {} over bound {bound}", v.stats.steps);
    }
}

/// The chunk verifier's step counter stays within a fixed multiple of
/// n * log2(n) on generated traces.
#[test]
fn fzf_work_bound() {
    const C: u64 = 8;
    for (ops, stretch, seed) in
        [(1_000usize, 800u64, 21u64), (10_000, 2500, 22), (100_000, 1500, 23)]
    {
        let cfg = GenConfig {
            seed,
            ops,
            staleness_k: 2,
            max_back: stretch,
            max_forward: stretch,
            ..GenConfig::default()
        };
        let h = normalize(&gen_witnessed(&cfg));
        let v = check_2atomic_fzf(&h);
        assert!(v.is_yes());
        let log2n = u64::from(usize::BITS - (ops - 1).leading_zeros());
        let bound = C * ops as u64 * log2n;
        println!("fzf work: n={ops} steps={} bound={bound}", v.stats.steps);
        assert!(v.stats.steps <= bound, "steps {} over bound {bound}", v.stats.steps);
    }
}

/// The witnessed generator's staleness parameter upper-bounds the true
/// minimal k on every output small enough for the exhaustive scan.
#[test]
fn witnessed_staleness_bounds_min_k() {
    use kav::oracle::{min_k, MinK};
    for seed in 0..150u64 {
        let k = 1 + (seed % 3) as u32;
        let cfg = GenConfig {
            seed: SEED + 7000 + seed,
            ops: 3 + (seed % 10) as usize,
            staleness_k: k,
            max_back: 2500,
            max_forward: 2500,
            ..GenConfig::default()
        };
        let h = normalize(&gen_witnessed(&cfg));
        match min_k(&h, 12) {
            MinK::Exact(found) => assert!(found <= k, "seed {seed}: min_k {found} > {k}"),
            MinK::Unknown { .. } => panic!("seed {seed}: history fits under the cap"),
        }
    }
}

/// `min_k` equals the smallest k the oracle accepts, across the corpus.
#[test]
fn min_k_matches_direct_oracle_scan() {
    use kav::oracle::{min_k, MinK};
    for i in 0..2_000u64 {
        let h = normalize(&corpus_history(0xC0FFEE, i, 10));
        let direct = (1..)
            .find(|&k| brute_force_k_atomic(&h, k).unwrap().is_yes())
            .expect("anomaly-free histories are k-atomic for some k");
        assert_eq!(min_k(&h, 12), MinK::Exact(direct), "history {i}");
    }
}

/// The oracle's verdict does not depend on the order candidates are tried.
#[test]
fn oracle_self_consistency_under_shuffle() {
    for i in 0..500u64 {
        let h = corpus_history(SEED ^ 0x5151, i, 10);
        let baseline = brute_force_k_atomic(&h, 2).unwrap().is_yes();
        for tie_seed in 1..=3u64 {
            let opts = OracleOptions { cap: 12, tie_seed: Some(tie_seed) };
            let shuffled = brute_force_k_atomic_with(&h, 2, &opts).unwrap().is_yes();
            assert_eq!(shuffled, baseline, "history {i}, tie seed {tie_seed}");
        }
    }
}

/// With unit weights the weighted checker and the plain oracle coincide.
#[test]
fn weighted_oracle_degenerates_to_unit() {
    for i in 0..10_000u64 {
        let h = corpus_history(0xC0FFEE, i, 10);
        let weighted = WeightedHistory::unit(h.clone());
        for k in 1..=3u32 {
            let plain = brute_force_k_atomic(&h, k).unwrap().is_yes();
            let w = brute_force_weighted(&weighted, u64::from(k), 12).unwrap().is_yes();
            assert_eq!(w, plain, "history {i} at k={k}");
        }
    }
}

/// 1-atomicity implies 2-atomicity, verifier to verifier.
#[test]
fn one_atomic_histories_are_two_atomic() {
    let mut hits = 0u32;
    for i in 0..2_000u64 {
        let h = normalize(&corpus_history(0xC0FFEE, i, 10));
        if check_1atomic(&h).is_yes() {
            hits += 1;
            assert!(check_2atomic_lbt(&h).is_yes(), "history {i}");
            assert!(check_2atomic_fzf(&h).is_yes(), "history {i}");
        }
    }
    assert!(hits > 0);
}

/// A NO from the zone checker carries a pair that re-proves the violation.
#[test]
fn gk_certificates_self_validate() {
    let mut no_cases = 0u32;
    for i in 0..3_000u64 {
        let h = normalize(&corpus_history(0xC0FFEE, i, 10));
        let v = check_1atomic(&h);
        if v.is_yes() {
            continue;
        }
        no_cases += 1;
        match v.certificate.expect("NO carries a certificate") {
            Certificate::ForwardZonesOverlap { first_interval, second_interval, .. } => {
                let (a, b) = if first_interval.0 < second_interval.0 {
                    (first_interval, second_interval)
                } else {
                    (second_interval, first_interval)
                };
                assert!(b.0 < a.1, "history {i}: zones do not overlap");
            }
            Certificate::BackwardZoneContained { forward_interval, backward_interval, .. } => {
                assert!(forward_interval.0 < backward_interval.0, "history {i}");
                assert!(backward_interval.1 < forward_interval.1, "history {i}");
            }
            other => panic!("history {i}: unexpected certificate {other:?}"),
        }
    }
    assert!(no_cases > 0);
}

/// `precedes` is a strict partial order: irreflexive, antisymmetric and
/// transitive, checked by exhaustive triple enumeration on small histories.
#[test]
fn precedes_is_a_strict_partial_order() {
    for i in 0..300u64 {
        let h = corpus_history(SEED ^ 0xABCD, i, 8);
        let ops = h.ops();
        for a in ops {
            assert!(!precedes(a, a));
            for b in ops {
                if precedes(a, b) {
                    assert!(!precedes(b, a));
                }
                for c in ops {
                    if precedes(a, b) && precedes(b, c) {
                        assert!(precedes(a, c));
                    }
                }
            }
        }
    }
}

/// Locality: cross-key operations never constrain each other, so per-key
/// verification of a merged trace equals verifying each key alone.
#[test]
fn per_key_verification_is_local() {
    for i in 0..50u64 {
        let h1 = gen_random_small(SEED + 4000 + i, 8);
        let h2 = gen_random_small(SEED + 5000 + i, 7);
        let mut records = Vec::new();
        for op in h1.ops() {
            records.push(kav::history::TraceRecord { key: "a".into(), op: op.clone(), weight: None });
        }
        for op in h2.ops() {
            records.push(kav::history::TraceRecord { key: "b".into(), op: op.clone(), weight: None });
        }
        let merged = partition_by_key(&kav::history::Trace { records });
        for (key, standalone) in [("a", &h1), ("b", &h2)] {
            let from_merge = normalize(&merged[key]);
            let alone = normalize(standalone);
            assert_eq!(
                check_2atomic_fzf(&from_merge).answer,
                check_2atomic_fzf(&alone).answer,
                "key {key}, case {i}"
            );
        }
    }
}
