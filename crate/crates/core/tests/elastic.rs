use std::collections::HashMap;

use hashprobe::probe::phi;
use hashprobe::table::Lookup;
use hashprobe::verify::check_elastic_trial;
use hashprobe::{
    build_elastic_layout, f_budget, plan_batches, ElasticParams, ElasticTable, Key, OpenTable,
    ProbeSource, Tag,
};
use proptest::prelude::*;

#[test]
fn batch_invariants_on_grid() {
    for n in [1usize << 6, 1 << 10, 1 << 14] {
        for k in [2, 4] {
            for seed in 0..5 {
                check_elastic_trial(n, k, 4, seed)
                    .unwrap_or_else(|e| panic!("n={n} k={k} seed={seed}: {e}"));
            }
        }
    }
}

#[test]
fn batch_invariants_with_small_and_large_budgets() {
    for c in [1, 2, 8] {
        check_elastic_trial(1 << 12, 3, c, 11).unwrap_or_else(|e| panic!("c={c}: {e}"));
    }
}

/// Slot `h_{a, j}` recomputed from the probe source alone.
fn probe_slot(source: &ProbeSource, sizes: &[usize], key: Key, array: usize, j: u64) -> usize {
    let offset: usize = sizes[..array - 1].iter().sum();
    offset + source.probe(key, array as u64, j, sizes[array - 1] as u64) as usize
}

/// Finds a Case-1 spill into `A_{i+1}` at `j = 1` and replays it: every
/// budgeted probe into `A_i` must hit a slot filled earlier, and the record
/// charges `budget + 1` insertion probes but `phi(i+1, 1)` search probes.
#[test]
fn case1_spill_replays_against_probe_source() {
    let mut witnessed = 0;
    for seed in 0..40 {
        let params = ElasticParams::new(1 << 12, 3, 1, seed).unwrap();
        let mut table = ElasticTable::new(params).unwrap();
        let sizes = table.layout().sizes.clone();
        let source = ProbeSource::new(seed);
        let mut filled_at: HashMap<u64, u64> = HashMap::new();
        for k in 0..params.insertions() as u64 {
            let batch = table.next_batch().unwrap();
            let budget = if batch > 0 {
                table.current_budget(batch).unwrap()
            } else {
                0
            };
            let p = table.insert_key(Key(k)).unwrap();
            filled_at.insert(p.slot, k);
            let Tag::Elastic {
                case: 1,
                array,
                j: 1,
                ..
            } = p.tag
            else {
                continue;
            };
            if array as usize != batch + 1 || budget == 0 {
                continue;
            }
            let i = batch;
            for jj in 1..=budget {
                let s = probe_slot(&source, &sizes, Key(k), i, jj) as u64;
                assert!(
                    filled_at.get(&s).is_some_and(|&by| by < k),
                    "probe {jj} of key {k} hit empty slot {s}"
                );
            }
            assert_eq!(
                p.slot as usize,
                probe_slot(&source, &sizes, Key(k), i + 1, 1)
            );
            assert_eq!(p.insert_probes, budget + 1);
            assert_eq!(p.search_probes, phi(i as u64 + 1, 1).unwrap());
            witnessed += 1;
        }
    }
    assert!(witnessed > 0, "no Case-1 spill at j = 1 found");
}

#[test]
fn case2_never_probes_lower_array() {
    let params = ElasticParams::new(1 << 12, 2, 4, 5).unwrap();
    let mut table = ElasticTable::new(params).unwrap();
    let mut seen = 0;
    for k in 0..params.insertions() as u64 {
        let p = table.insert_key(Key(k)).unwrap();
        if let Tag::Elastic {
            case: 2,
            batch,
            array,
            j,
        } = p.tag
        {
            assert_eq!(array, batch + 1);
            assert_eq!(p.insert_probes, j);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn first_insertion_lookup_costs_thirteen() {
    let mut table = ElasticTable::new(ElasticParams::new(1 << 10, 2, 4, 0).unwrap()).unwrap();
    let p = table.insert_key(Key(0)).unwrap();
    assert_eq!(p.search_probes, 13);
    assert_eq!(
        table.lookup(Key(0)),
        Lookup::Found {
            probes: 13,
            slot: p.slot
        }
    );
    assert!(!table.lookup(Key(99)).is_found());
}

#[test]
fn budget_edge_cases() {
    assert_eq!(f_budget(1.0, 1.0 / 256.0, 4).unwrap(), 0);
    assert_eq!(f_budget(0.5, 1.0 / 256.0, 3).unwrap(), 3);
    assert!(f_budget(0.0, 0.25, 4).is_err());
}

fn plan_oracle(sizes: &[usize], k: u32, m: usize) -> Vec<usize> {
    let size = |i: usize| sizes.get(i).copied().unwrap_or(0) as f64;
    let delta = 0.5f64.powi(k as i32);
    let mut raw = vec![(0.75 * size(0)).ceil() as usize];
    for i in 0..sizes.len() {
        let b = size(i) - (delta * size(i) / 2.0).floor() - (0.75 * size(i)).ceil()
            + (0.75 * size(i + 1)).ceil();
        raw.push(b.max(0.0) as usize);
    }
    let mut out = Vec::new();
    let mut left = m;
    for b in raw {
        if left == 0 {
            break;
        }
        out.push(b.min(left));
        left -= b.min(left);
    }
    out
}

proptest! {
    #[test]
    fn layout_conserves_and_halves(log_n in 1u32..24) {
        let n = 1usize << log_n;
        let layout = build_elastic_layout(n).unwrap();
        prop_assert_eq!(layout.sizes.iter().sum::<usize>(), n);
        prop_assert_eq!(layout.len() as u32, log_n);
        for w in layout.sizes.windows(2) {
            prop_assert!(w[1] + 1 >= w[0] / 2 && w[1] <= w[0] / 2 + 1, "{:?}", layout.sizes);
        }
        for (i, w) in layout.offsets.windows(2).enumerate() {
            prop_assert_eq!(w[1] - w[0], layout.sizes[i]);
        }
    }

    #[test]
    fn layout_conserves_any_n(n in 2usize..100_000) {
        let layout = build_elastic_layout(n).unwrap();
        prop_assert_eq!(layout.sizes.iter().sum::<usize>(), n);
        prop_assert!(layout.sizes.iter().all(|&s| s > 0));
    }

    #[test]
    fn plan_matches_float_oracle(log_n in 6u32..22, k in 1u32..6) {
        let n = 1usize << log_n;
        let layout = build_elastic_layout(n).unwrap();
        let plan = plan_batches(&layout, k).unwrap();
        let m = n - (n >> k);
        prop_assert_eq!(plan.total_insertions, m);
        prop_assert_eq!(plan.batch_sizes.iter().sum::<usize>(), m);
        prop_assert_eq!(plan.batch_sizes.clone(), plan_oracle(&layout.sizes, k, m));
        prop_assert!(plan.non_empty_batches() as u32 <= 2 * k + 2);
    }
}
