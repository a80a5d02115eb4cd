use hashprobe::table::{log_log, Lookup};
use hashprobe::verify::check_funnel_trial;
use hashprobe::{build_funnel_layout, FunnelParams, FunnelTable, Key, OpenTable, Tag};
use proptest::prelude::*;

fn fill(n: usize, k: u32, seed: u64) -> (FunnelTable, Vec<hashprobe::Placement>) {
    let params = FunnelParams::new(n, k, seed).unwrap();
    let mut table = FunnelTable::new(params).unwrap();
    let placements = (0..params.insertions() as u64)
        .map(|i| table.insert_key(Key(i)).unwrap())
        .collect();
    (table, placements)
}

#[test]
fn probe_cap_greedy_identity_and_two_choice_rule() {
    for (n, k) in [
        (1usize << 12, 3u32),
        (1 << 14, 4),
        (1 << 14, 7),
        (1 << 16, 2),
    ] {
        for seed in 0..3 {
            check_funnel_trial(n, k, seed)
                .unwrap_or_else(|e| panic!("n={n} k={k} seed={seed}: {e}"));
        }
    }
}

/// Each component adds a fixed number of probes before the next one starts.
#[test]
fn probe_counts_decompose_by_component() {
    let (table, placements) = fill(1 << 14, 4, 3);
    let l = table.layout();
    let levels = (l.alpha * l.beta) as u64;
    let b_cap = l.b_probe_cap as u64;
    for p in &placements {
        let x = p.insert_probes;
        match p.tag {
            Tag::Level(level) => {
                let before = (level as u64 - 1) * l.beta as u64;
                assert!(x > before && x <= before + l.beta as u64, "{p:?}");
            }
            Tag::SpecialB => assert!(x > levels && x <= levels + b_cap, "{p:?}"),
            Tag::SpecialC => assert!(
                x > levels + b_cap && x <= levels + b_cap + 2 * l.c_bucket_size as u64,
                "{p:?}"
            ),
            other => panic!("unexpected tag {other}"),
        }
    }
}

#[test]
fn occupancy_bounds_and_conservation() {
    let (table, placements) = fill(1 << 14, 5, 9);
    let l = table.layout().clone();
    for (i, &occ) in table.level_occupancy().iter().enumerate() {
        assert!(occ <= l.level_size(i));
    }
    assert!(table
        .c_bucket_occupancy()
        .iter()
        .all(|&c| c as usize <= l.c_bucket_size));
    let b = placements.iter().filter(|p| p.tag == Tag::SpecialB).count();
    assert_eq!(b, table.b_occupancy());
    let in_levels: usize = table.level_occupancy().iter().sum();
    let in_c: u32 = table.c_bucket_occupancy().iter().sum();
    assert_eq!(in_levels + b + in_c as usize, placements.len());
    assert_eq!(
        table.slots().iter().filter(|s| s.is_some()).count(),
        placements.len()
    );
}

#[test]
fn special_array_b_stays_at_most_half_full() {
    for k in [3, 6] {
        for seed in 0..5 {
            let (table, placements) = fill(1 << 16, k, seed);
            let reaching = placements
                .iter()
                .filter(|p| matches!(p.tag, Tag::SpecialB | Tag::SpecialC))
                .count();
            let special = table.layout().special_size;
            assert!(table.b_occupancy() <= reaching);
            assert!(
                reaching <= special / 2,
                "k={k} seed={seed}: {reaching} keys reached special ({special})"
            );
        }
    }
}

#[test]
fn level_fill_witness() {
    let n = 1 << 18;
    let k = 6;
    let delta = 0.5f64.powi(k as i32);
    for seed in 0..20 {
        let (table, placements) = fill(n, k, seed);
        let l = table.layout().clone();
        let occ = table.level_occupancy();
        // Keys attempting level i are those placed at level i or beyond.
        let depth = |p: &hashprobe::Placement| match p.tag {
            Tag::Level(x) => x as usize,
            _ => l.alpha + 1,
        };
        let mut reached = vec![0usize; l.alpha + 2];
        for p in &placements {
            reached[depth(p)] += 1;
        }
        let mut attempts = 0;
        for level in (1..=l.alpha).rev() {
            attempts += reached[level];
            let cap = l.level_size(level - 1);
            if attempts >= 2 * cap {
                let free = (cap - occ[level - 1]) as f64 / cap as f64;
                assert!(
                    free < delta / 4.0,
                    "seed {seed} level {level}: free fraction {free}"
                );
            }
        }
    }
}

#[test]
fn absent_keys_stop_in_first_bucket_when_it_has_room() {
    let params = FunnelParams::new(1 << 12, 3, 1).unwrap();
    let mut table = FunnelTable::new(params).unwrap();
    for i in 0..100 {
        table.insert_key(Key(i)).unwrap();
    }
    let beta = table.layout().beta as u64;
    for i in 1000..1100 {
        match table.lookup(Key(i)) {
            Lookup::NotFound { probes } => assert!(probes <= beta),
            found => panic!("{found:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layout_invariants(log_n in 10u32..24, k in 1u32..10) {
        let n = 1usize << log_n;
        let params = FunnelParams::new(n, k, 0).unwrap();
        let Ok(l) = build_funnel_layout(&params) else { return Ok(()) };
        let lk = params.layout_log2_inv_delta();
        let dn = n >> lk;
        prop_assert_eq!(l.alpha, 4 * lk as usize + 10);
        prop_assert_eq!(l.beta, 2 * lk as usize);
        prop_assert!(l.special_size >= dn.div_ceil(2) && l.special_size <= 3 * dn / 4);
        prop_assert_eq!((n - l.special_size) % l.beta, 0);
        prop_assert_eq!(l.level_bucket_counts.iter().sum::<usize>() * l.beta, n - l.special_size);
        prop_assert_eq!(l.level_bucket_counts.len(), l.alpha);
        for w in l.level_bucket_counts.windows(2) {
            if w[0] >= 2 && w[1] >= 2 {
                let target = (3 * w[0]).div_ceil(4);
                prop_assert!(w[1] + 1 >= target && w[1] <= target + 1, "{:?}", l.level_bucket_counts);
            }
            prop_assert!(w[1] >= 1 && w[1] <= w[0]);
        }
        prop_assert_eq!(l.special_b_size + l.special_c_size, l.special_size);
        prop_assert!(l.special_b_size.abs_diff(l.special_c_size) <= 1);
        prop_assert_eq!(l.c_bucket_size as u64, 2 * log_log(n as u64));
        prop_assert_eq!(l.c_bucket_count, l.special_c_size / l.c_bucket_size);
        prop_assert_eq!(l.c_waste, l.special_c_size % l.c_bucket_size);
    }
}
