//! Property checks over the tables, shared by the `verify` subcommand and
//! the test suites.
//!
//! Each check returns `Ok(detail)` or `Err(reason)`; [`run_suite`] runs them
//! all and produces a named pass/fail report.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::elastic::{fill_target, three_quarters_ceil, ElasticParams, ElasticTable};
use crate::experiment::{fill_table, run_point, Execution, TableConfig};
use crate::funnel::{FunnelParams, FunnelTable};
use crate::metrics::{growth_fit, Scheme, Tag};
use crate::probe::{phi, phi_decode, Key, ProbeIndexPair, ProbeSource};
use crate::table::{log_log, OpenTable};

pub type CheckResult = Result<String, String>;

/// Upper 1e-6 tail of the chi-square distribution with 63 degrees of freedom.
pub const CHI2_63_CRITICAL_1E6: f64 = 131.36970205168686;

/// Deliberate defects used to confirm that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Drops the lowest bit of every encoded pair.
    PhiShift,
}

fn encoder(fault: Option<Fault>) -> impl Fn(u64, u64) -> Option<u64> {
    move |i, j| {
        let p = phi(i, j).ok()?;
        Some(match fault {
            Some(Fault::PhiShift) => p >> 1,
            None => p,
        })
    }
}

/// Every `(i, j)` in `[1, max]^2` encodes to a distinct value.
pub fn check_phi_injective(max: u64, fault: Option<Fault>) -> CheckResult {
    let enc = encoder(fault);
    let mut values = Vec::with_capacity((max * max) as usize);
    for i in 1..=max {
        for j in 1..=max {
            values.push((enc(i, j).ok_or(format!("phi({i}, {j}) overflowed"))?, i, j));
        }
    }
    values.sort_unstable();
    if let Some(w) = values.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(format!(
            "phi({}, {}) = phi({}, {}) = {}",
            w[0].1, w[0].2, w[1].1, w[1].2, w[0].0
        ));
    }
    Ok(format!("{} distinct values", values.len()))
}

pub fn check_phi_round_trip(max: u64, fault: Option<Fault>) -> CheckResult {
    let enc = encoder(fault);
    for i in 1..=max {
        for j in 1..=max {
            let p = enc(i, j).ok_or(format!("phi({i}, {j}) overflowed"))?;
            if phi_decode(p) != Some(ProbeIndexPair { i, j }) {
                return Err(format!("decode(phi({i}, {j}) = {p}) = {:?}", phi_decode(p)));
            }
        }
    }
    Ok(format!("{} pairs", max * max))
}

pub fn check_phi_bound(max: u64, fault: Option<Fault>) -> CheckResult {
    let enc = encoder(fault);
    for i in 1..=max {
        for j in 1..=max {
            let p = enc(i, j).ok_or(format!("phi({i}, {j}) overflowed"))?;
            if p as u128 >= 16 * i as u128 * (j as u128).pow(2) {
                return Err(format!("phi({i}, {j}) = {p} >= 16 i j^2"));
            }
        }
    }
    Ok("phi(i, j) < 16 i j^2".into())
}

/// Chi-square statistic of `samples` probes of one key over `modulus` slots.
pub fn probe_chi_square(seed: u64, key: Key, samples: u64, modulus: u64) -> f64 {
    let source = ProbeSource::new(seed);
    let mut counts = vec![0u64; modulus as usize];
    for idx in 1..=samples {
        counts[source.probe(key, 0, idx, modulus) as usize] += 1;
    }
    let expected = samples as f64 / modulus as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

pub fn check_probe_uniformity() -> CheckResult {
    let stat = probe_chi_square(1, Key(7), 1_000_000, 64);
    if stat < CHI2_63_CRITICAL_1E6 {
        Ok(format!("chi2 = {stat:.2} (63 dof)"))
    } else {
        Err(format!(
            "chi2 = {stat:.2} exceeds {CHI2_63_CRITICAL_1E6:.2}"
        ))
    }
}

/// Occupancy every array must have once batch `batch` has completed.
pub fn expected_batch_occupancy(sizes: &[usize], log2_inv_delta: u32, batch: usize) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .map(|(a, &s)| match a.cmp(&batch) {
            std::cmp::Ordering::Less => fill_target(s, log2_inv_delta),
            std::cmp::Ordering::Equal => three_quarters_ceil(s),
            std::cmp::Ordering::Greater => 0,
        })
        .collect()
}

/// Fills an elastic table and checks, along the way: exact occupancy at
/// every completed batch boundary, that Cases 2 and 3 never share a batch,
/// that Case-1 spills into `A_{i+1}` are charged `phi(i+1, j)` for search
/// and `budget + j` for insertion, that no slot is overwritten, and the final
/// occupancy totals.
pub fn check_elastic_trial(n: usize, log2_inv_delta: u32, c: u32, seed: u64) -> CheckResult {
    let params = ElasticParams::new(n, log2_inv_delta, c, seed).map_err(|e| e.to_string())?;
    let mut table = ElasticTable::new(params).map_err(|e| e.to_string())?;
    let m = params.insertions();
    let sizes = table.layout().sizes.clone();
    let boundaries = table.plan().boundaries();
    let mut cases_per_batch: BTreeMap<usize, [bool; 4]> = BTreeMap::new();
    let mut placed = Vec::with_capacity(m);
    let mut boundaries_checked = 0;

    for k in 0..m as u64 {
        let batch = table.next_batch().ok_or("plan exhausted early")?;
        let budget = if batch > 0 {
            table.current_budget(batch).ok()
        } else {
            None
        };
        let p = table
            .insert_key(Key(k))
            .map_err(|e| format!("insert {k}: {e}"))?;
        let Tag::Elastic {
            batch: b,
            case,
            array,
            j,
        } = p.tag
        else {
            return Err("non-elastic tag".into());
        };
        if b as usize != batch {
            return Err(format!("insert {k}: tagged batch {b}, expected {batch}"));
        }
        if array as usize != batch.max(1) && array as usize != batch + 1 {
            return Err(format!("insert {k}: batch {batch} wrote to array {array}"));
        }
        let expected_search = phi(array as u64, j).map_err(|e| e.to_string())?;
        if p.search_probes != expected_search {
            return Err(format!(
                "insert {k}: search {} != phi({array}, {j})",
                p.search_probes
            ));
        }
        if case == 1 && array as usize == batch + 1 {
            let budget = budget.ok_or("case 1 without budget")?;
            if p.insert_probes != budget + j {
                return Err(format!(
                    "insert {k}: spill charged {} probes, budget {budget} + j {j}",
                    p.insert_probes
                ));
            }
        }
        cases_per_batch.entry(batch).or_default()[case as usize] = true;
        placed.push((p.slot, Key(k)));

        let done = k as usize + 1;
        if let Ok(b) = boundaries.binary_search(&done) {
            let expected = expected_batch_occupancy(&sizes, log2_inv_delta, b);
            // A truncated final batch has no boundary guarantee.
            if expected.iter().sum::<usize>() == done && table.occupancy() != expected.as_slice() {
                return Err(format!(
                    "after batch {b}: occupancy {:?}, expected {expected:?}",
                    table.occupancy()
                ));
            }
            boundaries_checked += 1;
        }
    }

    if let Some((b, _)) = cases_per_batch.iter().find(|(_, c)| c[2] && c[3]) {
        return Err(format!("batch {b} mixes case 2 and case 3"));
    }
    check_placements(table.slots(), &placed)?;
    let free = table.slots().iter().filter(|s| s.is_none()).count();
    if table.len() != m || free != n >> log2_inv_delta {
        return Err(format!("final occupancy {} / free {free}", table.len()));
    }
    Ok(format!("{boundaries_checked} batch boundaries"))
}

/// Every key still sits where it was placed and no two keys share a slot.
pub fn check_placements(slots: &[Option<Key>], placed: &[(u64, Key)]) -> Result<(), String> {
    let mut seen = vec![false; slots.len()];
    for &(slot, key) in placed {
        let s = slot as usize;
        if seen[s] {
            return Err(format!("slot {slot} assigned twice"));
        }
        seen[s] = true;
        if slots[s] != Some(key) {
            return Err(format!("slot {slot} holds {:?}, expected {key}", slots[s]));
        }
    }
    Ok(())
}

/// Probe cap, greedy identity and the two-choice rule on every insertion.
pub fn check_funnel_trial(n: usize, log2_inv_delta: u32, seed: u64) -> CheckResult {
    let params = FunnelParams::new(n, log2_inv_delta, seed).map_err(|e| e.to_string())?;
    let mut table = FunnelTable::new(params).map_err(|e| e.to_string())?;
    let layout = table.layout().clone();
    let cap = (layout.alpha * layout.beta) as u64 + 5 * log_log(n as u64);
    let mut placed = Vec::new();
    let mut max = 0;
    for k in 0..params.insertions() as u64 {
        let key = Key(k);
        let (a, b) = table.c_choices(key);
        let fill = table.c_bucket_occupancy().to_vec();
        let p = table
            .insert_key(key)
            .map_err(|e| format!("insert {k}: {e}"))?;
        if p.search_probes != p.insert_probes {
            return Err(format!(
                "insert {k}: search {} != insert {}",
                p.search_probes, p.insert_probes
            ));
        }
        if p.insert_probes > cap {
            return Err(format!(
                "insert {k}: {} probes > cap {cap}",
                p.insert_probes
            ));
        }
        if p.tag == Tag::SpecialC {
            let chosen = (p.slot as usize - layout.c_offset()) / layout.c_bucket_size;
            let expected = if fill[a] <= fill[b] { a } else { b };
            if chosen != expected {
                return Err(format!(
                    "insert {k}: C chose {chosen}, fills a={}, b={}",
                    fill[a], fill[b]
                ));
            }
        }
        max = max.max(p.insert_probes);
        placed.push((p.slot, key));
    }
    check_placements(table.slots(), &placed)?;
    if table.len() != params.insertions() {
        return Err(format!("final occupancy {}", table.len()));
    }
    Ok(format!("max {max} probes, cap {cap}"))
}

/// Looking up every inserted key costs exactly its recorded search
/// complexity; keys never inserted are not found.
pub fn check_replay(config: &TableConfig, seed: u64) -> CheckResult {
    let filled = fill_table(config, seed).map_err(|e| e.to_string())?;
    if let Some(e) = filled.failure {
        return Err(format!("trial failed: {e}"));
    }
    let mut recorded: Vec<u64> = filled.placements.iter().map(|p| p.search_probes).collect();
    let mut looked_up = Vec::with_capacity(recorded.len());
    for (k, p) in filled.placements.iter().enumerate() {
        match filled.table.lookup(Key(k as u64)) {
            crate::table::Lookup::Found { probes, slot } => {
                if slot != p.slot {
                    return Err(format!(
                        "key {k} found at slot {slot}, placed at {}",
                        p.slot
                    ));
                }
                looked_up.push(probes);
            }
            miss => return Err(format!("key {k} not found ({miss:?})")),
        }
    }
    recorded.sort_unstable();
    looked_up.sort_unstable();
    if recorded != looked_up {
        return Err("lookup cost multiset differs from recorded search costs".into());
    }
    let m = filled.placements.len() as u64;
    for k in m..m + 64 {
        if filled.table.lookup(Key(k)).is_found() {
            return Err(format!("absent key {k} reported found"));
        }
    }
    Ok(format!("{m} keys"))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Skip the statistical sweeps.
    pub fast: bool,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub result: CheckResult,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub outcomes: Vec<CheckOutcome>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.result.is_ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| o.result.is_err())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let (status, detail) = match &o.result {
                Ok(d) => ("PASS", d.as_str()),
                Err(d) => ("FAIL", d.as_str()),
            };
            out.push_str(&format!(
                "{status} {:<28} {:>7.2}s  {detail}\n",
                o.name, o.seconds
            ));
        }
        out
    }
}

fn all_ok(results: impl IntoIterator<Item = CheckResult>) -> CheckResult {
    let mut details = Vec::new();
    for r in results {
        details.push(r?);
    }
    Ok(format!("{} runs", details.len()))
}

fn sweep_uniform_growth() -> CheckResult {
    let mut points = Vec::new();
    for k in 2..=8 {
        let cfg = TableConfig::new(Scheme::Uniform, 1 << 16, k);
        let p = run_point(&cfg, 1, 5, Execution::Parallel).map_err(|e| e.to_string())?;
        points.push((k as f64, p.summary.amortized_mean));
    }
    let fit = growth_fit(&points).map_err(|e| e.to_string())?;
    if fit.slope >= 0.5 {
        Ok(format!("slope {:.3} per log2(1/delta)", fit.slope))
    } else {
        Err(format!("slope {:.3} < 0.5", fit.slope))
    }
}

fn sweep_funnel_failures() -> CheckResult {
    for k in [3, 6] {
        let cfg = TableConfig::new(Scheme::Funnel, 1 << 16, k);
        let p = run_point(&cfg, 1, 5, Execution::Parallel).map_err(|e| e.to_string())?;
        if p.failures() > 0 {
            return Err(format!("{} failures at delta = 2^-{k}", p.failures()));
        }
    }
    Ok("no overflow".into())
}

pub fn run_suite(opts: VerifyOptions) -> Report {
    type Check = (&'static str, Box<dyn Fn() -> CheckResult>);
    let fault = opts.fault;
    let mut checks: Vec<Check> = vec![
        (
            "phi-injectivity",
            Box::new(move || check_phi_injective(512, fault)),
        ),
        (
            "phi-round-trip",
            Box::new(move || check_phi_round_trip(512, fault)),
        ),
        ("phi-bound", Box::new(move || check_phi_bound(512, fault))),
        ("probe-uniformity", Box::new(check_probe_uniformity)),
        (
            "elastic-batch-invariants",
            Box::new(|| {
                all_ok([1usize << 6, 1 << 10, 1 << 14].into_iter().flat_map(|n| {
                    [2u32, 4]
                        .into_iter()
                        .flat_map(move |k| (0..5).map(move |s| check_elastic_trial(n, k, 4, s)))
                }))
            }),
        ),
        (
            "funnel-probe-cap",
            Box::new(|| {
                all_ok(
                    [3u32, 6]
                        .into_iter()
                        .flat_map(|k| (0..3).map(move |s| check_funnel_trial(1 << 14, k, s))),
                )
            }),
        ),
        (
            "replay-lookup",
            Box::new(|| {
                all_ok(Scheme::ALL.map(|s| check_replay(&TableConfig::new(s, 1 << 14, 4), 1)))
            }),
        ),
    ];
    if !opts.fast {
        checks.push(("uniform-amortized-growth", Box::new(sweep_uniform_growth)));
        checks.push(("funnel-no-overflow", Box::new(sweep_funnel_failures)));
    }
    let outcomes = checks
        .into_iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let result = f();
            CheckOutcome {
                name,
                result,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Report { outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_occupancy_for_64() {
        // after B_1 at n = 64, delta = 1/4: A_1 = 32 - 4, A_2 = ceil(12)
        assert_eq!(
            expected_batch_occupancy(&[32, 16, 8, 4, 2, 2], 2, 1),
            vec![28, 12, 0, 0, 0, 0]
        );
    }

    #[test]
    fn phi_fault_is_caught_as_injectivity() {
        assert!(check_phi_injective(64, None).is_ok());
        let err = check_phi_injective(64, Some(Fault::PhiShift)).unwrap_err();
        assert!(err.contains("phi("), "{err}");
    }

    #[test]
    fn placement_check_detects_overwrite() {
        let slots = vec![Some(Key(1)), None];
        assert!(check_placements(&slots, &[(0, Key(0))]).is_err());
        assert!(check_placements(&slots, &[(0, Key(1)), (0, Key(1))]).is_err());
        assert!(check_placements(&slots, &[(0, Key(1))]).is_ok());
    }
}
