//! CSV and JSON emission for trial records and sweep summaries.
//!
//! Column order is fixed; floats use Rust's shortest round-trip formatting,
//! lines end in `\n`, and a header row is always written.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::experiment::{PointResult, TableConfig};
use crate::metrics::InsertRecord;

pub const PER_INSERTION_HEADER: &str =
    "scheme,n,delta_log2,trial,insert_index,tag,search_probes,insert_probes,slot";
pub const AGGREGATE_HEADER: &str = "scheme,n,delta_log2,trials,failures,amortized_mean,worst_case_expected,max_observed,insert_probes_amortized,insert_probes_worst_expected";

/// `log2(delta)`, i.e. the negated `log2(1/delta)`.
fn delta_log2(config: &TableConfig) -> i64 {
    -(config.log2_inv_delta as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scheme: String,
    pub n: usize,
    pub delta_log2: i64,
    pub trials: usize,
    pub failures: usize,
    pub amortized_mean: f64,
    pub worst_case_expected: f64,
    pub max_observed: u64,
    pub insert_probes_amortized: f64,
    pub insert_probes_worst_expected: f64,
}

impl AggregateRow {
    pub fn from_point(point: &PointResult) -> Self {
        let s = &point.summary;
        Self {
            scheme: point.config.scheme.to_string(),
            n: point.config.n,
            delta_log2: delta_log2(&point.config),
            trials: s.trials,
            failures: s.failure_count,
            amortized_mean: s.amortized_mean,
            worst_case_expected: s.worst_case_expected,
            max_observed: s.max_observed,
            insert_probes_amortized: s.insert_probes_amortized,
            insert_probes_worst_expected: s.insert_probes_worst_expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerInsertionRow {
    pub scheme: String,
    pub n: usize,
    pub delta_log2: i64,
    pub trial: u32,
    pub insert_index: u64,
    pub tag: String,
    pub search_probes: u64,
    pub insert_probes: u64,
    pub slot: u64,
}

impl PerInsertionRow {
    pub fn new(config: &TableConfig, r: &InsertRecord) -> Self {
        Self {
            scheme: r.scheme.to_string(),
            n: config.n,
            delta_log2: delta_log2(config),
            trial: r.trial,
            insert_index: r.insert_index,
            tag: r.tag.to_string(),
            search_probes: r.search_probes,
            insert_probes: r.insert_probes,
            slot: r.slot,
        }
    }
}

pub fn per_insertion_csv<'a, I>(config: &TableConfig, records: I) -> String
where
    I: IntoIterator<Item = &'a InsertRecord>,
{
    let mut out = String::new();
    out.push_str(PER_INSERTION_HEADER);
    out.push('\n');
    let delta = delta_log2(config);
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scheme,
            config.n,
            delta,
            r.trial,
            r.insert_index,
            r.tag,
            r.search_probes,
            r.insert_probes,
            r.slot
        );
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.n,
            r.delta_log2,
            r.trials,
            r.failures,
            r.amortized_mean,
            r.worst_case_expected,
            r.max_observed,
            r.insert_probes_amortized,
            r.insert_probes_worst_expected
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: String,
    pub seed: u64,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Metadata {
    pub fn new(seed: u64, wall_time_s: f64, warnings: Vec<String>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            wall_time_s,
            warnings,
        }
    }
}

#[derive(Serialize)]
struct JsonDocument<'a, T: Serialize> {
    metadata: &'a Metadata,
    rows: &'a [T],
}

pub fn to_json<T: Serialize>(metadata: &Metadata, rows: &[T]) -> String {
    let mut s =
        serde_json::to_string_pretty(&JsonDocument { metadata, rows }).expect("rows serialize");
    s.push('\n');
    s
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Scheme, Tag};

    #[test]
    fn per_insertion_format() {
        let cfg = TableConfig::new(Scheme::Funnel, 1024, 3);
        let r = InsertRecord {
            trial: 0,
            insert_index: 5,
            scheme: Scheme::Funnel,
            tag: Tag::Level(2),
            search_probes: 8,
            insert_probes: 8,
            slot: 700,
        };
        assert_eq!(
            per_insertion_csv(&cfg, [&r]),
            format!("{PER_INSERTION_HEADER}\nfunnel,1024,-3,0,5,level2,8,8,700\n")
        );
    }

    #[test]
    fn floats_use_shortest_form() {
        let row = AggregateRow {
            scheme: "uniform".into(),
            n: 64,
            delta_log2: -2,
            trials: 1,
            failures: 0,
            amortized_mean: 2.0,
            worst_case_expected: 0.1 + 0.2,
            max_observed: 3,
            insert_probes_amortized: 2.5,
            insert_probes_worst_expected: 3.0,
        };
        let csv = aggregate_csv(&[row]);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "uniform,64,-2,1,0,2,0.30000000000000004,3,2.5,3"
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"first\n").unwrap();
        write_atomic(&path, b"second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
