//! Query-log ingestion, signature clustering and benchmark construction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::perfstats::{self, SloRange};
use crate::signature::{signature_of_sql, SignatureOptions};
use crate::values::{coerce, fnv1a64, LogicalType, Value};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const DEFAULT_WINDOW_DAYS: i64 = 7;
pub const FULL_COVERAGE_WINDOW_DAYS: i64 = 30;
pub const BENCHMARK_VERSION: u32 = 1;
pub const UNPARSED_PREFIX: &str = "UNPARSED:";
pub const TEMPLATE_ID_FIELD: &str = "template_id";

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("IO_ERROR: {0}")]
    Io(#[from] std::io::Error),
    #[error("INVALID_BENCHMARK: {0}")]
    InvalidBenchmark(String),
    #[error("EMPTY_INPUT: no clusters to build a benchmark from")]
    NoClusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLogRecord {
    /// Epoch seconds, always > 0.
    pub time: i64,
    pub query_id: String,
    pub account_id: Option<String>,
    pub engine: Option<String>,
    pub query: String,
    pub status: Option<String>,
    pub duration_ms: Option<u64>,
    pub cpu_ms: Option<u64>,
    pub peak_memory_bytes: Option<u64>,
    pub rows_read: Option<u64>,
    pub rows_written: Option<u64>,
    pub partitions_read: Option<u64>,
    /// Fields this version does not know about, kept verbatim.
    pub extras: BTreeMap<String, Value>,
}

const KNOWN_FIELDS: &[&str] = &[
    "time",
    "query_id",
    "account_id",
    "engine",
    "query",
    "status",
    "duration_ms",
    "cpu_ms",
    "peak_memory_bytes",
    "rows_read",
    "rows_written",
    "partitions_read",
];

impl QueryLogRecord {
    pub fn new(time: i64, query_id: impl Into<String>, query: impl Into<String>) -> Self {
        QueryLogRecord {
            time,
            query_id: query_id.into(),
            account_id: None,
            engine: None,
            query: query.into(),
            status: None,
            duration_ms: None,
            cpu_ms: None,
            peak_memory_bytes: None,
            rows_read: None,
            rows_written: None,
            partitions_read: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_duration(mut self, ms: u64) -> Self {
        self.duration_ms = Some(ms);
        self
    }

    /// One JSON-lines record in the log format.
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (k, v) in &self.extras {
            m.insert(k.clone(), v.to_json());
        }
        m.insert("time".into(), self.time.into());
        m.insert("query_id".into(), self.query_id.clone().into());
        m.insert("query".into(), self.query.clone().into());
        let strings = [
            ("account_id", &self.account_id),
            ("engine", &self.engine),
            ("status", &self.status),
        ];
        for (k, v) in strings {
            if let Some(v) = v {
                m.insert(k.into(), v.clone().into());
            }
        }
        let counters = [
            ("duration_ms", self.duration_ms),
            ("cpu_ms", self.cpu_ms),
            ("peak_memory_bytes", self.peak_memory_bytes),
            ("rows_read", self.rows_read),
            ("rows_written", self.rows_written),
            ("partitions_read", self.partitions_read),
        ];
        for (k, v) in counters {
            if let Some(v) = v {
                m.insert(k.into(), v.into());
            }
        }
        serde_json::Value::Object(m)
    }

    /// Tolerant decoding of one parsed JSON line. None when a required
    /// field (time > 0, query_id, query) is missing or unconvertible.
    pub fn from_json(json: &serde_json::Value) -> Option<QueryLogRecord> {
        let obj = json.as_object()?;
        let field = |k: &str, t: LogicalType| obj.get(k).map(|j| coerce(&Value::from_json(j), t));
        let string = |k: &str| match field(k, LogicalType::Varchar) {
            Some(Value::Str(s)) => Some(s),
            _ => None,
        };
        let counter = |k: &str| match field(k, LogicalType::Bigint) {
            Some(Value::Int(i)) if i >= 0 => Some(i as u64),
            _ => None,
        };
        let time = match field("time", LogicalType::Bigint) {
            Some(Value::Int(t)) if t > 0 => t,
            _ => return None,
        };
        let query_id = string("query_id").filter(|s| !s.is_empty())?;
        let query = string("query")?;
        let extras = obj
            .iter()
            .filter(|(k, _)| !KNOWN_FIELDS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), Value::from_json(v)))
            .collect();
        Some(QueryLogRecord {
            time,
            query_id,
            account_id: string("account_id"),
            engine: string("engine"),
            query,
            status: string("status"),
            duration_ms: counter("duration_ms"),
            cpu_ms: counter("cpu_ms"),
            peak_memory_bytes: counter("peak_memory_bytes"),
            rows_read: counter("rows_read"),
            rows_written: counter("rows_written"),
            partitions_read: counter("partitions_read"),
            extras,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub lines: usize,
    pub records: usize,
    /// Lines dropped for any reason (blank, not UTF-8, not JSON, missing
    /// required fields, duplicate query_id).
    pub skipped: usize,
    pub duplicate_ids: usize,
}

/// An immutable collection of log records with unique query ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    records: Vec<QueryLogRecord>,
    index: BTreeMap<String, usize>,
    pub stats: IngestStats,
}

impl Workload {
    /// Builds a workload, keeping the first record for each query_id.
    pub fn from_records(records: impl IntoIterator<Item = QueryLogRecord>) -> Workload {
        let mut w = Workload::default();
        for r in records {
            w.stats.lines += 1;
            w.push(r);
        }
        w
    }

    fn push(&mut self, r: QueryLogRecord) {
        if r.time <= 0 || self.index.contains_key(&r.query_id) {
            self.stats.skipped += 1;
            if self.index.contains_key(&r.query_id) {
                self.stats.duplicate_ids += 1;
            }
            return;
        }
        self.index.insert(r.query_id.clone(), self.records.len());
        self.records.push(r);
        self.stats.records += 1;
    }

    pub fn records(&self) -> &[QueryLogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, query_id: &str) -> Option<&QueryLogRecord> {
        self.index.get(query_id).map(|&i| &self.records[i])
    }

    /// Smallest range covering every record.
    pub fn time_span(&self) -> Option<TimeRange> {
        let lo = self.records.iter().map(|r| r.time).min()?;
        let hi = self.records.iter().map(|r| r.time).max()?;
        Some(TimeRange { from: lo, to: hi + 1 })
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json().to_string());
            out.push('\n');
        }
        out
    }
}

/// Reads a JSON-lines log. Only I/O failures are errors; bad lines are
/// counted in [`IngestStats::skipped`].
pub fn ingest<R: BufRead>(mut source: R) -> Result<Workload, WorkloadError> {
    let mut w = Workload::default();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = source.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        w.stats.lines += 1;
        let record = std::str::from_utf8(&buf)
            .ok()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
            .and_then(|j| QueryLogRecord::from_json(&j));
        match record {
            Some(r) => w.push(r),
            None => w.stats.skipped += 1,
        }
    }
    Ok(w)
}

/// Half-open interval `[from, to)` of epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub from: i64,
    pub to: i64,
}

impl TimeRange {
    pub fn new(from: i64, to: i64) -> Option<TimeRange> {
        (from < to).then_some(TimeRange { from, to })
    }

    pub fn all() -> TimeRange {
        TimeRange {
            from: i64::MIN,
            to: i64::MAX,
        }
    }

    /// The `days` days ending (exclusively) at `end`.
    pub fn last_days(end: i64, days: i64) -> TimeRange {
        TimeRange {
            from: end.saturating_sub(days.saturating_mul(SECONDS_PER_DAY)),
            to: end,
        }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.from <= t && t < self.to
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKey {
    #[default]
    Signature,
    /// `extras.template_id` when present, signature otherwise.
    TemplateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub signature: SignatureOptions,
    pub key: ClusterKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterMember {
    pub query_id: String,
    pub time: i64,
    pub duration_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCluster {
    /// Rendered signature, `template:<id>`, or `UNPARSED:<hash>`.
    pub signature: String,
    /// Ordered by (time, query_id).
    pub members: Vec<ClusterMember>,
    pub first_seen: i64,
    pub last_seen: i64,
    pub distinct_days: usize,
    pub unparsed: bool,
}

impl QueryCluster {
    fn from_members(signature: String, mut members: Vec<ClusterMember>, unparsed: bool) -> QueryCluster {
        members.sort_by(|a, b| (a.time, &a.query_id).cmp(&(b.time, &b.query_id)));
        let days: BTreeSet<i64> = members.iter().map(|m| utc_day(m.time)).collect();
        QueryCluster {
            signature,
            first_seen: members.first().map_or(0, |m| m.time),
            last_seen: members.last().map_or(0, |m| m.time),
            distinct_days: days.len(),
            members,
            unparsed,
        }
    }

    pub fn member_ids(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.query_id.as_str()).collect()
    }

    pub fn durations(&self) -> Vec<u64> {
        self.members.iter().filter_map(|m| m.duration_ms).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_recurrent(&self) -> bool {
        self.distinct_days >= 2
    }
}

pub fn utc_day(t: i64) -> i64 {
    t.div_euclid(SECONDS_PER_DAY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub options: ClusterOptions,
    pub range: TimeRange,
    /// Sorted by member count descending, then key.
    pub clusters: Vec<QueryCluster>,
}

impl Clustering {
    pub fn total_members(&self) -> usize {
        self.clusters.iter().map(QueryCluster::len).sum()
    }
}

/// Key for text that does not parse: a hash of its whitespace-collapsed,
/// lower-cased form.
pub fn unparsed_key(sql: &str) -> String {
    let normalized = sql.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    format!("{UNPARSED_PREFIX}{:016x}", fnv1a64(normalized.as_bytes()))
}

pub fn cluster(w: &Workload, opts: &SignatureOptions, range: TimeRange) -> Clustering {
    cluster_with(
        w,
        &ClusterOptions {
            signature: opts.clone(),
            key: ClusterKey::Signature,
        },
        range,
    )
}

pub fn cluster_with(w: &Workload, opts: &ClusterOptions, range: TimeRange) -> Clustering {
    let in_range: Vec<&QueryLogRecord> = w.records().iter().filter(|r| range.contains(r.time)).collect();
    let keys: Vec<(String, bool)> = in_range
        .par_iter()
        .map(|r| {
            if opts.key == ClusterKey::TemplateId {
                if let Some(t) = r.extras.get(TEMPLATE_ID_FIELD).filter(|v| !v.is_null()) {
                    let id = match coerce(t, LogicalType::Varchar) {
                        Value::Str(s) => s,
                        _ => t.to_string(),
                    };
                    return (format!("template:{id}"), false);
                }
            }
            match signature_of_sql(&r.query, &opts.signature) {
                Ok(sig) => (sig.render(), false),
                Err(_) => (unparsed_key(&r.query), true),
            }
        })
        .collect();
    let mut groups: BTreeMap<String, (Vec<ClusterMember>, bool)> = BTreeMap::new();
    for (r, (key, unparsed)) in in_range.iter().zip(keys) {
        let entry = groups.entry(key).or_insert_with(|| (Vec::new(), unparsed));
        entry.0.push(ClusterMember {
            query_id: r.query_id.clone(),
            time: r.time,
            duration_ms: r.duration_ms,
        });
    }
    let mut clusters: Vec<QueryCluster> = groups
        .into_iter()
        .map(|(k, (m, unparsed))| QueryCluster::from_members(k, m, unparsed))
        .collect();
    clusters.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.signature.cmp(&b.signature)));
    Clustering {
        options: opts.clone(),
        range,
        clusters,
    }
}

/// Fraction of member queries that sit in clusters seen on ≥ 2 UTC days.
pub fn recurrence_ratio(clusters: &[QueryCluster]) -> f64 {
    let total: usize = clusters.iter().map(QueryCluster::len).sum();
    if total == 0 {
        return 0.0;
    }
    let recurrent: usize = clusters.iter().filter(|c| c.is_recurrent()).map(QueryCluster::len).sum();
    recurrent as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Latest,
    Longest,
}

impl std::str::FromStr for Selection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "latest" => Ok(Selection::Latest),
            "longest" => Ok(Selection::Longest),
            other => Err(format!("unknown selection '{other}' (expected latest or longest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub signature: String,
    pub query_id: String,
    pub query: String,
    pub time: i64,
    pub member_count: usize,
    /// SLO range over the members' durations; absent when none were logged.
    pub baseline: Option<SloRange>,
    pub unparsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub version: u32,
    pub id: String,
    pub built_from: TimeRange,
    pub options: ClusterOptions,
    pub selection: Selection,
    pub entries: Vec<BenchmarkEntry>,
}

/// One representative per cluster. LATEST takes the newest member, LONGEST
/// the slowest; ties go to the later (time, query_id).
pub fn build_benchmark(w: &Workload, clustering: &Clustering, selection: Selection) -> Result<Benchmark, WorkloadError> {
    if clustering.clusters.is_empty() {
        return Err(WorkloadError::NoClusters);
    }
    let mut entries = Vec::with_capacity(clustering.clusters.len());
    for c in &clustering.clusters {
        let rep = match selection {
            Selection::Latest => c.members.last(),
            Selection::Longest => c
                .members
                .iter()
                .max_by_key(|m| (m.duration_ms, m.time, m.query_id.clone())),
        }
        .expect("clusters are never empty");
        let record = w
            .get(&rep.query_id)
            .ok_or_else(|| WorkloadError::InvalidBenchmark(format!("query {} not in workload", rep.query_id)))?;
        let durations: Vec<f64> = c.durations().into_iter().map(|d| d as f64).collect();
        entries.push(BenchmarkEntry {
            signature: c.signature.clone(),
            query_id: rep.query_id.clone(),
            query: record.query.clone(),
            time: rep.time,
            member_count: c.len(),
            baseline: perfstats::slo_range(&durations).ok(),
            unparsed: c.unparsed,
        });
    }
    let mut h = crate::values::Fnv1a64::new();
    for e in &entries {
        h.update(e.signature.as_bytes());
        h.update(&[0]);
        h.update(e.query_id.as_bytes());
        h.update(&[0]);
    }
    Ok(Benchmark {
        version: BENCHMARK_VERSION,
        id: format!("{:016x}", h.finish()),
        built_from: clustering.range,
        options: clustering.options.clone(),
        selection,
        entries,
    })
}

impl Benchmark {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("benchmark serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Benchmark, WorkloadError> {
        let b: Benchmark = serde_json::from_str(s).map_err(|e| WorkloadError::InvalidBenchmark(e.to_string()))?;
        if b.version != BENCHMARK_VERSION {
            return Err(WorkloadError::InvalidBenchmark(format!(
                "unsupported benchmark version {} (expected {BENCHMARK_VERSION})",
                b.version
            )));
        }
        let mut seen = HashSet::new();
        for e in &b.entries {
            if !seen.insert(e.query_id.as_str()) {
                return Err(WorkloadError::InvalidBenchmark(format!("duplicate query_id {}", e.query_id)));
            }
        }
        Ok(b)
    }

    pub fn entry(&self, query_id: &str) -> Option<&BenchmarkEntry> {
        self.entries.iter().find(|e| e.query_id == query_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(lines: &[&str]) -> Workload {
        ingest(lines.join("\n").as_bytes()).unwrap()
    }

    #[test]
    fn ingest_coerces_and_preserves() {
        let w = log(&[
            r#"{"time": 1650000000, "query_id": "q1", "query": "SELECT 1", "duration_ms": "1234", "spill_bytes": 42}"#,
            r#"{"time": "1650000001", "query_id": 7, "query": "SELECT 2", "duration_ms": -5, "status": "success"}"#,
        ]);
        assert_eq!(w.len(), 2);
        let q1 = w.get("q1").unwrap();
        assert_eq!(q1.duration_ms, Some(1234));
        assert_eq!(q1.extras.get("spill_bytes"), Some(&Value::Int(42)));
        assert_eq!(q1.account_id, None);
        let q7 = w.get("7").unwrap();
        assert_eq!(q7.time, 1650000001);
        assert_eq!(q7.duration_ms, None);
        assert_eq!(q7.status.as_deref(), Some("success"));
    }

    #[test]
    fn ingest_skips_bad_lines() {
        let w = ingest(
            &b"\n{bad json\n[1,2]\n{\"time\":0,\"query_id\":\"a\",\"query\":\"x\"}\n\xff\xfe\n{\"time\":5,\"query_id\":\"a\",\"query\":\"x\"}\n{\"time\":6,\"query_id\":\"a\",\"query\":\"y\"}"[..],
        )
        .unwrap();
        assert_eq!(w.stats.lines, 7);
        assert_eq!(w.stats.records, 1);
        assert_eq!(w.stats.skipped, 6);
        assert_eq!(w.stats.duplicate_ids, 1);
        assert!(ingest(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn record_json_roundtrip() {
        let w = log(&[
            r#"{"time": 1650000000, "query_id": "q1", "query": "SELECT 1", "duration_ms": 3, "engine": "presto", "x": {"a": [1, null]}}"#,
        ]);
        let again = ingest(w.to_json_lines().as_bytes()).unwrap();
        assert_eq!(w.records(), again.records());
    }

    #[test]
    fn clusters_abstract_literals_and_columns() {
        let mut recs = Vec::new();
        for i in 0..3 {
            recs.push(QueryLogRecord::new(1000 + i, format!("c{i}"), format!("SELECT c FROM A WHERE c = {i}")));
        }
        for i in 0..2 {
            recs.push(QueryLogRecord::new(2000 + i, format!("d{i}"), "select d from A"));
        }
        recs.push(QueryLogRecord::new(3000, "bad", "SELEC nonsense"));
        let w = Workload::from_records(recs);
        let c = cluster(&w, &SignatureOptions::default(), TimeRange::all());
        assert_eq!(c.clusters.len(), 2);
        assert_eq!(c.clusters[0].signature, "S(T)");
        assert_eq!(c.clusters[0].len(), 5);
        assert!(c.clusters[1].signature.starts_with(UNPARSED_PREFIX));
        assert!(c.clusters[1].unparsed);
        assert_eq!(c.total_members(), 6);

        let narrow = cluster(&w, &SignatureOptions::default(), TimeRange::new(1000, 2000).unwrap());
        assert_eq!(narrow.total_members(), 3);
    }

    #[test]
    fn daily_inserts_collapse_with_masking() {
        let recs = (1..=7).map(|d| {
            QueryLogRecord::new(
                1_643_673_600 + (d - 1) * SECONDS_PER_DAY + 3600,
                format!("day{d}"),
                format!("INSERT INTO t SELECT * FROM logs_2022_02_{d:02}"),
            )
            .with_duration(100 + d as u64)
        });
        let w = Workload::from_records(recs);
        let opts = SignatureOptions::default().with_tables(true).with_mask_dates(true);
        let c = cluster(&w, &opts, TimeRange::all());
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].signature, "I(S[*](T)) logs_X->t");
        assert_eq!(c.clusters[0].distinct_days, 7);
        let b = build_benchmark(&w, &c, Selection::Latest).unwrap();
        assert_eq!(b.entries.len(), 1);
        assert_eq!(b.entries[0].query_id, "day7");
        assert_eq!(b.entries[0].member_count, 7);
        assert_eq!(b.entries[0].baseline.as_ref().unwrap().median, 104.0);
        let longest = build_benchmark(&w, &c, Selection::Longest).unwrap();
        assert_eq!(longest.entries[0].query_id, "day7");

        let parsed = Benchmark::from_json_str(&b.to_json_string()).unwrap();
        assert_eq!(parsed, b);
    }

    #[test]
    fn template_ids_override_signatures() {
        let mut a = QueryLogRecord::new(10, "a", "SELECT 1");
        a.extras.insert(TEMPLATE_ID_FIELD.into(), Value::Int(3));
        let b = QueryLogRecord::new(20, "b", "SELECT x FROM t");
        let w = Workload::from_records([a, b]);
        let c = cluster_with(
            &w,
            &ClusterOptions {
                key: ClusterKey::TemplateId,
                ..Default::default()
            },
            TimeRange::all(),
        );
        let keys: Vec<&str> = c.clusters.iter().map(|c| c.signature.as_str()).collect();
        assert_eq!(keys, vec!["S(T)", "template:3"]);
    }

    #[test]
    fn recurrence_examples() {
        assert_eq!(recurrence_ratio(&[]), 0.0);
        let w = Workload::from_records([
            QueryLogRecord::new(100, "a", "SELECT a FROM x"),
            QueryLogRecord::new(200, "b", "SELECT * FROM y"),
        ]);
        let c = cluster(&w, &SignatureOptions::default(), TimeRange::all());
        assert_eq!(recurrence_ratio(&c.clusters), 0.0);
        let w = Workload::from_records([
            QueryLogRecord::new(100, "a", "SELECT a FROM x"),
            QueryLogRecord::new(100 + SECONDS_PER_DAY, "b", "SELECT b FROM x"),
        ]);
        let c = cluster(&w, &SignatureOptions::default(), TimeRange::all());
        assert_eq!(recurrence_ratio(&c.clusters), 1.0);
    }

    #[test]
    fn benchmark_needs_clusters_and_version() {
        let w = Workload::default();
        let c = cluster(&w, &SignatureOptions::default(), TimeRange::all());
        assert!(c.clusters.is_empty());
        assert!(matches!(build_benchmark(&w, &c, Selection::Latest), Err(WorkloadError::NoClusters)));
        let bad = r#"{"version": 99, "id": "x", "built_from": {"from": 0, "to": 1}, "options": {"signature": {"include_tables": false, "mask_dates": false, "date_placeholder": "X"}, "key": "signature"}, "selection": "latest", "entries": []}"#;
        assert!(Benchmark::from_json_str(bad).is_err());
    }
}
