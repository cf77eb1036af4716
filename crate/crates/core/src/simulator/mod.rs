//! Control/test simulation of a benchmark.
//!
//! Every entry is labelled, rewritten into checksum or temp-table form and
//! executed on both adapters. Results are keyed by query_id, so the report
//! does not depend on completion order or worker count.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineAdapter, EngineError, Metrics};
use crate::perfstats;
use crate::rewrite::{self, NondetLabel};
use crate::sql::{self, Query, Select, SelectItem, Statement, TableRef};
use crate::values::{ResultDigest, Value};
use crate::workload::{Benchmark, TimeRange};

pub mod report;
pub mod synth;

pub use report::{render_report, ReportFormat};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("ADAPTER_UNAVAILABLE: {adapter}: {message}")]
    Unavailable { adapter: String, message: String },
    #[error("INVALID_INPUT: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub parallelism: usize,
    /// Must match `[A-Za-z0-9_]+`; entry `i` runs as session `<session>_<i>`.
    pub session: String,
    /// Runs per side; the median wall time is reported.
    pub repeat: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            parallelism: 1,
            session: "sim".into(),
            repeat: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub perf_ratio: f64,
    pub min_delta_ms: f64,
    pub scan_diff: i64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            perf_ratio: 1.5,
            min_delta_ms: 100.0,
            scan_diff: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideError {
    pub code: String,
    pub message: String,
}

impl From<&EngineError> for SideError {
    fn from(e: &EngineError) -> SideError {
        SideError {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

/// What one adapter produced for one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideOutcome {
    pub digest: Option<ResultDigest>,
    pub error: Option<SideError>,
    pub wall_ms: f64,
    pub partitions_scanned: u64,
    pub rows_scanned: u64,
}

impl SideOutcome {
    fn failed(error: SideError) -> SideOutcome {
        SideOutcome {
            digest: None,
            error: Some(error),
            wall_ms: 0.0,
            partitions_scanned: 0,
            rows_scanned: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawResult {
    pub query_id: String,
    pub signature: String,
    pub sql: String,
    pub labels: Vec<NondetLabel>,
    pub control: SideOutcome,
    pub test: SideOutcome,
    /// Rewritten statements sent to the adapters, excluding the read-back
    /// checksum of a redirected write.
    pub executed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawResults {
    pub benchmark_id: String,
    pub built_from: TimeRange,
    pub control: String,
    pub test: String,
    pub options: SimulationOptions,
    pub started_at_ms: i64,
    /// Sorted by query_id.
    pub results: Vec<RawResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DigestMatch {
    Match,
    Mismatch,
    SkippedNondet,
    Error,
}

impl DigestMatch {
    pub fn name(self) -> &'static str {
        match self {
            DigestMatch::Match => "MATCH",
            DigestMatch::Mismatch => "MISMATCH",
            DigestMatch::SkippedNondet => "SKIPPED_NONDET",
            DigestMatch::Error => "ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryComparison {
    pub query_id: String,
    pub signature: String,
    pub sql: String,
    pub labels: Vec<NondetLabel>,
    pub control: SideOutcome,
    pub test: SideOutcome,
    pub digest_match: DigestMatch,
    /// Digests differed but the query carries labels.
    pub nondet_mismatch: bool,
    /// test / control wall time; None when either side failed or control took no time.
    pub perf_ratio: Option<f64>,
    pub delta_ms: f64,
    pub slower: bool,
    pub scan_diff: i64,
    pub scan_regressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub benchmark_id: String,
    pub control: String,
    pub test: String,
    pub time_range: TimeRange,
    pub repeat: usize,
    pub session: String,
    pub thresholds: Thresholds,
    /// The only field that differs between otherwise identical runs.
    pub run: RunStamp,
}

/// Facts about one invocation that do not affect any comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStamp {
    pub generated_at: String,
    pub parallelism: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub matched: usize,
    pub mismatched: usize,
    pub skipped_nondet: usize,
    pub errored: usize,
    pub slower: usize,
    pub scan_regressed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowerEntry {
    pub query_id: String,
    pub signature: String,
    pub perf_ratio: f64,
    pub control_wall_ms: f64,
    pub test_wall_ms: f64,
    pub delta_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub version: u32,
    pub metadata: RunMetadata,
    pub summary: Summary,
    /// Sorted by query_id.
    pub comparisons: Vec<QueryComparison>,
    /// Ratio descending, then query_id.
    pub slower_list: Vec<SlowerEntry>,
}

impl SimulationReport {
    pub fn comparison(&self, query_id: &str) -> Option<&QueryComparison> {
        self.comparisons
            .binary_search_by(|c| c.query_id.as_str().cmp(query_id))
            .ok()
            .map(|i| &self.comparisons[i])
    }

    /// Mismatches, slower or scan-regressed queries, or queries that only
    /// the test side failed.
    pub fn has_regressions(&self) -> bool {
        let s = &self.summary;
        s.mismatched > 0
            || s.slower > 0
            || s.scan_regressed > 0
            || self
                .comparisons
                .iter()
                .any(|c| c.control.error.is_none() && c.test.error.is_some())
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.has_regressions())
    }
}

fn valid_session(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Counting semaphore bounding in-flight statements per adapter.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Gate {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        drop(free);
        let out = f();
        *self.free.lock().expect("gate lock") += 1;
        self.cv.notify_one();
        out
    }
}

/// An entry after labelling and rewriting.
struct Prepared {
    labels: Vec<NondetLabel>,
    statements: Vec<String>,
    /// Checksum of the temp table, read after a redirected write.
    read_back: Option<String>,
    temp_objects: Vec<String>,
    is_read: bool,
}

fn prepare(sql_text: &str, session: &str, control: &dyn EngineAdapter) -> Result<Prepared, SideError> {
    let stmt = sql::parse(sql_text).map_err(|e| SideError::from(&EngineError::from(e)))?;
    let schema = |t: &str| control.table_schema(t);
    let labels = rewrite::label_nondeterminism(&stmt, Some(&schema));
    let rejected = |e: rewrite::RewriteError| SideError {
        code: "REWRITE_REJECTED".into(),
        message: e.to_string(),
    };
    if stmt.is_read() {
        let out = rewrite::wrap_checksum(&stmt).map_err(rejected)?;
        return Ok(Prepared {
            labels,
            statements: vec![sql::render(&out.rewritten)],
            read_back: None,
            temp_objects: out.temp_objects,
            is_read: true,
        });
    }
    let out = rewrite::redirect_writes(&stmt, session).map_err(rejected)?;
    let target = stmt.write_target().expect("writes have a target");
    let temp = rewrite::temp_name(session, target);
    let read_back = Statement::Query(Box::new(Query::simple(Select {
        items: vec![SelectItem::Wildcard],
        from: Some(TableRef::Table { name: temp, alias: None }),
        ..Select::default()
    })));
    let read_back = rewrite::wrap_checksum(&read_back).map_err(rejected)?;
    Ok(Prepared {
        labels,
        statements: out.statements().into_iter().map(sql::render).collect(),
        read_back: Some(sql::render(&read_back.rewritten)),
        temp_objects: out.temp_objects,
        is_read: false,
    })
}

fn read_digest(rows: &[Vec<Value>]) -> Result<ResultDigest, SideError> {
    let bad = |what: &str| SideError {
        code: "BAD_CHECKSUM".into(),
        message: format!("checksum query returned {what}"),
    };
    match rows {
        [row] if row.len() == 1 => match &row[0] {
            Value::Str(s) => s.parse().map_err(|_| bad("an unparsable digest")),
            _ => Err(bad("a non-string value")),
        },
        _ => Err(bad("an unexpected shape")),
    }
}

/// Runs one entry on one adapter `repeat` times. `Err` aborts the run.
fn execute_side(
    adapter: &dyn EngineAdapter,
    gate: &Gate,
    p: &Prepared,
    session: &str,
    repeat: usize,
) -> Result<SideOutcome, SimulationError> {
    let unavailable = |e: &EngineError| SimulationError::Unavailable {
        adapter: adapter.name(),
        message: e.to_string(),
    };
    let mut first: Option<SideOutcome> = None;
    let mut walls = Vec::with_capacity(repeat);
    for _ in 0..repeat.max(1) {
        let mut metrics = Metrics::default();
        let mut digest = None;
        let mut error = None;
        for (i, sql_text) in p.statements.iter().enumerate() {
            match gate.run(|| adapter.execute_sql(sql_text, session)) {
                Ok(res) => {
                    metrics.accumulate(&res.metrics);
                    if p.is_read && i + 1 == p.statements.len() {
                        match read_digest(&res.rows) {
                            Ok(d) => digest = Some(d),
                            Err(e) => error = Some(e),
                        }
                    }
                }
                Err(e @ EngineError::Unavailable(_)) => return Err(unavailable(&e)),
                Err(e) => {
                    error = Some(SideError::from(&e));
                    break;
                }
            }
        }
        if let (None, Some(rb)) = (&error, &p.read_back) {
            match gate.run(|| adapter.execute_sql(rb, session)) {
                Ok(res) => match read_digest(&res.rows) {
                    Ok(d) => digest = Some(d),
                    Err(e) => error = Some(e),
                },
                Err(e @ EngineError::Unavailable(_)) => return Err(unavailable(&e)),
                Err(e) => error = Some(SideError::from(&e)),
            }
        }
        adapter.drop_tables(&p.temp_objects);
        walls.push(metrics.wall_ms);
        if first.is_none() {
            first = Some(SideOutcome {
                digest: if error.is_none() { digest } else { None },
                error,
                wall_ms: metrics.wall_ms,
                partitions_scanned: metrics.partitions_scanned,
                rows_scanned: metrics.rows_scanned,
            });
        }
    }
    let mut out = first.expect("at least one run");
    out.wall_ms = perfstats::median(&walls).unwrap_or(out.wall_ms);
    Ok(out)
}

pub fn run_simulation(
    bench: &Benchmark,
    control: &dyn EngineAdapter,
    test: &dyn EngineAdapter,
    opts: &SimulationOptions,
) -> Result<RawResults, SimulationError> {
    if opts.parallelism == 0 {
        return Err(SimulationError::InvalidInput("parallelism must be at least 1".into()));
    }
    if opts.repeat == 0 {
        return Err(SimulationError::InvalidInput("repeat must be at least 1".into()));
    }
    if !valid_session(&opts.session) {
        return Err(SimulationError::InvalidInput(format!(
            "session {:?} must match [A-Za-z0-9_]+",
            opts.session
        )));
    }
    let mut ids = HashSet::new();
    for e in &bench.entries {
        if !ids.insert(e.query_id.as_str()) {
            return Err(SimulationError::InvalidInput(format!("duplicate query_id {}", e.query_id)));
        }
    }
    for a in [control, test] {
        a.ping().map_err(|e| SimulationError::Unavailable {
            adapter: a.name(),
            message: e.to_string(),
        })?;
    }
    let started_at_ms = chrono::Utc::now().timestamp_millis();
    let gates = [
        Gate::new(control.capacity().min(opts.parallelism)),
        Gate::new(test.capacity().min(opts.parallelism)),
    ];
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<SimulationError>> = Mutex::new(None);
    let results: Mutex<BTreeMap<String, RawResult>> = Mutex::new(BTreeMap::new());
    let workers = opts.parallelism.min(bench.entries.len()).max(1);

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= bench.entries.len() || abort.load(Ordering::SeqCst) {
                    break;
                }
                let entry = &bench.entries[i];
                let session = format!("{}_{i}", opts.session);
                let outcome = match prepare(&entry.query, &session, control) {
                    Ok(p) => execute_side(control, &gates[0], &p, &session, opts.repeat).and_then(|c| {
                        let t = execute_side(test, &gates[1], &p, &session, opts.repeat)?;
                        Ok((p.labels, p.statements, c, t))
                    }),
                    Err(e) => Ok((Vec::new(), Vec::new(), SideOutcome::failed(e.clone()), SideOutcome::failed(e))),
                };
                match outcome {
                    Ok((labels, executed, c, t)) => {
                        results.lock().expect("results lock").insert(
                            entry.query_id.clone(),
                            RawResult {
                                query_id: entry.query_id.clone(),
                                signature: entry.signature.clone(),
                                sql: entry.query.clone(),
                                labels,
                                control: c,
                                test: t,
                                executed,
                            },
                        );
                    }
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        failure.lock().expect("failure lock").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }
    Ok(RawResults {
        benchmark_id: bench.id.clone(),
        built_from: bench.built_from,
        control: control.name(),
        test: test.name(),
        options: opts.clone(),
        started_at_ms,
        results: results.into_inner().expect("results lock").into_values().collect(),
    })
}

pub fn compare_one(r: &RawResult, th: &Thresholds) -> QueryComparison {
    let both_ok = r.control.error.is_none() && r.test.error.is_none();
    let digests_differ = r.control.digest != r.test.digest;
    let digest_match = if !both_ok {
        DigestMatch::Error
    } else if !digests_differ {
        DigestMatch::Match
    } else if !r.labels.is_empty() {
        DigestMatch::SkippedNondet
    } else {
        DigestMatch::Mismatch
    };
    let delta_ms = r.test.wall_ms - r.control.wall_ms;
    let perf_ratio = (both_ok && r.control.wall_ms > 0.0).then(|| r.test.wall_ms / r.control.wall_ms);
    let slower = perf_ratio.is_some_and(|p| p > th.perf_ratio && delta_ms >= th.min_delta_ms);
    let scan_diff = r.test.partitions_scanned as i64 - r.control.partitions_scanned as i64;
    QueryComparison {
        query_id: r.query_id.clone(),
        signature: r.signature.clone(),
        sql: r.sql.clone(),
        labels: r.labels.clone(),
        control: r.control.clone(),
        test: r.test.clone(),
        digest_match,
        nondet_mismatch: digest_match == DigestMatch::SkippedNondet,
        perf_ratio,
        delta_ms,
        slower,
        scan_diff,
        scan_regressed: both_ok && scan_diff > th.scan_diff,
    }
}

pub fn compare(raw: &RawResults, th: &Thresholds) -> SimulationReport {
    let comparisons: Vec<QueryComparison> = raw.results.iter().map(|r| compare_one(r, th)).collect();
    let mut summary = Summary {
        total: comparisons.len(),
        ..Summary::default()
    };
    for c in &comparisons {
        match c.digest_match {
            DigestMatch::Match => summary.matched += 1,
            DigestMatch::Mismatch => summary.mismatched += 1,
            DigestMatch::SkippedNondet => summary.skipped_nondet += 1,
            DigestMatch::Error => summary.errored += 1,
        }
        summary.slower += usize::from(c.slower);
        summary.scan_regressed += usize::from(c.scan_regressed);
    }
    let mut slower_list: Vec<SlowerEntry> = comparisons
        .iter()
        .filter(|c| c.slower)
        .map(|c| SlowerEntry {
            query_id: c.query_id.clone(),
            signature: c.signature.clone(),
            perf_ratio: c.perf_ratio.expect("slower implies a ratio"),
            control_wall_ms: c.control.wall_ms,
            test_wall_ms: c.test.wall_ms,
            delta_ms: c.delta_ms,
        })
        .collect();
    slower_list.sort_by(|a, b| {
        b.perf_ratio
            .total_cmp(&a.perf_ratio)
            .then_with(|| a.query_id.cmp(&b.query_id))
    });
    let generated_at = chrono::DateTime::from_timestamp_millis(raw.started_at_ms)
        .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
        .unwrap_or_default();
    SimulationReport {
        version: REPORT_VERSION,
        metadata: RunMetadata {
            benchmark_id: raw.benchmark_id.clone(),
            control: raw.control.clone(),
            test: raw.test.clone(),
            time_range: raw.built_from,
            repeat: raw.options.repeat,
            session: raw.options.session.clone(),
            thresholds: *th,
            run: RunStamp {
                generated_at,
                parallelism: raw.options.parallelism,
            },
        },
        summary,
        comparisons,
        slower_list,
    }
}

#[cfg(test)]
mod tests;
