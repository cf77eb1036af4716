//! Synthetic fleets and corpora with known ground truth.
//!
//! [`fleet`] produces a query log whose template of origin is known for
//! every record. [`corpus`] produces tables plus a benchmark whose entries
//! are labelled with the faults that must affect them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Engine, EngineConfig, EngineError, FaultConfig, Table};
use crate::signature::{signature_of_sql, SignatureOptions};
use crate::values::{Fnv1a64, LogicalType, Value};
use crate::workload::{Benchmark, BenchmarkEntry, ClusterOptions, QueryLogRecord, Selection, TimeRange, Workload};

const DAY: i64 = 86_400;

/// `0 -> a`, `25 -> z`, `26 -> ba`; keeps digits out of generated names.
fn letters(mut n: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub templates: usize,
    pub days: u32,
    pub queries: usize,
    /// Share of queries drawn from recurring templates; the rest are one-offs.
    pub recurring_fraction: f64,
    /// Epoch seconds of the first day; should sit on a UTC midnight.
    pub start: i64,
    pub seed: u64,
}

impl Default for FleetSpec {
    fn default() -> Self {
        FleetSpec {
            templates: 40,
            days: 30,
            queries: 5000,
            recurring_fraction: 0.97,
            start: 1_704_067_200,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fleet {
    pub workload: Workload,
    /// Template index per query_id; None for one-off queries.
    pub template_of: BTreeMap<String, Option<usize>>,
    pub templates: usize,
}

impl Fleet {
    pub fn recurring_queries(&self) -> usize {
        self.template_of.values().filter(|t| t.is_some()).count()
    }

    pub fn label_fraction(&self) -> f64 {
        self.recurring_queries() as f64 / self.template_of.len().max(1) as f64
    }
}

fn daily_table(start: i64, day: u32) -> String {
    let d = chrono::DateTime::from_timestamp(start + i64::from(day) * DAY, 0).expect("valid day");
    format!("\"logs_{}\"", d.format("%Y-%m-%d"))
}

fn fleet_query(template: usize, table: &str, rng: &mut ChaCha8Rng) -> String {
    let dim = format!("dim_{}", letters(template));
    let v: u32 = rng.gen_range(1..10_000);
    match template % 4 {
        0 => format!("SELECT l.user_id, l.status FROM {table} AS l JOIN {dim} AS d ON l.user_id = d.id WHERE l.latency > {v}"),
        1 => format!("SELECT d.name, count(*) FROM {table} AS l JOIN {dim} AS d ON l.user_id = d.id WHERE l.bytes > {v} GROUP BY d.name"),
        2 => format!("SELECT user_id FROM {table} WHERE user_id IN (SELECT id FROM {dim} WHERE tier = {}) ORDER BY user_id", v % 5),
        _ => format!("SELECT * FROM {table} WHERE user_id NOT IN (SELECT id FROM {dim}) LIMIT {v}"),
    }
}

/// A log in which recurring templates each appear on at least two days and
/// every one-off query reads a table no other query reads.
pub fn fleet(spec: &FleetSpec) -> Fleet {
    assert!(spec.days >= 2, "recurring templates need two days");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let recurring = (spec.queries as f64 * spec.recurring_fraction).round() as usize;
    assert!(recurring >= 2 * spec.templates, "too few recurring queries for the template count");
    let mut plan: Vec<(Option<usize>, u32)> = Vec::with_capacity(spec.queries);
    for t in 0..spec.templates {
        let d = (t as u32) % spec.days;
        plan.push((Some(t), d));
        plan.push((Some(t), (d + 1) % spec.days));
    }
    for _ in plan.len()..recurring {
        plan.push((Some(rng.gen_range(0..spec.templates)), rng.gen_range(0..spec.days)));
    }
    for _ in recurring..spec.queries {
        plan.push((None, rng.gen_range(0..spec.days)));
    }
    plan.shuffle(&mut rng);

    let mut records = Vec::with_capacity(plan.len());
    let mut template_of = BTreeMap::new();
    let mut adhoc = 0usize;
    for (i, (template, day)) in plan.into_iter().enumerate() {
        let table = daily_table(spec.start, day);
        let sql = match template {
            Some(t) => fleet_query(t, &table, &mut rng),
            None => {
                adhoc += 1;
                format!(
                    "SELECT count(*) FROM {table} AS l JOIN adhoc_{} AS a ON l.user_id = a.id",
                    letters(adhoc)
                )
            }
        };
        let id = format!("q{i:06}");
        let time = spec.start + i64::from(day) * DAY + rng.gen_range(0..DAY);
        records.push(QueryLogRecord::new(time, id.clone(), sql).with_duration(rng.gen_range(50..5_000)));
        template_of.insert(id, template);
    }
    Fleet {
        workload: Workload::from_records(records),
        template_of,
        templates: spec.templates,
    }
}

/// Cluster options under which fleet templates collapse to one cluster each.
pub fn fleet_cluster_options() -> ClusterOptions {
    ClusterOptions {
        signature: SignatureOptions::default().with_tables(true).with_mask_dates(true),
        ..ClusterOptions::default()
    }
}

/// Which faults must change the outcome of a corpus entry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryTruth {
    /// Reads the escalated column, whose older files hold strings.
    pub escalated: bool,
    /// Signature equals [`GROUP_BY_SIGNATURE`].
    pub group_by: bool,
    /// Signature is one of [`SCAN_TARGETS`].
    pub scan_target: bool,
    /// Carries a non-determinism construct.
    pub nondeterministic: bool,
    pub write: bool,
}

pub const GROUP_BY_SIGNATURE: &str = "G(S(T))";
pub const SCAN_TARGETS: [&str; 2] = ["O(S(T))", "S(LJ(T,T))"];
pub const ESCALATED_TABLE: &str = "events";
pub const ESCALATED_COLUMN: &str = "legacy_code";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub queries: usize,
    pub events: usize,
    pub users: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            queries: 500,
            events: 5000,
            users: 300,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub tables: Vec<Table>,
    pub benchmark: Benchmark,
    pub truth: BTreeMap<String, QueryTruth>,
}

const KINDS: &[&str] = &["red", "green", "blue", "amber"];
const REGIONS: &[&str] = &["north", "south", "east", "west"];

fn corpus_tables(spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Vec<Table> {
    let big = LogicalType::Bigint;
    let events = (0..spec.events as i64)
        .map(|id| {
            let code = rng.gen_range(0..1000i64);
            vec![
                Value::Int(id),
                Value::Int(rng.gen_range(0..spec.users as i64)),
                Value::Str(KINDS[rng.gen_range(0..KINDS.len())].into()),
                Value::Int(rng.gen_range(1..500)),
                // Rows from before the column became BIGINT still hold strings.
                if id % 3 == 0 {
                    Value::Str(code.to_string())
                } else {
                    Value::Int(code)
                },
            ]
        })
        .collect();
    let users = (0..spec.users as i64)
        .map(|id| {
            vec![
                Value::Int(id),
                Value::Str(format!("user_{}", letters(id as usize))),
                Value::Str(REGIONS[rng.gen_range(0..REGIONS.len())].into()),
            ]
        })
        .collect();
    let archive = (0..50i64)
        .map(|id| vec![Value::Int(100_000 + id), Value::Int(id), Value::Int(id * 7)])
        .collect();
    let staging = (0..200i64)
        .map(|id| vec![Value::Int(id), Value::Str(KINDS[(id % 4) as usize].into())])
        .collect();
    vec![
        Table::new(
            "events",
            vec![
                ("id".into(), big),
                ("user_id".into(), big),
                ("kind".into(), LogicalType::Varchar),
                ("amount".into(), big),
                (ESCALATED_COLUMN.into(), big),
            ],
            events,
        ),
        Table::new(
            "users",
            vec![
                ("id".into(), big),
                ("name".into(), LogicalType::Varchar),
                ("region".into(), LogicalType::Varchar),
            ],
            users,
        ),
        Table::new(
            "archive",
            vec![("id".into(), big), ("user_id".into(), big), ("code".into(), big)],
            archive,
        ),
        Table::new(
            "staging",
            vec![("id".into(), big), ("kind".into(), LogicalType::Varchar)],
            staging,
        ),
    ]
}

/// One corpus query and whether it reads the escalated column, nondeterministically.
fn corpus_query(kind: usize, n: usize, spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> (String, bool, bool) {
    let ev = spec.events as i64;
    let us = spec.users as i64;
    let u = rng.gen_range(0..us);
    let a = rng.gen_range(0..ev - 60);
    let x = rng.gen_range(1..400);
    let k = KINDS[rng.gen_range(0..KINDS.len())];
    let r = REGIONS[rng.gen_range(0..REGIONS.len())];
    match kind {
        0 => (format!("SELECT id, kind, amount FROM events WHERE user_id = {u}"), false, false),
        1 => (
            format!("SELECT id, legacy_code FROM events WHERE id BETWEEN {a} AND {}", a + 50),
            true,
            false,
        ),
        2 => (
            format!("SELECT kind, count(*), sum(amount) FROM events WHERE amount > {x} GROUP BY kind"),
            false,
            false,
        ),
        3 => (
            format!("SELECT user_id % 10, sum(legacy_code) FROM events WHERE amount > {x} GROUP BY user_id % 10"),
            true,
            false,
        ),
        4 => (
            format!("SELECT id, name FROM users WHERE region = '{r}' ORDER BY name, id"),
            false,
            false,
        ),
        5 => (
            format!(
                "SELECT u.name, e.amount FROM users AS u LEFT JOIN events AS e ON u.id = e.user_id WHERE u.id < {}",
                u.max(5)
            ),
            false,
            false,
        ),
        6 => (format!("SELECT DISTINCT kind FROM events WHERE user_id < {u}"), false, false),
        7 => (
            format!(
                "SELECT id FROM users WHERE id < {u} UNION ALL SELECT id FROM staging WHERE kind = '{k}'"
            ),
            false,
            false,
        ),
        8 => (
            format!(
                "WITH top AS (SELECT user_id, sum(amount) AS total FROM events GROUP BY user_id) \
                 SELECT u.name, t.total FROM users AS u JOIN top AS t ON u.id = t.user_id WHERE t.total > {}",
                x * 20
            ),
            false,
            false,
        ),
        9 => (
            format!("SELECT name FROM users WHERE id IN (SELECT user_id FROM events WHERE amount > {x})"),
            false,
            false,
        ),
        10 => (format!("SELECT id, random() FROM users WHERE id < {}", u.max(1)), false, true),
        11 => (format!("SELECT id, now() FROM staging WHERE kind = '{k}'"), false, true),
        12 => (
            format!("INSERT INTO archive SELECT id, user_id, amount FROM events WHERE user_id = {u}"),
            false,
            false,
        ),
        13 => (
            format!(
                "INSERT INTO archive SELECT id, user_id, legacy_code FROM events WHERE id BETWEEN {a} AND {}",
                a + 30
            ),
            true,
            false,
        ),
        14 => (
            format!("CREATE TABLE report_{} AS SELECT region, count(*) AS n FROM users GROUP BY region", letters(n)),
            false,
            false,
        ),
        _ => (format!("DELETE FROM staging WHERE id < {}", x / 2), false, false),
    }
}

const CORPUS_KINDS: usize = 16;

pub fn corpus(spec: &CorpusSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tables = corpus_tables(spec, &mut rng);
    let sig_opts = SignatureOptions::default();
    let mut entries = Vec::with_capacity(spec.queries);
    let mut truth = BTreeMap::new();
    let mut h = Fnv1a64::new();
    for n in 0..spec.queries {
        // Every kind appears; the rest are drawn at random.
        let kind = if n < CORPUS_KINDS { n } else { rng.gen_range(0..CORPUS_KINDS) };
        let (sql, escalated, nondeterministic) = corpus_query(kind, n, spec, &mut rng);
        let signature = signature_of_sql(&sql, &sig_opts)
            .expect("generated SQL parses")
            .render();
        let query_id = format!("c{n:04}");
        h.update(query_id.as_bytes());
        h.update(&[0]);
        h.update(sql.as_bytes());
        h.update(&[0]);
        truth.insert(
            query_id.clone(),
            QueryTruth {
                escalated,
                group_by: signature == GROUP_BY_SIGNATURE,
                scan_target: SCAN_TARGETS.contains(&signature.as_str()),
                nondeterministic,
                write: kind >= 12,
            },
        );
        entries.push(BenchmarkEntry {
            signature,
            query_id,
            query: sql,
            time: 1_704_067_200 + n as i64,
            member_count: 1,
            baseline: None,
            unparsed: false,
        });
    }
    Corpus {
        tables,
        benchmark: Benchmark {
            version: crate::workload::BENCHMARK_VERSION,
            id: format!("{:016x}", h.finish()),
            built_from: TimeRange::all(),
            options: ClusterOptions::default(),
            selection: Selection::Latest,
            entries,
        },
        truth,
    }
}

impl Corpus {
    /// A reference engine holding the corpus tables.
    pub fn engine(&self, config: EngineConfig) -> Result<Engine, EngineError> {
        let e = Engine::new(config);
        for t in &self.tables {
            e.register(t.clone().with_partition_size(e.config().partition_size))?;
        }
        Ok(e)
    }

    pub fn ids_where(&self, f: impl Fn(&QueryTruth) -> bool) -> Vec<String> {
        self.truth.iter().filter(|(_, t)| f(t)).map(|(id, _)| id.clone()).collect()
    }
}

pub fn coercion_faults() -> FaultConfig {
    FaultConfig {
        coercion_bug: true,
        ..FaultConfig::default()
    }
}

pub fn latency_faults(factor: f64) -> FaultConfig {
    FaultConfig {
        latency_multiplier: [(GROUP_BY_SIGNATURE.to_string(), factor)].into_iter().collect(),
        ..FaultConfig::default()
    }
}

pub fn scan_faults(factor: f64) -> FaultConfig {
    FaultConfig {
        scan_amplify: SCAN_TARGETS.iter().map(|s| (s.to_string(), factor)).collect(),
        ..FaultConfig::default()
    }
}
