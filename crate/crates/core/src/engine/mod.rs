//! Reference in-memory executor with schema-on-read coercion, simulated
//! partitions and a deterministic cost model, plus a fault-injectable
//! variant that plays the "test" engine in simulations.
//!
//! Every cell read from a base table passes through [`coerce`] to its
//! declared column type. `wall_ms` is derived from work counters rather
//! than measured, so it is identical across runs and thread counts.

mod agg;
mod eval;
mod exec;
pub mod loader;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::rewrite::{unwrap_checksum, SchemaProvider};
use crate::signature::{signature_of, SignatureOptions};
use crate::sql::{self, LogicalPlan, SqlError, Statement};
use crate::values::{DigestOptions, LogicalType, Value};

pub use loader::{load_dir, load_table_file, read_schema, write_jsonl_table};

pub const DEFAULT_PARTITION_SIZE: usize = 1000;
/// 2024-01-01T00:00:00Z; what `now()` and friends return.
pub const DEFAULT_CLOCK_MS: i64 = 1_704_067_200_000;

/// Cost model constants, in milliseconds.
pub mod cost {
    pub const STATEMENT_MS: f64 = 2.0;
    pub const PARTITION_MS: f64 = 40.0;
    pub const SCAN_ROW_MS: f64 = 0.01;
    pub const WORK_ROW_MS: f64 = 0.002;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("UNKNOWN_TABLE: {0}")]
    UnknownTable(String),
    #[error("UNKNOWN_COLUMN: {0}")]
    UnknownColumn(String),
    #[error("AMBIGUOUS_COLUMN: {0}")]
    AmbiguousColumn(String),
    #[error("TYPE_ERROR: {0}")]
    TypeError(String),
    #[error("UNSUPPORTED_FEATURE: {0}")]
    Unsupported(String),
    #[error("DIVISION_BY_ZERO")]
    DivisionByZero,
    #[error("NUMERIC_OVERFLOW: {0}")]
    NumericOverflow(String),
    #[error("SEMANTIC_ERROR: {0}")]
    Semantic(String),
    #[error("CARDINALITY_VIOLATION: {0}")]
    Cardinality(String),
    #[error("TABLE_EXISTS: {0}")]
    TableExists(String),
    #[error("ARITY_MISMATCH: table {table} row {row} has {found} values, expected {expected}")]
    ArityMismatch {
        table: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("STALE_HANDLE: table {0} was replaced or dropped")]
    StaleHandle(String),
    #[error("INVALID_FAULT_CONFIG: {0}")]
    InvalidFaultConfig(String),
    #[error("LOAD_ERROR: {0}")]
    Load(String),
    #[error("ADAPTER_UNAVAILABLE: {0}")]
    Unavailable(String),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Sql(e) => e.code(),
            EngineError::UnknownTable(_) => "UNKNOWN_TABLE",
            EngineError::UnknownColumn(_) => "UNKNOWN_COLUMN",
            EngineError::AmbiguousColumn(_) => "AMBIGUOUS_COLUMN",
            EngineError::TypeError(_) => "TYPE_ERROR",
            EngineError::Unsupported(_) => "UNSUPPORTED_FEATURE",
            EngineError::DivisionByZero => "DIVISION_BY_ZERO",
            EngineError::NumericOverflow(_) => "NUMERIC_OVERFLOW",
            EngineError::Semantic(_) => "SEMANTIC_ERROR",
            EngineError::Cardinality(_) => "CARDINALITY_VIOLATION",
            EngineError::TableExists(_) => "TABLE_EXISTS",
            EngineError::ArityMismatch { .. } => "ARITY_MISMATCH",
            EngineError::StaleHandle(_) => "STALE_HANDLE",
            EngineError::InvalidFaultConfig(_) => "INVALID_FAULT_CONFIG",
            EngineError::Load(_) => "LOAD_ERROR",
            EngineError::Unavailable(_) => "ADAPTER_UNAVAILABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<(String, LogicalType)>,
    /// Physical values; may disagree with the declared column types.
    pub rows: Vec<Vec<Value>>,
    pub partition_size: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<(String, LogicalType)>, rows: Vec<Vec<Value>>) -> Table {
        Table {
            name: name.into(),
            columns,
            rows,
            partition_size: DEFAULT_PARTITION_SIZE,
        }
    }

    pub fn with_partition_size(mut self, n: usize) -> Table {
        self.partition_size = n;
        self
    }

    pub fn partitions(&self) -> u64 {
        partitions_for(self.rows.len() as u64, self.partition_size)
    }

    fn validate(&self) -> Result<(), EngineError> {
        if self.partition_size == 0 {
            return Err(EngineError::Load(format!("table {}: partition_size must be at least 1", self.name)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (c, _) in &self.columns {
            if !seen.insert(c.to_lowercase()) {
                return Err(EngineError::Semantic(format!("table {}: duplicate column {c}", self.name)));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != self.columns.len() {
                return Err(EngineError::ArityMismatch {
                    table: self.name.clone(),
                    row: i,
                    expected: self.columns.len(),
                    found: r.len(),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn partitions_for(rows: u64, partition_size: usize) -> u64 {
    rows.div_ceil(partition_size as u64)
}

/// Names a specific load of a table; replacing the table invalidates it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableHandle {
    pub name: String,
    pub generation: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub wall_ms: f64,
    pub rows_scanned: u64,
    pub partitions_scanned: u64,
    pub rows_output: u64,
    pub peak_rows_in_memory: u64,
}

impl Metrics {
    /// Adds the counters of a statement run after this one.
    pub fn accumulate(&mut self, other: &Metrics) {
        self.wall_ms += other.wall_ms;
        self.rows_scanned += other.rows_scanned;
        self.partitions_scanned += other.partitions_scanned;
        self.rows_output += other.rows_output;
        self.peak_rows_in_memory = self.peak_rows_in_memory.max(other.peak_rows_in_memory);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub metrics: Metrics,
}

/// Deliberate deviations from the reference semantics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultConfig {
    /// Signature pattern to factor applied to `wall_ms`.
    pub latency_multiplier: BTreeMap<String, f64>,
    /// STRING to BIGINT coercion yields NULL.
    pub coercion_bug: bool,
    /// Order-dependent aggregates keep the last tied row instead of the first.
    pub tie_break_flip: bool,
    /// Floating-point sums run over rows in reverse order.
    pub float_reverse_sum: bool,
    /// Signature pattern to factor applied to `partitions_scanned`.
    pub scan_amplify: BTreeMap<String, f64>,
    /// Base tables are read back to front.
    pub reverse_scan_order: bool,
}

impl FaultConfig {
    pub fn is_empty(&self) -> bool {
        *self == FaultConfig::default()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        for (pattern, f) in self.latency_multiplier.iter().chain(&self.scan_amplify) {
            if !(f.is_finite() && *f > 0.0) {
                return Err(EngineError::InvalidFaultConfig(format!(
                    "factor {f} for pattern '{pattern}' must be finite and positive"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<FaultConfig, EngineError> {
        let cfg: FaultConfig =
            serde_json::from_str(s).map_err(|e| EngineError::InvalidFaultConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Product of the factors whose pattern matches `signature`.
    fn factor(map: &BTreeMap<String, f64>, signature: &str) -> f64 {
        map.iter()
            .filter(|(p, _)| pattern_matches(p, signature))
            .map(|(_, f)| *f)
            .product()
    }
}

/// Exact match, with `*` matching any run of characters.
pub fn pattern_matches(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] != '*' && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub partition_size: usize,
    pub seed: u64,
    pub clock_ms: i64,
    pub digest: DigestOptions,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            partition_size: DEFAULT_PARTITION_SIZE,
            seed: 0,
            clock_ms: DEFAULT_CLOCK_MS,
            digest: DigestOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Catalog {
    tables: BTreeMap<String, (Arc<Table>, u64)>,
    next_generation: u64,
}

impl Catalog {
    fn insert(&mut self, table: Table) -> TableHandle {
        self.next_generation += 1;
        let key = table.name.to_lowercase();
        let handle = TableHandle {
            name: key.clone(),
            generation: self.next_generation,
        };
        self.tables.insert(key, (Arc::new(table), self.next_generation));
        handle
    }

    fn snapshot(&self) -> BTreeMap<String, Arc<Table>> {
        self.tables.iter().map(|(k, (t, _))| (k.clone(), t.clone())).collect()
    }
}

pub(crate) enum WriteEffect {
    Replace(Table),
    Nothing,
}

/// The reference engine, or a fault-injected copy of it.
#[derive(Debug)]
pub struct Engine {
    name: String,
    config: EngineConfig,
    faults: FaultConfig,
    catalog: RwLock<Catalog>,
    writer: Mutex<()>,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(EngineConfig::default())
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Engine {
        Engine {
            name: "reference".to_string(),
            config,
            faults: FaultConfig::default(),
            catalog: RwLock::new(Catalog::default()),
            writer: Mutex::new(()),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn faults(&self) -> &FaultConfig {
        &self.faults
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// A copy with the same tables (shared, copy-on-write) and the given
    /// deviations. Later loads into either engine do not affect the other.
    pub fn with_faults(&self, cfg: FaultConfig) -> Result<Engine, EngineError> {
        cfg.validate()?;
        let catalog = self.catalog.read().expect("catalog lock").clone();
        Ok(Engine {
            name: if cfg.is_empty() {
                self.name.clone()
            } else {
                format!("{}+faults", self.name)
            },
            config: self.config.clone(),
            faults: cfg,
            catalog: RwLock::new(catalog),
            writer: Mutex::new(()),
        })
    }

    pub fn load_table(
        &self,
        name: &str,
        columns: Vec<(String, LogicalType)>,
        rows: Vec<Vec<Value>>,
    ) -> Result<TableHandle, EngineError> {
        let table = Table::new(name, columns, rows).with_partition_size(self.config.partition_size);
        self.register(table)
    }

    /// Registers `table`, replacing any table of the same name.
    pub fn register(&self, table: Table) -> Result<TableHandle, EngineError> {
        table.validate()?;
        let _w = self.writer.lock().expect("writer lock");
        Ok(self.catalog.write().expect("catalog lock").insert(table))
    }

    pub fn table(&self, handle: &TableHandle) -> Result<Arc<Table>, EngineError> {
        match self.catalog.read().expect("catalog lock").tables.get(&handle.name) {
            Some((t, g)) if *g == handle.generation => Ok(t.clone()),
            _ => Err(EngineError::StaleHandle(handle.name.clone())),
        }
    }

    pub fn table_by_name(&self, name: &str) -> Option<Arc<Table>> {
        let key = name.to_lowercase();
        self.catalog.read().expect("catalog lock").tables.get(&key).map(|(t, _)| t.clone())
    }

    pub fn table_names(&self) -> Vec<String> {
        self.catalog.read().expect("catalog lock").tables.keys().cloned().collect()
    }

    pub fn drop_table(&self, name: &str) -> bool {
        let _w = self.writer.lock().expect("writer lock");
        self.catalog
            .write()
            .expect("catalog lock")
            .tables
            .remove(&name.to_lowercase())
            .is_some()
    }

    pub fn execute(&self, plan: &LogicalPlan) -> Result<ExecutionResult, EngineError> {
        let sig = signature_of(plan, &SignatureOptions::default()).render();
        self.run(plan, &sig, "default", "")
    }

    pub fn execute_statement(&self, stmt: &Statement, session: &str) -> Result<ExecutionResult, EngineError> {
        let plan = sql::lower(stmt)?;
        // Faults key on the signature of the customer query, not the wrapper.
        let sig = match unwrap_checksum(stmt) {
            Some(inner) => signature_of(&sql::plan::lower_query(inner)?, &SignatureOptions::default()).render(),
            None => signature_of(&plan, &SignatureOptions::default()).render(),
        };
        self.run(&plan, &sig, session, &sql::render(stmt))
    }

    pub fn execute_sql(&self, sql_text: &str, session: &str) -> Result<ExecutionResult, EngineError> {
        let stmt = sql::parse(sql_text)?;
        self.execute_statement(&stmt, session)
    }

    fn run(&self, plan: &LogicalPlan, sig: &str, session: &str, text: &str) -> Result<ExecutionResult, EngineError> {
        let seed = crate::values::fnv1a64(format!("{}\u{0}{session}\u{0}{text}", self.config.seed).as_bytes());
        let mut result = if plan.is_write() {
            // DML is serialized and applied whole, or not at all.
            let _w = self.writer.lock().expect("writer lock");
            let snapshot = self.catalog.read().expect("catalog lock").snapshot();
            let (result, effect) = exec::execute(self, &snapshot, plan, seed)?;
            if let WriteEffect::Replace(t) = effect {
                self.catalog.write().expect("catalog lock").insert(t);
            }
            result
        } else {
            let snapshot = self.catalog.read().expect("catalog lock").snapshot();
            exec::execute(self, &snapshot, plan, seed)?.0
        };
        let m = &mut result.metrics;
        let lat = FaultConfig::factor(&self.faults.latency_multiplier, sig);
        m.wall_ms *= lat;
        let amp = FaultConfig::factor(&self.faults.scan_amplify, sig);
        if amp != 1.0 {
            m.partitions_scanned = (m.partitions_scanned as f64 * amp).ceil() as u64;
        }
        Ok(result)
    }
}

impl SchemaProvider for Engine {
    fn table_schema(&self, table: &str) -> Option<Vec<(String, LogicalType)>> {
        self.table_by_name(table).map(|t| t.columns.clone())
    }
}

/// The seam between the simulator and a query engine.
pub trait EngineAdapter: Send + Sync {
    fn name(&self) -> String;

    fn execute_sql(&self, sql: &str, session: &str) -> Result<ExecutionResult, EngineError>;

    /// Declared column types of a base table, when the engine knows them.
    fn table_schema(&self, _table: &str) -> Option<Vec<(String, LogicalType)>> {
        None
    }

    /// Releases temporary tables created during a simulation.
    fn drop_tables(&self, _names: &[String]) {}

    /// Most statements the adapter accepts at once.
    fn capacity(&self) -> usize {
        usize::MAX
    }

    fn ping(&self) -> Result<(), EngineError> {
        Ok(())
    }
}

impl EngineAdapter for Engine {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn execute_sql(&self, sql: &str, session: &str) -> Result<ExecutionResult, EngineError> {
        Engine::execute_sql(self, sql, session)
    }

    fn table_schema(&self, table: &str) -> Option<Vec<(String, LogicalType)>> {
        SchemaProvider::table_schema(self, table)
    }

    fn drop_tables(&self, names: &[String]) {
        for n in names {
            self.drop_table(n);
        }
    }
}

impl<A: EngineAdapter + ?Sized> EngineAdapter for Arc<A> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn execute_sql(&self, sql: &str, session: &str) -> Result<ExecutionResult, EngineError> {
        (**self).execute_sql(sql, session)
    }

    fn table_schema(&self, table: &str) -> Option<Vec<(String, LogicalType)>> {
        (**self).table_schema(table)
    }

    fn drop_tables(&self, names: &[String]) {
        (**self).drop_tables(names)
    }

    fn capacity(&self) -> usize {
        (**self).capacity()
    }

    fn ping(&self) -> Result<(), EngineError> {
        (**self).ping()
    }
}

#[cfg(test)]
mod tests;
