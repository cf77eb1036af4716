use super::*;
use crate::engine::{Engine, EngineConfig, ExecutionResult, FaultConfig};
use crate::rewrite::NondetCategory;
use crate::workload::{BenchmarkEntry, ClusterOptions, Selection, BENCHMARK_VERSION};

fn side(digest: u64, wall: f64, parts: u64) -> SideOutcome {
    SideOutcome {
        digest: Some(ResultDigest {
            xor_hash: digest,
            row_count: 1,
            column_count: 1,
        }),
        error: None,
        wall_ms: wall,
        partitions_scanned: parts,
        rows_scanned: 10,
    }
}

fn raw(id: &str, control: SideOutcome, test: SideOutcome, labels: Vec<NondetLabel>) -> RawResult {
    RawResult {
        query_id: id.into(),
        signature: "S(T)".into(),
        sql: "SELECT 1".into(),
        labels,
        control,
        test,
        executed: vec![],
    }
}

fn random_label() -> NondetLabel {
    NondetLabel {
        category: NondetCategory::Random,
        construct: "random".into(),
        location: "body/items[0]".into(),
        speculative: false,
    }
}

fn results(rs: Vec<RawResult>) -> RawResults {
    RawResults {
        benchmark_id: "b".into(),
        built_from: TimeRange::all(),
        control: "c".into(),
        test: "t".into(),
        options: SimulationOptions::default(),
        started_at_ms: 0,
        results: rs,
    }
}

fn bench(queries: &[&str]) -> Benchmark {
    Benchmark {
        version: BENCHMARK_VERSION,
        id: "test".into(),
        built_from: TimeRange::all(),
        options: ClusterOptions::default(),
        selection: Selection::Latest,
        entries: queries
            .iter()
            .enumerate()
            .map(|(i, q)| BenchmarkEntry {
                signature: crate::signature::signature_of_sql(q, &Default::default())
                    .map(|s| s.render())
                    .unwrap_or_default(),
                query_id: format!("q{i}"),
                query: q.to_string(),
                time: 0,
                member_count: 1,
                baseline: None,
                unparsed: false,
            })
            .collect(),
    }
}

fn engine() -> Engine {
    let e = Engine::new(EngineConfig::default());
    e.load_table(
        "t",
        vec![("a".into(), crate::values::LogicalType::Bigint)],
        (0..20).map(|i| vec![Value::Int(i)]).collect(),
    )
    .unwrap();
    e
}

#[test]
fn threshold_rule_needs_ratio_and_delta() {
    let th = Thresholds::default();
    let c = compare_one(&raw("a", side(1, 5000.0, 1), side(1, 7000.0, 1), vec![]), &th);
    assert!(!c.slower, "ratio 1.4 with a 2000ms delta is not slower");
    let c = compare_one(&raw("a", side(1, 10.0, 1), side(1, 100.0, 1), vec![]), &th);
    assert!(!c.slower, "ratio 10 with a 90ms delta is not slower");
    let c = compare_one(&raw("a", side(1, 100.0, 1), side(1, 200.0, 3), vec![]), &th);
    assert!(c.slower);
    assert_eq!(c.scan_diff, 2);
    assert!(c.scan_regressed);
}

#[test]
fn labelled_mismatch_is_skipped() {
    let th = Thresholds::default();
    let c = compare_one(&raw("a", side(1, 1.0, 1), side(2, 1.0, 1), vec![random_label()]), &th);
    assert_eq!(c.digest_match, DigestMatch::SkippedNondet);
    assert!(c.nondet_mismatch);
    let c = compare_one(&raw("a", side(1, 1.0, 1), side(2, 1.0, 1), vec![]), &th);
    assert_eq!(c.digest_match, DigestMatch::Mismatch);
    let c = compare_one(&raw("a", side(1, 1.0, 1), side(1, 1.0, 1), vec![random_label()]), &th);
    assert_eq!(c.digest_match, DigestMatch::Match);
}

#[test]
fn control_error_is_surfaced() {
    let failed = SideOutcome::failed(SideError {
        code: "UNKNOWN_TABLE".into(),
        message: "x".into(),
    });
    let r = compare(&results(vec![raw("a", failed, side(1, 1.0, 1), vec![])]), &Thresholds::default());
    assert_eq!(r.comparisons[0].digest_match, DigestMatch::Error);
    assert_eq!(r.summary.errored, 1);
    assert!(!r.has_regressions());
}

#[test]
fn empty_benchmark_gives_zero_summary() {
    let e = engine();
    let raw = run_simulation(&bench(&[]), &e, &e, &SimulationOptions::default()).unwrap();
    let r = compare(&raw, &Thresholds::default());
    assert_eq!(r.summary, Summary::default());
    assert_eq!(r.exit_code(), 0);
    let json = render_report(&r, ReportFormat::Json, false);
    assert_eq!(report::parse_report_json(&json).unwrap(), r);
}

#[test]
fn self_comparison_matches_and_round_trips() {
    let e = engine();
    let b = bench(&[
        "SELECT a FROM t WHERE a > 3",
        "SELECT a, random() FROM t",
        "INSERT INTO t SELECT a FROM t WHERE a < 2",
        "DELETE FROM t WHERE a = 1",
        "SELECT a FROM missing",
    ]);
    let raw = run_simulation(&b, &e, &e, &SimulationOptions::default()).unwrap();
    let r = compare(&raw, &Thresholds::default());
    assert_eq!(r.summary.total, 5);
    assert_eq!(r.summary.matched, 4);
    assert_eq!(r.summary.errored, 1);
    assert_eq!(r.comparison("q1").unwrap().labels.len(), 1);
    // Writes landed in temp tables that were dropped afterwards.
    assert_eq!(e.table_names(), vec!["t".to_string()]);
    assert_eq!(e.table_by_name("t").unwrap().rows.len(), 20);
    let json = render_report(&r, ReportFormat::Json, false);
    assert_eq!(report::parse_report_json(&json).unwrap(), r);
}

#[test]
fn markdown_hides_sql_unless_asked() {
    let e = engine();
    let slow = e
        .with_faults(FaultConfig {
            latency_multiplier: [("S(T)".to_string(), 100.0)].into_iter().collect(),
            ..FaultConfig::default()
        })
        .unwrap();
    let b = bench(&["SELECT a FROM t WHERE a = 17"]);
    let r = compare(
        &run_simulation(&b, &e, &slow, &SimulationOptions::default()).unwrap(),
        &Thresholds::default(),
    );
    assert_eq!(r.slower_list.len(), 1);
    let md = render_report(&r, ReportFormat::Markdown, false);
    assert!(md.contains("## Slower queries") && md.contains("| q0 |"));
    assert!(!md.contains("a = 17"));
    assert!(render_report(&r, ReportFormat::Markdown, true).contains("a = 17"));
}

struct Down;

impl EngineAdapter for Down {
    fn name(&self) -> String {
        "down".into()
    }

    fn execute_sql(&self, _: &str, _: &str) -> Result<ExecutionResult, EngineError> {
        Err(EngineError::Unavailable("connection refused".into()))
    }
}

#[test]
fn unavailable_adapter_aborts() {
    let e = engine();
    let err = run_simulation(&bench(&["SELECT a FROM t"]), &e, &Down, &SimulationOptions::default()).unwrap_err();
    assert!(matches!(err, SimulationError::Unavailable { .. }));
    let bad = SimulationOptions {
        session: "no-dash".into(),
        ..SimulationOptions::default()
    };
    assert!(matches!(
        run_simulation(&bench(&[]), &e, &e, &bad),
        Err(SimulationError::InvalidInput(_))
    ));
}

#[test]
fn fleet_labels_recurring_share() {
    let f = synth::fleet(&synth::FleetSpec {
        queries: 1000,
        ..synth::FleetSpec::default()
    });
    assert_eq!(f.template_of.len(), 1000);
    assert_eq!(f.recurring_queries(), 970);
}
