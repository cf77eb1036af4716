use super::*;
use crate::values::{digest, ResultDigest};

fn engine() -> Engine {
    let e = Engine::default();
    e.load_table(
        "t",
        vec![
            ("id".into(), LogicalType::Bigint),
            ("g".into(), LogicalType::Varchar),
            ("x".into(), LogicalType::Double),
        ],
        vec![
            vec![Value::Int(1), "a".into(), Value::Float(1.5)],
            vec![Value::Int(2), "b".into(), Value::Float(2.5)],
            vec![Value::Int(3), "a".into(), Value::Null],
            vec![Value::Int(4), "c".into(), Value::Float(-1.0)],
        ],
    )
    .unwrap();
    e.load_table(
        "u",
        vec![("id".into(), LogicalType::Bigint), ("tag".into(), LogicalType::Varchar)],
        vec![
            vec![Value::Int(1), "one".into()],
            vec![Value::Int(1), "uno".into()],
            vec![Value::Int(3), "three".into()],
            vec![Value::Int(9), "nine".into()],
        ],
    )
    .unwrap();
    e
}

fn rows(e: &Engine, sql: &str) -> Vec<Vec<Value>> {
    e.execute_sql(sql, "s").unwrap_or_else(|err| panic!("{sql}: {err}")).rows
}

fn ints(v: &[i64]) -> Vec<Vec<Value>> {
    v.iter().map(|&i| vec![Value::Int(i)]).collect()
}

fn err_code(e: &Engine, sql: &str) -> &'static str {
    e.execute_sql(sql, "s").expect_err(sql).code()
}

#[test]
fn scan_coerces_physical_values() {
    let e = Engine::default();
    e.load_table(
        "m",
        vec![("v".into(), LogicalType::Bigint)],
        vec![vec![Value::Int(100)], vec!["100".into()], vec!["abc".into()]],
    )
    .unwrap();
    assert_eq!(
        rows(&e, "SELECT v FROM m"),
        vec![vec![Value::Int(100)], vec![Value::Int(100)], vec![Value::Null]]
    );
    let buggy = e
        .with_faults(FaultConfig {
            coercion_bug: true,
            ..FaultConfig::default()
        })
        .unwrap();
    assert_eq!(
        rows(&buggy, "SELECT v FROM m"),
        vec![vec![Value::Int(100)], vec![Value::Null], vec![Value::Null]]
    );
}

#[test]
fn filter_project_and_order() {
    let e = engine();
    assert_eq!(rows(&e, "SELECT id FROM t WHERE x > 0 ORDER BY id DESC"), ints(&[2, 1]));
    assert_eq!(rows(&e, "SELECT id FROM t ORDER BY x"), ints(&[4, 1, 2, 3]));
    assert_eq!(rows(&e, "SELECT id FROM t ORDER BY x DESC"), ints(&[2, 1, 4, 3]));
    assert_eq!(rows(&e, "SELECT id AS k FROM t ORDER BY 1 DESC LIMIT 2"), ints(&[4, 3]));
    assert_eq!(rows(&e, "SELECT id FROM t ORDER BY g, id DESC"), ints(&[3, 1, 2, 4]));
}

#[test]
fn group_by_and_having() {
    let e = engine();
    let r = rows(&e, "SELECT g, count(*), sum(id) FROM t GROUP BY g HAVING count(*) > 1");
    assert_eq!(r, vec![vec!["a".into(), Value::Int(2), Value::Int(4)]]);
    let r = rows(&e, "SELECT count(*), max(id) FROM t WHERE id > 100");
    assert_eq!(r, vec![vec![Value::Int(0), Value::Null]]);
    assert!(rows(&e, "SELECT g FROM t WHERE id > 100 GROUP BY g").is_empty());
    let r = rows(&e, "SELECT g, sum(id) AS s FROM t GROUP BY g ORDER BY s DESC, g");
    assert_eq!(r[0], vec!["a".into(), Value::Int(4)]);
    assert_eq!(err_code(&e, "SELECT id, count(*) FROM t GROUP BY g"), "SEMANTIC_ERROR");
}

#[test]
fn joins_and_outer_padding() {
    let e = engine();
    let r = rows(&e, "SELECT t.id, u.tag FROM t JOIN u ON t.id = u.id ORDER BY u.tag");
    assert_eq!(r.len(), 3);
    let r = rows(&e, "SELECT t.id, u.tag FROM t LEFT JOIN u ON t.id = u.id");
    assert_eq!(r.len(), 5);
    assert!(r.contains(&vec![Value::Int(2), Value::Null]));
    let r = rows(&e, "SELECT t.id, u.id FROM t FULL JOIN u ON t.id = u.id");
    assert_eq!(r.len(), 6);
    assert_eq!(r.last().unwrap(), &vec![Value::Null, Value::Int(9)]);
    assert_eq!(err_code(&e, "SELECT id FROM t JOIN u ON t.id = u.id"), "AMBIGUOUS_COLUMN");
}

#[test]
fn subqueries_correlated_and_not() {
    let e = engine();
    assert_eq!(
        rows(&e, "SELECT id FROM t WHERE id IN (SELECT id FROM u) ORDER BY id"),
        ints(&[1, 3])
    );
    assert_eq!(
        rows(&e, "SELECT id, (SELECT count(*) FROM u WHERE u.id = t.id) FROM t ORDER BY id"),
        vec![
            vec![Value::Int(1), Value::Int(2)],
            vec![Value::Int(2), Value::Int(0)],
            vec![Value::Int(3), Value::Int(1)],
            vec![Value::Int(4), Value::Int(0)],
        ]
    );
    assert_eq!(err_code(&e, "SELECT (SELECT id FROM u) FROM t"), "CARDINALITY_VIOLATION");
    assert_eq!(err_code(&e, "SELECT id FROM t WHERE g IN (SELECT id FROM u)"), "TYPE_ERROR");
}

#[test]
fn ctes_and_derived_tables() {
    let e = engine();
    let r = rows(
        &e,
        "WITH a AS (SELECT id FROM t WHERE g = 'a') SELECT x.id FROM a AS x JOIN a AS y ON x.id = y.id ORDER BY x.id",
    );
    assert_eq!(r, ints(&[1, 3]));
    let r = rows(&e, "SELECT d.n FROM (SELECT count(*) AS n FROM u) AS d");
    assert_eq!(r, ints(&[4]));
}

#[test]
fn windows() {
    let e = engine();
    let r = rows(&e, "SELECT id, row_number() OVER (PARTITION BY g ORDER BY id DESC) FROM t ORDER BY id");
    assert_eq!(
        r.iter().map(|r| r[1].clone()).collect::<Vec<_>>(),
        vec![Value::Int(2), Value::Int(1), Value::Int(1), Value::Int(1)]
    );
    let r = rows(&e, "SELECT id, sum(id) OVER (ORDER BY g) FROM t ORDER BY id");
    assert_eq!(
        r.iter().map(|r| r[1].clone()).collect::<Vec<_>>(),
        vec![Value::Int(4), Value::Int(6), Value::Int(4), Value::Int(10)]
    );
    let r = rows(&e, "SELECT g, rank() OVER (ORDER BY count(*) DESC) FROM t GROUP BY g ORDER BY g");
    assert_eq!(
        r.iter().map(|r| r[1].clone()).collect::<Vec<_>>(),
        vec![Value::Int(1), Value::Int(2), Value::Int(2)]
    );
}

#[test]
fn union_distinct_and_values() {
    let e = engine();
    assert_eq!(rows(&e, "SELECT 1 + 2"), ints(&[3]));
    assert_eq!(rows(&e, "SELECT DISTINCT g FROM t").len(), 3);
    assert_eq!(rows(&e, "SELECT id FROM t UNION ALL SELECT id FROM u").len(), 8);
    assert_eq!(
        err_code(&e, "SELECT id FROM t UNION ALL SELECT id, tag FROM u"),
        "SEMANTIC_ERROR"
    );
}

#[test]
fn checksum_matches_client_digest() {
    let e = engine();
    let plain = e.execute_sql("SELECT id, g, x FROM t", "s").unwrap();
    let want = digest(plain.rows.iter()).unwrap();
    let wrapped = e
        .execute_sql("SELECT result_digest(*) FROM (SELECT id, g, x FROM t) AS sim_checksum", "s")
        .unwrap();
    let got: ResultDigest = wrapped.rows[0][0].as_str().unwrap().parse().unwrap();
    assert_eq!(got, want);
}

#[test]
fn limit_short_circuits_scans() {
    let e = Engine::new(EngineConfig {
        partition_size: 10,
        ..EngineConfig::default()
    });
    let data = (0..100).map(|i| vec![Value::Int(i)]).collect();
    e.load_table("big", vec![("v".into(), LogicalType::Bigint)], data).unwrap();
    let r = e.execute_sql("SELECT v FROM big LIMIT 5", "s").unwrap();
    assert_eq!(r.metrics.rows_scanned, 5);
    assert_eq!(r.metrics.partitions_scanned, 1);
    let r = e.execute_sql("SELECT v FROM big WHERE v >= 50", "s").unwrap();
    assert_eq!(r.metrics.rows_scanned, 100);
    assert_eq!(r.metrics.partitions_scanned, 10);
    assert_eq!(r.metrics.rows_output, 50);
    let r = e.execute_sql("SELECT v FROM big ORDER BY v DESC LIMIT 1", "s").unwrap();
    assert_eq!(r.rows, ints(&[99]));
    assert_eq!(r.metrics.rows_scanned, 100);
}

#[test]
fn wall_time_is_deterministic() {
    let e = engine();
    let a = e.execute_sql("SELECT g, count(*) FROM t GROUP BY g", "s").unwrap();
    let b = e.execute_sql("SELECT g, count(*) FROM t GROUP BY g", "other").unwrap();
    assert_eq!(a.metrics.wall_ms, b.metrics.wall_ms);
    assert!(a.metrics.wall_ms >= cost::STATEMENT_MS + cost::PARTITION_MS);
}

#[test]
fn writes_apply_and_stale_handles() {
    let e = engine();
    let h = e.load_table("w", vec![("v".into(), LogicalType::Bigint)], vec![]).unwrap();
    let r = e.execute_sql("INSERT INTO w SELECT id FROM t WHERE id < 3", "s").unwrap();
    assert_eq!(r.rows, ints(&[2]));
    assert!(matches!(e.table(&h), Err(EngineError::StaleHandle(_))));
    assert_eq!(e.table_by_name("W").unwrap().rows.len(), 2);
    e.execute_sql("DELETE FROM w WHERE v = 1", "s").unwrap();
    assert_eq!(rows(&e, "SELECT v FROM w"), ints(&[2]));
    e.execute_sql("CREATE TABLE c AS SELECT g, count(*) AS n FROM t GROUP BY g", "s")
        .unwrap();
    assert_eq!(
        e.table_by_name("c").unwrap().columns,
        vec![("g".to_string(), LogicalType::Varchar), ("n".to_string(), LogicalType::Bigint)]
    );
    assert_eq!(err_code(&e, "CREATE TABLE c AS SELECT 1 AS a"), "TABLE_EXISTS");
    assert_eq!(err_code(&e, "INSERT INTO w SELECT id, g FROM t"), "SEMANTIC_ERROR");
}

#[test]
fn latency_and_scan_faults_key_on_signature() {
    let e = engine();
    let sql = "SELECT id FROM t WHERE id = 1";
    let sig = crate::signature::signature_of(
        &crate::sql::lower(&crate::sql::parse(sql).unwrap()).unwrap(),
        &crate::signature::SignatureOptions::default(),
    )
    .render();
    let base = e.execute_sql(sql, "s").unwrap().metrics;
    let slow = e
        .with_faults(FaultConfig {
            latency_multiplier: [(sig.clone(), 3.0)].into_iter().collect(),
            scan_amplify: [(sig, 4.0)].into_iter().collect(),
            ..FaultConfig::default()
        })
        .unwrap();
    let m = slow.execute_sql(sql, "s").unwrap().metrics;
    assert!((m.wall_ms - 3.0 * base.wall_ms).abs() < 1e-9);
    assert_eq!(m.partitions_scanned, 4 * base.partitions_scanned);
    let other = slow.execute_sql("SELECT count(*) FROM t", "s").unwrap().metrics;
    assert_eq!(other.partitions_scanned, 1);
}

#[test]
fn randomness_is_seeded_per_session_and_text() {
    let e = engine();
    let a = rows(&e, "SELECT random()");
    assert_eq!(a, rows(&e, "SELECT random()"));
    assert_ne!(a, e.execute_sql("SELECT random()", "s2").unwrap().rows);
}

#[test]
fn loader_round_trips_jsonl_and_reads_csv() {
    let dir = std::env::temp_dir().join(format!("querysim-loader-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let e = engine();
    let t = e.table_by_name("t").unwrap();
    write_jsonl_table(&t, &dir).unwrap();
    std::fs::write(dir.join("c.csv"), "v,w\n7,x\n,y\n").unwrap();
    std::fs::write(dir.join("c.schema"), "# csv table\nv BIGINT\nw VARCHAR\n").unwrap();
    let fresh = Engine::default();
    let handles = load_dir(&fresh, &dir).unwrap();
    assert_eq!(handles.len(), 2);
    assert_eq!(fresh.table_by_name("t").unwrap().rows, t.rows);
    assert_eq!(
        rows(&fresh, "SELECT v FROM c"),
        vec![vec![Value::Int(7)], vec![Value::Null]]
    );
    std::fs::remove_dir_all(&dir).unwrap();
}
