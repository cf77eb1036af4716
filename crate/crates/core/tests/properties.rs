mod common;

use std::hash::Hasher;

use common::oracle;
use fancy_regex::Regex;
use proptest::prelude::*;
use querysim_core::engine::{Engine, EngineConfig};
use querysim_core::perfstats::{self, QuantileSketch};
use querysim_core::signature::{mask_identifier, signature_of_sql, SignatureOptions};
use querysim_core::values::{coerce, digest, fnv1a64, LogicalType, Value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        (-1e12f64..1e12).prop_map(Value::Float),
        "[a-z0-9 .-]{0,8}".prop_map(Value::Str),
    ]
}

fn rows() -> impl Strategy<Value = Vec<Vec<Value>>> {
    (1usize..4).prop_flat_map(|w| prop::collection::vec(prop::collection::vec(value(), w), 0..30))
}

fn date_mask_oracle() -> Regex {
    let y = r"(?:19[7-9]\d|20\d\d)";
    let m = r"(?:0[1-9]|1[0-2])";
    let d = r"(?:0[1-9]|[12]\d|3[01])";
    let shapes = [
        r"\d{13}".to_string(),
        format!("{y}-{m}-{d}"),
        format!("{y}_{m}_{d}"),
        r"\d{10}".to_string(),
        format!("{y}{m}{d}"),
        format!("{y}-{m}"),
        format!("{y}{m}"),
    ];
    Regex::new(&format!(r"(?<!\d)(?:{})(?!\d)", shapes.join("|"))).unwrap()
}

fn name_fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,4}",
        Just("-".to_string()),
        Just("_".to_string()),
        "[0-9]{1,14}",
        (1960u32..2110, 0u32..14, 0u32..33).prop_map(|(y, m, d)| format!("{y}-{m:02}-{d:02}")),
        (1960u32..2110, 0u32..14, 0u32..33).prop_map(|(y, m, d)| format!("{y}_{m:02}_{d:02}")),
        (1960u32..2110, 0u32..14, 0u32..33).prop_map(|(y, m, d)| format!("{y}{m:02}{d:02}")),
        (1960u32..2110, 0u32..14).prop_map(|(y, m)| format!("{y}-{m:02}")),
        (1960u32..2110, 0u32..14).prop_map(|(y, m)| format!("{y}{m:02}")),
    ]
}

const ALPHABET: &[&str] = &["S[*]", "WS", "LJ", "RJ", "FJ", "CJ", "CT", "S", "G", "J", "O", "E", "U", "I", "D", "A", "T"];

/// True when `body` is a balanced sequence of alphabet letters and separators.
fn well_formed(body: &str) -> bool {
    let mut rest = body;
    let mut depth: i32 = 0;
    while !rest.is_empty() {
        if let Some(tok) = ALPHABET.iter().find(|t| rest.starts_with(**t)) {
            rest = &rest[tok.len()..];
            continue;
        }
        match rest.as_bytes()[0] {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b',' => {}
            _ => return false,
        }
        if depth < 0 {
            return false;
        }
        rest = &rest[1..];
    }
    depth == 0
}

proptest! {
    #[test]
    fn fnv_matches_reference_crate(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let mut h = fnv::FnvHasher::default();
        h.write(&bytes);
        prop_assert_eq!(fnv1a64(&bytes), h.finish());
    }

    #[test]
    fn mask_matches_regex_oracle(parts in prop::collection::vec(name_fragment(), 1..6)) {
        let name = parts.concat();
        let want = date_mask_oracle().replace_all(&name, "X").into_owned();
        let got = mask_identifier(&name, "X");
        prop_assert_eq!(&got, &want, "name {}", name);
        prop_assert_eq!(mask_identifier(&got, "X"), got);
    }

    #[test]
    fn digest_ignores_row_order(rows in rows(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(digest(&rows).unwrap(), digest(&shuffled).unwrap());
    }

    #[test]
    fn coercion_is_idempotent(v in value(), t in prop::sample::select(LogicalType::ALL.to_vec())) {
        let once = coerce(&v, t);
        prop_assert!(once.is_null() || t.matches(&once));
        prop_assert_eq!(coerce(&once, t), once);
    }

    #[test]
    fn slo_range_brackets_median(xs in prop::collection::vec(0.0f64..1e6, 1..50)) {
        let r = perfstats::slo_range(&xs).unwrap();
        prop_assert!(r.lower <= r.median && r.median <= r.upper);
        prop_assert!(r.mad >= 0.0 && r.lower >= 0.0);
        if r.trusted {
            prop_assert!(!perfstats::is_violation(&r, r.median).unwrap());
        }
    }

    #[test]
    fn slo_range_is_scale_equivariant(
        xs in prop::collection::vec(1u32..10_000, 5..40),
        probes in prop::collection::vec(0u32..20_000, 1..10),
        k in prop::sample::select(vec![0.5f64, 2.0, 4.0, 8.0]),
    ) {
        let base: Vec<f64> = xs.iter().map(|&x| f64::from(x)).collect();
        let scaled: Vec<f64> = base.iter().map(|x| x * k).collect();
        let (a, b) = (perfstats::slo_range(&base).unwrap(), perfstats::slo_range(&scaled).unwrap());
        prop_assert_eq!((a.median * k, a.mad * k, a.lower * k, a.upper * k), (b.median, b.mad, b.lower, b.upper));
        prop_assert_eq!(a.cov, b.cov);
        prop_assert_eq!(a.trusted, b.trusted);
        if a.trusted {
            for p in probes {
                let p = f64::from(p);
                prop_assert_eq!(perfstats::is_violation(&a, p).unwrap(), perfstats::is_violation(&b, p * k).unwrap());
            }
        }
    }

    #[test]
    fn merged_sketch_keeps_rank_bound(
        a in prop::collection::vec(-1e3f64..1e3, 1..3000),
        b in prop::collection::vec(-1e3f64..1e3, 1..3000),
    ) {
        let eps = 0.05;
        let (mut sa, mut sb) = (QuantileSketch::new(eps), QuantileSketch::new(eps));
        a.iter().for_each(|&x| sa.insert(x));
        b.iter().for_each(|&x| sb.insert(x));
        let merged = sa.merge(&sb);
        let mut all: Vec<f64> = a.iter().chain(&b).copied().collect();
        all.sort_by(f64::total_cmp);
        let n = all.len() as f64;
        prop_assert_eq!(merged.count(), all.len() as u64);
        for i in 0..=20 {
            let q = f64::from(i) / 20.0;
            let x = merged.quantile(q).unwrap();
            let target = (q * n).ceil().max(1.0);
            let below = all.partition_point(|v| *v < x) as f64;
            let upto = all.partition_point(|v| *v <= x) as f64;
            prop_assert!(target + eps * n >= below + 1.0 && target - eps * n <= upto, "q={} x={}", q, x);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn engine_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = oracle::gen_tables(&mut rng);
        let e = Engine::new(EngineConfig::default());
        let cols = |c: &[(&str, LogicalType)]| c.iter().map(|(n, ty)| (n.to_string(), *ty)).collect::<Vec<_>>();
        e.load_table("t1", cols(&oracle::T1_COLS), oracle::to_values(&t.t1)).unwrap();
        e.load_table("t2", cols(&oracle::T2_COLS), oracle::to_values(&t.t2)).unwrap();
        for _ in 0..8 {
            let q = oracle::gen_query(&mut rng);
            let sql = oracle::render(&q);
            let res = e.execute_sql(&sql, "p").map_err(|err| TestCaseError::fail(format!("{sql}: {err}")))?;
            let mut got = oracle::from_values(&res.rows).expect("int and string values only");
            got.sort();
            prop_assert_eq!(got, oracle::evaluate(&q, &t), "{}", sql);

            let sig = signature_of_sql(&sql, &SignatureOptions::default()).unwrap();
            prop_assert!(well_formed(&sig.body), "{} -> {}", sql, sig.body);
        }
    }
}
