//! Writes a self-contained demo: corpus tables, a benchmark, fault configs
//! and a synthetic query log.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use querysim_core::engine::{write_jsonl_table, FaultConfig};
use querysim_core::simulator::synth::{self, CorpusSpec, FleetSpec};

use crate::engines::DATA_DIR_KEY;

fn write_faults(path: &Path, faults: &FaultConfig) -> Result<()> {
    let mut json = serde_json::to_value(faults)?;
    json.as_object_mut()
        .expect("fault config is an object")
        .insert(DATA_DIR_KEY.into(), "../data".into());
    fs::write(path, serde_json::to_string_pretty(&json)? + "\n").with_context(|| path.display().to_string())
}

pub fn write_demo(dir: &Path, queries: usize, seed: u64) -> Result<Vec<String>> {
    let data = dir.join("data");
    let faults = dir.join("faults");
    fs::create_dir_all(&data)?;
    fs::create_dir_all(&faults)?;

    let corpus = synth::corpus(&CorpusSpec {
        queries,
        seed,
        ..CorpusSpec::default()
    });
    let mut written = Vec::new();
    for t in &corpus.tables {
        written.push(write_jsonl_table(t, &data)?.display().to_string());
    }
    let bench = dir.join("bench.json");
    fs::write(&bench, corpus.benchmark.to_json_string() + "\n")?;
    written.push(bench.display().to_string());

    for (name, cfg) in [
        ("none", FaultConfig::default()),
        ("coercion", synth::coercion_faults()),
        ("latency", synth::latency_faults(2.0)),
        ("scan", synth::scan_faults(3.0)),
    ] {
        let path = faults.join(format!("{name}.json"));
        write_faults(&path, &cfg)?;
        written.push(path.display().to_string());
    }

    let fleet = synth::fleet(&FleetSpec {
        seed,
        ..FleetSpec::default()
    });
    let log = dir.join("log.jsonl");
    fs::write(&log, fleet.workload.to_json_lines())?;
    written.push(log.display().to_string());
    Ok(written)
}
