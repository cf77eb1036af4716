//! Table files on disk.
//!
//! A table `t` is `t.csv` or `t.jsonl` plus a sidecar `t.schema` holding one
//! `name TYPE` pair per line (`#` starts a comment). CSV cells load as
//! strings and empty cells as NULL; JSONL rows are objects keyed by column
//! name and keep their JSON types. Both are coerced on scan.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Engine, EngineError, Table, TableHandle};
use crate::values::{LogicalType, Value};

fn load_err(path: &Path, msg: impl std::fmt::Display) -> EngineError {
    EngineError::Load(format!("{}: {msg}", path.display()))
}

pub fn read_schema(path: &Path) -> Result<Vec<(String, LogicalType)>, EngineError> {
    let text = fs::read_to_string(path).map_err(|e| load_err(path, e))?;
    let mut cols = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(ty), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(load_err(path, format!("line {}: expected `name TYPE`", n + 1)));
        };
        let ty: LogicalType = ty
            .parse()
            .map_err(|e| load_err(path, format!("line {}: {e}", n + 1)))?;
        cols.push((name.to_string(), ty));
    }
    if cols.is_empty() {
        return Err(load_err(path, "schema declares no columns"));
    }
    Ok(cols)
}

fn schema_path(data: &Path) -> PathBuf {
    data.with_extension("schema")
}

fn read_csv(path: &Path, columns: &[(String, LogicalType)]) -> Result<Vec<Vec<Value>>, EngineError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| load_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| load_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let positions = columns
        .iter()
        .map(|(name, _)| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| load_err(path, format!("header lacks column {name}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| load_err(path, e))?;
        rows.push(
            positions
                .iter()
                .map(|&p| match rec.get(p) {
                    None | Some("") => Value::Null,
                    Some(s) => Value::Str(s.to_string()),
                })
                .collect(),
        );
    }
    Ok(rows)
}

fn read_jsonl(path: &Path, columns: &[(String, LogicalType)]) -> Result<Vec<Vec<Value>>, EngineError> {
    let file = fs::File::open(path).map_err(|e| load_err(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| load_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| load_err(path, format!("line {}: {e}", n + 1)))?;
        rows.push(
            columns
                .iter()
                .map(|(name, _)| obj.get(name).map_or(Value::Null, Value::from_json))
                .collect(),
        );
    }
    Ok(rows)
}

/// Loads one `.csv` or `.jsonl` file; the table is named after the file stem.
pub fn load_table_file(engine: &Engine, path: &Path) -> Result<TableHandle, EngineError> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| load_err(path, "file name is not valid UTF-8"))?;
    let columns = read_schema(&schema_path(path))?;
    let rows = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(path, &columns)?,
        Some("jsonl") => read_jsonl(path, &columns)?,
        _ => return Err(load_err(path, "expected a .csv or .jsonl file")),
    };
    engine.load_table(name, columns, rows)
}

/// Loads every table file in `dir`, in file-name order.
pub fn load_dir(engine: &Engine, dir: &Path) -> Result<Vec<TableHandle>, EngineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| load_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "jsonl")))
        .collect();
    files.sort();
    files.iter().map(|p| load_table_file(engine, p)).collect()
}

/// Writes `<dir>/<name>.jsonl` and its schema sidecar.
pub fn write_jsonl_table(table: &Table, dir: &Path) -> Result<PathBuf, EngineError> {
    let path = dir.join(format!("{}.jsonl", table.name));
    let mut schema = String::new();
    for (name, ty) in &table.columns {
        schema.push_str(&format!("{name} {ty}\n"));
    }
    fs::write(schema_path(&path), schema).map_err(|e| load_err(&path, e))?;
    let file = fs::File::create(&path).map_err(|e| load_err(&path, e))?;
    let mut w = BufWriter::new(file);
    for row in &table.rows {
        let obj: serde_json::Map<String, serde_json::Value> = table
            .columns
            .iter()
            .zip(row)
            .map(|((name, _), v)| (name.clone(), v.to_json()))
            .collect();
        serde_json::to_writer(&mut w, &obj).map_err(|e| load_err(&path, e))?;
        w.write_all(b"\n").map_err(|e| load_err(&path, e))?;
    }
    w.flush().map_err(|e| load_err(&path, e))?;
    Ok(path)
}
