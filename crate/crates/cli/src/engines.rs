//! Engine specs: `ref:<data-dir>` and `ref+faults:<config-file>`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use querysim_core::engine::{load_dir, Engine, EngineConfig, FaultConfig};

/// Key in a fault config file naming the data directory, relative to the
/// file. Stripped before the rest is read as a [`FaultConfig`].
pub const DATA_DIR_KEY: &str = "data_dir";

#[derive(Debug, Clone, PartialEq)]
pub enum EngineSpec {
    Reference { data_dir: PathBuf },
    Faults { config: PathBuf },
}

impl std::str::FromStr for EngineSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("ref+faults:") {
            Ok(EngineSpec::Faults { config: rest.into() })
        } else if let Some(rest) = s.strip_prefix("ref:") {
            Ok(EngineSpec::Reference { data_dir: rest.into() })
        } else {
            Err(format!("unknown engine spec '{s}' (expected ref:<data-dir> or ref+faults:<config-file>)"))
        }
    }
}

struct FaultFile {
    data_dir: Option<PathBuf>,
    faults: FaultConfig,
}

fn read_fault_file(path: &Path) -> Result<FaultFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading fault config {}", path.display()))?;
    let mut json: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing fault config {}", path.display()))?;
    let data_dir = match json.as_object_mut().and_then(|o| o.remove(DATA_DIR_KEY)) {
        None => None,
        Some(serde_json::Value::String(d)) => {
            let base = path.parent().unwrap_or(Path::new("."));
            Some(base.join(d))
        }
        Some(other) => bail!("{}: {DATA_DIR_KEY} must be a string, got {other}", path.display()),
    };
    let faults = FaultConfig::from_json_str(&json.to_string()).with_context(|| path.display().to_string())?;
    Ok(FaultFile { data_dir, faults })
}

fn reference(data_dir: &Path) -> Result<Engine> {
    let e = Engine::new(EngineConfig::default());
    load_dir(&e, data_dir).with_context(|| format!("loading tables from {}", data_dir.display()))?;
    Ok(e)
}

/// Builds both engines. A fault config without a data directory borrows
/// the other side's directory.
pub fn build_pair(control: &EngineSpec, test: &EngineSpec) -> Result<(Engine, Engine)> {
    let dir_of = |spec: &EngineSpec| -> Result<Option<PathBuf>> {
        Ok(match spec {
            EngineSpec::Reference { data_dir } => Some(data_dir.clone()),
            EngineSpec::Faults { config } => read_fault_file(config)?.data_dir,
        })
    };
    let (c_dir, t_dir) = (dir_of(control)?, dir_of(test)?);
    let build = |spec: &EngineSpec, own: &Option<PathBuf>, other: &Option<PathBuf>| -> Result<Engine> {
        let Some(dir) = own.as_ref().or(other.as_ref()) else {
            bail!("no data directory for {spec:?}: set {DATA_DIR_KEY} in the fault config or use ref:<dir> on the other side");
        };
        let mut e = reference(dir)?;
        if let EngineSpec::Faults { config } = spec {
            e = e.with_faults(read_fault_file(config)?.faults)?;
        }
        Ok(e)
    };
    let mut c = build(control, &c_dir, &t_dir)?;
    let mut t = build(test, &t_dir, &c_dir)?;
    c.set_name(describe(control));
    t.set_name(describe(test));
    Ok((c, t))
}

pub fn describe(spec: &EngineSpec) -> String {
    match spec {
        EngineSpec::Reference { data_dir } => format!("ref:{}", data_dir.display()),
        EngineSpec::Faults { config } => format!("ref+faults:{}", config.display()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!(
            "ref:data".parse::<EngineSpec>(),
            Ok(EngineSpec::Reference { data_dir: "data".into() })
        );
        assert_eq!(
            "ref+faults:f.json".parse::<EngineSpec>(),
            Ok(EngineSpec::Faults { config: "f.json".into() })
        );
        assert!("pg:host".parse::<EngineSpec>().is_err());
    }

    #[test]
    fn fault_file_data_dir_is_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("faults.json");
        fs::write(&cfg, r#"{"data_dir": "tables", "coercion_bug": true}"#).unwrap();
        let f = read_fault_file(&cfg).unwrap();
        assert_eq!(f.data_dir, Some(dir.path().join("tables")));
        assert!(f.faults.coercion_bug);
        fs::write(&cfg, r#"{"coercion": true}"#).unwrap();
        assert!(read_fault_file(&cfg).is_err());
    }
}
