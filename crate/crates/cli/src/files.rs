//! Input resolution and output writing shared by the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dpc::seed::fingerprint;
use dpc::{load_dataset, Dataset, DpcError};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CANDIDATE_ID_COLUMN: &str = "candidate_id";

#[derive(Debug, Serialize, Deserialize)]
pub struct Schema {
    pub properties: Vec<String>,
}

/// `data/foo.csv` -> `data/foo.schema.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    data.with_file_name(format!("{stem}.schema.json"))
}

/// Property columns: `--properties`, else the sidecar, else just `property`.
pub fn resolve_properties(
    explicit: Option<&[String]>,
    data: &Path,
    property: Option<&str>,
) -> Result<Vec<String>, CliError> {
    if let Some(p) = explicit {
        return Ok(p.to_vec());
    }
    let sidecar = sidecar_path(data);
    if sidecar.exists() {
        let schema: Schema = serde_json::from_str(&fs::read_to_string(&sidecar)?)?;
        return Ok(schema.properties);
    }
    match property {
        Some(p) => Ok(vec![p.to_string()]),
        None => Err(CliError::Config(format!(
            "cannot tell property columns of {} apart from features; pass --properties or --property",
            data.display()
        ))),
    }
}

/// Loads the dataset; also returns every file read (CSV, sidecar if used).
pub fn load(
    explicit: Option<&[String]>,
    data: &Path,
    property: Option<&str>,
) -> Result<(Dataset, Vec<PathBuf>), CliError> {
    let props = resolve_properties(explicit, data, property)?;
    if let Some(p) = property {
        if !props.iter().any(|q| q == p) {
            return Err(DpcError::UnknownProperty(p.to_string()).into());
        }
    }
    let mut inputs = vec![data.to_path_buf()];
    let sidecar = sidecar_path(data);
    if explicit.is_none() && sidecar.exists() {
        inputs.push(sidecar);
    }
    Ok((load_dataset(data, &props)?, inputs))
}

/// Experiment ids, one per line; blank lines and `#` comments skipped.
pub fn read_id_list(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Reads candidate rows whose columns are exactly `feature_names` (any
/// order) plus an optional `candidate_id`. Ids default to 1-based row numbers.
pub fn read_candidates(path: &Path, feature_names: &[String]) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(DpcError::from)?;
    let header: Vec<String> = reader.headers().map_err(DpcError::from)?.iter().map(|h| h.trim().to_string()).collect();
    if let Some(extra) = header.iter().find(|h| *h != CANDIDATE_ID_COLUMN && !feature_names.contains(h)) {
        return Err(CliError::Config(format!(
            "unexpected column '{extra}' in {}; the model expects {}",
            path.display(),
            feature_names.join(",")
        )));
    }
    let mut cols = Vec::with_capacity(feature_names.len());
    for name in feature_names {
        let i = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DpcError::MissingColumn { column: name.clone() })?;
        cols.push(i);
    }
    let id_col = header.iter().position(|h| h == CANDIDATE_ID_COLUMN);

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(DpcError::from)?;
        let row = r + 1;
        let mut x = Vec::with_capacity(cols.len());
        for (&c, name) in cols.iter().zip(feature_names) {
            let cell = record.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| DpcError::NonNumericCell {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DpcError::NonFiniteValue {
                    row,
                    column: name.clone(),
                    value: v,
                }
                .into());
            }
            x.push(v);
        }
        ids.push(match id_col {
            Some(c) => record.get(c).unwrap_or("").trim().to_string(),
            None => row.to_string(),
        });
        rows.push(x);
    }
    if rows.is_empty() {
        return Err(DpcError::EmptyFile { path: path.to_path_buf() }.into());
    }
    Ok((ids, rows))
}

/// Collects output files and the manifest that describes them.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.written.insert(name.to_string(), fingerprint(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `run_manifest.json`. Contains no timestamps, so reruns with
    /// the same flags and inputs produce identical bytes.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C, inputs: &[PathBuf]) -> Result<(), CliError> {
        let mut input_hashes = BTreeMap::new();
        for p in inputs {
            input_hashes.insert(p.display().to_string(), fingerprint(&fs::read(p)?));
        }
        let manifest = RunManifest {
            tool: "dpc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            inputs: input_hashes,
            outputs: std::mem::take(&mut self.written),
        };
        self.write_json("run_manifest.json", &manifest)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    /// sha256 of each input file.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of each file written, the manifest itself excluded.
    pub outputs: BTreeMap<String, String>,
}
