use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use remaug_core::evaluation::{Details, MethodSpec};
use remaug_core::{GridSpec, MaskSpec, RadioMap, Sample, SampleSet, Scenario};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// `dir/stem.meta.json` for `dir/stem.csv`.
pub fn meta_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().unwrap_or_default().to_string_lossy();
    csv.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub grid: GridSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl Meta {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            tool: "remaug",
            version: env!("CARGO_PKG_VERSION"),
            grid,
            scenario: None,
            mask: None,
            method: None,
            reconstruction: None,
            wall_time_s: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconInfo {
    pub failed_bins: usize,
    pub fallbacks: usize,
    pub details: Details,
}

/// The part of a sidecar other commands read back.
#[derive(Debug, Clone, Deserialize)]
pub struct MetaIn {
    pub grid: GridSpec,
    #[serde(default)]
    pub scenario: Option<Scenario>,
}

pub fn write_map(path: &Path, map: &RadioMap, meta: &Meta) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let n_cols = map.grid().n_cols;
    for row in map.values().chunks(n_cols) {
        let line: Vec<String> = row
            .iter()
            .map(|v| match v {
                Some(x) => format!("{x:.6}"),
                None => "nan".to_string(),
            })
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    write_json(&meta_path(path), meta)
}

/// Reads a grid CSV and its sidecar.
pub fn read_map(path: &Path) -> Result<(RadioMap, MetaIn)> {
    let mp = meta_path(path);
    let meta: MetaIn = read_json(&mp)
        .with_context(|| format!("{} needs its sidecar {}", path.display(), mp.display()))?;
    let grid = meta.grid;
    grid.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad CSV", path.display()))?;
        if rec.len() != grid.n_cols {
            bail!(
                "{}: line {} has {} fields, grid has {} columns",
                path.display(),
                i + 1,
                rec.len(),
                grid.n_cols
            );
        }
        for (j, f) in rec.iter().enumerate() {
            values.push(if f.eq_ignore_ascii_case("nan") {
                None
            } else {
                Some(f.parse::<f64>().with_context(|| {
                    format!(
                        "{}: line {}, field {}: `{f}` is not a number",
                        path.display(),
                        i + 1,
                        j + 1
                    )
                })?)
            });
        }
        rows += 1;
    }
    if rows != grid.n_rows {
        bail!(
            "{}: {rows} lines, grid has {} rows",
            path.display(),
            grid.n_rows
        );
    }
    Ok((RadioMap::from_values(grid, values)?, meta))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SampleRow {
    x_m: f64,
    y_m: f64,
    value_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z_m: Option<f64>,
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SampleRow>().enumerate() {
        let r = row.with_context(|| {
            format!(
                "{}: record {} (expected header x_m,y_m,value_dbm[,z_m])",
                path.display(),
                i + 1
            )
        })?;
        let s = Sample::new(r.x_m, r.y_m, r.value_dbm);
        out.push(match r.z_m {
            Some(z) => s.with_z(z),
            None => s,
        });
    }
    Ok(SampleSet::new(out)?)
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let with_z = samples.iter().any(|s| s.z.is_some());
    writeln!(w, "x_m,y_m,value_dbm{}", if with_z { ",z_m" } else { "" })?;
    for s in samples {
        write!(w, "{:.6},{:.6},{:.6}", s.x, s.y, s.value)?;
        if with_z {
            match s.z {
                Some(z) => write!(w, ",{z:.6}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_flat_csv(path: &Path, rows: &[remaug_core::evaluation::FlatRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["method", "seed", "metric", "value"])?;
    for r in rows {
        w.write_record([r.method.as_str(), &r.seed.to_string(), r.metric, &r.value])?;
    }
    w.flush()?;
    Ok(())
}
