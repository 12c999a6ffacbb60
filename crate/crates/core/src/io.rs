//! On-disk formats.
//!
//! Sequences (JSON):
//! `{ "seed": u64, "config": {...}, "sequences": [ { "start": [lat, lon], "centers": [[lat, lon], ...], "chosen": [idx, ...] } ] }`
//!
//! Sequences (CSV): `seq_id,t,lat,lon,chosen_idx`, one row per viewport,
//! `chosen_idx` empty on the last row of a sequence.
//!
//! Reference scanpaths (JSON):
//! `{ "image": id, "paths": [ { "label": text, "points": [[lat, lon], ...] } ] }`
//!
//! Reference scanpaths (CSV): `label,t,lat,lon`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Scanpath;
use crate::rps::{RpsConfig, ViewportSequence};
use crate::sphere::SphereCoord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub seed: u64,
    pub config: RpsConfig,
    pub sequences: Vec<ViewportSequence>,
}

impl SequenceFile {
    pub fn new(config: &RpsConfig, sequences: Vec<ViewportSequence>) -> Self {
        Self {
            seed: config.seed,
            config: config.clone(),
            sequences,
        }
    }

    pub fn scanpaths(&self) -> Vec<Scanpath> {
        self.sequences
            .iter()
            .enumerate()
            .map(|(i, s)| Scanpath {
                label: format!("seq{i}"),
                points: s.centers.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanpathFile {
    pub image: String,
    pub paths: Vec<Scanpath>,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_sequences(path: impl AsRef<Path>) -> Result<SequenceFile> {
    let path = path.as_ref();
    let file: SequenceFile =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::schema(path, e))?;
    for (i, s) in file.sequences.iter().enumerate() {
        if s.centers.is_empty() || s.chosen.len() + 1 != s.centers.len() {
            return Err(Error::schema(
                path,
                format!("sequence {i}: chosen must have one entry fewer than centers"),
            ));
        }
    }
    Ok(file)
}

pub fn write_sequences_csv(path: impl AsRef<Path>, sequences: &[ViewportSequence]) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::schema(path, format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["seq_id", "t", "lat", "lon", "chosen_idx"])
        .map_err(to_err)?;
    for (i, s) in sequences.iter().enumerate() {
        for (t, c) in s.centers.iter().enumerate() {
            let chosen = s.chosen.get(t).map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                i.to_string(),
                t.to_string(),
                c.lat().to_string(),
                c.lon().to_string(),
                chosen,
            ])
            .map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct ScanpathRow {
    label: String,
    t: f64,
    lat: f64,
    lon: f64,
}

fn read_scanpath_csv(path: &Path) -> Result<Vec<Scanpath>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::schema(path, format!("{other:?}")),
    })?;
    let mut by_label: BTreeMap<String, (usize, Vec<(f64, SphereCoord)>)> = BTreeMap::new();
    for row in reader.deserialize::<ScanpathRow>() {
        let row = row.map_err(|e| Error::schema(path, e))?;
        let point = SphereCoord::new(row.lat, row.lon).map_err(|e| Error::schema(path, e))?;
        let next = by_label.len();
        by_label
            .entry(row.label)
            .or_insert_with(|| (next, Vec::new()))
            .1
            .push((row.t, point));
    }
    let mut paths: Vec<(usize, Scanpath)> = by_label
        .into_iter()
        .map(|(label, (first_seen, mut pts))| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (
                first_seen,
                Scanpath {
                    label,
                    points: pts.into_iter().map(|p| p.1).collect(),
                },
            )
        })
        .collect();
    paths.sort_by_key(|p| p.0);
    Ok(paths.into_iter().map(|p| p.1).collect())
}

/// Loads scanpaths from a reference JSON or CSV file, or from a generated
/// sequence file. With `subsample`, each path is reduced to that many
/// equally spaced points.
pub fn read_scanpaths(
    path: impl AsRef<Path>,
    subsample: Option<usize>,
) -> Result<(String, Vec<Scanpath>)> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let (image, paths) = if is_csv {
        (stem, read_scanpath_csv(path)?)
    } else {
        let value: serde_json::Value =
            serde_json::from_str(&read_text(path)?).map_err(|e| Error::schema(path, e))?;
        if value.get("sequences").is_some() {
            let file: SequenceFile =
                serde_json::from_value(value).map_err(|e| Error::schema(path, e))?;
            (stem, file.scanpaths())
        } else if value.get("paths").is_some() {
            let file: ScanpathFile =
                serde_json::from_value(value).map_err(|e| Error::schema(path, e))?;
            (file.image, file.paths)
        } else {
            return Err(Error::schema(
                path,
                "expected a \"paths\" or \"sequences\" array",
            ));
        }
    };
    if paths.is_empty() {
        return Err(Error::schema(path, "no scanpaths"));
    }
    if let Some(i) = paths.iter().position(|p| p.points.is_empty()) {
        return Err(Error::schema(path, format!("scanpath {i} is empty")));
    }
    let paths = match subsample {
        Some(n) => paths.iter().map(|p| p.subsample(n)).collect(),
        None => paths,
    };
    Ok((image, paths))
}
