//! On-disk formats: per-track JSON, codebook CSV, symbol files, distance /
//! results CSV and the metrics JSON.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    beat_average, resample_beats, sqrt_compress_normalize, BeatGrid, ChromaRow, ChromaSequence,
    FrameChroma, CHROMA_DIM,
};
use crate::quantize::{Codebook, SymbolString};
use crate::retrieval::{DistanceTable, Track};

/// Frame-level payload of a raw track file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FramesJson {
    pub times: Vec<f64>,
    pub chroma: Vec<Vec<f64>>,
}

/// One track on disk: either frame-level chroma plus beat onsets, or an
/// already beat-synchronous `beat_chroma` matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackJson {
    pub id: String,
    pub cover_set: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FramesJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beats: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beat_chroma: Option<Vec<Vec<f64>>>,
}

fn rows_from_nested(raw: &[Vec<f64>]) -> Result<Vec<ChromaRow>> {
    raw.iter()
        .map(|v| {
            if v.len() != CHROMA_DIM {
                return Err(Error::InvalidChroma("row is not 12-dimensional"));
            }
            let mut row = [0.0; CHROMA_DIM];
            row.copy_from_slice(v);
            Ok(row)
        })
        .collect()
}

pub fn read_track_json(path: &Path) -> Result<TrackJson> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_track_json(path: &Path, track: &TrackJson) -> Result<()> {
    let text = serde_json::to_string_pretty(track).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs the feature pipeline on one raw track: beat-synchronize frame-level
/// chroma against the pbr-resampled grid when frames are given, then apply
/// square-root compression and unit normalization.
pub fn process_track(raw: &TrackJson, pbr: f64) -> Result<Track> {
    let sequence = if let Some(frames) = &raw.frames {
        let beats = raw
            .beats
            .as_ref()
            .ok_or_else(|| Error::Parse(format!("track {}: frames without beats", raw.id)))?;
        let frame_chroma = FrameChroma::new(frames.times.clone(), rows_from_nested(&frames.chroma)?)?;
        let grid = resample_beats(&BeatGrid::new(beats.clone())?, pbr)?;
        beat_average(&frame_chroma, &grid)?
    } else if let Some(beat_chroma) = &raw.beat_chroma {
        ChromaSequence::new(rows_from_nested(beat_chroma)?)?
    } else {
        return Err(Error::Parse(format!("track {}: neither frames nor beat_chroma", raw.id)));
    };
    let normalized = sqrt_compress_normalize(&sequence)?;
    Ok(Track::new(raw.id.clone(), raw.cover_set.clone(), normalized))
}

/// Serializes a processed track in the beat-synchronous form.
pub fn processed_track_json(track: &Track) -> TrackJson {
    TrackJson {
        id: track.id.clone(),
        cover_set: track.cover_set.clone(),
        frames: None,
        beats: None,
        beat_chroma: Some(track.chroma.rows().iter().map(|r| r.to_vec()).collect()),
    }
}

/// Codebook CSV: header `# K=<k> seed=<seed>`, then one row of 12 decimal
/// floats per centroid.
pub fn write_codebook(path: &Path, cb: &Codebook, seed: u64) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# K={} seed={}", cb.k(), seed)?;
    for c in cb.centroids() {
        let fields: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_codebook(path: &Path) -> Result<(Codebook, u64)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty codebook file".into()))?;
    let seed = header
        .split("seed=")
        .nth(1)
        .and_then(|s| s.trim().parse::<u64>().ok())
        .ok_or_else(|| Error::Parse(format!("bad codebook header: {header}")))?;
    let mut centroids = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(str::trim).map(str::parse).collect();
        let vals = vals.map_err(|e| Error::Parse(format!("bad centroid row: {e}")))?;
        if vals.len() != CHROMA_DIM {
            return Err(Error::Parse("centroid row is not 12-dimensional".into()));
        }
        let mut row = [0.0; CHROMA_DIM];
        row.copy_from_slice(&vals);
        centroids.push(row);
    }
    Ok((Codebook::new(centroids)?, seed))
}

/// Symbol file: one line of comma-separated integers.
pub fn write_symbols(path: &Path, s: &SymbolString) -> Result<()> {
    let fields: Vec<String> = s.symbols().iter().map(|v| v.to_string()).collect();
    fs::write(path, fields.join(",") + "\n")?;
    Ok(())
}

pub fn read_symbols(path: &Path, alphabet_size: usize) -> Result<SymbolString> {
    let text = fs::read_to_string(path)?;
    let symbols: std::result::Result<Vec<u16>, _> =
        text.trim().split(',').map(str::trim).map(str::parse).collect();
    SymbolString::new(
        symbols.map_err(|e| Error::Parse(format!("bad symbol file: {e}")))?,
        alphabet_size,
    )
}

/// Distance CSV: `query_id,candidate_id,distance`, skipping non-finite
/// (self or unevaluated) pairs.
pub fn write_distance_csv(path: &Path, table: &DistanceTable) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "query_id,candidate_id,distance")?;
    for (q, qid) in table.query_ids().iter().enumerate() {
        for (c, cid) in table.candidate_ids().iter().enumerate() {
            let v = table.get(q, c);
            if v.is_finite() {
                writeln!(out, "{qid},{cid},{v}")?;
            }
        }
    }
    Ok(())
}

pub fn read_distance_csv(path: &Path) -> Result<DistanceTable> {
    let text = fs::read_to_string(path)?;
    let mut entries: Vec<(String, String, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad distance row: {line}")));
        }
        let v: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad distance value: {e}")))?;
        entries.push((parts[0].to_string(), parts[1].to_string(), v));
    }
    let mut query_ids: Vec<String> = entries.iter().map(|(q, _, _)| q.clone()).collect();
    query_ids.sort();
    query_ids.dedup();
    let mut candidate_ids: Vec<String> = entries.iter().map(|(_, c, _)| c.clone()).collect();
    candidate_ids.sort();
    candidate_ids.dedup();
    let qpos: BTreeMap<&str, usize> =
        query_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let cpos: BTreeMap<&str, usize> =
        candidate_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut table = DistanceTable::new(query_ids.clone(), candidate_ids.clone());
    for (q, c, v) in &entries {
        table.set(qpos[q.as_str()], cpos[c.as_str()], *v);
    }
    Ok(table)
}

/// Results CSV: `query_id,candidate_id,distance,rank` with 1-based per-query
/// ranks (ascending distance, ties by id; +∞ sentinels rank last).
pub fn write_results_csv(path: &Path, table: &DistanceTable) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "query_id,candidate_id,distance,rank")?;
    for (q, qid) in table.query_ids().iter().enumerate() {
        let mut items: Vec<(usize, &String)> = table
            .candidate_ids()
            .iter()
            .enumerate()
            .filter(|(_, cid)| *cid != qid)
            .collect();
        items.sort_by(|a, b| {
            table
                .get(q, a.0)
                .total_cmp(&table.get(q, b.0))
                .then_with(|| a.1.cmp(b.1))
        });
        for (rank, (c, cid)) in items.iter().enumerate() {
            let v = table.get(q, *c);
            writeln!(out, "{qid},{cid},{v},{}", rank + 1)?;
        }
    }
    Ok(())
}

/// Per-query entry of the metrics JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerQueryMetric {
    pub query_id: String,
    pub ap: f64,
}

/// Metrics JSON payload: `{map, p_at: {"5":…, "10":…, "20":…}, per_query}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub map: f64,
    pub p_at: BTreeMap<String, f64>,
    pub per_query: Vec<PerQueryMetric>,
}

pub fn write_metrics_json(path: &Path, metrics: &Metrics) -> Result<()> {
    let text = serde_json::to_string_pretty(metrics).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
