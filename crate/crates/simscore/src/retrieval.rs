//! Two-stage retrieval, distance post-processing and evaluation.
//!
//! The filter stage ranks candidates by the L1 distance between codeword
//! histograms, minimized over the query's 12 chroma rotations, and keeps the
//! top L. The refine stage transposes each shortlisted candidate by the OTI
//! relative to the query and applies the configured distance measure;
//! candidates outside the shortlist carry a +∞ sentinel so final rankings
//! cover the whole store. Distances can be z-normalized per candidate
//! column, transformed to inverse ranks, and combined with max/min pooling.
//! Evaluation reports mean average precision, precision at rank r, and
//! Friedman mean ranks across measures.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::compress::{self, BlockSortCompressor, Compressor, PpmCompressor, SeqDictCompressor};
use crate::error::{Error, Result};
use crate::features::{oti, transpose, ChromaSequence, SummaryVector, CHROMA_DIM};
use crate::predict_continuous::{self, EmbeddingConfig};
use crate::predict_discrete::{self, PredictorKind};
use crate::quantize::{assign, histogram, rotation_histograms, Codebook, Histogram, SymbolString};

/// One track with every representation the pipeline may need.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: String,
    pub cover_set: String,
    pub chroma: ChromaSequence,
    pub summary: SummaryVector,
    pub symbols: Option<SymbolString>,
    pub rotation_hists: Option<Vec<Histogram>>,
}

impl Track {
    pub fn new(id: String, cover_set: String, chroma: ChromaSequence) -> Self {
        let summary = chroma.summary();
        Self { id, cover_set, chroma, summary, symbols: None, rotation_hists: None }
    }
}

/// Read-only store of tracks with unique ids, plus the shared codebook once
/// quantization has run.
#[derive(Debug, Clone)]
pub struct TrackStore {
    tracks: Vec<Track>,
    index: HashMap<String, usize>,
    codebook: Option<Codebook>,
}

impl TrackStore {
    pub fn new(tracks: Vec<Track>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, t) in tracks.iter().enumerate() {
            if index.insert(t.id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate track id {}", t.id)));
            }
        }
        Ok(Self { tracks, index, codebook: None })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Track> {
        self.position(id).map(|i| &self.tracks[i])
    }

    pub fn codebook(&self) -> Option<&Codebook> {
        self.codebook.as_ref()
    }

    /// Quantizes every track with the codebook: symbol strings at rotation 0
    /// plus the 12 rotation histograms.
    pub fn attach_codebook(&mut self, cb: Codebook) -> Result<()> {
        for t in &mut self.tracks {
            t.symbols = Some(assign(&cb, &t.chroma)?);
            t.rotation_hists = Some(rotation_histograms(&cb, &t.chroma)?);
        }
        self.codebook = Some(cb);
        Ok(())
    }

    /// id → cover-set label for every track.
    pub fn cover_labels(&self) -> HashMap<String, String> {
        self.tracks.iter().map(|t| (t.id.clone(), t.cover_set.clone())).collect()
    }
}

/// Query × candidate distance matrix. Self-pairs and unevaluated pairs hold
/// +∞ and are excluded from rankings.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    query_ids: Vec<String>,
    candidate_ids: Vec<String>,
    values: Vec<f64>,
}

impl DistanceTable {
    pub fn new(query_ids: Vec<String>, candidate_ids: Vec<String>) -> Self {
        let values = vec![f64::INFINITY; query_ids.len() * candidate_ids.len()];
        Self { query_ids, candidate_ids, values }
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn candidate_ids(&self) -> &[String] {
        &self.candidate_ids
    }

    pub fn get(&self, q: usize, c: usize) -> f64 {
        self.values[q * self.candidate_ids.len() + c]
    }

    pub fn set(&mut self, q: usize, c: usize, v: f64) {
        self.values[q * self.candidate_ids.len() + c] = v;
    }

    pub fn row(&self, q: usize) -> &[f64] {
        let n = self.candidate_ids.len();
        &self.values[q * n..(q + 1) * n]
    }

    fn set_row(&mut self, q: usize, row: Vec<f64>) {
        let n = self.candidate_ids.len();
        self.values[q * n..(q + 1) * n].copy_from_slice(&row);
    }

    fn same_shape(&self, other: &DistanceTable) -> bool {
        self.query_ids == other.query_ids && self.candidate_ids == other.candidate_ids
    }
}

/// Compressor backend selection for NCD/NCDA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompressorKind {
    SeqDict,
    Ppm { max_order: usize },
    BlockSort { cmd: PathBuf },
}

impl CompressorKind {
    fn build(&self) -> Box<dyn Compressor> {
        match self {
            CompressorKind::SeqDict => Box::new(SeqDictCompressor),
            CompressorKind::Ppm { max_order } => Box::new(PpmCompressor { max_order: *max_order }),
            CompressorKind::BlockSort { cmd } => Box::new(BlockSortCompressor { cmd: cmd.clone() }),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            CompressorKind::SeqDict => "seq_dict",
            CompressorKind::Ppm { .. } => "ppm",
            CompressorKind::BlockSort { .. } => "block_sort",
        }
    }
}

/// A pairwise distance measure with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Ncd(CompressorKind),
    Ncda(CompressorKind),
    NcdPred(PredictorKind),
    NcdaPred(PredictorKind),
    DCrossDiscrete(PredictorKind),
    Jsd,
    Nid(EmbeddingConfig),
    DCrossContinuous(EmbeddingConfig),
    NmseCross(EmbeddingConfig),
    XcorrSimple,
    Random { seed: u64 },
}

impl Measure {
    /// Stable identifier used in output file names and logs.
    pub fn label(&self) -> String {
        match self {
            Measure::Ncd(c) => format!("ncd_{}", c.label()),
            Measure::Ncda(c) => format!("ncda_{}", c.label()),
            Measure::NcdPred(k) => format!("ncd_pred_{}", predictor_label(k)),
            Measure::NcdaPred(k) => format!("ncda_pred_{}", predictor_label(k)),
            Measure::DCrossDiscrete(k) => format!("dcross_{}", predictor_label(k)),
            Measure::Jsd => "jsd".into(),
            Measure::Nid(_) => "nid".into(),
            Measure::DCrossContinuous(_) => "dcross_cont".into(),
            Measure::NmseCross(_) => "nmse".into(),
            Measure::XcorrSimple => "xcorr_simple".into(),
            Measure::Random { .. } => "random".into(),
        }
    }

    fn needs_codebook(&self) -> bool {
        matches!(
            self,
            Measure::Ncd(_)
                | Measure::Ncda(_)
                | Measure::NcdPred(_)
                | Measure::NcdaPred(_)
                | Measure::DCrossDiscrete(_)
                | Measure::Jsd
        )
    }

    fn embedding(&self) -> Option<&EmbeddingConfig> {
        match self {
            Measure::Nid(c) | Measure::DCrossContinuous(c) | Measure::NmseCross(c) => Some(c),
            _ => None,
        }
    }
}

fn predictor_label(k: &PredictorKind) -> &'static str {
    match k {
        PredictorKind::Ppmc { .. } => "ppmc",
        PredictorKind::Lz78 => "lz78",
    }
}

/// Filter stage: candidates ranked by `min_r L1(query_hist_r, cand_hist_0)`,
/// ties broken lexicographically by id; returns the L smallest.
pub fn filter_stage(store: &TrackStore, query_id: &str, l: usize) -> Result<Vec<String>> {
    let qi = store
        .position(query_id)
        .ok_or_else(|| Error::UnknownId(query_id.to_string()))?;
    let query = &store.tracks()[qi];
    let qhists = query
        .rotation_hists
        .as_ref()
        .ok_or_else(|| Error::MeasureUnavailable("codeword histograms not built".into()))?;
    if l > store.len() - 1 {
        return Err(Error::InvalidParameter(format!(
            "filter size {l} exceeds {} candidates",
            store.len() - 1
        )));
    }
    let mut scored: Vec<(f64, &str)> = Vec::with_capacity(store.len() - 1);
    for (ci, cand) in store.tracks().iter().enumerate() {
        if ci == qi {
            continue;
        }
        let chist = &cand
            .rotation_hists
            .as_ref()
            .ok_or_else(|| Error::MeasureUnavailable("codeword histograms not built".into()))?[0];
        let mut best = f64::INFINITY;
        for qh in qhists {
            let d = qh.l1(chist)?;
            if d < best {
                best = d;
            }
        }
        scored.push((best, cand.id.as_str()));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    Ok(scored.into_iter().take(l).map(|(_, id)| id.to_string()).collect())
}

/// Per-track self-prediction entropies, computed once on the untransposed
/// sequences (a global pitch rotation leaves them invariant).
fn self_entropies(store: &TrackStore, cfg: &EmbeddingConfig) -> Result<Vec<f64>> {
    store
        .tracks()
        .par_iter()
        .map(|t| predict_continuous::self_entropy(&t.chroma, cfg).map(|e| e.bits))
        .collect()
}

fn pair_distance(
    store: &TrackStore,
    qi: usize,
    ci: usize,
    measure: &Measure,
    h_self: Option<&[f64]>,
) -> Result<f64> {
    let query = &store.tracks()[qi];
    let cand = &store.tracks()[ci];
    let shift = oti(&query.summary, &cand.summary);
    let cand_chroma = transpose(&cand.chroma, shift as i32);

    let quantized = |seq: &ChromaSequence| -> Result<SymbolString> {
        let cb = store
            .codebook()
            .ok_or_else(|| Error::MeasureUnavailable("codebook not trained".into()))?;
        assign(cb, seq)
    };

    match measure {
        Measure::Ncd(kind) => {
            let qs = quantized(&query.chroma)?;
            let cs = quantized(&cand_chroma)?;
            compress::ncd(kind.build().as_ref(), &qs, &cs)
        }
        Measure::Ncda(kind) => {
            let qs = quantized(&query.chroma)?;
            let cs = quantized(&cand_chroma)?;
            compress::ncda(kind.build().as_ref(), &qs, &cs)
        }
        Measure::NcdPred(kind) => {
            let qs = quantized(&query.chroma)?;
            let cs = quantized(&cand_chroma)?;
            predict_discrete::ncd_pred(*kind, &qs, &cs)
        }
        Measure::NcdaPred(kind) => {
            let qs = quantized(&query.chroma)?;
            let cs = quantized(&cand_chroma)?;
            predict_discrete::ncda_pred(*kind, &qs, &cs)
        }
        Measure::DCrossDiscrete(kind) => {
            let qs = quantized(&query.chroma)?;
            let cs = quantized(&cand_chroma)?;
            predict_discrete::d_cross_discrete(*kind, &qs, &cs)
        }
        Measure::Jsd => {
            let qh = histogram(&quantized(&query.chroma)?);
            let ch = histogram(&quantized(&cand_chroma)?);
            predict_discrete::jsd(&qh, &ch)
        }
        Measure::Nid(cfg) => {
            let hx_y = predict_continuous::conditional_entropy(&query.chroma, &cand_chroma, cfg)?.bits;
            let hy_x = predict_continuous::conditional_entropy(&cand_chroma, &query.chroma, cfg)?.bits;
            let (hx, hy) = cached_pair_entropies(store, qi, ci, cfg, h_self)?;
            predict_continuous::nid_from_entropies(hx_y, hy_x, hx, hy)
        }
        Measure::DCrossContinuous(cfg) => {
            let cross_xy = predict_continuous::cross_entropy(&query.chroma, &cand_chroma, cfg)?.bits;
            let cross_yx = predict_continuous::cross_entropy(&cand_chroma, &query.chroma, cfg)?.bits;
            let (hx, hy) = cached_pair_entropies(store, qi, ci, cfg, h_self)?;
            predict_continuous::d_cross_from_entropies(cross_xy, cross_yx, hx, hy)
        }
        Measure::NmseCross(cfg) => predict_continuous::nmse_cross(&query.chroma, &cand_chroma, cfg),
        Measure::XcorrSimple => Ok(crosscorr_baseline(&query.chroma, &cand.chroma)),
        Measure::Random { seed } => Ok(random_pair_value(*seed, qi, ci)),
    }
}

fn cached_pair_entropies(
    store: &TrackStore,
    qi: usize,
    ci: usize,
    cfg: &EmbeddingConfig,
    h_self: Option<&[f64]>,
) -> Result<(f64, f64)> {
    if let Some(cache) = h_self {
        Ok((cache[qi], cache[ci]))
    } else {
        let hx = predict_continuous::self_entropy(&store.tracks()[qi].chroma, cfg)?.bits;
        let hy = predict_continuous::self_entropy(&store.tracks()[ci].chroma, cfg)?.bits;
        Ok((hx, hy))
    }
}

fn random_pair_value(seed: u64, qi: usize, ci: usize) -> f64 {
    let stream = seed ^ ((qi as u64) << 32) ^ (ci as u64).wrapping_mul(0x9E3779B97F4A7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    rng.sample(StandardNormal)
}

/// Refine stage: OTI-transposes each shortlisted candidate relative to the
/// query, applies the measure, and leaves +∞ sentinels elsewhere. Returns
/// one distance per store track, aligned with store order.
pub fn refine(store: &TrackStore, query_id: &str, shortlist: &[String], measure: &Measure) -> Result<Vec<f64>> {
    if shortlist.is_empty() {
        return Err(Error::InvalidParameter("empty shortlist".into()));
    }
    let h_self = match measure.embedding() {
        Some(cfg) if matches!(measure, Measure::Nid(_) | Measure::DCrossContinuous(_)) => {
            Some(self_entropies(store, cfg)?)
        }
        _ => None,
    };
    refine_with_cache(store, query_id, shortlist, measure, h_self.as_deref())
}

fn refine_with_cache(
    store: &TrackStore,
    query_id: &str,
    shortlist: &[String],
    measure: &Measure,
    h_self: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let qi = store
        .position(query_id)
        .ok_or_else(|| Error::UnknownId(query_id.to_string()))?;
    if measure.needs_codebook() && store.codebook().is_none() {
        return Err(Error::MeasureUnavailable(format!(
            "{} requires a trained codebook",
            measure.label()
        )));
    }
    let mut row = vec![f64::INFINITY; store.len()];
    for id in shortlist {
        let ci = store.position(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        if ci == qi {
            continue;
        }
        row[ci] = pair_distance(store, qi, ci, measure, h_self)?;
    }
    Ok(row)
}

/// Full two-stage retrieval over every query in the store. `l` is the
/// shortlist size (clamped to the candidate count); queries run in parallel
/// and assembly is order-deterministic.
pub fn retrieve(store: &TrackStore, measure: &Measure, l: usize, normalize: bool) -> Result<DistanceTable> {
    let ids: Vec<String> = store.tracks().iter().map(|t| t.id.clone()).collect();
    let l = l.min(store.len() - 1);
    let h_self = match measure.embedding() {
        Some(cfg) if matches!(measure, Measure::Nid(_) | Measure::DCrossContinuous(_)) => {
            Some(self_entropies(store, cfg)?)
        }
        _ => None,
    };
    let rows: Vec<Result<Vec<f64>>> = ids
        .par_iter()
        .map(|qid| {
            let shortlist = filter_stage(store, qid, l)?;
            refine_with_cache(store, qid, &shortlist, measure, h_self.as_deref())
        })
        .collect();
    let mut table = DistanceTable::new(ids.clone(), ids);
    for (q, row) in rows.into_iter().enumerate() {
        table.set_row(q, row?);
    }
    if normalize {
        Ok(normalize_distances(&table))
    } else {
        Ok(table)
    }
}

/// Exhaustive pairwise table (no filter stage): every ordered pair with OTI
/// transposition applied, computed in parallel.
pub fn pairwise_table(store: &TrackStore, measure: &Measure) -> Result<DistanceTable> {
    let ids: Vec<String> = store.tracks().iter().map(|t| t.id.clone()).collect();
    let h_self = match measure.embedding() {
        Some(cfg) if matches!(measure, Measure::Nid(_) | Measure::DCrossContinuous(_)) => {
            Some(self_entropies(store, cfg)?)
        }
        _ => None,
    };
    let rows: Vec<Result<Vec<f64>>> = ids
        .par_iter()
        .map(|qid| refine_with_cache(store, qid, &ids, measure, h_self.as_deref()))
        .collect();
    let mut table = DistanceTable::new(ids.clone(), ids);
    for (q, row) in rows.into_iter().enumerate() {
        table.set_row(q, row?);
    }
    Ok(table)
}

/// Per-candidate-column z-normalization over finite entries (population σ;
/// columns with σ < 1e-12 are centered only). Non-finite entries pass
/// through.
pub fn normalize_distances(table: &DistanceTable) -> DistanceTable {
    let mut out = table.clone();
    let nq = table.query_ids.len();
    let nc = table.candidate_ids.len();
    for c in 0..nc {
        let finite: Vec<f64> = (0..nq).map(|q| table.get(q, c)).filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            continue;
        }
        let n = finite.len() as f64;
        let mu = finite.iter().sum::<f64>() / n;
        let sigma = (finite.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
        for q in 0..nq {
            let v = table.get(q, c);
            if v.is_finite() {
                let centered = v - mu;
                out.set(q, c, if sigma < 1e-12 { centered } else { centered / sigma });
            }
        }
    }
    out
}

/// Ascending average ranks (1-based); tied values share the mean of their
/// positions. +∞ entries tie together at the tail.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Inverse-rank transform `d' = 1 − rank(d)^{-1}` per query, ranks over that
/// query's candidates (self-pairs keep their +∞ sentinel).
pub fn inverse_rank(table: &DistanceTable) -> DistanceTable {
    let mut out = table.clone();
    let nc = table.candidate_ids.len();
    for (q, qid) in table.query_ids.iter().enumerate() {
        let cols: Vec<usize> = (0..nc).filter(|&c| &table.candidate_ids[c] != qid).collect();
        let vals: Vec<f64> = cols.iter().map(|&c| table.get(q, c)).collect();
        let ranks = average_ranks(&vals);
        for (&c, r) in cols.iter().zip(ranks) {
            out.set(q, c, 1.0 - 1.0 / r);
        }
    }
    out
}

/// Entrywise `max{a,b}·β + min{a,b}·(1−β)`. Index sets must match; a
/// non-finite entry on either side stays +∞.
pub fn combine(a: &DistanceTable, b: &DistanceTable, beta: f64) -> Result<DistanceTable> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch);
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter("beta must lie in [0, 1]".into()));
    }
    let mut out = a.clone();
    for q in 0..a.query_ids.len() {
        for c in 0..a.candidate_ids.len() {
            let (x, y) = (a.get(q, c), b.get(q, c));
            let v = if x.is_finite() && y.is_finite() {
                x.max(y) * beta + x.min(y) * (1.0 - beta)
            } else {
                f64::INFINITY
            };
            out.set(q, c, v);
        }
    }
    Ok(out)
}

/// Random baseline: seeded standard-normal distances, deterministic per
/// (seed, pair).
pub fn random_baseline(store: &TrackStore, seed: u64) -> DistanceTable {
    let ids: Vec<String> = store.tracks().iter().map(|t| t.id.clone()).collect();
    let mut table = DistanceTable::new(ids.clone(), ids);
    for q in 0..store.len() {
        for c in 0..store.len() {
            if q != c {
                table.set(q, c, random_pair_value(seed, q, c));
            }
        }
    }
    table
}

/// Simplified cross-correlation baseline: one minus the maximum over 12
/// transpositions and all time lags of the 2-D cross-correlation between
/// mean-subtracted beat-chroma matrices, normalized by the product of
/// full-matrix Frobenius norms. Degenerate all-zero input gives distance 1.
pub fn crosscorr_baseline(x: &ChromaSequence, y: &ChromaSequence) -> f64 {
    let center = |s: &ChromaSequence| -> (Vec<[f64; CHROMA_DIM]>, f64) {
        let n = (s.len() * CHROMA_DIM) as f64;
        let mean = s.rows().iter().flatten().sum::<f64>() / n;
        let rows: Vec<[f64; CHROMA_DIM]> = s
            .rows()
            .iter()
            .map(|r| {
                let mut out = [0.0; CHROMA_DIM];
                for (o, v) in out.iter_mut().zip(r) {
                    *o = v - mean;
                }
                out
            })
            .collect();
        let norm = rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        (rows, norm)
    };
    let (a, na) = center(x);
    let mut best = f64::NEG_INFINITY;
    for rot in 0..CHROMA_DIM {
        let yt = transpose(y, rot as i32);
        let (b, nb) = center(&yt);
        if na < 1e-12 || nb < 1e-12 {
            continue;
        }
        let (n, m) = (a.len() as i64, b.len() as i64);
        for lag in -(m - 1)..n {
            let a0 = lag.max(0);
            let a1 = n.min(m + lag);
            if a1 <= a0 {
                continue;
            }
            let mut acc = 0.0;
            for i in a0..a1 {
                let ra = &a[i as usize];
                let rb = &b[(i - lag) as usize];
                for (u, v) in ra.iter().zip(rb) {
                    acc += u * v;
                }
            }
            let corr = acc / (na * nb);
            if corr > best {
                best = corr;
            }
        }
    }
    if best.is_finite() {
        1.0 - best
    } else {
        1.0
    }
}

/// Sorted candidate order for one query: ascending distance, ties broken
/// lexicographically by candidate id, self-pair excluded.
fn ranked_candidates<'a>(table: &'a DistanceTable, q: usize) -> Vec<(usize, &'a str)> {
    let qid = &table.query_ids[q];
    let mut items: Vec<(usize, &str)> = table
        .candidate_ids
        .iter()
        .enumerate()
        .filter(|(_, cid)| *cid != qid)
        .map(|(c, cid)| (c, cid.as_str()))
        .collect();
    items.sort_by(|x, y| {
        table
            .get(q, x.0)
            .total_cmp(&table.get(q, y.0))
            .then_with(|| x.1.cmp(y.1))
    });
    items
}

/// Per-query average precision and the mean over queries. Queries without a
/// relevant candidate are excluded with a warning.
pub fn mean_average_precision(
    table: &DistanceTable,
    cover_sets: &HashMap<String, String>,
) -> (Vec<(String, f64)>, f64) {
    let mut per_query = Vec::new();
    for (q, qid) in table.query_ids.iter().enumerate() {
        let qset = match cover_sets.get(qid) {
            Some(s) => s,
            None => continue,
        };
        let order = ranked_candidates(table, q);
        let total_relevant = order
            .iter()
            .filter(|(_, cid)| cover_sets.get(*cid) == Some(qset))
            .count();
        if total_relevant == 0 {
            log::warn!("query {qid} has no relevant candidates; excluded from MAP");
            continue;
        }
        let mut seen = 0usize;
        let mut ap = 0.0;
        for (rank, (_, cid)) in order.iter().enumerate() {
            if cover_sets.get(*cid) == Some(qset) {
                seen += 1;
                ap += seen as f64 / (rank + 1) as f64;
            }
        }
        per_query.push((qid.clone(), ap / total_relevant as f64));
    }
    let map = if per_query.is_empty() {
        0.0
    } else {
        per_query.iter().map(|(_, ap)| ap).sum::<f64>() / per_query.len() as f64
    };
    (per_query, map)
}

/// Mean over queries of |relevant in top r| / r.
pub fn precision_at_r(table: &DistanceTable, cover_sets: &HashMap<String, String>, r: usize) -> f64 {
    let mut total = 0.0;
    let mut queries = 0usize;
    for (q, qid) in table.query_ids.iter().enumerate() {
        let qset = match cover_sets.get(qid) {
            Some(s) => s,
            None => continue,
        };
        let order = ranked_candidates(table, q);
        let hits = order
            .iter()
            .take(r)
            .filter(|(_, cid)| cover_sets.get(*cid) == Some(qset))
            .count();
        total += hits as f64 / r as f64;
        queries += 1;
    }
    if queries == 0 {
        0.0
    } else {
        total / queries as f64
    }
}

/// Friedman mean ranks of measures by per-query average precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanResult {
    /// Mean rank per measure; higher AP earns a higher rank.
    pub mean_ranks: Vec<f64>,
    pub chi_square: f64,
}

/// Ranks the measures within each query by average precision (average-rank
/// ties) and reports mean ranks plus the Friedman chi-square statistic.
pub fn friedman_mean_ranks(
    tables: &[DistanceTable],
    cover_sets: &HashMap<String, String>,
) -> Result<FriedmanResult> {
    if tables.len() < 2 {
        return Err(Error::InvalidParameter("friedman needs at least two measures".into()));
    }
    for t in &tables[1..] {
        if !t.same_shape(&tables[0]) {
            return Err(Error::DimensionMismatch);
        }
    }
    let aps: Vec<HashMap<String, f64>> = tables
        .iter()
        .map(|t| mean_average_precision(t, cover_sets).0.into_iter().collect())
        .collect();
    let k = tables.len();
    let mut mean_ranks = vec![0.0; k];
    let mut n = 0usize;
    for qid in tables[0].query_ids() {
        let scores: Option<Vec<f64>> = aps.iter().map(|m| m.get(qid).copied()).collect();
        let Some(scores) = scores else { continue };
        let ranks = average_ranks(&scores);
        for (m, r) in mean_ranks.iter_mut().zip(ranks) {
            *m += r;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidParameter("no queries with relevant candidates".into()));
    }
    mean_ranks.iter_mut().for_each(|m| *m /= n as f64);
    let kf = k as f64;
    let nf = n as f64;
    let center = (kf + 1.0) / 2.0;
    let chi_square = 12.0 * nf / (kf * (kf + 1.0))
        * mean_ranks.iter().map(|r| (r - center) * (r - center)).sum::<f64>();
    Ok(FriedmanResult { mean_ranks, chi_square })
}
