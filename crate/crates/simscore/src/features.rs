//! Beat-synchronous chroma feature pipeline.
//!
//! Ingests per-track frame-level chroma vectors plus beat onsets and produces
//! beat-synchronous, key-transposable chroma sequences: beat grids are
//! resampled to a preferred beat rate, frames are averaged over beat
//! intervals, and rows are square-root compressed and normalized to unit
//! Euclidean norm. Key invariance is handled by the optimal transposition
//! index (OTI) over average-chroma summary vectors.

use crate::error::{Error, Result};

/// Number of pitch classes per chroma vector.
pub const CHROMA_DIM: usize = 12;

/// One chroma row: energies for the 12 pitch classes.
pub type ChromaRow = [f64; CHROMA_DIM];

/// Frame-level chroma features with their frame times, before beat synchronization.
#[derive(Debug, Clone)]
pub struct FrameChroma {
    times: Vec<f64>,
    vectors: Vec<ChromaRow>,
}

impl FrameChroma {
    /// Validates that times are strictly increasing, lengths match and all
    /// components are nonnegative.
    pub fn new(times: Vec<f64>, vectors: Vec<ChromaRow>) -> Result<Self> {
        if times.len() != vectors.len() {
            return Err(Error::InvalidChroma("times/vectors length mismatch"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidChroma("frame times not strictly increasing"));
        }
        if vectors.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidChroma("negative or non-finite component"));
        }
        Ok(Self { times, vectors })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn vectors(&self) -> &[ChromaRow] {
        &self.vectors
    }
}

/// Beat onset times in seconds, strictly increasing.
#[derive(Debug, Clone)]
pub struct BeatGrid {
    onsets: Vec<f64>,
}

impl BeatGrid {
    pub fn new(onsets: Vec<f64>) -> Result<Self> {
        if onsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("beat onsets not strictly increasing".into()));
        }
        Ok(Self { onsets })
    }

    pub fn onsets(&self) -> &[f64] {
        &self.onsets
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }
}

/// Beat-synchronous chroma sequence, one row per beat interval.
///
/// After [`sqrt_compress_normalize`] every row has unit Euclidean norm or is
/// all-zero (a silent interval; kept so indices stay aligned with the grid).
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaSequence {
    rows: Vec<ChromaRow>,
}

impl ChromaSequence {
    pub fn new(rows: Vec<ChromaRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ChromaRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Component-wise mean of all rows.
    pub fn summary(&self) -> SummaryVector {
        let mut sum = [0.0; CHROMA_DIM];
        for row in &self.rows {
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
        }
        let n = self.rows.len() as f64;
        sum.iter_mut().for_each(|s| *s /= n);
        SummaryVector(sum)
    }
}

/// Component-wise mean of a chroma sequence; input to the OTI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryVector(pub ChromaRow);

/// `circshift(v, i)_j = v_{(j − i) mod 12}`: shifting by `i` moves each
/// component up by `i` positions. Fixed convention so OTI values reproduce
/// bit-for-bit.
pub fn circshift(v: &ChromaRow, shift: i32) -> ChromaRow {
    let s = shift.rem_euclid(CHROMA_DIM as i32) as usize;
    let mut out = [0.0; CHROMA_DIM];
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = v[(j + CHROMA_DIM - s) % CHROMA_DIM];
    }
    out
}

/// Resamples a beat grid toward a preferred beat rate (in bpm) by splitting
/// each original interval into `round(pbr / local_rate)` equal parts
/// (minimum 1). Output spans the same `[first, last]` range.
pub fn resample_beats(grid: &BeatGrid, pbr: f64) -> Result<BeatGrid> {
    if grid.len() < 2 {
        return Err(Error::InsufficientBeats);
    }
    if !(pbr > 0.0) {
        return Err(Error::InvalidParameter("pbr must be positive".into()));
    }
    let onsets = grid.onsets();
    let mut out = Vec::with_capacity(onsets.len() * 2);
    for w in onsets.windows(2) {
        let (a, b) = (w[0], w[1]);
        let parts = ((pbr * (b - a) / 60.0).round() as usize).max(1);
        for j in 0..parts {
            out.push(a + (b - a) * j as f64 / parts as f64);
        }
    }
    out.push(*onsets.last().unwrap());
    BeatGrid::new(out)
}

/// Averages frame vectors over beat intervals `[onset_i, onset_{i+1})`.
/// An empty interval copies the nearest previous nonempty row (all-zero if
/// none); frames outside the grid are ignored.
pub fn beat_average(frames: &FrameChroma, grid: &BeatGrid) -> Result<ChromaSequence> {
    if grid.len() < 2 {
        return Err(Error::InsufficientBeats);
    }
    let onsets = grid.onsets();
    let mut rows: Vec<ChromaRow> = Vec::with_capacity(onsets.len() - 1);
    let mut prev: ChromaRow = [0.0; CHROMA_DIM];
    for w in onsets.windows(2) {
        let mut acc = [0.0; CHROMA_DIM];
        let mut count = 0usize;
        for (t, v) in frames.times().iter().zip(frames.vectors()) {
            if *t >= w[0] && *t < w[1] {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
                count += 1;
            }
        }
        let row = if count > 0 {
            acc.iter_mut().for_each(|a| *a /= count as f64);
            acc
        } else {
            prev
        };
        prev = row;
        rows.push(row);
    }
    ChromaSequence::new(rows)
}

/// Square-root compression followed by row-wise normalization to unit
/// Euclidean norm. All-zero rows stay all-zero.
pub fn sqrt_compress_normalize(seq: &ChromaSequence) -> Result<ChromaSequence> {
    let mut rows = Vec::with_capacity(seq.len());
    for row in seq.rows() {
        if row.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidChroma("negative component"));
        }
        let mut r: ChromaRow = [0.0; CHROMA_DIM];
        for (out, v) in r.iter_mut().zip(row) {
            *out = v.sqrt();
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            r.iter_mut().for_each(|v| *v /= norm);
        }
        rows.push(r);
    }
    ChromaSequence::new(rows)
}

/// Optimal transposition index: the circular shift of `hy` that maximizes its
/// inner product with `hx`. Ties break toward the smallest shift; two
/// all-zero summaries return 0 by convention.
pub fn oti(hx: &SummaryVector, hy: &SummaryVector) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut best_shift = 0usize;
    for i in 0..CHROMA_DIM {
        let shifted = circshift(&hy.0, i as i32);
        let dot: f64 = hx.0.iter().zip(&shifted).map(|(a, b)| a * b).sum();
        if dot > best {
            best = dot;
            best_shift = i;
        }
    }
    best_shift
}

/// Circularly shifts every row of the sequence by `shift` semitones
/// (reduced mod 12). Row norms are preserved exactly.
pub fn transpose(seq: &ChromaSequence, shift: i32) -> ChromaSequence {
    let rows = seq.rows().iter().map(|r| circshift(r, shift)).collect();
    ChromaSequence { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn row(values: &[f64]) -> ChromaRow {
        let mut r = [0.0; CHROMA_DIM];
        r[..values.len()].copy_from_slice(values);
        r
    }

    #[test]
    fn resample_uniform_4x_subdivision() {
        let grid = BeatGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let out = resample_beats(&grid, 240.0).unwrap();
        let expected: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        assert_eq!(out.len(), expected.len());
        for (a, b) in out.onsets().iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn resample_identity_at_matching_rate() {
        let grid = BeatGrid::new(vec![0.0, 0.25, 0.5]).unwrap();
        let out = resample_beats(&grid, 240.0).unwrap();
        assert_eq!(out.onsets(), grid.onsets());
    }

    #[test]
    fn resample_irregular_per_interval_rounding() {
        // Hand oracle: round(0.6·4)=2 and round(0.4·4)=2 subdivisions.
        let grid = BeatGrid::new(vec![0.0, 0.6, 1.0]).unwrap();
        let out = resample_beats(&grid, 240.0).unwrap();
        let expected = [0.0, 0.3, 0.6, 0.8, 1.0];
        assert_eq!(out.len(), expected.len());
        for (a, b) in out.onsets().iter().zip(&expected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn resample_requires_two_onsets() {
        let grid = BeatGrid::new(vec![1.0]).unwrap();
        assert!(matches!(resample_beats(&grid, 240.0), Err(Error::InsufficientBeats)));
    }

    #[test]
    fn resample_rate_close_to_target() {
        // Subdivision counts are rounded per interval, so the realized number
        // of beats differs from the ideal count by less than one per interval.
        let grid = BeatGrid::new(vec![0.0, 0.41, 0.97, 1.5, 2.33]).unwrap();
        let out = resample_beats(&grid, 240.0).unwrap();
        let span = 2.33;
        let ideal = 240.0 * span / 60.0;
        let realized = (out.len() - 1) as f64;
        assert!((realized - ideal).abs() < (grid.len() - 1) as f64);
    }

    #[test]
    fn beat_average_constant_frames() {
        let v = row(&[0.2, 0.4]);
        let frames = FrameChroma::new(vec![0.1, 0.5, 0.9, 1.4], vec![v; 4]).unwrap();
        let grid = BeatGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let seq = beat_average(&frames, &grid).unwrap();
        assert_eq!(seq.len(), 2);
        for r in seq.rows() {
            for (a, b) in r.iter().zip(&v) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn beat_average_arithmetic_mean() {
        let frames = FrameChroma::new(
            vec![0.2, 0.7],
            vec![row(&[1.0, 0.0]), row(&[0.0, 1.0])],
        )
        .unwrap();
        let grid = BeatGrid::new(vec![0.0, 1.0]).unwrap();
        let seq = beat_average(&frames, &grid).unwrap();
        assert_eq!(seq.rows()[0], row(&[0.5, 0.5]));
    }

    #[test]
    fn beat_average_matches_brute_force_partition() {
        let times = vec![0.05, 0.32, 0.51, 0.83, 1.2];
        let vecs: Vec<ChromaRow> = (0..5)
            .map(|i| {
                let mut r = [0.0; CHROMA_DIM];
                for (j, slot) in r.iter_mut().enumerate() {
                    *slot = ((i * 13 + j * 7) % 10) as f64 / 10.0;
                }
                r
            })
            .collect();
        let frames = FrameChroma::new(times.clone(), vecs.clone()).unwrap();
        let grid = BeatGrid::new(vec![0.0, 0.5, 1.3]).unwrap();
        let seq = beat_average(&frames, &grid).unwrap();

        // Brute-force interval partition oracle.
        for (i, w) in [[0.0, 0.5], [0.5, 1.3]].iter().enumerate() {
            let members: Vec<&ChromaRow> = times
                .iter()
                .zip(&vecs)
                .filter(|(t, _)| **t >= w[0] && **t < w[1])
                .map(|(_, v)| v)
                .collect();
            for j in 0..CHROMA_DIM {
                let mean = members.iter().map(|v| v[j]).sum::<f64>() / members.len() as f64;
                assert_abs_diff_eq!(seq.rows()[i][j], mean, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn beat_average_empty_interval_copies_previous() {
        let frames = FrameChroma::new(vec![0.1], vec![row(&[1.0])]).unwrap();
        let grid = BeatGrid::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let seq = beat_average(&frames, &grid).unwrap();
        assert_eq!(seq.rows()[0], row(&[1.0]));
        assert_eq!(seq.rows()[1], row(&[1.0]));
        assert_eq!(seq.rows()[2], row(&[1.0]));

        // No previous nonempty row: all-zero.
        let frames = FrameChroma::new(vec![1.5], vec![row(&[1.0])]).unwrap();
        let seq = beat_average(&frames, &grid).unwrap();
        assert_eq!(seq.rows()[0], [0.0; CHROMA_DIM]);
        assert_eq!(seq.rows()[1], row(&[1.0]));
    }

    #[test]
    fn sqrt_normalize_one_hot_fixed_point() {
        let seq = ChromaSequence::new(vec![row(&[1.0])]).unwrap();
        let out = sqrt_compress_normalize(&seq).unwrap();
        assert_eq!(out.rows()[0], row(&[1.0]));
    }

    #[test]
    fn sqrt_normalize_closed_form() {
        let seq = ChromaSequence::new(vec![row(&[4.0, 4.0])]).unwrap();
        let out = sqrt_compress_normalize(&seq).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(out.rows()[0][0], s, epsilon = 1e-12);
        assert_abs_diff_eq!(out.rows()[0][1], s, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_normalize_rejects_negative() {
        let seq = ChromaSequence::new(vec![row(&[-0.1])]).unwrap();
        assert!(matches!(sqrt_compress_normalize(&seq), Err(Error::InvalidChroma(_))));
    }

    #[test]
    fn sqrt_normalize_zero_row_stays_zero() {
        let seq = ChromaSequence::new(vec![[0.0; CHROMA_DIM]]).unwrap();
        let out = sqrt_compress_normalize(&seq).unwrap();
        assert_eq!(out.rows()[0], [0.0; CHROMA_DIM]);
    }

    #[test]
    fn oti_identity_and_uniform_ties() {
        let h = SummaryVector(row(&[0.5, 0.2, 0.1]));
        assert_eq!(oti(&h, &h), 0);
        let u = SummaryVector([1.0; CHROMA_DIM]);
        assert_eq!(oti(&u, &u), 0);
        let z = SummaryVector([0.0; CHROMA_DIM]);
        assert_eq!(oti(&z, &z), 0);
    }

    #[test]
    fn oti_recovers_one_hot_shift_by_exhaustive_search() {
        let hx = SummaryVector(row(&[1.0]));
        for k in 0..CHROMA_DIM {
            let hy = SummaryVector(circshift(&hx.0, k as i32));
            // Brute force all 12 rotations.
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0;
            for i in 0..CHROMA_DIM {
                let d: f64 = hx
                    .0
                    .iter()
                    .zip(&circshift(&hy.0, i as i32))
                    .map(|(a, b)| a * b)
                    .sum();
                if d > best {
                    best = d;
                    best_i = i;
                }
            }
            assert_eq!(oti(&hx, &hy), best_i);
        }
    }

    #[test]
    fn transpose_identity_and_inverse() {
        let seq = ChromaSequence::new(vec![row(&[0.3, 0.1, 0.6]), row(&[0.0, 0.9])]).unwrap();
        assert_eq!(transpose(&seq, 0), seq);
        assert_eq!(transpose(&seq, 12), seq);
        assert_eq!(transpose(&transpose(&seq, 3), 9), seq);
    }

    #[test]
    fn oti_then_transpose_maximizes_summary_inner_product() {
        let rows: Vec<ChromaRow> = (0..8)
            .map(|i| {
                let mut r = [0.0; CHROMA_DIM];
                for (j, slot) in r.iter_mut().enumerate() {
                    *slot = (((i * 5 + j * 3) % 11) as f64 + 0.3) / 11.0;
                }
                r
            })
            .collect();
        let x = ChromaSequence::new(rows).unwrap();
        let y = transpose(&x, 7);
        let shift = oti(&x.summary(), &y.summary());
        let aligned = transpose(&y, shift as i32).summary();
        let score: f64 = x.summary().0.iter().zip(&aligned.0).map(|(a, b)| a * b).sum();
        for i in 0..CHROMA_DIM {
            let alt = transpose(&y, i as i32).summary();
            let s: f64 = x.summary().0.iter().zip(&alt.0).map(|(a, b)| a * b).sum();
            assert!(score >= s - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn sqrt_normalize_outputs_unit_or_zero_rows(vals in proptest::collection::vec(0.0f64..10.0, 12)) {
            let mut r = [0.0; CHROMA_DIM];
            r.copy_from_slice(&vals);
            let seq = ChromaSequence::new(vec![r]).unwrap();
            let out = sqrt_compress_normalize(&seq).unwrap();
            let norm: f64 = out.rows()[0].iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm < 1e-9 || (norm - 1.0).abs() < 1e-9);
        }

        #[test]
        fn transpose_preserves_row_norms(vals in proptest::collection::vec(0.0f64..1.0, 12), shift in -24i32..24) {
            let mut r = [0.0; CHROMA_DIM];
            r.copy_from_slice(&vals);
            let seq = ChromaSequence::new(vec![r]).unwrap();
            let out = transpose(&seq, shift);
            // Rotation permutes components exactly; the norm sum differs
            // only in accumulation order.
            let mut a = r.to_vec();
            let mut b = out.rows()[0].to_vec();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            prop_assert_eq!(a, b);
            let n0: f64 = r.iter().map(|v| v * v).sum();
            let n1: f64 = out.rows()[0].iter().map(|v| v * v).sum();
            prop_assert!((n0 - n1).abs() < 1e-12);
        }
    }
}
