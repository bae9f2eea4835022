//! Codebook training and vector quantization.
//!
//! Chroma vectors pooled across tracks are clustered with restarted, seeded
//! Lloyd iterations; sequences are mapped to integer codeword strings and to
//! normalized codeword histograms (the filter-stage representation).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{transpose, ChromaRow, ChromaSequence, CHROMA_DIM};

/// K centroids in chroma space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<ChromaRow>,
}

impl Codebook {
    pub fn new(centroids: Vec<ChromaRow>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::TooFewPoints);
        }
        for (i, a) in centroids.iter().enumerate() {
            for b in centroids.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidParameter("duplicate centroids".into()));
                }
            }
        }
        Ok(Self { centroids })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[ChromaRow] {
        &self.centroids
    }
}

/// Integer codeword sequence over the alphabet `[0..alphabet_size)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolString {
    symbols: Vec<u16>,
    alphabet_size: usize,
}

impl SymbolString {
    pub fn new(symbols: Vec<u16>, alphabet_size: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::EmptySequence);
        }
        if symbols.iter().any(|&s| (s as usize) >= alphabet_size) {
            return Err(Error::InvalidParameter("symbol out of alphabet".into()));
        }
        Ok(Self { symbols, alphabet_size })
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Normalized codeword histogram (weights sum to one).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    weights: Vec<f64>,
}

impl Histogram {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// L1 distance between two histograms of equal size.
    pub fn l1(&self, other: &Histogram) -> Result<f64> {
        if self.k() != other.k() {
            return Err(Error::DimensionMismatch);
        }
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

fn sq_dist(a: &ChromaRow, b: &ChromaRow) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[ChromaRow], v: &ChromaRow) -> (usize, f64) {
    let mut best = f64::INFINITY;
    let mut best_i = 0;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best {
            best = d;
            best_i = i;
        }
    }
    (best_i, best)
}

struct LloydRun {
    centroids: Vec<ChromaRow>,
    mse: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    mse_trace: Vec<f64>,
}

/// One seeded Lloyd run: initialization samples K points with pairwise
/// distinct values, iterates until assignments stop changing or 300
/// iterations, repairing empty clusters with the point farthest from its
/// centroid.
fn fit_once(vectors: &[ChromaRow], k: usize, seed: u64) -> Result<LloydRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.shuffle(&mut rng);

    let mut centroids: Vec<ChromaRow> = Vec::with_capacity(k);
    for &i in &order {
        if centroids.iter().all(|c| c != &vectors[i]) {
            centroids.push(vectors[i]);
            if centroids.len() == k {
                break;
            }
        }
    }
    if centroids.len() < k {
        return Err(Error::TooFewPoints);
    }

    let mut assignment = vec![usize::MAX; vectors.len()];
    let mut mse_trace = Vec::new();
    let mut mse = f64::INFINITY;
    for _ in 0..300 {
        let mut changed = false;
        let mut total = 0.0;
        for (slot, v) in assignment.iter_mut().zip(vectors) {
            let (i, d) = nearest(&centroids, v);
            if *slot != i {
                *slot = i;
                changed = true;
            }
            total += d;
        }
        mse = total / vectors.len() as f64;
        mse_trace.push(mse);
        if !changed {
            break;
        }

        let mut sums = vec![[0.0; CHROMA_DIM]; k];
        let mut counts = vec![0usize; k];
        for (a, v) in assignment.iter().zip(vectors) {
            for (s, x) in sums[*a].iter_mut().zip(v) {
                *s += x;
            }
            counts[*a] += 1;
        }
        for (c, (sum, count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                for (slot, s) in c.iter_mut().zip(sum) {
                    *slot = s / *count as f64;
                }
            }
        }
        // Empty-cluster repair: seed with the point farthest from its
        // centroid, using each repair point at most once per round.
        let mut used: Vec<usize> = Vec::new();
        for cluster in 0..k {
            if counts[cluster] == 0 {
                let far = assignment
                    .iter()
                    .zip(vectors)
                    .enumerate()
                    .filter(|(i, _)| !used.contains(i))
                    .max_by(|(_, (a, v)), (_, (b, w))| {
                        let da = sq_dist(&centroids[**a], v);
                        let db = sq_dist(&centroids[**b], w);
                        da.partial_cmp(&db).unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap();
                used.push(far);
                centroids[cluster] = vectors[far];
            }
        }
    }
    Ok(LloydRun { centroids, mse, mse_trace })
}

/// Derives independent sub-seeds for each restart from the master seed.
fn restart_seeds(seed: u64, restarts: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts).map(|_| rng.gen()).collect()
}

/// Runs Lloyd's algorithm `restarts` times from seeded initializations and
/// returns the codebook with minimum mean squared error. Deterministic given
/// `(vectors, k, restarts, seed)`; restarts run in parallel.
pub fn kmeans_fit(vectors: &[ChromaRow], k: usize, restarts: usize, seed: u64) -> Result<Codebook> {
    if k == 0 || restarts == 0 {
        return Err(Error::InvalidParameter("k and restarts must be positive".into()));
    }
    if vectors.len() < k {
        return Err(Error::TooFewPoints);
    }
    if !(2..=48).contains(&k) {
        log::warn!("codebook size K={k} outside the paper-faithful range [2..48]");
    }
    let runs: Vec<Result<LloydRun>> = restart_seeds(seed, restarts)
        .into_par_iter()
        .map(|s| fit_once(vectors, k, s))
        .collect();
    let mut best: Option<LloydRun> = None;
    for run in runs {
        let run = run?;
        let replace = match &best {
            Some(b) => run.mse < b.mse,
            None => true,
        };
        if replace {
            best = Some(run);
        }
    }
    Codebook::new(best.unwrap().centroids)
}

/// Maps every row to its nearest centroid (ties toward the smallest index).
pub fn assign(cb: &Codebook, seq: &ChromaSequence) -> Result<SymbolString> {
    let symbols = seq
        .rows()
        .iter()
        .map(|r| nearest(cb.centroids(), r).0 as u16)
        .collect();
    SymbolString::new(symbols, cb.k())
}

/// Normalized symbol counts: `weights[k] = count(k) / len(s)`.
pub fn histogram(s: &SymbolString) -> Histogram {
    let mut weights = vec![0.0; s.alphabet_size()];
    for &sym in s.symbols() {
        weights[sym as usize] += 1.0;
    }
    let n = s.len() as f64;
    weights.iter_mut().for_each(|w| *w /= n);
    Histogram { weights }
}

/// Histogram of the sequence under each of the 12 chroma rotations,
/// quantized with the same codebook.
pub fn rotation_histograms(cb: &Codebook, seq: &ChromaSequence) -> Result<Vec<Histogram>> {
    (0..CHROMA_DIM as i32)
        .map(|r| Ok(histogram(&assign(cb, &transpose(seq, r))?)))
        .collect()
}
