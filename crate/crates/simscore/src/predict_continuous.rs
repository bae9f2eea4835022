//! Continuous-valued prediction distances over chroma sequences.
//!
//! Sequences are time-delay embedded; predictions are nearest neighbors in
//! embedded space under the sample Pearson correlation (Euclidean-free,
//! scale-invariant). Self-prediction excludes a temporal radius around the
//! target, cross-prediction searches the other sequence, and conditional
//! self-prediction blends both with an MSE-derived weight. Rescaled
//! prediction errors are summarized by a Gaussian entropy estimate
//! `½ log2((2πe)^k |Σ|)`, which stands in for the entropy rates in the NID
//! and D× ratios. The component-wise NMSE of cross-prediction serves as a
//! baseline distance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::{ChromaRow, ChromaSequence, CHROMA_DIM};

/// Time-delay embedding and prediction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingConfig {
    /// Embedding dimension (number of stacked lags).
    pub d: usize,
    /// Time delay between stacked lags.
    pub tau: usize,
    /// Predictive horizon.
    pub h: usize,
    /// Exclusion radius for self-prediction.
    pub r: usize,
}

impl EmbeddingConfig {
    pub fn new(d: usize, tau: usize, h: usize, r: usize) -> Result<Self> {
        if d == 0 || tau == 0 || h == 0 {
            return Err(Error::InvalidParameter("d, tau and h must be positive".into()));
        }
        if !([1, 2, 4].contains(&d) && [1, 2, 4, 6].contains(&tau) && [1, 4].contains(&h) && r == 8) {
            log::warn!(
                "embedding config (d={d}, tau={tau}, h={h}, R={r}) outside the paper-faithful grid"
            );
        }
        Ok(Self { d, tau, h, r })
    }

    /// First 0-based index with a full embedding window.
    fn first_embedded(&self) -> usize {
        (self.d - 1) * self.tau
    }
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { d: 4, tau: 1, h: 1, r: 8 }
    }
}

/// Delay-embedded vectors; `vectors[i]` belongs to original time step
/// `first_index + i` and stacks rows `t, t−τ, …, t−(d−1)τ` (12·d values).
#[derive(Debug, Clone)]
pub struct EmbeddedSeries {
    vectors: Vec<Vec<f64>>,
    first_index: usize,
}

impl EmbeddedSeries {
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn first_index(&self) -> usize {
        self.first_index
    }
}

/// Time-delay embedding. Requires at least two embedded vectors
/// (`N ≥ (d−1)τ + 2`); the number of valid vectors is `N − (d−1)τ`.
pub fn embed(seq: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<EmbeddedSeries> {
    let start = cfg.first_embedded();
    let n = seq.len();
    if n < start + 2 {
        return Err(Error::InsufficientLength);
    }
    let rows = seq.rows();
    let mut vectors = Vec::with_capacity(n - start);
    for t in start..n {
        let mut v = Vec::with_capacity(cfg.d * CHROMA_DIM);
        for j in 0..cfg.d {
            v.extend_from_slice(&rows[t - j * cfg.tau]);
        }
        vectors.push(v);
    }
    Ok(EmbeddedSeries { vectors, first_index: start })
}

/// Mean-centered, norm-scaled copy of each embedded vector, so that a dot
/// product is the sample Pearson correlation. Zero-variance vectors map to
/// all-zero rows (correlation 0 against everything).
fn standardize(series: &EmbeddedSeries) -> Vec<Vec<f64>> {
    series
        .vectors
        .iter()
        .map(|v| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                centered.into_iter().map(|x| x / norm).collect()
            } else {
                vec![0.0; v.len()]
            }
        })
        .collect()
}

/// Nearest-neighbor predictions for a sequence: `values[i]` predicts row
/// `first_target + i`.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub first_target: usize,
    pub values: Vec<ChromaRow>,
}

impl Predictions {
    fn len(&self) -> usize {
        self.values.len()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cross-prediction: each valid target time `t` of `x` finds the candidate
/// `k` in `y` maximizing the correlation of embedded vectors (ties toward
/// the smallest `k`) and predicts `x̃_{t+h} = y_{k+h}`.
pub fn cross_predict(x: &ChromaSequence, y: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<Predictions> {
    let ex = embed(x, cfg)?;
    let ey = embed(y, cfg)?;
    let zx = standardize(&ex);
    let zy = standardize(&ey);
    // Targets need an actual successor in x; candidates a successor in y.
    let n_targets = (x.len() - cfg.h).saturating_sub(ex.first_index);
    let n_cands = (y.len() - cfg.h).saturating_sub(ey.first_index);
    if n_targets == 0 {
        return Err(Error::InsufficientLength);
    }
    if n_cands == 0 {
        return Err(Error::InsufficientLength);
    }
    let mut values = Vec::with_capacity(n_targets);
    for zt in zx.iter().take(n_targets) {
        let mut best = f64::NEG_INFINITY;
        let mut best_k = 0usize;
        for (k, zk) in zy.iter().take(n_cands).enumerate() {
            let c = dot(zt, zk);
            if c > best {
                best = c;
                best_k = k;
            }
        }
        values.push(y.rows()[ey.first_index + best_k + cfg.h]);
    }
    Ok(Predictions { first_target: ex.first_index + cfg.h, values })
}

/// Self-prediction: as cross-prediction with `y = x`, restricted to
/// candidates with `|k − t| > R`.
pub fn self_predict(x: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<Predictions> {
    let ex = embed(x, cfg)?;
    let z = standardize(&ex);
    let n_valid = (x.len() - cfg.h).saturating_sub(ex.first_index);
    if n_valid == 0 {
        return Err(Error::InsufficientLength);
    }
    let mut values = Vec::with_capacity(n_valid);
    for (t, zt) in z.iter().take(n_valid).enumerate() {
        let mut best = f64::NEG_INFINITY;
        let mut best_k = None;
        for (k, zk) in z.iter().take(n_valid).enumerate() {
            let apart = t.abs_diff(k) > cfg.r;
            if !apart {
                continue;
            }
            let c = dot(zt, zk);
            if c > best {
                best = c;
                best_k = Some(k);
            }
        }
        let Some(k) = best_k else {
            return Err(Error::ExclusionExhausted);
        };
        values.push(x.rows()[ex.first_index + k + cfg.h]);
    }
    Ok(Predictions { first_target: ex.first_index + cfg.h, values })
}

fn mse_of(x: &ChromaSequence, preds: &Predictions) -> f64 {
    let mut total = 0.0;
    for (i, p) in preds.values.iter().enumerate() {
        let actual = &x.rows()[preds.first_target + i];
        for (a, b) in p.iter().zip(actual) {
            total += (a - b) * (a - b);
        }
    }
    total / (preds.len() * CHROMA_DIM) as f64
}

/// Conditional self-prediction: the convex blend
/// `α·cross + (1−α)·self` with `α = MSE_self / (MSE_self + MSE_cross)`
/// computed over the common target range (α = 0.5 when both MSEs vanish).
pub fn conditional_predict(x: &ChromaSequence, y: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<Predictions> {
    let cross = cross_predict(x, y, cfg)?;
    let own = self_predict(x, cfg)?;
    debug_assert_eq!(cross.first_target, own.first_target);
    debug_assert_eq!(cross.len(), own.len());
    let mse_self = mse_of(x, &own);
    let mse_cross = mse_of(x, &cross);
    let alpha = if mse_self == 0.0 && mse_cross == 0.0 {
        0.5
    } else {
        mse_self / (mse_self + mse_cross)
    };
    let values = cross
        .values
        .iter()
        .zip(&own.values)
        .map(|(c, s)| {
            let mut row = [0.0; CHROMA_DIM];
            for ((slot, cv), sv) in row.iter_mut().zip(c).zip(s) {
                *slot = alpha * cv + (1.0 - alpha) * sv;
            }
            row
        })
        .collect();
    Ok(Predictions { first_target: own.first_target, values })
}

/// Rescaled residuals and their covariance.
#[derive(Debug, Clone)]
pub struct PredictionErrorStats {
    /// Residual rows, each component divided by its normalizer.
    pub errors: Vec<ChromaRow>,
    /// Sample covariance ((n−1) denominator) of the rescaled residuals.
    pub covariance: DMatrix<f64>,
    /// Per-component population variances of the full target sequence.
    pub variances: ChromaRow,
}

/// Population (n-denominator) per-component variance of all rows.
fn population_variance(rows: &[ChromaRow]) -> ChromaRow {
    let n = rows.len() as f64;
    let mut mean = [0.0; CHROMA_DIM];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; CHROMA_DIM];
    for r in rows {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(r) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    var
}

/// Rescaled prediction errors `ε_{i,n} = (x̃_{i,n} − x_{i,n}) / s_i`, where
/// `s_i` is the population variance of component i over the full sequence
/// (floored at 1e-12), plus their sample covariance.
pub fn error_stats(x: &ChromaSequence, preds: &Predictions) -> Result<PredictionErrorStats> {
    if preds.len() < 2 {
        return Err(Error::InsufficientLength);
    }
    let mut variances = population_variance(x.rows());
    variances.iter_mut().for_each(|v| *v = v.max(1e-12));

    let errors: Vec<ChromaRow> = preds
        .values
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let actual = &x.rows()[preds.first_target + i];
            let mut e = [0.0; CHROMA_DIM];
            for (((slot, pv), av), s) in e.iter_mut().zip(p).zip(actual).zip(&variances) {
                *slot = (pv - av) / s;
            }
            e
        })
        .collect();

    let n = errors.len();
    let mut mean = [0.0; CHROMA_DIM];
    for e in &errors {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(CHROMA_DIM, CHROMA_DIM);
    for e in &errors {
        for i in 0..CHROMA_DIM {
            for j in 0..CHROMA_DIM {
                cov[(i, j)] += (e[i] - mean[i]) * (e[j] - mean[j]);
            }
        }
    }
    cov /= (n - 1) as f64;
    Ok(PredictionErrorStats { errors, covariance: cov, variances })
}

/// How an entropy estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMethod {
    SelfPrediction,
    CrossPrediction,
    ConditionalPrediction,
}

/// A (differential) entropy estimate in bits; may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub bits: f64,
    pub method: EntropyMethod,
}

const DET_REGULARIZER: f64 = 1e-9;

/// `½ log2((2πe)^k |Σ + λI|)` in bits for a k×k covariance, λ = 1e-9. The
/// regularizer keeps the value finite for singular covariances (perfect
/// predictions).
pub fn gaussian_entropy_bits(covariance: &DMatrix<f64>) -> f64 {
    let k = covariance.nrows();
    let mut reg = covariance.clone();
    for i in 0..k {
        reg[(i, i)] += DET_REGULARIZER;
    }
    let det = reg.determinant().max(f64::MIN_POSITIVE);
    0.5 * (k as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2() + det.log2())
}

/// Gaussian entropy of rescaled residuals, tagged with the prediction
/// strategy that produced them.
pub fn gaussian_entropy(stats: &PredictionErrorStats, method: EntropyMethod) -> EntropyEstimate {
    EntropyEstimate { bits: gaussian_entropy_bits(&stats.covariance), method }
}

/// H(X) estimate via self-prediction.
pub fn self_entropy(x: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<EntropyEstimate> {
    let preds = self_predict(x, cfg)?;
    Ok(gaussian_entropy(&error_stats(x, &preds)?, EntropyMethod::SelfPrediction))
}

/// H×(X,Y) estimate via cross-prediction of `x` from `y`.
pub fn cross_entropy(x: &ChromaSequence, y: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<EntropyEstimate> {
    let preds = cross_predict(x, y, cfg)?;
    Ok(gaussian_entropy(&error_stats(x, &preds)?, EntropyMethod::CrossPrediction))
}

/// H(X|Y) estimate via conditional self-prediction.
pub fn conditional_entropy(x: &ChromaSequence, y: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<EntropyEstimate> {
    let preds = conditional_predict(x, y, cfg)?;
    Ok(gaussian_entropy(&error_stats(x, &preds)?, EntropyMethod::ConditionalPrediction))
}

/// `max{H(X|Y), H(Y|X)} / max{H(X), H(Y)}` with a degenerate-denominator
/// guard; entropies are differential and may be negative.
pub fn nid_from_entropies(hx_given_y: f64, hy_given_x: f64, hx: f64, hy: f64) -> Result<f64> {
    let den = hx.max(hy);
    if den.abs() < 1e-9 {
        return Err(Error::DegenerateDenominator);
    }
    Ok(hx_given_y.max(hy_given_x) / den)
}

/// `(H×(X,Y) + H×(Y,X)) / (H(X) + H(Y))` with a degenerate-denominator guard.
pub fn d_cross_from_entropies(cross_xy: f64, cross_yx: f64, hx: f64, hy: f64) -> Result<f64> {
    let den = hx + hy;
    if den.abs() < 1e-9 {
        return Err(Error::DegenerateDenominator);
    }
    Ok((cross_xy + cross_yx) / den)
}

/// Continuous NID estimate (conditional self-prediction numerator,
/// self-prediction denominator).
pub fn nid_continuous(x: &ChromaSequence, y: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<f64> {
    let hx_y = conditional_entropy(x, y, cfg)?.bits;
    let hy_x = conditional_entropy(y, x, cfg)?.bits;
    let hx = self_entropy(x, cfg)?.bits;
    let hy = self_entropy(y, cfg)?.bits;
    nid_from_entropies(hx_y, hy_x, hx, hy)
}

/// Continuous D× estimate (cross-prediction numerator, self-prediction
/// denominator).
pub fn d_cross_continuous(x: &ChromaSequence, y: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<f64> {
    let cross_xy = cross_entropy(x, y, cfg)?.bits;
    let cross_yx = cross_entropy(y, x, cfg)?.bits;
    let hx = self_entropy(x, cfg)?.bits;
    let hy = self_entropy(y, cfg)?.bits;
    d_cross_from_entropies(cross_xy, cross_yx, hx, hy)
}

/// One direction of the component-wise normalized mean squared error:
/// `mean_i(MSE_i / var_i)` where both the MSE and the population variance
/// are taken over the predicted target rows (variances floored at 1e-12).
pub fn nmse_from_predictions(x: &ChromaSequence, preds: &Predictions) -> f64 {
    let targets: Vec<ChromaRow> = (0..preds.len())
        .map(|i| x.rows()[preds.first_target + i])
        .collect();
    let mut var = population_variance(&targets);
    var.iter_mut().for_each(|v| *v = v.max(1e-12));
    let n = preds.len() as f64;
    let mut acc = 0.0;
    for i in 0..CHROMA_DIM {
        let mse: f64 = preds
            .values
            .iter()
            .zip(&targets)
            .map(|(p, a)| (p[i] - a[i]) * (p[i] - a[i]))
            .sum::<f64>()
            / n;
        acc += mse / var[i];
    }
    acc / CHROMA_DIM as f64
}

/// Symmetrized cross-prediction NMSE: `½(NMSE(X|Y) + NMSE(Y|X))`.
pub fn nmse_cross(x: &ChromaSequence, y: &ChromaSequence, cfg: &EmbeddingConfig) -> Result<f64> {
    let xy = nmse_from_predictions(x, &cross_predict(x, y, cfg)?);
    let yx = nmse_from_predictions(y, &cross_predict(y, x, cfg)?);
    Ok(0.5 * (xy + yx))
}
