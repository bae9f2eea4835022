//! Prediction-by-partial-matching context model, escape method C.
//!
//! Counts are kept per context for every order up to `max_order`. The
//! next-symbol distribution is the escape cascade: starting from the longest
//! available context, a symbol seen there takes probability
//! `c / (total + distinct)` and the escape mass `distinct / (total + distinct)`
//! flows to the next shorter context, bottoming out at the uniform 1/K
//! distribution. No exclusion bookkeeping is done; the cascade vector is
//! renormalized instead, so the result is a proper distribution with every
//! symbol strictly positive.

use std::collections::HashMap;

/// Default maximum context order.
pub const DEFAULT_MAX_ORDER: usize = 5;

#[derive(Debug, Clone)]
struct CtxCounts {
    counts: Vec<u32>,
    total: u32,
    distinct: u32,
}

impl CtxCounts {
    fn new(k: usize) -> Self {
        Self { counts: vec![0; k], total: 0, distinct: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct PpmModel {
    k: usize,
    max_order: usize,
    tables: Vec<HashMap<Vec<u16>, CtxCounts>>,
}

impl PpmModel {
    pub fn new(k: usize, max_order: usize) -> Self {
        Self {
            k,
            max_order,
            tables: (0..=max_order).map(|_| HashMap::new()).collect(),
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    /// Next-symbol distribution given the trailing context `history`.
    pub fn dist(&self, history: &[u16]) -> Vec<f64> {
        let mut raw = vec![0.0; self.k];
        let mut remaining: Vec<usize> = (0..self.k).collect();
        let mut esc = 1.0;
        let top = self.max_order.min(history.len());
        for order in (0..=top).rev() {
            let ctx = &history[history.len() - order..];
            let Some(cell) = self.tables[order].get(ctx) else { continue };
            if cell.total == 0 {
                continue;
            }
            let denom = (cell.total + cell.distinct) as f64;
            let mut next = Vec::with_capacity(remaining.len());
            for &s in &remaining {
                if cell.counts[s] > 0 {
                    raw[s] = esc * cell.counts[s] as f64 / denom;
                } else {
                    next.push(s);
                }
            }
            esc *= cell.distinct as f64 / denom;
            remaining = next;
            if remaining.is_empty() {
                break;
            }
        }
        for s in remaining {
            raw[s] = esc / self.k as f64;
        }
        let z: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|p| *p /= z);
        raw
    }

    /// Probability of one symbol in the trailing context (cascade, normalized).
    pub fn prob(&self, history: &[u16], sym: u16) -> f64 {
        self.dist(history)[sym as usize]
    }

    /// Records `sym` in every context of order 0..=min(max_order, |history|).
    pub fn update(&mut self, history: &[u16], sym: u16) {
        let top = self.max_order.min(history.len());
        for order in 0..=top {
            let ctx = history[history.len() - order..].to_vec();
            let cell = self.tables[order]
                .entry(ctx)
                .or_insert_with(|| CtxCounts::new(self.k));
            if cell.counts[sym as usize] == 0 {
                cell.distinct += 1;
            }
            cell.counts[sym as usize] += 1;
            cell.total += 1;
        }
    }

    /// Adaptive pass over a whole string (updates only, no scoring).
    pub fn train(&mut self, symbols: &[u16]) {
        for (i, &s) in symbols.iter().enumerate() {
            self.update(&symbols[..i], s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model_is_uniform() {
        let m = PpmModel::new(4, 5);
        let d = m.dist(&[]);
        for p in d {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn distributions_are_proper_after_updates() {
        let mut m = PpmModel::new(3, 2);
        let seq = [0u16, 1, 1, 2, 0, 1, 2, 2, 0];
        for (i, &s) in seq.iter().enumerate() {
            m.update(&seq[..i], s);
        }
        for ctx in [&[][..], &[0u16][..], &[1, 2][..], &[2, 2][..]] {
            let d = m.dist(ctx);
            let sum: f64 = d.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn seen_symbol_gains_probability() {
        let mut m = PpmModel::new(2, 1);
        m.update(&[], 0);
        m.update(&[0], 0);
        m.update(&[0, 0], 0);
        assert!(m.prob(&[0, 0], 0) > 0.5);
    }
}
