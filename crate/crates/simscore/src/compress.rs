//! Code lengths, string alignment and the NCD / NCDA distances.
//!
//! Two internal compressors define exact, platform-independent code lengths:
//! a sequential-dictionary (LZ78-style) parser with an explicit phrase cost
//! formula, and a PPM coder (escape method C) whose cost is the ideal
//! arithmetic-code length. An optional block-sorting backend runs as an
//! external program. The alignment transform pads, lag-aligns and interleaves
//! two strings so that cross-correlation is exposed to sequential compressors.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::ppm::{PpmModel, DEFAULT_MAX_ORDER};
use crate::quantize::SymbolString;

/// Code length in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeLength {
    pub bits: f64,
}

/// A string-to-bits code length backend.
pub trait Compressor {
    fn code_length(&self, s: &SymbolString) -> Result<CodeLength>;
}

/// Identifies the available compressor backends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompressorId {
    SeqDict,
    PpmCoder,
    BlockSort,
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Incremental LZ78 parser. Phrase `t` (1-based) costs
/// `ceil(log2(t)) + ceil(log2(K))` bits: a dictionary index among the `t`
/// entries known when the phrase is emitted, plus one innovation symbol.
/// A final phrase that ends exactly on a dictionary entry is charged the
/// full phrase cost.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeqDictCompressor;

impl Compressor for SeqDictCompressor {
    fn code_length(&self, s: &SymbolString) -> Result<CodeLength> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        let sym_bits = ceil_log2(s.alphabet_size() as u64) as f64;
        // Trie of phrases: children[node][symbol] -> node.
        let mut children: Vec<std::collections::HashMap<u16, usize>> =
            vec![std::collections::HashMap::new()];
        let mut bits = 0.0;
        let mut phrase = 0u64;
        let mut node = 0usize;
        for &sym in s.symbols() {
            if let Some(&next) = children[node].get(&sym) {
                node = next;
                continue;
            }
            phrase += 1;
            bits += ceil_log2(phrase) as f64 + sym_bits;
            let fresh = children.len();
            children.push(std::collections::HashMap::new());
            children[node].insert(sym, fresh);
            node = 0;
        }
        if node != 0 {
            // Trailing phrase without an innovation symbol.
            phrase += 1;
            bits += ceil_log2(phrase) as f64 + sym_bits;
        }
        Ok(CodeLength { bits })
    }
}

/// PPM coder: the ideal code length `−Σ log2 p(sym | context)` under the
/// adaptive PPM model (escape method C).
#[derive(Debug, Clone, Copy)]
pub struct PpmCompressor {
    pub max_order: usize,
}

impl Default for PpmCompressor {
    fn default() -> Self {
        Self { max_order: DEFAULT_MAX_ORDER }
    }
}

impl Compressor for PpmCompressor {
    fn code_length(&self, s: &SymbolString) -> Result<CodeLength> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut model = PpmModel::new(s.alphabet_size(), self.max_order);
        let mut bits = 0.0;
        let symbols = s.symbols();
        for (i, &sym) in symbols.iter().enumerate() {
            bits += -model.prob(&symbols[..i], sym).log2();
            model.update(&symbols[..i], sym);
        }
        Ok(CodeLength { bits })
    }
}

/// External block-sorting backend. The string is mapped to printable bytes
/// (symbol k → byte 33+k, so K ≤ 90), piped to the program's standard input,
/// and the compressed size is the byte count of its standard output.
#[derive(Debug, Clone)]
pub struct BlockSortCompressor {
    pub cmd: PathBuf,
}

impl Compressor for BlockSortCompressor {
    fn code_length(&self, s: &SymbolString) -> Result<CodeLength> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        if s.alphabet_size() > 90 {
            return Err(Error::InvalidParameter(
                "block-sort mapping requires alphabet size <= 90".into(),
            ));
        }
        let bytes: Vec<u8> = s.symbols().iter().map(|&k| 33 + k as u8).collect();
        let mut child = Command::new(&self.cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.cmd.display())))?;
        child
            .stdin
            .take()
            .expect("stdin piped")
            .write_all(&bytes)
            .map_err(|e| Error::BackendUnavailable(format!("write: {e}")))?;
        let out = child
            .wait_with_output()
            .map_err(|e| Error::BackendUnavailable(format!("wait: {e}")))?;
        if !out.status.success() {
            return Err(Error::BackendUnavailable(format!(
                "{} exited with {}",
                self.cmd.display(),
                out.status
            )));
        }
        Ok(CodeLength { bits: out.stdout.len() as f64 * 8.0 })
    }
}

/// Sequential concatenation of two strings over the same alphabet.
pub fn concat(x: &SymbolString, y: &SymbolString) -> Result<SymbolString> {
    if x.alphabet_size() != y.alphabet_size() {
        return Err(Error::AlphabetMismatch);
    }
    let mut symbols = Vec::with_capacity(x.len() + y.len());
    symbols.extend_from_slice(x.symbols());
    symbols.extend_from_slice(y.symbols());
    SymbolString::new(symbols, x.alphabet_size())
}

/// Most common symbol; ties break toward the smallest symbol value.
fn mode_symbol(s: &[u16], k: usize) -> u16 {
    let mut counts = vec![0u32; k];
    for &sym in s {
        counts[sym as usize] += 1;
    }
    let mut best = 0u32;
    let mut best_sym = 0u16;
    for (sym, &c) in counts.iter().enumerate() {
        if c > best {
            best = c;
            best_sym = sym as u16;
        }
    }
    best_sym
}

/// The alignment transform `⟨x, y⟩`: (1) the shorter string is padded at its
/// end with the mode symbol of the longer, (2) symbols are treated as
/// integer magnitudes and the circular cross-correlation
/// `r(ℓ) = Σ_n a_n · b_{(n+ℓ) mod N}` is maximized (ties toward the smallest
/// lag), (3) the second string is circularly shifted by that lag, (4) the two
/// strings are interleaved `a₁b₁a₂b₂…` into a string of length 2N.
pub fn align(x: &SymbolString, y: &SymbolString) -> Result<SymbolString> {
    if x.alphabet_size() != y.alphabet_size() {
        return Err(Error::AlphabetMismatch);
    }
    let k = x.alphabet_size();
    let mut a: Vec<u16> = x.symbols().to_vec();
    let mut b: Vec<u16> = y.symbols().to_vec();
    if a.len() < b.len() {
        let pad = mode_symbol(&b, k);
        a.resize(b.len(), pad);
    } else if b.len() < a.len() {
        let pad = mode_symbol(&a, k);
        b.resize(a.len(), pad);
    }
    let n = a.len();
    let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let bf: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_lag = 0usize;
    for lag in 0..n {
        let mut r = 0.0;
        for i in 0..n {
            r += af[i] * bf[(i + lag) % n];
        }
        if r > best {
            best = r;
            best_lag = lag;
        }
    }
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        out.push(a[i]);
        out.push(b[(i + best_lag) % n]);
    }
    SymbolString::new(out, k)
}

/// Normalized compression distance:
/// `max{C(xy) − C(x), C(yx) − C(y)} / max{C(x), C(y)}`.
pub fn ncd(c: &dyn Compressor, x: &SymbolString, y: &SymbolString) -> Result<f64> {
    let cx = c.code_length(x)?.bits;
    let cy = c.code_length(y)?.bits;
    let cxy = c.code_length(&concat(x, y)?)?.bits;
    let cyx = c.code_length(&concat(y, x)?)?.bits;
    Ok((cxy - cx).max(cyx - cy) / cx.max(cy))
}

/// Normalized compression distance with alignment:
/// `(C(⟨x,y⟩) − min{C(x), C(y)}) / max{C(x), C(y)}`.
pub fn ncda(c: &dyn Compressor, x: &SymbolString, y: &SymbolString) -> Result<f64> {
    let cx = c.code_length(x)?.bits;
    let cy = c.code_length(y)?.bits;
    let joint = c.code_length(&align(x, y)?)?.bits;
    Ok((joint - cx.min(cy)) / cx.max(cy))
}
