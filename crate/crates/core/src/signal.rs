//! LED ID signatures, the sparse gain vector and received-signal synthesis.
//!
//! All LEDs transmit their `M`-bit OOK signatures at once; the receiver sees
//! `y = S x + n` where the columns of `S` are the signatures, `x = λ ⊙ α` and
//! `n` is white Gaussian noise whose power is set from a target SNR.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelGainVector;
use crate::geometry::CoverageVector;
use crate::seeds::{derive_seed, rng_from_seed, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("signature matrix needs M >= 1 and N >= 1, got {m}x{n}")]
    EmptyMatrix { m: usize, n: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("noiseless received signal is identically zero; SNR is undefined")]
    ZeroSignal,
    #[error("noise variance must be finite and >= 0, got {0}")]
    BadVariance(f64),
}

/// `M × N` binary matrix whose column `i` is the ID sequence of LED `i`.
///
/// Stored column-major as `f64` so correlations against a residual run over
/// contiguous memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
    seed: u64,
}

impl SignatureMatrix {
    /// I.i.d. Bernoulli(1/2) entries drawn from `seed`.
    pub fn generate(rows: usize, cols: usize, seed: u64) -> Result<Self, SignalError> {
        if rows == 0 || cols == 0 {
            return Err(SignalError::EmptyMatrix { m: rows, n: cols });
        }
        let mut rng = rng_from_seed(seed);
        let data = (0..rows * cols)
            .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
            .collect();
        Ok(Self::from_parts(rows, cols, data, seed))
    }

    /// Like [`SignatureMatrix::generate`] but each all-zero column is redrawn
    /// from a seed derived from `seed` and the column index until it has a
    /// one. OMP cannot use a zero column. At `M = 200` a zero column has
    /// probability `2⁻²⁰⁰`, so this equals `generate` in practice.
    pub fn generate_nondegenerate(rows: usize, cols: usize, seed: u64) -> Result<Self, SignalError> {
        let base = Self::generate(rows, cols, seed)?;
        let zero = base.zero_columns();
        if zero.is_empty() {
            return Ok(base);
        }
        let mut data = base.data;
        for c in zero {
            let mut rng = rng_from_seed(derive_seed(seed, Stream::Signatures, 1, c as u64));
            let col = &mut data[c * rows..(c + 1) * rows];
            while col.iter().all(|&v| v == 0.0) {
                for v in col.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { 0.0 };
                }
            }
        }
        Ok(Self::from_parts(rows, cols, data, seed))
    }

    /// Builds a matrix from row-major `{0,1}` entries. Used for hand-written fixtures.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, SignalError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(SignalError::EmptyMatrix { m, n });
        }
        let mut data = vec![0.0; m * n];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SignalError::LengthMismatch { left: row.len(), right: n });
            }
            for (c, &v) in row.iter().enumerate() {
                data[c * m + r] = if v != 0 { 1.0 } else { 0.0 };
            }
        }
        Ok(Self::from_parts(m, n, data, 0))
    }

    fn from_parts(rows: usize, cols: usize, data: Vec<f64>, seed: u64) -> Self {
        let norms = data
            .chunks_exact(rows)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        Self {
            rows,
            cols,
            data,
            norms,
            seed,
        }
    }

    /// Signature length `M`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of LEDs `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[col * self.rows + row] as u8
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn column_norm(&self, col: usize) -> f64 {
        self.norms[col]
    }

    pub fn zero_columns(&self) -> Vec<usize> {
        self.norms
            .iter()
            .enumerate()
            .filter_map(|(i, &n)| (n == 0.0).then_some(i))
            .collect()
    }

    /// `S x`, skipping zero entries of `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, SignalError> {
        if x.len() != self.cols {
            return Err(SignalError::LengthMismatch { left: x.len(), right: self.cols });
        }
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (o, &s) in out.iter_mut().zip(self.column(j)) {
                    *o += s * xj;
                }
            }
        }
        Ok(out)
    }

    /// Row `r` as `{0,1}` bytes.
    pub fn row(&self, r: usize) -> Vec<u8> {
        (0..self.cols).map(|c| self.get(r, c)).collect()
    }
}

/// `x = λ ⊙ α`; nonzero only for LEDs that cover the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGainVector(pub Vec<f64>);

impl SparseGainVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v != 0.0).then_some(i))
            .collect()
    }
}

pub fn compose_x(lambda: &CoverageVector, alpha: &ChannelGainVector) -> Result<SparseGainVector, SignalError> {
    if lambda.len() != alpha.len() {
        return Err(SignalError::LengthMismatch { left: lambda.len(), right: alpha.len() });
    }
    Ok(SparseGainVector(
        lambda
            .lambda
            .iter()
            .zip(alpha.as_slice())
            .map(|(&l, &a)| if l { a } else { 0.0 })
            .collect(),
    ))
}

/// Mean-square power per sample of a signal.
pub fn mean_power(v: &[f64]) -> f64 {
    v.iter().map(|s| s * s).sum::<f64>() / v.len() as f64
}

/// Noise variance giving `snr_db` relative to the average per-sample power of `S x`.
pub fn noise_variance_for_snr(s: &SignatureMatrix, x: &SparseGainVector, snr_db: f64) -> Result<f64, SignalError> {
    let clean = s.mul_vec(x.as_slice())?;
    let p_sig = mean_power(&clean);
    if p_sig == 0.0 {
        return Err(SignalError::ZeroSignal);
    }
    Ok(p_sig / 10f64.powf(snr_db / 10.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    pub y: Vec<f64>,
    pub noise_variance: f64,
    /// Target SNR the variance was calibrated for, when synthesized through
    /// [`synthesize_at_snr`].
    pub snr_db: Option<f64>,
}

/// `y = S x + n` with `n ~ N(0, σ² I)` drawn from `seed`.
///
/// Noise is produced as `σ · z` with `z` standard normal, so two calls with
/// the same seed and different variances see the same `z`.
pub fn synthesize(
    s: &SignatureMatrix,
    x: &SparseGainVector,
    noise_variance: f64,
    seed: u64,
) -> Result<ReceivedSignal, SignalError> {
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(SignalError::BadVariance(noise_variance));
    }
    let mut y = s.mul_vec(x.as_slice())?;
    if noise_variance > 0.0 {
        let sigma = noise_variance.sqrt();
        let mut rng = rng_from_seed(seed);
        for v in &mut y {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    Ok(ReceivedSignal {
        y,
        noise_variance,
        snr_db: None,
    })
}

pub fn synthesize_at_snr(
    s: &SignatureMatrix,
    x: &SparseGainVector,
    snr_db: f64,
    seed: u64,
) -> Result<ReceivedSignal, SignalError> {
    let var = noise_variance_for_snr(s, x, snr_db)?;
    let mut sig = synthesize(s, x, var, seed)?;
    sig.snr_db = Some(snr_db);
    Ok(sig)
}
