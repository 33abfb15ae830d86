//! Orthogonal matching pursuit over the signature matrix.
//!
//! Each iteration picks the unselected column with the largest normalised
//! correlation `|⟨r, s_j⟩| / ‖s_j‖` against the residual, appends it to a
//! thin QR factorization of the selected columns (classical Gram-Schmidt with
//! one reorthogonalization pass) and projects the residual off the new basis
//! vector. Coefficients on the selected set are the least-squares solution,
//! recovered at the end by back substitution on `R`.

use thiserror::Error;

use crate::signal::SignatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum RecoveryError {
    #[error("max_iters must be >= 1")]
    NoIterations,
    #[error("residual_tol must be finite and >= 0, got {0}")]
    BadTolerance(f64),
    #[error("signal has length {signal} but the signature matrix has {rows} rows")]
    LengthMismatch { signal: usize, rows: usize },
    #[error("signature column {0} is all zero")]
    ZeroColumn(usize),
}

/// Why pursuit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ResidualTolerance,
    IterationCap,
    /// Every remaining column is orthogonal to the residual or was dropped.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    /// Length-`N` estimate, zero outside `selected`.
    pub x_hat: Vec<f64>,
    /// Column indices in selection order.
    pub selected: Vec<usize>,
    pub residual_norm: f64,
    /// Residual norm before the first selection and after each one.
    pub residual_trace: Vec<f64>,
    /// Columns rejected because they were numerically dependent on the selected set.
    pub dropped_columns: usize,
    pub stop: StopReason,
}

impl SparseEstimate {
    pub fn iterations(&self) -> usize {
        self.selected.len()
    }
}

/// Indices with `|x̂_i| > threshold`, ascending.
pub fn support_of(est: &SparseEstimate, threshold: f64) -> Vec<usize> {
    est.x_hat
        .iter()
        .enumerate()
        .filter_map(|(i, v)| (v.abs() > threshold).then_some(i))
        .collect()
}

/// Relative size below which a new column's component orthogonal to the
/// selected span counts as zero.
const RANK_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn omp(
    y: &[f64],
    dict: &SignatureMatrix,
    max_iters: usize,
    residual_tol: f64,
) -> Result<SparseEstimate, RecoveryError> {
    if max_iters == 0 {
        return Err(RecoveryError::NoIterations);
    }
    if !(residual_tol.is_finite() && residual_tol >= 0.0) {
        return Err(RecoveryError::BadTolerance(residual_tol));
    }
    let m = dict.rows();
    let n = dict.cols();
    if y.len() != m {
        return Err(RecoveryError::LengthMismatch { signal: y.len(), rows: m });
    }
    if let Some(&c) = dict.zero_columns().first() {
        return Err(RecoveryError::ZeroColumn(c));
    }

    let mut residual = y.to_vec();
    let mut available = vec![true; n];
    let mut selected = Vec::new();
    // Q stored column by column; R as packed columns (column k has k+1 entries).
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut r: Vec<Vec<f64>> = Vec::new();
    let mut qty = Vec::new();
    let mut dropped = 0;
    let mut res_norm = norm(&residual);
    let mut trace = vec![res_norm];

    let stop = loop {
        if res_norm <= residual_tol {
            break StopReason::ResidualTolerance;
        }
        if selected.len() >= max_iters {
            break StopReason::IterationCap;
        }

        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| available[j]) {
            let score = dot(&residual, dict.column(j)).abs() / dict.column_norm(j);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best.filter(|&(_, s)| s > 0.0) else {
            break StopReason::Exhausted;
        };
        debug_assert!(score.is_finite());
        available[j] = false;

        let col = dict.column(j);
        let mut w = col.to_vec();
        let mut rcol = vec![0.0; q.len()];
        for _ in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &w);
                rcol[k] += c;
                for (wi, qi) in w.iter_mut().zip(qk) {
                    *wi -= c * qi;
                }
            }
        }
        let w_norm = norm(&w);
        if w_norm <= RANK_TOL * dict.column_norm(j) {
            dropped += 1;
            continue;
        }
        for wi in &mut w {
            *wi /= w_norm;
        }
        rcol.push(w_norm);

        let z = dot(&w, &residual);
        for (ri, wi) in residual.iter_mut().zip(&w) {
            *ri -= z * wi;
        }
        qty.push(dot(&w, y));
        q.push(w);
        r.push(rcol);
        selected.push(j);
        res_norm = norm(&residual);
        trace.push(res_norm);
    };

    // Back substitution R c = Qᵀ y.
    let k = selected.len();
    let mut coef = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = qty[i];
        for (jj, c) in coef.iter().enumerate().skip(i + 1) {
            acc -= r[jj][i] * c;
        }
        coef[i] = acc / r[i][i];
    }
    let mut x_hat = vec![0.0; n];
    for (&idx, &c) in selected.iter().zip(&coef) {
        x_hat[idx] = c;
    }

    Ok(SparseEstimate {
        x_hat,
        selected,
        residual_norm: res_norm,
        residual_trace: trace,
        dropped_columns: dropped,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SparseGainVector;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{seq::index::sample, Rng, SeedableRng};

    fn planted(m: usize, n: usize, k: usize, seed: u64) -> (SignatureMatrix, Vec<f64>) {
        let s = SignatureMatrix::generate_nondegenerate(m, n, seed).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let mut x = vec![0.0; n];
        for i in sample(&mut rng, n, k) {
            x[i] = rng.random_range(0.2..1.0);
        }
        (s, x)
    }

    /// Least squares on the selected columns through nalgebra's SVD.
    fn lstsq_oracle(s: &SignatureMatrix, cols: &[usize], y: &[f64]) -> Vec<f64> {
        let a = DMatrix::from_fn(s.rows(), cols.len(), |r, c| s.column(cols[c])[r]);
        let b = DVector::from_column_slice(y);
        a.svd(true, true).solve(&b, 1e-14).unwrap().iter().copied().collect()
    }

    #[test]
    fn single_column_exact() {
        let s = SignatureMatrix::generate_nondegenerate(64, 20, 3).unwrap();
        let y: Vec<f64> = s.column(5).iter().map(|v| 3.0 * v).collect();
        let est = omp(&y, &s, 4, 1e-12).unwrap();
        assert_eq!(est.selected, vec![5]);
        assert!((est.x_hat[5] - 3.0).abs() < 1e-12);
        assert!(est.residual_norm < 1e-12);
        assert_eq!(est.stop, StopReason::ResidualTolerance);
        assert_eq!(support_of(&est, 0.0), vec![5]);
    }

    #[test]
    fn zero_signal_returns_zero() {
        let s = SignatureMatrix::generate_nondegenerate(16, 8, 1).unwrap();
        let est = omp(&[0.0; 16], &s, 3, 0.0).unwrap();
        assert!(est.selected.is_empty());
        assert!(est.x_hat.iter().all(|&v| v == 0.0));
        assert_eq!(est.residual_trace, vec![0.0]);
        assert!(support_of(&est, 0.0).is_empty());
    }

    #[test]
    fn planted_five_sparse_paper_dims() {
        let (s, x) = planted(200, 625, 5, 11);
        let y = s.mul_vec(&x).unwrap();
        let est = omp(&y, &s, 14, 1e-10).unwrap();
        let truth = SparseGainVector(x.clone()).support();
        assert_eq!(support_of(&est, 0.0), truth);
        for (a, b) in est.x_hat.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn coefficients_match_independent_least_squares() {
        let (s, x) = planted(60, 120, 6, 5);
        let mut y = s.mul_vec(&x).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for v in &mut y {
            *v += 0.05 * rng.random_range(-1.0..1.0);
        }
        let est = omp(&y, &s, 9, 0.0).unwrap();
        let oracle = lstsq_oracle(&s, &est.selected, &y);
        let scale = oracle.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (&idx, o) in est.selected.iter().zip(&oracle) {
            assert!((est.x_hat[idx] - o).abs() <= 1e-10 * scale, "{idx}");
        }
    }

    #[test]
    fn duplicate_columns_are_dropped_not_fatal() {
        let rows = vec![vec![1, 1, 0], vec![0, 0, 1], vec![1, 1, 1], vec![0, 0, 0]];
        let s = SignatureMatrix::from_rows(&rows).unwrap();
        // y = col0 + col2 = col1 + col2; col0 and col1 are identical.
        let y = [1.0, 1.0, 2.0, 0.0];
        let est = omp(&y, &s, 3, 0.0).unwrap();
        assert_eq!(est.dropped_columns, 1);
        assert_eq!(est.selected.len(), 2);
        assert!(est.residual_norm < 1e-12);
    }

    #[test]
    fn argument_errors() {
        let s = SignatureMatrix::generate_nondegenerate(8, 4, 1).unwrap();
        assert_eq!(omp(&[0.0; 8], &s, 0, 0.0), Err(RecoveryError::NoIterations));
        assert_eq!(omp(&[0.0; 7], &s, 1, 0.0), Err(RecoveryError::LengthMismatch { signal: 7, rows: 8 }));
        assert!(omp(&[0.0; 8], &s, 1, -1.0).is_err());
        let z = SignatureMatrix::from_rows(&[vec![1, 0], vec![1, 0]]).unwrap();
        assert_eq!(omp(&[1.0, 1.0], &z, 1, 0.0), Err(RecoveryError::ZeroColumn(1)));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let (s, x) = planted(100, 200, 10, 2);
        let y = s.mul_vec(&x).unwrap();
        let est = omp(&y, &s, 4, 0.0).unwrap();
        assert_eq!(est.selected.len(), 4);
        assert_eq!(est.stop, StopReason::IterationCap);
        assert_eq!(est.x_hat.iter().filter(|v| **v != 0.0).count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn residual_is_nonincreasing_and_orthogonal(seed in 0u64..10_000, k in 1usize..14, noise in 0.0f64..0.3) {
            let (s, x) = planted(120, 300, k, seed);
            let mut y = s.mul_vec(&x).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for v in &mut y {
                *v += noise * rng.random_range(-1.0..1.0);
            }
            let est = omp(&y, &s, 20, 0.0).unwrap();
            for w in est.residual_trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            let mut seen = std::collections::HashSet::new();
            prop_assert!(est.selected.iter().all(|i| seen.insert(*i)));
            let fit = s.mul_vec(&est.x_hat).unwrap();
            let res: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
            let yn = norm(&y);
            for &j in &est.selected {
                prop_assert!(dot(&res, s.column(j)).abs() <= 1e-10 * yn * s.column_norm(j));
            }
        }

        #[test]
        fn scaling_is_homogeneous(seed in 0u64..10_000, c in 0.01f64..100.0) {
            let (s, x) = planted(80, 150, 8, seed);
            let mut y = s.mul_vec(&x).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1);
            for v in &mut y {
                *v += 0.1 * rng.random_range(-1.0..1.0);
            }
            let a = omp(&y, &s, 10, 0.0).unwrap();
            let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
            let b = omp(&yc, &s, 10, 0.0).unwrap();
            prop_assert_eq!(&a.selected, &b.selected);
            for (p, q) in a.x_hat.iter().zip(&b.x_hat) {
                prop_assert!((p * c - q).abs() <= 1e-9 * (p * c).abs().max(1e-12));
            }
        }
    }
}
