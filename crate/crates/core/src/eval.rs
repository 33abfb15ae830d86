//! Monte-Carlo evaluation: random receivers, the full estimation pipeline per
//! receiver, and MPE / SRE aggregation over parameter sweeps.
//!
//! Results are bit-identical for any thread count. Every trial draws from
//! seeds derived from the master seed and its trial index, trials are
//! collected in index order, and sums are reduced sequentially in that order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelParams};
use crate::config::{ConfigError, RunConfig, SweepAxis, UdSampling};
use crate::geometry::{GeometryError, LedPosition, Point2, SceneGeometry};
use crate::positioning::{self, Estimator, GatingParams, PositioningError};
use crate::recovery::{self, RecoveryError};
use crate::seeds::{derive_seed, rng_from_seed, Stream};
use crate::signal::{self, SignalError, SignatureMatrix};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Positioning(#[from] PositioningError),
    #[error("receiver is not covered by any LED")]
    Uncovered,
}

/// Cardinality of the symmetric difference of two index sets.
pub fn sre(true_support: &[usize], est_support: &[usize]) -> usize {
    let a: BTreeSet<_> = true_support.iter().collect();
    let b: BTreeSet<_> = est_support.iter().collect();
    a.symmetric_difference(&b).count()
}

/// Proximity estimate from the true covering set (perfect detection).
pub fn min_mpe_oracle(geom: &SceneGeometry, leds: &[LedPosition], u: &Point2) -> Result<Point2, EvalError> {
    let pts: Vec<Point2> = leds
        .iter()
        .filter(|l| geom.coverage_indicator(l, u))
        .map(LedPosition::horizontal)
        .collect();
    if pts.is_empty() {
        return Err(EvalError::Uncovered);
    }
    Ok(positioning::prox(&pts)?)
}

/// Oracle position error on a uniform grid over the floor; `None` where uncovered.
pub fn oracle_map(
    geom: &SceneGeometry,
    leds: &[LedPosition],
    resolution: f64,
) -> Result<Vec<(Point2, Option<f64>)>, EvalError> {
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(GeometryError::OutOfRange {
            name: "sample_resolution",
            expected: "finite and > 0",
            value: resolution,
        }
        .into());
    }
    let steps = (geom.floor_side / resolution).round() as usize;
    let coord = |k: usize| (k as f64 * resolution).min(geom.floor_side);
    let points: Vec<Point2> = (0..=steps)
        .flat_map(|iy| (0..=steps).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| Point2::new(coord(ix), coord(iy)))
        .collect();
    Ok(points
        .into_par_iter()
        .map(|u| {
            let err = min_mpe_oracle(geom, leds, &u).ok().map(|e| e.distance(&u));
            (u, err)
        })
        .collect())
}

/// Everything a trial needs, resolved from a [`RunConfig`] at one sweep point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: SceneGeometry,
    pub channel: ChannelParams,
    pub leds: Vec<LedPosition>,
    pub signatures: SignatureMatrix,
    pub snr_db: f64,
    pub gating: GatingParams,
    pub residual_tol: Option<f64>,
    pub estimator: Estimator,
    pub area_resolution: f64,
    pub ud_margin: f64,
    pub support_threshold: f64,
}

impl Scenario {
    pub fn build(cfg: &RunConfig) -> Result<Self, EvalError> {
        cfg.validate()?;
        let geometry = cfg.scene;
        geometry.validate()?;
        cfg.channel.validate()?;
        let leds = geometry.led_grid();
        let k_max = match cfg.algorithm.k_max {
            Some(k) => k,
            None => geometry.k_max(&leds, cfg.algorithm.k_max_resolution)?.max(1),
        };
        let d_th = cfg
            .algorithm
            .d_th
            .unwrap_or(cfg.algorithm.d_th_factor * geometry.coverage_radius);
        let ud_margin = cfg.experiment.ud_margin.unwrap_or(geometry.coverage_radius);
        if !(ud_margin >= 0.0 && 2.0 * ud_margin < geometry.floor_side) {
            return Err(ConfigError::OutOfRange {
                key: "experiment.ud_margin",
                value: ud_margin.to_string(),
                expected: "in [0, floor_side/2); reduce coverage_radius or set an explicit margin",
            }
            .into());
        }
        let sig_seed = derive_seed(cfg.experiment.master_seed, Stream::Signatures, 0, 0);
        let signatures = SignatureMatrix::generate_nondegenerate(cfg.signal.m, geometry.n_leds(), sig_seed)?;
        Ok(Self {
            geometry,
            channel: cfg.channel,
            leds,
            signatures,
            snr_db: cfg.signal.snr_db,
            gating: GatingParams {
                k_max,
                d_th,
                min_gain: cfg.algorithm.support_threshold,
            },
            residual_tol: cfg.algorithm.residual_tol,
            estimator: cfg.algorithm.estimator,
            area_resolution: cfg.algorithm.area_resolution,
            ud_margin,
            support_threshold: cfg.algorithm.support_threshold,
        })
    }

    /// Uniform receiver position inside the floor minus the wall margin.
    pub fn place_receiver(&self, seed: u64) -> Point2 {
        let mut rng = rng_from_seed(seed);
        let span = self.geometry.floor_side - 2.0 * self.ud_margin;
        let tx: f64 = rng.random();
        let ty: f64 = rng.random();
        Point2::new(self.ud_margin + tx * span, self.ud_margin + ty * span)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub signatures: u64,
    pub placement: u64,
    pub noise: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoDetection {
    /// No LED covers the receiver.
    Uncovered,
    /// The recovered vector had no positive entry.
    EmptyEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub true_u: Point2,
    pub true_k: usize,
    pub true_support: Vec<usize>,
    pub est_u: Option<Point2>,
    pub position_error: Option<f64>,
    pub sre: Option<usize>,
    pub accepted: Vec<usize>,
    pub oracle_error: Option<f64>,
    pub no_detection: Option<NoDetection>,
    pub noise_variance: f64,
    pub omp_iterations: usize,
    pub dropped_columns: usize,
    pub seeds: TrialSeeds,
}

/// Full pipeline for one receiver.
pub fn run_trial(sc: &Scenario, ud_seed: u64, noise_seed: u64) -> Result<TrialResult, EvalError> {
    let u = sc.place_receiver(ud_seed);
    let coverage = sc.geometry.coverage_vector(&sc.leds, &u);
    let true_support = coverage.support();
    let seeds = TrialSeeds {
        signatures: sc.signatures.seed(),
        placement: ud_seed,
        noise: noise_seed,
    };
    let mut result = TrialResult {
        true_u: u,
        true_k: true_support.len(),
        true_support,
        est_u: None,
        position_error: None,
        sre: None,
        accepted: Vec::new(),
        oracle_error: None,
        no_detection: None,
        noise_variance: 0.0,
        omp_iterations: 0,
        dropped_columns: 0,
        seeds,
    };
    if result.true_k == 0 {
        result.no_detection = Some(NoDetection::Uncovered);
        return Ok(result);
    }
    result.oracle_error = Some(min_mpe_oracle(&sc.geometry, &sc.leds, &u)?.distance(&u));

    let alpha = sc.channel.gain_vector(&sc.leds, &u);
    let x = signal::compose_x(&coverage, &alpha)?;
    let received = match signal::synthesize_at_snr(&sc.signatures, &x, sc.snr_db, noise_seed) {
        Ok(r) => r,
        // Covered but outside every FOV: nothing reaches the receiver.
        Err(SignalError::ZeroSignal) => {
            result.no_detection = Some(NoDetection::EmptyEstimate);
            return Ok(result);
        }
        Err(e) => return Err(e.into()),
    };
    result.noise_variance = received.noise_variance;
    let tol = sc
        .residual_tol
        .unwrap_or_else(|| (sc.signatures.rows() as f64 * received.noise_variance).sqrt());
    let est = recovery::omp(&received.y, &sc.signatures, sc.gating.k_max, tol)?;
    result.omp_iterations = est.iterations();
    result.dropped_columns = est.dropped_columns;

    let pos = match positioning::recover_position(&est.x_hat, &sc.leds, &sc.gating) {
        Ok(p) => p,
        Err(PositioningError::NoDetection) => {
            result.no_detection = Some(NoDetection::EmptyEstimate);
            return Ok(result);
        }
        Err(e) => return Err(e.into()),
    };
    let u_hat = match sc.estimator {
        Estimator::Algorithm1 => pos.u_hat,
        Estimator::AreaCentroid => {
            positioning::area_centroid(&sc.geometry, &sc.leds, &pos.accepted, sc.area_resolution)?
        }
    };
    result.sre = Some(sre(&result.true_support, &pos.accepted));
    result.position_error = Some(u_hat.distance(&u));
    result.est_u = Some(u_hat);
    result.accepted = pos.accepted;
    Ok(result)
}

/// Aggregated metrics at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub mpe: f64,
    pub mpe_stderr: f64,
    pub mean_sre: f64,
    pub sre_stderr: f64,
    pub min_mpe: f64,
    pub no_detection_rate: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Per-point trials, in trial-index order.
    #[serde(skip)]
    pub trials: Vec<Vec<TrialResult>>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate(axis_value: f64, trials: &[TrialResult]) -> SweepPoint {
    let errors: Vec<f64> = trials.iter().filter_map(|t| t.position_error).collect();
    let sres: Vec<f64> = trials.iter().filter_map(|t| t.sre.map(|s| s as f64)).collect();
    let oracle: Vec<f64> = trials.iter().filter_map(|t| t.oracle_error).collect();
    let (mpe, mpe_stderr) = mean_and_stderr(&errors);
    let (mean_sre, sre_stderr) = mean_and_stderr(&sres);
    let (min_mpe, _) = mean_and_stderr(&oracle);
    let failed = trials.iter().filter(|t| t.no_detection.is_some()).count();
    SweepPoint {
        axis_value,
        mpe,
        mpe_stderr,
        mean_sre,
        sre_stderr,
        min_mpe,
        no_detection_rate: failed as f64 / trials.len().max(1) as f64,
        n_trials: trials.len(),
    }
}

/// Seeds for trial `trial` at sweep point `point`.
pub fn trial_seeds(master: u64, sampling: UdSampling, point: usize, trial: usize) -> (u64, u64) {
    let outer = match sampling {
        UdSampling::Shared => 0,
        UdSampling::Independent => point as u64 + 1,
    };
    (
        derive_seed(master, Stream::Placement, outer, trial as u64),
        derive_seed(master, Stream::Noise, outer, trial as u64),
    )
}

/// Runs `n_ud` trials on one scenario in parallel; output is in trial order.
pub fn run_point(sc: &Scenario, master: u64, sampling: UdSampling, point: usize, n_ud: usize) -> Result<Vec<TrialResult>, EvalError> {
    (0..n_ud)
        .into_par_iter()
        .map(|t| {
            let (ud, noise) = trial_seeds(master, sampling, point, t);
            run_trial(sc, ud, noise)
        })
        .collect()
}

/// Sweeps `axis` over `values` with everything else taken from `cfg`.
pub fn run_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64], n_ud: usize) -> Result<SweepResult, EvalError> {
    if n_ud == 0 || values.is_empty() {
        return Err(ConfigError::OutOfRange {
            key: "experiment",
            value: format!("n_ud={n_ud}, {} values", values.len()),
            expected: "n_ud >= 1 and at least one sweep value",
        }
        .into());
    }
    let mut base = cfg.clone();
    base.experiment.axis = axis;
    base.experiment.values = Some(values.to_vec());
    base.experiment.n_ud = n_ud;
    base.validate()?;

    let mut points = Vec::with_capacity(values.len());
    let mut trials = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let sc = Scenario::build(&base.at_axis_value(v))?;
        let t = run_point(&sc, base.experiment.master_seed, base.experiment.ud_sampling, i, n_ud)?;
        points.push(aggregate(v, &t));
        trials.push(t);
    }
    Ok(SweepResult { axis, points, trials })
}
