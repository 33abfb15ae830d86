//! Receiver position from a recovered gain vector.
//!
//! The strongest detected LED seeds the estimate. The next strongest entries
//! (up to `K_max` in total) are accepted one at a time if they lie closer than
//! `d_th` to the running estimate, which is the mean of the accepted LED
//! positions.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::str::FromStr;
use thiserror::Error;

use crate::geometry::{LedPosition, Point2, SceneGeometry};

#[derive(Debug, Error, PartialEq)]
pub enum PositioningError {
    #[error("no LED detected")]
    NoDetection,
    #[error("proximity estimate needs at least one LED")]
    EmptySet,
    #[error("estimate has {x_hat} entries but there are {leds} LEDs")]
    LengthMismatch { x_hat: usize, leds: usize },
    #[error("k_max must be >= 1")]
    ZeroKMax,
    #[error("d_th must be finite and > 0, got {0}")]
    BadThreshold(f64),
}

/// Component-wise mean of LED positions.
pub fn prox(points: &[Point2]) -> Result<Point2, PositioningError> {
    if points.is_empty() {
        return Err(PositioningError::EmptySet);
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok(Point2::new(sx / n, sy / n))
}

/// Final position estimator applied to the accepted set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Mean of accepted LED positions.
    #[default]
    Algorithm1,
    /// Centroid of the union of the accepted LEDs' coverage disks, clipped to the floor.
    AreaCentroid,
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "algorithm1" => Ok(Self::Algorithm1),
            "area-centroid" => Ok(Self::AreaCentroid),
            other => Err(format!("unknown estimator `{other}` (expected algorithm1 | area-centroid)")),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Algorithm1 => "algorithm1",
            Self::AreaCentroid => "area-centroid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatingParams {
    /// Number of strongest entries examined.
    pub k_max: usize,
    /// Acceptance radius around the running estimate (strict).
    pub d_th: f64,
    /// Entries at or below this value are not detections.
    pub min_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionEstimate {
    pub u_hat: Point2,
    /// Accepted LED indices in acceptance order.
    pub accepted: Vec<usize>,
    /// Candidate indices examined, strongest first.
    pub candidates: Vec<usize>,
}

/// Candidate indices: entries above `min_gain`, sorted by descending value
/// with ties broken by ascending index.
fn ranked_candidates(x_hat: &[f64], min_gain: f64, k_max: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x_hat.len()).filter(|&i| x_hat[i] > min_gain).collect();
    idx.sort_by(|&a, &b| {
        x_hat[b]
            .partial_cmp(&x_hat[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k_max);
    idx
}

pub fn recover_position(
    x_hat: &[f64],
    leds: &[LedPosition],
    params: &GatingParams,
) -> Result<PositionEstimate, PositioningError> {
    if x_hat.len() != leds.len() {
        return Err(PositioningError::LengthMismatch { x_hat: x_hat.len(), leds: leds.len() });
    }
    if params.k_max == 0 {
        return Err(PositioningError::ZeroKMax);
    }
    if !(params.d_th.is_finite() && params.d_th > 0.0) {
        return Err(PositioningError::BadThreshold(params.d_th));
    }
    let candidates = ranked_candidates(x_hat, params.min_gain, params.k_max);
    let Some(&first) = candidates.first() else {
        return Err(PositioningError::NoDetection);
    };

    let mut accepted = vec![first];
    let mut sum = leds[first].horizontal();
    let mut u_hat = sum;
    for &i in &candidates[1..] {
        let p = leds[i].horizontal();
        if p.distance(&u_hat) < params.d_th {
            accepted.push(i);
            sum.x += p.x;
            sum.y += p.y;
            let n = accepted.len() as f64;
            u_hat = Point2::new(sum.x / n, sum.y / n);
        }
    }
    Ok(PositionEstimate {
        u_hat,
        accepted,
        candidates,
    })
}

/// Centroid of the union of coverage disks of `support`, clipped to the floor,
/// integrated on a cell-centred grid of step `resolution`.
pub fn area_centroid(
    geom: &SceneGeometry,
    leds: &[LedPosition],
    support: &[usize],
    resolution: f64,
) -> Result<Point2, PositioningError> {
    if support.is_empty() {
        return Err(PositioningError::EmptySet);
    }
    let r = geom.coverage_radius;
    let r2 = r * r;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &i in support {
        x0 = x0.min(leds[i].x - r);
        y0 = y0.min(leds[i].y - r);
        x1 = x1.max(leds[i].x + r);
        y1 = y1.max(leds[i].y + r);
    }
    x0 = x0.max(0.0);
    y0 = y0.max(0.0);
    x1 = x1.min(geom.floor_side);
    y1 = y1.min(geom.floor_side);
    let nx = ((x1 - x0) / resolution).ceil().max(1.0) as usize;
    let ny = ((y1 - y0) / resolution).ceil().max(1.0) as usize;
    let (dx, dy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
    for iy in 0..ny {
        let y = y0 + (iy as f64 + 0.5) * dy;
        for ix in 0..nx {
            let x = x0 + (ix as f64 + 0.5) * dx;
            let inside = support.iter().any(|&i| {
                let (ex, ey) = (leds[i].x - x, leds[i].y - y);
                ex * ex + ey * ey <= r2
            });
            if inside {
                sx += x;
                sy += y;
                count += 1;
            }
        }
    }
    if count == 0 {
        // Disks thinner than one cell: fall back to the LED mean.
        let pts: Vec<Point2> = support.iter().map(|&i| leds[i].horizontal()).collect();
        return prox(&pts);
    }
    Ok(Point2::new(sx / count as f64, sy / count as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn leds_at(pts: &[(f64, f64)]) -> Vec<LedPosition> {
        pts.iter()
            .enumerate()
            .map(|(index, &(x, y))| LedPosition { index, x, y, z: 3.0 })
            .collect()
    }

    fn gate(k_max: usize, d_th: f64) -> GatingParams {
        GatingParams { k_max, d_th, min_gain: 0.0 }
    }

    #[test]
    fn prox_cases() {
        assert_eq!(prox(&[Point2::new(10.0, 10.0)]).unwrap(), Point2::new(10.0, 10.0));
        assert_eq!(prox(&[Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)]).unwrap(), Point2::new(1.0, 0.0));
        let sq = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].map(|(x, y)| Point2::new(x, y));
        assert_eq!(prox(&sq).unwrap(), Point2::new(0.5, 0.5));
        assert_eq!(prox(&[]), Err(PositioningError::EmptySet));
    }

    #[test]
    fn single_detection() {
        let leds = leds_at(&[(1.0, 1.0), (3.0, 1.0), (5.0, 5.0)]);
        let est = recover_position(&[0.0, 0.0, 2.0], &leds, &gate(3, 4.0)).unwrap();
        assert_eq!(est.u_hat, Point2::new(5.0, 5.0));
        assert_eq!(est.accepted, vec![2]);
    }

    #[test]
    fn equal_gain_neighbours_give_midpoint() {
        let leds = leds_at(&[(1.0, 1.0), (3.0, 1.0), (40.0, 40.0)]);
        let est = recover_position(&[1.0, 1.0, 0.0], &leds, &gate(3, 4.0)).unwrap();
        assert_eq!(est.accepted, vec![0, 1]);
        assert_eq!(est.u_hat, Point2::new(2.0, 1.0));
    }

    #[test]
    fn distant_spurious_entry_is_rejected() {
        let leds = leds_at(&[(1.0, 1.0), (3.0, 1.0), (40.0, 40.0)]);
        let est = recover_position(&[1.0, 0.5, 0.8], &leds, &gate(3, 4.0)).unwrap();
        assert_eq!(est.candidates, vec![0, 2, 1]);
        assert_eq!(est.accepted, vec![0, 1]);
    }

    #[test]
    fn threshold_is_strict() {
        let leds = leds_at(&[(0.0, 0.0), (4.0, 0.0)]);
        let est = recover_position(&[1.0, 0.5], &leds, &gate(2, 4.0)).unwrap();
        assert_eq!(est.accepted, vec![0]);
    }

    #[test]
    fn k_max_limits_candidates_and_zeros_never_count() {
        let leds = leds_at(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let est = recover_position(&[4.0, 3.0, 2.0, 1.0], &leds, &gate(2, 10.0)).unwrap();
        assert_eq!(est.accepted, vec![0, 1]);
        let est = recover_position(&[4.0, 0.0, -1.0, 0.0], &leds, &gate(4, 10.0)).unwrap();
        assert_eq!(est.accepted, vec![0]);
        assert_eq!(
            recover_position(&[0.0, 0.0, -1.0, 0.0], &leds, &gate(4, 10.0)),
            Err(PositioningError::NoDetection)
        );
    }

    #[test]
    fn ties_break_by_ascending_index() {
        let leds = leds_at(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let est = recover_position(&[1.0, 1.0, 1.0], &leds, &gate(3, 10.0)).unwrap();
        assert_eq!(est.candidates, vec![0, 1, 2]);
    }

    #[test]
    fn argument_errors() {
        let leds = leds_at(&[(0.0, 0.0)]);
        assert!(recover_position(&[1.0, 2.0], &leds, &gate(1, 1.0)).is_err());
        assert_eq!(recover_position(&[1.0], &leds, &gate(0, 1.0)), Err(PositioningError::ZeroKMax));
        assert!(recover_position(&[1.0], &leds, &gate(1, 0.0)).is_err());
    }

    #[test]
    fn true_support_reproduces_proximity_oracle() {
        let geom = SceneGeometry::default();
        let leds = geom.led_grid();
        let u = Point2::new(20.3, 31.7);
        let cov = geom.coverage_vector(&leds, &u);
        let ch = crate::channel::ChannelParams::default();
        let x = crate::signal::compose_x(&cov, &ch.gain_vector(&leds, &u)).unwrap();
        let est = recover_position(&x.0, &leds, &gate(14, 8.0)).unwrap();
        let mut acc = est.accepted.clone();
        acc.sort();
        assert_eq!(acc, cov.support());
        let pts: Vec<Point2> = cov.support().iter().map(|&i| leds[i].horizontal()).collect();
        assert_eq!(est.u_hat, prox(&pts).unwrap());
    }

    #[test]
    fn area_centroid_symmetric_cases() {
        let geom = SceneGeometry::new(20.0, 3.0, 4, 2.0).unwrap();
        let leds = geom.led_grid();
        // Single interior disk: centroid is the LED itself.
        let c = area_centroid(&geom, &leds, &[5], 0.01).unwrap();
        assert!(c.distance(&leds[5].horizontal()) < 1e-6);
        // Two disks: midpoint by symmetry.
        let c = area_centroid(&geom, &leds, &[5, 6], 0.01).unwrap();
        let mid = prox(&[leds[5].horizontal(), leds[6].horizontal()]).unwrap();
        assert!(c.distance(&mid) < 1e-6);
        assert!(area_centroid(&geom, &leds, &[], 0.1).is_err());
    }

    #[test]
    fn area_centroid_is_pulled_inward_at_walls() {
        // A disk clipped by the wall x = 0 has its centroid shifted to x > led.x.
        let geom = SceneGeometry::new(20.0, 3.0, 10, 3.0).unwrap();
        let leds = geom.led_grid();
        let c = area_centroid(&geom, &leds, &[0], 0.01).unwrap();
        assert!(c.x > leds[0].x && c.y > leds[0].y);
    }

    proptest! {
        #[test]
        fn estimate_lies_in_hull_of_accepted(vals in proptest::collection::vec(-1.0f64..1.0, 25), d_th in 0.5f64..6.0, k in 1usize..25) {
            let geom = SceneGeometry::new(10.0, 3.0, 5, 2.0).unwrap();
            let leds = geom.led_grid();
            match recover_position(&vals, &leds, &gate(k, d_th)) {
                Ok(est) => {
                    prop_assert!(!est.accepted.is_empty());
                    let xs = est.accepted.iter().map(|&i| leds[i].x);
                    let ys = est.accepted.iter().map(|&i| leds[i].y);
                    let (lo_x, hi_x) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                    let (lo_y, hi_y) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                    prop_assert!(est.u_hat.x >= lo_x - 1e-12 && est.u_hat.x <= hi_x + 1e-12);
                    prop_assert!(est.u_hat.y >= lo_y - 1e-12 && est.u_hat.y <= hi_y + 1e-12);
                    // Deterministic.
                    prop_assert_eq!(recover_position(&vals, &leds, &gate(k, d_th)).unwrap(), est);
                }
                Err(e) => {
                    prop_assert_eq!(e, PositioningError::NoDetection);
                    prop_assert!(vals.iter().all(|&v| v <= 0.0));
                }
            }
        }
    }
}
