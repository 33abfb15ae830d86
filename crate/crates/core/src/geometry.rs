//! Floor plane, ceiling LED grid and circular coverage areas.
//!
//! LEDs sit on a cell-centered `n × n` grid at ceiling height `h`; each one
//! illuminates a disk of radius `r` on the floor. A receiver on the floor is
//! covered by LED `i` when its horizontal distance to the LED is at most `r`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("{name} must be {expected}, got {value}")]
    OutOfRange {
        name: &'static str,
        expected: &'static str,
        value: f64,
    },
}

/// A point on the floor plane (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Receiver location. The receiver always lies on the floor (`z = 0`).
pub type UserPosition = Point2;

/// An LED on the ceiling. `index` is the column of the LED in the signature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedPosition {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LedPosition {
    /// Projection of the LED onto the floor plane.
    pub fn horizontal(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn horizontal_distance(&self, u: &UserPosition) -> f64 {
        self.horizontal().distance(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    /// Side length of the square floor (m).
    pub floor_side: f64,
    /// Height of the LED plane above the floor (m).
    pub ceiling_height: f64,
    /// LEDs per side; the scene holds `n_led_per_side²` LEDs.
    pub n_led_per_side: usize,
    /// Radius of each LED's circular footprint on the floor (m).
    pub coverage_radius: f64,
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self {
            floor_side: 50.0,
            ceiling_height: 3.0,
            n_led_per_side: 25,
            coverage_radius: 4.0,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::OutOfRange {
            name,
            expected: "finite and > 0",
            value,
        })
    }
}

impl SceneGeometry {
    pub fn new(
        floor_side: f64,
        ceiling_height: f64,
        n_led_per_side: usize,
        coverage_radius: f64,
    ) -> Result<Self, GeometryError> {
        let geom = Self {
            floor_side,
            ceiling_height,
            n_led_per_side,
            coverage_radius,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        positive("floor_side", self.floor_side)?;
        positive("ceiling_height", self.ceiling_height)?;
        positive("coverage_radius", self.coverage_radius)?;
        if self.n_led_per_side == 0 {
            return Err(GeometryError::OutOfRange {
                name: "n_led_per_side",
                expected: ">= 1",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub fn n_leds(&self) -> usize {
        self.n_led_per_side * self.n_led_per_side
    }

    /// Distance between neighbouring LEDs along a grid axis.
    pub fn spacing(&self) -> f64 {
        self.floor_side / self.n_led_per_side as f64
    }

    pub fn contains(&self, u: &UserPosition) -> bool {
        (0.0..=self.floor_side).contains(&u.x) && (0.0..=self.floor_side).contains(&u.y)
    }

    /// LED positions on a cell-centered grid, row-major in `y` then `x`.
    ///
    /// Coordinates run over `s/2, 3s/2, …, floor_side − s/2` with `s = floor_side / n`.
    pub fn led_grid(&self) -> Vec<LedPosition> {
        let n = self.n_led_per_side;
        let s = self.spacing();
        let coord = |k: usize| (k as f64 + 0.5) * s;
        (0..n * n)
            .map(|index| LedPosition {
                index,
                x: coord(index % n),
                y: coord(index / n),
                z: self.ceiling_height,
            })
            .collect()
    }

    /// Whether `u` lies inside the (closed) coverage disk of `led`.
    pub fn coverage_indicator(&self, led: &LedPosition, u: &UserPosition) -> bool {
        led.horizontal_distance(u) <= self.coverage_radius
    }

    pub fn coverage_vector(&self, leds: &[LedPosition], u: &UserPosition) -> CoverageVector {
        CoverageVector {
            lambda: leds.iter().map(|led| self.coverage_indicator(led, u)).collect(),
        }
    }

    /// Largest number of LEDs covering any floor point, sampled on a uniform
    /// grid of step `resolution` that includes both walls.
    pub fn k_max(&self, leds: &[LedPosition], resolution: f64) -> Result<usize, GeometryError> {
        positive("sample_resolution", resolution)?;
        let index = CoverageIndex::new(self, leds);
        let steps = (self.floor_side / resolution).round() as usize;
        let coord = |k: usize| (k as f64 * resolution).min(self.floor_side);
        let mut best = 0;
        for iy in 0..=steps {
            for ix in 0..=steps {
                let u = Point2::new(coord(ix), coord(iy));
                best = best.max(index.count(&u));
            }
        }
        Ok(best)
    }

    /// `K(u)` sampled on the same grid as [`SceneGeometry::k_max`]; one entry per point.
    pub fn k_map(&self, leds: &[LedPosition], resolution: f64) -> Result<Vec<(Point2, usize)>, GeometryError> {
        positive("sample_resolution", resolution)?;
        let index = CoverageIndex::new(self, leds);
        let steps = (self.floor_side / resolution).round() as usize;
        let coord = |k: usize| (k as f64 * resolution).min(self.floor_side);
        let mut out = Vec::with_capacity((steps + 1) * (steps + 1));
        for iy in 0..=steps {
            for ix in 0..=steps {
                let u = Point2::new(coord(ix), coord(iy));
                out.push((u, index.count(&u)));
            }
        }
        Ok(out)
    }
}

/// Indicator vector λ with `λ_i = 1` iff LED `i` covers the receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageVector {
    pub lambda: Vec<bool>,
}

impl CoverageVector {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Sparsity `K`, the number of covering LEDs.
    pub fn k(&self) -> usize {
        self.lambda.iter().filter(|&&c| c).count()
    }

    /// Indices of covering LEDs in ascending order.
    pub fn support(&self) -> Vec<usize> {
        self.lambda
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }
}

/// Bucket grid over LED horizontal positions so coverage counts only touch
/// LEDs near the query point.
struct CoverageIndex<'a> {
    leds: &'a [LedPosition],
    radius: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> CoverageIndex<'a> {
    fn new(geom: &SceneGeometry, leds: &'a [LedPosition]) -> Self {
        let radius = geom.coverage_radius;
        let cell = radius.max(geom.floor_side / 256.0);
        let cols = ((geom.floor_side / cell).ceil() as usize).max(1);
        let rows = cols;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (k, led) in leds.iter().enumerate() {
            let (cx, cy) = Self::cell_of(cell, cols, rows, led.x, led.y);
            buckets[cy * cols + cx].push(k);
        }
        Self {
            leds,
            radius,
            cell,
            cols,
            rows,
            buckets,
        }
    }

    fn cell_of(cell: f64, cols: usize, rows: usize, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x / cell).floor().max(0.0) as usize).min(cols - 1);
        let cy = ((y / cell).floor().max(0.0) as usize).min(rows - 1);
        (cx, cy)
    }

    fn count(&self, u: &Point2) -> usize {
        let (cx, cy) = Self::cell_of(self.cell, self.cols, self.rows, u.x, u.y);
        let mut k = 0;
        for by in cy.saturating_sub(1)..=(cy + 1).min(self.rows - 1) {
            for bx in cx.saturating_sub(1)..=(cx + 1).min(self.cols - 1) {
                k += self.buckets[by * self.cols + bx]
                    .iter()
                    .filter(|&&i| self.leds[i].horizontal_distance(u) <= self.radius)
                    .count();
            }
        }
        k
    }
}
