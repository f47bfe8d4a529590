//! Planar positions, rectangular zones and the hierarchical zone partition.
//!
//! All nodes agree on one partition rule: splits happen at the exact midpoint,
//! the axis alternates per depth starting from a globally agreed first axis,
//! and a point lying on a split line belongs to the lower/left half.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the network area, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Bearing from `self` towards `other`, in radians within (-pi, pi].
    pub fn bearing_to(&self, other: &Position) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Split direction. A vertical cut divides the x-range, a horizontal cut the y-range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Vertical,
    Horizontal,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Vertical => Axis::Horizontal,
            Axis::Horizontal => Axis::Vertical,
        }
    }

    /// Axis used at split depth `depth` when the first split uses `self`.
    pub fn at_depth(self, depth: u32) -> Axis {
        if depth.is_multiple_of(2) {
            self
        } else {
            self.other()
        }
    }
}

/// Axis-aligned, strictly non-empty rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    min: Position,
    max: Position,
}

impl Zone {
    pub fn new(min: Position, max: Position) -> Result<Zone> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Zone("corners must be finite".into()));
        }
        if min.x >= max.x || min.y >= max.y {
            return Err(Error::Zone(format!(
                "empty rectangle ({}, {})-({}, {})",
                min.x, min.y, max.x, max.y
            )));
        }
        Ok(Zone { min, max })
    }

    /// Zone spanning `(0,0)`-`(width,height)`.
    pub fn with_size(width: f64, height: f64) -> Result<Zone> {
        Zone::new(Position::new(0.0, 0.0), Position::new(width, height))
    }

    pub fn min_corner(&self) -> Position {
        self.min
    }

    pub fn max_corner(&self) -> Position {
        self.max
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Position {
        Position::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    pub fn diagonal(&self) -> f64 {
        self.min.distance(&self.max)
    }

    /// Closed containment.
    pub fn contains(&self, p: &Position) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn corners(&self) -> [Position; 4] {
        [
            self.min,
            Position::new(self.max.x, self.min.y),
            self.max,
            Position::new(self.min.x, self.max.y),
        ]
    }

    /// Midpoint split. Returns (lower/left, upper/right).
    pub fn split(&self, axis: Axis) -> (Zone, Zone) {
        match axis {
            Axis::Vertical => {
                let mid = (self.min.x + self.max.x) / 2.0;
                (
                    Zone {
                        min: self.min,
                        max: Position::new(mid, self.max.y),
                    },
                    Zone {
                        min: Position::new(mid, self.min.y),
                        max: self.max,
                    },
                )
            }
            Axis::Horizontal => {
                let mid = (self.min.y + self.max.y) / 2.0;
                (
                    Zone {
                        min: self.min,
                        max: Position::new(self.max.x, mid),
                    },
                    Zone {
                        min: Position::new(self.min.x, mid),
                        max: self.max,
                    },
                )
            }
        }
    }

    /// True when `p` falls in the lower/left half of a split along `axis`.
    /// Points on the split line go to the lower/left half.
    fn in_lower_half(&self, p: &Position, axis: Axis) -> bool {
        match axis {
            Axis::Vertical => p.x <= (self.min.x + self.max.x) / 2.0,
            Axis::Horizontal => p.y <= (self.min.y + self.max.y) / 2.0,
        }
    }

    /// Splits along `axis` and returns (half containing `p`, sibling half).
    pub fn halves_by(&self, p: &Position, axis: Axis) -> (Zone, Zone) {
        let (lo, hi) = self.split(axis);
        if self.in_lower_half(p, axis) {
            (lo, hi)
        } else {
            (hi, lo)
        }
    }
}

/// Number of partitions and the orientation of the first cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub partitions: u32,
    pub first_axis: Axis,
}

/// Partition count needed so that the destination zone is expected to hold at
/// most `k` nodes: `ceil(log2(rho * G / k))`, clamped to zero when the ratio is
/// at most one.
pub fn compute_h(rho: f64, area: f64, k: u32) -> Result<u32> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    if !area.is_finite() || area <= 0.0 {
        return Err(Error::param("G", format!("must be positive, got {area}")));
    }
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let ratio = rho * area / f64::from(k);
    if ratio <= 1.0 {
        return Ok(0);
    }
    let mut h = ratio.log2().ceil() as u32;
    // log2 may land a hair off an exact power of two; settle on the smallest h
    // with 2^h >= ratio.
    while h > 0 && 2f64.powi(h as i32 - 1) >= ratio {
        h -= 1;
    }
    while 2f64.powi(h as i32) < ratio {
        h += 1;
    }
    Ok(h)
}

/// Destination zone: `h` alternating midpoint splits of `area`, keeping the half
/// that contains `dest` each time.
pub fn compute_dest_zone(area: &Zone, dest: &Position, h: u32, first_axis: Axis) -> Result<Zone> {
    if !area.contains(dest) {
        return Err(Error::param(
            "dest",
            format!("({}, {}) lies outside the network area", dest.x, dest.y),
        ));
    }
    let mut zone = *area;
    for depth in 0..h {
        zone = zone.halves_by(dest, first_axis.at_depth(depth)).0;
    }
    Ok(zone)
}

/// Outcome of separating a forwarder from the destination zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Separation {
    /// The sibling half that holds the destination zone's center.
    Other { zone: Zone, splits_used: u32 },
    /// The forwarder already sits inside the destination zone.
    InsideDestination,
}

/// Upper bound on splits needed to separate a point from `dest_zone` inside `current`.
pub fn max_separation_splits(current: &Zone, dest_zone: &Zone) -> u32 {
    (current.area() / dest_zone.area()).log2().ceil().max(0.0) as u32
}

/// Splits the half containing `self_pos` until it no longer holds the center of
/// `dest_zone`, then returns the sibling half.
pub fn separate(current: &Zone, self_pos: &Position, dest_zone: &Zone, first_axis: Axis) -> Result<Separation> {
    if dest_zone.contains(self_pos) {
        return Ok(Separation::InsideDestination);
    }
    let target = dest_zone.center();
    let mut zone = *current;
    // Each split halves the zone; f64 cannot keep halving meaningfully past this.
    for depth in 0..256u32 {
        let axis = first_axis.at_depth(depth);
        let (mine, sibling) = zone.halves_by(self_pos, axis);
        if zone.halves_by(&target, axis).0 != mine {
            return Ok(Separation::Other {
                zone: sibling,
                splits_used: depth + 1,
            });
        }
        zone = mine;
    }
    Err(Error::Zone(
        "forwarder position cannot be separated from the destination zone".into(),
    ))
}

/// Uniform position strictly inside `zone`.
pub fn random_position_in<R: Rng + ?Sized>(zone: &Zone, rng: &mut R) -> Position {
    let mut open_unit = || loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    };
    let mut draw = |lo: f64, span: f64| loop {
        let v = lo + open_unit() * span;
        if v > lo && v < lo + span {
            return v;
        }
    };
    let x = draw(zone.min.x, zone.width());
    let y = draw(zone.min.y, zone.height());
    Position::new(x, y)
}
