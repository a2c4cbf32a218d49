//! Geometric core: local coordinates, directed locations, the semantic map and
//! ground-truth descriptor generation.
//!
//! Angles are in degrees, measured counter-clockwise from the +x (east) axis.
//! With that convention the left view of a location with heading `h` points
//! along `h + 90` and the right view along `h - 90`.

mod bsd;
mod geometry;
mod projection;
mod sector;

pub use bsd::reverse_bsd;
pub use bsd::{Bsd, BsdTable};
pub use geometry::{point_in_polygon, polygon_area, segments_intersect};
pub use projection::{project_to_local, LocalProjection, EARTH_RADIUS_M};
pub use sector::{
    compute_bsd_table, gap_bit, gap_ray_mask, ground_truth_bsd, junc_bit, sector_contains,
    BsdConfig, SectorSpec, View,
};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::MapError;

/// A position in meters relative to the map origin (x east, y north).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &GeoPoint) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Direction from `self` towards `other`, in [0, 360).
    pub fn bearing_to(&self, other: &GeoPoint) -> f64 {
        normalize_degrees((other.y - self.y).atan2(other.x - self.x).to_degrees())
    }

    /// Point reached by travelling `dist` meters along `bearing`.
    pub fn offset(&self, bearing: f64, dist: f64) -> GeoPoint {
        let r = bearing.to_radians();
        GeoPoint::new(self.x + dist * r.cos(), self.y + dist * r.sin())
    }

    pub fn lerp(&self, other: &GeoPoint, t: f64) -> GeoPoint {
        GeoPoint::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Wraps an angle into [0, 360).
pub fn normalize_degrees(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    // rem_euclid can return 360.0 for tiny negative inputs
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Absolute value of the smallest angle between two directions, in [0, 180].
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = normalize_degrees(a - b);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Index of a directed location; also its position in every per-location table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LocationId(pub u32);

impl LocationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of an undirected road sample point. Several directed locations share one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PointId(pub u32);

impl PointId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A road sample point together with a travel heading along the road.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectedLocation {
    pub id: LocationId,
    pub point: PointId,
    pub position: GeoPoint,
    /// Front-facing direction, normalized to [0, 360).
    pub heading: f64,
}

impl DirectedLocation {
    pub fn new(id: LocationId, point: PointId, position: GeoPoint, heading: f64) -> Self {
        Self {
            id,
            point,
            position,
            heading: normalize_degrees(heading),
        }
    }

    /// The same place facing the opposite way.
    pub fn reversed(&self, id: LocationId) -> Self {
        Self::new(id, self.point, self.position, self.heading + 180.0)
    }
}

/// A closed building footprint. The ring is stored without repeating the first vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Building {
    ring: Vec<GeoPoint>,
    min: GeoPoint,
    max: GeoPoint,
}

impl Building {
    /// Accepts rings with or without a repeated closing vertex.
    pub fn new(mut ring: Vec<GeoPoint>) -> Result<Self, MapError> {
        if ring.len() >= 2 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(MapError::InvalidBuilding(format!(
                "ring has {} distinct vertices",
                ring.len()
            )));
        }
        if let Some(p) = ring.iter().find(|p| !p.is_finite()) {
            return Err(MapError::NonFinite(format!(
                "building vertex ({}, {})",
                p.x, p.y
            )));
        }
        let mut min = ring[0];
        let mut max = ring[0];
        for p in &ring {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Ok(Self { ring, min, max })
    }

    pub fn ring(&self) -> &[GeoPoint] {
        &self.ring
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.ring).abs()
    }

    /// Ring edges as point pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        let n = self.ring.len();
        (0..n).map(move |i| (self.ring[i], self.ring[(i + 1) % n]))
    }

    /// True if the bounding box comes within `radius` of `center`.
    pub fn near(&self, center: &GeoPoint, radius: f64) -> bool {
        let dx = (self.min.x - center.x).max(0.0).max(center.x - self.max.x);
        let dy = (self.min.y - center.y).max(0.0).max(center.y - self.max.y);
        dx * dx + dy * dy <= radius * radius
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        point_in_polygon(p, &self.ring)
    }
}

/// Buildings with an absolute area below this are treated as degenerate.
pub const DEGENERATE_AREA_M2: f64 = 1e-6;

/// Semantic content of the vector map used to derive descriptors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SemanticMap {
    junctions: Vec<GeoPoint>,
    buildings: Vec<Building>,
    roads: Vec<Vec<GeoPoint>>,
    degenerate_buildings: usize,
}

impl SemanticMap {
    /// Degenerate (zero-area) footprints are dropped and counted.
    pub fn new(
        junctions: Vec<GeoPoint>,
        buildings: Vec<Building>,
        roads: Vec<Vec<GeoPoint>>,
    ) -> Self {
        let before = buildings.len();
        let buildings: Vec<Building> = buildings
            .into_iter()
            .filter(|b| b.area() >= DEGENERATE_AREA_M2)
            .collect();
        let degenerate_buildings = before - buildings.len();
        if degenerate_buildings > 0 {
            log::warn!("ignored {degenerate_buildings} degenerate building polygon(s)");
        }
        Self {
            junctions,
            buildings,
            roads,
            degenerate_buildings,
        }
    }

    pub fn junctions(&self) -> &[GeoPoint] {
        &self.junctions
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn roads(&self) -> &[Vec<GeoPoint>] {
        &self.roads
    }

    pub fn degenerate_buildings(&self) -> usize {
        self.degenerate_buildings
    }
}
