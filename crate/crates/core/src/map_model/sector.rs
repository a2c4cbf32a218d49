use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    angular_difference, segments_intersect, Bsd, BsdTable, Building, DirectedLocation, GeoPoint,
    SemanticMap,
};
use crate::error::MapError;

/// Viewing direction relative to a location's heading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum View {
    Front,
    Back,
    Left,
    Right,
}

impl View {
    pub const ALL: [View; 4] = [View::Front, View::Back, View::Left, View::Right];

    /// Offset of the view axis from the heading, in degrees.
    pub fn axis_offset(self) -> f64 {
        match self {
            View::Front => 0.0,
            View::Back => 180.0,
            View::Left => 90.0,
            View::Right => -90.0,
        }
    }

    pub fn axis(self, heading: f64) -> f64 {
        super::normalize_degrees(heading + self.axis_offset())
    }
}

/// Circular sector used for feature presence tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    /// Viewing distance in meters.
    pub radius: f64,
    /// Half the angular width of each view, in degrees.
    pub half_angle: f64,
}

impl Default for SectorSpec {
    fn default() -> Self {
        Self {
            radius: 30.0,
            half_angle: 45.0,
        }
    }
}

impl SectorSpec {
    pub fn new(radius: f64, half_angle: f64) -> Result<Self, MapError> {
        let spec = Self { radius, half_angle };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(MapError::InvalidSector(format!(
                "radius {} must be positive",
                self.radius
            )));
        }
        if !(self.half_angle > 0.0 && self.half_angle <= 90.0) {
            return Err(MapError::InvalidSector(format!(
                "half angle {} outside (0, 90]",
                self.half_angle
            )));
        }
        Ok(())
    }
}

/// Everything that controls ground-truth descriptor generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BsdConfig {
    pub sector: SectorSpec,
    /// Minimum angular width of an unobstructed run of rays that counts as a gap.
    pub gap_min_degrees: f64,
    /// Angular spacing of the rays cast across a side view.
    pub ray_step_degrees: f64,
    /// Junctions closer than this to the location are the one it stands on.
    pub junction_exclusion_m: f64,
}

impl Default for BsdConfig {
    fn default() -> Self {
        Self {
            sector: SectorSpec::default(),
            gap_min_degrees: 15.0,
            ray_step_degrees: 1.0,
            junction_exclusion_m: 1.0,
        }
    }
}

impl BsdConfig {
    pub fn validate(&self) -> Result<(), MapError> {
        self.sector.validate()?;
        if !(self.ray_step_degrees > 0.0)
            || !(self.gap_min_degrees >= 0.0)
            || !(self.junction_exclusion_m >= 0.0)
        {
            return Err(MapError::InvalidSector(format!(
                "invalid gap parameters {self:?}"
            )));
        }
        Ok(())
    }

    /// Ray directions swept across `view`, from one sector edge to the other.
    pub fn ray_angles(&self, heading: f64, view: View) -> Vec<f64> {
        let axis = view.axis(heading);
        let span = 2.0 * self.sector.half_angle;
        let n = (span / self.ray_step_degrees).round() as usize;
        (0..=n)
            .map(|k| {
                super::normalize_degrees(
                    axis - self.sector.half_angle + k as f64 * self.ray_step_degrees,
                )
            })
            .collect()
    }

    /// Whether a ray mask contains a long enough unobstructed run.
    pub fn has_gap_run(&self, free: &[bool]) -> bool {
        let need = (self.gap_min_degrees / self.ray_step_degrees - 1e-9)
            .ceil()
            .max(1.0) as usize;
        let mut run = 0usize;
        for &f in free {
            run = if f { run + 1 } else { 0 };
            if run >= need {
                return true;
            }
        }
        false
    }
}

/// Whether `point` lies in the `view` sector of a location at `center` facing
/// `heading`. Both the radius and the angular boundaries are inclusive; the
/// center itself belongs to no view.
pub fn sector_contains(
    center: &GeoPoint,
    heading: f64,
    view: View,
    spec: &SectorSpec,
    point: &GeoPoint,
) -> bool {
    let d = center.distance(point);
    if d > spec.radius || d < 1e-9 {
        return false;
    }
    angular_difference(center.bearing_to(point), view.axis(heading)) <= spec.half_angle
}

/// Junction presence in the front or back view.
pub fn junc_bit(
    loc: &DirectedLocation,
    map: &SemanticMap,
    view: View,
    config: &BsdConfig,
) -> Result<bool, MapError> {
    if !matches!(view, View::Front | View::Back) {
        return Err(MapError::InvalidView(view));
    }
    Ok(map.junctions().iter().any(|j| {
        loc.position.distance(j) >= config.junction_exclusion_m
            && sector_contains(&loc.position, loc.heading, view, &config.sector, j)
    }))
}

fn ray_blocked(center: &GeoPoint, end: &GeoPoint, buildings: &[&Building]) -> bool {
    buildings.iter().any(|b| {
        b.edges()
            .any(|(a, c)| segments_intersect(center, end, &a, &c))
    })
}

/// Per-ray obstruction mask for a side view: `true` where the ray, clipped to
/// the sector radius, meets no building.
pub fn gap_ray_mask(
    loc: &DirectedLocation,
    map: &SemanticMap,
    view: View,
    config: &BsdConfig,
) -> Vec<bool> {
    let r = config.sector.radius;
    let nearby: Vec<&Building> = map
        .buildings()
        .iter()
        .filter(|b| b.near(&loc.position, r))
        .collect();
    let angles = config.ray_angles(loc.heading, view);
    if nearby.iter().any(|b| b.contains(&loc.position)) {
        return vec![false; angles.len()];
    }
    angles
        .iter()
        .map(|&a| {
            let end = loc.position.offset(a, r);
            !ray_blocked(&loc.position, &end, &nearby)
        })
        .collect()
}

/// Gap presence in the left or right view, by ray casting against building
/// footprints. Open land counts as a gap.
pub fn gap_bit(
    loc: &DirectedLocation,
    map: &SemanticMap,
    view: View,
    config: &BsdConfig,
) -> Result<bool, MapError> {
    if !matches!(view, View::Left | View::Right) {
        return Err(MapError::InvalidView(view));
    }
    Ok(config.has_gap_run(&gap_ray_mask(loc, map, view, config)))
}

pub fn ground_truth_bsd(loc: &DirectedLocation, map: &SemanticMap, config: &BsdConfig) -> Bsd {
    // views are fixed per bit, so these cannot fail
    Bsd::from_bits([
        junc_bit(loc, map, View::Front, config).expect("front view"),
        junc_bit(loc, map, View::Back, config).expect("back view"),
        gap_bit(loc, map, View::Left, config).expect("left view"),
        gap_bit(loc, map, View::Right, config).expect("right view"),
    ])
}

/// Ground-truth descriptor for every location, in location order.
pub fn compute_bsd_table(
    locations: &[DirectedLocation],
    map: &SemanticMap,
    config: &BsdConfig,
) -> BsdTable {
    locations
        .par_iter()
        .map(|l| ground_truth_bsd(l, map, config))
        .collect()
}
