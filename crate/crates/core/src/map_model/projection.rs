use serde::{Deserialize, Serialize};

use super::GeoPoint;
use crate::error::MapError;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Equirectangular projection about a fixed origin. Accurate to millimeters over
/// a few kilometers, which is all a city-district map needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub lat: f64,
    pub lon: f64,
}

impl LocalProjection {
    pub fn new(lat: f64, lon: f64) -> Result<Self, MapError> {
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 {
            return Err(MapError::NonFinite(format!("origin ({lat}, {lon})")));
        }
        Ok(Self { lat, lon })
    }

    pub fn to_local(&self, lat: f64, lon: f64) -> Result<GeoPoint, MapError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(MapError::NonFinite(format!("coordinate ({lat}, {lon})")));
        }
        if lat.abs() > 90.0 {
            return Err(MapError::NonFinite(format!("latitude {lat} out of range")));
        }
        let x = EARTH_RADIUS_M * self.lat.to_radians().cos() * (lon - self.lon).to_radians();
        let y = EARTH_RADIUS_M * (lat - self.lat).to_radians();
        Ok(GeoPoint::new(x, y))
    }

    /// Inverse of [`to_local`](Self::to_local); returns `(lat, lon)`.
    pub fn to_geographic(&self, p: &GeoPoint) -> (f64, f64) {
        let lat = self.lat + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon + (p.x / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }
}

/// Projects `(lat, lon)` relative to `origin`.
pub fn project_to_local(
    lat: f64,
    lon: f64,
    origin: &LocalProjection,
) -> Result<GeoPoint, MapError> {
    origin.to_local(lat, lon)
}
