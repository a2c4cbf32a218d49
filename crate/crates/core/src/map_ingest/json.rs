use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MapArtifacts, RoadNetwork, SampledLocations};
use crate::error::IngestError;
use crate::map_model::{Building, GeoPoint, LocalProjection};

pub const MAP_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LocationRecord {
    id: u32,
    x: f64,
    y: f64,
    heading: f64,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    version: u32,
    origin: LocalProjection,
    roads: Vec<Vec<i64>>,
    points: BTreeMap<i64, [f64; 2]>,
    buildings: Vec<Vec<[f64; 2]>>,
    locations: Vec<LocationRecord>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

/// Writes the map, its road network and its directed locations as JSON.
pub fn save_map_json<W: Write>(artifacts: &MapArtifacts, out: W) -> Result<(), IngestError> {
    let file = MapFile {
        version: MAP_SCHEMA_VERSION,
        origin: artifacts.origin,
        roads: artifacts.network.roads.clone(),
        points: artifacts
            .network
            .points
            .iter()
            .map(|(id, p)| (*id, [p.x, p.y]))
            .collect(),
        buildings: artifacts
            .map
            .buildings()
            .iter()
            .map(|b| b.ring().iter().map(|p| [p.x, p.y]).collect())
            .collect(),
        locations: artifacts
            .locations()
            .iter()
            .map(|l| LocationRecord {
                id: l.id.0,
                x: l.position.x,
                y: l.position.y,
                heading: l.heading,
            })
            .collect(),
    };
    serde_json::to_writer(out, &file)?;
    Ok(())
}

/// First eight bytes (little-endian) of the SHA-256 of the map's JSON form.
/// Ties a route database to the map it was built from.
pub fn map_hash(artifacts: &MapArtifacts) -> Result<u64, IngestError> {
    let mut buf = Vec::new();
    save_map_json(artifacts, &mut buf)?;
    let digest = Sha256::digest(&buf);
    Ok(u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")))
}

/// Reads a map written by [`save_map_json`]. Location ids must be `0..n` in order.
pub fn load_map_json<R: Read>(mut input: R) -> Result<MapArtifacts, IngestError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let probe: VersionProbe = serde_json::from_str(&text)?;
    if probe.version != MAP_SCHEMA_VERSION {
        return Err(IngestError::SchemaVersion {
            expected: MAP_SCHEMA_VERSION,
            found: probe.version,
        });
    }
    let file: MapFile = serde_json::from_str(&text)?;

    let network = RoadNetwork {
        points: file
            .points
            .into_iter()
            .map(|(id, [x, y])| (id, GeoPoint::new(x, y)))
            .collect(),
        roads: file.roads,
    };
    if let Some(p) = network.points.values().find(|p| !p.is_finite()) {
        return Err(IngestError::InvalidMap(format!(
            "non-finite road point ({}, {})",
            p.x, p.y
        )));
    }
    let buildings = file
        .buildings
        .into_iter()
        .map(|ring| Building::new(ring.into_iter().map(|[x, y]| GeoPoint::new(x, y)).collect()))
        .collect::<Result<Vec<_>, _>>()?;

    let mut raw = Vec::with_capacity(file.locations.len());
    for (i, l) in file.locations.iter().enumerate() {
        if l.id as usize != i {
            return Err(IngestError::InvalidMap(format!(
                "location at index {i} has id {}",
                l.id
            )));
        }
        let p = GeoPoint::new(l.x, l.y);
        if !p.is_finite() || !l.heading.is_finite() {
            return Err(IngestError::InvalidMap(format!(
                "location {} is not finite",
                l.id
            )));
        }
        raw.push((p, l.heading));
    }
    Ok(MapArtifacts::from_parts(
        file.origin,
        network,
        buildings,
        SampledLocations::from_locations(&raw),
    ))
}
