//! Map construction: OSM-XML import, the versioned JSON map format, road graph
//! extraction, location resampling and synthetic city generation.

mod graph;
mod json;
mod osm;
mod resample;
mod synth;

pub use graph::{build_road_graph, GraphNode, RoadEdge, RoadGraph, RoadNetwork};
pub use json::{load_map_json, map_hash, save_map_json, MAP_SCHEMA_VERSION};
pub use osm::{parse_osm, OsmExtract, DEFAULT_HIGHWAYS};
pub use resample::{resample_locations, SampledLocations, AXIS_MERGE_DEGREES};
pub use synth::{generate_synthetic_city, SyntheticCity, SyntheticCityParams};

use crate::map_model::{
    Building, DirectedLocation, GeoPoint, LocalProjection, LocationId, SemanticMap,
};

/// Default distance between road sample points, meters.
pub const DEFAULT_SPACING_M: f64 = 10.0;

/// Ways of the network as coordinate polylines, skipping unresolvable ones.
pub fn road_polylines(network: &RoadNetwork) -> Vec<Vec<GeoPoint>> {
    network
        .roads
        .iter()
        .filter_map(|w| {
            w.iter()
                .map(|id| network.points.get(id).copied())
                .collect::<Option<Vec<_>>>()
        })
        .filter(|p| p.len() >= 2)
        .collect()
}

/// Everything downstream stages need from a map: geometry, graph and locations.
#[derive(Clone, Debug, PartialEq)]
pub struct MapArtifacts {
    pub origin: LocalProjection,
    pub network: RoadNetwork,
    pub graph: RoadGraph,
    pub map: SemanticMap,
    pub sampled: SampledLocations,
}

impl MapArtifacts {
    /// Builds graph and semantic map from raw parts and keeps the given locations.
    pub fn from_parts(
        origin: LocalProjection,
        network: RoadNetwork,
        buildings: Vec<Building>,
        sampled: SampledLocations,
    ) -> Self {
        let graph = build_road_graph(&network);
        let map = SemanticMap::new(graph.junction_points(), buildings, road_polylines(&network));
        Self {
            origin,
            network,
            graph,
            map,
            sampled,
        }
    }

    /// Builds graph and semantic map and samples locations every `spacing` meters.
    pub fn assemble(
        origin: LocalProjection,
        network: RoadNetwork,
        buildings: Vec<Building>,
        spacing: f64,
    ) -> Result<Self, crate::error::IngestError> {
        let graph = build_road_graph(&network);
        let sampled = resample_locations(&graph, spacing)?;
        let map = SemanticMap::new(graph.junction_points(), buildings, road_polylines(&network));
        Ok(Self {
            origin,
            network,
            graph,
            map,
            sampled,
        })
    }

    pub fn from_synthetic(
        city: SyntheticCity,
        spacing: f64,
    ) -> Result<Self, crate::error::IngestError> {
        let sampled = resample_locations(&city.graph, spacing)?;
        Ok(Self {
            origin: LocalProjection { lat: 0.0, lon: 0.0 },
            network: city.network,
            graph: city.graph,
            map: city.map,
            sampled,
        })
    }

    pub fn locations(&self) -> &[DirectedLocation] {
        &self.sampled.locations
    }

    pub fn location(&self, id: LocationId) -> &DirectedLocation {
        &self.sampled.locations[id.index()]
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.sampled.points
    }

    pub fn headings(&self) -> Vec<f64> {
        self.sampled.locations.iter().map(|l| l.heading).collect()
    }
}
