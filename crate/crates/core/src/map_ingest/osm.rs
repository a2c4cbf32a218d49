use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::IngestError;
use crate::map_model::{Building, GeoPoint, LocalProjection};

use super::RoadNetwork;

/// Highway values that become roads unless the caller passes its own list.
pub const DEFAULT_HIGHWAYS: &[&str] = &[
    "motorway",
    "motorway_link",
    "trunk",
    "trunk_link",
    "primary",
    "primary_link",
    "secondary",
    "secondary_link",
    "tertiary",
    "tertiary_link",
    "unclassified",
    "residential",
];

/// Roads and buildings extracted from an OSM-XML document, in local meters.
#[derive(Clone, Debug, PartialEq)]
pub struct OsmExtract {
    pub origin: LocalProjection,
    pub network: RoadNetwork,
    pub buildings: Vec<Building>,
    /// Ways dropped because they reference a node absent from the document.
    pub skipped_missing_nodes: usize,
    /// Building ways that are not closed rings or have too few vertices.
    pub skipped_buildings: usize,
}

struct RawWay {
    refs: Vec<i64>,
    is_road: bool,
    is_building: bool,
}

/// Parses an OSM-XML document.
///
/// Ways whose `highway` tag is in `highways` become roads and closed ways
/// tagged `building` become footprints. Only nodes referenced by a kept way
/// are projected; the origin is the centroid of those nodes.
pub fn parse_osm(xml: &str, highways: &[&str]) -> Result<OsmExtract, IngestError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| IngestError::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let line_of = |n: roxmltree::Node| doc.text_pos_at(n.range().start).row;
    let allowed: HashSet<&str> = highways.iter().copied().collect();

    let mut nodes: HashMap<i64, (f64, f64)> = HashMap::new();
    let mut ways = Vec::new();
    for el in doc.root_element().children().filter(|n| n.is_element()) {
        match el.tag_name().name() {
            "node" => {
                let attr = |k: &str| -> Result<&str, IngestError> {
                    el.attribute(k).ok_or_else(|| IngestError::Xml {
                        line: line_of(el),
                        message: format!("node without `{k}` attribute"),
                    })
                };
                let parse = |k: &str| -> Result<f64, IngestError> {
                    attr(k)?.parse().map_err(|_| IngestError::Xml {
                        line: line_of(el),
                        message: format!("node attribute `{k}` is not a number"),
                    })
                };
                let id: i64 = attr("id")?.parse().map_err(|_| IngestError::Xml {
                    line: line_of(el),
                    message: "node id is not an integer".into(),
                })?;
                nodes.insert(id, (parse("lat")?, parse("lon")?));
            }
            "way" => {
                let mut refs = Vec::new();
                let mut is_road = false;
                let mut is_building = false;
                for c in el.children().filter(|n| n.is_element()) {
                    match c.tag_name().name() {
                        "nd" => {
                            let r = c.attribute("ref").and_then(|v| v.parse().ok()).ok_or_else(
                                || IngestError::Xml {
                                    line: line_of(c),
                                    message: "nd without integer `ref`".into(),
                                },
                            )?;
                            refs.push(r);
                        }
                        "tag" => match (c.attribute("k"), c.attribute("v")) {
                            (Some("highway"), Some(v)) => is_road = allowed.contains(v),
                            (Some("building"), Some(v)) => is_building = v != "no",
                            _ => {}
                        },
                        _ => {}
                    }
                }
                if is_road || is_building {
                    ways.push(RawWay {
                        refs,
                        is_road,
                        is_building,
                    });
                }
            }
            _ => {}
        }
    }

    let mut skipped_missing_nodes = 0;
    let mut skipped_buildings = 0;
    let mut kept = Vec::new();
    for w in ways {
        if w.refs.iter().any(|r| !nodes.contains_key(r)) {
            skipped_missing_nodes += 1;
            continue;
        }
        if w.is_building && !w.is_road && (w.refs.len() < 4 || w.refs.first() != w.refs.last()) {
            skipped_buildings += 1;
            continue;
        }
        kept.push(w);
    }
    if skipped_missing_nodes > 0 {
        log::warn!("skipped {skipped_missing_nodes} way(s) referencing missing nodes");
    }

    let used: BTreeMap<i64, (f64, f64)> = kept
        .iter()
        .flat_map(|w| &w.refs)
        .map(|r| (*r, nodes[r]))
        .collect();
    let origin = if used.is_empty() {
        LocalProjection::new(0.0, 0.0)?
    } else {
        let n = used.len() as f64;
        let (lat, lon) = used
            .values()
            .fold((0.0, 0.0), |(a, b), (la, lo)| (a + la / n, b + lo / n));
        LocalProjection::new(lat, lon)?
    };
    let mut local = BTreeMap::new();
    for (id, (lat, lon)) in &used {
        local.insert(*id, origin.to_local(*lat, *lon)?);
    }

    let mut network = RoadNetwork {
        points: BTreeMap::new(),
        roads: Vec::new(),
    };
    let mut buildings = Vec::new();
    for w in kept {
        if w.is_road {
            for r in &w.refs {
                network.points.insert(*r, local[r]);
            }
            network.roads.push(w.refs);
        } else {
            let ring: Vec<GeoPoint> = w.refs.iter().map(|r| local[r]).collect();
            match Building::new(ring) {
                Ok(b) => buildings.push(b),
                Err(_) => skipped_buildings += 1,
            }
        }
    }
    Ok(OsmExtract {
        origin,
        network,
        buildings,
        skipped_missing_nodes,
        skipped_buildings,
    })
}
