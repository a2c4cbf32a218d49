//! Deterministic synthetic street grids with building frontage.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_road_graph, RoadGraph, RoadNetwork};
use crate::error::IngestError;
use crate::map_model::{Building, GeoPoint, SemanticMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticCityParams {
    /// Number of east-west streets.
    pub rows: usize,
    /// Number of north-south streets.
    pub cols: usize,
    /// Nominal distance between parallel streets, meters.
    pub block_size: f64,
    /// Fraction of street frontage occupied by building lots (the rest is vacant).
    pub building_coverage: f64,
    /// Probability that a building is followed by an open gap rather than its neighbour.
    pub gap_frequency: f64,
    /// Uniform displacement of each intersection, as a fraction of `block_size`.
    pub jitter: f64,
    /// Spread of the spacing between neighbouring parallel streets, as a
    /// fraction of `block_size`.
    pub block_variation: f64,
    /// Fraction of street segments between neighbouring intersections that are
    /// removed. Removals never disconnect the network.
    pub street_dropout: f64,
    pub seed: u64,
}

impl Default for SyntheticCityParams {
    fn default() -> Self {
        Self {
            rows: 12,
            cols: 12,
            block_size: 70.0,
            building_coverage: 0.9,
            gap_frequency: 0.5,
            jitter: 0.3,
            block_variation: 0.6,
            street_dropout: 0.45,
            seed: 1,
        }
    }
}

impl SyntheticCityParams {
    pub fn validate(&self) -> Result<(), IngestError> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        if self.rows < 2 || self.cols < 2 {
            return Err(IngestError::InvalidParams(
                "grid needs at least 2 rows and 2 columns".into(),
            ));
        }
        if !(self.block_size > 0.0 && self.block_size.is_finite()) {
            return Err(IngestError::InvalidParams(format!(
                "block size {} must be positive",
                self.block_size
            )));
        }
        if !frac(self.building_coverage)
            || !frac(self.gap_frequency)
            || !(0.0..0.5).contains(&self.jitter)
        {
            return Err(IngestError::InvalidParams(format!(
                "coverage {}, gap frequency {} must be in [0, 1] and jitter {} in [0, 0.5)",
                self.building_coverage, self.gap_frequency, self.jitter
            )));
        }
        if !(0.0..0.9).contains(&self.block_variation)
            || !(0.0..=0.5).contains(&self.street_dropout)
        {
            return Err(IngestError::InvalidParams(format!(
                "block variation {} must be in [0, 0.9) and street dropout {} in [0, 0.5]",
                self.block_variation, self.street_dropout
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCity {
    pub network: RoadNetwork,
    pub graph: RoadGraph,
    pub buildings: Vec<Building>,
    pub map: SemanticMap,
}

const MIN_SETBACK: f64 = 5.0;
const MAX_SETBACK: f64 = 9.0;
const MIN_DEPTH: f64 = 10.0;
const MAX_DEPTH: f64 = 20.0;
const MIN_LOT: f64 = 8.0;
const MAX_LOT: f64 = 25.0;
const MIN_GAP: f64 = 6.0;
const MAX_GAP: f64 = 20.0;
/// Clearance every building keeps from road centerlines other than its own.
const ROAD_CLEARANCE: f64 = 4.0;

fn point_segment_distance(p: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(&GeoPoint::new(a.x + t * dx, a.y + t * dy))
}

fn segment_distance(a: &GeoPoint, b: &GeoPoint, c: &GeoPoint, d: &GeoPoint) -> f64 {
    if crate::map_model::segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

fn clear_of_roads(ring: &[GeoPoint], segments: &[(GeoPoint, GeoPoint)], own: usize) -> bool {
    segments.iter().enumerate().all(|(i, (c, d))| {
        if i == own {
            return true;
        }
        (0..ring.len()).all(|k| {
            segment_distance(&ring[k], &ring[(k + 1) % ring.len()], c, d) >= ROAD_CLEARANCE
        })
    })
}

/// Offsets of `n` parallel streets whose spacing varies by up to
/// `variation * block` around `block`.
fn street_offsets(n: usize, block: f64, variation: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut at = 0.0;
    (0..n)
        .map(|i| {
            if i > 0 {
                at += block
                    * (1.0
                        + if variation > 0.0 {
                            rng.random_range(-variation..variation)
                        } else {
                            0.0
                        });
            }
            at
        })
        .collect()
}

fn connected(nodes: usize, edges: &[(usize, usize)], keep: &[bool]) -> bool {
    let mut adj = vec![Vec::new(); nodes];
    for (k, &(a, b)) in edges.iter().enumerate() {
        if keep[k] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; nodes];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !std::mem::replace(&mut seen[u], true) {
                stack.push(u);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Builds a `rows` × `cols` street grid with jittered intersections and
/// building lots along both sides of every street segment.
///
/// Without dropout every row and every column is one way, so interior
/// intersections have degree 4, border intersections degree 3 and corners
/// degree 2. Dropout removes grid segments and leaves T-junctions, bends and
/// dead ends. Output is a pure function of `params`.
pub fn generate_synthetic_city(params: &SyntheticCityParams) -> Result<SyntheticCity, IngestError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (rows, cols, block) = (params.rows, params.cols, params.block_size);
    let id = |r: usize, c: usize| (r * cols + c) as i64 + 1;

    let xs = street_offsets(cols, block, params.block_variation, &mut rng);
    let ys = street_offsets(rows, block, params.block_variation, &mut rng);
    let half = params.jitter * block / 2.0;
    let mut raw = Vec::with_capacity(rows * cols);
    for &y in &ys {
        for &x in &xs {
            let jx = if half > 0.0 {
                rng.random_range(-half..half)
            } else {
                0.0
            };
            let jy = if half > 0.0 {
                rng.random_range(-half..half)
            } else {
                0.0
            };
            raw.push(GeoPoint::new(x + jx, y + jy));
        }
    }
    let n = raw.len() as f64;
    let (cx, cy) = raw
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x / n, sy + p.y / n));

    let mut network = RoadNetwork::default();
    for r in 0..rows {
        for c in 0..cols {
            let p = raw[r * cols + c];
            network
                .points
                .insert(id(r, c), GeoPoint::new(p.x - cx, p.y - cy));
        }
    }

    // grid segments: row runs first, then column runs
    let node = |r: usize, c: usize| r * cols + c;
    let mut grid: Vec<(usize, usize)> = Vec::new();
    for r in 0..rows {
        grid.extend((1..cols).map(|c| (node(r, c - 1), node(r, c))));
    }
    for c in 0..cols {
        grid.extend((1..rows).map(|r| (node(r - 1, c), node(r, c))));
    }
    let mut keep = vec![true; grid.len()];
    let target = (params.street_dropout * grid.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    if target > 0 {
        order.shuffle(&mut rng);
    }
    let mut removed = 0;
    for k in order {
        if removed == target {
            break;
        }
        keep[k] = false;
        if connected(rows * cols, &grid, &keep) {
            removed += 1;
        } else {
            keep[k] = true;
        }
    }

    // each maximal run of kept segments along a row or column becomes one way
    let lines = (0..rows)
        .map(|r| (0..cols).map(|c| id(r, c)).collect::<Vec<_>>())
        .chain((0..cols).map(|c| (0..rows).map(|r| id(r, c)).collect()));
    let mut k = 0;
    for line in lines {
        let mut way = vec![line[0]];
        for pair in line.windows(2) {
            if keep[k] {
                way.push(pair[1]);
            } else {
                if way.len() >= 2 {
                    network.roads.push(std::mem::take(&mut way));
                }
                way = vec![pair[1]];
            }
            k += 1;
        }
        if way.len() >= 2 {
            network.roads.push(way);
        }
    }
    let graph = build_road_graph(&network);
    let segments: Vec<(GeoPoint, GeoPoint)> = graph
        .edges()
        .iter()
        .flat_map(|e| e.polyline.windows(2).map(|w| (w[0], w[1])))
        .collect();

    let mut buildings = Vec::new();
    for (si, (a, b)) in segments.iter().enumerate() {
        let len = a.distance(b);
        let ux = (b.x - a.x) / len;
        let uy = (b.y - a.y) / len;
        for side in [1.0, -1.0] {
            let (nx, ny) = (-uy * side, ux * side);
            let setback = rng.random_range(MIN_SETBACK..MAX_SETBACK);
            let margin = setback + ROAD_CLEARANCE;
            let end = len - margin;
            let mut pos = margin;
            while end - pos >= MIN_LOT / 2.0 {
                let width = rng.random_range(MIN_LOT..MAX_LOT).min(end - pos);
                let depth = rng.random_range(MIN_DEPTH..MAX_DEPTH);
                let built = rng.random_bool(params.building_coverage);
                if built {
                    let corner = |along: f64, lateral: f64| {
                        GeoPoint::new(
                            a.x + ux * along + nx * lateral,
                            a.y + uy * along + ny * lateral,
                        )
                    };
                    for d in [depth, depth / 2.0] {
                        let ring = vec![
                            corner(pos, setback),
                            corner(pos + width, setback),
                            corner(pos + width, setback + d),
                            corner(pos, setback + d),
                        ];
                        if clear_of_roads(&ring, &segments, si) {
                            buildings.push(Building::new(ring)?);
                            break;
                        }
                    }
                }
                pos += width;
                if built && rng.random_bool(params.gap_frequency) {
                    pos += rng.random_range(MIN_GAP..MAX_GAP);
                }
            }
        }
    }

    let map = SemanticMap::new(
        graph.junction_points(),
        buildings.clone(),
        super::road_polylines(&network),
    );
    Ok(SyntheticCity {
        network,
        graph,
        buildings,
        map,
    })
}
