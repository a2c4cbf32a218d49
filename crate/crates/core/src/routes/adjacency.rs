use std::collections::HashMap;

use crate::error::RouteError;
use crate::map_ingest::{RoadGraph, SampledLocations};
use crate::map_model::GeoPoint;

/// Symmetric adjacency between road sample points, stored as sorted
/// neighbour lists.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    neighbors: Vec<Vec<u32>>,
}

impl AdjacencyMatrix {
    /// Self-loops are dropped and repeated pairs kept once.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                neighbors[a as usize].push(b);
                neighbors[b as usize].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: u32) -> &[u32] {
        &self.neighbors[i as usize]
    }

    pub fn is_adjacent(&self, i: u32, j: u32) -> bool {
        self.neighbors[i as usize].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, list) in self.neighbors.iter().enumerate() {
            out.extend(
                list.iter()
                    .filter(|&&b| b as usize > a)
                    .map(|&b| (a as u32, b)),
            );
        }
        out
    }
}

const ON_ROAD_EPS: f64 = 1e-6;
const CELL: f64 = 5.0;

fn cell_of(p: &GeoPoint) -> (i64, i64) {
    ((p.x / CELL).floor() as i64, (p.y / CELL).floor() as i64)
}

/// Connects sample points that follow each other along a road edge.
///
/// Every point lying on an edge polyline is located by arc length; points
/// consecutive in that order are adjacent. Points at shared graph nodes lie on
/// every incident edge, which links the roads meeting there.
pub fn build_adjacency(sampled: &SampledLocations, graph: &RoadGraph) -> AdjacencyMatrix {
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in sampled.points.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i as u32);
    }
    let mut edges = Vec::new();
    for edge in graph.edges() {
        let mut on_edge: Vec<(f64, u32)> = Vec::new();
        let mut arc0 = 0.0;
        for w in edge.polyline.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = a.distance(&b);
            let lo = cell_of(&GeoPoint::new(
                a.x.min(b.x) - ON_ROAD_EPS,
                a.y.min(b.y) - ON_ROAD_EPS,
            ));
            let hi = cell_of(&GeoPoint::new(
                a.x.max(b.x) + ON_ROAD_EPS,
                a.y.max(b.y) + ON_ROAD_EPS,
            ));
            for cx in lo.0..=hi.0 {
                for cy in lo.1..=hi.1 {
                    for &pi in grid.get(&(cx, cy)).into_iter().flatten() {
                        let p = sampled.points[pi as usize];
                        let t = if len > 0.0 {
                            (((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / (len * len))
                                .clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                        if p.distance(&a.lerp(&b, t)) <= ON_ROAD_EPS {
                            on_edge.push((arc0 + t * len, pi));
                        }
                    }
                }
            }
            arc0 += len;
        }
        on_edge.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut order: Vec<u32> = Vec::with_capacity(on_edge.len());
        for (_, pi) in on_edge {
            if !order.contains(&pi) {
                order.push(pi);
            }
        }
        edges.extend(order.windows(2).map(|w| (w[0], w[1])));
    }
    AdjacencyMatrix::from_edges(sampled.points.len(), &edges)
}

/// Streaming enumeration of simple paths with exactly `length` nodes, in
/// lexicographic order of node ids. Each direction of a path is emitted
/// separately. Uses an explicit stack, so path length is not limited by
/// recursion depth.
pub struct SimplePaths<'a> {
    adj: &'a AdjacencyMatrix,
    length: usize,
    next_start: usize,
    path: Vec<u32>,
    cursor: Vec<usize>,
    on_path: Vec<bool>,
}

impl<'a> SimplePaths<'a> {
    pub fn new(adj: &'a AdjacencyMatrix, length: usize) -> Result<Self, RouteError> {
        if length == 0 {
            return Err(RouteError::ZeroLength);
        }
        Ok(Self {
            adj,
            length,
            next_start: 0,
            path: Vec::with_capacity(length),
            cursor: Vec::with_capacity(length),
            on_path: vec![false; adj.len()],
        })
    }
}

impl Iterator for SimplePaths<'_> {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        loop {
            let Some(&last) = self.path.last() else {
                if self.next_start >= self.adj.len() {
                    return None;
                }
                let s = self.next_start as u32;
                self.next_start += 1;
                if self.length == 1 {
                    return Some(vec![s]);
                }
                self.path.push(s);
                self.cursor.push(0);
                self.on_path[s as usize] = true;
                continue;
            };
            let nbrs = self.adj.neighbors(last);
            let c = self.cursor.last_mut().expect("cursor per path node");
            while *c < nbrs.len() && self.on_path[nbrs[*c] as usize] {
                *c += 1;
            }
            if *c == nbrs.len() {
                self.on_path[last as usize] = false;
                self.path.pop();
                self.cursor.pop();
                continue;
            }
            let nx = nbrs[*c];
            *c += 1;
            if self.path.len() + 1 == self.length {
                let mut out = self.path.clone();
                out.push(nx);
                return Some(out);
            }
            self.path.push(nx);
            self.cursor.push(0);
            self.on_path[nx as usize] = true;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteEnumeration {
    pub routes: Vec<Vec<u32>>,
    /// More routes exist beyond the limit.
    pub truncated: bool,
}

/// Collects all simple paths of `length` nodes, stopping after `limit` paths.
pub fn enumerate_routes(
    adj: &AdjacencyMatrix,
    length: usize,
    limit: Option<usize>,
) -> Result<RouteEnumeration, RouteError> {
    let mut iter = SimplePaths::new(adj, length)?;
    let mut routes = Vec::new();
    let limit = limit.unwrap_or(usize::MAX);
    while routes.len() < limit {
        match iter.next() {
            Some(r) => routes.push(r),
            None => {
                return Ok(RouteEnumeration {
                    routes,
                    truncated: false,
                })
            }
        }
    }
    let truncated = iter.next().is_some();
    if truncated {
        log::warn!("route enumeration at length {length} truncated at {limit} routes");
    }
    Ok(RouteEnumeration { routes, truncated })
}
