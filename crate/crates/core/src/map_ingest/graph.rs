use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::map_model::GeoPoint;

/// Raw road input: node positions plus ways as node-id sequences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub points: BTreeMap<i64, GeoPoint>,
    pub roads: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphNode {
    pub id: i64,
    pub position: GeoPoint,
}

/// A polyline between two graph nodes with no graph node in its interior.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadEdge {
    pub from: usize,
    pub to: usize,
    pub polyline: Vec<GeoPoint>,
}

impl RoadEdge {
    pub fn length(&self) -> f64 {
        self.polyline.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

/// Undirected road graph. Nodes are way endpoints and nodes shared between ways.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoadGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<RoadEdge>,
    degree: Vec<usize>,
}

impl RoadGraph {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degree[node]
    }

    /// Indices of nodes where three or more road edges meet.
    pub fn junctions(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.degree[i] >= 3)
            .collect()
    }

    pub fn junction_points(&self) -> Vec<GeoPoint> {
        self.junctions()
            .into_iter()
            .map(|i| self.nodes[i].position)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Splits ways at shared nodes and computes node degrees.
///
/// Ways referencing unknown node ids are ignored; consecutive repeated nodes
/// and zero-length edges are dropped, and an edge traversed by two ways is
/// kept once.
pub fn build_road_graph(network: &RoadNetwork) -> RoadGraph {
    let ways: Vec<Vec<i64>> = network
        .roads
        .iter()
        .filter(|w| w.iter().all(|id| network.points.contains_key(id)))
        .map(|w| {
            let mut v = w.clone();
            v.dedup();
            v
        })
        .filter(|w| w.len() >= 2)
        .collect();

    let mut uses: HashMap<i64, usize> = HashMap::new();
    for w in &ways {
        for id in w {
            *uses.entry(*id).or_default() += 1;
        }
    }
    let is_vertex = |w: &[i64], i: usize| i == 0 || i == w.len() - 1 || uses[&w[i]] > 1;

    let mut graph = RoadGraph::default();
    let mut index: HashMap<i64, usize> = HashMap::new();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut node_of = |graph: &mut RoadGraph, id: i64| -> usize {
        *index.entry(id).or_insert_with(|| {
            graph.nodes.push(GraphNode {
                id,
                position: network.points[&id],
            });
            graph.degree.push(0);
            graph.nodes.len() - 1
        })
    };

    for w in &ways {
        let mut start = 0;
        for i in 1..w.len() {
            if !is_vertex(w, i) {
                continue;
            }
            let ids = &w[start..=i];
            start = i;
            let mut polyline: Vec<GeoPoint> = Vec::with_capacity(ids.len());
            for id in ids {
                let p = network.points[id];
                if polyline.last() != Some(&p) {
                    polyline.push(p);
                }
            }
            if polyline.len() < 2 {
                continue;
            }
            let reversed: Vec<i64> = ids.iter().rev().copied().collect();
            let key = if ids <= reversed.as_slice() {
                ids.to_vec()
            } else {
                reversed
            };
            if !seen.insert(key) {
                continue;
            }
            let from = node_of(&mut graph, ids[0]);
            let to = node_of(&mut graph, *ids.last().unwrap());
            graph.degree[from] += 1;
            graph.degree[to] += 1;
            graph.edges.push(RoadEdge { from, to, polyline });
        }
    }
    graph
}
