//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use bsdloc::experiments::{ExperimentConfig, MapSource, Pipeline};
use bsdloc::map_ingest::SyntheticCityParams;
use bsdloc::map_model::{Building, GeoPoint};
use bsdloc::routes::{RouteDatabase, RouteRef};
use rand::Rng;

/// Bits as plain bools, so the scan below shares no code with the packed words.
pub type Bits = Vec<bool>;

pub fn random_bits<R: Rng>(rng: &mut R, len: usize) -> Bits {
    (0..len).map(|_| rng.random_bool(0.5)).collect()
}

pub fn naive_hamming(a: &[bool], b: &[bool]) -> u32 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

/// Minimum distance and every index attaining it, by exhaustive scan.
pub fn linear_nearest(db: &[Bits], query: &[bool]) -> (u32, Vec<u32>) {
    let d: Vec<u32> = db.iter().map(|b| naive_hamming(b, query)).collect();
    let min = *d.iter().min().expect("nonempty database");
    (
        min,
        (0..db.len() as u32)
            .filter(|&i| d[i as usize] == min)
            .collect(),
    )
}

/// Counts simple paths with exactly `length` nodes by plain recursion.
pub fn dfs_path_count(adj: &[Vec<u32>], length: usize) -> u64 {
    fn go(adj: &[Vec<u32>], v: usize, left: usize, seen: &mut [bool]) -> u64 {
        if left == 0 {
            return 1;
        }
        let mut total = 0;
        for &u in &adj[v] {
            let u = u as usize;
            if !seen[u] {
                seen[u] = true;
                total += go(adj, u, left - 1, seen);
                seen[u] = false;
            }
        }
        total
    }
    let mut seen = vec![false; adj.len()];
    (0..adj.len())
        .map(|s| {
            seen[s] = true;
            let c = go(adj, s, length - 1, &mut seen);
            seen[s] = false;
            c
        })
        .sum()
}

/// Covered direction intervals (degrees, counter-clockwise, start..start+width)
/// of `buildings` as seen from `center` out to `radius`, from the exact
/// geometry: every building edge is clipped to the disk and its angular span
/// recorded. A ray of length `radius` hits a polygon not containing `center`
/// exactly when it crosses one of these clipped edges.
pub fn covered_intervals(
    center: &GeoPoint,
    buildings: &[Building],
    radius: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for b in buildings {
        let ring = b.ring();
        for k in 0..ring.len() {
            let (p, q) = (ring[k], ring[(k + 1) % ring.len()]);
            let Some((a, c)) = clip_to_disk(center, &p, &q, radius) else {
                continue;
            };
            let ta = (a.y - center.y).atan2(a.x - center.x).to_degrees();
            let tc = (c.y - center.y).atan2(c.x - center.x).to_degrees();
            let mut width = (tc - ta).rem_euclid(360.0);
            let mut start = ta;
            if width > 180.0 {
                width = 360.0 - width;
                start = tc;
            }
            out.push((start.rem_euclid(360.0), width));
        }
    }
    out
}

fn clip_to_disk(c: &GeoPoint, p: &GeoPoint, q: &GeoPoint, r: f64) -> Option<(GeoPoint, GeoPoint)> {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let (fx, fy) = (p.x - c.x, p.y - c.y);
    let a = dx * dx + dy * dy;
    let b = 2.0 * (fx * dx + fy * dy);
    let cc = fx * fx + fy * fy - r * r;
    let disc = b * b - 4.0 * a * cc;
    if a == 0.0 || disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = ((-b - s) / (2.0 * a)).max(0.0);
    let t1 = ((-b + s) / (2.0 * a)).min(1.0);
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| GeoPoint::new(p.x + t * dx, p.y + t * dy);
    Some((at(t0), at(t1)))
}

/// Whether direction `theta` lies strictly inside one of `intervals`, with a
/// small tolerance so that grazing rays count as free.
pub fn direction_covered(theta: f64, intervals: &[(f64, f64)]) -> bool {
    intervals.iter().any(|&(start, width)| {
        let off = (theta - start).rem_euclid(360.0);
        off > 1e-7 && off < width - 1e-7
    })
}

/// Random quadrilaterals around the origin that keep clear of it.
pub fn random_layout<R: Rng>(rng: &mut R) -> Vec<Building> {
    let count = rng.random_range(0..8);
    let mut out = Vec::new();
    while out.len() < count {
        let (cx, cy) = (rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
        let (w, h) = (rng.random_range(2.0..25.0), rng.random_range(2.0..25.0));
        let turn: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (c, s) = (turn.cos(), turn.sin());
        let ring: Vec<GeoPoint> = [(-w, -h), (w, -h), (w, h), (-w, h)]
            .iter()
            .map(|&(dx, dy)| {
                GeoPoint::new(cx + (dx * c - dy * s) / 2.0, cy + (dx * s + dy * c) / 2.0)
            })
            .collect();
        let b = Building::new(ring).unwrap();
        if !b.contains(&GeoPoint::new(0.0, 0.0)) && !b.near(&GeoPoint::new(0.0, 0.0), 1.0) {
            out.push(b);
        }
    }
    out
}

/// Probability of observing `obs` from `truth` through independent bit flips,
/// summed over every flip mask.
pub fn channel_probability(truth: &[bool], obs: &[bool], q: f64) -> f64 {
    let n = truth.len();
    assert!(n <= 20, "exhaustive channel limited to 20 bits");
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let mut p = 1.0;
        let mut matches = true;
        for i in 0..n {
            let flip = mask >> i & 1 == 1;
            if (truth[i] ^ flip) != obs[i] {
                matches = false;
                break;
            }
            p *= if flip { 1.0 - q } else { q };
        }
        if matches {
            total += p;
        }
    }
    total
}

/// Posterior over candidates under a uniform prior, by Bayes' rule on the
/// exhaustive channel probabilities.
pub fn bayes_posterior(candidates: &[Bits], obs: &[bool], q: f64) -> Vec<f64> {
    let like: Vec<f64> = candidates
        .iter()
        .map(|c| channel_probability(c, obs, q))
        .collect();
    let z: f64 = like.iter().sum();
    like.iter().map(|l| l / z).collect()
}

/// Total-variation distance between two count vectors normalized to
/// distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x / sa - y / sb).abs())
        .sum::<f64>()
        / 2.0
}

/// Length-`n` descriptor+turn classes whose routes end at more than one
/// location, found by grouping every stored route.
pub fn ambiguous_classes(db: &RouteDatabase, n: usize) -> usize {
    let mut ends: HashMap<(Vec<bool>, Vec<bool>), Vec<u32>> = HashMap::new();
    for i in 0..db.count(n) as u32 {
        let r = RouteRef {
            length: n,
            index: i,
        };
        let d = db.descriptor(r).unwrap();
        let t = db.turn_pattern(r).unwrap();
        let d_bits: Vec<bool> = (0..d.bits().len()).map(|k| d.bits().get(k)).collect();
        let t_bits: Vec<bool> = (0..t.len()).map(|k| t.bits().get(k)).collect();
        ends.entry((d_bits, t_bits))
            .or_default()
            .push(db.last_location(r).unwrap().0);
    }
    ends.values()
        .filter(|e| e.iter().any(|x| *x != e[0]))
        .count()
}

/// A small synthetic map whose length-15 descriptor+turn classes each end at a
/// single location.
pub fn unique_city() -> SyntheticCityParams {
    SyntheticCityParams {
        rows: 5,
        cols: 5,
        block_size: 100.0,
        street_dropout: 0.45,
        gap_frequency: 0.5,
        seed: 61,
        ..Default::default()
    }
}

pub fn pipeline(map: SyntheticCityParams, test_routes: usize) -> Pipeline {
    let config = ExperimentConfig {
        map: MapSource::Synthetic(map),
        test_routes,
        ..Default::default()
    };
    Pipeline::prepare(config).expect("pipeline builds")
}
