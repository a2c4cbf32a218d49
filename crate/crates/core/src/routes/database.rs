use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{
    turn_bit, AdjacencyMatrix, Route, RouteDescriptor, TurnPattern, DEFAULT_TURN_THRESHOLD,
};
use crate::error::RouteError;
use crate::hamming_index::{words_for, BitString, BkIndex, MatchResult, TurnPartitionedIndex};
use crate::map_ingest::SampledLocations;
use crate::map_model::{angular_difference, Bsd, GeoPoint, LocationId};

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatabaseConfig {
    /// Longest route length stored.
    pub max_length: usize,
    /// Heading change that counts as a turn, degrees.
    pub turn_threshold: f64,
    /// Per-length cap on stored routes; lengths that hit it are marked truncated.
    pub limit: Option<usize>,
}

impl Default for DatabaseConfig {
    fn default() -> Self {
        Self {
            max_length: 40,
            turn_threshold: DEFAULT_TURN_THRESHOLD,
            limit: None,
        }
    }
}

/// A stored route: its length and its index among routes of that length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RouteRef {
    pub length: usize,
    pub index: u32,
}

#[derive(Debug)]
pub(super) enum Storage {
    /// Built in memory: each route is its parent (the same route minus its
    /// last location, one length shorter) plus one location.
    Linked { parent: Vec<u32>, last: Vec<u32> },
    /// Loaded from disk: `length` location ids per route.
    Flat { ids: Vec<u32> },
}

#[derive(Debug)]
pub(super) struct Level {
    pub(super) length: usize,
    pub(super) count: usize,
    pub(super) storage: Storage,
    /// Descriptor words, `words_for(4 * length)` per route.
    pub(super) words: Vec<u64>,
    pub(super) turns: Vec<u64>,
    pub(super) truncated: bool,
    turn_index: OnceLock<TurnPartitionedIndex>,
    full_index: OnceLock<BkIndex>,
}

impl Level {
    pub(super) fn new(
        length: usize,
        storage: Storage,
        words: Vec<u64>,
        turns: Vec<u64>,
        truncated: bool,
    ) -> Self {
        Self {
            length,
            count: turns.len(),
            storage,
            words,
            turns,
            truncated,
            turn_index: OnceLock::new(),
            full_index: OnceLock::new(),
        }
    }

    pub(super) fn stride(&self) -> usize {
        words_for(4 * self.length)
    }

    pub(super) fn route_words(&self, i: usize) -> &[u64] {
        let s = self.stride();
        &self.words[i * s..(i + 1) * s]
    }

    fn last(&self, i: usize) -> u32 {
        match &self.storage {
            Storage::Linked { last, .. } => last[i],
            Storage::Flat { ids } => ids[i * self.length + self.length - 1],
        }
    }
}

/// Route counts and byte sizes for one length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LengthSize {
    pub length: usize,
    pub routes: u64,
    /// Packed descriptor bytes per route.
    pub descriptor_bytes: u64,
    /// Bytes per file record: location ids, descriptor and turn pattern.
    pub record_bytes: u64,
    /// Descriptor bytes only, summed over routes.
    pub payload_bytes: u64,
    /// Record bytes summed over routes.
    pub total_bytes: u64,
}

impl LengthSize {
    pub fn for_routes(length: usize, routes: u64) -> Self {
        let l = length as u64;
        let descriptor_bytes = (4 * l).div_ceil(8);
        let record_bytes = 4 * l + descriptor_bytes + l.saturating_sub(1).div_ceil(8);
        Self {
            length,
            routes,
            descriptor_bytes,
            record_bytes,
            payload_bytes: routes * descriptor_bytes,
            total_bytes: routes * record_bytes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    pub lengths: Vec<LengthSize>,
    pub routes: u64,
    pub payload_bytes: u64,
    pub total_bytes: u64,
    /// Exact size of the database file holding these lengths.
    pub file_bytes: u64,
}

/// All simple routes up to a maximum length, with packed descriptors and turn
/// patterns, grouped by length. Search indexes are built on first use per
/// length and then shared.
#[derive(Debug)]
pub struct RouteDatabase {
    pub(super) map_hash: u64,
    pub(super) location_count: u32,
    pub(super) turn_threshold: f64,
    pub(super) max_length: usize,
    /// Indexed by `length - 1`; `None` where a length was not loaded.
    pub(super) levels: Vec<Option<Level>>,
}

fn best_aligned(candidates: &[LocationId], headings: &[f64], bearing: f64) -> LocationId {
    *candidates
        .iter()
        .min_by(|a, b| {
            angular_difference(headings[a.index()], bearing)
                .total_cmp(&angular_difference(headings[b.index()], bearing))
                .then(a.cmp(b))
        })
        .expect("every sample point carries locations")
}

/// Locations a route through `start` then `next` may begin with: the one
/// aligned with the departure towards `next`, plus the one a vehicle would
/// hold after arriving at `start` from any other neighbour. Ascending by id.
fn route_starts(
    start: u32,
    next: u32,
    adjacency: &AdjacencyMatrix,
    points: &[GeoPoint],
    by_point: &[Vec<LocationId>],
    headings: &[f64],
) -> Vec<LocationId> {
    let here = &points[start as usize];
    let candidates = &by_point[start as usize];
    let mut out = vec![best_aligned(
        candidates,
        headings,
        here.bearing_to(&points[next as usize]),
    )];
    for &p in adjacency.neighbors(start) {
        if p != next {
            out.push(best_aligned(
                candidates,
                headings,
                points[p as usize].bearing_to(here),
            ));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

impl RouteDatabase {
    /// Enumerates every simple path over the point adjacency up to
    /// `config.max_length` points and stores it as routes of directed
    /// locations: at each point after the first, the location whose heading
    /// best matches the direction of travel into it. The first point gets one
    /// route per location in [`route_starts`], so every window of a longer
    /// drive is itself a stored route. Length 1 holds every directed location.
    ///
    /// Routes of each length are ordered by first point, second point, first
    /// location id, then the remaining points lexicographically.
    pub fn build(
        sampled: &SampledLocations,
        adjacency: &AdjacencyMatrix,
        bsds: &[Bsd],
        map_hash: u64,
        config: &DatabaseConfig,
    ) -> Result<Self, RouteError> {
        let m = config.max_length;
        if m == 0 {
            return Err(RouteError::ZeroLength);
        }
        if m > 64 {
            return Err(RouteError::LengthTooLarge(m));
        }
        let n_loc = sampled.locations.len();
        if bsds.len() < n_loc {
            return Err(RouteError::MissingBsd(bsds.len() as u32));
        }
        if adjacency.len() != sampled.points.len() {
            return Err(RouteError::Format(format!(
                "adjacency covers {} points, map has {}",
                adjacency.len(),
                sampled.points.len()
            )));
        }
        let headings: Vec<f64> = sampled.locations.iter().map(|l| l.heading).collect();
        let by_point = sampled.by_point();
        let points = &sampled.points;
        let limit = config.limit.unwrap_or(usize::MAX);
        let tau = config.turn_threshold;

        struct Builder {
            parent: Vec<u32>,
            last: Vec<u32>,
            words: Vec<u64>,
            turns: Vec<u64>,
            truncated: bool,
        }
        let mut levels: Vec<Builder> = (0..m)
            .map(|_| Builder {
                parent: Vec::new(),
                last: Vec::new(),
                words: Vec::new(),
                turns: Vec::new(),
                truncated: false,
            })
            .collect();
        for (i, d) in bsds.iter().take(n_loc).enumerate() {
            let l1 = &mut levels[0];
            l1.parent.push(NONE);
            l1.last.push(i as u32);
            l1.words.push(d.pack() as u64);
            l1.turns.push(0);
        }

        // Appends a route of `depth` locations: route `parent` of length
        // `depth - 1` extended by `loc`. Returns the new route's index.
        let push = |levels: &mut Vec<Builder>, depth: usize, parent: u32, loc: LocationId| -> u32 {
            let (lower, upper) = levels.split_at_mut(depth - 1);
            let prev = &lower[depth - 2];
            let cur = &mut upper[0];
            let ps = words_for(4 * (depth - 1));
            let cs = words_for(4 * depth);
            let pi = parent as usize;
            cur.words
                .extend_from_slice(&prev.words[pi * ps..(pi + 1) * ps]);
            if cs > ps {
                cur.words.push(0);
            }
            let bit = 4 * (depth - 1);
            let len = cur.words.len();
            cur.words[len - cs + bit / 64] |= (bsds[loc.index()].pack() as u64) << (bit % 64);
            let prev_last = prev.last[pi] as usize;
            let turned = turn_bit(headings[prev_last], headings[loc.index()], tau);
            cur.turns
                .push(prev.turns[pi] | (turned as u64) << (depth - 2));
            cur.parent.push(parent);
            cur.last.push(loc.0);
            (cur.last.len() - 1) as u32
        };
        let full = |levels: &mut Vec<Builder>, depth: usize| -> bool {
            if levels[depth - 1].turns.len() >= limit {
                for b in &mut levels[depth - 1..] {
                    b.truncated = true;
                }
                return true;
            }
            false
        };

        let mut on_path = vec![false; points.len()];
        let mut path: Vec<u32> = Vec::with_capacity(m);
        let mut cursor: Vec<usize> = Vec::with_capacity(m);
        // index of each path prefix among routes of its length
        let mut prefix: Vec<u32> = Vec::with_capacity(m);
        for s in 0..points.len() as u32 {
            if m < 2 {
                break;
            }
            for &n1 in adjacency.neighbors(s) {
                let bearing = points[s as usize].bearing_to(&points[n1 as usize]);
                let second = best_aligned(&by_point[n1 as usize], &headings, bearing);
                for first in route_starts(s, n1, adjacency, points, &by_point, &headings) {
                    if full(&mut levels, 2) {
                        continue;
                    }
                    let idx = push(&mut levels, 2, first.0, second);
                    if m == 2 {
                        continue;
                    }
                    path.extend([s, n1]);
                    cursor.extend([0, 0]);
                    prefix.extend([first.0, idx]);
                    on_path[s as usize] = true;
                    on_path[n1 as usize] = true;
                    while path.len() >= 2 {
                        let tail = *path.last().expect("nonempty path");
                        let nbrs = adjacency.neighbors(tail);
                        let c = cursor.last_mut().expect("cursor per path node");
                        while *c < nbrs.len() && on_path[nbrs[*c] as usize] {
                            *c += 1;
                        }
                        if *c == nbrs.len() {
                            on_path[tail as usize] = false;
                            path.pop();
                            cursor.pop();
                            prefix.pop();
                            continue;
                        }
                        let nx = nbrs[*c];
                        *c += 1;
                        let depth = path.len() + 1;
                        if full(&mut levels, depth) {
                            continue;
                        }
                        let bearing = points[tail as usize].bearing_to(&points[nx as usize]);
                        let loc = best_aligned(&by_point[nx as usize], &headings, bearing);
                        let idx = push(&mut levels, depth, prefix[depth - 2], loc);
                        if depth < m {
                            path.push(nx);
                            cursor.push(0);
                            prefix.push(idx);
                            on_path[nx as usize] = true;
                        }
                    }
                    on_path[s as usize] = false;
                    path.clear();
                    cursor.clear();
                    prefix.clear();
                }
            }
        }

        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(i, b)| {
                if b.truncated {
                    log::warn!(
                        "routes of length {} truncated at {} entries",
                        i + 1,
                        b.turns.len()
                    );
                }
                Some(Level::new(
                    i + 1,
                    Storage::Linked {
                        parent: b.parent,
                        last: b.last,
                    },
                    b.words,
                    b.turns,
                    b.truncated,
                ))
            })
            .collect();
        Ok(Self {
            map_hash,
            location_count: n_loc as u32,
            turn_threshold: tau,
            max_length: m,
            levels,
        })
    }

    pub fn map_hash(&self) -> u64 {
        self.map_hash
    }

    pub fn location_count(&self) -> usize {
        self.location_count as usize
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn turn_threshold(&self) -> f64 {
        self.turn_threshold
    }

    /// Lengths present in this database, ascending.
    pub fn lengths(&self) -> Vec<usize> {
        self.levels.iter().flatten().map(|l| l.length).collect()
    }

    pub(super) fn level(&self, length: usize) -> Result<&Level, RouteError> {
        if length == 0 {
            return Err(RouteError::ZeroLength);
        }
        self.levels
            .get(length - 1)
            .and_then(Option::as_ref)
            .ok_or(RouteError::LengthNotBuilt(length))
    }

    /// Number of routes of `length`; zero for lengths not present.
    pub fn count(&self, length: usize) -> usize {
        self.level(length).map(|l| l.count).unwrap_or(0)
    }

    pub fn total_routes(&self) -> usize {
        self.levels.iter().flatten().map(|l| l.count).sum()
    }

    pub fn is_truncated(&self, length: usize) -> bool {
        self.level(length).map(|l| l.truncated).unwrap_or(false)
    }

    /// Location ids of a stored route.
    pub fn route(&self, r: RouteRef) -> Result<Route, RouteError> {
        let level = self.level(r.length)?;
        let i = r.index as usize;
        if i >= level.count {
            return Err(RouteError::Format(format!(
                "route {} of length {} does not exist",
                r.index, r.length
            )));
        }
        let ids = match &level.storage {
            Storage::Flat { ids } => ids[i * r.length..(i + 1) * r.length].to_vec(),
            Storage::Linked { .. } => {
                let mut out = vec![0u32; r.length];
                let mut idx = i;
                for len in (1..=r.length).rev() {
                    let Storage::Linked { parent, last } = &self.level(len)?.storage else {
                        return Err(RouteError::Format(format!("length {len} is not linked")));
                    };
                    out[len - 1] = last[idx];
                    idx = parent[idx] as usize;
                }
                out
            }
        };
        Ok(Route(ids.into_iter().map(LocationId).collect()))
    }

    pub fn last_location(&self, r: RouteRef) -> Result<LocationId, RouteError> {
        let level = self.level(r.length)?;
        Ok(LocationId(level.last(r.index as usize)))
    }

    pub fn descriptor(&self, r: RouteRef) -> Result<RouteDescriptor, RouteError> {
        let level = self.level(r.length)?;
        Ok(RouteDescriptor(BitString::from_words(
            level.route_words(r.index as usize).to_vec(),
            4 * r.length,
        )?))
    }

    pub fn turn_pattern(&self, r: RouteRef) -> Result<TurnPattern, RouteError> {
        let level = self.level(r.length)?;
        let bits = r.length - 1;
        let words = if bits == 0 {
            Vec::new()
        } else {
            vec![level.turns[r.index as usize]]
        };
        Ok(TurnPattern(BitString::from_words(words, bits)?))
    }

    /// Index of `route` among stored routes of its length, by linear scan.
    pub fn find(&self, route: &Route) -> Result<Option<u32>, RouteError> {
        let level = self.level(route.len())?;
        let last = route.last().ok_or(RouteError::ZeroLength)?;
        for i in 0..level.count {
            if level.last(i) == last.0
                && self.route(RouteRef {
                    length: route.len(),
                    index: i as u32,
                })? == *route
            {
                return Ok(Some(i as u32));
            }
        }
        Ok(None)
    }

    /// One BK tree per turn pattern for routes of `length`, built on first use.
    pub fn turn_index(&self, length: usize) -> Result<&TurnPartitionedIndex, RouteError> {
        let level = self.level(length)?;
        Ok(level.turn_index.get_or_init(|| {
            let start = std::time::Instant::now();
            let mut idx =
                TurnPartitionedIndex::new(4 * length, length - 1).expect("at most 64 turn bits");
            for i in 0..level.count {
                idx.insert_words(level.route_words(i), level.turns[i], i as u32);
            }
            log::debug!(
                "turn index for length {length}: {} routes in {} partitions, {:?}",
                level.count,
                idx.partition_count(),
                start.elapsed()
            );
            idx
        }))
    }

    /// One BK tree over all routes of `length`, built on first use.
    pub fn full_index(&self, length: usize) -> Result<&BkIndex, RouteError> {
        let level = self.level(length)?;
        Ok(level.full_index.get_or_init(|| {
            let start = std::time::Instant::now();
            let mut idx = BkIndex::new(4 * length);
            for i in 0..level.count {
                idx.insert_words(level.route_words(i), i as u32);
            }
            log::debug!(
                "full index for length {length}: {} routes, {:?}",
                level.count,
                start.elapsed()
            );
            idx
        }))
    }

    /// Routes of the query's length whose turn pattern matches exactly,
    /// ranked by descriptor distance.
    pub fn match_route(
        &self,
        descriptor: &RouteDescriptor,
        turns: &TurnPattern,
        tiers: usize,
    ) -> Result<MatchResult, RouteError> {
        let length = descriptor.location_count();
        if turns.len() + 1 != length {
            return Err(RouteError::Format(format!(
                "{} turn bits do not fit a route of {length} locations",
                turns.len()
            )));
        }
        if self.count(length) == 0 {
            self.level(length)?;
            return Ok(MatchResult::empty_turns());
        }
        Ok(self
            .turn_index(length)?
            .match_route(descriptor.bits(), turns.bits(), tiers)?)
    }

    /// Ranking by descriptor distance alone.
    pub fn match_descriptor(
        &self,
        descriptor: &RouteDescriptor,
        tiers: usize,
    ) -> Result<MatchResult, RouteError> {
        let length = descriptor.location_count();
        Ok(self.full_index(length)?.nearest(descriptor.bits(), tiers)?)
    }

    /// Ids of all routes with exactly this turn pattern, ascending.
    pub fn turn_class(&self, turns: &TurnPattern) -> Result<Vec<u32>, RouteError> {
        let length = turns.len() + 1;
        let idx = self.turn_index(length)?;
        let mut ids = match idx.partition(turns.bits())? {
            Some(p) => p.routes(),
            None => Vec::new(),
        };
        ids.sort_unstable();
        Ok(ids)
    }

    /// Descriptor words of every route of `length`, `words_for(4 * length)` per route.
    pub fn descriptor_words(&self, length: usize) -> Result<&[u64], RouteError> {
        Ok(&self.level(length)?.words)
    }

    pub fn turn_keys(&self, length: usize) -> Result<&[u64], RouteError> {
        Ok(&self.level(length)?.turns)
    }

    /// Byte accounting for the given lengths (all present lengths if `None`).
    pub fn size_report(&self, lengths: Option<&[usize]>) -> SizeReport {
        let chosen: Vec<usize> = match lengths {
            Some(ls) => ls
                .iter()
                .copied()
                .filter(|&l| self.level(l).is_ok())
                .collect(),
            None => self.lengths(),
        };
        let sizes: Vec<LengthSize> = chosen
            .iter()
            .map(|&l| LengthSize::for_routes(l, self.count(l) as u64))
            .collect();
        let file_bytes = super::format::HEADER_BYTES
            + sizes
                .iter()
                .map(|s| super::format::SECTION_HEADER_BYTES + s.total_bytes)
                .sum::<u64>();
        SizeReport {
            routes: sizes.iter().map(|s| s.routes).sum(),
            payload_bytes: sizes.iter().map(|s| s.payload_bytes).sum(),
            total_bytes: sizes.iter().map(|s| s.total_bytes).sum(),
            file_bytes,
            lengths: sizes,
        }
    }
}
