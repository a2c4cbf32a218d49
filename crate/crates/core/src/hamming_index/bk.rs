use super::{hamming_words, words_for, BitString};
use crate::error::IndexError;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct BkNode {
    route: u32,
    /// Distance to the parent node.
    key: u32,
    first_child: u32,
    next_sibling: u32,
    /// Head of the list of further routes with an identical descriptor.
    dup_head: u32,
}

/// One candidate route and its distance to the query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub distance: u32,
    pub route: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchStatus {
    Matched,
    /// No stored route has the query's turn pattern.
    TurnFilterEmpty,
}

/// Ranked candidates, ascending by distance and then route id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchResult {
    pub entries: Vec<Match>,
    pub status: MatchStatus,
    /// Tree nodes whose descriptor was compared with the query.
    pub visited: usize,
}

impl MatchResult {
    pub fn empty_turns() -> Self {
        Self {
            entries: Vec::new(),
            status: MatchStatus::TurnFilterEmpty,
            visited: 0,
        }
    }

    /// Sorts `entries` and wraps them.
    pub fn from_entries(mut entries: Vec<Match>, visited: usize) -> Self {
        entries.sort_unstable();
        Self {
            entries,
            status: MatchStatus::Matched,
            visited,
        }
    }

    pub fn best(&self) -> Option<Match> {
        self.entries.first().copied()
    }

    pub fn best_distance(&self) -> Option<u32> {
        self.entries.first().map(|m| m.distance)
    }

    /// Number of entries sharing the minimum distance.
    pub fn tie_count(&self) -> usize {
        match self.entries.first() {
            Some(b) => self
                .entries
                .iter()
                .take_while(|m| m.distance == b.distance)
                .count(),
            None => 0,
        }
    }

    pub fn unique_best(&self) -> bool {
        self.tie_count() == 1
    }

    /// The minimum-distance entries.
    pub fn ties(&self) -> &[Match] {
        &self.entries[..self.tie_count()]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BkStats {
    pub nodes: usize,
    pub entries: usize,
    pub depth: usize,
}

/// Burkhard–Keller tree over fixed-length bit strings.
///
/// Descriptors live in one flat word arena; each node's children form a
/// sibling list tagged with their distance to the node. Routes whose
/// descriptor equals an existing node's are kept in that node's bucket.
#[derive(Clone, Debug)]
pub struct BkIndex {
    bits: usize,
    stride: usize,
    words: Vec<u64>,
    nodes: Vec<BkNode>,
    /// Bucket entries: (route, next).
    dups: Vec<(u32, u32)>,
}

impl BkIndex {
    pub fn new(bits: usize) -> Self {
        Self {
            bits,
            stride: words_for(bits),
            words: Vec::new(),
            nodes: Vec::new(),
            dups: Vec::new(),
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.nodes.len() + self.dups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node_words(&self, node: usize) -> &[u64] {
        &self.words[node * self.stride..(node + 1) * self.stride]
    }

    pub fn insert(&mut self, descriptor: &BitString, route: u32) -> Result<(), IndexError> {
        if descriptor.len() != self.bits {
            return Err(IndexError::LengthMismatch {
                expected: self.bits,
                actual: descriptor.len(),
            });
        }
        self.insert_words(descriptor.words(), route);
        Ok(())
    }

    /// Inserts a descriptor given as packed words; the caller guarantees the length.
    pub fn insert_words(&mut self, words: &[u64], route: u32) {
        debug_assert_eq!(words.len(), self.stride);
        let new_node = |index: &mut Self, key: u32| -> u32 {
            index.words.extend_from_slice(words);
            index.nodes.push(BkNode {
                route,
                key,
                first_child: NONE,
                next_sibling: NONE,
                dup_head: NONE,
            });
            (index.nodes.len() - 1) as u32
        };
        if self.nodes.is_empty() {
            new_node(self, 0);
            return;
        }
        let mut cur = 0usize;
        loop {
            let d = hamming_words(words, self.node_words(cur));
            if d == 0 {
                let head = self.nodes[cur].dup_head;
                self.dups.push((route, head));
                self.nodes[cur].dup_head = (self.dups.len() - 1) as u32;
                return;
            }
            let mut child = self.nodes[cur].first_child;
            while child != NONE && self.nodes[child as usize].key != d {
                child = self.nodes[child as usize].next_sibling;
            }
            if child == NONE {
                let n = new_node(self, d);
                self.nodes[n as usize].next_sibling = self.nodes[cur].first_child;
                self.nodes[cur].first_child = n;
                return;
            }
            cur = child as usize;
        }
    }

    fn for_each_route(&self, node: usize, mut f: impl FnMut(u32)) {
        f(self.nodes[node].route);
        let mut d = self.nodes[node].dup_head;
        while d != NONE {
            let (route, next) = self.dups[d as usize];
            f(route);
            d = next;
        }
    }

    /// Every stored route id, in no particular order.
    pub fn routes(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.len());
        for n in 0..self.nodes.len() {
            self.for_each_route(n, |r| out.push(r));
        }
        out
    }

    /// All entries whose distance is among the `tiers` smallest distinct
    /// distances to `query` (`tiers = 1` gives exactly the co-minimal set).
    /// Pruning uses only the triangle inequality, so the result equals a
    /// linear scan.
    pub fn nearest(&self, query: &BitString, tiers: usize) -> Result<MatchResult, IndexError> {
        if query.len() != self.bits {
            return Err(IndexError::LengthMismatch {
                expected: self.bits,
                actual: query.len(),
            });
        }
        if self.nodes.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        let tiers = tiers.max(1);
        let q = query.words();
        // distinct distances found so far, ascending, at most `tiers` long
        let mut best: Vec<u32> = Vec::with_capacity(tiers + 1);
        let bound = |best: &Vec<u32>| {
            if best.len() < tiers {
                u32::MAX
            } else {
                best[tiers - 1]
            }
        };
        let mut found: Vec<Match> = Vec::new();
        let mut stack: Vec<(u32, u32)> = vec![(0, 0)];
        let mut visited = 0usize;
        while let Some((node, lower)) = stack.pop() {
            if lower > bound(&best) {
                continue;
            }
            let node = node as usize;
            visited += 1;
            let d = hamming_words(q, self.node_words(node));
            if d <= bound(&best) {
                if let Err(pos) = best.binary_search(&d) {
                    best.insert(pos, d);
                    best.truncate(tiers);
                }
                self.for_each_route(node, |route| found.push(Match { distance: d, route }));
            }
            let b = bound(&best);
            let mut child = self.nodes[node].first_child;
            while child != NONE {
                let key = self.nodes[child as usize].key;
                let lb = key.abs_diff(d);
                if lb <= b {
                    stack.push((child, lb));
                }
                child = self.nodes[child as usize].next_sibling;
            }
        }
        let b = bound(&best);
        found.retain(|m| m.distance <= b);
        Ok(MatchResult::from_entries(found, visited))
    }

    /// All entries within `radius` of `query`.
    pub fn within(&self, query: &BitString, radius: u32) -> Result<Vec<Match>, IndexError> {
        if query.len() != self.bits {
            return Err(IndexError::LengthMismatch {
                expected: self.bits,
                actual: query.len(),
            });
        }
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return Ok(out);
        }
        let mut stack = vec![0u32];
        while let Some(node) = stack.pop() {
            let node = node as usize;
            let d = hamming_words(query.words(), self.node_words(node));
            if d <= radius {
                self.for_each_route(node, |route| out.push(Match { distance: d, route }));
            }
            let mut child = self.nodes[node].first_child;
            while child != NONE {
                if self.nodes[child as usize].key.abs_diff(d) <= radius {
                    stack.push(child);
                }
                child = self.nodes[child as usize].next_sibling;
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn stats(&self) -> BkStats {
        let mut depth = 0;
        let mut stack = if self.nodes.is_empty() {
            vec![]
        } else {
            vec![(0u32, 1usize)]
        };
        while let Some((n, d)) = stack.pop() {
            depth = depth.max(d);
            let mut c = self.nodes[n as usize].first_child;
            while c != NONE {
                stack.push((c, d + 1));
                c = self.nodes[c as usize].next_sibling;
            }
        }
        BkStats {
            nodes: self.nodes.len(),
            entries: self.len(),
            depth,
        }
    }

    /// Checks that every child's key equals its distance to its parent.
    pub fn check_structure(&self) -> bool {
        (0..self.nodes.len()).all(|n| {
            let mut c = self.nodes[n].first_child;
            while c != NONE {
                let cu = c as usize;
                if hamming_words(self.node_words(n), self.node_words(cu)) != self.nodes[cu].key {
                    return false;
                }
                c = self.nodes[cu].next_sibling;
            }
            true
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn first_insert_becomes_root() {
        let mut t = BkIndex::new(4);
        t.insert(&bs("1010"), 7).unwrap();
        assert_eq!(
            t.stats(),
            BkStats {
                nodes: 1,
                entries: 1,
                depth: 1
            }
        );
        let r = t.nearest(&bs("1010"), 1).unwrap();
        assert_eq!(
            r.entries,
            vec![Match {
                distance: 0,
                route: 7
            }]
        );
    }

    #[test]
    fn duplicates_go_to_the_bucket() {
        let mut t = BkIndex::new(4);
        t.insert(&bs("1010"), 1).unwrap();
        t.insert(&bs("0000"), 2).unwrap();
        let before = t.stats().nodes;
        t.insert(&bs("1010"), 3).unwrap();
        assert_eq!(t.stats().nodes, before);
        assert_eq!(t.len(), 3);
        let r = t.nearest(&bs("1010"), 1).unwrap();
        assert_eq!(r.tie_count(), 2);
        assert_eq!(
            r.entries.iter().map(|m| m.route).collect::<Vec<_>>(),
            vec![1, 3]
        );
    }

    #[test]
    fn equidistant_entries_tie_in_route_order() {
        let mut t = BkIndex::new(4);
        t.insert(&bs("1100"), 9).unwrap();
        t.insert(&bs("0011"), 4).unwrap();
        let r = t.nearest(&bs("1001"), 1).unwrap();
        assert_eq!(r.tie_count(), 2);
        assert!(!r.unique_best());
        assert_eq!(r.entries[0].route, 4);
        assert_eq!(r.entries[1].route, 9);
    }

    #[test]
    fn tiers_extend_past_the_minimum() {
        let mut t = BkIndex::new(4);
        for (i, s) in ["0000", "0001", "0011", "0111", "1111"].iter().enumerate() {
            t.insert(&bs(s), i as u32).unwrap();
        }
        let r = t.nearest(&bs("0000"), 2).unwrap();
        assert_eq!(r.entries.len(), 2);
        let r = t.nearest(&bs("0000"), 5).unwrap();
        assert_eq!(
            r.entries.iter().map(|m| m.distance).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert!(t.check_structure());
    }

    #[test]
    fn errors() {
        let t = BkIndex::new(4);
        assert!(matches!(
            t.nearest(&bs("0000"), 1),
            Err(IndexError::EmptyIndex)
        ));
        let mut t = BkIndex::new(4);
        assert!(t.insert(&bs("000"), 0).is_err());
        t.insert(&bs("0000"), 0).unwrap();
        assert!(t.nearest(&bs("00000"), 1).is_err());
    }

    #[test]
    fn radius_query() {
        let mut t = BkIndex::new(4);
        for (i, s) in ["0000", "0001", "0011", "0111", "1111"].iter().enumerate() {
            t.insert(&bs(s), i as u32).unwrap();
        }
        let r = t.within(&bs("0001"), 1).unwrap();
        assert_eq!(r.iter().map(|m| m.route).collect::<Vec<_>>(), vec![1, 0, 2]);
    }
}
