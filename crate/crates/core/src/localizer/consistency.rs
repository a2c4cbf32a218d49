use serde::{Deserialize, Serialize};

use crate::map_model::LocationId;

/// How successive top routes must agree before a session counts as localized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyMode {
    /// Each top route overlaps the previous one.
    #[default]
    Pairwise,
    /// Every pair of top routes in the streak overlaps.
    Mutual,
}

/// Shared locations as a fraction of the shorter route.
pub fn route_overlap(a: &[LocationId], b: &[LocationId]) -> f64 {
    let shorter = a.len().min(b.len());
    if shorter == 0 {
        return 0.0;
    }
    let mut sa = a.to_vec();
    sa.sort_unstable();
    let shared = b.iter().filter(|l| sa.binary_search(l).is_ok()).count();
    shared as f64 / shorter as f64
}

/// What one step's match contributed to the consistency decision.
#[derive(Clone, Debug, PartialEq)]
pub struct StepEvidence {
    /// Locations of the best route (lowest id among ties).
    pub top: Vec<LocationId>,
    pub unique_best: bool,
    /// Locations of the tied best routes, possibly capped; empty when unique.
    pub ties: Vec<Vec<LocationId>>,
    /// Whether `ties` holds the complete tie set.
    pub ties_complete: bool,
}

/// Incremental streak counter behind [`consistency_check`].
///
/// * A unique best route overlapping the previous reference route by at least
///   the threshold extends the streak; any other unique best starts a new
///   streak of 1 and becomes the reference.
/// * A tie whose members all overlap the reference leaves the streak as is.
/// * Any other tie (or an empty match) clears the streak.
#[derive(Clone, Debug)]
pub struct ConsistencyTracker {
    threshold: f64,
    mode: ConsistencyMode,
    window: usize,
    streak: usize,
    /// Top routes of the current streak, oldest first, at most `window`.
    recent: Vec<Vec<LocationId>>,
}

impl ConsistencyTracker {
    pub fn new(threshold: f64, window: usize, mode: ConsistencyMode) -> Self {
        Self {
            threshold,
            mode,
            window: window.max(1),
            streak: 0,
            recent: Vec::new(),
        }
    }

    pub fn streak(&self) -> usize {
        self.streak
    }

    pub fn is_consistent(&self) -> bool {
        self.streak >= self.window
    }

    pub fn reference(&self) -> Option<&[LocationId]> {
        self.recent.last().map(Vec::as_slice)
    }

    pub fn clear(&mut self) {
        self.streak = 0;
        self.recent.clear();
    }

    pub fn push(&mut self, step: &StepEvidence) -> usize {
        if step.top.is_empty() {
            self.clear();
            return 0;
        }
        if step.unique_best {
            let agrees = match self.mode {
                ConsistencyMode::Pairwise => self
                    .reference()
                    .is_some_and(|r| route_overlap(r, &step.top) >= self.threshold),
                ConsistencyMode::Mutual => {
                    !self.recent.is_empty()
                        && self
                            .recent
                            .iter()
                            .all(|r| route_overlap(r, &step.top) >= self.threshold)
                }
            };
            if agrees {
                self.streak += 1;
            } else {
                self.streak = 1;
                self.recent.clear();
            }
            self.recent.push(step.top.clone());
            if self.recent.len() > self.window {
                self.recent.remove(0);
            }
        } else {
            let coherent = step.ties_complete
                && self.reference().is_some_and(|r| {
                    step.ties
                        .iter()
                        .all(|t| route_overlap(r, t) >= self.threshold)
                });
            if !coherent {
                self.clear();
            }
        }
        self.streak
    }
}

/// Whether the last `streak` steps of `history` agree: each unique best route
/// overlaps its predecessor by at least `threshold` (ties handled as in
/// [`ConsistencyTracker`]).
pub fn consistency_check(
    history: &[StepEvidence],
    threshold: f64,
    streak: usize,
    mode: ConsistencyMode,
) -> bool {
    let mut t = ConsistencyTracker::new(threshold, streak, mode);
    for step in history {
        t.push(step);
    }
    t.is_consistent()
}
