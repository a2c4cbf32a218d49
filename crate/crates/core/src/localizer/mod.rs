//! Route localization sessions: growing queries until successive best matches
//! agree, then tracking with a fixed-length sliding window. Also the
//! likelihood model used to score descriptor distances.

mod consistency;
mod probability;

pub use consistency::{
    consistency_check, route_overlap, ConsistencyMode, ConsistencyTracker, StepEvidence,
};
pub use probability::{
    likelihood_ratio, log_likelihood_ratio, log_posterior_weight, normalize_log_weights,
    posterior_weight, route_posterior, single_location_posterior, LikelihoodModel,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::SessionError;
use crate::hamming_index::{Match, MatchResult, MatchStatus};
use crate::map_model::{Bsd, LocationId};
use crate::routes::{RouteDatabase, RouteDescriptor, RouteRef, TurnPattern};

/// Which parts of the observations are matched against the database.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Exact turn pattern, then nearest descriptor.
    #[default]
    BsdAndTurns,
    /// Nearest descriptor, turns ignored.
    BsdOnly,
    /// Exact turn pattern; every route in the class ties.
    TurnsOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Bootstrapping,
    Localized,
    Lost,
}

impl SessionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionStatus::Bootstrapping => "bootstrapping",
            SessionStatus::Localized => "localized",
            SessionStatus::Lost => "lost",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Minimum shared fraction of locations between successive best routes.
    pub overlap_threshold: f64,
    /// Successive agreeing steps needed to declare localization.
    pub streak: usize,
    /// Longest query; `None` uses the database's maximum length.
    pub max_length: Option<usize>,
    pub mode: MatchMode,
    pub consistency: ConsistencyMode,
    /// Most tied routes examined when judging a tie or breaking it.
    pub tie_cap: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            overlap_threshold: 0.8,
            streak: 5,
            max_length: None,
            mode: MatchMode::BsdAndTurns,
            consistency: ConsistencyMode::Pairwise,
            tie_cap: 64,
        }
    }
}

/// What happened at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// 0-based step index.
    pub step: usize,
    pub query_length: usize,
    /// Status after the step.
    pub status: SessionStatus,
    /// Best matches, truncated to the tie cap.
    pub result: MatchResult,
    /// Size of the full tied-best set.
    pub tie_count: usize,
    /// The route the session settled on this step.
    pub top: Option<RouteRef>,
    pub streak: usize,
}

/// The result of [`LocalizationSession::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub status: SessionStatus,
    pub result: MatchResult,
    /// Present once localized.
    pub localized_route: Option<RouteRef>,
    /// Last location of `localized_route`.
    pub location: Option<LocationId>,
}

/// One localization run over a stream of observations.
#[derive(Clone, Debug)]
pub struct LocalizationSession {
    config: SessionConfig,
    bsds: Vec<Bsd>,
    turns: Vec<bool>,
    history: Vec<StepRecord>,
    status: SessionStatus,
    window: Option<usize>,
    tracker: ConsistencyTracker,
    top_route: Vec<LocationId>,
}

impl LocalizationSession {
    pub fn new(config: SessionConfig) -> Self {
        let tracker =
            ConsistencyTracker::new(config.overlap_threshold, config.streak, config.consistency);
        Self {
            config,
            bsds: Vec::new(),
            turns: Vec::new(),
            history: Vec::new(),
            status: SessionStatus::Bootstrapping,
            window: None,
            tracker,
            top_route: Vec::new(),
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn observed_bsds(&self) -> &[Bsd] {
        &self.bsds
    }

    pub fn observed_turns(&self) -> &[bool] {
        &self.turns
    }

    /// Fixed query length used while tracking.
    pub fn window(&self) -> Option<usize> {
        self.window
    }

    pub fn streak(&self) -> usize {
        self.tracker.streak()
    }

    /// Clears observations and history and starts bootstrapping again.
    pub fn reset(&mut self) {
        *self = Self::new(self.config.clone());
    }

    fn max_length(&self, db: &RouteDatabase) -> usize {
        self.config
            .max_length
            .map_or(db.max_length(), |m| m.min(db.max_length()))
    }

    /// Feeds one observation. `turn` is the turn bit between the previous
    /// location and this one and must be given for every step but the first.
    pub fn step(
        &mut self,
        db: &RouteDatabase,
        bsd: Bsd,
        turn: Option<bool>,
    ) -> Result<StepOutcome, SessionError> {
        if self.status == SessionStatus::Lost {
            return Err(SessionError::Lost);
        }
        let step = self.bsds.len();
        if step > 0 {
            let t = turn.ok_or(SessionError::MissingTurn(step))?;
            self.turns.push(t);
        }
        self.bsds.push(bsd);

        let max_len = self.max_length(db).max(1);
        let n = self
            .window
            .unwrap_or(self.bsds.len())
            .min(self.bsds.len())
            .min(max_len);
        let query_bsds = &self.bsds[self.bsds.len() - n..];
        let query_turns = &self.turns[self.turns.len() - (n - 1)..];
        let descriptor = RouteDescriptor::from_bsds(query_bsds);
        let pattern = TurnPattern::from_bools(query_turns);

        let result = match self.config.mode {
            MatchMode::BsdAndTurns => db.match_route(&descriptor, &pattern, 1)?,
            MatchMode::BsdOnly => db.match_descriptor(&descriptor, 1)?,
            MatchMode::TurnsOnly => {
                let class = db.turn_class(&pattern)?;
                if class.is_empty() {
                    MatchResult::empty_turns()
                } else {
                    let entries = class
                        .into_iter()
                        .map(|route| Match { distance: 0, route })
                        .collect();
                    MatchResult::from_entries(entries, 0)
                }
            }
        };
        let tie_count = result.tie_count();
        let mut stored = result.clone();
        stored.entries.truncate(tie_count.min(self.config.tie_cap));

        if result.status == MatchStatus::TurnFilterEmpty || result.entries.is_empty() {
            log::info!("step {step}: no route of length {n} matches the observed turn pattern; session lost");
            self.status = SessionStatus::Lost;
            self.tracker.clear();
            self.history.push(StepRecord {
                step,
                query_length: n,
                status: self.status,
                result: stored,
                tie_count,
                top: None,
                streak: 0,
            });
            return Ok(StepOutcome {
                status: self.status,
                result,
                localized_route: None,
                location: None,
            });
        }

        let ties = &result.entries[..tie_count.min(self.config.tie_cap)];
        let top = match self.status {
            SessionStatus::Localized => {
                let mut best: Option<(f64, u32)> = None;
                for m in ties {
                    let locs = db.route(RouteRef {
                        length: n,
                        index: m.route,
                    })?;
                    let overlap = route_overlap(&self.top_route, locs.locations());
                    if best.is_none_or(|(o, _)| overlap > o) {
                        best = Some((overlap, m.route));
                    }
                }
                RouteRef {
                    length: n,
                    index: best.expect("nonempty ties").1,
                }
            }
            _ => {
                let tied: Vec<Vec<LocationId>> = ties
                    .iter()
                    .map(|m| {
                        db.route(RouteRef {
                            length: n,
                            index: m.route,
                        })
                        .map(|r| r.0)
                    })
                    .collect::<Result<_, _>>()?;
                let complete = tie_count <= self.config.tie_cap;
                // tied routes that all end at one location still localize uniquely
                let same_end = complete && tied.iter().all(|r| r.last() == tied[0].last());
                let unique_best = tie_count == 1 || same_end;
                let evidence = StepEvidence {
                    top: tied[0].clone(),
                    unique_best,
                    ties: if unique_best { Vec::new() } else { tied },
                    ties_complete: complete,
                };
                self.tracker.push(&evidence);
                if self.tracker.is_consistent() {
                    self.status = SessionStatus::Localized;
                    self.window = Some(n);
                    log::debug!("step {step}: localized with window {n}");
                }
                RouteRef {
                    length: n,
                    index: ties[0].route,
                }
            }
        };
        self.top_route = db.route(top)?.0;

        self.history.push(StepRecord {
            step,
            query_length: n,
            status: self.status,
            result: stored,
            tie_count,
            top: Some(top),
            streak: self.tracker.streak(),
        });
        let localized = self.status == SessionStatus::Localized;
        Ok(StepOutcome {
            status: self.status,
            result,
            localized_route: localized.then_some(top),
            location: if localized {
                self.top_route.last().copied()
            } else {
                None
            },
        })
    }
}

/// One row of the session event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub step: usize,
    pub query_length: usize,
    pub status: SessionStatus,
    /// Index of the chosen route among routes of `query_length`.
    pub best_route: Option<u32>,
    pub distance: Option<u32>,
    pub tie_count: usize,
}

impl From<&StepRecord> for SessionEvent {
    fn from(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            query_length: r.query_length,
            status: r.status,
            best_route: r.top.map(|t| t.index),
            distance: r.result.best_distance(),
            tie_count: r.tie_count,
        }
    }
}

/// Writes `history` as CSV, one row per step.
pub fn write_event_log<W: Write>(history: &[StepRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in history {
        w.serialize(SessionEvent::from(r))?;
    }
    w.flush()?;
    Ok(())
}
