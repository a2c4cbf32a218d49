use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{observed_turns, Pipeline};
use crate::detector_sim::DetectorModel;
use crate::error::ExperimentError;
use crate::hamming_index::{hamming_words, words_for};
use crate::routes::{Route, RouteDescriptor, TurnPattern};

/// Number of candidate routes at one descriptor distance from the query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HammingRow {
    pub length: usize,
    /// Whether candidates were restricted to the query's turn pattern.
    pub turns: bool,
    pub distance: u32,
    pub count: usize,
    /// Whether the true route is among the routes at this distance.
    pub true_route: bool,
}

/// Distance histograms from a noisy query along the probe route's first `L`
/// locations to every stored route of length `L`, with and without the turn
/// filter, for each configured `L`.
pub fn hamming_histogram(pipeline: &Pipeline) -> Result<Vec<HammingRow>, ExperimentError> {
    let probe = pipeline.probe_route()?;
    let db = &pipeline.db;
    let q = pipeline.config.q;
    let detector = (q < 1.0)
        .then(|| DetectorModel::symmetric(q, pipeline.config.seed))
        .transpose()?;
    let headings = pipeline.headings();
    let mut rows = Vec::new();
    for &length in &pipeline.config.hamming_lengths {
        if length == 0 || length > probe.len() {
            return Err(ExperimentError::Config(format!(
                "histogram length {length} outside 1..={}",
                probe.len()
            )));
        }
        let prefix = Route(probe.0[..length].to_vec());
        let truth: Vec<_> = prefix.0.iter().map(|l| pipeline.bsds[l.index()]).collect();
        let observed = match &detector {
            Some(d) => d.estimate_sequence(&truth, pipeline.config.probe_route as u64),
            None => truth,
        };
        let query = RouteDescriptor::from_bsds(&observed);
        let key =
            TurnPattern::from_bools(&observed_turns(&prefix, &headings, db.turn_threshold())).key();
        let true_index = db.find(&prefix)?;

        let w = words_for(4 * length);
        let words = db.descriptor_words(length)?;
        let keys = db.turn_keys(length)?;
        let mut all: BTreeMap<u32, (usize, bool)> = BTreeMap::new();
        let mut filtered: BTreeMap<u32, (usize, bool)> = BTreeMap::new();
        for (i, chunk) in words.chunks_exact(w).enumerate() {
            let d = hamming_words(query.bits().words(), chunk);
            let is_true = true_index == Some(i as u32);
            let e = all.entry(d).or_default();
            e.0 += 1;
            e.1 |= is_true;
            if keys[i] == key {
                let e = filtered.entry(d).or_default();
                e.0 += 1;
                e.1 |= is_true;
            }
        }
        for (turns, hist) in [(false, all), (true, filtered)] {
            rows.extend(
                hist.into_iter()
                    .map(|(distance, (count, true_route))| HammingRow {
                        length,
                        turns,
                        distance,
                        count,
                        true_route,
                    }),
            );
        }
    }
    Ok(rows)
}
