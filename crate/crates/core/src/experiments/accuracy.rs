use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_route, Pipeline};
use crate::detector_sim::DetectorModel;
use crate::error::ExperimentError;
use crate::localizer::{MatchMode, SessionConfig};
use crate::routes::Route;

/// Outcome of driving one test route.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RouteRun {
    /// First step (1-based) at which the session was localized at the true location.
    pub localized_step: Option<usize>,
    /// First step at which the session declared localization, right or wrong.
    pub first_declared: Option<usize>,
    /// Localized steps whose location was not the true one.
    pub wrong_steps: usize,
    /// Wrong localized steps after the first correct one.
    pub tracking_errors: usize,
    /// Times the session lost every candidate and was reset.
    pub lost: usize,
}

/// Percentage of test routes localized within each bucket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: MatchMode,
    pub q: f64,
    /// Upper end of the cumulative step range `0..=bucket`.
    pub bucket: usize,
    pub localized: usize,
    pub total: usize,
    pub percent: f64,
}

/// Cumulative bucket counts over `runs`.
pub fn accuracy_table(
    runs: &[RouteRun],
    buckets: &[usize],
    method: MatchMode,
    q: f64,
) -> Vec<AccuracyRow> {
    buckets
        .iter()
        .map(|&bucket| {
            let localized = runs
                .iter()
                .filter(|r| r.localized_step.is_some_and(|s| s <= bucket))
                .count();
            AccuracyRow {
                method,
                q,
                bucket,
                localized,
                total: runs.len(),
                percent: if runs.is_empty() {
                    0.0
                } else {
                    100.0 * localized as f64 / runs.len() as f64
                },
            }
        })
        .collect()
}

/// Runs every test route under one method and detector accuracy. Route `i`
/// draws its detector noise from stream `i`, so methods and accuracies are
/// compared on identical noise.
pub fn run_all(
    pipeline: &Pipeline,
    routes: &[Route],
    mode: MatchMode,
    q: f64,
) -> Result<Vec<RouteRun>, ExperimentError> {
    let detector = (q < 1.0)
        .then(|| DetectorModel::symmetric(q, pipeline.config.seed))
        .transpose()?;
    let session = SessionConfig {
        mode,
        ..pipeline.config.session.clone()
    };
    let headings = pipeline.headings();
    routes
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            run_route(
                &pipeline.db,
                &pipeline.bsds,
                &headings,
                r,
                detector.as_ref(),
                i as u64,
                &session,
            )
        })
        .collect()
}

/// Accuracy per bucket for turns only, descriptors only and both, at `config.q`.
pub fn accuracy_vs_length(pipeline: &Pipeline) -> Result<Vec<AccuracyRow>, ExperimentError> {
    let routes = pipeline.test_routes()?;
    let q = pipeline.config.q;
    let mut rows = Vec::new();
    for mode in [
        MatchMode::TurnsOnly,
        MatchMode::BsdOnly,
        MatchMode::BsdAndTurns,
    ] {
        let runs = run_all(pipeline, &routes, mode, q)?;
        rows.extend(accuracy_table(&runs, &pipeline.config.buckets, mode, q));
    }
    Ok(rows)
}

/// Accuracy per bucket for each configured q, matching descriptors and turns.
pub fn accuracy_vs_q(pipeline: &Pipeline) -> Result<Vec<AccuracyRow>, ExperimentError> {
    let routes = pipeline.test_routes()?;
    let mut rows = Vec::new();
    for &q in &pipeline.config.q_values {
        let runs = run_all(pipeline, &routes, MatchMode::BsdAndTurns, q)?;
        rows.extend(accuracy_table(
            &runs,
            &pipeline.config.buckets,
            MatchMode::BsdAndTurns,
            q,
        ));
    }
    Ok(rows)
}
