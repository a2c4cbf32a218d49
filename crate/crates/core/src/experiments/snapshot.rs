use serde_json::{json, Value};

use super::{observed_turns, Pipeline};
use crate::detector_sim::DetectorModel;
use crate::error::{ExperimentError, SessionError};
use crate::hamming_index::{hamming_words, words_for};
use crate::localizer::{LocalizationSession, MatchMode, SessionStatus};
use crate::map_model::LocationId;
use crate::routes::{RouteDescriptor, RouteRef, TurnPattern};

/// State of a session on the probe route after a given number of steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub status: SessionStatus,
    pub top: Option<RouteRef>,
    /// Per location: smallest distance from the query to a candidate route ending there.
    pub closeness: Vec<Option<u32>>,
    pub true_location: LocationId,
    pub geojson: Value,
}

impl Snapshot {
    /// Locations sharing the smallest closeness value.
    pub fn best_locations(&self) -> Vec<LocationId> {
        let Some(min) = self.closeness.iter().flatten().min() else {
            return Vec::new();
        };
        (0..self.closeness.len() as u32)
            .map(LocationId)
            .filter(|l| self.closeness[l.index()] == Some(*min))
            .collect()
    }
}

/// Drives the probe route for `steps` observations and reports how closely
/// each location's best candidate route matches the query at that point.
pub fn snapshot(pipeline: &Pipeline, steps: usize) -> Result<Snapshot, ExperimentError> {
    let probe = pipeline.probe_route()?;
    if steps == 0 || steps > probe.len() {
        return Err(ExperimentError::Config(format!(
            "snapshot step {steps} outside 1..={}",
            probe.len()
        )));
    }
    let db = &pipeline.db;
    let q = pipeline.config.q;
    let detector = (q < 1.0)
        .then(|| DetectorModel::symmetric(q, pipeline.config.seed))
        .transpose()?;
    let headings = pipeline.headings();
    let turns = observed_turns(&probe, &headings, db.turn_threshold());
    let stream = pipeline.config.probe_route as u64;

    let mut session = LocalizationSession::new(pipeline.config.session.clone());
    let mut last = None;
    for (k, loc) in probe.0[..steps].iter().enumerate() {
        let truth = pipeline.bsds[loc.index()];
        let observed = detector
            .as_ref()
            .map_or(truth, |d| d.estimate_indexed(truth, stream, k as u64));
        match session.step(db, observed, (k > 0).then(|| turns[k - 1])) {
            Ok(out) => last = Some(out),
            Err(SessionError::Lost) => break,
            Err(e) => return Err(e.into()),
        }
    }
    let record = session
        .history()
        .last()
        .ok_or(SessionError::EmptyHistory)?
        .clone();
    let n = record.query_length;
    let obs = session.observed_bsds();
    let query = RouteDescriptor::from_bsds(&obs[obs.len() - n..]);
    let tb = session.observed_turns();
    let pattern = TurnPattern::from_bools(&tb[tb.len() - (n - 1)..]);

    let w = words_for(4 * n);
    let words = db.descriptor_words(n)?;
    let candidates: Vec<u32> = match pipeline.config.session.mode {
        MatchMode::BsdOnly => (0..db.count(n) as u32).collect(),
        _ => db.turn_class(&pattern)?,
    };
    let mut closeness = vec![None::<u32>; pipeline.artifacts.locations().len()];
    for &i in &candidates {
        let chunk = &words[i as usize * w..(i as usize + 1) * w];
        let d = match pipeline.config.session.mode {
            MatchMode::TurnsOnly => 0,
            _ => hamming_words(query.bits().words(), chunk),
        };
        let end = db.last_location(RouteRef {
            length: n,
            index: i,
        })?;
        let slot = &mut closeness[end.index()];
        *slot = Some(slot.map_or(d, |c| c.min(d)));
    }

    let status = last.as_ref().map_or(session.status(), |o| o.status);
    let top = record.top;
    let true_location = probe.0[steps - 1];
    let top_route = top.map(|t| db.route(t)).transpose()?;
    let origin = pipeline.artifacts.origin;
    let lonlat = |id: LocationId| {
        let (lat, lon) = origin.to_geographic(&pipeline.artifacts.location(id).position);
        json!([lon, lat])
    };

    let mut features: Vec<Value> = pipeline
        .artifacts
        .locations()
        .iter()
        .map(|l| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": lonlat(l.id) },
                "properties": {
                    "location_id": l.id.0,
                    "heading": l.heading,
                    "distance": closeness[l.id.index()],
                    "current": l.id == true_location,
                    "best_route_end": top_route.as_ref().and_then(|r| r.last()) == Some(l.id),
                },
            })
        })
        .collect();
    if let Some(r) = &top_route {
        let coords: Vec<Value> = r.0.iter().map(|&id| lonlat(id)).collect();
        let geometry = if coords.len() >= 2 {
            json!({ "type": "LineString", "coordinates": coords })
        } else {
            json!({ "type": "Point", "coordinates": coords[0] })
        };
        features.push(json!({
            "type": "Feature",
            "geometry": geometry,
            "properties": {
                "best_route": top.map(|t| t.index),
                "length": n,
                "status": status.as_str(),
                "distance": record.result.best_distance(),
                "tie_count": record.tie_count,
            },
        }));
    }
    let geojson = json!({ "type": "FeatureCollection", "features": features });
    Ok(Snapshot {
        step: record.step + 1,
        status,
        top,
        closeness,
        true_location,
        geojson,
    })
}
