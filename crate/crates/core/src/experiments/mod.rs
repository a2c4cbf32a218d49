//! Evaluation harness: test-route sampling, simulated localization runs and the
//! CSV / GeoJSON reports built from them.

mod accuracy;
mod distribution;
mod hamming;
mod output;
mod snapshot;

pub use accuracy::{
    accuracy_table, accuracy_vs_length, accuracy_vs_q, run_all, AccuracyRow, RouteRun,
};
pub use distribution::{bsd_distribution, flip_kernel, DistributionRow};
pub use hamming::{hamming_histogram, HammingRow};
pub use output::{read_csv, write_csv};
pub use snapshot::{snapshot, Snapshot};

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector_sim::DetectorModel;
use crate::error::ExperimentError;
use crate::localizer::{LocalizationSession, SessionConfig, SessionStatus};
use crate::map_ingest::{
    generate_synthetic_city, load_map_json, map_hash, parse_osm, MapArtifacts, SyntheticCityParams,
    DEFAULT_HIGHWAYS, DEFAULT_SPACING_M,
};
use crate::map_model::{compute_bsd_table, BsdConfig, BsdTable};
use crate::routes::{
    build_adjacency, turn_bit, AdjacencyMatrix, DatabaseConfig, Route, RouteDatabase,
};

/// Where the map comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSource {
    Synthetic(SyntheticCityParams),
    /// A map file written by the `ingest` or `synth` commands.
    Json {
        path: PathBuf,
    },
    Osm {
        path: PathBuf,
        #[serde(default)]
        highways: Option<Vec<String>>,
    },
}

impl Default for MapSource {
    fn default() -> Self {
        MapSource::Synthetic(SyntheticCityParams::default())
    }
}

impl MapSource {
    pub fn load(&self, spacing: f64) -> Result<MapArtifacts, ExperimentError> {
        Ok(match self {
            MapSource::Synthetic(params) => {
                MapArtifacts::from_synthetic(generate_synthetic_city(params)?, spacing)?
            }
            MapSource::Json { path } => {
                load_map_json(fs::File::open(path).map_err(|e| ExperimentError::file(path, e))?)?
            }
            MapSource::Osm { path, highways } => {
                let xml = fs::read_to_string(path).map_err(|e| ExperimentError::file(path, e))?;
                let names: Vec<&str> = match highways {
                    Some(h) => h.iter().map(String::as_str).collect(),
                    None => DEFAULT_HIGHWAYS.to_vec(),
                };
                let ex = parse_osm(&xml, &names)?;
                MapArtifacts::assemble(ex.origin, ex.network, ex.buildings, spacing)?
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSource,
    /// Distance between sampled locations, meters.
    pub spacing: f64,
    pub bsd: BsdConfig,
    /// Longest route length (M).
    pub max_length: usize,
    pub turn_threshold: f64,
    /// Per-length cap on stored routes.
    pub route_limit: Option<usize>,
    /// Cumulative step buckets: a route counts in bucket `b` if localized by step `b`.
    pub buckets: Vec<usize>,
    /// Detector accuracy for single-q experiments.
    pub q: f64,
    pub q_values: Vec<f64>,
    pub test_routes: usize,
    pub seed: u64,
    pub session: SessionConfig,
    /// Query lengths for the distance histograms.
    pub hamming_lengths: Vec<usize>,
    /// Which sampled test route the histogram and snapshot commands use.
    pub probe_route: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            map: MapSource::default(),
            spacing: DEFAULT_SPACING_M,
            bsd: BsdConfig::default(),
            max_length: 40,
            turn_threshold: crate::routes::DEFAULT_TURN_THRESHOLD,
            route_limit: None,
            buckets: (1..=8).map(|i| 5 * i).collect(),
            q: 0.75,
            q_values: vec![0.5, 0.6, 0.75, 0.9, 1.0],
            test_routes: 150,
            seed: 1,
            session: SessionConfig::default(),
            hamming_lengths: vec![15, 30],
            probe_route: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML or JSON, chosen by file extension (`.json` is JSON, anything else TOML).
    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::file(path, e))?;
        let config: Self = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad(format!("spacing {} must be positive", self.spacing));
        }
        if self.max_length == 0 || self.max_length > 64 {
            return bad(format!("max_length {} outside 1..=64", self.max_length));
        }
        if self.test_routes == 0 {
            return bad("test_routes must be positive".into());
        }
        if self.buckets.is_empty() || self.buckets.contains(&0) {
            return bad("buckets must be positive step counts".into());
        }
        if self.route_limit == Some(0) {
            return bad("route_limit must be positive".into());
        }
        if self.session.streak == 0 || self.session.tie_cap == 0 {
            return bad("session streak and tie cap must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.session.overlap_threshold) {
            return bad(format!(
                "overlap threshold {} outside [0, 1]",
                self.session.overlap_threshold
            ));
        }
        for q in std::iter::once(self.q).chain(self.q_values.iter().copied()) {
            if !(0.0..=1.0).contains(&q) {
                return bad(format!("q value {q} outside [0, 1]"));
            }
        }
        self.bsd
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Hex prefix of the SHA-256 of the configuration's JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn database_config(&self) -> DatabaseConfig {
        DatabaseConfig {
            max_length: self.max_length,
            turn_threshold: self.turn_threshold,
            limit: self.route_limit,
        }
    }
}

/// A loaded map with its descriptor table and route database.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub artifacts: MapArtifacts,
    pub bsds: BsdTable,
    pub adjacency: AdjacencyMatrix,
    pub db: RouteDatabase,
}

impl Pipeline {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let artifacts = config.map.load(config.spacing)?;
        Self::from_artifacts(config, artifacts)
    }

    pub fn from_artifacts(
        config: ExperimentConfig,
        artifacts: MapArtifacts,
    ) -> Result<Self, ExperimentError> {
        let bsds = compute_bsd_table(artifacts.locations(), &artifacts.map, &config.bsd);
        let adjacency = build_adjacency(&artifacts.sampled, &artifacts.graph);
        let hash = map_hash(&artifacts)?;
        let db = RouteDatabase::build(
            &artifacts.sampled,
            &adjacency,
            &bsds,
            hash,
            &config.database_config(),
        )?;
        log::info!(
            "{} locations, {} routes up to length {}",
            artifacts.locations().len(),
            db.total_routes(),
            config.max_length
        );
        Ok(Self {
            config,
            artifacts,
            bsds,
            adjacency,
            db,
        })
    }

    pub fn headings(&self) -> Vec<f64> {
        self.artifacts.headings()
    }

    /// Test routes of length M, sampled uniformly without replacement.
    pub fn test_routes(&self) -> Result<Vec<Route>, ExperimentError> {
        let length = self.config.max_length;
        sample_test_routes(&self.db, length, self.config.test_routes, self.config.seed)?
            .into_iter()
            .map(|index| Ok(self.db.route(crate::routes::RouteRef { length, index })?))
            .collect()
    }

    /// The configured probe route for single-route reports.
    pub fn probe_route(&self) -> Result<Route, ExperimentError> {
        let routes = self.test_routes()?;
        routes
            .into_iter()
            .nth(self.config.probe_route)
            .ok_or_else(|| {
                ExperimentError::Config(format!(
                    "probe_route {} is not below test_routes {}",
                    self.config.probe_route, self.config.test_routes
                ))
            })
    }
}

/// `n` distinct indices among the routes of `length`, seeded.
pub fn sample_test_routes(
    db: &RouteDatabase,
    length: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<u32>, ExperimentError> {
    let available = db.count(length);
    if available < n {
        return Err(ExperimentError::InsufficientRoutes {
            length,
            available,
            requested: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, available, n)
        .into_iter()
        .map(|i| i as u32)
        .collect())
}

/// The turn bits a vehicle driving `route` would observe.
pub fn observed_turns(route: &Route, headings: &[f64], tau: f64) -> Vec<bool> {
    route
        .0
        .windows(2)
        .map(|w| turn_bit(headings[w[0].index()], headings[w[1].index()], tau))
        .collect()
}

/// Drives one session along `route`, feeding detector estimates of the true
/// descriptors (or the truth itself when `detector` is `None`) and exact turns.
///
/// A lost session is reset and continues from the next observation.
pub fn run_route(
    db: &RouteDatabase,
    bsds: &BsdTable,
    headings: &[f64],
    route: &Route,
    detector: Option<&DetectorModel>,
    stream: u64,
    session: &SessionConfig,
) -> Result<RouteRun, ExperimentError> {
    let turns = observed_turns(route, headings, db.turn_threshold());
    let mut s = LocalizationSession::new(session.clone());
    let mut run = RouteRun::default();
    for (k, loc) in route.0.iter().enumerate() {
        let truth = bsds[loc.index()];
        let observed = match detector {
            Some(d) => d.estimate_indexed(truth, stream, k as u64),
            None => truth,
        };
        let turn = (k > 0).then(|| turns[k - 1]);
        let out = s.step(db, observed, turn)?;
        let step = k + 1;
        match out.status {
            SessionStatus::Localized => {
                run.first_declared.get_or_insert(step);
                if out.location == Some(*loc) {
                    run.localized_step.get_or_insert(step);
                } else {
                    if run.localized_step.is_some() {
                        run.tracking_errors += 1;
                    }
                    run.wrong_steps += 1;
                }
            }
            SessionStatus::Lost => {
                run.lost += 1;
                s.reset();
            }
            SessionStatus::Bootstrapping => {}
        }
    }
    Ok(run)
}
