use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsdloc::detector_sim::{load_estimates, DetectorModel};
use bsdloc::error::{ExperimentError, SessionError};
use bsdloc::experiments::{
    accuracy_vs_length, accuracy_vs_q, bsd_distribution, hamming_histogram, observed_turns,
    snapshot, write_csv, ExperimentConfig, MapSource, Pipeline,
};
use bsdloc::localizer::{write_event_log, LocalizationSession, MatchMode};
use bsdloc::map_ingest::{
    generate_synthetic_city, map_hash, parse_osm, save_map_json, MapArtifacts, DEFAULT_HIGHWAYS,
};
use bsdloc::map_model::compute_bsd_table;
use bsdloc::routes::{build_adjacency, RouteDatabase};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "bsdloc",
    version,
    about = "Localize a drive against a 2-D map from binary semantic descriptors"
)]
struct Cli {
    /// Experiment configuration, TOML or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one. `ingest` and `synth`
    /// also accept a `.json` file name here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Distance between sampled locations, meters.
    #[arg(long, global = true)]
    spacing: Option<f64>,
    /// Map file written by `ingest` or `synth`; overrides the configured map.
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an OSM-XML extract into a map file.
    Ingest {
        #[arg(long)]
        osm: PathBuf,
        /// Comma-separated highway classes to keep.
        #[arg(long, value_delimiter = ',')]
        highways: Option<Vec<String>>,
    },
    /// Generate a synthetic city into a map file.
    Synth {
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        block_size: Option<f64>,
    },
    /// Write the ground-truth descriptor of every location.
    Bsd,
    /// Build the route database and write it to disk.
    BuildDb,
    /// Run one localization session along a sampled test route.
    Localize {
        /// Index of the test route to drive.
        #[arg(long, default_value_t = 0)]
        route: usize,
        /// Detector accuracy; defaults to the configured q.
        #[arg(long)]
        q: Option<f64>,
        /// Externally estimated descriptors used instead of the simulated detector.
        #[arg(long)]
        estimates: Option<PathBuf>,
        /// Route database written by `build-db`; built in memory when absent.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Accuracy against steps driven, for each matching method.
    ExpLength,
    /// Accuracy against detector accuracy.
    ExpQ,
    /// Distance histograms from a probe query to all stored routes.
    ExpHamming,
    /// Ground-truth and estimated descriptor histograms.
    ExpDist,
    /// Per-location match closeness after a number of steps, as GeoJSON.
    Snapshot {
        #[arg(long)]
        step: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    BsdAndTurns,
    BsdOnly,
    TurnsOnly,
}

impl From<Mode> for MatchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::BsdAndTurns => MatchMode::BsdAndTurns,
            Mode::BsdOnly => MatchMode::BsdOnly,
            Mode::TurnsOnly => MatchMode::TurnsOnly,
        }
    }
}

#[derive(Serialize)]
struct BsdRow {
    location_id: u32,
    point_id: u32,
    x: f64,
    y: f64,
    heading: f64,
    junction_front: u8,
    junction_back: u8,
    gap_left: u8,
    gap_right: u8,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = match map_file_name(out) {
            Some(_) => out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map_or_else(|| PathBuf::from("."), Path::to_path_buf),
            None => out.clone(),
        };
    }
    if let Some(spacing) = cli.spacing {
        config.spacing = spacing;
    }
    if let Some(map) = &cli.map {
        config.map = MapSource::Json { path: map.clone() };
    }
    config.validate()?;
    Ok(config)
}

fn output_path(config: &ExperimentConfig, name: &str) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| ExperimentError::file(&config.output_dir, e))?;
    Ok(config.output_dir.join(name))
}

fn open(path: &Path) -> Result<File, ExperimentError> {
    File::open(path).map_err(|e| ExperimentError::file(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| ExperimentError::file(path, e))
}

fn write_rows<T: Serialize>(
    config: &ExperimentConfig,
    name: &str,
    rows: &[T],
) -> Result<PathBuf, ExperimentError> {
    let path = output_path(config, name)?;
    write_csv(create(&path)?, &config.config_hash(), rows)?;
    Ok(path)
}

fn map_file_name(out: &Path) -> Option<&std::ffi::OsStr> {
    out.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        .then(|| out.file_name())
        .flatten()
}

fn save_map(
    config: &ExperimentConfig,
    out: Option<&Path>,
    artifacts: &MapArtifacts,
) -> Result<PathBuf, ExperimentError> {
    let name = out
        .and_then(map_file_name)
        .and_then(|n| n.to_str())
        .unwrap_or("map.json");
    let path = output_path(config, name)?;
    save_map_json(artifacts, create(&path)?)?;
    Ok(path)
}

fn report(value: serde_json::Value) {
    println!("{value}");
}

/// A pipeline whose database is read from `db` rather than rebuilt.
fn pipeline_with_db(config: ExperimentConfig, db: &Path) -> Result<Pipeline, ExperimentError> {
    let artifacts = config.map.load(config.spacing)?;
    let db = RouteDatabase::load(db)?;
    let hash = map_hash(&artifacts)?;
    if db.map_hash() != hash {
        return Err(ExperimentError::Config(format!(
            "route database was built for map {:016x}, not {hash:016x}",
            db.map_hash()
        )));
    }
    let bsds = compute_bsd_table(artifacts.locations(), &artifacts.map, &config.bsd);
    let adjacency = build_adjacency(&artifacts.sampled, &artifacts.graph);
    Ok(Pipeline {
        config,
        artifacts,
        bsds,
        adjacency,
        db,
    })
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Ingest { osm, highways } => {
            let xml = fs::read_to_string(&osm).map_err(|e| ExperimentError::file(&osm, e))?;
            let names: Vec<&str> = match &highways {
                Some(h) => h.iter().map(String::as_str).collect(),
                None => DEFAULT_HIGHWAYS.to_vec(),
            };
            let ex = parse_osm(&xml, &names)?;
            let (skipped_ways, skipped_buildings) =
                (ex.skipped_missing_nodes, ex.skipped_buildings);
            let artifacts =
                MapArtifacts::assemble(ex.origin, ex.network, ex.buildings, config.spacing)?;
            let path = save_map(&config, cli.out.as_deref(), &artifacts)?;
            report(json!({
                "map": path,
                "locations": artifacts.locations().len(),
                "junctions": artifacts.graph.junctions().len(),
                "buildings": artifacts.map.buildings().len(),
                "skipped_ways": skipped_ways,
                "skipped_buildings": skipped_buildings,
            }));
        }
        Command::Synth {
            rows,
            cols,
            block_size,
        } => {
            let mut params = match &config.map {
                MapSource::Synthetic(p) => p.clone(),
                _ => Default::default(),
            };
            params.rows = rows.unwrap_or(params.rows);
            params.cols = cols.unwrap_or(params.cols);
            params.block_size = block_size.unwrap_or(params.block_size);
            if let Some(seed) = cli.seed {
                params.seed = seed;
            }
            let artifacts =
                MapArtifacts::from_synthetic(generate_synthetic_city(&params)?, config.spacing)?;
            let path = save_map(&config, cli.out.as_deref(), &artifacts)?;
            report(json!({
                "map": path,
                "locations": artifacts.locations().len(),
                "junctions": artifacts.graph.junctions().len(),
                "buildings": artifacts.map.buildings().len(),
            }));
        }
        Command::Bsd => {
            let artifacts = config.map.load(config.spacing)?;
            let table = compute_bsd_table(artifacts.locations(), &artifacts.map, &config.bsd);
            let rows: Vec<BsdRow> = artifacts
                .locations()
                .iter()
                .zip(&table)
                .map(|(l, d)| {
                    let [jf, jb, gl, gr] = d.bits().map(u8::from);
                    BsdRow {
                        location_id: l.id.0,
                        point_id: l.point.0,
                        x: l.position.x,
                        y: l.position.y,
                        heading: l.heading,
                        junction_front: jf,
                        junction_back: jb,
                        gap_left: gl,
                        gap_right: gr,
                    }
                })
                .collect();
            let path = write_rows(&config, "bsd.csv", &rows)?;
            report(json!({ "bsd": path, "locations": rows.len() }));
        }
        Command::BuildDb => {
            let pipeline = Pipeline::prepare(config)?;
            let path = output_path(&pipeline.config, "routes.db")?;
            pipeline.db.save(&path, None)?;
            let size = pipeline.db.size_report(None);
            report(json!({
                "db": path,
                "routes": size.routes,
                "payload_bytes": size.payload_bytes,
                "total_bytes": size.total_bytes,
                "file_bytes": size.file_bytes,
            }));
        }
        Command::Localize {
            route,
            q,
            estimates,
            db,
            mode,
        } => {
            if let Some(m) = mode {
                config.session.mode = m.into();
            }
            let q = q.unwrap_or(config.q);
            let pipeline = match &db {
                Some(path) => pipeline_with_db(config, path)?,
                None => Pipeline::prepare(config)?,
            };
            let routes = pipeline.test_routes()?;
            let truth = routes.get(route).ok_or_else(|| {
                ExperimentError::Config(format!(
                    "route {route} is not below test_routes {}",
                    routes.len()
                ))
            })?;
            let observed: Vec<_> = match &estimates {
                Some(path) => {
                    let table = load_estimates(open(path)?, pipeline.bsds.len())?;
                    truth
                        .locations()
                        .iter()
                        .map(|l| {
                            table.estimates.get(l).copied().ok_or_else(|| {
                                ExperimentError::Config(format!("estimates lack location {}", l.0))
                            })
                        })
                        .collect::<Result<_, _>>()?
                }
                None => {
                    let gt: Vec<_> = truth
                        .locations()
                        .iter()
                        .map(|l| pipeline.bsds[l.index()])
                        .collect();
                    if q < 1.0 {
                        DetectorModel::symmetric(q, pipeline.config.seed)?
                            .estimate_sequence(&gt, route as u64)
                    } else {
                        gt
                    }
                }
            };
            let turns = observed_turns(truth, &pipeline.headings(), pipeline.db.turn_threshold());

            let mut session = LocalizationSession::new(pipeline.config.session.clone());
            let mut first_correct = None;
            for (k, &bsd) in observed.iter().enumerate() {
                let outcome = match session.step(&pipeline.db, bsd, (k > 0).then(|| turns[k - 1])) {
                    Ok(o) => o,
                    Err(SessionError::Lost) => break,
                    Err(e) => return Err(e.into()),
                };
                if first_correct.is_none() && outcome.location == Some(truth.locations()[k]) {
                    first_correct = Some(k + 1);
                }
            }
            let path = output_path(&pipeline.config, "session.csv")?;
            write_event_log(session.history(), create(&path)?)?;
            report(json!({
                "events": path,
                "steps": session.history().len(),
                "status": session.status().as_str(),
                "first_correct_step": first_correct,
            }));
        }
        Command::ExpLength => {
            let pipeline = Pipeline::prepare(config)?;
            let rows = accuracy_vs_length(&pipeline)?;
            let path = write_rows(&pipeline.config, "accuracy_vs_length.csv", &rows)?;
            report(json!({ "csv": path, "rows": rows.len() }));
        }
        Command::ExpQ => {
            let pipeline = Pipeline::prepare(config)?;
            let rows = accuracy_vs_q(&pipeline)?;
            let path = write_rows(&pipeline.config, "accuracy_vs_q.csv", &rows)?;
            report(json!({ "csv": path, "rows": rows.len() }));
        }
        Command::ExpHamming => {
            let pipeline = Pipeline::prepare(config)?;
            let rows = hamming_histogram(&pipeline)?;
            let path = write_rows(&pipeline.config, "hamming.csv", &rows)?;
            report(json!({ "csv": path, "rows": rows.len() }));
        }
        Command::ExpDist => {
            let artifacts = config.map.load(config.spacing)?;
            let table = compute_bsd_table(artifacts.locations(), &artifacts.map, &config.bsd);
            let rows = bsd_distribution(&table, config.q, config.seed)?;
            let path = write_rows(&config, "bsd_distribution.csv", &rows)?;
            report(json!({ "csv": path, "locations": table.len() }));
        }
        Command::Snapshot { step } => {
            let pipeline = Pipeline::prepare(config)?;
            let snap = snapshot(&pipeline, step)?;
            let path = output_path(&pipeline.config, &format!("snapshot_step{step}.geojson"))?;
            serde_json::to_writer(create(&path)?, &snap.geojson)?;
            report(json!({
                "geojson": path,
                "step": snap.step,
                "status": snap.status.as_str(),
                "best_locations": snap.best_locations().len(),
            }));
        }
    }
    Ok(())
}
