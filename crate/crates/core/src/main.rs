use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use genrelab::audio::{decode_wav, encode_wav, normalize_clip, plan_corpus, synthesize, AudioClip, AudioError, ANALYSIS_SECONDS, WORKING_RATE};
use genrelab::classify::{train_all, BundleError, ModelBundle};
use genrelab::eval::{
    classify_report, parse_grid_csv, published_grid, run_protocol, write_grid_csv, Song, PUBLISHED_NARRATIVE_GREEN,
};
use genrelab::features::{extract_features, feature_names};
use genrelab::genre::parse_genre_set;
use genrelab::service::{self, AnalyzeResponse, AppState, ServeOptions};
use genrelab::store::{Store, BUNDLE_FILE};
use genrelab::Genre;

#[derive(Parser)]
#[command(name = "genrelab", version, about = "Music genre classification workbench")]
struct Cli {
    /// Directory holding the model bundle, history and feedback.
    #[arg(long, global = true, env = "GENRELAB_DATA_DIR", default_value = "./genrelab-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train all five models from a directory with one subdirectory of WAV files per genre.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to model.bundle.json in the data directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add one training row per genre of every stored user label.
        #[arg(long)]
        include_feedback: bool,
    },
    /// Write a synthetic labeled corpus and a manifest.csv.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        per_genre: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Clip length in seconds.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
    },
    /// Classify one WAV file.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run every manifest song several times and write the Green/Red grid.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recount a Green/Red grid CSV.
    ReplayGrid { fixture: PathBuf },
    /// Write one feature row per WAV file.
    Features {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API (and optionally the built web UI).
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        cors_allow_all: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug)]
struct CliError {
    code: &'static str,
    message: String,
    exit: u8,
}

impl CliError {
    fn data(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: 2 }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::data("IO_ERROR", format!("{}: {e}", path.display()))
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        let code = match e {
            BundleError::SchemaVersionMismatch { .. } => "SCHEMA_VERSION_MISMATCH",
            BundleError::CorruptBundle(_) => "CORRUPT_BUNDLE",
            BundleError::Io(_) => "IO_ERROR",
        };
        Self::data(code, e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("ERROR USAGE: {}", e.render().to_string().trim_end());
            return ExitCode::from(1);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "genrelab=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code, e.message);
            ExitCode::from(e.exit)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let data_dir = cli.data_dir;
    let model_path = |m: Option<PathBuf>| m.unwrap_or_else(|| data_dir.join(BUNDLE_FILE));
    match cli.command {
        Command::Train { dataset, seed, out, include_feedback } => {
            let store = include_feedback.then(|| open_store(&data_dir)).transpose()?;
            train(&dataset, seed, &model_path(out), store.as_ref())
        }
        Command::Synth { out, per_genre, seed, duration } => synth(&out, per_genre, seed, duration),
        Command::Analyze { file, model, format } => analyze(&file, &model_path(model), format),
        Command::Evaluate { manifest, model, runs, seed, out } => {
            evaluate(&manifest, &model_path(model), runs, seed, &out)
        }
        Command::ReplayGrid { fixture } => replay_grid(&fixture),
        Command::Features { files, out } => features(&files, &out),
        Command::Serve { model, host, port, static_dir, cors_allow_all } => {
            serve(&model_path(model), &data_dir, &host, port, ServeOptions { static_dir, cors_allow_all })
        }
    }
}

fn open_store(dir: &Path) -> CliResult<Store> {
    Store::open(dir).map_err(|e| CliError::data("STORE_ERROR", e.to_string()))
}

fn read_wav(path: &Path) -> CliResult<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_wav(&bytes).map_err(|e| CliError::data(e.code(), format!("{}: {e}", path.display())))
}

fn wav_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

/// GTZAN-style layout: `DIR/<genre>/*.wav`. Every genre needs at least two
/// files.
fn load_dataset(dir: &Path) -> CliResult<Vec<(Genre, PathBuf)>> {
    let mut by_genre: BTreeMap<Genre, Vec<PathBuf>> = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries.filter_map(Result::ok) {
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let genre: Genre = name
            .parse()
            .map_err(|e| CliError::data("UNKNOWN_GENRE", format!("{}: {e}", path.display())))?;
        by_genre.entry(genre).or_default().extend(wav_files(&path)?);
    }
    for g in Genre::ALL {
        let n = by_genre.get(&g).map_or(0, Vec::len);
        if n < 2 {
            return Err(CliError::data(
                "INSUFFICIENT_DATA",
                format!("genre {g} has {n} WAV files in {}, need at least 2", dir.display()),
            ));
        }
    }
    Ok(by_genre
        .into_iter()
        .flat_map(|(g, files)| files.into_iter().map(move |f| (g, f)))
        .collect())
}

fn feature_row(path: &Path) -> CliResult<Vec<f64>> {
    let clip = read_wav(path)?;
    let clip = normalize_clip(&clip, WORKING_RATE, ANALYSIS_SECONDS)
        .map_err(|e| CliError::data(e.code(), format!("{}: {e}", path.display())))?;
    let fv = extract_features(&clip)
        .map_err(|e| CliError::data("FEATURE_ERROR", format!("{}: {e}", path.display())))?;
    Ok(fv.values().to_vec())
}

fn train(dataset: &Path, seed: u64, out: &Path, feedback: Option<&Store>) -> CliResult {
    let items = load_dataset(dataset)?;
    tracing::info!(files = items.len(), "extracting features");
    let mut rows = items
        .par_iter()
        .map(|(_, path)| feature_row(path))
        .collect::<CliResult<Vec<_>>>()?;
    let mut labels: Vec<Genre> = items.iter().map(|(g, _)| *g).collect();
    if let Some(store) = feedback {
        let extra = store
            .export_training_feedback()
            .map_err(|e| CliError::data("STORE_ERROR", e.to_string()))?;
        tracing::info!(rows = extra.len(), "adding labeled feedback");
        for (fv, g) in extra {
            rows.push(fv.values().to_vec());
            labels.push(g);
        }
    }
    let bundle = train_all(&rows, &labels, seed).map_err(|e| CliError::data("INSUFFICIENT_DATA", e.to_string()))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    bundle.save(out)?;
    println!(
        "trained 5 models on {} rows (seed {seed}, mlp {} epochs) -> {}",
        rows.len(),
        bundle.models.mlp.epochs_run,
        out.display()
    );
    Ok(())
}

fn synth(out: &Path, per_genre: usize, seed: u64, duration: f64) -> CliResult {
    if per_genre == 0 {
        return Err(CliError::data("INVALID_ARGUMENT", "--per-genre must be at least 1"));
    }
    let plan = plan_corpus(per_genre, seed, duration);
    let written = plan
        .par_iter()
        .map(|item| {
            let clip = synthesize(&item.spec, item.seed).map_err(|e| CliError::data(e.code(), e.to_string()))?;
            let rel = PathBuf::from(item.genre.name())
                .join(format!("{}_{:03}.wav", item.genre.name().to_lowercase(), item.index));
            let path = out.join(&rel);
            std::fs::create_dir_all(path.parent().expect("genre directory")).map_err(|e| CliError::io(&path, e))?;
            std::fs::write(&path, encode_wav(&clip)).map_err(|e| CliError::io(&path, e))?;
            Ok((rel, item.genre))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let manifest = out.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| CliError::data("IO_ERROR", e.to_string()))?;
    w.write_record(["path", "truth"]).map_err(|e| CliError::data("IO_ERROR", e.to_string()))?;
    for (rel, g) in &written {
        let rel = rel.to_string_lossy().replace('\\', "/");
        w.write_record([rel.as_str(), g.name()]).map_err(|e| CliError::data("IO_ERROR", e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(&manifest, e))?;
    println!("wrote {} clips ({per_genre} per genre, seed {seed}) to {}", written.len(), out.display());
    Ok(())
}

fn load_bundle(path: &Path) -> CliResult<ModelBundle> {
    ModelBundle::load(path).map_err(|e| match e {
        BundleError::Io(io) => CliError::data("NO_MODEL", format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn render_text(r: &AnalyzeResponse) -> String {
    let mut out = String::new();
    let bar = |pct: f64| "#".repeat((pct / 2.5).round() as usize);
    let chart = |out: &mut String, title: &str, map: &BTreeMap<String, f64>| {
        let _ = writeln!(out, "{title}");
        let mut rows: Vec<(&String, &f64)> = map.iter().filter(|(_, p)| **p >= 0.5).collect();
        rows.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
        for (g, p) in rows {
            let _ = writeln!(out, "  {g:<10} {p:>6.2}% {}", bar(*p));
        }
    };
    for a in genrelab::classify::Algorithm::ALL {
        if let Some(map) = r.per_algorithm.get(a.key()) {
            chart(&mut out, a.display_name(), map);
        }
    }
    chart(&mut out, "Consensus", &r.consensus);
    let tempo = r.tempo_bpm.map_or("none".to_string(), |t| format!("{t:.1} BPM"));
    let _ = writeln!(out, "top genre: {} ({:.2}%), tempo: {tempo}", r.top_genre, r.confidence_percent);
    out
}

fn analyze(file: &Path, model: &Path, format: Format) -> CliResult {
    let bundle = load_bundle(model)?;
    let clip = read_wav(file)?;
    let report = classify_report(&bundle, &clip).map_err(|e| CliError::data(e.code(), e.to_string()))?;
    let response = AnalyzeResponse::from(&report);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&response).expect("response serializes")),
        Format::Text => print!("{}", render_text(&response)),
    }
    Ok(())
}

#[derive(Deserialize)]
struct ManifestRow {
    path: String,
    truth: String,
    #[serde(default)]
    song_id: Option<String>,
}

fn evaluate(manifest: &Path, model: &Path, runs: usize, seed: u64, out: &Path) -> CliResult {
    if runs == 0 {
        return Err(CliError::data("INVALID_ARGUMENT", "--runs must be at least 1"));
    }
    let bundle = load_bundle(model)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| CliError::data("MANIFEST_ERROR", e.to_string()))?;
    let mut songs = Vec::new();
    for (i, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| CliError::data("MANIFEST_ERROR", e.to_string()))?;
        let truth = parse_genre_set(&row.truth)
            .map_err(|e| CliError::data("MANIFEST_ERROR", format!("row {}: {e}", i + 1)))?;
        if truth.is_empty() {
            return Err(CliError::data("MANIFEST_ERROR", format!("row {}: empty truth", i + 1)));
        }
        let path = base.join(&row.path);
        let clip = std::fs::read(&path)
            .map_err(|e| AudioError::MalformedContainer(format!("{}: {e}", path.display())))
            .and_then(|bytes| decode_wav(&bytes));
        songs.push(Song { song_id: row.song_id.unwrap_or(row.path), clip, truth });
    }
    let result = run_protocol(&bundle, &songs, runs, seed).map_err(|e| CliError::data(e.code(), e.to_string()))?;
    for r in result.runs.iter().filter(|r| r.note.is_some()) {
        tracing::warn!(song = %r.song_id, run = r.run_index, note = r.note.as_deref().unwrap_or(""), "run failed");
    }
    std::fs::write(out, write_grid_csv(&result.grid)).map_err(|e| CliError::io(out, e))?;
    println!("{}", result.grid.summary());
    Ok(())
}

fn replay_grid(fixture: &Path) -> CliResult {
    let text = std::fs::read_to_string(fixture).map_err(|e| CliError::io(fixture, e))?;
    let grid = parse_grid_csv(&text).map_err(|e| CliError::data(e.code(), e.to_string()))?;
    println!("{}", grid.summary());
    if grid == published_grid() {
        let n = PUBLISHED_NARRATIVE_GREEN;
        println!(
            "note: the published text reports {n} positive results out of {}, but {n}/{} = {:.1}% and its own grid holds {} Green cells ({:.1}%); the grid cells are counted here",
            grid.total(),
            grid.total(),
            100.0 * n as f64 / grid.total() as f64,
            grid.success_count(),
            100.0 * grid.success_rate()
        );
    }
    Ok(())
}

fn features(files: &[PathBuf], out: &Path) -> CliResult {
    let rows = files
        .par_iter()
        .map(|f| feature_row(f))
        .collect::<CliResult<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::data("IO_ERROR", e.to_string()))?;
    let mut header = vec!["file".to_string()];
    header.extend(feature_names());
    w.write_record(&header).map_err(|e| CliError::data("IO_ERROR", e.to_string()))?;
    for (f, row) in files.iter().zip(&rows) {
        let mut record = vec![f.display().to_string()];
        record.extend(row.iter().map(f64::to_string));
        w.write_record(&record).map_err(|e| CliError::data("IO_ERROR", e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    println!("wrote {} feature rows to {}", rows.len(), out.display());
    Ok(())
}

fn serve(model: &Path, data_dir: &Path, host: &str, port: u16, options: ServeOptions) -> CliResult {
    let bundle = match ModelBundle::load(model) {
        Ok(b) => Some(Arc::new(b)),
        Err(BundleError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
            tracing::warn!(path = %model.display(), "no model bundle; /analyze will answer 503");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let store = Arc::new(open_store(data_dir)?);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError { code: "USAGE", message: format!("bad listen address: {e}"), exit: 1 })?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::data("IO_ERROR", e.to_string()))?;
    runtime
        .block_on(service::serve(addr, AppState { bundle, store }, options))
        .map_err(|e| CliError::data("IO_ERROR", e.to_string()))
}
