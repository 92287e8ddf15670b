//! Classification reports, the multi-genre success rule, the repeated-run
//! protocol, grid replay and per-model metrics.

mod grid;
mod metrics;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{normalize_clip, resample_linear, samples_for, AudioClip, AudioError, ANALYSIS_SECONDS, WORKING_RATE};
use crate::classify::{Algorithm, ClassifyError, Distribution, ModelBundle};
use crate::features::{extract_features, FeatureError, FeatureVector};
use crate::genre::Genre;

pub use grid::{
    aggregate_grid, parse_grid_csv, published_grid, write_grid_csv, EvaluationGrid, GridRow, Outcome,
    PUBLISHED_NARRATIVE_GREEN,
};
pub use metrics::{compute_metrics, f1_score, MetricsRow};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("truth genre set is empty")]
    EmptyTruthSet,
    #[error("grid has no outcomes")]
    EmptyGrid,
    #[error("grid is not rectangular: {0}")]
    RaggedGrid(String),
    #[error("grid csv: {0}")]
    GridFormat(String),
    #[error("no predictions to score")]
    EmptyPredictions,
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Audio(e) => e.code(),
            EvalError::Feature(_) => "FEATURE_ERROR",
            EvalError::Classify(_) => "CLASSIFY_ERROR",
            EvalError::EmptyTruthSet => "EMPTY_TRUTH_SET",
            EvalError::EmptyGrid => "EMPTY_GRID",
            EvalError::RaggedGrid(_) => "RAGGED_GRID",
            EvalError::GridFormat(_) => "GRID_FORMAT",
            EvalError::EmptyPredictions => "EMPTY_PREDICTIONS",
        }
    }
}

/// Everything the five models said about one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub report_id: String,
    pub created_at: DateTime<Utc>,
    pub per_algorithm: BTreeMap<Algorithm, Distribution>,
    /// Each model's own top-1 label (k-NN applies its nearest-neighbour
    /// tiebreak here, so this can differ from the distribution argmax).
    pub per_algorithm_top: BTreeMap<Algorithm, Genre>,
    pub consensus: Distribution,
    pub top_genre: Genre,
    pub confidence: f64,
    pub tempo_bpm: Option<f64>,
    pub features: FeatureVector,
}

pub fn new_report_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl ClassificationReport {
    /// True when everything except the id and timestamp matches.
    pub fn same_body(&self, other: &ClassificationReport) -> bool {
        self.per_algorithm == other.per_algorithm
            && self.per_algorithm_top == other.per_algorithm_top
            && self.consensus == other.consensus
            && self.top_genre == other.top_genre
            && self.confidence == other.confidence
            && self.tempo_bpm == other.tempo_bpm
            && self.features == other.features
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.report_id.len() != 32 || !self.report_id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("bad report id {:?}", self.report_id));
        }
        if self.per_algorithm.len() != Algorithm::ALL.len() || self.per_algorithm_top.len() != Algorithm::ALL.len() {
            return Err("report needs all five algorithms".into());
        }
        for d in self.per_algorithm.values().chain([&self.consensus]) {
            let sum: f64 = d.probs().iter().sum();
            if (sum - 1.0).abs() > 1e-9 || d.probs().iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err("distribution is not normalized".into());
            }
        }
        let dists: Vec<Distribution> = self.per_algorithm.values().copied().collect();
        let mean = Distribution::mean(&dists);
        if mean.probs().iter().zip(self.consensus.probs()).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err("consensus is not the mean of the five models".into());
        }
        if self.consensus.argmax() != self.top_genre {
            return Err("top genre is not the consensus argmax".into());
        }
        Ok(())
    }
}

/// Normalizes the clip, extracts features and runs all five models.
pub fn classify_report(bundle: &ModelBundle, clip: &AudioClip) -> Result<ClassificationReport, EvalError> {
    let clip = normalize_clip(clip, WORKING_RATE, ANALYSIS_SECONDS)?;
    let features = extract_features(&clip)?;
    report_from_features(bundle, features)
}

pub fn report_from_features(bundle: &ModelBundle, features: FeatureVector) -> Result<ClassificationReport, EvalError> {
    let dists = bundle.predict_all(features.values())?;
    let tops = bundle.predict_top(features.values())?;
    let consensus = Distribution::mean(&dists);
    let tempo = features.tempo_bpm();
    Ok(ClassificationReport {
        report_id: new_report_id(),
        created_at: Utc::now(),
        per_algorithm: Algorithm::ALL.into_iter().zip(dists).collect(),
        per_algorithm_top: Algorithm::ALL.into_iter().zip(tops).collect(),
        top_genre: consensus.argmax(),
        confidence: consensus.max_prob(),
        consensus,
        tempo_bpm: (tempo > 0.0).then_some(tempo),
        features,
    })
}

/// Green when any model's own top-1 label is one of the song's genres.
pub fn run_success(report: &ClassificationReport, truth: &[Genre]) -> Result<Outcome, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::EmptyTruthSet);
    }
    let hit = report.per_algorithm_top.values().any(|g| truth.contains(g));
    Ok(if hit { Outcome::Green } else { Outcome::Red })
}

#[derive(Debug, Clone)]
pub struct Song {
    pub song_id: String,
    /// A clip that failed to load still takes part; each run scores Red.
    pub clip: Result<AudioClip, AudioError>,
    pub truth: Vec<Genre>,
}

/// One analysis of one song.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub song_id: String,
    /// 1-based.
    pub run_index: usize,
    /// Window start in seconds at the working rate.
    pub offset_s: f64,
    pub predicted_top: Vec<Genre>,
    pub result: Outcome,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub grid: EvaluationGrid,
    pub runs: Vec<RunOutcome>,
}

/// Window offsets (in samples) for each run. Clips no longer than the
/// analysis window are analyzed whole every run; otherwise offsets are
/// distinct while there are enough of them to go round.
fn window_offsets(len: usize, window: usize, runs: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= window {
        return vec![0; runs];
    }
    let choices = len - window + 1;
    if choices >= runs {
        sample(rng, choices, runs).into_vec()
    } else {
        (0..runs).map(|_| rng.random_range(0..choices)).collect()
    }
}

/// Analyzes every song `runs` times at seeded random window offsets.
/// Songs run in parallel; each song draws from its own ChaCha stream so
/// the grid does not depend on scheduling. Per-run failures score Red.
pub fn run_protocol(bundle: &ModelBundle, songs: &[Song], runs: usize, seed: u64) -> Result<ProtocolResult, EvalError> {
    if runs == 0 || songs.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if songs.iter().any(|s| s.truth.is_empty()) {
        return Err(EvalError::EmptyTruthSet);
    }
    let window = samples_for(ANALYSIS_SECONDS, WORKING_RATE);
    let per_song: Vec<Vec<RunOutcome>> = songs
        .par_iter()
        .enumerate()
        .map(|(i, song)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let clip = song.clip.clone().and_then(|c| {
                AudioClip::new(resample_linear(c.samples(), c.sample_rate(), WORKING_RATE), WORKING_RATE)
            });
            let len = clip.as_ref().map_or(0, AudioClip::len);
            let offsets = window_offsets(len, window, runs, &mut rng);
            offsets
                .iter()
                .enumerate()
                .map(|(r, &offset)| {
                    let analyzed = clip
                        .as_ref()
                        .map_err(|e| EvalError::Audio(e.clone()))
                        .and_then(|c| classify_report(bundle, &c.window(offset, window)));
                    let base = RunOutcome {
                        song_id: song.song_id.clone(),
                        run_index: r + 1,
                        offset_s: offset as f64 / WORKING_RATE as f64,
                        predicted_top: Vec::new(),
                        result: Outcome::Red,
                        note: None,
                    };
                    match analyzed {
                        Ok(report) => RunOutcome {
                            predicted_top: report.per_algorithm_top.values().copied().collect(),
                            result: run_success(&report, &song.truth).unwrap_or(Outcome::Red),
                            ..base
                        },
                        Err(e) => RunOutcome { note: Some(format!("{}: {e}", e.code())), ..base },
                    }
                })
                .collect()
        })
        .collect();
    let rows = songs
        .iter()
        .zip(&per_song)
        .map(|(s, outs)| GridRow {
            song_id: s.song_id.clone(),
            truth: s.truth.clone(),
            results: outs.iter().map(|o| o.result).collect(),
        })
        .collect();
    Ok(ProtocolResult {
        grid: aggregate_grid(rows)?,
        runs: per_song.into_iter().flatten().collect(),
    })
}
