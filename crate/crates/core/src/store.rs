//! Append-only JSON Lines persistence for reports and user feedback.
//!
//! Each record is one line, written with a single `write_all` on a file
//! opened in append mode while the writer lock is held, then flushed. A
//! reader that races a writer can see at most one partial final line,
//! which it skips.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::eval::ClassificationReport;
use crate::features::FeatureVector;
use crate::genre::Genre;

pub use crate::classify::BundleError;

pub const HISTORY_FILE: &str = "history.jsonl";
pub const FEEDBACK_FILE: &str = "feedback.jsonl";
pub const BUNDLE_FILE: &str = "model.bundle.json";
pub const MAX_NOTE_CHARS: usize = 500;
pub const DEFAULT_PAGE: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown report id {0}")]
    UnknownReportId(String),
    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),
    #[error("corrupt record in {file} line {line}: {message}")]
    CorruptRecord { file: String, line: usize, message: String },
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub report_id: String,
    pub user_genres: Vec<Genre>,
    pub submitted_at: DateTime<Utc>,
    pub note: Option<String>,
}

impl FeedbackRecord {
    pub fn new(report_id: &str, user_genres: Vec<Genre>, note: Option<String>) -> Self {
        Self { report_id: report_id.to_string(), user_genres, submitted_at: Utc::now(), note }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.user_genres.is_empty() {
            return Err("at least one genre is required".into());
        }
        if let Some(note) = &self.note {
            let n = note.chars().count();
            if n > MAX_NOTE_CHARS {
                return Err(format!("note has {n} characters, limit is {MAX_NOTE_CHARS}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredReport {
    source_name: Option<String>,
    report: ClassificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub report: ClassificationReport,
    pub source_name: Option<String>,
    /// Oldest first.
    pub feedback: Vec<FeedbackRecord>,
}

struct Writer {
    history: File,
    feedback: File,
    known_ids: HashSet<String>,
}

/// History and feedback logs under one data directory.
pub struct Store {
    dir: PathBuf,
    writer: Mutex<Writer>,
}

fn open_append(path: &Path) -> io::Result<File> {
    OpenOptions::new().create(true).append(true).open(path)
}

/// Parses every complete line. A final line without its newline is a
/// write in progress (or a torn write) and is skipped.
fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let complete = match text.rfind('\n') {
        Some(end) => &text[..=end],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::CorruptRecord {
                file: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Cuts a partial final line left by an interrupted append, so the next
/// record starts on a fresh line.
fn trim_torn_tail(path: &Path) -> io::Result<()> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    if bytes.last().is_none_or(|b| *b == b'\n') {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    tracing::warn!(path = %path.display(), dropped = bytes.len() - keep, "dropping torn record");
    OpenOptions::new().write(true).open(path)?.set_len(keep as u64)
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<Store, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let history_path = dir.join(HISTORY_FILE);
        trim_torn_tail(&history_path)?;
        trim_torn_tail(&dir.join(FEEDBACK_FILE))?;
        let known_ids = read_lines::<StoredReport>(&history_path)?
            .into_iter()
            .map(|s| s.report.report_id)
            .collect();
        let writer = Writer {
            history: open_append(&history_path)?,
            feedback: open_append(&dir.join(FEEDBACK_FILE))?,
            known_ids,
        };
        Ok(Store { dir, writer: Mutex::new(writer) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Writer> {
        // a panic mid-append cannot leave the in-memory id set inconsistent
        // with disk in any way that matters, so recover from poisoning
        self.writer.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn append_line<T: Serialize>(file: &mut File, value: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(value).map_err(io::Error::other)?;
        line.push(b'\n');
        file.write_all(&line)?;
        file.flush()
    }

    pub fn append_report(&self, report: &ClassificationReport, source_name: Option<&str>) -> Result<String, StoreError> {
        let stored = StoredReport { source_name: source_name.map(String::from), report: report.clone() };
        let mut w = self.lock();
        Self::append_line(&mut w.history, &stored)?;
        w.known_ids.insert(report.report_id.clone());
        Ok(report.report_id.clone())
    }

    pub fn append_feedback(&self, record: &FeedbackRecord) -> Result<(), StoreError> {
        record.validate().map_err(StoreError::InvalidFeedback)?;
        let mut w = self.lock();
        if !w.known_ids.contains(&record.report_id) {
            return Err(StoreError::UnknownReportId(record.report_id.clone()));
        }
        Self::append_line(&mut w.feedback, record)?;
        Ok(())
    }

    pub fn contains(&self, report_id: &str) -> bool {
        self.lock().known_ids.contains(report_id)
    }

    pub fn report_count(&self) -> usize {
        self.lock().known_ids.len()
    }

    fn reports(&self) -> Result<Vec<StoredReport>, StoreError> {
        read_lines(&self.dir.join(HISTORY_FILE))
    }

    /// Every feedback record in append order.
    pub fn feedback(&self) -> Result<Vec<FeedbackRecord>, StoreError> {
        read_lines(&self.dir.join(FEEDBACK_FILE))
    }

    /// Newest first.
    pub fn list_history(&self, limit: usize, offset: usize) -> Result<Vec<HistoryEntry>, StoreError> {
        let reports = self.reports()?;
        let feedback = self.feedback()?;
        Ok(reports
            .into_iter()
            .rev()
            .skip(offset)
            .take(limit)
            .map(|s| {
                let mut fb: Vec<FeedbackRecord> = feedback
                    .iter()
                    .filter(|f| f.report_id == s.report.report_id)
                    .cloned()
                    .collect();
                fb.sort_by_key(|f| f.submitted_at);
                HistoryEntry { report: s.report, source_name: s.source_name, feedback: fb }
            })
            .collect())
    }

    /// One `(features, genre)` row per genre of every feedback record, in
    /// feedback append order. A genre repeated for the same report is
    /// emitted once.
    pub fn export_training_feedback(&self) -> Result<Vec<(FeatureVector, Genre)>, StoreError> {
        let reports = self.reports()?;
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for f in self.feedback()? {
            let Some(stored) = reports.iter().find(|s| s.report.report_id == f.report_id) else {
                continue;
            };
            for g in &f.user_genres {
                if seen.insert((f.report_id.clone(), *g)) {
                    rows.push((stored.report.features.clone(), *g));
                }
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Algorithm, Distribution};
    use std::collections::BTreeMap;

    fn dummy_report(tempo: f64) -> ClassificationReport {
        let mut v = vec![0.0; 57];
        v[56] = tempo;
        let d = Distribution::uniform();
        ClassificationReport {
            report_id: crate::eval::new_report_id(),
            created_at: Utc::now(),
            per_algorithm: Algorithm::ALL.into_iter().map(|a| (a, d)).collect(),
            per_algorithm_top: Algorithm::ALL.into_iter().map(|a| (a, Genre::Blues)).collect::<BTreeMap<_, _>>(),
            consensus: d,
            top_genre: Genre::Blues,
            confidence: 1.0 / 11.0,
            tempo_bpm: Some(tempo),
            features: FeatureVector::new(v).unwrap(),
        }
    }

    #[test]
    fn empty_store_lists_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.list_history(DEFAULT_PAGE, 0).unwrap().is_empty());
        assert!(store.export_training_feedback().unwrap().is_empty());
    }

    #[test]
    fn report_then_feedback_then_list() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let r = dummy_report(120.0);
        store.append_report(&r, Some("a.wav")).unwrap();
        let fb = FeedbackRecord::new(&r.report_id, vec![Genre::Rock, Genre::Pop], Some("loud".into()));
        store.append_feedback(&fb).unwrap();
        let h = store.list_history(DEFAULT_PAGE, 0).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].report, r);
        assert_eq!(h[0].source_name.as_deref(), Some("a.wav"));
        assert_eq!(h[0].feedback, vec![fb]);
        let rows = store.export_training_feedback().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, rows[1].0);
        assert_eq!((rows[0].1, rows[1].1), (Genre::Rock, Genre::Pop));
    }

    #[test]
    fn unknown_id_and_invalid_feedback() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let fb = FeedbackRecord::new("00", vec![Genre::Rock], None);
        assert!(matches!(store.append_feedback(&fb), Err(StoreError::UnknownReportId(_))));
        let r = dummy_report(90.0);
        store.append_report(&r, None).unwrap();
        let empty = FeedbackRecord::new(&r.report_id, vec![], None);
        assert!(matches!(store.append_feedback(&empty), Err(StoreError::InvalidFeedback(_))));
        let long = FeedbackRecord::new(&r.report_id, vec![Genre::Jazz], Some("x".repeat(501)));
        assert!(matches!(store.append_feedback(&long), Err(StoreError::InvalidFeedback(_))));
    }

    #[test]
    fn reopening_keeps_ids_and_skips_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let r = dummy_report(100.0);
        {
            let store = Store::open(dir.path()).unwrap();
            store.append_report(&r, None).unwrap();
        }
        let mut f = open_append(&dir.path().join(HISTORY_FILE)).unwrap();
        f.write_all(b"{\"source_name\":null,\"rep").unwrap();
        // a reader skips the partial line
        assert_eq!(read_lines::<StoredReport>(&dir.path().join(HISTORY_FILE)).unwrap().len(), 1);
        let store = Store::open(dir.path()).unwrap();
        assert!(store.contains(&r.report_id));
        store.append_report(&dummy_report(101.0), None).unwrap();
        assert_eq!(store.list_history(10, 0).unwrap().len(), 2);
    }

    #[test]
    fn paging_is_newest_first() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let reports: Vec<_> = (0..5).map(|i| dummy_report(60.0 + i as f64)).collect();
        for r in &reports {
            store.append_report(r, None).unwrap();
        }
        let page = store.list_history(2, 1).unwrap();
        let ids: Vec<_> = page.iter().map(|e| e.report.report_id.clone()).collect();
        assert_eq!(ids, vec![reports[3].report_id.clone(), reports[2].report_id.clone()]);
    }
}
