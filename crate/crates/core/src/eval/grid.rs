use std::fmt;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::genre::{parse_genre_set, Genre};

/// The published table's narrative count, which disagrees with its own
/// cells (37 Green).
pub const PUBLISHED_NARRATIVE_GREEN: usize = 34;

const PUBLISHED_GRID: &str = include_str!("../../fixtures/published_grid.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "G")]
    Green,
    #[serde(rename = "R")]
    Red,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Green => "G",
            Outcome::Red => "R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub song_id: String,
    pub truth: Vec<Genre>,
    pub results: Vec<Outcome>,
}

/// Songs by runs. Always non-empty and rectangular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    rows: Vec<GridRow>,
}

pub fn aggregate_grid(rows: Vec<GridRow>) -> Result<EvaluationGrid, EvalError> {
    let runs = rows.first().map_or(0, |r| r.results.len());
    if runs == 0 {
        return Err(EvalError::EmptyGrid);
    }
    for r in &rows {
        if r.results.len() != runs {
            return Err(EvalError::RaggedGrid(format!(
                "{:?} has {} runs, expected {runs}",
                r.song_id,
                r.results.len()
            )));
        }
        if r.truth.is_empty() {
            return Err(EvalError::EmptyTruthSet);
        }
    }
    Ok(EvaluationGrid { rows })
}

impl EvaluationGrid {
    pub fn rows(&self) -> &[GridRow] {
        &self.rows
    }

    pub fn runs(&self) -> usize {
        self.rows[0].results.len()
    }

    pub fn total(&self) -> usize {
        self.rows.len() * self.runs()
    }

    pub fn success_count(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| &r.results)
            .filter(|o| **o == Outcome::Green)
            .count()
    }

    pub fn success_rate(&self) -> f64 {
        self.success_count() as f64 / self.total() as f64
    }

    /// `success_rate=74.0%`
    pub fn summary_line(&self) -> String {
        format!("success_rate={:.1}%", 100.0 * self.success_rate())
    }

    /// `37/50 Green, success_rate=74.0%`
    pub fn summary(&self) -> String {
        format!("{}/{} Green, {}", self.success_count(), self.total(), self.summary_line())
    }
}

/// The published ten-song, five-run table shipped with the crate.
pub fn published_grid() -> EvaluationGrid {
    parse_grid_csv(PUBLISHED_GRID).expect("embedded grid parses")
}

/// Parses `song_id,truth,run1..runN` rows; genres in `truth` are separated
/// by `;`. A trailing `success_rate=` line is ignored.
pub fn parse_grid_csv(text: &str) -> Result<EvaluationGrid, EvalError> {
    let bad = |m: String| EvalError::GridFormat(m);
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let runs = header.len().saturating_sub(2);
    let header_ok = header.get(0) == Some("song_id")
        && header.get(1) == Some("truth")
        && header.iter().skip(2).enumerate().all(|(i, h)| h == format!("run{}", i + 1));
    if !header_ok {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let first = record.get(0).unwrap_or("");
        if first.starts_with("success_rate=") || record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != runs + 2 {
            return Err(EvalError::RaggedGrid(format!(
                "line {} has {} runs, expected {runs}",
                line + 2,
                record.len().saturating_sub(2)
            )));
        }
        let truth = parse_genre_set(&record[1]).map_err(|e| bad(format!("line {}: {e}", line + 2)))?;
        let results = record
            .iter()
            .skip(2)
            .map(|cell| match cell {
                "G" | "g" | "Green" => Ok(Outcome::Green),
                "R" | "r" | "Red" => Ok(Outcome::Red),
                other => Err(bad(format!("line {}: outcome {other:?} is not G or R", line + 2))),
            })
            .collect::<Result<_, _>>()?;
        rows.push(GridRow { song_id: record[0].to_string(), truth, results });
    }
    aggregate_grid(rows)
}

pub fn write_grid_csv(grid: &EvaluationGrid) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["song_id".to_string(), "truth".to_string()];
    header.extend((1..=grid.runs()).map(|i| format!("run{i}")));
    w.write_record(&header).expect("write to memory");
    for row in grid.rows() {
        let truth: Vec<&str> = row.truth.iter().map(|g| g.name()).collect();
        let mut record = vec![row.song_id.clone(), truth.join(";")];
        record.extend(row.results.iter().map(Outcome::to_string));
        w.write_record(&record).expect("write to memory");
    }
    let mut out = String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8");
    out.push_str(&grid.summary_line());
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n_songs: usize, runs: usize, o: Outcome) -> EvaluationGrid {
        let rows = (0..n_songs)
            .map(|i| GridRow { song_id: format!("s{i}"), truth: vec![Genre::Pop], results: vec![o; runs] })
            .collect();
        aggregate_grid(rows).unwrap()
    }

    #[test]
    fn published_grid_counts_its_cells() {
        let g = published_grid();
        assert_eq!(g.rows().len(), 10);
        assert_eq!((g.success_count(), g.total()), (37, 50));
        assert_eq!(g.summary(), "37/50 Green, success_rate=74.0%");
        // the narrative count gives a different rate
        assert_eq!(format!("{:.1}", 100.0 * PUBLISHED_NARRATIVE_GREEN as f64 / 50.0), "68.0");
    }

    #[test]
    fn extremes() {
        assert_eq!(uniform(10, 5, Outcome::Green).summary_line(), "success_rate=100.0%");
        assert_eq!(uniform(10, 5, Outcome::Red).summary_line(), "success_rate=0.0%");
        assert_eq!(uniform(1, 1, Outcome::Green).success_rate(), 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = published_grid();
        let text = write_grid_csv(&g);
        assert!(text.ends_with("success_rate=74.0%\n"));
        assert_eq!(parse_grid_csv(&text).unwrap(), g);
    }

    #[test]
    fn malformed_grids() {
        assert!(matches!(aggregate_grid(vec![]), Err(EvalError::EmptyGrid)));
        let ragged = "song_id,truth,run1,run2\na,Pop,G,R\nb,Rock,G\n";
        assert!(matches!(parse_grid_csv(ragged), Err(EvalError::RaggedGrid(_))));
        let bad_cell = "song_id,truth,run1\na,Pop,Y\n";
        assert!(matches!(parse_grid_csv(bad_cell), Err(EvalError::GridFormat(_))));
        let bad_genre = "song_id,truth,run1\na,Polka,G\n";
        assert!(matches!(parse_grid_csv(bad_genre), Err(EvalError::GridFormat(_))));
        let no_truth = "song_id,truth,run1\na,,G\n";
        assert!(parse_grid_csv(no_truth).is_err());
    }
}
