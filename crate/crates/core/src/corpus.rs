//! Data model and I/O for multiple-choice benchmark items, tasks, and
//! chronological splits.
//!
//! Corpora are stored as JSONL, one item per line:
//!
//! ```json
//! {"id":"h500-0007","task":"500hPa","date":"2019-06-14","question":"...",
//!  "choices":{"A":"...","B":"..."},"answer":"B","image":"charts/0007.png"}
//! ```

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// The seven imaging-modality tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskId {
    #[serde(rename = "500hPa")]
    H500,
    #[serde(rename = "850hPa")]
    H850,
    #[serde(rename = "land")]
    Land,
    #[serde(rename = "rain")]
    Rain,
    #[serde(rename = "phenom")]
    Phenom,
    #[serde(rename = "min_temp")]
    MinTemp,
    #[serde(rename = "max_temp")]
    MaxTemp,
}

/// The four themes the seven tasks roll up into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theme {
    Precipitation,
    WeatherPhenomena,
    Temperature,
    WeatherSystems,
}

impl TaskId {
    /// All tasks, in canonical reporting order.
    pub const ALL: [TaskId; 7] = [
        TaskId::H500,
        TaskId::H850,
        TaskId::Land,
        TaskId::Rain,
        TaskId::Phenom,
        TaskId::MinTemp,
        TaskId::MaxTemp,
    ];

    pub fn theme(self) -> Theme {
        match self {
            TaskId::Rain => Theme::Precipitation,
            TaskId::Phenom => Theme::WeatherPhenomena,
            TaskId::MinTemp | TaskId::MaxTemp => Theme::Temperature,
            TaskId::H500 | TaskId::H850 | TaskId::Land => Theme::WeatherSystems,
        }
    }

    /// Wire name used in JSONL files and file names.
    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::H500 => "500hPa",
            TaskId::H850 => "850hPa",
            TaskId::Land => "land",
            TaskId::Rain => "rain",
            TaskId::Phenom => "phenom",
            TaskId::MinTemp => "min_temp",
            TaskId::MaxTemp => "max_temp",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// One multiple-choice benchmark entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub task: TaskId,
    pub date: NaiveDate,
    pub question: String,
    /// Option letter -> option text, letters consecutive from 'A'.
    pub choices: BTreeMap<char, String>,
    pub answer: char,
    #[serde(rename = "image", default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl McqItem {
    /// Checks the item invariants; returns a human-readable reason on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.choices.len() < 2 {
            return Err(format!(
                "item has {} choice(s), need at least 2",
                self.choices.len()
            ));
        }
        if self.choices.len() > 26 {
            return Err(format!("item has {} choices, max is 26", self.choices.len()));
        }
        for (i, letter) in self.choices.keys().enumerate() {
            let expected = (b'A' + i as u8) as char;
            if *letter != expected {
                return Err(format!(
                    "choice letters must run consecutively from 'A': found {letter:?} where {expected:?} was expected"
                ));
            }
        }
        if !self.choices.contains_key(&self.answer) {
            return Err(format!(
                "answer {:?} is not one of the choice letters",
                self.answer
            ));
        }
        let mut seen = HashSet::new();
        for text in self.choices.values() {
            if !seen.insert(text) {
                return Err(format!("duplicate option text {text:?}"));
            }
        }
        Ok(())
    }

    /// The set of valid option letters.
    pub fn letters(&self) -> BTreeSet<char> {
        self.choices.keys().copied().collect()
    }
}

/// Year sets defining a chronological train/validation/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_years: BTreeSet<i32>,
    pub val_years: BTreeSet<i32>,
    pub test_years: BTreeSet<i32>,
}

impl SplitSpec {
    /// Builds a split spec, rejecting overlapping year sets.
    pub fn new(
        train_years: BTreeSet<i32>,
        val_years: BTreeSet<i32>,
        test_years: BTreeSet<i32>,
    ) -> Result<Self, CorpusError> {
        for year in &train_years {
            if val_years.contains(year) || test_years.contains(year) {
                return Err(CorpusError::OverlappingSplit { year: *year });
            }
        }
        for year in &val_years {
            if test_years.contains(year) {
                return Err(CorpusError::OverlappingSplit { year: *year });
            }
        }
        Ok(Self {
            train_years,
            val_years,
            test_years,
        })
    }
}

impl Default for SplitSpec {
    /// Train 2017-2021, validate 2022, test 2023.
    fn default() -> Self {
        Self {
            train_years: (2017..=2021).collect(),
            val_years: [2022].into(),
            test_years: [2023].into(),
        }
    }
}

/// Result of a chronological split. Items dated outside every year set are
/// counted in `dropped` rather than treated as an error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitOutcome {
    pub train: Vec<McqItem>,
    pub val: Vec<McqItem>,
    pub test: Vec<McqItem>,
    pub dropped: usize,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed corpus entry: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("item {id:?} (line {line}): {reason}")]
    InvalidItem {
        id: String,
        line: usize,
        reason: String,
    },
    #[error("split year sets overlap: year {year} appears in more than one set")]
    OverlappingSplit { year: i32 },
}

/// Loads a JSONL corpus, enforcing item invariants. Blank lines are skipped;
/// anything else that fails to parse or validate is an error naming the line
/// (and item id, when known).
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<McqItem>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let item: McqItem =
            serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
        item.validate().map_err(|reason| CorpusError::InvalidItem {
            id: item.id.clone(),
            line: line_no,
            reason,
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Partitions items by the year of their date, preserving input order within
/// each split. Years covered by no set are dropped and counted.
pub fn chronological_split(items: Vec<McqItem>, spec: &SplitSpec) -> SplitOutcome {
    let mut out = SplitOutcome::default();
    for item in items {
        let year = item.date.year();
        if spec.train_years.contains(&year) {
            out.train.push(item);
        } else if spec.val_years.contains(&year) {
            out.val.push(item);
        } else if spec.test_years.contains(&year) {
            out.test.push(item);
        } else {
            out.dropped += 1;
        }
    }
    out
}
