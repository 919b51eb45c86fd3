//! Perfume composition records: parsing, note normalization, filtering,
//! descriptive statistics and expansion into training sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::sync::OnceLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Default length of the note sequence generated per perfume.
pub const DEFAULT_SEQUENCE_LENGTH: usize = 100;

/// Default minimum number of distinct notes a perfume must list.
pub const DEFAULT_MIN_NOTES: usize = 3;

/// One perfume and its notes, grouped by category.
///
/// A category is `None` when the source explicitly marks it as missing
/// (`null` in JSONL). An empty list means the category exists but has no
/// notes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfumeRecord {
    pub id: String,
    pub name: String,
    pub top: Option<Vec<String>>,
    pub heart: Option<Vec<String>>,
    pub base: Option<Vec<String>>,
}

impl PerfumeRecord {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        top: Vec<String>,
        heart: Vec<String>,
        base: Vec<String>,
    ) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            top: Some(top),
            heart: Some(heart),
            base: Some(base),
        }
    }

    fn categories(&self) -> [Option<&Vec<String>>; 3] {
        [self.top.as_ref(), self.heart.as_ref(), self.base.as_ref()]
    }

    pub fn has_all_categories(&self) -> bool {
        self.categories().iter().all(Option::is_some)
    }

    /// Union of the notes of all categories. Categories are merged, so a
    /// note listed as both top and heart counts once.
    pub fn note_set(&self) -> BTreeSet<&str> {
        self.categories()
            .into_iter()
            .flatten()
            .flatten()
            .map(String::as_str)
            .collect()
    }

    /// Returns a copy with every note normalized. Notes that normalize to
    /// nothing are dropped; the number of dropped notes is returned too.
    pub fn normalized(&self) -> (PerfumeRecord, usize) {
        let mut dropped = 0;
        let mut norm = |list: &Option<Vec<String>>| {
            list.as_ref().map(|notes| {
                notes
                    .iter()
                    .filter_map(|raw| match normalize_note(raw) {
                        Ok(n) => Some(n),
                        Err(_) => {
                            dropped += 1;
                            None
                        }
                    })
                    .collect()
            })
        };
        let rec = PerfumeRecord {
            id: self.id.clone(),
            name: self.name.clone(),
            top: norm(&self.top),
            heart: norm(&self.heart),
            base: norm(&self.base),
        };
        (rec, dropped)
    }
}

/// Input layout of a perfume stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Some(InputFormat::Jsonl),
            "csv" => Some(InputFormat::Csv),
            _ => None,
        }
    }
}

const FIELDS: [&str; 5] = ["id", "name", "top", "heart", "base"];

/// Parses a perfume stream without touching the note strings.
pub fn parse_perfumes<R: BufRead>(reader: R, format: InputFormat) -> Result<Vec<PerfumeRecord>> {
    match format {
        InputFormat::Jsonl => parse_jsonl(reader),
        InputFormat::Csv => parse_csv(reader),
    }
}

fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<PerfumeRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        for field in FIELDS {
            if !obj.contains_key(field) {
                return Err(Error::Schema {
                    line: line_no,
                    field: field.into(),
                });
            }
        }
        let string_field = |field: &str| -> Result<String> {
            match &obj[field] {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                other => Err(Error::Parse {
                    line: line_no,
                    message: format!("field `{field}` must be a string, got {other}"),
                }),
            }
        };
        let notes_field = |field: &str| -> Result<Option<Vec<String>>> {
            match &obj[field] {
                Value::Null => Ok(None),
                Value::Array(items) => items
                    .iter()
                    .map(|v| {
                        v.as_str().map(str::to_owned).ok_or_else(|| Error::Parse {
                            line: line_no,
                            message: format!("field `{field}` must contain only strings"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Some),
                other => Err(Error::Parse {
                    line: line_no,
                    message: format!("field `{field}` must be an array, got {other}"),
                }),
            }
        };
        out.push(PerfumeRecord {
            id: string_field("id")?,
            name: string_field("name")?,
            top: notes_field("top")?,
            heart: notes_field("heart")?,
            base: notes_field("base")?,
        });
    }
    Ok(out)
}

fn parse_csv<R: BufRead>(reader: R) -> Result<Vec<PerfumeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let mut columns = [0usize; 5];
    for (slot, field) in columns.iter_mut().zip(FIELDS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == field)
            .ok_or_else(|| Error::Schema {
                line: 1,
                field: field.into(),
            })?;
    }
    let split = |cell: &str| -> Vec<String> {
        cell.split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect()
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let cell = |i: usize| row.get(columns[i]).unwrap_or("");
        out.push(PerfumeRecord {
            id: cell(0).to_owned(),
            name: cell(1).to_owned(),
            top: Some(split(cell(2))),
            heart: Some(split(cell(3))),
            base: Some(split(cell(4))),
        });
    }
    Ok(out)
}

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{P}\-_'./&]").expect("valid punctuation class"))
}

/// Lowercases a note, deletes punctuation and collapses whitespace.
///
/// Hyphenated spellings merge (`Ylang-ylang` becomes `ylangylang`) while
/// multiword notes stay multiword (`Sicilian Lemon` becomes `sicilian lemon`).
pub fn normalize_note(raw: &str) -> Result<String> {
    let lowered = raw.to_lowercase();
    let stripped = punctuation().replace_all(&lowered, "");
    let joined = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.is_empty() {
        return Err(Error::EmptyNote { raw: raw.into() });
    }
    Ok(joined)
}

/// Keeps perfumes with all three categories present and at least
/// `min_notes` distinct notes. Order is preserved.
pub fn filter_corpus(records: &[PerfumeRecord], min_notes: usize) -> Vec<PerfumeRecord> {
    records
        .iter()
        .filter(|r| r.has_all_categories() && r.note_set().len() >= min_notes)
        .cloned()
        .collect()
}

/// Summary of a filtered corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_perfumes: usize,
    pub n_unique_notes: usize,
    pub mean_notes_per_perfume: f64,
    /// Population standard deviation.
    pub std_notes_per_perfume: f64,
    pub top_notes: Vec<(String, usize)>,
}

/// Number of perfumes each note appears in.
pub fn note_frequencies(records: &[PerfumeRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for rec in records {
        for note in rec.note_set() {
            *counts.entry(note.to_owned()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn corpus_stats(records: &[PerfumeRecord], top_k: usize) -> Result<CorpusStats> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sizes: Vec<f64> = records.iter().map(|r| r.note_set().len() as f64).collect();
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<f64>() / n;
    let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;

    let counts = note_frequencies(records);
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    let n_unique_notes = ranked.len();
    // BTreeMap order is lexicographic; a stable sort keeps it for ties.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked.truncate(top_k);

    Ok(CorpusStats {
        n_perfumes: records.len(),
        n_unique_notes,
        mean_notes_per_perfume: mean,
        std_notes_per_perfume: var.sqrt(),
        top_notes: ranked,
    })
}

/// A fixed-length bag of notes drawn from one perfume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteSequence {
    pub perfume_id: String,
    pub tokens: Vec<String>,
}

/// Samples `length` notes uniformly with replacement from the perfume's
/// note set.
pub fn build_sequence<R: Rng + ?Sized>(
    record: &PerfumeRecord,
    length: usize,
    rng: &mut R,
) -> Result<NoteSequence> {
    let notes: Vec<&str> = record.note_set().into_iter().collect();
    if notes.is_empty() {
        return Err(Error::EmptyNoteSet {
            id: record.id.clone(),
        });
    }
    let tokens = (0..length)
        .map(|_| notes[rng.random_range(0..notes.len())].to_owned())
        .collect();
    Ok(NoteSequence {
        perfume_id: record.id.clone(),
        tokens,
    })
}

/// Builds one sequence per record, skipping records without notes.
pub fn build_sequences<R: Rng + ?Sized>(
    records: &[PerfumeRecord],
    length: usize,
    rng: &mut R,
) -> Vec<NoteSequence> {
    records
        .iter()
        .filter_map(|r| build_sequence(r, length, rng).ok())
        .collect()
}

/// Writes records as JSONL, one object per line.
pub fn write_jsonl<W: std::io::Write>(records: &[PerfumeRecord], mut w: W) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<jsonl output>", e))?;
    }
    Ok(())
}
