//! Embedding tables: word2vec text I/O, cosine similarity, neighbor
//! rankings, shared vocabularies and the shuffled-assignment baseline.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const NORM_EPSILON: f64 = 1e-12;

/// Token to dense vector map with a fixed dimensionality.
///
/// Vectors are stored contiguously in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            tokens: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a table from `(token, vector)` pairs. Duplicate tokens and
    /// length mismatches are rejected.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self::new(dim);
        for (token, vector) in entries {
            let token = token.into();
            if !table.insert(token.clone(), &vector)? {
                return Err(Error::InvalidArgument(format!("duplicate token {token:?}")));
            }
        }
        Ok(table)
    }

    /// Appends an entry. Returns `false` (and leaves the table unchanged)
    /// when the token already exists.
    pub fn insert(&mut self, token: String, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.index.contains_key(&token) {
            return Ok(false);
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .enumerate()
            .map(move |(i, t)| (t.as_str(), self.row(i)))
    }

    /// Sub-table containing `tokens` in the given order. Unknown tokens are
    /// an error.
    pub fn restrict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Self> {
        let mut out = Self::new(self.dim);
        for t in tokens {
            let t = t.as_ref();
            let v = self
                .get(t)
                .ok_or_else(|| Error::OutOfVocabulary(t.to_owned()))?;
            out.insert(t.to_owned(), v)?;
        }
        Ok(out)
    }

    /// Applies `f` to every vector in place.
    pub fn map_vectors(&mut self, mut f: impl FnMut(&mut [f64])) {
        for chunk in self.data.chunks_mut(self.dim.max(1)) {
            f(chunk);
        }
    }

    /// Writes the table in word2vec text format. Spaces inside tokens are
    /// written as `_`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<embedding output>", e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for (token, vector) in self.iter() {
            write!(w, "{}", token.replace(' ', "_")).map_err(io)?;
            for x in vector {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_text(&mut w)
            .map_err(|e| e.context(path.display().to_string()))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// How token strings are treated while loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Lowercase tokens so they can be matched against normalized notes.
    pub lowercase: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { lowercase: true }
    }
}

/// A parsed table plus the number of duplicate tokens that were dropped.
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub table: EmbeddingTable,
    pub duplicates: usize,
}

/// Reads a word2vec text file: a `<count> <dim>` header followed by
/// `count` lines of `<token> <f1> ... <fdim>`. Underscores in tokens decode
/// to spaces. The first occurrence of a duplicate token wins.
pub fn load_table<R: BufRead>(reader: R, opts: LoadOptions) -> Result<LoadedTable> {
    let mut lines = reader.lines().enumerate();
    let fmt_err = |line: usize, message: String| Error::Format { line, message };

    let (count, dim) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(fmt_err(1, "missing header".into()));
        };
        let line = line.map_err(|e| fmt_err(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some((c, d)) if d > 0 => break (c, d),
            _ => {
                return Err(fmt_err(
                    i + 1,
                    format!("expected header `<count> <dim>`, got {line:?}"),
                ))
            }
        }
    };

    let mut table = EmbeddingTable::new(dim);
    let mut duplicates = 0;
    let mut seen = 0;
    let mut values = Vec::with_capacity(dim);
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| fmt_err(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if seen == count {
            return Err(fmt_err(
                line_no,
                format!("more entries than the {count} declared in the header"),
            ));
        }
        let mut parts = line.split_whitespace();
        let raw = parts.next().unwrap_or_default();
        values.clear();
        for p in parts {
            let x: f64 = p
                .parse()
                .map_err(|_| fmt_err(line_no, format!("invalid number {p:?}")))?;
            values.push(x);
        }
        if values.len() != dim {
            return Err(fmt_err(
                line_no,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        let mut token = raw.replace('_', " ");
        if opts.lowercase {
            token = token.to_lowercase();
        }
        if !table.insert(token, &values)? {
            duplicates += 1;
        }
        seen += 1;
    }
    if seen != count {
        return Err(fmt_err(
            0,
            format!("header declares {count} entries, found {seen}"),
        ));
    }
    if duplicates > 0 {
        log::warn!("dropped {duplicates} duplicate tokens while loading embeddings");
    }
    Ok(LoadedTable { table, duplicates })
}

/// Loads a table from disk. When `zip_member` is given, `path` is read as a
/// zip archive and the named member is parsed.
pub fn load_table_file(
    path: &Path,
    zip_member: Option<&str>,
    opts: LoadOptions,
) -> Result<LoadedTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ctx = |e: Error| e.context(path.display().to_string());
    match zip_member {
        None => load_table(BufReader::new(file), opts).map_err(ctx),
        Some(member) => {
            let mut archive = zip::ZipArchive::new(file).map_err(|e| {
                Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::InvalidData, e),
                )
            })?;
            let mut entry = archive.by_name(member).map_err(|e| {
                Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, e))
            })?;
            let mut text = String::new();
            entry
                .read_to_string(&mut text)
                .map_err(|e| Error::io(path, e))?;
            load_table(text.as_bytes(), opts).map_err(ctx)
        }
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu < NORM_EPSILON || nv < NORM_EPSILON {
        return Err(Error::DegenerateVector {
            threshold: NORM_EPSILON,
        });
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Tokens ordered by descending cosine similarity to a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRanking {
    pub query: String,
    pub ranked: Vec<(String, f64)>,
}

impl SimilarityRanking {
    pub fn tokens(&self) -> Vec<&str> {
        self.ranked.iter().map(|(t, _)| t.as_str()).collect()
    }
}

/// Scores every table entry against `target` and sorts descending, ties
/// broken lexicographically. `exclude` drops one token (the query).
pub fn rank_by_vector(
    table: &EmbeddingTable,
    target: &[f64],
    exclude: Option<&str>,
) -> Result<Vec<(String, f64)>> {
    let mut scored = Vec::with_capacity(table.len());
    for (token, v) in table.iter() {
        if Some(token) == exclude {
            continue;
        }
        scored.push((token.to_owned(), cosine(target, v)?));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}

/// The `k` nearest tokens to `query` (all of them when `k` is `None`).
pub fn neighbors(
    table: &EmbeddingTable,
    query: &str,
    k: Option<usize>,
) -> Result<SimilarityRanking> {
    let target = table
        .get(query)
        .ok_or_else(|| Error::OutOfVocabulary(query.to_owned()))?;
    let mut ranked = rank_by_vector(table, target, Some(query))?;
    if let Some(k) = k {
        ranked.truncate(k);
    }
    Ok(SimilarityRanking {
        query: query.to_owned(),
        ranked,
    })
}

/// Sorted intersection of the two token sets.
pub fn shared_vocab(a: &EmbeddingTable, b: &EmbeddingTable) -> Vec<String> {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let set: BTreeSet<&String> = small.tokens.iter().filter(|t| large.contains(t)).collect();
    set.into_iter().cloned().collect()
}

/// Reassigns the table's vectors to its tokens by a uniformly random
/// permutation.
pub fn shuffle_assignment<R: Rng + ?Sized>(table: &EmbeddingTable, rng: &mut R) -> EmbeddingTable {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.shuffle(rng);
    let mut out = EmbeddingTable::new(table.dim);
    for (token, &src) in table.tokens.iter().zip(&order) {
        out.insert(token.clone(), table.row(src))
            .expect("tokens are unique and dims match");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        let dim = entries[0].1.len();
        EmbeddingTable::from_entries(dim, entries.iter().map(|(t, v)| (*t, v.to_vec()))).unwrap()
    }

    #[test]
    fn parses_text_format() {
        let text = "2 3\nlemon 1 2 3\nsicilian_lemon 0.5 0 -1\n";
        let t = load_table(text.as_bytes(), LoadOptions::default())
            .unwrap()
            .table;
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("sicilian lemon").unwrap(), &[0.5, 0.0, -1.0]);
    }

    #[test]
    fn short_line_is_format_error() {
        let text = "2 3\na 1 2 3\nb 1 2\n";
        match load_table(text.as_bytes(), LoadOptions::default()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_is_format_error() {
        let text = "3 1\na 1\nb 2\n";
        assert!(matches!(
            load_table(text.as_bytes(), LoadOptions::default()),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn duplicates_keep_first() {
        let text = "3 1\nLemon 1\nlemon 2\nmusk 3\n";
        let loaded = load_table(text.as_bytes(), LoadOptions::default()).unwrap();
        assert_eq!(loaded.duplicates, 1);
        assert_eq!(loaded.table.get("lemon").unwrap(), &[1.0]);
        let raw = load_table(text.as_bytes(), LoadOptions { lowercase: false }).unwrap();
        assert_eq!(raw.duplicates, 0);
    }

    #[test]
    fn export_then_load_round_trips() {
        let t = table(&[
            ("sicilian lemon", &[0.1, -2.5e-7, 3.0]),
            ("musk", &[1.0 / 3.0, 0.0, -7.25]),
        ]);
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let back = load_table(buf.as_slice(), LoadOptions::default())
            .unwrap()
            .table;
        assert_eq!(back.tokens(), t.tokens());
        for (a, b) in t.iter().zip(back.iter()) {
            for (x, y) in a.1.iter().zip(b.1) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn loads_zip_member() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.zip");
        {
            let mut zw = zip::ZipWriter::new(File::create(&path).unwrap());
            zw.start_file::<_, ()>("model.txt", zip::write::SimpleFileOptions::default())
                .unwrap();
            zw.write_all(b"1 2\nsmell 0.5 0.5\n").unwrap();
            zw.finish().unwrap();
        }
        let t = load_table_file(&path, Some("model.txt"), LoadOptions::default())
            .unwrap()
            .table;
        assert_eq!(t.get("smell").unwrap(), &[0.5, 0.5]);
        assert!(load_table_file(&path, Some("nope.txt"), LoadOptions::default()).is_err());
    }

    #[test]
    fn cosine_examples() {
        let v = [0.3, -1.2, 4.0];
        assert_abs_diff_eq!(cosine(&v, &v).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap(),
            0.707_106_78,
            epsilon = 1e-8
        );
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::DegenerateVector { .. })
        ));
    }

    #[test]
    fn neighbor_examples() {
        let t = table(&[("q", &[1.0, 0.0]), ("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let r = neighbors(&t, "q", None).unwrap();
        assert_eq!(r.ranked, vec![("a".into(), 1.0), ("b".into(), 0.0)]);
        assert!(neighbors(&t, "q", Some(0)).unwrap().ranked.is_empty());
        assert!(matches!(
            neighbors(&t, "zzz", None),
            Err(Error::OutOfVocabulary(_))
        ));
    }

    #[test]
    fn ties_break_lexicographically() {
        let t = table(&[
            ("q", &[1.0, 0.0]),
            ("zeta", &[2.0, 0.0]),
            ("alpha", &[1.0, 0.0]),
        ]);
        assert_eq!(
            neighbors(&t, "q", None).unwrap().tokens(),
            vec!["alpha", "zeta"]
        );
    }

    #[test]
    fn shared_vocab_cases() {
        let a = table(&[("b", &[1.0]), ("a", &[1.0])]);
        let b = table(&[("a", &[1.0]), ("c", &[1.0]), ("b", &[2.0])]);
        let c = table(&[("x", &[1.0])]);
        assert_eq!(shared_vocab(&a, &b), vec!["a", "b"]);
        assert_eq!(shared_vocab(&b, &a), vec!["a", "b"]);
        assert!(shared_vocab(&a, &c).is_empty());
    }

    #[test]
    fn shuffle_single_entry_unchanged() {
        let t = table(&[("a", &[1.0, 2.0])]);
        let s = shuffle_assignment(&t, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(s, t);
    }

    #[test]
    fn shuffle_two_entries_swaps_half_the_time() {
        let t = table(&[("a", &[1.0]), ("b", &[2.0])]);
        let trials = 10_000;
        let swapped = (0..trials)
            .filter(|&seed| {
                let s = shuffle_assignment(&t, &mut ChaCha8Rng::seed_from_u64(seed));
                s.get("a").unwrap() == [2.0]
            })
            .count();
        let frac = swapped as f64 / trials as f64;
        assert!((frac - 0.5).abs() <= 0.05, "{frac}");
    }
}
