//! Experiment drivers.
//!
//! * Exp 1a compares neighbor rankings of a smell table and a word table
//!   over their shared vocabulary using RBO, against a shuffled baseline.
//! * Exp 1b correlates those per-word RBOs with an olfactory association
//!   score.
//! * Exp 2 compares the spread of note vectors around each perfume's
//!   centroid for real and random perfumes.
//!
//! A clustered synthetic corpus generator is included so the whole
//! pipeline can be exercised without the original data.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{note_frequencies, PerfumeRecord};
use crate::error::{Error, Result};
use crate::rbo::{rbo, RboConfig};
use crate::seed;
use crate::stats::{self, DensityPoint, HistogramBin, SpearmanResult, UTestResult};
use crate::store::{cosine, neighbors, shared_vocab, shuffle_assignment, EmbeddingTable};

/// Olfaction-related words whose mean vector defines the association axis.
pub const DEFAULT_SEED_WORDS: [&str; 10] = [
    "smell",
    "odor",
    "odour",
    "scent",
    "aroma",
    "fragrance",
    "stench",
    "stink",
    "perfume",
    "whiff",
];

/// A table together with the label it is reported under.
#[derive(Debug, Clone)]
pub struct NamedTable {
    pub name: String,
    pub table: EmbeddingTable,
}

impl NamedTable {
    pub fn new(name: impl Into<String>, table: EmbeddingTable) -> Self {
        Self {
            name: name.into(),
            table,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordRbo {
    pub rbo: f64,
    pub rbo_random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub smell_dim: usize,
    pub smell_table: String,
    pub word_corpus_id: String,
    pub shared_vocab: usize,
    pub mean_rbo: f64,
    pub mean_rbo_random: f64,
    pub p_value: f64,
    pub utest: UTestResult,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RboGridReport {
    pub rbo_config: RboConfig,
    pub seed: u64,
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the configuration with the highest mean RBO.
    pub best_row: usize,
    /// Per-word values of the best configuration.
    pub per_word: BTreeMap<String, WordRbo>,
}

impl RboGridReport {
    pub fn best(&self) -> &GridRow {
        &self.rows[self.best_row]
    }
}

/// RBO between each shared word's neighbor rankings in `smell` and `word`,
/// plus the same against `shuffled`. All three tables must contain exactly
/// the shared vocabulary.
fn per_word_rbo(
    tokens: &[String],
    smell: &EmbeddingTable,
    word: &EmbeddingTable,
    shuffled: &EmbeddingTable,
    config: &RboConfig,
) -> Result<Vec<WordRbo>> {
    tokens
        .par_iter()
        .map(|w| {
            let in_word = neighbors(word, w, None)?;
            let in_smell = neighbors(smell, w, None)?;
            let in_shuffled = neighbors(shuffled, w, None)?;
            let word_rank = in_word.tokens();
            Ok(WordRbo {
                rbo: rbo(&in_smell.tokens(), &word_rank, config)?,
                rbo_random: rbo(&in_shuffled.tokens(), &word_rank, config)?,
            })
        })
        .collect()
}

/// Runs one grid cell and returns the row plus its per-word values.
pub fn exp1a_cell(
    smell: &NamedTable,
    word: &NamedTable,
    config: &RboConfig,
    cell_seed: u64,
) -> Result<(GridRow, BTreeMap<String, WordRbo>)> {
    let shared = shared_vocab(&smell.table, &word.table);
    if shared.len() < 2 {
        return Err(Error::Insufficient(format!(
            "{} x {}: shared vocabulary has {} items, need at least 2",
            smell.name,
            word.name,
            shared.len()
        )));
    }
    let smell_sub = smell.table.restrict(&shared)?;
    let word_sub = word.table.restrict(&shared)?;
    let shuffled = shuffle_assignment(&smell_sub, &mut seed::rng(cell_seed));
    let values = per_word_rbo(&shared, &smell_sub, &word_sub, &shuffled, config)?;
    let real: Vec<f64> = values.iter().map(|v| v.rbo).collect();
    let random: Vec<f64> = values.iter().map(|v| v.rbo_random).collect();
    let utest = stats::mann_whitney_u(&real, &random)?;
    let row = GridRow {
        smell_dim: smell.table.dim(),
        smell_table: smell.name.clone(),
        word_corpus_id: word.name.clone(),
        shared_vocab: shared.len(),
        mean_rbo: stats::mean(&real),
        mean_rbo_random: stats::mean(&random),
        p_value: utest.p_two_sided,
        utest,
        seed: cell_seed,
    };
    Ok((row, shared.into_iter().zip(values).collect()))
}

/// Grid of smell tables × word tables. Each cell draws its own shuffled
/// baseline from a seed derived from `seed` and the cell index.
pub fn run_exp1a(
    smell_tables: &[NamedTable],
    word_tables: &[NamedTable],
    config: &RboConfig,
    seed_value: u64,
) -> Result<RboGridReport> {
    config.validate()?;
    if smell_tables.is_empty() || word_tables.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one smell table and one word table".into(),
        ));
    }
    let mut rows: Vec<GridRow> = Vec::new();
    let mut best_row = 0;
    let mut per_word = BTreeMap::new();
    for (i, smell) in smell_tables.iter().enumerate() {
        for (j, word) in word_tables.iter().enumerate() {
            let cell = (i * word_tables.len() + j) as u64;
            let (row, values) = exp1a_cell(smell, word, config, seed::derive(seed_value, cell))?;
            if rows.is_empty() || row.mean_rbo > rows[best_row].mean_rbo {
                best_row = rows.len();
                per_word = values;
            }
            rows.push(row);
        }
    }
    Ok(RboGridReport {
        rbo_config: *config,
        seed: seed_value,
        rows,
        best_row,
        per_word,
    })
}

/// Olfactory association scores of target words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationScores {
    pub seed_words: Vec<String>,
    /// Seed words absent from the word table.
    pub missing_seeds: Vec<String>,
    pub scores: BTreeMap<String, f64>,
}

/// Cosine of each target with the mean vector of the seed words present in
/// the table.
pub fn olfactory_association<S: AsRef<str>, T: AsRef<str>>(
    word_table: &EmbeddingTable,
    seed_words: &[S],
    targets: &[T],
) -> Result<AssociationScores> {
    let mut mean = vec![0.0; word_table.dim()];
    let mut used = Vec::new();
    let mut missing = Vec::new();
    for s in seed_words {
        let s = s.as_ref();
        match word_table.get(s) {
            Some(v) => {
                mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
                used.push(s.to_owned());
            }
            None => missing.push(s.to_owned()),
        }
    }
    if used.is_empty() {
        return Err(Error::Insufficient(
            "none of the olfaction seed words are in the word table".into(),
        ));
    }
    if !missing.is_empty() {
        log::warn!("skipping seed words missing from the word table: {missing:?}");
    }
    mean.iter_mut().for_each(|m| *m /= used.len() as f64);
    let mut scores = BTreeMap::new();
    for t in targets {
        let t = t.as_ref();
        let v = word_table
            .get(t)
            .ok_or_else(|| Error::OutOfVocabulary(t.to_owned()))?;
        scores.insert(t.to_owned(), cosine(v, &mean)?);
    }
    Ok(AssociationScores {
        seed_words: used,
        missing_seeds: missing,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlfactoryAssocReport {
    pub association: AssociationScores,
    pub spearman: SpearmanResult,
}

/// Spearman correlation between per-word RBO and association score over
/// the words that have both.
pub fn run_exp1b(
    per_word: &BTreeMap<String, WordRbo>,
    scores: &BTreeMap<String, f64>,
) -> Result<SpearmanResult> {
    let (rbos, assoc): (Vec<f64>, Vec<f64>) = per_word
        .iter()
        .filter_map(|(w, r)| scores.get(w).map(|s| (r.rbo, *s)))
        .unzip();
    if rbos.len() < 3 {
        return Err(Error::Insufficient(format!(
            "need at least 3 words with both an RBO and an association score, got {}",
            rbos.len()
        )));
    }
    stats::spearman(&rbos, &assoc)
}

/// Spread of one perfume's note vectors around their centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteSpread {
    /// Population variance of the note-to-centroid Euclidean distances.
    pub variance: f64,
    pub embedded: usize,
    pub skipped: usize,
}

pub fn perfume_variance(table: &EmbeddingTable, record: &PerfumeRecord) -> Result<NoteSpread> {
    let notes = record.note_set();
    let vectors: Vec<&[f64]> = notes.iter().filter_map(|n| table.get(n)).collect();
    let skipped = notes.len() - vectors.len();
    if vectors.len() < 2 {
        return Err(Error::Insufficient(format!(
            "perfume {:?} has {} embeddable notes, need at least 2",
            record.id,
            vectors.len()
        )));
    }
    let dim = table.dim();
    let mut centroid = vec![0.0; dim];
    for v in &vectors {
        centroid.iter_mut().zip(*v).for_each(|(c, x)| *c += x);
    }
    centroid.iter_mut().for_each(|c| *c /= vectors.len() as f64);
    let distances: Vec<f64> = vectors
        .iter()
        .map(|v| {
            v.iter()
                .zip(&centroid)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(NoteSpread {
        variance: stats::variance(&distances),
        embedded: vectors.len(),
        skipped,
    })
}

/// Draws `k` distinct indices with probability proportional to `weights`
/// (successive sampling without replacement).
fn weighted_distinct<R: Rng + ?Sized>(
    dist: &WeightedIndex<f64>,
    weights: &[f64],
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(k);
    let mut seen = BTreeSet::new();
    let mut attempts = 0;
    while chosen.len() < k && attempts < 64 * k + 64 {
        let i = dist.sample(rng);
        if seen.insert(i) {
            chosen.push(i);
        }
        attempts += 1;
    }
    if chosen.len() < k {
        // Heavily skewed weights: finish with exponential-key sampling over
        // the remaining items, which has the same distribution.
        let mut keys: Vec<(f64, usize)> = weights
            .iter()
            .enumerate()
            .filter(|(i, w)| **w > 0.0 && !seen.contains(i))
            .map(|(i, w)| (rng.random::<f64>().ln() / w, i))
            .collect();
        keys.sort_by(|a, b| b.0.total_cmp(&a.0));
        chosen.extend(keys.into_iter().take(k - chosen.len()).map(|(_, i)| i));
    }
    chosen
}

/// Splits notes round-robin into top, heart and base.
fn spread_categories(notes: Vec<String>) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut cats = (Vec::new(), Vec::new(), Vec::new());
    for (i, n) in notes.into_iter().enumerate() {
        match i % 3 {
            0 => cats.0.push(n),
            1 => cats.1.push(n),
            _ => cats.2.push(n),
        }
    }
    cats
}

/// One random perfume per real perfume, with the same number of distinct
/// notes, sampled without replacement proportionally to `note_freqs`.
pub fn generate_random_perfumes<R: Rng + ?Sized>(
    real: &[PerfumeRecord],
    note_freqs: &BTreeMap<String, usize>,
    rng: &mut R,
) -> Result<Vec<PerfumeRecord>> {
    let (notes, weights): (Vec<&String>, Vec<f64>) = note_freqs
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(n, &c)| (n, c as f64))
        .unzip();
    if notes.is_empty() {
        return Err(Error::Generation("note frequency table is empty".into()));
    }
    let dist = WeightedIndex::new(&weights).expect("weights are positive");
    real.iter()
        .map(|r| {
            let k = r.note_set().len();
            if k > notes.len() {
                return Err(Error::Generation(format!(
                    "perfume {:?} needs {k} distinct notes, vocabulary has {}",
                    r.id,
                    notes.len()
                )));
            }
            let picked = weighted_distinct(&dist, &weights, k, rng)
                .into_iter()
                .map(|i| notes[i].clone())
                .collect();
            let (top, heart, base) = spread_categories(picked);
            Ok(PerfumeRecord::new(
                format!("random-{}", r.id),
                format!("random {}", r.name),
                top,
                heart,
                base,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub bins: usize,
    pub grid: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            bins: 50,
            grid: 200,
        }
    }
}

/// Histogram and density estimate for one group of variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDensity {
    pub histogram: Vec<HistogramBin>,
    /// `None` when the group has fewer than two values or no variance.
    pub kde: Option<Vec<DensityPoint>>,
}

impl GroupDensity {
    fn of(values: &[f64], opts: &DensityOptions) -> Self {
        Self {
            histogram: stats::histogram(values, opts.bins),
            kde: stats::kde(values, opts.grid).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AestheticsReport {
    pub real_variances: Vec<f64>,
    pub random_variances: Vec<f64>,
    pub real_skipped: usize,
    pub random_skipped: usize,
    pub real_mean: f64,
    pub random_mean: f64,
    pub utest: UTestResult,
    pub real_density: GroupDensity,
    pub random_density: GroupDensity,
}

fn variances(table: &EmbeddingTable, records: &[PerfumeRecord]) -> (Vec<f64>, usize) {
    let spreads: Vec<Option<f64>> = records
        .par_iter()
        .map(|r| perfume_variance(table, r).ok().map(|s| s.variance))
        .collect();
    let skipped = spreads.iter().filter(|s| s.is_none()).count();
    (spreads.into_iter().flatten().collect(), skipped)
}

/// Compares centroid-distance variances of `real` against an explicit
/// comparison group.
pub fn compare_spread(
    table: &EmbeddingTable,
    real: &[PerfumeRecord],
    random: &[PerfumeRecord],
    opts: &DensityOptions,
) -> Result<AestheticsReport> {
    let (real_variances, real_skipped) = variances(table, real);
    let (random_variances, random_skipped) = variances(table, random);
    if real_variances.is_empty() || random_variances.is_empty() {
        return Err(Error::Insufficient(
            "no perfume has at least 2 embeddable notes".into(),
        ));
    }
    let utest = stats::mann_whitney_u(&real_variances, &random_variances)?;
    Ok(AestheticsReport {
        real_mean: stats::mean(&real_variances),
        random_mean: stats::mean(&random_variances),
        real_density: GroupDensity::of(&real_variances, opts),
        random_density: GroupDensity::of(&random_variances, opts),
        real_variances,
        random_variances,
        real_skipped,
        random_skipped,
        utest,
    })
}

/// Real perfumes against matched random perfumes drawn from the real note
/// frequencies.
pub fn run_exp2<R: Rng + ?Sized>(
    table: &EmbeddingTable,
    real: &[PerfumeRecord],
    rng: &mut R,
    opts: &DensityOptions,
) -> Result<AestheticsReport> {
    let freqs = note_frequencies(real);
    let random = generate_random_perfumes(real, &freqs, rng)?;
    compare_spread(table, real, &random, opts)
}

/// Parameters of the clustered synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_perfumes: usize,
    pub n_clusters: usize,
    pub notes_per_cluster: usize,
    pub notes_per_perfume: usize,
    /// Probability that a note is swapped for an out-of-cluster note.
    pub cross_cluster_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_perfumes: 2000,
            n_clusters: 10,
            notes_per_cluster: 20,
            notes_per_perfume: 8,
            cross_cluster_noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub records: Vec<PerfumeRecord>,
    /// Home cluster of each perfume.
    pub perfume_clusters: Vec<usize>,
    pub note_clusters: BTreeMap<String, usize>,
}

pub fn synthetic_note(cluster: usize, index: usize) -> String {
    format!("c{cluster}n{index}")
}

/// Perfumes whose notes come from one home cluster, each note replaced by
/// a uniformly drawn out-of-cluster note with probability
/// `cross_cluster_noise`.
pub fn generate_synthetic_corpus<R: Rng + ?Sized>(
    config: &SynthConfig,
    rng: &mut R,
) -> Result<SyntheticCorpus> {
    let SynthConfig {
        n_perfumes,
        n_clusters,
        notes_per_cluster,
        notes_per_perfume,
        cross_cluster_noise: noise,
    } = *config;
    if n_perfumes == 0 || n_clusters == 0 || notes_per_cluster == 0 || notes_per_perfume == 0 {
        return Err(Error::InvalidArgument(
            "synthetic corpus parameters must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::InvalidArgument(format!(
            "cross-cluster noise must lie in [0, 1), got {noise}"
        )));
    }
    let total = n_clusters * notes_per_cluster;
    if notes_per_perfume > total {
        return Err(Error::Generation(format!(
            "{notes_per_perfume} notes per perfume exceed the {total} available notes"
        )));
    }
    let note_id =
        |global: usize| synthetic_note(global / notes_per_cluster, global % notes_per_cluster);

    let mut records = Vec::with_capacity(n_perfumes);
    let mut perfume_clusters = Vec::with_capacity(n_perfumes);
    for p in 0..n_perfumes {
        let home = rng.random_range(0..n_clusters);
        let offset = home * notes_per_cluster;
        let in_cluster = notes_per_perfume.min(notes_per_cluster);
        let mut picked: Vec<usize> = sample_indices(rng, notes_per_cluster, in_cluster)
            .into_iter()
            .map(|i| offset + i)
            .collect();
        // More notes than the cluster holds: fill from outside it.
        while picked.len() < notes_per_perfume {
            let g = rng.random_range(0..total);
            if !picked.contains(&g) {
                picked.push(g);
            }
        }
        let outside = total - notes_per_cluster;
        if outside > 0 && noise > 0.0 {
            for slot in 0..picked.len() {
                if rng.random::<f64>() >= noise {
                    continue;
                }
                // Uniform over out-of-cluster notes not yet in the perfume.
                let candidates: Vec<usize> = (0..total)
                    .filter(|g| g / notes_per_cluster != home && !picked.contains(g))
                    .collect();
                if let Some(&g) = candidates.get(rng.random_range(0..candidates.len().max(1))) {
                    picked[slot] = g;
                }
            }
        }
        let notes: Vec<String> = picked.into_iter().map(note_id).collect();
        let (top, heart, base) = spread_categories(notes);
        records.push(PerfumeRecord::new(
            format!("synth{p}"),
            format!("synthetic {p}"),
            top,
            heart,
            base,
        ));
        perfume_clusters.push(home);
    }
    let note_clusters = (0..total)
        .map(|g| (note_id(g), g / notes_per_cluster))
        .collect();
    Ok(SyntheticCorpus {
        records,
        perfume_clusters,
        note_clusters,
    })
}

/// Mean pairwise cosine within clusters and between clusters, over notes
/// present in the table.
pub fn cluster_cosine_gap(
    table: &EmbeddingTable,
    note_clusters: &BTreeMap<String, usize>,
) -> Result<(f64, f64)> {
    let present: Vec<(&[f64], usize)> = note_clusters
        .iter()
        .filter_map(|(n, &c)| table.get(n).map(|v| (v, c)))
        .collect();
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            let c = cosine(present[i].0, present[j].0)?;
            if present[i].1 == present[j].1 {
                within += c;
                nw += 1;
            } else {
                between += c;
                nb += 1;
            }
        }
    }
    if nw == 0 || nb == 0 {
        return Err(Error::Insufficient(
            "need note pairs both within and between clusters".into(),
        ));
    }
    Ok((within / nw as f64, between / nb as f64))
}
