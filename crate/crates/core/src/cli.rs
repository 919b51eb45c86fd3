//! Command-line driver.
//!
//! Every subcommand resolves its options from flags, then an optional TOML
//! config file, then built-in defaults (in that order of precedence), and
//! writes `<command>.manifest.toml` into the output directory. A manifest
//! is itself a valid config file, so `--config <manifest>` replays a run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, InputFormat, PerfumeRecord};
use crate::error::{Error, Result};
use crate::experiments::{self, DensityOptions, NamedTable, RboGridReport, SynthConfig};
use crate::mapping::{self, MapHyper, MapKind, MappingModel, MlpConfig, PcaDomain};
use crate::rbo::{RboConfig, RboVariant};
use crate::seed;
use crate::stats;
use crate::store::{self, EmbeddingTable, LoadOptions};
use crate::trainer::{self, TrainConfig};

const EXIT_ANALYSIS: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "scentspace",
    version,
    about = "Smell embeddings from perfume compositions"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// Base seed for every random stream of the run.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory receiving every output file.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// TOML config file; explicit flags override its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, normalize and filter perfume records; write corpus statistics.
    Ingest(IngestArgs),
    /// Train CBOW smell embeddings, one table per dimensionality.
    Train(TrainArgs),
    /// Nearest notes of a query token.
    Neighbors(NeighborsArgs),
    /// RBO grid between smell tables and word tables.
    Exp1a(Exp1aArgs),
    /// Correlate per-word RBO with olfactory association.
    Exp1b(Exp1bArgs),
    /// Centroid-distance variance of real vs. random perfumes.
    Exp2(Exp2Args),
    /// Cross-validate word-to-smell regression maps and save fitted models.
    Map(MapArgs),
    /// Predict smell notes for words through a saved mapping model.
    Predict(PredictArgs),
    /// Generate a clustered synthetic perfume corpus.
    Synth(SynthArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::Neighbors(_) => "neighbors",
            Command::Exp1a(_) => "exp1a",
            Command::Exp1b(_) => "exp1b",
            Command::Exp2(_) => "exp2",
            Command::Map(_) => "map",
            Command::Predict(_) => "predict",
            Command::Synth(_) => "synth",
        }
    }
}

/// Fills every unset field of `$a` from `$b`.
macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "missing required option --{}",
            name.replace('_', "-")
        ))
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestArgs {
    /// Perfume records (JSONL or CSV).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    #[arg(long)]
    pub min_notes: Option<usize>,
    /// Number of most frequent notes to report.
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    pub min_notes: usize,
    pub top_k: usize,
}

impl IngestArgs {
    fn resolve(mut self, file: Self) -> Result<IngestConfig> {
        merge_fields!(self, file; input, format, min_notes, top_k);
        let input = required(self.input, "input")?;
        let format = match self.format {
            Some(f) => f,
            None => InputFormat::from_path(&input).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "cannot guess the format of {}; pass --format",
                    input.display()
                ))
            })?,
        };
        Ok(IngestConfig {
            input,
            format,
            min_notes: self.min_notes.unwrap_or(corpus::DEFAULT_MIN_NOTES),
            top_k: self.top_k.unwrap_or(10),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// Normalized corpus written by `ingest` (JSONL).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated embedding sizes.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub min_count: Option<u64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_start: Option<f64>,
    #[arg(long)]
    pub lr_end: Option<f64>,
    /// Subsampling threshold.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Notes sampled per perfume sequence.
    #[arg(long)]
    pub seq_len: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub corpus: PathBuf,
    pub dims: Vec<usize>,
    pub window: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub subsample: f64,
    pub seq_len: usize,
}

impl TrainArgs {
    fn resolve(mut self, file: Self) -> Result<TrainRunConfig> {
        merge_fields!(self, file; corpus, dims, window, min_count, negatives, epochs, lr_start, lr_end, subsample, seq_len);
        let d = TrainConfig::default();
        let dims = self.dims.unwrap_or_else(|| vec![10, 20, 50, 100]);
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "--dims must list positive sizes, got {dims:?}"
            )));
        }
        Ok(TrainRunConfig {
            corpus: required(self.corpus, "corpus")?,
            dims,
            window: self.window.unwrap_or(d.window),
            min_count: self.min_count.unwrap_or(d.min_count),
            negatives: self.negatives.unwrap_or(d.negatives),
            epochs: self.epochs.unwrap_or(d.epochs),
            lr_start: self.lr_start.unwrap_or(d.lr_start),
            lr_end: self.lr_end.unwrap_or(d.lr_end),
            subsample: self.subsample.unwrap_or(d.subsample_t),
            seq_len: self.seq_len.unwrap_or(corpus::DEFAULT_SEQUENCE_LENGTH),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborsArgs {
    /// Embedding table, `path` or `archive.zip#member`.
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborsConfig {
    pub table: String,
    pub query: String,
    pub k: usize,
}

impl NeighborsArgs {
    fn resolve(mut self, file: Self) -> Result<NeighborsConfig> {
        merge_fields!(self, file; table, query, k);
        Ok(NeighborsConfig {
            table: required(self.table, "table")?,
            query: required(self.query, "query")?,
            k: self.k.unwrap_or(10),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp1aArgs {
    /// Smell tables (repeatable); each is labelled by its file stem.
    #[arg(long)]
    pub smell: Option<Vec<String>>,
    /// Word tables as `id=path` or `id=archive.zip#member` (repeatable).
    #[arg(long)]
    pub word: Option<Vec<String>>,
    /// RBO persistence.
    #[arg(long)]
    pub p: Option<f64>,
    /// RBO evaluation depth (default: full ranking).
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<RboVariant>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exp1aConfig {
    pub smell: Vec<String>,
    pub word: Vec<String>,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    pub variant: RboVariant,
}

impl Exp1aArgs {
    fn resolve(mut self, file: Self) -> Result<Exp1aConfig> {
        merge_fields!(self, file; smell, word, p, depth, variant);
        let cfg = Exp1aConfig {
            smell: required(self.smell, "smell")?,
            word: required(self.word, "word")?,
            p: self.p.unwrap_or(crate::rbo::DEFAULT_PERSISTENCE),
            depth: self.depth,
            variant: self.variant.unwrap_or_default(),
        };
        cfg.rbo().validate()?;
        Ok(cfg)
    }
}

impl Exp1aConfig {
    fn rbo(&self) -> RboConfig {
        RboConfig {
            p: self.p,
            depth: self.depth,
            variant: self.variant,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp1bArgs {
    /// `exp1a_report.json` from a previous exp1a run.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Word table used for the association scores.
    #[arg(long)]
    pub word: Option<String>,
    /// Comma-separated olfaction seed words.
    #[arg(long, value_delimiter = ',')]
    pub seed_words: Option<Vec<String>>,
    /// File with one olfaction seed word per line.
    #[arg(long)]
    pub seed_words_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exp1bConfig {
    pub report: PathBuf,
    pub word: String,
    pub seed_words: Vec<String>,
}

impl Exp1bArgs {
    fn resolve(mut self, file: Self) -> Result<Exp1bConfig> {
        merge_fields!(self, file; report, word, seed_words, seed_words_file);
        let seed_words = match (self.seed_words, self.seed_words_file) {
            (Some(words), _) => words,
            (None, Some(path)) => std::fs::read_to_string(&path)
                .map_err(|e| Error::io(&path, e))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
            (None, None) => experiments::DEFAULT_SEED_WORDS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        };
        Ok(Exp1bConfig {
            report: required(self.report, "report")?,
            word: required(self.word, "word")?,
            seed_words,
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp2Args {
    /// Smell table.
    #[arg(long)]
    pub table: Option<String>,
    /// Normalized corpus (JSONL).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// KDE evaluation points.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exp2Config {
    pub table: String,
    pub corpus: PathBuf,
    pub bins: usize,
    pub grid: usize,
}

impl Exp2Args {
    fn resolve(mut self, file: Self) -> Result<Exp2Config> {
        merge_fields!(self, file; table, corpus, bins, grid);
        let d = DensityOptions::default();
        Ok(Exp2Config {
            table: required(self.table, "table")?,
            corpus: required(self.corpus, "corpus")?,
            bins: self.bins.unwrap_or(d.bins).max(1),
            grid: self.grid.unwrap_or(d.grid).max(2),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapArgs {
    /// Word table (source space).
    #[arg(long)]
    pub word: Option<String>,
    /// Smell table (target space).
    #[arg(long)]
    pub smell: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub kinds: Option<Vec<MapKind>>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// PCA components kept from the word vectors.
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long, value_enum)]
    pub pca_fit: Option<PcaDomain>,
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long)]
    pub mlp_hidden: Option<usize>,
    #[arg(long)]
    pub mlp_max_epochs: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapConfig {
    pub word: String,
    pub smell: String,
    pub kinds: Vec<MapKind>,
    pub folds: usize,
    pub components: usize,
    pub pca_fit: PcaDomain,
    pub knn_k: usize,
    pub mlp_hidden: usize,
    pub mlp_max_epochs: usize,
}

impl MapArgs {
    fn resolve(mut self, file: Self) -> Result<MapConfig> {
        merge_fields!(self, file; word, smell, kinds, folds, components, pca_fit, knn_k, mlp_hidden, mlp_max_epochs);
        let mlp = MlpConfig::default();
        Ok(MapConfig {
            word: required(self.word, "word")?,
            smell: required(self.smell, "smell")?,
            kinds: self.kinds.unwrap_or_else(|| MapKind::ALL.to_vec()),
            folds: self.folds.unwrap_or(5),
            components: self.components.unwrap_or(20),
            pca_fit: self.pca_fit.unwrap_or_default(),
            knn_k: self.knn_k.unwrap_or(5),
            mlp_hidden: self.mlp_hidden.unwrap_or(mlp.hidden),
            mlp_max_epochs: self.mlp_max_epochs.unwrap_or(mlp.max_epochs),
        })
    }
}

impl MapConfig {
    fn hyper(&self, seed_value: u64) -> MapHyper {
        MapHyper {
            knn_k: self.knn_k,
            mlp: MlpConfig {
                hidden: self.mlp_hidden,
                max_epochs: self.mlp_max_epochs,
                ..MlpConfig::default()
            },
            seed: seed_value,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictArgs {
    /// Mapping model JSON written by `map`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub word: Option<String>,
    #[arg(long)]
    pub smell: Option<String>,
    /// Comma-separated query words.
    #[arg(long, value_delimiter = ',')]
    pub words: Option<Vec<String>>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub word: String,
    pub smell: String,
    pub words: Vec<String>,
    pub k: usize,
}

impl PredictArgs {
    fn resolve(mut self, file: Self) -> Result<PredictConfig> {
        merge_fields!(self, file; model, word, smell, words, k);
        Ok(PredictConfig {
            model: required(self.model, "model")?,
            word: required(self.word, "word")?,
            smell: required(self.smell, "smell")?,
            words: required(self.words, "words")?,
            k: self.k.unwrap_or(5),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_perfumes: Option<usize>,
    #[arg(long = "clusters")]
    pub n_clusters: Option<usize>,
    #[arg(long)]
    pub notes_per_cluster: Option<usize>,
    #[arg(long)]
    pub notes_per_perfume: Option<usize>,
    /// Probability of swapping a note for an out-of-cluster note.
    #[arg(long = "noise")]
    pub cross_cluster_noise: Option<f64>,
}

impl SynthArgs {
    fn resolve(mut self, file: Self) -> Result<SynthConfig> {
        merge_fields!(self, file; n_perfumes, n_clusters, notes_per_cluster, notes_per_perfume, cross_cluster_noise);
        let d = SynthConfig::default();
        Ok(SynthConfig {
            n_perfumes: self.n_perfumes.unwrap_or(d.n_perfumes),
            n_clusters: self.n_clusters.unwrap_or(d.n_clusters),
            notes_per_cluster: self.notes_per_cluster.unwrap_or(d.notes_per_cluster),
            notes_per_perfume: self.notes_per_perfume.unwrap_or(d.notes_per_perfume),
            cross_cluster_noise: self.cross_cluster_noise.unwrap_or(d.cross_cluster_noise),
        })
    }
}

/// Resolved global options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
}

/// Contents of a manifest (and of a config file).
#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    threads: usize,
    out_dir: &'a Path,
    #[serde(flatten)]
    section: BTreeMap<&'a str, &'a C>,
}

/// Report wrapper echoing the resolved configuration.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportEnvelope<C, R> {
    pub command: String,
    pub seed: u64,
    pub config: C,
    pub report: R,
}

struct ConfigFile {
    global: GlobalArgs,
    table: toml::Table,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                global: GlobalArgs::default(),
                table: toml::Table::new(),
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::InvalidArgument(format!("{}: {e}", path.display()))
        })?;
        let pick = |key: &str| table.get(key).cloned();
        let global = GlobalArgs {
            seed: pick("seed").and_then(|v| v.as_integer()).map(|v| v as u64),
            threads: pick("threads")
                .and_then(|v| v.as_integer())
                .map(|v| v as usize),
            out_dir: pick("out_dir").and_then(|v| v.as_str().map(PathBuf::from)),
            config: None,
        };
        Ok(Self { global, table })
    }

    fn section<T: DeserializeOwned + Default>(&self, name: &str) -> Result<T> {
        match self.table.get(name) {
            None => Ok(T::default()),
            Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| {
                Error::InvalidArgument(format!("config section [{name}]: {e}"))
            }),
        }
    }
}

/// Splits `path#member` into the path and an optional zip member.
fn split_table_arg(arg: &str) -> (&str, Option<&str>) {
    match arg.split_once('#') {
        Some((path, member)) if !member.is_empty() => (path, Some(member)),
        _ => (arg, None),
    }
}

pub fn load_table_arg(arg: &str) -> Result<EmbeddingTable> {
    let (path, member) = split_table_arg(arg);
    Ok(store::load_table_file(Path::new(path), member, LoadOptions::default())?.table)
}

fn table_label(arg: &str) -> String {
    let (path, member) = split_table_arg(arg);
    let p = Path::new(member.unwrap_or(path));
    p.file_stem()
        .map_or_else(|| arg.to_owned(), |s| s.to_string_lossy().into_owned())
}

fn read_corpus(path: &Path) -> Result<Vec<PerfumeRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    corpus::parse_perfumes(BufReader::new(file), InputFormat::Jsonl)
        .map_err(|e| e.context(path.display().to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut wtr = csv::Writer::from_writer(create(path)?);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

struct Run {
    global: GlobalConfig,
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.global.out_dir.join(name)
    }

    fn manifest<C: Serialize>(&self, command: &str, config: &C) -> Result<()> {
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.global.seed,
            threads: self.global.threads,
            out_dir: &self.global.out_dir,
            section: BTreeMap::from([(command, config)]),
        };
        let text = toml::to_string(&manifest)
            .map_err(|e| Error::InvalidArgument(format!("cannot encode manifest: {e}")))?;
        let path = self.out(&format!("{command}.manifest.toml"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn envelope<'a, C, R>(
        &self,
        command: &str,
        config: &'a C,
        report: &'a R,
    ) -> ReportEnvelope<&'a C, &'a R> {
        ReportEnvelope {
            command: command.into(),
            seed: self.global.seed,
            config,
            report,
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_analysis() {
                EXIT_ANALYSIS
            } else {
                EXIT_USAGE
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let file = ConfigFile::load(cli.global.config.as_deref())?;
    let global = GlobalConfig {
        seed: cli.global.seed.or(file.global.seed).unwrap_or(0),
        threads: cli.global.threads.or(file.global.threads).unwrap_or(0),
        out_dir: cli
            .global
            .out_dir
            .clone()
            .or(file.global.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let name = cli.command.name();
    std::fs::create_dir_all(&global.out_dir).map_err(|e| Error::io(&global.out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(global.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let run = Run { global };
    pool.install(|| match cli.command {
        Command::Ingest(a) => cmd_ingest(&run, a.resolve(file.section(name)?)?),
        Command::Train(a) => cmd_train(&run, a.resolve(file.section(name)?)?),
        Command::Neighbors(a) => cmd_neighbors(&run, a.resolve(file.section(name)?)?),
        Command::Exp1a(a) => cmd_exp1a(&run, a.resolve(file.section(name)?)?),
        Command::Exp1b(a) => cmd_exp1b(&run, a.resolve(file.section(name)?)?),
        Command::Exp2(a) => cmd_exp2(&run, a.resolve(file.section(name)?)?),
        Command::Map(a) => cmd_map(&run, a.resolve(file.section(name)?)?),
        Command::Predict(a) => cmd_predict(&run, a.resolve(file.section(name)?)?),
        Command::Synth(a) => cmd_synth(&run, a.resolve(file.section(name)?)?),
    })
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    n_raw: usize,
    n_kept: usize,
    dropped_empty_notes: usize,
    stats: corpus::CorpusStats,
}

fn cmd_ingest(run: &Run, cfg: IngestConfig) -> Result<()> {
    let file = File::open(&cfg.input).map_err(|e| Error::io(&cfg.input, e))?;
    let raw = corpus::parse_perfumes(BufReader::new(file), cfg.format)
        .map_err(|e| e.context(cfg.input.display().to_string()))?;
    let mut dropped = 0;
    let normalized: Vec<PerfumeRecord> = raw
        .iter()
        .map(|r| {
            let (n, d) = r.normalized();
            dropped += d;
            n
        })
        .collect();
    let kept = corpus::filter_corpus(&normalized, cfg.min_notes);
    let stats = corpus::corpus_stats(&kept, cfg.top_k)?;
    let mut w = create(&run.out("corpus.jsonl"))?;
    corpus::write_jsonl(&kept, &mut w)?;
    w.flush()
        .map_err(|e| Error::io(run.out("corpus.jsonl"), e))?;
    let summary = IngestSummary {
        n_raw: raw.len(),
        n_kept: kept.len(),
        dropped_empty_notes: dropped,
        stats,
    };
    write_json(
        &run.out("stats.json"),
        &run.envelope("ingest", &cfg, &summary),
    )?;
    run.manifest("ingest", &cfg)?;
    println!(
        "{} perfumes kept of {}, {} unique notes, mean {:.2} (sd {:.2}) notes per perfume",
        summary.n_kept,
        summary.n_raw,
        summary.stats.n_unique_notes,
        summary.stats.mean_notes_per_perfume,
        summary.stats.std_notes_per_perfume
    );
    Ok(())
}

fn cmd_train(run: &Run, cfg: TrainRunConfig) -> Result<()> {
    let records = read_corpus(&cfg.corpus)?;
    let mut rng = seed::child_rng(run.global.seed, 0);
    let sequences = corpus::build_sequences(&records, cfg.seq_len, &mut rng);
    let mut summary = BTreeMap::new();
    for &dim in &cfg.dims {
        let tc = TrainConfig {
            dim,
            window: cfg.window,
            min_count: cfg.min_count,
            negatives: cfg.negatives,
            epochs: cfg.epochs,
            lr_start: cfg.lr_start,
            lr_end: cfg.lr_end,
            subsample_t: cfg.subsample,
            seed: seed::derive(run.global.seed, dim as u64),
        };
        let out = trainer::train_with_report(&sequences, &tc)?;
        let path = run.out(&format!("smell_d{dim}.txt"));
        out.table.save(&path)?;
        println!(
            "dim {dim}: {} notes, final epoch loss {:.4} -> {}",
            out.vocab_size,
            out.epoch_losses.last().copied().unwrap_or(f64::NAN),
            path.display()
        );
        summary.insert(format!("d{dim}"), out.epoch_losses);
    }
    write_json(
        &run.out("train_losses.json"),
        &run.envelope("train", &cfg, &summary),
    )?;
    run.manifest("train", &cfg)
}

fn cmd_neighbors(run: &Run, cfg: NeighborsConfig) -> Result<()> {
    let table = load_table_arg(&cfg.table)?;
    let ranking = store::neighbors(&table, &cfg.query.to_lowercase(), Some(cfg.k))?;
    write_csv(
        &run.out("neighbors.csv"),
        &["rank", "token", "cosine"],
        ranking
            .ranked
            .iter()
            .enumerate()
            .map(|(i, (t, s))| [(i + 1).to_string(), t.clone(), s.to_string()]),
    )?;
    for (i, (t, s)) in ranking.ranked.iter().enumerate() {
        println!("{:>3}  {t}  {s:.4}", i + 1);
    }
    run.manifest("neighbors", &cfg)
}

fn cmd_exp1a(run: &Run, cfg: Exp1aConfig) -> Result<()> {
    let smell = cfg
        .smell
        .iter()
        .map(|s| Ok(NamedTable::new(table_label(s), load_table_arg(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let word = cfg
        .word
        .iter()
        .map(|w| {
            let (id, arg) = w.split_once('=').unwrap_or((w.as_str(), w.as_str()));
            let id = if id == arg {
                table_label(arg)
            } else {
                id.to_owned()
            };
            Ok(NamedTable::new(id, load_table_arg(arg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = experiments::run_exp1a(&smell, &word, &cfg.rbo(), run.global.seed)?;
    write_csv(
        &run.out("exp1a_grid.csv"),
        &[
            "smell_dim",
            "smell_table",
            "word_corpus",
            "shared_vocab",
            "mean_rbo",
            "mean_rbo_random",
            "p_value",
        ],
        report.rows.iter().map(|r| {
            [
                r.smell_dim.to_string(),
                r.smell_table.clone(),
                r.word_corpus_id.clone(),
                r.shared_vocab.to_string(),
                r.mean_rbo.to_string(),
                r.mean_rbo_random.to_string(),
                r.p_value.to_string(),
            ]
        }),
    )?;
    write_csv(
        &run.out("exp1a_per_word.csv"),
        &["word", "rbo", "rbo_random"],
        report
            .per_word
            .iter()
            .map(|(w, v)| [w.clone(), v.rbo.to_string(), v.rbo_random.to_string()]),
    )?;
    write_json(
        &run.out("exp1a_report.json"),
        &run.envelope("exp1a", &cfg, &report),
    )?;
    for r in &report.rows {
        println!(
            "{:>8} x {:<12} n={:<5} rbo {:.4}  random {:.4}  p {:.3e}",
            r.smell_table,
            r.word_corpus_id,
            r.shared_vocab,
            r.mean_rbo,
            r.mean_rbo_random,
            r.p_value
        );
    }
    run.manifest("exp1a", &cfg)
}

fn cmd_exp1b(run: &Run, cfg: Exp1bConfig) -> Result<()> {
    let text = std::fs::read_to_string(&cfg.report).map_err(|e| Error::io(&cfg.report, e))?;
    let envelope: ReportEnvelope<serde_json::Value, RboGridReport> = serde_json::from_str(&text)
        .map_err(|e| Error::from(e).context(cfg.report.display().to_string()))?;
    let grid = envelope.report;
    let word = load_table_arg(&cfg.word)?;
    let targets: Vec<&String> = grid.per_word.keys().filter(|w| word.contains(w)).collect();
    let association = experiments::olfactory_association(&word, &cfg.seed_words, &targets)?;
    let spearman = experiments::run_exp1b(&grid.per_word, &association.scores)?;
    write_csv(
        &run.out("exp1b_scores.csv"),
        &["word", "rbo", "association"],
        association
            .scores
            .iter()
            .map(|(w, s)| [w.clone(), grid.per_word[w].rbo.to_string(), s.to_string()]),
    )?;
    let report = experiments::OlfactoryAssocReport {
        association,
        spearman,
    };
    write_json(
        &run.out("exp1b_report.json"),
        &run.envelope("exp1b", &cfg, &report),
    )?;
    println!(
        "spearman rho {:.4}, p {:.3e}, n {}",
        spearman.rho, spearman.p_two_sided, spearman.n
    );
    run.manifest("exp1b", &cfg)
}

fn cmd_exp2(run: &Run, cfg: Exp2Config) -> Result<()> {
    let table = load_table_arg(&cfg.table)?;
    let records = read_corpus(&cfg.corpus)?;
    let opts = DensityOptions {
        bins: cfg.bins,
        grid: cfg.grid,
    };
    let report = experiments::run_exp2(
        &table,
        &records,
        &mut seed::child_rng(run.global.seed, 2),
        &opts,
    )?;
    for (group, density) in [
        ("real", &report.real_density),
        ("random", &report.random_density),
    ] {
        stats::write_histogram_csv(
            &density.histogram,
            create(&run.out(&format!("histogram_{group}.csv")))?,
        )?;
        if let Some(kde) = &density.kde {
            stats::write_kde_csv(kde, create(&run.out(&format!("kde_{group}.csv")))?)?;
        }
    }
    write_json(
        &run.out("exp2_report.json"),
        &run.envelope("exp2", &cfg, &report),
    )?;
    println!(
        "real mean variance {:.4} (n {}, skipped {}), random {:.4} (n {}, skipped {}), MWU p {:.3e}",
        report.real_mean,
        report.real_variances.len(),
        report.real_skipped,
        report.random_mean,
        report.random_variances.len(),
        report.random_skipped,
        report.utest.p_two_sided
    );
    run.manifest("exp2", &cfg)
}

fn cmd_map(run: &Run, cfg: MapConfig) -> Result<()> {
    let word = load_table_arg(&cfg.word)?;
    let smell = load_table_arg(&cfg.smell)?;
    let data = mapping::build_training_data(&word, &smell, cfg.components, cfg.pca_fit)?;
    let hyper = cfg.hyper(run.global.seed);
    let report = mapping::cross_validate(
        &cfg.kinds,
        &data.x,
        &data.y,
        cfg.folds,
        run.global.seed,
        &hyper,
    )?;
    let mut header = vec!["kind".to_string(), "mse_mean".into(), "mse_std".into()];
    header.extend((1..=cfg.folds).map(|f| format!("fold{f}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &run.out("map_cv.csv"),
        &header_refs,
        report.per_model.iter().map(|r| {
            let mut row = vec![
                r.kind.to_string(),
                r.mse_mean.to_string(),
                r.mse_std.to_string(),
            ];
            row.extend(r.fold_mse.iter().map(f64::to_string));
            row
        }),
    )?;
    write_json(&run.out("map_cv.json"), &run.envelope("map", &cfg, &report))?;
    for &kind in &cfg.kinds {
        let model = mapping::fit_mapping(kind, &data, &hyper)?;
        model.save(&run.out(&format!("model_{kind}.json")))?;
    }
    for r in &report.per_model {
        println!("{:<7} mse {:.4} (sd {:.4})", r.kind, r.mse_mean, r.mse_std);
    }
    run.manifest("map", &cfg)
}

fn cmd_predict(run: &Run, cfg: PredictConfig) -> Result<()> {
    let model = MappingModel::load(&cfg.model)?;
    let word = load_table_arg(&cfg.word)?;
    let smell = load_table_arg(&cfg.smell)?;
    let mut rows = Vec::new();
    let mut predictions = BTreeMap::new();
    for w in &cfg.words {
        let w = w.to_lowercase();
        let p = mapping::predict_smell(&w, &word, &model, &smell, cfg.k)?;
        for (list, label) in [(&p.top.ranked, "most"), (&p.bottom, "least")] {
            for (i, (note, score)) in list.iter().enumerate() {
                rows.push([
                    w.clone(),
                    label.to_string(),
                    (i + 1).to_string(),
                    note.clone(),
                    score.to_string(),
                ]);
            }
        }
        let names = |l: &[(String, f64)]| {
            l.iter()
                .map(|(n, _)| n.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!(
            "{w}: most [{}] least [{}]",
            names(&p.top.ranked),
            names(&p.bottom)
        );
        predictions.insert(w, p);
    }
    write_csv(
        &run.out("predictions.csv"),
        &["word", "direction", "rank", "note", "cosine"],
        rows,
    )?;
    write_json(
        &run.out("predictions.json"),
        &run.envelope("predict", &cfg, &predictions),
    )?;
    run.manifest("predict", &cfg)
}

fn cmd_synth(run: &Run, cfg: SynthConfig) -> Result<()> {
    let corpus =
        experiments::generate_synthetic_corpus(&cfg, &mut seed::child_rng(run.global.seed, 3))?;
    let path = run.out("synthetic.jsonl");
    let mut w = create(&path)?;
    corpus::write_jsonl(&corpus.records, &mut w)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_csv(
        &run.out("note_clusters.csv"),
        &["note", "cluster"],
        corpus
            .note_clusters
            .iter()
            .map(|(n, c)| [n.clone(), c.to_string()]),
    )?;
    write_csv(
        &run.out("perfume_clusters.csv"),
        &["id", "cluster"],
        corpus
            .records
            .iter()
            .zip(&corpus.perfume_clusters)
            .map(|(r, c)| [r.id.clone(), c.to_string()]),
    )?;
    println!(
        "{} synthetic perfumes -> {}",
        corpus.records.len(),
        path.display()
    );
    run.manifest("synth", &cfg)
}
