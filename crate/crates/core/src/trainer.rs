//! CBOW word2vec with negative sampling, trained from scratch on note
//! sequences.
//!
//! The context representation `h` is the mean of the context input vectors.
//! For a center token `c` and noise tokens `n`, the loss is
//! `-log σ(o_c·h) - Σ log σ(-o_n·h)` where `o` are output vectors.
//! Training is single-threaded and bit-reproducible for a given seed.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::NoteSequence;
use crate::error::{Error, Result};
use crate::store::EmbeddingTable;

/// Exponent applied to counts for the noise distribution.
pub const NOISE_EXPONENT: f64 = 0.75;

/// Token inventory with subsampling and noise probabilities.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    keep_probs: Vec<f64>,
    noise_dist: Vec<f64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from raw counts. Tokens are ordered by
    /// descending count, ties lexicographically.
    pub fn from_counts(
        counts: &BTreeMap<String, u64>,
        min_count: u64,
        subsample_t: f64,
    ) -> Result<Self> {
        let mut kept: Vec<(&String, u64)> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count && c > 0)
            .map(|(t, &c)| (t, c))
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary {
                min_count: min_count as usize,
            });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1));

        let total: u64 = kept.iter().map(|(_, c)| c).sum();
        let keep_probs = kept
            .iter()
            .map(|&(_, c)| keep_probability(c as f64 / total as f64, subsample_t))
            .collect();
        let powered: Vec<f64> = kept
            .iter()
            .map(|&(_, c)| (c as f64).powf(NOISE_EXPONENT))
            .collect();
        let z: f64 = powered.iter().sum();
        let noise_dist = powered.iter().map(|w| w / z).collect();

        let tokens: Vec<String> = kept.iter().map(|(t, _)| (*t).clone()).collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            counts: kept.iter().map(|&(_, c)| c).collect(),
            tokens,
            keep_probs,
            noise_dist,
            index,
        })
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

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn keep_probs(&self) -> &[f64] {
        &self.keep_probs
    }

    pub fn noise_dist(&self) -> &[f64] {
        &self.noise_dist
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

/// Probability of keeping an occurrence of a token with relative frequency
/// `f` under subsampling threshold `t`.
pub fn keep_probability(f: f64, t: f64) -> f64 {
    if t <= 0.0 || f <= 0.0 {
        return 1.0;
    }
    (((f / t).sqrt() + 1.0) * t / f).min(1.0)
}

pub fn count_tokens<'a, I>(sequences: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a NoteSequence>,
{
    let mut counts = BTreeMap::new();
    for seq in sequences {
        for tok in &seq.tokens {
            *counts.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn build_vocab<'a, I>(sequences: I, min_count: u64, subsample_t: f64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a NoteSequence>,
{
    Vocabulary::from_counts(&count_tokens(sequences), min_count, subsample_t)
}

/// Trainer hyperparameters. Defaults follow the usual word2vec settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub subsample_t: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            min_count: 5,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            subsample_t: 1e-3,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidArgument("window must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.lr_start > self.lr_end && self.lr_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rates must satisfy lr_start > lr_end > 0 (got {} and {})",
                self.lr_start, self.lr_end
            )));
        }
        Ok(())
    }
}

/// Input and output vector tables, row-major with one row per vocabulary
/// entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CbowParams {
    pub dim: usize,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// Sparse gradients keyed by vocabulary id. Repeated ids accumulate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CbowGradients {
    pub input: BTreeMap<usize, Vec<f64>>,
    pub output: BTreeMap<usize, Vec<f64>>,
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl CbowParams {
    /// Input vectors uniform in `[-0.5/dim, 0.5/dim]`, output vectors zero.
    pub fn init<R: Rng + ?Sized>(vocab_len: usize, dim: usize, rng: &mut R) -> Self {
        let input = (0..vocab_len * dim)
            .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
            .collect();
        Self {
            dim,
            input,
            output: vec![0.0; vocab_len * dim],
        }
    }

    pub fn input_row(&self, id: usize) -> &[f64] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn output_row(&self, id: usize) -> &[f64] {
        &self.output[id * self.dim..(id + 1) * self.dim]
    }

    fn context_mean(&self, context: &[usize], h: &mut [f64]) {
        h.fill(0.0);
        for &c in context {
            axpy(1.0, self.input_row(c), h);
        }
        let inv = 1.0 / context.len() as f64;
        h.iter_mut().for_each(|x| *x *= inv);
    }

    /// Loss and exact gradients for one CBOW example.
    pub fn loss_and_grads(
        &self,
        center: usize,
        context: &[usize],
        negatives: &[usize],
    ) -> Result<(f64, CbowGradients)> {
        if context.is_empty() {
            return Err(Error::InvalidArgument(
                "CBOW context must be non-empty".into(),
            ));
        }
        let dim = self.dim;
        let mut h = vec![0.0; dim];
        self.context_mean(context, &mut h);

        let mut grads = CbowGradients::default();
        let mut grad_h = vec![0.0; dim];
        let mut loss = 0.0;
        let targets = std::iter::once((center, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
        for (target, label) in targets {
            let o = self.output_row(target);
            let score: f64 = o.iter().zip(&h).map(|(a, b)| a * b).sum();
            loss -= if label > 0.0 {
                log_sigmoid(score)
            } else {
                log_sigmoid(-score)
            };
            // d loss / d score = σ(score) - label
            let coeff = sigmoid(score) - label;
            axpy(coeff, o, &mut grad_h);
            let g = grads.output.entry(target).or_insert_with(|| vec![0.0; dim]);
            axpy(coeff, &h, g);
        }
        let share = 1.0 / context.len() as f64;
        for &c in context {
            let g = grads.input.entry(c).or_insert_with(|| vec![0.0; dim]);
            axpy(share, &grad_h, g);
        }
        Ok((loss, grads))
    }

    /// One in-place SGD update with learning rate `lr`; returns the loss
    /// before the update. `scratch` must hold `2 * dim` values.
    ///
    /// Each output row is updated as soon as its error is known, so the
    /// result equals a full gradient step when the center and negatives
    /// are distinct.
    pub fn sgd_step(
        &mut self,
        center: usize,
        context: &[usize],
        negatives: &[usize],
        lr: f64,
        scratch: &mut [f64],
    ) -> f64 {
        let dim = self.dim;
        let (h, neu1e) = scratch[..2 * dim].split_at_mut(dim);
        self.context_mean(context, h);
        neu1e.fill(0.0);
        let mut loss = 0.0;
        let targets = std::iter::once((center, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
        for (target, label) in targets {
            let o = &mut self.output[target * dim..(target + 1) * dim];
            let score: f64 = o.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
            loss -= if label > 0.0 {
                log_sigmoid(score)
            } else {
                log_sigmoid(-score)
            };
            let g = (label - sigmoid(score)) * lr;
            axpy(g, o, neu1e);
            axpy(g, h, o);
        }
        let share = 1.0 / context.len() as f64;
        for &c in context {
            axpy(share, neu1e, &mut self.input[c * dim..(c + 1) * dim]);
        }
        loss
    }
}

/// Context positions for `center` with effective radius `radius`.
pub fn context_window(len: usize, center: usize, radius: usize) -> std::ops::Range<usize> {
    center.saturating_sub(radius)..(center + radius + 1).min(len)
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub table: EmbeddingTable,
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub vocab_size: usize,
}

/// Trains CBOW embeddings and returns the input vectors.
pub fn train(sequences: &[NoteSequence], config: &TrainConfig) -> Result<EmbeddingTable> {
    train_with_report(sequences, config).map(|o| o.table)
}

pub fn train_with_report(sequences: &[NoteSequence], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let vocab = build_vocab(sequences, config.min_count, config.subsample_t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let mut params = CbowParams::init(vocab.len(), dim, &mut rng);

    let encoded: Vec<Vec<usize>> = sequences
        .iter()
        .map(|s| s.tokens.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();
    let words_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * config.epochs).max(1) as f64;

    let noise = WeightedIndex::new(vocab.noise_dist()).expect("noise weights are positive");
    let negatives_per_example = if vocab.len() > 1 { config.negatives } else { 0 };

    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut kept = Vec::new();
    let mut context = Vec::with_capacity(2 * config.window);
    let mut negatives = Vec::with_capacity(negatives_per_example);
    let mut scratch = vec![0.0; 2 * dim];
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut examples = 0usize;
        for &si in &order {
            let seq = &encoded[si];
            let progress = processed as f64 / total_words;
            let lr =
                (config.lr_start - (config.lr_start - config.lr_end) * progress).max(config.lr_end);
            processed += seq.len();

            kept.clear();
            for &id in seq {
                let p = vocab.keep_probs()[id];
                if p >= 1.0 || rng.random::<f64>() < p {
                    kept.push(id);
                }
            }
            for pos in 0..kept.len() {
                let radius = config.window - rng.random_range(0..config.window);
                context.clear();
                context.extend(
                    context_window(kept.len(), pos, radius)
                        .filter(|&j| j != pos)
                        .map(|j| kept[j]),
                );
                if context.is_empty() {
                    continue;
                }
                let center = kept[pos];
                negatives.clear();
                while negatives.len() < negatives_per_example {
                    let n = noise.sample(&mut rng);
                    if n != center {
                        negatives.push(n);
                    }
                }
                epoch_loss += params.sgd_step(center, &context, &negatives, lr, &mut scratch);
                examples += 1;
            }
        }
        epoch_losses.push(if examples > 0 {
            epoch_loss / examples as f64
        } else {
            0.0
        });
    }

    let mut table = EmbeddingTable::new(dim);
    for (id, token) in vocab.tokens().iter().enumerate() {
        table.insert(token.clone(), params.input_row(id))?;
    }
    Ok(TrainOutput {
        table,
        epoch_losses,
        vocab_size: vocab.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seq(tokens: &[&str]) -> NoteSequence {
        NoteSequence {
            perfume_id: "p".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect()
    }

    #[test]
    fn min_count_threshold() {
        let v = Vocabulary::from_counts(&counts(&[("a", 10), ("b", 1)]), 5, 1e-3).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        assert!(matches!(
            Vocabulary::from_counts(&counts(&[("a", 1)]), 5, 1e-3),
            Err(Error::EmptyVocabulary { .. })
        ));
    }

    #[test]
    fn noise_ratio_follows_three_quarter_power() {
        let v = Vocabulary::from_counts(&counts(&[("a", 16), ("b", 1)]), 1, 1e-3).unwrap();
        let ratio = v.noise_dist()[v.id("a").unwrap()] / v.noise_dist()[v.id("b").unwrap()];
        assert_abs_diff_eq!(ratio, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.noise_dist().iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn build_vocab_counts_sequences() {
        let seqs = [seq(&["a", "b", "a"]), seq(&["a", "c"])];
        let v = build_vocab(&seqs, 1, 0.0).unwrap();
        assert_eq!(v.tokens(), ["a", "b", "c"]);
        assert_eq!(v.counts(), [3, 1, 1]);
        assert!(v.keep_probs().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn rare_tokens_are_never_subsampled() {
        assert_eq!(keep_probability(1e-3, 1e-3), 1.0);
        assert_eq!(keep_probability(1e-5, 1e-3), 1.0);
        let p = keep_probability(0.5, 1e-3);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn zero_params_loss() {
        let params = CbowParams {
            dim: 3,
            input: vec![0.0; 12],
            output: vec![0.0; 12],
        };
        let (loss, _) = params.loss_and_grads(0, &[1, 2], &[3, 1]).unwrap();
        assert_abs_diff_eq!(loss, 3.0 * std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn loss_without_negatives() {
        let params = CbowParams {
            dim: 2,
            input: vec![0.2, -0.1, 0.4, 0.3],
            output: vec![0.5, 0.5, -0.2, 0.1],
        };
        let (loss, grads) = params.loss_and_grads(0, &[1], &[]).unwrap();
        let score = 0.5 * 0.4 + 0.5 * 0.3;
        assert_abs_diff_eq!(loss, (1.0 + (-score as f64).exp()).ln(), epsilon = 1e-12);
        assert_eq!(grads.output.len(), 1);
    }

    #[test]
    fn empty_context_is_rejected() {
        let params = CbowParams::init(2, 2, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(params.loss_and_grads(0, &[], &[1]).is_err());
    }

    #[test]
    fn initialization_bounds() {
        let dim = 8;
        let params = CbowParams::init(50, dim, &mut ChaCha8Rng::seed_from_u64(4));
        let bound = 0.5 / dim as f64;
        assert!(params.input.iter().all(|x| x.abs() <= bound));
        assert!(params.output.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sgd_step_matches_gradient_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dim = 4;
        let mut params = CbowParams::init(6, dim, &mut rng);
        params
            .output
            .iter_mut()
            .for_each(|x| *x = rng.random::<f64>() - 0.5);
        let (center, context, negs) = (0, [1, 2, 1], [3, 4]);
        let lr = 0.1;
        let (loss, grads) = params.loss_and_grads(center, &context, &negs).unwrap();
        let mut expected = params.clone();
        for (id, g) in &grads.input {
            axpy(-lr, g, &mut expected.input[id * dim..(id + 1) * dim]);
        }
        for (id, g) in &grads.output {
            axpy(-lr, g, &mut expected.output[id * dim..(id + 1) * dim]);
        }
        let mut scratch = vec![0.0; 2 * dim];
        let step_loss = params.sgd_step(center, &context, &negs, lr, &mut scratch);
        assert_abs_diff_eq!(step_loss, loss, epsilon = 1e-14);
        for (a, b) in params.input.iter().zip(&expected.input) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        for (a, b) in params.output.iter().zip(&expected.output) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn window_stays_within_radius() {
        for len in 1..12 {
            for center in 0..len {
                for radius in 1..6 {
                    for j in context_window(len, center, radius) {
                        assert!(j < len);
                        assert!(j.abs_diff(center) <= radius);
                    }
                }
            }
        }
    }

    #[test]
    fn train_shape_and_determinism() {
        let seqs: Vec<NoteSequence> = (0..40)
            .map(|i| {
                if i % 2 == 0 {
                    seq(&["a", "b", "c", "a", "b", "c", "b"])
                } else {
                    seq(&["x", "y", "z", "y", "x", "z", "x"])
                }
            })
            .collect();
        let config = TrainConfig {
            dim: 20,
            min_count: 1,
            seed: 42,
            ..TrainConfig::default()
        };
        let a = train(&seqs, &config).unwrap();
        let b = train(&seqs, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        for (_, v) in a.iter() {
            assert_eq!(v.len(), 20);
            assert!(v.iter().any(|x| x.abs() > 1e-12));
        }
    }

    #[test]
    fn invalid_configs() {
        let seqs = [seq(&["a", "b"])];
        for cfg in [
            TrainConfig {
                dim: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                window: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                lr_start: 1e-5,
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(train(&seqs, &cfg), Err(Error::InvalidArgument(_))));
        }
        assert!(matches!(
            train(&seqs, &TrainConfig::default()),
            Err(Error::EmptyVocabulary { .. })
        ));
    }
}
