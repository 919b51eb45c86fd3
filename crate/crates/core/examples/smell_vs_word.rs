//! RBO grid between smell tables and word tables, against a shuffled
//! baseline.
//!
//! Here the "word" table is a second smell table trained with another
//! seed; real runs pass pretrained word vectors instead.

use scentspace::corpus::build_sequences;
use scentspace::experiments::{generate_synthetic_corpus, run_exp1a, NamedTable, SynthConfig};
use scentspace::rbo::RboConfig;
use scentspace::seed;
use scentspace::trainer::{train, TrainConfig};

fn main() -> scentspace::Result<()> {
    let synth = generate_synthetic_corpus(&SynthConfig::default(), &mut seed::rng(3))?;
    let table = |dim: usize, s: u64| -> scentspace::Result<NamedTable> {
        let seqs = build_sequences(&synth.records, 100, &mut seed::rng(s));
        let cfg = TrainConfig {
            dim,
            seed: s,
            ..TrainConfig::default()
        };
        Ok(NamedTable::new(format!("d{dim}_s{s}"), train(&seqs, &cfg)?))
    };
    let smell = vec![table(10, 1)?, table(20, 1)?];
    let word = vec![table(20, 2)?];

    let report = run_exp1a(&smell, &word, &RboConfig::default(), 42)?;
    for row in &report.rows {
        println!(
            "{} x {}: rbo {:.4} vs shuffled {:.4}, p = {:.2e}",
            row.smell_table, row.word_corpus_id, row.mean_rbo, row.mean_rbo_random, row.p_value
        );
    }
    println!("best: {}", report.best().smell_table);
    Ok(())
}
