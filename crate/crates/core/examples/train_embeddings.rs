//! Train CBOW smell embeddings on a clustered synthetic corpus and save
//! them in word2vec text format.

use scentspace::corpus::build_sequences;
use scentspace::experiments::{cluster_cosine_gap, generate_synthetic_corpus, SynthConfig};
use scentspace::seed;
use scentspace::trainer::{train_with_report, TrainConfig};

fn main() -> scentspace::Result<()> {
    let synth = generate_synthetic_corpus(&SynthConfig::default(), &mut seed::rng(1))?;
    let sequences = build_sequences(&synth.records, 100, &mut seed::rng(2));

    let config = TrainConfig {
        dim: 20,
        ..TrainConfig::default()
    };
    let out = train_with_report(&sequences, &config)?;
    for (epoch, loss) in out.epoch_losses.iter().enumerate() {
        println!("epoch {}: mean loss {loss:.4}", epoch + 1);
    }

    let (within, between) = cluster_cosine_gap(&out.table, &synth.note_clusters)?;
    println!("cosine within clusters {within:.3}, between {between:.3}");

    let path = std::env::temp_dir().join("scentspace_smell_d20.txt");
    out.table.save(&path)?;
    println!("{} vectors written to {}", out.table.len(), path.display());
    Ok(())
}
