//! Association of words with a set of olfactory seed words, correlated
//! with per-word RBO.

use std::collections::BTreeMap;

use scentspace::experiments::{olfactory_association, run_exp1b, WordRbo};
use scentspace::store::EmbeddingTable;

fn main() -> scentspace::Result<()> {
    let words = EmbeddingTable::from_entries(
        3,
        [
            ("smell", vec![1.0, 0.1, 0.0]),
            ("odor", vec![0.9, 0.2, 0.1]),
            ("lemon", vec![0.7, 0.5, 0.1]),
            ("smoke", vec![0.6, 0.1, 0.6]),
            ("leather", vec![0.3, 0.3, 0.8]),
            ("table", vec![0.0, 0.2, 1.0]),
        ],
    )?;
    let targets = ["lemon", "smoke", "leather", "table"];
    let assoc = olfactory_association(&words, &["smell", "odor", "whiff"], &targets)?;
    println!("missing seeds: {:?}", assoc.missing_seeds);
    for (w, s) in &assoc.scores {
        println!("{w:>8}: {s:.3}");
    }

    let per_word: BTreeMap<String, WordRbo> = [
        ("lemon", 0.21),
        ("smoke", 0.12),
        ("leather", 0.09),
        ("table", 0.02),
    ]
    .into_iter()
    .map(|(w, r)| {
        (
            w.to_string(),
            WordRbo {
                rbo: r,
                rbo_random: 0.01,
            },
        )
    })
    .collect();
    let rho = run_exp1b(&per_word, &assoc.scores)?;
    println!("spearman rho {:.3}, p {:.3}", rho.rho, rho.p_two_sided);
    Ok(())
}
