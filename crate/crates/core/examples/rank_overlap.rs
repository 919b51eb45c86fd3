//! Rank-biased overlap between two rankings.

use scentspace::rbo::{rbo, RboConfig, RboVariant};

fn main() -> scentspace::Result<()> {
    let smell = [
        "lime",
        "bergamot",
        "grapefruit",
        "orange",
        "vanilla",
        "musk",
    ];
    let word = [
        "lime",
        "orange",
        "grapefruit",
        "bergamot",
        "musk",
        "vanilla",
    ];

    for p in [0.5, 0.9, 0.98] {
        let ext = rbo(&smell, &word, &RboConfig::with_p(p))?;
        let min = rbo(
            &smell,
            &word,
            &RboConfig {
                variant: RboVariant::Min,
                ..RboConfig::with_p(p)
            },
        )?;
        println!("p = {p:<4}  ext {ext:.4}  min {min:.4}");
    }

    let top3 = RboConfig {
        depth: Some(3),
        ..RboConfig::default()
    };
    println!("depth 3: {:.4}", rbo(&smell, &word, &top3)?);
    Ok(())
}
