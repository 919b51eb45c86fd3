//! Learn maps from word space into smell space, cross-validate them and
//! predict smells for a word.

use rand::Rng;

use scentspace::mapping::{self, MapHyper, MapKind, PcaDomain};
use scentspace::seed;
use scentspace::store::EmbeddingTable;

fn main() -> scentspace::Result<()> {
    let mut rng = seed::rng(5);
    let notes: Vec<String> = (0..80).map(|i| format!("note{i}")).collect();
    let smell = EmbeddingTable::from_entries(
        6,
        notes.iter().map(|n| {
            (
                n.clone(),
                (0..6).map(|_| rng.random::<f64>() - 0.5).collect(),
            )
        }),
    )?;
    // Word vectors: a noisy linear image of the smell vectors plus junk dimensions.
    let word = EmbeddingTable::from_entries(
        12,
        smell.iter().map(|(t, v)| {
            let mut w: Vec<f64> = v.iter().flat_map(|x| [2.0 * x, -x]).collect();
            w.iter_mut()
                .for_each(|x| *x += 0.05 * (rng.random::<f64>() - 0.5));
            (t.to_owned(), w)
        }),
    )?;

    let data = mapping::build_training_data(&word, &smell, 8, PcaDomain::Shared)?;
    let hyper = MapHyper::default();
    let cv = mapping::cross_validate(&MapKind::ALL, &data.x, &data.y, 5, 1, &hyper)?;
    for row in &cv.per_model {
        println!(
            "{:<7} mse {:.4} ± {:.4}",
            row.kind, row.mse_mean, row.mse_std
        );
    }

    let model = mapping::fit_mapping(MapKind::Linear, &data, &hyper)?;
    let pred = mapping::predict_smell("note3", &word, &model, &smell, 3)?;
    println!("note3 -> {:?}", pred.top.tokens());
    println!(
        "least like note3: {:?}",
        pred.bottom.iter().map(|(t, _)| t).collect::<Vec<_>>()
    );
    Ok(())
}
