//! Load a word2vec text table and rank notes by cosine similarity.

use scentspace::store::{self, LoadOptions};

const TABLE: &str = "\
6 3
lemon 0.9 0.1 0.0
lime 0.85 0.2 0.05
bergamot 0.8 0.3 0.1
vanilla 0.0 0.2 0.9
tonka_bean 0.05 0.25 0.85
Musk 0.1 0.9 0.3
";

fn main() -> scentspace::Result<()> {
    let loaded = store::load_table(TABLE.as_bytes(), LoadOptions::default())?;
    let table = loaded.table;

    for query in ["lemon", "tonka bean", "musk"] {
        let ranking = store::neighbors(&table, query, Some(3))?;
        let shown: Vec<String> = ranking
            .ranked
            .iter()
            .map(|(t, s)| format!("{t} ({s:.3})"))
            .collect();
        println!("{query:>10}: {}", shown.join(", "));
    }
    Ok(())
}
