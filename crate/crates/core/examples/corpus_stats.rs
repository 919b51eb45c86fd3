//! Parse perfume records, normalize notes, filter and summarize.
//!
//! ```text
//! cargo run --example corpus_stats
//! ```

use scentspace::corpus::{self, InputFormat};
use scentspace::seed;

const RECORDS: &str = r#"
{"id": "1", "name": "Agua Fresca", "top": ["Lemon", "Bergamot"], "heart": ["Neroli"], "base": ["White Musk"]}
{"id": "2", "name": "Nuit", "top": ["Pink Pepper"], "heart": ["Rose", "Jasmine Sambac"], "base": ["Oud", "Amber"]}
{"id": "3", "name": "Marine", "top": ["Sea-Salt", "Lemon"], "heart": ["Seaweed"], "base": null}
{"id": "4", "name": "Tiny", "top": ["Iris"], "heart": ["Iris"], "base": ["Iris."]}
"#;

fn main() -> scentspace::Result<()> {
    let raw = corpus::parse_perfumes(RECORDS.trim().as_bytes(), InputFormat::Jsonl)?;
    let normalized: Vec<_> = raw.iter().map(|r| r.normalized().0).collect();
    let kept = corpus::filter_corpus(&normalized, corpus::DEFAULT_MIN_NOTES);
    println!("{} of {} perfumes kept", kept.len(), raw.len());

    let stats = corpus::corpus_stats(&kept, 5)?;
    println!(
        "{} unique notes, {:.2} ± {:.2} per perfume",
        stats.n_unique_notes, stats.mean_notes_per_perfume, stats.std_notes_per_perfume
    );
    for (note, count) in &stats.top_notes {
        println!("  {note:<16} {count}");
    }

    let seqs = corpus::build_sequences(&kept, 12, &mut seed::rng(7));
    for s in &seqs {
        println!("{}: {}", s.perfume_id, s.tokens.join(" | "));
    }
    Ok(())
}
