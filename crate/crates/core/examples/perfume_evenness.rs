//! Spread of note vectors around each perfume's centroid, real perfumes
//! against frequency-matched random ones.

use scentspace::corpus::PerfumeRecord;
use scentspace::experiments::{perfume_variance, run_exp2, DensityOptions};
use scentspace::seed;
use scentspace::store::EmbeddingTable;

fn main() -> scentspace::Result<()> {
    // Each accord's notes sit at equal distance from the accord centre.
    let mut entries = Vec::new();
    for k in 0..20 {
        let centre = [(k % 5) as f64 * 3.0, (k / 5) as f64 * 3.0, 0.0, 0.0];
        for j in 0..3 {
            let mut v = centre.to_vec();
            v[j + 1] += 1.0;
            entries.push((format!("accord{k} note{j}"), v));
        }
    }
    let table = EmbeddingTable::from_entries(4, entries)?;
    let perfumes: Vec<PerfumeRecord> = (0..60)
        .map(|i| {
            let k = i % 20;
            let n = |j: usize| vec![format!("accord{k} note{j}")];
            PerfumeRecord::new(format!("p{i}"), format!("perfume {i}"), n(0), n(1), n(2))
        })
        .collect();

    println!(
        "first perfume: {:?}",
        perfume_variance(&table, &perfumes[0])?
    );
    let report = run_exp2(
        &table,
        &perfumes,
        &mut seed::rng(9),
        &DensityOptions { bins: 10, grid: 20 },
    )?;
    println!(
        "mean variance real {:.4} vs random {:.4}, MWU p = {:.2e}",
        report.real_mean, report.random_mean, report.utest.p_two_sided
    );
    for bin in &report.random_density.histogram {
        println!(
            "[{:.3}, {:.3}) {}",
            bin.left,
            bin.right,
            "#".repeat(bin.count)
        );
    }
    Ok(())
}
