use statrs::distribution::{ContinuousCDF, Normal};

use scentspace::corpus::build_sequences;
use scentspace::experiments::{
    exp1a_cell, generate_synthetic_corpus, run_exp2, DensityOptions, NamedTable, SynthConfig,
};
use scentspace::rbo::RboConfig;
use scentspace::seed;
use scentspace::stats::{mann_whitney_u, UTestMethod};
use scentspace::trainer::{train, train_with_report, TrainConfig};

fn small_corpus(seed_value: u64) -> scentspace::experiments::SyntheticCorpus {
    let cfg = SynthConfig {
        n_perfumes: 300,
        ..SynthConfig::default()
    };
    generate_synthetic_corpus(&cfg, &mut seed::rng(seed_value)).unwrap()
}

#[test]
fn exact_and_normal_mwu_agree_for_moderate_samples() {
    let normal = Normal::standard();
    let mut worst: f64 = 0.0;
    for total in 10..=16usize {
        for n in 5..=total - 5 {
            for mask in 0u32..(1 << total) {
                if mask.count_ones() as usize != n {
                    continue;
                }
                let a: Vec<f64> = (0..total)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| i as f64)
                    .collect();
                let b: Vec<f64> = (0..total)
                    .filter(|i| mask >> i & 1 == 0)
                    .map(|i| i as f64)
                    .collect();
                let r = mann_whitney_u(&a, &b).unwrap();
                assert_eq!(r.method, UTestMethod::Exact);
                let approx = (2.0 * normal.sf(r.z.abs())).min(1.0);
                worst = worst.max((r.p_two_sided - approx).abs());
            }
        }
    }
    assert!(worst <= 0.02, "worst exact/normal gap {worst}");
}

#[test]
fn early_epoch_losses_decrease() {
    let corpus = small_corpus(31);
    let mut good = 0;
    let runs = 20;
    for s in 0..runs {
        let seqs = build_sequences(&corpus.records, 100, &mut seed::child_rng(32, s));
        let cfg = TrainConfig {
            dim: 16,
            epochs: 3,
            seed: s,
            ..TrainConfig::default()
        };
        let out = train_with_report(&seqs, &cfg).unwrap();
        if out.epoch_losses.windows(2).all(|w| w[1] <= w[0]) {
            good += 1;
        }
    }
    assert!(
        good * 10 >= runs * 9,
        "only {good}/{runs} runs had non-increasing losses"
    );
}

#[test]
fn shuffled_baselines_are_exchangeable() {
    let corpus = small_corpus(41);
    let seqs = build_sequences(&corpus.records, 100, &mut seed::rng(42));
    let cfg = TrainConfig {
        dim: 12,
        seed: 43,
        ..TrainConfig::default()
    };
    let smell = NamedTable::new("smell", train(&seqs, &cfg).unwrap());
    let word = NamedTable::new(
        "word",
        train(&seqs, &TrainConfig { seed: 44, ..cfg }).unwrap(),
    );
    let rbo_cfg = RboConfig::default();
    let trials = 40;
    let mut consistent = 0;
    for t in 0..trials {
        let random = |i: u64| -> Vec<f64> {
            let (_, per_word) = exp1a_cell(&smell, &word, &rbo_cfg, seed::derive(t, i)).unwrap();
            per_word.values().map(|v| v.rbo_random).collect()
        };
        if mann_whitney_u(&random(0), &random(1)).unwrap().p_two_sided > 0.01 {
            consistent += 1;
        }
    }
    assert!(
        consistent * 100 >= trials * 95,
        "{consistent}/{trials} trials consistent"
    );
}

#[test]
fn matched_random_perfumes_have_equal_group_sizes() {
    let corpus = small_corpus(51);
    let seqs = build_sequences(&corpus.records, 100, &mut seed::rng(52));
    let table = train(
        &seqs,
        &TrainConfig {
            dim: 10,
            min_count: 1,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let report = run_exp2(
        &table,
        &corpus.records,
        &mut seed::rng(53),
        &DensityOptions::default(),
    )
    .unwrap();
    assert_eq!(report.real_skipped + report.random_skipped, 0);
    assert_eq!(report.real_variances.len(), report.random_variances.len());
    assert!(report
        .real_variances
        .iter()
        .chain(&report.random_variances)
        .all(|v| *v >= 0.0));
}
