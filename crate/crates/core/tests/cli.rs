use std::io::Write;
use std::path::{Path, PathBuf};

use scentspace::cli::run;

fn scentspace(args: &[&str]) -> i32 {
    run(std::iter::once("scentspace").chain(args.iter().copied()))
}

fn p(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

/// Synthetic corpus plus smell tables of sizes 4..=7 in `dir`.
fn fixture(dir: &Path) -> PathBuf {
    let out = p(dir);
    assert_eq!(
        scentspace(&[
            "synth",
            "--n-perfumes",
            "200",
            "--seed",
            "2",
            "--out-dir",
            &out
        ]),
        0
    );
    assert_eq!(
        scentspace(&[
            "ingest",
            "--input",
            &p(&dir.join("synthetic.jsonl")),
            "--out-dir",
            &out
        ]),
        0
    );
    assert_eq!(
        scentspace(&[
            "train",
            "--corpus",
            &p(&dir.join("corpus.jsonl")),
            "--dims",
            "4,5,6,7",
            "--epochs",
            "2",
            "--out-dir",
            &out
        ]),
        0
    );
    dir.join("corpus.jsonl")
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = p(tmp.path());
    assert_eq!(scentspace(&["--help"]), 0);
    assert_eq!(scentspace(&["bogus"]), 2);
    assert_eq!(
        scentspace(&[
            "train",
            "--corpus",
            "x.jsonl",
            "--dims",
            "0",
            "--out-dir",
            &out
        ]),
        2
    );
    assert_eq!(
        scentspace(&[
            "ingest",
            "--input",
            &p(&tmp.path().join("missing.jsonl")),
            "--out-dir",
            &out
        ]),
        2
    );
    assert_eq!(scentspace(&["neighbors", "--out-dir", &out]), 2);

    let corpus = fixture(tmp.path());
    let table = p(&tmp.path().join("smell_d6.txt"));
    let report = p(&tmp.path().join("exp1a_report.json"));
    assert_eq!(
        scentspace(&[
            "exp1a",
            "--smell",
            &table,
            "--word",
            &format!("same={table}"),
            "--out-dir",
            &out
        ]),
        0
    );
    // Identical spaces make every RBO 1, leaving Spearman undefined.
    assert_eq!(
        scentspace(&[
            "exp1b",
            "--report",
            &report,
            "--word",
            &table,
            "--seed-words",
            "c0n0",
            "--out-dir",
            &out
        ]),
        1
    );
    assert_eq!(
        scentspace(&[
            "neighbors",
            "--table",
            &table,
            "--query",
            "nothing",
            "--out-dir",
            &out
        ]),
        2
    );
    assert!(corpus.exists());
}

#[test]
fn output_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = p(dir);
    fixture(dir);
    let mut word_args = Vec::new();
    for s in 0..3 {
        let wdir = dir.join(format!("w{s}"));
        let seed = (10 + s).to_string();
        assert_eq!(
            scentspace(&[
                "train",
                "--corpus",
                &p(&dir.join("corpus.jsonl")),
                "--dims",
                "6",
                "--epochs",
                "1",
                "--seed",
                &seed,
                "--out-dir",
                &p(&wdir)
            ]),
            0
        );
        word_args.push("--word".to_string());
        word_args.push(format!("corpus{s}={}", p(&wdir.join("smell_d6.txt"))));
    }
    let mut args = vec![
        "exp1a".to_string(),
        "--p".into(),
        "0.95".into(),
        "--out-dir".into(),
        out.clone(),
    ];
    for d in 4..=7 {
        args.push("--smell".into());
        args.push(p(&dir.join(format!("smell_d{d}.txt"))));
    }
    args.extend(word_args);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(scentspace(&refs), 0);
    assert_eq!(csv_rows(&dir.join("exp1a_grid.csv")), 12);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("exp1a_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["p"], 0.95);
    assert_eq!(report["report"]["rbo_config"]["p"], 0.95);

    let table = p(&dir.join("smell_d7.txt"));
    assert_eq!(
        scentspace(&[
            "neighbors",
            "--table",
            &table,
            "--query",
            "C0N1",
            "--k",
            "5",
            "--out-dir",
            &out
        ]),
        0
    );
    assert_eq!(csv_rows(&dir.join("neighbors.csv")), 5);

    assert_eq!(
        scentspace(&[
            "map",
            "--word",
            &table,
            "--smell",
            &p(&dir.join("smell_d4.txt")),
            "--kinds",
            "linear,knn,dummy",
            "--folds",
            "5",
            "--components",
            "5",
            "--out-dir",
            &out,
        ]),
        0
    );
    assert_eq!(csv_rows(&dir.join("map_cv.csv")), 3);
    for kind in ["linear", "knn", "dummy"] {
        assert!(dir.join(format!("model_{kind}.json")).exists());
    }
    assert!(!dir.join("model_mlp.json").exists());

    assert_eq!(
        scentspace(&[
            "exp1b",
            "--report",
            &p(&dir.join("exp1a_report.json")),
            "--word",
            &table,
            "--out-dir",
            &out,
            "--seed-words",
            "c0n0,c0n1,missing",
        ]),
        0
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("exp1b_report.json")).unwrap())
            .unwrap();
    assert_eq!(
        report["config"]["seed_words"],
        serde_json::json!(["c0n0", "c0n1", "missing"])
    );
    assert_eq!(
        report["report"]["association"]["missing_seeds"],
        serde_json::json!(["missing"])
    );
}

#[test]
fn config_file_is_merged_under_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir);
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        format!(
            "seed = 3\nout_dir = {:?}\n\n[neighbors]\ntable = {:?}\nquery = \"c1n1\"\nk = 3\n",
            p(&dir.join("from_file")),
            p(&dir.join("smell_d5.txt")),
        ),
    )
    .unwrap();
    assert_eq!(
        scentspace(&["neighbors", "--config", &p(&config), "--k", "7"]),
        0
    );
    let out = dir.join("from_file");
    assert_eq!(csv_rows(&out.join("neighbors.csv")), 7);
    let manifest: toml::Table = std::fs::read_to_string(out.join("neighbors.manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["seed"].as_integer(), Some(3));
    assert_eq!(manifest["neighbors"]["k"].as_integer(), Some(7));
    assert_eq!(manifest["neighbors"]["query"].as_str(), Some("c1n1"));

    std::fs::write(&config, "[neighbors]\ntabel = \"typo.txt\"\n").unwrap();
    assert_eq!(
        scentspace(&["neighbors", "--config", &p(&config), "--out-dir", &p(dir)]),
        2
    );
}

#[test]
fn csv_corpus_and_zipped_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = p(dir);
    std::fs::write(
        dir.join("raw.csv"),
        "id,name,top,heart,base\n\
         1,One,Lemon|Bergamot,Rose,Musk\n\
         2,Two,lemon,Iris|Rose,Amber\n\
         3,Three,Sea-Salt,,Musk\n",
    )
    .unwrap();
    assert_eq!(
        scentspace(&[
            "ingest",
            "--input",
            &p(&dir.join("raw.csv")),
            "--min-notes",
            "3",
            "--out-dir",
            &out
        ]),
        0
    );
    let kept = std::fs::read_to_string(dir.join("corpus.jsonl")).unwrap();
    assert_eq!(kept.lines().count(), 2);
    assert!(kept.contains("\"bergamot\""));

    let mut zip = zip::ZipWriter::new(std::fs::File::create(dir.join("vectors.zip")).unwrap());
    zip.start_file("model.txt", zip::write::SimpleFileOptions::default())
        .unwrap();
    zip.write_all(b"3 2\nLemon 1 0\nrose 0.9 0.1\nmusk 0 1\n")
        .unwrap();
    zip.finish().unwrap();
    let member = format!("{}#model.txt", p(&dir.join("vectors.zip")));
    assert_eq!(
        scentspace(&[
            "neighbors",
            "--table",
            &member,
            "--query",
            "lemon",
            "--k",
            "2",
            "--out-dir",
            &out
        ]),
        0
    );
    let ranked = std::fs::read_to_string(dir.join("neighbors.csv")).unwrap();
    assert_eq!(
        ranked.lines().nth(1).unwrap().split(',').nth(1),
        Some("rose")
    );
}
