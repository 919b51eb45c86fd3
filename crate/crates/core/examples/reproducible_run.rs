//! Drive the command-line pipeline from code, then replay a step from its
//! manifest.

use scentspace::cli;

fn main() {
    let dir = std::env::temp_dir().join("scentspace_run");
    let out = dir.to_string_lossy().into_owned();
    let file = |name: &str| dir.join(name).to_string_lossy().into_owned();

    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--n-perfumes".into(), "400".into()],
        vec!["ingest".into(), "--input".into(), file("synthetic.jsonl")],
        vec![
            "train".into(),
            "--corpus".into(),
            file("corpus.jsonl"),
            "--dims".into(),
            "10,20".into(),
        ],
        vec![
            "neighbors".into(),
            "--table".into(),
            file("smell_d20.txt"),
            "--query".into(),
            "c0n0".into(),
            "--k".into(),
            "5".into(),
        ],
    ];
    for step in steps {
        let args = ["scentspace".to_string()].into_iter().chain(step).chain([
            "--seed".into(),
            "11".into(),
            "--out-dir".into(),
            out.clone(),
        ]);
        assert_eq!(cli::run(args), 0);
    }

    let first = std::fs::read(dir.join("smell_d20.txt")).unwrap();
    let replay = dir.join("replay");
    let code = cli::run([
        "scentspace".to_string(),
        "train".into(),
        "--config".into(),
        file("train.manifest.toml"),
        "--out-dir".into(),
        replay.to_string_lossy().into_owned(),
    ]);
    assert_eq!(code, 0);
    let again = std::fs::read(replay.join("smell_d20.txt")).unwrap();
    println!("replayed training is byte-identical: {}", first == again);
}
