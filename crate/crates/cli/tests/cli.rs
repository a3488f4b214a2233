use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/restaurant_mini.xml");

fn miad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_miad")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// 300d vectors for a handful of fixture words; everything else is OOV.
fn embeddings(dir: &Path) -> PathBuf {
    let path = dir.join("vectors.txt");
    let mut f = std::fs::File::create(&path).unwrap();
    for (k, w) in ["the", "food", "service", "great", "slow", "beer", "selection", "rude", "delicious"].iter().enumerate() {
        let row: Vec<String> = (0..300).map(|i| format!("{:.3}", ((i * 7 + k * 13) % 17) as f32 / 40.0 - 0.2)).collect();
        writeln!(f, "{w} {}", row.join(" ")).unwrap();
    }
    path
}

const FAST: &[&str] = &["--hidden", "4", "--epochs", "2", "--batch", "8"];

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stats_prints_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = miad(&["stats", "--train-xml", FIXTURE, "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("Positive") && text.contains("Rest."));
    assert!(text.contains("differ from published counts"));
    let csv = std::fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("class,split,sa,ma"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn train_eval_predict_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let emb = embeddings(dir.path());
    let out = dir.path().join("run");
    let mut args = vec!["train", "--train-xml", FIXTURE, "--test-xml", FIXTURE, "--embeddings", s(&emb), "--out", s(&out)];
    args.extend_from_slice(FAST);
    let o = miad(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["model.ckpt", "train.log", "config.txt", "report.txt", "report.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let cfg = std::fs::read_to_string(out.join("config.txt")).unwrap();
    for line in ["variant=miad", "gamma=2", "lambda=0.4", "lr=0.01", "hidden=4"] {
        assert!(cfg.lines().any(|l| l == line), "config lacks {line}:\n{cfg}");
    }
    assert_eq!(std::fs::read_to_string(out.join("train.log")).unwrap().lines().count(), 2);

    let ckpt = out.join("model.ckpt");
    let eval_dir = dir.path().join("eval");
    let o = miad(&["eval", "--checkpoint", s(&ckpt), "--test-xml", FIXTURE, "--out", s(&eval_dir)]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(eval_dir.join("report.csv")).unwrap(),
        std::fs::read_to_string(out.join("report.csv")).unwrap()
    );

    let sentence = "Great beer selection too, something like 50 beers.";
    let o = miad(&["predict", "--checkpoint", s(&ckpt), "--sentence", sentence, "--aspect", "6:20", "--aspect", "44:49"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<_> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("6:20\tbeer selection\t"));
    assert!(lines[1].starts_with("44:49\tbeers\t"));
    for l in &lines {
        let label = l.split('\t').nth(2).unwrap();
        assert!(["positive", "negative", "neutral"].contains(&label));
    }
}

#[test]
fn laptop_domain_defaults_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let emb = embeddings(dir.path());
    let mut args = vec!["train", "--train-xml", FIXTURE, "--embeddings", s(&emb), "--domain", "laptop", "--out", s(dir.path())];
    args.extend_from_slice(FAST);
    assert!(miad(&args).status.success());
    let cfg = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(cfg.contains("lambda=0.2\n"));
    assert!(cfg.contains("gamma=2\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let emb = embeddings(dir.path());
    let conf = dir.path().join("exp.conf");
    std::fs::write(&conf, "# experiment\nlr=0.05\nepochs=1\nhidden=4\nvariant=gru\n").unwrap();
    let o = miad(&["train", "--train-xml", FIXTURE, "--embeddings", s(&emb), "--config", s(&conf), "--lr", "0.02", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(cfg.contains("lr=0.02\n"));
    assert!(cfg.contains("epochs=1\n"));
    assert!(cfg.contains("variant=gru\n"));
    assert!(cfg.contains("gamma=0\n"));
}

#[test]
fn ablation_matches_separate_runs() {
    let dir = tempfile::tempdir().unwrap();
    let emb = embeddings(dir.path());
    let abl = dir.path().join("abl");
    let mut args = vec!["ablation", "--train-xml", FIXTURE, "--test-xml", FIXTURE, "--embeddings", s(&emb), "--seeds", "3", "--out", s(&abl)];
    args.extend_from_slice(FAST);
    let o = miad(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    for label in ["GRU ", "GRU+TM", "GRU+NoTM", "GRU+FL", "MIAD"] {
        assert!(table.contains(label), "missing {label}");
    }

    let single = dir.path().join("single");
    let mut args = vec![
        "train", "--train-xml", FIXTURE, "--test-xml", FIXTURE, "--embeddings", s(&emb), "--variant", "gru-notm", "--seed", "3", "--out", s(&single),
    ];
    args.extend_from_slice(FAST);
    assert!(miad(&args).status.success());
    let counts = |line: &str| line.split(',').skip(8).map(str::to_string).collect::<Vec<_>>();
    let runs = std::fs::read_to_string(abl.join("ablation_runs.csv")).unwrap();
    let from_grid = runs.lines().find(|l| l.contains(",GRU+NoTM#3,")).unwrap();
    let report = std::fs::read_to_string(single.join("report.csv")).unwrap();
    assert_eq!(counts(from_grid), counts(report.lines().nth(1).unwrap()));
    assert_eq!(
        std::fs::read_to_string(abl.join("gru-notm_seed3.log")).unwrap(),
        std::fs::read_to_string(single.join("train.log")).unwrap()
    );
}

#[test]
fn missing_input_is_a_data_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = miad(&["train", "--train-xml", "/nonexistent.xml", "--embeddings", "/nonexistent.txt", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(miad(&["bogus"]).status.code(), Some(1));
    assert_eq!(miad(&["train", "--lr"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let emb = embeddings(dir.path());
    let o = miad(&["train", "--train-xml", FIXTURE, "--embeddings", s(&emb), "--variant", "lstm", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown variant"));
    assert!(!dir.path().join("model.ckpt").exists());
}

#[test]
fn bad_aspect_span_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let emb = embeddings(dir.path());
    let mut args = vec!["train", "--train-xml", FIXTURE, "--embeddings", s(&emb), "--out", s(dir.path())];
    args.extend_from_slice(FAST);
    assert!(miad(&args).status.success());
    let ckpt = dir.path().join("model.ckpt");
    for span in ["5", "9:3", "0:400", "4:5"] {
        let o = miad(&["predict", "--checkpoint", s(&ckpt), "--sentence", "Good food !", "--aspect", span]);
        assert_eq!(o.status.code(), Some(1), "span {span}");
    }
}

#[test]
fn help_labels_unpublished_defaults() {
    let o = miad(&["train", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("[default: 0.01]"));
    assert!(text.contains("[default: 32; no published value]"));
}
