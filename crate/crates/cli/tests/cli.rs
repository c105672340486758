use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stsim::corpus::{format_sts, write_embeddings_binary, write_embeddings_text};
use stsim::model::ModelDims;
use stsim::synthetic::{generate, SyntheticSpec};

fn stsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stsim")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn core_fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let suite = generate(&SyntheticSpec::new(40, ModelDims::new(6, 5), 31)).unwrap();
        let p = dir.path();
        std::fs::write(p.join("train.tsv"), format_sts(&suite.pairs[..30])).unwrap();
        std::fs::write(p.join("val.tsv"), format_sts(&suite.pairs[30..])).unwrap();
        let unlabeled: Vec<_> = suite.pairs[30..]
            .iter()
            .cloned()
            .map(|mut q| {
                q.gold = None;
                q
            })
            .collect();
        std::fs::write(p.join("test.tsv"), format_sts(&unlabeled)).unwrap();
        let rows = suite.embedding_rows();
        write_embeddings_text(std::fs::File::create(p.join("vec.txt")).unwrap(), &rows).unwrap();
        write_embeddings_binary(std::fs::File::create(p.join("vec.bin")).unwrap(), &rows).unwrap();
        let freq: String = suite
            .resources
            .ic
            .frequencies()
            .iter()
            .map(|(k, v)| format!("{k}\t{v}\n"))
            .collect();
        std::fs::write(p.join("freq.tsv"), freq).unwrap();
        let sims: String = suite
            .resources
            .similarities
            .entries()
            .iter()
            .map(|(a, b, x, y)| format!("{a}\t{b}\t{x}\t{y}\n"))
            .collect();
        std::fs::write(p.join("sims.tsv"), sims).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    /// Runs `train` on the workspace files; `extra` flags replace the
    /// defaults of the same name.
    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let mut flags: Vec<(String, Option<String>)> = [
            ("--train", self.path("train.tsv")),
            ("--val", self.path("val.tsv")),
            ("--emb", self.path("vec.txt")),
            ("--freq", self.path("freq.tsv")),
            ("--sims", self.path("sims.tsv")),
            ("--dim", "6".into()),
            ("--hidden", "5".into()),
            ("--batch", "8".into()),
            ("--epochs", "3".into()),
            ("--lr", "0.005".into()),
            ("--seed", "2".into()),
            ("--out", self.path(out)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), Some(v)))
        .collect();
        let mut rest = extra.iter().peekable();
        while let Some(flag) = rest.next() {
            let value = rest.next_if(|v| !v.starts_with("--")).map(|v| v.to_string());
            match flags.iter_mut().find(|(k, _)| k == flag) {
                Some(slot) => slot.1 = value,
                None => flags.push((flag.to_string(), value)),
            }
        }
        let mut args = vec!["train".to_string()];
        for (k, v) in flags {
            args.push(k);
            args.extend(v);
        }
        Command::new(env!("CARGO_BIN_EXE_stsim")).args(&args).output().unwrap()
    }
}

#[test]
fn train_eval_score_round_trip() {
    let ws = Workspace::new();
    let o = ws.train("m.csim", &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "epoch\tmean_loss\ttrain_pcc\tval_pcc\tseconds\tlr");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1\t"));
    assert!(Path::new(&ws.path("m.csim")).exists());
    assert!(Path::new(&ws.path("m.csim.best")).exists());

    let o = stsim(&["eval", "--model", &ws.path("m.csim"), "--data", &ws.path("val.tsv")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    let pcc: f64 = lines.next().unwrap().strip_prefix("pcc\t").unwrap().parse().unwrap();
    assert!((-1.0..=1.0).contains(&pcc));
    assert_eq!(lines.next().unwrap(), "id\tscore\tgold");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);

    let o = stsim(&["score", "--model", &ws.path("m.csim"), "--data", &ws.path("test.tsv")]);
    assert_eq!(code(&o), 0);
    let scores: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(scores.len(), 10);
    assert!(scores.iter().all(|s| (0.0..=5.0).contains(s)));
    for (row, s) in rows.iter().zip(&scores) {
        assert_eq!(row.split('\t').nth(1).unwrap(), format!("{s:.6}"));
    }
}

#[test]
fn training_is_reproducible_and_formats_agree() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.train("a.csim", &[])), 0);
    assert_eq!(code(&ws.train("b.csim", &[])), 0);
    let bin = ws.path("vec.bin");
    assert_eq!(code(&ws.train("c.csim", &["--emb", &bin, "--emb-format", "bin"])), 0);
    let a = std::fs::read(ws.path("a.csim")).unwrap();
    assert_eq!(a, std::fs::read(ws.path("b.csim")).unwrap());
    assert_eq!(a, std::fs::read(ws.path("c.csim")).unwrap());
    assert_eq!(&a[..4], b"CSIM");
}

#[test]
fn training_variants_run() {
    let ws = Workspace::new();
    for extra in [
        &["--init", "ri"][..],
        &["--untied-encoders"],
        &["--loss", "kld"],
        &["--loss", "nll"],
    ] {
        let o = ws.train("v.csim", extra);
        assert_eq!(code(&o), 0, "{extra:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn gradcheck_reports_every_group() {
    for loss in ["pcc", "mse", "kld", "nll"] {
        let o = stsim(&["gradcheck", "--loss", loss, "--seed", "5"]);
        assert_eq!(code(&o), 0, "{loss}: {}", stdout(&o));
        let out = stdout(&o);
        assert!(out.contains("embeddings"));
        assert!(out.contains("scorer.bv"));
    }
}

#[test]
fn features_prints_one_row_per_pair() {
    let ws = Workspace::new();
    let o = stsim(&[
        "features",
        "--data",
        &ws.path("val.tsv"),
        "--emb",
        &ws.path("vec.bin"),
        "--emb-format",
        "bin",
        "--freq",
        &ws.path("freq.tsv"),
        "--sims",
        &ws.path("sims.tsv"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].starts_with("id\tunigram"));
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split('\t').collect();
        assert_eq!(cols.len(), 9);
        for c in &cols[1..] {
            let v: f64 = c.parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&stsim(&[])), 1);
    assert_eq!(code(&stsim(&["frobnicate"])), 1);
    assert_eq!(code(&stsim(&["gradcheck", "--loss", "hinge"])), 1);
    assert_eq!(code(&stsim(&["eval", "--model", "m"])), 1);
    let ws = Workspace::new();
    assert_eq!(code(&ws.train("x.csim", &["--batch", "1"])), 1);
    assert_eq!(code(&stsim(&["--help"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let ws = Workspace::new();
    let bad_train = core_fixture("sts_out_of_range.tsv");
    assert_eq!(code(&ws.train("x.csim", &["--train", &bad_train])), 2);
    let ragged = core_fixture("vectors_ragged.txt");
    assert_eq!(code(&ws.train("x.csim", &["--emb", &ragged])), 2);
    let truncated = core_fixture("vectors_truncated.bin");
    assert_eq!(
        code(&ws.train("x.csim", &["--emb", &truncated, "--emb-format", "bin"])),
        2
    );
    let bad_freq = core_fixture("freq_bad.tsv");
    assert_eq!(code(&ws.train("x.csim", &["--freq", &bad_freq])), 2);
    assert_eq!(code(&ws.train("x.csim", &["--dim", "7"])), 2);
    assert_eq!(code(&ws.train("x.csim", &["--val", "/nonexistent/val.tsv"])), 2);

    assert_eq!(code(&ws.train("m.csim", &[])), 0);
    let bytes = std::fs::read(ws.path("m.csim")).unwrap();
    std::fs::write(ws.path("cut.csim"), &bytes[..bytes.len() / 2]).unwrap();
    let o = stsim(&["eval", "--model", &ws.path("cut.csim"), "--data", &ws.path("val.tsv")]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));

    let o = stsim(&["eval", "--model", &ws.path("m.csim"), "--data", &ws.path("test.tsv")]);
    assert_eq!(code(&o), 2, "unlabeled data cannot be evaluated");
    let o = stsim(&[
        "score",
        "--model",
        &ws.path("m.csim"),
        "--data",
        &core_fixture("sts_bad_fields.tsv"),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn divergent_training_exits_3() {
    let ws = Workspace::new();
    let o = ws.train("x.csim", &["--lr", "1e38", "--epochs", "5"]);
    assert_eq!(code(&o), 3, "stderr: {}", String::from_utf8_lossy(&o.stderr));
}
