use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stsim::bundle::ModelBundle;
use stsim::corpus::{parse_sts_tsv, EmbeddingFormat, EmbeddingOrigin, SentencePair};
use stsim::gradcheck::{gradient_check, GradCheckConfig, GRADCHECK_TOLERANCE};
use stsim::model::ModelDims;
use stsim::numkit::SeededRng;
use stsim::objective::LossKind;
use stsim::trainer::{correlation, train_observed, EpochReport, Resources, TrainConfig};
use stsim::{Error, Result};

const FEATURE_NAMES: [&str; 8] = [
    "unigram",
    "bigram",
    "trigram",
    "pathlen_soft",
    "lin_soft",
    "ic_cosine",
    "alignment",
    "length_ratio",
];

#[derive(Parser)]
#[command(
    name = "stsim",
    version,
    about = "Sentence-pair similarity scoring with an attentive BiGRU"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbFormat {
    Text,
    Bin,
}

impl From<EmbFormat> for EmbeddingFormat {
    fn from(f: EmbFormat) -> Self {
        match f {
            EmbFormat::Text => EmbeddingFormat::Text,
            EmbFormat::Bin => EmbeddingFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    /// Initialize from the word-vector file.
    Wi,
    /// Initialize uniformly at random.
    Ri,
}

#[derive(Clone, Copy, ValueEnum)]
enum Loss {
    Pcc,
    Mse,
    Kld,
    Nll,
}

impl From<Loss> for LossKind {
    fn from(l: Loss) -> Self {
        match l {
            Loss::Pcc => LossKind::Pcc,
            Loss::Mse => LossKind::Mse,
            Loss::Kld => LossKind::Kld,
            Loss::Nll => LossKind::Nll,
        }
    }
}

#[derive(clap::Args)]
struct ResourceArgs {
    /// Word vectors (word2vec text or binary layout).
    #[arg(long)]
    emb: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    emb_format: EmbFormat,
    /// Token frequency table, `token<TAB>count` per line.
    #[arg(long)]
    freq: PathBuf,
    /// Word similarity table, `w1<TAB>w2<TAB>pathlen<TAB>lin` per line.
    #[arg(long)]
    sims: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to --out (best-on-validation copy at OUT.best).
    Train {
        /// Labeled pairs, `score<TAB>sentence1<TAB>sentence2` per line.
        #[arg(long)]
        train: PathBuf,
        /// Labeled validation pairs, same layout.
        #[arg(long)]
        val: PathBuf,
        #[command(flatten)]
        resources: ResourceArgs,
        #[arg(long, value_enum, default_value = "pcc")]
        loss: Loss,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long, default_value_t = 200)]
        hidden: usize,
        #[arg(long, default_value_t = 125)]
        batch: usize,
        #[arg(long, default_value_t = 15)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 5)]
        lr_halve_every: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "wi")]
        init: Init,
        /// Use separate encoders for the first and second sentence.
        #[arg(long)]
        untied_encoders: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report Pearson correlation and per-pair scores on labeled data.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print one predicted score per line.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare analytic gradients with finite differences on a small model.
    Gradcheck {
        #[arg(long, value_enum)]
        loss: Loss,
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
    /// Print the surface feature vector of every pair.
    Features {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        resources: ResourceArgs,
    },
}

fn require_file(path: &Path) -> Result<()> {
    std::fs::metadata(path).map(|_| ()).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: format!("cannot read: {e}"),
    })
}

fn read_pairs(path: &Path) -> Result<Vec<SentencePair>> {
    require_file(path)?;
    let pairs = parse_sts_tsv(path)?;
    if pairs.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "no sentence pairs".into(),
        });
    }
    Ok(pairs)
}

fn load_resources(pairs: &[SentencePair], args: &ResourceArgs, seed: u64) -> Result<Resources<f32>> {
    require_file(&args.emb)?;
    require_file(&args.freq)?;
    if let Some(s) = &args.sims {
        require_file(s)?;
    }
    Resources::load(
        pairs,
        &args.emb,
        args.emb_format.into(),
        &args.freq,
        args.sims.as_deref(),
        &mut SeededRng::new(seed).fork(4),
    )
}

fn load_model(path: &Path) -> Result<ModelBundle<f32>> {
    require_file(path)?;
    ModelBundle::load(path).map_err(|e| match e {
        Error::Bundle(msg) => Error::Format {
            path: path.to_path_buf(),
            msg,
        },
        other => other,
    })
}

fn best_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".best");
    PathBuf::from(s)
}

fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train {
            train,
            val,
            resources,
            loss,
            dim,
            hidden,
            batch,
            epochs,
            lr,
            lr_halve_every,
            seed,
            init,
            untied_encoders,
            out: model_path,
        } => {
            let mut dims = ModelDims::new(dim, hidden);
            dims.tied = !untied_encoders;
            let config = TrainConfig {
                loss: loss.into(),
                batch_size: batch,
                epochs,
                learning_rate: lr,
                lr_halve_every,
                dims,
                seed,
                init: match init {
                    Init::Wi => EmbeddingOrigin::Pretrained,
                    Init::Ri => EmbeddingOrigin::Random,
                },
            };
            config.validate()?;
            let train_pairs = read_pairs(&train)?;
            let val_pairs = read_pairs(&val)?;
            let all: Vec<SentencePair> = train_pairs.iter().chain(&val_pairs).cloned().collect();
            let res = load_resources(&all, &resources, seed)?;
            if res.embeddings.dim() != dim {
                return Err(Error::Format {
                    path: resources.emb.clone(),
                    msg: format!("vectors have dimension {}, but --dim is {dim}", res.embeddings.dim()),
                });
            }
            writeln!(out, "{}", EpochReport::TSV_HEADER)?;
            out.flush()?;
            let mut write_err = None;
            let outcome = train_observed(&config, &train_pairs, &val_pairs, res, &mut |r| {
                if let Err(e) = writeln!(out, "{}", r.to_tsv()).and_then(|_| out.flush()) {
                    write_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = write_err {
                return Err(e.into());
            }
            ModelBundle::new(outcome.final_model, Some(config)).save(&model_path)?;
            ModelBundle::new(outcome.best_model, Some(config)).save(best_path(&model_path))?;
            eprintln!("best validation epoch: {}", outcome.best_epoch);
            Ok(())
        }
        Command::Eval { model, data } => {
            let bundle = load_model(&model)?;
            let pairs = read_pairs(&data)?;
            let prepared = bundle.model.prepare(&pairs);
            let (pcc, scores) = correlation(&bundle.model, &prepared).map_err(|e| match e {
                Error::Contract(msg) => Error::Format {
                    path: data.clone(),
                    msg,
                },
                other => other,
            })?;
            writeln!(out, "pcc\t{pcc:.6}")?;
            writeln!(out, "id\tscore\tgold")?;
            for (p, s) in prepared.iter().zip(scores) {
                writeln!(out, "{}\t{s:.6}\t{}", p.id, p.gold.unwrap_or(f64::NAN))?;
            }
            Ok(())
        }
        Command::Score { model, data } => {
            let bundle = load_model(&model)?;
            let pairs = read_pairs(&data)?;
            let prepared = bundle.model.prepare(&pairs);
            for d in bundle.model.predict_all(&prepared)? {
                writeln!(out, "{:.6}", d.y)?;
            }
            Ok(())
        }
        Command::Gradcheck { loss, seed } => {
            let config = GradCheckConfig {
                seed,
                ..GradCheckConfig::default()
            };
            let report = gradient_check(&config, loss.into())?;
            write!(out, "{}", report.to_tsv(GRADCHECK_TOLERANCE))?;
            if !report.passes(GRADCHECK_TOLERANCE) {
                return Err(Error::Numeric(format!(
                    "max relative error {:.3e} reaches tolerance {GRADCHECK_TOLERANCE:e}",
                    report.max_rel_error()
                )));
            }
            Ok(())
        }
        Command::Features { data, resources } => {
            let pairs = read_pairs(&data)?;
            let res = load_resources(&pairs, &resources, 0)?;
            writeln!(out, "id\t{}", FEATURE_NAMES.join("\t"))?;
            for p in &pairs {
                let f = res.features.extract(p);
                let cols: Vec<String> = f.0.iter().map(|v| format!("{v:.6}")).collect();
                writeln!(out, "{}\t{}", p.id, cols.join("\t"))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli.command, &mut out).and_then(|_| out.flush().map_err(Error::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
