use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distill_core::bench::{emit_report_table, latency_entries};
use distill_core::train::workflow::{self, bench_paths, layout};
use distill_core::train::{RunConfig, StudentMode};
use distill_core::{Error, Result};

#[derive(Parser)]
#[command(name = "distill", version, about = "BiLSTM teacher / CNN student text classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration. Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build vocab.txt and labels.tsv from the training split.
    BuildVocab {
        #[command(flatten)]
        common: Common,
    },
    /// Train the BiLSTM teacher and write teacher.ckpt.
    TrainTeacher {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Write teacher posteriors for every train and test example.
    CacheTeacher {
        #[command(flatten)]
        common: Common,
        /// Teacher checkpoint (default: <out>/teacher.ckpt).
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Train the CNN student on hard labels or the blended objective.
    TrainStudent {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, value_parser = ["baseline", "blended"])]
        mode: String,
        /// Teacher cache file; required for blended mode.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Teacher checkpoint the cache must come from (default: <out>/teacher.ckpt).
        #[arg(long)]
        teacher: Option<PathBuf>,
        /// Overrides `blend.lambda`.
        #[arg(long)]
        lambda: Option<f64>,
        /// Overrides `blend.temperature`.
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Test-split accuracy and confusion matrix of a checkpoint.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Accuracy of the teacher/student posterior mix.
    EvaluateEnsemble {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        teacher: Option<PathBuf>,
        #[arg(long)]
        student: Option<PathBuf>,
        /// Overrides `blend.gamma`.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Time teacher and student inference and write bench.txt / bench.jsonl.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        teacher: Option<PathBuf>,
        #[arg(long)]
        student: Option<PathBuf>,
        /// Add a multi-worker student row.
        #[arg(long)]
        parallel_row: bool,
    },
    /// Write a synthetic separable corpus as train.csv / test.csv.
    SynthData {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        vocab_size: usize,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, t: &TrainFlags) -> Result<()> {
    if let Some(e) = t.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = t.learning_rate {
        cfg.train.learning_rate = lr;
    }
    if let Some(b) = t.batch_size {
        cfg.train.batch_size = b;
    }
    cfg.validate()
}

fn print_run(run: &workflow::TrainRun) {
    print!("{}", run.report.render_metrics());
    if let Some(c) = &run.coverage {
        eprintln!("embedding coverage: {}/{} ({:.1}%)", c.found, c.total, 100.0 * c.fraction());
    }
    eprintln!("wrote {} (sha256 {})", run.checkpoint.display(), run.fingerprint);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildVocab { common } => {
            let cfg = load(&common)?;
            let (vocab, labels) = workflow::build_vocab(&cfg)?;
            let out = layout(&cfg);
            println!(
                "{{\"vocab_size\":{},\"classes\":{},\"vocab\":{:?},\"labels\":{:?}}}",
                vocab.len(),
                labels.len(),
                out.vocab().display().to_string(),
                out.labels().display().to_string()
            );
        }
        Command::TrainTeacher { common, train } => {
            let mut cfg = load(&common)?;
            apply(&mut cfg, &train)?;
            print_run(&workflow::run_train_teacher(&cfg)?);
        }
        Command::CacheTeacher { common, teacher } => {
            let cfg = load(&common)?;
            let (path, cache) = workflow::run_cache_teacher(&cfg, teacher.as_deref())?;
            println!(
                "{{\"cache\":{:?},\"examples\":{},\"fingerprint\":\"{}\"}}",
                path.display().to_string(),
                cache.len(),
                cache.fingerprint
            );
        }
        Command::TrainStudent {
            common,
            train,
            mode,
            cache,
            teacher,
            lambda,
            temperature,
        } => {
            let mut cfg = load(&common)?;
            if let Some(l) = lambda {
                cfg.blend.lambda = l;
            }
            if let Some(t) = temperature {
                cfg.blend.temperature = t;
            }
            apply(&mut cfg, &train)?;
            let mode: StudentMode = mode.parse()?;
            print_run(&workflow::run_train_student(&cfg, mode, cache.as_deref(), teacher.as_deref())?);
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = load(&common)?;
            print!("{}", workflow::run_evaluate(&cfg, &checkpoint)?.to_json_line());
        }
        Command::EvaluateEnsemble {
            common,
            teacher,
            student,
            gamma,
        } => {
            let cfg = load(&common)?;
            let out = layout(&cfg);
            let t = teacher.unwrap_or_else(|| out.teacher());
            let s = student.unwrap_or_else(|| out.student(StudentMode::Blended));
            let g = gamma.unwrap_or(cfg.blend.gamma);
            print!("{}", workflow::run_evaluate_ensemble(&cfg, &t, &s, g)?.to_json_line());
        }
        Command::Bench {
            common,
            teacher,
            student,
            parallel_row,
        } => {
            let mut cfg = load(&common)?;
            if teacher.is_some() {
                cfg.bench.teacher = teacher;
            }
            if student.is_some() {
                cfg.bench.student = student;
            }
            cfg.bench.parallel_row |= parallel_row;
            let (t, s) = bench_paths(&cfg);
            eprintln!("timing {} vs {}", t.display(), s.display());
            let report = workflow::run_bench(&cfg)?;
            print!("{}", emit_report_table(&latency_entries(&report)).text);
        }
        Command::SynthData { common, n, vocab_size } => {
            let cfg = load(&common)?;
            let dir: &Path = &cfg.out_dir;
            let (tr, te) = workflow::run_synth_data(dir, n, vocab_size, cfg.seed)?;
            println!(
                "{{\"train\":{:?},\"test\":{:?}}}",
                tr.display().to_string(),
                te.display().to_string()
            );
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::Usage(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
