//! `qst`: dataset generation, training, evaluation and the figure sweeps.

mod selftest;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qst_core::cnn::{checkpoint, evaluate, GridEncoding, TrainConfig, TrainHistory, Trainer};
use qst_core::dataset::{self, DatasetConfig};
use qst_core::experiment::{self, ExperimentKind, ExperimentSpec, Profile, RunOptions};
use qst_core::{Error, StateKind};

const WORKERS_ENV: &str = "QST_WORKERS";

#[derive(Parser)]
#[command(
    name = "qst",
    version,
    about = "Two-qubit state tomography with a CNN and a Stokes baseline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset and write it to --out.
    Generate(GenerateArgs),
    /// Train a network on a saved dataset; resumes from --out if possible.
    Train(TrainArgs),
    /// Score a checkpoint and the Stokes baseline on a dataset's test split.
    Eval(EvalArgs),
    /// Fidelity versus number of training states.
    Fig2a(SweepArgs),
    /// Fidelity versus noisy measurements per state.
    Fig2b(SweepArgs),
    /// Fidelity versus noise strength.
    Fig3a(SweepArgs),
    /// Fidelity versus number of kept projectors.
    Fig3b(SweepArgs),
    /// Per-epoch fidelity on noiseless random states.
    Noiseless(SweepArgs),
    /// Fast numerical self-checks.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Pure,
    Mixed,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<StateKind> {
        match self {
            KindArg::Pure => vec![StateKind::Pure],
            KindArg::Mixed => vec![StateKind::Mixed],
            KindArg::Both => vec![StateKind::Mixed, StateKind::Pure],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Smoke,
    Desk,
    Paper,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    states: usize,
    #[arg(long, value_enum, default_value = "mixed")]
    kind: KindArg,
    /// Noise strength in radians; accepts `pi/6` style values.
    #[arg(long, value_parser = parse_value, default_value = "pi/6")]
    sigma: f64,
    #[arg(long, default_value_t = 36)]
    keep: usize,
    #[arg(long, default_value_t = 200)]
    noisy: usize,
    #[arg(long, default_value_t = 195)]
    train: usize,
    /// Generate N noiseless random samples instead of a noisy corpus.
    #[arg(long, value_name = "N")]
    noiseless: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feed only the kept projectors instead of the zero-padded 6x6 grid.
    #[arg(long)]
    compact: bool,
    #[arg(long, default_value_t = 0.008)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Directory for eval_samples.csv with --dump-samples.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    dump_samples: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Same as --profile paper.
    #[arg(long)]
    paper_scale: bool,
    /// Number of states; fig2a sweeps over it, so this runs a single point.
    #[arg(long)]
    states: Option<usize>,
    /// Noise strength; fig3a sweeps over it, so this runs a single point.
    #[arg(long, value_parser = parse_value)]
    sigma: Option<f64>,
    /// Kept projectors; fig3b sweeps over it, so this runs a single point.
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated sweep values (`pi/21` style allowed).
    #[arg(long, value_delimiter = ',', value_parser = parse_value)]
    sweep: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Noiseless corpus size.
    #[arg(long)]
    samples: Option<usize>,
    /// Skip the compact-input series of fig3b.
    #[arg(long)]
    no_compact: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    dump_samples: bool,
    /// Record wall-clock seconds in the CSV.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A number, `pi`, `pi/k` or `x*pi`.
fn parse_value(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let v = if let Some(rest) = t.strip_prefix("pi") {
        match rest.strip_prefix('/') {
            Some(d) => PI / d.parse::<f64>().map_err(|e| format!("{s}: {e}"))?,
            None if rest.is_empty() => PI,
            None => return Err(format!("cannot parse {s:?}")),
        }
    } else if let Some(k) = t.strip_suffix("*pi") {
        k.parse::<f64>().map_err(|e| format!("{s}: {e}"))? * PI
    } else {
        t.parse::<f64>().map_err(|e| format!("{s}: {e}"))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not finite"))
    }
}

fn workers() -> Result<usize, Error> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidInput(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Fig2a(a) => cmd_sweep(ExperimentKind::Fig2a, a),
        Command::Fig2b(a) => cmd_sweep(ExperimentKind::Fig2b, a),
        Command::Fig3a(a) => cmd_sweep(ExperimentKind::Fig3a, a),
        Command::Fig3b(a) => cmd_sweep(ExperimentKind::Fig3b, a),
        Command::Noiseless(a) => cmd_sweep(ExperimentKind::Noiseless, a),
        Command::Selftest(a) => selftest::run(a.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        return 3;
    }
    match e {
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Error> {
    let [kind] = a.kind.kinds()[..] else {
        return Err(Error::InvalidInput(
            "--kind both is not valid for generate".into(),
        ));
    };
    let ds = match a.noiseless {
        Some(n) => dataset::generate_noiseless_random(n, a.seed, kind)?,
        None => dataset::generate(&DatasetConfig {
            n_states: a.states,
            state_kind: kind,
            noisy_per_state: a.noisy,
            train_per_state: a.train,
            sigma: a.sigma,
            keep_projectors: a.keep,
            master_seed: a.seed,
        })?,
    };
    dataset::save(&ds, &a.out)?;
    println!(
        "wrote {} train and {} test samples to {}",
        ds.train.len(),
        ds.test.len(),
        a.out.display()
    );
    Ok(())
}

const MODEL_FILE: &str = "model.ckpt";
const RUN_FILE: &str = "train.json";

/// Training state beside the checkpoint.
#[derive(Serialize, Deserialize)]
struct RunState {
    config: TrainConfig,
    dataset_sha256: String,
    history: TrainHistory,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), Error> {
    let ds = dataset::load(&a.data)?;
    let manifest: dataset::Manifest =
        serde_json::from_slice(&fs::read(a.data.join(dataset::MANIFEST_FILE))?)?;
    let encoding = if a.compact {
        let keep = ds
            .train
            .first()
            .map(|s| s.grid.measured_count())
            .ok_or(Error::EmptyDataset)?;
        GridEncoding::compact(keep)?
    } else {
        GridEncoding::ZeroPadded
    };
    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        dropout_rate: a.dropout,
        seed: a.seed,
        encoding,
        evaluate_each_epoch: true,
    };
    cfg.validate()?;
    fs::create_dir_all(&a.out)?;
    let model_path = a.out.join(MODEL_FILE);
    let run_path = a.out.join(RUN_FILE);

    let previous = fs::read(&run_path)
        .ok()
        .and_then(|b| serde_json::from_slice::<RunState>(&b).ok())
        .filter(|s| {
            s.dataset_sha256 == manifest.payload_sha256
                && TrainConfig {
                    epochs: cfg.epochs,
                    ..s.config.clone()
                } == cfg
        });
    let mut trainer = match previous {
        Some(state) if model_path.exists() => {
            let params = checkpoint::load(&model_path)?;
            eprintln!("resuming after epoch {}", state.history.records.len());
            Trainer::resume(params, state.history, &ds.train, &ds.test, cfg.clone())?
        }
        _ => Trainer::new(&ds.train, &ds.test, cfg.clone())?,
    };
    while trainer.epochs_done() < cfg.epochs {
        let rec = trainer.run_epoch()?.clone();
        println!(
            "epoch {:>4}  loss {:.6e}  test fidelity {:.6}",
            rec.epoch,
            rec.train_loss,
            rec.test_fidelity.unwrap_or(f64::NAN)
        );
        write_atomic(&model_path, &checkpoint::to_bytes(trainer.params()))?;
        let state = RunState {
            config: cfg.clone(),
            dataset_sha256: manifest.payload_sha256.clone(),
            history: trainer.history().clone(),
        };
        write_atomic(
            &run_path,
            (serde_json::to_string_pretty(&state)? + "\n").as_bytes(),
        )?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Error> {
    let ds = dataset::load(&a.data)?;
    let params = checkpoint::load(&a.model)?;
    let eval = evaluate(&params, &ds.test)?;
    let stokes = experiment::stokes_scores(&ds.test)?;
    let stokes_mean = stokes.iter().map(|s| s.fidelity).sum::<f64>() / stokes.len().max(1) as f64;
    println!(
        "{}",
        serde_json::json!({
            "samples": ds.test.len(),
            "cnn_mean": eval.mean(),
            "stokes_mean": stokes_mean,
            "degenerate": eval.degenerate,
        })
    );
    if a.dump_samples {
        fs::create_dir_all(&a.out)?;
        let mut text =
            String::from("sample,state_index,cnn_fidelity,stokes_fidelity,stokes_min_eigenvalue\n");
        for (i, (s, (f, st))) in ds
            .test
            .iter()
            .zip(eval.fidelities.iter().zip(&stokes))
            .enumerate()
        {
            text.push_str(&format!(
                "{i},{},{f},{},{}\n",
                s.state_index, st.fidelity, st.min_eigenvalue
            ));
        }
        fs::write(a.out.join("eval_samples.csv"), text)?;
    }
    Ok(())
}

fn build_spec(kind: ExperimentKind, a: &SweepArgs) -> Result<ExperimentSpec, Error> {
    let profile = match (a.paper_scale, a.profile) {
        (true, Some(ProfileArg::Smoke | ProfileArg::Desk)) => {
            return Err(Error::InvalidInput(
                "--paper-scale conflicts with --profile".into(),
            ))
        }
        (true, _) | (false, Some(ProfileArg::Paper)) => Profile::Paper,
        (false, Some(ProfileArg::Smoke)) => Profile::Smoke,
        (false, _) => Profile::Desk,
    };
    let mut s = ExperimentSpec::preset(kind, profile);
    s.seed = a.seed;
    let not_here = |flag: &str| {
        Err(Error::InvalidInput(format!(
            "{flag} does not apply to {}",
            kind.name()
        )))
    };
    if let Some(n) = a.states {
        match kind {
            ExperimentKind::Fig2a => s.swept = vec![n as f64],
            ExperimentKind::Noiseless => return not_here("--states (use --samples)"),
            _ => s.n_states = n,
        }
    }
    if let Some(sigma) = a.sigma {
        match kind {
            ExperimentKind::Fig3a => s.swept = vec![sigma],
            ExperimentKind::Noiseless => return not_here("--sigma"),
            _ => s.sigma = sigma,
        }
    }
    if let Some(k) = a.keep {
        match kind {
            ExperimentKind::Fig3b => s.swept = vec![k as f64],
            ExperimentKind::Noiseless => return not_here("--keep"),
            _ => s.keep = k,
        }
    }
    if let Some(v) = &a.sweep {
        if kind == ExperimentKind::Noiseless {
            return not_here("--sweep");
        }
        s.swept = v.clone();
    }
    if let Some(n) = a.samples {
        if kind != ExperimentKind::Noiseless {
            return not_here("--samples");
        }
        s.noiseless_samples = n;
    }
    if let Some(e) = a.epochs {
        s.epochs = e;
    }
    if let Some(r) = a.reps {
        s.repetitions = r;
    }
    if let Some(k) = a.kind {
        s.state_kinds = k.kinds();
    }
    if a.no_compact {
        s.compact_variant = false;
    }
    s.validate()?;
    Ok(s)
}

fn cmd_sweep(kind: ExperimentKind, a: SweepArgs) -> Result<(), Error> {
    let spec = build_spec(kind, &a)?;
    let opts = RunOptions {
        out_dir: a.out.clone(),
        workers: workers()?,
        dump_samples: a.dump_samples,
        timing: a.timing,
    };
    eprintln!(
        "{} ({} profile): {} repetitions x {} epochs, {} workers",
        kind.name(),
        spec.profile.name(),
        spec.repetitions,
        spec.epochs,
        opts.workers
    );
    for out in experiment::run(&spec, &opts)? {
        println!("{}", out.csv.display());
        for r in &out.rows {
            if kind != ExperimentKind::Noiseless || r.swept as usize == spec.epochs {
                println!(
                    "  {:>10}  cnn {:.4} +- {:.4}  stokes {:.4}",
                    format!("{:.4}", r.swept),
                    r.cnn_mean,
                    r.cnn_std,
                    r.stokes_mean
                );
            }
        }
    }
    Ok(())
}
