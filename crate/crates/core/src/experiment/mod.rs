//! Sweep runners behind the figure subcommands.
//!
//! An [`ExperimentSpec`] expands into one or more series (one per state family
//! and input encoding), each a list of sweep points. Every point owns a
//! dataset; repetitions train on the same dataset from different
//! initializations. Finished repetitions are appended to
//! `<out>/<kind>.progress.jsonl`, so an interrupted run picks up where it
//! stopped and writes the same bytes it would have written uninterrupted.
//!
//! Files written into the output directory:
//!
//! * `<kind>.manifest.json`: the spec, its fingerprint and the expanded plan.
//! * `<series>.csv` and `<series>.svg`: one row per sweep point (per epoch for
//!   the noiseless experiment).
//! * `<series>_samples.csv` with `dump_samples`: every test-sample fidelity.

mod plot;

pub use plot::{emit_plot, render_svg, PlotStyle};

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnn::{evaluate, GridEncoding, TrainConfig, Trainer};
use crate::dataset::{
    generate, generate_noiseless_random, Dataset, DatasetConfig, DatasetSpec, Sample,
};
use crate::error::{Error, Result};
use crate::fidelity::fidelity;
use crate::rng::{derive_seed, tag};
use crate::state::StateKind;
use crate::stokes::{physicalize_with_report, stokes_reconstruct};
use crate::tomography::GRID_CELLS;

pub const CSV_HEADER: &str = "swept,cnn_mean,cnn_std,stokes_mean,stokes_std,seconds";
pub const SAMPLES_HEADER: &str =
    "swept,repetition,sample,state_index,cnn_fidelity,stokes_fidelity,stokes_min_eigenvalue";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Noiseless,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Fig2a,
        ExperimentKind::Fig2b,
        ExperimentKind::Fig3a,
        ExperimentKind::Fig3b,
        ExperimentKind::Noiseless,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2a => "fig2a",
            ExperimentKind::Fig2b => "fig2b",
            ExperimentKind::Fig3a => "fig3a",
            ExperimentKind::Fig3b => "fig3b",
            ExperimentKind::Noiseless => "noiseless",
        }
    }

    /// What the `swept` column holds.
    pub fn swept_label(self) -> &'static str {
        match self {
            ExperimentKind::Fig2a => "density matrices in training set",
            ExperimentKind::Fig2b => "noisy measurements per density matrix",
            ExperimentKind::Fig3a => "noise strength sigma (rad)",
            ExperimentKind::Fig3b => "projectors kept",
            ExperimentKind::Noiseless => "epoch",
        }
    }
}

/// Size presets. `Desk` is the default of the command-line tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Smoke,
    Desk,
    Paper,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Smoke => "smoke",
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub profile: Profile,
    pub seed: u64,
    /// Sweep values; their meaning depends on `kind`. Ignored by the
    /// noiseless experiment, whose rows are epochs.
    pub swept: Vec<f64>,
    pub repetitions: usize,
    pub epochs: usize,
    pub state_kinds: Vec<StateKind>,
    pub n_states: usize,
    pub noisy_per_state: usize,
    pub train_per_state: usize,
    pub sigma: f64,
    pub keep: usize,
    /// Also train on the compact input (kept values only) in keep sweeps.
    pub compact_variant: bool,
    pub noiseless_samples: usize,
}

fn pi_over(ks: &[f64]) -> Vec<f64> {
    ks.iter().map(|k| PI / k).collect()
}

impl ExperimentSpec {
    pub fn preset(kind: ExperimentKind, profile: Profile) -> Self {
        use ExperimentKind::*;
        use Profile::*;
        let mut s = ExperimentSpec {
            kind,
            profile,
            seed: 0,
            swept: Vec::new(),
            repetitions: match profile {
                Smoke => 2,
                Desk => 3,
                Paper => 10,
            },
            epochs: match (profile, kind) {
                (Smoke, _) => 2,
                (Desk, _) => 200,
                (Paper, Fig2a | Fig2b) => 800,
                (Paper, _) => 500,
            },
            state_kinds: match kind {
                Fig2a | Fig2b => vec![StateKind::Mixed, StateKind::Pure],
                Fig3b | Noiseless => vec![StateKind::Pure],
                Fig3a => vec![StateKind::Mixed],
            },
            n_states: match profile {
                Smoke => 2,
                Desk => 20,
                Paper => 100,
            },
            noisy_per_state: if profile == Smoke { 12 } else { 200 },
            train_per_state: if profile == Smoke { 10 } else { 195 },
            sigma: PI / 6.0,
            keep: GRID_CELLS,
            compact_variant: kind == Fig3b,
            noiseless_samples: match profile {
                Smoke => 100,
                Desk => 5_000,
                Paper => 60_000,
            },
        };
        s.swept = match (kind, profile) {
            (Fig2a, Smoke) => vec![2.0, 4.0],
            (Fig2a, Desk) => vec![5.0, 10.0, 20.0],
            (Fig2a, Paper) => (1..=10).map(|i| 20.0 * i as f64).collect(),
            (Fig2b, Smoke) => vec![4.0, 10.0],
            (Fig2b, Desk) => vec![40.0, 120.0, 195.0],
            (Fig2b, Paper) => vec![40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 195.0],
            (Fig3a, Smoke) => pi_over(&[1.0, 21.0]),
            (Fig3a, Desk) => pi_over(&[1.0, 6.0, 21.0]),
            (Fig3a, Paper) => pi_over(&[
                1.0, 2.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0, 800.0, 1200.0, 1600.0,
            ]),
            (Fig3b, Smoke) => vec![4.0, 36.0],
            (Fig3b, Desk) => vec![4.0, 16.0, 28.0, 36.0],
            (Fig3b, Paper) => (1..=9).map(|i| 4.0 * i as f64).collect(),
            (Noiseless, _) => Vec::new(),
        };
        if kind == Fig3b && profile == Desk {
            s.n_states = 30;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.state_kinds.is_empty() {
            return bad("no state kind selected".into());
        }
        if self.kind != ExperimentKind::Noiseless && self.swept.is_empty() {
            return bad("the sweep has no values".into());
        }
        self.series().map(|_| ())
    }

    /// SHA-256 of the spec's JSON form; progress records from a different
    /// spec are ignored.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    /// Expand into series and points, validating every dataset config.
    pub fn series(&self) -> Result<Vec<Series>> {
        let mut out = Vec::new();
        for &state_kind in &self.state_kinds {
            let base = format!("{}_{}", self.kind.name(), state_kind.as_str());
            if self.kind == ExperimentKind::Noiseless {
                if self.noiseless_samples < 2 {
                    return Err(Error::InvalidInput(format!(
                        "a noiseless corpus needs at least 2 samples, got {}",
                        self.noiseless_samples
                    )));
                }
                let cfg = crate::dataset::NoiselessConfig {
                    n_samples: self.noiseless_samples,
                    state_kind,
                    master_seed: self.seed,
                };
                out.push(Series {
                    name: base,
                    state_kind,
                    encoding: GridEncoding::ZeroPadded,
                    points: vec![Point {
                        swept: self.noiseless_samples as f64,
                        dataset: DatasetSpec::Noiseless(cfg),
                        encoding: GridEncoding::ZeroPadded,
                    }],
                });
                continue;
            }
            let mut padded = Vec::new();
            let mut compact = Vec::new();
            for &v in &self.swept {
                let cfg = self.point_config(state_kind, v)?;
                cfg.validate()?;
                if self.compact_variant && self.kind == ExperimentKind::Fig3b {
                    compact.push(Point {
                        swept: v,
                        dataset: DatasetSpec::Noisy(cfg.clone()),
                        encoding: GridEncoding::compact(cfg.keep_projectors)?,
                    });
                }
                padded.push(Point {
                    swept: v,
                    dataset: DatasetSpec::Noisy(cfg),
                    encoding: GridEncoding::ZeroPadded,
                });
            }
            out.push(Series {
                name: base.clone(),
                state_kind,
                encoding: GridEncoding::ZeroPadded,
                points: padded,
            });
            if !compact.is_empty() {
                out.push(Series {
                    name: format!("{base}_compact"),
                    state_kind,
                    encoding: compact[0].encoding,
                    points: compact,
                });
            }
        }
        Ok(out)
    }

    fn point_config(&self, state_kind: StateKind, v: f64) -> Result<DatasetConfig> {
        let mut cfg = DatasetConfig {
            n_states: self.n_states,
            state_kind,
            noisy_per_state: self.noisy_per_state,
            train_per_state: self.train_per_state,
            sigma: self.sigma,
            keep_projectors: self.keep,
            master_seed: self.seed,
        };
        match self.kind {
            ExperimentKind::Fig2a => cfg.n_states = whole(v)?,
            ExperimentKind::Fig2b => cfg.train_per_state = whole(v)?,
            ExperimentKind::Fig3a => cfg.sigma = v,
            ExperimentKind::Fig3b => cfg.keep_projectors = whole(v)?,
            ExperimentKind::Noiseless => unreachable!("noiseless has no sweep"),
        }
        Ok(cfg)
    }
}

fn whole(v: f64) -> Result<usize> {
    if v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidInput(format!(
            "sweep value {v} must be a positive integer"
        )))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub swept: f64,
    pub dataset: DatasetSpec,
    pub encoding: GridEncoding,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub state_kind: StateKind,
    pub encoding: GridEncoding,
    pub points: Vec<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub swept: f64,
    pub cnn_mean: f64,
    pub cnn_std: f64,
    pub stokes_mean: f64,
    pub stokes_std: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct SeriesOutcome {
    pub name: String,
    pub rows: Vec<ResultRow>,
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub samples: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub workers: usize,
    pub dump_samples: bool,
    /// Record wall-clock seconds in the CSV. Off by default so reruns are
    /// byte-identical.
    pub timing: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            workers: 1,
            dump_samples: false,
            timing: false,
        }
    }
}

/// Stokes reconstruction of one test grid, physicalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesScore {
    pub fidelity: f64,
    /// Smallest eigenvalue of the raw reconstruction.
    pub min_eigenvalue: f64,
}

pub fn stokes_score(sample: &Sample) -> Result<StokesScore> {
    let p = physicalize_with_report(&stokes_reconstruct(&sample.grid))?;
    Ok(StokesScore {
        fidelity: fidelity(&p.state, &sample.reference)?,
        min_eigenvalue: p.min_eigenvalue,
    })
}

pub fn stokes_scores(samples: &[Sample]) -> Result<Vec<StokesScore>> {
    samples.par_iter().map(stokes_score).collect()
}

pub fn materialize(spec: &DatasetSpec) -> Result<Dataset> {
    match spec {
        DatasetSpec::Noisy(cfg) => generate(cfg),
        DatasetSpec::Noiseless(cfg) => {
            generate_noiseless_random(cfg.n_samples, cfg.master_seed, cfg.state_kind)
        }
    }
}

/// Initialization seed of repetition `r`; shared by all points of a sweep.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, tag("repetition"), r as u64, 0)
}

/// One finished repetition, as stored in the progress log. Fidelities are
/// kept as IEEE bit patterns so a resumed run reproduces them exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct JobRecord {
    fingerprint: String,
    series: String,
    point: usize,
    repetition: usize,
    seconds: f64,
    degenerate: usize,
    fidelities: Vec<u64>,
    epoch_fidelities: Vec<u64>,
    epoch_seconds: Vec<f64>,
}

impl JobRecord {
    fn fidelities(&self) -> Vec<f64> {
        self.fidelities.iter().map(|&b| f64::from_bits(b)).collect()
    }

    fn epoch_fidelity(&self, e: usize) -> f64 {
        f64::from_bits(self.epoch_fidelities[e])
    }
}

type JobKey = (String, usize, usize);

fn run_job(
    ds: &Dataset,
    encoding: GridEncoding,
    epochs: usize,
    seed: u64,
    per_epoch: bool,
) -> Result<(Vec<f64>, usize, Vec<f64>, Vec<f64>, f64)> {
    let start = Instant::now();
    let cfg = TrainConfig {
        epochs,
        seed,
        encoding,
        evaluate_each_epoch: per_epoch,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&ds.train, &ds.test, cfg)?;
    let mut epoch_fid = Vec::new();
    let mut epoch_secs = Vec::new();
    for _ in 0..epochs {
        let t = Instant::now();
        let rec = trainer.run_epoch()?;
        if per_epoch {
            epoch_fid.push(rec.test_fidelity.unwrap_or(f64::NAN));
            epoch_secs.push(t.elapsed().as_secs_f64());
        }
    }
    let eval = evaluate(trainer.params(), &ds.test)?;
    Ok((
        eval.fidelities,
        eval.degenerate,
        epoch_fid,
        epoch_secs,
        start.elapsed().as_secs_f64(),
    ))
}

fn load_progress(path: &Path, fingerprint: &str) -> Result<HashMap<JobKey, JobRecord>> {
    let mut done = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    for line in BufReader::new(file).lines() {
        // A torn final line from an interrupted run is skipped.
        let Ok(rec) = serde_json::from_str::<JobRecord>(&line?) else {
            continue;
        };
        if rec.fingerprint == fingerprint {
            done.insert((rec.series.clone(), rec.point, rec.repetition), rec);
        }
    }
    Ok(done)
}

fn write_progress(path: &Path, done: &HashMap<JobKey, JobRecord>) -> Result<File> {
    let mut keys: Vec<&JobKey> = done.keys().collect();
    keys.sort();
    let mut f = File::create(path)?;
    for k in keys {
        writeln!(f, "{}", serde_json::to_string(&done[k])?)?;
    }
    f.flush()?;
    drop(f);
    Ok(OpenOptions::new().append(true).open(path)?)
}

#[derive(Serialize)]
struct ExperimentManifest<'a> {
    spec: &'a ExperimentSpec,
    fingerprint: &'a str,
    series: Vec<SeriesManifest<'a>>,
}

#[derive(Serialize)]
struct SeriesManifest<'a> {
    name: &'a str,
    encoding: GridEncoding,
    input_shape: [usize; 2],
    points: &'a [Point],
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single value.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Vec<SeriesOutcome>> {
    spec.validate()?;
    let plan = spec.series()?;
    let fingerprint = spec.fingerprint();
    fs::create_dir_all(&opts.out_dir)?;
    let stem = spec.kind.name();

    let manifest = ExperimentManifest {
        spec,
        fingerprint: &fingerprint,
        series: plan
            .iter()
            .map(|s| {
                let (r, c) = s.encoding.input_shape();
                SeriesManifest {
                    name: &s.name,
                    encoding: s.encoding,
                    input_shape: [r, c],
                    points: &s.points,
                }
            })
            .collect(),
    };
    fs::write(
        opts.out_dir.join(format!("{stem}.manifest.json")),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;

    let progress_path = opts.out_dir.join(format!("{stem}.progress.jsonl"));
    let mut done = load_progress(&progress_path, &fingerprint)?;
    let log = Mutex::new(write_progress(&progress_path, &done)?);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;

    // Points that share a dataset (padded and compact variants) are trained
    // together so the dataset is generated once.
    let mut groups: Vec<(&DatasetSpec, Vec<(usize, usize)>)> = Vec::new();
    for (si, s) in plan.iter().enumerate() {
        for (pi, p) in s.points.iter().enumerate() {
            match groups.iter_mut().find(|(d, _)| **d == p.dataset) {
                Some((_, members)) => members.push((si, pi)),
                None => groups.push((&p.dataset, vec![(si, pi)])),
            }
        }
    }

    let per_epoch = spec.kind == ExperimentKind::Noiseless;
    let mut stokes: HashMap<(usize, usize), (Vec<StokesScore>, Vec<u64>)> = HashMap::new();
    for (dspec, members) in &groups {
        let ds = pool.install(|| materialize(dspec))?;
        let scores = pool.install(|| stokes_scores(&ds.test))?;
        let indices: Vec<u64> = ds.test.iter().map(|s| s.state_index).collect();
        let jobs: Vec<(usize, usize, usize)> = members
            .iter()
            .flat_map(|&(si, pi)| (0..spec.repetitions).map(move |r| (si, pi, r)))
            .filter(|&(si, pi, r)| !done.contains_key(&(plan[si].name.clone(), pi, r)))
            .collect();
        let finished: Vec<Result<JobRecord>> = pool.install(|| {
            jobs.par_iter()
                .map(|&(si, pi, r)| {
                    let point = &plan[si].points[pi];
                    let (fid, degenerate, efid, esec, seconds) = run_job(
                        &ds,
                        point.encoding,
                        spec.epochs,
                        repetition_seed(spec.seed, r),
                        per_epoch,
                    )?;
                    let rec = JobRecord {
                        fingerprint: fingerprint.clone(),
                        series: plan[si].name.clone(),
                        point: pi,
                        repetition: r,
                        seconds,
                        degenerate,
                        fidelities: fid.iter().map(|f| f.to_bits()).collect(),
                        epoch_fidelities: efid.iter().map(|f| f.to_bits()).collect(),
                        epoch_seconds: esec,
                    };
                    let line = serde_json::to_string(&rec)?;
                    let mut f = log.lock().expect("progress log lock");
                    writeln!(f, "{line}")?;
                    f.flush()?;
                    Ok(rec)
                })
                .collect()
        });
        for rec in finished {
            let rec = rec?;
            done.insert((rec.series.clone(), rec.point, rec.repetition), rec);
        }
        for &m in members {
            stokes.insert(m, (scores.clone(), indices.clone()));
        }
    }

    let mut outcomes = Vec::new();
    for (si, s) in plan.iter().enumerate() {
        let mut rows = Vec::new();
        let mut dump = String::new();
        if opts.dump_samples {
            dump.push_str(SAMPLES_HEADER);
            dump.push('\n');
        }
        for (pi, p) in s.points.iter().enumerate() {
            let (scores, indices) = &stokes[&(si, pi)];
            let recs: Vec<&JobRecord> = (0..spec.repetitions)
                .map(|r| &done[&(s.name.clone(), pi, r)])
                .collect();
            let stokes_f: Vec<f64> = scores.iter().map(|x| x.fidelity).collect();
            let stokes_mean = mean(&stokes_f);
            if per_epoch {
                for e in 0..spec.epochs {
                    let per_rep: Vec<f64> = recs.iter().map(|r| r.epoch_fidelity(e)).collect();
                    let secs: f64 = recs.iter().map(|r| r.epoch_seconds[e]).sum();
                    rows.push(ResultRow {
                        swept: (e + 1) as f64,
                        cnn_mean: mean(&per_rep),
                        cnn_std: std_dev(&per_rep),
                        stokes_mean,
                        stokes_std: 0.0,
                        seconds: if opts.timing { secs } else { 0.0 },
                    });
                }
            } else {
                let per_rep: Vec<f64> = recs.iter().map(|r| mean(&r.fidelities())).collect();
                rows.push(ResultRow {
                    swept: p.swept,
                    cnn_mean: mean(&per_rep),
                    cnn_std: std_dev(&per_rep),
                    stokes_mean,
                    stokes_std: 0.0,
                    seconds: if opts.timing {
                        recs.iter().map(|r| r.seconds).sum()
                    } else {
                        0.0
                    },
                });
            }
            if opts.dump_samples {
                for r in &recs {
                    for (i, f) in r.fidelities().iter().enumerate() {
                        let _ = writeln!(
                            dump,
                            "{},{},{},{},{},{},{}",
                            p.swept,
                            r.repetition,
                            i,
                            indices[i],
                            f,
                            scores[i].fidelity,
                            scores[i].min_eigenvalue
                        );
                    }
                }
            }
        }
        for row in &rows {
            if !(row.cnn_mean.is_finite() && row.stokes_mean.is_finite()) {
                return Err(Error::NumericalFailure(format!(
                    "non-finite mean fidelity in {} at {}",
                    s.name, row.swept
                )));
            }
        }

        let csv = opts.out_dir.join(format!("{}.csv", s.name));
        fs::write(&csv, render_csv(&rows))?;
        let svg = opts.out_dir.join(format!("{}.svg", s.name));
        let style = PlotStyle {
            title: format!(
                "{} ({}, {})",
                s.name,
                s.state_kind.as_str(),
                spec.profile.name()
            ),
            x_label: spec.kind.swept_label().to_string(),
            log_x: spec.kind == ExperimentKind::Fig3a,
        };
        emit_plot(&rows, &svg, &style)?;
        let samples = if opts.dump_samples {
            let path = opts.out_dir.join(format!("{}_samples.csv", s.name));
            fs::write(&path, dump)?;
            Some(path)
        } else {
            None
        };
        outcomes.push(SeriesOutcome {
            name: s.name.clone(),
            rows,
            csv,
            svg,
            samples,
        });
    }
    Ok(outcomes)
}

/// CSV with [`CSV_HEADER`]; floats use the shortest representation that
/// parses back to the same value.
pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.swept, r.cnn_mean, r.cnn_std, r.stokes_mean, r.stokes_std, r.seconds
        );
    }
    s
}

/// Parse a file written by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::InvalidInput("unexpected CSV header".into()));
    }
    lines
        .map(|line| {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad CSV value in {line:?}: {e}")))?;
            if v.len() != 6 {
                return Err(Error::InvalidInput(format!(
                    "expected 6 columns in {line:?}"
                )));
            }
            Ok(ResultRow {
                swept: v[0],
                cnn_mean: v[1],
                cnn_std: v[2],
                stokes_mean: v[3],
                stokes_std: v[4],
                seconds: v[5],
            })
        })
        .collect()
}
