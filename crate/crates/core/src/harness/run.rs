//! Seeded multi-run execution and the raw / aggregate CSV files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use super::aggregate::{aggregate_runs, Metric, WindowSummary};
use super::config::{ExperimentConfig, SweepPoint};
use super::plot::{render_svg, Series};
use crate::agents::make_agent;
use crate::envs::{make_env, EpisodeLog};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::numerics::SeededRng;

pub const RAW_HEADER: [&str; 6] = ["run_id", "sweep_id", "episode", "steps", "undiscounted_return", "reached_goal"];
pub const AGGREGATE_HEADER: [&str; 6] = ["sweep_id", "window_index", "mean", "ci95", "p5", "p95"];

/// Environment and agent seeds of run `run`. They depend only on the base seed,
/// the run index and the environment seed, so every sweep point sees the same
/// environment noise for a given run and adding points changes nothing else.
pub fn run_seeds(base_seed: u64, run: usize, env_seed: u64) -> (u64, u64) {
    let mut mix = SeededRng::new(base_seed.wrapping_add(run as u64) ^ env_seed.rotate_left(32));
    (mix.next_u64(), mix.next_u64())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub episodes: Vec<EpisodeLog>,
    pub failed_updates: usize,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub point: SweepPoint,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<WindowSummary>,
}

impl SweepResult {
    pub fn failed_updates(&self) -> usize {
        self.runs.iter().map(|r| r.failed_updates).sum()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub metric: Metric,
    pub window: usize,
    pub sweeps: Vec<SweepResult>,
}

pub fn execute_run(cfg: &ExperimentConfig, features: &Arc<FeatureMap>, point: &SweepPoint, run: usize) -> Result<RunRecord> {
    let (env_seed, agent_seed) = run_seeds(cfg.base_seed, run, cfg.env.seed);
    let mut env = make_env(&cfg.env.name, &cfg.env.options(), env_seed)?;
    let mut rng = SeededRng::new(agent_seed);
    let mut agent = make_agent(&point.agent, Arc::clone(features), env.spec().discount, &mut rng)?;
    let report = agent.run(env.as_mut(), cfg.episodes, &mut rng)?;
    Ok(RunRecord { run, episodes: report.episodes, failed_updates: report.failed_updates })
}

/// Runs every (sweep point, run) pair on up to `workers` threads. Results come
/// back in canonical order whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    cfg.validate()?;
    let features = Arc::new(cfg.feature_map()?);
    let points = cfg.sweep_points();
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..cfg.runs).map(move |r| (p, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<RunRecord> =
        pool.install(|| jobs.par_iter().map(|&(p, r)| execute_run(cfg, &features, &points[p], r)).collect::<Result<_>>())?;

    let metric = Metric::for_env(&cfg.env.name);
    let mut records = records.into_iter();
    let sweeps = points
        .into_iter()
        .map(|point| {
            let runs: Vec<RunRecord> = records.by_ref().take(cfg.runs).collect();
            let values: Vec<Vec<f64>> = runs.iter().map(|r| r.episodes.iter().map(|l| metric.of(l)).collect()).collect();
            let summary = aggregate_runs(&values, cfg.window);
            SweepResult { point, runs, summary }
        })
        .collect();
    Ok(ExperimentResult { metric, window: cfg.window, sweeps })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

pub fn write_raw_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RAW_HEADER)?;
    for sweep in &result.sweeps {
        for run in &sweep.runs {
            for (e, log) in run.episodes.iter().enumerate() {
                w.write_record([
                    run.run.to_string(),
                    sweep.point.label.clone(),
                    e.to_string(),
                    log.steps.to_string(),
                    log.undiscounted_return.to_string(),
                    log.reached_goal.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<'a>(series: impl IntoIterator<Item = (&'a str, &'a [WindowSummary])>, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for (label, windows) in series {
        for s in windows {
            w.write_record([
                label.to_string(),
                s.window_index.to_string(),
                s.mean.to_string(),
                s.ci95.to_string(),
                s.p5.to_string(),
                s.p95.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_header(r: &mut csv::Reader<fs::File>, want: &[&str], path: &Path) -> Result<()> {
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != want {
        return Err(Error::Config(format!("{}: unexpected header {got:?}", path.display())));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, path: &Path) -> Result<T> {
    field.parse().map_err(|_| Error::Config(format!("{}: cannot parse `{field}`", path.display())))
}

/// Window summaries keyed by sweep label, in file order.
pub type LabelledSeries = Vec<(String, Vec<WindowSummary>)>;

/// Reads an aggregate CSV back into per-sweep series, in file order.
pub fn read_aggregate_csv(path: &Path) -> Result<LabelledSeries> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(&mut r, &AGGREGATE_HEADER, path)?;
    let mut out: LabelledSeries = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let s = WindowSummary {
            window_index: parse(&rec[1], path)?,
            mean: parse(&rec[2], path)?,
            ci95: parse(&rec[3], path)?,
            p5: parse(&rec[4], path)?,
            p95: parse(&rec[5], path)?,
        };
        match out.last_mut() {
            Some((label, ws)) if *label == rec[0] => ws.push(s),
            _ => out.push((rec[0].to_string(), vec![s])),
        }
    }
    Ok(out)
}

/// Recomputes the aggregate series from a raw CSV.
pub fn aggregate_from_raw(path: &Path, metric: Metric, window: usize) -> Result<LabelledSeries> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(&mut r, &RAW_HEADER, path)?;
    // sweep label -> run id -> per-episode values, both in first-seen order
    let mut sweeps: Vec<(String, Vec<(usize, Vec<f64>)>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let run: usize = parse(&rec[0], path)?;
        let value = match metric {
            Metric::Steps => parse::<usize>(&rec[3], path)? as f64,
            Metric::UndiscountedReturn => parse::<f64>(&rec[4], path)?,
        };
        if sweeps.last().map(|(l, _)| l != &rec[1]).unwrap_or(true) {
            sweeps.push((rec[1].to_string(), Vec::new()));
        }
        let runs = &mut sweeps.last_mut().unwrap().1;
        if runs.last().map(|(id, _)| *id != run).unwrap_or(true) {
            runs.push((run, Vec::new()));
        }
        runs.last_mut().unwrap().1.push(value);
    }
    Ok(sweeps
        .into_iter()
        .map(|(label, runs)| {
            let values: Vec<Vec<f64>> = runs.into_iter().map(|(_, v)| v).collect();
            (label, aggregate_runs(&values, window))
        })
        .collect())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    sweep_id: &'a str,
    failed_updates: usize,
    final_window_mean: Option<f64>,
    goal_fraction: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    metric: Metric,
    window: usize,
    runs: usize,
    episodes: usize,
    sweeps: Vec<SweepSummary<'a>>,
}

#[derive(Clone, Debug)]
pub struct OutputFiles {
    pub raw: PathBuf,
    pub aggregate: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// File-name-safe form of a sweep label.
fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Writes `raw.csv`, `aggregate.csv`, `summary.json` and one SVG per sweep point.
pub fn write_outputs(result: &ExperimentResult, cfg: &ExperimentConfig, dir: &Path) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let raw = dir.join("raw.csv");
    let aggregate = dir.join("aggregate.csv");
    write_raw_csv(result, &raw)?;
    write_aggregate_csv(result.sweeps.iter().map(|s| (s.point.label.as_str(), s.summary.as_slice())), &aggregate)?;

    let mut plots = Vec::new();
    for s in &result.sweeps {
        if s.summary.is_empty() {
            continue;
        }
        let svg = render_svg(&[Series { label: &s.point.label, windows: &s.summary }], result.window, result.metric.label())?;
        let path = dir.join(format!("{}.svg", file_stem(&s.point.label)));
        fs::write(&path, svg)?;
        plots.push(path);
    }

    let summary = Summary {
        name: &cfg.name,
        metric: result.metric,
        window: result.window,
        runs: cfg.runs,
        episodes: cfg.episodes,
        sweeps: result
            .sweeps
            .iter()
            .map(|s| {
                let total: usize = s.runs.iter().map(|r| r.episodes.len()).sum();
                let goals: usize = s.runs.iter().map(|r| r.episodes.iter().filter(|l| l.reached_goal).count()).sum();
                SweepSummary {
                    sweep_id: &s.point.label,
                    failed_updates: s.failed_updates(),
                    final_window_mean: s.summary.last().map(|w| w.mean),
                    goal_fraction: if total == 0 { 0.0 } else { goals as f64 / total as f64 },
                }
            })
            .collect(),
    };
    let summary_path = dir.join("summary.json");
    let mut f = fs::File::create(&summary_path)?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    Ok(OutputFiles { raw, aggregate, summary: summary_path, plots })
}
