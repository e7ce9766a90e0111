//! Cross-run summaries over blocks of episodes.

use serde::{Deserialize, Serialize};

use crate::envs::EpisodeLog;

/// Half-width multiplier of the normal-approximation 95% interval.
pub const Z95: f64 = 1.96;

/// Per-episode quantity that gets aggregated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Steps,
    UndiscountedReturn,
}

impl Metric {
    /// Puddle world is scored by return, every other task by episode length.
    pub fn for_env(env: &str) -> Self {
        if env == "puddle_world" {
            Metric::UndiscountedReturn
        } else {
            Metric::Steps
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Steps => "steps",
            Metric::UndiscountedReturn => "undiscounted return",
        }
    }

    pub fn of(self, log: &EpisodeLog) -> f64 {
        match self {
            Metric::Steps => log.steps as f64,
            Metric::UndiscountedReturn => log.undiscounted_return,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSummary {
    pub window_index: usize,
    pub mean: f64,
    pub ci95: f64,
    pub p5: f64,
    pub p95: f64,
}

/// Percentile by linear interpolation between order statistics (`h = (n − 1)q`).
/// `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, 95% CI half-width and 5/95 percentiles of one value per run.
pub fn summarise(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ci = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Z95 * var.sqrt() / n.sqrt()
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (mean, ci, percentile(&sorted, 0.05), percentile(&sorted, 0.95))
}

/// Block means of one run's metric; a trailing partial block is dropped.
pub fn block_means(per_episode: &[f64], window: usize) -> Vec<f64> {
    per_episode.chunks_exact(window).map(|c| c.iter().sum::<f64>() / window as f64).collect()
}

/// Summarises `runs[r][episode]` window by window across runs.
pub fn aggregate_runs(runs: &[Vec<f64>], window: usize) -> Vec<WindowSummary> {
    let blocks: Vec<Vec<f64>> = runs.iter().map(|r| block_means(r, window)).collect();
    let windows = blocks.iter().map(Vec::len).min().unwrap_or(0);
    (0..windows)
        .map(|w| {
            let column: Vec<f64> = blocks.iter().map(|b| b[w]).collect();
            let (mean, ci95, p5, p95) = summarise(&column);
            WindowSummary { window_index: w, mean, ci95, p5, p95 }
        })
        .collect()
}
