//! RMS error of discretely observed signature terms against a fine reference
//! grid, with common driving noise across levels.

use esig_core::signature::word_features;
use esig_core::{stats, Partition, PathSeed, Result, Word};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::inference::fit_line;
use crate::output::{num, opt, Report, Table};
use crate::sim::Simulator;
use crate::svg::{line_plot, Series};

/// Errors below this fraction of the reference scale are treated as rounding.
const DEGENERATE_REL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct LevelError {
    pub level: u32,
    pub mesh: f64,
    /// One RMS error per word.
    pub rms: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WordRate {
    pub word: String,
    /// Fitted slope of `log₂ RMS` against the dyadic level.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// The error is rounding noise at every level: the observed term does not
    /// depend on the grid.
    pub degenerate: bool,
    pub within_tolerance: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InfillReport {
    pub process: &'static str,
    pub n_paths: usize,
    pub reference_level: u32,
    pub expected_slope: Option<f64>,
    pub tolerance: f64,
    pub levels: Vec<LevelError>,
    pub rates: Vec<WordRate>,
}

pub fn run(cfg: &ExperimentConfig, words: &[Word]) -> Result<InfillReport> {
    let s = &cfg.infill;
    let reference = Partition::dyadic(cfg.horizon, s.reference_level)?;
    let sim = Simulator::new(&cfg.process, &reference)?;
    let levels: Vec<u32> = (s.min_level..=s.max_level).collect();
    let k = words.len();
    let master = PathSeed::derive(cfg.seed(), 0);

    // per path: reference values, then squared errors level-major
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n as u64)
        .into_par_iter()
        .map(|i| {
            let path = sim.sample(PathSeed::new(master, i))?;
            let exact = word_features(&path, words, false)?.sig;
            let mut sq = Vec::with_capacity(levels.len() * k);
            for &level in &levels {
                let coarse = path.coarsen(1 << (s.reference_level - level))?;
                let approx = word_features(&coarse, words, false)?.sig;
                sq.extend(approx.iter().zip(&exact).map(|(a, e)| (a - e).powi(2)));
            }
            Ok((exact, sq))
        })
        .collect::<Result<_>>()?;

    let level_rows: Vec<LevelError> = levels
        .iter()
        .enumerate()
        .map(|(li, &level)| LevelError {
            level,
            mesh: cfg.horizon / (1u64 << level) as f64,
            rms: (0..k)
                .map(|w| {
                    let col: Vec<f64> = per_path.iter().map(|(_, sq)| sq[li * k + w]).collect();
                    stats::mean(&col).sqrt()
                })
                .collect(),
        })
        .collect();

    let rates = words
        .iter()
        .enumerate()
        .map(|(w, word)| {
            let ref_col: Vec<f64> = per_path.iter().map(|(e, _)| e[w]).collect();
            let scale = stats::mean(&ref_col.iter().map(|v| v * v).collect::<Vec<_>>())
                .sqrt()
                .max(1.0);
            let rms: Vec<f64> = level_rows.iter().map(|l| l.rms[w]).collect();
            let degenerate = rms.iter().all(|&r| r <= DEGENERATE_REL * scale);
            let (slope, intercept) = if degenerate || levels.len() < 2 {
                (None, None)
            } else {
                let xs: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
                let ys: Vec<f64> = rms.iter().map(|r| r.log2()).collect();
                let (a, b) = fit_line(&xs, &ys);
                (Some(a), Some(b))
            };
            WordRate {
                word: word.to_string(),
                slope,
                intercept,
                degenerate,
                within_tolerance: s
                    .expected_slope
                    .map(|e| slope.is_some_and(|a| (a - e).abs() <= s.tolerance)),
            }
        })
        .collect();

    Ok(InfillReport {
        process: cfg.process.name(),
        n_paths: cfg.n,
        reference_level: s.reference_level,
        expected_slope: s.expected_slope,
        tolerance: s.tolerance,
        levels: level_rows,
        rates,
    })
}

impl Report for InfillReport {
    fn samples(&self) -> Table {
        let mut header = vec!["level".to_string(), "mesh".to_string()];
        header.extend(self.rates.iter().map(|r| format!("rms[{}]", r.word)));
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&refs);
        for l in &self.levels {
            let mut row = vec![l.level.to_string(), num(l.mesh)];
            row.extend(l.rms.iter().map(|&r| num(r)));
            t.push(row);
        }
        t
    }

    fn plot(&self, stamp: &str) -> Option<String> {
        let series: Vec<Series> = self
            .rates
            .iter()
            .enumerate()
            .map(|(w, r)| Series {
                name: format!("{} slope {}", r.word, opt(r.slope.map(|s| (s * 1000.0).round() / 1000.0))),
                points: self
                    .levels
                    .iter()
                    .map(|l| (l.level as f64, l.rms[w].log2()))
                    .collect(),
            })
            .collect();
        Some(line_plot(stamp, "in-fill error", "dyadic level", "log2 RMS error", &series))
    }
}
