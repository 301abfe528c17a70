//! Estimation error against a larger, finer reference run along a doubling
//! ladder of sample sizes.

use esig_core::{expected_signature, stats, PathSeed, Result, Word};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, PartitionSpec};
use crate::output::{num, Report, Table};
use crate::sim::draw;
use crate::svg::{line_plot, Series};

pub const DEFAULT_PARTITION: PartitionSpec = PartitionSpec::Rule { max_level: 6 };

const REFERENCE_STAGE: u64 = 1 << 40;

#[derive(Clone, Debug, Serialize)]
pub struct LadderPoint {
    pub n: usize,
    pub steps: usize,
    /// RMS over replications of `φ̂ − reference`.
    pub rms_error: f64,
    /// Mean HAC standard error.
    pub mean_std_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WordConsistency {
    pub word: String,
    pub reference: f64,
    pub reference_se: f64,
    pub ladder: Vec<LadderPoint>,
    /// `rms(4N) / rms(N)`; `√N` convergence gives 0.5.
    pub quadruple_ratios: Vec<f64>,
    pub halving_within_30pct: Vec<bool>,
    pub final_error: f64,
    /// `3 √(SE² + SE_ref²)` at the largest `N`, first replication.
    pub final_bound: f64,
    pub final_within_3se: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub process: &'static str,
    pub replications: usize,
    pub reference_n: usize,
    pub reference_steps: usize,
    pub words: Vec<WordConsistency>,
}

pub fn ladder(n_min: usize, n_max: usize) -> Vec<usize> {
    std::iter::successors(Some(n_min), |&n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect()
}

pub fn run(cfg: &ExperimentConfig, words: &[Word]) -> Result<ConsistencyReport> {
    let scheme = cfg.partition_or(DEFAULT_PARTITION);
    let seed = cfg.seed();
    let ns = ladder(cfg.consistency.n_min, cfg.consistency.n_max);
    let n_max = *ns.last().expect("validated ladder");
    let k = words.len();
    let hac = cfg.hac.options();

    let ref_steps = scheme.steps(n_max) << cfg.reference.extra_levels;
    let ref_means: Vec<Vec<f64>> = (0..cfg.reference.factor as u64)
        .into_par_iter()
        .map(|b| {
            let paths = draw(&cfg.process, cfg.sampling, cfg.horizon, ref_steps, n_max, PathSeed::derive(seed, REFERENCE_STAGE + b))?;
            Ok(expected_signature(&paths, words)?.phi_hat)
        })
        .collect::<Result<_>>()?;
    let col = |w: usize| ref_means.iter().map(|m| m[w]).collect::<Vec<f64>>();
    let reference: Vec<f64> = (0..k).map(|w| stats::mean(&col(w))).collect();
    let reference_se: Vec<f64> = (0..k).map(|w| stats::std_error(&col(w))).collect();

    // [ladder][replication] -> (errors, standard errors)
    let results: Vec<Vec<(Vec<f64>, Vec<f64>)>> = ns
        .iter()
        .enumerate()
        .map(|(li, &n)| {
            let steps = scheme.steps(n);
            (0..cfg.replications as u64)
                .into_par_iter()
                .map(|r| {
                    let stage = ((li as u64) << 32) | r;
                    let paths = draw(&cfg.process, cfg.sampling, cfg.horizon, steps, n, PathSeed::derive(seed, stage))?;
                    let est = expected_signature(&paths, words)?;
                    let est = if n >= 2 { est.with_hac(&hac)? } else { est };
                    let err = (0..k).map(|w| est.phi_hat[w] - reference[w]).collect();
                    let se = (0..k)
                        .map(|w| {
                            est.hac
                                .as_ref()
                                .map_or(0.0, |h| (h.matrix[(w, w)].max(0.0) / n as f64).sqrt())
                        })
                        .collect();
                    Ok((err, se))
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let word_out = words
        .iter()
        .enumerate()
        .map(|(w, word)| {
            let ladder: Vec<LadderPoint> = ns
                .iter()
                .zip(&results)
                .map(|(&n, reps)| {
                    let sq: Vec<f64> = reps.iter().map(|r| r.0[w].powi(2)).collect();
                    let se: Vec<f64> = reps.iter().map(|r| r.1[w]).collect();
                    LadderPoint {
                        n,
                        steps: scheme.steps(n),
                        rms_error: stats::mean(&sq).sqrt(),
                        mean_std_error: stats::mean(&se),
                    }
                })
                .collect();
            let quadruple_ratios: Vec<f64> = ladder
                .iter()
                .zip(ladder.iter().skip(2))
                .map(|(a, b)| b.rms_error / a.rms_error)
                .collect();
            let last = &results.last().expect("non-empty ladder")[0];
            let final_error = last.0[w].abs();
            let final_bound = 3.0 * (last.1[w].powi(2) + reference_se[w].powi(2)).sqrt();
            WordConsistency {
                word: word.to_string(),
                reference: reference[w],
                reference_se: reference_se[w],
                halving_within_30pct: quadruple_ratios.iter().map(|r| (r - 0.5).abs() <= 0.15).collect(),
                quadruple_ratios,
                ladder,
                final_error,
                final_bound,
                final_within_3se: final_error <= final_bound,
            }
        })
        .collect();

    Ok(ConsistencyReport {
        process: cfg.process.name(),
        replications: cfg.replications,
        reference_n: cfg.reference.factor * n_max,
        reference_steps: ref_steps,
        words: word_out,
    })
}

impl Report for ConsistencyReport {
    fn samples(&self) -> Table {
        let mut t = Table::new(&["word", "n", "steps", "rms_error", "mean_std_error"]);
        for w in &self.words {
            for p in &w.ladder {
                t.push(vec![
                    w.word.clone(),
                    p.n.to_string(),
                    p.steps.to_string(),
                    num(p.rms_error),
                    num(p.mean_std_error),
                ]);
            }
        }
        t
    }

    fn plot(&self, stamp: &str) -> Option<String> {
        let series: Vec<Series> = self
            .words
            .iter()
            .map(|w| Series {
                name: w.word.clone(),
                points: w
                    .ladder
                    .iter()
                    .map(|p| ((p.n as f64).log2(), p.rms_error.log2()))
                    .collect(),
            })
            .collect();
        Some(line_plot(stamp, "estimation error", "log2 N", "log2 RMS error", &series))
    }
}
