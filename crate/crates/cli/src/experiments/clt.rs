//! Standardised expected-signature estimates over many replications, using
//! the HAC long-run variance, checked against `N(0,1)`.

use esig_core::{expected_signature, stats, PathSeed, Result, Word};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, PartitionSpec, Sampling};
use crate::inference::ks_normal;
use crate::output::{num, Report, Table};
use crate::sim::draw;
use crate::svg::{histogram_plot, Histogram};

pub const DEFAULT_PARTITION: PartitionSpec = PartitionSpec::Dyadic { level: 4 };

/// Stage offset separating reference batches from replications.
const REFERENCE_STAGE: u64 = 1 << 40;

#[derive(Clone, Debug, Serialize)]
pub struct WordClt {
    pub word: String,
    pub reference: f64,
    pub reference_se: f64,
    pub used: usize,
    /// Replications whose `Σ̂` was not positive.
    pub excluded: usize,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub ks_statistic: Option<f64>,
    pub mean_bandwidth: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub process: &'static str,
    pub sampling: Sampling,
    pub n: usize,
    pub replications: usize,
    pub reference_n: usize,
    pub steps_per_sample: usize,
    pub words: Vec<WordClt>,
    /// Replication-major standardised values, `NaN` where excluded.
    #[serde(skip)]
    pub standardized: Vec<f64>,
}

pub fn run(cfg: &ExperimentConfig, words: &[Word]) -> Result<CltReport> {
    let steps = cfg.partition_or(DEFAULT_PARTITION).steps(cfg.n);
    let k = words.len();
    let seed = cfg.seed();
    let batch = |stage: u64| draw(&cfg.process, cfg.sampling, cfg.horizon, steps, cfg.n, PathSeed::derive(seed, stage));

    let ref_batches = cfg.clt.reference_factor;
    let ref_means: Vec<Vec<f64>> = (0..ref_batches as u64)
        .into_par_iter()
        .map(|b| Ok(expected_signature(&batch(REFERENCE_STAGE + b)?, words)?.phi_hat))
        .collect::<Result<_>>()?;
    let reference: Vec<f64> = (0..k)
        .map(|w| stats::mean(&ref_means.iter().map(|m| m[w]).collect::<Vec<_>>()))
        .collect();
    let reference_se: Vec<f64> = (0..k)
        .map(|w| stats::std_error(&ref_means.iter().map(|m| m[w]).collect::<Vec<_>>()))
        .collect();

    let hac = cfg.hac.options();
    let root_n = (cfg.n as f64).sqrt();
    let reps: Vec<(Vec<f64>, usize)> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let est = expected_signature(&batch(r)?, words)?.with_hac(&hac)?;
            let h = est.hac.as_ref().expect("hac requested");
            let z = (0..k)
                .map(|w| {
                    let var = h.matrix[(w, w)];
                    if var > 0.0 && var.is_finite() {
                        root_n * (est.phi_hat[w] - reference[w]) / var.sqrt()
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            Ok((z, h.bandwidth))
        })
        .collect::<Result<_>>()?;

    let mean_bandwidth = stats::mean(&reps.iter().map(|r| r.1 as f64).collect::<Vec<_>>());
    let word_reports = words
        .iter()
        .enumerate()
        .map(|(w, word)| {
            let zs: Vec<f64> = reps.iter().map(|r| r.0[w]).filter(|z| z.is_finite()).collect();
            let enough = zs.len() >= 3;
            WordClt {
                word: word.to_string(),
                reference: reference[w],
                reference_se: reference_se[w],
                used: zs.len(),
                excluded: reps.len() - zs.len(),
                skewness: enough.then(|| stats::skewness(&zs)),
                excess_kurtosis: enough.then(|| stats::excess_kurtosis(&zs)),
                ks_statistic: enough.then(|| ks_normal(&zs)),
                mean_bandwidth,
            }
        })
        .collect();

    Ok(CltReport {
        process: cfg.process.name(),
        sampling: cfg.sampling,
        n: cfg.n,
        replications: cfg.replications,
        reference_n: ref_batches * cfg.n,
        steps_per_sample: steps,
        words: word_reports,
        standardized: reps.into_iter().flat_map(|r| r.0).collect(),
    })
}

impl Report for CltReport {
    fn samples(&self) -> Table {
        let mut header = vec!["replication".to_string()];
        header.extend(self.words.iter().map(|w| format!("z[{}]", w.word)));
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&refs);
        let k = self.words.len();
        for (r, row) in self.standardized.chunks(k).enumerate() {
            let mut cells = vec![r.to_string()];
            cells.extend(row.iter().map(|&z| num(z)));
            t.push(cells);
        }
        t
    }

    fn plot(&self, stamp: &str) -> Option<String> {
        let k = self.words.len();
        let hists: Vec<Histogram> = self
            .words
            .iter()
            .enumerate()
            .map(|(w, word)| {
                let zs: Vec<f64> = self.standardized.iter().skip(w).step_by(k).copied().collect();
                Histogram::new(&word.word, &zs, -4.0, 4.0, 32)
            })
            .collect();
        Some(histogram_plot(stamp, "standardised estimates", "z", &hists, false))
    }
}
