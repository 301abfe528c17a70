//! Replicated naive and corrected estimators: sampling densities, MSE against
//! a larger reference run, and paired tests.

use esig_core::{estimate, expected_signature, stats, ControlMode, PathSeed, Result, Word};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, PartitionSpec};
use crate::inference::{paired_t_greater, variance_f_greater, TestResult};
use crate::output::{num, Report, Table};
use crate::sim::draw;
use crate::svg::{histogram_plot, Histogram};

pub const DEFAULT_PARTITION: PartitionSpec = PartitionSpec::Rule { max_level: 10 };

const REFERENCE_STAGE: u64 = 1 << 40;

#[derive(Clone, Debug, Serialize)]
pub struct WordDensity {
    pub word: String,
    /// The last letter is a martingale coordinate, so the correction applies.
    pub corrected: bool,
    pub reference: f64,
    pub reference_se: f64,
    pub naive_mean: f64,
    pub corrected_mean: f64,
    pub naive_variance: f64,
    pub corrected_variance: f64,
    pub naive_mse: f64,
    pub corrected_mse: f64,
    /// Squared errors, naive minus corrected: one-sided paired t-test.
    pub mse_test: TestResult,
    /// Naive over corrected variance: one-sided F-test.
    pub variance_test: TestResult,
    /// `(mean − reference) / SE` for each estimator.
    pub naive_bias_z: f64,
    pub corrected_bias_z: f64,
    pub mean_c: Option<f64>,
    pub bins: Vec<f64>,
    pub naive_density: Vec<f64>,
    pub corrected_density: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub process: &'static str,
    pub n: usize,
    pub replications: usize,
    pub steps: usize,
    pub mesh: f64,
    pub reference_n: usize,
    pub mode: ControlMode,
    pub words: Vec<WordDensity>,
    #[serde(skip)]
    pub naive: Vec<f64>,
    #[serde(skip)]
    pub corrected: Vec<f64>,
}

pub fn run(cfg: &ExperimentConfig, words: &[Word]) -> Result<DensityReport> {
    let steps = cfg.partition_or(DEFAULT_PARTITION).steps(cfg.n);
    let seed = cfg.seed();
    let mode = cfg.control_modes().expect("validated")[0];
    let letters = cfg
        .density
        .martingale_letters
        .clone()
        .unwrap_or_else(|| cfg.process.martingale_letters());
    let modes: Vec<Option<ControlMode>> = words
        .iter()
        .map(|w| w.last().filter(|l| letters.contains(l)).map(|_| mode))
        .collect();
    let k = words.len();
    let batch = |stage: u64| draw(&cfg.process, cfg.sampling, cfg.horizon, steps, cfg.n, PathSeed::derive(seed, stage));

    let factor = cfg.reference.factor;
    let ref_means: Vec<Vec<f64>> = (0..factor as u64)
        .into_par_iter()
        .map(|b| Ok(expected_signature(&batch(REFERENCE_STAGE + b)?, words)?.phi_hat))
        .collect::<Result<_>>()?;
    let column = |rows: &[Vec<f64>], w: usize| rows.iter().map(|m| m[w]).collect::<Vec<f64>>();
    let reference: Vec<f64> = (0..k).map(|w| stats::mean(&column(&ref_means, w))).collect();
    let reference_se: Vec<f64> = (0..k).map(|w| stats::std_error(&column(&ref_means, w))).collect();

    let reps: Vec<(Vec<f64>, Vec<f64>, Vec<Option<f64>>)> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let est = estimate(&batch(r)?, words, &modes)?;
            Ok((est.naive_phi_hat, est.phi_hat, est.c_used))
        })
        .collect::<Result<_>>()?;

    let reps_f = cfg.replications as f64;
    let word_reports = words
        .iter()
        .enumerate()
        .map(|(w, word)| {
            let naive: Vec<f64> = reps.iter().map(|r| r.0[w]).collect();
            let corr: Vec<f64> = reps.iter().map(|r| r.1[w]).collect();
            let sq = |xs: &[f64]| xs.iter().map(|x| (x - reference[w]).powi(2)).collect::<Vec<f64>>();
            let (sq_n, sq_c) = (sq(&naive), sq(&corr));
            let bias_z = |xs: &[f64]| {
                (stats::mean(xs) - reference[w]) / (stats::variance(xs) / reps_f + reference_se[w].powi(2)).sqrt()
            };
            let lo = naive.iter().chain(&corr).copied().fold(f64::INFINITY, f64::min);
            let hi = naive.iter().chain(&corr).copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
            let hn = Histogram::new("naive", &naive, lo, hi, cfg.density.bins);
            let hc = Histogram::new("corrected", &corr, lo, hi, cfg.density.bins);
            let cs: Vec<f64> = reps.iter().filter_map(|r| r.2[w]).collect();
            WordDensity {
                word: word.to_string(),
                corrected: modes[w].is_some(),
                reference: reference[w],
                reference_se: reference_se[w],
                naive_mean: stats::mean(&naive),
                corrected_mean: stats::mean(&corr),
                naive_variance: stats::variance(&naive),
                corrected_variance: stats::variance(&corr),
                naive_mse: stats::mean(&sq_n),
                corrected_mse: stats::mean(&sq_c),
                mse_test: paired_t_greater(&sq_n, &sq_c),
                variance_test: variance_f_greater(&naive, &corr),
                naive_bias_z: bias_z(&naive),
                corrected_bias_z: bias_z(&corr),
                mean_c: (!cs.is_empty()).then(|| stats::mean(&cs)),
                bins: hn.edges,
                naive_density: hn.density,
                corrected_density: hc.density,
            }
        })
        .collect();

    Ok(DensityReport {
        process: cfg.process.name(),
        n: cfg.n,
        replications: cfg.replications,
        steps,
        mesh: cfg.horizon / steps as f64,
        reference_n: factor * cfg.n,
        mode,
        words: word_reports,
        naive: reps.iter().flat_map(|r| r.0.iter().copied()).collect(),
        corrected: reps.iter().flat_map(|r| r.1.iter().copied()).collect(),
    })
}

impl Report for DensityReport {
    fn samples(&self) -> Table {
        let mut header = vec!["replication".to_string()];
        for w in &self.words {
            header.push(format!("naive[{}]", w.word));
            header.push(format!("corrected[{}]", w.word));
        }
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&refs);
        let k = self.words.len();
        for r in 0..self.replications {
            let mut row = vec![r.to_string()];
            for w in 0..k {
                row.push(num(self.naive[r * k + w]));
                row.push(num(self.corrected[r * k + w]));
            }
            t.push(row);
        }
        t
    }

    fn plot(&self, stamp: &str) -> Option<String> {
        let w = self.words.iter().find(|w| w.corrected).or(self.words.first())?;
        let hist = |name: &str, density: &[f64]| Histogram {
            name: format!("{name} {}", w.word),
            edges: w.bins.clone(),
            density: density.to_vec(),
        };
        Some(histogram_plot(
            stamp,
            &format!("estimator densities, {}", self.process),
            "estimate",
            &[hist("corrected", &w.corrected_density), hist("naive", &w.naive_density)],
            true,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_word_is_corrected_to_its_exact_mean() {
        let c = ExperimentConfig::from_toml("seed = 9\nn = 100\nreplications = 12\n[process]\nkind = \"bm\"\n[partition]\nscheme = \"dyadic\"\nlevel = 4\n").unwrap();
        let words: Vec<Word> = ["1", "1.1"].iter().map(|w| Word::parse(w, 1).unwrap()).collect();
        let r = run(&c, &words).unwrap();
        // S_c = S for a single letter, so the corrected value is 0 every time
        assert_eq!(r.words[0].corrected_variance, 0.0);
        assert_eq!(r.words[0].corrected_mean, 0.0);
        assert!(r.words[1].corrected_mse < r.words[1].naive_mse);
        assert_eq!(r.steps, 16);
        assert_eq!(r.samples().rows.len(), 12);
        assert!(r.plot("x").unwrap().contains("<svg"));
    }

    #[test]
    fn non_martingale_letters_are_left_alone() {
        let c = ExperimentConfig::from_toml("seed = 9\nn = 50\nreplications = 4\n[process]\nkind = \"bm\"\n[density]\nmartingale_letters = []\n").unwrap();
        let r = run(&c, &[Word::parse("1.1", 1).unwrap()]).unwrap();
        assert!(!r.words[0].corrected);
        assert_eq!(r.naive, r.corrected);
    }
}
