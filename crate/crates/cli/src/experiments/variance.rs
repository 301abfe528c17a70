//! One sample, several control-coefficient choices: corrected versus naive
//! estimates, variance ratios against `1 − ρ̂²`, and the ĉ₁/ĉ₂ diagnostic.

use esig_core::esig::{mse_diff_diagnostic, MseDiagnostic};
use esig_core::{estimate, stats, ControlMode, EstimateReport, PathSeed, Result, Word};
use serde::Serialize;

use crate::config::{ExperimentConfig, PartitionSpec};
use crate::output::{num, opt, Report, Table};
use crate::sim::draw;

pub const DEFAULT_PARTITION: PartitionSpec = PartitionSpec::Dyadic { level: 8 };

#[derive(Clone, Debug, Serialize)]
pub struct ModeResult {
    pub mode: ControlMode,
    pub phi_hat: f64,
    pub std_error: f64,
    pub c: Option<f64>,
    pub c_fallback: bool,
    pub variance_ratio: f64,
    pub one_minus_rho_sq: f64,
    /// `|ratio − (1 − ρ̂²)| / (1 − ρ̂²)`
    pub ratio_rel_gap: f64,
    /// Corrected minus naive, over the standard error of that difference.
    pub shift_z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WordVariance {
    pub word: String,
    pub naive_phi_hat: f64,
    pub naive_std_error: f64,
    pub control_correlation: Option<f64>,
    pub modes: Vec<ModeResult>,
    pub diagnostic: Option<MseDiagnostic>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    pub process: &'static str,
    pub n: usize,
    pub steps: usize,
    pub words: Vec<WordVariance>,
    #[serde(skip)]
    pub base: Option<EstimateReport>,
}

pub fn run(cfg: &ExperimentConfig, words: &[Word]) -> Result<VarianceReport> {
    let steps = cfg.partition_or(DEFAULT_PARTITION).steps(cfg.n);
    let paths = draw(
        &cfg.process,
        cfg.sampling,
        cfg.horizon,
        steps,
        cfg.n,
        PathSeed::derive(cfg.seed(), 0),
    )?;
    let modes = cfg.control_modes().expect("validated");
    let per_mode: Vec<EstimateReport> = modes
        .iter()
        .map(|&m| {
            let ms: Vec<Option<ControlMode>> = words.iter().map(|w| (!w.is_empty()).then_some(m)).collect();
            estimate(&paths, words, &ms)
        })
        .collect::<Result<_>>()?;
    let base = match per_mode.first() {
        Some(r) => r.clone(),
        None => estimate(&paths, words, &vec![None; words.len()])?,
    };

    let words_out = words
        .iter()
        .enumerate()
        .map(|(w, word)| {
            let s = base.column(w);
            let modes_out = per_mode
                .iter()
                .zip(&modes)
                .filter(|_| !word.is_empty())
                .map(|(rep, &mode)| {
                    let rho = rep.control_correlation[w].unwrap_or(0.0);
                    let target = 1.0 - rho * rho;
                    let ratio = rep.variance[w] / rep.naive_variance[w];
                    let c = rep.c_used[w].unwrap_or(0.0);
                    let shift: Vec<f64> = rep
                        .control_column(w)
                        .expect("controls computed")
                        .iter()
                        .map(|sc| -c * sc)
                        .collect();
                    let se = stats::std_error(&shift);
                    ModeResult {
                        mode,
                        phi_hat: rep.phi_hat[w],
                        std_error: rep.variance[w].sqrt(),
                        c: rep.c_used[w],
                        c_fallback: rep.c_fallback[w],
                        variance_ratio: ratio,
                        one_minus_rho_sq: target,
                        ratio_rel_gap: (ratio - target).abs() / target,
                        shift_z: if se > 0.0 { stats::mean(&shift) / se } else { 0.0 },
                    }
                })
                .collect();
            Ok(WordVariance {
                word: word.to_string(),
                naive_phi_hat: stats::mean(&s),
                naive_std_error: base.naive_variance[w].sqrt(),
                control_correlation: base.control_correlation[w],
                modes: modes_out,
                diagnostic: if word.len() < 2 {
                    None
                } else {
                    Some(mse_diff_diagnostic(&paths, word)?)
                },
            })
        })
        .collect::<Result<_>>()?;

    Ok(VarianceReport {
        process: cfg.process.name(),
        n: cfg.n,
        steps,
        words: words_out,
        base: Some(base),
    })
}

impl Report for VarianceReport {
    fn samples(&self) -> Table {
        let mut t = Table::new(&["word", "mode", "phi_hat", "std_error", "c", "variance_ratio", "one_minus_rho_sq"]);
        for w in &self.words {
            t.push(vec![
                w.word.clone(),
                "naive".into(),
                num(w.naive_phi_hat),
                num(w.naive_std_error),
                String::new(),
                "1".into(),
                String::new(),
            ]);
            for m in &w.modes {
                t.push(vec![
                    w.word.clone(),
                    mode_name(m.mode),
                    num(m.phi_hat),
                    num(m.std_error),
                    opt(m.c),
                    num(m.variance_ratio),
                    num(m.one_minus_rho_sq),
                ]);
            }
        }
        t
    }
}

pub fn mode_name(mode: ControlMode) -> String {
    match mode {
        ControlMode::C1 => "c1".into(),
        ControlMode::C1Centered => "c1-centered".into(),
        ControlMode::C2 => "c2".into(),
        ControlMode::Fixed(c) => format!("fixed:{c}"),
    }
}
