//! Expected-signature estimation with the martingale control variate, the
//! two estimators of the optimal control coefficient, and the long-run
//! covariance estimator used for confidence statements.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::PiecewiseLinearPath;
use crate::signature::{sig_word, signature, word_features};
use crate::stats;
use crate::words::{shuffle, Word};

/// How the control coefficient `c` is chosen for a word.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ControlMode {
    Fixed(f64),
    /// `Σ S S_c / Σ S_c²`
    C1,
    /// Sample covariance over sample variance.
    C1Centered,
    /// Shuffle / quadratic-variation estimator.
    C2,
}

/// Estimates for a list of words from one sample of paths.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub words: Vec<Word>,
    pub n_samples: usize,
    pub horizon: f64,
    pub mesh: f64,
    pub seed: Option<u64>,
    pub phi_hat: Vec<f64>,
    /// Variance of `phi_hat`, i.e. sample variance over `n_samples`.
    pub variance: Vec<f64>,
    pub naive_phi_hat: Vec<f64>,
    pub naive_variance: Vec<f64>,
    /// `None` for words that were not corrected.
    pub c_used: Vec<Option<f64>>,
    /// Set when the requested coefficient could not be formed and `c = 0` was used.
    pub c_fallback: Vec<bool>,
    /// Sample correlation of `S^I` and `S_c^I`.
    pub control_correlation: Vec<Option<f64>>,
    pub hac: Option<HacEstimate>,
    /// Row-major `n_samples × words.len()` values of `S^I`.
    #[serde(skip)]
    pub per_sample: Vec<f64>,
    /// Same shape, `S_c^I`.
    #[serde(skip)]
    pub control_per_sample: Option<Vec<f64>>,
}

impl EstimateReport {
    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn column(&self, w: usize) -> Vec<f64> {
        column(&self.per_sample, self.num_words(), w)
    }

    pub fn control_column(&self, w: usize) -> Option<Vec<f64>> {
        self.control_per_sample
            .as_ref()
            .map(|c| column(c, self.num_words(), w))
    }

    /// Per-sample values of the estimator actually used for word `w`.
    pub fn estimator_column(&self, w: usize) -> Vec<f64> {
        let s = self.column(w);
        match (self.c_used[w], self.control_column(w)) {
            (Some(c), Some(sc)) => s.iter().zip(&sc).map(|(a, b)| a - c * b).collect(),
            _ => s,
        }
    }

    /// `var(corrected) / var(naive)` per word.
    pub fn variance_ratio(&self) -> Vec<f64> {
        self.variance
            .iter()
            .zip(&self.naive_variance)
            .map(|(v, n)| if *n > 0.0 { v / n } else { 1.0 })
            .collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Attaches the long-run covariance of the estimator columns in sample order.
    pub fn with_hac(mut self, options: &HacOptions) -> Result<Self> {
        let cols: Vec<Vec<f64>> = (0..self.num_words()).map(|w| self.estimator_column(w)).collect();
        let rows: Vec<f64> = (0..self.n_samples)
            .flat_map(|n| cols.iter().map(move |c| c[n]))
            .collect();
        self.hac = Some(hac_long_run_cov(&rows, self.num_words(), options)?);
        Ok(self)
    }

    /// CSV of the per-sample values: `sample,S[w]...,Sc[w]...`.
    pub fn write_samples_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["sample".to_string()];
        header.extend(self.words.iter().map(|w| format!("S[{w}]")));
        if self.control_per_sample.is_some() {
            header.extend(self.words.iter().map(|w| format!("Sc[{w}]")));
        }
        out.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        let k = self.num_words();
        for n in 0..self.n_samples {
            let mut row = vec![n.to_string()];
            row.extend(self.per_sample[n * k..(n + 1) * k].iter().map(f64::to_string));
            if let Some(c) = &self.control_per_sample {
                row.extend(c[n * k..(n + 1) * k].iter().map(f64::to_string));
            }
            out.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

fn column(rows: &[f64], width: usize, w: usize) -> Vec<f64> {
    rows.iter().skip(w).step_by(width).copied().collect()
}

fn check_paths(paths: &[PiecewiseLinearPath], words: &[Word]) -> Result<()> {
    let first = paths.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    for p in paths {
        if p.dim() != first.dim() {
            return Err(Error::AlphabetMismatch {
                left: first.dim(),
                right: p.dim(),
            });
        }
    }
    for w in words {
        if w.dim() != first.dim() {
            return Err(Error::AlphabetMismatch {
                left: first.dim(),
                right: w.dim(),
            });
        }
    }
    Ok(())
}

/// Row-major `S^I` and `S_c^I` values for every path.
pub fn sample_features(
    paths: &[PiecewiseLinearPath],
    words: &[Word],
    with_control: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let feats: Vec<_> = paths
        .par_iter()
        .map(|p| word_features(p, words, with_control))
        .collect::<Result<_>>()?;
    let sig = feats.iter().flat_map(|f| f.sig.iter().copied()).collect();
    let control = feats.iter().flat_map(|f| f.control.iter().copied()).collect();
    Ok((sig, control))
}

/// Sample mean of `S^I` over the paths.
pub fn expected_signature(paths: &[PiecewiseLinearPath], words: &[Word]) -> Result<EstimateReport> {
    estimate(paths, words, &vec![None; words.len()])
}

/// Control-variate estimator `(1/N) Σ (S^I − c S_c^I)` for every word.
pub fn corrected_expected_signature(
    paths: &[PiecewiseLinearPath],
    words: &[Word],
    mode: ControlMode,
) -> Result<EstimateReport> {
    if words.iter().any(Word::is_empty) {
        return Err(Error::EmptyWord);
    }
    estimate(paths, words, &vec![Some(mode); words.len()])
}

/// General entry point: `modes[w] = None` leaves word `w` uncorrected.
pub fn estimate(
    paths: &[PiecewiseLinearPath],
    words: &[Word],
    modes: &[Option<ControlMode>],
) -> Result<EstimateReport> {
    check_paths(paths, words)?;
    if modes.len() != words.len() {
        return Err(Error::InvalidParameter("one control mode per word required".into()));
    }
    for (w, m) in words.iter().zip(modes) {
        if m.is_some() && w.is_empty() {
            return Err(Error::EmptyWord);
        }
    }
    let any_control = modes.iter().any(Option::is_some);
    let (per_sample, control) = sample_features(paths, words, any_control)?;
    let k = words.len();
    let n = paths.len();

    let mut report = EstimateReport {
        words: words.to_vec(),
        n_samples: n,
        horizon: paths[0].partition().horizon(),
        mesh: paths.iter().map(|p| p.partition().mesh()).fold(0.0, f64::max),
        seed: None,
        phi_hat: vec![0.0; k],
        variance: vec![0.0; k],
        naive_phi_hat: vec![0.0; k],
        naive_variance: vec![0.0; k],
        c_used: vec![None; k],
        c_fallback: vec![false; k],
        control_correlation: vec![None; k],
        hac: None,
        per_sample,
        control_per_sample: any_control.then_some(control),
    };

    for w in 0..k {
        let s = report.column(w);
        report.naive_phi_hat[w] = stats::mean(&s);
        report.naive_variance[w] = stats::variance(&s) / n as f64;
        let Some(mode) = modes[w] else {
            report.phi_hat[w] = report.naive_phi_hat[w];
            report.variance[w] = report.naive_variance[w];
            continue;
        };
        let sc = report.control_column(w).expect("controls computed");
        report.control_correlation[w] = Some(stats::correlation(&s, &sc));
        let c = match mode {
            ControlMode::Fixed(c) => Ok(c),
            ControlMode::C1 => estimate_c1(&s, &sc),
            ControlMode::C1Centered => estimate_c1_centered(&s, &sc),
            ControlMode::C2 => estimate_c2(paths, &words[w]),
        };
        let c = match c {
            Ok(c) => c,
            Err(Error::ZeroDenominator(_)) => {
                report.c_fallback[w] = true;
                0.0
            }
            Err(e) => return Err(e),
        };
        report.c_used[w] = Some(c);
        let corrected: Vec<f64> = s.iter().zip(&sc).map(|(a, b)| a - c * b).collect();
        report.phi_hat[w] = stats::mean(&corrected);
        report.variance[w] = stats::variance(&corrected) / n as f64;
    }
    Ok(report)
}

/// `ĉ₁ = Σ S S_c / Σ S_c²`, uncentered.
pub fn estimate_c1(s: &[f64], sc: &[f64]) -> Result<f64> {
    let num: f64 = s.iter().zip(sc).map(|(a, b)| a * b).sum();
    let den: f64 = sc.iter().map(|b| b * b).sum();
    if den == 0.0 {
        return Err(Error::ZeroDenominator("c1"));
    }
    Ok(num / den)
}

/// Sample covariance of `(S, S_c)` over sample variance of `S_c`.
pub fn estimate_c1_centered(s: &[f64], sc: &[f64]) -> Result<f64> {
    let den = stats::variance(sc);
    if den == 0.0 {
        return Err(Error::ZeroDenominator("c1 (centered)"));
    }
    Ok(stats::covariance(s, sc) / den)
}

/// Word lists for the second coefficient estimator of one word, on the
/// alphabet of size `d + d²` of the QV-augmented path.
#[derive(Clone, Debug)]
pub struct C2Words {
    /// `I ⧢ I` with weight 1 and `I ⧢ (I_{−2} * q(i_{k−1}, i_k))` with weight −½.
    pub numerator: Vec<(Word, f64)>,
    /// `(J * q(i_k, i_k))` for `J ∈ I_{−1} ⧢ I_{−1}`.
    pub denominator: Vec<(Word, f64)>,
}

/// Augmented letter holding the running `ΔX^i ΔX^j` sum (1-based `i`, `j`).
pub fn qv_letter(dim: usize, i: usize, j: usize) -> usize {
    dim + (i - 1) * dim + j
}

impl C2Words {
    pub fn new(word: &Word) -> Result<Self> {
        let k = word.len();
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "second control estimator needs a word of length at least 2, got {word}"
            )));
        }
        let d = word.dim();
        let big = d + d * d;
        let wide = word.widen(big)?;
        let letters = word.letters();
        let (ik1, ik) = (letters[k - 2], letters[k - 1]);

        let mut numerator: Vec<(Word, f64)> = Vec::new();
        for (w, c) in shuffle(&wide, &wide)?.terms() {
            numerator.push((w.clone(), c as f64));
        }
        let short = wide.drop_last(2).unwrap().push(qv_letter(d, ik1, ik))?;
        for (w, c) in shuffle(&wide, &short)?.terms() {
            numerator.push((w.clone(), -0.5 * c as f64));
        }

        let prefix = wide.drop_last(1).unwrap();
        let tail = Word::letter(qv_letter(d, ik, ik), big)?;
        let denominator = shuffle(&prefix, &prefix)?
            .concat_right(&tail)?
            .terms()
            .map(|(w, c)| (w.clone(), c as f64))
            .collect();
        Ok(Self {
            numerator,
            denominator,
        })
    }

    /// Per-path `(Y₂, Z₂)`.
    pub fn evaluate(&self, path: &PiecewiseLinearPath) -> Result<(f64, f64)> {
        let aug = path.qv_augment();
        let eval = |terms: &[(Word, f64)]| -> Result<f64> {
            terms.iter().map(|(w, c)| Ok(c * sig_word(&aug, w)?)).sum()
        };
        Ok((eval(&self.numerator)?, eval(&self.denominator)?))
    }
}

/// Per-path `(Y₂, Z₂)` terms of the second estimator.
pub fn c2_terms(paths: &[PiecewiseLinearPath], word: &Word) -> Result<Vec<(f64, f64)>> {
    check_paths(paths, std::slice::from_ref(word))?;
    let words = C2Words::new(word)?;
    paths.par_iter().map(|p| words.evaluate(p)).collect()
}

/// `ĉ₂ = Σ Y₂ / Σ Z₂`.
pub fn estimate_c2(paths: &[PiecewiseLinearPath], word: &Word) -> Result<f64> {
    let terms = c2_terms(paths, word)?;
    let num: f64 = terms.iter().map(|t| t.0).sum();
    let den: f64 = terms.iter().map(|t| t.1).sum();
    if den == 0.0 {
        return Err(Error::ZeroDenominator("c2"));
    }
    Ok(num / den)
}

/// Sample statistic comparing the two control-coefficient estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MseDiagnostic {
    /// The sample estimate, proportional to `MSE(ĉ₂) − MSE(ĉ₁)` up to the
    /// factor `μ_Y / μ_Z³`.
    pub statistic: f64,
    pub mu_y: f64,
    pub mu_z: f64,
    /// Estimated `MSE(ĉ₂) − MSE(ĉ₁)` including the dropped factor and `1/N`.
    pub mse_difference: f64,
}

impl MseDiagnostic {
    /// `true` when the uncentered regression coefficient is expected to do better.
    pub fn prefers_c1(&self) -> bool {
        self.mse_difference > 0.0
    }
}

pub fn mse_diff_diagnostic(paths: &[PiecewiseLinearPath], word: &Word) -> Result<MseDiagnostic> {
    let n = paths.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let (sig, control) = sample_features(paths, std::slice::from_ref(word), true)?;
    let y1: Vec<f64> = sig.iter().zip(&control).map(|(s, c)| s * c).collect();
    let z1: Vec<f64> = control.iter().map(|c| c * c).collect();
    let (y2, z2): (Vec<f64>, Vec<f64>) = c2_terms(paths, word)?.into_iter().unzip();
    mse_diff_from_terms(&y1, &z1, &y2, &z2)
}

/// Same statistic from precomputed per-path terms.
pub fn mse_diff_from_terms(y1: &[f64], z1: &[f64], y2: &[f64], z2: &[f64]) -> Result<MseDiagnostic> {
    let n = y1.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mu_y = (y1.iter().sum::<f64>() + y2.iter().sum::<f64>()) / (2.0 * nf);
    let mu_z = (z1.iter().sum::<f64>() + z2.iter().sum::<f64>()) / (2.0 * nf);
    if mu_z == 0.0 {
        return Err(Error::ZeroDenominator("pooled mean of Z"));
    }
    let ratio = mu_y / mu_z;
    let sum: f64 = (0..n)
        .map(|i| {
            ratio * (z2[i] * z2[i] - z1[i] * z1[i]) - (y1[i] + y2[i]) * (z2[i] - z1[i])
        })
        .sum();
    let statistic = sum / (nf * nf);
    Ok(MseDiagnostic {
        statistic,
        mu_y,
        mu_z,
        mse_difference: statistic * mu_y / mu_z.powi(3),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HacKernel {
    #[default]
    Truncation,
    Bartlett,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HacOptions {
    pub upsilon: f64,
    pub kernel: HacKernel,
    /// Overrides the `⌊N^{υ/2}⌋` bandwidth.
    pub max_lag: Option<usize>,
}

impl Default for HacOptions {
    fn default() -> Self {
        Self {
            upsilon: 0.5,
            kernel: HacKernel::Truncation,
            max_lag: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HacEstimate {
    #[serde(serialize_with = "serialize_matrix")]
    pub matrix: DMatrix<f64>,
    pub bandwidth: usize,
    /// The requested bandwidth was at least `N` and got clipped to `N − 1`.
    pub clipped: bool,
}

fn serialize_matrix<S: serde::Serializer>(
    m: &DMatrix<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(serializer)
}

/// Lag-`n` cross-covariance from the non-overlapping pairs
/// `((n+1)m − n, (n+1)m)`, `m = 1..⌊N/(n+1)⌋`, centered at the full mean.
pub fn hac_lag_cov(rows: &[f64], width: usize, lag: usize) -> DMatrix<f64> {
    let n = rows.len() / width;
    let means: Vec<f64> = (0..width).map(|w| stats::mean(&column(rows, width, w))).collect();
    let count = n / (lag + 1);
    let mut out = DMatrix::zeros(width, width);
    if count == 0 {
        return out;
    }
    for m in 1..=count {
        let a = (lag + 1) * m - lag - 1;
        let b = (lag + 1) * m - 1;
        for i in 0..width {
            let xa = rows[a * width + i] - means[i];
            for j in 0..width {
                out[(i, j)] += xa * (rows[b * width + j] - means[j]);
            }
        }
    }
    out / count as f64
}

/// Long-run covariance `Σ_{|n| ≤ L} w_n Σ̂ⁿ` of row-major samples.
pub fn hac_long_run_cov(rows: &[f64], width: usize, options: &HacOptions) -> Result<HacEstimate> {
    if width == 0 || rows.len() % width != 0 {
        return Err(Error::InvalidParameter("sample matrix shape".into()));
    }
    let n = rows.len() / width;
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if options.max_lag.is_none() && !(options.upsilon > 0.0 && options.upsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "upsilon {} not in (0,1)",
            options.upsilon
        )));
    }
    let requested = options
        .max_lag
        .unwrap_or_else(|| (n as f64).powf(options.upsilon / 2.0).floor() as usize);
    let clipped = requested >= n;
    let bandwidth = requested.min(n - 1);
    let mut sigma = hac_lag_cov(rows, width, 0);
    for lag in 1..=bandwidth {
        let weight = match options.kernel {
            HacKernel::Truncation => 1.0,
            HacKernel::Bartlett => 1.0 - lag as f64 / (bandwidth + 1) as f64,
        };
        let g = hac_lag_cov(rows, width, lag);
        sigma += (&g + g.transpose()) * weight;
    }
    let matrix = (&sigma + sigma.transpose()) * 0.5;
    Ok(HacEstimate {
        matrix,
        bandwidth,
        clipped,
    })
}

/// Lag-0 covariance through the shuffle identity:
/// `Σ_{K ∈ I⧢J} φ̂_K − φ̂_I φ̂_J`.
pub fn lag0_cov_via_shuffle(paths: &[PiecewiseLinearPath], words: &[Word]) -> Result<DMatrix<f64>> {
    check_paths(paths, words)?;
    let depth = 2 * words.iter().map(Word::len).max().unwrap_or(0);
    let sigs: Vec<_> = paths
        .par_iter()
        .map(|p| signature(p, depth))
        .collect::<Result<_>>()?;
    let n = paths.len() as f64;
    let phi = |w: &Word| -> Result<f64> {
        Ok(sigs.iter().map(|s| s.get(w)).sum::<Result<f64>>()? / n)
    };
    let k = words.len();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut second = 0.0;
            for (w, c) in shuffle(&words[i], &words[j])?.terms() {
                second += c as f64 * phi(w)?;
            }
            out[(i, j)] = second - phi(&words[i])? * phi(&words[j])?;
        }
    }
    Ok(out)
}
