//! Pricing and quadratic hedging of signature payoffs.
//!
//! Letters on the add-time lead-lag alphabet of a scalar price:
//!
//! | letter | coordinate |
//! |--------|------------|
//! | 1      | time, lead |
//! | 2      | price, lead |
//! | 3      | time, lag |
//! | 4      | price, lag |
//!
//! A strategy `ℓ` is a functional on the add-time alphabet (1 = time,
//! 2 = price). Holding `⟨ℓ, S(X̂)_{[0,t]}⟩` units over each step gives the
//! PnL `Σ ⟨ℓ, S(X̂)_{[0,t_m]}⟩ ΔX_m`, which equals `⟨ℓ̃ 2, S(X̂^LL)⟩` with
//! `ℓ̃` the image of `ℓ` on the lag letters (1 → 3, 2 → 4) and the lead
//! price (letter 2) as integrator.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::esig::{estimate, ControlMode, EstimateReport};
use crate::path::PiecewiseLinearPath;
use crate::signature::{prefix_signatures, signature};
use crate::stats;
use crate::tensor::{Functional, TensorSeries};
use crate::words::{shuffle, Word, WordLayout};

pub const TIME_LEAD: usize = 1;
pub const PRICE_LEAD: usize = 2;
pub const TIME_LAG: usize = 3;
pub const PRICE_LAG: usize = 4;
pub const LEAD_LAG_DIM: usize = 4;

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Relative Gram-Schmidt residual below which a feature counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

/// Add-time lead-lag transform of a scalar price path.
pub fn lead_lag_add_time(path: &PiecewiseLinearPath) -> Result<PiecewiseLinearPath> {
    if path.dim() != 1 {
        return Err(Error::InvalidPath(format!(
            "expected a scalar price path, got dimension {}",
            path.dim()
        )));
    }
    Ok(path.add_time().lead_lag())
}

/// Shuffle product of two functionals.
pub fn shuffle_functionals(a: &Functional, b: &Functional) -> Result<Functional> {
    if a.dim() != b.dim() {
        return Err(Error::AlphabetMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut out = Functional::new(a.dim(), a.depth() + b.depth());
    for (wa, ca) in a.terms() {
        for (wb, cb) in b.terms() {
            for (w, c) in shuffle(wa, wb)?.terms() {
                out.add(w.clone(), ca * cb * c as f64)?;
            }
        }
    }
    Ok(out)
}

/// Maps a strategy word onto the lag letters and appends the lead price.
pub fn strategy_word(word: &Word) -> Result<Word> {
    if word.dim() != 2 {
        return Err(Error::AlphabetMismatch {
            left: 2,
            right: word.dim(),
        });
    }
    word.map_letters(LEAD_LAG_DIM, |l| l + 2)?.push(PRICE_LEAD)
}

/// Ridge regression of payoffs on every signature coefficient up to `depth`.
/// Features that are linear combinations of earlier ones (in layout order)
/// on this sample are dropped first.
pub fn fit_payoff_functional(
    payoffs: &[f64],
    signatures: &[TensorSeries],
    depth: usize,
    ridge: f64,
) -> Result<Functional> {
    let first = signatures.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    if payoffs.len() != signatures.len() {
        return Err(Error::InvalidParameter("one payoff per signature required".into()));
    }
    if first.depth() < depth {
        return Err(Error::ShapeMismatch {
            expected_dim: first.dim(),
            expected_depth: depth,
            dim: first.dim(),
            depth: first.depth(),
        });
    }
    let layout = WordLayout::new(first.dim(), depth)?;
    let n = signatures.len();

    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for idx in 0..layout.len() {
        let col = DVector::from_iterator(n, signatures.iter().map(|s| s.coeffs()[idx]));
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut resid = col.clone();
        for q in &basis {
            let proj = q.dot(&resid);
            resid -= q * proj;
        }
        let rnorm = resid.norm();
        if rnorm > COLLINEAR_TOL * norm {
            basis.push(resid / rnorm);
            kept.push(idx);
        }
    }

    let x = DMatrix::from_fn(n, kept.len(), |r, c| signatures[r].coeffs()[kept[c]]);
    let y = DVector::from_column_slice(payoffs);
    let gram = x.transpose() * &x + DMatrix::identity(kept.len(), kept.len()) * ridge;
    let beta = gram
        .cholesky()
        .map(|c| c.solve(&(x.transpose() * &y)))
        .ok_or_else(|| Error::Singular("payoff regression normal equations".into()))?;

    let mut f = Functional::new(first.dim(), depth);
    for (c, &idx) in kept.iter().enumerate() {
        f.add(layout.word_at(idx).unwrap(), beta[c])?;
    }
    Ok(f)
}

#[derive(Clone, Debug)]
pub struct PricingSpec {
    /// Payoff functional on the 4-letter alphabet.
    pub f: Functional,
    pub discount: f64,
    /// Apply the control variate to words ending in the lead price.
    pub correction: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PriceResult {
    pub price: f64,
    pub std_error: f64,
    pub estimate: EstimateReport,
}

/// `⟨f, Z_T Φ̂⟩` from simulated scalar price paths.
pub fn price(spec: &PricingSpec, price_paths: &[PiecewiseLinearPath]) -> Result<PriceResult> {
    if !(spec.discount > 0.0) {
        return Err(Error::InvalidParameter("discount factor must be positive".into()));
    }
    if spec.f.dim() != LEAD_LAG_DIM {
        return Err(Error::AlphabetMismatch {
            left: LEAD_LAG_DIM,
            right: spec.f.dim(),
        });
    }
    let transformed: Vec<_> = price_paths
        .par_iter()
        .map(lead_lag_add_time)
        .collect::<Result<_>>()?;
    let (words, coeffs): (Vec<Word>, Vec<f64>) = spec.f.terms().map(|(w, c)| (w.clone(), c)).unzip();
    let modes: Vec<Option<ControlMode>> = words
        .iter()
        .map(|w| (spec.correction && w.last() == Some(PRICE_LEAD)).then_some(ControlMode::C1))
        .collect();
    let estimate = estimate(&transformed, &words, &modes)?;

    let per_path: Vec<f64> = (0..estimate.n_samples)
        .map(|n| {
            let k = estimate.num_words();
            (0..k)
                .map(|w| {
                    let s = estimate.per_sample[n * k + w];
                    let corr = match (estimate.c_used[w], &estimate.control_per_sample) {
                        (Some(c), Some(sc)) => c * sc[n * k + w],
                        _ => 0.0,
                    };
                    coeffs[w] * (s - corr)
                })
                .sum::<f64>()
                * spec.discount
        })
        .collect();
    let price = spec.discount * coeffs.iter().zip(&estimate.phi_hat).map(|(c, p)| c * p).sum::<f64>();
    Ok(PriceResult {
        price,
        std_error: stats::std_error(&per_path),
        estimate,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HedgeResult {
    /// Strategy on the add-time alphabet (1 = time, 2 = price).
    pub ell: Functional,
    pub residual_objective: f64,
    #[serde(skip)]
    pub gram: DMatrix<f64>,
}

/// Minimises `⟨(f − p₀∅ − ℓ̃2)^{⧢2}, Φ⟩` over strategies `ℓ` of depth
/// `⌊depth/2⌋`.
pub fn hedge(f: &Functional, p0: f64, phi: &TensorSeries, depth: usize, ridge: f64) -> Result<HedgeResult> {
    if f.dim() != LEAD_LAG_DIM || phi.dim() != LEAD_LAG_DIM {
        return Err(Error::AlphabetMismatch {
            left: LEAD_LAG_DIM,
            right: if f.dim() != LEAD_LAG_DIM { f.dim() } else { phi.dim() },
        });
    }
    let ell_depth = depth / 2;
    let f_degree = f.terms().map(|(w, _)| w.len()).max().unwrap_or(0);
    let needed = (2 * (ell_depth + 1)).max(2 * f_degree);
    if phi.depth() < needed {
        return Err(Error::ShapeMismatch {
            expected_dim: LEAD_LAG_DIM,
            expected_depth: needed,
            dim: phi.dim(),
            depth: phi.depth(),
        });
    }

    let mut h = f.clone();
    h.add(Word::empty(LEAD_LAG_DIM), -p0)?;
    let basis: Vec<Word> = WordLayout::new(2, ell_depth)?.iter().collect();
    let lifted: Vec<Word> = basis.iter().map(strategy_word).collect::<Result<_>>()?;

    let pair_words = |a: &Word, b: &Word| -> Result<f64> {
        shuffle(a, b)?
            .terms()
            .map(|(w, c)| Ok(c as f64 * phi.get(w)?))
            .sum()
    };
    let k = lifted.len();
    let mut gram = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = pair_words(&lifted[a], &lifted[b])?;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let mut rhs = DVector::zeros(k);
    for a in 0..k {
        rhs[a] = h
            .terms()
            .map(|(w, c)| Ok(c * pair_words(w, &lifted[a])?))
            .sum::<Result<f64>>()?;
    }
    let hh = shuffle_functionals(&h, &h)?.pair(phi)?;

    let system = &gram + DMatrix::identity(k, k) * ridge;
    let ell = system
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Singular("hedge Gram matrix is not positive definite".into()))?;
    let residual_objective = hh - 2.0 * ell.dot(&rhs) + (gram.clone() * &ell).dot(&ell);

    let mut out = Functional::new(2, ell_depth);
    for (w, &c) in basis.iter().zip(ell.iter()) {
        out.add(w.clone(), c)?;
    }
    Ok(HedgeResult {
        ell: out,
        residual_objective,
        gram,
    })
}

/// Discrete PnL `Σ_m ⟨ℓ, S(X̂)_{[0,t_m]}⟩ (X_{t_{m+1}} − X_{t_m})` per path.
pub fn pnl_backtest(ell: &Functional, price_paths: &[PiecewiseLinearPath]) -> Result<Vec<f64>> {
    if ell.dim() != 2 {
        return Err(Error::AlphabetMismatch {
            left: 2,
            right: ell.dim(),
        });
    }
    price_paths
        .par_iter()
        .map(|p| {
            if p.dim() != 1 {
                return Err(Error::InvalidPath("expected a scalar price path".into()));
            }
            let prefixes = prefix_signatures(&p.add_time(), ell.depth())?;
            let mut pnl = 0.0;
            for (m, dx) in p.increments().enumerate() {
                pnl += ell.pair(&prefixes[m])? * dx[0];
            }
            Ok(pnl)
        })
        .collect()
}

/// Mean expected signature `Φ̂` of the add-time lead-lag paths, all words up
/// to `depth`, without correction.
pub fn lead_lag_expected_signature(price_paths: &[PiecewiseLinearPath], depth: usize) -> Result<TensorSeries> {
    let sigs: Vec<TensorSeries> = price_paths
        .par_iter()
        .map(|p| signature(&lead_lag_add_time(p)?, depth))
        .collect::<Result<_>>()?;
    let mut mean = TensorSeries::zeros(LEAD_LAG_DIM, depth)?;
    for s in &sigs {
        for (m, v) in mean.coeffs_mut().iter_mut().zip(s.coeffs()) {
            *m += v;
        }
    }
    let n = sigs.len() as f64;
    for m in mean.coeffs_mut() {
        *m /= n;
    }
    Ok(mean)
}
