//! Truncated signatures of piecewise-linear paths and the martingale control term.

use crate::error::{Error, Result};
use crate::path::PiecewiseLinearPath;
use crate::tensor::{ExpScratch, TensorSeries};
use crate::words::{Word, WordLayout};

pub const DEFAULT_DEPTH: usize = 4;

fn check_word(path: &PiecewiseLinearPath, word: &Word) -> Result<()> {
    if word.dim() != path.dim() {
        return Err(Error::AlphabetMismatch {
            left: path.dim(),
            right: word.dim(),
        });
    }
    Ok(())
}

/// Chen product of the step exponentials, left to right.
pub fn signature(path: &PiecewiseLinearPath, depth: usize) -> Result<TensorSeries> {
    let mut sig = TensorSeries::unit(path.dim(), depth)?;
    let mut scratch = ExpScratch::new(path.dim(), depth);
    let mut dx = vec![0.0; path.dim()];
    for m in 0..path.num_steps() {
        path.increment_into(m, &mut dx);
        sig.mul_exp_in_place(&dx, &mut scratch);
    }
    Ok(sig)
}

/// Signatures of every prefix; entry `m` covers the first `m` steps.
pub fn prefix_signatures(path: &PiecewiseLinearPath, depth: usize) -> Result<Vec<TensorSeries>> {
    let mut sig = TensorSeries::unit(path.dim(), depth)?;
    let mut scratch = ExpScratch::new(path.dim(), depth);
    let mut dx = vec![0.0; path.dim()];
    let mut out = Vec::with_capacity(path.num_vertices());
    out.push(sig.clone());
    for m in 0..path.num_steps() {
        path.increment_into(m, &mut dx);
        sig.mul_exp_in_place(&dx, &mut scratch);
        out.push(sig.clone());
    }
    Ok(out)
}

/// Running coefficients `S^{i_1..i_j}` for all prefixes of one word.
struct WordRecursion<'a> {
    letters: &'a [usize],
    s: Vec<f64>,
    inv_fact: Vec<f64>,
}

impl<'a> WordRecursion<'a> {
    fn new(letters: &'a [usize]) -> Self {
        let k = letters.len();
        let mut s = vec![0.0; k + 1];
        s[0] = 1.0;
        let mut inv_fact = vec![1.0; k + 1];
        for n in 1..=k {
            inv_fact[n] = inv_fact[n - 1] / n as f64;
        }
        Self {
            letters,
            s,
            inv_fact,
        }
    }

    fn step(&mut self, dx: &[f64]) {
        for j in (1..self.s.len()).rev() {
            let mut acc = self.s[j];
            let mut prod = 1.0;
            for m in (0..j).rev() {
                prod *= dx[self.letters[m] - 1];
                acc += self.s[m] * prod * self.inv_fact[j - m];
            }
            self.s[j] = acc;
        }
    }

    fn value(&self) -> f64 {
        self.s[self.letters.len()]
    }
}

/// Single coefficient `S^I` over the whole path, without building the full
/// tensor series.
pub fn sig_word(path: &PiecewiseLinearPath, word: &Word) -> Result<f64> {
    check_word(path, word)?;
    let mut rec = WordRecursion::new(word.letters());
    let mut dx = vec![0.0; path.dim()];
    for m in 0..path.num_steps() {
        path.increment_into(m, &mut dx);
        rec.step(&dx);
    }
    Ok(rec.value())
}

/// `S_c^I = Σ_steps S^{I_{-1}}_{[0,u]} ΔX^{i_k}_{u,v}`.
pub fn control_term(path: &PiecewiseLinearPath, word: &Word) -> Result<f64> {
    check_word(path, word)?;
    let last = word.last().ok_or(Error::EmptyWord)?;
    let prefix = &word.letters()[..word.len() - 1];
    let mut rec = WordRecursion::new(prefix);
    let mut dx = vec![0.0; path.dim()];
    let mut total = 0.0;
    for m in 0..path.num_steps() {
        path.increment_into(m, &mut dx);
        total += rec.value() * dx[last - 1];
        rec.step(&dx);
    }
    Ok(total)
}

/// Independent level-by-level evaluation: at each step
/// `S^n_{[0,v]} = S^n_{[0,u]} + Σ_{i<n} S^{n-1-i}_{[0,u]} ⊗ Δ^{⊗(i+1)}/(i+1)!`.
/// Slow; kept as a cross-check for [`signature`].
pub fn signature_causal(path: &PiecewiseLinearPath, depth: usize) -> Result<TensorSeries> {
    let d = path.dim();
    let layout = WordLayout::new(d, depth)?;
    let mut levels: Vec<Vec<f64>> = (0..=depth).map(|k| vec![0.0; layout.level_size(k)]).collect();
    levels[0][0] = 1.0;
    let mut dx = vec![0.0; d];
    for m in 0..path.num_steps() {
        path.increment_into(m, &mut dx);
        // powers[j] = Δ^{⊗j} / j!
        let mut powers: Vec<Vec<f64>> = vec![vec![1.0]];
        for j in 1..=depth {
            let prev = &powers[j - 1];
            let mut next = Vec::with_capacity(prev.len() * d);
            for &p in prev {
                for &x in &dx {
                    next.push(p * x / j as f64);
                }
            }
            powers.push(next);
        }
        let old = levels.clone();
        for n in 1..=depth {
            for i in 0..n {
                let left = &old[n - 1 - i];
                let right = &powers[i + 1];
                for (a, &l) in left.iter().enumerate() {
                    for (b, &r) in right.iter().enumerate() {
                        levels[n][a * right.len() + b] += l * r;
                    }
                }
            }
        }
    }
    TensorSeries::from_coeffs(d, depth, levels.concat())
}

/// `S^I` and `S_c^I` for a batch of words from one streaming pass.
#[derive(Clone, Debug, PartialEq)]
pub struct WordFeatures {
    pub sig: Vec<f64>,
    pub control: Vec<f64>,
}

/// Evaluates `S^I` (and `S_c^I` when `with_control`) for every word in a
/// single sweep of the running signature. Control terms of empty words are 0.
pub fn word_features(
    path: &PiecewiseLinearPath,
    words: &[Word],
    with_control: bool,
) -> Result<WordFeatures> {
    for w in words {
        check_word(path, w)?;
    }
    let depth = words.iter().map(Word::len).max().unwrap_or(0);
    let layout = WordLayout::new(path.dim(), depth)?;
    let targets: Vec<usize> = words.iter().map(|w| layout.index(w)).collect::<Result<_>>()?;
    let controls: Vec<Option<(usize, usize)>> = words
        .iter()
        .map(|w| {
            Ok(match (w.last(), w.drop_last(1)) {
                (Some(last), Some(prefix)) if with_control => {
                    Some((layout.index(&prefix)?, last - 1))
                }
                _ => None,
            })
        })
        .collect::<Result<_>>()?;

    let mut sig = TensorSeries::unit(path.dim(), depth)?;
    let mut scratch = ExpScratch::new(path.dim(), depth);
    let mut dx = vec![0.0; path.dim()];
    let mut control = vec![0.0; words.len()];
    for m in 0..path.num_steps() {
        path.increment_into(m, &mut dx);
        for (c, spec) in control.iter_mut().zip(&controls) {
            if let Some((idx, coord)) = *spec {
                *c += sig.coeffs()[idx] * dx[coord];
            }
        }
        sig.mul_exp_in_place(&dx, &mut scratch);
    }
    Ok(WordFeatures {
        sig: targets.iter().map(|&i| sig.coeffs()[i]).collect(),
        control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Partition;
    use crate::words::shuffle;
    use proptest::prelude::*;

    fn w(letters: &[usize], dim: usize) -> Word {
        Word::new(letters.to_vec(), dim).unwrap()
    }

    fn l_path() -> PiecewiseLinearPath {
        let part = Partition::uniform(1.0, 2).unwrap();
        PiecewiseLinearPath::new(part, 2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn signature_examples() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 2.0]).unwrap();
        let s = signature(&p, 3).unwrap();
        for (a, b) in s.coeffs().iter().zip([1.0, 2.0, 2.0, 4.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, 3.0]).unwrap();
        let s = signature(&p, 2).unwrap();
        assert_eq!(s.get(&w(&[1], 1)).unwrap(), 3.0);
        assert_eq!(s.get(&w(&[1, 1], 1)).unwrap(), 4.5);

        let s = signature(&l_path(), 2).unwrap();
        assert_eq!(s.get(&w(&[1, 2], 2)).unwrap(), 1.0);
        assert_eq!(s.get(&w(&[2, 1], 2)).unwrap(), 0.0);
    }

    #[test]
    fn single_vertex_path_has_unit_signature() {
        let p = PiecewiseLinearPath::from_values_1d(&[1.5]).unwrap();
        assert_eq!(signature(&p, 3).unwrap(), TensorSeries::unit(1, 3).unwrap());
        assert_eq!(signature_causal(&p, 3).unwrap(), TensorSeries::unit(1, 3).unwrap());
    }

    #[test]
    fn sig_word_examples() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(sig_word(&p, &Word::empty(1)).unwrap(), 1.0);
        assert_eq!(sig_word(&p, &w(&[1, 1], 1)).unwrap(), 4.5);
        assert_eq!(sig_word(&l_path(), &w(&[2, 1], 2)).unwrap(), 0.0);
        assert!(sig_word(&p, &w(&[1], 2)).is_err());
    }

    #[test]
    fn control_term_examples() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.5, 1.0, 3.0, -1.0]).unwrap();
        assert_eq!(control_term(&p, &w(&[1], 1)).unwrap(), -1.5);
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(control_term(&p, &w(&[1, 1], 1)).unwrap(), 2.0);
        let flat = PiecewiseLinearPath::from_values_1d(&[2.0; 5]).unwrap();
        for word in [w(&[1], 1), w(&[1, 1], 1), w(&[1, 1, 1], 1)] {
            assert_eq!(control_term(&flat, &word).unwrap(), 0.0);
        }
        assert_eq!(control_term(&p, &Word::empty(1)), Err(Error::EmptyWord));
    }

    #[test]
    fn prefix_signature_examples() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, 3.0, 2.0]).unwrap();
        let prefixes = prefix_signatures(&p, 3).unwrap();
        assert_eq!(prefixes.len(), 4);
        assert_eq!(prefixes[0], TensorSeries::unit(1, 3).unwrap());
        assert_eq!(prefixes[1], TensorSeries::exp(&[1.0], 3).unwrap());
        assert!(prefixes[3].max_abs_diff(&signature(&p, 3).unwrap()) < 1e-14);
    }

    #[test]
    fn word_features_match_single_word_routes() {
        let part = Partition::uniform(1.0, 3).unwrap();
        let p = PiecewiseLinearPath::new(part, 2, vec![0.0, 0.0, 1.0, -0.5, 0.3, 2.0, -1.0, 1.0])
            .unwrap();
        let words = vec![Word::empty(2), w(&[2], 2), w(&[1, 2], 2), w(&[2, 2, 1], 2)];
        let feats = word_features(&p, &words, true).unwrap();
        for (i, word) in words.iter().enumerate() {
            assert!((feats.sig[i] - sig_word(&p, word).unwrap()).abs() < 1e-14);
            let expected = if word.is_empty() {
                0.0
            } else {
                control_term(&p, word).unwrap()
            };
            assert!((feats.control[i] - expected).abs() < 1e-14);
        }
    }

    fn path_strategy(max_dim: usize, max_steps: usize) -> impl Strategy<Value = PiecewiseLinearPath> {
        (1..=max_dim, 1..=max_steps).prop_flat_map(|(d, m)| {
            (
                prop::collection::vec(-1.0f64..1.0, d * (m + 1)),
                prop::collection::vec(0.1f64..1.0, m),
            )
                .prop_map(move |(vals, gaps)| {
                    let mut times = vec![0.0];
                    for g in gaps {
                        times.push(times.last().unwrap() + g);
                    }
                    PiecewiseLinearPath::new(Partition::new(times).unwrap(), d, vals).unwrap()
                })
        })
    }

    fn word_strategy(dim: usize, max_len: usize) -> impl Strategy<Value = Word> {
        prop::collection::vec(1..=dim, 0..=max_len).prop_map(move |l| Word::new(l, dim).unwrap())
    }

    proptest! {
        #[test]
        fn chen_identity(p in path_strategy(3, 12), depth in 0usize..=4, cut in 0usize..100) {
            prop_assume!(p.num_steps() >= 2);
            let s = 1 + cut % (p.num_steps() - 1);
            let left = signature(&p.slice(0, s).unwrap(), depth).unwrap();
            let right = signature(&p.slice(s, p.num_steps()).unwrap(), depth).unwrap();
            let whole = signature(&p, depth).unwrap();
            prop_assert!(left.tensor_product(&right).unwrap().max_abs_diff(&whole) < 1e-12);
        }

        #[test]
        fn causal_matches_chen(p in path_strategy(3, 12), depth in 0usize..=4) {
            let a = signature(&p, depth).unwrap();
            let b = signature_causal(&p, depth).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-10);
        }

        #[test]
        fn reversal_is_inverse(p in path_strategy(3, 10), depth in 0usize..=4) {
            let prod = signature(&p.reverse(), depth).unwrap()
                .tensor_product(&signature(&p, depth).unwrap()).unwrap();
            prop_assert!(prod.max_abs_diff(&TensorSeries::unit(p.dim(), depth).unwrap()) < 1e-10);
        }

        #[test]
        fn shuffle_identity(
            (p, a, b) in path_strategy(3, 10).prop_flat_map(|p| {
                let d = p.dim();
                (Just(p), word_strategy(d, 3), word_strategy(d, 2))
            })
        ) {
            let lhs = sig_word(&p, &a).unwrap() * sig_word(&p, &b).unwrap();
            let sig = signature(&p, a.len() + b.len()).unwrap();
            let rhs: f64 = shuffle(&a, &b).unwrap().terms()
                .map(|(k, c)| c as f64 * sig.get(k).unwrap()).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn retiming_and_collinear_refinement(p in path_strategy(3, 10), depth in 0usize..=4) {
            let base = signature(&p, depth).unwrap();
            let times: Vec<f64> = p.times().iter().map(|t| t * t + 3.0 * t).collect();
            let retimed = p.retime(Partition::new(times).unwrap()).unwrap();
            prop_assert!(signature(&retimed, depth).unwrap().max_abs_diff(&base) < 1e-12);

            // midpoint inserted on the first segment
            let d = p.dim();
            let mut times = vec![0.0, 0.5 * p.times()[1]];
            times.extend_from_slice(&p.times()[1..]);
            let mid: Vec<f64> = (0..d).map(|i| 0.5 * (p.vertex(0)[i] + p.vertex(1)[i])).collect();
            let mut samples = p.vertex(0).to_vec();
            samples.extend(mid);
            samples.extend_from_slice(&p.samples()[d..]);
            let refined = PiecewiseLinearPath::new(Partition::new(times).unwrap(), d, samples).unwrap();
            prop_assert!(signature(&refined, depth).unwrap().max_abs_diff(&base) < 1e-12);
        }

        #[test]
        fn one_dimensional_collapse(vals in prop::collection::vec(-1.0f64..1.0, 2..20), k in 1usize..=5) {
            let p = PiecewiseLinearPath::from_values_1d(&vals).unwrap();
            let x = vals.last().unwrap() - vals[0];
            let fact: f64 = (1..=k).map(|n| n as f64).product();
            let word = Word::new(vec![1; k], 1).unwrap();
            prop_assert!((sig_word(&p, &word).unwrap() - x.powi(k as i32) / fact).abs() < 1e-12);
        }

        #[test]
        fn sig_word_and_control_agree_with_full_signature(
            (p, word) in path_strategy(3, 12).prop_flat_map(|p| {
                let d = p.dim();
                (Just(p), word_strategy(d, 4))
            })
        ) {
            let sig = signature(&p, word.len()).unwrap();
            prop_assert!((sig_word(&p, &word).unwrap() - sig.get(&word).unwrap()).abs() < 1e-12);
            if let (Some(last), Some(prefix)) = (word.last(), word.drop_last(1)) {
                let prefixes = prefix_signatures(&p, prefix.len()).unwrap();
                let expected: f64 = p.increments().enumerate()
                    .map(|(m, dx)| prefixes[m].get(&prefix).unwrap() * dx[last - 1])
                    .sum();
                prop_assert!((control_term(&p, &word).unwrap() - expected).abs() < 1e-12);
            }
        }
    }
}
