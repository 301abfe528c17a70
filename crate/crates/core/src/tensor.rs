//! Dense truncated tensor series and linear functionals on them.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::words::{Word, WordLayout};

/// Element of the truncated tensor algebra `T^K(R^d)`, stored densely in
/// [`WordLayout`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeries {
    layout: WordLayout,
    coeffs: Vec<f64>,
}

impl TensorSeries {
    pub fn zeros(dim: usize, depth: usize) -> Result<Self> {
        let layout = WordLayout::new(dim, depth)?;
        let coeffs = vec![0.0; layout.len()];
        Ok(Self { layout, coeffs })
    }

    /// The multiplicative unit `(1, 0, 0, ...)`.
    pub fn unit(dim: usize, depth: usize) -> Result<Self> {
        let mut s = Self::zeros(dim, depth)?;
        s.coeffs[0] = 1.0;
        Ok(s)
    }

    pub fn from_coeffs(dim: usize, depth: usize, coeffs: Vec<f64>) -> Result<Self> {
        let layout = WordLayout::new(dim, depth)?;
        if coeffs.len() != layout.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients for d={dim}, K={depth}, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite tensor coefficient".into()));
        }
        Ok(Self { layout, coeffs })
    }

    /// Tensor exponential of a level-1 vector: level `k` is `x^{⊗k} / k!`.
    pub fn exp(x: &[f64], depth: usize) -> Result<Self> {
        let mut s = Self::unit(x.len(), depth)?;
        let mut scratch = ExpScratch::new(x.len(), depth);
        s.mul_exp_in_place(x, &mut scratch);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn depth(&self) -> usize {
        self.layout.depth()
    }

    pub fn layout(&self) -> &WordLayout {
        &self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let start = self.layout.level_offset(k);
        &self.coeffs[start..start + self.layout.level_size(k)]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let start = self.layout.level_offset(k);
        let len = self.layout.level_size(k);
        &mut self.coeffs[start..start + len]
    }

    pub fn get(&self, word: &Word) -> Result<f64> {
        Ok(self.coeffs[self.layout.index(word)?])
    }

    pub fn set(&mut self, word: &Word, value: f64) -> Result<()> {
        let idx = self.layout.index(word)?;
        self.coeffs[idx] = value;
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &TensorSeries) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_same_shape(&self, other: &TensorSeries) -> Result<()> {
        if self.dim() != other.dim() || self.depth() != other.depth() {
            return Err(Error::ShapeMismatch {
                expected_dim: self.dim(),
                expected_depth: self.depth(),
                dim: other.dim(),
                depth: other.depth(),
            });
        }
        Ok(())
    }

    /// Truncated tensor product: level `k` of the result is
    /// `Σ_{i+j=k} A_i ⊗ B_j`.
    pub fn tensor_product(&self, other: &TensorSeries) -> Result<TensorSeries> {
        self.check_same_shape(other)?;
        let mut out = TensorSeries::zeros(self.dim(), self.depth())?;
        for k in 0..=self.depth() {
            for i in 0..=k {
                let a = self.level(i);
                let b = other.level(k - i);
                let block = b.len();
                let dst = out.level_mut(k);
                for (ia, &va) in a.iter().enumerate() {
                    if va == 0.0 {
                        continue;
                    }
                    let row = &mut dst[ia * block..(ia + 1) * block];
                    for (d, &vb) in row.iter_mut().zip(b) {
                        *d += va * vb;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Right-multiplies in place by `exp(x)`.
    ///
    /// Horner form, highest level first: level `k` becomes
    /// `((…((A_0 x/k + A_1) x/(k-1) + A_2) …) + A_{k-1}) x/1 + A_k`, which only
    /// reads levels below `k`.
    pub fn mul_exp_in_place(&mut self, x: &[f64], scratch: &mut ExpScratch) {
        let dim = self.dim();
        debug_assert_eq!(x.len(), dim);
        scratch.ensure(dim, self.depth());
        let ExpScratch { a: cur, b: next } = scratch;
        for k in (1..=self.depth()).rev() {
            let a0 = self.coeffs[0];
            let scale = 1.0 / k as f64;
            let mut len = dim;
            for (c, &xi) in cur[..dim].iter_mut().zip(x) {
                *c = a0 * xi * scale;
            }
            for j in 1..k {
                let scale = 1.0 / (k - j) as f64;
                let aj = self.level(j);
                for (ia, (&c, &av)) in cur[..len].iter().zip(aj).enumerate() {
                    let v = (c + av) * scale;
                    let row = &mut next[ia * dim..(ia + 1) * dim];
                    for (r, &xi) in row.iter_mut().zip(x) {
                        *r = v * xi;
                    }
                }
                len *= dim;
                std::mem::swap(cur, next);
            }
            for (t, &c) in self.level_mut(k).iter_mut().zip(cur[..len].iter()) {
                *t += c;
            }
        }
    }
}

/// Reusable buffers for [`TensorSeries::mul_exp_in_place`].
#[derive(Debug, Default, Clone)]
pub struct ExpScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ExpScratch {
    pub fn new(dim: usize, depth: usize) -> Self {
        let mut s = Self::default();
        s.ensure(dim, depth);
        s
    }

    fn ensure(&mut self, dim: usize, depth: usize) {
        let need = dim.pow(depth.max(1) as u32);
        if self.a.len() < need {
            self.a.resize(need, 0.0);
            self.b.resize(need, 0.0);
        }
    }
}

/// Sparse linear functional on `T^K(R^d)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Functional {
    dim: usize,
    depth: usize,
    #[serde(serialize_with = "serialize_terms")]
    terms: BTreeMap<Word, f64>,
}

fn serialize_terms<S: serde::Serializer>(
    terms: &BTreeMap<Word, f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = serializer.serialize_map(Some(terms.len()))?;
    for (w, c) in terms {
        map.serialize_entry(&w.to_string(), c)?;
    }
    map.end()
}

impl Functional {
    pub fn new(dim: usize, depth: usize) -> Self {
        Self {
            dim,
            depth,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        dim: usize,
        depth: usize,
        terms: impl IntoIterator<Item = (Word, f64)>,
    ) -> Result<Self> {
        let mut f = Self::new(dim, depth);
        for (w, c) in terms {
            f.add(w, c)?;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Adds `coeff` to the coefficient of `word`; zero results are dropped.
    pub fn add(&mut self, word: Word, coeff: f64) -> Result<()> {
        if word.dim() != self.dim {
            return Err(Error::AlphabetMismatch {
                left: self.dim,
                right: word.dim(),
            });
        }
        if word.len() > self.depth {
            return Err(Error::WordTooLong {
                word: word.to_string(),
                depth: self.depth,
            });
        }
        let entry = self.terms.entry(word.clone()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&word);
        }
        Ok(())
    }

    pub fn coeff(&self, word: &Word) -> f64 {
        self.terms.get(word).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, f64)> {
        self.terms.iter().map(|(w, &c)| (w, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `⟨f, S⟩ = Σ_w f(w) S(w)`.
    pub fn pair(&self, series: &TensorSeries) -> Result<f64> {
        if series.dim() != self.dim {
            return Err(Error::AlphabetMismatch {
                left: self.dim,
                right: series.dim(),
            });
        }
        self.terms
            .iter()
            .map(|(w, &c)| Ok(c * series.get(w)?))
            .sum()
    }
}
