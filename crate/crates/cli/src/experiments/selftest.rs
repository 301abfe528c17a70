//! Randomised algebraic identities of the signature on piecewise-linear paths.

use esig_core::{shuffle, signature, signature_causal, Partition, PathSeed, PiecewiseLinearPath, Result, TensorSeries, Word};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SelftestSection;
use crate::output::{num, Report, Table};

pub const IDENTITIES: [&str; 5] = ["chen", "shuffle", "reversal", "refinement", "causal"];

#[derive(Clone, Debug, Serialize)]
pub struct IdentityResult {
    pub identity: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub tolerance: f64,
    pub identities: Vec<IdentityResult>,
    #[serde(skip)]
    pub per_case: Vec<[f64; 5]>,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.identities.iter().all(|r| r.pass)
    }
}

struct Case {
    path: PiecewiseLinearPath,
    depth: usize,
    rng: rand_chacha::ChaCha8Rng,
}

fn random_case(s: &SelftestSection, seed: PathSeed) -> Result<Case> {
    let mut rng = seed.rng();
    let dim = rng.random_range(1..=s.max_dim);
    let depth = rng.random_range(1..=s.max_depth);
    let vertices = rng.random_range(3..=s.max_vertices);
    let mut times = vec![0.0];
    for _ in 1..vertices {
        let last = *times.last().expect("non-empty");
        times.push(last + rng.random_range(0.1..1.0));
    }
    // unit-order total variation keeps deviations on an absolute scale
    let scale = 1.0 / (vertices as f64).sqrt();
    let mut samples = vec![0.0; dim];
    for m in 1..vertices {
        for i in 0..dim {
            let prev = samples[(m - 1) * dim + i];
            samples.push(prev + scale * rng.sample::<f64, _>(StandardNormal));
        }
    }
    let path = PiecewiseLinearPath::new(Partition::new(times)?, dim, samples)?;
    Ok(Case { path, depth, rng })
}

fn chen(c: &mut Case) -> Result<f64> {
    let split = c.rng.random_range(1..c.path.num_vertices() - 1);
    let left = signature(&c.path.slice(0, split)?, c.depth)?;
    let right = signature(&c.path.slice(split, c.path.num_vertices() - 1)?, c.depth)?;
    Ok(signature(&c.path, c.depth)?.max_abs_diff(&left.tensor_product(&right)?))
}

fn random_word(rng: &mut impl Rng, dim: usize, len: usize) -> Result<Word> {
    Word::new((0..len).map(|_| rng.random_range(1..=dim)).collect::<Vec<usize>>(), dim)
}

fn shuffle_identity(c: &mut Case) -> Result<f64> {
    let depth = c.depth.max(2);
    let dim = c.path.dim();
    let la = c.rng.random_range(1..depth);
    let lb = c.rng.random_range(1..=depth - la);
    let a = random_word(&mut c.rng, dim, la)?;
    let b = random_word(&mut c.rng, dim, lb)?;
    let sig = signature(&c.path, la + lb)?;
    let mut rhs = 0.0;
    for (w, coeff) in shuffle(&a, &b)?.terms() {
        rhs += coeff as f64 * sig.get(w)?;
    }
    Ok((sig.get(&a)? * sig.get(&b)? - rhs).abs())
}

fn reversal(c: &mut Case) -> Result<f64> {
    let fwd = signature(&c.path, c.depth)?;
    let back = signature(&c.path.reverse(), c.depth)?;
    Ok(fwd
        .tensor_product(&back)?
        .max_abs_diff(&TensorSeries::unit(c.path.dim(), c.depth)?))
}

/// Inserts collinear points at random fractions of random segments.
fn refinement(c: &mut Case) -> Result<f64> {
    let p = &c.path;
    let dim = p.dim();
    let mut times = vec![p.times()[0]];
    let mut samples = p.vertex(0).to_vec();
    for m in 1..p.num_vertices() {
        let (t0, t1) = (p.times()[m - 1], p.times()[m]);
        for _ in 0..c.rng.random_range(0..3) {
            let last = *times.last().expect("non-empty");
            let u: f64 = c.rng.random_range(0.05..0.95);
            let t = last + u * (t1 - last);
            let frac = (t - t0) / (t1 - t0);
            times.push(t);
            for i in 0..dim {
                let (a, b) = (p.vertex(m - 1)[i], p.vertex(m)[i]);
                samples.push(a + frac * (b - a));
            }
        }
        times.push(t1);
        samples.extend_from_slice(p.vertex(m));
    }
    let refined = PiecewiseLinearPath::new(Partition::new(times)?, dim, samples)?;
    Ok(signature(p, c.depth)?.max_abs_diff(&signature(&refined, c.depth)?))
}

fn causal(c: &mut Case) -> Result<f64> {
    Ok(signature(&c.path, c.depth)?.max_abs_diff(&signature_causal(&c.path, c.depth)?))
}

pub fn run(seed: u64, s: &SelftestSection) -> Result<SelftestReport> {
    let per_case: Vec<[f64; 5]> = (0..s.cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = random_case(s, PathSeed::new(seed, i))?;
            Ok([
                chen(&mut c)?,
                shuffle_identity(&mut c)?,
                reversal(&mut c)?,
                refinement(&mut c)?,
                causal(&mut c)?,
            ])
        })
        .collect::<Result<_>>()?;
    let identities = IDENTITIES
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let max = per_case.iter().map(|r| r[k]).fold(0.0, f64::max);
            IdentityResult {
                identity: name,
                cases: per_case.len(),
                max_deviation: max,
                pass: max < s.tolerance,
            }
        })
        .collect();
    Ok(SelftestReport {
        tolerance: s.tolerance,
        identities,
        per_case,
    })
}

impl Report for SelftestReport {
    fn samples(&self) -> Table {
        let mut header = vec!["case"];
        header.extend(IDENTITIES);
        let mut t = Table::new(&header);
        for (i, row) in self.per_case.iter().enumerate() {
            let mut cells = vec![i.to_string()];
            cells.extend(row.iter().map(|&v| num(v)));
            t.push(cells);
        }
        t
    }
}
