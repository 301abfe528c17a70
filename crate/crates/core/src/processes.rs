//! Seeded simulators: Brownian motion, Gaussian processes (fBm), OU, CAR(2)
//! and Heston.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{Partition, PiecewiseLinearPath};

/// Jitter values tried in order before giving up on a Cholesky factor.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Identifies one independent random stream: a master seed plus a path index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }

    /// A different master seed for a derived experiment stage.
    pub fn derive(master: u64, stage: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(u64::MAX - stage);
        rng.random()
    }
}

/// Simulates `count` paths in parallel with streams `0..count`; output order
/// follows the stream index.
pub fn simulate_batch<F>(count: usize, master: u64, simulate: F) -> Result<Vec<PiecewiseLinearPath>>
where
    F: Fn(PathSeed) -> Result<PiecewiseLinearPath> + Sync,
{
    (0..count as u64)
        .into_par_iter()
        .map(|i| simulate(PathSeed::new(master, i)))
        .collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard `dim`-dimensional Brownian motion started at 0.
pub fn simulate_bm(dim: usize, partition: &Partition, seed: PathSeed) -> Result<PiecewiseLinearPath> {
    let mut rng = seed.rng();
    let mut samples = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    for w in partition.times().windows(2) {
        let sd = (w[1] - w[0]).sqrt();
        for xi in x.iter_mut() {
            *xi += sd * normal(&mut rng);
        }
        samples.extend_from_slice(&x);
    }
    PiecewiseLinearPath::new(partition.clone(), dim, samples)
}

/// Lower Cholesky factor of a symmetric matrix, escalating through
/// [`JITTER_LADDER`].
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    for &jitter in &JITTER_LADDER {
        let candidate = &sym + DMatrix::identity(n, n) * jitter;
        if let Some(c) = candidate.cholesky() {
            return Ok(c.l());
        }
    }
    Err(Error::NotPositiveDefinite {
        jitter: *JITTER_LADDER.last().unwrap(),
    })
}

/// Exact sampler for a scalar Gaussian process on a fixed grid; each of the
/// `dim` output coordinates is an independent copy.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    partition: Partition,
    mean: Vec<f64>,
    /// Grid points with random values (those with zero variance are pinned
    /// to the mean).
    free: Vec<usize>,
    chol: Option<DMatrix<f64>>,
}

impl GaussianSampler {
    pub fn new(
        cov: impl Fn(f64, f64) -> f64,
        mean: impl Fn(f64) -> f64,
        partition: &Partition,
    ) -> Result<Self> {
        let times = partition.times();
        let free: Vec<usize> = (0..times.len()).filter(|&i| cov(times[i], times[i]) != 0.0).collect();
        let chol = if free.is_empty() {
            None
        } else {
            let gram = DMatrix::from_fn(free.len(), free.len(), |a, b| {
                cov(times[free[a]], times[free[b]])
            });
            Some(cholesky_with_jitter(&gram)?)
        };
        Ok(Self {
            partition: partition.clone(),
            mean: times.iter().map(|&t| mean(t)).collect(),
            free,
            chol,
        })
    }

    pub fn sample(&self, dim: usize, seed: PathSeed) -> Result<PiecewiseLinearPath> {
        let mut rng = seed.rng();
        let n = self.mean.len();
        let mut samples = vec![0.0; n * dim];
        for (m, &mu) in self.mean.iter().enumerate() {
            for i in 0..dim {
                samples[m * dim + i] = mu;
            }
        }
        if let Some(l) = &self.chol {
            let k = self.free.len();
            for i in 0..dim {
                let z = DVector::from_fn(k, |_, _| normal(&mut rng));
                let x = l * z;
                for (a, &m) in self.free.iter().enumerate() {
                    samples[m * dim + i] += x[a];
                }
            }
        }
        PiecewiseLinearPath::new(self.partition.clone(), dim, samples)
    }
}

/// One-shot Gaussian process sample; build a [`GaussianSampler`] to reuse the
/// factorisation across paths.
pub fn simulate_gaussian(
    cov: impl Fn(f64, f64) -> f64,
    mean: impl Fn(f64) -> f64,
    dim: usize,
    partition: &Partition,
    seed: PathSeed,
) -> Result<PiecewiseLinearPath> {
    GaussianSampler::new(cov, mean, partition)?.sample(dim, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbmParams {
    pub hurst: f64,
}

impl FbmParams {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::InvalidParameter(format!("Hurst exponent {hurst} not in (0,1)")));
        }
        Ok(Self { hurst })
    }

    /// `½(|s|^{2H} + |t|^{2H} − |t−s|^{2H})`
    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        let h2 = 2.0 * self.hurst;
        0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
    }

    pub fn sampler(&self, partition: &Partition) -> Result<GaussianSampler> {
        let p = *self;
        GaussianSampler::new(move |s, t| p.covariance(s, t), |_| 0.0, partition)
    }
}

pub fn simulate_fbm(
    params: FbmParams,
    dim: usize,
    partition: &Partition,
    seed: PathSeed,
) -> Result<PiecewiseLinearPath> {
    params.sampler(partition)?.sample(dim, seed)
}

/// Stationary OU process `dX = −A X dt + dM` with stationary covariance `Σ`,
/// so that `Cov(X_s, X_t) = e^{−A|t−s|} Σ` for `t ≥ s`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuParams {
    pub a: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

impl OuParams {
    pub fn new(a: DMatrix<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || sigma.nrows() != d || sigma.ncols() != d || d == 0 {
            return Err(Error::InvalidParameter("A and Σ must be square of equal size".into()));
        }
        if (&sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
            return Err(Error::InvalidParameter("Σ is not symmetric".into()));
        }
        if a.complex_eigenvalues().iter().any(|l| l.re <= 0.0) {
            return Err(Error::InvalidParameter(
                "drift eigenvalues must have positive real part".into(),
            ));
        }
        Ok(Self { a, sigma })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Exact OU transitions precomputed for a partition.
#[derive(Clone, Debug)]
pub struct OuSampler {
    partition: Partition,
    start_chol: DMatrix<f64>,
    /// Per distinct step width: `e^{−Ah}` and the Cholesky factor of
    /// `Σ − e^{−Ah} Σ e^{−Aᵀh}`.
    transitions: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    step_kind: Vec<usize>,
}

impl OuSampler {
    pub fn new(params: &OuParams, partition: &Partition) -> Result<Self> {
        let start_chol = cholesky_with_jitter(&params.sigma)?;
        let mut transitions: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
        let mut widths: Vec<f64> = Vec::new();
        let mut step_kind = Vec::with_capacity(partition.num_steps());
        for w in partition.times().windows(2) {
            let h = w[1] - w[0];
            // uniform grids differ in the last bits; a short look-back keeps
            // irregular grids linear
            let reuse = widths
                .iter()
                .enumerate()
                .rev()
                .take(8)
                .find(|(_, &c)| (c - h).abs() <= 1e-12 * h)
                .map(|(i, _)| i);
            if let Some(idx) = reuse {
                step_kind.push(idx);
                continue;
            }
            let e = (-&params.a * h).exp();
            let q = &params.sigma - &e * &params.sigma * e.transpose();
            let l = cholesky_with_jitter(&q)?;
            step_kind.push(transitions.len());
            widths.push(h);
            transitions.push((e, l));
        }
        Ok(Self {
            partition: partition.clone(),
            start_chol,
            transitions,
            step_kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.start_chol.nrows()
    }

    /// Path started from the stationary law.
    pub fn sample(&self, seed: PathSeed) -> Result<PiecewiseLinearPath> {
        let mut rng = seed.rng();
        let d = self.dim();
        let mut x = &self.start_chol * DVector::from_fn(d, |_, _| normal(&mut rng));
        let mut samples = Vec::with_capacity(d * self.partition.times().len());
        samples.extend(x.iter());
        for (step, &kind) in self.step_kind.iter().enumerate() {
            let (e, l) = &self.transitions[kind];
            let z = DVector::from_fn(d, |_, _| normal(&mut rng));
            x = e * x + l * z;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SimulationDiverged { step });
            }
            samples.extend(x.iter());
        }
        PiecewiseLinearPath::new(self.partition.clone(), d, samples)
    }
}

pub fn simulate_ou(params: &OuParams, partition: &Partition, seed: PathSeed) -> Result<PiecewiseLinearPath> {
    OuSampler::new(params, partition)?.sample(seed)
}

/// Bivariate CAR(2) process `Y'' + A₁ Y' + A₂ Y = noise`, realised as the
/// first two coordinates of a 4-d OU state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Car2Params {
    pub a1: Matrix2<f64>,
    pub a2: Matrix2<f64>,
}

impl Car2Params {
    pub fn new(a1: Matrix2<f64>, a2: Matrix2<f64>) -> Self {
        Self { a1, a2 }
    }

    /// `[[0, −I], [A₂, A₁]]`
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(4, 4);
        for i in 0..2 {
            m[(i, i + 2)] = -1.0;
            for j in 0..2 {
                m[(i + 2, j)] = self.a2[(i, j)];
                m[(i + 2, j + 2)] = self.a1[(i, j)];
            }
        }
        m
    }

    /// Noise enters the velocity block only.
    pub fn diffusion(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]))
    }

    /// Stationary state covariance `P` solving `A P + P Aᵀ = Σ`.
    pub fn stationary_covariance(&self) -> Result<DMatrix<f64>> {
        solve_lyapunov(&self.state_matrix(), &self.diffusion())
    }

    pub fn ou_params(&self) -> Result<OuParams> {
        let a = self.state_matrix();
        let p = self.stationary_covariance()?;
        OuParams::new(a, (&p + p.transpose()) * 0.5)
    }
}

/// Solves `A P + P Aᵀ = Q` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_column_slice(q.as_slice());
    let vec_p = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov system".into()))?;
    Ok(DMatrix::from_column_slice(n, n, vec_p.as_slice()))
}

/// Sampler for the observed CAR(2) coordinates.
#[derive(Clone, Debug)]
pub struct Car2Sampler {
    state: OuSampler,
}

impl Car2Sampler {
    pub fn new(params: &Car2Params, partition: &Partition) -> Result<Self> {
        Ok(Self {
            state: OuSampler::new(&params.ou_params()?, partition)?,
        })
    }

    pub fn sample_state(&self, seed: PathSeed) -> Result<PiecewiseLinearPath> {
        self.state.sample(seed)
    }

    pub fn sample(&self, seed: PathSeed) -> Result<PiecewiseLinearPath> {
        self.sample_state(seed)?.project(&[0, 1])
    }
}

pub fn simulate_car2(params: &Car2Params, partition: &Partition, seed: PathSeed) -> Result<PiecewiseLinearPath> {
    Car2Sampler::new(params, partition)?.sample(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub s0: f64,
    pub v0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
}

pub const DEFAULT_HESTON_SUBSTEPS: usize = 16;

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s0", self.s0),
            ("v0", self.v0),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("xi", self.xi),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho {} not in (-1,1)", self.rho)));
        }
        Ok(())
    }

    pub fn feller(&self) -> bool {
        2.0 * self.kappa * self.theta > self.xi * self.xi
    }

    /// `E[V_t] = θ + (v₀ − θ) e^{−κt}`
    pub fn mean_variance(&self, t: f64) -> f64 {
        self.theta + (self.v0 - self.theta) * (-self.kappa * t).exp()
    }
}

/// Heston price and variance `(S, V)`, simulated on a grid `substeps` times
/// finer than `partition`. Variance: full-truncation Euler. Price: Euler on
/// `log S`, which keeps `S > 0` and `S` a martingale.
pub fn simulate_heston(
    params: &HestonParams,
    partition: &Partition,
    seed: PathSeed,
    substeps: usize,
) -> Result<PiecewiseLinearPath> {
    params.validate()?;
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be at least 1".into()));
    }
    let mut rng = seed.rng();
    let rho_perp = (1.0 - params.rho * params.rho).sqrt();
    let mut log_s = params.s0.ln();
    let mut v = params.v0;
    let mut samples = Vec::with_capacity(2 * partition.times().len());
    samples.extend([params.s0, v]);
    let mut step = 0;
    for w in partition.times().windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        let sqrt_h = h.sqrt();
        for _ in 0..substeps {
            let z_s = normal(&mut rng);
            let z_v = params.rho * z_s + rho_perp * normal(&mut rng);
            let vp = v.max(0.0);
            let sqrt_v = vp.sqrt();
            log_s += -0.5 * vp * h + sqrt_v * sqrt_h * z_s;
            v += params.kappa * (params.theta - vp) * h + params.xi * sqrt_v * sqrt_h * z_v;
            if !log_s.is_finite() || !v.is_finite() {
                return Err(Error::SimulationDiverged { step });
            }
            step += 1;
        }
        samples.extend([log_s.exp(), v]);
    }
    PiecewiseLinearPath::new(partition.clone(), 2, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    /// Asserts the sample variance is within 3 standard errors of `target`
    /// (Gaussian data: SE of the variance is `σ²√(2/(n−1))`).
    fn assert_variance(xs: &[f64], target: f64) {
        let (_, v) = mean_var(xs);
        let se = target * (2.0 / (xs.len() as f64 - 1.0)).sqrt();
        assert!((v - target).abs() < 3.0 * se, "variance {v} vs {target} (se {se})");
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let part = Partition::dyadic(1.0, 4).unwrap();
        let a = simulate_bm(2, &part, PathSeed::new(7, 3)).unwrap();
        let b = simulate_bm(2, &part, PathSeed::new(7, 3)).unwrap();
        let c = simulate_bm(2, &part, PathSeed::new(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.vertex(0), &[0.0, 0.0]);
    }

    #[test]
    fn batch_matches_serial_order() {
        let part = Partition::dyadic(1.0, 3).unwrap();
        let batch = simulate_batch(8, 11, |s| simulate_bm(1, &part, s)).unwrap();
        for (i, p) in batch.iter().enumerate() {
            assert_eq!(p, &simulate_bm(1, &part, PathSeed::new(11, i as u64)).unwrap());
        }
    }

    #[test]
    fn bm_terminal_variance_and_uncorrelated_steps() {
        let part = Partition::uniform(2.0, 4).unwrap();
        let n = 20_000;
        let paths = simulate_batch(n, 1, |s| simulate_bm(1, &part, s)).unwrap();
        let xt: Vec<f64> = paths.iter().map(|p| p.vertex(4)[0]).collect();
        assert_variance(&xt, 2.0);
        let prod: Vec<f64> = paths
            .iter()
            .map(|p| (p.vertex(1)[0] - p.vertex(0)[0]) * (p.vertex(3)[0] - p.vertex(2)[0]))
            .collect();
        let (m, v) = mean_var(&prod);
        assert!(m.abs() < 3.0 * (v / n as f64).sqrt());
    }

    #[test]
    fn zero_covariance_gives_mean_path() {
        let part = Partition::uniform(1.0, 4).unwrap();
        let p = simulate_gaussian(|_, _| 0.0, |t| 2.0 * t, 1, &part, PathSeed::new(0, 0)).unwrap();
        assert_eq!(p.samples(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn gaussian_engine_reproduces_bm_moments() {
        let part = Partition::uniform(1.0, 8).unwrap();
        let sampler = GaussianSampler::new(|s: f64, t: f64| s.min(t), |_| 0.0, &part).unwrap();
        let n = 10_000;
        let paths: Vec<_> = (0..n).map(|i| sampler.sample(1, PathSeed::new(5, i)).unwrap()).collect();
        assert!(paths.iter().all(|p| p.vertex(0)[0] == 0.0));
        let xt: Vec<f64> = paths.iter().map(|p| p.vertex(8)[0]).collect();
        assert_variance(&xt, 1.0);
        let mid: Vec<f64> = paths.iter().map(|p| p.vertex(4)[0]).collect();
        assert_variance(&mid, 0.5);
    }

    #[test]
    fn fbm_variance_scaling_and_positive_increment_correlation() {
        let params = FbmParams::new(0.75).unwrap();
        let part = Partition::uniform(1.0, 4).unwrap();
        let sampler = params.sampler(&part).unwrap();
        let n = 10_000;
        let paths: Vec<_> = (0..n).map(|i| sampler.sample(1, PathSeed::new(9, i)).unwrap()).collect();
        let x1: Vec<f64> = paths.iter().map(|p| p.vertex(4)[0]).collect();
        assert_variance(&x1, 1.0);
        let xh: Vec<f64> = paths.iter().map(|p| p.vertex(2)[0]).collect();
        assert_variance(&xh, 0.5f64.powf(1.5));
        let corr: Vec<f64> = paths
            .iter()
            .map(|p| p.vertex(2)[0] * (p.vertex(4)[0] - p.vertex(2)[0]))
            .collect();
        let (m, v) = mean_var(&corr);
        assert!(m > 3.0 * (v / n as f64).sqrt());
    }

    #[test]
    fn fbm_half_is_bm_covariance() {
        let p = FbmParams::new(0.5).unwrap();
        for (s, t) in [(0.2, 0.7), (1.0, 0.3), (0.5, 0.5)] {
            assert!((p.covariance(s, t) - f64::min(s, t)).abs() < 1e-15);
        }
        assert!(FbmParams::new(1.0).is_err());
    }

    fn ou_example() -> OuParams {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 2.0]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8]);
        OuParams::new(a, sigma).unwrap()
    }

    #[test]
    fn ou_marginal_and_lag_covariance() {
        let params = ou_example();
        let part = Partition::uniform(1.0, 4).unwrap();
        let sampler = OuSampler::new(&params, &part).unwrap();
        let n = 20_000;
        let paths: Vec<_> = (0..n).map(|i| sampler.sample(PathSeed::new(3, i)).unwrap()).collect();
        for m in [0, 4] {
            let x: Vec<f64> = paths.iter().map(|p| p.vertex(m)[0]).collect();
            assert_variance(&x, 1.0);
            let y: Vec<f64> = paths.iter().map(|p| p.vertex(m)[1]).collect();
            assert_variance(&y, 0.8);
        }
        // Cov(X_1, X_0) = e^{−A} Σ
        let expected = (-&params.a).exp() * &params.sigma;
        for i in 0..2 {
            for j in 0..2 {
                let prods: Vec<f64> = paths.iter().map(|p| p.vertex(4)[i] * p.vertex(0)[j]).collect();
                let (m, v) = mean_var(&prods);
                let se = (v / n as f64).sqrt();
                assert!((m - expected[(i, j)]).abs() < 3.5 * se, "({i},{j}): {m} vs {}", expected[(i, j)]);
            }
        }
    }

    #[test]
    fn ou_fast_reversion_decorrelates() {
        let a = DMatrix::from_row_slice(1, 1, &[50.0]);
        let params = OuParams::new(a, DMatrix::from_element(1, 1, 1.0)).unwrap();
        let part = Partition::uniform(0.2, 1).unwrap();
        let sampler = OuSampler::new(&params, &part).unwrap();
        let n = 20_000;
        let prods: Vec<f64> = (0..n)
            .map(|i| {
                let p = sampler.sample(PathSeed::new(4, i)).unwrap();
                p.vertex(0)[0] * p.vertex(1)[0]
            })
            .collect();
        assert!(mean_var(&prods).0.abs() < 0.05);
    }

    #[test]
    fn ou_rejects_unstable_drift() {
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert!(OuParams::new(a, DMatrix::from_element(1, 1, 1.0)).is_err());
    }

    fn car_example() -> Car2Params {
        Car2Params::new(Matrix2::identity() * 3.0, Matrix2::identity() * 2.0)
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let params = car_example();
        let a = params.state_matrix();
        let p = params.stationary_covariance().unwrap();
        let resid = &a * &p + &p * a.transpose() - params.diffusion();
        assert!(resid.amax() < 1e-12);
    }

    #[test]
    fn car2_projection_and_stationary_state_covariance() {
        let params = car_example();
        let part = Partition::uniform(1.0, 2).unwrap();
        let sampler = Car2Sampler::new(&params, &part).unwrap();
        assert_eq!(sampler.sample(PathSeed::new(1, 0)).unwrap().dim(), 2);
        assert_eq!(
            sampler.sample(PathSeed::new(1, 0)).unwrap(),
            simulate_car2(&params, &part, PathSeed::new(1, 0)).unwrap()
        );
        let p = params.stationary_covariance().unwrap();
        let n = 20_000;
        let states: Vec<_> = (0..n).map(|i| sampler.sample_state(PathSeed::new(2, i)).unwrap()).collect();
        for i in 0..4 {
            let x: Vec<f64> = states.iter().map(|s| s.vertex(2)[i]).collect();
            assert_variance(&x, p[(i, i)]);
        }
    }

    fn fig3() -> HestonParams {
        HestonParams {
            s0: 1.0,
            v0: 0.1,
            kappa: 0.6,
            theta: 0.1,
            xi: 0.2,
            rho: -0.15,
        }
    }

    #[test]
    fn heston_vanishing_vol_of_vol_follows_mean_ode() {
        let params = HestonParams {
            v0: 0.2,
            xi: 1e-12,
            ..fig3()
        };
        let part = Partition::dyadic(1.0, 8).unwrap();
        let p = simulate_heston(&params, &part, PathSeed::new(0, 0), 64).unwrap();
        let err = part
            .times()
            .iter()
            .enumerate()
            .map(|(m, &t)| (p.vertex(m)[1] - params.mean_variance(t)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn heston_mean_variance_martingale_price_and_positivity() {
        let params = fig3();
        assert!(params.feller());
        let part = Partition::uniform(1.0, 4).unwrap();
        let n = 10_000;
        let paths = simulate_batch(n, 17, |s| simulate_heston(&params, &part, s, DEFAULT_HESTON_SUBSTEPS)).unwrap();
        for p in &paths {
            for m in 0..p.num_vertices() {
                assert!(p.vertex(m)[0] > 0.0 && p.vertex(m)[1] >= 0.0);
            }
        }
        for (m, &t) in part.times().iter().enumerate().skip(1) {
            let v: Vec<f64> = paths.iter().map(|p| p.vertex(m)[1]).collect();
            let (mean, var) = mean_var(&v);
            let se = (var / n as f64).sqrt();
            assert!((mean - params.mean_variance(t)).abs() < 3.0 * se);
        }
        let s: Vec<f64> = paths.iter().map(|p| p.vertex(4)[0]).collect();
        let (mean, var) = mean_var(&s);
        assert!((mean - 1.0).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn heston_validation() {
        let bad = HestonParams { rho: 1.0, ..fig3() };
        assert!(bad.validate().is_err());
        let part = Partition::uniform(1.0, 1).unwrap();
        assert!(simulate_heston(&fig3(), &part, PathSeed::new(0, 0), 0).is_err());
    }
}
