//! Linear regression with mean-zero controls, and the RMSE simulation on the
//! fixed three-column design.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::PathSeed;
use crate::stats;

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_TOL: f64 = 1e-10;

fn solve_spd(gram: DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    gram.cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

fn check_rows(x: &DMatrix<f64>, y: &DVector<f64>, z: Option<&DMatrix<f64>>) -> Result<()> {
    if x.nrows() != y.len() || z.is_some_and(|z| z.nrows() != y.len()) {
        return Err(Error::InvalidParameter("row counts of X, y and Z differ".into()));
    }
    Ok(())
}

/// `(XᵀX)⁻¹Xᵀy`
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_rows(x, y, None)?;
    solve_spd(x.transpose() * x, &(x.transpose() * y), "XᵀX")
}

/// Coefficients plus whether the pseudo-inverse of `ZᵀZ` had to be used.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlledFit {
    pub beta: DVector<f64>,
    pub pinv_fallback: bool,
}

/// `(XᵀX)⁻¹Xᵀ(I − Z(ZᵀZ)⁻¹Zᵀ)y`
pub fn controlled_ols_sample(x: &DMatrix<f64>, y: &DVector<f64>, z: &DMatrix<f64>) -> Result<ControlledFit> {
    check_rows(x, y, Some(z))?;
    let ztz = z.transpose() * z;
    let zty = z.transpose() * y;
    let (coef, pinv_fallback) = match ztz.clone().cholesky() {
        Some(c) => (c.solve(&zty), false),
        None => {
            let largest = ztz.clone().singular_values().max();
            let pinv = ztz
                .pseudo_inverse(PINV_TOL * largest.max(f64::MIN_POSITIVE))
                .map_err(|e| Error::Singular(e.to_string()))?;
            (pinv * zty, true)
        }
    };
    let resid = y - z * coef;
    Ok(ControlledFit {
        beta: ols(x, &resid)?,
        pinv_fallback,
    })
}

/// First `p` entries of the OLS fit on `(X Z)`.
pub fn joint_ols(x: &DMatrix<f64>, y: &DVector<f64>, z: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_rows(x, y, Some(z))?;
    let (p, k) = (x.ncols(), z.ncols());
    if k == 0 {
        return ols(x, y);
    }
    let mut design = DMatrix::zeros(x.nrows(), p + k);
    design.columns_mut(0, p).copy_from(x);
    design.columns_mut(p, k).copy_from(z);
    let full = solve_spd(design.transpose() * &design, &(design.transpose() * y), "joint Gram")?;
    Ok(full.rows(0, p).into_owned())
}

/// Same estimator through the partitioned-inverse formula
/// `β̂ − (XᵀX)⁻¹XᵀZ (Zᵀ M Z)⁻¹ Zᵀ M y` with `M = I − X(XᵀX)⁻¹Xᵀ`.
pub fn joint_ols_block(x: &DMatrix<f64>, y: &DVector<f64>, z: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_rows(x, y, Some(z))?;
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky().ok_or_else(|| Error::Singular("XᵀX".into()))?;
    let beta = chol.solve(&(x.transpose() * y));
    let xtz = x.transpose() * z;
    let h = chol.solve(&xtz);
    let s = z.transpose() * z - xtz.transpose() * &h;
    let r = z.transpose() * y - xtz.transpose() * &beta;
    let alpha = solve_spd(s, &r, "Zᵀ M Z")?;
    Ok(beta - h * alpha)
}

/// `β̂_X − (XᵀX)⁻¹XᵀZ Σ_z⁻¹ Σ_{z,y}` with known covariances.
pub fn controlled_ols_oracle(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    sigma_zy: &DVector<f64>,
    sigma_z: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    check_rows(x, y, Some(z))?;
    let lambda = sigma_z
        .clone()
        .lu()
        .solve(sigma_zy)
        .ok_or_else(|| Error::Singular("Σ_z".into()))?;
    let adj = y - z * lambda;
    ols(x, &adj)
}

/// How the error depends on the control `z ~ N(0,1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    Linear,
    Sq,
    Cube,
    Exp,
}

impl Dependence {
    /// Standardised `f(z)`: mean 0 and variance 1 under `N(0,1)`.
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Dependence::Linear => z,
            Dependence::Sq => (z * z + z - 1.0) / 3f64.sqrt(),
            Dependence::Cube => z * z * z / 15f64.sqrt(),
            Dependence::Exp => {
                let e = std::f64::consts::E;
                (z.exp() - e.sqrt()) / (e * e - e).sqrt()
            }
        }
    }

    /// `Cov(z, f(z))` in closed form.
    pub fn cov_with_z(self) -> f64 {
        match self {
            Dependence::Linear => 1.0,
            Dependence::Sq => 1.0 / 3f64.sqrt(),
            Dependence::Cube => 3.0 / 15f64.sqrt(),
            Dependence::Exp => 1.0 / (std::f64::consts::E - 1.0).sqrt(),
        }
    }

    /// `κ = ρ / Cov(z, f(z))`, or `None` when `|κ| > 1`.
    pub fn kappa(self, rho: f64) -> Option<f64> {
        let k = rho / self.cov_with_z();
        (k.abs() <= 1.0 + 1e-12).then(|| k.clamp(-1.0, 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseConfig {
    pub sigma: f64,
    pub rho: f64,
    pub dependence: Dependence,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
}

pub const BETA: [f64; 3] = [-1.0, 6.0, 8.0];
pub const TEST_POINT: [f64; 3] = [1.0, 0.0, 1.0];

pub const ESTIMATORS: [&str; 4] = ["ols", "controlled_sample", "joint_ols", "controlled_oracle"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorRmse {
    pub estimator: &'static str,
    pub rmse: f64,
    pub percent_of_ols: f64,
    /// Paired t statistic of squared errors against OLS (negative = better).
    pub t_vs_ols: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmseRow {
    pub config: RmseConfig,
    pub estimators: Vec<EstimatorRmse>,
    pub pinv_fallbacks: usize,
}

/// Intercept plus `x₁ ~ N(0,1)`, `x₂ ~ N(1,1)`.
pub fn design_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = PathSeed::new(seed, u64::MAX).rng();
    let mut x = DMatrix::zeros(n, 3);
    for r in 0..n {
        x[(r, 0)] = 1.0;
        x[(r, 1)] = rng.sample::<f64, _>(StandardNormal);
        x[(r, 2)] = 1.0 + rng.sample::<f64, _>(StandardNormal);
    }
    x
}

/// Prediction RMSE at the test point for the four estimators on a fixed design.
pub fn rmse_experiment(config: &RmseConfig) -> Result<RmseRow> {
    if !(config.sigma > 0.0) || config.n < 4 || config.reps < 2 {
        return Err(Error::InvalidParameter(
            "need sigma > 0, n >= 4 and reps >= 2".into(),
        ));
    }
    let kappa = config.dependence.kappa(config.rho).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "rho = {} is not attainable with {:?} dependence",
            config.rho, config.dependence
        ))
    })?;
    let x = design_matrix(config.n, config.seed);
    let beta = DVector::from_column_slice(&BETA);
    let signal = &x * &beta;
    let xstar = DVector::from_column_slice(&TEST_POINT);
    let target = xstar.dot(&beta);
    let sigma_zy = DVector::from_element(1, config.sigma * config.rho);
    let sigma_z = DMatrix::from_element(1, 1, 1.0);
    let scale_eta = config.sigma * (1.0 - kappa * kappa).max(0.0).sqrt();

    let per_rep: Vec<([f64; 4], bool)> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = PathSeed::new(config.seed, r).rng();
            let mut z = DMatrix::zeros(config.n, 1);
            let mut y = signal.clone();
            for i in 0..config.n {
                let zi: f64 = rng.sample(StandardNormal);
                let eta: f64 = rng.sample(StandardNormal);
                z[(i, 0)] = zi;
                y[i] += config.sigma * kappa * config.dependence.apply(zi) + scale_eta * eta;
            }
            let sample = controlled_ols_sample(&x, &y, &z)?;
            let fits = [
                ols(&x, &y)?,
                sample.beta,
                joint_ols(&x, &y, &z)?,
                controlled_ols_oracle(&x, &y, &z, &sigma_zy, &sigma_z)?,
            ];
            let errs = fits.map(|b| (xstar.dot(&b) - target).powi(2));
            Ok((errs, sample.pinv_fallback))
        })
        .collect::<Result<_>>()?;

    let sq: Vec<Vec<f64>> = (0..4).map(|e| per_rep.iter().map(|r| r.0[e]).collect()).collect();
    let rmse: Vec<f64> = sq.iter().map(|s| stats::mean(s).sqrt()).collect();
    let estimators = (0..4)
        .map(|e| {
            let diff: Vec<f64> = sq[e].iter().zip(&sq[0]).map(|(a, b)| a - b).collect();
            let se = stats::std_error(&diff);
            EstimatorRmse {
                estimator: ESTIMATORS[e],
                rmse: rmse[e],
                percent_of_ols: 100.0 * rmse[e] / rmse[0],
                t_vs_ols: if se > 0.0 { stats::mean(&diff) / se } else { 0.0 },
            }
        })
        .collect();
    Ok(RmseRow {
        config: *config,
        estimators,
        pinv_fallbacks: per_rep.iter().filter(|r| r.1).count(),
    })
}
