//! Turns a process spec into paths on a partition, for either sampling mode.

use esig_core::processes::{simulate_batch, simulate_bm, simulate_heston, Car2Sampler, GaussianSampler, OuSampler};
use esig_core::{Error, HestonParams, Partition, PathSeed, PiecewiseLinearPath, Result};

use crate::config::{ProcessSpec, Sampling};

/// Cholesky cost grows cubically; beyond this the Gaussian sampler is refused.
const MAX_GAUSSIAN_GRID: usize = 8193;

pub enum Simulator {
    Bm { dim: usize, partition: Partition },
    Gaussian { sampler: GaussianSampler, dim: usize },
    Ou(OuSampler),
    Car(Car2Sampler),
    Heston { params: HestonParams, substeps: usize, partition: Partition },
    Linear { velocity: Vec<f64>, partition: Partition },
}

impl Simulator {
    pub fn new(spec: &ProcessSpec, partition: &Partition) -> Result<Self> {
        Ok(match spec {
            ProcessSpec::Bm { dim } => Simulator::Bm {
                dim: *dim,
                partition: partition.clone(),
            },
            ProcessSpec::Fbm { dim, .. } => {
                if partition.times().len() > MAX_GAUSSIAN_GRID {
                    return Err(Error::InvalidParameter(format!(
                        "fBm grid of {} points is too large for exact Cholesky sampling (max {MAX_GAUSSIAN_GRID})",
                        partition.times().len()
                    )));
                }
                let params = spec.fbm().ok_or_else(|| Error::InvalidParameter("bad Hurst index".into()))?;
                Simulator::Gaussian {
                    sampler: params.sampler(partition)?,
                    dim: *dim,
                }
            }
            ProcessSpec::Ou { .. } => {
                let params = spec
                    .ou()
                    .map_err(|e| Error::InvalidParameter(e.0))?
                    .expect("ou spec");
                Simulator::Ou(OuSampler::new(&params, partition)?)
            }
            ProcessSpec::Car { .. } => Simulator::Car(Car2Sampler::new(&spec.car().expect("car spec"), partition)?),
            ProcessSpec::Heston { .. } => {
                let (params, substeps) = spec.heston().expect("heston spec");
                Simulator::Heston {
                    params,
                    substeps,
                    partition: partition.clone(),
                }
            }
            ProcessSpec::Linear { velocity } => Simulator::Linear {
                velocity: velocity.clone(),
                partition: partition.clone(),
            },
        })
    }

    pub fn sample(&self, seed: PathSeed) -> Result<PiecewiseLinearPath> {
        match self {
            Simulator::Bm { dim, partition } => simulate_bm(*dim, partition, seed),
            Simulator::Gaussian { sampler, dim } => sampler.sample(*dim, seed),
            Simulator::Ou(s) => s.sample(seed),
            Simulator::Car(s) => s.sample(seed),
            Simulator::Heston {
                params,
                substeps,
                partition,
            } => simulate_heston(params, partition, seed, *substeps),
            Simulator::Linear { velocity, partition } => {
                let rows: Vec<Vec<f64>> = partition
                    .times()
                    .iter()
                    .map(|t| velocity.iter().map(|v| v * t).collect())
                    .collect();
                PiecewiseLinearPath::from_rows(partition.clone(), &rows)
            }
        }
    }
}

/// `count` sample paths over `[0, horizon]` with `steps` uniform steps each.
/// Chop mode simulates one trajectory over `[0, count · horizon]` and cuts it.
pub fn draw(
    spec: &ProcessSpec,
    sampling: Sampling,
    horizon: f64,
    steps: usize,
    count: usize,
    master: u64,
) -> Result<Vec<PiecewiseLinearPath>> {
    match sampling {
        Sampling::Ind => {
            let sim = Simulator::new(spec, &Partition::uniform(horizon, steps)?)?;
            simulate_batch(count, master, |seed| sim.sample(seed))
        }
        Sampling::Chop => {
            let long = Partition::uniform(horizon * count as f64, steps * count)?;
            let sim = Simulator::new(spec, &long)?;
            sim.sample(PathSeed::new(master, 0))?.chop(horizon, count)
        }
    }
}

/// Scalar price component: the path itself, or `S` for Heston.
pub fn price_component(spec: &ProcessSpec, paths: Vec<PiecewiseLinearPath>) -> Result<Vec<PiecewiseLinearPath>> {
    match spec {
        ProcessSpec::Heston { .. } => paths.iter().map(|p| p.project(&[0])).collect(),
        _ => Ok(paths),
    }
}
