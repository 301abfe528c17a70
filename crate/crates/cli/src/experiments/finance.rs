//! Signature-payoff pricing and quadratic hedging with an out-of-sample PnL
//! backtest.

use esig_core::sigfin::{hedge, lead_lag_add_time, lead_lag_expected_signature, pnl_backtest, price, PricingSpec};
use esig_core::{signature, stats, EstimateReport, Functional, PathSeed, PiecewiseLinearPath, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, PartitionSpec};
use crate::output::{num, opt, Report, Table};
use crate::sim::{draw, price_component};
use crate::svg::{histogram_plot, Histogram};

pub const DEFAULT_PARTITION: PartitionSpec = PartitionSpec::Dyadic { level: 6 };

fn price_paths(cfg: &ExperimentConfig, count: usize, stage: u64) -> Result<Vec<PiecewiseLinearPath>> {
    let steps = cfg.partition_or(DEFAULT_PARTITION).steps(count);
    let paths = draw(&cfg.process, cfg.sampling, cfg.horizon, steps, count, PathSeed::derive(cfg.seed(), stage))?;
    price_component(&cfg.process, paths)
}

#[derive(Clone, Debug, Serialize)]
pub struct PriceReport {
    pub process: &'static str,
    pub n: usize,
    pub payoff: Functional,
    pub discount: f64,
    pub correction: bool,
    pub price: f64,
    pub std_error: f64,
    pub naive_price: f64,
    pub naive_std_error: f64,
    pub words: Vec<String>,
    pub c_used: Vec<Option<f64>>,
    #[serde(skip)]
    pub estimate: Option<EstimateReport>,
}

pub fn run_price(cfg: &ExperimentConfig) -> Result<PriceReport> {
    let f = cfg.payoff().expect("validated");
    let paths = price_paths(cfg, cfg.n, 0)?;
    let spec = PricingSpec {
        f: f.clone(),
        discount: cfg.pricing.discount,
        correction: cfg.pricing.correction,
    };
    let main = price(&spec, &paths)?;
    let naive = price(
        &PricingSpec {
            correction: false,
            ..spec
        },
        &paths,
    )?;
    Ok(PriceReport {
        process: cfg.process.name(),
        n: cfg.n,
        payoff: f,
        discount: cfg.pricing.discount,
        correction: cfg.pricing.correction,
        price: main.price,
        std_error: main.std_error,
        naive_price: naive.price,
        naive_std_error: naive.std_error,
        words: main.estimate.words.iter().map(|w| w.to_string()).collect(),
        c_used: main.estimate.c_used.clone(),
        estimate: Some(main.estimate),
    })
}

impl Report for PriceReport {
    fn samples(&self) -> Table {
        let Some(est) = &self.estimate else {
            return Table::default();
        };
        let k = est.num_words();
        let mut header = vec!["sample".to_string()];
        header.extend(self.words.iter().map(|w| format!("S[{w}]")));
        header.extend(self.words.iter().map(|w| format!("Sc[{w}]")));
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&refs);
        for n in 0..est.n_samples {
            let mut row = vec![n.to_string()];
            row.extend((0..k).map(|w| num(est.per_sample[n * k + w])));
            row.extend((0..k).map(|w| opt(est.control_per_sample.as_ref().map(|c| c[n * k + w]))));
            t.push(row);
        }
        t
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HedgeReport {
    pub process: &'static str,
    pub train_n: usize,
    pub test_n: usize,
    pub phi_depth: usize,
    pub payoff: Functional,
    pub p0: f64,
    pub ell: Functional,
    pub residual_objective: f64,
    pub payoff_variance: f64,
    pub residual_variance: f64,
    /// Out-of-sample residual variance over payoff variance.
    pub variance_ratio: f64,
    pub mean_residual: f64,
    #[serde(skip)]
    pub payoffs: Vec<f64>,
    #[serde(skip)]
    pub pnl: Vec<f64>,
}

pub fn run_hedge(cfg: &ExperimentConfig) -> Result<HedgeReport> {
    let f = cfg.payoff().expect("validated");
    let depth = cfg.pricing.hedge_depth;
    let f_degree = f.terms().map(|(w, _)| w.len()).max().unwrap_or(0);
    let phi_depth = (2 * (depth / 2 + 1)).max(2 * f_degree);

    let train = price_paths(cfg, cfg.n, 0)?;
    let phi = lead_lag_expected_signature(&train, phi_depth)?;
    let p0 = match cfg.pricing.p0 {
        Some(p) => p,
        None => f.pair(&phi)?,
    };
    let fit = hedge(&f, p0, &phi, depth, cfg.pricing.ridge)?;

    let test = price_paths(cfg, cfg.pricing.test_n, 1)?;
    let payoffs: Vec<f64> = test
        .par_iter()
        .map(|p| f.pair(&signature(&lead_lag_add_time(p)?, f.depth())?))
        .collect::<Result<_>>()?;
    let pnl = pnl_backtest(&fit.ell, &test)?;
    let residual: Vec<f64> = payoffs.iter().zip(&pnl).map(|(y, g)| y - p0 - g).collect();
    let payoff_variance = stats::variance(&payoffs);
    let residual_variance = stats::variance(&residual);
    Ok(HedgeReport {
        process: cfg.process.name(),
        train_n: cfg.n,
        test_n: cfg.pricing.test_n,
        phi_depth,
        payoff: f,
        p0,
        ell: fit.ell,
        residual_objective: fit.residual_objective,
        payoff_variance,
        residual_variance,
        variance_ratio: residual_variance / payoff_variance,
        mean_residual: stats::mean(&residual),
        payoffs,
        pnl,
    })
}

impl Report for HedgeReport {
    fn samples(&self) -> Table {
        let mut t = Table::new(&["path", "payoff", "pnl", "residual"]);
        for (i, (y, g)) in self.payoffs.iter().zip(&self.pnl).enumerate() {
            t.push(vec![i.to_string(), num(*y), num(*g), num(y - self.p0 - g)]);
        }
        t
    }

    fn plot(&self, stamp: &str) -> Option<String> {
        let centred: Vec<f64> = self.payoffs.iter().map(|y| y - self.p0).collect();
        let residual: Vec<f64> = self.payoffs.iter().zip(&self.pnl).map(|(y, g)| y - self.p0 - g).collect();
        let lo = centred.iter().chain(&residual).copied().fold(f64::INFINITY, f64::min);
        let hi = centred.iter().chain(&residual).copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return None;
        }
        Some(histogram_plot(
            stamp,
            "hedging residual",
            "value",
            &[
                Histogram::new("payoff - p0", &centred, lo, hi, 40),
                Histogram::new("residual", &residual, lo, hi, 40),
            ],
            false,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_payoff_is_discounted_exactly() {
        let c = ExperimentConfig::from_toml("seed = 1\nn = 100\n[process]\nkind = \"bm\"\n[pricing]\npayoff = { \"\" = 2.0 }\ndiscount = 0.5\n").unwrap();
        let r = run_price(&c).unwrap();
        assert_eq!(r.price, 1.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn price_increment_is_hedged_out_of_sample() {
        let c = ExperimentConfig::from_toml("seed = 1\nn = 300\n[process]\nkind = \"bm\"\n[pricing]\ntest_n = 200\n").unwrap();
        let r = run_hedge(&c).unwrap();
        assert!(r.variance_ratio < 1e-2, "{}", r.variance_ratio);
        assert_eq!(r.pnl.len(), 200);
        assert_eq!(r.samples().rows.len(), 200);
    }
}
