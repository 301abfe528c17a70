//! Grid of controlled-regression RMSE simulations in the shape of the usual
//! percent-of-OLS table.

use esig_core::colreg::{rmse_experiment, Dependence, EstimatorRmse, RmseConfig, ESTIMATORS};
use esig_core::Result;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{num, Report, Table};

#[derive(Clone, Debug, Serialize)]
pub struct ColregCell {
    pub dependence: Dependence,
    pub rho: f64,
    /// `|κ| ≤ 1`; infeasible cells carry no estimates.
    pub feasible: bool,
    pub kappa: Option<f64>,
    /// `100 √(1 − ρ²)`
    pub theory_percent: f64,
    pub estimators: Vec<EstimatorRmse>,
    pub pinv_fallbacks: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ColregReport {
    pub sigma: f64,
    pub n: usize,
    pub reps: usize,
    pub cells: Vec<ColregCell>,
}

impl ColregReport {
    pub fn cell(&self, dependence: Dependence, rho: f64) -> Option<&ColregCell> {
        self.cells.iter().find(|c| c.dependence == dependence && c.rho == rho)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ColregReport> {
    let s = &cfg.colreg;
    let mut cells = Vec::new();
    for &dependence in &s.dependences {
        for &rho in &s.rhos {
            let kappa = dependence.kappa(rho);
            let theory_percent = 100.0 * (1.0 - rho * rho).sqrt();
            let (estimators, pinv_fallbacks) = match kappa {
                Some(_) => {
                    let row = rmse_experiment(&RmseConfig {
                        sigma: s.sigma,
                        rho,
                        dependence,
                        n: s.n,
                        reps: s.reps,
                        seed: cfg.seed(),
                    })?;
                    (row.estimators, row.pinv_fallbacks)
                }
                None => (Vec::new(), 0),
            };
            cells.push(ColregCell {
                dependence,
                rho,
                feasible: kappa.is_some(),
                kappa,
                theory_percent,
                estimators,
                pinv_fallbacks,
            });
        }
    }
    Ok(ColregReport {
        sigma: s.sigma,
        n: s.n,
        reps: s.reps,
        cells,
    })
}

fn dependence_name(d: Dependence) -> &'static str {
    match d {
        Dependence::Linear => "linear",
        Dependence::Sq => "sq",
        Dependence::Cube => "cube",
        Dependence::Exp => "exp",
    }
}

impl Report for ColregReport {
    fn samples(&self) -> Table {
        let mut t = Table::new(&["sigma", "rho", "dependence", "estimator", "rmse", "percent_of_ols", "t_vs_ols"]);
        for c in &self.cells {
            let lead = [num(self.sigma), num(c.rho), dependence_name(c.dependence).to_string()];
            if c.feasible {
                for e in &c.estimators {
                    let mut row = lead.to_vec();
                    row.extend([e.estimator.to_string(), num(e.rmse), num(e.percent_of_ols), num(e.t_vs_ols)]);
                    t.push(row);
                }
            } else {
                for name in ESTIMATORS {
                    let mut row = lead.to_vec();
                    row.extend([name.to_string(), String::new(), String::new(), String::new()]);
                    t.push(row);
                }
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_cells_have_blank_rows() {
        let c = ExperimentConfig::from_toml("seed = 1\n[colreg]\nrhos = [0.25, 0.75]\ndependences = [\"sq\"]\nn = 50\nreps = 40\n").unwrap();
        let r = run(&c).unwrap();
        // κ = ρ√3: feasible at 0.25, not at 0.75
        assert!(r.cell(Dependence::Sq, 0.25).unwrap().feasible);
        let bad = r.cell(Dependence::Sq, 0.75).unwrap();
        assert!(!bad.feasible && bad.estimators.is_empty());
        let t = r.samples();
        assert_eq!(t.rows.len(), 8);
        assert!(t.rows[4..].iter().all(|row| row[4].is_empty()));
    }
}
