pub mod clt;
pub mod colreg;
pub mod consistency;
pub mod density;
pub mod finance;
pub mod infill;
pub mod selftest;
pub mod variance;

use std::path::Path;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::output::{summary_json, write_all, Report};

/// Either a bad config (exit 2) or a numerical / I/O failure (exit 1).
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] esig_core::Error),
    #[error("writing outputs: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Default word lists, by path dimension.
fn default_words(kind: ExperimentKind, dim: usize) -> &'static [&'static str] {
    use ExperimentKind::*;
    match (kind, dim) {
        (Infill, 1) => &["1.1"],
        (Infill, _) => &["1.2"],
        (Density, 1) | (VarianceReduction, 1) => &["1", "1.1", "1.1.1.1"],
        (Density, 2) => &["1.1", "2.1"],
        (VarianceReduction, _) => &["1.1", "1.2", "2.2"],
        (Clt, _) | (Consistency, _) | (Density, _) => &["1.1"],
        _ => &[],
    }
}

/// The `summary.json` text of a finished run.
pub struct Finished {
    pub summary: String,
}

fn finish<R: Report>(kind: ExperimentKind, cfg: &ExperimentConfig, out: Option<&Path>, report: R) -> Result<Finished, RunError> {
    if let Some(dir) = out {
        write_all(dir, kind, cfg, &report)?;
    }
    Ok(Finished {
        summary: summary_json(kind, cfg, &report),
    })
}

/// Validates `cfg` for `kind`, runs it, and writes artifacts to `out` if given.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Finished, RunError> {
    cfg.validate(kind)?;
    let dim = cfg.process.dim();
    let words = || cfg.words_or(dim, default_words(kind, dim));
    match kind {
        ExperimentKind::Infill => finish(kind, cfg, out, infill::run(cfg, &words()?)?),
        ExperimentKind::Consistency => finish(kind, cfg, out, consistency::run(cfg, &words()?)?),
        ExperimentKind::Clt => finish(kind, cfg, out, clt::run(cfg, &words()?)?),
        ExperimentKind::Density => finish(kind, cfg, out, density::run(cfg, &words()?)?),
        ExperimentKind::VarianceReduction => finish(kind, cfg, out, variance::run(cfg, &words()?)?),
        ExperimentKind::Price => finish(kind, cfg, out, finance::run_price(cfg)?),
        ExperimentKind::Hedge => finish(kind, cfg, out, finance::run_hedge(cfg)?),
        ExperimentKind::Colreg => finish(kind, cfg, out, colreg::run(cfg)?),
        ExperimentKind::Selftest => finish(kind, cfg, out, selftest::run(cfg.seed(), &cfg.selftest)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use esig_core::Word;

    #[test]
    fn config_errors_exit_2_before_running() {
        let cfg = ExperimentConfig::from_toml("n = 5").unwrap();
        let err = run(ExperimentKind::Selftest, &cfg, None).err().unwrap();
        assert_eq!(err.exit_code(), 2);
        let numeric = RunError::Numeric(esig_core::Error::InvalidParameter("x".into()));
        assert_eq!(numeric.exit_code(), 1);
    }

    #[test]
    fn default_words_fit_the_dimension() {
        for kind in [ExperimentKind::Infill, ExperimentKind::Density, ExperimentKind::VarianceReduction, ExperimentKind::Clt] {
            for dim in 1..=3 {
                for w in default_words(kind, dim) {
                    assert!(Word::parse(w, dim).is_ok(), "{w} in dim {dim}");
                }
            }
        }
    }
}
