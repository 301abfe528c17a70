//! Config-driven experiments on top of `esig-core`: each run writes
//! `summary.json`, `samples.csv` and usually `plot.svg`.

pub mod config;
pub mod experiments;
pub mod inference;
pub mod output;
pub mod sim;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{run, RunError};

#[derive(Debug, Parser)]
#[command(name = "esig", version, about = "Expected-signature experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub experiment: ExperimentKind,
    /// TOML experiment config; every field but the seed has a default.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: the config's `out`, else `out/<experiment>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Cli {
    pub fn resolve(&self) -> Result<(ExperimentConfig, PathBuf), ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(self.experiment.name()));
        Ok((cfg, out))
    }

    pub fn execute(&self) -> Result<String, RunError> {
        let (cfg, out) = self.resolve()?;
        let job = || run(self.experiment, &cfg, Some(&out)).map(|f| f.summary);
        match self.threads {
            Some(0) => Err(ConfigError("--threads: must be at least 1".into()).into()),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::Io(std::io::Error::other(e)))?
                .install(job),
            None => job(),
        }
    }
}

/// Parses arguments, runs, prints the summary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.execute() {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_flag_and_default_out() {
        let cli = Cli::try_parse_from(["esig", "variance-reduction", "--seed", "12"]).unwrap();
        let (cfg, out) = cli.resolve().unwrap();
        assert_eq!(cfg.seed, Some(12));
        assert_eq!(out, PathBuf::from("out/variance-reduction"));
    }

    #[test]
    fn bad_arguments_exit_2() {
        assert_eq!(main_with_args(["esig", "nope"]), 2);
        assert_eq!(main_with_args(["esig", "selftest", "--threads", "0", "--seed", "1"]), 2);
    }
}
