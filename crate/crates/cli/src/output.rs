use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows of text cells. Numbers go through [`num`] so formatting is stable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip form, with an exponent for very small or large values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// What every experiment produces besides its JSON summary.
pub trait Report: Serialize {
    fn samples(&self) -> Table;

    fn plot(&self, _stamp: &str) -> Option<String> {
        None
    }
}

#[derive(Serialize)]
struct Envelope<'a, R> {
    experiment: &'static str,
    version: &'static str,
    config_sha256: String,
    seed: u64,
    config: &'a ExperimentConfig,
    result: &'a R,
}

pub fn stamp(config: &ExperimentConfig) -> String {
    format!("esig {VERSION} config_sha256={}", config.hash())
}

pub fn summary_json<R: Report>(kind: ExperimentKind, config: &ExperimentConfig, report: &R) -> String {
    let env = Envelope {
        experiment: kind.name(),
        version: VERSION,
        config_sha256: config.hash(),
        seed: config.seed(),
        config,
        result: report,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("report serialises");
    s.push('\n');
    s
}

pub fn samples_csv(config: &ExperimentConfig, table: &Table) -> std::io::Result<Vec<u8>> {
    let mut buf = format!("# {}\n", stamp(config)).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Writes `summary.json`, `samples.csv` and, when the report has one, `plot.svg`.
pub fn write_all<R: Report>(dir: &Path, kind: ExperimentKind, config: &ExperimentConfig, report: &R) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), summary_json(kind, config, report))?;
    fs::write(dir.join("samples.csv"), samples_csv(config, &report.samples())?)?;
    if let Some(svg) = report.plot(&stamp(config)) {
        fs::write(dir.join("plot.svg"), svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "");
    }

    #[test]
    fn csv_starts_with_stamp() {
        let cfg = ExperimentConfig::from_toml("seed = 1").unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let text = String::from_utf8(samples_csv(&cfg, &t).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# {}", stamp(&cfg)));
        assert_eq!(lines[1..], ["a,b", "1,\"x,y\""]);
    }
}
