//! Experiment configuration. Every field has a default except `seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use esig_core::colreg::Dependence;
use esig_core::esig::{ControlMode, HacKernel, HacOptions};
use esig_core::processes::{Car2Params, FbmParams, HestonParams, OuParams, DEFAULT_HESTON_SUBSTEPS};
use esig_core::{Functional, Partition, Word};
use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A message naming the offending field, e.g. `process.hurst: must lie in (0, 1)`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Infill,
    Consistency,
    Clt,
    Density,
    VarianceReduction,
    Price,
    Hedge,
    Colreg,
    Selftest,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Infill => "infill",
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Density => "density",
            ExperimentKind::VarianceReduction => "variance-reduction",
            ExperimentKind::Price => "price",
            ExperimentKind::Hedge => "hedge",
            ExperimentKind::Colreg => "colreg",
            ExperimentKind::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProcessSpec {
    /// Standard Brownian motion.
    Bm {
        #[serde(default = "one")]
        dim: usize,
    },
    /// Fractional Brownian motion with independent coordinates.
    Fbm {
        #[serde(alias = "H")]
        hurst: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Stationary OU with drift `a` and stationary covariance `sigma`.
    Ou { a: Vec<Vec<f64>>, sigma: Vec<Vec<f64>> },
    /// Bivariate CAR(2), stationary start.
    Car {
        #[serde(alias = "A1")]
        a1: [[f64; 2]; 2],
        #[serde(alias = "A2")]
        a2: [[f64; 2]; 2],
    },
    /// Price and variance `(S, V)`.
    Heston {
        s0: f64,
        v0: f64,
        kappa: f64,
        theta: f64,
        xi: f64,
        rho: f64,
        #[serde(default = "default_substeps")]
        substeps: usize,
    },
    /// Deterministic `X_t = t v`.
    Linear { velocity: Vec<f64> },
}

fn one() -> usize {
    1
}

fn default_substeps() -> usize {
    DEFAULT_HESTON_SUBSTEPS
}

impl Default for ProcessSpec {
    fn default() -> Self {
        ProcessSpec::Bm { dim: 1 }
    }
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad(field, "must be a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix2(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

impl ProcessSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::Bm { .. } => "bm",
            ProcessSpec::Fbm { .. } => "fbm",
            ProcessSpec::Ou { .. } => "ou",
            ProcessSpec::Car { .. } => "car",
            ProcessSpec::Heston { .. } => "heston",
            ProcessSpec::Linear { .. } => "linear",
        }
    }

    /// Dimension of the simulated path.
    pub fn dim(&self) -> usize {
        match self {
            ProcessSpec::Bm { dim } | ProcessSpec::Fbm { dim, .. } => *dim,
            ProcessSpec::Ou { a, .. } => a.len(),
            ProcessSpec::Car { .. } | ProcessSpec::Heston { .. } => 2,
            ProcessSpec::Linear { velocity } => velocity.len(),
        }
    }

    /// Coordinates that are martingales, 1-based.
    pub fn martingale_letters(&self) -> Vec<usize> {
        match self {
            ProcessSpec::Bm { dim } => (1..=*dim).collect(),
            ProcessSpec::Heston { .. } => vec![1],
            _ => Vec::new(),
        }
    }

    pub fn fbm(&self) -> Option<FbmParams> {
        match self {
            ProcessSpec::Fbm { hurst, .. } => FbmParams::new(*hurst).ok(),
            _ => None,
        }
    }

    pub fn ou(&self) -> Result<Option<OuParams>, ConfigError> {
        match self {
            ProcessSpec::Ou { a, sigma } => OuParams::new(matrix(a, "process.a")?, matrix(sigma, "process.sigma")?)
                .map(Some)
                .map_err(|e| bad("process", e)),
            _ => Ok(None),
        }
    }

    pub fn car(&self) -> Option<Car2Params> {
        match self {
            ProcessSpec::Car { a1, a2 } => Some(Car2Params::new(matrix2(a1), matrix2(a2))),
            _ => None,
        }
    }

    pub fn heston(&self) -> Option<(HestonParams, usize)> {
        match *self {
            ProcessSpec::Heston {
                s0,
                v0,
                kappa,
                theta,
                xi,
                rho,
                substeps,
            } => Some((
                HestonParams {
                    s0,
                    v0,
                    kappa,
                    theta,
                    xi,
                    rho,
                },
                substeps,
            )),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        match self {
            ProcessSpec::Bm { dim } | ProcessSpec::Fbm { dim, .. } if *dim == 0 => {
                return Err(bad("process.dim", "must be at least 1"))
            }
            ProcessSpec::Fbm { hurst, .. } => {
                FbmParams::new(*hurst).map_err(|e| bad("process.hurst", e))?;
            }
            ProcessSpec::Ou { .. } => {
                self.ou()?;
            }
            ProcessSpec::Car { .. } => {
                self.car()
                    .expect("car")
                    .ou_params()
                    .map_err(|e| bad("process", e))?;
            }
            ProcessSpec::Heston { substeps, .. } => {
                let (p, _) = self.heston().expect("heston");
                p.validate().map_err(|e| bad("process", e))?;
                if *substeps == 0 {
                    return Err(bad("process.substeps", "must be at least 1"));
                }
            }
            ProcessSpec::Linear { velocity } => {
                if velocity.is_empty() || velocity.iter().any(|v| !v.is_finite()) {
                    return Err(bad("process.velocity", "must be a non-empty list of finite numbers"));
                }
            }
            ProcessSpec::Bm { .. } => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase", deny_unknown_fields)]
pub enum PartitionSpec {
    /// `2^level` uniform steps.
    Dyadic { level: u32 },
    /// Mesh `2^{−⌊N/10⌋+1}` for `N` samples, capped at `max_level`.
    Rule {
        #[serde(default = "default_rule_cap")]
        max_level: u32,
    },
    Uniform { steps: usize },
}

fn default_rule_cap() -> u32 {
    10
}

impl PartitionSpec {
    pub fn steps(&self, n_samples: usize) -> usize {
        match *self {
            PartitionSpec::Dyadic { level } => 1 << level,
            PartitionSpec::Rule { max_level } => 1 << rule_level(n_samples).min(max_level),
            PartitionSpec::Uniform { steps } => steps,
        }
    }

    pub fn build(&self, horizon: f64, n_samples: usize) -> esig_core::Result<Partition> {
        Partition::uniform(horizon, self.steps(n_samples))
    }
}

/// Dyadic level of the mesh rule `|π| = 2^{−⌊N/10⌋+1}`, floored at 0.
pub fn rule_level(n_samples: usize) -> u32 {
    ((n_samples / 10) as u32).saturating_sub(1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Independent replicate paths.
    #[default]
    Ind,
    /// Consecutive segments of one long trajectory.
    Chop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HacSection {
    pub upsilon: f64,
    pub kernel: HacKernel,
    pub max_lag: Option<usize>,
}

impl Default for HacSection {
    fn default() -> Self {
        let d = HacOptions::default();
        Self {
            upsilon: d.upsilon,
            kernel: d.kernel,
            max_lag: d.max_lag,
        }
    }
}

impl HacSection {
    pub fn options(&self) -> HacOptions {
        HacOptions {
            upsilon: self.upsilon,
            kernel: self.kernel,
            max_lag: self.max_lag,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    /// Reference sample size as a multiple of the largest experiment `N`.
    pub factor: usize,
    /// Extra dyadic refinements of the reference grid.
    pub extra_levels: u32,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            factor: 10,
            extra_levels: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfillSection {
    pub min_level: u32,
    pub max_level: u32,
    pub reference_level: u32,
    pub expected_slope: Option<f64>,
    pub tolerance: f64,
}

impl Default for InfillSection {
    fn default() -> Self {
        Self {
            min_level: 3,
            max_level: 8,
            reference_level: 12,
            expected_slope: None,
            tolerance: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencySection {
    pub n_min: usize,
    pub n_max: usize,
}

impl Default for ConsistencySection {
    fn default() -> Self {
        Self { n_min: 64, n_max: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltSection {
    /// Reference sample size as a multiple of `n`.
    pub reference_factor: usize,
}

impl Default for CltSection {
    fn default() -> Self {
        Self { reference_factor: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySection {
    /// Letters treated as martingale coordinates; defaults per process.
    pub martingale_letters: Option<Vec<usize>>,
    pub bins: usize,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self {
            martingale_letters: None,
            bins: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingSection {
    /// Payoff functional on the add-time lead-lag alphabet:
    /// 1 time-lead, 2 price-lead, 3 time-lag, 4 price-lag.
    pub payoff: BTreeMap<String, f64>,
    pub discount: f64,
    pub correction: bool,
    /// Truncation level of the hedging strategy space is `hedge_depth / 2`.
    pub hedge_depth: usize,
    pub p0: Option<f64>,
    pub ridge: f64,
    pub test_n: usize,
}

impl Default for PricingSection {
    fn default() -> Self {
        Self {
            payoff: BTreeMap::from([("2".to_string(), 1.0)]),
            discount: 1.0,
            correction: true,
            hedge_depth: 2,
            p0: None,
            ridge: esig_core::sigfin::DEFAULT_RIDGE,
            test_n: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColregSection {
    pub sigma: f64,
    pub rhos: Vec<f64>,
    pub dependences: Vec<Dependence>,
    pub n: usize,
    pub reps: usize,
}

impl Default for ColregSection {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rhos: vec![0.25, 0.5, 0.75],
            dependences: vec![Dependence::Linear, Dependence::Sq, Dependence::Cube, Dependence::Exp],
            n: 1000,
            reps: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestSection {
    pub cases: usize,
    pub max_dim: usize,
    pub max_depth: usize,
    pub max_vertices: usize,
    pub tolerance: f64,
}

impl Default for SelftestSection {
    fn default() -> Self {
        Self {
            cases: 500,
            max_dim: 3,
            max_depth: 4,
            max_vertices: 32,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional guard: must match the subcommand when present.
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub process: ProcessSpec,
    /// Words as dotted letters, e.g. `"1.2"`. Empty means the experiment default.
    pub words: Vec<String>,
    /// Truncation level `K`.
    pub depth: usize,
    pub horizon: f64,
    /// `None` means the experiment default.
    pub partition: Option<PartitionSpec>,
    pub sampling: Sampling,
    pub n: usize,
    pub replications: usize,
    /// `c1`, `c1-centered`, `c2` or `fixed:<c>`.
    pub modes: Vec<String>,
    pub hac: HacSection,
    pub reference: ReferenceSection,
    pub infill: InfillSection,
    pub consistency: ConsistencySection,
    pub clt: CltSection,
    pub density: DensitySection,
    pub pricing: PricingSection,
    pub colreg: ColregSection,
    pub selftest: SelftestSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: None,
            out: None,
            process: ProcessSpec::default(),
            words: Vec::new(),
            depth: 4,
            horizon: 1.0,
            partition: None,
            sampling: Sampling::Ind,
            n: 1000,
            replications: 100,
            modes: vec!["c1".into()],
            hac: HacSection::default(),
            reference: ReferenceSection::default(),
            infill: InfillSection::default(),
            consistency: ConsistencySection::default(),
            clt: CltSection::default(),
            density: DensitySection::default(),
            pricing: PricingSection::default(),
            colreg: ColregSection::default(),
            selftest: SelftestSection::default(),
        }
    }
}

pub fn parse_mode(text: &str) -> Option<ControlMode> {
    match text.trim() {
        "c1" => Some(ControlMode::C1),
        "c1-centered" => Some(ControlMode::C1Centered),
        "c2" => Some(ControlMode::C2),
        other => other
            .strip_prefix("fixed:")
            .and_then(|c| c.trim().parse().ok())
            .filter(|c: &f64| c.is_finite())
            .map(ControlMode::Fixed),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config: {}", e.to_string().trim())))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("config: cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    pub fn partition_or(&self, default: PartitionSpec) -> PartitionSpec {
        self.partition.unwrap_or(default)
    }

    /// Word list, or `default` when none are configured.
    pub fn words_or(&self, dim: usize, default: &[&str]) -> Result<Vec<Word>, ConfigError> {
        let texts: Vec<&str> = if self.words.is_empty() {
            default.to_vec()
        } else {
            self.words.iter().map(String::as_str).collect()
        };
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let w = Word::parse(t, dim).map_err(|e| bad(&format!("words[{i}]"), e))?;
                if w.len() > self.depth {
                    return Err(bad(
                        &format!("words[{i}]"),
                        format!("length {} exceeds depth {}", w.len(), self.depth),
                    ));
                }
                Ok(w)
            })
            .collect()
    }

    pub fn control_modes(&self) -> Result<Vec<ControlMode>, ConfigError> {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                parse_mode(m).ok_or_else(|| {
                    bad(
                        &format!("modes[{i}]"),
                        format!("unknown mode {m:?}; expected c1, c1-centered, c2 or fixed:<c>"),
                    )
                })
            })
            .collect()
    }

    pub fn payoff(&self) -> Result<Functional, ConfigError> {
        let dim = esig_core::sigfin::LEAD_LAG_DIM;
        let mut words = Vec::new();
        for (text, &c) in &self.pricing.payoff {
            let field = format!("pricing.payoff.{text:?}");
            if !c.is_finite() {
                return Err(bad(&field, "coefficient must be finite"));
            }
            words.push((Word::parse(text, dim).map_err(|e| bad(&field, e))?, c));
        }
        let depth = words.iter().map(|(w, _)| w.len()).max().unwrap_or(0);
        let mut f = Functional::new(dim, depth);
        for (w, c) in words {
            f.add(w, c).map_err(|e| bad("pricing.payoff", e))?;
        }
        Ok(f)
    }

    /// Applies `--seed`, then checks everything the chosen experiment reads.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ConfigError> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(bad(
                    "experiment",
                    format!("config is for {:?} but {:?} was requested", k.name(), kind.name()),
                ));
            }
        }
        if self.seed.is_none() {
            return Err(bad("seed", "required (set it in the config or pass --seed)"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(bad("horizon", "must be positive"));
        }
        if self.depth == 0 {
            return Err(bad("depth", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(bad("n", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(bad("replications", "must be at least 1"));
        }
        match self.partition {
            Some(PartitionSpec::Dyadic { level }) if level > 20 => {
                return Err(bad("partition.level", "at most 20"))
            }
            Some(PartitionSpec::Rule { max_level }) if max_level > 20 => {
                return Err(bad("partition.max_level", "at most 20"))
            }
            Some(PartitionSpec::Uniform { steps: 0 }) => return Err(bad("partition.steps", "must be at least 1")),
            _ => {}
        }
        self.control_modes()?;
        if !(self.hac.upsilon > 0.0 && self.hac.upsilon < 1.0) {
            return Err(bad("hac.upsilon", "must lie in (0, 1)"));
        }
        if self.reference.factor == 0 {
            return Err(bad("reference.factor", "must be at least 1"));
        }
        self.process.validate()?;

        use ExperimentKind::*;
        match kind {
            Infill => {
                let s = &self.infill;
                if s.min_level > s.max_level {
                    return Err(bad("infill.min_level", "must not exceed infill.max_level"));
                }
                if s.reference_level <= s.max_level || s.reference_level > 20 {
                    return Err(bad(
                        "infill.reference_level",
                        "must refine every level: greater than infill.max_level and at most 20",
                    ));
                }
                if self.n < 2 {
                    return Err(bad("n", "need at least 2 paths"));
                }
            }
            Consistency => {
                let s = &self.consistency;
                if s.n_min == 0 || s.n_min > s.n_max {
                    return Err(bad("consistency.n_min", "must be positive and at most consistency.n_max"));
                }
            }
            Clt => {
                if self.replications < 200 {
                    return Err(bad("replications", "CLT check needs at least 200"));
                }
                if self.clt.reference_factor == 0 {
                    return Err(bad("clt.reference_factor", "must be at least 1"));
                }
            }
            Density => {
                if self.replications < 2 {
                    return Err(bad("replications", "need at least 2"));
                }
                if self.density.bins == 0 {
                    return Err(bad("density.bins", "must be at least 1"));
                }
                if let Some(letters) = &self.density.martingale_letters {
                    if let Some(l) = letters.iter().find(|&&l| l == 0 || l > self.process.dim()) {
                        return Err(bad("density.martingale_letters", format!("letter {l} out of range")));
                    }
                }
            }
            VarianceReduction => {}
            Price | Hedge => {
                if self.process.dim() != 1 && !matches!(self.process, ProcessSpec::Heston { .. }) {
                    return Err(bad("process", "pricing needs a scalar price process or heston"));
                }
                let f = self.payoff()?;
                if f.is_empty() {
                    return Err(bad("pricing.payoff", "must contain at least one word"));
                }
                if !(self.pricing.discount > 0.0) {
                    return Err(bad("pricing.discount", "must be positive"));
                }
                if !(self.pricing.ridge >= 0.0) {
                    return Err(bad("pricing.ridge", "must be non-negative"));
                }
                if kind == Hedge && self.pricing.test_n < 2 {
                    return Err(bad("pricing.test_n", "need at least 2 paths"));
                }
            }
            Colreg => {
                let s = &self.colreg;
                if !(s.sigma > 0.0) {
                    return Err(bad("colreg.sigma", "must be positive"));
                }
                if let Some(r) = s.rhos.iter().find(|r| !(r.abs() <= 1.0)) {
                    return Err(bad("colreg.rhos", format!("{r} not in [-1, 1]")));
                }
                if s.n < 4 || s.reps < 2 {
                    return Err(bad("colreg", "need n >= 4 and reps >= 2"));
                }
            }
            Selftest => {
                let s = &self.selftest;
                if s.max_dim == 0 || s.max_depth == 0 || s.max_vertices < 3 || s.cases == 0 {
                    return Err(bad("selftest", "need cases, max_dim, max_depth >= 1 and max_vertices >= 3"));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_required() {
        let cfg = ExperimentConfig::from_toml("n = 10").unwrap();
        let err = cfg.validate(ExperimentKind::Clt).unwrap_err();
        assert!(err.0.starts_with("seed:"), "{err}");
    }

    #[test]
    fn unknown_experiment_kind_is_rejected() {
        let err = ExperimentConfig::from_toml("experiment = \"bogus\"\nseed = 1").unwrap_err();
        assert!(err.0.contains("experiment"), "{err}");
    }

    #[test]
    fn unknown_fields_are_named() {
        let err = ExperimentConfig::from_toml("seed = 1\n[infill]\nmin_lvl = 2").unwrap_err();
        assert!(err.0.contains("min_lvl"), "{err}");
    }

    #[test]
    fn field_errors_carry_their_path() {
        let cfg = ExperimentConfig::from_toml("seed = 1\n[process]\nkind = \"fbm\"\nH = 1.5").unwrap();
        let err = cfg.validate(ExperimentKind::Infill).unwrap_err();
        assert!(err.0.starts_with("process.hurst:"), "{err}");

        let cfg = ExperimentConfig::from_toml("seed = 1\ndepth = 2\nwords = [\"1\", \"1.1.1\"]").unwrap();
        assert!(cfg.validate(ExperimentKind::VarianceReduction).is_ok());
        let err = cfg.words_or(1, &[]).unwrap_err();
        assert!(err.0.starts_with("words[1]:"), "{err}");
    }

    #[test]
    fn mismatched_experiment_guard() {
        let cfg = ExperimentConfig::from_toml("experiment = \"clt\"\nseed = 1").unwrap();
        assert!(cfg.validate(ExperimentKind::Infill).is_err());
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
            experiment = "density"
            seed = 7
            words = ["1.1", "2.1"]
            n = 100
            replications = 50
            modes = ["c1", "fixed:0.5"]
            [process]
            kind = "heston"
            s0 = 1.0
            v0 = 0.1
            theta = 0.1
            kappa = 0.6
            xi = 0.2
            rho = -0.15
            [partition]
            scheme = "rule"
            max_level = 9
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        cfg.validate(ExperimentKind::Density).unwrap();
        assert_eq!(cfg.partition, Some(PartitionSpec::Rule { max_level: 9 }));
        assert_eq!(cfg.control_modes().unwrap()[1], ControlMode::Fixed(0.5));
        let back: ExperimentConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn mesh_rule_levels() {
        assert_eq!(rule_level(5), 0);
        assert_eq!(rule_level(100), 9);
        assert_eq!(PartitionSpec::Rule { max_level: 6 }.steps(100), 64);
        assert_eq!(PartitionSpec::Rule { max_level: 12 }.steps(100), 512);
    }

    #[test]
    fn car_matrices_accept_uppercase_aliases() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 1\n[process]\nkind = \"car\"\nA1 = [[3.0, 0.0], [0.0, 3.0]]\nA2 = [[2.0, 0.0], [0.0, 2.0]]",
        )
        .unwrap();
        cfg.validate(ExperimentKind::Clt).unwrap_err(); // replications default 100 < 200
        cfg.validate(ExperimentKind::Consistency).unwrap();
    }
}
