//! Signature-based estimation of expected signatures, pricing and hedging.

pub mod colreg;
pub mod error;
pub mod esig;
pub mod path;
pub mod processes;
pub mod sigfin;
pub mod signature;
pub mod stats;
pub mod tensor;
pub mod words;

pub use error::{Error, Result};
pub use tensor::{ExpScratch, Functional, TensorSeries};
pub use words::{shuffle, Word, WordLayout, WordPolynomial};
pub use path::{Partition, PiecewiseLinearPath};
pub use signature::{
    control_term, prefix_signatures, sig_word, signature, signature_causal, word_features,
    WordFeatures,
};
pub use processes::{
    simulate_batch, simulate_bm, simulate_car2, simulate_fbm, simulate_gaussian, simulate_heston,
    simulate_ou, Car2Params, Car2Sampler, FbmParams, GaussianSampler, HestonParams, OuParams,
    OuSampler, PathSeed,
};
pub use esig::{
    corrected_expected_signature, estimate, estimate_c1, estimate_c1_centered, estimate_c2,
    expected_signature, hac_long_run_cov, mse_diff_diagnostic, ControlMode, EstimateReport,
    HacEstimate, HacKernel, HacOptions, MseDiagnostic,
};
pub use sigfin::{
    fit_payoff_functional, hedge, pnl_backtest, price, HedgeResult, PriceResult, PricingSpec,
};
pub use colreg::{
    controlled_ols_oracle, controlled_ols_sample, joint_ols, ols, rmse_experiment, Dependence,
    RmseConfig, RmseRow,
};
