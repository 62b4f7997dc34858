//! Ternary preference modeling and alignment toolkit.
//!
//! The crate centers on a pairwise ranking model with an explicit tie
//! outcome: a buffer `alpha` on the log-strength gap gives the tie rank
//! positive mass, and the matching alignment objectives ([`loss`]) optimize a
//! policy's implicit reward margin against ternary labels instead of forcing
//! every pair into a binary preference. Around that core sit a deterministic
//! tabular-policy trainer ([`trainer`]), a preference-pair data pipeline
//! ([`data`]), a ternary accuracy evaluator ([`eval`]), an alpha screening
//! simulation ([`alpha`]), and independent numerical oracles — adaptive
//! quadrature for the integral form of the model ([`quadrature`]) and
//! finite-difference checks for every gradient ([`policy::finite_diff_check`]).

pub mod alpha;
pub mod data;
pub mod eval;
pub mod loss;
pub mod numeric;
pub mod policy;
pub mod quadrature;
pub mod tobt;
pub mod trainer;

pub use alpha::{
    alpha_csv, default_alpha_grid, emit_alpha_csv, parse_alpha_csv, simulate_alpha, AlphaError,
    AlphaSimConfig, AlphaSimRow,
};
pub use data::{
    corpus_from_world, generate_synthetic, ingest, quantize, resample_tie_ratio, split, Corpus,
    DataError, LatentWorld, PreferencePair,
};
pub use eval::{
    compare, ternary_accuracy, CompareCell, CompareConfig, CompareSummary, ComparisonTable,
    ConfusionRow, EvalError, EvalReport, Predicted,
};
pub use loss::{
    dpo_loss, g_weight, todo_loss, todo_pref_loss, todo_tie_loss, LossError, LossGrad, Margin,
    TieIndicator,
};
pub use policy::{
    finite_diff_check, gradient_disagreement, margin, pair_param_grad, Beta, ParamGrad,
    PolicyError, PolicyTable,
};
pub use quadrature::{quadrature_oracle, QuadratureError};
pub use tobt::{
    bt_prob, tobt_probs, tobt_probs_from_rewards, LogStrengthDiff, ModelError, RankProbabilities,
    Strength, TieParam,
};
pub use trainer::{
    margin_trace_summary, train, AdamParams, LinearFit, MarginTrace, Method, OptimizerKind,
    TraceRecord, TrainConfig, TrainError,
};
