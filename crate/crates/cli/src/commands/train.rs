//! `train`: optimize a tabular policy on a pair corpus.
//!
//! Defaults follow the reference hyperparameters: alpha 0.5, beta 0.01,
//! 3 epochs, Adam with a cosine learning-rate schedule.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tierank_core::{ingest, train, AdamParams, Method, OptimizerKind, PolicyTable, TrainConfig};

use crate::util::{
    atomic_write, classify_train_error, ensure_out_dir, resolve_params, Failure, RunManifest,
};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Training pair corpus (JSONL)
    #[arg(long)]
    #[serde(skip)]
    corpus: PathBuf,
    /// dpo or todo
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    /// Tie buffer (todo objective and tie pairs)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    /// sgd or adam
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerKind>,
    /// Shuffle batch order each epoch
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    shuffle: Option<bool>,
    /// Initial policy JSON (default: uniform over the corpus registry)
    #[arg(long)]
    #[serde(skip)]
    policy_init: Option<PathBuf>,
    /// Frozen reference policy JSON (default: uniform)
    #[arg(long)]
    #[serde(skip)]
    reference: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    seed: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Params {
    method: Method,
    alpha: f64,
    beta: f64,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    optimizer: OptimizerKind,
    #[serde(default)]
    adam: AdamParams,
    shuffle: bool,
}

impl Default for Params {
    fn default() -> Self {
        let base = TrainConfig::default();
        Self {
            method: base.method,
            alpha: base.alpha,
            beta: base.beta,
            learning_rate: base.learning_rate,
            epochs: base.epochs,
            batch_size: base.batch_size,
            optimizer: base.optimizer,
            adam: base.adam,
            shuffle: base.shuffle,
        }
    }
}

fn load_policy(path: &PathBuf) -> Result<PolicyTable, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(anyhow::anyhow!("cannot read {}: {e}", path.display())))?;
    PolicyTable::from_json(&text)
        .map_err(|e| Failure::Validation(anyhow::anyhow!("bad policy {}: {e}", path.display())))
}

pub fn run(args: Args) -> Result<(), Failure> {
    let overlay = serde_json::to_value(&args).expect("args serialize");
    let params: Params = resolve_params(&Params::default(), args.config.as_deref(), overlay)?;

    let corpus = ingest(&args.corpus)?;
    let reference = match &args.reference {
        Some(path) => load_policy(path)?,
        None => PolicyTable::zeroed(corpus.registry())?,
    };
    let policy_init = match &args.policy_init {
        Some(path) => load_policy(path)?,
        None => reference.zeroed_like(),
    };

    let cfg = TrainConfig {
        method: params.method,
        alpha: params.alpha,
        beta: params.beta,
        learning_rate: params.learning_rate,
        epochs: params.epochs,
        batch_size: params.batch_size,
        optimizer: params.optimizer,
        adam: params.adam,
        seed: args.seed,
        shuffle: params.shuffle,
    };
    let (policy, trace) =
        train(&corpus, &policy_init, &reference, &cfg).map_err(classify_train_error)?;

    ensure_out_dir(&args.out)?;
    atomic_write(&args.out.join("policy.json"), &policy.to_json_pretty())?;
    atomic_write(&args.out.join("margins.csv"), &trace.to_csv())?;

    let mut manifest = RunManifest::new(
        "train",
        Some(args.seed),
        serde_json::to_value(&params).expect("params serialize"),
    );
    manifest.add_input(&args.corpus)?;
    if let Some(p) = &args.policy_init {
        manifest.add_input(p)?;
    }
    if let Some(p) = &args.reference {
        manifest.add_input(p)?;
    }
    manifest.add_output("policy.json");
    manifest.add_output("margins.csv");
    manifest.write(&args.out)?;

    let last = trace.records().last().expect("at least one step");
    println!(
        "train: {} on {} pairs for {} steps; final mean margin {:.6}, mean loss {:.6} -> {}",
        params.method,
        corpus.len(),
        trace.len(),
        last.mean_margin,
        last.mean_loss,
        args.out.display()
    );
    Ok(())
}
