//! `compare`: train and evaluate methods across tie ratios and seeds on one
//! synthetic world.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tierank_core::{compare, AdamParams, CompareConfig, LatentWorld, Method, OptimizerKind};

use crate::util::{
    atomic_write, classify_eval_error, ensure_out_dir, resolve_params, Failure, RunManifest,
};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Latent world JSON produced by gen-data
    #[arg(long)]
    #[serde(skip)]
    world: PathBuf,
    /// Comma-separated tie ratios
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    ratios: Option<Vec<f64>>,
    /// Comma-separated methods (dpo, todo)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    methods: Option<Vec<Method>>,
    /// Number of seeds, numbered seed..seed+n
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<usize>,
    /// Stratified train-set size per cell
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    train_size: Option<usize>,
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
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerKind>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    shuffle: Option<bool>,
    /// Base seed for the seed range
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
    ratios: Vec<f64>,
    methods: Vec<Method>,
    seeds: usize,
    train_size: usize,
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
        let base = CompareConfig::default();
        Self {
            ratios: vec![0.0, 0.1, 0.2, 0.3],
            methods: vec![Method::Dpo, Method::Todo],
            seeds: 5,
            train_size: base.train_size,
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

pub fn run(args: Args) -> Result<(), Failure> {
    let overlay = serde_json::to_value(&args).expect("args serialize");
    let params: Params = resolve_params(&Params::default(), args.config.as_deref(), overlay)?;
    if params.seeds == 0 {
        return Err(Failure::Validation(anyhow::anyhow!("--seeds must be >= 1")));
    }

    let world = LatentWorld::read_json(&args.world)?;
    let seeds: Vec<u64> = (0..params.seeds as u64).map(|i| args.seed + i).collect();
    let cfg = CompareConfig {
        train_size: params.train_size,
        alpha: params.alpha,
        beta: params.beta,
        learning_rate: params.learning_rate,
        epochs: params.epochs,
        batch_size: params.batch_size,
        optimizer: params.optimizer,
        adam: params.adam,
        shuffle: params.shuffle,
    };
    let table = compare(&world, &params.ratios, &params.methods, &seeds, &cfg)
        .map_err(classify_eval_error)?;

    ensure_out_dir(&args.out)?;
    atomic_write(&args.out.join("comparison.csv"), &table.to_csv())?;

    let mut manifest = RunManifest::new(
        "compare",
        Some(args.seed),
        serde_json::to_value(&params).expect("params serialize"),
    );
    manifest.add_input(&args.world)?;
    manifest.add_output("comparison.csv");
    manifest.write(&args.out)?;

    for s in &table.summaries {
        println!(
            "compare: ratio {:.2} {}: accuracy {:.4} +- {:.4} (mean margin {:.6})",
            s.tie_ratio, s.method, s.mean_accuracy, s.accuracy_spread, s.mean_margin
        );
    }
    Ok(())
}
