//! `gen-data`: synthetic latent-reward world plus its labeled pair corpus.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tierank_core::{generate_synthetic, TieParam};

use crate::util::{atomic_write, ensure_out_dir, resolve_params, Failure, RunManifest};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Number of prompts
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    prompts: Option<usize>,
    /// Candidate responses per prompt
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: Option<usize>,
    /// Standard deviation of the latent rewards
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spread: Option<f64>,
    /// Score quantization grid step (ties = same bin)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    quant: Option<f64>,
    /// Tie buffer recorded with the world
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    /// JSON config file; explicit flags override it
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Params {
    prompts: usize,
    candidates: usize,
    spread: f64,
    quant: f64,
    alpha: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            prompts: 200,
            candidates: 4,
            spread: 1.0,
            quant: 0.5,
            alpha: 0.5,
        }
    }
}

pub fn run(args: Args) -> Result<(), Failure> {
    let overlay = serde_json::to_value(&args).expect("args serialize");
    let params: Params = resolve_params(&Params::default(), args.config.as_deref(), overlay)?;
    if !params.quant.is_finite() {
        return Err(Failure::Validation(anyhow::anyhow!(
            "quant must be finite for file output"
        )));
    }
    let tp = TieParam::new(params.alpha)?;
    let (world, corpus) = generate_synthetic(
        params.prompts,
        params.candidates,
        params.spread,
        &tp,
        params.quant,
        args.seed,
    )?;
    ensure_out_dir(&args.out)?;
    atomic_write(&args.out.join("world.json"), &world.to_json_pretty())?;
    atomic_write(&args.out.join("corpus.jsonl"), &corpus.to_jsonl())?;

    let mut manifest = RunManifest::new(
        "gen-data",
        Some(args.seed),
        serde_json::to_value(&params).expect("params serialize"),
    );
    manifest.add_output("world.json");
    manifest.add_output("corpus.jsonl");
    manifest.write(&args.out)?;

    println!(
        "gen-data: {} prompts x {} candidates -> {} pairs (tie ratio {:.4}) in {}",
        params.prompts,
        params.candidates,
        corpus.len(),
        corpus.tie_ratio(),
        args.out.display()
    );
    Ok(())
}
