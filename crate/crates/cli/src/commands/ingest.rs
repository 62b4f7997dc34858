//! `ingest`: canonicalize score-labeled JSONL, with optional tie-ratio
//! resampling and prompt-level splitting.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tierank_core::{ingest, resample_tie_ratio, split};

use crate::util::{atomic_write, ensure_out_dir, resolve_params, Failure, RunManifest};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Input pair JSONL
    #[arg(long)]
    #[serde(skip)]
    input: PathBuf,
    /// Resample to this tie ratio (requires --size and --seed)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
    /// Resampled corpus size
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    /// Prompt-level test fraction (requires --seed)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test_fraction: Option<f64>,
    /// Drop tie pairs from the test side of the split
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    exclude_ties_from_test: Option<bool>,
    /// Required when resampling or splitting
    #[arg(long)]
    #[serde(skip)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Default)]
struct Params {
    ratio: Option<f64>,
    size: Option<usize>,
    test_fraction: Option<f64>,
    #[serde(default)]
    exclude_ties_from_test: bool,
}

pub fn run(args: Args) -> Result<(), Failure> {
    let overlay = serde_json::to_value(&args).expect("args serialize");
    let params: Params = resolve_params(&Params::default(), args.config.as_deref(), overlay)?;

    let needs_seed = params.ratio.is_some() || params.test_fraction.is_some();
    if needs_seed && args.seed.is_none() {
        return Err(Failure::Validation(anyhow::anyhow!(
            "--seed is required when resampling or splitting"
        )));
    }
    if params.ratio.is_some() != params.size.is_some() {
        return Err(Failure::Validation(anyhow::anyhow!(
            "--ratio and --size must be given together"
        )));
    }

    let mut corpus = ingest(&args.input)?;
    let mut manifest = RunManifest::new(
        "ingest",
        args.seed,
        serde_json::to_value(&params).expect("params serialize"),
    );
    manifest.add_input(&args.input)?;
    ensure_out_dir(&args.out)?;

    if let (Some(ratio), Some(size)) = (params.ratio, params.size) {
        corpus = resample_tie_ratio(&corpus, ratio, size, args.seed.unwrap())?;
    }

    if let Some(fraction) = params.test_fraction {
        let (train, test) = split(
            &corpus,
            fraction,
            args.seed.unwrap(),
            params.exclude_ties_from_test,
        )?;
        atomic_write(&args.out.join("train.jsonl"), &train.to_jsonl())?;
        atomic_write(&args.out.join("test.jsonl"), &test.to_jsonl())?;
        manifest.add_output("train.jsonl");
        manifest.add_output("test.jsonl");
        manifest.write(&args.out)?;
        println!(
            "ingest: {} train pairs (tie ratio {:.4}), {} test pairs -> {}",
            train.len(),
            train.tie_ratio(),
            test.len(),
            args.out.display()
        );
    } else {
        atomic_write(&args.out.join("corpus.jsonl"), &corpus.to_jsonl())?;
        manifest.add_output("corpus.jsonl");
        manifest.write(&args.out)?;
        println!(
            "ingest: {} pairs (tie ratio {:.4}) -> {}",
            corpus.len(),
            corpus.tie_ratio(),
            args.out.display()
        );
    }
    Ok(())
}
