//! `eval`: ternary preference accuracy of a policy on a pair corpus.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tierank_core::{ingest, ternary_accuracy, Beta, Corpus, PolicyTable, TieParam};

use crate::util::{atomic_write, ensure_out_dir, resolve_params, Failure, RunManifest};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Trained policy JSON
    #[arg(long)]
    #[serde(skip)]
    policy: PathBuf,
    /// Test pair corpus (JSONL)
    #[arg(long)]
    #[serde(skip)]
    corpus: PathBuf,
    /// Frozen reference policy JSON (default: uniform over the policy's table)
    #[arg(long)]
    #[serde(skip)]
    reference: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    /// Tie buffer used by the ternary metric
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// Score tie-labeled pairs too (default drops them from the report)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    include_ties: Option<bool>,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Params {
    beta: f64,
    alpha: f64,
    include_ties: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            beta: 0.01,
            alpha: 0.5,
            include_ties: false,
        }
    }
}

pub fn run(args: Args) -> Result<(), Failure> {
    let overlay = serde_json::to_value(&args).expect("args serialize");
    let params: Params = resolve_params(&Params::default(), args.config.as_deref(), overlay)?;

    let policy_text = std::fs::read_to_string(&args.policy).map_err(|e| {
        Failure::Validation(anyhow::anyhow!(
            "cannot read {}: {e}",
            args.policy.display()
        ))
    })?;
    let policy = PolicyTable::from_json(&policy_text).map_err(|e| {
        Failure::Validation(anyhow::anyhow!("bad policy {}: {e}", args.policy.display()))
    })?;
    let reference = match &args.reference {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Validation(anyhow::anyhow!("cannot read {}: {e}", path.display()))
            })?;
            PolicyTable::from_json(&text).map_err(|e| {
                Failure::Validation(anyhow::anyhow!("bad policy {}: {e}", path.display()))
            })?
        }
        None => policy.zeroed_like(),
    };

    let mut test = ingest(&args.corpus)?;
    if !params.include_ties {
        let kept: Vec<_> = test.pairs().iter().filter(|p| !p.is_tie).cloned().collect();
        test = Corpus::from_pairs(kept)?;
    }

    let report = ternary_accuracy(
        &policy,
        &reference,
        &test,
        Beta::new(params.beta)?,
        &TieParam::new(params.alpha)?,
    )
    .map_err(crate::util::classify_eval_error)?;

    ensure_out_dir(&args.out)?;
    let mut json = report.to_json_pretty();
    json.push('\n');
    atomic_write(&args.out.join("report.json"), &json)?;

    let mut manifest = RunManifest::new(
        "eval",
        None,
        serde_json::to_value(&params).expect("params serialize"),
    );
    manifest.add_input(&args.policy)?;
    manifest.add_input(&args.corpus)?;
    if let Some(p) = &args.reference {
        manifest.add_input(p)?;
    }
    manifest.add_output("report.json");
    manifest.write(&args.out)?;

    println!(
        "eval: accuracy {:.4} on {} pairs (mean margin {:.6}) -> {}",
        report.accuracy,
        report.n_pairs,
        report.mean_margin,
        args.out.display()
    );
    Ok(())
}
