//! `alpha-sim`: initial-loss screening across the tie-buffer grid.

use std::path::PathBuf;

use serde::Serialize;
use tierank_core::{alpha_csv, simulate_alpha, AlphaSimConfig};

use crate::util::{atomic_write, ensure_out_dir, resolve_params, Failure, RunManifest};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Comma-separated alpha grid (default spans 0.01 to 10)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip)]
    grid: Option<Vec<f64>>,
    /// Margin draws per grid point
    #[arg(long)]
    #[serde(skip)]
    samples: Option<usize>,
    /// Standard deviation of the simulated initial margins
    #[arg(long)]
    #[serde(skip)]
    sigma: Option<f64>,
    /// Mean preference-loss budget
    #[arg(long)]
    #[serde(skip)]
    pref_threshold: Option<f64>,
    /// Mean tie-loss budget
    #[arg(long)]
    #[serde(skip)]
    tie_threshold: Option<f64>,
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

pub fn run(args: Args) -> Result<(), Failure> {
    // flag names differ from the config-file field names, so build the
    // overlay by hand
    let mut overlay = serde_json::Map::new();
    if let Some(g) = &args.grid {
        overlay.insert("alpha_grid".into(), serde_json::json!(g));
    }
    if let Some(n) = args.samples {
        overlay.insert("mu_samples".into(), serde_json::json!(n));
    }
    if let Some(s) = args.sigma {
        overlay.insert("mu_sigma".into(), serde_json::json!(s));
    }
    if let Some(t) = args.pref_threshold {
        overlay.insert("pref_threshold".into(), serde_json::json!(t));
    }
    if let Some(t) = args.tie_threshold {
        overlay.insert("tie_threshold".into(), serde_json::json!(t));
    }
    overlay.insert("seed".into(), serde_json::json!(args.seed));

    let cfg: AlphaSimConfig = resolve_params(
        &AlphaSimConfig::default(),
        args.config.as_deref(),
        serde_json::Value::Object(overlay),
    )?;

    let rows = simulate_alpha(&cfg)?;
    let csv = alpha_csv(&rows)?;
    ensure_out_dir(&args.out)?;
    atomic_write(&args.out.join("alpha_sim.csv"), &csv)?;

    let mut manifest = RunManifest::new(
        "alpha-sim",
        Some(args.seed),
        serde_json::to_value(&cfg).expect("config serialize"),
    );
    manifest.add_output("alpha_sim.csv");
    manifest.write(&args.out)?;

    let feasible: Vec<f64> = rows
        .iter()
        .filter(|r| r.feasible)
        .map(|r| r.alpha)
        .collect();
    println!(
        "alpha-sim: {} grid points, feasible alphas: {:?} -> {}",
        rows.len(),
        feasible,
        args.out.display()
    );
    Ok(())
}
