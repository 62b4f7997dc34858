//! `oracle-check`: the numerical validation suites, as a command.
//!
//! Three checks run back to back: the quadrature oracle against the closed
//! forms, the analytic margin derivatives against central differences on a
//! dense grid, and the full policy-parameter gradients against central
//! differences on random configurations. Exit code 2 on any violation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tierank_core::{
    dpo_loss, finite_diff_check, g_weight, gradient_disagreement, quadrature_oracle,
    tobt_probs_from_rewards, todo_pref_loss, todo_tie_loss, Beta, LogStrengthDiff, Margin,
    PolicyTable, PreferencePair, TieIndicator, TieParam,
};

use crate::util::{atomic_write, ensure_out_dir, resolve_params, Failure, RunManifest};

const QUAD_TOL: f64 = 1e-8;
const LOSS_GRID_TOL: f64 = 1e-6;
const POLICY_TOL: f64 = 1e-5;

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Random cases per suite
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cases: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    seed: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Self-test: flip a sign inside the comparison so the harness must fail
    #[arg(long, hide = true)]
    #[serde(skip)]
    inject_fault: bool,
}

#[derive(Serialize, Deserialize)]
struct Params {
    cases: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self { cases: 100 }
    }
}

pub fn run(args: Args) -> Result<(), Failure> {
    let overlay = serde_json::to_value(&args).expect("args serialize");
    let params: Params = resolve_params(&Params::default(), args.config.as_deref(), overlay)?;
    if params.cases == 0 {
        return Err(Failure::Validation(anyhow::anyhow!("--cases must be >= 1")));
    }

    let mut report = String::new();
    let quad_err = quadrature_suite(params.cases, args.seed, args.inject_fault)?;
    writeln!(
        report,
        "closed-form vs quadrature: cases={} max_abs_err={:e} (tol {:e})",
        params.cases, quad_err, QUAD_TOL
    )
    .unwrap();

    let loss_err = loss_grid_suite();
    writeln!(
        report,
        "margin-derivative grid: max_rel_err={:e} (tol {:e})",
        loss_err, LOSS_GRID_TOL
    )
    .unwrap();

    let policy_err = policy_suite(params.cases, args.seed)?;
    writeln!(
        report,
        "policy-gradient check: configs={} max_rel_err={:e} (tol {:e})",
        params.cases, policy_err, POLICY_TOL
    )
    .unwrap();

    let pass = quad_err <= QUAD_TOL && loss_err <= LOSS_GRID_TOL && policy_err <= POLICY_TOL;
    writeln!(
        report,
        "oracle-check: {}",
        if pass { "PASS" } else { "FAIL" }
    )
    .unwrap();
    print!("{report}");

    ensure_out_dir(&args.out)?;
    atomic_write(&args.out.join("report.txt"), &report)?;
    let mut manifest = RunManifest::new(
        "oracle-check",
        Some(args.seed),
        serde_json::to_value(&params).expect("params serialize"),
    );
    manifest.add_output("report.txt");
    manifest.write(&args.out)?;

    if pass {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "numerical checks failed: quadrature={quad_err:e}, loss-grid={loss_err:e}, policy={policy_err:e}"
        )))
    }
}

fn quadrature_suite(cases: usize, seed: u64, inject_fault: bool) -> Result<f64, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    for _ in 0..cases {
        let d: f64 = rng.random_range(-10.0..10.0);
        let a: f64 = rng.random_range(1e-6..3.0);
        let tp = TieParam::new(a)?;
        let closed = tobt_probs_from_rewards(d, 0.0, &tp);
        let numeric = quadrature_oracle(LogStrengthDiff::new(d)?, &tp)?;
        let closed_prefer = if inject_fault {
            -closed.prefer()
        } else {
            closed.prefer()
        };
        max_err = max_err
            .max((closed_prefer - numeric.prefer()).abs())
            .max((closed.disprefer() - numeric.disprefer()).abs())
            .max((closed.tie() - numeric.tie()).abs());
    }
    Ok(max_err)
}

fn loss_grid_suite() -> f64 {
    const H: f64 = 1e-5;
    let mut max_err = 0.0f64;
    let grid: Vec<f64> = (0..=80).map(|i| -10.0 + i as f64 * 0.25).collect();
    for &mu in &grid {
        let m = Margin::new(mu).unwrap();
        let lg = dpo_loss(m);
        let numeric = central_diff(|x| dpo_loss(Margin::new(x).unwrap()).loss, mu, H);
        max_err = max_err.max(gradient_disagreement(lg.dloss_dmu, numeric));
    }
    for alpha in [0.1, 0.5, 0.8] {
        let tp = TieParam::new(alpha).unwrap();
        for &mu in &grid {
            let m = Margin::new(mu).unwrap();
            let pref = todo_pref_loss(m, &tp);
            let pref_fd =
                central_diff(|x| todo_pref_loss(Margin::new(x).unwrap(), &tp).loss, mu, H);
            max_err = max_err.max(gradient_disagreement(pref.dloss_dmu, pref_fd));

            let tie = todo_tie_loss(m, &tp).unwrap();
            let tie_fd = central_diff(
                |x| todo_tie_loss(Margin::new(x).unwrap(), &tp).unwrap().loss,
                mu,
                H,
            );
            max_err = max_err.max(gradient_disagreement(tie.dloss_dmu, tie_fd));

            // g_weight is the negated tie derivative
            max_err = max_err.max(gradient_disagreement(g_weight(m, &tp), -tie_fd));
        }
    }
    max_err
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn policy_suite(cases: usize, seed: u64) -> Result<f64, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut max_err = 0.0f64;
    for case in 0..cases {
        let n = rng.random_range(2..=6usize);
        let responses: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
        let registry: BTreeMap<String, Vec<String>> =
            [("p".to_string(), responses.clone())].into_iter().collect();
        let mut policy = PolicyTable::zeroed(&registry)?;
        let mut reference = PolicyTable::zeroed(&registry)?;
        for r in &responses {
            policy.set_logit("p", r, rng.random_range(-2.0..2.0))?;
            reference.set_logit("p", r, rng.random_range(-1.0..1.0))?;
        }
        let i1 = rng.random_range(0..n);
        let mut i2 = rng.random_range(0..n - 1);
        if i2 >= i1 {
            i2 += 1;
        }
        let is_tie = rng.random_range(0..2) == 1;
        let pair = PreferencePair {
            prompt_id: "p".into(),
            y1_id: responses[i1].clone(),
            y2_id: responses[i2].clone(),
            score_1: None,
            score_2: None,
            is_tie,
        };
        let beta = Beta::new([0.01, 0.1, 1.0][case % 3])?;
        let tp = TieParam::new([0.1, 0.5, 0.8][case % 3])?;
        let err = finite_diff_check(
            &policy,
            &reference,
            &pair,
            beta,
            &tp,
            TieIndicator::new(is_tie),
        )?;
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
