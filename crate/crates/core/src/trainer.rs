//! Deterministic minibatch optimization of a tabular policy against a pair
//! corpus, with per-step margin tracing.
//!
//! Each step averages the per-pair gradients of the batch in batch order,
//! then applies SGD or Adam with a cosine learning-rate decay from the
//! configured rate to zero over the total step count. Two runs with identical
//! inputs and seed produce bit-identical policies and traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{fisher_yates, Corpus};
use crate::loss::{dpo_loss, todo_loss, LossError, TieIndicator};
use crate::policy::{margin, pair_param_grad, Beta, PolicyError, PolicyTable};
use crate::tobt::{ModelError, TieParam};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dpo,
    Todo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Dpo => write!(f, "dpo"),
            Method::Todo => write!(f, "todo"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dpo" => Ok(Method::Dpo),
            "todo" => Ok(Method::Todo),
            other => Err(format!("unknown method: {other} (expected dpo or todo)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptimizerKind::Sgd => write!(f, "sgd"),
            OptimizerKind::Adam => write!(f, "adam"),
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer: {other} (expected sgd or adam)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub b1: f64,
    pub b2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            b1: 0.9,
            b2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    /// Tie buffer. Ignored by the dpo method; must be positive for todo when
    /// the corpus contains tie pairs.
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub adam: AdamParams,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Todo,
            alpha: 0.5,
            beta: 0.01,
            learning_rate: 0.05,
            epochs: 3,
            batch_size: 16,
            optimizer: OptimizerKind::Adam,
            adam: AdamParams::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training diverged at step {step}: non-finite loss, margin, or logit")]
    Diverged { step: usize },
    #[error("margin trace needs at least two records with distinct steps")]
    DegenerateTrace,
    #[error("malformed trace csv: {0}")]
    MalformedCsv(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One optimization step's batch statistics, recorded before the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub mean_margin: f64,
    pub mean_loss: f64,
    pub tie_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarginTrace {
    records: Vec<TraceRecord>,
}

impl MarginTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_margin,mean_loss,tie_fraction\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.step, r.mean_margin, r.mean_loss, r.tie_fraction
            ));
        }
        out
    }

    pub fn from_csv(s: &str) -> Result<Self, TrainError> {
        let mut lines = s.lines();
        match lines.next() {
            Some("step,mean_margin,mean_loss,tie_fraction") => {}
            other => {
                return Err(TrainError::MalformedCsv(format!(
                    "unexpected header: {other:?}"
                )))
            }
        }
        let mut records = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(TrainError::MalformedCsv(format!("bad row: {line}")));
            }
            let parse = |c: &str| -> Result<f64, TrainError> {
                c.parse()
                    .map_err(|e| TrainError::MalformedCsv(format!("{line}: {e}")))
            };
            records.push(TraceRecord {
                step: cols[0]
                    .parse()
                    .map_err(|e| TrainError::MalformedCsv(format!("{line}: {e}")))?,
                mean_margin: parse(cols[1])?,
                mean_loss: parse(cols[2])?,
                tie_fraction: parse(cols[3])?,
            });
        }
        Ok(Self { records })
    }
}

/// Least-squares line through the per-step mean margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn margin_trace_summary(trace: &MarginTrace) -> Result<LinearFit, TrainError> {
    let n = trace.records.len();
    if n < 2 {
        return Err(TrainError::DegenerateTrace);
    }
    let nf = n as f64;
    let mean_x = trace.records.iter().map(|r| r.step as f64).sum::<f64>() / nf;
    let mean_y = trace.records.iter().map(|r| r.mean_margin).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for r in &trace.records {
        let dx = r.step as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (r.mean_margin - mean_y);
    }
    if sxx == 0.0 {
        return Err(TrainError::DegenerateTrace);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: mean_y - slope * mean_x,
    })
}

fn validate_config(cfg: &TrainConfig, corpus: &Corpus) -> Result<(), TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::Config("corpus is empty".into()));
    }
    if !cfg.beta.is_finite() || cfg.beta <= 0.0 {
        return Err(TrainError::Config(format!(
            "beta must be positive, got {}",
            cfg.beta
        )));
    }
    if !cfg.learning_rate.is_finite() || cfg.learning_rate <= 0.0 {
        return Err(TrainError::Config(format!(
            "learning_rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    if cfg.epochs == 0 {
        return Err(TrainError::Config("epochs must be >= 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::Config("batch_size must be >= 1".into()));
    }
    if !cfg.alpha.is_finite() || cfg.alpha < 0.0 {
        return Err(TrainError::Config(format!(
            "alpha must be finite and non-negative, got {}",
            cfg.alpha
        )));
    }
    if cfg.method == Method::Todo && cfg.alpha == 0.0 && corpus.tie_count() > 0 {
        return Err(TrainError::Config(
            "alpha must be positive when the corpus contains tie pairs".into(),
        ));
    }
    if cfg.optimizer == OptimizerKind::Adam {
        let a = &cfg.adam;
        if !(0.0..1.0).contains(&a.b1)
            || !(0.0..1.0).contains(&a.b2)
            || !a.eps.is_finite()
            || a.eps <= 0.0
        {
            return Err(TrainError::Config(format!(
                "adam parameters out of range: b1={}, b2={}, eps={}",
                a.b1, a.b2, a.eps
            )));
        }
    }
    Ok(())
}

fn cosine_lr(lr_max: f64, step: usize, total_steps: usize) -> f64 {
    lr_max * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos())
}

enum OptimizerState {
    Sgd,
    Adam {
        // (first moment, second moment) per parameter; dense update so the
        // moment decay matches a full-parameter optimizer
        moments: BTreeMap<(String, String), (f64, f64)>,
        t: u64,
        params: AdamParams,
    },
}

impl OptimizerState {
    fn new(cfg: &TrainConfig, policy: &PolicyTable) -> Self {
        match cfg.optimizer {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Adam => OptimizerState::Adam {
                moments: policy
                    .parameter_keys()
                    .into_iter()
                    .map(|k| (k, (0.0, 0.0)))
                    .collect(),
                t: 0,
                params: cfg.adam,
            },
        }
    }

    fn apply(
        &mut self,
        policy: &mut PolicyTable,
        grad_sum: &BTreeMap<(String, String), f64>,
        batch_size: f64,
        lr: f64,
    ) -> Result<(), PolicyError> {
        match self {
            OptimizerState::Sgd => {
                for ((prompt, response), g) in grad_sum {
                    let mean_g = g / batch_size;
                    let cur = policy.logit(prompt, response)?;
                    policy.set_logit(prompt, response, cur - lr * mean_g)?;
                }
            }
            OptimizerState::Adam { moments, t, params } => {
                *t += 1;
                let bc1 = 1.0 - params.b1.powi(*t as i32);
                let bc2 = 1.0 - params.b2.powi(*t as i32);
                for ((prompt, response), (m, v)) in moments.iter_mut() {
                    let g = grad_sum
                        .get(&(prompt.clone(), response.clone()))
                        .map_or(0.0, |g| g / batch_size);
                    *m = params.b1 * *m + (1.0 - params.b1) * g;
                    *v = params.b2 * *v + (1.0 - params.b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    let cur = policy.logit(prompt, response)?;
                    policy.set_logit(
                        prompt,
                        response,
                        cur - lr * m_hat / (v_hat.sqrt() + params.eps),
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Runs `epochs * ceil(N / batch_size)` optimization steps of the configured
/// objective and returns the final policy with its margin trace.
pub fn train(
    corpus: &Corpus,
    policy_init: &PolicyTable,
    reference: &PolicyTable,
    cfg: &TrainConfig,
) -> Result<(PolicyTable, MarginTrace), TrainError> {
    validate_config(cfg, corpus)?;
    for pair in corpus.pairs() {
        policy_init.covers_pair(pair)?;
        reference.covers_pair(pair)?;
    }
    let tp = TieParam::new(cfg.alpha)?;
    let beta = Beta::new(cfg.beta)?;
    let pairs = corpus.pairs();
    let n = pairs.len();
    let total_steps = cfg.epochs * n.div_ceil(cfg.batch_size);

    let mut policy = policy_init.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = MarginTrace::default();
    let mut opt = OptimizerState::new(cfg, &policy);
    let mut step = 0usize;

    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        if cfg.shuffle {
            fisher_yates(&mut order, &mut rng);
        }
        for chunk in order.chunks(cfg.batch_size) {
            let lr = cosine_lr(cfg.learning_rate, step, total_steps);
            let mut grad_sum: BTreeMap<(String, String), f64> = BTreeMap::new();
            let mut margin_sum = 0.0;
            let mut loss_sum = 0.0;
            let mut ties = 0usize;
            for &i in chunk {
                let pair = &pairs[i];
                let mu = match margin(&policy, reference, pair, beta) {
                    Ok(m) => m,
                    Err(PolicyError::Loss(LossError::NonFiniteMargin(_))) => {
                        return Err(TrainError::Diverged { step })
                    }
                    Err(e) => return Err(e.into()),
                };
                let lg = match cfg.method {
                    Method::Dpo => dpo_loss(mu),
                    Method::Todo => todo_loss(mu, TieIndicator::new(pair.is_tie), &tp)?,
                };
                if !lg.loss.is_finite() {
                    return Err(TrainError::Diverged { step });
                }
                let w1 = beta.value() * lg.dloss_dmu;
                let grads = pair_param_grad(&policy, pair, w1, -w1)?;
                // accumulation order fixed to batch order
                for (key, g) in grads.into_entries() {
                    *grad_sum.entry(key).or_insert(0.0) += g;
                }
                margin_sum += mu.value();
                loss_sum += lg.loss;
                ties += pair.is_tie as usize;
            }
            let bsz = chunk.len() as f64;
            trace.records.push(TraceRecord {
                step,
                mean_margin: margin_sum / bsz,
                mean_loss: loss_sum / bsz,
                tie_fraction: ties as f64 / bsz,
            });
            if let Err(e) = opt.apply(&mut policy, &grad_sum, bsz, lr) {
                return match e {
                    PolicyError::NonFiniteLogit { .. } => Err(TrainError::Diverged { step }),
                    other => Err(other.into()),
                };
            }
            step += 1;
        }
    }
    if !policy.all_finite() {
        return Err(TrainError::Diverged { step: total_steps });
    }
    Ok((policy, trace))
}
