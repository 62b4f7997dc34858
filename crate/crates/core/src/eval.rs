//! Ternary preference-accuracy evaluation and the multi-seed method
//! comparison harness.
//!
//! A prediction is the strict argmax of the three rank probabilities computed
//! from the implicit rewards `r_i = beta * (log pi(y_i) - log ref(y_i))`; a
//! non-unique maximum counts as incorrect. Clear-preference pairs are correct
//! when `prefer` wins, tie-labeled pairs when `tie` wins.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{corpus_from_world, resample_tie_ratio, Corpus, DataError, LatentWorld};
use crate::policy::{Beta, PolicyError, PolicyTable};
use crate::tobt::{tobt_probs_from_rewards, ModelError, RankProbabilities, TieParam};
use crate::trainer::{train, AdamParams, Method, OptimizerKind, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test corpus is empty")]
    EmptyTest,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Strict-argmax prediction; `Undecided` when the maximum is not unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicted {
    Prefer,
    Disprefer,
    Tie,
    Undecided,
}

/// Predicted-rank counts for one true label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub prefer: u64,
    pub disprefer: u64,
    pub tie: u64,
    pub undecided: u64,
}

impl ConfusionRow {
    fn bump(&mut self, p: Predicted) {
        match p {
            Predicted::Prefer => self.prefer += 1,
            Predicted::Disprefer => self.disprefer += 1,
            Predicted::Tie => self.tie += 1,
            Predicted::Undecided => self.undecided += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.prefer + self.disprefer + self.tie + self.undecided
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_pairs: usize,
    pub accuracy: f64,
    pub mean_margin: f64,
    /// Counts for pairs labeled as a clear preference.
    pub true_prefer: ConfusionRow,
    /// Counts for tie-labeled pairs.
    pub true_tie: ConfusionRow,
}

impl EvalReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn strict_argmax(p: &RankProbabilities) -> Predicted {
    let (a, b, c) = (p.prefer(), p.disprefer(), p.tie());
    let m = a.max(b).max(c);
    let hits = (a == m) as u8 + (b == m) as u8 + (c == m) as u8;
    if hits != 1 {
        return Predicted::Undecided;
    }
    if a == m {
        Predicted::Prefer
    } else if b == m {
        Predicted::Disprefer
    } else {
        Predicted::Tie
    }
}

/// Scores every pair of `test` under the ternary model at `tp`.
///
/// Evaluation is read-only; the tables are untouched. Tie-labeled pairs are
/// scored against the tie rank, so pre-filter them out (or split with
/// `exclude_ties_from_test`) for a clear-preference-only report.
///
/// Note that for alpha below ln 2 the tie mass never attains the strict
/// maximum: even at zero margin, where it peaks, it stays below the two
/// preference masses. Tie-labeled pairs can therefore only be scored correct
/// when `tp` carries alpha >= ln 2.
pub fn ternary_accuracy(
    policy: &PolicyTable,
    reference: &PolicyTable,
    test: &Corpus,
    beta: Beta,
    tp: &TieParam,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let mut correct = 0usize;
    let mut margin_sum = 0.0;
    let mut true_prefer = ConfusionRow::default();
    let mut true_tie = ConfusionRow::default();
    for pair in test.pairs() {
        let r1 = beta.value()
            * (policy.log_prob(&pair.prompt_id, &pair.y1_id)?
                - reference.log_prob(&pair.prompt_id, &pair.y1_id)?);
        let r2 = beta.value()
            * (policy.log_prob(&pair.prompt_id, &pair.y2_id)?
                - reference.log_prob(&pair.prompt_id, &pair.y2_id)?);
        let probs = tobt_probs_from_rewards(r1, r2, tp);
        let predicted = strict_argmax(&probs);
        if pair.is_tie {
            true_tie.bump(predicted);
            correct += (predicted == Predicted::Tie) as usize;
        } else {
            true_prefer.bump(predicted);
            correct += (predicted == Predicted::Prefer) as usize;
        }
        margin_sum += r1 - r2;
    }
    let n = test.len();
    Ok(EvalReport {
        n_pairs: n,
        accuracy: correct as f64 / n as f64,
        mean_margin: margin_sum / n as f64,
        true_prefer,
        true_tie,
    })
}

/// Training/evaluation settings shared by every cell of a comparison run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Stratified train-set size drawn from the world's pair pool.
    pub train_size: usize,
    /// Tie buffer used both for todo training and for the ternary metric.
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub adam: AdamParams,
    pub shuffle: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            train_size: 700,
            alpha: 0.5,
            beta: 0.01,
            learning_rate: 0.05,
            epochs: 3,
            batch_size: 16,
            optimizer: OptimizerKind::Adam,
            adam: AdamParams::default(),
            shuffle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareCell {
    pub tie_ratio: f64,
    pub method: Method,
    pub seed: u64,
    pub accuracy: f64,
    pub mean_margin: f64,
}

/// Per (tie_ratio, method) aggregate over seeds: mean accuracy plus its
/// sample standard deviation as the spread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub tie_ratio: f64,
    pub method: Method,
    pub mean_accuracy: f64,
    pub accuracy_spread: f64,
    pub mean_margin: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub cells: Vec<CompareCell>,
    pub summaries: Vec<CompareSummary>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tie_ratio,method,seed,accuracy,mean_margin\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.tie_ratio, c.method, c.seed, c.accuracy, c.mean_margin
            ));
        }
        out
    }

    pub fn summary(&self, tie_ratio: f64, method: Method) -> Option<&CompareSummary> {
        self.summaries
            .iter()
            .find(|s| s.tie_ratio == tie_ratio && s.method == method)
    }
}

/// Trains and evaluates every (tie_ratio, method, seed) combination on
/// corpora drawn from one latent world.
///
/// Per seed, the train set is a stratified sample hitting the requested tie
/// ratio exactly and the test set is every clear-preference pair the train
/// set left untouched, so both sides share the prompt set and the zeroed
/// policy tables cover them. Methods at the same (ratio, seed) share the same
/// corpora, initialization, and batch order.
pub fn compare(
    world: &LatentWorld,
    ratios: &[f64],
    methods: &[Method],
    seeds: &[u64],
    cfg: &CompareConfig,
) -> Result<ComparisonTable, EvalError> {
    if ratios.is_empty() || methods.is_empty() || seeds.is_empty() {
        return Err(EvalError::InvalidParam(
            "ratios, methods, and seeds must all be non-empty".into(),
        ));
    }
    let full = corpus_from_world(world)?;
    let reference = PolicyTable::zeroed(full.registry())?;
    let tp = TieParam::new(cfg.alpha)?;
    let beta = Beta::new(cfg.beta)?;
    let mut cells = Vec::new();
    for &ratio in ratios {
        for &seed in seeds {
            let train_set = resample_tie_ratio(&full, ratio, cfg.train_size, seed)?;
            let test_set = holdout_non_tie(&full, &train_set)?;
            if test_set.is_empty() {
                return Err(EvalError::EmptyTest);
            }
            for &method in methods {
                let tc = TrainConfig {
                    method,
                    alpha: cfg.alpha,
                    beta: cfg.beta,
                    learning_rate: cfg.learning_rate,
                    epochs: cfg.epochs,
                    batch_size: cfg.batch_size,
                    optimizer: cfg.optimizer,
                    adam: cfg.adam,
                    seed,
                    shuffle: cfg.shuffle,
                };
                let (policy, _) = train(&train_set, &reference, &reference, &tc)?;
                let report = ternary_accuracy(&policy, &reference, &test_set, beta, &tp)?;
                cells.push(CompareCell {
                    tie_ratio: ratio,
                    method,
                    seed,
                    accuracy: report.accuracy,
                    mean_margin: report.mean_margin,
                });
            }
        }
    }
    let summaries = summarize(&cells, ratios, methods);
    Ok(ComparisonTable { cells, summaries })
}

/// Clear-preference pairs of `full` that `train_set` did not consume.
fn holdout_non_tie(full: &Corpus, train_set: &Corpus) -> Result<Corpus, EvalError> {
    let used: HashSet<(&str, &str, &str)> = train_set
        .pairs()
        .iter()
        .map(|p| (p.prompt_id.as_str(), p.y1_id.as_str(), p.y2_id.as_str()))
        .collect();
    let rest: Vec<_> = full
        .pairs()
        .iter()
        .filter(|p| {
            !p.is_tie && !used.contains(&(p.prompt_id.as_str(), p.y1_id.as_str(), p.y2_id.as_str()))
        })
        .cloned()
        .collect();
    Ok(Corpus::from_pairs(rest)?)
}

fn summarize(cells: &[CompareCell], ratios: &[f64], methods: &[Method]) -> Vec<CompareSummary> {
    let mut out = Vec::new();
    for &ratio in ratios {
        for &method in methods {
            let accs: Vec<f64> = cells
                .iter()
                .filter(|c| c.tie_ratio == ratio && c.method == method)
                .map(|c| c.accuracy)
                .collect();
            let margins: Vec<f64> = cells
                .iter()
                .filter(|c| c.tie_ratio == ratio && c.method == method)
                .map(|c| c.mean_margin)
                .collect();
            if accs.is_empty() {
                continue;
            }
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let spread = if accs.len() > 1 {
                (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            out.push(CompareSummary {
                tie_ratio: ratio,
                method,
                mean_accuracy: mean,
                accuracy_spread: spread,
                mean_margin: margins.iter().sum::<f64>() / n,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PreferencePair;

    fn table_with_margin(gap: f64) -> (PolicyTable, PolicyTable) {
        let mut t = PolicyTable::new();
        t.add_prompt("p", &["a".into(), "b".into()]).unwrap();
        t.set_logit("p", "a", gap).unwrap();
        let reference = PolicyTable::zeroed(
            &[("p".to_string(), vec!["a".to_string(), "b".to_string()])]
                .into_iter()
                .collect(),
        )
        .unwrap();
        (t, reference)
    }

    fn non_tie_pair() -> Corpus {
        Corpus::from_pairs(vec![PreferencePair {
            prompt_id: "p".into(),
            y1_id: "a".into(),
            y2_id: "b".into(),
            score_1: None,
            score_2: None,
            is_tie: false,
        }])
        .unwrap()
    }

    #[test]
    fn saturated_margin_is_correct() {
        // logit gap of 500 at beta 0.01 gives mu = 5
        let (policy, reference) = table_with_margin(500.0);
        let report = ternary_accuracy(
            &policy,
            &reference,
            &non_tie_pair(),
            Beta::new(0.01).unwrap(),
            &TieParam::new(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.true_prefer.prefer, 1);
        assert!((report.mean_margin - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_margin_is_undecided_and_incorrect() {
        let (policy, reference) = table_with_margin(0.0);
        let report = ternary_accuracy(
            &policy,
            &reference,
            &non_tie_pair(),
            Beta::new(0.01).unwrap(),
            &TieParam::new(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(report.true_prefer.undecided, 1);
    }

    #[test]
    fn confusion_counts_sum_to_n() {
        let (policy, reference) = table_with_margin(500.0);
        let report = ternary_accuracy(
            &policy,
            &reference,
            &non_tie_pair(),
            Beta::new(0.01).unwrap(),
            &TieParam::new(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(
            report.true_prefer.total() + report.true_tie.total(),
            report.n_pairs as u64
        );
    }

    #[test]
    fn empty_test_is_an_error() {
        let (policy, reference) = table_with_margin(0.0);
        let empty = Corpus::from_pairs(vec![]).unwrap();
        assert!(matches!(
            ternary_accuracy(
                &policy,
                &reference,
                &empty,
                Beta::new(0.01).unwrap(),
                &TieParam::new(0.5).unwrap()
            ),
            Err(EvalError::EmptyTest)
        ));
    }

    #[test]
    fn strict_argmax_tie_break() {
        let p = RankProbabilities::new(0.4, 0.4, 0.2).unwrap();
        assert_eq!(strict_argmax(&p), Predicted::Undecided);
        let q = RankProbabilities::new(0.5, 0.3, 0.2).unwrap();
        assert_eq!(strict_argmax(&q), Predicted::Prefer);
    }
}
