//! Tabular softmax policy over explicit per-prompt candidate lists.
//!
//! The trainable policy and the frozen reference are both `PolicyTable`s:
//! one logit per (prompt, response), with probabilities given by the softmax
//! within each prompt. Gradients are exact, so every objective can be checked
//! against central finite differences without any autodiff machinery.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::data::PreferencePair;
use crate::loss::{todo_loss, LossError, Margin, TieIndicator};
use crate::numeric::log_sum_exp;
use crate::tobt::TieParam;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown prompt id: {0}")]
    UnknownPrompt(String),
    #[error("unknown response id {response} for prompt {prompt}")]
    UnknownResponse { prompt: String, response: String },
    #[error("prompt {0} needs at least two candidate responses")]
    TooFewCandidates(String),
    #[error("duplicate prompt id: {0}")]
    DuplicatePrompt(String),
    #[error("duplicate response id {response} for prompt {prompt}")]
    DuplicateResponse { prompt: String, response: String },
    #[error("logit for ({prompt}, {response}) defined more than once")]
    DuplicateLogit { prompt: String, response: String },
    #[error("missing logit for ({prompt}, {response})")]
    MissingLogit { prompt: String, response: String },
    #[error("logit for ({prompt}, {response}) must be finite, got {value}")]
    NonFiniteLogit {
        prompt: String,
        response: String,
        value: f64,
    },
    #[error("beta must be finite and positive, got {0}")]
    InvalidBeta(f64),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// KL-strength coefficient scaling the implicit reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta(f64);

impl Beta {
    pub fn new(beta: f64) -> Result<Self, PolicyError> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(PolicyError::InvalidBeta(beta));
        }
        Ok(Self(beta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PromptEntry {
    responses: Vec<String>,
    logits: Vec<f64>,
}

impl PromptEntry {
    fn index_of(&self, prompt: &str, response: &str) -> Result<usize, PolicyError> {
        self.responses
            .iter()
            .position(|r| r == response)
            .ok_or_else(|| PolicyError::UnknownResponse {
                prompt: prompt.to_string(),
                response: response.to_string(),
            })
    }

    fn probs(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.logits);
        self.logits.iter().map(|&l| (l - lse).exp()).collect()
    }
}

/// Per-prompt logits over fixed candidate lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyTable {
    prompts: BTreeMap<String, PromptEntry>,
}

impl PolicyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a prompt with its ordered candidate list, all logits zero.
    pub fn add_prompt(&mut self, prompt_id: &str, responses: &[String]) -> Result<(), PolicyError> {
        if self.prompts.contains_key(prompt_id) {
            return Err(PolicyError::DuplicatePrompt(prompt_id.to_string()));
        }
        if responses.len() < 2 {
            return Err(PolicyError::TooFewCandidates(prompt_id.to_string()));
        }
        for (i, r) in responses.iter().enumerate() {
            if responses[..i].contains(r) {
                return Err(PolicyError::DuplicateResponse {
                    prompt: prompt_id.to_string(),
                    response: r.clone(),
                });
            }
        }
        self.prompts.insert(
            prompt_id.to_string(),
            PromptEntry {
                responses: responses.to_vec(),
                logits: vec![0.0; responses.len()],
            },
        );
        Ok(())
    }

    /// All-zero-logit table over a registry: the uniform policy, also used as
    /// the default frozen reference.
    pub fn zeroed(registry: &BTreeMap<String, Vec<String>>) -> Result<Self, PolicyError> {
        let mut t = Self::new();
        for (prompt, responses) in registry {
            t.add_prompt(prompt, responses)?;
        }
        Ok(t)
    }

    /// Uniform table over the same prompts and candidates as `self`.
    pub fn zeroed_like(&self) -> Self {
        let mut t = Self::new();
        for (prompt, entry) in &self.prompts {
            t.add_prompt(prompt, &entry.responses)
                .expect("existing table is valid");
        }
        t
    }

    pub fn prompt_ids(&self) -> impl Iterator<Item = &str> {
        self.prompts.keys().map(String::as_str)
    }

    pub fn responses(&self, prompt_id: &str) -> Result<&[String], PolicyError> {
        Ok(&self.entry(prompt_id)?.responses)
    }

    pub fn contains(&self, prompt_id: &str, response_id: &str) -> bool {
        self.prompts
            .get(prompt_id)
            .is_some_and(|e| e.responses.iter().any(|r| r == response_id))
    }

    pub fn covers_pair(&self, pair: &PreferencePair) -> Result<(), PolicyError> {
        let e = self.entry(&pair.prompt_id)?;
        e.index_of(&pair.prompt_id, &pair.y1_id)?;
        e.index_of(&pair.prompt_id, &pair.y2_id)?;
        Ok(())
    }

    fn entry(&self, prompt_id: &str) -> Result<&PromptEntry, PolicyError> {
        self.prompts
            .get(prompt_id)
            .ok_or_else(|| PolicyError::UnknownPrompt(prompt_id.to_string()))
    }

    pub fn logit(&self, prompt_id: &str, response_id: &str) -> Result<f64, PolicyError> {
        let e = self.entry(prompt_id)?;
        Ok(e.logits[e.index_of(prompt_id, response_id)?])
    }

    pub fn set_logit(
        &mut self,
        prompt_id: &str,
        response_id: &str,
        value: f64,
    ) -> Result<(), PolicyError> {
        if !value.is_finite() {
            return Err(PolicyError::NonFiniteLogit {
                prompt: prompt_id.to_string(),
                response: response_id.to_string(),
                value,
            });
        }
        let e = self
            .prompts
            .get(prompt_id)
            .ok_or_else(|| PolicyError::UnknownPrompt(prompt_id.to_string()))?;
        let i = e.index_of(prompt_id, response_id)?;
        self.prompts.get_mut(prompt_id).unwrap().logits[i] = value;
        Ok(())
    }

    /// log pi(response | prompt) = logit - logsumexp(prompt logits); always <= 0.
    pub fn log_prob(&self, prompt_id: &str, response_id: &str) -> Result<f64, PolicyError> {
        let e = self.entry(prompt_id)?;
        let i = e.index_of(prompt_id, response_id)?;
        Ok(e.logits[i] - log_sum_exp(&e.logits))
    }

    /// Softmax probabilities over one prompt's candidates, in registry order.
    pub fn probs(&self, prompt_id: &str) -> Result<Vec<f64>, PolicyError> {
        Ok(self.entry(prompt_id)?.probs())
    }

    /// Every (prompt, response) key, in deterministic order.
    pub fn parameter_keys(&self) -> Vec<(String, String)> {
        self.prompts
            .iter()
            .flat_map(|(p, e)| e.responses.iter().map(move |r| (p.clone(), r.clone())))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.prompts.values().map(|e| e.responses.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.prompts
            .values()
            .all(|e| e.logits.iter().all(|l| l.is_finite()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    prompts: Vec<PromptDef>,
    logits: Vec<LogitDef>,
}

#[derive(Serialize, Deserialize)]
struct PromptDef {
    prompt_id: String,
    responses: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LogitDef {
    prompt_id: String,
    response_id: String,
    value: f64,
}

impl Serialize for PolicyTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let prompts = self
            .prompts
            .iter()
            .map(|(p, e)| PromptDef {
                prompt_id: p.clone(),
                responses: e.responses.clone(),
            })
            .collect();
        let logits = self
            .prompts
            .iter()
            .flat_map(|(p, e)| {
                e.responses
                    .iter()
                    .zip(&e.logits)
                    .map(move |(r, &v)| LogitDef {
                        prompt_id: p.clone(),
                        response_id: r.clone(),
                        value: v,
                    })
            })
            .collect();
        PolicyFile { prompts, logits }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PolicyTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = PolicyFile::deserialize(deserializer)?;
        let mut table = PolicyTable::new();
        for p in &file.prompts {
            table
                .add_prompt(&p.prompt_id, &p.responses)
                .map_err(D::Error::custom)?;
        }
        let mut filled: std::collections::HashSet<(String, String)> =
            std::collections::HashSet::new();
        for l in &file.logits {
            if !filled.insert((l.prompt_id.clone(), l.response_id.clone())) {
                return Err(D::Error::custom(PolicyError::DuplicateLogit {
                    prompt: l.prompt_id.clone(),
                    response: l.response_id.clone(),
                }));
            }
            table
                .set_logit(&l.prompt_id, &l.response_id, l.value)
                .map_err(D::Error::custom)?;
        }
        if filled.len() != table.num_parameters() {
            for (p, r) in table.parameter_keys() {
                if !filled.contains(&(p.clone(), r.clone())) {
                    return Err(D::Error::custom(PolicyError::MissingLogit {
                        prompt: p,
                        response: r,
                    }));
                }
            }
        }
        Ok(table)
    }
}

/// Sparse gradient over (prompt, response) logits. One pair touches exactly
/// the candidates of its own prompt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrad {
    entries: BTreeMap<(String, String), f64>,
}

impl ParamGrad {
    pub fn get(&self, prompt_id: &str, response_id: &str) -> Option<f64> {
        self.entries
            .get(&(prompt_id.to_string(), response_id.to_string()))
            .copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn into_entries(self) -> BTreeMap<(String, String), f64> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Implicit reward margin of a pair:
/// mu = beta * [(log pi(y1) - log ref(y1)) - (log pi(y2) - log ref(y2))].
pub fn margin(
    policy: &PolicyTable,
    reference: &PolicyTable,
    pair: &PreferencePair,
    beta: Beta,
) -> Result<Margin, PolicyError> {
    let r1 = policy.log_prob(&pair.prompt_id, &pair.y1_id)?
        - reference.log_prob(&pair.prompt_id, &pair.y1_id)?;
    let r2 = policy.log_prob(&pair.prompt_id, &pair.y2_id)?
        - reference.log_prob(&pair.prompt_id, &pair.y2_id)?;
    Ok(Margin::new(beta.value() * (r1 - r2))?)
}

/// weight_y1 * grad(log pi(y1)) + weight_y2 * grad(log pi(y2)) over the
/// pair's prompt logits, using the full softmax Jacobian
/// d log pi(y) / d logit_j = 1[j = y] - pi(j).
pub fn pair_param_grad(
    policy: &PolicyTable,
    pair: &PreferencePair,
    weight_y1: f64,
    weight_y2: f64,
) -> Result<ParamGrad, PolicyError> {
    let e = policy.entry(&pair.prompt_id)?;
    let i1 = e.index_of(&pair.prompt_id, &pair.y1_id)?;
    let i2 = e.index_of(&pair.prompt_id, &pair.y2_id)?;
    let probs = e.probs();
    let mut entries = BTreeMap::new();
    for (j, resp) in e.responses.iter().enumerate() {
        let jac1 = if j == i1 { 1.0 - probs[j] } else { -probs[j] };
        let jac2 = if j == i2 { 1.0 - probs[j] } else { -probs[j] };
        entries.insert(
            (pair.prompt_id.clone(), resp.clone()),
            weight_y1 * jac1 + weight_y2 * jac2,
        );
    }
    Ok(ParamGrad { entries })
}

/// Relative disagreement between an analytic and a numeric gradient, with an
/// absolute floor so exactly-zero gradients compare cleanly.
pub fn gradient_disagreement(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale <= 1e-9 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Central-difference validation of the analytic per-pair gradient.
///
/// Perturbs every logit of the pair's prompt by +/-1e-5 in a scratch copy,
/// recomputes the mixed objective through the margin, and returns the largest
/// disagreement with the analytic gradient.
pub fn finite_diff_check(
    policy: &PolicyTable,
    reference: &PolicyTable,
    pair: &PreferencePair,
    beta: Beta,
    tp: &TieParam,
    ind: TieIndicator,
) -> Result<f64, PolicyError> {
    const H: f64 = 1e-5;
    let mu = margin(policy, reference, pair, beta)?;
    let lg = todo_loss(mu, ind, tp)?;
    let w1 = beta.value() * lg.dloss_dmu;
    let analytic = pair_param_grad(policy, pair, w1, -w1)?;

    let mut scratch = policy.clone();
    let responses = policy.responses(&pair.prompt_id)?.to_vec();
    let mut worst = 0.0f64;
    for resp in &responses {
        let base = policy.logit(&pair.prompt_id, resp)?;
        scratch.set_logit(&pair.prompt_id, resp, base + H)?;
        let up = todo_loss(margin(&scratch, reference, pair, beta)?, ind, tp)?.loss;
        scratch.set_logit(&pair.prompt_id, resp, base - H)?;
        let down = todo_loss(margin(&scratch, reference, pair, beta)?, ind, tp)?.loss;
        scratch.set_logit(&pair.prompt_id, resp, base)?;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic.get(&pair.prompt_id, resp).unwrap_or(0.0);
        worst = worst.max(gradient_disagreement(a, numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_candidate_table(logit_a: f64, logit_b: f64) -> PolicyTable {
        let mut t = PolicyTable::new();
        t.add_prompt("p0", &["a".into(), "b".into()]).unwrap();
        t.set_logit("p0", "a", logit_a).unwrap();
        t.set_logit("p0", "b", logit_b).unwrap();
        t
    }

    fn pair(prompt: &str, y1: &str, y2: &str, tie: bool) -> PreferencePair {
        PreferencePair {
            prompt_id: prompt.into(),
            y1_id: y1.into(),
            y2_id: y2.into(),
            score_1: None,
            score_2: None,
            is_tie: tie,
        }
    }

    #[test]
    fn log_prob_uniform_cases() {
        let t = two_candidate_table(0.0, 0.0);
        assert!((t.log_prob("p0", "a").unwrap() - 0.5f64.ln()).abs() < 1e-15);

        let mut four = PolicyTable::new();
        four.add_prompt("q", &["a".into(), "b".into(), "c".into(), "d".into()])
            .unwrap();
        assert!((four.log_prob("q", "c").unwrap() - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_prob_matches_log_sigmoid_for_two_candidates() {
        let t = two_candidate_table(1.0, 0.0);
        let expected = crate::numeric::log_sigmoid(1.0);
        assert!((t.log_prob("p0", "a").unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn unknown_ids_error() {
        let t = two_candidate_table(0.0, 0.0);
        assert!(matches!(
            t.log_prob("nope", "a"),
            Err(PolicyError::UnknownPrompt(_))
        ));
        assert!(matches!(
            t.log_prob("p0", "zzz"),
            Err(PolicyError::UnknownResponse { .. })
        ));
    }

    #[test]
    fn table_construction_errors() {
        let mut t = PolicyTable::new();
        assert!(matches!(
            t.add_prompt("p", &["only".into()]),
            Err(PolicyError::TooFewCandidates(_))
        ));
        t.add_prompt("p", &["a".into(), "b".into()]).unwrap();
        assert!(matches!(
            t.add_prompt("p", &["a".into(), "b".into()]),
            Err(PolicyError::DuplicatePrompt(_))
        ));
        assert!(matches!(
            t.add_prompt("q", &["a".into(), "a".into()]),
            Err(PolicyError::DuplicateResponse { .. })
        ));
        assert!(matches!(
            t.set_logit("p", "a", f64::NAN),
            Err(PolicyError::NonFiniteLogit { .. })
        ));
    }

    #[test]
    fn margin_is_zero_at_reference_and_antisymmetric() {
        let policy = two_candidate_table(0.7, -0.2);
        let reference = policy.clone();
        let beta = Beta::new(0.01).unwrap();
        let m = margin(&policy, &reference, &pair("p0", "a", "b", false), beta).unwrap();
        assert_eq!(m.value(), 0.0);

        let trained = two_candidate_table(1.0, 0.0);
        let uniform = two_candidate_table(0.0, 0.0);
        let fwd = margin(&trained, &uniform, &pair("p0", "a", "b", false), beta).unwrap();
        let rev = margin(&trained, &uniform, &pair("p0", "b", "a", false), beta).unwrap();
        assert_eq!(fwd.value(), -rev.value());
        // logit gap of 1 against a uniform reference gives beta * 1
        assert!((fwd.value() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn pair_grad_uniform_two_candidates() {
        let t = two_candidate_table(0.0, 0.0);
        let p = pair("p0", "a", "b", false);
        // preference branch at mu = 0, alpha = 0.5, beta = 0.01
        let w = 0.01 * crate::numeric::sigmoid(0.5);
        let g = pair_param_grad(&t, &p, -w, w).unwrap();
        let expected = -0.006224593312018546;
        assert!((g.get("p0", "a").unwrap() - expected).abs() < 1e-15);
        assert!((g.get("p0", "b").unwrap() + expected).abs() < 1e-15);
    }

    #[test]
    fn tie_pair_grad_vanishes_at_zero_margin() {
        let t = two_candidate_table(0.3, 0.3);
        let p = pair("p0", "a", "b", true);
        // G(0) = 0 exactly, so both weights are zero
        let g = pair_param_grad(&t, &p, 0.0, -0.0).unwrap();
        assert_eq!(g.get("p0", "a").unwrap(), 0.0);
        assert_eq!(g.get("p0", "b").unwrap(), 0.0);
    }

    #[test]
    fn untouched_candidates_get_exact_zero() {
        let mut t = PolicyTable::new();
        t.add_prompt("p", &["a".into(), "b".into(), "c".into(), "d".into()])
            .unwrap();
        t.set_logit("p", "a", 0.4).unwrap();
        t.set_logit("p", "c", -0.9).unwrap();
        let g = pair_param_grad(&t, &pair("p", "a", "b", false), -0.003, 0.003).unwrap();
        // opposite weights cancel the shared -pi_j term bit-exactly
        assert_eq!(g.get("p", "c").unwrap(), 0.0);
        assert_eq!(g.get("p", "d").unwrap(), 0.0);
        assert_eq!(g.len(), 4);
    }

    #[test]
    fn finite_diff_agrees_on_small_fixture() {
        let mut t = PolicyTable::new();
        t.add_prompt("p", &["a".into(), "b".into(), "c".into()])
            .unwrap();
        t.set_logit("p", "a", 0.8).unwrap();
        t.set_logit("p", "b", -0.3).unwrap();
        let reference = PolicyTable::zeroed(
            &t.prompt_ids()
                .map(|p| (p.to_string(), t.responses(p).unwrap().to_vec()))
                .collect(),
        )
        .unwrap();
        let beta = Beta::new(0.1).unwrap();
        let tp = TieParam::new(0.5).unwrap();
        for tie in [false, true] {
            let err = finite_diff_check(
                &t,
                &reference,
                &pair("p", "a", "b", tie),
                beta,
                &tp,
                TieIndicator::new(tie),
            )
            .unwrap();
            assert!(err <= 1e-5, "finite-diff error {err} too large (tie={tie})");
        }
    }

    #[test]
    fn serde_round_trip_preserves_table() {
        let mut t = PolicyTable::new();
        t.add_prompt("p1", &["x".into(), "y".into(), "z".into()])
            .unwrap();
        t.add_prompt("p0", &["a".into(), "b".into()]).unwrap();
        t.set_logit("p1", "y", 0.123456789012345).unwrap();
        t.set_logit("p0", "b", -3.5e-7).unwrap();
        let json = t.to_json_pretty();
        let back = PolicyTable::from_json(&json).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn deserialize_rejects_incomplete_tables() {
        let json = r#"{
            "prompts": [{"prompt_id": "p", "responses": ["a", "b"]}],
            "logits": [{"prompt_id": "p", "response_id": "a", "value": 0.5}]
        }"#;
        assert!(PolicyTable::from_json(json).is_err());

        let dup = r#"{
            "prompts": [{"prompt_id": "p", "responses": ["a", "b"]}],
            "logits": [
                {"prompt_id": "p", "response_id": "a", "value": 0.5},
                {"prompt_id": "p", "response_id": "a", "value": 0.7}
            ]
        }"#;
        assert!(PolicyTable::from_json(dup).is_err());
    }
}
