//! Preference-pair corpora: JSONL ingestion with tie labeling, stratified
//! tie-ratio resampling, prompt-level train/test splits, and synthetic corpus
//! generation from a latent reward table.
//!
//! The canonical wire format is one JSON object per line:
//! `{"prompt_id", "y1_id", "y2_id", "score_1", "score_2", "is_tie"}` with
//! null scores when absent. Pairs are stored in canonical orientation: the
//! higher-scored response is `y1`, and tie pairs are ordered lexicographically
//! by response id so that emit/ingest round-trips are exact.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tobt::{ModelError, TieParam};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("line {line}: pair references the same response twice ({id})")]
    SelfPair { line: usize, id: String },
    #[error("line {line}: record carries neither scores nor an explicit tie label")]
    MissingLabel { line: usize },
    #[error("line {line}: explicit tie label contradicts the scores")]
    InconsistentLabel { line: usize },
    #[error("line {line}: duplicate pair ({prompt}, {a}, {b})")]
    DuplicatePair {
        line: usize,
        prompt: String,
        a: String,
        b: String,
    },
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("resample infeasible: need {need} {stratum} pairs, corpus has {have}")]
    InfeasibleResample {
        stratum: &'static str,
        need: usize,
        have: usize,
    },
    #[error("split infeasible: {0}")]
    InfeasibleSplit(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One labeled comparison. For clear-preference pairs `y1_id` is the chosen
/// response (`score_1 >= score_2` when scores are present); tie pairs are
/// oriented lexicographically by response id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt_id: String,
    pub y1_id: String,
    pub y2_id: String,
    pub score_1: Option<f64>,
    pub score_2: Option<f64>,
    pub is_tie: bool,
}

/// Immutable pair collection, the registry of candidates appearing in it, and
/// the exact fraction of tie pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pairs: Vec<PreferencePair>,
    registry: BTreeMap<String, Vec<String>>,
    tie_ratio: f64,
}

impl Corpus {
    /// Validates per-pair invariants, rejects duplicate unordered pairs,
    /// builds the registry (each prompt's candidates are the response ids
    /// appearing in its pairs, sorted), and records the tie ratio.
    pub fn from_pairs(pairs: Vec<PreferencePair>) -> Result<Self, DataError> {
        let mut seen: HashSet<(String, String, String)> = HashSet::new();
        let mut registry: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for p in &pairs {
            validate_pair(p)?;
            let (a, b) = unordered(&p.y1_id, &p.y2_id);
            if !seen.insert((p.prompt_id.clone(), a.to_string(), b.to_string())) {
                return Err(DataError::InvalidPair(format!(
                    "duplicate pair ({}, {}, {})",
                    p.prompt_id, a, b
                )));
            }
            let entry = registry.entry(p.prompt_id.clone()).or_default();
            entry.insert(p.y1_id.clone());
            entry.insert(p.y2_id.clone());
        }
        let ties = pairs.iter().filter(|p| p.is_tie).count();
        let tie_ratio = if pairs.is_empty() {
            0.0
        } else {
            ties as f64 / pairs.len() as f64
        };
        let registry = registry
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect();
        Ok(Self {
            pairs,
            registry,
            tie_ratio,
        })
    }

    pub fn pairs(&self) -> &[PreferencePair] {
        &self.pairs
    }

    /// Prompt -> sorted candidate response ids.
    pub fn registry(&self) -> &BTreeMap<String, Vec<String>> {
        &self.registry
    }

    pub fn tie_ratio(&self) -> f64 {
        self.tie_ratio
    }

    pub fn tie_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_tie).count()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Canonical JSONL serialization, one pair per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&serde_json::to_string(p).expect("pair serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let mut f = File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

fn unordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn validate_pair(p: &PreferencePair) -> Result<(), DataError> {
    if p.y1_id == p.y2_id {
        return Err(DataError::InvalidPair(format!(
            "pair ({}, {}) references the same response twice",
            p.prompt_id, p.y1_id
        )));
    }
    match (p.score_1, p.score_2) {
        (Some(s1), Some(s2)) => {
            if !s1.is_finite() || !s2.is_finite() {
                return Err(DataError::InvalidPair("scores must be finite".into()));
            }
            if p.is_tie && s1 != s2 {
                return Err(DataError::InvalidPair(format!(
                    "tie pair ({}, {}, {}) has unequal scores",
                    p.prompt_id, p.y1_id, p.y2_id
                )));
            }
            if !p.is_tie && s1 < s2 {
                return Err(DataError::InvalidPair(format!(
                    "pair ({}, {}, {}) is not oriented by score",
                    p.prompt_id, p.y1_id, p.y2_id
                )));
            }
        }
        (None, None) => {}
        _ => {
            return Err(DataError::InvalidPair(
                "score_1 and score_2 must both be present or both absent".into(),
            ))
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct RawRecord {
    prompt_id: String,
    y1_id: String,
    y2_id: String,
    #[serde(default)]
    score_1: Option<f64>,
    #[serde(default)]
    score_2: Option<f64>,
    #[serde(default)]
    is_tie: Option<bool>,
}

/// Reads score-labeled JSONL into a canonical corpus.
///
/// Records with scores are oriented so the higher score comes first and
/// labeled tied exactly when the scores are equal; an explicit `is_tie` field
/// must agree with the scores when both are present, and carries the label by
/// itself when scores are absent. Duplicate unordered pairs are rejected with
/// their line number.
pub fn ingest(path: impl AsRef<Path>) -> Result<Corpus, DataError> {
    ingest_reader(BufReader::new(File::open(path)?))
}

pub fn ingest_reader(reader: impl BufRead) -> Result<Corpus, DataError> {
    let mut pairs = Vec::new();
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| DataError::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        if raw.y1_id == raw.y2_id {
            return Err(DataError::SelfPair {
                line: line_no,
                id: raw.y1_id,
            });
        }
        let pair = canonicalize_record(raw, line_no)?;
        let (a, b) = unordered(&pair.y1_id, &pair.y2_id);
        if !seen.insert((pair.prompt_id.clone(), a.to_string(), b.to_string())) {
            return Err(DataError::DuplicatePair {
                line: line_no,
                prompt: pair.prompt_id,
                a: a.to_string(),
                b: b.to_string(),
            });
        }
        pairs.push(pair);
    }
    Corpus::from_pairs(pairs)
}

fn canonicalize_record(raw: RawRecord, line: usize) -> Result<PreferencePair, DataError> {
    let (is_tie, oriented) = match (raw.score_1, raw.score_2) {
        (Some(s1), Some(s2)) => {
            if !s1.is_finite() || !s2.is_finite() {
                return Err(DataError::MalformedRecord {
                    line,
                    message: "scores must be finite".into(),
                });
            }
            let derived = s1 == s2;
            if let Some(flag) = raw.is_tie {
                if flag != derived {
                    return Err(DataError::InconsistentLabel { line });
                }
            }
            (derived, true)
        }
        (None, None) => match raw.is_tie {
            Some(flag) => (flag, false),
            None => return Err(DataError::MissingLabel { line }),
        },
        _ => {
            return Err(DataError::MalformedRecord {
                line,
                message: "score_1 and score_2 must both be present or both absent".into(),
            })
        }
    };
    let mut pair = PreferencePair {
        prompt_id: raw.prompt_id,
        y1_id: raw.y1_id,
        y2_id: raw.y2_id,
        score_1: raw.score_1,
        score_2: raw.score_2,
        is_tie,
    };
    let swap = if is_tie {
        pair.y1_id > pair.y2_id
    } else {
        // orient by score when available; keep the given order otherwise
        oriented && pair.score_1 < pair.score_2
    };
    if swap {
        std::mem::swap(&mut pair.y1_id, &mut pair.y2_id);
        std::mem::swap(&mut pair.score_1, &mut pair.score_2);
    }
    Ok(pair)
}

/// Uniform stratified subsample hitting exactly floor(output_size * ratio)
/// tie pairs. Selected pairs keep their original corpus order.
pub fn resample_tie_ratio(
    corpus: &Corpus,
    target_ratio: f64,
    output_size: usize,
    seed: u64,
) -> Result<Corpus, DataError> {
    if !(0.0..=1.0).contains(&target_ratio) {
        return Err(DataError::InvalidParam(format!(
            "target_ratio must be in [0, 1], got {target_ratio}"
        )));
    }
    if output_size == 0 {
        return Err(DataError::InvalidParam("output_size must be >= 1".into()));
    }
    let n_tie = (output_size as f64 * target_ratio).floor() as usize;
    let n_non = output_size - n_tie;
    let tie_idx: Vec<usize> = indices_where(&corpus.pairs, |p| p.is_tie);
    let non_idx: Vec<usize> = indices_where(&corpus.pairs, |p| !p.is_tie);
    if tie_idx.len() < n_tie {
        return Err(DataError::InfeasibleResample {
            stratum: "tie",
            need: n_tie,
            have: tie_idx.len(),
        });
    }
    if non_idx.len() < n_non {
        return Err(DataError::InfeasibleResample {
            stratum: "non-tie",
            need: n_non,
            have: non_idx.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = sample_without_replacement(&mut rng, &tie_idx, n_tie);
    selected.extend(sample_without_replacement(&mut rng, &non_idx, n_non));
    selected.sort_unstable();
    Corpus::from_pairs(selected.iter().map(|&i| corpus.pairs[i].clone()).collect())
}

fn indices_where(pairs: &[PreferencePair], pred: impl Fn(&PreferencePair) -> bool) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter_map(|(i, p)| pred(p).then_some(i))
        .collect()
}

/// Uniform k-subset via partial Fisher-Yates.
fn sample_without_replacement(rng: &mut ChaCha8Rng, items: &[usize], k: usize) -> Vec<usize> {
    let mut pool = items.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Ground-truth rewards behind a synthetic corpus, with the labeling
/// parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentWorld {
    rewards: BTreeMap<String, BTreeMap<String, f64>>,
    gen_alpha: TieParam,
    quantization_step: f64,
    seed: u64,
}

impl LatentWorld {
    pub fn reward(&self, prompt_id: &str, response_id: &str) -> Option<f64> {
        self.rewards.get(prompt_id)?.get(response_id).copied()
    }

    pub fn rewards(&self) -> &BTreeMap<String, BTreeMap<String, f64>> {
        &self.rewards
    }

    pub fn gen_alpha(&self) -> TieParam {
        self.gen_alpha
    }

    pub fn quantization_step(&self) -> f64 {
        self.quantization_step
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&WorldFile::from(self))
            .expect("world serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, DataError> {
        let file: WorldFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        std::fs::write(path, self.to_json_pretty())?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    rewards: Vec<RewardEntry>,
    quantization_step: f64,
    // Carried for reproducibility; files without it load with the degenerate
    // no-tie value.
    #[serde(default)]
    gen_alpha: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RewardEntry {
    prompt_id: String,
    response_id: String,
    r: f64,
}

impl From<&LatentWorld> for WorldFile {
    fn from(w: &LatentWorld) -> Self {
        let rewards = w
            .rewards
            .iter()
            .flat_map(|(p, cands)| {
                cands.iter().map(move |(c, &r)| RewardEntry {
                    prompt_id: p.clone(),
                    response_id: c.clone(),
                    r,
                })
            })
            .collect();
        WorldFile {
            rewards,
            quantization_step: w.quantization_step,
            gen_alpha: w.gen_alpha.alpha(),
            seed: w.seed,
        }
    }
}

impl TryFrom<WorldFile> for LatentWorld {
    type Error = DataError;

    fn try_from(f: WorldFile) -> Result<Self, DataError> {
        let mut rewards: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for e in f.rewards {
            if !e.r.is_finite() {
                return Err(DataError::InvalidParam(format!(
                    "non-finite reward for ({}, {})",
                    e.prompt_id, e.response_id
                )));
            }
            if rewards
                .entry(e.prompt_id.clone())
                .or_default()
                .insert(e.response_id.clone(), e.r)
                .is_some()
            {
                return Err(DataError::InvalidParam(format!(
                    "duplicate reward entry for ({}, {})",
                    e.prompt_id, e.response_id
                )));
            }
        }
        if f.quantization_step.is_nan() || f.quantization_step <= 0.0 {
            return Err(DataError::InvalidParam(
                "quantization_step must be positive".into(),
            ));
        }
        Ok(LatentWorld {
            rewards,
            gen_alpha: TieParam::new(f.gen_alpha)?,
            quantization_step: f.quantization_step,
            seed: f.seed,
        })
    }
}

/// Snaps a score to the labeling grid. An infinite step collapses everything
/// into a single bin.
pub fn quantize(score: f64, step: f64) -> f64 {
    if step.is_infinite() {
        0.0
    } else {
        (score / step).floor() * step
    }
}

/// Draws i.i.d. Normal(0, reward_spread^2) latent rewards for every
/// (prompt, candidate), then emits the all-pairs corpus labeled by score
/// quantization: a pair is tied exactly when both rewards land in the same
/// grid bin.
pub fn generate_synthetic(
    n_prompts: usize,
    candidates_per_prompt: usize,
    reward_spread: f64,
    tp: &TieParam,
    quantization_step: f64,
    seed: u64,
) -> Result<(LatentWorld, Corpus), DataError> {
    if n_prompts == 0 {
        return Err(DataError::InvalidParam("n_prompts must be >= 1".into()));
    }
    if candidates_per_prompt < 2 {
        return Err(DataError::InvalidParam(
            "candidates_per_prompt must be >= 2".into(),
        ));
    }
    if !reward_spread.is_finite() || reward_spread <= 0.0 {
        return Err(DataError::InvalidParam(
            "reward_spread must be a positive finite value".into(),
        ));
    }
    if quantization_step.is_nan() || quantization_step <= 0.0 {
        return Err(DataError::InvalidParam(
            "quantization_step must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, reward_spread)
        .map_err(|e| DataError::InvalidParam(format!("reward distribution: {e}")))?;
    let pw = id_width(n_prompts);
    let cw = id_width(candidates_per_prompt);
    let mut rewards: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for p in 0..n_prompts {
        let prompt_id = format!("p{p:0pw$}");
        let mut cands = BTreeMap::new();
        for c in 0..candidates_per_prompt {
            cands.insert(format!("r{c:0cw$}"), normal.sample(&mut rng));
        }
        rewards.insert(prompt_id, cands);
    }
    let world = LatentWorld {
        rewards,
        gen_alpha: *tp,
        quantization_step,
        seed,
    };
    let corpus = corpus_from_world(&world)?;
    Ok((world, corpus))
}

fn id_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}

/// Rebuilds the full all-pairs corpus implied by a latent world: every
/// unordered candidate pair per prompt, tied exactly when the quantized
/// rewards agree, with the higher-reward response first otherwise. Stored
/// scores are the quantized values, so emit/ingest round-trips re-derive the
/// same labels.
pub fn corpus_from_world(world: &LatentWorld) -> Result<Corpus, DataError> {
    let step = world.quantization_step;
    let mut pairs = Vec::new();
    for (prompt_id, cands) in &world.rewards {
        let list: Vec<(&String, f64)> = cands.iter().map(|(k, &v)| (k, v)).collect();
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                let (id_i, r_i) = list[i];
                let (id_j, r_j) = list[j];
                let (q_i, q_j) = (quantize(r_i, step), quantize(r_j, step));
                // candidate iteration is lexicographic, so id_i < id_j and the
                // tie branch is already canonically oriented
                let pair = if q_i == q_j {
                    PreferencePair {
                        prompt_id: prompt_id.clone(),
                        y1_id: id_i.clone(),
                        y2_id: id_j.clone(),
                        score_1: Some(q_i),
                        score_2: Some(q_j),
                        is_tie: true,
                    }
                } else if r_i > r_j {
                    PreferencePair {
                        prompt_id: prompt_id.clone(),
                        y1_id: id_i.clone(),
                        y2_id: id_j.clone(),
                        score_1: Some(q_i),
                        score_2: Some(q_j),
                        is_tie: false,
                    }
                } else {
                    PreferencePair {
                        prompt_id: prompt_id.clone(),
                        y1_id: id_j.clone(),
                        y2_id: id_i.clone(),
                        score_1: Some(q_j),
                        score_2: Some(q_i),
                        is_tie: false,
                    }
                };
                pairs.push(pair);
            }
        }
    }
    Corpus::from_pairs(pairs)
}

/// Prompt-level train/test split: no prompt appears on both sides. With
/// `exclude_ties_from_test` the test side keeps only clear-preference pairs.
pub fn split(
    corpus: &Corpus,
    test_fraction: f64,
    seed: u64,
    exclude_ties_from_test: bool,
) -> Result<(Corpus, Corpus), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidParam(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let prompts: Vec<&String> = corpus.registry.keys().collect();
    let n = prompts.len();
    if n < 2 {
        return Err(DataError::InfeasibleSplit(
            "need at least two prompts to split".into(),
        ));
    }
    let n_test = ((n as f64 * test_fraction).floor() as usize).max(1);
    if n_test >= n {
        return Err(DataError::InfeasibleSplit(format!(
            "test fraction {test_fraction} leaves no training prompts out of {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fisher_yates(&mut order, &mut rng);
    let test_prompts: HashSet<&String> = order[..n_test].iter().map(|&i| prompts[i]).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for p in &corpus.pairs {
        if test_prompts.contains(&p.prompt_id) {
            if !(exclude_ties_from_test && p.is_tie) {
                test.push(p.clone());
            }
        } else {
            train.push(p.clone());
        }
    }
    Ok((Corpus::from_pairs(train)?, Corpus::from_pairs(test)?))
}

pub(crate) fn fisher_yates(xs: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..xs.len()).rev() {
        let j = rng.random_range(0..=i);
        xs.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(prompt: &str, y1: &str, y2: &str, s1: f64, s2: f64, tie: bool) -> PreferencePair {
        PreferencePair {
            prompt_id: prompt.into(),
            y1_id: y1.into(),
            y2_id: y2.into(),
            score_1: Some(s1),
            score_2: Some(s2),
            is_tie: tie,
        }
    }

    #[test]
    fn ingest_labels_equal_scores_as_tie() {
        let jsonl = r#"{"prompt_id":"p0","y1_id":"b","y2_id":"a","score_1":8.5,"score_2":8.5}"#;
        let c = ingest_reader(jsonl.as_bytes()).unwrap();
        assert!(c.pairs()[0].is_tie);
        // lexicographic orientation for ties
        assert_eq!(c.pairs()[0].y1_id, "a");
        assert_eq!(c.tie_ratio(), 1.0);
    }

    #[test]
    fn ingest_orients_by_score() {
        let jsonl = "\
{\"prompt_id\":\"p0\",\"y1_id\":\"a\",\"y2_id\":\"b\",\"score_1\":8.5,\"score_2\":7.0}\n\
{\"prompt_id\":\"p1\",\"y1_id\":\"a\",\"y2_id\":\"b\",\"score_1\":7.0,\"score_2\":8.5}\n";
        let c = ingest_reader(jsonl.as_bytes()).unwrap();
        assert_eq!(c.pairs()[0].y1_id, "a");
        assert!(!c.pairs()[0].is_tie);
        // swapped so the 8.5 response is first
        assert_eq!(c.pairs()[1].y1_id, "b");
        assert_eq!(c.pairs()[1].score_1, Some(8.5));
    }

    #[test]
    fn ingest_error_paths_carry_line_numbers() {
        let malformed = "{\"prompt_id\":\"p0\"\n";
        assert!(matches!(
            ingest_reader(malformed.as_bytes()),
            Err(DataError::MalformedRecord { line: 1, .. })
        ));

        let missing = r#"{"prompt_id":"p0","y1_id":"a","y2_id":"b"}"#;
        assert!(matches!(
            ingest_reader(missing.as_bytes()),
            Err(DataError::MissingLabel { line: 1 })
        ));

        let selfpair = r#"{"prompt_id":"p0","y1_id":"a","y2_id":"a","is_tie":false}"#;
        assert!(matches!(
            ingest_reader(selfpair.as_bytes()),
            Err(DataError::SelfPair { line: 1, .. })
        ));

        let dup = "\
{\"prompt_id\":\"p0\",\"y1_id\":\"a\",\"y2_id\":\"b\",\"score_1\":2.0,\"score_2\":1.0}\n\
{\"prompt_id\":\"p0\",\"y1_id\":\"b\",\"y2_id\":\"a\",\"score_1\":3.0,\"score_2\":1.0}\n";
        assert!(matches!(
            ingest_reader(dup.as_bytes()),
            Err(DataError::DuplicatePair { line: 2, .. })
        ));

        let inconsistent = r#"{"prompt_id":"p0","y1_id":"a","y2_id":"b","score_1":2.0,"score_2":2.0,"is_tie":false}"#;
        assert!(matches!(
            ingest_reader(inconsistent.as_bytes()),
            Err(DataError::InconsistentLabel { line: 1 })
        ));

        let one_score = r#"{"prompt_id":"p0","y1_id":"a","y2_id":"b","score_1":2.0}"#;
        assert!(matches!(
            ingest_reader(one_score.as_bytes()),
            Err(DataError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn explicit_label_without_scores_keeps_orientation() {
        let jsonl = r#"{"prompt_id":"p0","y1_id":"b","y2_id":"a","is_tie":false}"#;
        let c = ingest_reader(jsonl.as_bytes()).unwrap();
        assert_eq!(c.pairs()[0].y1_id, "b");
    }

    #[test]
    fn resample_hits_exact_stratum_counts() {
        let mut pairs = Vec::new();
        for i in 0..300 {
            pairs.push(pair(&format!("p{i}"), "a", "b", 1.0, 1.0, true));
        }
        for i in 300..1000 {
            pairs.push(pair(&format!("p{i}"), "a", "b", 2.0, 1.0, false));
        }
        let c = Corpus::from_pairs(pairs).unwrap();
        let r = resample_tie_ratio(&c, 0.2, 500, 7).unwrap();
        assert_eq!(r.len(), 500);
        assert_eq!(r.tie_count(), 100);
        assert_eq!(r.tie_ratio(), 0.2);

        let no_ties = resample_tie_ratio(&c, 0.0, 400, 7).unwrap();
        assert_eq!(no_ties.tie_count(), 0);

        let again = resample_tie_ratio(&c, 0.2, 500, 7).unwrap();
        assert_eq!(r, again);

        assert!(matches!(
            resample_tie_ratio(&c, 0.9, 500, 7),
            Err(DataError::InfeasibleResample { stratum: "tie", .. })
        ));
    }

    #[test]
    fn quantize_edges() {
        assert_eq!(quantize(0.74, 0.5), 0.5);
        assert_eq!(quantize(-0.1, 0.5), -0.5);
        assert_eq!(quantize(3.0, f64::INFINITY), 0.0);
        assert_eq!(quantize(-3.0, f64::INFINITY), 0.0);
    }

    #[test]
    fn synthetic_tie_ratio_extremes() {
        let tp = TieParam::new(0.5).unwrap();
        let (_, none) = generate_synthetic(50, 4, 1.0, &tp, 1e-12, 3).unwrap();
        assert_eq!(none.tie_count(), 0);
        let (_, all) = generate_synthetic(50, 4, 1.0, &tp, f64::INFINITY, 3).unwrap();
        assert_eq!(all.tie_ratio(), 1.0);
    }

    #[test]
    fn synthetic_is_deterministic_and_canonical() {
        let tp = TieParam::new(0.5).unwrap();
        let (w1, c1) = generate_synthetic(20, 4, 1.0, &tp, 0.5, 42).unwrap();
        let (w2, c2) = generate_synthetic(20, 4, 1.0, &tp, 0.5, 42).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(c1, c2);
        assert_eq!(c1.len(), 20 * 6);
        for p in c1.pairs() {
            if !p.is_tie {
                assert!(p.score_1 > p.score_2);
            } else {
                assert_eq!(p.score_1, p.score_2);
                assert!(p.y1_id < p.y2_id);
            }
        }
    }

    #[test]
    fn world_json_round_trip() {
        let tp = TieParam::new(0.5).unwrap();
        let (w, _) = generate_synthetic(5, 3, 1.0, &tp, 0.5, 9).unwrap();
        let loaded = LatentWorld::from_json(&w.to_json_pretty()).unwrap();
        assert_eq!(w, loaded);
        let c1 = corpus_from_world(&w).unwrap();
        let c2 = corpus_from_world(&loaded).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn split_is_prompt_disjoint() {
        let tp = TieParam::new(0.5).unwrap();
        let (_, c) = generate_synthetic(30, 3, 1.0, &tp, 0.5, 11).unwrap();
        let (train, test) = split(&c, 0.25, 5, true).unwrap();
        let train_prompts: HashSet<_> = train.pairs().iter().map(|p| &p.prompt_id).collect();
        let test_prompts: HashSet<_> = test.pairs().iter().map(|p| &p.prompt_id).collect();
        assert!(train_prompts.is_disjoint(&test_prompts));
        assert_eq!(test.tie_count(), 0);

        let (train2, test2) = split(&c, 0.25, 5, true).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);

        assert!(split(&c, 0.0, 5, true).is_err());
        assert!(split(&c, 1.0, 5, true).is_err());
    }

    #[test]
    fn split_without_ties_ignores_exclusion_flag() {
        let tp = TieParam::new(0.5).unwrap();
        let (_, c) = generate_synthetic(20, 3, 1.0, &tp, 1e-12, 13).unwrap();
        assert_eq!(c.tie_count(), 0);
        let (_, test_a) = split(&c, 0.3, 17, true).unwrap();
        let (_, test_b) = split(&c, 0.3, 17, false).unwrap();
        assert_eq!(test_a, test_b);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let tp = TieParam::new(0.5).unwrap();
        let (_, c) = generate_synthetic(15, 4, 1.0, &tp, 0.5, 21).unwrap();
        let reloaded = ingest_reader(c.to_jsonl().as_bytes()).unwrap();
        assert_eq!(c, reloaded);

        let sub = resample_tie_ratio(&c, 0.1, 40, 3).unwrap();
        let reloaded = ingest_reader(sub.to_jsonl().as_bytes()).unwrap();
        assert_eq!(sub, reloaded);
    }
}
