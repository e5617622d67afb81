//! Synthetic preference corpora with known latent factor weights.
//!
//! A latent agent prefers the response with the larger weighted sum of
//! pairwise factor comparisons. Generated corpora carry exact manifestations
//! (no extraction step) plus the agent's verdicts, giving the scoring
//! pipeline a ground truth to recover.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::kendall_tau_b;
use crate::corpus::{
    expand_scored_set, write_atomic, Corpus, PreferenceRecord, Response, ResponseOrigin,
    ResponsePair, Setting, SourceContext, Task, TaskKind, Verdict,
};
use crate::extraction::{
    factor, FactorManifestation, FactorName, ManifestationStore, ManifestationValue, ValueKind,
};
use crate::scoring::FactorScore;

/// A preference source with known factor weights. The verdict over a pair is
/// the sign of the weighted sum of factor comparisons, with sum-zero ties
/// broken uniformly and the final verdict flipped with probability `noise`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentAgent {
    pub weights: BTreeMap<FactorName, f64>,
    pub noise: f64,
    pub seed: u64,
}

impl LatentAgent {
    pub fn new(
        weights: BTreeMap<FactorName, f64>,
        noise: f64,
        seed: u64,
    ) -> Result<LatentAgent, SynthError> {
        if !weights.values().any(|w| *w != 0.0) {
            return Err(SynthError::NoNonzeroWeight);
        }
        if !(0.0..0.5).contains(&noise) {
            return Err(SynthError::NoiseOutOfRange(noise));
        }
        Ok(LatentAgent {
            weights,
            noise,
            seed,
        })
    }

    fn weight(&self, f: FactorName) -> f64 {
        self.weights.get(&f).copied().unwrap_or(0.0)
    }
}

/// How factor values are drawn. The grid distributions deliberately induce
/// exact ties so the tie paths get exercised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ValueDistribution {
    /// Uniform integer in [lo, hi].
    UniformCount { lo: u64, hi: u64 },
    /// Uniform on {0, 1/steps, 2/steps, ..., 1}.
    UniformGrid { steps: u32 },
    /// Uniform integer in [0, max].
    UniformOrdinal { max: u8 },
}

impl ValueDistribution {
    fn is_degenerate(&self) -> bool {
        match self {
            ValueDistribution::UniformCount { lo, hi } => lo >= hi,
            ValueDistribution::UniformGrid { steps } => *steps == 0,
            ValueDistribution::UniformOrdinal { max } => *max == 0,
        }
    }

    fn sample(&self, kind: ValueKind, rng: &mut ChaCha8Rng) -> ManifestationValue {
        match self {
            ValueDistribution::UniformCount { lo, hi } => {
                ManifestationValue::Count(rng.gen_range(*lo..=*hi))
            }
            ValueDistribution::UniformGrid { steps } => {
                let v = rng.gen_range(0..=*steps) as f64 / *steps as f64;
                match kind {
                    ValueKind::UnitScore => ManifestationValue::UnitScore(v),
                    _ => ManifestationValue::Ratio(v),
                }
            }
            ValueDistribution::UniformOrdinal { max } => {
                ManifestationValue::Ordinal(rng.gen_range(0..=*max))
            }
        }
    }
}

/// Defaults per value kind: counts uniform on 10..=100, ratios and unit
/// scores on a 0.05 grid, ordinals over their full range.
pub fn default_distributions(factors: &[FactorName]) -> BTreeMap<FactorName, ValueDistribution> {
    factors
        .iter()
        .map(|&name| {
            let dist = match factor(name).value_kind {
                ValueKind::Count => ValueDistribution::UniformCount { lo: 10, hi: 100 },
                ValueKind::Ratio | ValueKind::UnitScore => ValueDistribution::UniformGrid { steps: 20 },
                ValueKind::Ordinal => ValueDistribution::UniformOrdinal { max: 2 },
            };
            (name, dist)
        })
        .collect()
}

/// Shape of the generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "snake_case")]
pub enum CorpusStyle {
    /// Independent pairs, one source each; verdicts are evaluation-setting.
    Pairwise { n_pairs: usize },
    /// Score-graded sets expanded to pairs; verdicts are generation-setting.
    ScoredSets { n_sets: usize, set_size: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub style: CorpusStyle,
    pub distributions: BTreeMap<FactorName, ValueDistribution>,
    pub agent_label: String,
}

impl SynthConfig {
    pub fn pairwise(n_pairs: usize, factors: &[FactorName]) -> SynthConfig {
        SynthConfig {
            style: CorpusStyle::Pairwise { n_pairs },
            distributions: default_distributions(factors),
            agent_label: "latent".to_string(),
        }
    }

    pub fn scored_sets(n_sets: usize, set_size: usize, factors: &[FactorName]) -> SynthConfig {
        SynthConfig {
            style: CorpusStyle::ScoredSets { n_sets, set_size },
            distributions: default_distributions(factors),
            agent_label: "latent".to_string(),
        }
    }

    pub fn factors(&self) -> Vec<FactorName> {
        self.distributions.keys().copied().collect()
    }
}

/// A generated corpus: exact manifestations plus the agent's verdicts.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub store: ManifestationStore,
    pub preferences: Vec<PreferenceRecord>,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Deterministic under the agent's seed.
pub fn generate(agent: &LatentAgent, config: &SynthConfig) -> Result<SyntheticCorpus, SynthError> {
    if config.distributions.is_empty()
        || config.distributions.values().all(|d| d.is_degenerate())
    {
        return Err(SynthError::DegenerateDistributions);
    }
    match config.style {
        CorpusStyle::Pairwise { n_pairs } => {
            if n_pairs == 0 {
                return Err(SynthError::EmptyCorpus);
            }
        }
        CorpusStyle::ScoredSets { n_sets, set_size } => {
            if n_sets == 0 {
                return Err(SynthError::EmptyCorpus);
            }
            if !(2..=5).contains(&set_size) {
                return Err(SynthError::BadSetSize(set_size));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(agent.seed);
    let mut corpus = Corpus::new(Task::standard(TaskKind::Summarization));
    let mut store = ManifestationStore::new();
    let mut preferences = Vec::new();

    match config.style {
        CorpusStyle::Pairwise { n_pairs } => {
            for i in 0..n_pairs {
                let source = SourceContext::new(None, format!("synthetic source {i}"), None)?;
                let a = Response::new(
                    format!("synthetic response {i}a"),
                    &source.id,
                    ResponseOrigin::ModelGenerated,
                    None,
                )?;
                let b = Response::new(
                    format!("synthetic response {i}b"),
                    &source.id,
                    ResponseOrigin::ModelGenerated,
                    None,
                )?;
                let va = draw_values(config, &mut rng);
                let vb = draw_values(config, &mut rng);
                let mut weighted = 0.0;
                for (name, value) in &va {
                    let m = sign(value.numeric() - vb[name].numeric());
                    weighted += agent.weight(*name) * m as f64;
                }
                let mut verdict = match sign(weighted) {
                    1 => Verdict::FirstWins,
                    -1 => Verdict::SecondWins,
                    _ => {
                        if rng.gen::<bool>() {
                            Verdict::FirstWins
                        } else {
                            Verdict::SecondWins
                        }
                    }
                };
                if agent.noise > 0.0 && rng.gen::<f64>() < agent.noise {
                    verdict = verdict.negated();
                }
                let pair = ResponsePair::new(&a, &b)?;
                insert_values(&mut store, &a, va);
                insert_values(&mut store, &b, vb);
                preferences.push(PreferenceRecord {
                    pair: pair.clone(),
                    verdict,
                    agent: config.agent_label.clone(),
                    setting: Setting::Evaluation,
                });
                corpus.sources.insert(source.id.clone(), source);
                corpus.responses.insert(a.id.clone(), a);
                corpus.responses.insert(b.id.clone(), b);
                corpus.pairs.push(pair);
            }
        }
        CorpusStyle::ScoredSets { n_sets, set_size } => {
            for i in 0..n_sets {
                let source = SourceContext::new(None, format!("synthetic source {i}"), None)?;
                let drawn: Vec<BTreeMap<FactorName, ManifestationValue>> =
                    (0..set_size).map(|_| draw_values(config, &mut rng)).collect();
                // rank responses by pairwise wins under the agent, ties
                // broken by a random jitter drawn under the seed
                let mut order: Vec<(usize, i64, u64)> = (0..set_size)
                    .map(|r| {
                        let mut wins = 0i64;
                        for other in 0..set_size {
                            if other == r {
                                continue;
                            }
                            let mut weighted = 0.0;
                            for (name, value) in &drawn[r] {
                                let m = sign(value.numeric() - drawn[other][name].numeric());
                                weighted += agent.weight(*name) * m as f64;
                            }
                            wins += sign(weighted) as i64;
                        }
                        (r, wins, rng.gen::<u64>())
                    })
                    .collect();
                order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

                let mut responses = Vec::with_capacity(set_size);
                for (rank_pos, &(r, _, _)) in order.iter().enumerate() {
                    let score = (set_size - rank_pos) as u8;
                    let resp = Response::new(
                        format!("synthetic response {i}.{r}"),
                        &source.id,
                        ResponseOrigin::ModelGenerated,
                        Some(score),
                    )?;
                    insert_values(&mut store, &resp, drawn[r].clone());
                    responses.push(resp);
                }
                let mut records = expand_scored_set(&responses, &config.agent_label)?;
                if agent.noise > 0.0 {
                    for record in &mut records {
                        if rng.gen::<f64>() < agent.noise {
                            record.verdict = record.verdict.negated();
                        }
                    }
                }
                for record in &records {
                    corpus.pairs.push(record.pair.clone());
                }
                preferences.extend(records);
                corpus.sources.insert(source.id.clone(), source);
                for r in responses {
                    corpus.responses.insert(r.id.clone(), r);
                }
            }
        }
    }
    Ok(SyntheticCorpus {
        corpus,
        store,
        preferences,
    })
}

fn draw_values(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<FactorName, ManifestationValue> {
    config
        .distributions
        .iter()
        .map(|(&name, dist)| (name, dist.sample(factor(name).value_kind, rng)))
        .collect()
}

fn insert_values(
    store: &mut ManifestationStore,
    response: &Response,
    values: BTreeMap<FactorName, ManifestationValue>,
) {
    for (name, value) in values {
        store.insert(
            FactorManifestation::new(response.id.clone(), name, value, None)
                .expect("synthetic values lie in range"),
        );
    }
}

impl SyntheticCorpus {
    /// Write the canonical corpus file, the manifestation store, and the
    /// preference records, so the regular pipeline runs on synthetic data
    /// unchanged. Pairwise verdicts are written as `human_choice` labels.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| SynthError::Io(dir.display().to_string(), e.to_string()))?;
        let mut rows = Vec::new();
        for record in &self.preferences {
            let a = &self.corpus.responses[&record.pair.first];
            let b = &self.corpus.responses[&record.pair.second];
            let source = &self.corpus.sources[&record.pair.source_id];
            let mut row = serde_json::json!({
                "source": source.content,
                "response_a": a.text,
                "response_b": b.text,
            });
            match record.setting {
                Setting::Generation => {
                    row["scores"] = serde_json::json!({
                        "a": a.score.expect("generation responses carry scores"),
                        "b": b.score.expect("generation responses carry scores"),
                    });
                }
                _ => {
                    row["human_choice"] = serde_json::json!(match record.verdict {
                        Verdict::FirstWins => "a",
                        Verdict::SecondWins => "b",
                        Verdict::Tie => "tie",
                    });
                }
            }
            rows.extend_from_slice(row.to_string().as_bytes());
            rows.push(b'\n');
        }
        write_atomic(&dir.join("corpus.jsonl"), &rows)
            .map_err(|e| SynthError::Io(dir.display().to_string(), e.to_string()))?;
        self.store
            .save(&dir.join("manifestations.jsonl"))
            .map_err(|e| SynthError::Io(dir.display().to_string(), e.to_string()))?;
        let mut prefs = Vec::new();
        for record in &self.preferences {
            prefs.extend_from_slice(
                serde_json::to_string(record).expect("serializable").as_bytes(),
            );
            prefs.push(b'\n');
        }
        write_atomic(&dir.join("preferences.jsonl"), &prefs)
            .map_err(|e| SynthError::Io(dir.display().to_string(), e.to_string()))
    }
}

/// Per-factor recovery outcome: the recovered score against the sign of the
/// weight (1 / -1 for weighted factors, 0 for unweighted ones).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorRecovery {
    pub factor: FactorName,
    pub weight: f64,
    pub recovered: Option<f64>,
    pub target: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    /// Kendall tau-b between the weight vector and the recovered scores,
    /// when at least three are defined and neither vector is constant.
    pub rank_tau_b: Option<f64>,
    pub per_factor: Vec<FactorRecovery>,
}

/// Compare recovered factor scores with the agent's true weights.
pub fn recovery_check(
    agent: &LatentAgent,
    scores: &BTreeMap<FactorName, FactorScore>,
) -> RecoveryMetrics {
    let mut per_factor = Vec::new();
    let mut weight_vec = Vec::new();
    let mut score_vec = Vec::new();
    for (name, score) in scores {
        let weight = agent.weight(*name);
        let target = if weight > 0.0 {
            1.0
        } else if weight < 0.0 {
            -1.0
        } else {
            0.0
        };
        if let Some(v) = score.score {
            weight_vec.push(weight);
            score_vec.push(v);
        }
        per_factor.push(FactorRecovery {
            factor: *name,
            weight,
            recovered: score.score,
            target,
            error: score.score.map(|v| v - target),
        });
    }
    let rank_tau_b = kendall_tau_b(&weight_vec, &score_vec).ok();
    RecoveryMetrics {
        rank_tau_b,
        per_factor,
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("latent agent needs at least one nonzero weight")]
    NoNonzeroWeight,
    #[error("noise {0} outside [0, 0.5)")]
    NoiseOutOfRange(f64),
    #[error("all factor value distributions are degenerate")]
    DegenerateDistributions,
    #[error("corpus size must be at least 1")]
    EmptyCorpus,
    #[error("scored set size {0} outside 2..=5")]
    BadSetSize(usize),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("{0}: {1}")]
    Io(String, String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::factor_scores;

    fn single_factor_agent(factor: FactorName, noise: f64, seed: u64) -> LatentAgent {
        let mut weights = BTreeMap::new();
        weights.insert(factor, 1.0);
        LatentAgent::new(weights, noise, seed).unwrap()
    }

    #[test]
    fn length_agent_with_zero_noise_always_prefers_longer() {
        let agent = single_factor_agent(FactorName::Length, 0.0, 11);
        let config = SynthConfig::pairwise(200, &[FactorName::Length]);
        let synth = generate(&agent, &config).unwrap();
        for record in &synth.preferences {
            let a = synth.store.get(&record.pair.first, FactorName::Length).unwrap();
            let b = synth.store.get(&record.pair.second, FactorName::Length).unwrap();
            let diff = a.value.numeric() - b.value.numeric();
            if diff > 0.0 {
                assert_eq!(record.verdict, Verdict::FirstWins);
            } else if diff < 0.0 {
                assert_eq!(record.verdict, Verdict::SecondWins);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_under_seed() {
        let agent = single_factor_agent(FactorName::Length, 0.2, 99);
        let config = SynthConfig::pairwise(50, &[FactorName::Length, FactorName::OffFocus]);
        let a = generate(&agent, &config).unwrap();
        let b = generate(&agent, &config).unwrap();
        assert_eq!(a.preferences, b.preferences);
        assert_eq!(a.store, b.store);
        assert_eq!(a.corpus, b.corpus);
    }

    #[test]
    fn zero_pairs_is_an_error() {
        let agent = single_factor_agent(FactorName::Length, 0.0, 1);
        let config = SynthConfig::pairwise(0, &[FactorName::Length]);
        assert!(matches!(generate(&agent, &config), Err(SynthError::EmptyCorpus)));
    }

    #[test]
    fn degenerate_distributions_are_an_error() {
        let agent = single_factor_agent(FactorName::Length, 0.0, 1);
        let mut config = SynthConfig::pairwise(10, &[FactorName::Length]);
        config
            .distributions
            .insert(FactorName::Length, ValueDistribution::UniformCount { lo: 5, hi: 5 });
        assert!(matches!(
            generate(&agent, &config),
            Err(SynthError::DegenerateDistributions)
        ));
    }

    #[test]
    fn agent_validation() {
        assert!(matches!(
            LatentAgent::new(BTreeMap::new(), 0.0, 1),
            Err(SynthError::NoNonzeroWeight)
        ));
        let mut w = BTreeMap::new();
        w.insert(FactorName::Length, 1.0);
        assert!(matches!(
            LatentAgent::new(w, 0.5, 1),
            Err(SynthError::NoiseOutOfRange(_))
        ));
    }

    #[test]
    fn untied_single_factor_recovery_is_exactly_one() {
        // unit-score grid ties are possible, so use counts on a wide range
        // and drop tied pairs via the evaluation rule
        let agent = single_factor_agent(FactorName::Length, 0.0, 3);
        let config = SynthConfig::pairwise(300, &[FactorName::Length]);
        let synth = generate(&agent, &config).unwrap();
        let scores =
            factor_scores(&synth.preferences, &synth.store, &[FactorName::Length]).unwrap();
        assert_eq!(scores[&FactorName::Length].score, Some(1.0));
    }

    #[test]
    fn scored_sets_expand_to_all_pairs_with_distinct_scores() {
        let agent = single_factor_agent(FactorName::Length, 0.0, 5);
        let config = SynthConfig::scored_sets(4, 5, &[FactorName::Length]);
        let synth = generate(&agent, &config).unwrap();
        assert_eq!(synth.preferences.len(), 4 * 10);
        assert!(synth.preferences.iter().all(|p| p.verdict != Verdict::Tie));
        assert!(synth
            .preferences
            .iter()
            .all(|p| p.setting == Setting::Generation));
        // single-factor agent: score order equals value order, so tau14 on
        // the generation rule is 1 up to factor-tie dilution and never less
        let scores =
            factor_scores(&synth.preferences, &synth.store, &[FactorName::Length]).unwrap();
        let s = &scores[&FactorName::Length];
        assert_eq!(s.discordant, 0);
        assert!(s.score.unwrap() > 0.9);
    }

    #[test]
    fn write_to_dir_round_trips_through_the_loader() {
        let agent = single_factor_agent(FactorName::Length, 0.0, 8);
        let config = SynthConfig::pairwise(10, &[FactorName::Length]);
        let synth = generate(&agent, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        synth.write_to_dir(dir.path()).unwrap();
        let (loaded, report) = Corpus::load_jsonl(
            &dir.path().join("corpus.jsonl"),
            Task::standard(TaskKind::Summarization),
        )
        .unwrap();
        assert_eq!(report.rows_ok, 10);
        assert_eq!(loaded.human_preferences.len(), 10);
        let store = ManifestationStore::load(&dir.path().join("manifestations.jsonl")).unwrap();
        assert_eq!(store, synth.store);
    }
}
