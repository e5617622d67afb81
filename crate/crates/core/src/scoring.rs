//! Pairwise factor comparison and the tau-14 factor score.
//!
//! For a factor k over a set of pairs, with Pref the overall verdict and M_k
//! the factor comparison, the score is (C - D) / (C + D + T) where C counts
//! pairs with Pref·M_k = +1, D counts Pref·M_k = -1, and T depends on the
//! setting: in generation T counts factor ties (M_k = 0; preference ties
//! cannot occur because scores are distinct), while in evaluation pairs with
//! M_k = 0 are dropped first and T counts preference ties (Pref = 0) among
//! the remainder.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PreferenceRecord, ResponseId, ResponsePair, Setting, Verdict};
use crate::extraction::{FactorManifestation, FactorName, ManifestationStore};

/// Which response of a pair manifests a factor more strongly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorComparison {
    pub pair: ResponsePair,
    pub factor: FactorName,
    /// +1 first, -1 second, 0 exactly equal.
    pub value: i8,
}

/// Compare two manifestations of the same factor: the sign of the numeric
/// difference, with exact equality as the tie case.
pub fn compare_factor(
    pair: &ResponsePair,
    first: &FactorManifestation,
    second: &FactorManifestation,
) -> Result<FactorComparison, ScoreError> {
    if first.factor != second.factor {
        return Err(ScoreError::FactorMismatch {
            first: first.factor,
            second: second.factor,
        });
    }
    let (a, b) = (first.value.numeric(), second.value.numeric());
    let value = if a > b {
        1
    } else if a < b {
        -1
    } else {
        0
    };
    Ok(FactorComparison {
        pair: pair.clone(),
        factor: first.factor,
        value,
    })
}

/// How ties enter the denominator of the factor score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// T counts factor ties (M_k = 0); preference ties are impossible.
    Generation,
    /// Factor ties are dropped, then T counts preference ties (Pref = 0).
    Evaluation,
}

impl TieRule {
    /// Human labels are evaluation-type judgments over given pairs, so they
    /// share the evaluation tie rule; improvement pairs count like
    /// generation (T is the number of unchanged-factor pairs).
    pub fn for_setting(setting: Setting) -> TieRule {
        match setting {
            Setting::Generation | Setting::Improvement => TieRule::Generation,
            Setting::Evaluation | Setting::Human => TieRule::Evaluation,
        }
    }
}

/// Concordant/discordant/tie counts and the resulting score. `score` is
/// `None` when no pair contributes (C + D + T = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScore {
    pub factor: FactorName,
    pub agent: String,
    pub setting: Setting,
    pub score: Option<f64>,
    pub concordant: u64,
    pub discordant: u64,
    pub ties: u64,
    /// Pairs entering C + D + T.
    pub n_pairs_considered: u64,
    /// Pairs excluded because a manifestation was missing or skipped.
    pub n_excluded: u64,
    /// Evaluation setting only: pairs dropped for M_k = 0.
    pub n_factor_ties_dropped: u64,
}

impl FactorScore {
    fn undefined(factor: FactorName, agent: &str, setting: Setting) -> FactorScore {
        FactorScore {
            factor,
            agent: agent.to_string(),
            setting,
            score: None,
            concordant: 0,
            discordant: 0,
            ties: 0,
            n_pairs_considered: 0,
            n_excluded: 0,
            n_factor_ties_dropped: 0,
        }
    }
}

/// The tau-14 statistic over (Pref, M_k) entries.
pub fn tau14(
    entries: &[(i8, i8)],
    rule: TieRule,
    factor: FactorName,
    agent: &str,
    setting: Setting,
) -> Result<FactorScore, ScoreError> {
    let mut score = FactorScore::undefined(factor, agent, setting);
    for &(pref, m) in entries {
        if !(-1..=1).contains(&pref) || !(-1..=1).contains(&m) {
            return Err(ScoreError::BadComparisonValue);
        }
        if rule == TieRule::Generation && pref == 0 {
            return Err(ScoreError::GenerationTie);
        }
        if rule == TieRule::Evaluation && m == 0 {
            score.n_factor_ties_dropped += 1;
            continue;
        }
        match pref * m {
            1 => score.concordant += 1,
            -1 => score.discordant += 1,
            _ => {
                // pref = 0 under evaluation, or m = 0 under generation
                score.ties += 1;
            }
        }
    }
    let total = score.concordant + score.discordant + score.ties;
    score.n_pairs_considered = total;
    if total > 0 {
        score.score =
            Some((score.concordant as f64 - score.discordant as f64) / total as f64);
    }
    Ok(score)
}

/// Factor scores for one agent/setting over a corpus: for each factor, pairs
/// missing either manifestation are excluded (and counted), the rest are
/// compared and fed to tau-14 under the setting's tie rule.
pub fn factor_scores(
    preferences: &[PreferenceRecord],
    store: &ManifestationStore,
    factors: &[FactorName],
) -> Result<BTreeMap<FactorName, FactorScore>, ScoreError> {
    let (agent, setting) = match preferences.first() {
        Some(first) => (first.agent.clone(), first.setting),
        None => return Err(ScoreError::NoPreferences),
    };
    if preferences
        .iter()
        .any(|p| p.agent != agent || p.setting != setting)
    {
        return Err(ScoreError::MixedAgents);
    }
    let rule = TieRule::for_setting(setting);

    let mut out = BTreeMap::new();
    for &name in factors {
        let mut entries = Vec::with_capacity(preferences.len());
        let mut excluded = 0u64;
        for record in preferences {
            let first = store.get(&record.pair.first, name);
            let second = store.get(&record.pair.second, name);
            match (first, second) {
                (Some(a), Some(b)) => {
                    let cmp = compare_factor(&record.pair, a, b)?;
                    entries.push((record.verdict.value(), cmp.value));
                }
                _ => excluded += 1,
            }
        }
        let mut score = tau14(&entries, rule, name, &agent, setting)?;
        score.n_excluded = excluded;
        out.insert(name, score);
    }
    Ok(out)
}

/// An (initial, improved) response pair from an improvement run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovementPair {
    pub initial: ResponseId,
    pub improved: ResponseId,
}

/// Improvement factor scores: the improved response plays the preferred
/// side of every pair, so C counts factors that increased, D factors that
/// decreased, and T factors left unchanged.
pub fn improvement_scores(
    pairs: &[ImprovementPair],
    store: &ManifestationStore,
    factors: &[FactorName],
    agent: &str,
) -> Result<BTreeMap<FactorName, FactorScore>, ScoreError> {
    if pairs.is_empty() {
        return Err(ScoreError::NoPreferences);
    }
    let mut out = BTreeMap::new();
    for &name in factors {
        let mut score = FactorScore::undefined(name, agent, Setting::Improvement);
        for pair in pairs {
            let post = store.get(&pair.improved, name);
            let init = store.get(&pair.initial, name);
            match (post, init) {
                (Some(post), Some(init)) => {
                    let (p, i) = (post.value.numeric(), init.value.numeric());
                    if p > i {
                        score.concordant += 1;
                    } else if p < i {
                        score.discordant += 1;
                    } else {
                        score.ties += 1;
                    }
                }
                _ => score.n_excluded += 1,
            }
        }
        let total = score.concordant + score.discordant + score.ties;
        score.n_pairs_considered = total;
        if total > 0 {
            score.score =
                Some((score.concordant as f64 - score.discordant as f64) / total as f64);
        }
        out.insert(name, score);
    }
    Ok(out)
}

/// Build the (Pref, M_k) entries a preference list induces for one factor.
/// Exposed for oracle-style re-derivations in tests and reports.
pub fn comparison_entries(
    preferences: &[PreferenceRecord],
    store: &ManifestationStore,
    factor_name: FactorName,
) -> Vec<(Verdict, Option<i8>)> {
    preferences
        .iter()
        .map(|record| {
            let first = store.get(&record.pair.first, factor_name);
            let second = store.get(&record.pair.second, factor_name);
            let m = match (first, second) {
                (Some(a), Some(b)) => {
                    let (x, y) = (a.value.numeric(), b.value.numeric());
                    Some(if x > y {
                        1
                    } else if x < y {
                        -1
                    } else {
                        0
                    })
                }
                _ => None,
            };
            (record.verdict, m)
        })
        .collect()
}

/// Pretty JSON rendering of a factor-score map, scores in map order.
pub fn scores_to_json(scores: &BTreeMap<FactorName, FactorScore>) -> String {
    let list: Vec<&FactorScore> = scores.values().collect();
    let doc = serde_json::json!({
        "format_version": 1,
        "scores": list,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn scores_from_json(text: &str) -> Result<BTreeMap<FactorName, FactorScore>, ScoreError> {
    #[derive(serde::Deserialize)]
    struct Doc {
        scores: Vec<FactorScore>,
    }
    let doc: Doc = serde_json::from_str(text).map_err(|e| ScoreError::Parse(e.to_string()))?;
    Ok(doc.scores.into_iter().map(|s| (s.factor, s)).collect())
}

/// CSV rendering with the columns (agent, setting, factor, score, C, D, T,
/// n_excluded); an undefined score renders as an empty field.
pub fn scores_to_csv(scores: &BTreeMap<FactorName, FactorScore>) -> Result<String, ScoreError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["agent", "setting", "factor", "score", "C", "D", "T", "n_excluded"])
        .map_err(|e| ScoreError::Parse(e.to_string()))?;
    for s in scores.values() {
        writer
            .write_record([
                s.agent.as_str(),
                s.setting.as_str(),
                s.factor.as_str(),
                &s.score.map(|v| format!("{v:.6}")).unwrap_or_default(),
                &s.concordant.to_string(),
                &s.discordant.to_string(),
                &s.ties.to_string(),
                &s.n_excluded.to_string(),
            ])
            .map_err(|e| ScoreError::Parse(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| ScoreError::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ScoreError::Parse(e.to_string()))
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("comparison mixes factors {first} and {second}")]
    FactorMismatch {
        first: FactorName,
        second: FactorName,
    },
    #[error("comparison values must lie in {{-1, 0, +1}}")]
    BadComparisonValue,
    #[error("generation-setting entry with a tied preference verdict")]
    GenerationTie,
    #[error("no preference records given")]
    NoPreferences,
    #[error("preference records mix agents or settings")]
    MixedAgents,
    #[error("parse: {0}")]
    Parse(String),
}
