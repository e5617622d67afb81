//! Factor rankings and between-agent alignment: Kendall tau-b, Spearman rho,
//! Pearson r over factor-score vectors, plus the pairwise agreement rate and
//! the improvement-alignment statistic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PreferenceRecord, ResponseId, Setting, Verdict};
use crate::extraction::FactorName;
use crate::scoring::FactorScore;

/// One factor's position in a ranking. Tied scores share the average of
/// their positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFactor {
    pub factor: FactorName,
    pub score: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRanking {
    pub agent: String,
    pub setting: Setting,
    /// Descending by score.
    pub entries: Vec<RankedFactor>,
}

/// Rank defined factor scores descending; exact score ties get the average
/// of the positions they occupy. Undefined scores are left out.
pub fn rank_factors(
    scores: &BTreeMap<FactorName, FactorScore>,
) -> Result<FactorRanking, AlignError> {
    let mut defined: Vec<(&FactorName, f64)> = scores
        .iter()
        .filter_map(|(name, s)| s.score.map(|v| (name, v)))
        .collect();
    if defined.is_empty() {
        return Err(AlignError::AllUndefined);
    }
    defined.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("factor scores are finite")
            .then_with(|| a.0.cmp(b.0))
    });

    let mut entries = Vec::with_capacity(defined.len());
    let mut i = 0;
    while i < defined.len() {
        let mut j = i;
        while j < defined.len() && defined[j].1 == defined[i].1 {
            j += 1;
        }
        // positions are 1-based; the tied block [i, j) shares their mean
        let rank = (i + 1..=j).sum::<usize>() as f64 / (j - i) as f64;
        for &(name, score) in &defined[i..j] {
            entries.push(RankedFactor {
                factor: *name,
                score,
                rank,
            });
        }
        i = j;
    }
    let any = scores.values().next().expect("non-empty scores");
    Ok(FactorRanking {
        agent: any.agent.clone(),
        setting: any.setting,
        entries,
    })
}

/// Kendall tau-b: (C - D) / sqrt((C + D + Tx)(C + D + Ty)) over all index
/// pairs, where Tx counts pairs tied only in x and Ty pairs tied only in y.
/// Undefined when either vector is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, AlignError> {
    check_lengths(x, y)?;
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let sx = sign(x[i] - x[j]);
            let sy = sign(y[i] - y[j]);
            match (sx, sy) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if sx == sy => c += 1,
                _ => d += 1,
            }
        }
    }
    let denom_x = c + d + tx;
    let denom_y = c + d + ty;
    if denom_x == 0 || denom_y == 0 {
        return Err(AlignError::Undefined("constant vector"));
    }
    Ok((c as f64 - d as f64) / ((denom_x as f64) * (denom_y as f64)).sqrt())
}

/// Spearman rho: average-rank transform of both vectors, then Pearson on
/// the ranks (the tie-safe form).
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, AlignError> {
    check_lengths(x, y)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

/// Standard product-moment correlation. Undefined on zero variance.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, AlignError> {
    check_lengths(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AlignError::Undefined("zero variance"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Ascending 1-based ranks with ties sharing their average position.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + 1..=j).sum::<usize>() as f64 / (j - i) as f64;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
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

fn check_lengths(x: &[f64], y: &[f64]) -> Result<(), AlignError> {
    if x.len() != y.len() {
        return Err(AlignError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(AlignError::InsufficientData {
            have: x.len(),
            need: 3,
        });
    }
    Ok(())
}

/// Overall agreement between a model's evaluation verdicts and human labels
/// over their shared pairs. Model ties count as disagreement; the tie rate
/// is reported separately so either convention can be recovered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub rate: f64,
    pub tie_rate: f64,
    pub n_pairs: u64,
    pub n_matches: u64,
    pub n_model_ties: u64,
}

pub fn agreement_rate(
    model: &[PreferenceRecord],
    human: &[PreferenceRecord],
) -> Result<Agreement, AlignError> {
    if human.iter().any(|p| p.verdict == Verdict::Tie) {
        return Err(AlignError::HumanTies);
    }
    let normalize = |p: &PreferenceRecord| -> ((ResponseId, ResponseId), i8) {
        let key = p.pair.unordered_key();
        let v = if p.pair.first == key.0 {
            p.verdict.value()
        } else {
            -p.verdict.value()
        };
        (key, v)
    };
    let human_map: BTreeMap<_, _> = human.iter().map(normalize).collect();
    let mut n_pairs = 0u64;
    let mut n_matches = 0u64;
    let mut n_model_ties = 0u64;
    for record in model {
        let (key, model_v) = normalize(record);
        let Some(&human_v) = human_map.get(&key) else {
            continue;
        };
        n_pairs += 1;
        if model_v == 0 {
            n_model_ties += 1;
        } else if model_v == human_v {
            n_matches += 1;
        }
    }
    if n_pairs == 0 {
        return Err(AlignError::Undefined("no shared pairs"));
    }
    Ok(Agreement {
        rate: n_matches as f64 / n_pairs as f64,
        tie_rate: n_model_ties as f64 / n_pairs as f64,
        n_pairs,
        n_matches,
        n_model_ties,
    })
}

/// Factors defined in both score maps, with both values.
pub fn shared_defined(
    a: &BTreeMap<FactorName, FactorScore>,
    b: &BTreeMap<FactorName, FactorScore>,
) -> Vec<(FactorName, f64, f64)> {
    a.iter()
        .filter_map(|(name, sa)| {
            let va = sa.score?;
            let vb = b.get(name)?.score?;
            Some((*name, va, vb))
        })
        .collect()
}

/// Kendall tau-b between an improvement score vector and a reference
/// agent's factor scores, over their shared defined factors.
pub fn delta_tau(
    improvement: &BTreeMap<FactorName, FactorScore>,
    reference: &BTreeMap<FactorName, FactorScore>,
) -> Result<f64, AlignError> {
    let shared = shared_defined(improvement, reference);
    let x: Vec<f64> = shared.iter().map(|(_, a, _)| *a).collect();
    let y: Vec<f64> = shared.iter().map(|(_, _, b)| *b).collect();
    kendall_tau_b(&x, &y)
}

/// One row of the per-factor table in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub factor: FactorName,
    pub score_a: Option<f64>,
    pub score_b: Option<f64>,
    pub rank_a: Option<f64>,
    pub rank_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRef {
    pub agent: String,
    pub setting: Setting,
}

/// Factor rankings plus rank/value correlations and the optional agreement
/// rate between two agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub format_version: u32,
    pub agent_a: AgentRef,
    pub agent_b: AgentRef,
    pub tau_b: Option<f64>,
    pub rho: Option<f64>,
    pub pearson_r: Option<f64>,
    /// Shared defined factors the correlations were computed over.
    pub n_factors: usize,
    /// Factors dropped because either agent's score was undefined.
    pub excluded_factors: Vec<FactorName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Agreement>,
    pub factors: Vec<ReportRow>,
}

/// Correlate two agents' factor scores over their shared defined factors.
/// Fewer than three shared factors is an error; a correlation undefined for
/// constancy reasons is reported as null.
pub fn build_report(
    scores_a: &BTreeMap<FactorName, FactorScore>,
    scores_b: &BTreeMap<FactorName, FactorScore>,
    agreement: Option<Agreement>,
) -> Result<AlignmentReport, AlignError> {
    let shared = shared_defined(scores_a, scores_b);
    if shared.len() < 3 {
        return Err(AlignError::InsufficientData {
            have: shared.len(),
            need: 3,
        });
    }
    let x: Vec<f64> = shared.iter().map(|(_, a, _)| *a).collect();
    let y: Vec<f64> = shared.iter().map(|(_, _, b)| *b).collect();
    let defined_or_null = |r: Result<f64, AlignError>| -> Result<Option<f64>, AlignError> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(AlignError::Undefined(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let tau_b = defined_or_null(kendall_tau_b(&x, &y))?;
    let rho = defined_or_null(spearman_rho(&x, &y))?;
    let pearson = defined_or_null(pearson_r(&x, &y))?;

    let ranking_a = rank_factors(scores_a)?;
    let ranking_b = rank_factors(scores_b)?;
    let rank_of = |ranking: &FactorRanking, f: FactorName| {
        ranking
            .entries
            .iter()
            .find(|e| e.factor == f)
            .map(|e| e.rank)
    };

    let mut all_factors: Vec<FactorName> = scores_a.keys().copied().collect();
    for name in scores_b.keys() {
        if !all_factors.contains(name) {
            all_factors.push(*name);
        }
    }
    let shared_names: Vec<FactorName> = shared.iter().map(|(n, _, _)| *n).collect();
    let excluded: Vec<FactorName> = all_factors
        .iter()
        .copied()
        .filter(|n| !shared_names.contains(n))
        .collect();

    let any_a = scores_a.values().next().expect("non-empty scores");
    let any_b = scores_b.values().next().expect("non-empty scores");
    let mut rows: Vec<ReportRow> = all_factors
        .iter()
        .map(|&factor| ReportRow {
            factor,
            score_a: scores_a.get(&factor).and_then(|s| s.score),
            score_b: scores_b.get(&factor).and_then(|s| s.score),
            rank_a: rank_of(&ranking_a, factor),
            rank_b: rank_of(&ranking_b, factor),
        })
        .collect();
    // table follows agent A's ranking, undefined rows last
    rows.sort_by(|a, b| match (a.rank_a, b.rank_a) {
        (Some(x), Some(y)) => x.partial_cmp(&y).expect("finite ranks"),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.factor.cmp(&b.factor),
    });

    Ok(AlignmentReport {
        format_version: 1,
        agent_a: AgentRef {
            agent: any_a.agent.clone(),
            setting: any_a.setting,
        },
        agent_b: AgentRef {
            agent: any_b.agent.clone(),
            setting: any_b.setting,
        },
        tau_b,
        rho,
        pearson_r: pearson,
        n_factors: shared.len(),
        excluded_factors: excluded,
        agreement,
        factors: rows,
    })
}

impl AlignmentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<AlignmentReport, AlignError> {
        serde_json::from_str(text).map_err(|e| AlignError::Parse(e.to_string()))
    }

    /// CSV of the per-factor table.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = String::from("factor,score_a,score_b,rank_a,rank_b\n");
        for row in &self.factors {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.factor,
                fmt(row.score_a),
                fmt(row.score_b),
                fmt(row.rank_a),
                fmt(row.rank_b),
            ));
        }
        out
    }

    /// Markdown rendering: correlations up top, then the factor table with
    /// scores on the left and ranks on the right.
    pub fn to_markdown(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let mut out = String::new();
        out.push_str(&format!(
            "# Factor-level alignment: {} ({}) vs {} ({})\n\n",
            self.agent_a.agent, self.agent_a.setting, self.agent_b.agent, self.agent_b.setting
        ));
        out.push_str(&format!(
            "- Kendall tau-b: {}\n- Spearman rho: {}\n- Pearson r: {}\n- shared factors: {}\n",
            fmt(self.tau_b),
            fmt(self.rho),
            fmt(self.pearson_r),
            self.n_factors
        ));
        if let Some(a) = &self.agreement {
            out.push_str(&format!(
                "- agreement rate: {:.3} (tie rate {:.3}, {} pairs)\n",
                a.rate, a.tie_rate, a.n_pairs
            ));
        }
        if !self.excluded_factors.is_empty() {
            let names: Vec<&str> = self.excluded_factors.iter().map(|f| f.as_str()).collect();
            out.push_str(&format!("- excluded (undefined): {}\n", names.join(", ")));
        }
        out.push_str("\n| factor | score A | score B | rank A | rank B |\n");
        out.push_str("|---|---|---|---|---|\n");
        for row in &self.factors {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                row.factor,
                fmt(row.score_a),
                fmt(row.score_b),
                fmt(row.rank_a),
                fmt(row.rank_b),
            ));
        }
        out
    }

    /// Plot-ready series: factor names on x, each agent's scores as one y
    /// series, for bar charts.
    pub fn to_plot_series(&self) -> serde_json::Value {
        let x: Vec<&str> = self.factors.iter().map(|r| r.factor.as_str()).collect();
        serde_json::json!({
            "x": x,
            "series": [
                {
                    "agent": self.agent_a.agent,
                    "setting": self.agent_a.setting.as_str(),
                    "y": self.factors.iter().map(|r| r.score_a).collect::<Vec<_>>(),
                },
                {
                    "agent": self.agent_b.agent,
                    "setting": self.agent_b.setting.as_str(),
                    "y": self.factors.iter().map(|r| r.score_b).collect::<Vec<_>>(),
                },
            ],
        })
    }
}

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("vectors have different lengths ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("insufficient data: {have} shared defined factors, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("undefined: {0}")]
    Undefined(&'static str),
    #[error("all factor scores are undefined")]
    AllUndefined,
    #[error("human verdicts contain ties")]
    HumanTies,
    #[error("parse: {0}")]
    Parse(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    // Factor-score columns of the summarization benchmark: one model's
    // generation-setting scores against the human column, in the order
    // intent, formality, #facts, coverage, length, coherence, off-focus,
    // hallucination, fluency, novel words. The model column carries an exact
    // 0.114 tie between formality and coherence at published precision.
    pub(crate) const HUMAN: [f64; 10] = [
        0.596, 0.594, 0.328, 0.274, 0.257, 0.180, 0.050, -0.037, -0.072, -0.167,
    ];
    pub(crate) const MODEL_GEN_ROUNDED: [f64; 10] = [
        0.208, 0.114, 0.708, 0.640, 0.904, 0.114, -0.015, 0.075, -0.165, 0.534,
    ];
    // Full-precision reading with coherence marginally above formality.
    pub(crate) const MODEL_GEN_FULL: [f64; 10] = [
        0.208, 0.1139, 0.708, 0.640, 0.904, 0.1141, -0.015, 0.075, -0.165, 0.534,
    ];

    fn score_map(values: &[(FactorName, Option<f64>)]) -> BTreeMap<FactorName, FactorScore> {
        values
            .iter()
            .map(|(name, v)| {
                (
                    *name,
                    FactorScore {
                        factor: *name,
                        agent: "a".into(),
                        setting: Setting::Human,
                        score: *v,
                        concordant: 0,
                        discordant: 0,
                        ties: 0,
                        n_pairs_considered: 0,
                        n_excluded: 0,
                        n_factor_ties_dropped: 0,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn rank_factors_descending() {
        let scores = score_map(&[
            (FactorName::Length, Some(0.9)),
            (FactorName::IntentAlignment, Some(0.2)),
            (FactorName::Fluency, Some(-0.1)),
        ]);
        let ranking = rank_factors(&scores).unwrap();
        let ranks: Vec<(FactorName, f64)> =
            ranking.entries.iter().map(|e| (e.factor, e.rank)).collect();
        assert_eq!(
            ranks,
            vec![
                (FactorName::Length, 1.0),
                (FactorName::IntentAlignment, 2.0),
                (FactorName::Fluency, 3.0),
            ]
        );
    }

    #[test]
    fn rank_factors_averages_tied_positions() {
        // the published model column: formality and coherence tie at 0.114
        // in positions 6 and 7, so both get rank 6.5
        let names = [
            FactorName::IntentAlignment,
            FactorName::FormalityAlignment,
            FactorName::NumberOfFacts,
            FactorName::SourceCoverage,
            FactorName::Length,
            FactorName::Coherence,
            FactorName::OffFocus,
            FactorName::Hallucination,
            FactorName::Fluency,
            FactorName::NovelWords,
        ];
        let scores = score_map(
            &names
                .iter()
                .zip(MODEL_GEN_ROUNDED)
                .map(|(n, v)| (*n, Some(v)))
                .collect::<Vec<_>>(),
        );
        let ranking = rank_factors(&scores).unwrap();
        let rank_of = |f: FactorName| {
            ranking
                .entries
                .iter()
                .find(|e| e.factor == f)
                .unwrap()
                .rank
        };
        assert_eq!(rank_of(FactorName::Length), 1.0);
        assert_eq!(rank_of(FactorName::FormalityAlignment), 6.5);
        assert_eq!(rank_of(FactorName::Coherence), 6.5);
        assert_eq!(rank_of(FactorName::Fluency), 10.0);
    }

    #[test]
    fn rank_single_defined_factor_is_one() {
        let scores = score_map(&[
            (FactorName::Length, Some(0.4)),
            (FactorName::Fluency, None),
        ]);
        let ranking = rank_factors(&scores).unwrap();
        assert_eq!(ranking.entries.len(), 1);
        assert_eq!(ranking.entries[0].rank, 1.0);
    }

    #[test]
    fn rank_all_undefined_is_an_error() {
        let scores = score_map(&[(FactorName::Length, None)]);
        assert!(matches!(rank_factors(&scores), Err(AlignError::AllUndefined)));
    }

    #[test]
    fn correlations_on_identical_and_reversed_vectors() {
        let x = [3.0, 1.0, 2.0, 5.0, 4.0];
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((kendall_tau_b(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((kendall_tau_b(&x, &rev).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman_rho(&x, &rev).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlations_undefined_on_constant_vectors() {
        let x = [1.0, 2.0, 3.0];
        let c = [2.0, 2.0, 2.0];
        assert!(matches!(kendall_tau_b(&x, &c), Err(AlignError::Undefined(_))));
        assert!(matches!(spearman_rho(&c, &x), Err(AlignError::Undefined(_))));
        assert!(matches!(pearson_r(&x, &c), Err(AlignError::Undefined(_))));
    }

    #[test]
    fn pearson_affine_case_is_one() {
        let x = [0.1, 0.5, 0.9, 0.3];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_r(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn published_generation_column_reproduces_benchmark_correlations() {
        // full precision: no ties, tau-b = 13/45; rho matches 0.394
        let tau = kendall_tau_b(&HUMAN, &MODEL_GEN_FULL).unwrap();
        assert!((tau - 13.0 / 45.0).abs() < 1e-12, "tau = {tau}");
        let rho = spearman_rho(&HUMAN, &MODEL_GEN_FULL).unwrap();
        assert!((rho - 0.394).abs() < 0.005, "rho = {rho}");
        // rounded column keeps the 0.114 tie: tau-b ~ 0.315
        let tau_rounded = kendall_tau_b(&HUMAN, &MODEL_GEN_ROUNDED).unwrap();
        assert!((tau_rounded - 0.315).abs() < 0.001, "tau_rounded = {tau_rounded}");
        // value correlation on the rounded columns
        let r = pearson_r(&HUMAN, &MODEL_GEN_ROUNDED).unwrap();
        assert!((r - 0.171).abs() < 0.03, "r = {r}");
    }

    fn record(first: &str, second: &str, verdict: Verdict, agent: &str, setting: Setting) -> PreferenceRecord {
        use crate::corpus::{Response, ResponseOrigin, ResponsePair, SourceContext};
        let s = SourceContext::new(None, "post", None).unwrap();
        let a = Response::new(first, &s.id, ResponseOrigin::HumanCorpus, None).unwrap();
        let b = Response::new(second, &s.id, ResponseOrigin::HumanCorpus, None).unwrap();
        PreferenceRecord {
            pair: ResponsePair::new(&a, &b).unwrap(),
            verdict,
            agent: agent.into(),
            setting,
        }
    }

    #[test]
    fn agreement_three_of_four() {
        let human: Vec<PreferenceRecord> = (0..4)
            .map(|i| {
                record(
                    &format!("a{i}"),
                    &format!("b{i}"),
                    Verdict::FirstWins,
                    "human",
                    Setting::Human,
                )
            })
            .collect();
        let model: Vec<PreferenceRecord> = (0..4)
            .map(|i| {
                let v = if i < 3 { Verdict::FirstWins } else { Verdict::SecondWins };
                record(&format!("a{i}"), &format!("b{i}"), v, "m", Setting::Evaluation)
            })
            .collect();
        let a = agreement_rate(&model, &human).unwrap();
        assert_eq!(a.rate, 0.75);
        assert_eq!(a.tie_rate, 0.0);
    }

    #[test]
    fn agreement_counts_model_ties_as_disagreement() {
        let human: Vec<PreferenceRecord> = (0..4)
            .map(|i| {
                record(
                    &format!("a{i}"),
                    &format!("b{i}"),
                    Verdict::FirstWins,
                    "human",
                    Setting::Human,
                )
            })
            .collect();
        let model: Vec<PreferenceRecord> = (0..4)
            .map(|i| {
                let v = if i < 2 { Verdict::FirstWins } else { Verdict::Tie };
                record(&format!("a{i}"), &format!("b{i}"), v, "m", Setting::Evaluation)
            })
            .collect();
        let a = agreement_rate(&model, &human).unwrap();
        assert_eq!(a.rate, 0.50);
        assert_eq!(a.tie_rate, 0.50);
    }

    #[test]
    fn agreement_handles_swapped_pair_orientation() {
        let human = vec![record("x", "y", Verdict::FirstWins, "human", Setting::Human)];
        // the model saw the same pair in the opposite order and picked the
        // same actual winner
        let model = vec![record("y", "x", Verdict::SecondWins, "m", Setting::Evaluation)];
        let a = agreement_rate(&model, &human).unwrap();
        assert_eq!(a.rate, 1.0);
    }

    #[test]
    fn agreement_disjoint_pairs_is_undefined() {
        let human = vec![record("a", "b", Verdict::FirstWins, "human", Setting::Human)];
        let model = vec![record("c", "d", Verdict::FirstWins, "m", Setting::Evaluation)];
        assert!(matches!(
            agreement_rate(&model, &human),
            Err(AlignError::Undefined(_))
        ));
    }

    #[test]
    fn delta_tau_identical_and_reversed() {
        let names = [FactorName::Length, FactorName::Fluency, FactorName::Coherence, FactorName::OffFocus];
        let imp = score_map(&names.iter().zip([0.8, 0.4, 0.1, -0.3]).map(|(n, v)| (*n, Some(v))).collect::<Vec<_>>());
        let same = imp.clone();
        assert!((delta_tau(&imp, &same).unwrap() - 1.0).abs() < 1e-12);
        let rev = score_map(&names.iter().zip([-0.8, -0.4, -0.1, 0.3]).map(|(n, v)| (*n, Some(v))).collect::<Vec<_>>());
        assert!((delta_tau(&imp, &rev).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn build_report_round_trips_and_rejects_thin_data() {
        let names = [FactorName::Length, FactorName::Fluency, FactorName::Coherence];
        let a = score_map(&names.iter().zip([0.9, 0.1, -0.2]).map(|(n, v)| (*n, Some(v))).collect::<Vec<_>>());
        let b = score_map(&names.iter().zip([0.5, 0.3, 0.2]).map(|(n, v)| (*n, Some(v))).collect::<Vec<_>>());
        let report = build_report(&a, &b, None).unwrap();
        let parsed = AlignmentReport::from_json(&report.to_json()).unwrap();
        assert_eq!(report, parsed);

        let thin = score_map(&[
            (FactorName::Length, Some(0.9)),
            (FactorName::Fluency, Some(0.1)),
        ]);
        assert!(matches!(
            build_report(&thin, &thin.clone(), None),
            Err(AlignError::InsufficientData { have: 2, need: 3 })
        ));
    }
}
