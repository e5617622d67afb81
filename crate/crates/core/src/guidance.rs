//! Factor-guided evaluation prompts: a registry of per-factor guidance
//! lines and the selection rules for which factor to guide on.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::AlignmentReport;
use crate::corpus::TaskKind;
use crate::extraction::FactorName;
use crate::judge::{templates, PromptTemplate};

/// The guidance line registered for a factor, if any.
pub fn guidance_string(factor: FactorName) -> Option<&'static str> {
    match factor {
        FactorName::OffFocus => Some(
            "Note that the summary should capture the main focus of the post, which is the \
             core subject around which all the content revolves.",
        ),
        FactorName::Hallucination => Some(
            "Note that the summary should contain factual information that accurately matches \
             the post.",
        ),
        FactorName::Coherence => Some(
            "Note that whether all the sentences form a coherent body or not is not the \
             primary factor in determining the quality of a summary.",
        ),
        FactorName::Fluency => Some("Note that the summary should be fluent."),
        FactorName::IntentAlignment => Some(
            "Focus on how well the summary represents the main intents of the original post.",
        ),
        _ => None,
    }
}

/// Factors with a registered guidance line.
pub fn guided_factors() -> Vec<FactorName> {
    FactorName::all()
        .into_iter()
        .filter(|f| guidance_string(*f).is_some())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    /// Guidance on the factor where the model most over-weights the factor
    /// relative to the reference agent (largest positive score gap).
    GuideMis,
    /// Guidance on a seeded random factor among those with no significant
    /// score gap.
    GuideRand,
}

/// Pick the factor to guide on.
///
/// `guide_mis` needs an alignment report (agent A is the model, agent B the
/// reference): it takes the largest positive `score_a - score_b` gap.
/// `guide_rand` samples uniformly under the seed from the registered factors
/// whose absolute gap is at most `threshold`; without a report it samples
/// from all registered factors.
pub fn select_guidance_factor(
    mode: GuidanceMode,
    report: Option<&AlignmentReport>,
    seed: u64,
    threshold: f64,
) -> Result<FactorName, GuidanceError> {
    match mode {
        GuidanceMode::GuideMis => {
            let report = report.ok_or(GuidanceError::ReportRequired)?;
            let best = report
                .factors
                .iter()
                .filter_map(|row| match (row.score_a, row.score_b) {
                    (Some(a), Some(b)) if a > b => Some((row.factor, a - b)),
                    _ => None,
                })
                .max_by(|x, y| x.1.partial_cmp(&y.1).expect("finite gaps"));
            let (factor, _) = best.ok_or(GuidanceError::NoDivergentFactor)?;
            ensure_registered(factor)?;
            Ok(factor)
        }
        GuidanceMode::GuideRand => {
            let mut candidates: Vec<FactorName> = match report {
                Some(report) => report
                    .factors
                    .iter()
                    .filter_map(|row| match (row.score_a, row.score_b) {
                        (Some(a), Some(b)) if (a - b).abs() <= threshold => Some(row.factor),
                        _ => None,
                    })
                    .filter(|f| guidance_string(*f).is_some())
                    .collect(),
                None => guided_factors(),
            };
            candidates.sort();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            candidates
                .choose(&mut rng)
                .copied()
                .ok_or(GuidanceError::NoCandidate)
        }
    }
}

/// The guided evaluation template plus the guidance line for a factor.
/// Render with the usual evaluation bindings; `FACTOR_GUIDANCE` is pre-bound
/// by the caller inserting [`guidance_string`].
pub fn guided_evaluation_template(
    task: TaskKind,
    factor: FactorName,
) -> Result<(PromptTemplate, &'static str), GuidanceError> {
    let line = guidance_string(factor).ok_or_else(|| unregistered(factor))?;
    Ok((templates::guided_evaluation(task), line))
}

fn ensure_registered(factor: FactorName) -> Result<(), GuidanceError> {
    if guidance_string(factor).is_some() {
        Ok(())
    } else {
        Err(unregistered(factor))
    }
}

fn unregistered(factor: FactorName) -> GuidanceError {
    GuidanceError::NoGuidanceString {
        factor,
        available: guided_factors()
            .iter()
            .map(|f| f.as_str().to_string())
            .collect(),
    }
}

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error("guide_mis requires an alignment report")]
    ReportRequired,
    #[error("no factor has the model over-weighting relative to the reference")]
    NoDivergentFactor,
    #[error("no candidate factor with guidance available")]
    NoCandidate,
    #[error("no guidance string registered for {factor}; available: {}", available.join(", "))]
    NoGuidanceString {
        factor: FactorName,
        available: Vec<String>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{AgentRef, ReportRow};
    use crate::corpus::Setting;

    fn report(rows: Vec<(FactorName, f64, f64)>) -> AlignmentReport {
        AlignmentReport {
            format_version: 1,
            agent_a: AgentRef {
                agent: "model".into(),
                setting: Setting::Evaluation,
            },
            agent_b: AgentRef {
                agent: "human".into(),
                setting: Setting::Human,
            },
            tau_b: None,
            rho: None,
            pearson_r: None,
            n_factors: rows.len(),
            excluded_factors: vec![],
            agreement: None,
            factors: rows
                .into_iter()
                .map(|(factor, a, b)| ReportRow {
                    factor,
                    score_a: Some(a),
                    score_b: Some(b),
                    rank_a: None,
                    rank_b: None,
                })
                .collect(),
        }
    }

    #[test]
    fn guide_mis_picks_largest_positive_gap() {
        let r = report(vec![
            (FactorName::OffFocus, 0.40, 0.05),
            (FactorName::Coherence, 0.30, 0.18),
            (FactorName::Length, 0.20, 0.90),
        ]);
        let f =
            select_guidance_factor(GuidanceMode::GuideMis, Some(&r), 0, 0.1).unwrap();
        assert_eq!(f, FactorName::OffFocus);
    }

    #[test]
    fn guide_mis_on_unregistered_factor_lists_available() {
        let r = report(vec![(FactorName::Length, 0.9, 0.2)]);
        let err = select_guidance_factor(GuidanceMode::GuideMis, Some(&r), 0, 0.1).unwrap_err();
        match err {
            GuidanceError::NoGuidanceString { factor, available } => {
                assert_eq!(factor, FactorName::Length);
                assert_eq!(available.len(), 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn guide_rand_is_deterministic_under_seed() {
        let r = report(vec![
            (FactorName::Fluency, 0.05, 0.03),
            (FactorName::OffFocus, 0.06, 0.04),
            (FactorName::Length, 0.90, 0.20),
        ]);
        let a = select_guidance_factor(GuidanceMode::GuideRand, Some(&r), 7, 0.1).unwrap();
        let b = select_guidance_factor(GuidanceMode::GuideRand, Some(&r), 7, 0.1).unwrap();
        assert_eq!(a, b);
        // length's gap is over the threshold, so it is never eligible
        for seed in 0..20 {
            let f = select_guidance_factor(GuidanceMode::GuideRand, Some(&r), seed, 0.1).unwrap();
            assert_ne!(f, FactorName::Length);
        }
    }

    #[test]
    fn guided_template_carries_the_factor_line() {
        let (template, line) =
            guided_evaluation_template(TaskKind::Summarization, FactorName::OffFocus).unwrap();
        assert!(line.contains("main focus of the post"));
        assert!(template.body.contains("{FACTOR_GUIDANCE}"));
        assert!(guided_evaluation_template(TaskKind::Summarization, FactorName::Receptiveness).is_err());
    }
}
