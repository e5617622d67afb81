//! Feedback-driven improvement: a generator produces an improved response
//! per source, optionally steered by an evaluator's verdict and
//! justification, and the (initial, improved) pairs feed improvement factor
//! scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    Corpus, CorpusError, Response, ResponseOrigin, ResponsePair, SourceContext, SourceId, Verdict,
};
use crate::evaluate::{evaluation_bindings, verdict_from_reply};
use crate::judge::{templates, JudgeClient, JudgeError, JudgeRequest};
use crate::scoring::ImprovementPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImproveMode {
    /// Evaluator picks the better response (or tie) with justification; the
    /// generator improves using that feedback. One pair per source, the
    /// evaluator-preferred response as the initial side.
    Feedback,
    /// One improvement from both responses, no feedback. One pair per
    /// source, the first response as the initial side.
    BaselineA,
    /// Each response improved independently, no feedback. Two pairs per
    /// source.
    BaselineB,
}

impl ImproveMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImproveMode::Feedback => "feedback",
            ImproveMode::BaselineA => "baseline_a",
            ImproveMode::BaselineB => "baseline_b",
        }
    }

    pub fn parse(s: &str) -> Option<ImproveMode> {
        match s {
            "feedback" => Some(ImproveMode::Feedback),
            "baseline_a" => Some(ImproveMode::BaselineA),
            "baseline_b" => Some(ImproveMode::BaselineB),
            _ => None,
        }
    }
}

fn improvement_bindings(
    task_description: &str,
    content: &str,
    entries: &[(&str, &str)],
) -> BTreeMap<String, String> {
    let mut b = BTreeMap::new();
    b.insert("TASK_DESCRIPTION".to_string(), task_description.to_string());
    b.insert("CONTENT".to_string(), content.to_string());
    for (k, v) in entries {
        b.insert(k.to_string(), v.to_string());
    }
    b
}

/// Request builders matching what [`run_improvement`] sends, for fixtures.
pub mod requests {
    use super::*;

    pub fn feedback(
        client: &JudgeClient,
        task_description: &str,
        source: &SourceContext,
        first: &str,
        second: &str,
        evaluation_text: &str,
    ) -> JudgeRequest {
        client.request_for(
            &templates::improve_with_feedback(),
            &improvement_bindings(
                task_description,
                &source.content,
                &[
                    ("SUMMARY1", first),
                    ("SUMMARY2", second),
                    ("EVALUATION", evaluation_text),
                ],
            ),
            None,
        )
    }

    pub fn baseline_pair(
        client: &JudgeClient,
        task_description: &str,
        source: &SourceContext,
        first: &str,
        second: &str,
    ) -> JudgeRequest {
        client.request_for(
            &templates::improve_baseline_pair(),
            &improvement_bindings(
                task_description,
                &source.content,
                &[("SUMMARY1", first), ("SUMMARY2", second)],
            ),
            None,
        )
    }

    pub fn baseline_single(
        client: &JudgeClient,
        task_description: &str,
        source: &SourceContext,
        summary: &str,
    ) -> JudgeRequest {
        client.request_for(
            &templates::improve_baseline_single(),
            &improvement_bindings(task_description, &source.content, &[("SUMMARY", summary)]),
            None,
        )
    }
}

/// The evaluator's feedback on one source's pair, kept verbatim for the
/// improvement prompt and audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub pair: ResponsePair,
    pub verdict: Verdict,
    pub raw_reply: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceFailure {
    pub source_id: SourceId,
    pub message: String,
}

/// Everything an improvement run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImprovementRun {
    pub mode: ImproveMode,
    pub pairs: Vec<ImprovementPair>,
    /// Newly generated improved responses, keyed by id in the run output.
    pub improved_responses: Vec<Response>,
    pub feedback: Vec<FeedbackRecord>,
    pub sources_total: usize,
    pub sources_completed: usize,
    pub failures: Vec<SourceFailure>,
}

impl ImprovementRun {
    pub fn completion_fraction(&self) -> f64 {
        if self.sources_total == 0 {
            0.0
        } else {
            self.sources_completed as f64 / self.sources_total as f64
        }
    }
}

/// Run one improvement mode over every source of the corpus that has a
/// pair. Judge failures are collected per source; the run reports its
/// completion fraction.
pub fn run_improvement(
    corpus: &Corpus,
    generator: &JudgeClient,
    evaluator: Option<&JudgeClient>,
    mode: ImproveMode,
) -> Result<ImprovementRun, ImproveError> {
    if mode == ImproveMode::Feedback && evaluator.is_none() {
        return Err(ImproveError::EvaluatorRequired);
    }
    let mut run = ImprovementRun {
        mode,
        pairs: Vec::new(),
        improved_responses: Vec::new(),
        feedback: Vec::new(),
        sources_total: 0,
        sources_completed: 0,
        failures: Vec::new(),
    };
    // first pair per source, in corpus pair order
    let mut seen: Vec<&SourceId> = Vec::new();
    for pair in &corpus.pairs {
        if seen.contains(&&pair.source_id) {
            continue;
        }
        seen.push(&pair.source_id);
        run.sources_total += 1;
        match improve_one(corpus, generator, evaluator, mode, pair, &mut run) {
            Ok(()) => run.sources_completed += 1,
            Err(e) => run.failures.push(SourceFailure {
                source_id: pair.source_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok(run)
}

fn improve_one(
    corpus: &Corpus,
    generator: &JudgeClient,
    evaluator: Option<&JudgeClient>,
    mode: ImproveMode,
    pair: &ResponsePair,
    run: &mut ImprovementRun,
) -> Result<(), ImproveError> {
    let source = corpus
        .sources
        .get(&pair.source_id)
        .ok_or_else(|| ImproveError::MissingSource(pair.source_id.clone()))?;
    let first = corpus
        .responses
        .get(&pair.first)
        .ok_or_else(|| ImproveError::MissingSource(pair.source_id.clone()))?;
    let second = corpus
        .responses
        .get(&pair.second)
        .ok_or_else(|| ImproveError::MissingSource(pair.source_id.clone()))?;
    let desc = &corpus.task.description;

    let push_improved = |run: &mut ImprovementRun,
                             text: String,
                             initial: &Response|
     -> Result<(), ImproveError> {
        let improved = Response::new(text.trim(), &source.id, ResponseOrigin::ModelGenerated, None)?;
        run.pairs.push(ImprovementPair {
            initial: initial.id.clone(),
            improved: improved.id.clone(),
        });
        run.improved_responses.push(improved);
        Ok(())
    };

    match mode {
        ImproveMode::Feedback => {
            let evaluator = evaluator.expect("checked by run_improvement");
            let eval_template = templates::evaluation(corpus.task.kind);
            let bindings = evaluation_bindings(&corpus.task, source, &first.text, &second.text);
            let reply = evaluator.complete(&eval_template, &bindings, None)?;
            let parsed = reply.parsed.as_ref().expect("evaluation template is json");
            let verdict = verdict_from_reply(corpus.task.kind, parsed)?;
            run.feedback.push(FeedbackRecord {
                pair: pair.clone(),
                verdict,
                raw_reply: reply.raw.clone(),
            });
            // a tie is still feedback; improvement proceeds from the first
            let preferred = match verdict {
                Verdict::SecondWins => second,
                _ => first,
            };
            let improve_bindings = improvement_bindings(
                desc,
                &source.content,
                &[
                    ("SUMMARY1", first.text.as_str()),
                    ("SUMMARY2", second.text.as_str()),
                    ("EVALUATION", reply.raw.as_str()),
                ],
            );
            let improved = generator.complete(
                &templates::improve_with_feedback(),
                &improve_bindings,
                None,
            )?;
            push_improved(run, improved.raw, preferred)?;
        }
        ImproveMode::BaselineA => {
            let bindings = improvement_bindings(
                desc,
                &source.content,
                &[
                    ("SUMMARY1", first.text.as_str()),
                    ("SUMMARY2", second.text.as_str()),
                ],
            );
            let improved =
                generator.complete(&templates::improve_baseline_pair(), &bindings, None)?;
            push_improved(run, improved.raw, first)?;
        }
        ImproveMode::BaselineB => {
            for initial in [first, second] {
                let bindings = improvement_bindings(
                    desc,
                    &source.content,
                    &[("SUMMARY", initial.text.as_str())],
                );
                let improved =
                    generator.complete(&templates::improve_baseline_single(), &bindings, None)?;
                push_improved(run, improved.raw, initial)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum ImproveError {
    #[error("feedback mode requires an evaluator judge")]
    EvaluatorRequired,
    #[error("source {0} missing from corpus")]
    MissingSource(SourceId),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
