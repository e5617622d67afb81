//! Pairwise preference elicitation: ask a judge which response of each pair
//! is better, parse the verdict, and emit evaluation-setting records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    parse_eval_verdict, Corpus, CorpusError, PreferenceRecord, ResponsePair, Setting, SourceContext,
    TaskKind,
};
use crate::judge::{templates, JudgeClient, JudgeError, PromptTemplate};

/// Bindings for the pairwise evaluation template over one pair.
pub fn evaluation_bindings(
    task: &crate::corpus::Task,
    source: &SourceContext,
    first_text: &str,
    second_text: &str,
) -> BTreeMap<String, String> {
    let mut b = BTreeMap::new();
    b.insert("TASK_DESCRIPTION".to_string(), task.description.clone());
    b.insert("RESPONSE1".to_string(), first_text.to_string());
    b.insert("RESPONSE2".to_string(), second_text.to_string());
    match task.kind {
        TaskKind::DocQa => {
            b.insert("QUESTION".to_string(), source.content.clone());
            let reference = source.reference.clone().unwrap_or_default();
            b.insert("REFERENCE1".to_string(), reference.clone());
            b.insert("REFERENCE2".to_string(), reference);
        }
        _ => {
            b.insert("CONTENT".to_string(), source.content.clone());
        }
    }
    b
}

/// The request `evaluate_pairs` issues for one pair; used to prepare
/// fixtures for offline runs.
pub fn evaluation_request(
    client: &JudgeClient,
    task: &crate::corpus::Task,
    source: &SourceContext,
    first_text: &str,
    second_text: &str,
) -> crate::judge::JudgeRequest {
    let template = templates::evaluation(task.kind);
    client.request_for(
        &template,
        &evaluation_bindings(task, source, first_text, second_text),
        None,
    )
}

/// Extract the verdict from a parsed evaluation reply.
pub fn verdict_from_reply(
    task: TaskKind,
    parsed: &serde_json::Value,
) -> Result<crate::corpus::Verdict, CorpusError> {
    let key = templates::evaluation_choice_key(task);
    let label = parsed
        .get(&key)
        .and_then(|v| v.as_str())
        .unwrap_or_default();
    parse_eval_verdict(label)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairFailure {
    pub pair: ResponsePair,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvaluationRunReport {
    pub pairs_total: usize,
    pub pairs_ok: usize,
    pub failures: Vec<PairFailure>,
}

/// Run the evaluation template over every pair of the corpus. Failed pairs
/// are reported and skipped.
pub fn evaluate_pairs(
    corpus: &Corpus,
    judge: &JudgeClient,
    agent: &str,
) -> Result<(Vec<PreferenceRecord>, EvaluationRunReport), JudgeError> {
    let template: PromptTemplate = templates::evaluation(corpus.task.kind);
    let mut records = Vec::new();
    let mut report = EvaluationRunReport::default();
    for pair in &corpus.pairs {
        report.pairs_total += 1;
        let (Some(first), Some(second), Some(source)) = (
            corpus.responses.get(&pair.first),
            corpus.responses.get(&pair.second),
            corpus.sources.get(&pair.source_id),
        ) else {
            report.failures.push(PairFailure {
                pair: pair.clone(),
                message: "pair references unknown responses".to_string(),
            });
            continue;
        };
        let bindings = evaluation_bindings(&corpus.task, source, &first.text, &second.text);
        match judge.complete(&template, &bindings, None) {
            Ok(reply) => {
                let parsed = reply.parsed.expect("evaluation template is json");
                match verdict_from_reply(corpus.task.kind, &parsed) {
                    Ok(verdict) => {
                        records.push(PreferenceRecord {
                            pair: pair.clone(),
                            verdict,
                            agent: agent.to_string(),
                            setting: Setting::Evaluation,
                        });
                        report.pairs_ok += 1;
                    }
                    Err(e) => report.failures.push(PairFailure {
                        pair: pair.clone(),
                        message: e.to_string(),
                    }),
                }
            }
            Err(e) => report.failures.push(PairFailure {
                pair: pair.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok((records, report))
}
