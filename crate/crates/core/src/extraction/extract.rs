//! Extraction orchestration: measures every requested factor on every
//! response of a corpus, routing each factor to its extractor family and
//! recording results in the manifestation store.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{Corpus, Response, ResponseId, SourceContext};
use crate::judge::{templates, DecodeParams, JudgeClient, JudgeRequest, PromptTemplate};

use super::scorer::{ScorerAspect, ScorerClient};
use super::text;
use super::{
    factor, task_profile, AtomicFactSet, ExtractError, ExtractionMethod, FactorManifestation,
    FactorName, ManifestationStore, ManifestationValue,
};

/// Parse a judge's enumerated fact list: one fact per line, tolerating
/// `1.` / `1)` / `-` / `*` markers, or a JSON array of strings.
pub fn parse_enumerated_facts(raw: &str) -> Vec<String> {
    if let Ok(serde_json::Value::Array(items)) = serde_json::from_str(raw.trim()) {
        return items
            .into_iter()
            .filter_map(|v| v.as_str().map(str::to_string))
            .filter(|s| !s.trim().is_empty())
            .collect();
    }
    raw.lines()
        .map(strip_enumeration_marker)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn strip_enumeration_marker(line: &str) -> &str {
    let line = line.trim();
    let after_digits = line.trim_start_matches(|c: char| c.is_ascii_digit());
    if after_digits.len() < line.len() {
        if let Some(rest) = after_digits.strip_prefix(['.', ')']) {
            return rest.trim();
        }
    }
    line.trim_start_matches(['-', '*', '\u{2022}']).trim()
}

/// One per-fact check: the raw yes/no answer to the template question and
/// whether that answer means the fact exhibits the factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactVerdict {
    pub fact: String,
    /// `None` when the judge call failed; the fact is then excluded from the
    /// ratio's numerator and denominator.
    pub raw_decision: Option<bool>,
    pub exhibits_factor: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Whether a template's "yes" answer means the factor is present. The
/// off-focus and hallucination templates ask for the benign direction
/// (related to the focus / accurate), so a "no" marks the factor.
fn yes_means_factor(factor: FactorName) -> bool {
    !matches!(factor, FactorName::OffFocus | FactorName::Hallucination)
}

fn atomic_template(name: FactorName) -> PromptTemplate {
    match name {
        FactorName::OffFocus => templates::off_focus(),
        FactorName::Hallucination => templates::hallucination(),
        FactorName::Helpfulness => templates::helpfulness(),
        FactorName::Misinformation => templates::misinformation(),
        other => unreachable!("{other} is not an atomic ratio factor"),
    }
}

fn fact_check_bindings(name: FactorName, fact: &str, post: &str) -> BTreeMap<String, String> {
    let mut b = BTreeMap::new();
    b.insert("ATOMIC_FACT".to_string(), fact.to_string());
    if name != FactorName::Misinformation {
        b.insert("POST".to_string(), post.to_string());
    }
    b
}

fn response_level_template(name: FactorName) -> PromptTemplate {
    match name {
        FactorName::Receptiveness => templates::receptiveness(),
        FactorName::IntentAlignment => templates::intent_alignment(),
        FactorName::FormalityAlignment => templates::formality_alignment(),
        other => unreachable!("{other} is not a response-level factor"),
    }
}

fn response_level_bindings(post: &str, output: &str) -> BTreeMap<String, String> {
    let mut b = BTreeMap::new();
    b.insert("POST".to_string(), post.to_string());
    b.insert("OUTPUT".to_string(), output.to_string());
    b
}

/// Request builders mirroring exactly what [`Extractor`] sends. Fixture
/// files for offline runs are prepared by hashing these requests.
pub mod requests {
    use super::*;

    pub fn atomic_facts(client: &JudgeClient, input: &str) -> JudgeRequest {
        let mut b = BTreeMap::new();
        b.insert("INPUT".to_string(), input.to_string());
        client.request_for(&templates::atomic_facts(), &b, Some(DecodeParams::greedy()))
    }

    pub fn fact_check(
        client: &JudgeClient,
        factor: FactorName,
        fact: &str,
        post: &str,
    ) -> JudgeRequest {
        client.request_for(
            &atomic_template(factor),
            &fact_check_bindings(factor, fact, post),
            Some(DecodeParams::greedy()),
        )
    }

    /// Coverage runs the hallucination template with the direction reversed:
    /// the source fact is checked against the response text.
    pub fn source_coverage_check(
        client: &JudgeClient,
        source_fact: &str,
        response_text: &str,
    ) -> JudgeRequest {
        fact_check(client, FactorName::Hallucination, source_fact, response_text)
    }

    pub fn response_level(
        client: &JudgeClient,
        factor: FactorName,
        post: &str,
        output: &str,
    ) -> JudgeRequest {
        client.request_for(
            &response_level_template(factor),
            &response_level_bindings(post, output),
            Some(DecodeParams::greedy()),
        )
    }
}

fn decision_str(parsed: &serde_json::Value) -> Result<String, ExtractError> {
    match parsed.get("decision") {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        Some(other) => Ok(other.to_string()),
        None => Err(ExtractError::BadDecision("<missing decision>".to_string())),
    }
}

fn parse_yes_no(decision: &str) -> Result<bool, ExtractError> {
    match decision.trim().to_lowercase().as_str() {
        "yes" => Ok(true),
        "no" => Ok(false),
        other => Err(ExtractError::BadDecision(other.to_string())),
    }
}

fn parse_formality(decision: &str) -> Result<u8, ExtractError> {
    let norm = decision.trim().to_lowercase().replace('-', " ");
    match norm.as_str() {
        "aligned" => Ok(2),
        "partially aligned" => Ok(1),
        "not aligned" | "misaligned" => Ok(0),
        other => Err(ExtractError::BadDecision(other.to_string())),
    }
}

/// Extract atomic facts of a text via the judge. Empty input short-circuits
/// to an empty fact set without a judge call.
pub fn extract_atomic_facts(
    judge: &JudgeClient,
    response_id: &ResponseId,
    text_input: &str,
) -> Result<AtomicFactSet, ExtractError> {
    if text_input.trim().is_empty() {
        return Ok(AtomicFactSet {
            response_id: response_id.clone(),
            facts: Vec::new(),
        });
    }
    let mut b = BTreeMap::new();
    b.insert("INPUT".to_string(), text_input.to_string());
    let reply = judge.complete(&templates::atomic_facts(), &b, Some(DecodeParams::greedy()))?;
    Ok(AtomicFactSet {
        response_id: response_id.clone(),
        facts: parse_enumerated_facts(&reply.raw),
    })
}

/// Run a factor's per-fact template over every fact, mapping the raw yes/no
/// to "exhibits the factor" via the factor's polarity. Failed calls yield
/// unknown verdicts.
pub fn fact_verdicts(
    judge: &JudgeClient,
    name: FactorName,
    facts: &[String],
    post: &str,
) -> Vec<FactVerdict> {
    let template = atomic_template(name);
    facts
        .iter()
        .map(|fact| {
            let bindings = fact_check_bindings(name, fact, post);
            match judge.complete(&template, &bindings, Some(DecodeParams::greedy())) {
                Ok(reply) => {
                    let parsed = reply.parsed.expect("json template always parses");
                    match decision_str(&parsed).and_then(|d| parse_yes_no(&d)) {
                        Ok(raw) => FactVerdict {
                            fact: fact.clone(),
                            raw_decision: Some(raw),
                            exhibits_factor: Some(raw == yes_means_factor(name)),
                            justification: parsed
                                .get("justification")
                                .and_then(|v| v.as_str())
                                .map(str::to_string),
                            error: None,
                        },
                        Err(e) => FactVerdict {
                            fact: fact.clone(),
                            raw_decision: None,
                            exhibits_factor: None,
                            justification: None,
                            error: Some(e.to_string()),
                        },
                    }
                }
                Err(e) => FactVerdict {
                    fact: fact.clone(),
                    raw_decision: None,
                    exhibits_factor: None,
                    justification: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Ratio over known verdicts: facts exhibiting the factor divided by facts
/// with a known verdict. `None` when no verdict is known.
pub fn ratio_of(verdicts: &[FactVerdict]) -> Option<(f64, usize)> {
    let known: Vec<bool> = verdicts.iter().filter_map(|v| v.exhibits_factor).collect();
    if known.is_empty() {
        return None;
    }
    let yes = known.iter().filter(|b| **b).count();
    Some((yes as f64 / known.len() as f64, known.len()))
}

/// Supported-source-fact ratio: the hallucination template run in reverse,
/// each source fact checked against the response. A raw "yes" (accurate)
/// means the source fact is covered.
pub fn derive_source_coverage(
    judge: &JudgeClient,
    source_facts: &[String],
    response_text: &str,
) -> Option<(f64, Vec<FactVerdict>)> {
    if source_facts.is_empty() {
        return None;
    }
    let mut verdicts = fact_verdicts(judge, FactorName::Hallucination, source_facts, response_text);
    // coverage counts the benign direction, so flip the polarity mapping
    for v in &mut verdicts {
        v.exhibits_factor = v.raw_decision;
    }
    let (ratio, _) = ratio_of(&verdicts)?;
    Some((ratio, verdicts))
}

/// Response-level ordinal: yes/no factors map to 1/0, formality alignment to
/// Aligned=2 / Partially Aligned=1 / Not Aligned=0.
pub fn extract_response_level_factor(
    judge: &JudgeClient,
    name: FactorName,
    context: &SourceContext,
    response_text: &str,
) -> Result<(u8, serde_json::Value), ExtractError> {
    let template = response_level_template(name);
    let bindings = response_level_bindings(&context.content, response_text);
    let reply = judge.complete(&template, &bindings, Some(DecodeParams::greedy()))?;
    let parsed = reply.parsed.expect("json template always parses");
    let decision = decision_str(&parsed)?;
    let ordinal = match name {
        FactorName::FormalityAlignment => parse_formality(&decision)?,
        _ => parse_yes_no(&decision)? as u8,
    };
    let detail = json!({
        "decision": decision,
        "justification": parsed.get("justification").cloned().unwrap_or(serde_json::Value::Null),
    });
    Ok((ordinal, detail))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemError {
    pub response_id: ResponseId,
    pub factor: FactorName,
    pub message: String,
}

/// Outcome of one `extract_all` run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExtractionReport {
    /// Slots already present in the store and left untouched.
    pub reused: usize,
    pub measured: usize,
    /// Slots skipped for intrinsic reasons (empty text, zero facts); these
    /// are persisted to the store.
    pub skipped: usize,
    /// Slots left absent because no judge/scorer was configured; reruns with
    /// one configured will fill them.
    pub unconfigured: usize,
    pub errors: Vec<ItemError>,
}

/// Routes factors to their extractors over a whole corpus.
pub struct Extractor<'a> {
    judge: Option<&'a JudgeClient>,
    scorer: Option<&'a ScorerClient>,
    /// Error fraction above which the run fails.
    pub fail_threshold: f64,
}

impl<'a> Extractor<'a> {
    pub fn new(judge: Option<&'a JudgeClient>, scorer: Option<&'a ScorerClient>) -> Extractor<'a> {
        Extractor {
            judge,
            scorer,
            fail_threshold: 0.5,
        }
    }

    /// Measure `requested` factors (intersected with the task's profile) on
    /// every response. Slots already in the store are not recomputed, so an
    /// interrupted run resumes where it stopped.
    pub fn extract_all(
        &self,
        corpus: &Corpus,
        requested: &[FactorName],
        store: &mut ManifestationStore,
    ) -> Result<ExtractionReport, ExtractError> {
        let profile = task_profile(corpus.task.kind);
        let applicable: Vec<FactorName> = profile
            .iter()
            .copied()
            .filter(|f| requested.contains(f))
            .collect();
        let mut report = ExtractionReport::default();

        for response in corpus.responses.values() {
            let source = corpus
                .sources
                .get(&response.source_id)
                .ok_or_else(|| ExtractError::UnknownResponse(response.id.clone()))?;
            for &name in &applicable {
                if store.slot(&response.id, name).is_some() {
                    report.reused += 1;
                    continue;
                }
                self.extract_one(response, source, name, store, &mut report);
            }
        }

        let attempted = report.measured + report.skipped + report.errors.len();
        if attempted > 0 {
            let failed = report.errors.len();
            if failed as f64 / attempted as f64 > self.fail_threshold {
                return Err(ExtractError::TooManyFailures {
                    failed,
                    attempted,
                    threshold: self.fail_threshold,
                });
            }
        }
        Ok(report)
    }

    fn extract_one(
        &self,
        response: &Response,
        source: &SourceContext,
        name: FactorName,
        store: &mut ManifestationStore,
        report: &mut ExtractionReport,
    ) {
        let result = match factor(name).method {
            ExtractionMethod::Rule => self.extract_rule(response, source, name),
            ExtractionMethod::Learned => self.extract_learned(response, source, name),
            ExtractionMethod::LlmResponse => self.extract_llm_response(response, source, name),
            ExtractionMethod::LlmAtomic => self.extract_llm_atomic(response, source, name, store),
        };
        match result {
            Ok(Outcome::Measured(m)) => {
                store.insert(m);
                report.measured += 1;
            }
            Ok(Outcome::Skip(reason)) => {
                store.insert_skip(&response.id, name, &reason);
                report.skipped += 1;
            }
            Ok(Outcome::Unconfigured) => report.unconfigured += 1,
            Err(e) => report.errors.push(ItemError {
                response_id: response.id.clone(),
                factor: name,
                message: e.to_string(),
            }),
        }
    }

    fn extract_rule(
        &self,
        response: &Response,
        source: &SourceContext,
        name: FactorName,
    ) -> Result<Outcome, ExtractError> {
        match name {
            FactorName::Length => Ok(Outcome::Measured(FactorManifestation::new(
                response.id.clone(),
                name,
                ManifestationValue::Count(text::word_count(&response.text)),
                None,
            )?)),
            FactorName::NovelWords => match text::novel_word_stats(&source.content, &response.text)
            {
                Some(stats) => Ok(Outcome::Measured(FactorManifestation::new(
                    response.id.clone(),
                    name,
                    ManifestationValue::Ratio(stats.ratio),
                    Some(json!({
                        "novel_count": stats.count,
                        "unique_response_stems": stats.unique_response_stems,
                    })),
                )?)),
                None => Ok(Outcome::Skip("response has zero tokens".to_string())),
            },
            other => unreachable!("{other} is not a rule factor"),
        }
    }

    fn extract_learned(
        &self,
        response: &Response,
        source: &SourceContext,
        name: FactorName,
    ) -> Result<Outcome, ExtractError> {
        let Some(scorer) = self.scorer else {
            return Ok(Outcome::Unconfigured);
        };
        let aspect = match name {
            FactorName::Fluency => ScorerAspect::Fluency,
            FactorName::Coherence => ScorerAspect::Coherence,
            other => unreachable!("{other} is not a learned factor"),
        };
        let score = scorer.score(
            source_task_kind(source),
            aspect,
            &source.content,
            &response.text,
        )?;
        Ok(Outcome::Measured(FactorManifestation::new(
            response.id.clone(),
            name,
            ManifestationValue::UnitScore(score),
            None,
        )?))
    }

    fn extract_llm_response(
        &self,
        response: &Response,
        source: &SourceContext,
        name: FactorName,
    ) -> Result<Outcome, ExtractError> {
        let Some(judge) = self.judge else {
            return Ok(Outcome::Unconfigured);
        };
        let (ordinal, detail) =
            extract_response_level_factor(judge, name, source, &response.text)?;
        Ok(Outcome::Measured(FactorManifestation::new(
            response.id.clone(),
            name,
            ManifestationValue::Ordinal(ordinal),
            Some(detail),
        )?))
    }

    fn extract_llm_atomic(
        &self,
        response: &Response,
        source: &SourceContext,
        name: FactorName,
        store: &mut ManifestationStore,
    ) -> Result<Outcome, ExtractError> {
        let Some(judge) = self.judge else {
            return Ok(Outcome::Unconfigured);
        };
        match name {
            FactorName::NumberOfFacts => {
                let facts = self.response_facts(judge, response, store)?;
                Ok(Outcome::Measured(FactorManifestation::new(
                    response.id.clone(),
                    name,
                    ManifestationValue::Count(facts.len() as u64),
                    Some(json!({ "facts": facts })),
                )?))
            }
            FactorName::SourceCoverage => {
                let source_facts = self.source_facts(judge, source, store)?;
                match derive_source_coverage(judge, &source_facts, &response.text) {
                    Some((ratio, verdicts)) => {
                        let errors: Vec<&FactVerdict> =
                            verdicts.iter().filter(|v| v.error.is_some()).collect();
                        if !errors.is_empty() && verdicts.iter().all(|v| v.raw_decision.is_none()) {
                            return Ok(Outcome::Skip("all fact verdicts unknown".to_string()));
                        }
                        Ok(Outcome::Measured(FactorManifestation::new(
                            response.id.clone(),
                            name,
                            ManifestationValue::Ratio(ratio),
                            Some(json!({ "verdicts": verdicts })),
                        )?))
                    }
                    None => Ok(Outcome::Skip("source has zero atomic facts".to_string())),
                }
            }
            _ => {
                let facts = self.response_facts(judge, response, store)?;
                if facts.is_empty() {
                    return Ok(Outcome::Skip("response has zero atomic facts".to_string()));
                }
                let verdicts = fact_verdicts(judge, name, &facts, &source.content);
                match ratio_of(&verdicts) {
                    Some((ratio, denominator)) => Ok(Outcome::Measured(FactorManifestation::new(
                        response.id.clone(),
                        name,
                        ManifestationValue::Ratio(ratio),
                        Some(json!({ "verdicts": verdicts, "denominator": denominator })),
                    )?)),
                    None => Ok(Outcome::Skip("all fact verdicts unknown".to_string())),
                }
            }
        }
    }

    /// Atomic facts of a response, reusing the number-of-facts slot when the
    /// store already has it.
    fn response_facts(
        &self,
        judge: &JudgeClient,
        response: &Response,
        store: &mut ManifestationStore,
    ) -> Result<Vec<String>, ExtractError> {
        if let Some(m) = store.get(&response.id, FactorName::NumberOfFacts) {
            if let Some(facts) = m
                .detail
                .as_ref()
                .and_then(|d| d.get("facts"))
                .and_then(|f| f.as_array())
            {
                return Ok(facts
                    .iter()
                    .filter_map(|v| v.as_str().map(str::to_string))
                    .collect());
            }
        }
        let set = extract_atomic_facts(judge, &response.id, &response.text)?;
        store.insert(FactorManifestation::new(
            response.id.clone(),
            FactorName::NumberOfFacts,
            ManifestationValue::Count(set.facts.len() as u64),
            Some(json!({ "facts": set.facts })),
        )?);
        Ok(set.facts)
    }

    fn source_facts(
        &self,
        judge: &JudgeClient,
        source: &SourceContext,
        store: &mut ManifestationStore,
    ) -> Result<Vec<String>, ExtractError> {
        if let Some(facts) = store.source_facts(&source.id) {
            return Ok(facts.clone());
        }
        let set = extract_atomic_facts(
            judge,
            &ResponseId(format!("source:{}", source.id)),
            &source.content,
        )?;
        store.insert_source_facts(&source.id, set.facts.clone());
        Ok(set.facts)
    }
}

// The scorer protocol carries the task kind; sources do not, so extraction
// passes summarization for plain posts and doc_qa when a reference exists.
// The aspect scores themselves are task-independent pass-throughs.
fn source_task_kind(source: &SourceContext) -> crate::corpus::TaskKind {
    if source.reference.is_some() {
        crate::corpus::TaskKind::DocQa
    } else {
        crate::corpus::TaskKind::Summarization
    }
}

enum Outcome {
    Measured(FactorManifestation),
    Skip(String),
    Unconfigured,
}
