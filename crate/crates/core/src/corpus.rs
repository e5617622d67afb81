//! Preference corpora: sources, responses, pairs, and preference records.
//!
//! The canonical interchange format is UTF-8 JSONL with one comparison per
//! line. Required keys: `source`, `response_a`, `response_b`. Optional keys:
//! `human_choice` (`"a"` | `"b"` | `"tie"`), `scores` (map `"a"`/`"b"` to an
//! integer 1-5), `task`, `title`, `reference`. Identifiers are content
//! hashes, so re-ingesting the same rows reproduces the same corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Task families the factor profiles are defined for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Summarization,
    HelpfulResponse,
    DocQa,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Summarization => "summarization",
            TaskKind::HelpfulResponse => "helpful_response",
            TaskKind::DocQa => "doc_qa",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        match s {
            "summarization" => Some(TaskKind::Summarization),
            "helpful_response" => Some(TaskKind::HelpfulResponse),
            "doc_qa" => Some(TaskKind::DocQa),
            _ => None,
        }
    }

    /// What a single output is called in prompts for this task.
    pub fn response_noun(&self) -> &'static str {
        match self {
            TaskKind::Summarization => "summary",
            TaskKind::HelpfulResponse => "response",
            TaskKind::DocQa => "answer",
        }
    }

    /// Standard task rubric injected into prompts as `{TASK_DESCRIPTION}`.
    pub fn default_description(&self) -> &'static str {
        match self {
            TaskKind::Summarization => {
                "A good summary is a shorter piece of text that captures the essence of the \
                 original. It aims to accomplish the same purpose and convey the same key \
                 information as the original post."
            }
            TaskKind::HelpfulResponse => {
                "A helpful response is a concise and efficient answer that directly addresses \
                 the user's question or task. It should provide accurate and relevant \
                 information without unnecessary elaboration."
            }
            TaskKind::DocQa => {
                "A useful answer directly addresses the core question with accurate and \
                 relevant information. It should be coherent, free of errors or unsupported \
                 claims, and include helpful details while minimizing unnecessary or \
                 irrelevant content."
            }
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A task: its kind plus the rubric text injected into prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub kind: TaskKind,
    pub description: String,
}

impl Task {
    pub fn new(kind: TaskKind, description: impl Into<String>) -> Result<Task, CorpusError> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(CorpusError::EmptyTaskDescription);
        }
        Ok(Task { kind, description })
    }

    /// Task with the standard rubric for its kind.
    pub fn standard(kind: TaskKind) -> Task {
        Task {
            kind,
            description: kind.default_description().to_string(),
        }
    }
}

/// Content-hash identifier for a source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceId(pub String);

/// Content-hash identifier for a response.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResponseId(pub String);

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ResponseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// First 16 hex chars of the SHA-256 of `parts` joined with a 0x1f separator.
pub fn content_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0x1f]);
        }
        hasher.update(p.as_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

/// The input a response answers: a post or question, optionally with a title
/// and (for document QA) a supporting reference document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceContext {
    pub id: SourceId,
    pub title: Option<String>,
    pub content: String,
    pub reference: Option<String>,
}

impl SourceContext {
    pub fn new(
        title: Option<String>,
        content: impl Into<String>,
        reference: Option<String>,
    ) -> Result<SourceContext, CorpusError> {
        let content = content.into();
        if content.trim().is_empty() {
            return Err(CorpusError::EmptySourceContent);
        }
        let id = SourceId(content_hash(&[
            title.as_deref().unwrap_or(""),
            &content,
            reference.as_deref().unwrap_or(""),
        ]));
        Ok(SourceContext {
            id,
            title,
            content,
            reference,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseOrigin {
    HumanCorpus,
    ModelGenerated,
}

/// A candidate text tied to a source. `score` holds the 1-5 self-assigned
/// score when the response came from score-graded generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub id: ResponseId,
    pub text: String,
    pub source_id: SourceId,
    pub origin: ResponseOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u8>,
}

impl Response {
    pub fn new(
        text: impl Into<String>,
        source_id: &SourceId,
        origin: ResponseOrigin,
        score: Option<u8>,
    ) -> Result<Response, CorpusError> {
        if let Some(s) = score {
            if !(1..=5).contains(&s) {
                return Err(CorpusError::ScoreOutOfRange(s));
            }
        }
        let text = text.into();
        let id = ResponseId(content_hash(&[&source_id.0, &text]));
        Ok(Response {
            id,
            text,
            source_id: source_id.clone(),
            origin,
            score,
        })
    }
}

/// An ordered pair of responses under comparison. Both must share a source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResponsePair {
    pub first: ResponseId,
    pub second: ResponseId,
    pub source_id: SourceId,
}

impl ResponsePair {
    pub fn new(first: &Response, second: &Response) -> Result<ResponsePair, CorpusError> {
        if first.id == second.id {
            return Err(CorpusError::IdenticalResponses(first.id.clone()));
        }
        if first.source_id != second.source_id {
            return Err(CorpusError::SourceMismatch {
                first: first.source_id.clone(),
                second: second.source_id.clone(),
            });
        }
        Ok(ResponsePair {
            first: first.id.clone(),
            second: second.id.clone(),
            source_id: first.source_id.clone(),
        })
    }

    /// Same pair with the responses swapped.
    pub fn swapped(&self) -> ResponsePair {
        ResponsePair {
            first: self.second.clone(),
            second: self.first.clone(),
            source_id: self.source_id.clone(),
        }
    }

    /// Orientation-independent key for matching pairs across agents.
    pub fn unordered_key(&self) -> (ResponseId, ResponseId) {
        if self.first <= self.second {
            (self.first.clone(), self.second.clone())
        } else {
            (self.second.clone(), self.first.clone())
        }
    }
}

/// A pairwise preference verdict: +1 first wins, -1 second wins, 0 tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Verdict {
    FirstWins,
    Tie,
    SecondWins,
}

impl Verdict {
    pub fn value(&self) -> i8 {
        match self {
            Verdict::FirstWins => 1,
            Verdict::Tie => 0,
            Verdict::SecondWins => -1,
        }
    }

    pub fn from_value(v: i8) -> Result<Verdict, CorpusError> {
        match v {
            1 => Ok(Verdict::FirstWins),
            0 => Ok(Verdict::Tie),
            -1 => Ok(Verdict::SecondWins),
            other => Err(CorpusError::InvalidVerdict(other)),
        }
    }

    pub fn negated(&self) -> Verdict {
        match self {
            Verdict::FirstWins => Verdict::SecondWins,
            Verdict::Tie => Verdict::Tie,
            Verdict::SecondWins => Verdict::FirstWins,
        }
    }
}

impl TryFrom<i8> for Verdict {
    type Error = CorpusError;
    fn try_from(v: i8) -> Result<Verdict, CorpusError> {
        Verdict::from_value(v)
    }
}

impl From<Verdict> for i8 {
    fn from(v: Verdict) -> i8 {
        v.value()
    }
}

/// Where a preference verdict came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Generation,
    Evaluation,
    Human,
    Improvement,
}

impl Setting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Generation => "generation",
            Setting::Evaluation => "evaluation",
            Setting::Human => "human",
            Setting::Improvement => "improvement",
        }
    }

    pub fn parse(s: &str) -> Option<Setting> {
        match s {
            "generation" => Some(Setting::Generation),
            "evaluation" => Some(Setting::Evaluation),
            "human" => Some(Setting::Human),
            "improvement" => Some(Setting::Improvement),
            _ => None,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One agent's verdict over one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub pair: ResponsePair,
    pub verdict: Verdict,
    pub agent: String,
    pub setting: Setting,
}

/// Emit one generation-setting record per unordered pair of score-graded
/// responses. All responses must share a source and carry pairwise distinct
/// scores, so verdicts are never ties.
pub fn expand_scored_set(
    responses: &[Response],
    agent: &str,
) -> Result<Vec<PreferenceRecord>, CorpusError> {
    let mut seen_scores: BTreeMap<u8, ResponseId> = BTreeMap::new();
    for r in responses {
        let score = r.score.ok_or_else(|| CorpusError::MissingScore(r.id.clone()))?;
        if let Some(prev) = seen_scores.insert(score, r.id.clone()) {
            return Err(CorpusError::DuplicateScore {
                score,
                first: prev,
                second: r.id.clone(),
            });
        }
        if r.source_id != responses[0].source_id {
            return Err(CorpusError::SourceMismatch {
                first: responses[0].source_id.clone(),
                second: r.source_id.clone(),
            });
        }
    }
    let mut records = Vec::new();
    for i in 0..responses.len() {
        for j in (i + 1)..responses.len() {
            let (a, b) = (&responses[i], &responses[j]);
            let verdict = if a.score > b.score {
                Verdict::FirstWins
            } else {
                Verdict::SecondWins
            };
            records.push(PreferenceRecord {
                pair: ResponsePair::new(a, b)?,
                verdict,
                agent: agent.to_string(),
                setting: Setting::Generation,
            });
        }
    }
    Ok(records)
}

/// Map a judge's "better response" label to a verdict. Accepts
/// `Summary 1` / `Response 2` / `Answer 1` / bare `1` / `2` / `Tie`,
/// case-insensitively.
pub fn parse_eval_verdict(raw_choice: &str) -> Result<Verdict, CorpusError> {
    let norm = raw_choice.trim().to_lowercase();
    if norm == "tie" {
        return Ok(Verdict::Tie);
    }
    let tail = norm
        .strip_prefix("summary")
        .or_else(|| norm.strip_prefix("response"))
        .or_else(|| norm.strip_prefix("answer"))
        .unwrap_or(&norm)
        .trim();
    match tail {
        "1" => Ok(Verdict::FirstWins),
        "2" => Ok(Verdict::SecondWins),
        _ => Err(CorpusError::UnrecognizedChoice(raw_choice.to_string())),
    }
}

/// One comparison row of the canonical JSONL interchange format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalRow {
    pub source: String,
    pub response_a: String,
    pub response_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_choice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<String, u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

/// A loaded, immutable preference corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub task: Task,
    pub sources: BTreeMap<SourceId, SourceContext>,
    pub responses: BTreeMap<ResponseId, Response>,
    pub pairs: Vec<ResponsePair>,
    /// Human records from `human_choice` labels; ties are dropped at load.
    pub human_preferences: Vec<PreferenceRecord>,
    /// Generation records derived from per-row `scores`.
    pub generation_preferences: Vec<PreferenceRecord>,
}

/// What happened during a load: per-row errors do not abort the load.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_total: usize,
    pub rows_ok: usize,
    pub ties_dropped: usize,
    pub row_errors: Vec<RowError>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

impl Corpus {
    pub fn new(task: Task) -> Corpus {
        Corpus {
            task,
            sources: BTreeMap::new(),
            responses: BTreeMap::new(),
            pairs: Vec::new(),
            human_preferences: Vec::new(),
            generation_preferences: Vec::new(),
        }
    }

    pub fn source_of(&self, response: &ResponseId) -> Option<&SourceContext> {
        let r = self.responses.get(response)?;
        self.sources.get(&r.source_id)
    }

    pub fn response(&self, id: &ResponseId) -> Option<&Response> {
        self.responses.get(id)
    }

    /// Insert a row's sources/responses/pair, deduplicating by content hash.
    fn insert_row(&mut self, row: &CanonicalRow, line: usize) -> Result<(), CorpusError> {
        let source =
            SourceContext::new(row.title.clone(), row.source.clone(), row.reference.clone())?;
        if self.task.kind == TaskKind::DocQa && source.reference.is_none() {
            return Err(CorpusError::MissingReference(line));
        }
        if self.task.kind != TaskKind::DocQa && source.reference.is_some() {
            return Err(CorpusError::UnexpectedReference(line));
        }
        let scores = row.scores.as_ref();
        let score_of = |key: &str| scores.and_then(|m| m.get(key).copied());
        for key in ["a", "b"] {
            if let Some(s) = score_of(key) {
                if !(1..=5).contains(&s) {
                    return Err(CorpusError::ScoreOutOfRange(s));
                }
            }
        }
        let origin = if scores.is_some() {
            ResponseOrigin::ModelGenerated
        } else {
            ResponseOrigin::HumanCorpus
        };
        let a = Response::new(row.response_a.clone(), &source.id, origin, score_of("a"))?;
        let b = Response::new(row.response_b.clone(), &source.id, origin, score_of("b"))?;
        let pair = ResponsePair::new(&a, &b)?;

        if let Some(choice) = &row.human_choice {
            let verdict = match choice.as_str() {
                "a" => Verdict::FirstWins,
                "b" => Verdict::SecondWins,
                "tie" => {
                    return Err(CorpusError::HumanTie);
                }
                other => return Err(CorpusError::UnrecognizedChoice(other.to_string())),
            };
            self.human_preferences.push(PreferenceRecord {
                pair: pair.clone(),
                verdict,
                agent: "human".to_string(),
                setting: Setting::Human,
            });
        }
        if scores.is_some() {
            let (sa, sb) = (score_of("a"), score_of("b"));
            let (sa, sb) = (
                sa.ok_or(CorpusError::MissingRowScore(line))?,
                sb.ok_or(CorpusError::MissingRowScore(line))?,
            );
            if sa == sb {
                return Err(CorpusError::DuplicateScore {
                    score: sa,
                    first: a.id.clone(),
                    second: b.id.clone(),
                });
            }
            let verdict = if sa > sb {
                Verdict::FirstWins
            } else {
                Verdict::SecondWins
            };
            self.generation_preferences.push(PreferenceRecord {
                pair: pair.clone(),
                verdict,
                agent: "generator".to_string(),
                setting: Setting::Generation,
            });
        }

        self.sources.insert(source.id.clone(), source);
        self.responses.insert(a.id.clone(), a);
        self.responses.insert(b.id.clone(), b);
        if !self.pairs.contains(&pair) {
            self.pairs.push(pair);
        }
        Ok(())
    }

    /// Load a canonical JSONL file. Rows whose human label is a tie are
    /// dropped (counted in the report); malformed rows are collected as
    /// row errors and the load continues. Zero valid rows is a dataset error.
    pub fn load_jsonl(path: &Path, task: Task) -> Result<(Corpus, IngestReport), CorpusError> {
        let file = fs::File::open(path)
            .map_err(|e| CorpusError::Io(path.display().to_string(), e.to_string()))?;
        let reader = BufReader::new(file);
        let mut corpus = Corpus::new(task);
        let mut report = IngestReport::default();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line
                .map_err(|e| CorpusError::Io(path.display().to_string(), e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            report.rows_total += 1;
            let row: CanonicalRow = match serde_json::from_str(&line) {
                Ok(row) => row,
                Err(e) => {
                    report.row_errors.push(RowError {
                        line: line_no,
                        message: format!("malformed row: {e}"),
                    });
                    continue;
                }
            };
            match corpus.insert_row(&row, line_no) {
                Ok(()) => report.rows_ok += 1,
                Err(CorpusError::HumanTie) => report.ties_dropped += 1,
                Err(e) => report.row_errors.push(RowError {
                    line: line_no,
                    message: e.to_string(),
                }),
            }
        }
        if report.rows_ok == 0 {
            return Err(CorpusError::EmptyDataset(path.display().to_string()));
        }
        Ok((corpus, report))
    }

    /// Write the corpus back out as canonical JSONL. Reloading the result
    /// reproduces identical records.
    pub fn save_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = Vec::new();
        for pair in &self.pairs {
            let a = &self.responses[&pair.first];
            let b = &self.responses[&pair.second];
            let source = &self.sources[&pair.source_id];
            let human_choice = self
                .human_preferences
                .iter()
                .find(|p| p.pair == *pair)
                .map(|p| match p.verdict {
                    Verdict::FirstWins => "a".to_string(),
                    Verdict::SecondWins => "b".to_string(),
                    Verdict::Tie => "tie".to_string(),
                });
            let scores = match (a.score, b.score) {
                (Some(sa), Some(sb)) => {
                    let mut m = BTreeMap::new();
                    m.insert("a".to_string(), sa);
                    m.insert("b".to_string(), sb);
                    Some(m)
                }
                _ => None,
            };
            let row = CanonicalRow {
                source: source.content.clone(),
                response_a: a.text.clone(),
                response_b: b.text.clone(),
                human_choice,
                scores,
                task: Some(self.task.kind.as_str().to_string()),
                title: source.title.clone(),
                reference: source.reference.clone(),
            };
            out.extend_from_slice(serde_json::to_string(&row).expect("row is serializable").as_bytes());
            out.push(b'\n');
        }
        write_atomic(path, &out)
            .map_err(|e| CorpusError::Io(path.display().to_string(), e.to_string()))
    }
}

/// Write via a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("task description is empty")]
    EmptyTaskDescription,
    #[error("source content is empty")]
    EmptySourceContent,
    #[error("score {0} outside 1..=5")]
    ScoreOutOfRange(u8),
    #[error("pair references the same response twice ({0})")]
    IdenticalResponses(ResponseId),
    #[error("responses come from different sources ({first} vs {second})")]
    SourceMismatch { first: SourceId, second: SourceId },
    #[error("verdict {0} outside {{-1, 0, +1}}")]
    InvalidVerdict(i8),
    #[error("response {0} has no score")]
    MissingScore(ResponseId),
    #[error("duplicate score {score} on responses {first} and {second}")]
    DuplicateScore {
        score: u8,
        first: ResponseId,
        second: ResponseId,
    },
    #[error("row {0}: doc_qa rows require a reference")]
    MissingReference(usize),
    #[error("row {0}: reference present but task is not doc_qa")]
    UnexpectedReference(usize),
    #[error("row {0}: scores must cover both responses")]
    MissingRowScore(usize),
    #[error("unrecognized choice label: {0:?}")]
    UnrecognizedChoice(String),
    #[error("human tie")]
    HumanTie,
    #[error("dataset {0} contains no valid rows")]
    EmptyDataset(String),
    #[error("{0}: {1}")]
    Io(String, String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn source() -> SourceContext {
        SourceContext::new(None, "a post about cats", None).unwrap()
    }

    fn scored(source: &SourceContext, text: &str, score: u8) -> Response {
        Response::new(text, &source.id, ResponseOrigin::ModelGenerated, Some(score)).unwrap()
    }

    #[test]
    fn expand_five_distinct_scores_yields_ten_records_no_ties() {
        let s = source();
        let responses: Vec<Response> = (1..=5).map(|i| scored(&s, &format!("r{i}"), i)).collect();
        let records = expand_scored_set(&responses, "m").unwrap();
        assert_eq!(records.len(), 10);
        assert!(records.iter().all(|r| r.verdict != Verdict::Tie));
        assert!(records.iter().all(|r| r.setting == Setting::Generation));
    }

    #[test]
    fn expand_two_scores_first_higher_gives_first_wins() {
        let s = source();
        let records =
            expand_scored_set(&[scored(&s, "five", 5), scored(&s, "two", 2)], "m").unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].verdict, Verdict::FirstWins);
    }

    #[test]
    fn expand_duplicate_score_is_an_error() {
        let s = source();
        let err = expand_scored_set(&[scored(&s, "x", 3), scored(&s, "y", 3)], "m").unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateScore { score: 3, .. }));
    }

    #[test]
    fn expand_is_antisymmetric_under_input_order() {
        let s = source();
        let fwd = expand_scored_set(&[scored(&s, "x", 4), scored(&s, "y", 2)], "m").unwrap();
        let rev = expand_scored_set(&[scored(&s, "y", 2), scored(&s, "x", 4)], "m").unwrap();
        assert_eq!(fwd[0].pair.swapped(), rev[0].pair);
        assert_eq!(fwd[0].verdict, rev[0].verdict.negated());
    }

    #[test]
    fn eval_verdict_labels() {
        assert_eq!(parse_eval_verdict("Summary 1").unwrap(), Verdict::FirstWins);
        assert_eq!(parse_eval_verdict("Response 2").unwrap(), Verdict::SecondWins);
        assert_eq!(parse_eval_verdict("Answer 1").unwrap(), Verdict::FirstWins);
        assert_eq!(parse_eval_verdict("Tie").unwrap(), Verdict::Tie);
        assert_eq!(parse_eval_verdict(" tie ").unwrap(), Verdict::Tie);
        assert!(matches!(
            parse_eval_verdict("Summary 3"),
            Err(CorpusError::UnrecognizedChoice(_))
        ));
    }

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn load_drops_ties_and_counts_them() {
        let f = write_lines(&[
            r#"{"source":"post 1","response_a":"aa","response_b":"bb","human_choice":"a"}"#,
            r#"{"source":"post 2","response_a":"cc","response_b":"dd","human_choice":"b"}"#,
            r#"{"source":"post 3","response_a":"ee","response_b":"ff","human_choice":"tie"}"#,
            r#"{"source":"post 4","response_a":"gg","response_b":"hh","human_choice":"a"}"#,
        ]);
        let (corpus, report) =
            Corpus::load_jsonl(f.path(), Task::standard(TaskKind::Summarization)).unwrap();
        assert_eq!(corpus.human_preferences.len(), 3);
        assert_eq!(report.ties_dropped, 1);
        assert!(report.row_errors.is_empty());
        assert!(corpus
            .human_preferences
            .iter()
            .all(|p| p.verdict != Verdict::Tie && p.setting == Setting::Human));
    }

    #[test]
    fn load_empty_file_is_a_dataset_error() {
        let f = write_lines(&[]);
        let err =
            Corpus::load_jsonl(f.path(), Task::standard(TaskKind::Summarization)).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyDataset(_)));
    }

    #[test]
    fn load_identical_responses_is_a_row_error_not_fatal() {
        let f = write_lines(&[
            r#"{"source":"post","response_a":"same","response_b":"same","human_choice":"a"}"#,
            r#"{"source":"post","response_a":"aa","response_b":"bb","human_choice":"a"}"#,
        ]);
        let (corpus, report) =
            Corpus::load_jsonl(f.path(), Task::standard(TaskKind::Summarization)).unwrap();
        assert_eq!(report.row_errors.len(), 1);
        assert!(report.row_errors[0].message.contains("same response twice"));
        assert_eq!(corpus.human_preferences.len(), 1);
    }

    #[test]
    fn load_scores_rows_yield_generation_records() {
        let f = write_lines(&[
            r#"{"source":"post","response_a":"aa","response_b":"bb","scores":{"a":5,"b":3}}"#,
        ]);
        let (corpus, _) =
            Corpus::load_jsonl(f.path(), Task::standard(TaskKind::Summarization)).unwrap();
        assert_eq!(corpus.generation_preferences.len(), 1);
        assert_eq!(corpus.generation_preferences[0].verdict, Verdict::FirstWins);
    }

    #[test]
    fn doc_qa_requires_reference() {
        let f = write_lines(&[
            r#"{"source":"q","response_a":"aa","response_b":"bb","human_choice":"a"}"#,
            r#"{"source":"q","response_a":"aa","response_b":"bb","human_choice":"a","reference":"doc"}"#,
        ]);
        let (corpus, report) = Corpus::load_jsonl(f.path(), Task::standard(TaskKind::DocQa)).unwrap();
        assert_eq!(report.row_errors.len(), 1);
        assert_eq!(corpus.human_preferences.len(), 1);
    }

    #[test]
    fn save_then_load_round_trips_records() {
        let f = write_lines(&[
            r#"{"source":"post 1","response_a":"aa","response_b":"bb","human_choice":"a"}"#,
            r#"{"source":"post 2","response_a":"cc","response_b":"dd","scores":{"a":2,"b":4}}"#,
        ]);
        let (corpus, _) =
            Corpus::load_jsonl(f.path(), Task::standard(TaskKind::Summarization)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        corpus.save_jsonl(&path).unwrap();
        let (reloaded, _) = Corpus::load_jsonl(&path, corpus.task.clone()).unwrap();
        assert_eq!(corpus, reloaded);
    }
}
