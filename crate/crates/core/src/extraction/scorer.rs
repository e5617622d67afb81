//! Client for the external learned scorer (fluency/coherence aspects).
//!
//! The scorer is a separate process or service behind a one-request/one-score
//! line protocol: request `{"task":…,"aspect":…,"source":…,"response":…}`,
//! reply `{"score": s}` with `s` in [0, 1]. Transports: a line-oriented child
//! process, an HTTP POST endpoint, or a fixture map keyed by
//! (aspect, response content hash) for offline runs.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{content_hash, TaskKind};

use super::ExtractError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerAspect {
    Fluency,
    Coherence,
}

impl ScorerAspect {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScorerAspect::Fluency => "fluency",
            ScorerAspect::Coherence => "coherence",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerRequest {
    pub task: TaskKind,
    pub aspect: ScorerAspect,
    pub source: String,
    pub response: String,
}

#[derive(Debug, Deserialize)]
struct ScorerReply {
    score: f64,
}

pub trait ScorerTransport: Send + Sync {
    fn request(&self, req: &ScorerRequest) -> Result<f64, ExtractError>;
}

/// Child process speaking the line protocol on stdin/stdout.
pub struct ProcessScorer {
    child: Mutex<Child>,
}

impl ProcessScorer {
    pub fn spawn(program: &str, args: &[String]) -> Result<ProcessScorer, ExtractError> {
        let child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ExtractError::Scorer(format!("spawn {program}: {e}")))?;
        Ok(ProcessScorer {
            child: Mutex::new(child),
        })
    }
}

impl ScorerTransport for ProcessScorer {
    fn request(&self, req: &ScorerRequest) -> Result<f64, ExtractError> {
        let mut child = self.child.lock().unwrap();
        let line = serde_json::to_string(req).expect("serializable");
        let stdin = child
            .stdin
            .as_mut()
            .ok_or_else(|| ExtractError::Scorer("scorer stdin closed".into()))?;
        writeln!(stdin, "{line}").map_err(|e| ExtractError::Scorer(e.to_string()))?;
        stdin.flush().map_err(|e| ExtractError::Scorer(e.to_string()))?;
        let stdout = child
            .stdout
            .as_mut()
            .ok_or_else(|| ExtractError::Scorer("scorer stdout closed".into()))?;
        let mut reply = String::new();
        BufReader::new(stdout)
            .read_line(&mut reply)
            .map_err(|e| ExtractError::Scorer(e.to_string()))?;
        let parsed: ScorerReply = serde_json::from_str(reply.trim())
            .map_err(|e| ExtractError::Scorer(format!("bad reply {reply:?}: {e}")))?;
        Ok(parsed.score)
    }
}

impl Drop for ProcessScorer {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// HTTP POST transport for a scorer service.
pub struct HttpScorer {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>) -> HttpScorer {
        HttpScorer {
            url: url.into(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl ScorerTransport for HttpScorer {
    fn request(&self, req: &ScorerRequest) -> Result<f64, ExtractError> {
        let resp = self
            .client
            .post(&self.url)
            .json(req)
            .send()
            .map_err(|e| ExtractError::Scorer(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ExtractError::Scorer(format!("http status {}", resp.status())));
        }
        let reply: ScorerReply = resp
            .json()
            .map_err(|e| ExtractError::Scorer(format!("bad reply: {e}")))?;
        Ok(reply.score)
    }
}

/// One fixture line for the mock scorer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerFixtureEntry {
    pub aspect: ScorerAspect,
    /// [`content_hash`] of the response text.
    pub response_hash: String,
    pub score: f64,
}

/// Deterministic scorer serving fixture values.
pub struct MockScorer {
    scores: BTreeMap<(ScorerAspect, String), f64>,
}

impl MockScorer {
    pub fn new(entries: impl IntoIterator<Item = ScorerFixtureEntry>) -> MockScorer {
        MockScorer {
            scores: entries
                .into_iter()
                .map(|e| ((e.aspect, e.response_hash), e.score))
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<MockScorer, ExtractError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExtractError::Io(path.display().to_string(), e.to_string()))?;
        let mut entries = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(line)
                    .map_err(|e| ExtractError::Io(path.display().to_string(), e.to_string()))?,
            );
        }
        Ok(MockScorer::new(entries))
    }

    /// Fixture key for a response text.
    pub fn response_key(response: &str) -> String {
        content_hash(&[response])
    }
}

impl ScorerTransport for MockScorer {
    fn request(&self, req: &ScorerRequest) -> Result<f64, ExtractError> {
        let key = (req.aspect, Self::response_key(&req.response));
        self.scores
            .get(&key)
            .copied()
            .ok_or_else(|| ExtractError::Scorer(format!("no fixture for {:?} {}", key.0, key.1)))
    }
}

/// Validating wrapper: the aspect score is passed through unmodified but
/// must lie in [0, 1].
pub struct ScorerClient {
    transport: Box<dyn ScorerTransport>,
}

impl ScorerClient {
    pub fn new(transport: Box<dyn ScorerTransport>) -> ScorerClient {
        ScorerClient { transport }
    }

    pub fn score(
        &self,
        task: TaskKind,
        aspect: ScorerAspect,
        source: &str,
        response: &str,
    ) -> Result<f64, ExtractError> {
        let req = ScorerRequest {
            task,
            aspect,
            source: source.to_string(),
            response: response.to_string(),
        };
        let score = self.transport.request(&req)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(ExtractError::ScorerProtocol(score));
        }
        Ok(score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock(entries: Vec<(ScorerAspect, &str, f64)>) -> ScorerClient {
        ScorerClient::new(Box::new(MockScorer::new(entries.into_iter().map(
            |(aspect, resp, score)| ScorerFixtureEntry {
                aspect,
                response_hash: MockScorer::response_key(resp),
                score,
            },
        ))))
    }

    #[test]
    fn fixture_score_is_passed_through() {
        let client = mock(vec![(ScorerAspect::Fluency, "a fine response", 0.87)]);
        let s = client
            .score(TaskKind::Summarization, ScorerAspect::Fluency, "src", "a fine response")
            .unwrap();
        assert_eq!(s, 0.87);
    }

    #[test]
    fn out_of_range_score_is_a_protocol_error() {
        let client = mock(vec![(ScorerAspect::Coherence, "r", 1.3)]);
        let err = client
            .score(TaskKind::Summarization, ScorerAspect::Coherence, "src", "r")
            .unwrap_err();
        assert!(matches!(err, ExtractError::ScorerProtocol(v) if v == 1.3));
    }

    #[test]
    fn empty_response_is_still_passed_through() {
        let client = mock(vec![(ScorerAspect::Fluency, "", 0.1)]);
        let s = client
            .score(TaskKind::Summarization, ScorerAspect::Fluency, "src", "")
            .unwrap();
        assert_eq!(s, 0.1);
    }

    #[test]
    fn process_scorer_speaks_the_line_protocol() {
        let scorer = ProcessScorer::spawn(
            "sh",
            &["-c".to_string(), r#"while read l; do echo '{"score": 0.5}'; done"#.to_string()],
        )
        .unwrap();
        let client = ScorerClient::new(Box::new(scorer));
        let s = client
            .score(TaskKind::Summarization, ScorerAspect::Fluency, "s", "r")
            .unwrap();
        assert_eq!(s, 0.5);
    }
}
