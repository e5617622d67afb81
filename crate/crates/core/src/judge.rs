//! LLM judge client: prompt templates, a chat-completions transport, strict
//! reply parsing, persistent response caching, and a deterministic fixture
//! transport for offline runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::write_atomic;

pub mod templates;

/// How a template's reply is to be interpreted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "format")]
pub enum ReplyFormat {
    /// JSON object; every listed key must be present.
    Json { required_keys: Vec<String> },
    /// An enumerated list, one item per line.
    Enumerated,
    /// Free text, returned verbatim.
    Text,
}

/// A named prompt body with `{UPPER_CASE}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub version: String,
    pub body: String,
    pub reply_format: ReplyFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub few_shot: Option<String>,
}

impl PromptTemplate {
    /// Placeholder names appearing in the body, in order of first occurrence.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names = Vec::new();
        for name in scan_placeholders(&self.body) {
            if !names.contains(&name) {
                names.push(name);
            }
        }
        names
    }

    /// Substitute every placeholder. `FEW_SHOT` is bound automatically from
    /// the template's own exemplar block unless the caller overrides it.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<String, JudgeError> {
        let mut out = String::with_capacity(self.body.len());
        let mut rest = self.body.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let after = &rest[start..];
            match placeholder_at(after) {
                Some((name, consumed)) => {
                    let value = if name == "FEW_SHOT" && !bindings.contains_key("FEW_SHOT") {
                        Some(self.few_shot.clone().unwrap_or_default())
                    } else {
                        bindings.get(name).cloned()
                    };
                    match value {
                        Some(v) => out.push_str(&v),
                        None => {
                            return Err(JudgeError::MissingPlaceholder {
                                template: self.name.clone(),
                                placeholder: name.to_string(),
                            })
                        }
                    }
                    rest = &after[consumed..];
                }
                None => {
                    out.push('{');
                    rest = &after[1..];
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

fn placeholder_at(s: &str) -> Option<(&str, usize)> {
    debug_assert!(s.starts_with('{'));
    let inner = &s[1..];
    let end = inner.find('}')?;
    let name = &inner[..end];
    let mut chars = name.chars();
    let first = chars.next()?;
    if !first.is_ascii_uppercase() {
        return None;
    }
    if !chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_') {
        return None;
    }
    Some((name, end + 2))
}

fn scan_placeholders(body: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find('{') {
        let after = &rest[start..];
        match placeholder_at(after) {
            Some((name, consumed)) => {
                names.push(name.to_string());
                rest = &after[consumed..];
            }
            None => rest = &after[1..],
        }
    }
    names
}

/// Sampling parameters sent with each request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            temperature: 0.6,
            top_p: 0.9,
            max_tokens: 1024,
        }
    }
}

impl DecodeParams {
    /// Greedy variant used for factor extraction, so reruns are reproducible.
    pub fn greedy() -> Self {
        DecodeParams {
            temperature: 0.0,
            ..Default::default()
        }
    }
}

/// A fully-bound request. Its hash keys the cache and fixture files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub template: String,
    pub template_version: String,
    pub bindings: BTreeMap<String, String>,
    pub decode: DecodeParams,
    pub model: String,
}

impl JudgeRequest {
    /// SHA-256 over the canonical JSON encoding of the request.
    pub fn request_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request is serializable");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Cached,
    Live,
    Mock,
}

/// A reply: raw text, parsed JSON when the template expects JSON, and where
/// it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeReply {
    pub raw: String,
    pub parsed: Option<Value>,
    pub provenance: Provenance,
}

/// Strip markdown fences and surrounding prose, parse as JSON, and check the
/// required keys are present.
pub fn parse_json_reply(raw: &str, required_keys: &[String]) -> Result<Value, JudgeError> {
    let candidate = extract_json_candidate(raw);
    let value: Value = serde_json::from_str(candidate).map_err(|_| JudgeError::JsonParse {
        raw: raw.to_string(),
    })?;
    if let Some(obj) = value.as_object() {
        for key in required_keys {
            if !obj.contains_key(key) {
                return Err(JudgeError::MissingKey { key: key.clone() });
            }
        }
    } else if !required_keys.is_empty() {
        return Err(JudgeError::MissingKey {
            key: required_keys[0].clone(),
        });
    }
    Ok(value)
}

fn extract_json_candidate(raw: &str) -> &str {
    let trimmed = raw.trim();
    if let Some(start) = trimmed.find("```") {
        let after = &trimmed[start + 3..];
        let after = after.strip_prefix("json").unwrap_or(after);
        if let Some(end) = after.find("```") {
            return after[..end].trim();
        }
    }
    let open = trimmed.find(['{', '[']);
    let close = trimmed.rfind(['}', ']']);
    match (open, close) {
        (Some(o), Some(c)) if c >= o => trimmed[o..=c].trim(),
        _ => trimmed,
    }
}

/// One fixture line: hash of the request and the reply to serve for it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub request_hash: String,
    pub reply_text: String,
}

/// Something that can answer a rendered prompt.
pub trait Transport: Send + Sync {
    fn send(&self, prompt: &str, request: &JudgeRequest) -> Result<String, JudgeError>;
    fn provenance(&self) -> Provenance;
}

/// Deterministic transport serving canned replies keyed by request hash.
pub struct FixtureTransport {
    replies: BTreeMap<String, String>,
}

impl FixtureTransport {
    pub fn new(replies: BTreeMap<String, String>) -> Self {
        FixtureTransport { replies }
    }

    /// Load a JSONL fixture file of [`FixtureEntry`] lines.
    pub fn from_file(path: &Path) -> Result<Self, JudgeError> {
        let file = fs::File::open(path)
            .map_err(|e| JudgeError::Io(path.display().to_string(), e.to_string()))?;
        let mut replies = BTreeMap::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|e| JudgeError::Io(path.display().to_string(), e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(&line)
                .map_err(|e| JudgeError::Io(path.display().to_string(), e.to_string()))?;
            replies.insert(entry.request_hash, entry.reply_text);
        }
        Ok(FixtureTransport { replies })
    }

    pub fn write_file(path: &Path, entries: &[FixtureEntry]) -> Result<(), JudgeError> {
        let mut out = Vec::new();
        for e in entries {
            out.extend_from_slice(serde_json::to_string(e).expect("serializable").as_bytes());
            out.push(b'\n');
        }
        write_atomic(path, &out).map_err(|e| JudgeError::Io(path.display().to_string(), e.to_string()))
    }
}

impl Transport for FixtureTransport {
    fn send(&self, _prompt: &str, request: &JudgeRequest) -> Result<String, JudgeError> {
        let hash = request.request_hash();
        self.replies
            .get(&hash)
            .cloned()
            .ok_or(JudgeError::MissingFixture {
                request_hash: hash,
                template: request.template.clone(),
            })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Mock
    }
}

/// Retry schedule for the live transport.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            backoff: vec![
                Duration::from_secs(1),
                Duration::from_secs(4),
                Duration::from_secs(16),
            ],
        }
    }
}

/// Chat-completions transport for any OpenAI-compatible endpoint.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        HttpTransport {
            endpoint: endpoint.into(),
            api_key,
            retry: RetryPolicy::default(),
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn attempt(&self, prompt: &str, request: &JudgeRequest) -> Result<String, AttemptError> {
        let body = serde_json::json!({
            "model": request.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.decode.temperature,
            "top_p": request.decode.top_p,
            "max_tokens": request.decode.max_tokens,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| AttemptError::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(AttemptError::Retryable(format!("http status {status}")));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(format!("http status {status}")));
        }
        let value: Value = resp
            .json()
            .map_err(|e| AttemptError::Fatal(format!("bad response body: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| AttemptError::Fatal("no message content in response".to_string()))
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
}

impl Transport for HttpTransport {
    fn send(&self, prompt: &str, request: &JudgeRequest) -> Result<String, JudgeError> {
        let mut last = String::new();
        for (attempt, delay) in std::iter::once(None)
            .chain(self.retry.backoff.iter().map(Some))
            .enumerate()
        {
            if let Some(delay) = delay {
                std::thread::sleep(*delay);
            }
            match self.attempt(prompt, request) {
                Ok(text) => return Ok(text),
                Err(AttemptError::Fatal(msg)) => {
                    return Err(JudgeError::Transport {
                        message: msg,
                        attempts: attempt + 1,
                    })
                }
                Err(AttemptError::Retryable(msg)) => last = msg,
            }
        }
        Err(JudgeError::Transport {
            message: last,
            attempts: self.retry.backoff.len() + 1,
        })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Live
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    request_hash: String,
    template: String,
    model: String,
    reply_text: String,
}

/// One JSON file per request hash; writes are atomic so interrupted runs
/// never leave truncated entries.
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DiskCache { dir: dir.into() }
    }

    fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Option<String> {
        let bytes = fs::read(self.path_for(hash)).ok()?;
        let record: CacheRecord = serde_json::from_slice(&bytes).ok()?;
        Some(record.reply_text)
    }

    pub fn put(&self, request: &JudgeRequest, reply_text: &str) -> Result<(), JudgeError> {
        let hash = request.request_hash();
        let record = CacheRecord {
            request_hash: hash.clone(),
            template: request.template.clone(),
            model: request.model.clone(),
            reply_text: reply_text.to_string(),
        };
        let bytes = serde_json::to_vec_pretty(&record).expect("serializable");
        write_atomic(&self.path_for(&hash), &bytes)
            .map_err(|e| JudgeError::Io(self.dir.display().to_string(), e.to_string()))
    }
}

/// Counting semaphore bounding in-flight transport calls.
struct InflightLimit {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl InflightLimit {
    fn new(n: usize) -> Self {
        InflightLimit {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InflightGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        InflightGuard { limit: self }
    }
}

struct InflightGuard<'a> {
    limit: &'a InflightLimit,
}

impl Drop for InflightGuard<'_> {
    fn drop(&mut self) {
        *self.limit.permits.lock().unwrap() += 1;
        self.limit.cv.notify_one();
    }
}

/// The judge: renders templates, consults the cache, and calls the transport.
pub struct JudgeClient {
    transport: Box<dyn Transport>,
    cache: Option<DiskCache>,
    model: String,
    default_decode: DecodeParams,
    inflight: InflightLimit,
}

impl JudgeClient {
    pub fn new(transport: Box<dyn Transport>, model: impl Into<String>) -> Self {
        JudgeClient {
            transport,
            cache: None,
            model: model.into(),
            default_decode: DecodeParams::default(),
            inflight: InflightLimit::new(4),
        }
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_default_decode(mut self, decode: DecodeParams) -> Self {
        self.default_decode = decode;
        self
    }

    pub fn with_inflight_limit(mut self, n: usize) -> Self {
        self.inflight = InflightLimit::new(n);
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn default_decode(&self) -> &DecodeParams {
        &self.default_decode
    }

    /// Build the request a `complete` call with these arguments would issue.
    /// Useful for preparing fixture files.
    pub fn request_for(
        &self,
        template: &PromptTemplate,
        bindings: &BTreeMap<String, String>,
        decode: Option<DecodeParams>,
    ) -> JudgeRequest {
        JudgeRequest {
            template: template.name.clone(),
            template_version: template.version.clone(),
            bindings: bindings.clone(),
            decode: decode.unwrap_or_else(|| self.default_decode.clone()),
            model: self.model.clone(),
        }
    }

    /// Render, consult the cache, then the transport. Live replies are
    /// persisted before returning. JSON-format templates get their reply
    /// parsed and schema-checked.
    pub fn complete(
        &self,
        template: &PromptTemplate,
        bindings: &BTreeMap<String, String>,
        decode: Option<DecodeParams>,
    ) -> Result<JudgeReply, JudgeError> {
        let prompt = template.render(bindings)?;
        let request = self.request_for(template, bindings, decode);
        let hash = request.request_hash();

        let (raw, provenance) = match self.cache.as_ref().and_then(|c| c.get(&hash)) {
            Some(raw) => (raw, Provenance::Cached),
            None => {
                let _permit = self.inflight.acquire();
                let raw = self.transport.send(&prompt, &request)?;
                let provenance = self.transport.provenance();
                if provenance == Provenance::Live {
                    if let Some(cache) = &self.cache {
                        cache.put(&request, &raw)?;
                    }
                }
                (raw, provenance)
            }
        };

        let parsed = match &template.reply_format {
            ReplyFormat::Json { required_keys } => Some(parse_json_reply(&raw, required_keys)?),
            ReplyFormat::Enumerated | ReplyFormat::Text => None,
        };
        Ok(JudgeReply {
            raw,
            parsed,
            provenance,
        })
    }
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("template {template}: no binding for placeholder {placeholder}")]
    MissingPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("reply is not parseable JSON: {raw:?}")]
    JsonParse { raw: String },
    #[error("reply is missing required key {key:?}")]
    MissingKey { key: String },
    #[error("no fixture for request {request_hash} (template {template})")]
    MissingFixture {
        request_hash: String,
        template: String,
    },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: usize },
    #[error("{0}: {1}")]
    Io(String, String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn bindings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn template(body: &str) -> PromptTemplate {
        PromptTemplate {
            name: "t".into(),
            version: "1".into(),
            body: body.into(),
            reply_format: ReplyFormat::Text,
            few_shot: None,
        }
    }

    #[test]
    fn render_substitutes_all_placeholders() {
        let t = template("fact: {ATOMIC_FACT}\npost: {POST}");
        let out = t
            .render(&bindings(&[("ATOMIC_FACT", "the sky is blue"), ("POST", "a post")]))
            .unwrap();
        assert_eq!(out, "fact: the sky is blue\npost: a post");
    }

    #[test]
    fn render_missing_placeholder_names_it() {
        let t = template("{A} and {B}");
        let err = t.render(&bindings(&[("A", "x")])).unwrap_err();
        match err {
            JudgeError::MissingPlaceholder { placeholder, .. } => assert_eq!(placeholder, "B"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn render_without_placeholders_is_identity() {
        let t = template("Output Format:\n{\n\"decision\": \"\"\n}");
        assert_eq!(t.render(&BTreeMap::new()).unwrap(), t.body);
    }

    #[test]
    fn render_binds_few_shot_from_template() {
        let mut t = template("intro\n{FEW_SHOT}\nINPUT: {X}");
        t.few_shot = Some("example".into());
        let out = t.render(&bindings(&[("X", "v")])).unwrap();
        assert_eq!(out, "intro\nexample\nINPUT: v");
    }

    #[test]
    fn parse_json_reply_strips_fences() {
        let raw = "```json\n{\"decision\": \"yes\", \"justification\": \"fits\"}\n```";
        let v = parse_json_reply(raw, &["decision".into(), "justification".into()]).unwrap();
        assert_eq!(v["decision"], "yes");
    }

    #[test]
    fn parse_json_reply_reports_missing_key() {
        let err = parse_json_reply(
            r#"{"decision": "Aligned"}"#,
            &["decision".into(), "justification".into()],
        )
        .unwrap_err();
        match err {
            JudgeError::MissingKey { key } => assert_eq!(key, "justification"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_json_reply_rejects_prose() {
        assert!(matches!(
            parse_json_reply("I think yes", &["decision".into()]),
            Err(JudgeError::JsonParse { .. })
        ));
    }

    #[test]
    fn parse_json_reply_tolerates_leading_prose() {
        let raw = "Sure, here you go: {\"decision\": \"no\"} Hope that helps!";
        let v = parse_json_reply(raw, &["decision".into()]).unwrap();
        assert_eq!(v["decision"], "no");
    }

    struct CountingTransport {
        calls: AtomicUsize,
        reply: String,
    }

    impl Transport for CountingTransport {
        fn send(&self, _p: &str, _r: &JudgeRequest) -> Result<String, JudgeError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.reply.clone())
        }
        fn provenance(&self) -> Provenance {
            Provenance::Live
        }
    }

    #[test]
    fn repeated_request_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let transport = Box::leak(Box::new(CountingTransport {
            calls: AtomicUsize::new(0),
            reply: "hello".into(),
        }));
        struct Fwd(&'static CountingTransport);
        impl Transport for Fwd {
            fn send(&self, p: &str, r: &JudgeRequest) -> Result<String, JudgeError> {
                self.0.send(p, r)
            }
            fn provenance(&self) -> Provenance {
                Provenance::Live
            }
        }
        let client = JudgeClient::new(Box::new(Fwd(transport)), "m")
            .with_cache(DiskCache::new(dir.path()));
        let t = template("say {X}");
        let b = bindings(&[("X", "hi")]);
        let first = client.complete(&t, &b, None).unwrap();
        let second = client.complete(&t, &b, None).unwrap();
        assert_eq!(first.provenance, Provenance::Live);
        assert_eq!(second.provenance, Provenance::Cached);
        assert_eq!(first.raw, second.raw);
        assert_eq!(transport.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn fixture_transport_serves_by_request_hash() {
        let t = template("ask {X}");
        let b = bindings(&[("X", "q")]);
        let probe = JudgeClient::new(Box::new(FixtureTransport::new(BTreeMap::new())), "m");
        let hash = probe.request_for(&t, &b, None).request_hash();
        let mut replies = BTreeMap::new();
        replies.insert(hash, "fixture answer".to_string());
        let client = JudgeClient::new(Box::new(FixtureTransport::new(replies)), "m");
        let reply = client.complete(&t, &b, None).unwrap();
        assert_eq!(reply.raw, "fixture answer");
        assert_eq!(reply.provenance, Provenance::Mock);
    }

    #[test]
    fn missing_fixture_is_an_error() {
        let client = JudgeClient::new(Box::new(FixtureTransport::new(BTreeMap::new())), "m");
        let t = template("{X}");
        let err = client.complete(&t, &bindings(&[("X", "v")]), None).unwrap_err();
        assert!(matches!(err, JudgeError::MissingFixture { .. }));
    }

    struct FailingTransport;
    impl Transport for FailingTransport {
        fn send(&self, _p: &str, _r: &JudgeRequest) -> Result<String, JudgeError> {
            Err(JudgeError::Transport {
                message: "invalid credential".into(),
                attempts: 1,
            })
        }
        fn provenance(&self) -> Provenance {
            Provenance::Live
        }
    }

    #[test]
    fn transport_failure_caches_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let client =
            JudgeClient::new(Box::new(FailingTransport), "m").with_cache(DiskCache::new(dir.path()));
        let t = template("{X}");
        let err = client.complete(&t, &bindings(&[("X", "v")]), None).unwrap_err();
        assert!(matches!(err, JudgeError::Transport { .. }));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn request_hash_distinguishes_decode_params_and_model() {
        let t = template("{X}");
        let b = bindings(&[("X", "v")]);
        let c1 = JudgeClient::new(Box::new(FailingTransport), "m1");
        let c2 = JudgeClient::new(Box::new(FailingTransport), "m2");
        let h1 = c1.request_for(&t, &b, None).request_hash();
        let h2 = c2.request_for(&t, &b, None).request_hash();
        let h3 = c1
            .request_for(&t, &b, Some(DecodeParams::greedy()))
            .request_hash();
        assert_ne!(h1, h2);
        assert_ne!(h1, h3);
    }
}
