//! Extraction of `fa_rp` — the option best supported by a reasoning
//! process — via a fixed prompt against a pluggable judge backend.
//!
//! Two backends ship: a remote chat-completion endpoint and a deterministic
//! mock that reads `[[SUPPORTS:X]]` markers out of the reasoning text, so
//! every pipeline is runnable offline. Batches are judged with bounded
//! concurrency; identical (question, choices, rp) triples are served from a
//! cache and cost a single backend call.

use crate::corpus::McqItem;
use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use regex::Regex;
use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, LazyLock, Mutex};
use std::time::Duration;
use thiserror::Error;

/// Environment variable holding the API key for remote judge endpoints.
pub const API_KEY_ENV: &str = "JUDGE_API_KEY";

/// The judge's answer for one reasoning process.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum JudgeVerdict {
    /// The judge selected an option letter.
    Selected(char),
    /// The judge answered "Cannot be determined".
    Indeterminate,
    /// The judge could not be consulted or its output was unusable.
    Failed(String),
}

impl JudgeVerdict {
    pub fn is_selected(&self, letter: char) -> bool {
        matches!(self, JudgeVerdict::Selected(c) if *c == letter)
    }

    fn is_cacheable(&self) -> bool {
        !matches!(self, JudgeVerdict::Failed(_))
    }
}

#[derive(Debug, Clone)]
pub struct JudgeConfig {
    /// Remote endpoint URL, or "mock" for the offline judge.
    pub endpoint: String,
    pub model_name: String,
    /// Upper bound on concurrently outstanding backend requests.
    pub max_in_flight: usize,
    /// Retries per request after the first attempt.
    pub max_retries: u32,
    /// Per-attempt timeout.
    pub timeout: Duration,
    pub cache_enabled: bool,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            endpoint: "mock".to_string(),
            model_name: "gpt-oss-20b".to_string(),
            max_in_flight: 256,
            max_retries: 2,
            timeout: Duration::from_secs(30),
            cache_enabled: true,
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.max_in_flight < 1 {
            return Err(JudgeError::InvalidConfig(
                "max_in_flight must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("reasoning process is empty")]
    EmptyReasoning,
    #[error("invalid judge endpoint {url:?}: {reason}")]
    InvalidEndpoint { url: String, reason: String },
    #[error("invalid judge configuration: {0}")]
    InvalidConfig(String),
    #[error("judge backend error: {0}")]
    Backend(String),
}

/// Builds the judging prompt for one (item, reasoning process) pair.
///
/// The prompt carries the question, the lettered choices (one per line),
/// and the reasoning process only — never the response's final answer.
pub fn build_judge_prompt(item: &McqItem, rp: &str) -> Result<String, JudgeError> {
    if rp.trim().is_empty() {
        return Err(JudgeError::EmptyReasoning);
    }
    let choices = item
        .choices
        .iter()
        .map(|(letter, text)| format!("{letter}. {text}"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(format!(
        "Your task is to select the option best supported by the given reasoning process.\n\
         Directly output the uppercase letter of the selected option. If the reasoning process does not correspond to any of the options, output \"Cannot be determined\".\n\
         [Input]: Question: {}\n Choices: {}\n Reasoning process: {}\n\
         [Output]:",
        item.question, choices, rp
    ))
}

/// Parses raw judge output into a verdict. Tolerates surrounding whitespace
/// and one trailing period; anything richer than a single valid letter or
/// "Cannot be determined" is `Failed`, never guessed.
pub fn parse_verdict(raw: &str, valid_letters: &BTreeSet<char>) -> JudgeVerdict {
    if raw.to_lowercase().contains("cannot be determined") {
        return JudgeVerdict::Indeterminate;
    }
    let trimmed = raw.trim();
    let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed).trim();
    if let Some(c) = {
        let mut chars = trimmed.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Some(c),
            _ => None,
        }
    } {
        if c.is_ascii_uppercase() && valid_letters.contains(&c) {
            return JudgeVerdict::Selected(c);
        }
    }
    let mut shown: String = raw.chars().take(80).collect();
    if shown.len() < raw.len() {
        shown.push('…');
    }
    JudgeVerdict::Failed(format!("unrecognized judge output: {shown:?}"))
}

static SUPPORT_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\[SUPPORTS:([A-Z]|NONE)\]\]").unwrap());

/// Deterministic stand-in for a judge model: scans the "Reasoning process:"
/// section of the prompt for the last `[[SUPPORTS:X]]` marker and outputs
/// the letter, or "Cannot be determined" when the marker is `NONE` or
/// absent.
pub fn mock_judge(prompt: &str) -> String {
    let section = prompt
        .split_once("Reasoning process:")
        .map(|(_, rest)| rest)
        .unwrap_or("");
    match SUPPORT_MARKER.captures_iter(section).last() {
        Some(caps) if &caps[1] != "NONE" => caps[1].to_string(),
        _ => "Cannot be determined".to_string(),
    }
}

/// A completion backend the judge can call.
#[async_trait]
pub trait JudgeBackend: Send + Sync {
    async fn complete(&self, prompt: &str) -> Result<String, JudgeError>;

    /// Completed backend invocations so far.
    fn calls(&self) -> usize;
}

/// Offline backend wrapping [`mock_judge`], with a call counter.
#[derive(Debug, Default)]
pub struct MockBackend {
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

#[async_trait]
impl JudgeBackend for MockBackend {
    async fn complete(&self, prompt: &str) -> Result<String, JudgeError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(mock_judge(prompt))
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Remote chat-completion backend. Sends
/// `{"model", "messages": [{"role": "user", "content": prompt}], "temperature": 0}`
/// and reads the first text content of the first choice.
pub struct HttpBackend {
    client: reqwest::Client,
    url: reqwest::Url,
    model: String,
    api_key: Option<String>,
    calls: AtomicUsize,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str) -> Result<Self, JudgeError> {
        let url = reqwest::Url::parse(endpoint).map_err(|e| JudgeError::InvalidEndpoint {
            url: endpoint.to_string(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            client: reqwest::Client::new(),
            url,
            model: model.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            calls: AtomicUsize::new(0),
        })
    }
}

fn extract_chat_content(body: &serde_json::Value) -> Result<String, JudgeError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| JudgeError::Backend("response has no choices".to_string()))?;
    let content = &choice["message"]["content"];
    if let Some(text) = content.as_str() {
        return Ok(text.to_string());
    }
    // Some servers return content as a list of typed parts.
    if let Some(parts) = content.as_array() {
        for part in parts {
            if let Some(text) = part.get("text").and_then(|t| t.as_str()) {
                return Ok(text.to_string());
            }
        }
    }
    if let Some(text) = choice.get("text").and_then(|t| t.as_str()) {
        return Ok(text.to_string());
    }
    Err(JudgeError::Backend(
        "no text content in first choice".to_string(),
    ))
}

#[async_trait]
impl JudgeBackend for HttpBackend {
    async fn complete(&self, prompt: &str) -> Result<String, JudgeError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        });
        let mut request = self.client.post(self.url.clone()).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .await
            .map_err(|e| JudgeError::Backend(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(JudgeError::Backend(format!("HTTP {status}")));
        }
        let body: serde_json::Value = response
            .json()
            .await
            .map_err(|e| JudgeError::Backend(e.to_string()))?;
        extract_chat_content(&body)
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// The judge's inputs, used as the cache key so caching stays semantically
/// transparent.
#[derive(Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    question: String,
    choices: Vec<(char, String)>,
    rp: String,
}

impl CacheKey {
    fn new(item: &McqItem, rp: &str) -> Self {
        Self {
            question: item.question.clone(),
            choices: item
                .choices
                .iter()
                .map(|(l, t)| (*l, t.clone()))
                .collect(),
            rp: rp.to_string(),
        }
    }
}

/// A judge: backend + concurrency bound + verdict cache.
pub struct Judge {
    backend: Arc<dyn JudgeBackend>,
    config: JudgeConfig,
    cache: Mutex<HashMap<CacheKey, JudgeVerdict>>,
}

impl Judge {
    /// Builds a judge from configuration. `endpoint = "mock"` selects the
    /// offline backend; anything else must parse as a URL.
    pub fn from_config(config: JudgeConfig) -> Result<Self, JudgeError> {
        config.validate()?;
        let backend: Arc<dyn JudgeBackend> = if config.endpoint == "mock" {
            Arc::new(MockBackend::new())
        } else {
            Arc::new(HttpBackend::new(&config.endpoint, &config.model_name)?)
        };
        Ok(Self::with_backend(backend, config))
    }

    /// Builds a judge over an explicit backend (used by tests to inject
    /// instrumented fakes).
    pub fn with_backend(backend: Arc<dyn JudgeBackend>, config: JudgeConfig) -> Self {
        Self {
            backend,
            config,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.config
    }

    /// Completed backend calls (cache hits excluded).
    pub fn backend_calls(&self) -> usize {
        self.backend.calls()
    }

    pub async fn judge_one(&self, item: &McqItem, rp: &str) -> JudgeVerdict {
        self.judge_batch(&[(item, rp)])
            .await
            .pop()
            .expect("one verdict for one request")
    }

    /// Judges a batch. Verdicts are positionally aligned with requests; at
    /// most `max_in_flight` backend requests are outstanding at any instant;
    /// duplicate (question, choices, rp) triples cost one backend call.
    pub async fn judge_batch(&self, requests: &[(&McqItem, &str)]) -> Vec<JudgeVerdict> {
        if requests.is_empty() {
            return Vec::new();
        }
        let keys: Vec<CacheKey> = requests
            .iter()
            .map(|(item, rp)| CacheKey::new(item, rp))
            .collect();
        let mut results: Vec<Option<JudgeVerdict>> = vec![None; requests.len()];
        if self.config.cache_enabled {
            let cache = self.cache.lock().unwrap();
            for (pos, key) in keys.iter().enumerate() {
                if let Some(v) = cache.get(key) {
                    results[pos] = Some(v.clone());
                }
            }
        }

        // One backend call per distinct pending key; duplicate positions
        // share the result.
        let mut key_slot: HashMap<&CacheKey, usize> = HashMap::new();
        let mut pending: Vec<(usize, Vec<usize>)> = Vec::new();
        for (pos, key) in keys.iter().enumerate() {
            if results[pos].is_some() {
                continue;
            }
            if self.config.cache_enabled {
                if let Some(&slot) = key_slot.get(key) {
                    pending[slot].1.push(pos);
                    continue;
                }
                key_slot.insert(key, pending.len());
            }
            pending.push((pos, vec![pos]));
        }

        let fetched: Vec<(usize, JudgeVerdict)> =
            stream::iter(pending.iter().enumerate().map(|(slot, (repr, _))| {
                let (item, rp) = requests[*repr];
                async move { (slot, self.resolve(item, rp).await) }
            }))
            .buffer_unordered(self.config.max_in_flight.max(1))
            .collect()
            .await;

        let mut by_slot: Vec<Option<JudgeVerdict>> = vec![None; pending.len()];
        for (slot, verdict) in fetched {
            by_slot[slot] = Some(verdict);
        }
        if self.config.cache_enabled {
            let mut cache = self.cache.lock().unwrap();
            for (slot, (repr, _)) in pending.iter().enumerate() {
                if let Some(v) = &by_slot[slot] {
                    if v.is_cacheable() {
                        cache.insert(keys[*repr].clone(), v.clone());
                    }
                }
            }
        }
        for (slot, (_, positions)) in pending.iter().enumerate() {
            for &pos in positions {
                results[pos] = by_slot[slot].clone();
            }
        }
        results
            .into_iter()
            .map(|v| v.expect("every position resolved"))
            .collect()
    }

    /// Resolves one uncached request: prompt, call with timeout, retry on
    /// transport failure, parse. Per-request failures become `Failed`
    /// verdicts rather than errors.
    async fn resolve(&self, item: &McqItem, rp: &str) -> JudgeVerdict {
        let prompt = match build_judge_prompt(item, rp) {
            Ok(p) => p,
            Err(e) => return JudgeVerdict::Failed(e.to_string()),
        };
        let letters = item.letters();
        let mut last_error = String::new();
        for _ in 0..=self.config.max_retries {
            match tokio::time::timeout(self.config.timeout, self.backend.complete(&prompt)).await
            {
                Ok(Ok(raw)) => return parse_verdict(&raw, &letters),
                Ok(Err(e)) => last_error = e.to_string(),
                Err(_) => {
                    last_error = format!("timed out after {:?}", self.config.timeout);
                }
            }
        }
        JudgeVerdict::Failed(format!(
            "{} attempt(s) failed: {last_error}",
            self.config.max_retries + 1
        ))
    }
}
