//! OpenAI-compatible chat-completions client with retry and backoff.

use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{BackendError, ChatMessage, CompletionParams, LlmBackend};

/// Environment variable holding the bearer token.
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub chat_path: String,
    pub api_key_env: String,
    pub timeout: Duration,
    /// Retries after the first attempt, for 429, 5xx and transport failures.
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
    /// Seeds backoff jitter.
    pub seed: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            chat_path: "/chat/completions".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout: Duration::from_secs(120),
            max_retries: 4,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(30),
            seed: 0,
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    n: usize,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: Option<usize>,
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

pub struct HttpBackend {
    client: Client,
    url: String,
    api_key: Option<String>,
    config: HttpConfig,
    jitter: Mutex<ChaCha8Rng>,
}

enum Attempt {
    Done(Vec<String>),
    Retry {
        after: Option<Duration>,
        error: BackendError,
    },
    Fail(BackendError),
}

impl HttpBackend {
    /// Reads the API key from `config.api_key_env`; a missing key sends no
    /// Authorization header (local servers).
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: HttpConfig, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let url = format!(
            "{}/{}",
            config.base_url.trim_end_matches('/'),
            config.chat_path.trim_start_matches('/')
        );
        Ok(Self {
            client,
            url,
            api_key,
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            config,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn backoff(&self, attempt: u32, server_hint: Option<Duration>) -> Duration {
        let exp = self
            .config
            .backoff_base
            .saturating_mul(1u32.checked_shl(attempt).unwrap_or(u32::MAX))
            .min(self.config.backoff_cap);
        let factor: f64 = self.jitter.lock().expect("jitter lock").gen_range(0.5..=1.0);
        let jittered = exp.mul_f64(factor);
        server_hint.map_or(jittered, |hint| hint.max(jittered))
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Attempt {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = match req.send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    after: None,
                    error: BackendError::Transport(e.to_string()),
                }
            }
        };
        let status = response.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            let after = response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            let body = response.text().unwrap_or_default();
            return Attempt::Retry {
                after,
                error: BackendError::Http {
                    status: status.as_u16(),
                    body,
                },
            };
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Attempt::Fail(BackendError::Http {
                status: status.as_u16(),
                body,
            });
        }
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Fail(BackendError::Transport(e.to_string())),
        };
        let parsed: ChatResponse = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => return Attempt::Fail(BackendError::Protocol(format!("bad response body: {e}"))),
        };
        let mut choices = parsed.choices;
        choices.sort_by_key(|c| c.index.unwrap_or(usize::MAX));
        Attempt::Done(
            choices
                .into_iter()
                .map(|c| c.message.content.unwrap_or_default())
                .collect(),
        )
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError> {
        let body = ChatRequest {
            model: &params.model_name,
            messages,
            temperature: params.effective_temperature(),
            n: params.sample_count,
            max_tokens: params.max_tokens,
        };
        let mut attempt = 0u32;
        loop {
            match self.attempt(&body) {
                Attempt::Done(completions) => {
                    if completions.len() != params.sample_count {
                        return Err(BackendError::Protocol(format!(
                            "asked for {} completion(s), got {}",
                            params.sample_count,
                            completions.len()
                        )));
                    }
                    return Ok(completions);
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry { after, error } => {
                    if attempt >= self.config.max_retries {
                        return Err(match error {
                            BackendError::Http { status: 429, .. } => {
                                BackendError::RateLimited { attempts: attempt + 1 }
                            }
                            other => other,
                        });
                    }
                    let wait = self.backoff(attempt, after);
                    log::warn!("chat request failed ({error}); retrying in {wait:?}");
                    thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }
}
