//! Remote HTTP backend speaking the common chat-completion wire format.
//!
//! Request: `{"model", "messages": [{"role", "content"}], "temperature",
//! "max_tokens"}`. Response: `{"choices": [{"message": {"content"}}]}` with
//! an optional `usage` object. Transient failures (HTTP 429, 5xx, transport
//! errors) are retried on a jittered exponential backoff, honoring a numeric
//! `Retry-After` header; auth failures and other 4xx fail immediately.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Deserialize;

use super::{
    BackendCounters, BackendError, Completion, CompletionBackend, CompletionRequest, CounterCell,
    RetryPolicy, Usage,
};

pub(crate) struct RemoteOptions {
    pub endpoint: String,
    pub model: String,
    pub credential_env: Option<String>,
    pub headers: BTreeMap<String, String>,
    pub requests_per_second: Option<f64>,
    pub max_concurrency: Option<u32>,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

/// Simple token bucket; burst capacity of one second's worth of requests.
struct RateLimiter {
    rps: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    fn new(rps: f64) -> Self {
        Self { rps, state: Mutex::new((rps.max(1.0), Instant::now())) }
    }

    fn take(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let (ref mut tokens, ref mut last) = *state;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.rps)
                    .min(self.rps.max(1.0));
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / self.rps)
            };
            std::thread::sleep(wait);
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct ConcurrencyCap {
    available: Mutex<u32>,
    signal: Condvar,
}

impl ConcurrencyCap {
    fn new(limit: u32) -> Self {
        Self { available: Mutex::new(limit.max(1)), signal: Condvar::new() }
    }

    fn acquire(&self) -> CapGuard<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.signal.wait(available).unwrap();
        }
        *available -= 1;
        CapGuard { cap: self }
    }
}

struct CapGuard<'a> {
    cap: &'a ConcurrencyCap,
}

impl Drop for CapGuard<'_> {
    fn drop(&mut self) {
        *self.cap.available.lock().unwrap() += 1;
        self.cap.signal.notify_one();
    }
}

pub struct RemoteBackend {
    id: String,
    endpoint: String,
    model: String,
    bearer: Option<String>,
    headers: BTreeMap<String, String>,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    cap: Option<ConcurrencyCap>,
    counters: CounterCell,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

impl RemoteBackend {
    pub(crate) fn new(options: RemoteOptions) -> Result<Self, BackendError> {
        let bearer = match &options.credential_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| BackendError::MissingCredential { var: var.clone() })?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(options.timeout_secs))
            .build()
            .map_err(|e| BackendError::InvalidConfig { detail: e.to_string() })?;
        Ok(Self {
            id: format!("remote:{}", options.model),
            endpoint: options.endpoint,
            model: options.model,
            bearer,
            headers: options.headers,
            client,
            retry: options.retry,
            limiter: options.requests_per_second.map(RateLimiter::new),
            cap: options.max_concurrency.map(ConcurrencyCap::new),
            counters: CounterCell::default(),
        })
    }

    fn backoff(&self, attempt: u32, retry_after: Option<u64>) -> Duration {
        let exp = self.retry.base_delay_ms as f64 * self.retry.factor.powi(attempt as i32 - 1);
        let mut ms = exp.min(self.retry.max_delay_ms as f64);
        if self.retry.jitter {
            // Equal jitter: half fixed, half uniform. Backoff timing is not
            // part of any reproducibility contract, so thread_rng is fine.
            ms = ms / 2.0 + rand::thread_rng().gen::<f64>() * ms / 2.0;
        }
        if let Some(secs) = retry_after {
            ms = ms.max(secs as f64 * 1000.0);
        }
        Duration::from_millis(ms as u64)
    }
}

impl CompletionBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        self.counters.call();
        let _guard = self.cap.as_ref().map(|c| c.acquire());

        let body = serde_json::json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_output_tokens,
        });

        let mut last_error = String::new();
        let mut retry_after: Option<u64> = None;
        for attempt in 1..=self.retry.max_attempts {
            if attempt > 1 {
                self.counters.retry();
                std::thread::sleep(self.backoff(attempt - 1, retry_after.take()));
            }
            if let Some(limiter) = &self.limiter {
                limiter.take();
            }

            let mut req = self.client.post(&self.endpoint).json(&body);
            if let Some(token) = &self.bearer {
                req = req.header("authorization", format!("Bearer {token}"));
            }
            for (k, v) in &self.headers {
                req = req.header(k.as_str(), v.as_str());
            }

            let response = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    last_error = format!("transport: {e}");
                    continue;
                }
            };

            let status = response.status();
            if status.as_u16() == 401 || status.as_u16() == 403 {
                self.counters.failure();
                return Err(BackendError::Auth { status: status.as_u16() });
            }
            if status.as_u16() == 429 || status.is_server_error() {
                retry_after = response
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|s| s.trim().parse::<u64>().ok());
                last_error = format!("HTTP {}", status.as_u16());
                continue;
            }
            if !status.is_success() {
                self.counters.failure();
                let detail = response.text().unwrap_or_default();
                return Err(BackendError::Http { status: status.as_u16(), detail });
            }

            let wire: WireResponse = match response.json() {
                Ok(w) => w,
                Err(e) => {
                    self.counters.failure();
                    return Err(BackendError::MalformedResponse { detail: e.to_string() });
                }
            };
            let Some(choice) = wire.choices.into_iter().next() else {
                self.counters.failure();
                return Err(BackendError::MalformedResponse { detail: "empty choices".into() });
            };
            let usage = match wire.usage {
                Some(u) => Usage {
                    prompt_tokens: u.prompt_tokens,
                    completion_tokens: u.completion_tokens,
                    estimated: false,
                },
                None => Usage {
                    prompt_tokens: Some(
                        request
                            .messages
                            .iter()
                            .map(|m| crate::tokens::estimate_tokens(&m.content))
                            .sum(),
                    ),
                    completion_tokens: Some(crate::tokens::estimate_tokens(
                        &choice.message.content,
                    )),
                    estimated: true,
                },
            };
            return Ok(Completion { text: choice.message.content, usage });
        }

        self.counters.failure();
        Err(BackendError::Exhausted { attempts: self.retry.max_attempts, last: last_error })
    }

    fn counters(&self) -> BackendCounters {
        self.counters.snapshot()
    }
}
