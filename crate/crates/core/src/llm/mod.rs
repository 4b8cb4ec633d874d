// SPDX-License-Identifier: Apache-2.0

//! Language-model access: prompts, reply parsing, providers and the
//! rate-limited gateway.

pub mod compress;
pub mod prompt;
pub mod provider;
pub mod response;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use compress::{approx_tokens, compress_context, conversation_tokens};
pub use prompt::{
    build_initial_prompt, build_initial_prompt_for, build_refinement_prompt, build_refinement_prompt_for,
    ArtifactRole, TruncationPolicy,
};
pub use provider::{
    HttpConfig, HttpProvider, Message, Provider, ProviderError, RecordingProvider, ReplayProvider, Role,
    ScriptedProvider, Usage,
};
pub use response::{
    apply_commands, parse_generation, parse_refinement, CommandUpdate, GenerationResponse, RefinementResponse,
    ResponseError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub temperature: f64,
    /// Total attempts per call, counting re-asks after unparseable replies.
    pub max_attempts: u32,
    /// Requests per minute; `None` disables throttling.
    pub requests_per_minute: Option<f64>,
    /// Upper bound on tokens spent across all calls.
    pub token_budget: Option<u64>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            temperature: 0.0,
            max_attempts: 3,
            requests_per_minute: None,
            token_budget: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("reply still unparseable after {attempts} attempts: {last}")]
    Unparseable { attempts: u32, last: ResponseError },
    #[error("token budget exhausted ({used} of {budget} used)")]
    BudgetExhausted { used: u64, budget: u64 },
}

/// Spaces requests evenly at a fixed rate, with no burst allowance.
pub struct RateLimiter {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(rpm: f64) -> Self {
        let capacity = 1.0;
        RateLimiter {
            rate: rpm / 60.0,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.rate).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// A parsed reply together with the raw text that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange<T> {
    pub value: T,
    pub text: String,
    /// Attempts used, including the successful one.
    pub attempts: u32,
}

const CORRECTIVE_SUFFIX: &str = "Your previous reply could not be used";

fn corrective_message(err: &ResponseError) -> Message {
    Message::user(format!(
        "{CORRECTIVE_SUFFIX}: {err}. Reply again with only the JSON object in the required structure."
    ))
}

/// Sends requests and parses replies. Forks share the provider, rate
/// limiter and token budget but count their own calls.
pub struct Gateway {
    provider: Arc<dyn Provider>,
    cfg: GatewayConfig,
    limiter: Option<Arc<RateLimiter>>,
    calls: AtomicU64,
    total_calls: Arc<AtomicU64>,
    tokens: Arc<AtomicU64>,
}

impl Gateway {
    pub fn new(provider: Box<dyn Provider>, cfg: GatewayConfig) -> Self {
        let limiter = cfg.requests_per_minute.map(|r| Arc::new(RateLimiter::per_minute(r)));
        Gateway {
            provider: Arc::from(provider),
            cfg,
            limiter,
            calls: AtomicU64::new(0),
            total_calls: Arc::new(AtomicU64::new(0)),
            tokens: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn fork(&self) -> Gateway {
        Gateway {
            provider: self.provider.clone(),
            cfg: self.cfg.clone(),
            limiter: self.limiter.clone(),
            calls: AtomicU64::new(0),
            total_calls: self.total_calls.clone(),
            tokens: self.tokens.clone(),
        }
    }

    /// Provider requests sent through this handle.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Provider requests sent through this handle and all its forks.
    pub fn total_calls(&self) -> u64 {
        self.total_calls.load(Ordering::Relaxed)
    }

    pub fn tokens_used(&self) -> u64 {
        self.tokens.load(Ordering::Relaxed)
    }

    fn check_budget(&self) -> Result<(), GatewayError> {
        match self.cfg.token_budget {
            Some(budget) if self.tokens_used() >= budget => Err(GatewayError::BudgetExhausted {
                used: self.tokens_used(),
                budget,
            }),
            _ => Ok(()),
        }
    }

    /// Sends `messages` and parses the reply. An unparseable reply is shown
    /// back to the model with a corrective note, up to `max_attempts` total.
    pub fn call<T>(
        &self,
        messages: &[Message],
        parse: impl Fn(&str) -> Result<T, ResponseError>,
    ) -> Result<Exchange<T>, GatewayError> {
        let mut convo = messages.to_vec();
        let max = self.cfg.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.check_budget()?;
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.total_calls.fetch_add(1, Ordering::Relaxed);
            let c = self.provider.complete(&convo, self.cfg.temperature)?;
            let spent = if c.usage == Usage::default() {
                conversation_tokens(&convo) + approx_tokens(&c.text)
            } else {
                c.usage.prompt_tokens + c.usage.completion_tokens
            };
            self.tokens.fetch_add(spent, Ordering::Relaxed);
            match parse(&c.text) {
                Ok(value) => {
                    return Ok(Exchange {
                        value,
                        text: c.text,
                        attempts: attempt,
                    })
                }
                Err(e) if attempt < max => {
                    tracing::warn!(attempt, error = %e, "unparseable model reply, asking again");
                    convo.push(Message::assistant(c.text));
                    convo.push(corrective_message(&e));
                }
                Err(e) => return Err(GatewayError::Unparseable { attempts: attempt, last: e }),
            }
        }
    }
}
