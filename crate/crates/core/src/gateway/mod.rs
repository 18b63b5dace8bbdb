//! Provider-agnostic chat completion with retries, a usage ledger, and cost
//! accounting.
//!
//! Every completion goes through [`Gateway::complete`], which applies the
//! retry policy, bounds concurrency, and appends one [`LedgerEntry`] per
//! logical call, successful or not.

pub mod cost;
pub mod http;
pub mod mock;

use std::ops::Add;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::config::Config;
pub use cost::{account_cost, CostError, ModelPrice, PriceTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(
        model_id: impl Into<String>,
        system: impl Into<String>,
        user: impl Into<String>,
        temperature: f64,
    ) -> Self {
        Self {
            model_id: model_id.into(),
            system: system.into(),
            user: user.into(),
            temperature,
            max_output_tokens: None,
        }
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.user.is_empty() {
            return Err(GatewayError::InvalidRequest("empty user prompt".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Add for Usage {
    type Output = Usage;

    fn add(self, rhs: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

/// Outcome of a single provider attempt.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ProviderError {
    /// Worth retrying: rate limits, 5xx, dropped connections.
    #[error("transient: {0}")]
    Transient(String),
    #[error("credentials rejected: {0}")]
    Auth(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("provider rejected credentials: {0}")]
    Auth(String),
    #[error("provider failed after {attempts} attempt(s): {last}")]
    Provider { attempts: u32, last: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// One chat-completion backend. Implementations make a single attempt; the
/// gateway owns retries.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl RetryPolicy {
    pub fn from_config(config: &Config) -> Self {
        Self {
            max_attempts: config.gateway_max_attempts,
            base: Duration::from_millis(config.backoff_base_ms),
            cap: Duration::from_millis(config.backoff_cap_ms),
        }
    }

    /// Delay after the `failures`-th consecutive failure (1-based).
    pub fn delay(&self, failures: u32) -> Duration {
        let factor = 1u32.checked_shl(failures.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.cap)
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base: Duration::from_secs(1),
            cap: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub seq: u64,
    pub model_id: String,
    pub usage: Usage,
    pub cost: Decimal,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    provider: Arc<dyn Provider>,
    prices: PriceTable,
    policy: RetryPolicy,
    sleeper: Sleeper,
    ledger: Mutex<Vec<LedgerEntry>>,
    permits: Semaphore,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.name())
            .field("policy", &self.policy)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn Provider>, prices: PriceTable, policy: RetryPolicy, concurrency: usize) -> Self {
        Self {
            provider,
            prices,
            policy,
            sleeper: Arc::new(std::thread::sleep),
            ledger: Mutex::new(Vec::new()),
            permits: Semaphore {
                free: Mutex::new(concurrency.max(1)),
                cv: Condvar::new(),
            },
        }
    }

    pub fn from_config(provider: Arc<dyn Provider>, prices: PriceTable, config: &Config) -> Self {
        Self::new(provider, prices, RetryPolicy::from_config(config), config.gateway_concurrency)
    }

    /// Replaces the backoff sleep, e.g. with a recorder in tests.
    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    /// Seeds the ledger with entries from an earlier session of the same run.
    pub fn with_ledger(self, entries: Vec<LedgerEntry>) -> Self {
        *self.ledger.lock().unwrap_or_else(|e| e.into_inner()) = entries;
        self
    }

    pub fn provider(&self) -> &Arc<dyn Provider> {
        &self.provider
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        request.validate()?;
        if self.prices.get(&request.model_id).is_none() {
            return Err(CostError::UnknownModel(request.model_id.clone()).into());
        }
        let _permit = self.permits.acquire();
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            match self.provider.complete(request) {
                Ok(c) => break Ok(c),
                Err(ProviderError::Auth(m)) => break Err(GatewayError::Auth(m)),
                Err(ProviderError::Fatal(m)) => {
                    break Err(GatewayError::Provider { attempts, last: m })
                }
                Err(ProviderError::Transient(m)) => {
                    if attempts >= self.policy.max_attempts {
                        break Err(GatewayError::Provider { attempts, last: m });
                    }
                    log::warn!("{}: attempt {attempts} failed: {m}", self.provider.name());
                    (self.sleeper)(self.policy.delay(attempts));
                }
            }
        };
        let usage = outcome.as_ref().map(|c| c.usage).unwrap_or_default();
        let cost = account_cost(usage, &request.model_id, &self.prices)?;
        let mut ledger = self.ledger.lock().unwrap_or_else(|e| e.into_inner());
        let seq = ledger.len() as u64;
        ledger.push(LedgerEntry {
            seq,
            model_id: request.model_id.clone(),
            usage,
            cost,
            attempts,
            error: outcome.as_ref().err().map(|e| e.to_string()),
        });
        outcome
    }

    pub fn ledger(&self) -> Vec<LedgerEntry> {
        self.ledger.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn ledger_len(&self) -> usize {
        self.ledger.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn total_cost(&self) -> Decimal {
        self.cost_since(0)
    }

    /// Sum of costs for ledger entries at index `start` and later.
    pub fn cost_since(&self, start: usize) -> Decimal {
        let ledger = self.ledger.lock().unwrap_or_else(|e| e.into_inner());
        ledger.iter().skip(start).map(|e| e.cost).sum()
    }
}

pub const TRUNCATION_MARKER: &str = "\n[... truncated ...]";

/// Cuts `text` to at most `budget` characters, dropping from the tail and
/// ending the result with [`TRUNCATION_MARKER`].
pub fn truncate_tail(text: &str, budget: usize) -> String {
    if text.chars().count() <= budget {
        return text.to_string();
    }
    let keep = budget.saturating_sub(TRUNCATION_MARKER.chars().count());
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(TRUNCATION_MARKER);
    out
}

/// Rough token estimate used when a backend reports no usage.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        script: Mutex<Vec<Result<Completion, ProviderError>>>,
        calls: AtomicUsize,
    }

    impl Provider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn complete(&self, _: &ChatRequest) -> Result<Completion, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.script.lock().unwrap().remove(0)
        }
    }

    fn ok(text: &str) -> Result<Completion, ProviderError> {
        Ok(Completion {
            text: text.into(),
            usage: Usage { prompt_tokens: 10, completion_tokens: 5 },
        })
    }

    fn gateway(script: Vec<Result<Completion, ProviderError>>) -> (Gateway, Arc<Flaky>, Arc<Mutex<Vec<Duration>>>) {
        let p = Arc::new(Flaky { script: Mutex::new(script), calls: AtomicUsize::new(0) });
        let slept = Arc::new(Mutex::new(Vec::new()));
        let s2 = slept.clone();
        let g = Gateway::new(p.clone(), PriceTable::builtin(), RetryPolicy::default(), 2)
            .with_sleeper(Arc::new(move |d| s2.lock().unwrap().push(d)));
        (g, p, slept)
    }

    fn req() -> ChatRequest {
        ChatRequest::new("mock", "sys", "hello", 0.8)
    }

    #[test]
    fn rate_limited_twice_then_success() {
        let (g, p, slept) = gateway(vec![
            Err(ProviderError::Transient("429".into())),
            Err(ProviderError::Transient("429".into())),
            ok("done"),
        ]);
        assert_eq!(g.complete(&req()).unwrap().text, "done");
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        assert_eq!(g.ledger()[0].attempts, 3);
        assert_eq!(*slept.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
    }

    #[test]
    fn auth_error_is_not_retried() {
        let (g, p, _) = gateway(vec![Err(ProviderError::Auth("401".into())), ok("never")]);
        assert!(matches!(g.complete(&req()), Err(GatewayError::Auth(_))));
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
        assert_eq!(g.ledger()[0].attempts, 1);
    }

    #[test]
    fn retries_stop_at_cap() {
        let (g, p, slept) = gateway((0..6).map(|_| Err(ProviderError::Transient("503".into()))).collect());
        assert!(matches!(g.complete(&req()), Err(GatewayError::Provider { attempts: 5, .. })));
        assert_eq!(p.calls.load(Ordering::SeqCst), 5);
        assert_eq!(slept.lock().unwrap().len(), 4);
    }

    #[test]
    fn backoff_schedule_doubles_to_cap() {
        let p = RetryPolicy::default();
        let secs: Vec<u64> = (1..=7).map(|k| p.delay(k).as_secs()).collect();
        assert_eq!(secs, vec![1, 2, 4, 8, 16, 30, 30]);
    }

    #[test]
    fn invalid_requests_never_reach_the_provider() {
        let (g, p, _) = gateway(vec![]);
        let mut r = req();
        r.temperature = 2.5;
        assert!(matches!(g.complete(&r), Err(GatewayError::InvalidRequest(_))));
        r.temperature = 1.0;
        r.user.clear();
        assert!(matches!(g.complete(&r), Err(GatewayError::InvalidRequest(_))));
        r.user = "x".into();
        r.model_id = "unpriced".into();
        assert!(matches!(g.complete(&r), Err(GatewayError::Cost(_))));
        assert_eq!(p.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn ledger_total_is_sum_of_entries() {
        let (g, _, _) = gateway(vec![ok("a"), ok("b"), Err(ProviderError::Fatal("x".into()))]);
        g.complete(&req()).unwrap();
        g.complete(&req()).unwrap();
        assert!(g.complete(&req()).is_err());
        let ledger = g.ledger();
        assert_eq!(ledger.len(), 3);
        assert_eq!(ledger[2].cost, Decimal::ZERO);
        let sum: Decimal = ledger.iter().map(|e| e.cost).sum();
        assert_eq!(g.total_cost(), sum);
        // 10 in at 1.00/M + 5 out at 2.00/M, twice
        assert_eq!(sum, Decimal::new(40, 6));
        assert_eq!(g.cost_since(1), Decimal::new(20, 6));
    }

    #[test]
    fn truncation_keeps_head_and_marks() {
        let text = "x".repeat(400_000);
        let t = truncate_tail(&text, 100_000);
        assert_eq!(t.chars().count(), 100_000);
        assert!(t.ends_with(TRUNCATION_MARKER));
        assert_eq!(truncate_tail("short", 100), "short");
    }
}
