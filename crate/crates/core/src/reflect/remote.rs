//! Chat-completion clients for the generator and oracle interfaces.
//!
//! Both talk to an OpenAI-compatible `/chat/completions` endpoint.

use std::env;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{
    generator_prompt, oracle_prompt, parse_oracle_response, parse_plan_text, Attempt, CommonsenseOracle,
    GeneratorError, OracleError, PlanGenerator,
};
use crate::model::{Constraint, Plan, PlanRequest};

pub const ENDPOINT_VAR: &str = "DAYPLAN_LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "DAYPLAN_LLM_API_KEY";
pub const MODEL_VAR: &str = "DAYPLAN_LLM_MODEL";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Full URL of the chat completions route.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub temperature: f64,
}

impl RemoteConfig {
    /// Reads the endpoint, key and model from the environment. Returns
    /// `None` when no endpoint is set.
    pub fn from_env() -> Option<Self> {
        let endpoint = env::var(ENDPOINT_VAR).ok().filter(|s| !s.trim().is_empty())?;
        Some(RemoteConfig {
            endpoint,
            api_key: env::var(API_KEY_VAR).ok().filter(|s| !s.is_empty()),
            model: env::var(MODEL_VAR).unwrap_or_else(|_| "gpt-4".to_string()),
            timeout: Duration::from_secs(60),
            temperature: 0.0,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

struct Client {
    cfg: RemoteConfig,
    http: reqwest::blocking::Client,
}

impl Client {
    fn new(cfg: RemoteConfig) -> Result<Self, String> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Client { cfg, http })
    }

    fn complete(&self, prompt: &str) -> Result<String, String> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut rq = self.http.post(&self.cfg.endpoint).json(&body);
        if let Some(key) = &self.cfg.api_key {
            rq = rq.bearer_auth(key);
        }
        let resp = rq.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(format!("{status}: {}", text.chars().take(200).collect::<String>()));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| e.to_string())?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "response has no choices".to_string())
    }
}

/// Asks a remote model for a whole plan, passing the violation feedback of
/// earlier attempts in the prompt.
pub struct RemoteGenerator {
    client: Client,
}

impl RemoteGenerator {
    pub fn new(cfg: RemoteConfig) -> Result<Self, GeneratorError> {
        Client::new(cfg).map(|client| RemoteGenerator { client }).map_err(GeneratorError)
    }

    pub fn from_env() -> Result<Self, GeneratorError> {
        let cfg = RemoteConfig::from_env().ok_or_else(|| GeneratorError(format!("{ENDPOINT_VAR} is not set")))?;
        Self::new(cfg)
    }
}

impl PlanGenerator for RemoteGenerator {
    fn generate(&self, req: &PlanRequest, history: &[Attempt]) -> Result<Plan, GeneratorError> {
        let text = self.client.complete(&generator_prompt(req, history)).map_err(GeneratorError)?;
        Ok(parse_plan_text(&text))
    }
}

/// Asks a remote model for typical timing of a single event.
pub struct RemoteOracle {
    client: Client,
}

impl RemoteOracle {
    pub fn new(cfg: RemoteConfig) -> Result<Self, OracleError> {
        Client::new(cfg).map(|client| RemoteOracle { client }).map_err(OracleError)
    }

    pub fn from_env() -> Result<Self, OracleError> {
        let cfg = RemoteConfig::from_env().ok_or_else(|| OracleError(format!("{ENDPOINT_VAR} is not set")))?;
        Self::new(cfg)
    }
}

impl CommonsenseOracle for RemoteOracle {
    fn suggest(&self, event: &str) -> Result<Vec<Constraint>, OracleError> {
        let text = self.client.complete(&oracle_prompt(event)).map_err(OracleError)?;
        Ok(parse_oracle_response(event, &text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_endpoint_is_an_error() {
        let cfg = RemoteConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            api_key: None,
            model: "m".into(),
            timeout: Duration::from_secs(2),
            temperature: 0.0,
        };
        let oracle = RemoteOracle::new(cfg).unwrap();
        assert!(oracle.suggest("lunch").is_err());
    }
}
