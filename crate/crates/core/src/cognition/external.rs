use std::sync::Mutex;
use std::time::Duration;

use super::{CognitionEngine, CognitionError, CognitionRequest, CognitionResponse};

/// Environment variable holding the external service address (`host:port`
/// or a full `http://` URL).
pub const ADDR_ENV: &str = "ACE_COGNITION_ADDR";

/// HTTP adapter: POSTs the request document to `<addr>/evaluate` and expects
/// a response document back. Calls are serialized per adapter.
pub struct ExternalEngine {
    url: String,
    agent: ureq::Agent,
    lock: Mutex<()>,
}

impl ExternalEngine {
    pub fn new(addr: &str, timeout: Duration) -> Self {
        let base = if addr.starts_with("http://") || addr.starts_with("https://") {
            addr.trim_end_matches('/').to_string()
        } else {
            format!("http://{}", addr.trim_end_matches('/'))
        };
        ExternalEngine {
            url: format!("{base}/evaluate"),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            lock: Mutex::new(()),
        }
    }

    pub fn from_env(timeout: Duration) -> Result<Self, CognitionError> {
        let addr = std::env::var(ADDR_ENV)
            .map_err(|_| CognitionError::Configuration(format!("{ADDR_ENV} is not set")))?;
        Ok(ExternalEngine::new(&addr, timeout))
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl CognitionEngine for ExternalEngine {
    fn name(&self) -> &str {
        "external"
    }

    fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError> {
        request.validate()?;
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let body = serde_json::to_value(request).expect("requests serialize");
        let response = self
            .agent
            .post(&self.url)
            .send_json(body)
            .map_err(|e| CognitionError::EngineUnavailable(e.to_string()))?;
        let doc: CognitionResponse =
            response
                .into_json()
                .map_err(|e| CognitionError::EngineUnavailable(format!("unreadable response: {e}")))?;
        if doc.kind() != request.kind {
            return Err(CognitionError::WrongKind {
                expected: request.kind,
                got: doc.kind(),
            });
        }
        Ok(doc)
    }
}

/// Uses `fallback` whenever `primary` is unavailable.
pub struct WithFallback<P, F> {
    pub primary: P,
    pub fallback: F,
}

impl<P: CognitionEngine, F: CognitionEngine> CognitionEngine for WithFallback<P, F> {
    fn name(&self) -> &str {
        self.primary.name()
    }

    fn evaluate(&self, request: &CognitionRequest) -> Result<CognitionResponse, CognitionError> {
        match self.primary.evaluate(request) {
            Err(CognitionError::EngineUnavailable(_)) => self.fallback.evaluate(request),
            other => other,
        }
    }
}
