use std::marker::PhantomData;
use std::time::Duration;

use reqwest::blocking::Client;
use serde::Deserialize;
use serde_json::Value;
use url::Url;

use super::{CategoryDistribution, ClassifierBackend, ClassifyError};
use crate::scalar::Scalar;
use crate::taxonomy::CategoryMap;

/// Client for the `/v1/classify` endpoint of a running service.
///
/// Transport failures (connection refused, timeouts, 5xx) are reported as
/// [`ClassifyError::EndpointUnavailable`]; anything wrong with the payload as
/// [`ClassifyError::MalformedResponse`].
pub struct RemoteBackend<F = f64> {
    endpoint: Url,
    client: Client,
    _scalar: PhantomData<fn() -> F>,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    results: Vec<ResultEntry>,
}

#[derive(Deserialize)]
struct ResultEntry {
    probabilities: Value,
}

impl<F: Scalar> RemoteBackend<F> {
    /// `endpoint` may be the service base URL or the full
    /// `.../v1/classify` URL.
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, ClassifyError> {
        let mut url = Url::parse(endpoint)
            .map_err(|e| ClassifyError::EndpointUnavailable(format!("{endpoint}: {e}")))?;
        if !url.path().ends_with("/v1/classify") {
            let base = url.path().trim_end_matches('/').to_string();
            url.set_path(&format!("{base}/v1/classify"));
        }
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClassifyError::EndpointUnavailable(e.to_string()))?;
        Ok(RemoteBackend {
            endpoint: url,
            client,
            _scalar: PhantomData,
        })
    }

    pub fn endpoint(&self) -> &Url {
        &self.endpoint
    }
}

impl<F: Scalar> ClassifierBackend<F> for RemoteBackend<F> {
    fn name(&self) -> &str {
        "remote"
    }

    fn classify_batch(&self, texts: &[String]) -> Result<Vec<CategoryDistribution<F>>, ClassifyError> {
        let unavailable = |e: reqwest::Error| ClassifyError::EndpointUnavailable(e.to_string());
        let response = self
            .client
            .post(self.endpoint.clone())
            .json(&serde_json::json!({ "texts": texts }))
            .send()
            .map_err(unavailable)?;
        let status = response.status();
        if status.is_server_error() {
            return Err(ClassifyError::EndpointUnavailable(format!("HTTP status {status}")));
        }
        if !status.is_success() {
            return Err(ClassifyError::MalformedResponse(format!("HTTP status {status}")));
        }
        let body = response.text().map_err(unavailable)?;
        let parsed: ClassifyResponse = serde_json::from_str(&body)
            .map_err(|e| ClassifyError::MalformedResponse(e.to_string()))?;
        if parsed.results.len() != texts.len() {
            return Err(ClassifyError::MalformedResponse(format!(
                "{} results for {} texts",
                parsed.results.len(),
                texts.len()
            )));
        }
        parsed
            .results
            .into_iter()
            .map(|entry| {
                let probs: CategoryMap<f64> = serde_json::from_value(entry.probabilities)
                    .map_err(|e| ClassifyError::MalformedResponse(e.to_string()))?;
                CategoryDistribution::new(probs.map(|_, &p| F::lit(p)))
                    .map_err(|e| ClassifyError::MalformedResponse(e.to_string()))
            })
            .collect()
    }
}
