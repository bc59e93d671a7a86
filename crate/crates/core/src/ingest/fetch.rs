use std::io::Read;
use std::time::{Duration, SystemTime};

use encoding_rs::Encoding;
use reqwest::blocking::Client;
use reqwest::header::{CONTENT_LENGTH, CONTENT_TYPE};
use robotxt::{AccessResult, Robots};
use url::Url;

use super::{IngestError, Origin, PageSource, DEFAULT_TIMEOUT};

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub timeout: Duration,
    pub user_agent: String,
    pub respect_robots: bool,
    pub max_bytes: u64,
    /// Endpoint of an external renderer (headless browser). When set, the page
    /// is obtained by `POST {"url": ...}` to this endpoint, which must answer
    /// with the rendered HTML.
    pub renderer_hook: Option<String>,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            timeout: DEFAULT_TIMEOUT,
            user_agent: concat!("darkscan/", env!("CARGO_PKG_VERSION")).to_string(),
            respect_robots: true,
            max_bytes: 8 * 1024 * 1024,
            renderer_hook: None,
        }
    }
}

fn network(url: &str, message: impl ToString) -> IngestError {
    IngestError::Network {
        url: url.to_string(),
        message: message.to_string(),
    }
}

fn robots_allow(client: &Client, url: &Url, user_agent: &str) -> bool {
    let mut robots_url = url.clone();
    robots_url.set_path("/robots.txt");
    robots_url.set_query(None);
    robots_url.set_fragment(None);
    let robots = match client.get(robots_url.as_str()).send() {
        Ok(resp) if resp.status().is_success() => match resp.bytes() {
            Ok(body) => Robots::from_access(AccessResult::Successful(&body), user_agent),
            Err(_) => Robots::from_access(AccessResult::Unreachable, user_agent),
        },
        Ok(resp) if resp.status().is_client_error() => {
            Robots::from_access(AccessResult::Unavailable, user_agent)
        }
        _ => Robots::from_access(AccessResult::Unreachable, user_agent),
    };
    robots.is_absolute_allowed(url)
}

fn sniff_meta_charset(head: &[u8]) -> Option<&'static Encoding> {
    let prefix = String::from_utf8_lossy(&head[..head.len().min(2048)]).to_ascii_lowercase();
    let at = prefix.find("charset=")?;
    let label: String = prefix[at + "charset=".len()..]
        .trim_start_matches(['"', '\''])
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '_')
        .collect();
    Encoding::for_label(label.as_bytes())
}

fn decode(body: &[u8], content_type: Option<&str>) -> String {
    let from_header = content_type.and_then(|ct| {
        let ct = ct.to_ascii_lowercase();
        let at = ct.find("charset=")?;
        let label = ct[at + "charset=".len()..].trim_matches(['"', '\'', ' ']);
        let label = label.split(';').next().unwrap_or(label);
        Encoding::for_label(label.as_bytes())
    });
    let encoding = from_header
        .or_else(|| sniff_meta_charset(body))
        .unwrap_or(encoding_rs::UTF_8);
    let (text, _, _) = encoding.decode(body);
    text.into_owned()
}

/// Downloads one page as HTML.
///
/// robots.txt is honored when `cfg.respect_robots` is set: a missing file
/// (4xx) allows everything, an unreachable one (5xx, network failure)
/// disallows everything.
pub fn fetch_page(url: &str, cfg: &FetchConfig) -> Result<PageSource, IngestError> {
    let parsed = Url::parse(url).map_err(|_| IngestError::InvalidUrl(url.to_string()))?;
    if !matches!(parsed.scheme(), "http" | "https") || parsed.host_str().is_none() {
        return Err(IngestError::InvalidUrl(url.to_string()));
    }
    let client = Client::builder()
        .timeout(cfg.timeout)
        .user_agent(cfg.user_agent.clone())
        .build()
        .map_err(|e| network(url, e))?;

    if cfg.respect_robots && !robots_allow(&client, &parsed, &cfg.user_agent) {
        return Err(IngestError::RobotsDisallowed(url.to_string()));
    }

    let request = match &cfg.renderer_hook {
        Some(hook) => client.post(hook).json(&serde_json::json!({ "url": url })),
        None => client.get(parsed.as_str()),
    };
    let response = request.send().map_err(|e| network(url, e))?;
    if !response.status().is_success() {
        return Err(network(url, format!("HTTP status {}", response.status())));
    }
    let content_type = response
        .headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    if let Some(ct) = &content_type {
        let mime = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        if !(mime == "text/html" || mime == "application/xhtml+xml") {
            return Err(IngestError::NotHtml {
                url: url.to_string(),
                content_type: ct.clone(),
            });
        }
    }
    let declared_len = response
        .headers()
        .get(CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok());
    if declared_len.is_some_and(|n| n > cfg.max_bytes) {
        return Err(IngestError::TooLarge {
            url: url.to_string(),
            limit: cfg.max_bytes,
        });
    }
    let mut body = Vec::new();
    response
        .take(cfg.max_bytes + 1)
        .read_to_end(&mut body)
        .map_err(|e| network(url, e))?;
    if body.len() as u64 > cfg.max_bytes {
        return Err(IngestError::TooLarge {
            url: url.to_string(),
            limit: cfg.max_bytes,
        });
    }
    if body.is_empty() {
        return Err(network(url, "empty body"));
    }
    Ok(PageSource {
        url: url.to_string(),
        html: decode(&body, content_type.as_deref()),
        fetched_at: SystemTime::now(),
        origin: Origin::Live,
    })
}
