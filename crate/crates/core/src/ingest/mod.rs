//! Page acquisition and visible-text segmentation.
//!
//! A page is turned into an ordered list of [`TextSegment`]s, one per
//! block-level run of visible text. Segments are the unit of classification.

mod extract;
mod fetch;
mod normalize;

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_segments, SegmentationRules};
pub use fetch::{fetch_page, FetchConfig};
pub use normalize::normalize_text;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("robots.txt disallows {0}")]
    RobotsDisallowed(String),
    #[error("{url} is not HTML (content-type {content_type:?})")]
    NotHtml { url: String, content_type: String },
    #[error("{url} exceeds the {limit}-byte limit")]
    TooLarge { url: String, limit: u64 },
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("cannot parse html: {0}")]
    ParseFailure(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Live,
    File,
}

/// Raw HTML of one page plus where it came from.
#[derive(Debug, Clone)]
pub struct PageSource {
    pub url: String,
    pub html: String,
    pub fetched_at: SystemTime,
    pub origin: Origin,
}

impl PageSource {
    /// Wraps HTML that did not come from a live fetch (files, pre-rendered
    /// output from an external browser, request bodies).
    pub fn from_html(url: impl Into<String>, html: impl Into<String>) -> Self {
        PageSource {
            url: url.into(),
            html: html.into(),
            fetched_at: SystemTime::now(),
            origin: Origin::File,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let html = String::from_utf8_lossy(&bytes).into_owned();
        Ok(PageSource::from_html(path.display().to_string(), html))
    }
}

/// One visible-text line of a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSegment {
    pub segment_id: String,
    pub text: String,
    pub dom_path: String,
    pub order_index: usize,
    pub page_url: String,
}

/// Pages of a corpus laid out as `<root>/<site>/<page>.html`, grouped by site
/// and sorted by name so that scans are reproducible.
pub fn corpus_layout(root: &Path) -> Result<Vec<(String, Vec<PathBuf>)>, IngestError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    let mut sites = Vec::new();
    for entry in std::fs::read_dir(root).map_err(io(root))? {
        let entry = entry.map_err(io(root))?;
        let dir = entry.path();
        if !dir.is_dir() {
            continue;
        }
        let mut pages = Vec::new();
        for page in std::fs::read_dir(&dir).map_err(io(&dir))? {
            let page = page.map_err(io(&dir))?.path();
            let is_html = page
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"));
            if page.is_file() && is_html {
                pages.push(page);
            }
        }
        if pages.is_empty() {
            continue;
        }
        pages.sort();
        sites.push((entry.file_name().to_string_lossy().into_owned(), pages));
    }
    sites.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(sites)
}

pub(crate) const DEFAULT_TIMEOUT: Duration = Duration::from_secs(20);
