//! Page → segments → distributions → flags → site report.

use crate::classifier::{classify_all, ClassifierBackend, DEFAULT_BATCH_SIZE};
use crate::detection::{aggregate, AggregationMode, DetectionResult, SiteReport, ThresholdConfig};
use crate::ingest::{extract_segments, PageSource, SegmentationRules, TextSegment};
use crate::scalar::Scalar;
use crate::Error;

/// Runs the full detection pipeline with one backend and one threshold set.
pub struct Scanner<'b, F: Scalar, B: ClassifierBackend<F> + ?Sized> {
    pub backend: &'b B,
    pub thresholds: ThresholdConfig<F>,
    pub rules: SegmentationRules,
    pub mode: AggregationMode,
    pub batch_size: usize,
}

impl<'b, F: Scalar, B: ClassifierBackend<F> + ?Sized> Scanner<'b, F, B> {
    pub fn new(backend: &'b B) -> Self {
        Scanner {
            backend,
            thresholds: ThresholdConfig::default(),
            rules: SegmentationRules::default(),
            mode: AggregationMode::default(),
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }

    pub fn with_thresholds(mut self, thresholds: ThresholdConfig<F>) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn with_mode(mut self, mode: AggregationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn detect_segments(&self, segments: Vec<TextSegment>) -> Result<Vec<DetectionResult<F>>, Error> {
        let texts: Vec<String> = segments.iter().map(|s| s.text.clone()).collect();
        let distributions = classify_all(self.backend, &texts, self.batch_size)?;
        Ok(segments
            .into_iter()
            .zip(distributions)
            .map(|(segment, d)| DetectionResult::new(segment, d, &self.thresholds))
            .collect())
    }

    pub fn detect_page(&self, page: &PageSource) -> Result<Vec<DetectionResult<F>>, Error> {
        let segments = extract_segments(page, &self.rules)?;
        self.detect_segments(segments)
    }

    /// Aggregates already-detected pages of one site.
    pub fn report(&self, site_id: &str, results: &[DetectionResult<F>]) -> Result<SiteReport<F>, Error> {
        Ok(aggregate(site_id, results, self.mode)?)
    }

    pub fn scan_site(&self, site_id: &str, pages: &[PageSource]) -> Result<SiteReport<F>, Error> {
        let mut results = Vec::new();
        for page in pages {
            results.extend(self.detect_page(page)?);
        }
        self.report(site_id, &results)
    }
}
