//! Dark-pattern auditing for e-commerce pages.
//!
//! The engine extracts visible text from HTML, classifies each text segment
//! into one of eight categories, flags segments whose dark-pattern
//! probability reaches a per-category threshold, and aggregates the results
//! into per-site reports that can be compared.
//!
//! ```
//! use darkscan_core::{Lexicon, PageSource, Scanner};
//!
//! let lexicon: Lexicon = Lexicon::builtin();
//! let page = PageSource::from_html(
//!     "https://shop.example/",
//!     "<p>Hurry! Only 2 left in stock</p><p>Free returns within 30 days</p>",
//! );
//! let report = Scanner::new(&lexicon).scan_site("shop", &[page]).unwrap();
//! assert_eq!(report.n_segments, 2);
//! assert_eq!(report.flagged.len(), 1);
//! ```
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod classifier;
pub mod detection;
pub mod evaluation;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod taxonomy;

use thiserror::Error;

pub use classifier::{
    classify_all, softmax, ClassifierBackend, ClassifyError, Lexicon, ModelArtifacts, RemoteBackend,
    TransformerBackend,
};
pub use detection::{aggregate, compare_sites, flag, AggregationMode, ComparisonReport, DetectionError};
pub use evaluation::{compute_metrics, load_dataset, split, train_lr_baseline, tune_thresholds, EvalError};
pub use ingest::{extract_segments, fetch_page, FetchConfig, IngestError, PageSource, SegmentationRules, TextSegment};
pub use pipeline::Scanner;
pub use report::{render_comparison, render_report, ReportDocument, ReportError, ReportFormat};
pub use scalar::Scalar;
pub use taxonomy::{parse_label, Category, CategoryMap, TaxonomyError};

pub type Distribution = classifier::CategoryDistribution<f64>;
pub type Thresholds = detection::ThresholdConfig<f64>;
pub type Detection = detection::DetectionResult<f64>;
pub type Report = detection::SiteReport<f64>;
pub type LrBaseline = evaluation::LrModel<f64>;
pub type Metrics = evaluation::EvalMetrics;

/// Any error the engine can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
