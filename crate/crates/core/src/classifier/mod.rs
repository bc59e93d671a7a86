//! Segment classifiers.
//!
//! Every backend maps a batch of texts to one [`CategoryDistribution`] per
//! text, in input order. Four backends ship with the crate: a keyword
//! [`Lexicon`], the trained logistic-regression baseline (see
//! [`crate::evaluation::LrModel`]), ONNX transformer inference
//! ([`TransformerBackend`]) and a [`RemoteBackend`] that calls a running
//! `darkscan serve` instance.

mod distribution;
mod lexicon;
mod remote;
mod tokenizer;
mod transformer;

use thiserror::Error;

use crate::scalar::Scalar;

pub use distribution::{softmax, CategoryDistribution};
pub use lexicon::{Lexicon, LexiconEntry, DEFAULT_LEXICON_JSON};
pub use remote::RemoteBackend;
pub use tokenizer::{Encoding, WordPiece, CLS_TOKEN, PAD_TOKEN, SEP_TOKEN, UNK_TOKEN};
pub use transformer::{ModelArtifacts, ModelConfig, TransformerBackend};

/// Inference batch size used when a caller does not choose one.
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("non-finite score")]
    NonFinite,
    #[error("temperature must be a positive finite number")]
    InvalidTemperature,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("vocabulary lacks marker tokens: {0:?}")]
    VocabMissingMarkers(Vec<String>),
    #[error("cannot load model artifacts: {0}")]
    ArtifactLoad(String),
    #[error("model output has {got} logits, expected 8")]
    ShapeMismatch { got: usize },
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("classification endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("malformed classification response: {0}")]
    MalformedResponse(String),
    #[error("backend returned {got} results for {expected} texts")]
    LengthMismatch { expected: usize, got: usize },
}

/// A classifier that can score text segments.
///
/// Implementations are read-only after construction and may be shared
/// between threads.
pub trait ClassifierBackend<F: Scalar = f64>: Send + Sync {
    fn name(&self) -> &str;

    /// Classifies `texts`; the output has the same length and order.
    fn classify_batch(&self, texts: &[String]) -> Result<Vec<CategoryDistribution<F>>, ClassifyError>;
}

impl<F: Scalar, B: ClassifierBackend<F> + ?Sized> ClassifierBackend<F> for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn classify_batch(&self, texts: &[String]) -> Result<Vec<CategoryDistribution<F>>, ClassifyError> {
        (**self).classify_batch(texts)
    }
}

impl<F: Scalar, B: ClassifierBackend<F> + ?Sized> ClassifierBackend<F> for std::sync::Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn classify_batch(&self, texts: &[String]) -> Result<Vec<CategoryDistribution<F>>, ClassifyError> {
        (**self).classify_batch(texts)
    }
}

/// Runs `backend` over `texts` in chunks of `batch_size`, checking that each
/// chunk comes back complete.
pub fn classify_all<F: Scalar, B: ClassifierBackend<F> + ?Sized>(
    backend: &B,
    texts: &[String],
    batch_size: usize,
) -> Result<Vec<CategoryDistribution<F>>, ClassifyError> {
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(batch_size.max(1)) {
        let dists = backend.classify_batch(chunk)?;
        if dists.len() != chunk.len() {
            return Err(ClassifyError::LengthMismatch {
                expected: chunk.len(),
                got: dists.len(),
            });
        }
        out.extend(dists);
    }
    Ok(out)
}
