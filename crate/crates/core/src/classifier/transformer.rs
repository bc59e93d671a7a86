use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tract_onnx::prelude::*;
use tract_onnx::tract_hir::infer::Factoid;

use super::{softmax, CategoryDistribution, ClassifierBackend, ClassifyError, WordPiece};
use crate::scalar::Scalar;
use crate::taxonomy::{parse_label, Category, CategoryMap};

pub const WEIGHTS_FILE: &str = "weights.onnx";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const LABELS_FILE: &str = "labels.json";
pub const CONFIG_FILE: &str = "config.json";

fn default_max_seq_len() -> usize {
    128
}

fn default_lowercase() -> bool {
    true
}

/// `config.json` of a model directory. Keys other than `max_seq_len` and
/// `lowercase` are kept as free-form metadata (base model, training run...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_max_seq_len")]
    pub max_seq_len: usize,
    #[serde(default = "default_lowercase")]
    pub lowercase: bool,
    #[serde(flatten)]
    pub metadata: Map<String, Value>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_seq_len: default_max_seq_len(),
            lowercase: default_lowercase(),
            metadata: Map::new(),
        }
    }
}

/// A model directory: `weights.onnx`, `vocab.txt` (one token per line, id =
/// line number), `labels.json` (display names in logit order) and
/// `config.json`.
#[derive(Debug, Clone)]
pub struct ModelArtifacts {
    pub dir: PathBuf,
    pub vocab: Vec<String>,
    pub label_order: Vec<Category>,
    pub config: ModelConfig,
}

fn load_err(path: &Path, e: impl std::fmt::Display) -> ClassifyError {
    ClassifyError::ArtifactLoad(format!("{}: {e}", path.display()))
}

impl ModelArtifacts {
    pub fn load(dir: &Path) -> Result<Self, ClassifyError> {
        let vocab_path = dir.join(VOCAB_FILE);
        let vocab: Vec<String> = std::fs::read_to_string(&vocab_path)
            .map_err(|e| load_err(&vocab_path, e))?
            .lines()
            .map(|l| l.trim_end_matches('\r').to_string())
            .collect();

        let labels_path = dir.join(LABELS_FILE);
        let names: Vec<String> = serde_json::from_str(
            &std::fs::read_to_string(&labels_path).map_err(|e| load_err(&labels_path, e))?,
        )
        .map_err(|e| load_err(&labels_path, e))?;
        let label_order = names
            .iter()
            .map(|n| parse_label(n))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| load_err(&labels_path, e))?;
        let mut seen = label_order.clone();
        seen.sort();
        seen.dedup();
        if label_order.len() != Category::COUNT || seen.len() != Category::COUNT {
            return Err(load_err(&labels_path, "labels must list each of the 8 categories once"));
        }

        let config_path = dir.join(CONFIG_FILE);
        let config: ModelConfig = match std::fs::read_to_string(&config_path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| load_err(&config_path, e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => ModelConfig::default(),
            Err(e) => return Err(load_err(&config_path, e)),
        };
        if config.max_seq_len < 8 {
            return Err(load_err(&config_path, "max_seq_len must be at least 8"));
        }
        Ok(ModelArtifacts {
            dir: dir.to_path_buf(),
            vocab,
            label_order,
            config,
        })
    }

    pub fn weights_path(&self) -> PathBuf {
        self.dir.join(WEIGHTS_FILE)
    }

    pub fn tokenizer(&self) -> Result<WordPiece, ClassifyError> {
        WordPiece::new(&self.vocab, self.config.lowercase, self.config.max_seq_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputRole {
    Ids,
    Mask,
    TokenType,
}

/// Sequence classifier exported to ONNX, run with tract.
///
/// The graph takes token ids and an attention mask (optionally token type
/// ids, fed zeros) of shape `[1, max_seq_len]` and yields 8 logits, which are
/// turned into probabilities with a plain softmax and reordered from the
/// artifact label order into canonical order.
pub struct TransformerBackend<F = f64> {
    tokenizer: WordPiece,
    plan: Arc<TypedRunnableModel>,
    inputs: Vec<(InputRole, DatumType)>,
    label_order: Vec<Category>,
    _scalar: PhantomData<fn() -> F>,
}

fn infer_err(e: impl std::fmt::Display) -> ClassifyError {
    ClassifyError::Inference(e.to_string())
}

impl<F: Scalar> TransformerBackend<F> {
    pub fn load(artifacts: &ModelArtifacts) -> Result<Self, ClassifyError> {
        let tokenizer = artifacts.tokenizer()?;
        let weights = artifacts.weights_path();
        let seq_len = artifacts.config.max_seq_len;
        let mut model = tract_onnx::onnx()
            .model_for_path(&weights)
            .map_err(|e| load_err(&weights, e))?;

        let outlets = model.input_outlets().map_err(|e| load_err(&weights, e))?.to_vec();
        let mut inputs = Vec::with_capacity(outlets.len());
        for (i, outlet) in outlets.iter().enumerate() {
            let name = model.node(outlet.node).name.to_ascii_lowercase();
            let role = if name.contains("mask") {
                InputRole::Mask
            } else if name.contains("type") || name.contains("segment") {
                InputRole::TokenType
            } else if i == 1 && !name.contains("id") {
                InputRole::Mask
            } else {
                InputRole::Ids
            };
            let dt = model
                .input_fact(i)
                .ok()
                .and_then(|f| f.datum_type.concretize())
                .unwrap_or(DatumType::I64);
            model = model
                .with_input_fact(i, InferenceFact::dt_shape(dt, tvec!(1, seq_len)))
                .map_err(|e| load_err(&weights, e))?;
            inputs.push((role, dt));
        }
        if !inputs.iter().any(|(r, _)| *r == InputRole::Ids) {
            return Err(load_err(&weights, "graph has no token-id input"));
        }
        let plan = model
            .into_optimized()
            .and_then(|m| m.into_runnable())
            .map_err(|e| load_err(&weights, e))?;
        Ok(TransformerBackend {
            tokenizer,
            plan,
            inputs,
            label_order: artifacts.label_order.clone(),
            _scalar: PhantomData,
        })
    }

    pub fn from_dir(dir: &Path) -> Result<Self, ClassifyError> {
        Self::load(&ModelArtifacts::load(dir)?)
    }

    /// Raw logits in canonical category order.
    pub fn logits(&self, text: &str) -> Result<CategoryMap<f32>, ClassifyError> {
        let encoding = self.tokenizer.encode(text);
        let len = encoding.ids.len();
        let zeros = vec![0i64; len];
        let mut values: TVec<TValue> = tvec!();
        for (role, dt) in &self.inputs {
            let data = match role {
                InputRole::Ids => &encoding.ids,
                InputRole::Mask => &encoding.attention_mask,
                InputRole::TokenType => &zeros,
            };
            let tensor = Tensor::from_shape(&[1, len], data).map_err(infer_err)?;
            let tensor = tensor.cast_to_dt(*dt).map_err(infer_err)?.into_owned();
            values.push(tensor.into());
        }
        let outputs = self.plan.run(values).map_err(infer_err)?;
        let first = outputs
            .first()
            .ok_or_else(|| ClassifyError::Inference("graph produced no output".into()))?;
        let as_f32 = first.cast_to::<f32>().map_err(infer_err)?;
        let flat: Vec<f32> = as_f32
            .to_plain_array_view::<f32>()
            .map_err(infer_err)?
            .iter()
            .copied()
            .collect();
        if flat.len() != Category::COUNT {
            return Err(ClassifyError::ShapeMismatch { got: flat.len() });
        }
        let mut canonical = CategoryMap([0f32; Category::COUNT]);
        for (logit, c) in flat.iter().zip(&self.label_order) {
            canonical[*c] = *logit;
        }
        Ok(canonical)
    }

    pub fn classify(&self, text: &str) -> Result<CategoryDistribution<F>, ClassifyError> {
        let logits = self.logits(text)?;
        softmax(&logits.map(|_, &l| F::lit(l as f64)), F::one())
    }
}

impl<F: Scalar> ClassifierBackend<F> for TransformerBackend<F> {
    fn name(&self) -> &str {
        "transformer"
    }

    fn classify_batch(&self, texts: &[String]) -> Result<Vec<CategoryDistribution<F>>, ClassifyError> {
        texts.iter().map(|t| self.classify(t)).collect()
    }
}
