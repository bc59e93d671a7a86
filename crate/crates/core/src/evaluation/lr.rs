use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{EvalError, LabeledExample};
use crate::classifier::{softmax, CategoryDistribution, ClassifierBackend, ClassifyError};
use crate::scalar::Scalar;
use crate::taxonomy::{Category, CategoryMap};

const K: usize = Category::COUNT;

/// Sparse feature vector: `(feature index, value)` pairs sorted by index.
pub type SparseRow<F> = Vec<(usize, F)>;

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{L}\p{N}]+(?:'\p{L}+)?").expect("token regex"))
}

/// Lowercased unigrams followed by adjacent-word bigrams.
pub fn terms(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let words: Vec<&str> = token_regex().find_iter(&lower).map(|m| m.as_str()).collect();
    let mut out: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    out.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

/// TF-IDF featurizer with a dense, sorted vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TfIdfVectorizer {
    terms: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for TfIdfVectorizer {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.idf == other.idf
    }
}

impl TfIdfVectorizer {
    /// Keeps terms occurring at least `min_tf` times across `texts`.
    /// Idf is smoothed: `ln((1 + n) / (1 + df)) + 1`.
    pub fn fit<S: AsRef<str>>(texts: &[S], min_tf: usize) -> Self {
        let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for text in texts {
            let mut seen = std::collections::HashSet::new();
            for term in terms(text.as_ref()) {
                let entry = counts.entry(term.clone()).or_default();
                entry.0 += 1;
                if seen.insert(term) {
                    entry.1 += 1;
                }
            }
        }
        let n = texts.len() as f64;
        let (terms, idf): (Vec<String>, Vec<f64>) = counts
            .into_iter()
            .filter(|(_, (tf, _))| *tf >= min_tf.max(1))
            .map(|(t, (_, df))| (t, ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0))
            .unzip();
        Self::from_parts(terms, idf)
    }

    fn from_parts(terms: Vec<String>, idf: Vec<f64>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfIdfVectorizer { terms, idf, index }
    }

    fn rebuild_index(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// L2-normalized tf·idf vector; all-zero when no term is known.
    pub fn transform<F: Scalar>(&self, text: &str) -> SparseRow<F> {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for term in terms(text) {
            if let Some(&i) = self.index.get(&term) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let raw: Vec<(usize, f64)> = tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = raw.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Vec::new();
        }
        raw.into_iter().map(|(i, v)| (i, F::lit(v / norm))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrHyperParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
    pub min_tf: usize,
}

impl Default for LrHyperParams {
    fn default() -> Self {
        LrHyperParams {
            learning_rate: 1.0,
            epochs: 40,
            batch_size: 32,
            l2: 1e-4,
            seed: 42,
            min_tf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

/// Multinomial logistic regression over TF-IDF features.
///
/// `weights` is an 8 × (|vocab| + 1) row-major matrix in canonical category
/// order; the last column of each row is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LrModel<F: Scalar = f64> {
    pub vectorizer: TfIdfVectorizer,
    pub weights: Vec<F>,
    pub hyper: LrHyperParams,
    pub history: Vec<EpochLog>,
    pub val_accuracy: Option<f64>,
}

fn log_sum_exp<F: Scalar>(z: &[F; K]) -> F {
    let m = z.iter().copied().fold(F::neg_infinity(), F::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<F>().ln()
}

fn logits<F: Scalar>(weights: &[F], n_features: usize, row: &[(usize, F)]) -> [F; K] {
    let stride = n_features + 1;
    std::array::from_fn(|k| {
        let w = &weights[k * stride..(k + 1) * stride];
        row.iter().fold(w[n_features], |acc, &(j, x)| acc + w[j] * x)
    })
}

/// Mean cross-entropy plus `l2 / 2 · ‖W‖²` (bias excluded), and its gradient
/// with respect to `weights`.
pub fn loss_and_gradient<F: Scalar>(
    weights: &[F],
    n_features: usize,
    rows: &[SparseRow<F>],
    labels: &[usize],
    l2: F,
) -> (F, Vec<F>) {
    let stride = n_features + 1;
    assert_eq!(weights.len(), K * stride, "weight matrix shape");
    assert_eq!(rows.len(), labels.len(), "rows and labels differ in length");
    let mut grad = vec![F::zero(); weights.len()];
    let mut loss = F::zero();
    let n = F::from_count(rows.len().max(1));
    for (row, &y) in rows.iter().zip(labels) {
        let z = logits(weights, n_features, row);
        let lse = log_sum_exp(&z);
        loss = loss + (lse - z[y]);
        for k in 0..K {
            let p = (z[k] - lse).exp();
            let dz = (p - if k == y { F::one() } else { F::zero() }) / n;
            let g = &mut grad[k * stride..(k + 1) * stride];
            for &(j, x) in row {
                g[j] = g[j] + dz * x;
            }
            g[n_features] = g[n_features] + dz;
        }
    }
    loss = loss / n;
    let half = F::lit(0.5);
    for k in 0..K {
        for j in 0..n_features {
            let idx = k * stride + j;
            loss = loss + half * l2 * weights[idx] * weights[idx];
            grad[idx] = grad[idx] + l2 * weights[idx];
        }
    }
    (loss, grad)
}

fn accuracy<F: Scalar>(weights: &[F], n_features: usize, rows: &[SparseRow<F>], labels: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let correct = rows
        .iter()
        .zip(labels)
        .filter(|(row, &y)| argmax(&logits(weights, n_features, row)) == y)
        .count();
    correct as f64 / rows.len() as f64
}

fn argmax<F: Scalar>(z: &[F; K]) -> usize {
    let mut best = 0;
    for k in 1..K {
        if z[k] > z[best] {
            best = k;
        }
    }
    best
}

/// Trains the baseline with seeded mini-batch gradient descent.
pub fn train_lr_baseline<F: Scalar>(
    train: &[LabeledExample],
    val: &[LabeledExample],
    hyper: LrHyperParams,
) -> Result<LrModel<F>, EvalError> {
    if train.is_empty() {
        return Err(EvalError::Empty);
    }
    if hyper.epochs == 0 || hyper.batch_size == 0 {
        return Err(EvalError::InvalidHyperParams("epochs and batch size must be at least 1".into()));
    }
    if !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0) || !(hyper.l2.is_finite() && hyper.l2 >= 0.0) {
        return Err(EvalError::InvalidHyperParams(
            "learning rate must be positive and l2 non-negative".into(),
        ));
    }
    let first = train[0].label;
    if train.iter().all(|e| e.label == first) {
        return Err(EvalError::DegenerateData);
    }

    let texts: Vec<&str> = train.iter().map(|e| e.text.as_str()).collect();
    let vectorizer = TfIdfVectorizer::fit(&texts, hyper.min_tf);
    let v = vectorizer.len();
    let rows: Vec<SparseRow<F>> = texts.iter().map(|t| vectorizer.transform(t)).collect();
    let labels: Vec<usize> = train.iter().map(|e| e.label.index()).collect();
    let val_rows: Vec<SparseRow<F>> = val.iter().map(|e| vectorizer.transform(&e.text)).collect();
    let val_labels: Vec<usize> = val.iter().map(|e| e.label.index()).collect();

    let mut weights = vec![F::zero(); K * (v + 1)];
    let lr = F::lit(hyper.learning_rate);
    let l2 = F::lit(hyper.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut batch_rows: Vec<SparseRow<F>> = Vec::with_capacity(hyper.batch_size);
    let mut batch_labels: Vec<usize> = Vec::with_capacity(hyper.batch_size);

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            batch_rows.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_rows.push(rows[i].clone());
                batch_labels.push(labels[i]);
            }
            let (_, grad) = loss_and_gradient(&weights, v, &batch_rows, &batch_labels, l2);
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w = *w - lr * *g;
            }
        }
        let (loss, _) = loss_and_gradient(&weights, v, &rows, &labels, l2);
        if !loss.is_finite() {
            return Err(EvalError::InvalidHyperParams(format!(
                "training diverged at epoch {epoch}; lower the learning rate"
            )));
        }
        history.push(EpochLog {
            epoch,
            loss: loss.to_f64_lossy(),
            train_accuracy: accuracy(&weights, v, &rows, &labels),
            val_accuracy: (!val.is_empty()).then(|| accuracy(&weights, v, &val_rows, &val_labels)),
        });
    }
    let val_accuracy = history.last().and_then(|h| h.val_accuracy);
    Ok(LrModel {
        vectorizer,
        weights,
        hyper,
        history,
        val_accuracy,
    })
}

impl<F: Scalar> LrModel<F> {
    pub fn n_features(&self) -> usize {
        self.vectorizer.len()
    }

    pub fn scores(&self, text: &str) -> CategoryMap<F> {
        let row: SparseRow<F> = self.vectorizer.transform(text);
        CategoryMap(logits(&self.weights, self.n_features(), &row))
    }

    pub fn classify(&self, text: &str) -> Result<CategoryDistribution<F>, ClassifyError> {
        softmax(&self.scores(text), F::one())
    }

    pub fn predict(&self, text: &str) -> Category {
        Category::from_index(argmax(&self.scores(text).0)).expect("index in range")
    }

    /// Accuracy on labeled examples.
    pub fn accuracy(&self, examples: &[LabeledExample]) -> f64 {
        if examples.is_empty() {
            return 0.0;
        }
        let correct = examples.iter().filter(|e| self.predict(&e.text) == e.label).count();
        correct as f64 / examples.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, EvalError> {
        let mut model: LrModel<F> = serde_json::from_str(json).map_err(|e| EvalError::ModelFile(e.to_string()))?;
        model.vectorizer.rebuild_index();
        let v = model.vectorizer.len();
        if model.vectorizer.idf.len() != v {
            return Err(EvalError::ModelFile("idf length differs from vocabulary size".into()));
        }
        if model.vectorizer.index.len() != v {
            return Err(EvalError::ModelFile("duplicate vocabulary terms".into()));
        }
        if model.weights.len() != K * (v + 1) {
            return Err(EvalError::ModelFile(format!(
                "expected {} weights, found {}",
                K * (v + 1),
                model.weights.len()
            )));
        }
        if model.weights.iter().any(|w| !w.is_finite()) {
            return Err(EvalError::ModelFile("non-finite weight".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn from_path(path: &Path) -> Result<Self, EvalError> {
        let json = std::fs::read_to_string(path).map_err(|e| EvalError::FileUnreadable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&json)
    }
}

impl<F: Scalar> ClassifierBackend<F> for LrModel<F> {
    fn name(&self) -> &str {
        "lr"
    }

    fn classify_batch(&self, texts: &[String]) -> Result<Vec<CategoryDistribution<F>>, ClassifyError> {
        texts.iter().map(|t| self.classify(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn example(text: &str, label: Category) -> LabeledExample {
        LabeledExample {
            text: text.into(),
            label,
        }
    }

    /// Two classes with disjoint vocabularies.
    fn separable() -> (Vec<LabeledExample>, Vec<LabeledExample>) {
        let scarce = ["only", "left", "stock", "few", "remaining"];
        let plain = ["shipping", "returns", "contact", "about", "account"];
        let mut train = Vec::new();
        for i in 0..10 {
            let a = scarce[i % 5];
            let b = scarce[(i + 2) % 5];
            train.push(example(&format!("{a} {b}"), Category::Scarcity));
            let a = plain[i % 5];
            let b = plain[(i + 3) % 5];
            train.push(example(&format!("{a} {b}"), Category::NotDarkPattern));
        }
        let val = vec![
            example("only few remaining", Category::Scarcity),
            example("left in stock", Category::Scarcity),
            example("contact about returns", Category::NotDarkPattern),
            example("account shipping", Category::NotDarkPattern),
        ];
        (train, val)
    }

    #[test]
    fn terms_include_bigrams() {
        assert_eq!(terms("Don't MISS out!"), vec!["don't", "miss", "out", "don't miss", "miss out"]);
    }

    #[test]
    fn idf_is_smoothed_and_vocab_sorted() {
        let v = TfIdfVectorizer::fit(&["a b", "a c", "a b"], 2);
        assert_eq!(v.vocabulary(), ["a", "a b", "b"]);
        let expect = |df: f64| (4.0f64 / (1.0 + df)).ln() + 1.0;
        assert!((v.idf()[0] - expect(3.0)).abs() < 1e-12);
        assert!((v.idf()[2] - expect(2.0)).abs() < 1e-12);
        let row: SparseRow<f64> = v.transform("b b");
        assert_eq!(row, vec![(2, 1.0)]);
        assert!(v.transform::<f64>("zzz").is_empty());
    }

    #[test]
    fn separable_fixture_reaches_perfect_accuracy() {
        let (train, val) = separable();
        let hyper = LrHyperParams {
            min_tf: 1,
            ..LrHyperParams::default()
        };
        let model: LrModel = train_lr_baseline(&train, &val, hyper).unwrap();
        assert_eq!(model.val_accuracy, Some(1.0));
        for e in &train {
            assert_eq!(model.classify(&e.text).unwrap().argmax(), e.label);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let train = vec![example("a", Category::Urgency), example("b", Category::Urgency)];
        assert!(matches!(
            train_lr_baseline::<f64>(&train, &[], LrHyperParams::default()),
            Err(EvalError::DegenerateData)
        ));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let (train, val) = separable();
        let a: LrModel = train_lr_baseline(&train, &val, LrHyperParams::default()).unwrap();
        let b: LrModel = train_lr_baseline(&train, &val, LrHyperParams::default()).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn unknown_text_uses_bias_only() {
        let (train, val) = separable();
        let model: LrModel = train_lr_baseline(&train, &val, LrHyperParams::default()).unwrap();
        let stride = model.n_features() + 1;
        let bias = CategoryMap::from_fn(|c| model.weights[c.index() * stride + model.n_features()]);
        assert_eq!(
            model.classify("qwerty zxcv").unwrap(),
            softmax(&bias, 1.0).unwrap()
        );
    }

    #[test]
    fn batch_order_is_preserved() {
        let (train, val) = separable();
        let model: LrModel = train_lr_baseline(&train, &val, LrHyperParams::default()).unwrap();
        let texts: Vec<String> = vec!["only left".into(), "returns contact".into(), "few stock".into()];
        let out = model.classify_batch(&texts).unwrap();
        for (t, d) in texts.iter().zip(&out) {
            assert_eq!(*d, model.classify(t).unwrap());
        }
    }

    #[test]
    fn json_round_trip() {
        let (train, val) = separable();
        let model: LrModel = train_lr_baseline(&train, &val, LrHyperParams::default()).unwrap();
        let back = LrModel::<f64>::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.classify("only left").unwrap(), model.classify("only left").unwrap());
        assert!(LrModel::<f64>::from_json("{}").is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n_features = 10;
        let rows: Vec<SparseRow<f64>> = (0..5)
            .map(|_| {
                let mut row = Vec::new();
                for j in 0..n_features {
                    if rng.random_bool(0.6) {
                        row.push((j, rng.random_range(-1.0..1.0)));
                    }
                }
                row
            })
            .collect();
        let labels = vec![0, 3, 5, 3, 7];
        let weights: Vec<f64> = (0..K * (n_features + 1)).map(|_| rng.random_range(-0.5..0.5)).collect();
        let l2 = 0.1;
        let (_, grad) = loss_and_gradient(&weights, n_features, &rows, &labels, l2);
        let h = 1e-5;
        for i in 0..weights.len() {
            let mut plus = weights.clone();
            plus[i] += h;
            let mut minus = weights.clone();
            minus[i] -= h;
            let numeric = (loss_and_gradient(&plus, n_features, &rows, &labels, l2).0
                - loss_and_gradient(&minus, n_features, &rows, &labels, l2).0)
                / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel <= 1e-4, "weight {i}: analytic {} numeric {numeric}", grad[i]);
        }
    }

    #[test]
    fn full_batch_loss_does_not_increase() {
        let (train, val) = separable();
        let hyper = LrHyperParams {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: train.len(),
            ..LrHyperParams::default()
        };
        let model: LrModel = train_lr_baseline(&train, &val, hyper).unwrap();
        for w in model.history.windows(2) {
            assert!(w[1].loss <= w[0].loss, "{} then {}", w[0].loss, w[1].loss);
        }
    }

    #[test]
    fn trains_in_single_precision() {
        let (train, val) = separable();
        let model: LrModel<f32> = train_lr_baseline(&train, &val, LrHyperParams::default()).unwrap();
        assert_eq!(model.val_accuracy, Some(1.0));
    }
}
