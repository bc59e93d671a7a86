use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{softmax, CategoryDistribution, ClassifierBackend, ClassifyError};
use crate::scalar::Scalar;
use crate::taxonomy::{parse_label, Category, CategoryMap};

/// The lexicon shipped with the crate.
pub const DEFAULT_LEXICON_JSON: &str = include_str!("../../data/lexicon.json");

/// One keyword or phrase as written in a lexicon file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub weight: f64,
}

#[derive(Debug, Clone)]
struct CompiledPattern<F> {
    source: String,
    regex: Regex,
    weight: F,
}

/// Keyword scorer.
///
/// A pattern is matched case-insensitively. A single word only matches as a
/// whole word; a phrase matches anywhere, with runs of whitespace between its
/// words. `*` in a pattern stands for one to three words, so `only * left`
/// matches "only 2 left" and "only 3 items left". Each pattern counts once
/// per text no matter how often it occurs. The benign category starts from a
/// fixed bias score and the scores go through a temperature softmax.
#[derive(Debug, Clone)]
pub struct Lexicon<F = f64> {
    patterns: CategoryMap<Vec<CompiledPattern<F>>>,
    bias: F,
    temperature: F,
}

fn compile(pattern: &str) -> Result<Regex, ClassifyError> {
    let words: Vec<&str> = pattern.split_whitespace().collect();
    if words.is_empty() {
        return Err(ClassifyError::InvalidLexicon("empty pattern".into()));
    }
    let body = words
        .iter()
        .map(|w| {
            if *w == "*" {
                r"\S+(?:\s+\S+){0,2}".to_string()
            } else {
                regex::escape(w)
            }
        })
        .collect::<Vec<_>>()
        .join(r"\s+");
    let expr = if words.len() == 1 && words[0] != "*" {
        let word = words[0];
        let starts = word.chars().next().is_some_and(char::is_alphanumeric);
        let ends = word.chars().last().is_some_and(char::is_alphanumeric);
        format!(
            "(?i){}{}{}",
            if starts { r"\b" } else { "" },
            body,
            if ends { r"\b" } else { "" }
        )
    } else {
        format!("(?i){body}")
    };
    Regex::new(&expr).map_err(|e| ClassifyError::InvalidLexicon(e.to_string()))
}

impl<F: Scalar> Lexicon<F> {
    pub fn new(
        entries: CategoryMap<Vec<LexiconEntry>>,
        bias: F,
        temperature: F,
    ) -> Result<Self, ClassifyError> {
        if !temperature.is_finite() || temperature <= F::zero() {
            return Err(ClassifyError::InvalidTemperature);
        }
        if !bias.is_finite() {
            return Err(ClassifyError::NonFinite);
        }
        let mut patterns: CategoryMap<Vec<CompiledPattern<F>>> = CategoryMap::default();
        for (c, list) in entries.iter() {
            if c.is_dark() && list.is_empty() {
                return Err(ClassifyError::InvalidLexicon(format!("no patterns for {c}")));
            }
            for entry in list {
                if !(entry.weight.is_finite() && entry.weight > 0.0) {
                    return Err(ClassifyError::InvalidLexicon(format!(
                        "pattern {:?} has non-positive weight",
                        entry.pattern
                    )));
                }
                patterns[c].push(CompiledPattern {
                    source: entry.pattern.clone(),
                    regex: compile(&entry.pattern)?,
                    weight: F::lit(entry.weight),
                });
            }
        }
        Ok(Lexicon {
            patterns,
            bias,
            temperature,
        })
    }

    /// Parses the JSON lexicon format: display name → list of
    /// `{"pattern", "weight"}`, plus `"bias"` and `"temperature"` keys.
    pub fn from_json(json: &str) -> Result<Self, ClassifyError> {
        let value: Value =
            serde_json::from_str(json).map_err(|e| ClassifyError::InvalidLexicon(e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| ClassifyError::InvalidLexicon("expected a JSON object".into()))?;
        let mut entries: CategoryMap<Vec<LexiconEntry>> = CategoryMap::default();
        let mut bias = 1.0;
        let mut temperature = 1.0;
        for (key, v) in object {
            match key.as_str() {
                "bias" | "temperature" => {
                    let x = v.as_f64().ok_or_else(|| {
                        ClassifyError::InvalidLexicon(format!("{key} must be a number"))
                    })?;
                    if key == "bias" {
                        bias = x;
                    } else {
                        temperature = x;
                    }
                }
                _ => {
                    let c = parse_label(key)
                        .map_err(|e| ClassifyError::InvalidLexicon(e.to_string()))?;
                    entries[c] = serde_json::from_value(v.clone())
                        .map_err(|e| ClassifyError::InvalidLexicon(format!("{key}: {e}")))?;
                }
            }
        }
        Lexicon::new(entries, F::lit(bias), F::lit(temperature))
    }

    pub fn from_path(path: &Path) -> Result<Self, ClassifyError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| ClassifyError::InvalidLexicon(format!("{}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    /// The lexicon bundled with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_LEXICON_JSON).expect("bundled lexicon is valid")
    }

    pub fn bias(&self) -> F {
        self.bias
    }

    pub fn temperature(&self) -> F {
        self.temperature
    }

    /// Raw per-category scores before the softmax.
    pub fn scores(&self, text: &str) -> CategoryMap<F> {
        let mut scores = CategoryMap::from_fn(|c| {
            self.patterns[c]
                .iter()
                .filter(|p| p.regex.is_match(text))
                .map(|p| p.weight)
                .fold(F::zero(), |a, b| a + b)
        });
        scores[Category::NotDarkPattern] = scores[Category::NotDarkPattern] + self.bias;
        scores
    }

    /// Patterns that fired for `text`, per category.
    pub fn matches(&self, text: &str) -> Vec<(Category, &str)> {
        self.patterns
            .iter()
            .flat_map(|(c, list)| {
                list.iter()
                    .filter(move |p| p.regex.is_match(text))
                    .map(move |p| (c, p.source.as_str()))
            })
            .collect()
    }

    pub fn classify(&self, text: &str) -> CategoryDistribution<F> {
        softmax(&self.scores(text), self.temperature)
            .expect("lexicon scores and temperature are validated")
    }
}

impl<F: Scalar> ClassifierBackend<F> for Lexicon<F> {
    fn name(&self) -> &str {
        "lexical"
    }

    fn classify_batch(&self, texts: &[String]) -> Result<Vec<CategoryDistribution<F>>, ClassifyError> {
        Ok(texts.iter().map(|t| self.classify(t)).collect())
    }
}
