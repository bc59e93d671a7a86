use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::taxonomy::{Category, CategoryMap};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Classification quality over the eight categories.
///
/// `confusion[gold][predicted]`, indexed in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: CategoryMap<ClassMetrics>,
    pub confusion: [[u64; Category::COUNT]; Category::COUNT],
}

impl EvalMetrics {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn support(&self, c: Category) -> u64 {
        self.confusion[c.index()].iter().sum()
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Macro F1 averages over the categories that occur in either the gold or
/// the predicted labels; absent categories would otherwise contribute a
/// meaningless zero.
pub fn compute_metrics(predicted: &[Category], gold: &[Category]) -> Result<EvalMetrics, EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = [[0u64; Category::COUNT]; Category::COUNT];
    for (p, g) in predicted.iter().zip(gold) {
        confusion[g.index()][p.index()] += 1;
    }
    let total = gold.len() as u64;
    let correct: u64 = (0..Category::COUNT).map(|i| confusion[i][i]).sum();

    let per_class = CategoryMap::from_fn(|c| {
        let i = c.index();
        let tp = confusion[i][i];
        let support: u64 = confusion[i].iter().sum();
        let predicted_as: u64 = confusion.iter().map(|row| row[i]).sum();
        let precision = ratio(tp, predicted_as);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    });
    let present: Vec<f64> = Category::ALL
        .iter()
        .filter(|c| {
            let i = c.index();
            per_class[**c].support > 0 || confusion.iter().any(|row| row[i] > 0)
        })
        .map(|c| per_class[*c].f1)
        .collect();
    let macro_f1 = present.iter().sum::<f64>() / present.len() as f64;

    Ok(EvalMetrics {
        accuracy: ratio(correct, total),
        macro_f1,
        per_class,
        confusion,
    })
}
