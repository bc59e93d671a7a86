use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::EvalError;
use crate::classifier::CategoryDistribution;
use crate::detection::ThresholdConfig;
use crate::scalar::Scalar;
use crate::taxonomy::Category;

/// What threshold tuning maximizes for each category.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Objective {
    #[default]
    F1,
    /// Weighted harmonic mean; `beta < 1` favors precision.
    FBeta(f64),
}

impl Objective {
    pub fn beta(self) -> f64 {
        match self {
            Objective::F1 => 1.0,
            Objective::FBeta(b) => b,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::F1 => f.write_str("f1"),
            Objective::FBeta(b) => write!(f, "fbeta:{b}"),
        }
    }
}

impl FromStr for Objective {
    type Err = EvalError;

    /// Accepts `f1` or `fbeta:<beta>` with a positive beta.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "f1" {
            return Ok(Objective::F1);
        }
        lower
            .strip_prefix("fbeta:")
            .and_then(|b| b.trim().parse::<f64>().ok())
            .filter(|b| b.is_finite() && *b > 0.0)
            .map(Objective::FBeta)
            .ok_or_else(|| EvalError::InvalidObjective(s.to_string()))
    }
}

/// F-beta from raw counts; zero when nothing is correctly flagged.
pub fn fbeta(tp: usize, fp: usize, fn_: usize, beta: f64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let b2 = beta * beta;
    let tp = tp as f64;
    (1.0 + b2) * tp / ((1.0 + b2) * tp + b2 * fn_ as f64 + fp as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryTuning {
    pub category: Category,
    pub threshold: f64,
    pub score: f64,
    pub positives: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct TunedThresholds<F: Scalar = f64> {
    pub thresholds: ThresholdConfig<F>,
    pub objective: String,
    pub categories: Vec<CategoryTuning>,
}

/// One-vs-rest objective for flagging `c` at `threshold` (flag when the
/// probability is at least the threshold).
pub fn objective_at<F: Scalar>(
    results: &[(CategoryDistribution<F>, Category)],
    c: Category,
    threshold: F,
    objective: Objective,
) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (dist, gold) in results {
        match (dist.prob(c) >= threshold, *gold == c) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    fbeta(tp, fp, fn_, objective.beta())
}

/// Picks, per dark category, the candidate threshold with the best
/// objective. Candidates are the distinct probabilities observed for that
/// category; ties go to the higher threshold. Categories without any
/// positive example are set to 1.0.
pub fn tune_thresholds<F: Scalar>(
    results: &[(CategoryDistribution<F>, Category)],
    objective: Objective,
) -> Result<TunedThresholds<F>, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut thresholds = ThresholdConfig::<F>::default();
    let mut categories = Vec::with_capacity(Category::DARK.len());
    for c in Category::DARK {
        let positives = results.iter().filter(|(_, g)| *g == c).count();
        if positives == 0 {
            thresholds.set(c, F::one()).expect("1.0 is a valid threshold");
            categories.push(CategoryTuning {
                category: c,
                threshold: 1.0,
                score: 0.0,
                positives,
                note: Some("no positive examples; effectively never flagged".into()),
            });
            continue;
        }
        let mut candidates: Vec<F> = results.iter().map(|(d, _)| d.prob(c)).collect();
        candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite probabilities"));
        candidates.dedup();
        let mut best = (candidates[0], f64::NEG_INFINITY);
        for &t in &candidates {
            let score = objective_at(results, c, t, objective);
            if score >= best.1 {
                best = (t, score);
            }
        }
        let t = best.0.max(F::zero()).min(F::one());
        thresholds.set(c, t).expect("probabilities lie in [0, 1]");
        categories.push(CategoryTuning {
            category: c,
            threshold: t.to_f64_lossy(),
            score: best.1,
            positives,
            note: None,
        });
    }
    Ok(TunedThresholds {
        thresholds,
        objective: objective.to_string(),
        categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::CategoryMap;
    use proptest::prelude::*;

    /// Distribution with `p` on `c` and the rest on the benign category.
    fn dist(c: Category, p: f64) -> CategoryDistribution<f64> {
        let mut m = CategoryMap::filled(0.0);
        m[c] = p;
        m[Category::NotDarkPattern] += 1.0 - p;
        CategoryDistribution::new(m).unwrap()
    }

    #[test]
    fn parses_objectives() {
        assert_eq!("f1".parse::<Objective>().unwrap(), Objective::F1);
        assert_eq!("FBeta:0.5".parse::<Objective>().unwrap(), Objective::FBeta(0.5));
        assert!("fbeta:-1".parse::<Objective>().is_err());
        assert!("accuracy".parse::<Objective>().is_err());
    }

    #[test]
    fn separated_category_gets_perfect_f1() {
        let u = Category::Urgency;
        let results: Vec<_> = [(0.9, true), (0.95, true), (0.99, true), (0.05, false), (0.1, false), (0.0, false)]
            .iter()
            .map(|&(p, pos)| (dist(u, p), if pos { u } else { Category::NotDarkPattern }))
            .collect();
        let tuned = tune_thresholds(&results, Objective::F1).unwrap();
        let t = tuned.thresholds.get(u).unwrap();
        assert!(t > 0.1 && t <= 0.9, "{t}");
        let entry = tuned.categories.iter().find(|e| e.category == u).unwrap();
        assert_eq!(entry.score, 1.0);
    }

    #[test]
    fn absent_category_is_never_flagged() {
        let results = vec![(dist(Category::Urgency, 0.8), Category::Urgency)];
        let tuned = tune_thresholds(&results, Objective::F1).unwrap();
        assert_eq!(tuned.thresholds.get(Category::Obstruction), Some(1.0));
        let entry = tuned.categories.iter().find(|e| e.category == Category::Obstruction).unwrap();
        assert!(entry.note.is_some());
        assert!(matches!(
            tune_thresholds::<f64>(&[], Objective::F1),
            Err(EvalError::Empty)
        ));
    }

    #[test]
    fn precision_weighted_objective_prefers_higher_threshold() {
        // At 0.3 everything is flagged: tp 3, fp 1. At 0.9: tp 2, fn 1.
        let s = Category::Scarcity;
        let results = vec![
            (dist(s, 0.9), s),
            (dist(s, 0.9), s),
            (dist(s, 0.3), s),
            (dist(s, 0.3), Category::NotDarkPattern),
        ];
        let f1 = tune_thresholds(&results, Objective::F1).unwrap();
        let f05 = tune_thresholds(&results, Objective::FBeta(0.5)).unwrap();
        assert_eq!(f1.thresholds.get(s), Some(0.3));
        assert_eq!(f05.thresholds.get(s), Some(0.9));
        assert!((fbeta(3, 1, 0, 1.0) - 6.0 / 7.0).abs() < 1e-12);
        assert!((fbeta(2, 0, 1, 1.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_the_higher_threshold() {
        let s = Category::Scarcity;
        // 0.2 flags both positives and both negatives, 0.9 flags one
        // positive only; both score 2/3.
        let results = vec![
            (dist(s, 0.9), s),
            (dist(s, 0.2), s),
            (dist(s, 0.5), Category::NotDarkPattern),
            (dist(s, 0.4), Category::NotDarkPattern),
        ];
        assert_eq!(objective_at(&results, s, 0.2, Objective::F1), objective_at(&results, s, 0.9, Objective::F1));
        let tuned = tune_thresholds(&results, Objective::F1).unwrap();
        assert_eq!(tuned.thresholds.get(s), Some(0.9));
    }

    proptest! {
        #[test]
        fn never_worse_than_default(rows in prop::collection::vec((0usize..8, 0.0f64..1.0, any::<bool>()), 1..60)) {
            let results: Vec<_> = rows
                .iter()
                .map(|&(k, p, pos)| {
                    let c = Category::ALL[k];
                    (dist(c, p), if pos { c } else { Category::NotDarkPattern })
                })
                .collect();
            let tuned = tune_thresholds(&results, Objective::F1).unwrap();
            for c in Category::DARK {
                let tuned_score = objective_at(&results, c, tuned.thresholds.get(c).unwrap(), Objective::F1);
                let default_score = objective_at(&results, c, 0.5, Objective::F1);
                prop_assert!(tuned_score >= default_score);
            }
        }
    }
}
