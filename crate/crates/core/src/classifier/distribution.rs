use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ClassifyError;
use crate::scalar::{Scalar, NORMALIZATION_TOLERANCE};
use crate::taxonomy::{Category, CategoryMap};

/// A probability vector over the eight categories.
///
/// Every entry lies in `[0, 1]` and the entries sum to one within
/// [`NORMALIZATION_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryDistribution<F> {
    probs: CategoryMap<F>,
}

impl<F: Scalar> CategoryDistribution<F> {
    pub fn new(probs: CategoryMap<F>) -> Result<Self, ClassifyError> {
        let mut sum = F::zero();
        for (c, &p) in probs.iter() {
            if !p.is_finite() {
                return Err(ClassifyError::NonFinite);
            }
            if p < F::zero() || p > F::one() {
                return Err(ClassifyError::InvalidDistribution(format!(
                    "{c} has probability {p}"
                )));
            }
            sum = sum + p;
        }
        if (sum - F::one()).abs() > F::lit(NORMALIZATION_TOLERANCE) {
            return Err(ClassifyError::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(CategoryDistribution { probs })
    }

    /// Builds a distribution from values given in percent, the way
    /// probability tables are usually printed. Rounded tables rarely add up
    /// to exactly 100, so the values are renormalized.
    pub fn from_percentages(percent: CategoryMap<F>) -> Result<Self, ClassifyError> {
        let total: F = percent.values().iter().copied().sum();
        if !total.is_finite() || total <= F::zero() {
            return Err(ClassifyError::InvalidDistribution("non-positive total".into()));
        }
        Self::new(percent.map(|_, &p| p / total))
    }

    pub fn uniform() -> Self {
        CategoryDistribution {
            probs: CategoryMap::filled(F::one() / F::from_count(Category::COUNT)),
        }
    }

    /// All mass on `c`.
    pub fn point(c: Category) -> Self {
        CategoryDistribution {
            probs: CategoryMap::from_fn(|k| if k == c { F::one() } else { F::zero() }),
        }
    }

    pub fn probs(&self) -> &CategoryMap<F> {
        &self.probs
    }

    pub fn prob(&self, c: Category) -> F {
        self.probs[c]
    }

    /// Highest-probability category; the earliest in canonical order wins
    /// ties.
    pub fn argmax(&self) -> Category {
        let mut best = Category::ALL[0];
        for c in Category::ALL.iter().copied().skip(1) {
            if self.probs[c] > self.probs[best] {
                best = c;
            }
        }
        best
    }

    pub fn cast<G: Scalar>(&self) -> CategoryDistribution<G> {
        CategoryDistribution {
            probs: self.probs.map(|_, p| G::lit(p.to_f64_lossy())),
        }
    }
}

impl<F: Scalar> Serialize for CategoryDistribution<F> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.probs.serialize(serializer)
    }
}

impl<'de, F: Scalar> Deserialize<'de> for CategoryDistribution<F> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let probs = CategoryMap::<F>::deserialize(deserializer)?;
        CategoryDistribution::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Temperature-scaled softmax, stabilized by subtracting the maximum score.
pub fn softmax<F: Scalar>(
    scores: &CategoryMap<F>,
    temperature: F,
) -> Result<CategoryDistribution<F>, ClassifyError> {
    if !temperature.is_finite() || temperature <= F::zero() {
        return Err(ClassifyError::InvalidTemperature);
    }
    if scores.values().iter().any(|s| !s.is_finite()) {
        return Err(ClassifyError::NonFinite);
    }
    let max = scores
        .values()
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    let exps = scores.map(|_, &s| ((s - max) / temperature).exp());
    let total: F = exps.values().iter().copied().sum();
    Ok(CategoryDistribution {
        probs: exps.map(|_, &e| e / total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(v: [f64; 8]) -> CategoryMap<f64> {
        CategoryMap(v)
    }

    #[test]
    fn zero_scores_are_uniform() {
        let d = softmax(&scores([0.0; 8]), 1.0).unwrap();
        for (_, &p) in d.probs().iter() {
            assert!((p - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn vanishing_temperature_concentrates_mass() {
        let mut s = [0.0; 8];
        s[0] = 1.0;
        let d = softmax(&scores(s), 1e-9).unwrap();
        assert_eq!(d.prob(Category::ForcedAction), 1.0);
        assert_eq!(d.prob(Category::Urgency), 0.0);
    }

    #[test]
    fn ln2_gives_two_ninths() {
        // exp(ln 2) / (exp(ln 2) + 7) = 2 / 9
        let mut s = [0.0; 8];
        s[0] = std::f64::consts::LN_2;
        let d = softmax(&scores(s), 1.0).unwrap();
        assert!((d.prob(Category::ForcedAction) - 2.0 / 9.0).abs() < 1e-12);
        assert!((d.prob(Category::Urgency) - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut s = [0.0; 8];
        s[3] = f64::NAN;
        assert!(matches!(softmax(&scores(s), 1.0), Err(ClassifyError::NonFinite)));
        s[3] = f64::INFINITY;
        assert!(matches!(softmax(&scores(s), 1.0), Err(ClassifyError::NonFinite)));
        assert!(matches!(
            softmax(&scores([0.0; 8]), 0.0),
            Err(ClassifyError::InvalidTemperature)
        ));
    }

    #[test]
    fn works_in_single_precision() {
        let d = softmax(&CategoryMap([1000.0f32, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 999.0]), 1.0).unwrap();
        let total: f32 = d.probs().values().iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
        assert_eq!(d.argmax(), Category::ForcedAction);
    }

    #[test]
    fn validation_and_percentages() {
        assert!(CategoryDistribution::new(CategoryMap([0.5f64; 8])).is_err());
        assert!(CategoryDistribution::new(CategoryMap([-0.1, 1.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])).is_err());
        let d = CategoryDistribution::<f64>::from_percentages(CategoryMap([
            0.23, 0.29, 0.24, 0.29, 98.09, 0.24, 0.26, 0.35,
        ]))
        .unwrap();
        assert_eq!(d.argmax(), Category::Scarcity);
        assert_eq!(CategoryDistribution::<f64>::uniform().argmax(), Category::ForcedAction);
    }

    #[test]
    fn serde_round_trip_validates() {
        let d = CategoryDistribution::<f64>::point(Category::Urgency);
        let json = serde_json::to_string(&d).unwrap();
        let back: CategoryDistribution<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        let bad = json.replace("\"Urgency\":1.0", "\"Urgency\":0.5");
        assert!(serde_json::from_str::<CategoryDistribution<f64>>(&bad).is_err());
    }

    proptest! {
        #[test]
        fn normalized_and_shift_invariant(
            raw in prop::array::uniform8(-50.0f64..50.0),
            shift in -100.0f64..100.0,
            t in 0.05f64..10.0,
        ) {
            let a = softmax(&scores(raw), t).unwrap();
            let sum: f64 = a.probs().values().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6);
            let b = softmax(&scores(raw.map(|s| s + shift)), t).unwrap();
            for c in Category::ALL {
                prop_assert!((a.prob(c) - b.prob(c)).abs() < 1e-9);
            }
        }

        #[test]
        fn raising_a_score_raises_its_probability(
            raw in prop::array::uniform8(-5.0f64..5.0),
            i in 0usize..8,
            bump in 0.01f64..5.0,
        ) {
            let before = softmax(&scores(raw), 1.0).unwrap();
            let mut raised = raw;
            raised[i] += bump;
            let after = softmax(&scores(raised), 1.0).unwrap();
            let c = Category::ALL[i];
            prop_assert!(after.prob(c) > before.prob(c));
        }

        #[test]
        fn temperature_does_not_change_argmax(raw in prop::array::uniform8(-5.0f64..5.0), t in 0.01f64..100.0) {
            let reference = softmax(&scores(raw), 1.0).unwrap().argmax();
            prop_assert_eq!(softmax(&scores(raw), t).unwrap().argmax(), reference);
        }
    }
}
