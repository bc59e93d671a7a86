//! Thresholding, per-site aggregation and site comparison.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::classifier::CategoryDistribution;
use crate::ingest::TextSegment;
use crate::scalar::Scalar;
use crate::taxonomy::{parse_label, Category, CategoryMap};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("site {0:?} has no segments to aggregate")]
    EmptySite(String),
    #[error("reports use different aggregation modes")]
    ModeMismatch,
    #[error("need at least two reports to compare, got {0}")]
    TooFewReports(usize),
    #[error("invalid threshold for {category}: {value}")]
    InvalidThreshold { category: String, value: f64 },
    #[error("invalid threshold file: {0}")]
    ThresholdFile(String),
}

/// Per-category flagging thresholds for the seven dark categories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig<F = f64> {
    values: CategoryMap<F>,
}

impl<F: Scalar> Default for ThresholdConfig<F> {
    fn default() -> Self {
        Self::uniform(F::lit(DEFAULT_THRESHOLD))
    }
}

impl<F: Scalar> ThresholdConfig<F> {
    /// The same threshold for every dark category.
    pub fn uniform(t: F) -> Self {
        ThresholdConfig {
            values: CategoryMap::filled(t),
        }
    }

    /// `None` for the benign category, which is never flagged.
    pub fn get(&self, c: Category) -> Option<F> {
        c.is_dark().then(|| self.values[c])
    }

    pub fn set(&mut self, c: Category, t: F) -> Result<(), DetectionError> {
        let invalid = || DetectionError::InvalidThreshold {
            category: c.display_name().to_string(),
            value: t.to_f64_lossy(),
        };
        if !c.is_dark() || !(t >= F::zero() && t <= F::one()) {
            return Err(invalid());
        }
        self.values[c] = t;
        Ok(())
    }

    pub fn with(mut self, c: Category, t: F) -> Result<Self, DetectionError> {
        self.set(c, t)?;
        Ok(self)
    }

    /// Reads a JSON object mapping display names to thresholds. Categories
    /// not listed keep the default of 0.5.
    pub fn from_json(json: &str) -> Result<Self, DetectionError> {
        let value: Value =
            serde_json::from_str(json).map_err(|e| DetectionError::ThresholdFile(e.to_string()))?;
        let object = value
            .as_object()
            .ok_or_else(|| DetectionError::ThresholdFile("expected a JSON object".into()))?;
        let mut config = Self::default();
        for (key, v) in object {
            let c = parse_label(key).map_err(|e| DetectionError::ThresholdFile(e.to_string()))?;
            let t = v
                .as_f64()
                .ok_or_else(|| DetectionError::ThresholdFile(format!("{key} must be a number")))?;
            config.set(c, F::lit(t))?;
        }
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, DetectionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DetectionError::ThresholdFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, F)> + '_ {
        Category::DARK.iter().map(|&c| (c, self.values[c]))
    }
}

impl<F: Scalar> Serialize for ThresholdConfig<F> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(Category::DARK.len()))?;
        for (c, t) in self.iter() {
            map.serialize_entry(c.display_name(), &t)?;
        }
        map.end()
    }
}

/// Argmax with canonical-order tie-break.
pub fn predict_category<F: Scalar>(dist: &CategoryDistribution<F>) -> Category {
    dist.argmax()
}

/// Dark categories whose probability reaches their threshold.
pub fn flag<F: Scalar>(dist: &CategoryDistribution<F>, thresholds: &ThresholdConfig<F>) -> BTreeSet<Category> {
    thresholds
        .iter()
        .filter(|&(c, t)| dist.prob(c) >= t)
        .map(|(c, _)| c)
        .collect()
}

/// One classified segment.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult<F = f64> {
    pub segment: TextSegment,
    pub distribution: CategoryDistribution<F>,
    pub predicted: Category,
    pub flagged_categories: BTreeSet<Category>,
}

impl<F: Scalar> DetectionResult<F> {
    pub fn new(segment: TextSegment, distribution: CategoryDistribution<F>, thresholds: &ThresholdConfig<F>) -> Self {
        DetectionResult {
            predicted: predict_category(&distribution),
            flagged_categories: flag(&distribution, thresholds),
            segment,
            distribution,
        }
    }

    pub fn is_flagged(&self) -> bool {
        !self.flagged_categories.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum AggregationMode {
    /// Share of segments whose argmax is each category.
    #[default]
    #[serde(rename = "argmax")]
    ArgmaxFraction,
    /// Mean per-segment probability of each category.
    #[serde(rename = "mean")]
    MeanProbability,
}

impl AggregationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::ArgmaxFraction => "argmax",
            AggregationMode::MeanProbability => "mean",
        }
    }
}

/// Category profile of one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteReport<F = f64> {
    pub site_id: String,
    pub page_urls: Vec<String>,
    pub n_segments: usize,
    pub category_fractions: CategoryMap<F>,
    pub mean_probabilities: CategoryMap<F>,
    pub flagged: Vec<DetectionResult<F>>,
    pub aggregation_mode: AggregationMode,
}

impl<F: Scalar> SiteReport<F> {
    /// The map selected by the aggregation mode.
    pub fn headline(&self) -> &CategoryMap<F> {
        match self.aggregation_mode {
            AggregationMode::ArgmaxFraction => &self.category_fractions,
            AggregationMode::MeanProbability => &self.mean_probabilities,
        }
    }
}

/// Builds a [`SiteReport`]. Both the argmax fractions and the mean
/// probabilities are filled in; `mode` only picks the headline. The result
/// does not depend on the order of `results`.
pub fn aggregate<F: Scalar>(
    site_id: &str,
    results: &[DetectionResult<F>],
    mode: AggregationMode,
) -> Result<SiteReport<F>, DetectionError> {
    if results.is_empty() {
        return Err(DetectionError::EmptySite(site_id.to_string()));
    }
    let mut ordered: Vec<&DetectionResult<F>> = results.iter().collect();
    ordered.sort_by(|a, b| {
        (&a.segment.page_url, a.segment.order_index, &a.segment.segment_id)
            .cmp(&(&b.segment.page_url, b.segment.order_index, &b.segment.segment_id))
    });
    let n = F::from_count(ordered.len());

    let mut counts = [0usize; Category::COUNT];
    let mut sums = CategoryMap::filled(F::zero());
    for r in &ordered {
        counts[r.predicted.index()] += 1;
        for (c, &p) in r.distribution.probs().iter() {
            sums[c] = sums[c] + p;
        }
    }
    let mut page_urls: Vec<String> = ordered.iter().map(|r| r.segment.page_url.clone()).collect();
    page_urls.dedup();

    Ok(SiteReport {
        site_id: site_id.to_string(),
        page_urls,
        n_segments: ordered.len(),
        category_fractions: CategoryMap::from_fn(|c| F::from_count(counts[c.index()]) / n),
        mean_probabilities: sums.map(|_, &s| s / n),
        flagged: ordered
            .into_iter()
            .filter(|r| r.is_flagged())
            .cloned()
            .collect(),
        aggregation_mode: mode,
    })
}

/// Tolerance under which two headline values count as equal.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSite {
    pub rank: usize,
    pub site_id: String,
    pub not_dark_pattern: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryComparison {
    pub category: Category,
    /// Headline value per site, in input order.
    pub values: Vec<(String, f64)>,
    /// First site minus second for a pair, max minus min otherwise.
    pub delta: f64,
    /// The site with the best value: highest for the benign category,
    /// lowest for dark ones. `None` when the best value is shared.
    pub better: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mode: AggregationMode,
    /// Sites from cleanest (highest benign share) to least clean; equal
    /// sites keep their input order.
    pub ranking: Vec<RankedSite>,
    /// `None` when the top of the ranking is shared.
    pub cleanest: Option<String>,
    pub categories: Vec<CategoryComparison>,
}

fn best_of(values: &[(String, f64)], higher_is_better: bool) -> Option<String> {
    let best = values
        .iter()
        .map(|(_, v)| *v)
        .fold(if higher_is_better { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
            if higher_is_better { a.max(b) } else { a.min(b) }
        });
    let mut winners = values.iter().filter(|(_, v)| (v - best).abs() <= TIE_TOLERANCE);
    let first = winners.next()?;
    match winners.next() {
        Some(_) => None,
        None => Some(first.0.clone()),
    }
}

/// What [`compare_sites`] needs to know about a site.
pub trait SiteProfile {
    fn site_id(&self) -> &str;
    fn mode(&self) -> AggregationMode;
    /// Headline value of `c` under [`SiteProfile::mode`].
    fn headline_value(&self, c: Category) -> f64;
}

impl<F: Scalar> SiteProfile for SiteReport<F> {
    fn site_id(&self) -> &str {
        &self.site_id
    }

    fn mode(&self) -> AggregationMode {
        self.aggregation_mode
    }

    fn headline_value(&self, c: Category) -> f64 {
        self.headline()[c].to_f64_lossy()
    }
}

/// Ranks sites by their benign share and names the better site per
/// category.
pub fn compare_sites<P: SiteProfile>(reports: &[P]) -> Result<ComparisonReport, DetectionError> {
    if reports.len() < 2 {
        return Err(DetectionError::TooFewReports(reports.len()));
    }
    let mode = reports[0].mode();
    if reports.iter().any(|r| r.mode() != mode) {
        return Err(DetectionError::ModeMismatch);
    }
    let value = |r: &P, c: Category| r.headline_value(c);

    let mut order: Vec<usize> = (0..reports.len()).collect();
    // stable sort keeps input order among equal sites
    order.sort_by(|&a, &b| {
        let (va, vb) = (value(&reports[a], Category::NotDarkPattern), value(&reports[b], Category::NotDarkPattern));
        if (va - vb).abs() <= TIE_TOLERANCE {
            std::cmp::Ordering::Equal
        } else {
            vb.total_cmp(&va)
        }
    });
    let ranking: Vec<RankedSite> = order
        .iter()
        .enumerate()
        .map(|(i, &k)| RankedSite {
            rank: i + 1,
            site_id: reports[k].site_id().to_string(),
            not_dark_pattern: value(&reports[k], Category::NotDarkPattern),
        })
        .collect();

    let categories: Vec<CategoryComparison> = Category::ALL
        .iter()
        .map(|&c| {
            let values: Vec<(String, f64)> =
                reports.iter().map(|r| (r.site_id().to_string(), value(r, c))).collect();
            let delta = if values.len() == 2 {
                values[0].1 - values[1].1
            } else {
                let max = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
                let min = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
                max - min
            };
            CategoryComparison {
                category: c,
                better: best_of(&values, !c.is_dark()),
                delta,
                values,
            }
        })
        .collect();

    let cleanest = categories[Category::NotDarkPattern.index()].better.clone();
    Ok(ComparisonReport {
        mode,
        ranking,
        cleanest,
        categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pct(v: [f64; 8]) -> CategoryDistribution<f64> {
        CategoryDistribution::from_percentages(CategoryMap(v)).unwrap()
    }

    // Probability tables for two published statements, canonical order.
    fn scarcity_statement() -> CategoryDistribution<f64> {
        pct([0.23, 0.29, 0.24, 0.29, 98.09, 0.24, 0.26, 0.35])
    }

    fn benign_statement() -> CategoryDistribution<f64> {
        pct([1.74, 5.83, 54.21, 1.43, 0.52, 2.75, 31.51, 2.01])
    }

    fn segment(i: usize, page: &str) -> TextSegment {
        TextSegment {
            segment_id: format!("{page}#{i}"),
            text: format!("segment {i}"),
            dom_path: "html > body".into(),
            order_index: i,
            page_url: page.into(),
        }
    }

    fn result(i: usize, d: CategoryDistribution<f64>) -> DetectionResult<f64> {
        DetectionResult::new(segment(i, "p1"), d, &ThresholdConfig::default())
    }

    #[test]
    fn predicts_published_categories() {
        assert_eq!(predict_category(&scarcity_statement()), Category::Scarcity);
        assert_eq!(predict_category(&benign_statement()), Category::NotDarkPattern);
        assert_eq!(predict_category(&CategoryDistribution::<f64>::uniform()), Category::ForcedAction);
    }

    #[test]
    fn flags_at_half() {
        let half = ThresholdConfig::uniform(0.5);
        assert_eq!(flag(&scarcity_statement(), &half), BTreeSet::from([Category::Scarcity]));
        assert!(flag(&benign_statement(), &half).is_empty());
        let zero = ThresholdConfig::uniform(0.0);
        let all = flag(&benign_statement(), &zero);
        assert_eq!(all.len(), 7);
        assert!(!all.contains(&Category::NotDarkPattern));
    }

    #[test]
    fn threshold_json() {
        let t = ThresholdConfig::<f64>::from_json(r#"{"Scarcity": 0.8, "social proof": 0.3}"#).unwrap();
        assert_eq!(t.get(Category::Scarcity), Some(0.8));
        assert_eq!(t.get(Category::SocialProof), Some(0.3));
        assert_eq!(t.get(Category::Urgency), Some(0.5));
        assert_eq!(t.get(Category::NotDarkPattern), None);
        assert!(ThresholdConfig::<f64>::from_json(r#"{"Scarcity": 1.5}"#).is_err());
        assert!(ThresholdConfig::<f64>::from_json(r#"{"Not Dark Pattern": 0.5}"#).is_err());
        assert!(ThresholdConfig::<f64>::from_json(r#"{"Urgent": 0.5}"#).is_err());
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(ThresholdConfig::<f64>::from_json(&json).unwrap(), t);
        assert!(!json.contains("Not Dark Pattern"));
    }

    #[test]
    fn aggregate_counts_argmax() {
        let nd = CategoryDistribution::point(Category::NotDarkPattern);
        let sc = CategoryDistribution::point(Category::Scarcity);
        let results = vec![result(0, nd), result(1, nd), result(2, nd), result(3, sc)];
        let report = aggregate("site", &results, AggregationMode::ArgmaxFraction).unwrap();
        assert_eq!(report.category_fractions[Category::NotDarkPattern], 0.75);
        assert_eq!(report.category_fractions[Category::Scarcity], 0.25);
        assert_eq!(report.category_fractions[Category::Urgency], 0.0);
        assert_eq!(report.n_segments, 4);
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.page_urls, vec!["p1"]);

        let single = aggregate("s", &results[3..], AggregationMode::ArgmaxFraction).unwrap();
        assert_eq!(single.category_fractions[Category::Scarcity], 1.0);
    }

    #[test]
    fn aggregate_means_two_distributions() {
        let d1 = pct([10.0, 10.0, 40.0, 10.0, 10.0, 10.0, 5.0, 5.0]);
        let d2 = pct([0.0, 20.0, 60.0, 0.0, 10.0, 0.0, 5.0, 5.0]);
        let report = aggregate("s", &[result(0, d1), result(1, d2)], AggregationMode::MeanProbability).unwrap();
        let expected = [0.05, 0.15, 0.5, 0.05, 0.1, 0.05, 0.05, 0.05];
        for (c, &p) in report.mean_probabilities.iter() {
            assert!((p - expected[c.index()]).abs() < 1e-12, "{c}");
        }
        let sum: f64 = report.mean_probabilities.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(report.headline(), &report.mean_probabilities);
    }

    #[test]
    fn empty_site_is_an_error() {
        assert!(matches!(
            aggregate::<f64>("s", &[], AggregationMode::ArgmaxFraction),
            Err(DetectionError::EmptySite(_))
        ));
    }

    fn fixed_report(id: &str, values: [f64; 8]) -> SiteReport<f64> {
        SiteReport {
            site_id: id.into(),
            page_urls: vec![],
            n_segments: 0,
            category_fractions: CategoryMap(values),
            mean_probabilities: CategoryMap(values),
            flagged: vec![],
            aggregation_mode: AggregationMode::MeanProbability,
        }
    }

    #[test]
    fn compares_published_site_pair() {
        let w1 = fixed_report("website1", [0.0, 0.06, 0.75, 0.0, 0.2, 0.0, 0.07, 0.073]);
        let w2 = fixed_report("website2", [0.0, 0.1, 0.68, 0.0, 0.02, 0.0, 0.11, 0.002]);
        let cmp = compare_sites(&[w2.clone(), w1.clone()]).unwrap();
        assert_eq!(cmp.ranking[0].site_id, "website1");
        assert_eq!(cmp.cleanest.as_deref(), Some("website1"));
        let better = |c: Category| cmp.categories[c.index()].better.clone();
        assert_eq!(better(Category::Scarcity).as_deref(), Some("website2"));
        assert_eq!(better(Category::Urgency).as_deref(), Some("website2"));
        assert_eq!(better(Category::SocialProof).as_deref(), Some("website1"));
        assert_eq!(better(Category::Misdirection).as_deref(), Some("website1"));
        assert_eq!(better(Category::ForcedAction), None);
        let scarcity = &cmp.categories[Category::Scarcity.index()];
        assert!((scarcity.delta - (0.02 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn identical_reports_tie_in_input_order() {
        let a = fixed_report("a", [0.0, 0.1, 0.7, 0.0, 0.2, 0.0, 0.0, 0.0]);
        let mut b = a.clone();
        b.site_id = "b".into();
        let cmp = compare_sites(&[a, b]).unwrap();
        assert_eq!(cmp.cleanest, None);
        assert_eq!(cmp.ranking[0].site_id, "a");
        assert_eq!(cmp.ranking[1].site_id, "b");
        assert!(cmp.categories.iter().all(|c| c.better.is_none() && c.delta == 0.0));
    }

    #[test]
    fn comparison_preconditions() {
        let a = fixed_report("a", [0.125; 8]);
        assert!(matches!(compare_sites(std::slice::from_ref(&a)), Err(DetectionError::TooFewReports(1))));
        let mut b = a.clone();
        b.aggregation_mode = AggregationMode::ArgmaxFraction;
        assert!(matches!(compare_sites(&[a, b]), Err(DetectionError::ModeMismatch)));
    }

    #[test]
    fn three_sites_rank_fully() {
        let cmp = compare_sites(&[
            fixed_report("low", [0.0, 0.0, 0.2, 0.0, 0.8, 0.0, 0.0, 0.0]),
            fixed_report("high", [0.0, 0.0, 0.9, 0.0, 0.1, 0.0, 0.0, 0.0]),
            fixed_report("mid", [0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0]),
        ])
        .unwrap();
        let ids: Vec<_> = cmp.ranking.iter().map(|r| r.site_id.as_str()).collect();
        assert_eq!(ids, vec!["high", "mid", "low"]);
        assert_eq!(cmp.ranking.iter().map(|r| r.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!((cmp.categories[Category::Scarcity.index()].delta - 0.7).abs() < 1e-12);
    }

    fn arb_distribution() -> impl Strategy<Value = CategoryDistribution<f64>> {
        prop::array::uniform8(0.0f64..1.0).prop_filter_map("non-zero mass", |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-6).then(|| CategoryDistribution::new(CategoryMap(w.map(|x| x / total))).ok()).flatten()
        })
    }

    proptest! {
        #[test]
        fn lowering_thresholds_only_adds_flags(
            d in arb_distribution(),
            high in prop::array::uniform8(0.0f64..=1.0),
            factors in prop::array::uniform8(0.0f64..=1.0),
        ) {
            let mut hi = ThresholdConfig::<f64>::default();
            let mut lo = ThresholdConfig::<f64>::default();
            for c in Category::DARK {
                hi.set(c, high[c.index()]).unwrap();
                lo.set(c, high[c.index()] * factors[c.index()]).unwrap();
            }
            prop_assert!(flag(&d, &lo).is_superset(&flag(&d, &hi)));
        }

        #[test]
        fn aggregate_is_permutation_invariant(
            ds in prop::collection::vec(arb_distribution(), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let results: Vec<_> = ds.into_iter().enumerate().map(|(i, d)| result(i, d)).collect();
            let mut shuffled = results.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = aggregate("s", &results, AggregationMode::ArgmaxFraction).unwrap();
            let b = aggregate("s", &shuffled, AggregationMode::ArgmaxFraction).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
