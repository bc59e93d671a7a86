//! JSON and Markdown rendering of site reports and comparisons.
//!
//! Report JSON has a fixed shape:
//!
//! ```json
//! {
//!   "site_id": "shop",
//!   "pages": ["https://shop.example/"],
//!   "n_segments": 12,
//!   "mode": "argmax",
//!   "fractions": { "Forced Action": 0.0, ... },
//!   "mean_probabilities": { "Forced Action": 0.01, ... },
//!   "flags": [
//!     { "text": "...", "dom_path": "...", "page_url": "...",
//!       "categories": ["Scarcity"], "probabilities": { ... } }
//!   ]
//! }
//! ```
//!
//! Category maps always carry all eight categories in canonical order.
//! Numbers are plain decimals with at most six fractional digits.

use std::fmt::Write as _;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::detection::{AggregationMode, ComparisonReport, SiteProfile, SiteReport};
use crate::scalar::Scalar;
use crate::taxonomy::{Category, CategoryMap};

/// Two example site profiles shipped with the crate, as `(file name, JSON)`.
/// Their numbers are observed shares per category for two shops; they are
/// stored as mean-probability reports.
pub const EXAMPLE_REPORTS: [(&str, &str); 2] = [
    ("website1.json", include_str!("../data/reports/website1.json")),
    ("website2.json", include_str!("../data/reports/website2.json")),
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report is not valid JSON for the report schema: {0}")]
    Parse(String),
    #[error("report violates the schema: {0}")]
    Schema(String),
    #[error("unknown format {0:?}; expected json or md")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

/// One flagged segment as it appears in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagEntry {
    pub text: String,
    pub dom_path: String,
    pub page_url: String,
    pub categories: Vec<Category>,
    pub probabilities: CategoryMap<f64>,
}

/// The serialized form of a [`SiteReport`]. Values are rounded to six
/// decimals, so a document parsed from disk renders back byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub site_id: String,
    pub pages: Vec<String>,
    pub n_segments: usize,
    pub mode: AggregationMode,
    pub fractions: CategoryMap<f64>,
    pub mean_probabilities: CategoryMap<f64>,
    pub flags: Vec<FlagEntry>,
}

fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn rounded<F: Scalar>(m: &CategoryMap<F>) -> CategoryMap<f64> {
    m.map(|_, v| round6(v.to_f64_lossy()))
}

impl<F: Scalar> From<&SiteReport<F>> for ReportDocument {
    fn from(r: &SiteReport<F>) -> Self {
        ReportDocument {
            site_id: r.site_id.clone(),
            pages: r.page_urls.clone(),
            n_segments: r.n_segments,
            mode: r.aggregation_mode,
            fractions: rounded(&r.category_fractions),
            mean_probabilities: rounded(&r.mean_probabilities),
            flags: r
                .flagged
                .iter()
                .map(|d| FlagEntry {
                    text: d.segment.text.clone(),
                    dom_path: d.segment.dom_path.clone(),
                    page_url: d.segment.page_url.clone(),
                    categories: d.flagged_categories.iter().copied().collect(),
                    probabilities: rounded(d.distribution.probs()),
                })
                .collect(),
        }
    }
}

impl ReportDocument {
    pub fn headline(&self) -> &CategoryMap<f64> {
        match self.mode {
            AggregationMode::ArgmaxFraction => &self.fractions,
            AggregationMode::MeanProbability => &self.mean_probabilities,
        }
    }

    pub fn to_json(&self) -> String {
        to_decimal_json(self)
    }

    /// Parses and validates a report.
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        validate_report_json(text)
    }
}

impl SiteProfile for ReportDocument {
    fn site_id(&self) -> &str {
        &self.site_id
    }

    fn mode(&self) -> AggregationMode {
        self.mode
    }

    fn headline_value(&self, c: Category) -> f64 {
        self.headline()[c]
    }
}

/// Formats a float as a plain decimal with at most six fractional digits
/// and at least one.
pub fn format_decimal(x: f64) -> String {
    let x = if x.is_finite() { x } else { 0.0 };
    let mut s = format!("{x:.6}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".into();
    }
    s
}

/// Pretty-printed JSON whose floats never use exponent notation.
struct DecimalFormatter(PrettyFormatter<'static>);

impl Formatter for DecimalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_decimal(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as indented JSON with plain-decimal floats.
pub fn to_decimal_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, DecimalFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// Number tokens outside string literals.
fn number_tokens(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let (mut i, mut in_string) = (0, false);
    while i < bytes.len() {
        let b = bytes[i];
        if in_string {
            match b {
                b'\\' => i += 1,
                b'"' => in_string = false,
                _ => {}
            }
            i += 1;
        } else if b == b'"' {
            in_string = true;
            i += 1;
        } else if b == b'-' || b.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && matches!(bytes[i], b'-' | b'+' | b'.' | b'e' | b'E' | b'0'..=b'9') {
                i += 1;
            }
            tokens.push(&text[start..i]);
        } else {
            i += 1;
        }
    }
    tokens
}

fn schema(msg: impl Into<String>) -> ReportError {
    ReportError::Schema(msg.into())
}

/// Parses `text` as report JSON and checks the schema: exact field names,
/// all eight categories in every map, values in [0, 1], flags naming dark
/// categories only, and plain-decimal numbers with at most six fractional
/// digits.
pub fn validate_report_json(text: &str) -> Result<ReportDocument, ReportError> {
    let doc: ReportDocument = serde_json::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))?;
    for token in number_tokens(text) {
        if token.contains(['e', 'E']) {
            return Err(schema(format!("number {token} uses exponent notation")));
        }
        if let Some((_, frac)) = token.split_once('.') {
            if frac.len() > 6 {
                return Err(schema(format!("number {token} has more than six fractional digits")));
            }
        }
    }
    let in_unit = |m: &CategoryMap<f64>| m.values().iter().all(|v| (0.0..=1.0).contains(v));
    if !in_unit(&doc.fractions) || !in_unit(&doc.mean_probabilities) {
        return Err(schema("category values must lie in [0, 1]"));
    }
    if doc.flags.len() > doc.n_segments && doc.n_segments > 0 {
        return Err(schema("more flags than segments"));
    }
    for flag in &doc.flags {
        if flag.categories.is_empty() {
            return Err(schema(format!("flag {:?} names no category", flag.text)));
        }
        if flag.categories.iter().any(|c| !c.is_dark()) {
            return Err(schema(format!("flag {:?} names {}", flag.text, Category::NotDarkPattern)));
        }
        if !flag.categories.windows(2).all(|w| w[0] < w[1]) {
            return Err(schema(format!("flag {:?} categories are not in canonical order", flag.text)));
        }
        if !in_unit(&flag.probabilities) {
            return Err(schema(format!("flag {:?} has a probability outside [0, 1]", flag.text)));
        }
    }
    Ok(doc)
}

/// Alias for [`validate_report_json`].
pub fn parse_report(text: &str) -> Result<ReportDocument, ReportError> {
    validate_report_json(text)
}

pub fn render_report<F: Scalar>(report: &SiteReport<F>, format: ReportFormat) -> String {
    render_document(&ReportDocument::from(report), format)
}

pub fn render_document(doc: &ReportDocument, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => doc.to_json(),
        ReportFormat::Markdown => document_markdown(doc),
    }
}

fn document_markdown(doc: &ReportDocument) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Dark-pattern report: {}\n", doc.site_id);
    let _ = writeln!(md, "- Pages: {}", doc.pages.len());
    for page in &doc.pages {
        let _ = writeln!(md, "  - {page}");
    }
    let _ = writeln!(md, "- Segments: {}", doc.n_segments);
    let _ = writeln!(md, "- Aggregation: {}\n", doc.mode.as_str());
    let _ = writeln!(md, "| Category | Fraction | Mean probability |");
    let _ = writeln!(md, "|---|---:|---:|");
    for c in Category::ALL {
        let _ = writeln!(
            md,
            "| {c} | {} | {} |",
            format_decimal(doc.fractions[c]),
            format_decimal(doc.mean_probabilities[c])
        );
    }
    let _ = writeln!(md, "\n## Flagged segments\n");
    if doc.flags.is_empty() {
        let _ = writeln!(md, "No segments reached a threshold.");
        return md;
    }
    for c in Category::DARK {
        let hits: Vec<&FlagEntry> = doc.flags.iter().filter(|f| f.categories.contains(&c)).collect();
        if hits.is_empty() {
            continue;
        }
        let _ = writeln!(md, "### {c}\n");
        for f in hits {
            let cats: Vec<&str> = f.categories.iter().map(|c| c.display_name()).collect();
            let _ = writeln!(
                md,
                "- \"{}\" ({} {}; categories: {}; `{}` on {})",
                f.text.replace('"', "\\\""),
                c,
                format_decimal(f.probabilities[c]),
                cats.join(", "),
                f.dom_path,
                f.page_url
            );
        }
        md.push('\n');
    }
    md
}

#[derive(Serialize)]
struct SiteValue<'a> {
    site_id: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct CategoryRow<'a> {
    category: Category,
    values: Vec<SiteValue<'a>>,
    delta: f64,
    better: &'a str,
}

#[derive(Serialize)]
struct ComparisonDocument<'a> {
    mode: AggregationMode,
    ranking: &'a [crate::detection::RankedSite],
    cleanest: &'a str,
    categories: Vec<CategoryRow<'a>>,
}

pub fn render_comparison(cmp: &ComparisonReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let doc = ComparisonDocument {
                mode: cmp.mode,
                ranking: &cmp.ranking,
                cleanest: cmp.cleanest.as_deref().unwrap_or("tie"),
                categories: cmp
                    .categories
                    .iter()
                    .map(|row| CategoryRow {
                        category: row.category,
                        values: row
                            .values
                            .iter()
                            .map(|(s, v)| SiteValue {
                                site_id: s,
                                value: round6(*v),
                            })
                            .collect(),
                        delta: round6(row.delta),
                        better: row.better.as_deref().unwrap_or("tie"),
                    })
                    .collect(),
            };
            to_decimal_json(&doc)
        }
        ReportFormat::Markdown => comparison_markdown(cmp),
    }
}

fn comparison_markdown(cmp: &ComparisonReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Site comparison ({})\n", cmp.mode.as_str());
    let _ = writeln!(md, "## Ranking by {} share\n", Category::NotDarkPattern);
    for r in &cmp.ranking {
        let _ = writeln!(md, "{}. {} ({})", r.rank, r.site_id, format_decimal(r.not_dark_pattern));
    }
    match &cmp.cleanest {
        Some(site) => {
            let _ = writeln!(md, "\nOverall better: {site}\n");
        }
        None => {
            let _ = writeln!(md, "\nOverall: tie\n");
        }
    }
    let _ = writeln!(md, "## Per category\n");
    let _ = writeln!(
        md,
        "Higher is better for {}; lower is better for the dark categories.\n",
        Category::NotDarkPattern
    );
    let sites: Vec<&str> = cmp
        .categories
        .first()
        .map(|row| row.values.iter().map(|(s, _)| s.as_str()).collect())
        .unwrap_or_default();
    let _ = writeln!(md, "| Category | {} | Delta | Better |", sites.join(" | "));
    let _ = writeln!(md, "|---|{}---:|---|", "---:|".repeat(sites.len()));
    for row in &cmp.categories {
        let values: Vec<String> = row.values.iter().map(|(_, v)| format_decimal(*v)).collect();
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            row.category,
            values.join(" | "),
            format_decimal(row.delta),
            row.better.as_deref().unwrap_or("tie")
        );
    }
    md
}
