//! Seeded synthetic shop pages with a ground-truth manifest.
//!
//! The corpus has three sites of ten pages each, laid out as
//! `<root>/<site>/page-NN.html`, plus `<root>/manifest.json`. Every page
//! mixes benign copy, dark-pattern strings and text that a browser would
//! not show (scripts, styles, `hidden`, `display:none`, `aria-hidden`,
//! `<template>`, `<noscript>`). The manifest records, per page, the
//! normalized visible text blocks, the concealed strings and the injected
//! dark-pattern strings with their category.

use std::io;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const CORPUS_SEED: u64 = 20_240_501;

/// Word present in every concealed string and in no visible one.
pub const CONCEALED_MARKER: &str = "concealed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedString {
    pub text: String,
    /// Display name of the category.
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageManifest {
    pub site: String,
    /// Path relative to the corpus root.
    pub file: String,
    /// Normalized visible text blocks in document order, attribute texts
    /// (alt, placeholder, title) included.
    pub visible: Vec<String>,
    pub concealed: Vec<String>,
    pub injected: Vec<InjectedString>,
}

impl PageManifest {
    /// Visible blocks joined with newlines.
    pub fn visible_text(&self) -> String {
        self.visible.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub pages: Vec<PageManifest>,
}

impl CorpusManifest {
    pub fn injected_count(&self) -> usize {
        self.pages.iter().map(|p| p.injected.len()).sum()
    }
}

/// Statements used verbatim: three dark ones and one benign one.
pub const SCARCITY_STATEMENT: &str = "Hurry! Only 2 left in stock";
pub const NOISY_STATEMENT: &str =
    "sdjbfksbdfgbkldsglkdflgf subscribe now or regret the offer of 20% djkbfksjbglsbdfsdbfksdbfgkjsbdkgbskdbfsdbfsd";
pub const EMBEDDED_STATEMENT: &str = "My name is Jin Kazama and I am in Pune, get 30% off on this bottle but you'll have to sign up first or you'll miss it, let's go have camping together";
pub const BENIGN_STATEMENT: &str = "me and my friends are going to buy shoes which are 20% off";

const DARK_POOL: &[(&str, &str)] = &[
    ("Scarcity", "Only 3 left in stock, order soon"),
    ("Scarcity", "Low stock: 5 items remaining"),
    ("Scarcity", "Selling fast! Almost gone"),
    ("Scarcity", "Limited quantities available while supplies last"),
    ("Scarcity", "High demand: only a few left"),
    ("Urgency", "Hurry, sale ends tonight at midnight"),
    ("Urgency", "Limited time offer: 40% off ends in 02:14:33"),
    ("Urgency", "Last chance to save on summer styles"),
    ("Urgency", "Flash sale, today only"),
    ("Urgency", "Order within 2 hours for next-day delivery"),
    ("Social Proof", "12 people are viewing this item right now"),
    ("Social Proof", "248 customers bought this in the last 24 hours"),
    ("Social Proof", "Sarah from Leeds just purchased this jacket"),
    ("Social Proof", "In 37 carts right now"),
    ("Social Proof", "Trending: 500 sold in the last week"),
    ("Sneaking", "A protection plan has been added to your cart"),
    ("Sneaking", "A $4.99 service fee will be charged at checkout"),
    ("Sneaking", "Your membership renews automatically at $14.99/month"),
    ("Sneaking", "Gift wrap was automatically added to your order"),
    ("Sneaking", "Shipping insurance is pre-selected for your convenience"),
    ("Misdirection", "No thanks, I don't want to save money"),
    ("Misdirection", "I prefer to pay full price"),
    ("Misdirection", "No, I'd rather miss out on exclusive deals"),
    ("Misdirection", "You'll regret missing this offer"),
    ("Forced Action", "Create an account to see the price"),
    ("Forced Action", "You must sign up to continue shopping"),
    ("Forced Action", "Download the app to unlock this deal"),
    ("Forced Action", "Log in to continue to checkout"),
    ("Forced Action", "Subscribe to unlock member pricing"),
    ("Obstruction", "To cancel your subscription, call us to cancel during business hours"),
    ("Obstruction", "Memberships cannot be cancelled online"),
    ("Obstruction", "Contact customer service to delete your account"),
    ("Obstruction", "Cancellation requests must be sent by mail"),
    ("Obstruction", "Are you sure you want to leave? You will lose your rewards"),
];

const BENIGN_POOL: &[&str] = &[
    "Free shipping on orders over $50",
    "Returns accepted within 30 days of delivery",
    "Machine washable cotton blend",
    "Our story began in a small workshop in 1998",
    "Customer reviews",
    "Product details",
    "Made from recycled materials",
    "Available in five colours",
    "Questions about sizing? Read our size guide",
    "Secure payment with all major cards",
    "Sign up for our newsletter to hear about new arrivals",
    "Handmade by artisans in Portugal",
    "This jacket is water resistant and breathable",
    "Track your order from your account page",
    "Gift cards never expire",
    BENIGN_STATEMENT,
];

const PRODUCTS: &[&str] = &[
    "Classic Leather Boots",
    "Organic Cotton T-Shirt",
    "Stainless Steel Water Bottle",
    "Waterproof Hiking Jacket",
    "Wool Blend Scarf",
    "Canvas Weekend Bag",
    "Ceramic Pour-Over Set",
    "Bamboo Cutting Board",
];

const SITES: &[(&str, usize)] = &[("bravo-mart", 2), ("clean-goods", 1), ("rush-deals", 4)];

const PAGES_PER_SITE: usize = 10;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn attr_escape(text: &str) -> String {
    escape(text).replace('"', "&quot;")
}

/// Whitespace-collapsed, trimmed text.
fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// HTML for `text`, possibly split by inline markup and re-wrapped lines.
fn inline_markup(text: &str, rng: &mut ChaCha8Rng) -> String {
    let words: Vec<&str> = text.split(' ').collect();
    let mut html = if words.len() >= 3 && rng.random_bool(0.5) {
        let a = rng.random_range(0..words.len() - 1);
        let b = rng.random_range(a + 1..words.len());
        let tag = *["strong", "em", "span", "b", "a"].choose(rng).expect("non-empty");
        let open = if tag == "a" { "a href=\"#\"".to_string() } else { tag.to_string() };
        let before = escape(&words[..a].join(" "));
        let middle = escape(&words[a..b].join(" "));
        let after = escape(&words[b..].join(" "));
        let mut s = String::new();
        if !before.is_empty() {
            s.push_str(&before);
            s.push(' ');
        }
        s.push_str(&format!("<{open}>{middle}</{tag}>"));
        if !after.is_empty() {
            s.push(' ');
            s.push_str(&after);
        }
        s
    } else {
        escape(text)
    };
    if rng.random_bool(0.3) {
        if let Some(i) = html.find(' ') {
            html.replace_range(i..i + 1, "\n        ");
        }
    }
    html
}

enum Block {
    Visible(String),
    Dark(&'static str, String),
    Concealed(String),
}

struct PageBuilder {
    html: String,
    manifest: PageManifest,
}

impl PageBuilder {
    fn visible_block(&mut self, tag: &str, text: &str, rng: &mut ChaCha8Rng) {
        let html = inline_markup(text, rng);
        self.html.push_str(&format!("      <{tag}>{html}</{tag}>\n"));
        self.manifest.visible.push(collapse(text));
    }

    fn concealed_block(&mut self, text: &str, rng: &mut ChaCha8Rng) {
        let t = escape(text);
        let html = match rng.random_range(0..8) {
            0 => format!("<script>window.promo = \"{t}\";</script>"),
            1 => format!("<style>.promo::after {{ content: \"{t}\"; }}</style>"),
            2 => format!("<div style=\"display:none\">{t}</div>"),
            3 => format!("<div hidden><p>{t}</p></div>"),
            4 => format!("<span aria-hidden=\"true\">{t}</span>"),
            5 => format!("<template><p>{t}</p></template>"),
            6 => format!("<noscript>{t}</noscript>"),
            _ => format!("<p style=\"visibility: hidden\">{t}</p>"),
        };
        self.html.push_str(&format!("      {html}\n"));
        self.manifest.concealed.push(collapse(text));
    }
}

fn build_page(site: &str, page: usize, dark_per_page: usize, rng: &mut ChaCha8Rng) -> (String, PageManifest) {
    let file = format!("{site}/page-{page:02}.html");
    let product = *PRODUCTS.choose(rng).expect("products");
    let mut b = PageBuilder {
        html: String::new(),
        manifest: PageManifest {
            site: site.into(),
            file,
            visible: Vec::new(),
            concealed: Vec::new(),
            injected: Vec::new(),
        },
    };

    let mut blocks: Vec<Block> = Vec::new();
    let n_benign = rng.random_range(2..=5);
    for t in BENIGN_POOL.choose_multiple(rng, n_benign) {
        blocks.push(Block::Visible((*t).to_string()));
    }
    let mut dark: Vec<(&'static str, String)> = Vec::new();
    match (site, page) {
        ("rush-deals", 1) => dark.push(("Scarcity", SCARCITY_STATEMENT.into())),
        ("rush-deals", 2) => dark.push(("Misdirection", NOISY_STATEMENT.into())),
        ("bravo-mart", 3) => dark.push(("Misdirection", EMBEDDED_STATEMENT.into())),
        _ => {}
    }
    let n_dark = if site == "clean-goods" {
        usize::from(rng.random_bool(0.3))
    } else {
        rng.random_range(dark_per_page.saturating_sub(1)..=dark_per_page)
    };
    for (c, t) in DARK_POOL.choose_multiple(rng, n_dark) {
        dark.push((c, (*t).to_string()));
    }
    for (c, t) in dark {
        blocks.push(Block::Dark(c, t));
    }
    for i in 0..rng.random_range(2..=4) {
        let (_, dark_text) = DARK_POOL.choose(rng).expect("pool");
        blocks.push(Block::Concealed(format!(
            "{CONCEALED_MARKER} note {page}-{i}: {dark_text}"
        )));
    }
    blocks.shuffle(rng);

    b.html.push_str(&format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n  <meta charset=\"utf-8\">\n  <title>{site} | {product}</title>\n"
    ));
    b.html.push_str("  <style>body { font-family: sans-serif; }</style>\n");
    b.html.push_str("  <script>console.log(\"analytics ready\");</script>\n</head>\n<body>\n");

    b.html.push_str("  <header>\n    <nav>\n      <ul>\n");
    for item in ["Home", "Shop all", "Contact us"] {
        b.html.push_str(&format!("        <li><a href=\"#\">{item}</a></li>\n"));
        b.manifest.visible.push(item.into());
    }
    b.html.push_str("      </ul>\n    </nav>\n");
    let placeholder = "Search products";
    b.html.push_str(&format!(
        "    <form><input type=\"search\" placeholder=\"{placeholder}\"><input type=\"hidden\" name=\"ref\" value=\"{CONCEALED_MARKER} referral code\"></form>\n"
    ));
    b.manifest.visible.push(placeholder.into());
    b.html.push_str("  </header>\n  <main>\n    <section class=\"product\">\n");
    b.visible_block("h1", product, rng);
    let alt = format!("Photo of the {}", product.to_lowercase());
    b.html.push_str(&format!("      <img src=\"product.jpg\" alt=\"{}\">\n", attr_escape(&alt)));
    b.manifest.visible.push(alt);
    b.html.push_str(&format!("      <p class=\"price\">${}.99</p>\n", rng.random_range(9..200)));

    for block in blocks {
        match block {
            Block::Visible(t) => {
                let tag = *["p", "div", "li", "h3"].choose(rng).expect("tags");
                if tag == "li" {
                    b.html.push_str("      <ul>\n");
                    b.visible_block("li", &t, rng);
                    b.html.push_str("      </ul>\n");
                } else {
                    b.visible_block(tag, &t, rng);
                }
            }
            Block::Dark(c, t) => {
                let tag = *["p", "div", "span"].choose(rng).expect("tags");
                if tag == "span" {
                    // a lone inline element still forms its own block inside the div
                    b.html.push_str("      <div class=\"badge\">");
                    let html = inline_markup(&t, rng);
                    b.html.push_str(&format!("<span>{html}</span></div>\n"));
                    b.manifest.visible.push(collapse(&t));
                } else {
                    b.visible_block(tag, &t, rng);
                }
                b.manifest.injected.push(InjectedString {
                    text: collapse(&t),
                    category: c.into(),
                });
            }
            Block::Concealed(t) => b.concealed_block(&t, rng),
        }
    }
    b.html.push_str("      <button type=\"button\">Add to bag</button>\n");
    b.manifest.visible.push("Add to bag".into());
    b.html.push_str("    </section>\n  </main>\n  <footer>\n");
    b.visible_block("p", "Privacy policy and terms of service", rng);
    b.html.push_str("  </footer>\n</body>\n</html>\n");
    (b.html, b.manifest)
}

/// Builds the corpus in memory: `(relative path, html)` per page plus the
/// manifest.
pub fn build_corpus(seed: u64) -> (Vec<(String, String)>, CorpusManifest) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut files = Vec::new();
    let mut pages = Vec::new();
    for &(site, dark_per_page) in SITES {
        for page in 1..=PAGES_PER_SITE {
            let (html, manifest) = build_page(site, page, dark_per_page, &mut rng);
            files.push((manifest.file.clone(), html));
            pages.push(manifest);
        }
    }
    (files, CorpusManifest { seed, pages })
}

/// Writes the corpus and `manifest.json` under `root`.
pub fn generate_corpus(root: &Path, seed: u64) -> io::Result<CorpusManifest> {
    let (files, manifest) = build_corpus(seed);
    for (rel, html) in files {
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, html)?;
    }
    std::fs::write(root.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let (files, manifest) = build_corpus(CORPUS_SEED);
        assert_eq!(files.len(), 30);
        assert_eq!(manifest.pages.len(), 30);
        let all: Vec<&str> = manifest
            .pages
            .iter()
            .flat_map(|p| p.injected.iter().map(|i| i.text.as_str()))
            .collect();
        for s in [SCARCITY_STATEMENT, NOISY_STATEMENT, EMBEDDED_STATEMENT] {
            assert!(all.contains(&s));
        }
        assert!(manifest.injected_count() >= 40);
        for p in &manifest.pages {
            assert!(!p.concealed.is_empty());
            assert!(!p.visible_text().contains(CONCEALED_MARKER));
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(build_corpus(7), build_corpus(7));
        assert_ne!(build_corpus(7).0, build_corpus(8).0);
    }
}
