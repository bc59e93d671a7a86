use ego_tree::NodeRef;
use scraper::{Html, Node};
use sha2::{Digest, Sha256};

use super::{normalize_text, IngestError, PageSource, TextSegment};

/// Knobs for [`extract_segments`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationRules {
    /// Segments with fewer characters than this are dropped.
    pub min_chars: usize,
    /// Emit `alt`, `title`, `placeholder` and button `value` text as segments.
    pub include_attributes: bool,
}

impl Default for SegmentationRules {
    fn default() -> Self {
        SegmentationRules {
            min_chars: 3,
            include_attributes: true,
        }
    }
}

const EXCLUDED: &[&str] = &["script", "style", "noscript", "template", "head"];

// Form controls are not block-level in CSS, but each one is a distinct
// statement on screen, so they also delimit runs.
const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "button", "caption", "dd",
    "details", "dialog", "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form",
    "h1", "h2", "h3", "h4", "h5", "h6", "header", "hgroup", "hr", "html", "legend", "li", "main",
    "menu", "nav", "ol", "optgroup", "option", "p", "pre", "section", "select", "summary", "table",
    "tbody", "td", "textarea", "tfoot", "th", "thead", "tr", "ul",
];

fn is_hidden(el: &scraper::node::Element) -> bool {
    if el.attr("hidden").is_some() {
        return true;
    }
    if el
        .attr("aria-hidden")
        .is_some_and(|v| v.trim().eq_ignore_ascii_case("true"))
    {
        return true;
    }
    if el.name() == "input"
        && el
            .attr("type")
            .is_some_and(|t| t.trim().eq_ignore_ascii_case("hidden"))
    {
        return true;
    }
    if let Some(style) = el.attr("style") {
        let compact: String = style
            .chars()
            .filter(|c| !c.is_whitespace())
            .flat_map(char::to_lowercase)
            .collect();
        return compact
            .split(';')
            .any(|decl| decl.starts_with("display:none") || decl.starts_with("visibility:hidden"));
    }
    false
}

fn attribute_texts(el: &scraper::node::Element) -> Vec<&str> {
    let mut out = Vec::new();
    if let Some(alt) = el.attr("alt") {
        out.push(alt);
    }
    if let Some(title) = el.attr("title") {
        out.push(title);
    }
    if let Some(placeholder) = el.attr("placeholder") {
        out.push(placeholder);
    }
    if el.name() == "input" {
        let kind = el.attr("type").unwrap_or("").trim().to_ascii_lowercase();
        if matches!(kind.as_str(), "button" | "submit" | "reset") {
            if let Some(value) = el.attr("value") {
                out.push(value);
            }
        }
    }
    out
}

fn path_step(node: NodeRef<'_, Node>, name: &str) -> String {
    if name == "html" || name == "body" {
        return name.to_string();
    }
    let position = 1 + node
        .prev_siblings()
        .filter(|s| s.value().as_element().is_some_and(|e| e.name() == name))
        .count();
    format!("{name}:nth-of-type({position})")
}

fn segment_id(page_url: &str, order_index: usize, text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(page_url.as_bytes());
    hasher.update([0u8]);
    hasher.update(order_index.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Walker<'r> {
    rules: &'r SegmentationRules,
    page_url: &'r str,
    segments: Vec<TextSegment>,
    run: String,
    run_path: String,
    pending_attributes: Vec<(String, String)>,
}

impl Walker<'_> {
    fn emit(&mut self, raw: &str, dom_path: &str) {
        let text = normalize_text(raw);
        if text.chars().count() < self.rules.min_chars || !text.chars().any(char::is_alphabetic) {
            return;
        }
        let order_index = self.segments.len();
        self.segments.push(TextSegment {
            segment_id: segment_id(self.page_url, order_index, &text),
            text,
            dom_path: dom_path.to_string(),
            order_index,
            page_url: self.page_url.to_string(),
        });
    }

    fn flush(&mut self) {
        let run = std::mem::take(&mut self.run);
        let path = std::mem::take(&mut self.run_path);
        self.emit(&run, &path);
        for (text, path) in std::mem::take(&mut self.pending_attributes) {
            self.emit(&text, &path);
        }
    }

    fn visit(&mut self, node: NodeRef<'_, Node>, block_path: &str, path: &str) {
        match node.value() {
            Node::Text(text) => {
                if self.run.is_empty() {
                    self.run_path = block_path.to_string();
                }
                self.run.push_str(text);
            }
            Node::Element(el) => {
                let name = el.name();
                if EXCLUDED.contains(&name) || is_hidden(el) {
                    return;
                }
                let own_path = if path.is_empty() {
                    path_step(node, name)
                } else {
                    format!("{path} > {}", path_step(node, name))
                };
                let is_block = BLOCKS.contains(&name);
                if is_block {
                    self.flush();
                }
                if self.rules.include_attributes {
                    for text in attribute_texts(el) {
                        self.pending_attributes.push((text.to_string(), own_path.clone()));
                    }
                }
                let child_block_path = if is_block { own_path.as_str() } else { block_path };
                for child in node.children() {
                    self.visit(child, child_block_path, &own_path);
                }
                if is_block {
                    self.flush();
                }
            }
            Node::Document | Node::Fragment => {
                for child in node.children() {
                    self.visit(child, block_path, path);
                }
            }
            _ => {}
        }
    }
}

/// Splits a page into visible-text segments in document order.
///
/// Text under `script`, `style`, `noscript`, `template` and `head` is skipped,
/// as is everything inside an element marked `hidden`, `aria-hidden="true"`,
/// or styled inline with `display:none` / `visibility:hidden`. Block elements
/// delimit segments; inline markup does not. Attribute text is emitted right
/// after the segment that contains its element.
pub fn extract_segments(
    page: &PageSource,
    rules: &SegmentationRules,
) -> Result<Vec<TextSegment>, IngestError> {
    if page.html.trim().is_empty() {
        return Err(IngestError::ParseFailure(format!("{}: empty document", page.url)));
    }
    let document = Html::parse_document(&page.html);
    let mut walker = Walker {
        rules,
        page_url: &page.url,
        segments: Vec::new(),
        run: String::new(),
        run_path: String::new(),
        pending_attributes: Vec::new(),
    };
    walker.visit(document.tree.root(), "", "");
    walker.flush();
    Ok(walker.segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(html: &str) -> Vec<String> {
        let page = PageSource::from_html("mem://page", html);
        extract_segments(&page, &SegmentationRules::default())
            .unwrap()
            .into_iter()
            .map(|s| s.text)
            .collect()
    }

    #[test]
    fn drops_script_text() {
        assert_eq!(
            texts("<body><p>Hurry! Only 2 left in stock</p><script>x()</script></body>"),
            vec!["Hurry! Only 2 left in stock"]
        );
    }

    #[test]
    fn empty_body_yields_nothing() {
        assert!(texts("<body></body>").is_empty());
    }

    #[test]
    fn inline_markup_joins_and_hidden_is_skipped() {
        assert_eq!(
            texts("<div>Free <b>shipping</b> today</div><div hidden>secret</div>"),
            vec!["Free shipping today"]
        );
    }

    #[test]
    fn empty_input_is_a_parse_failure() {
        let page = PageSource::from_html("mem://empty", "  \n");
        assert!(matches!(
            extract_segments(&page, &SegmentationRules::default()),
            Err(IngestError::ParseFailure(_))
        ));
    }

    #[test]
    fn all_hiding_mechanisms_apply() {
        let html = r#"<html><head><title>Shop title</title><style>.a{}</style></head><body>
            <p aria-hidden="true">aria hidden text</p>
            <p style="color: red; display : none">display none text</p>
            <p style="VISIBILITY:hidden">visibility hidden text</p>
            <noscript>enable javascript please</noscript>
            <template><p>template text</p></template>
            <input type="hidden" value="hidden input">
            <p>Visible words here</p>
        </body></html>"#;
        assert_eq!(texts(html), vec!["Visible words here"]);
    }

    #[test]
    fn short_and_numeric_segments_are_dropped() {
        assert_eq!(
            texts("<ul><li>ok</li><li>$19.99</li><li>100%</li><li>Add to cart</li></ul>"),
            vec!["Add to cart"]
        );
    }

    #[test]
    fn duplicates_are_kept_in_order() {
        assert_eq!(
            texts("<p>Only 1 left</p><p>Buy now today</p><p>Only 1 left</p>"),
            vec!["Only 1 left", "Buy now today", "Only 1 left"]
        );
    }

    #[test]
    fn attribute_text_follows_its_run() {
        let html = r#"<p>Buy this <img alt="Best seller badge"> lamp</p>
            <form><input type="submit" value="No thanks, I hate saving"><input placeholder="Your email address"></form>"#;
        assert_eq!(
            texts(html),
            vec![
                "Buy this lamp",
                "Best seller badge",
                "No thanks, I hate saving",
                "Your email address"
            ]
        );
    }

    #[test]
    fn br_splits_runs() {
        assert_eq!(texts("<p>first line<br>second line</p>"), vec!["first line", "second line"]);
    }

    #[test]
    fn ids_paths_and_indices() {
        let page = PageSource::from_html(
            "mem://p",
            "<body><div><p>alpha one</p><p>beta <span>two</span></p></div></body>",
        );
        let segs = extract_segments(&page, &SegmentationRules::default()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].order_index, 0);
        assert_eq!(segs[1].order_index, 1);
        assert_eq!(segs[0].dom_path, "html > body > div:nth-of-type(1) > p:nth-of-type(1)");
        assert_eq!(segs[1].dom_path, "html > body > div:nth-of-type(1) > p:nth-of-type(2)");
        assert_ne!(segs[0].segment_id, segs[1].segment_id);
        assert_eq!(segs[0].page_url, "mem://p");
        let again = extract_segments(&page, &SegmentationRules::default()).unwrap();
        assert_eq!(segs, again);
    }

    #[test]
    fn min_chars_is_configurable() {
        let page = PageSource::from_html("mem://p", "<p>Go</p><p>Sale ends</p>");
        let rules = SegmentationRules {
            min_chars: 10,
            ..Default::default()
        };
        assert!(extract_segments(&page, &rules).unwrap().is_empty());
        let rules = SegmentationRules {
            min_chars: 2,
            ..Default::default()
        };
        assert_eq!(extract_segments(&page, &rules).unwrap().len(), 2);
    }
}
