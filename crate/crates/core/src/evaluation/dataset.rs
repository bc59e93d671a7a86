use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::normalize_text;
use crate::taxonomy::{parse_label, Category};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: Category,
}

/// A row that could not be turned into an example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    /// Line number in the file (the header is line 1).
    pub line: u64,
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub examples: Vec<LabeledExample>,
    pub rejects: Vec<RejectedRow>,
}

fn unreadable(path: &Path, e: impl ToString) -> EvalError {
    EvalError::FileUnreadable {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Loads a `text,label` CSV (tab-separated when the file ends in `.tsv`).
/// Columns are found by header name. Texts are normalized; rows with an
/// unknown label or an empty text end up in `rejects`.
pub fn load_dataset(path: &Path) -> Result<LoadedDataset, EvalError> {
    let tsv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(if tsv { b'\t' } else { b',' })
        .flexible(true)
        .from_path(path)
        .map_err(|e| unreadable(path, e))?;
    let headers = reader.headers().map_err(|e| unreadable(path, e))?.clone();
    let column = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or(EvalError::MissingHeader(name))
    };
    let text_col = column("text")?;
    let label_col = column("label")?;

    let mut out = LoadedDataset::default();
    for record in reader.records() {
        let record = record.map_err(|e| unreadable(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_label = record.get(label_col).unwrap_or("").to_string();
        let text = normalize_text(record.get(text_col).unwrap_or(""));
        match parse_label(&raw_label) {
            Err(_) => out.rejects.push(RejectedRow {
                line,
                label: raw_label,
                reason: "unknown label".into(),
            }),
            Ok(_) if text.is_empty() => out.rejects.push(RejectedRow {
                line,
                label: raw_label,
                reason: "empty text".into(),
            }),
            Ok(label) => out.examples.push(LabeledExample { text, label }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_valid_rows() {
        let f = write("text,label\n\"Hurry!  Only 2 left\",Scarcity\nplain words,Not Dark Pattern\n", ".csv");
        let d = load_dataset(f.path()).unwrap();
        assert_eq!(d.examples.len(), 2);
        assert!(d.rejects.is_empty());
        assert_eq!(d.examples[0].text, "Hurry! Only 2 left");
        assert_eq!(d.examples[1].label, Category::NotDarkPattern);
    }

    #[test]
    fn unknown_labels_are_rejected_with_line() {
        let f = write("text,label\nfine,Urgency\nOnly 1 left,Scaricty\n", ".csv");
        let d = load_dataset(f.path()).unwrap();
        assert_eq!(d.examples.len(), 1);
        assert_eq!(
            d.rejects,
            vec![RejectedRow {
                line: 3,
                label: "Scaricty".into(),
                reason: "unknown label".into()
            }]
        );
    }

    #[test]
    fn columns_resolve_by_name() {
        let f = write("label,text\nSocial Proof,\"12 people bought this, today\"\n", ".csv");
        let d = load_dataset(f.path()).unwrap();
        assert_eq!(d.examples[0].text, "12 people bought this, today");
        assert_eq!(d.examples[0].label, Category::SocialProof);
    }

    #[test]
    fn tsv_and_errors() {
        let f = write("text\tlabel\nEnds tonight\turgency\n", ".tsv");
        assert_eq!(load_dataset(f.path()).unwrap().examples[0].label, Category::Urgency);
        let f = write("sentence,label\nx,Urgency\n", ".csv");
        assert!(matches!(load_dataset(f.path()), Err(EvalError::MissingHeader("text"))));
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/data.csv")),
            Err(EvalError::FileUnreadable { .. })
        ));
    }
}
