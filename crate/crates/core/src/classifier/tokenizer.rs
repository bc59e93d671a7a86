use std::collections::HashMap;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::ClassifyError;

pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const PAD_TOKEN: &str = "[PAD]";

const CONTINUATION_PREFIX: &str = "##";
const MAX_WORD_CHARS: usize = 100;

/// Fixed-length model input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<i64>,
    pub attention_mask: Vec<i64>,
}

/// Greedy longest-match-first subword tokenizer over a BERT-style
/// vocabulary.
#[derive(Debug, Clone)]
pub struct WordPiece {
    vocab: HashMap<String, i64>,
    vocab_size: usize,
    cls: i64,
    sep: i64,
    unk: i64,
    pad: i64,
    lowercase: bool,
    max_seq_len: usize,
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || (!c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control() && !is_combining_mark(c))
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0x20000..=0x2A6DF | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F | 0x2B820..=0x2CEAF | 0xF900..=0xFAFF | 0x2F800..=0x2FA1F)
}

impl WordPiece {
    /// Builds a tokenizer from tokens listed in id order.
    pub fn new(tokens: &[String], lowercase: bool, max_seq_len: usize) -> Result<Self, ClassifyError> {
        let vocab: HashMap<String, i64> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as i64))
            .collect();
        let missing: Vec<String> = [CLS_TOKEN, SEP_TOKEN, UNK_TOKEN, PAD_TOKEN]
            .iter()
            .filter(|m| !vocab.contains_key(**m))
            .map(|m| m.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ClassifyError::VocabMissingMarkers(missing));
        }
        if max_seq_len < 2 {
            return Err(ClassifyError::ArtifactLoad("max_seq_len must leave room for markers".into()));
        }
        Ok(WordPiece {
            cls: vocab[CLS_TOKEN],
            sep: vocab[SEP_TOKEN],
            unk: vocab[UNK_TOKEN],
            pad: vocab[PAD_TOKEN],
            vocab_size: tokens.len(),
            vocab,
            lowercase,
            max_seq_len,
        })
    }

    pub fn max_seq_len(&self) -> usize {
        self.max_seq_len
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Whitespace and punctuation splitting, with lowercasing and accent
    /// stripping for uncased vocabularies.
    fn basic_tokens(&self, text: &str) -> Vec<String> {
        let mut prepared = String::with_capacity(text.len());
        for c in text.chars() {
            if c == '\u{0}' || c == '\u{FFFD}' || (c.is_control() && !c.is_whitespace()) {
                continue;
            }
            if is_cjk(c) {
                prepared.push(' ');
                prepared.push(c);
                prepared.push(' ');
            } else {
                prepared.push(c);
            }
        }
        let mut words = Vec::new();
        for raw in prepared.split_whitespace() {
            let word: String = if self.lowercase {
                raw.to_lowercase().nfd().filter(|c| !is_combining_mark(*c)).collect()
            } else {
                raw.to_string()
            };
            let mut current = String::new();
            for c in word.chars() {
                if is_punctuation(c) {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    words.push(c.to_string());
                } else {
                    current.push(c);
                }
            }
            if !current.is_empty() {
                words.push(current);
            }
        }
        words
    }

    fn word_pieces(&self, word: &str, out: &mut Vec<i64>) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            out.push(self.unk);
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                let mut candidate: String = chars[start..end].iter().collect();
                if start > 0 {
                    candidate.insert_str(0, CONTINUATION_PREFIX);
                }
                if let Some(&id) = self.vocab.get(&candidate) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => {
                    out.push(self.unk);
                    return;
                }
            }
        }
        out.extend(pieces);
    }

    /// Subword ids without markers, truncation or padding.
    pub fn subwords(&self, text: &str) -> Vec<i64> {
        let mut ids = Vec::new();
        for word in self.basic_tokens(text) {
            self.word_pieces(&word, &mut ids);
        }
        ids
    }

    /// `[CLS] subwords [SEP]` truncated to `max_seq_len` (dropping subwords,
    /// never markers) and padded to exactly `max_seq_len`.
    pub fn encode(&self, text: &str) -> Encoding {
        let mut sub = self.subwords(text);
        sub.truncate(self.max_seq_len - 2);
        let mut ids = Vec::with_capacity(self.max_seq_len);
        ids.push(self.cls);
        ids.extend(sub);
        ids.push(self.sep);
        let used = ids.len();
        ids.resize(self.max_seq_len, self.pad);
        let mut attention_mask = vec![1; used];
        attention_mask.resize(self.max_seq_len, 0);
        Encoding { ids, attention_mask }
    }
}
