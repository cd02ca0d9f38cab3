//! Tokenizer shared by the sparse index and the deterministic embedder.
//!
//! Text is lowercased and split on non-alphanumeric characters. Dotted
//! clause codes ("7.2", "A.1.3") are additionally emitted whole, right after
//! their component tokens, so that "clause 7.2" yields
//! `["clause", "7", "2", "7.2"]`.

use std::sync::LazyLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

static DOTTED_CODE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[0-9]+(?:\.[0-9]+)+|[A-Za-z](?:\.[0-9]+)+").unwrap());

/// Small English function-word list. Modal verbs are deliberately absent:
/// in normative text they carry meaning.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "an", "and", "any", "are", "as", "at",
    "be", "been", "being", "between", "both", "but", "by", "for", "from", "further", "had", "has",
    "have", "having", "here", "how", "if", "in", "into", "is", "it", "its", "itself", "more",
    "most", "no", "nor", "not", "of", "on", "only", "or", "other", "over", "same", "so", "such",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "those",
    "through", "to", "under", "until", "up", "very", "was", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "with",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerOptions {
    #[serde(default)]
    pub stem: bool,
    #[serde(default)]
    pub remove_stopwords: bool,
}

pub struct Tokenizer {
    options: TokenizerOptions,
    stemmer: Option<Stemmer>,
}

impl Clone for Tokenizer {
    fn clone(&self) -> Self {
        Tokenizer::new(self.options)
    }
}

impl Tokenizer {
    pub fn new(options: TokenizerOptions) -> Self {
        Tokenizer {
            options,
            stemmer: options.stem.then(|| Stemmer::create(Algorithm::English)),
        }
    }

    pub fn options(&self) -> TokenizerOptions {
        self.options
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = basic_tokens(text);
        if self.options.remove_stopwords {
            out.retain(|t| !is_stopword(t));
        }
        if let Some(stemmer) = &self.stemmer {
            for t in out.iter_mut() {
                if t.chars().all(char::is_alphabetic) {
                    *t = stemmer.stem(t).into_owned();
                }
            }
        }
        out
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::new(TokenizerOptions::default())
    }
}

/// Tokenize with default options (no stemming, no stopword removal).
pub fn tokenize(text: &str) -> Vec<String> {
    basic_tokens(text)
}

fn basic_tokens(text: &str) -> Vec<String> {
    let mut codes = DOTTED_CODE.find_iter(text).peekable();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;

    let mut flush_codes = |upto: usize, out: &mut Vec<String>| {
        while let Some(m) = codes.peek() {
            if m.end() > upto {
                break;
            }
            out.push(m.as_str().to_lowercase());
            codes.next();
        }
    };

    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(text[s..i].to_lowercase());
            flush_codes(i, &mut out);
        }
    }
    if let Some(s) = start {
        out.push(text[s..].to_lowercase());
    }
    flush_codes(text.len(), &mut out);
    out
}

/// Collapses every whitespace run to one space and trims both ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopwords_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn clause_code_emitted_whole() {
        assert_eq!(tokenize("Clause 7.2"), vec!["clause", "7", "2", "7.2"]);
        assert_eq!(
            tokenize("see clause 7.2."),
            vec!["see", "clause", "7", "2", "7.2"]
        );
        assert_eq!(
            tokenize("Annex A.1.3 here"),
            vec!["annex", "a", "1", "3", "a.1.3", "here"]
        );
    }

    #[test]
    fn plain_cases() {
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("EN 301 489-1"), vec!["en", "301", "489", "1"]);
        assert_eq!(tokenize("  ..--  "), Vec::<String>::new());
    }

    #[test]
    fn whitespace_normalization() {
        assert_eq!(normalize_whitespace("  a\n\tb   c "), "a b c");
    }

    #[test]
    fn options() {
        let t = Tokenizer::new(TokenizerOptions {
            stem: true,
            remove_stopwords: true,
        });
        assert_eq!(
            t.tokenize("The tests of clause 5.1"),
            vec!["test", "claus", "5", "1", "5.1"]
        );
    }
}
