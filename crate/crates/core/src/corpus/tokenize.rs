use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TokenizeConfig {
    /// Apply English suffix-stripping stemming to every token.
    pub stem: bool,
    /// Tokens shorter than this (in chars, after stripping) are dropped.
    pub min_len: usize,
}

impl Default for TokenizeConfig {
    fn default() -> Self {
        Self { stem: false, min_len: 1 }
    }
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Split text into lowercase word tokens on Unicode word boundaries.
///
/// Characters that are neither alphabetic nor numeric are stripped from each
/// segment, so `"don't"` becomes `"dont"` and a bare `"--"` disappears.
pub fn tokenize(raw_text: &str, config: &TokenizeConfig) -> Vec<String> {
    raw_text
        .unicode_words()
        .filter_map(|word| {
            let cleaned: String = word.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
            if cleaned.chars().count() < config.min_len.max(1) {
                return None;
            }
            if config.stem {
                Some(stemmer().stem(&cleaned).into_owned())
            } else {
                Some(cleaned)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        let tokens = tokenize("The cell divides. The cell grows.", &TokenizeConfig::default());
        assert_eq!(tokens, ["the", "cell", "divides", "the", "cell", "grows"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("", &TokenizeConfig::default()).is_empty());
        assert!(tokenize(" ... -- !", &TokenizeConfig::default()).is_empty());
    }

    #[test]
    fn strips_inner_punctuation() {
        let tokens = tokenize("Don't STOP, naïve café!", &TokenizeConfig::default());
        assert_eq!(tokens, ["dont", "stop", "naïve", "café"]);
    }

    #[test]
    fn stemming_strips_suffixes() {
        let cfg = TokenizeConfig {
            stem: true,
            ..Default::default()
        };
        let tokens = tokenize("divides dividing cells", &cfg);
        assert_eq!(tokens[0], tokens[1]);
        assert_eq!(tokens[2], "cell");
    }

    #[test]
    fn min_len_filter() {
        let cfg = TokenizeConfig { stem: false, min_len: 3 };
        assert_eq!(tokenize("a an the cell", &cfg), ["the", "cell"]);
    }
}
