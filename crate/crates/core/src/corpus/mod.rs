//! Document collections and the three-layer network built from them.
//!
//! A corpus is read from JSON lines, one object per document:
//!
//! ```json
//! {"id": "Josephson_effect", "text": "...", "links": ["Quantum_tunnelling"], "tags": ["Physics"]}
//! ```
//!
//! `tokens` may replace `text` for pre-tokenized input. Links to documents
//! outside the file are dropped and counted in the [`IngestReport`].

mod network;
mod tokenize;

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use network::{build_network, subsample_tokens, BuildReport, FilterConfig, MultilayerNetwork, NetworkFile, NETWORK_FORMAT_VERSION};
pub use tokenize::{tokenize, TokenizeConfig};

/// One input record as it appears in the corpus file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    #[serde(alias = "doc_id", alias = "title")]
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default)]
    pub links: Vec<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    /// Word-type indices into [`Corpus::vocabulary`], in text order.
    pub tokens: Vec<u32>,
    /// Indices of linked documents, deduplicated, never self.
    pub outlinks: Vec<u32>,
    /// Indices into [`Corpus::tag_set`], deduplicated.
    pub tags: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents: usize,
    pub dangling_links: usize,
    pub self_links: usize,
    pub duplicate_links: usize,
    pub duplicate_tags: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocabulary: Vec<String>,
    pub tag_set: Vec<String>,
    pub report: IngestReport,
}

struct Interner {
    index: HashMap<String, u32>,
    values: Vec<String>,
}

impl Interner {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            values: Vec::new(),
        }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.values.len() as u32;
        self.index.insert(s.to_owned(), i);
        self.values.push(s.to_owned());
        i
    }
}

impl Corpus {
    /// Tokenize, intern, and resolve links for a batch of raw documents.
    pub fn from_raw(raw: Vec<RawDocument>, config: &TokenizeConfig) -> Result<Self> {
        let mut doc_index = HashMap::with_capacity(raw.len());
        for (i, d) in raw.iter().enumerate() {
            if doc_index.insert(d.id.as_str(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate document id {:?}", d.id)));
            }
        }

        let token_lists: Vec<Vec<String>> = raw
            .par_iter()
            .map(|d| match (&d.tokens, &d.text) {
                (Some(tokens), _) => tokens.clone(),
                (None, Some(text)) => tokenize(text, config),
                (None, None) => Vec::new(),
            })
            .collect();

        let mut vocab = Interner::new();
        let mut tags = Interner::new();
        let mut report = IngestReport {
            documents: raw.len(),
            ..Default::default()
        };
        let mut documents = Vec::with_capacity(raw.len());
        for (i, (d, toks)) in raw.iter().zip(token_lists).enumerate() {
            let tokens = toks.iter().map(|t| vocab.intern(t)).collect();

            let mut outlinks = Vec::with_capacity(d.links.len());
            for link in &d.links {
                match doc_index.get(link.as_str()) {
                    None => report.dangling_links += 1,
                    Some(&j) if j as usize == i => report.self_links += 1,
                    Some(&j) => outlinks.push(j),
                }
            }
            let before = outlinks.len();
            outlinks.sort_unstable();
            outlinks.dedup();
            report.duplicate_links += before - outlinks.len();

            let mut tag_ids: Vec<u32> = d.tags.iter().map(|t| tags.intern(t)).collect();
            let before = tag_ids.len();
            tag_ids.sort_unstable();
            tag_ids.dedup();
            report.duplicate_tags += before - tag_ids.len();

            documents.push(Document {
                doc_id: d.id.clone(),
                tokens,
                outlinks,
                tags: tag_ids,
            });
        }

        Ok(Self {
            documents,
            vocabulary: vocab.values,
            tag_set: tags.values,
            report,
        })
    }

    pub fn read_jsonl<R: BufRead>(reader: R, config: &TokenizeConfig) -> Result<Self> {
        let mut raw = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            raw.push(doc);
        }
        Self::from_raw(raw, config)
    }

    pub fn load(path: impl AsRef<Path>, config: &TokenizeConfig) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file), config)
    }

    /// Total number of word tokens, `M = Σ_d k_d`.
    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(id: &str, text: &str, links: &[&str], tags: &[&str]) -> RawDocument {
        RawDocument {
            id: id.into(),
            text: Some(text.into()),
            tokens: None,
            links: links.iter().map(|s| s.to_string()).collect(),
            tags: tags.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn resolves_links_and_counts_tokens() {
        let docs = vec![
            raw("a", "x y y", &["b", "b", "zzz", "a"], &["T1", "T1"]),
            raw("b", "y z", &["a"], &["T2"]),
        ];
        let c = Corpus::from_raw(docs, &TokenizeConfig::default()).unwrap();
        assert_eq!(c.token_count(), 5);
        assert_eq!(c.vocabulary, ["x", "y", "z"]);
        assert_eq!(c.documents[0].outlinks, [1]);
        assert_eq!(c.documents[0].tags.len(), 1);
        assert_eq!(c.report.dangling_links, 1);
        assert_eq!(c.report.self_links, 1);
        assert_eq!(c.report.duplicate_links, 1);
        assert_eq!(c.report.duplicate_tags, 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let docs = vec![raw("a", "", &[], &[]), raw("a", "", &[], &[])];
        assert!(matches!(
            Corpus::from_raw(docs, &TokenizeConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn jsonl_accepts_pretokenized_and_aliases() {
        let input = r#"{"doc_id": "a", "tokens": ["p", "q"], "links": ["b"]}

{"title": "b", "text": "Q r", "tags": ["m"]}
"#;
        let c = Corpus::read_jsonl(input.as_bytes(), &TokenizeConfig::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.vocabulary, ["p", "q", "r"]);
        assert_eq!(c.documents[1].tokens, [1, 2]);
    }

    #[test]
    fn jsonl_reports_bad_line() {
        let input = "{\"id\": \"a\"}\nnot json\n";
        match Corpus::read_jsonl(input.as_bytes(), &TokenizeConfig::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
