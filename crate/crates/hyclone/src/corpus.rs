//! Code-pair datasets stored as JSONL, one pair per line:
//!
//! ```text
//! {"id": "p1", "code_a": "def f(x): ...", "code_b": "def g(x): ...", "label": true}
//! ```
//!
//! `label` is optional. Blank lines are ignored.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use hyclone_core::CodePair;
use serde::Deserialize;

use crate::error::CorpusError;

const DESK_CORPUS: &str = include_str!("../data/desk_corpus.jsonl");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub pairs: Vec<CodePair>,
    pub source_path: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    code_a: String,
    code_b: String,
    #[serde(default)]
    label: Option<bool>,
}

impl Corpus {
    pub fn parse(text: &str, source_path: &str) -> Result<Self, CorpusError> {
        let mut pairs = Vec::new();
        let mut ids = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| CorpusError::MalformedLine {
                path: source_path.to_string(),
                line_no: i + 1,
                reason,
            };
            let line: Line = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
            let pair = CodePair::new(line.id, line.code_a, line.code_b, line.label);
            pair.validate().map_err(|e| malformed(e.to_string()))?;
            if !ids.insert(pair.id.clone()) {
                return Err(CorpusError::DuplicateId(pair.id));
            }
            pairs.push(pair);
        }
        Ok(Self {
            pairs,
            source_path: source_path.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CodePair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    pub fn labels(&self) -> Vec<Option<bool>> {
        self.pairs.iter().map(|p| p.label).collect()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for pair in &self.pairs {
            serde_json::to_writer(&mut out, pair)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Corpus::parse(&text, &path.display().to_string())
}

/// Bundled handcrafted pairs used for offline checks. Every pair is labeled.
pub fn desk_corpus() -> Corpus {
    Corpus::parse(DESK_CORPUS, "<desk>").expect("bundled desk corpus is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines_in_file_order() {
        let text = r#"{"id": "b", "code_a": "def f(): return 1", "code_b": "def g(): return 1", "label": true}
{"id": "a", "code_a": "def f(): return 1", "code_b": "def g(): return 2"}
"#;
        let c = Corpus::parse(text, "t.jsonl").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.pairs[0].id, "b");
        assert_eq!(c.pairs[0].label, Some(true));
        assert_eq!(c.pairs[1].label, None);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(Corpus::parse("", "e").unwrap().is_empty());
        assert!(Corpus::parse("\n  \n", "e").unwrap().is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = r#"{"id": "p1", "code_a": "x", "code_b": "y"}"#;
        let text = format!("{line}\n{line}\n");
        match Corpus::parse(&text, "d") {
            Err(CorpusError::DuplicateId(id)) => assert_eq!(id, "p1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let text = "{\"id\": \"ok\", \"code_a\": \"x\", \"code_b\": \"y\"}\n{\"id\": \"p\", \"code_a\": \"x\"}\n";
        match Corpus::parse(text, "m") {
            Err(CorpusError::MalformedLine { line_no, .. }) => assert_eq!(line_no, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Corpus::parse("not json", "m"),
            Err(CorpusError::MalformedLine { line_no: 1, .. })
        ));
        assert!(matches!(
            Corpus::parse(r#"{"id": "p", "code_a": "", "code_b": "y"}"#, "m"),
            Err(CorpusError::MalformedLine { .. })
        ));
        assert!(matches!(
            Corpus::parse(r#"{"id": "p", "code_a": "x", "code_b": "y", "label": "yes"}"#, "m"),
            Err(CorpusError::MalformedLine { .. })
        ));
    }

    #[test]
    fn parse_is_deterministic_and_round_trips() {
        let c = desk_corpus();
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf).unwrap();
        let again = Corpus::parse(std::str::from_utf8(&buf).unwrap(), "<desk>").unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn desk_corpus_contract() {
        let c = desk_corpus();
        assert!(c.len() >= 20);
        assert!(c.pairs.iter().all(|p| p.label.is_some()));
        let clones = c.pairs.iter().filter(|p| p.label == Some(true)).count();
        assert!(clones >= 10);
        assert!(c.len() - clones >= 10);
        assert_eq!(c.get("fact_iter_vs_rec").unwrap().label, Some(true));
        assert_eq!(c.get("sum_vs_product").unwrap().label, Some(false));
    }
}
