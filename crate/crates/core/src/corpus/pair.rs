use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Characters split off the end of a whitespace token.
const TERMINAL_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', ')'];

/// Two tokenized sentences and an optional gold similarity in `[0, 5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub tokens1: Vec<String>,
    pub tokens2: Vec<String>,
    pub gold: Option<f64>,
}

impl SentencePair {
    pub fn new(id: impl Into<String>, s1: &str, s2: &str, gold: Option<f64>) -> Result<Self> {
        if let Some(g) = gold {
            if !(0.0..=5.0).contains(&g) {
                return Err(Error::Range(g));
            }
        }
        let (tokens1, tokens2) = (tokenize(s1), tokenize(s2));
        if tokens1.is_empty() || tokens2.is_empty() {
            return Err(Error::Contract("sentence pair with an empty sentence".into()));
        }
        Ok(SentencePair {
            id: id.into(),
            tokens1,
            tokens2,
            gold,
        })
    }

    pub fn gold_or_err(&self) -> Result<f64> {
        self.gold
            .ok_or_else(|| Error::Contract(format!("pair {} has no gold score", self.id)))
    }
}

/// Lowercase, split on whitespace, then peel terminal punctuation into
/// separate tokens.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in sentence.split_whitespace() {
        let word = raw.to_lowercase();
        let stem = word.trim_end_matches(TERMINAL_PUNCT);
        if stem.is_empty() {
            out.push(word);
            continue;
        }
        out.push(stem.to_string());
        out.extend(word[stem.len()..].chars().map(String::from));
    }
    out
}

/// Parses `score<TAB>s1<TAB>s2` (labeled) or `s1<TAB>s2` (unlabeled) lines.
/// Blank lines are skipped; ids are 1-based line numbers.
pub fn parse_sts_str(text: &str, origin: &Path) -> Result<Vec<SentencePair>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let (gold, s1, s2) = match fields.as_slice() {
            [score, s1, s2] => {
                let value: f64 = score
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("invalid score {score:?}")))?;
                if !(0.0..=5.0).contains(&value) {
                    return Err(Error::ScoreRange {
                        path: origin.to_path_buf(),
                        line: line_no,
                        value,
                    });
                }
                (Some(value), *s1, *s2)
            }
            [s1, s2] => (None, *s1, *s2),
            _ => {
                return Err(parse_err(format!(
                    "expected 2 or 3 tab-separated fields, found {}",
                    fields.len()
                )))
            }
        };
        let tokens1 = tokenize(s1);
        let tokens2 = tokenize(s2);
        if tokens1.is_empty() || tokens2.is_empty() {
            return Err(parse_err("empty sentence".into()));
        }
        pairs.push(SentencePair {
            id: line_no.to_string(),
            tokens1,
            tokens2,
            gold,
        });
    }
    Ok(pairs)
}

pub fn parse_sts_tsv(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: format!("not valid UTF-8: {e}"),
    })?;
    parse_sts_str(&text, path)
}

/// Inverse of [`parse_sts_str`] up to tokenization.
pub fn format_sts(pairs: &[SentencePair]) -> String {
    let mut out = String::new();
    for p in pairs {
        if let Some(g) = p.gold {
            let _ = write!(out, "{g}\t");
        }
        let _ = writeln!(out, "{}\t{}", p.tokens1.join(" "), p.tokens2.join(" "));
    }
    out
}
