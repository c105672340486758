use std::collections::HashMap;

use crate::corpus::SentencePair;

pub const UNK: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ index map with index 0 reserved for out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            index: HashMap::new(),
            tokens: vec![UNK_TOKEN.to_string()],
        }
    }
}

impl Vocabulary {
    /// Indices are assigned in order of first appearance.
    pub fn build<'a>(pairs: impl IntoIterator<Item = &'a SentencePair>) -> Self {
        let mut vocab = Vocabulary::default();
        for p in pairs {
            for t in p.tokens1.iter().chain(&p.tokens2) {
                vocab.insert(t);
            }
        }
        vocab
    }

    /// Rebuilds from the non-UNK token list (as stored in a model file).
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut vocab = Vocabulary::default();
        for t in tokens {
            vocab.insert(&t);
        }
        vocab
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.index.insert(token.to_string(), i);
        self.tokens.push(token.to_string());
        i
    }

    #[inline]
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn lookup_all(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Number of rows an embedding table needs, UNK included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == 1
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// Known tokens in index order, UNK excluded.
    pub fn tokens(&self) -> &[String] {
        &self.tokens[1..]
    }

    /// Tokens of the pair that resolve to UNK.
    pub fn oov_count(&self, pair: &SentencePair) -> usize {
        pair.tokens1
            .iter()
            .chain(&pair.tokens2)
            .filter(|t| !self.contains(t))
            .count()
    }
}

/// Mean, median and max of per-pair OOV counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OovStats {
    pub mean: f64,
    pub median: f64,
    pub max: usize,
}

pub fn oov_stats(vocab: &Vocabulary, pairs: &[SentencePair]) -> Option<OovStats> {
    if pairs.is_empty() {
        return None;
    }
    let mut counts: Vec<usize> = pairs.iter().map(|p| vocab.oov_count(p)).collect();
    counts.sort_unstable();
    let n = counts.len();
    let median = if n % 2 == 1 {
        counts[n / 2] as f64
    } else {
        (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0
    };
    Some(OovStats {
        mean: counts.iter().sum::<usize>() as f64 / n as f64,
        median,
        max: counts[n - 1],
    })
}
