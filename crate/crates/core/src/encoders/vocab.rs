use std::collections::HashMap;

use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";

/// Lowercases, splits on whitespace, and emits every punctuation character
/// as its own token: `"A dog's toy."` -> `a dog ' s toy .`
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if ch.is_ascii_punctuation() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(ch.to_string());
        } else {
            cur.extend(ch.to_lowercase());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Token <-> id map with `<unk>` reserved at id 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(std::iter::empty::<String>()).unwrap()
    }
}

impl Vocabulary {
    /// `tokens` excludes `<unk>`, which is prepended. Duplicates are errors.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut v = Self {
            tokens: vec![UNK_TOKEN.to_string()],
            index: HashMap::from([(UNK_TOKEN.to_string(), 0)]),
        };
        for t in tokens {
            let t = t.into();
            if v.index.contains_key(&t) {
                return Err(Error::contract(format!("duplicate vocabulary token '{t}'")));
            }
            v.index.insert(t.clone(), v.tokens.len());
            v.tokens.push(t);
        }
        Ok(v)
    }

    /// Tokens seen at least `min_count` times, most frequent first, ties
    /// broken lexicographically.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a [String]>, min_count: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in sentences {
            for t in s {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && *t != UNK_TOKEN)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t)).expect("tokens are unique")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or 0 (`<unk>`).
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(0)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        self.encode(&tokenize(text))
    }
}
