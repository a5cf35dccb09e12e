// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

/// Normalized term sequence of a query or document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    tokens: Vec<String>,
}

impl TokenStream {
    /// Splits on every non-alphanumeric character and lowercases.
    /// No stemming, no stopword removal.
    pub fn tokenize(text: &str) -> Self {
        let tokens =
            text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect();
        Self { tokens }
    }

    /// Builds a stream from already-normalized terms. Terms are re-tokenized,
    /// so anything containing separators is split.
    pub fn from_terms<S: AsRef<str>>(terms: &[S]) -> Self {
        let joined = terms.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
        Self::tokenize(&joined)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Stream length `L`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct terms in first-occurrence order.
    pub fn unique_terms(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.tokens.iter().map(String::as_str).filter(|t| seen.insert(*t)).collect()
    }

    /// Raw occurrence count of `term`.
    pub fn count(&self, term: &str) -> usize {
        self.tokens.iter().filter(|t| *t == term).count()
    }

    /// The stream concatenated with itself.
    pub fn doubled(&self) -> Self {
        let mut tokens = self.tokens.clone();
        tokens.extend_from_slice(&self.tokens);
        Self { tokens }
    }
}

pub fn tokenize(text: &str) -> TokenStream {
    TokenStream::tokenize(text)
}
