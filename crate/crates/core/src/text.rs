//! Tokenization and bag-of-words document-term matrices.
//!
//! Stop words are never removed: in source code, `if`, `else`, `for` and
//! friends carry structural signal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerProfile {
    /// Lowercased word-character runs of length at least 2.
    #[default]
    Default,
    /// Case-sensitive word-character runs of any length.
    StrictCode,
}

impl TokenizerProfile {
    fn min_len(self) -> usize {
        match self {
            TokenizerProfile::Default => 2,
            TokenizerProfile::StrictCode => 1,
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn tokenize(text: &str, profile: TokenizerProfile) -> Vec<String> {
    let owned;
    let text = match profile {
        TokenizerProfile::Default => {
            owned = text.to_lowercase();
            owned.as_str()
        }
        TokenizerProfile::StrictCode => text,
    };
    text.split(|c: char| !is_word_char(c))
        .filter(|t| t.chars().count() >= profile.min_len())
        .map(str::to_owned)
        .collect()
}

/// Sorted token list with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    ordered_tokens: Vec<String>,
    token_to_col: BTreeMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(mut tokens: Vec<String>) -> Self {
        tokens.sort();
        tokens.dedup();
        let token_to_col = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { ordered_tokens: tokens, token_to_col }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.ordered_tokens
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.ordered_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered_tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.ordered_tokens
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.token_to_col.get(token).copied()
    }
}

pub fn fit_vocabulary<D: AsRef<[String]>>(docs: &[D]) -> Vocabulary {
    let tokens: Vec<String> = docs.iter().flat_map(|d| d.as_ref().iter().cloned()).collect();
    Vocabulary::from(tokens)
}

/// Raw term counts, one row per document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub row_ids: Vec<String>,
    pub counts: Matrix,
}

impl DocTermMatrix {
    pub fn rows(&self) -> usize {
        self.counts.rows()
    }

    pub fn cols(&self) -> usize {
        self.counts.cols()
    }
}

/// Counts occurrences of vocabulary tokens; unknown tokens are ignored.
pub fn transform<D: AsRef<[String]>>(docs: &[D], vocab: &Vocabulary) -> Matrix {
    let v = vocab.len();
    let mut data = vec![0.0; docs.len() * v];
    for (i, doc) in docs.iter().enumerate() {
        let row = &mut data[i * v..(i + 1) * v];
        for tok in doc.as_ref() {
            if let Some(j) = vocab.column(tok) {
                row[j] += 1.0;
            }
        }
    }
    Matrix::new(docs.len(), v, data).expect("counts are finite")
}

/// [`transform`] with row ids attached.
pub fn document_term_matrix<D: AsRef<[String]>>(ids: &[String], docs: &[D], vocab: &Vocabulary) -> DocTermMatrix {
    assert_eq!(ids.len(), docs.len(), "one id per document");
    DocTermMatrix { row_ids: ids.to_vec(), counts: transform(docs, vocab) }
}
