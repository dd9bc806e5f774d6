//! Keyword retrieval over a small text corpus.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("query has no terms")]
    EmptyQuery,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("top_k must be at least 1")]
    ZeroTopK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    /// Position of the document in the corpus.
    pub doc: usize,
    pub score: f64,
    pub text: String,
}

/// Lowercased alphanumeric runs.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Scores each document by the summed frequency of the distinct query terms
/// divided by one plus the document's term count, then keeps the best
/// `top_k`. Equal scores keep corpus order.
pub fn exec_retrieval(
    query: &str,
    corpus: &[String],
    top_k: usize,
) -> Result<Vec<Snippet>, RetrievalError> {
    let q: BTreeSet<String> = terms(query).into_iter().collect();
    if q.is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    if corpus.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    if top_k == 0 {
        return Err(RetrievalError::ZeroTopK);
    }
    let mut scored: Vec<Snippet> = corpus
        .iter()
        .enumerate()
        .map(|(doc, text)| {
            let d = terms(text);
            let tf = d.iter().filter(|t| q.contains(*t)).count();
            Snippet {
                doc,
                score: tf as f64 / (1.0 + d.len() as f64),
                text: text.clone(),
            }
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    scored.truncate(top_k);
    Ok(scored)
}
