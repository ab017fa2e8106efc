//! Order-preserving alignment of extracted reference strings with
//! ground-truth parsed references, tolerating missing and extra strings.

use std::collections::BTreeMap;

use crate::evaluate::normalize_value;
use crate::model::ParsedReference;
use crate::tokenize::tokenize;

/// Pairs below this similarity are reported as unmatched.
pub const MATCH_THRESHOLD: f64 = 0.3;

/// One accepted (string, truth) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPair {
    pub string_index: usize,
    pub truth_index: usize,
    pub similarity: f64,
}

/// Result of aligning two lists. Pairs are strictly increasing in both
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub pairs: Vec<AlignedPair>,
    pub unmatched_strings: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
    /// Optimal total over all monotone alignments, before the
    /// low-similarity pairs are demoted to unmatched.
    pub total_similarity: f64,
}

fn token_multiset(parts: impl IntoIterator<Item = String>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for part in parts {
        if !part.is_empty() {
            *counts.entry(part).or_insert(0) += 1;
        }
    }
    counts
}

fn string_tokens(s: &str) -> BTreeMap<String, usize> {
    token_multiset(
        tokenize(s)
            .tokens()
            .iter()
            .map(|t| normalize_value(&t.text)),
    )
}

fn values_tokens<'a>(values: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, usize> {
    token_multiset(values.into_iter().flat_map(|v| {
        tokenize(v)
            .tokens()
            .iter()
            .map(|t| normalize_value(&t.text))
            .collect::<Vec<_>>()
    }))
}

fn truth_tokens(truth: &ParsedReference) -> BTreeMap<String, usize> {
    values_tokens(truth.fields.iter().map(|f| f.value.as_str()))
}

fn jaccard(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (token, &ca) in a {
        let cb = b.get(token).copied().unwrap_or(0);
        intersection += ca.min(cb);
        union += ca.max(cb);
    }
    for (token, &cb) in b {
        if !a.contains_key(token) {
            union += cb;
        }
    }
    if union == 0 {
        // Two empty multisets are identical.
        return 1.0;
    }
    intersection as f64 / union as f64
}

/// Multiset Jaccard overlap between the normalized tokens of a reference
/// string and of all ground-truth field values.
pub fn similarity(s: &str, truth: &ParsedReference) -> f64 {
    jaccard(&string_tokens(s), &truth_tokens(truth))
}

/// Same overlap against a raw list of ground-truth field values, for
/// truth records richer than the client schema.
pub fn similarity_to_values<'a>(s: &str, values: impl IntoIterator<Item = &'a str>) -> f64 {
    jaccard(&string_tokens(s), &values_tokens(values))
}

/// Aligns by maximizing total similarity over monotone pairings
/// (zero-cost skips), then demotes pairs under [`MATCH_THRESHOLD`].
pub fn align_lists<S: AsRef<str>>(strings: &[S], truths: &[ParsedReference]) -> AlignmentResult {
    let string_sets: Vec<_> = strings.iter().map(|s| string_tokens(s.as_ref())).collect();
    let truth_sets: Vec<_> = truths.iter().map(truth_tokens).collect();
    let mut sim = vec![vec![0.0f64; truths.len()]; strings.len()];
    for (i, ss) in string_sets.iter().enumerate() {
        for (j, ts) in truth_sets.iter().enumerate() {
            sim[i][j] = jaccard(ss, ts);
        }
    }
    align_from_matrix(&sim, truths.len())
}

/// Core dynamic program over a precomputed similarity matrix
/// (`sim[i][j]` scores pairing string `i` with truth `j`).
pub fn align_from_matrix(sim: &[Vec<f64>], truth_count: usize) -> AlignmentResult {
    let m = sim.len();
    let n = truth_count;
    let mut dp = vec![vec![0.0f64; n + 1]; m + 1];
    for i in 1..=m {
        for j in 1..=n {
            dp[i][j] = dp[i - 1][j]
                .max(dp[i][j - 1])
                .max(dp[i - 1][j - 1] + sim[i - 1][j - 1]);
        }
    }

    // Backtrack preferring skips on ties, which keeps the earliest
    // optimal pairing.
    let mut pairs = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 && j > 0 {
        if dp[i][j] == dp[i - 1][j] {
            i -= 1;
        } else if dp[i][j] == dp[i][j - 1] {
            j -= 1;
        } else {
            pairs.push(AlignedPair {
                string_index: i - 1,
                truth_index: j - 1,
                similarity: sim[i - 1][j - 1],
            });
            i -= 1;
            j -= 1;
        }
    }
    pairs.reverse();

    let total_similarity = dp[m][n];
    let accepted: Vec<AlignedPair> = pairs
        .into_iter()
        .filter(|p| p.similarity >= MATCH_THRESHOLD)
        .collect();
    let matched_strings: Vec<usize> = accepted.iter().map(|p| p.string_index).collect();
    let matched_truths: Vec<usize> = accepted.iter().map(|p| p.truth_index).collect();
    AlignmentResult {
        unmatched_strings: (0..m).filter(|i| !matched_strings.contains(i)).collect(),
        unmatched_truths: (0..n).filter(|j| !matched_truths.contains(j)).collect(),
        pairs: accepted,
        total_similarity,
    }
}
