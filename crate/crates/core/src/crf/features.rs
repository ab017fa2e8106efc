//! Feature templates and the frozen feature index used by the tagger.

use std::collections::HashMap;

use crate::tokenize::{TokenKind, TokenSequence};

/// Month names recognized by the lexicon flag.
const MONTHS: [&str; 24] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
    "sept", "oct", "nov", "dec",
];

/// Words that frequently surround or identify source fields.
const SOURCE_WORDS: [&str; 14] = [
    "journal",
    "proceedings",
    "conference",
    "vol",
    "no",
    "pp",
    "doi",
    "http",
    "www",
    "arxiv",
    "ed",
    "in",
    "et",
    "al",
];

/// Longest surface form kept as a feature value, in characters.
const SURFACE_CAP: usize = 30;

fn shape(text: &str, kind: TokenKind) -> String {
    match kind {
        TokenKind::Digit => {
            let n = text.chars().count();
            if n >= 5 {
                "DIGIT5+".to_owned()
            } else {
                format!("DIGIT{n}")
            }
        }
        TokenKind::Other => format!("PUNCT{text}"),
        TokenKind::Alpha => {
            let mut chars = text.chars();
            let first_upper = chars.next().is_some_and(char::is_uppercase);
            let all_upper = text.chars().all(char::is_uppercase);
            let rest_lower = chars.all(char::is_lowercase);
            if all_upper {
                "ALLCAPS".to_owned()
            } else if first_upper && rest_lower {
                "INITCAP".to_owned()
            } else if text.chars().all(char::is_lowercase) {
                "LOWER".to_owned()
            } else {
                "MIXED".to_owned()
            }
        }
    }
}

fn lowercase_capped(text: &str) -> String {
    text.chars().take(SURFACE_CAP).flat_map(char::to_lowercase).collect()
}

fn push_token_features(out: &mut Vec<String>, prefix: &str, seq: &TokenSequence, pos: usize) {
    let token = &seq.tokens()[pos];
    let lower = lowercase_capped(&token.text);
    out.push(format!("{prefix}w={lower}"));
    out.push(format!("{prefix}kind={}", token.kind.name()));
    out.push(format!("{prefix}shape={}", shape(&token.text, token.kind)));
    if MONTHS.contains(&lower.as_str()) {
        out.push(format!("{prefix}lex=month"));
    }
    if SOURCE_WORDS.contains(&lower.as_str()) {
        out.push(format!("{prefix}lex=srcword"));
    }
    let decile = (pos * 10 / seq.len()).min(9);
    out.push(format!("{prefix}dec={decile}"));
    if token.preceded_by_space {
        out.push(format!("{prefix}spc"));
    }
}

/// Expands the window templates for position `i`: surface, kind, shape,
/// lexicon flags, position decile and spacing flag for offsets -2..=+2,
/// BOS/EOS markers past the ends, and a bias feature.
pub fn extract_features(seq: &TokenSequence, i: usize) -> Vec<String> {
    assert!(i < seq.len(), "position {i} out of range for {} tokens", seq.len());
    let mut out = Vec::with_capacity(40);
    for offset in -2i64..=2 {
        let prefix = match offset {
            0 => String::new(),
            o => format!("{o:+}:"),
        };
        let pos = i as i64 + offset;
        if pos < 0 {
            out.push(format!("{prefix}BOS"));
        } else if pos as usize >= seq.len() {
            out.push(format!("{prefix}EOS"));
        } else {
            push_token_features(&mut out, &prefix, seq, pos as usize);
        }
    }
    out.push("bias".to_owned());
    out
}

/// Feature ids of one sequence in compressed row form.
#[derive(Debug, Clone)]
pub struct SequenceFeatures {
    ids: Vec<u32>,
    starts: Vec<usize>,
}

impl SequenceFeatures {
    pub fn positions(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn at(&self, pos: usize) -> &[u32] {
        &self.ids[self.starts[pos]..self.starts[pos + 1]]
    }
}

/// Dense feature-name -> id map, frozen once training begins.
#[derive(Debug, Clone, Default)]
pub struct FeatureVectorizer {
    index: HashMap<String, u32>,
}

impl FeatureVectorizer {
    pub fn feature_count(&self) -> usize {
        self.index.len()
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    /// Rebuilds a vectorizer from names listed in id order.
    pub fn from_names(names: Vec<String>) -> Self {
        let index = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| (name, i as u32))
            .collect();
        FeatureVectorizer { index }
    }

    /// Names listed in id order.
    pub fn names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.index.len()];
        for (name, &id) in &self.index {
            names[id as usize] = name.clone();
        }
        names
    }

    /// Builds the index over a corpus (every feature seen at least once
    /// gets an id, in first-seen order) and returns the cached ids for
    /// each sequence.
    pub fn build<'a>(
        sequences: impl IntoIterator<Item = &'a TokenSequence>,
    ) -> (Self, Vec<SequenceFeatures>) {
        let mut vectorizer = FeatureVectorizer::default();
        let mut cached = Vec::new();
        for seq in sequences {
            let mut ids = Vec::new();
            let mut starts = vec![0usize];
            for pos in 0..seq.len() {
                for name in extract_features(seq, pos) {
                    let next = vectorizer.index.len() as u32;
                    let id = *vectorizer.index.entry(name).or_insert(next);
                    ids.push(id);
                }
                starts.push(ids.len());
            }
            cached.push(SequenceFeatures { ids, starts });
        }
        (vectorizer, cached)
    }

    /// Looks up feature ids with the frozen index; unknown features are
    /// dropped.
    pub fn featurize(&self, seq: &TokenSequence) -> SequenceFeatures {
        let mut ids = Vec::new();
        let mut starts = vec![0usize];
        for pos in 0..seq.len() {
            for name in extract_features(seq, pos) {
                if let Some(&id) = self.index.get(&name) {
                    ids.push(id);
                }
            }
            starts.push(ids.len());
        }
        SequenceFeatures { ids, starts }
    }
}
