//! Canonical domain types: field schema, token labels, and the rules that
//! turn a labeled token sequence into a parsed reference.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::TokenSequence;

/// The seven-field output schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Author,
    Source,
    Year,
    Volume,
    Issue,
    Page,
    Organization,
}

impl FieldType {
    /// All field types in canonical report order.
    pub const ALL: [FieldType; 7] = [
        FieldType::Author,
        FieldType::Source,
        FieldType::Year,
        FieldType::Volume,
        FieldType::Issue,
        FieldType::Page,
        FieldType::Organization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldType::Author => "author",
            FieldType::Source => "source",
            FieldType::Year => "year",
            FieldType::Volume => "volume",
            FieldType::Issue => "issue",
            FieldType::Page => "page",
            FieldType::Organization => "organization",
        }
    }

    pub fn from_name(name: &str) -> Option<FieldType> {
        FieldType::ALL.iter().copied().find(|f| f.name() == name)
    }
}

impl std::fmt::Display for FieldType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-token labels. `Oth` marks tokens that belong to no field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    AuFn,
    AuSn,
    Title,
    Src,
    Doi,
    Url,
    Arxiv,
    Year,
    Vol,
    Issue,
    Fpage,
    Lpage,
    Org,
    Oth,
}

/// Number of distinct labels.
pub const LABEL_COUNT: usize = 14;

impl Label {
    /// All labels in index order. `index()` and `from_index()` follow it.
    pub const ALL: [Label; LABEL_COUNT] = [
        Label::AuFn,
        Label::AuSn,
        Label::Title,
        Label::Src,
        Label::Doi,
        Label::Url,
        Label::Arxiv,
        Label::Year,
        Label::Vol,
        Label::Issue,
        Label::Fpage,
        Label::Lpage,
        Label::Org,
        Label::Oth,
    ];

    pub fn index(self) -> usize {
        Label::ALL.iter().position(|&l| l == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::AuFn => "AU_FN",
            Label::AuSn => "AU_SN",
            Label::Title => "TITLE",
            Label::Src => "SRC",
            Label::Doi => "DOI",
            Label::Url => "URL",
            Label::Arxiv => "ARXIV",
            Label::Year => "YEAR",
            Label::Vol => "VOL",
            Label::Issue => "ISSUE",
            Label::Fpage => "FPAGE",
            Label::Lpage => "LPAGE",
            Label::Org => "ORG",
            Label::Oth => "OTH",
        }
    }

    pub fn from_name(name: &str) -> Option<Label> {
        Label::ALL.iter().copied().find(|l| l.name() == name)
    }

    pub fn is_author(self) -> bool {
        matches!(self, Label::AuFn | Label::AuSn)
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps a token label to the output field it contributes to, if any.
///
/// `Title` and `Lpage` are tagged during sequence labeling but never
/// emitted; `Oth` never maps anywhere.
pub fn map_label(label: Label) -> Option<FieldType> {
    match label {
        Label::AuFn | Label::AuSn => Some(FieldType::Author),
        Label::Src | Label::Doi | Label::Url | Label::Arxiv => Some(FieldType::Source),
        Label::Year => Some(FieldType::Year),
        Label::Vol => Some(FieldType::Volume),
        Label::Issue => Some(FieldType::Issue),
        Label::Fpage => Some(FieldType::Page),
        Label::Org => Some(FieldType::Organization),
        Label::Title | Label::Lpage | Label::Oth => None,
    }
}

/// A single typed metadata field, value kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataField {
    pub field_type: FieldType,
    pub value: String,
}

impl MetadataField {
    pub fn new(field_type: FieldType, value: impl Into<String>) -> Self {
        MetadataField {
            field_type,
            value: value.into(),
        }
    }
}

/// A parsed bibliographic reference: a bag of typed fields.
///
/// Assembly from a labeled sequence produces at most one field per type;
/// the general container tolerates duplicates so that arbitrary tool
/// output can still be judged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedReference {
    pub fields: Vec<MetadataField>,
    pub source_string: Option<String>,
}

impl ParsedReference {
    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// First field of the given type, if any.
    pub fn get(&self, field_type: FieldType) -> Option<&str> {
        self.fields
            .iter()
            .find(|f| f.field_type == field_type)
            .map(|f| f.value.as_str())
    }
}

/// JSON-line form of a [`ParsedReference`] in the client schema.
/// Absent fields are omitted; key order is fixed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedReferenceJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub year: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issue: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub organization: Option<String>,
}

impl From<&ParsedReference> for ParsedReferenceJson {
    fn from(r: &ParsedReference) -> Self {
        ParsedReferenceJson {
            author: r.get(FieldType::Author).map(str::to_owned),
            source: r.get(FieldType::Source).map(str::to_owned),
            year: r.get(FieldType::Year).map(str::to_owned),
            volume: r.get(FieldType::Volume).map(str::to_owned),
            issue: r.get(FieldType::Issue).map(str::to_owned),
            page: r.get(FieldType::Page).map(str::to_owned),
            organization: r.get(FieldType::Organization).map(str::to_owned),
        }
    }
}

impl From<ParsedReferenceJson> for ParsedReference {
    fn from(j: ParsedReferenceJson) -> Self {
        let mut fields = Vec::new();
        let mut push = |ft: FieldType, v: Option<String>| {
            if let Some(v) = v {
                fields.push(MetadataField::new(ft, v));
            }
        };
        push(FieldType::Author, j.author);
        push(FieldType::Source, j.source);
        push(FieldType::Year, j.year);
        push(FieldType::Volume, j.volume);
        push(FieldType::Issue, j.issue);
        push(FieldType::Page, j.page);
        push(FieldType::Organization, j.organization);
        ParsedReference {
            fields,
            source_string: None,
        }
    }
}

/// Tokens plus one label per token.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    tokens: TokenSequence,
    labels: Vec<Label>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("label count {labels} does not match token count {tokens}")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("author group has neither given-name nor surname tokens")]
    EmptyAuthor,
}

impl LabeledSequence {
    pub fn new(tokens: TokenSequence, labels: Vec<Label>) -> Result<Self, ModelError> {
        if tokens.len() != labels.len() {
            return Err(ModelError::LengthMismatch {
                tokens: tokens.len(),
                labels: labels.len(),
            });
        }
        Ok(LabeledSequence { tokens, labels })
    }

    pub fn tokens(&self) -> &TokenSequence {
        &self.tokens
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Maximal runs of equal labels as `(label, first, last)` token indices.
    pub fn runs(&self) -> Vec<(Label, usize, usize)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.labels.len() {
            let label = self.labels[i];
            let mut j = i;
            while j + 1 < self.labels.len() && self.labels[j + 1] == label {
                j += 1;
            }
            out.push((label, i, j));
            i = j + 1;
        }
        out
    }
}

/// A formatted first-author value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormattedAuthor {
    pub value: String,
    /// Set when no surname token was available and the given names were
    /// passed through verbatim.
    pub degenerate: bool,
}

/// Formats the first author as `"Surname, I"` from its given-name and
/// surname tokens. With no given names the surnames stand alone; with no
/// surnames the given names pass through verbatim (degenerate).
pub fn format_first_author(
    given_tokens: &[&str],
    surname_tokens: &[&str],
) -> Result<FormattedAuthor, ModelError> {
    if given_tokens.is_empty() && surname_tokens.is_empty() {
        return Err(ModelError::EmptyAuthor);
    }
    if surname_tokens.is_empty() {
        return Ok(FormattedAuthor {
            value: given_tokens.join(" "),
            degenerate: true,
        });
    }
    let surname = surname_tokens.join(" ");
    let initial = given_tokens
        .iter()
        .flat_map(|t| t.chars())
        .find(|c| c.is_alphabetic())
        .map(|c| c.to_uppercase().to_string());
    let value = match initial {
        Some(initial) => format!("{surname}, {initial}"),
        None => surname,
    };
    Ok(FormattedAuthor {
        value,
        degenerate: false,
    })
}

/// Source labels in selection priority order.
const SOURCE_PRIORITY: [Label; 4] = [Label::Src, Label::Doi, Label::Arxiv, Label::Url];

/// Concatenates runs of equally-labeled tokens into output fields.
///
/// Non-author fields take the verbatim slice of the first winning run.
/// The source field is chosen by label priority SRC > DOI > ARXIV > URL,
/// then string order. The author field is formatted from the first author
/// group (see [`first_author_group`]).
pub fn assemble_fields(seq: &LabeledSequence) -> ParsedReference {
    let runs = seq.runs();
    let mut fields: Vec<MetadataField> = Vec::new();

    if let Some((given, surnames)) = first_author_group(seq) {
        let given_refs: Vec<&str> = given.iter().map(String::as_str).collect();
        let surname_refs: Vec<&str> = surnames.iter().map(String::as_str).collect();
        if let Ok(author) = format_first_author(&given_refs, &surname_refs) {
            fields.push(MetadataField::new(FieldType::Author, author.value));
        }
    }

    // Source: best label priority wins, ties broken by string order.
    let source_run = SOURCE_PRIORITY
        .iter()
        .find_map(|&want| runs.iter().find(|&&(label, _, _)| label == want));
    if let Some(&(_, first, last)) = source_run {
        fields.push(MetadataField::new(
            FieldType::Source,
            seq.tokens().slice(first, last),
        ));
    }

    // Remaining single-valued fields: first run in string order wins.
    for &(label, first, last) in &runs {
        let Some(field_type) = map_label(label) else {
            continue;
        };
        if field_type == FieldType::Author || field_type == FieldType::Source {
            continue;
        }
        if fields.iter().any(|f| f.field_type == field_type) {
            continue;
        }
        fields.push(MetadataField::new(field_type, seq.tokens().slice(first, last)));
    }

    fields.sort_by_key(|f| FieldType::ALL.iter().position(|&t| t == f.field_type));
    ParsedReference {
        fields,
        source_string: Some(seq.tokens().original().to_owned()),
    }
}

/// Extracts the first author's given-name and surname token texts.
///
/// Starting at the first AU-labeled run, author runs are collected while
/// they stay adjacent or are separated only by a single punctuation run
/// (no letters or digits). A given-first author completes at the end of
/// the first surname run; a surname-first author accepts at most one
/// given-name run after the surname. Everything later belongs to other
/// authors and is ignored.
pub fn first_author_group(seq: &LabeledSequence) -> Option<(Vec<String>, Vec<String>)> {
    let runs = seq.runs();
    let start = runs.iter().position(|&(l, _, _)| l.is_author())?;

    let mut given: Vec<String> = Vec::new();
    let mut surnames: Vec<String> = Vec::new();
    let mut saw_surname = false;
    let mut surname_first = false;

    let mut idx = start;
    while idx < runs.len() {
        let (label, first, last) = runs[idx];
        match label {
            Label::AuFn => {
                if saw_surname && !surname_first {
                    break;
                }
                for t in &seq.tokens().tokens()[first..=last] {
                    given.push(t.text.clone());
                }
                if saw_surname && surname_first {
                    // Surname-first author: one given-name run closes it.
                    break;
                }
            }
            Label::AuSn => {
                if saw_surname {
                    break;
                }
                saw_surname = true;
                surname_first = given.is_empty();
                for t in &seq.tokens().tokens()[first..=last] {
                    surnames.push(t.text.clone());
                }
                if !surname_first {
                    // Given-first author is complete.
                    break;
                }
            }
            _ => unreachable!("bridged runs are author runs"),
        }
        // Step to the next author run, bridging one thin punctuation run.
        idx = match next_author_run(&runs, seq, idx) {
            Some(next) => next,
            None => break,
        };
    }

    if given.is_empty() && surnames.is_empty() {
        None
    } else {
        Some((given, surnames))
    }
}

/// Index of the author run following `idx`, allowing a single intervening
/// OTH run made purely of punctuation tokens.
fn next_author_run(
    runs: &[(Label, usize, usize)],
    seq: &LabeledSequence,
    idx: usize,
) -> Option<usize> {
    let next = runs.get(idx + 1)?;
    if next.0.is_author() {
        return Some(idx + 1);
    }
    if next.0 == Label::Oth {
        let punctuation_only = seq.tokens().tokens()[next.1..=next.2]
            .iter()
            .all(|t| t.kind == crate::tokenize::TokenKind::Other);
        let after = runs.get(idx + 2)?;
        if punctuation_only && after.0.is_author() {
            return Some(idx + 2);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::tokenize;

    fn labeled(s: &str, labels: &[Label]) -> LabeledSequence {
        LabeledSequence::new(tokenize(s), labels.to_vec()).unwrap()
    }

    #[test]
    fn map_label_covers_the_schema() {
        assert_eq!(map_label(Label::Src), Some(FieldType::Source));
        assert_eq!(map_label(Label::Oth), None);
        assert_eq!(map_label(Label::Fpage), Some(FieldType::Page));
        assert_eq!(map_label(Label::Title), None);
        assert_eq!(map_label(Label::Lpage), None);
        for label in Label::ALL {
            // Total on every label.
            let _ = map_label(label);
        }
    }

    #[test]
    fn format_first_author_examples() {
        assert_eq!(
            format_first_author(&["Dominika"], &["Tkaczyk"]).unwrap().value,
            "Tkaczyk, D"
        );
        assert_eq!(format_first_author(&[], &["Tkaczyk"]).unwrap().value, "Tkaczyk");
        assert_eq!(
            format_first_author(&["Piotr", "Jan"], &["Dendek"]).unwrap().value,
            "Dendek, P"
        );
        let degenerate = format_first_author(&["Dominika"], &[]).unwrap();
        assert_eq!(degenerate.value, "Dominika");
        assert!(degenerate.degenerate);
        assert!(format_first_author(&[], &[]).is_err());
    }

    #[test]
    fn assemble_all_oth_is_empty() {
        let seq = labeled("foo bar.", &[Label::Oth, Label::Oth, Label::Oth]);
        let parsed = assemble_fields(&seq);
        assert!(parsed.is_empty());
    }

    #[test]
    fn assemble_lone_doi_becomes_source() {
        let seq = labeled(
            "10.1007/x",
            &[Label::Doi, Label::Doi, Label::Doi, Label::Doi, Label::Doi],
        );
        let parsed = assemble_fields(&seq);
        assert_eq!(parsed.get(FieldType::Source), Some("10.1007/x"));
    }

    #[test]
    fn source_priority_prefers_src_over_doi() {
        // DOI run appears before the SRC run in string order, but SRC wins.
        let seq = labeled(
            "10.1 Nature",
            &[Label::Doi, Label::Doi, Label::Doi, Label::Src],
        );
        let parsed = assemble_fields(&seq);
        assert_eq!(parsed.get(FieldType::Source), Some("Nature"));
    }

    #[test]
    fn first_run_wins_per_field_type() {
        let seq = labeled("1999 2001", &[Label::Year, Label::Year]);
        // Single contiguous run; slice spans both tokens.
        let parsed = assemble_fields(&seq);
        assert_eq!(parsed.get(FieldType::Year), Some("1999 2001"));

        let seq = labeled("1999 x 2001", &[Label::Year, Label::Oth, Label::Year]);
        let parsed = assemble_fields(&seq);
        assert_eq!(parsed.get(FieldType::Year), Some("1999"));
    }

    #[test]
    fn fig3_style_sequence_assembles_client_fields() {
        // Condensed shape of the running example: authors, source, year,
        // volume, issue, page range.
        let s = "Dominika Tkaczyk, Pawel Szostek. In International Journal, 2015, vol. 18, no. 4, pp. 317-335.";
        let labels = vec![
            Label::AuFn, // Dominika
            Label::AuSn, // Tkaczyk
            Label::Oth,  // ,
            Label::AuFn, // Pawel
            Label::AuSn, // Szostek
            Label::Oth,  // .
            Label::Oth,  // In
            Label::Src,  // International
            Label::Src,  // Journal
            Label::Oth,  // ,
            Label::Year, // 2015
            Label::Oth,  // ,
            Label::Oth,  // vol
            Label::Oth,  // .
            Label::Vol,  // 18
            Label::Oth,  // ,
            Label::Oth,  // no
            Label::Oth,  // .
            Label::Issue, // 4
            Label::Oth,  // ,
            Label::Oth,  // pp
            Label::Oth,  // .
            Label::Fpage, // 317
            Label::Oth,  // -
            Label::Lpage, // 335
            Label::Oth,  // .
        ];
        let parsed = assemble_fields(&labeled(s, &labels));
        assert_eq!(parsed.get(FieldType::Author), Some("Tkaczyk, D"));
        assert_eq!(parsed.get(FieldType::Source), Some("International Journal"));
        assert_eq!(parsed.get(FieldType::Year), Some("2015"));
        assert_eq!(parsed.get(FieldType::Volume), Some("18"));
        assert_eq!(parsed.get(FieldType::Issue), Some("4"));
        assert_eq!(parsed.get(FieldType::Page), Some("317"));
        assert_eq!(parsed.get(FieldType::Organization), None);
    }

    #[test]
    fn surname_first_author_with_comma_keeps_initial() {
        // "Tkaczyk, D., Szostek, P." — the comma is a thin OTH run inside
        // the first author group.
        let s = "Tkaczyk, D., Szostek, P.";
        let labels = vec![
            Label::AuSn, // Tkaczyk
            Label::Oth,  // ,
            Label::AuFn, // D
            Label::Oth,  // .
            Label::Oth,  // ,
            Label::AuSn, // Szostek
            Label::Oth,  // ,
            Label::AuFn, // P
            Label::Oth,  // .
        ];
        let parsed = assemble_fields(&labeled(s, &labels));
        assert_eq!(parsed.get(FieldType::Author), Some("Tkaczyk, D"));
    }

    #[test]
    fn second_author_given_names_do_not_leak_in() {
        // Given-first author followed directly by another given name with
        // no separator; the group closes at the surname.
        let s = "Dominika Tkaczyk Pawel Szostek";
        let labels = vec![Label::AuFn, Label::AuSn, Label::AuFn, Label::AuSn];
        let parsed = assemble_fields(&labeled(s, &labels));
        assert_eq!(parsed.get(FieldType::Author), Some("Tkaczyk, D"));
    }

    #[test]
    fn author_group_does_not_bridge_word_separators() {
        // "and" is alphabetic, so the OTH run is not thin; the group ends.
        let s = "Tkaczyk and D. Smith";
        let labels = vec![Label::AuSn, Label::Oth, Label::AuFn, Label::Oth, Label::AuSn];
        let parsed = assemble_fields(&labeled(s, &labels));
        assert_eq!(parsed.get(FieldType::Author), Some("Tkaczyk"));
    }

    #[test]
    fn assembled_non_author_values_are_substrings() {
        let s = "Nature Physics 12, 17-21 (2016).";
        let labels = vec![
            Label::Src,
            Label::Src,
            Label::Vol,
            Label::Oth,
            Label::Fpage,
            Label::Oth,
            Label::Lpage,
            Label::Oth,
            Label::Year,
            Label::Oth,
            Label::Oth,
        ];
        let seq = labeled(s, &labels);
        let parsed = assemble_fields(&seq);
        for field in &parsed.fields {
            if field.field_type != FieldType::Author {
                assert!(s.contains(&field.value), "{} not in {}", field.value, s);
            }
        }
    }

    #[test]
    fn parsed_reference_json_round_trip_and_key_order() {
        let parsed = ParsedReference {
            fields: vec![
                MetadataField::new(FieldType::Year, "2015"),
                MetadataField::new(FieldType::Author, "Tkaczyk, D"),
            ],
            source_string: None,
        };
        let json = serde_json::to_string(&ParsedReferenceJson::from(&parsed)).unwrap();
        assert_eq!(json, r#"{"author":"Tkaczyk, D","year":"2015"}"#);
        let back: ParsedReferenceJson = serde_json::from_str(&json).unwrap();
        let back: ParsedReference = back.into();
        assert_eq!(back.get(FieldType::Author), Some("Tkaczyk, D"));
        assert_eq!(back.get(FieldType::Year), Some("2015"));
    }
}
