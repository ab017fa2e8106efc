//! The XML annotation format for training data and its 1-1 mapping onto
//! labeled token sequences, plus the ground-truth matching procedure that
//! manufactures annotations from (string, parsed reference) pairs.

use std::fmt::Write as _;

use thiserror::Error;

use crate::evaluate::normalize_value;
use crate::model::{Label, LabeledSequence};
use crate::tokenize::tokenize;

/// Element vocabulary of the annotation format. `citation` is the root,
/// `author` wraps `fn`/`sn`, every other element labels its text.
const ELEMENTS: [&str; 16] = [
    "citation",
    "author",
    "fn",
    "sn",
    "title",
    "journal",
    "conference",
    "year",
    "volume",
    "issue",
    "fpage",
    "lpage",
    "doi",
    "url",
    "arxiv",
    "organization",
];

fn label_for_element(name: &str) -> Option<Label> {
    match name {
        "fn" => Some(Label::AuFn),
        "sn" => Some(Label::AuSn),
        "title" => Some(Label::Title),
        "journal" | "conference" => Some(Label::Src),
        "year" => Some(Label::Year),
        "volume" => Some(Label::Vol),
        "issue" => Some(Label::Issue),
        "fpage" => Some(Label::Fpage),
        "lpage" => Some(Label::Lpage),
        "doi" => Some(Label::Doi),
        "url" => Some(Label::Url),
        "arxiv" => Some(Label::Arxiv),
        "organization" => Some(Label::Org),
        _ => None,
    }
}

/// Canonical element emitted for each label. `Src` always canonicalizes
/// to `journal`.
fn element_for_label(label: Label) -> Option<&'static str> {
    match label {
        Label::AuFn => Some("fn"),
        Label::AuSn => Some("sn"),
        Label::Title => Some("title"),
        Label::Src => Some("journal"),
        Label::Year => Some("year"),
        Label::Vol => Some("volume"),
        Label::Issue => Some("issue"),
        Label::Fpage => Some("fpage"),
        Label::Lpage => Some("lpage"),
        Label::Doi => Some("doi"),
        Label::Url => Some("url"),
        Label::Arxiv => Some("arxiv"),
        Label::Org => Some("organization"),
        Label::Oth => None,
    }
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("malformed XML at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("unknown element <{name}> at byte {offset}")]
    UnknownElement { name: String, offset: usize },
    #[error("element <{name}> not allowed at byte {offset}: {message}")]
    BadNesting {
        name: String,
        offset: usize,
        message: String,
    },
    #[error("element boundary splits token {token:?} at byte {offset}")]
    SplitToken { token: String, offset: usize },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("no acceptable occurrence of {label} value {value:?} in the reference string")]
    FieldNotFound { label: Label, value: String },
}

/// One annotated reference: its XML text and the derived labeled sequence.
#[derive(Debug, Clone)]
pub struct AnnotationRecord {
    pub xml_text: String,
    pub derived: LabeledSequence,
}

impl AnnotationRecord {
    pub fn from_xml(xml: &str) -> Result<Self, AnnotationError> {
        let derived = parse_annotation(xml)?;
        Ok(AnnotationRecord {
            xml_text: xml.to_owned(),
            derived,
        })
    }
}

enum XmlEvent {
    Open(String, usize),
    Close(String, usize),
    /// One decoded character and its byte offset in the XML input.
    Char(char, usize),
}

/// Minimal reader for the attribute-free XML subset used by the
/// annotation format. Yields decoded characters with their source
/// offsets so that later errors can point into the input.
fn read_events(xml: &str) -> Result<Vec<XmlEvent>, AnnotationError> {
    let bytes = xml.as_bytes();
    let mut events = Vec::new();
    let mut i = 0;
    while i < xml.len() {
        let rest = &xml[i..];
        let ch = rest.chars().next().unwrap();
        if ch == '<' {
            let Some(end) = rest.find('>') else {
                return Err(AnnotationError::Malformed {
                    offset: i,
                    message: "unterminated tag".into(),
                });
            };
            let inner = &rest[1..end];
            if inner.is_empty() {
                return Err(AnnotationError::Malformed {
                    offset: i,
                    message: "empty tag".into(),
                });
            }
            let (closing, name) = match inner.strip_prefix('/') {
                Some(name) => (true, name),
                None => (false, inner),
            };
            let name = name.trim_end_matches('/');
            if name.chars().any(|c| c.is_whitespace() || c == '=') {
                return Err(AnnotationError::Malformed {
                    offset: i,
                    message: format!("attributes are not supported in tag <{inner}>"),
                });
            }
            if !ELEMENTS.contains(&name) {
                return Err(AnnotationError::UnknownElement {
                    name: name.to_owned(),
                    offset: i,
                });
            }
            if closing {
                events.push(XmlEvent::Close(name.to_owned(), i));
            } else {
                events.push(XmlEvent::Open(name.to_owned(), i));
            }
            i += end + 1;
        } else if ch == '&' {
            let Some(end) = rest.find(';') else {
                return Err(AnnotationError::Malformed {
                    offset: i,
                    message: "unterminated entity".into(),
                });
            };
            let decoded = match &rest[1..end] {
                "amp" => '&',
                "lt" => '<',
                "gt" => '>',
                "quot" => '"',
                "apos" => '\'',
                other => {
                    return Err(AnnotationError::Malformed {
                        offset: i,
                        message: format!("unknown entity &{other};"),
                    })
                }
            };
            events.push(XmlEvent::Char(decoded, i));
            i += end + 1;
        } else {
            events.push(XmlEvent::Char(ch, i));
            i += ch.len_utf8();
        }
        debug_assert!(i <= bytes.len());
    }
    Ok(events)
}

/// Parses annotation XML into the labeled token sequence it encodes.
///
/// Stripping tags yields the reference string; each token takes the label
/// of its innermost enclosing field element (OTH outside any). A tag that
/// would split a token is an error.
pub fn parse_annotation(xml: &str) -> Result<LabeledSequence, AnnotationError> {
    let events = read_events(xml)?;

    let mut stack: Vec<String> = Vec::new();
    let mut text = String::new();
    // Per decoded-text byte: active label and source offset in the XML.
    let mut byte_labels: Vec<Option<Label>> = Vec::new();
    let mut byte_sources: Vec<usize> = Vec::new();
    let mut current_label: Option<Label> = None;
    let mut seen_root = false;
    let mut root_closed = false;

    for event in events {
        match event {
            XmlEvent::Open(name, offset) => {
                if root_closed {
                    return Err(AnnotationError::Malformed {
                        offset,
                        message: "content after closing </citation>".into(),
                    });
                }
                match (name.as_str(), stack.last().map(String::as_str)) {
                    ("citation", None) => {
                        if seen_root {
                            return Err(AnnotationError::Malformed {
                                offset,
                                message: "multiple <citation> roots".into(),
                            });
                        }
                        seen_root = true;
                    }
                    ("citation", Some(_)) => {
                        return Err(AnnotationError::BadNesting {
                            name,
                            offset,
                            message: "<citation> must be the root".into(),
                        })
                    }
                    (_, None) => {
                        return Err(AnnotationError::BadNesting {
                            name,
                            offset,
                            message: "content outside <citation>".into(),
                        })
                    }
                    ("fn" | "sn", Some("author")) => {}
                    ("fn" | "sn", Some(parent)) => {
                        return Err(AnnotationError::BadNesting {
                            name,
                            offset,
                            message: format!("must be inside <author>, found inside <{parent}>"),
                        })
                    }
                    (_, Some("citation")) => {}
                    (_, Some(parent)) => {
                        return Err(AnnotationError::BadNesting {
                            name,
                            offset,
                            message: format!("<{parent}> cannot contain elements"),
                        })
                    }
                }
                stack.push(name.clone());
                if let Some(label) = label_for_element(&name) {
                    if current_label.is_some() {
                        return Err(AnnotationError::BadNesting {
                            name,
                            offset,
                            message: "field elements cannot nest".into(),
                        });
                    }
                    current_label = Some(label);
                }
            }
            XmlEvent::Close(name, offset) => {
                let Some(top) = stack.pop() else {
                    return Err(AnnotationError::Malformed {
                        offset,
                        message: format!("unexpected closing </{name}>"),
                    });
                };
                if top != name {
                    return Err(AnnotationError::Malformed {
                        offset,
                        message: format!("closing </{name}> does not match open <{top}>"),
                    });
                }
                if label_for_element(&name).is_some() {
                    current_label = None;
                }
                if stack.is_empty() {
                    root_closed = true;
                }
            }
            XmlEvent::Char(ch, offset) => {
                if stack.is_empty() {
                    if !ch.is_whitespace() {
                        return Err(AnnotationError::Malformed {
                            offset,
                            message: "text outside <citation>".into(),
                        });
                    }
                    continue;
                }
                text.push(ch);
                for _ in 0..ch.len_utf8() {
                    byte_labels.push(current_label);
                    byte_sources.push(offset);
                }
            }
        }
    }
    if !seen_root {
        return Err(AnnotationError::Malformed {
            offset: 0,
            message: "missing <citation> root".into(),
        });
    }
    if !stack.is_empty() {
        return Err(AnnotationError::Malformed {
            offset: xml.len(),
            message: format!("unclosed <{}>", stack.last().unwrap()),
        });
    }

    let tokens = tokenize(&text);
    let mut labels = Vec::with_capacity(tokens.len());
    for tok in tokens.tokens() {
        let span = &byte_labels[tok.byte_offset..tok.byte_end()];
        let first = span[0];
        if span.iter().any(|&l| l != first) {
            return Err(AnnotationError::SplitToken {
                token: tok.text.clone(),
                offset: byte_sources[tok.byte_offset],
            });
        }
        labels.push(first.unwrap_or(Label::Oth));
    }
    Ok(LabeledSequence::new(tokens, labels)?)
}

fn escape_into(out: &mut String, s: &str) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
}

/// Serializes a labeled sequence into canonical annotation XML.
///
/// Every maximal block of author-labeled runs is wrapped in one
/// `<author>` element; `Src` runs emit as `<journal>`. Parsing the result
/// reproduces the input sequence exactly.
pub fn emit_annotation(seq: &LabeledSequence) -> String {
    let runs = seq.runs();
    let tokens = seq.tokens();
    let mut out = String::with_capacity(tokens.original().len() * 2);
    out.push_str("<citation>");

    let mut author_open = false;
    for (ri, &(label, first, last)) in runs.iter().enumerate() {
        if author_open && !label.is_author() {
            out.push_str("</author>");
            author_open = false;
        }
        // The gap before the run sits between elements.
        escape_into(&mut out, tokens.gap_before(first));
        if label.is_author() && !author_open {
            out.push_str("<author>");
            author_open = true;
        }
        let element = element_for_label(label);
        if let Some(name) = element {
            let _ = write!(out, "<{name}>");
        }
        for i in first..=last {
            if i > first {
                escape_into(&mut out, tokens.gap_before(i));
            }
            escape_into(&mut out, &tokens.tokens()[i].text);
        }
        if let Some(name) = element {
            let _ = write!(out, "</{name}>");
        }
        let last_run = ri + 1 == runs.len();
        if author_open && last_run {
            out.push_str("</author>");
            author_open = false;
        }
    }
    escape_into(&mut out, tokens.gap_before(tokens.len()));
    out.push_str("</citation>");
    out
}

/// One ground-truth field value to locate in a reference string.
#[derive(Debug, Clone)]
pub struct GroundTruthField {
    pub label: Label,
    pub value: String,
}

impl GroundTruthField {
    pub fn new(label: Label, value: impl Into<String>) -> Self {
        GroundTruthField {
            label,
            value: value.into(),
        }
    }
}

/// Coarse expected position of each label family within a reference,
/// as a fraction of the token range: authors first, then title, source,
/// and the numeric block.
fn stage_fraction(label: Label) -> f64 {
    let stage = match label {
        Label::AuFn | Label::AuSn | Label::Org => 0,
        Label::Title => 1,
        Label::Src | Label::Doi | Label::Url | Label::Arxiv => 2,
        _ => 3,
    };
    (stage as f64 + 0.5) / 4.0
}

/// Levenshtein distance between `a` and `b`, or `None` when it exceeds `cap`.
fn edit_distance_capped(a: &str, b: &str, cap: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > cap {
        return None;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, &cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > cap {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (prev[b.len()] <= cap).then_some(prev[b.len()])
}

/// Finds each ground-truth field value in `s` and labels the covered
/// tokens, producing a training annotation. Values are matched after
/// normalization, exactly first, then within an edit-distance budget of
/// one per ten characters. Longer values claim tokens first; leftover
/// tokens become OTH. Any value with no acceptable occurrence fails the
/// whole record so it can be discarded from training.
pub fn match_fields_to_string(
    s: &str,
    truth: &[GroundTruthField],
) -> Result<LabeledSequence, MatchError> {
    let tokens = tokenize(s);
    let n = tokens.len();
    let mut labels = vec![Label::Oth; n];
    let mut taken = vec![false; n];

    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by_key(|&i| {
        (
            std::cmp::Reverse(normalize_value(&truth[i].value).chars().count()),
            i,
        )
    });

    for idx in order {
        let field = &truth[idx];
        let target = normalize_value(&field.value);
        if target.is_empty() {
            continue;
        }
        let target_chars = target.chars().count();
        let tol = target_chars / 10;

        // Candidate spans: (distance, start, end) over free token ranges.
        let mut best: Option<(usize, f64, usize, usize)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            for j in i..n {
                if taken[j] {
                    break;
                }
                let span = normalize_value(tokens.slice(i, j));
                let span_chars = span.chars().count();
                if span_chars > target_chars + tol {
                    break;
                }
                if span_chars + tol < target_chars {
                    continue;
                }
                let Some(dist) = edit_distance_capped(&span, &target, tol) else {
                    continue;
                };
                let mid = (i + j) as f64 / 2.0 / (n.max(2) - 1) as f64;
                let placement = (mid - stage_fraction(field.label)).abs();
                let key = (dist, placement, i, j);
                let better = match &best {
                    None => true,
                    Some(b) => (key.0, key.1, key.2) < (b.0, b.1, b.2),
                };
                if better {
                    best = Some(key);
                }
            }
        }

        let Some((_, _, start, end)) = best else {
            return Err(MatchError::FieldNotFound {
                label: field.label,
                value: field.value.clone(),
            });
        };
        for k in start..=end {
            taken[k] = true;
            labels[k] = field.label;
        }
    }

    Ok(LabeledSequence::new(tokens, labels).expect("labels match token count"))
}

/// Wraps annotation records into a corpus document with a `<citations>` root.
pub fn write_corpus(records: &[AnnotationRecord]) -> String {
    let mut out = String::from("<citations>\n");
    for rec in records {
        out.push_str(&rec.xml_text);
        out.push('\n');
    }
    out.push_str("</citations>\n");
    out
}

/// Splits a corpus document into its `<citation>` records and parses each.
pub fn read_corpus(text: &str) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let trimmed = text.trim();
    let inner = trimmed
        .strip_prefix("<citations>")
        .and_then(|t| t.strip_suffix("</citations>"))
        .ok_or_else(|| AnnotationError::Malformed {
            offset: 0,
            message: "corpus must be wrapped in a <citations> root".into(),
        })?;
    let mut records = Vec::new();
    let mut rest = inner;
    let mut consumed = 0usize;
    loop {
        let Some(start) = rest.find("<citation>") else {
            if rest.trim().is_empty() {
                break;
            }
            return Err(AnnotationError::Malformed {
                offset: consumed,
                message: "stray content between <citation> records".into(),
            });
        };
        let Some(end) = rest.find("</citation>") else {
            return Err(AnnotationError::Malformed {
                offset: consumed + start,
                message: "unclosed <citation> record".into(),
            });
        };
        let end = end + "</citation>".len();
        let xml = &rest[start..end];
        records.push(AnnotationRecord::from_xml(xml)?);
        consumed += end;
        rest = &rest[end..];
    }
    Ok(records)
}
