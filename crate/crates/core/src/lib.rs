//! Bibliographic reference parsing toolkit: a trainable linear-chain CRF
//! tagger, a regular-expression baseline, data preparation (annotation
//! format, ground-truth matching, list alignment), a synthetic corpus
//! generator, and the field-level evaluation harness used to compare the
//! engines.

pub mod align;
pub mod annotate;
pub mod crf;
pub mod evaluate;
pub mod experiment;
pub mod gencorpus;
pub mod model;
pub mod rules;
pub mod tokenize;

pub use model::{
    assemble_fields, format_first_author, map_label, FieldType, Label, LabeledSequence,
    MetadataField, ParsedReference, ParsedReferenceJson, LABEL_COUNT,
};
pub use tokenize::{detokenize, tokenize, Token, TokenKind, TokenSequence};
