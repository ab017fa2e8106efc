//! Lossless tokenization of reference strings.
//!
//! A token is a maximal run of letters, a maximal run of ASCII digits, or a
//! single other non-whitespace character. Whitespace never forms a token;
//! it is kept verbatim in a gap table so that [`detokenize`] reproduces the
//! input byte-exactly.

use serde::{Deserialize, Serialize};

/// Token class. Letters are Unicode letters; digits are ASCII `0-9` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Alpha,
    Digit,
    Other,
}

impl TokenKind {
    /// Upper-case name used by the `tokenize` CLI subcommand.
    pub fn name(self) -> &'static str {
        match self {
            TokenKind::Alpha => "ALPHA",
            TokenKind::Digit => "DIGIT",
            TokenKind::Other => "OTHER",
        }
    }
}

/// One token of a reference string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// True when any whitespace separates this token from the previous one
    /// (or from the start of the string).
    pub preceded_by_space: bool,
    /// Byte offset of the first byte of `text` in the original string.
    pub byte_offset: usize,
}

impl Token {
    /// Byte offset one past the last byte of this token.
    pub fn byte_end(&self) -> usize {
        self.byte_offset + self.text.len()
    }
}

/// A tokenized reference string together with the whitespace gap table.
///
/// `gaps[i]` holds the whitespace immediately before token `i`;
/// `gaps[tokens.len()]` holds trailing whitespace. Reassembling
/// `gaps[0] + tokens[0] + gaps[1] + ...` reproduces the original string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    original: String,
    tokens: Vec<Token>,
    gaps: Vec<String>,
}

impl TokenSequence {
    pub fn original(&self) -> &str {
        &self.original
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Whitespace recorded immediately before token `i`.
    pub fn gap_before(&self, i: usize) -> &str {
        &self.gaps[i]
    }

    /// The verbatim slice of the original string spanning tokens
    /// `first..=last`, inter-token whitespace included.
    pub fn slice(&self, first: usize, last: usize) -> &str {
        let start = self.tokens[first].byte_offset;
        let end = self.tokens[last].byte_end();
        &self.original[start..end]
    }
}

/// Splits `s` into letter runs, digit runs and single other characters.
pub fn tokenize(s: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut gaps = Vec::new();
    let mut gap = String::new();
    let mut run_start: Option<(usize, TokenKind)> = None;
    let mut run_text = String::new();

    let flush_run =
        |run: &mut Option<(usize, TokenKind)>, text: &mut String, tokens: &mut Vec<Token>, gaps: &mut Vec<String>, gap: &mut String| {
            if let Some((offset, kind)) = run.take() {
                tokens.push(Token {
                    text: std::mem::take(text),
                    kind,
                    preceded_by_space: !gap.is_empty(),
                    byte_offset: offset,
                });
                gaps.push(std::mem::take(gap));
            }
        };

    for (offset, ch) in s.char_indices() {
        if ch.is_whitespace() {
            flush_run(&mut run_start, &mut run_text, &mut tokens, &mut gaps, &mut gap);
            gap.push(ch);
            continue;
        }
        let kind = if ch.is_alphabetic() {
            TokenKind::Alpha
        } else if ch.is_ascii_digit() {
            TokenKind::Digit
        } else {
            TokenKind::Other
        };
        match (kind, run_start) {
            // Extend the current letter or digit run.
            (TokenKind::Alpha, Some((_, TokenKind::Alpha)))
            | (TokenKind::Digit, Some((_, TokenKind::Digit))) => {
                run_text.push(ch);
            }
            _ => {
                flush_run(&mut run_start, &mut run_text, &mut tokens, &mut gaps, &mut gap);
                run_start = Some((offset, kind));
                run_text.push(ch);
                if kind == TokenKind::Other {
                    // OTHER tokens are exactly one character.
                    flush_run(&mut run_start, &mut run_text, &mut tokens, &mut gaps, &mut gap);
                }
            }
        }
    }
    flush_run(&mut run_start, &mut run_text, &mut tokens, &mut gaps, &mut gap);
    gaps.push(gap);

    TokenSequence {
        original: s.to_owned(),
        tokens,
        gaps,
    }
}

/// Reassembles the original string from tokens and the gap table.
pub fn detokenize(seq: &TokenSequence) -> String {
    let mut out = String::with_capacity(seq.original.len());
    for (i, tok) in seq.tokens.iter().enumerate() {
        out.push_str(&seq.gaps[i]);
        out.push_str(&tok.text);
    }
    out.push_str(&seq.gaps[seq.tokens.len()]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_texts(seq: &TokenSequence) -> Vec<(TokenKind, &str)> {
        seq.tokens().iter().map(|t| (t.kind, t.text.as_str())).collect()
    }

    #[test]
    fn splits_letters_digits_and_punctuation() {
        let seq = tokenize("vol. 18");
        assert_eq!(
            kinds_and_texts(&seq),
            vec![
                (TokenKind::Alpha, "vol"),
                (TokenKind::Other, "."),
                (TokenKind::Digit, "18"),
            ]
        );
        assert!(!seq.tokens()[1].preceded_by_space);
        assert!(seq.tokens()[2].preceded_by_space);
    }

    #[test]
    fn empty_input_yields_empty_sequence() {
        let seq = tokenize("");
        assert!(seq.is_empty());
        assert_eq!(detokenize(&seq), "");
    }

    #[test]
    fn digit_runs_break_on_letters_and_hyphens() {
        let seq = tokenize("s10032-015");
        assert_eq!(
            kinds_and_texts(&seq),
            vec![
                (TokenKind::Alpha, "s"),
                (TokenKind::Digit, "10032"),
                (TokenKind::Other, "-"),
                (TokenKind::Digit, "015"),
            ]
        );
    }

    #[test]
    fn round_trip_preserves_runs_of_whitespace() {
        for s in ["a  b", " lead", "trail ", "a\t\nb", "  ", "vol. 18"] {
            assert_eq!(detokenize(&tokenize(s)), s);
        }
    }

    #[test]
    fn unicode_letters_form_alpha_runs() {
        let seq = tokenize("Škoda č.7");
        assert_eq!(
            kinds_and_texts(&seq),
            vec![
                (TokenKind::Alpha, "Škoda"),
                (TokenKind::Alpha, "č"),
                (TokenKind::Other, "."),
                (TokenKind::Digit, "7"),
            ]
        );
        assert_eq!(detokenize(&seq), "Škoda č.7");
    }

    #[test]
    fn non_ascii_digits_are_other_tokens() {
        // Arabic-Indic digits are not ASCII digits; each is a single OTHER
        // token unless it is alphabetic.
        let seq = tokenize("١٢");
        assert_eq!(seq.len(), 2);
        assert!(seq.tokens().iter().all(|t| t.kind == TokenKind::Other));
    }

    #[test]
    fn byte_offsets_are_strictly_increasing_and_sliceable() {
        let s = "Tkaczyk, D. 18(4), 317-335";
        let seq = tokenize(s);
        let mut prev = None;
        for tok in seq.tokens() {
            if let Some(p) = prev {
                assert!(tok.byte_offset > p);
            }
            assert_eq!(&s[tok.byte_offset..tok.byte_end()], tok.text);
            prev = Some(tok.byte_offset);
        }
        assert!(seq.len() <= s.chars().count());
    }

    #[test]
    fn slice_includes_interior_whitespace() {
        let seq = tokenize("International  Journal");
        assert_eq!(seq.slice(0, 1), "International  Journal");
    }
}
