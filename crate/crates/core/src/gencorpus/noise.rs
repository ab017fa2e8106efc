//! Seeded OCR-style corruption of rendered reference strings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Label, LabeledSequence};
use crate::tokenize::tokenize;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("corruption probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("operation mix weights must be non-negative and sum to 1 (got {0})")]
    BadMix(f64),
}

/// Relative weights of the corruption operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpMix {
    pub substitute: f64,
    pub delete_space: f64,
    pub insert_space: f64,
    pub transpose: f64,
}

impl Default for OpMix {
    fn default() -> Self {
        // Space damage dominates; it mirrors the broken-word artifacts of
        // OCR output.
        OpMix {
            substitute: 0.2,
            delete_space: 0.25,
            insert_space: 0.35,
            transpose: 0.2,
        }
    }
}

impl OpMix {
    fn sum(&self) -> f64 {
        self.substitute + self.delete_space + self.insert_space + self.transpose
    }
}

/// Per-character corruption settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Probability that an operation triggers at a character.
    pub p: f64,
    pub mix: OpMix,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(p: f64, mix: OpMix, seed: u64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(NoiseError::BadProbability(p));
        }
        let sum = mix.sum();
        if (sum - 1.0).abs() > 1e-9
            || [mix.substitute, mix.delete_space, mix.insert_space, mix.transpose]
                .iter()
                .any(|w| *w < 0.0)
        {
            return Err(NoiseError::BadMix(sum));
        }
        Ok(NoiseConfig { p, mix, seed })
    }

    pub fn clean(seed: u64) -> Self {
        NoiseConfig {
            p: 0.0,
            mix: OpMix::default(),
            seed,
        }
    }
}

/// Fixed OCR confusion pairs; `m` additionally swaps with the two-glyph
/// sequence `rn`.
fn confuse(c: char) -> Option<char> {
    match c {
        'l' => Some('1'),
        '1' => Some('l'),
        'O' => Some('0'),
        '0' => Some('O'),
        'S' => Some('5'),
        '5' => Some('S'),
        _ => None,
    }
}

#[derive(Clone, Copy)]
struct Glyph {
    ch: char,
    label: Option<Label>,
}

fn apply_noise(glyphs: &mut Vec<Glyph>, cfg: &NoiseConfig, rng: &mut ChaCha8Rng) {
    let mut i = 0;
    while i < glyphs.len() {
        if rng.gen::<f64>() >= cfg.p {
            i += 1;
            continue;
        }
        let roll = rng.gen::<f64>() * cfg.mix.sum().max(f64::MIN_POSITIVE);
        let g = glyphs[i];
        if roll < cfg.mix.substitute {
            if let Some(replacement) = confuse(g.ch) {
                glyphs[i].ch = replacement;
            } else if g.ch == 'm' {
                glyphs[i].ch = 'r';
                glyphs.insert(i + 1, Glyph { ch: 'n', label: g.label });
                i += 1;
            } else if g.ch == 'r' && glyphs.get(i + 1).map(|n| n.ch) == Some('n') {
                glyphs.remove(i + 1);
                glyphs[i].ch = 'm';
            }
        } else if roll < cfg.mix.substitute + cfg.mix.delete_space {
            if g.ch.is_whitespace() {
                glyphs.remove(i);
                continue;
            }
        } else if roll < cfg.mix.substitute + cfg.mix.delete_space + cfg.mix.insert_space {
            glyphs.insert(
                i + 1,
                Glyph {
                    ch: ' ',
                    label: None,
                },
            );
            i += 1;
        } else {
            // Transpose with the next character when neither side is
            // whitespace.
            if let Some(next) = glyphs.get(i + 1).copied() {
                if !g.ch.is_whitespace() && !next.ch.is_whitespace() {
                    glyphs[i] = next;
                    glyphs[i + 1] = g;
                    i += 1;
                }
            }
        }
        i += 1;
    }
}

/// Corrupts a plain string. Deterministic for a fixed `(s, cfg)`; never
/// returns an empty string for non-empty input.
pub fn corrupt(s: &str, cfg: &NoiseConfig) -> String {
    if cfg.p == 0.0 || s.is_empty() {
        return s.to_owned();
    }
    let mut glyphs: Vec<Glyph> = s.chars().map(|ch| Glyph { ch, label: None }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    apply_noise(&mut glyphs, cfg, &mut rng);
    let out: String = glyphs.iter().map(|g| g.ch).collect();
    if out.is_empty() {
        s.to_owned()
    } else {
        out
    }
}

/// Corrupts an annotated sequence, re-projecting labels onto the
/// corrupted tokens by character position (majority per token, earliest
/// on ties). Returns the new sequence and whether any character changed.
pub fn corrupt_labeled(
    seq: &LabeledSequence,
    cfg: &NoiseConfig,
    rng: &mut ChaCha8Rng,
) -> (LabeledSequence, bool) {
    let original = seq.tokens().original();
    if cfg.p == 0.0 || original.is_empty() {
        return (seq.clone(), false);
    }

    // Character-level labels: token label inside tokens, none in gaps.
    let mut glyphs: Vec<Glyph> = original.chars().map(|ch| Glyph { ch, label: None }).collect();
    let char_index: Vec<usize> = original.char_indices().map(|(b, _)| b).collect();
    for (tok, &label) in seq.tokens().tokens().iter().zip(seq.labels()) {
        for (ci, &byte) in char_index.iter().enumerate() {
            if byte >= tok.byte_offset && byte < tok.byte_end() {
                glyphs[ci].label = Some(label);
            }
        }
    }

    apply_noise(&mut glyphs, cfg, rng);
    if glyphs.is_empty() {
        return (seq.clone(), false);
    }

    let corrupted: String = glyphs.iter().map(|g| g.ch).collect();
    let changed = corrupted != original;
    let tokens = tokenize(&corrupted);

    // Map corrupted byte offsets back to glyph labels.
    let mut byte_labels: Vec<Option<Label>> = Vec::with_capacity(corrupted.len());
    for g in &glyphs {
        for _ in 0..g.ch.len_utf8() {
            byte_labels.push(g.label);
        }
    }
    let labels: Vec<Label> = tokens
        .tokens()
        .iter()
        .map(|tok| {
            let span = &byte_labels[tok.byte_offset..tok.byte_end()];
            let mut counts: Vec<(Label, usize)> = Vec::new();
            for l in span.iter().flatten() {
                match counts.iter_mut().find(|(cl, _)| cl == l) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((*l, 1)),
                }
            }
            counts
                .iter()
                .max_by_key(|(_, n)| *n)
                .map(|(l, _)| *l)
                .unwrap_or(Label::Oth)
        })
        .collect();

    let seq = LabeledSequence::new(tokens, labels).expect("one label per token");
    (seq, changed)
}
