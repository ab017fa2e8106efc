//! Field-level comparison of extracted references against ground truth:
//! value normalization, per-field verdicts, and precision/recall/F1
//! reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{FieldType, MetadataField, ParsedReference};

/// Normalizes a field value for comparison: entity artifacts decoded,
/// lowercased, hyphen-like characters mapped to `-`, whitespace collapsed
/// and trimmed.
pub fn normalize_value(v: &str) -> String {
    let decoded = decode_entities(v);
    let mut out = String::with_capacity(decoded.len());
    let mut pending_space = false;
    for ch in decoded.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        match ch {
            '-' | '\u{2010}' | '\u{2013}' | '\u{2014}' | '\u{2212}' => out.push('-'),
            _ => out.extend(ch.to_lowercase()),
        }
    }
    out
}

fn decode_entities(v: &str) -> String {
    if !v.contains('&') {
        return v.to_owned();
    }
    let mut out = String::with_capacity(v.len());
    let mut rest = v;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let mut replaced = false;
        for (entity, ch) in [
            ("&amp;", '&'),
            ("&lt;", '<'),
            ("&gt;", '>'),
            ("&quot;", '"'),
            ("&apos;", '\''),
        ] {
            if let Some(tail) = rest.strip_prefix(entity) {
                out.push(ch);
                rest = tail;
                replaced = true;
                break;
            }
        }
        if !replaced {
            out.push('&');
            rest = &rest[1..];
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Correct,
    Incorrect,
}

/// The verdict for one extracted field of one reference.
#[derive(Debug, Clone)]
pub struct Judgment {
    pub reference_id: usize,
    pub field: MetadataField,
    pub verdict: Verdict,
}

/// Marks each extracted field correct when an unconsumed ground-truth
/// field of the same type has an equal normalized value. Every
/// ground-truth field can be consumed at most once.
pub fn judge(extracted: &ParsedReference, truth: &ParsedReference, reference_id: usize) -> Vec<Judgment> {
    let mut pool: Vec<(FieldType, String, bool)> = truth
        .fields
        .iter()
        .map(|f| (f.field_type, normalize_value(&f.value), false))
        .collect();
    extracted
        .fields
        .iter()
        .map(|field| {
            let normalized = normalize_value(&field.value);
            let hit = pool
                .iter_mut()
                .find(|(ft, v, used)| !*used && *ft == field.field_type && *v == normalized);
            let verdict = match hit {
                Some(slot) => {
                    slot.2 = true;
                    Verdict::Correct
                }
                None => Verdict::Incorrect,
            };
            Judgment {
                reference_id,
                field: field.clone(),
                verdict,
            }
        })
        .collect()
}

/// Number of ground-truth fields per type over a reference set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpectedCounts {
    counts: BTreeMap<FieldType, u64>,
}

impl ExpectedCounts {
    pub fn from_truths<'a>(truths: impl IntoIterator<Item = &'a ParsedReference>) -> Self {
        let mut counts = BTreeMap::new();
        for truth in truths {
            for field in &truth.fields {
                *counts.entry(field.field_type).or_insert(0) += 1;
            }
        }
        ExpectedCounts { counts }
    }

    pub fn add(&mut self, field_type: FieldType, n: u64) {
        *self.counts.entry(field_type).or_insert(0) += n;
    }

    pub fn get(&self, field_type: FieldType) -> u64 {
        self.counts.get(&field_type).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Counts and derived metrics for one field type (or an aggregate).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub correct: u64,
    pub extracted: u64,
    pub expected: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    fn from_counts(correct: u64, extracted: u64, expected: u64) -> Self {
        let precision = if extracted == 0 {
            0.0
        } else {
            correct as f64 / extracted as f64
        };
        let recall = if expected == 0 {
            0.0
        } else {
            correct as f64 / expected as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            correct,
            extracted,
            expected,
            precision,
            recall,
            f1,
        }
    }
}

/// Per-field-type metrics plus micro and macro aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_field: Vec<(FieldType, Metrics)>,
    /// Pooled counts across all field types.
    pub overall_micro: Metrics,
    /// Unweighted mean of per-type precision/recall/F1 over the field
    /// types that were expected or extracted at least once.
    pub overall_macro: Metrics,
}

impl MetricsReport {
    pub fn field(&self, field_type: FieldType) -> &Metrics {
        &self
            .per_field
            .iter()
            .find(|(ft, _)| *ft == field_type)
            .expect("all field types present")
            .1
    }
}

/// Pools judgments and expected counts into per-type and overall metrics.
pub fn compute_metrics(judgments: &[Judgment], expected: &ExpectedCounts) -> MetricsReport {
    let mut correct: BTreeMap<FieldType, u64> = BTreeMap::new();
    let mut extracted: BTreeMap<FieldType, u64> = BTreeMap::new();
    for j in judgments {
        *extracted.entry(j.field.field_type).or_insert(0) += 1;
        if j.verdict == Verdict::Correct {
            *correct.entry(j.field.field_type).or_insert(0) += 1;
        }
    }

    let mut per_field = Vec::with_capacity(FieldType::ALL.len());
    let mut micro = (0u64, 0u64, 0u64);
    let mut macro_sum = (0.0f64, 0.0f64, 0.0f64);
    let mut macro_n = 0u64;
    for ft in FieldType::ALL {
        let c = correct.get(&ft).copied().unwrap_or(0);
        let e = extracted.get(&ft).copied().unwrap_or(0);
        let x = expected.get(ft);
        let m = Metrics::from_counts(c, e, x);
        micro.0 += c;
        micro.1 += e;
        micro.2 += x;
        if e > 0 || x > 0 {
            macro_sum.0 += m.precision;
            macro_sum.1 += m.recall;
            macro_sum.2 += m.f1;
            macro_n += 1;
        }
        per_field.push((ft, m));
    }

    let overall_micro = Metrics::from_counts(micro.0, micro.1, micro.2);
    let overall_macro = if macro_n == 0 {
        Metrics::default()
    } else {
        Metrics {
            correct: micro.0,
            extracted: micro.1,
            expected: micro.2,
            precision: macro_sum.0 / macro_n as f64,
            recall: macro_sum.1 / macro_n as f64,
            f1: macro_sum.2 / macro_n as f64,
        }
    };

    MetricsReport {
        per_field,
        overall_micro,
        overall_macro,
    }
}

/// A report rendered for humans and for files.
#[derive(Debug, Clone)]
pub struct RenderedReport {
    pub text: String,
    pub tsv: String,
}

/// Renders the fixed-order text table (two decimals) and the
/// full-precision TSV (micro and macro overall rows).
pub fn render_report(report: &MetricsReport) -> RenderedReport {
    let mut text = String::new();
    let _ = writeln!(text, "{:<14} {:>9} {:>7} {:>5}", "field", "precision", "recall", "f1");
    for (ft, m) in &report.per_field {
        let _ = writeln!(
            text,
            "{:<14} {:>9.2} {:>7.2} {:>5.2}",
            ft.name(),
            m.precision,
            m.recall,
            m.f1
        );
    }
    let m = &report.overall_micro;
    let _ = writeln!(
        text,
        "{:<14} {:>9.2} {:>7.2} {:>5.2}",
        "overall", m.precision, m.recall, m.f1
    );

    let mut tsv = String::from("field\tcorrect\textracted\texpected\tprecision\trecall\tf1\n");
    for (ft, m) in &report.per_field {
        let _ = writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            ft.name(),
            m.correct,
            m.extracted,
            m.expected,
            m.precision,
            m.recall,
            m.f1
        );
    }
    let mi = &report.overall_micro;
    let _ = writeln!(
        tsv,
        "overall_micro\t{}\t{}\t{}\t{}\t{}\t{}",
        mi.correct, mi.extracted, mi.expected, mi.precision, mi.recall, mi.f1
    );
    let ma = &report.overall_macro;
    let _ = writeln!(
        tsv,
        "overall_macro\t\t\t\t{}\t{}\t{}",
        ma.precision, ma.recall, ma.f1
    );

    RenderedReport { text, tsv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MetadataField;

    fn reference(fields: &[(FieldType, &str)]) -> ParsedReference {
        ParsedReference {
            fields: fields
                .iter()
                .map(|(ft, v)| MetadataField::new(*ft, *v))
                .collect(),
            source_string: None,
        }
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_value("Nature–Physics"), "nature-physics");
        assert_eq!(normalize_value("  CERMINE  "), "cermine");
        assert_eq!(normalize_value("A&amp;B"), "a&b");
        assert_eq!(normalize_value("pp. 317\u{2014}335"), "pp. 317-335");
        assert_eq!(normalize_value("a \t b\nc"), "a b c");
        assert_eq!(normalize_value("&apos;Q&apos;"), "'q'");
        assert_eq!(normalize_value(""), "");
        // A bare ampersand passes through untouched.
        assert_eq!(normalize_value("A & B"), "a & b");
    }

    #[test]
    fn judge_matches_type_and_normalized_value() {
        let truth = reference(&[(FieldType::Year, "2015"), (FieldType::Volume, "18")]);
        let judgments = judge(&reference(&[(FieldType::Year, "2015")]), &truth, 0);
        assert_eq!(judgments.len(), 1);
        assert_eq!(judgments[0].verdict, Verdict::Correct);

        let judgments = judge(&reference(&[(FieldType::Year, "2016")]), &truth, 0);
        assert_eq!(judgments[0].verdict, Verdict::Incorrect);

        // Same value under a different type is incorrect.
        let judgments = judge(&reference(&[(FieldType::Issue, "18")]), &truth, 0);
        assert_eq!(judgments[0].verdict, Verdict::Incorrect);
    }

    #[test]
    fn duplicate_extractions_consume_truth_at_most_once() {
        let truth = reference(&[(FieldType::Year, "2015")]);
        let extracted = reference(&[(FieldType::Year, "2015"), (FieldType::Year, "2015")]);
        let judgments = judge(&extracted, &truth, 7);
        let verdicts: Vec<Verdict> = judgments.iter().map(|j| j.verdict).collect();
        assert_eq!(verdicts, vec![Verdict::Correct, Verdict::Incorrect]);
    }

    #[test]
    fn judge_is_invariant_under_truth_reordering() {
        let extracted = reference(&[(FieldType::Year, "2015"), (FieldType::Page, "317")]);
        let forward = reference(&[(FieldType::Year, "2015"), (FieldType::Page, "317")]);
        let reversed = reference(&[(FieldType::Page, "317"), (FieldType::Year, "2015")]);
        let a: Vec<Verdict> = judge(&extracted, &forward, 0).iter().map(|j| j.verdict).collect();
        let b: Vec<Verdict> = judge(&extracted, &reversed, 0).iter().map(|j| j.verdict).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn table5_f1_arithmetic() {
        // Counts chosen so precision/recall land exactly on the rounded
        // published pairs; F1 must come back within one hundredth.
        for (p, r, f1) in [(0.91_f64, 0.87_f64, 0.89), (0.85, 0.82, 0.83), (0.84, 0.69, 0.75)] {
            let scale = 10_000.0;
            let correct = (p * r * scale).round() as u64;
            let extracted = (r * scale).round() as u64;
            let expected = (p * scale).round() as u64;
            let m = Metrics::from_counts(correct, extracted, expected);
            assert!((m.precision - p).abs() < 1e-9);
            assert!((m.recall - r).abs() < 1e-9);
            assert!((m.f1 - f1).abs() <= 0.01, "F1 {} vs {}", m.f1, f1);
        }
    }

    #[test]
    fn perfect_extraction_scores_one() {
        let truth = reference(&[(FieldType::Year, "2015"), (FieldType::Author, "Tkaczyk, D")]);
        let judgments = judge(&truth.clone(), &truth, 0);
        let expected = ExpectedCounts::from_truths([&truth]);
        let report = compute_metrics(&judgments, &expected);
        assert_eq!(report.overall_micro.precision, 1.0);
        assert_eq!(report.overall_micro.recall, 1.0);
        assert_eq!(report.overall_micro.f1, 1.0);
    }

    #[test]
    fn empty_test_set_scores_zero() {
        let report = compute_metrics(&[], &ExpectedCounts::default());
        assert_eq!(report.overall_micro.precision, 0.0);
        assert_eq!(report.overall_micro.recall, 0.0);
        assert_eq!(report.overall_micro.f1, 0.0);
        let rendered = render_report(&report);
        assert!(rendered.text.contains("0.00"));
    }

    #[test]
    fn nothing_extracted_has_zero_precision() {
        let truth = reference(&[(FieldType::Year, "2015")]);
        let expected = ExpectedCounts::from_truths([&truth]);
        let report = compute_metrics(&[], &expected);
        assert_eq!(report.field(FieldType::Year).precision, 0.0);
        assert_eq!(report.field(FieldType::Year).recall, 0.0);
    }

    #[test]
    fn rounding_rule_in_text_full_precision_in_tsv() {
        let judgments = vec![
            Judgment {
                reference_id: 0,
                field: MetadataField::new(FieldType::Year, "2015"),
                verdict: Verdict::Correct,
            },
            Judgment {
                reference_id: 1,
                field: MetadataField::new(FieldType::Year, "1999"),
                verdict: Verdict::Incorrect,
            },
            Judgment {
                reference_id: 2,
                field: MetadataField::new(FieldType::Year, "2001"),
                verdict: Verdict::Correct,
            },
        ];
        let mut expected = ExpectedCounts::default();
        expected.add(FieldType::Year, 3);
        let report = compute_metrics(&judgments, &expected);
        let m = report.field(FieldType::Year);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        let rendered = render_report(&report);
        assert!(rendered.text.contains("0.67"));
        assert!(rendered.tsv.contains("0.6666666666666666"));
    }

    #[test]
    fn metric_bounds_hold() {
        let m = Metrics::from_counts(3, 5, 7);
        assert!(m.correct <= m.extracted.min(m.expected));
        assert!((0.0..=1.0).contains(&m.precision));
        assert!((0.0..=1.0).contains(&m.recall));
        assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
        assert!(m.f1 >= m.precision.min(m.recall) - 1e-12 || m.f1 == 0.0);
    }
}
