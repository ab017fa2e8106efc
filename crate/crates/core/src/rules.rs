//! Rule and regular-expression baseline parser. Deliberately covers a
//! couple of known reference styles well and stays quiet elsewhere:
//! fields it cannot find are simply absent.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::model::{format_first_author, FieldType, MetadataField, ParsedReference};

#[derive(Debug, Error)]
pub enum RuleSetError {
    #[error("rule line {line} is not <field>\\t<pattern>")]
    BadLine { line: usize },
    #[error("rule line {line}: unknown field type {name:?}")]
    UnknownField { line: usize, name: String },
    #[error("rule line {line}: {source}")]
    BadPattern {
        line: usize,
        source: regex::Error,
    },
}

/// How a rule turns its regex match into a field value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapturePolicy {
    /// First capture group if present, else the whole match.
    FirstGroup,
    /// First 19xx/20xx hit that is not part of a numeric range.
    StandaloneYear,
    /// A page range `A-B` with `A < B`; emits `A`.
    FirstPageOfRange,
    /// Leading author pattern, normalized to `"Surname, I"`.
    LeadingAuthor,
    /// Longest capitalized-word run between the author block and the year.
    CapitalizedRun,
}

/// One ordered rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub field: FieldType,
    pub pattern: Regex,
    pub policy: CapturePolicy,
}

/// Ordered rules; the first hit per field type wins.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

fn hyphen_class() -> &'static str {
    // The three range separators the baseline understands.
    r"[-\u{2013}\u{2014}]"
}

static DEFAULT_RULES: OnceLock<RuleSet> = OnceLock::new();

impl RuleSet {
    /// The built-in baseline patterns.
    pub fn default_rules() -> &'static RuleSet {
        DEFAULT_RULES.get_or_init(|| {
            let hy = hyphen_class();
            let rules = vec![
                Rule {
                    field: FieldType::Year,
                    pattern: Regex::new(r"(19|20)\d{2}").unwrap(),
                    policy: CapturePolicy::StandaloneYear,
                },
                Rule {
                    field: FieldType::Page,
                    pattern: Regex::new(&format!(
                        r"(?i)\bpp?\.?\s*(\d{{1,6}})\s*{hy}\s*(\d{{1,6}})"
                    ))
                    .unwrap(),
                    policy: CapturePolicy::FirstPageOfRange,
                },
                Rule {
                    field: FieldType::Page,
                    pattern: Regex::new(&format!(
                        r"(?i)\bpages?\s+(\d{{1,6}})\s*{hy}\s*(\d{{1,6}})"
                    ))
                    .unwrap(),
                    policy: CapturePolicy::FirstPageOfRange,
                },
                Rule {
                    field: FieldType::Page,
                    pattern: Regex::new(&format!(r"\b(\d{{1,6}})\s*{hy}\s*(\d{{1,6}})\b"))
                        .unwrap(),
                    policy: CapturePolicy::FirstPageOfRange,
                },
                Rule {
                    field: FieldType::Volume,
                    pattern: Regex::new(r"(?i)\bvol(?:ume)?\.?\s*(\d{1,4})").unwrap(),
                    policy: CapturePolicy::FirstGroup,
                },
                Rule {
                    field: FieldType::Volume,
                    pattern: Regex::new(r"\b(\d{1,4})\s*\(\s*\d{1,4}\s*\)").unwrap(),
                    policy: CapturePolicy::FirstGroup,
                },
                Rule {
                    field: FieldType::Issue,
                    pattern: Regex::new(r"(?i)\b(?:no\.?|issue)\s*(\d{1,4})").unwrap(),
                    policy: CapturePolicy::FirstGroup,
                },
                Rule {
                    field: FieldType::Issue,
                    pattern: Regex::new(r"\b\d{1,4}\s*\(\s*(\d{1,4})\s*\)").unwrap(),
                    policy: CapturePolicy::FirstGroup,
                },
                Rule {
                    field: FieldType::Source,
                    pattern: Regex::new(r"\b(10\.\d{4,9}/\S+?)[.,;]?(?:\s|$)").unwrap(),
                    policy: CapturePolicy::FirstGroup,
                },
                Rule {
                    field: FieldType::Source,
                    pattern: Regex::new(r"\b(https?://\S+?)[.,;]?(?:\s|$)").unwrap(),
                    policy: CapturePolicy::FirstGroup,
                },
                Rule {
                    field: FieldType::Source,
                    pattern: Regex::new(r"(?i)\barxiv:\s*(\d{4}\.\d{4,5}(?:v\d+)?)").unwrap(),
                    policy: CapturePolicy::FirstGroup,
                },
                Rule {
                    field: FieldType::Source,
                    pattern: Regex::new(r"unused").unwrap(),
                    policy: CapturePolicy::CapitalizedRun,
                },
                Rule {
                    field: FieldType::Author,
                    pattern: Regex::new(r"unused").unwrap(),
                    policy: CapturePolicy::LeadingAuthor,
                },
            ];
            RuleSet { rules }
        })
    }

    /// Loads custom rules from a `<field>\t<pattern>` file; matched values
    /// come from the first capture group when one exists.
    pub fn from_pattern_file(text: &str) -> Result<RuleSet, RuleSetError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let Some((field_name, pattern)) = raw.split_once('\t') else {
                return Err(RuleSetError::BadLine { line });
            };
            let field = FieldType::from_name(field_name.trim()).ok_or_else(|| {
                RuleSetError::UnknownField {
                    line,
                    name: field_name.trim().to_owned(),
                }
            })?;
            let pattern =
                Regex::new(pattern).map_err(|source| RuleSetError::BadPattern { line, source })?;
            rules.push(Rule {
                field,
                pattern,
                policy: CapturePolicy::FirstGroup,
            });
        }
        Ok(RuleSet { rules })
    }

    /// Applies the rules in order; the first successful extraction per
    /// field type wins. Absent fields are not errors.
    pub fn parse(&self, s: &str) -> ParsedReference {
        let mut fields: Vec<MetadataField> = Vec::new();
        let have = |fields: &[MetadataField], ft: FieldType| {
            fields.iter().any(|f| f.field_type == ft)
        };
        for rule in &self.rules {
            if have(&fields, rule.field) {
                continue;
            }
            let value = match rule.policy {
                CapturePolicy::FirstGroup => first_group(&rule.pattern, s),
                CapturePolicy::StandaloneYear => standalone_year(&rule.pattern, s),
                CapturePolicy::FirstPageOfRange => first_page(&rule.pattern, s),
                CapturePolicy::LeadingAuthor => leading_author(s),
                CapturePolicy::CapitalizedRun => capitalized_run(s),
            };
            if let Some(value) = value {
                fields.push(MetadataField::new(rule.field, value));
            }
        }
        fields.sort_by_key(|f| FieldType::ALL.iter().position(|&t| t == f.field_type));
        ParsedReference {
            fields,
            source_string: Some(s.to_owned()),
        }
    }
}

/// Parses with the built-in rule set.
pub fn rule_parse(s: &str) -> ParsedReference {
    RuleSet::default_rules().parse(s)
}

fn first_group(pattern: &Regex, s: &str) -> Option<String> {
    let caps = pattern.captures(s)?;
    let m = caps.get(1).or_else(|| caps.get(0))?;
    Some(m.as_str().to_owned())
}

fn is_hyphen_like(c: char) -> bool {
    matches!(c, '-' | '\u{2013}' | '\u{2014}')
}

/// First 19xx/20xx match with no digit run or numeric range glued onto
/// either side.
fn standalone_year(pattern: &Regex, s: &str) -> Option<String> {
    for m in pattern.find_iter(s) {
        let before = s[..m.start()].chars().next_back();
        let after = s[m.end()..].chars().next();
        let glued_before = match before {
            Some(c) => c.is_ascii_digit() || is_hyphen_like(c),
            None => false,
        };
        let glued_after = match after {
            Some(c) => c.is_ascii_digit() || is_hyphen_like(c),
            None => false,
        };
        if !glued_before && !glued_after {
            return Some(m.as_str().to_owned());
        }
    }
    None
}

/// `A-B` range with `A < B`; emits the first page.
fn first_page(pattern: &Regex, s: &str) -> Option<String> {
    for caps in pattern.captures_iter(s) {
        let a = caps.get(1)?.as_str();
        let b = caps.get(2)?.as_str();
        let (Ok(av), Ok(bv)) = (a.parse::<u64>(), b.parse::<u64>()) else {
            continue;
        };
        if av < bv {
            return Some(a.to_owned());
        }
    }
    None
}

fn leading_author_patterns() -> &'static (Regex, Regex) {
    static PATTERNS: OnceLock<(Regex, Regex)> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        // Head of "Surname," — the initials after it are validated in code
        // because the regex engine has no lookahead to rule out full
        // given names.
        let surname_first =
            Regex::new(r"^\W{0,4}(\p{Lu}[\p{Ll}'\-]+(?: \p{Lu}[\p{Ll}'\-]+)?),\s*").unwrap();
        let given_first = Regex::new(
            r"^\W{0,4}((?:\p{Lu}\.\s*){1,2})(\p{Lu}[\p{Ll}'\-]+(?: \p{Lu}[\p{Ll}'\-]+)?)",
        )
        .unwrap();
        (surname_first, given_first)
    })
}

/// One `X` or `X.` initial at the start of `rest`, rejecting word starts.
fn read_initial(rest: &str) -> Option<(char, usize)> {
    let mut chars = rest.chars();
    let c = chars.next()?;
    if !c.is_uppercase() {
        return None;
    }
    match chars.next() {
        Some('.') => Some((c, c.len_utf8() + 1)),
        Some(next) if next.is_alphanumeric() => None,
        _ => Some((c, c.len_utf8())),
    }
}

/// Leading `"Surname, F."` or `"F. Surname"` author block: the formatted
/// value and the byte offset just past it.
fn leading_author_span(s: &str) -> Option<(String, usize)> {
    let (surname_first, given_first) = leading_author_patterns();
    if let Some(caps) = surname_first.captures(s) {
        let mut end = caps.get(0).unwrap().end();
        let mut initials = Vec::new();
        while initials.len() < 2 {
            let Some((initial, used)) = read_initial(&s[end..]) else {
                break;
            };
            initials.push(initial.to_string());
            end += used;
            // A single space may separate doubled initials.
            match (s[end..].strip_prefix(' '), initials.len()) {
                (Some(stripped), 1) if read_initial(stripped).is_some() => end += 1,
                _ => break,
            }
        }
        let first = initials.first()?;
        let surnames: Vec<&str> = caps[1].split_whitespace().collect();
        let value = format_first_author(&[first.as_str()], &surnames).ok()?.value;
        return Some((value, end));
    }
    let caps = given_first.captures(s)?;
    let initial: String = caps[1].chars().take(1).collect();
    let surnames: Vec<&str> = caps.get(2).unwrap().as_str().split_whitespace().collect();
    let value = format_first_author(&[initial.as_str()], &surnames).ok()?.value;
    Some((value, caps.get(0).unwrap().end()))
}

/// Leading `"Surname, F."` or `"F. Surname"`, normalized through the
/// shared first-author formatter.
fn leading_author(s: &str) -> Option<String> {
    leading_author_span(s).map(|(value, _)| value)
}

/// Longest run of capitalized words (single capitals and short
/// connectors allowed) between the author block and the year.
fn capitalized_run(s: &str) -> Option<String> {
    let year = Regex::new(r"\b(19|20)\d{2}\b").unwrap();
    let limit = year.find(s).map(|m| m.start()).unwrap_or(s.len());
    let start = leading_author_span(s).map(|(_, end)| end).unwrap_or(0);
    if start >= limit {
        return None;
    }
    let region = &s[start..limit];

    const CONNECTORS: [&str; 7] = ["of", "on", "and", "the", "in", "for", "der"];
    let mut best: Option<(usize, usize, usize)> = None; // (words, start, end)
    let mut run_start: Option<usize> = None;
    let mut run_words = 0usize;
    let mut run_end = 0usize;

    let close = |run_start: &mut Option<usize>, run_words: &mut usize, run_end: usize,
                     best: &mut Option<(usize, usize, usize)>| {
        if let Some(rs) = run_start.take() {
            if *run_words >= 2 && best.map_or(true, |(w, _, _)| *run_words > w) {
                *best = Some((*run_words, rs, run_end));
            }
            *run_words = 0;
        }
    };

    let word_re = Regex::new(r"[^\s,.;:()\[\]]+").unwrap();
    for m in word_re.find_iter(region) {
        let word = m.as_str();
        let initcap = {
            let mut chars = word.chars();
            chars.next().is_some_and(char::is_uppercase)
                && word.chars().skip(1).all(|c| c.is_lowercase())
                && word.chars().all(char::is_alphabetic)
        };
        let connector = run_start.is_some() && CONNECTORS.contains(&word);
        // A trailing separator right before the word ends the run.
        let gap = &region[run_end.min(m.start())..m.start()];
        let broken = run_start.is_some() && gap.chars().any(|c| !c.is_whitespace());
        if broken {
            close(&mut run_start, &mut run_words, run_end, &mut best);
        }
        if initcap || connector {
            if run_start.is_none() {
                if !initcap {
                    continue;
                }
                run_start = Some(m.start());
            }
            if initcap {
                run_words += 1;
            }
            run_end = m.end();
        } else {
            close(&mut run_start, &mut run_words, run_end, &mut best);
        }
    }
    close(&mut run_start, &mut run_words, run_end, &mut best);

    best.map(|(_, rs, re)| region[rs..re].trim_end_matches(CONNECTOR_TRIM).to_owned())
}

const CONNECTOR_TRIM: [char; 2] = [' ', '\t'];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FieldType;

    #[test]
    fn fig1_style_string_extracts_the_numeric_fields() {
        let s = "Dominika Tkaczyk, Pawel Szostek, Mateusz Fedoryszak, Piotr Jan Dendek and Lukasz Bolikowski. CERMINE: automatic extraction of structured metadata from scientific literature. In International Journal on Document Analysis and Recognition, 2015, vol. 18, no. 4, pp. 317-335, doi: 10.1007/s10032-015-0249-8.";
        let parsed = rule_parse(s);
        assert_eq!(parsed.get(FieldType::Year), Some("2015"));
        assert_eq!(parsed.get(FieldType::Volume), Some("18"));
        assert_eq!(parsed.get(FieldType::Issue), Some("4"));
        assert_eq!(parsed.get(FieldType::Page), Some("317"));
        assert_eq!(
            parsed.get(FieldType::Source),
            Some("10.1007/s10032-015-0249-8")
        );
    }

    #[test]
    fn page_fragment_examples() {
        assert_eq!(rule_parse("pp. 317-335").get(FieldType::Page), Some("317"));
        assert_eq!(rule_parse("pages 12\u{2013}19").get(FieldType::Page), Some("12"));
        assert_eq!(rule_parse("7, 40-44.").get(FieldType::Page), Some("40"));
        // Reversed ranges are not pages.
        assert_eq!(rule_parse("44-40").get(FieldType::Page), None);
    }

    #[test]
    fn nothing_matches_nothing_extracted() {
        let parsed = rule_parse("no digits here");
        assert_eq!(parsed.get(FieldType::Year), None);
        assert_eq!(parsed.get(FieldType::Page), None);
        assert_eq!(parsed.get(FieldType::Volume), None);
    }

    #[test]
    fn year_must_stand_alone() {
        assert_eq!(rule_parse("stuff (2015).").get(FieldType::Year), Some("2015"));
        // Inside a numeric range or longer digit run it does not count.
        assert_eq!(rule_parse("pp. 2015-2019").get(FieldType::Year), None);
        assert_eq!(rule_parse("id 12015.").get(FieldType::Year), None);
        // A later standalone hit still wins.
        assert_eq!(
            rule_parse("1998-2001, in 2015.").get(FieldType::Year),
            Some("2015")
        );
    }

    #[test]
    fn volume_and_issue_markers() {
        let parsed = rule_parse("Journal, vol. 18, no. 4");
        assert_eq!(parsed.get(FieldType::Volume), Some("18"));
        assert_eq!(parsed.get(FieldType::Issue), Some("4"));
        let parsed = rule_parse("Journal 18(4), 317-335");
        assert_eq!(parsed.get(FieldType::Volume), Some("18"));
        assert_eq!(parsed.get(FieldType::Issue), Some("4"));
        assert_eq!(rule_parse("18:317").get(FieldType::Volume), None);
    }

    #[test]
    fn source_identifier_priority() {
        assert_eq!(
            rule_parse("x doi: 10.1007/s1-2 y").get(FieldType::Source),
            Some("10.1007/s1-2")
        );
        assert_eq!(
            rule_parse("see https://example.org/p?q=1 now").get(FieldType::Source),
            Some("https://example.org/p?q=1")
        );
        assert_eq!(
            rule_parse("arXiv:1706.03762").get(FieldType::Source),
            Some("1706.03762")
        );
    }

    #[test]
    fn capitalized_run_finds_the_journal() {
        let s = "Tkaczyk, D., Szostek, P. International Journal on Document Analysis and Recognition 18, 317-335 (2015).";
        let parsed = rule_parse(s);
        assert_eq!(
            parsed.get(FieldType::Source),
            Some("International Journal on Document Analysis and Recognition")
        );
    }

    #[test]
    fn dotted_abbreviations_break_the_capitalized_run() {
        let s = "TKACZYK D: Int. J. Doc. Anal. 2015, 18:317.";
        assert_eq!(rule_parse(s).get(FieldType::Source), None);
    }

    #[test]
    fn author_archetypes() {
        assert_eq!(
            rule_parse("Tkaczyk, D., et al. Nature 12 (2015)").get(FieldType::Author),
            Some("Tkaczyk, D")
        );
        assert_eq!(
            rule_parse("D. Tkaczyk and P. Szostek. Nature.").get(FieldType::Author),
            Some("Tkaczyk, D")
        );
        // Full given names are outside the archetype.
        assert_eq!(
            rule_parse("Tkaczyk, Dominika. Nature.").get(FieldType::Author),
            None
        );
        assert_eq!(rule_parse("TKACZYK D; Nature.").get(FieldType::Author), None);
    }

    #[test]
    fn values_are_substrings_of_the_input() {
        let s = "B. Good. Results in Chemistry 9(2), pp. 101-109, 2021, doi: 10.1000/xyz12.";
        let parsed = rule_parse(s);
        for field in &parsed.fields {
            if field.field_type == FieldType::Author {
                continue;
            }
            assert!(s.contains(&field.value), "{:?} not in input", field.value);
        }
    }

    #[test]
    fn custom_pattern_file() {
        let text = "year\t\\b(?:19|20)\\d{2}\\b\nvolume\tvol\\. (\\d+)\n";
        let rules = RuleSet::from_pattern_file(text).unwrap();
        let parsed = rules.parse("vol. 7, 1999");
        assert_eq!(parsed.get(FieldType::Year), Some("1999"));
        assert_eq!(parsed.get(FieldType::Volume), Some("7"));

        assert!(matches!(
            RuleSet::from_pattern_file("bogus\t.*"),
            Err(RuleSetError::UnknownField { .. })
        ));
        assert!(matches!(
            RuleSet::from_pattern_file("year\t((("),
            Err(RuleSetError::BadPattern { .. })
        ));
        assert!(matches!(
            RuleSet::from_pattern_file("no tab here"),
            Err(RuleSetError::BadLine { .. })
        ));
    }
}
