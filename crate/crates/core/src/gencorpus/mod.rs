//! Deterministic synthetic corpus generation: structured records rendered
//! into reference styles with gold annotations and optional OCR noise.

mod noise;
mod style;

pub use noise::{corrupt, corrupt_labeled, NoiseConfig, NoiseError, OpMix};
pub use style::{
    builtin_styles, render_reference, styles_by_name, AuthorFormat, AuthorPattern, FieldSlot,
    Segment, StyleError, StyleTemplate,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotate::AnnotationRecord;
use crate::model::{assemble_fields, ParsedReference};

/// One author with given names and surname.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonName {
    pub given: Vec<String>,
    pub surname: String,
}

/// A structured bibliographic record, the generator's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRecord {
    pub authors: Vec<PersonName>,
    /// Corporate author; set instead of `authors`.
    pub organization: Option<String>,
    pub title: String,
    pub source_name: String,
    pub year: u16,
    pub volume: u32,
    pub issue: u32,
    pub fpage: u32,
    pub lpage: u32,
    pub doi: Option<String>,
    pub url: Option<String>,
    pub arxiv: Option<String>,
}

const SURNAMES: [&str; 60] = [
    "Tkaczyk", "Szostek", "Fedoryszak", "Dendek", "Bolikowski", "Kowalski", "Nowak", "Varga",
    "Smith", "Johnson", "Brown", "Davies", "Wilson", "Taylor", "Thomas", "Roberts", "Khan",
    "Patel", "Murphy", "Kelly", "Walsh", "Byrne", "Ryan", "Doyle", "Schmidt", "Fischer", "Weber",
    "Meyer", "Wagner", "Becker", "Hoffmann", "Koch", "Richter", "Wolf", "Neumann", "Braun",
    "Keller", "Vogel", "Frank", "Berger", "Dubois", "Moreau", "Laurent", "Simon", "Michel",
    "Leroy", "Garcia", "Martinez", "Lopez", "Hernandez", "Rossi", "Russo", "Ferrari", "Esposito",
    "Bianchi", "Romano", "Ricci", "Marino", "Greco", "Bruno",
];

const GIVEN_NAMES: [&str; 40] = [
    "Dominika", "Pawel", "Mateusz", "Piotr", "Jan", "Lukasz", "Andrew", "Paraic", "Joeran",
    "Anna", "Maria", "Eva", "Johann", "Karl", "Heinz", "Pierre", "Marie", "Claire", "Luigi",
    "Paolo", "Giulia", "Carlos", "Elena", "Miguel", "Sofia", "James", "Oliver", "Emily", "Grace",
    "Henry", "Laura", "Martin", "Nora", "Oscar", "Petra", "Victor", "Wanda", "Tomas", "Ursula",
    "Felix",
];

const ORGANIZATIONS: [&str; 10] = [
    "World Health Organization",
    "International Union of Crystallography",
    "American Chemical Society",
    "Royal Society of Chemistry",
    "European Chemicals Agency",
    "National Institute of Standards",
    "International Energy Agency",
    "United Nations Environment Programme",
    "Chemical Abstracts Service",
    "Federation of Analytical Chemistry",
];

const TITLE_WORDS: [&str; 64] = [
    "automatic", "extraction", "structured", "metadata", "scientific", "literature", "analysis",
    "synthesis", "catalytic", "oxidation", "molecular", "spectra", "kinetics", "thermal",
    "stability", "aqueous", "solutions", "polymer", "surfaces", "reaction", "mechanism",
    "crystal", "growth", "phase", "transition", "spectroscopy", "infrared", "measurement",
    "properties", "organic", "compounds", "novel", "approach", "effects", "temperature",
    "pressure", "binding", "energies", "electron", "transfer", "complexes", "ligand", "exchange",
    "solvent", "dynamics", "simulation", "model", "prediction", "adsorption", "isotherm",
    "fluorescence", "imaging", "nanoparticle", "assembly", "protein", "folding", "membrane",
    "transport", "ionic", "conductivity", "electrode", "materials", "characterization", "review",
];

const VENUE_TOPICS: [&str; 24] = [
    "Chemical", "Physics", "Organic", "Analytical", "Molecular", "Document", "Analysis",
    "Recognition", "Spectroscopy", "Materials", "Polymer", "Catalysis", "Thermodynamics",
    "Crystallography", "Biochemistry", "Environmental", "Computational", "Theoretical",
    "Inorganic", "Physical", "Medicinal", "Structural", "Quantum", "Applied",
];

const VENUE_PATTERNS: [&str; 6] = [
    "Journal of {A} {B}",
    "International Journal of {A} {B}",
    "{A} {B} Letters",
    "Annals of {A} {B}",
    "Advances in {A} {B}",
    "{A} Reviews",
];

/// One generated reference with everything the experiments need.
#[derive(Debug, Clone)]
pub struct GeneratedRecord {
    /// The (possibly corrupted) annotated form used for training.
    pub annotation: AnnotationRecord,
    /// Client-schema ground truth derived from the clean rendering.
    pub truth: ParsedReference,
    /// The raw reference string handed to parsers.
    pub reference_string: String,
    pub style: String,
    /// Set when corruption changed a field value so the annotation no
    /// longer assembles to `truth`.
    pub degraded: bool,
}

fn derive_seed(seed: u64, index: u64, stream: u64) -> u64 {
    // splitmix64 over (seed, index, stream).
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// Samples one record from the seeded pools.
pub fn sample_record(seed: u64, index: u64) -> SourceRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index, 1));

    let organization = (rng.gen::<f64>() < 0.08).then(|| pick(&mut rng, &ORGANIZATIONS).to_owned());
    let authors = if organization.is_some() {
        Vec::new()
    } else {
        let count = rng.gen_range(1..=4);
        (0..count)
            .map(|_| {
                let mut given = vec![pick(&mut rng, &GIVEN_NAMES).to_owned()];
                if rng.gen::<f64>() < 0.2 {
                    given.push(pick(&mut rng, &GIVEN_NAMES).to_owned());
                }
                PersonName {
                    given,
                    surname: pick(&mut rng, &SURNAMES).to_owned(),
                }
            })
            .collect()
    };

    let title_len = rng.gen_range(4..=9);
    let mut title_words: Vec<&str> = (0..title_len).map(|_| pick(&mut rng, &TITLE_WORDS)).collect();
    let first = title_words[0];
    let capitalized = format!(
        "{}{}",
        first.chars().next().unwrap().to_uppercase(),
        &first[1..]
    );
    let mut title = capitalized;
    for w in title_words.drain(1..) {
        title.push(' ');
        title.push_str(w);
    }

    let pattern = VENUE_PATTERNS[rng.gen_range(0..VENUE_PATTERNS.len())];
    let a = pick(&mut rng, &VENUE_TOPICS);
    let mut b = pick(&mut rng, &VENUE_TOPICS);
    while b == a {
        b = pick(&mut rng, &VENUE_TOPICS);
    }
    let source_name = pattern.replace("{A}", a).replace("{B}", b);

    let year = rng.gen_range(1960..=2024u16);
    let volume = rng.gen_range(1..=199u32);
    let issue = rng.gen_range(1..=12u32);
    let fpage = rng.gen_range(1..=2999u32);
    let lpage = fpage + rng.gen_range(1..=49u32);

    let venue_initials: String = source_name
        .split_whitespace()
        .filter_map(|w| w.chars().next())
        .flat_map(|c| c.to_lowercase())
        .collect();
    let doi = (rng.gen::<f64>() < 0.75)
        .then(|| format!("10.{}/{}{}.{}", rng.gen_range(1000..9999), venue_initials, volume, fpage));
    let arxiv = (rng.gen::<f64>() < 0.5).then(|| {
        format!(
            "{:02}{:02}.{:04}",
            year % 100,
            rng.gen_range(1..=12),
            (fpage * 3 + volume) % 10000
        )
    });
    let url = (rng.gen::<f64>() < 0.5).then(|| {
        format!(
            "http://www.{}.org/{}/{}",
            venue_initials, volume, fpage
        )
    });

    SourceRecord {
        authors,
        organization,
        title,
        source_name,
        year,
        volume,
        issue,
        fpage,
        lpage,
        doi,
        url,
        arxiv,
    }
}

/// Generates `n` records, assigning styles round-robin and applying the
/// noise model. Byte-identical output for identical inputs.
pub fn generate_corpus(
    n: usize,
    styles: &[StyleTemplate],
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<GeneratedRecord>, StyleError> {
    assert!(!styles.is_empty(), "at least one style is required");
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let style = &styles[i % styles.len()];
        let record = sample_record(seed, i as u64);
        let clean = render_reference(&record, style)?;
        let truth = assemble_fields(&clean.derived);

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64, 2));
        let (corrupted, changed) = corrupt_labeled(&clean.derived, noise, &mut rng);
        let degraded = changed && {
            let reparsed = assemble_fields(&corrupted);
            normalized_fields(&reparsed) != normalized_fields(&truth)
        };
        let annotation = if changed {
            let xml = crate::annotate::emit_annotation(&corrupted);
            AnnotationRecord {
                xml_text: xml,
                derived: corrupted,
            }
        } else {
            clean
        };
        records.push(GeneratedRecord {
            reference_string: annotation.derived.tokens().original().to_owned(),
            annotation,
            truth,
            style: style.name.clone(),
            degraded,
        });
    }
    Ok(records)
}

fn normalized_fields(reference: &ParsedReference) -> Vec<(crate::model::FieldType, String)> {
    let mut fields: Vec<(crate::model::FieldType, String)> = reference
        .fields
        .iter()
        .map(|f| (f.field_type, crate::evaluate::normalize_value(&f.value)))
        .collect();
    fields.sort();
    fields
}

/// Serializes the paired corpus files: annotation XML and truth JSONL.
pub fn corpus_files(records: &[GeneratedRecord]) -> (String, String) {
    let annotations: Vec<AnnotationRecord> =
        records.iter().map(|r| r.annotation.clone()).collect();
    let xml = crate::annotate::write_corpus(&annotations);
    let mut jsonl = String::new();
    for r in records {
        let json = crate::model::ParsedReferenceJson::from(&r.truth);
        jsonl.push_str(&serde_json::to_string(&json).expect("serializable"));
        jsonl.push('\n');
    }
    (xml, jsonl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::parse_annotation;
    use crate::model::FieldType;

    #[test]
    fn zero_records_give_empty_files() {
        let styles = builtin_styles();
        let records = generate_corpus(0, &styles, &NoiseConfig::clean(1), 1).unwrap();
        assert!(records.is_empty());
        let (xml, jsonl) = corpus_files(&records);
        assert_eq!(xml, "<citations>\n</citations>\n");
        assert_eq!(jsonl, "");
    }

    #[test]
    fn round_robin_style_assignment() {
        let styles = builtin_styles();
        let records = generate_corpus(10, &styles, &NoiseConfig::clean(1), 7).unwrap();
        for (i, rec) in records.iter().enumerate() {
            assert_eq!(rec.style, styles[i % 5].name);
        }
        let mut counts = std::collections::BTreeMap::new();
        for rec in &records {
            *counts.entry(rec.style.clone()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c == 2));
    }

    #[test]
    fn clean_corpus_is_gold_consistent() {
        let styles = builtin_styles();
        let records = generate_corpus(200, &styles, &NoiseConfig::clean(0), 42).unwrap();
        for rec in &records {
            assert!(!rec.degraded);
            let reparsed = parse_annotation(&rec.annotation.xml_text).unwrap();
            let assembled = assemble_fields(&reparsed);
            assert_eq!(
                normalized_fields(&assembled),
                normalized_fields(&rec.truth),
                "style {} string {:?}",
                rec.style,
                rec.reference_string
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let styles = builtin_styles();
        let noise = NoiseConfig::new(0.02, OpMix::default(), 9).unwrap();
        let a = generate_corpus(50, &styles, &noise, 3).unwrap();
        let b = generate_corpus(50, &styles, &noise, 3).unwrap();
        let files_a = corpus_files(&a);
        let files_b = corpus_files(&b);
        assert_eq!(files_a, files_b);
    }

    #[test]
    fn noisy_records_remain_parseable_annotations() {
        let styles = builtin_styles();
        let noise = NoiseConfig::new(0.05, OpMix::default(), 1).unwrap();
        let records = generate_corpus(100, &styles, &noise, 11).unwrap();
        let mut any_degraded = false;
        for rec in &records {
            let reparsed = parse_annotation(&rec.annotation.xml_text).unwrap();
            assert_eq!(reparsed.labels(), rec.annotation.derived.labels());
            any_degraded |= rec.degraded;
        }
        assert!(any_degraded, "5% noise should degrade something in 100 records");
    }

    #[test]
    fn truths_carry_the_client_schema() {
        let styles = builtin_styles();
        let records = generate_corpus(50, &styles, &NoiseConfig::clean(0), 5).unwrap();
        for rec in &records {
            assert!(rec.truth.get(FieldType::Year).is_some());
            assert!(rec.truth.get(FieldType::Page).is_some());
            assert!(rec.truth.get(FieldType::Source).is_some());
            let has_author = rec.truth.get(FieldType::Author).is_some();
            let has_org = rec.truth.get(FieldType::Organization).is_some();
            assert!(has_author ^ has_org, "exactly one of author/organization");
        }
    }

    #[test]
    fn record_invariants_hold() {
        for i in 0..500 {
            let rec = sample_record(99, i);
            assert!((1900..=2099).contains(&rec.year));
            assert!(rec.fpage <= rec.lpage);
            assert!(rec.organization.is_some() || !rec.authors.is_empty());
        }
    }
}
