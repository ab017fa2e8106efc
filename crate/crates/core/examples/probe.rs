use std::time::Instant;

use refparse_core::crf::{train, TrainConfig};
use refparse_core::evaluate::{compute_metrics, judge, ExpectedCounts};
use refparse_core::gencorpus::{builtin_styles, generate_corpus, NoiseConfig, OpMix};
use refparse_core::model::{assemble_fields, FieldType, LabeledSequence, ParsedReference};
use refparse_core::rules::rule_parse;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let train_n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let test_n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100);
    let noise_p: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.01);

    let styles = builtin_styles();
    let noise = NoiseConfig::new(noise_p, OpMix::default(), 0).unwrap();
    let t0 = Instant::now();
    let records = generate_corpus(train_n + test_n, &styles, &noise, 42).unwrap();
    eprintln!("generate: {:?}, degraded {}", t0.elapsed(), records.iter().filter(|r| r.degraded).count());

    let (train_recs, test_recs) = records.split_at(train_n);
    let corpus: Vec<LabeledSequence> = train_recs.iter().map(|r| r.annotation.derived.clone()).collect();
    let t0 = Instant::now();
    let cfg = TrainConfig { max_epochs: epochs, ..TrainConfig::default() };
    let model = train(&corpus, &cfg).unwrap();
    eprintln!("train: {:?} ({} features)", t0.elapsed(), model.vectorizer().feature_count());

    let t0 = Instant::now();
    let mut crf_preds = Vec::new();
    let mut rules_preds = Vec::new();
    for rec in test_recs {
        let tagged = model.tag(&rec.reference_string).unwrap();
        crf_preds.push(assemble_fields(&tagged));
        rules_preds.push(rule_parse(&rec.reference_string));
    }
    eprintln!("parse test: {:?}", t0.elapsed());

    let truths: Vec<ParsedReference> = test_recs.iter().map(|r| r.truth.clone()).collect();
    let expected = ExpectedCounts::from_truths(&truths);
    for (name, preds) in [("crf", &crf_preds), ("rules", &rules_preds)] {
        let mut judgments = Vec::new();
        for (i, (p, t)) in preds.iter().zip(&truths).enumerate() {
            judgments.extend(judge(p, t, i));
        }
        let report = compute_metrics(&judgments, &expected);
        let m = &report.overall_micro;
        eprintln!(
            "{name}: micro P {:.3} R {:.3} F1 {:.3} | year F1 {:.3} author F1 {:.3} source F1 {:.3} vol F1 {:.3} issue F1 {:.3} page F1 {:.3} org F1 {:.3}",
            m.precision, m.recall, m.f1,
            report.field(FieldType::Year).f1,
            report.field(FieldType::Author).f1,
            report.field(FieldType::Source).f1,
            report.field(FieldType::Volume).f1,
            report.field(FieldType::Issue).f1,
            report.field(FieldType::Page).f1,
            report.field(FieldType::Organization).f1,
        );
    }
}
