//! Versioned model persistence.

use serde::{Deserialize, Serialize};

use super::{CrfModel, FeatureVectorizer, ModelIoError};
use crate::model::Label;

/// Format version written by this build; anything else is refused.
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    labels: Vec<String>,
    features: Vec<String>,
    emission_weights: Vec<f64>,
    transition_weights: Vec<f64>,
    lambda: f64,
}

/// Serializes a model into its JSON artifact.
pub fn save_model(model: &CrfModel) -> Vec<u8> {
    let file = ModelFile {
        version: MODEL_VERSION,
        labels: model.labels().iter().map(|l| l.name().to_owned()).collect(),
        features: model.vectorizer().names(),
        emission_weights: model.emission_weights().to_vec(),
        transition_weights: model.transition_weights().to_vec(),
        lambda: model.lambda(),
    };
    serde_json::to_vec(&file).expect("model serialization cannot fail")
}

/// Reads a model artifact back, refusing unknown versions and
/// inconsistent shapes.
pub fn load_model(bytes: &[u8]) -> Result<CrfModel, ModelIoError> {
    let file: ModelFile = serde_json::from_slice(bytes)?;
    if file.version != MODEL_VERSION {
        return Err(ModelIoError::VersionMismatch {
            found: file.version,
            expected: MODEL_VERSION,
        });
    }
    let labels: Vec<Label> = file
        .labels
        .iter()
        .map(|name| {
            Label::from_name(name)
                .ok_or_else(|| ModelIoError::Invalid(format!("unknown label {name:?}")))
        })
        .collect::<Result<_, _>>()?;
    let vectorizer = FeatureVectorizer::from_names(file.features);
    CrfModel::from_parts(
        vectorizer,
        labels,
        file.emission_weights,
        file.transition_weights,
        file.lambda,
    )
    .map_err(|e| ModelIoError::Invalid(e.to_string()))
}

/// Writes the artifact to disk.
pub fn save_model_to_path(model: &CrfModel, path: &std::path::Path) -> Result<(), ModelIoError> {
    Ok(std::fs::write(path, save_model(model))?)
}

/// Reads an artifact from disk.
pub fn load_model_from_path(path: &std::path::Path) -> Result<CrfModel, ModelIoError> {
    load_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::parse_annotation;
    use crate::crf::{train, TrainConfig};

    fn small_model() -> CrfModel {
        let corpus = vec![
            parse_annotation("<citation><year>2001</year> <volume>3</volume>, x.</citation>")
                .unwrap(),
            parse_annotation("<citation><journal>Acta</journal> <fpage>10</fpage>.</citation>")
                .unwrap(),
        ];
        train(
            &corpus,
            &TrainConfig {
                max_epochs: 20,
                ..TrainConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_tagging_behavior() {
        let model = small_model();
        let bytes = save_model(&model);
        let loaded = load_model(&bytes).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let words = ["Acta", "2001", "vol", ".", ",", "x", "3", "10", "Journal"];
        for _ in 0..100 {
            let n = rng.gen_range(1..=12);
            let s: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
            let s = s.join(" ");
            let a = model.tag(&s).unwrap();
            let b = loaded.tag(&s).unwrap();
            assert_eq!(a.labels(), b.labels(), "diverged on {s:?}");
        }
        // Weights survive byte-for-byte.
        assert_eq!(model.emission_weights(), loaded.emission_weights());
        assert_eq!(model.transition_weights(), loaded.transition_weights());
    }

    #[test]
    fn truncated_file_is_an_error() {
        let bytes = save_model(&small_model());
        let err = load_model(&bytes[..bytes.len() / 2]);
        assert!(matches!(err, Err(ModelIoError::Parse(_))));
    }

    #[test]
    fn version_bump_is_refused() {
        let bytes = save_model(&small_model());
        let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        value["version"] = serde_json::json!(999);
        let bytes = serde_json::to_vec(&value).unwrap();
        assert!(matches!(
            load_model(&bytes),
            Err(ModelIoError::VersionMismatch { found: 999, .. })
        ));
    }

    #[test]
    fn corrupted_shapes_are_refused() {
        let bytes = save_model(&small_model());
        let mut value: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        value["emission_weights"] = serde_json::json!([1.0, 2.0]);
        let bytes = serde_json::to_vec(&value).unwrap();
        assert!(matches!(load_model(&bytes), Err(ModelIoError::Invalid(_))));
    }
}
