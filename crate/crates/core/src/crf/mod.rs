//! Linear-chain CRF sequence tagger: feature extraction, exact
//! inference, regularized maximum-likelihood training and persistence.

mod features;
mod inference;
mod io;
mod train;

pub use features::{extract_features, FeatureVectorizer, SequenceFeatures};
pub use inference::{
    logsumexp, posteriors_from_scores, score_path, viterbi_from_scores, Posteriors,
};
pub use io::{load_model, load_model_from_path, save_model, save_model_to_path, MODEL_VERSION};
pub use train::{loss_and_gradient, train, Gradient};

use thiserror::Error;

use crate::model::{Label, LabeledSequence, ModelError};
use crate::tokenize::{tokenize, TokenSequence};

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("sequence has no tokens")]
    EmptySequence,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("input string is empty or whitespace-only")]
    EmptyInput,
    #[error("label {0} is not in the model's label list")]
    UnknownLabel(Label),
    #[error("weight shapes do not match feature and label counts")]
    ShapeMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model file is inconsistent: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// L2 regularization strength.
    pub lambda: f64,
    pub max_epochs: usize,
    /// Stop when the relative loss change falls below this.
    pub tolerance: f64,
    /// Recorded for reproducibility; full-batch training is
    /// deterministic and draws nothing from it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            max_epochs: 100,
            tolerance: 1e-5,
            seed: 0,
        }
    }
}

/// A trained tagger: frozen feature index plus emission and transition
/// weights. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct CrfModel {
    vectorizer: FeatureVectorizer,
    labels: Vec<Label>,
    /// `feature_count x labels.len()`, row-major by feature.
    emission: Vec<f64>,
    /// `labels.len() x labels.len()`.
    transition: Vec<f64>,
    lambda: f64,
}

impl CrfModel {
    pub fn from_parts(
        vectorizer: FeatureVectorizer,
        labels: Vec<Label>,
        emission: Vec<f64>,
        transition: Vec<f64>,
        lambda: f64,
    ) -> Result<Self, CrfError> {
        let f = vectorizer.feature_count();
        let l = labels.len();
        if emission.len() != f * l || transition.len() != l * l || l == 0 {
            return Err(CrfError::ShapeMismatch);
        }
        if emission.iter().chain(transition.iter()).any(|w| !w.is_finite()) {
            return Err(CrfError::ShapeMismatch);
        }
        Ok(CrfModel {
            vectorizer,
            labels,
            emission,
            transition,
            lambda,
        })
    }

    pub fn vectorizer(&self) -> &FeatureVectorizer {
        &self.vectorizer
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn emission_weights(&self) -> &[f64] {
        &self.emission
    }

    pub fn transition_weights(&self) -> &[f64] {
        &self.transition
    }

    /// Emission score matrix (`T x L`) for cached feature ids.
    pub(crate) fn emission_scores(&self, feats: &SequenceFeatures) -> Vec<f64> {
        let l = self.labels.len();
        let mut scores = vec![0.0f64; feats.positions() * l];
        for t in 0..feats.positions() {
            let row = &mut scores[t * l..(t + 1) * l];
            for &f in feats.at(t) {
                let w = &self.emission[f as usize * l..(f as usize + 1) * l];
                for (r, &wv) in row.iter_mut().zip(w) {
                    *r += wv;
                }
            }
        }
        scores
    }

    /// Log-partition plus node and pairwise marginals for one sequence.
    pub fn forward_backward(&self, seq: &TokenSequence) -> Result<Posteriors, CrfError> {
        if seq.is_empty() {
            return Err(CrfError::EmptySequence);
        }
        let feats = self.vectorizer.featurize(seq);
        let emissions = self.emission_scores(&feats);
        Ok(posteriors_from_scores(
            &emissions,
            &self.transition,
            self.labels.len(),
        ))
    }

    /// Most probable label sequence; ties break toward the lowest label
    /// index.
    pub fn viterbi(&self, seq: &TokenSequence) -> Result<Vec<Label>, CrfError> {
        if seq.is_empty() {
            return Err(CrfError::EmptySequence);
        }
        let feats = self.vectorizer.featurize(seq);
        let emissions = self.emission_scores(&feats);
        let (path, _) = viterbi_from_scores(&emissions, &self.transition, self.labels.len());
        Ok(path.into_iter().map(|i| self.labels[i]).collect())
    }

    /// Tokenizes and tags a raw reference string.
    pub fn tag(&self, s: &str) -> Result<LabeledSequence, CrfError> {
        if s.trim().is_empty() {
            return Err(CrfError::EmptyInput);
        }
        let tokens = tokenize(s);
        let labels = self.viterbi(&tokens)?;
        Ok(LabeledSequence::new(tokens, labels)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> CrfModel {
        // Two features over all labels, zero weights.
        let vectorizer = FeatureVectorizer::from_names(vec!["bias".into(), "w=x".into()]);
        let l = crate::model::LABEL_COUNT;
        CrfModel::from_parts(
            vectorizer,
            Label::ALL.to_vec(),
            vec![0.0; 2 * l],
            vec![0.0; l * l],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_weight_model_tags_everything_with_first_label() {
        let model = tiny_model();
        let tagged = model.tag("vol. 18").unwrap();
        assert!(tagged.labels().iter().all(|&l| l == Label::ALL[0]));
        assert_eq!(tagged.len(), 3);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let model = tiny_model();
        assert!(matches!(model.tag("   "), Err(CrfError::EmptyInput)));
        assert!(matches!(
            model.forward_backward(&tokenize("")),
            Err(CrfError::EmptySequence)
        ));
        assert!(matches!(
            model.viterbi(&tokenize("")),
            Err(CrfError::EmptySequence)
        ));
    }

    #[test]
    fn from_parts_validates_shapes() {
        let vectorizer = FeatureVectorizer::from_names(vec!["bias".into()]);
        assert!(matches!(
            CrfModel::from_parts(vectorizer, Label::ALL.to_vec(), vec![0.0; 3], vec![], 1.0),
            Err(CrfError::ShapeMismatch)
        ));
    }

    #[test]
    fn strong_emission_weight_flips_one_position() {
        // Favor YEAR on the feature fired by four-digit tokens.
        let mut names = vec!["bias".to_owned()];
        let seq = tokenize("Nature 2015");
        for pos in 0..seq.len() {
            for f in extract_features(&seq, pos) {
                if !names.contains(&f) {
                    names.push(f);
                }
            }
        }
        let vectorizer = FeatureVectorizer::from_names(names.clone());
        let l = crate::model::LABEL_COUNT;
        let mut emission = vec![0.0; names.len() * l];
        let digit4 = vectorizer.id_of("shape=DIGIT4").unwrap() as usize;
        emission[digit4 * l + Label::Year.index()] = 10.0;
        let model = CrfModel::from_parts(
            vectorizer,
            Label::ALL.to_vec(),
            emission,
            vec![0.0; l * l],
            1.0,
        )
        .unwrap();
        let tagged = model.tag("Nature 2015").unwrap();
        assert_eq!(tagged.labels()[1], Label::Year);
        assert_eq!(tagged.labels()[0], Label::ALL[0]);
    }
}
