//! Regularized maximum-likelihood training by deterministic full-batch
//! gradient descent with backtracking line search.

use super::features::{FeatureVectorizer, SequenceFeatures};
use super::inference::{logsumexp, posteriors_from_scores, score_path};
use super::{CrfError, CrfModel, TrainConfig};
use crate::model::{Label, LabeledSequence};

/// Gradient with the same shapes as the model weights.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub emission: Vec<f64>,
    pub transition: Vec<f64>,
}

struct Instance {
    feats: SequenceFeatures,
    gold: Vec<usize>,
}

/// Negative log-likelihood of one instance, accumulating
/// (expected - empirical) feature counts into the gradient buffers.
fn instance_nll_grad(
    emission_w: &[f64],
    transition_w: &[f64],
    n_labels: usize,
    inst: &Instance,
    grad_emission: &mut [f64],
    grad_transition: &mut [f64],
) -> f64 {
    let positions = inst.gold.len();
    let mut emissions = vec![0.0f64; positions * n_labels];
    for t in 0..positions {
        let row = &mut emissions[t * n_labels..(t + 1) * n_labels];
        for &f in inst.feats.at(t) {
            let w = &emission_w[f as usize * n_labels..(f as usize + 1) * n_labels];
            for (r, &wv) in row.iter_mut().zip(w) {
                *r += wv;
            }
        }
    }

    let post = posteriors_from_scores(&emissions, transition_w, n_labels);
    let gold_score = score_path(&emissions, transition_w, n_labels, &inst.gold);

    for t in 0..positions {
        let node = &post.node[t * n_labels..(t + 1) * n_labels];
        for &f in inst.feats.at(t) {
            let g = &mut grad_emission[f as usize * n_labels..(f as usize + 1) * n_labels];
            for (gv, &m) in g.iter_mut().zip(node) {
                *gv += m;
            }
            g[inst.gold[t]] -= 1.0;
        }
    }
    for t in 0..positions.saturating_sub(1) {
        let block = &post.pairwise[t * n_labels * n_labels..(t + 1) * n_labels * n_labels];
        for (gv, &m) in grad_transition.iter_mut().zip(block) {
            *gv += m;
        }
        grad_transition[inst.gold[t] * n_labels + inst.gold[t + 1]] -= 1.0;
    }

    post.log_z - gold_score
}

/// Forward-only negative log-likelihood of one instance.
fn instance_nll(
    emission_w: &[f64],
    transition_w: &[f64],
    n_labels: usize,
    inst: &Instance,
) -> f64 {
    let positions = inst.gold.len();
    let mut emissions = vec![0.0f64; positions * n_labels];
    for t in 0..positions {
        let row = &mut emissions[t * n_labels..(t + 1) * n_labels];
        for &f in inst.feats.at(t) {
            let w = &emission_w[f as usize * n_labels..(f as usize + 1) * n_labels];
            for (r, &wv) in row.iter_mut().zip(w) {
                *r += wv;
            }
        }
    }
    let log_z = forward_log_z(&emissions, transition_w, n_labels);
    log_z - score_path(&emissions, transition_w, n_labels, &inst.gold)
}

fn forward_log_z(emissions: &[f64], transition: &[f64], n_labels: usize) -> f64 {
    let positions = emissions.len() / n_labels;
    let mut col_max = vec![f64::NEG_INFINITY; n_labels];
    for s in 0..n_labels {
        for d in 0..n_labels {
            col_max[d] = col_max[d].max(transition[s * n_labels + d]);
        }
    }
    let mut exp_col = vec![0.0f64; n_labels * n_labels];
    for s in 0..n_labels {
        for d in 0..n_labels {
            exp_col[s * n_labels + d] = (transition[s * n_labels + d] - col_max[d]).exp();
        }
    }
    let mut alpha = emissions[..n_labels].to_vec();
    let mut next = vec![0.0f64; n_labels];
    let mut acc = vec![0.0f64; n_labels];
    for t in 1..positions {
        let m = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (src, &av) in alpha.iter().enumerate() {
            let w = (av - m).exp();
            if w == 0.0 {
                continue;
            }
            let row = &exp_col[src * n_labels..(src + 1) * n_labels];
            for (a, &e) in acc.iter_mut().zip(row) {
                *a += w * e;
            }
        }
        for d in 0..n_labels {
            next[d] = if acc[d] > 0.0 {
                emissions[t * n_labels + d] + m + col_max[d] + acc[d].ln()
            } else {
                let terms: Vec<f64> = (0..n_labels)
                    .map(|s| alpha[s] + transition[s * n_labels + d])
                    .collect();
                emissions[t * n_labels + d] + logsumexp(&terms)
            };
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    logsumexp(&alpha)
}

fn gold_indices(seq: &LabeledSequence, labels: &[Label]) -> Result<Vec<usize>, CrfError> {
    seq.labels()
        .iter()
        .map(|&l| {
            labels
                .iter()
                .position(|&cand| cand == l)
                .ok_or(CrfError::UnknownLabel(l))
        })
        .collect()
}

/// L2-regularized negative conditional log-likelihood of a batch, with
/// its gradient. Features are looked up in the model's frozen index.
pub fn loss_and_gradient(
    model: &CrfModel,
    batch: &[LabeledSequence],
) -> Result<(f64, Gradient), CrfError> {
    if batch.is_empty() {
        return Err(CrfError::EmptyCorpus);
    }
    let n_labels = model.labels().len();
    let mut grad = Gradient {
        emission: vec![0.0; model.emission.len()],
        transition: vec![0.0; model.transition.len()],
    };
    let mut loss = 0.0;
    for seq in batch {
        if seq.is_empty() {
            return Err(CrfError::EmptySequence);
        }
        let inst = Instance {
            feats: model.vectorizer().featurize(seq.tokens()),
            gold: gold_indices(seq, model.labels())?,
        };
        loss += instance_nll_grad(
            &model.emission,
            &model.transition,
            n_labels,
            &inst,
            &mut grad.emission,
            &mut grad.transition,
        );
    }
    let lambda = model.lambda;
    let mut sq = 0.0;
    for (g, &w) in grad.emission.iter_mut().zip(&model.emission) {
        *g += lambda * w;
        sq += w * w;
    }
    for (g, &w) in grad.transition.iter_mut().zip(&model.transition) {
        *g += lambda * w;
        sq += w * w;
    }
    loss += 0.5 * lambda * sq;
    Ok((loss, grad))
}

struct Objective<'a> {
    instances: &'a [Instance],
    n_labels: usize,
    emission_len: usize,
    lambda: f64,
}

impl Objective<'_> {
    fn split<'w>(&self, w: &'w [f64]) -> (&'w [f64], &'w [f64]) {
        w.split_at(self.emission_len)
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let (em, tr) = self.split(w);
        let mut loss: f64 = self
            .instances
            .iter()
            .map(|inst| instance_nll(em, tr, self.n_labels, inst))
            .sum();
        loss += 0.5 * self.lambda * w.iter().map(|x| x * x).sum::<f64>();
        loss
    }

    fn loss_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let (em, tr) = self.split(w);
        let mut grad = vec![0.0f64; w.len()];
        let (grad_em, grad_tr) = grad.split_at_mut(self.emission_len);
        let mut loss = 0.0;
        for inst in self.instances {
            loss += instance_nll_grad(em, tr, self.n_labels, inst, grad_em, grad_tr);
        }
        for (g, &x) in grad.iter_mut().zip(w) {
            *g += self.lambda * x;
        }
        loss += 0.5 * self.lambda * w.iter().map(|x| x * x).sum::<f64>();
        (loss, grad)
    }
}

/// Trains a model on an annotated corpus.
///
/// The feature index is built from the corpus; weights start at zero and
/// follow full-batch gradient descent with Armijo backtracking until the
/// relative loss change drops below the tolerance or `max_epochs` is
/// reached. Identical inputs give bit-identical models.
pub fn train(corpus: &[LabeledSequence], cfg: &TrainConfig) -> Result<CrfModel, CrfError> {
    if corpus.is_empty() {
        return Err(CrfError::EmptyCorpus);
    }
    for seq in corpus {
        if seq.is_empty() {
            return Err(CrfError::EmptySequence);
        }
    }

    let labels: Vec<Label> = Label::ALL.to_vec();
    let n_labels = labels.len();
    let (vectorizer, cached) = FeatureVectorizer::build(corpus.iter().map(|s| s.tokens()));
    let instances: Vec<Instance> = corpus
        .iter()
        .zip(cached)
        .map(|(seq, feats)| {
            Ok(Instance {
                feats,
                gold: gold_indices(seq, &labels)?,
            })
        })
        .collect::<Result<_, CrfError>>()?;

    let emission_len = vectorizer.feature_count() * n_labels;
    let objective = Objective {
        instances: &instances,
        n_labels,
        emission_len,
        lambda: cfg.lambda,
    };

    let mut w = vec![0.0f64; emission_len + n_labels * n_labels];
    let (mut loss, mut grad) = objective.loss_grad(&w);
    let mut step = {
        let g_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if g_inf > 0.0 {
            1.0 / g_inf
        } else {
            1.0
        }
    };

    const ARMIJO_C1: f64 = 1e-4;
    const MIN_STEP: f64 = 1e-18;
    let mut trial = vec![0.0f64; w.len()];
    for _epoch in 0..cfg.max_epochs {
        let g_sq: f64 = grad.iter().map(|g| g * g).sum();
        if g_sq == 0.0 {
            break;
        }
        // Backtrack from twice the previously accepted step.
        let mut alpha = (step * 2.0).min(1e3);
        let mut accepted = false;
        while alpha >= MIN_STEP {
            for ((t, &wv), &g) in trial.iter_mut().zip(&w).zip(&grad) {
                *t = wv - alpha * g;
            }
            let trial_loss = objective.loss(&trial);
            if trial_loss <= loss - ARMIJO_C1 * alpha * g_sq {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        step = alpha;
        std::mem::swap(&mut w, &mut trial);
        let (new_loss, new_grad) = objective.loss_grad(&w);
        let rel_change = (loss - new_loss).abs() / loss.abs().max(1.0);
        loss = new_loss;
        grad = new_grad;
        if rel_change < cfg.tolerance {
            break;
        }
    }

    let transition = w.split_off(emission_len);
    CrfModel::from_parts(vectorizer, labels, w, transition, cfg.lambda)
}
