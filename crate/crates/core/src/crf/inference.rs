//! Exact inference for linear-chain score matrices: log-partition,
//! node/pairwise marginals, and Viterbi decoding.
//!
//! Functions here are generic over the label count; they operate on a
//! `T x L` emission score matrix and an `L x L` transition matrix, both
//! row-major. All recursions run in log space; the inner sums share one
//! max-shifted exponential form so that scores up to |700| cannot
//! overflow.

/// log(sum(exp(xs))) with max shifting.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Log-partition and exact marginals of a linear-chain distribution.
#[derive(Debug, Clone)]
pub struct Posteriors {
    pub log_z: f64,
    /// `node[t * L + l]`: probability of label `l` at position `t`.
    pub node: Vec<f64>,
    /// `pairwise[t * L * L + prev * L + next]` for `t` in `0..T-1`.
    pub pairwise: Vec<f64>,
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// One forward or backward chain step: given log values `prev` and the
/// shifted transition exponentials, writes the new log values. Falls
/// back to a per-cell logsumexp when the shifted sum underflows to zero.
#[allow(clippy::too_many_arguments)]
fn chain_step(
    prev: &[f64],
    exp_shifted: &[f64],
    shifts: &[f64],
    transition: &[f64],
    n_labels: usize,
    transpose: bool,
    add: &[f64],
    out: &mut [f64],
) {
    let m = max_of(prev);
    let mut acc = vec![0.0f64; n_labels];
    for (src, &p) in prev.iter().enumerate() {
        let w = (p - m).exp();
        if w == 0.0 {
            continue;
        }
        let row = &exp_shifted[src * n_labels..(src + 1) * n_labels];
        for (dst, a) in acc.iter_mut().enumerate() {
            *a += w * row[dst];
        }
    }
    for dst in 0..n_labels {
        out[dst] = if acc[dst] > 0.0 {
            add[dst] + m + shifts[dst] + acc[dst].ln()
        } else {
            // Degenerate spread; recompute this cell exactly.
            let terms: Vec<f64> = (0..n_labels)
                .map(|src| {
                    let t = if transpose {
                        transition[dst * n_labels + src]
                    } else {
                        transition[src * n_labels + dst]
                    };
                    prev[src] + t
                })
                .collect();
            add[dst] + logsumexp(&terms)
        };
    }
}

/// Computes logZ plus node and pairwise marginals from raw scores.
///
/// `emissions` is `T x L` row-major, `transition` is `L x L`. Node
/// marginals at each position sum to one up to rounding; pairwise
/// marginals are consistent with them by summation.
pub fn posteriors_from_scores(emissions: &[f64], transition: &[f64], n_labels: usize) -> Posteriors {
    let positions = emissions.len() / n_labels;
    assert!(positions > 0, "empty sequence");
    assert_eq!(emissions.len(), positions * n_labels);
    assert_eq!(transition.len(), n_labels * n_labels);

    // exp(T[s][d] - col_max[d]) for the forward pass,
    // exp(T[s][d] - row_max[s]) laid out transposed for the backward pass.
    let mut col_max = vec![f64::NEG_INFINITY; n_labels];
    let mut row_max = vec![f64::NEG_INFINITY; n_labels];
    for s in 0..n_labels {
        for d in 0..n_labels {
            let t = transition[s * n_labels + d];
            if t > col_max[d] {
                col_max[d] = t;
            }
            if t > row_max[s] {
                row_max[s] = t;
            }
        }
    }
    let mut exp_col = vec![0.0f64; n_labels * n_labels];
    let mut exp_row_t = vec![0.0f64; n_labels * n_labels];
    for s in 0..n_labels {
        for d in 0..n_labels {
            let t = transition[s * n_labels + d];
            exp_col[s * n_labels + d] = (t - col_max[d]).exp();
            // Transposed: source runs along the inner axis of the step.
            exp_row_t[d * n_labels + s] = (t - row_max[s]).exp();
        }
    }

    let mut alpha = vec![0.0f64; positions * n_labels];
    alpha[..n_labels].copy_from_slice(&emissions[..n_labels]);
    for t in 1..positions {
        let (prev_rows, next_rows) = alpha.split_at_mut(t * n_labels);
        let prev = &prev_rows[(t - 1) * n_labels..];
        chain_step(
            prev,
            &exp_col,
            &col_max,
            transition,
            n_labels,
            false,
            &emissions[t * n_labels..(t + 1) * n_labels],
            &mut next_rows[..n_labels],
        );
    }

    let mut beta = vec![0.0f64; positions * n_labels];
    let zeros = vec![0.0f64; n_labels];
    for t in (0..positions - 1).rev() {
        let incoming: Vec<f64> = (0..n_labels)
            .map(|l| emissions[(t + 1) * n_labels + l] + beta[(t + 1) * n_labels + l])
            .collect();
        let (rows, _) = beta.split_at_mut((t + 1) * n_labels);
        chain_step(
            &incoming,
            &exp_row_t,
            &row_max,
            transition,
            n_labels,
            true,
            &zeros,
            &mut rows[t * n_labels..],
        );
    }

    let log_z = logsumexp(&alpha[(positions - 1) * n_labels..]);

    let mut node = vec![0.0f64; positions * n_labels];
    for t in 0..positions {
        for l in 0..n_labels {
            node[t * n_labels + l] = (alpha[t * n_labels + l] + beta[t * n_labels + l] - log_z).exp();
        }
    }

    let g_max = max_of(transition);
    let exp_g: Vec<f64> = transition.iter().map(|&t| (t - g_max).exp()).collect();
    let mut pairwise = vec![0.0f64; positions.saturating_sub(1) * n_labels * n_labels];
    for t in 0..positions.saturating_sub(1) {
        let a_row = &alpha[t * n_labels..(t + 1) * n_labels];
        let s1 = max_of(a_row);
        let a: Vec<f64> = a_row.iter().map(|&x| (x - s1).exp()).collect();
        let v_row: Vec<f64> = (0..n_labels)
            .map(|l| emissions[(t + 1) * n_labels + l] + beta[(t + 1) * n_labels + l])
            .collect();
        let s2 = max_of(&v_row);
        let v: Vec<f64> = v_row.iter().map(|&x| (x - s2).exp()).collect();
        let k = (s1 + g_max + s2 - log_z).exp();
        let block = &mut pairwise[t * n_labels * n_labels..(t + 1) * n_labels * n_labels];
        for s in 0..n_labels {
            let scale = a[s] * k;
            if scale == 0.0 {
                continue;
            }
            let g_row = &exp_g[s * n_labels..(s + 1) * n_labels];
            let out_row = &mut block[s * n_labels..(s + 1) * n_labels];
            for d in 0..n_labels {
                out_row[d] = scale * g_row[d] * v[d];
            }
        }
    }

    Posteriors {
        log_z,
        node,
        pairwise,
    }
}

/// Highest-scoring label path and its score. Ties break toward the
/// lowest label index at every step.
pub fn viterbi_from_scores(
    emissions: &[f64],
    transition: &[f64],
    n_labels: usize,
) -> (Vec<usize>, f64) {
    let positions = emissions.len() / n_labels;
    assert!(positions > 0, "empty sequence");
    assert_eq!(emissions.len(), positions * n_labels);

    let mut delta = emissions[..n_labels].to_vec();
    let mut backpointers = vec![0usize; positions * n_labels];
    let mut next = vec![0.0f64; n_labels];
    for t in 1..positions {
        for d in 0..n_labels {
            let mut best_src = 0usize;
            let mut best = delta[0] + transition[d];
            for (src, &dv) in delta.iter().enumerate().skip(1) {
                let cand = dv + transition[src * n_labels + d];
                if cand > best {
                    best = cand;
                    best_src = src;
                }
            }
            next[d] = best + emissions[t * n_labels + d];
            backpointers[t * n_labels + d] = best_src;
        }
        delta.copy_from_slice(&next);
    }

    let mut best_label = 0usize;
    let mut best_score = delta[0];
    for (l, &score) in delta.iter().enumerate().skip(1) {
        if score > best_score {
            best_score = score;
            best_label = l;
        }
    }

    let mut path = vec![0usize; positions];
    path[positions - 1] = best_label;
    for t in (1..positions).rev() {
        path[t - 1] = backpointers[t * n_labels + path[t]];
    }
    (path, best_score)
}

/// Score of one explicit label path under the given matrices.
pub fn score_path(emissions: &[f64], transition: &[f64], n_labels: usize, path: &[usize]) -> f64 {
    let mut score = 0.0;
    for (t, &l) in path.iter().enumerate() {
        score += emissions[t * n_labels + l];
        if t + 1 < path.len() {
            score += transition[l * n_labels + path[t + 1]];
        }
    }
    score
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn enumerate_paths(positions: usize, n_labels: usize) -> Vec<Vec<usize>> {
        let mut paths = vec![vec![]];
        for _ in 0..positions {
            let mut next = Vec::new();
            for p in &paths {
                for l in 0..n_labels {
                    let mut q = p.clone();
                    q.push(l);
                    next.push(q);
                }
            }
            paths = next;
        }
        paths
    }

    fn brute_log_z(emissions: &[f64], transition: &[f64], n_labels: usize) -> f64 {
        let positions = emissions.len() / n_labels;
        let scores: Vec<f64> = enumerate_paths(positions, n_labels)
            .iter()
            .map(|p| score_path(emissions, transition, n_labels, p))
            .collect();
        logsumexp(&scores)
    }

    #[test]
    fn zero_weights_single_position_gives_uniform() {
        let n = 4;
        let emissions = vec![0.0; n];
        let transition = vec![0.0; n * n];
        let post = posteriors_from_scores(&emissions, &transition, n);
        assert!((post.log_z - (n as f64).ln()).abs() < 1e-12);
        for l in 0..n {
            assert!((post.node[l] - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_transitions_factorize_the_chain() {
        let n = 3;
        let emissions = vec![0.5, -0.25, 1.0, 0.1, 0.2, -0.9];
        let transition = vec![0.0; n * n];
        let post = posteriors_from_scores(&emissions, &transition, n);
        let expected: f64 = logsumexp(&emissions[..3]) + logsumexp(&emissions[3..]);
        assert!((post.log_z - expected).abs() < 1e-12);
    }

    #[test]
    fn log_z_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.gen_range(1..=5);
            let positions = rng.gen_range(1..=6);
            let emissions: Vec<f64> = (0..positions * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let transition: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let post = posteriors_from_scores(&emissions, &transition, n);
            let brute = brute_log_z(&emissions, &transition, n);
            let rel = (post.log_z - brute).abs() / brute.abs().max(1.0);
            assert!(rel < 1e-10, "rel error {rel}");
        }
    }

    #[test]
    fn marginals_sum_to_one_and_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let positions = 7;
        let emissions: Vec<f64> = (0..positions * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let transition: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let post = posteriors_from_scores(&emissions, &transition, n);
        for t in 0..positions {
            let s: f64 = post.node[t * n..(t + 1) * n].iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "node sum {s} at {t}");
        }
        for t in 0..positions - 1 {
            let block = &post.pairwise[t * n * n..(t + 1) * n * n];
            let s: f64 = block.iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "pairwise sum {s} at {t}");
            // Row sums reproduce the node marginal at t.
            for l in 0..n {
                let row: f64 = block[l * n..(l + 1) * n].iter().sum();
                assert!((row - post.node[t * n + l]).abs() < 1e-9);
            }
            // Column sums reproduce the node marginal at t+1.
            for l in 0..n {
                let col: f64 = (0..n).map(|s_| block[s_ * n + l]).sum();
                assert!((col - post.node[(t + 1) * n + l]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn log_z_dominates_every_path_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 3;
        let positions = 5;
        let emissions: Vec<f64> = (0..positions * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let transition: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let post = posteriors_from_scores(&emissions, &transition, n);
        for path in enumerate_paths(positions, n) {
            assert!(post.log_z >= score_path(&emissions, &transition, n, &path));
        }
        let (vit, score) = viterbi_from_scores(&emissions, &transition, n);
        assert!(post.log_z >= score);
        assert_eq!(score, score_path(&emissions, &transition, n, &vit));
    }

    #[test]
    fn viterbi_matches_exhaustive_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..60 {
            let n = rng.gen_range(2..=5);
            let positions = rng.gen_range(1..=6);
            let emissions: Vec<f64> = (0..positions * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let transition: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (path, score) = viterbi_from_scores(&emissions, &transition, n);
            let best = enumerate_paths(positions, n)
                .iter()
                .map(|p| score_path(&emissions, &transition, n, p))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(score, score_path(&emissions, &transition, n, &path));
            assert!((score - best).abs() < 1e-9, "viterbi {score} vs brute {best}");
        }
    }

    #[test]
    fn viterbi_ties_break_to_lowest_label_index() {
        let n = 3;
        let emissions = vec![0.0; 4 * n];
        let transition = vec![0.0; n * n];
        let (path, _) = viterbi_from_scores(&emissions, &transition, n);
        assert_eq!(path, vec![0, 0, 0, 0]);
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let n = 3;
        let emissions = vec![700.0, -700.0, 0.0, 650.0, -650.0, 0.0];
        let transition = vec![0.0; n * n];
        let post = posteriors_from_scores(&emissions, &transition, n);
        assert!(post.log_z.is_finite());
        assert!((post.log_z - (700.0 + 650.0)).abs() < 1e-6);
        assert!(post.node.iter().all(|p| p.is_finite()));
    }
}
