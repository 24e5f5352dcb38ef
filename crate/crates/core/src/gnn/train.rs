//! Training loop: class-weighted cross entropy, hand-written backprop
//! through the convolution stack, mini-batch Adam over shuffled batches.

use super::{class_weights, forward_cached, GcnParams, GnnError, Hyperparams, LABEL_OA};
use crate::graph::VariableGraph;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One labeled graph: label 0 = OA faster, 1 = B&B faster.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub graph: VariableGraph,
    pub label: usize,
}

/// Gradients in the same shapes as [`GcnParams`].
#[derive(Debug, Clone)]
pub struct GcnGrads {
    pub layer_weights: Vec<DMatrix<f64>>,
    pub head_weights: DMatrix<f64>,
    pub head_bias: DVector<f64>,
}

impl GcnGrads {
    fn zeros_like(params: &GcnParams) -> GcnGrads {
        GcnGrads {
            layer_weights: params
                .layer_weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            head_weights: DMatrix::zeros(
                params.head_weights.nrows(),
                params.head_weights.ncols(),
            ),
            head_bias: DVector::zeros(params.head_bias.len()),
        }
    }
}

/// Per-epoch training log entry.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

/// Weighted batch loss. `dropout_masks`, when given, must hold one
/// already-scaled mask per example (inverted dropout); `None` disables
/// dropout, which is also what the finite-difference gradient checks use.
pub fn batch_loss(
    examples: &[&TrainExample],
    params: &GcnParams,
    weights: (f64, f64),
    dropout_masks: Option<&[DVector<f64>]>,
) -> Result<f64, GnnError> {
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for (k, ex) in examples.iter().enumerate() {
        let mask = dropout_masks.map(|m| &m[k]);
        let cache = forward_cached(&ex.graph, params, mask)?;
        let w = if ex.label == LABEL_OA { weights.0 } else { weights.1 };
        total += w * (-cache.probabilities[ex.label].max(1e-300).ln());
        weight_sum += w;
    }
    Ok(total / weight_sum)
}

/// Batch loss plus analytic gradients for every parameter tensor.
pub fn batch_loss_and_grads(
    examples: &[&TrainExample],
    params: &GcnParams,
    weights: (f64, f64),
    dropout_masks: Option<&[DVector<f64>]>,
) -> Result<(f64, GcnGrads), GnnError> {
    let mut grads = GcnGrads::zeros_like(params);
    let mut total = 0.0;
    let mut weight_sum = 0.0;

    for (k, ex) in examples.iter().enumerate() {
        let mask = dropout_masks.map(|m| &m[k]);
        let cache = forward_cached(&ex.graph, params, mask)?;
        let w = if ex.label == LABEL_OA { weights.0 } else { weights.1 };
        total += w * (-cache.probabilities[ex.label].max(1e-300).ln());
        weight_sum += w;

        // d(loss_k)/d(logits) for -w * ln softmax_z
        let mut dy = cache.probabilities.clone();
        dy[ex.label] -= 1.0;
        dy *= w;

        grads.head_weights += &dy * cache.pooled_dropped.transpose();
        grads.head_bias += &dy;

        let d_dropped = params.head_weights.transpose() * &dy;
        let d_pooled = match mask {
            Some(m) => d_dropped.component_mul(m),
            None => d_dropped,
        };

        // mean pooling spreads the gradient evenly over nodes
        let n = ex.graph.n_nodes as f64;
        let mut dh = DMatrix::from_fn(ex.graph.n_nodes, d_pooled.len(), |_, j| d_pooled[j] / n);

        for l in (0..params.layer_weights.len()).rev() {
            let h_out = &cache.activations[l + 1];
            // dZ = dH (.) (1 - tanh^2) with tanh = h_out
            let dz = dh.zip_map(h_out, |d, t| d * (1.0 - t * t));
            let propagated = &cache.a_norm * &cache.activations[l];
            grads.layer_weights[l] += propagated.transpose() * &dz;
            if l > 0 {
                dh = &cache.a_norm * (&dz * params.layer_weights[l].transpose());
            }
        }
    }

    let inv = 1.0 / weight_sum;
    for w in &mut grads.layer_weights {
        *w *= inv;
    }
    grads.head_weights *= inv;
    grads.head_bias *= inv;
    Ok((total / weight_sum, grads))
}

struct AdamState {
    m: Vec<DMatrix<f64>>,
    v: Vec<DMatrix<f64>>,
    m_head: DMatrix<f64>,
    v_head: DMatrix<f64>,
    m_bias: DVector<f64>,
    v_bias: DVector<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    fn new(params: &GcnParams) -> AdamState {
        AdamState {
            m: params
                .layer_weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            v: params
                .layer_weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            m_head: DMatrix::zeros(params.head_weights.nrows(), params.head_weights.ncols()),
            v_head: DMatrix::zeros(params.head_weights.nrows(), params.head_weights.ncols()),
            m_bias: DVector::zeros(params.head_bias.len()),
            v_bias: DVector::zeros(params.head_bias.len()),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut GcnParams, grads: &GcnGrads, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);

        fn update_matrix(
            p: &mut DMatrix<f64>,
            g: &DMatrix<f64>,
            m: &mut DMatrix<f64>,
            v: &mut DMatrix<f64>,
            lr: f64,
            bc1: f64,
            bc2: f64,
        ) {
            for ((pe, ge), (me, ve)) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *me = BETA1 * *me + (1.0 - BETA1) * ge;
                *ve = BETA2 * *ve + (1.0 - BETA2) * ge * ge;
                let mh = *me / bc1;
                let vh = *ve / bc2;
                *pe -= lr * mh / (vh.sqrt() + ADAM_EPS);
            }
        }

        for (l, g) in grads.layer_weights.iter().enumerate() {
            update_matrix(
                &mut params.layer_weights[l],
                g,
                &mut self.m[l],
                &mut self.v[l],
                lr,
                bc1,
                bc2,
            );
        }
        update_matrix(
            &mut params.head_weights,
            &grads.head_weights,
            &mut self.m_head,
            &mut self.v_head,
            lr,
            bc1,
            bc2,
        );
        for ((pe, ge), (me, ve)) in params
            .head_bias
            .iter_mut()
            .zip(grads.head_bias.iter())
            .zip(self.m_bias.iter_mut().zip(self.v_bias.iter_mut()))
        {
            *me = BETA1 * *me + (1.0 - BETA1) * ge;
            *ve = BETA2 * *ve + (1.0 - BETA2) * ge * ge;
            *pe -= lr * (*me / bc1) / ((*ve / bc2).sqrt() + ADAM_EPS);
        }
    }
}

/// Train a classifier from scratch. Deterministic given `hp.seed`: the
/// seed drives initialization, batch shuffling, and dropout masks.
/// Returns the final parameters and a per-epoch loss/accuracy log.
pub fn train(
    dataset: &[TrainExample],
    hp: &Hyperparams,
) -> Result<(GcnParams, Vec<EpochStats>), GnnError> {
    if dataset.is_empty() {
        return Err(GnnError::EmptyDataset);
    }
    let labels: Vec<usize> = dataset.iter().map(|e| e.label).collect();
    let weights = class_weights(&labels)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut params = GcnParams::init(hp, &mut rng);
    let mut adam = AdamState::new(&params);
    let mut log = Vec::with_capacity(hp.epochs);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<&TrainExample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let masks: Option<Vec<DVector<f64>>> = if hp.dropout > 0.0 {
                let keep = 1.0 - hp.dropout;
                Some(
                    batch
                        .iter()
                        .map(|_| {
                            DVector::from_fn(hp.hidden, |_, _| {
                                if rng.gen_bool(keep) {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                        })
                        .collect(),
                )
            } else {
                None
            };
            let (_, grads) =
                batch_loss_and_grads(&batch, &params, weights, masks.as_deref())?;
            adam.step(&mut params, &grads, hp.learning_rate);
        }

        // inference-mode stats over the whole training set
        let all: Vec<&TrainExample> = dataset.iter().collect();
        let loss = batch_loss(&all, &params, weights, None)?;
        let accuracy = evaluate_accuracy(dataset, &params)?;
        log.push(EpochStats {
            epoch,
            loss,
            train_accuracy: accuracy,
        });
    }
    Ok((params, log))
}

/// Fraction of examples whose argmax class matches the label.
pub fn evaluate_accuracy(dataset: &[TrainExample], params: &GcnParams) -> Result<f64, GnnError> {
    let mut hits = 0usize;
    for ex in dataset {
        let cache = forward_cached(&ex.graph, params, None)?;
        let pred = if cache.probabilities[0] >= cache.probabilities[1] { 0 } else { 1 };
        if pred == ex.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}

/// Synthetic separable dataset used by the learning-sanity checks: random
/// graphs labeled B&B iff more than half their nodes are binary.
pub fn synthetic_separable_dataset(count: usize, seed: u64) -> Vec<TrainExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(4..=12usize);
            let binary_prob: f64 = rng.gen_range(0.05..0.95);
            let mut n_binary = 0usize;
            let features: Vec<[u8; 5]> = (0..n)
                .map(|_| {
                    if rng.gen_bool(binary_prob) {
                        n_binary += 1;
                        [0, 1, 0, 1, 1]
                    } else if rng.gen_bool(0.3) {
                        [0, 0, 1, 1, 1]
                    } else {
                        [1, 0, 0, u8::from(rng.gen_bool(0.5)), u8::from(rng.gen_bool(0.5))]
                    }
                })
                .collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.35) {
                        edges.push((i, j));
                    }
                }
            }
            let label = usize::from(n_binary as f64 > n as f64 / 2.0);
            TrainExample {
                graph: VariableGraph {
                    n_nodes: n,
                    edges,
                    features,
                },
                label,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> Vec<TrainExample> {
        synthetic_separable_dataset(60, 42)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = tiny_dataset();
        let hp = Hyperparams {
            epochs: 0,
            ..Hyperparams::default()
        };
        let (params, log) = train(&data, &hp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let init = GcnParams::init(&hp, &mut rng);
        assert_eq!(params, init);
        assert!(log.is_empty());
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let data = tiny_dataset();
        let hp = Hyperparams {
            epochs: 3,
            seed: 5,
            ..Hyperparams::default()
        };
        let (p1, l1) = train(&data, &hp).unwrap();
        let (p2, l2) = train(&data, &hp).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(l1.len(), l2.len());
        for (a, b) in l1.iter().zip(&l2) {
            assert_eq!(a.loss, b.loss);
        }
    }

    #[test]
    fn separable_dataset_is_learnable() {
        let data = synthetic_separable_dataset(200, 7);
        let hp = Hyperparams {
            seed: 1,
            ..Hyperparams::default()
        };
        let (params, log) = train(&data, &hp).unwrap();
        let final_acc = evaluate_accuracy(&data, &params).unwrap();
        assert!(
            final_acc >= 0.9,
            "training accuracy {final_acc} after {} epochs",
            log.len()
        );
    }

    #[test]
    fn loss_decreases_early_for_most_seeds() {
        let data = synthetic_separable_dataset(200, 3);
        let mut decreasing = 0;
        for seed in 0..10 {
            let hp = Hyperparams {
                epochs: 5,
                seed,
                ..Hyperparams::default()
            };
            let (_, log) = train(&data, &hp).unwrap();
            assert!(log.iter().all(|e| e.loss.is_finite()));
            if log.last().unwrap().loss < log.first().unwrap().loss {
                decreasing += 1;
            }
        }
        assert!(decreasing >= 8, "loss decreased for only {decreasing}/10 seeds");
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let data = synthetic_separable_dataset(5, 11);
        let refs: Vec<&TrainExample> = data.iter().collect();
        let hp = Hyperparams {
            hidden: 6,
            ..Hyperparams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = GcnParams::init(&hp, &mut rng);
        let weights = class_weights(&data.iter().map(|e| e.label).collect::<Vec<_>>()).unwrap();
        let (_, grads) = batch_loss_and_grads(&refs, &params, weights, None).unwrap();

        let step = 1e-5;
        let check = |analytic: f64, perturb: &dyn Fn(&mut GcnParams, f64), what: &str| {
            let mut plus = params.clone();
            perturb(&mut plus, step);
            let mut minus = params.clone();
            perturb(&mut minus, -step);
            let fd = (batch_loss(&refs, &plus, weights, None).unwrap()
                - batch_loss(&refs, &minus, weights, None).unwrap())
                / (2.0 * step);
            let denom = fd.abs().max(analytic.abs()).max(1e-8);
            assert!(
                (analytic - fd).abs() / denom < 1e-4,
                "{what}: analytic {analytic} vs fd {fd}"
            );
        };

        for l in 0..params.layer_weights.len() {
            for &(i, j) in &[(0usize, 0usize), (1, 2), (3, 4)] {
                if i < params.layer_weights[l].nrows() && j < params.layer_weights[l].ncols() {
                    check(
                        grads.layer_weights[l][(i, j)],
                        &|p, d| p.layer_weights[l][(i, j)] += d,
                        &format!("W{l}[{i},{j}]"),
                    );
                }
            }
        }
        check(grads.head_weights[(0, 1)], &|p, d| p.head_weights[(0, 1)] += d, "head[0,1]");
        check(grads.head_bias[1], &|p, d| p.head_bias[1] += d, "bias[1]");
    }

    #[test]
    fn gradients_with_fixed_dropout_mask_match_fd() {
        let data = synthetic_separable_dataset(4, 13);
        let refs: Vec<&TrainExample> = data.iter().collect();
        let hp = Hyperparams {
            hidden: 6,
            ..Hyperparams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = GcnParams::init(&hp, &mut rng);
        let weights = (1.0, 1.0);
        let masks: Vec<DVector<f64>> = (0..refs.len())
            .map(|_| DVector::from_fn(hp.hidden, |_, _| if rng.gen_bool(0.5) { 2.0 } else { 0.0 }))
            .collect();
        let (_, grads) = batch_loss_and_grads(&refs, &params, weights, Some(&masks)).unwrap();

        let step = 1e-5;
        let analytic = grads.layer_weights[0][(2, 3)];
        let mut plus = params.clone();
        plus.layer_weights[0][(2, 3)] += step;
        let mut minus = params.clone();
        minus.layer_weights[0][(2, 3)] -= step;
        let fd = (batch_loss(&refs, &plus, weights, Some(&masks)).unwrap()
            - batch_loss(&refs, &minus, weights, Some(&masks)).unwrap())
            / (2.0 * step);
        let denom = fd.abs().max(analytic.abs()).max(1e-8);
        assert!((analytic - fd).abs() / denom < 1e-4, "{analytic} vs {fd}");
    }

    #[test]
    fn forward_oracle_straight_line_reimplementation() {
        // independent forward pass written directly from the update rules,
        // no shared code with the library path
        let g = VariableGraph {
            n_nodes: 4,
            edges: vec![(0, 1), (1, 2), (2, 3)],
            features: vec![
                [0, 1, 0, 1, 1],
                [1, 0, 0, 1, 0],
                [0, 0, 1, 1, 1],
                [1, 0, 0, 0, 0],
            ],
        };
        let hp = Hyperparams {
            layers: 3,
            hidden: 4,
            ..Hyperparams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = GcnParams::init(&hp, &mut rng);
        let lib = super::super::forward(&g, &params).unwrap();

        // adjacency with self-loops, then symmetric normalization
        let n = 4;
        let mut a = vec![vec![0.0_f64; n]; n];
        for i in 0..n {
            a[i][i] = 1.0;
        }
        for &(i, j) in &g.edges {
            a[i][j] = 1.0;
            a[j][i] = 1.0;
        }
        let deg: Vec<f64> = (0..n).map(|i| a[i].iter().sum()).collect();
        let mut s = vec![vec![0.0_f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                s[i][j] = a[i][j] / (deg[i].sqrt() * deg[j].sqrt());
            }
        }
        // h := tanh(S * h * W) per layer
        let mut h: Vec<Vec<f64>> = g
            .features
            .iter()
            .map(|row| row.iter().map(|&v| f64::from(v)).collect())
            .collect();
        for w in &params.layer_weights {
            let d_in = w.nrows();
            let d_out = w.ncols();
            let mut sh = vec![vec![0.0; d_in]; n];
            for i in 0..n {
                for k in 0..n {
                    for c in 0..d_in {
                        sh[i][c] += s[i][k] * h[k][c];
                    }
                }
            }
            let mut nh = vec![vec![0.0; d_out]; n];
            for i in 0..n {
                for o in 0..d_out {
                    let mut acc = 0.0;
                    for c in 0..d_in {
                        acc += sh[i][c] * w[(c, o)];
                    }
                    nh[i][o] = acc.tanh();
                }
            }
            h = nh;
        }
        let hidden = h[0].len();
        let mut r = vec![0.0; hidden];
        for row in &h {
            for (j, v) in row.iter().enumerate() {
                r[j] += v / n as f64;
            }
        }
        let mut y = vec![0.0; 2];
        for c in 0..2 {
            let mut acc = params.head_bias[c];
            for (j, rv) in r.iter().enumerate() {
                acc += params.head_weights[(c, j)] * rv;
            }
            y[c] = acc;
        }
        let m = y[0].max(y[1]);
        let e0 = (y[0] - m).exp();
        let e1 = (y[1] - m).exp();
        let oracle = [e0 / (e0 + e1), e1 / (e0 + e1)];

        for (a, b) in lib.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
