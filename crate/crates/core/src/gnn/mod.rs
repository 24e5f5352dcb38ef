//! From-scratch graph convolutional classifier.
//!
//! Forward pass: symmetric-normalized adjacency with self-loops, `L-1`
//! tanh convolution layers, global mean pooling, a linear head with
//! dropout on the pooled vector during training, and a softmax over the
//! two algorithm classes. Training is mini-batch Adam on class-weighted
//! cross entropy with hand-written backpropagation; no autograd framework
//! underneath.

mod train;

pub use train::{
    batch_loss, batch_loss_and_grads, evaluate_accuracy, synthetic_separable_dataset, train,
    EpochStats, GcnGrads, TrainExample,
};

use crate::graph::{VariableGraph, N_FEATURES};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Output index of the outer-approximation class.
pub const LABEL_OA: usize = 0;
/// Output index of the branch-and-bound class.
pub const LABEL_BB: usize = 1;
pub const N_CLASSES: usize = 2;
pub const LABEL_NAMES: [&str; N_CLASSES] = ["OA", "BB"];

const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("feature dimension mismatch: graph rows have {got} features, parameters expect {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset contains a single class; class weights are undefined")]
    SingleClass,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("weights file rejected: {0}")]
    BadWeightsFile(String),
    #[error("weights file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Training hyperparameters. Defaults: four convolution layers, twelve
/// hidden features, learning rate 0.005, batch size 10, 50 epochs, dropout
/// probability 0.5 on the pooled vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub layers: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            layers: 4,
            hidden: 12,
            learning_rate: 0.005,
            batch_size: 10,
            epochs: 50,
            dropout: 0.5,
            seed: 0,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<(), GnnError> {
        if self.layers < 2 || self.hidden == 0 || self.batch_size == 0 {
            return Err(GnnError::BadWeightsFile(
                "hyperparameters must be positive (layers >= 2)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GnnError::BadWeightsFile("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Classifier parameters: `layers - 1` convolution weight matrices (the
/// first maps the 5 node features to the hidden width), a linear head, and
/// its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub layer_weights: Vec<DMatrix<f64>>,
    pub head_weights: DMatrix<f64>,
    pub head_bias: DVector<f64>,
    pub hyper: Hyperparams,
}

impl GcnParams {
    /// Uniform(-s, s) initialization with s = sqrt(6 / (fan_in + fan_out)),
    /// drawn in a fixed order from the given rng. Biases start at zero.
    pub fn init(hp: &Hyperparams, rng: &mut impl rand::Rng) -> GcnParams {
        let mut glorot = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-s..s))
        };
        let mut layer_weights = Vec::with_capacity(hp.layers - 1);
        let mut d_in = N_FEATURES;
        for _ in 0..hp.layers - 1 {
            layer_weights.push(glorot(d_in, hp.hidden, d_in, hp.hidden));
            d_in = hp.hidden;
        }
        let head_weights = glorot(N_CLASSES, hp.hidden, hp.hidden, N_CLASSES);
        GcnParams {
            layer_weights,
            head_weights,
            head_bias: DVector::zeros(N_CLASSES),
            hyper: hp.clone(),
        }
    }
}

/// Symmetric-normalized adjacency with self-loops:
/// `D^{-1/2} (A + I) D^{-1/2}` where `D` holds the row sums of `A + I`.
pub fn normalize_adjacency(g: &VariableGraph) -> DMatrix<f64> {
    let n = g.n_nodes;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 1.0;
    }
    for &(i, j) in &g.edges {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).sum();
            d.sqrt().recip()
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    a
}

/// One convolution layer: `tanh(A_norm * H * W)` elementwise.
pub fn gcn_layer(a_norm: &DMatrix<f64>, h: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    (a_norm * h * w).map(f64::tanh)
}

/// Global mean pooling: the average of every feature across nodes.
pub fn mean_pool(h: &DMatrix<f64>) -> DVector<f64> {
    let n = h.nrows() as f64;
    DVector::from_iterator(h.ncols(), h.column_iter().map(|c| c.sum() / n))
}

pub(crate) fn softmax(y: &DVector<f64>) -> DVector<f64> {
    let max = y.max();
    let exps = y.map(|v| (v - max).exp());
    let total = exps.sum();
    exps / total
}

pub(crate) fn feature_matrix(g: &VariableGraph) -> DMatrix<f64> {
    DMatrix::from_fn(g.n_nodes, N_FEATURES, |i, j| f64::from(g.features[i][j]))
}

/// Everything the backward pass needs from one forward evaluation.
pub(crate) struct ForwardCache {
    pub a_norm: DMatrix<f64>,
    /// Layer inputs: `activations[0]` is the feature matrix, later entries
    /// the tanh outputs; `activations[L-1]` feeds the pooling.
    pub activations: Vec<DMatrix<f64>>,
    /// Pooled vector after the dropout mask (identity in inference mode).
    pub pooled_dropped: DVector<f64>,
    pub probabilities: DVector<f64>,
}

pub(crate) fn forward_cached(
    g: &VariableGraph,
    params: &GcnParams,
    dropout_mask: Option<&DVector<f64>>,
) -> Result<ForwardCache, GnnError> {
    if g.features.len() != g.n_nodes || g.n_nodes == 0 {
        return Err(GnnError::DimensionMismatch {
            expected: g.n_nodes,
            got: g.features.len(),
        });
    }
    if params.layer_weights.is_empty() || params.layer_weights[0].nrows() != N_FEATURES {
        return Err(GnnError::DimensionMismatch {
            expected: N_FEATURES,
            got: params.layer_weights.first().map_or(0, DMatrix::nrows),
        });
    }
    let a_norm = normalize_adjacency(g);
    let mut activations = vec![feature_matrix(g)];
    for w in &params.layer_weights {
        let h = gcn_layer(&a_norm, activations.last().unwrap(), w);
        activations.push(h);
    }
    let pooled = mean_pool(activations.last().unwrap());
    let pooled_dropped = match dropout_mask {
        Some(mask) => pooled.component_mul(mask),
        None => pooled,
    };
    let logits = &params.head_weights * &pooled_dropped + &params.head_bias;
    let probabilities = softmax(&logits);
    Ok(ForwardCache {
        a_norm,
        activations,
        pooled_dropped,
        probabilities,
    })
}

/// Inference-mode forward pass: class probabilities for a graph. Dropout
/// is never applied here; training-mode dropout lives inside [`train`].
pub fn forward(g: &VariableGraph, params: &GcnParams) -> Result<Vec<f64>, GnnError> {
    let cache = forward_cached(g, params, None)?;
    Ok(cache.probabilities.iter().copied().collect())
}

/// Inverse-frequency class weights `w_i = N / (N_classes * count_i)` for
/// labels in `{0, 1}`. Errors when a class is absent.
pub fn class_weights(labels: &[usize]) -> Result<(f64, f64), GnnError> {
    if labels.is_empty() {
        return Err(GnnError::EmptyDataset);
    }
    let count_bb = labels.iter().filter(|&&z| z == LABEL_BB).count();
    let count_oa = labels.len() - count_bb;
    if count_oa == 0 || count_bb == 0 {
        return Err(GnnError::SingleClass);
    }
    let n = labels.len() as f64;
    Ok((
        n / (N_CLASSES as f64 * count_oa as f64),
        n / (N_CLASSES as f64 * count_bb as f64),
    ))
}

/// Class-weighted cross entropy over a batch of logit vectors, normalized
/// by the sum of the applied weights (a weighted mean).
pub fn weighted_cross_entropy(
    logits: &[DVector<f64>],
    labels: &[usize],
    weights: (f64, f64),
) -> f64 {
    assert_eq!(logits.len(), labels.len());
    assert!(!logits.is_empty());
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for (y, &z) in logits.iter().zip(labels) {
        let p = softmax(y);
        let w = if z == LABEL_OA { weights.0 } else { weights.1 };
        total += w * (-p[z].max(1e-300).ln());
        weight_sum += w;
    }
    total / weight_sum
}

// --- weights file -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    format_version: u32,
    hyperparams: Hyperparams,
    layers: Vec<Vec<Vec<f64>>>,
    head: HeadFile,
    label_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, GnnError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(GnnError::BadWeightsFile(format!("{what} is empty or ragged")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serialize parameters to the weights file format.
pub fn write_weights(params: &GcnParams) -> String {
    let file = WeightsFile {
        format_version: WEIGHTS_FORMAT_VERSION,
        hyperparams: params.hyper.clone(),
        layers: params.layer_weights.iter().map(matrix_rows).collect(),
        head: HeadFile {
            weights: matrix_rows(&params.head_weights),
            bias: params.head_bias.iter().copied().collect(),
        },
        label_names: LABEL_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("weights serialization");
    s.push('\n');
    s
}

/// Parse and validate a weights file.
pub fn read_weights(text: &str) -> Result<GcnParams, GnnError> {
    let file: WeightsFile = serde_json::from_str(text)?;
    if file.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(GnnError::BadWeightsFile(format!(
            "unsupported format_version {}",
            file.format_version
        )));
    }
    file.hyperparams.validate()?;
    if file.label_names != LABEL_NAMES {
        return Err(GnnError::BadWeightsFile(format!(
            "label_names must be {LABEL_NAMES:?}, got {:?}",
            file.label_names
        )));
    }
    if file.layers.len() != file.hyperparams.layers - 1 {
        return Err(GnnError::BadWeightsFile(format!(
            "{} layer matrices do not match layers = {}",
            file.layers.len(),
            file.hyperparams.layers
        )));
    }
    let mut layer_weights = Vec::with_capacity(file.layers.len());
    let mut d_in = N_FEATURES;
    for (l, rows) in file.layers.iter().enumerate() {
        let m = rows_matrix(rows, &format!("layer {l}"))?;
        if m.nrows() != d_in || m.ncols() != file.hyperparams.hidden {
            return Err(GnnError::BadWeightsFile(format!(
                "layer {l} has shape {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                d_in,
                file.hyperparams.hidden
            )));
        }
        d_in = file.hyperparams.hidden;
        layer_weights.push(m);
    }
    let head_weights = rows_matrix(&file.head.weights, "head")?;
    if head_weights.nrows() != N_CLASSES || head_weights.ncols() != file.hyperparams.hidden {
        return Err(GnnError::BadWeightsFile("head shape mismatch".into()));
    }
    if file.head.bias.len() != N_CLASSES {
        return Err(GnnError::BadWeightsFile("head bias length mismatch".into()));
    }
    let params = GcnParams {
        layer_weights,
        head_weights,
        head_bias: DVector::from_vec(file.head.bias.clone()),
        hyper: file.hyperparams,
    };
    if params
        .layer_weights
        .iter()
        .any(|m| m.iter().any(|v| !v.is_finite()))
        || params.head_weights.iter().any(|v| !v.is_finite())
        || params.head_bias.iter().any(|v| !v.is_finite())
    {
        return Err(GnnError::BadWeightsFile("non-finite parameter entries".into()));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, edges: Vec<(usize, usize)>) -> VariableGraph {
        VariableGraph {
            n_nodes: n,
            edges,
            features: (0..n)
                .map(|i| if i % 2 == 0 { [0, 1, 0, 1, 1] } else { [1, 0, 0, 1, 0] })
                .collect(),
        }
    }

    #[test]
    fn normalized_adjacency_pair() {
        let a = normalize_adjacency(&graph(2, vec![(0, 1)]));
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)] - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalized_adjacency_triangle() {
        let a = normalize_adjacency(&graph(3, vec![(0, 1), (0, 2), (1, 2)]));
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn normalized_adjacency_isolated_node() {
        let a = normalize_adjacency(&graph(1, vec![]));
        assert_eq!(a[(0, 0)], 1.0);
    }

    #[test]
    fn gcn_layer_zero_weights() {
        let g = graph(3, vec![(0, 1)]);
        let a = normalize_adjacency(&g);
        let h = feature_matrix(&g);
        let w = DMatrix::zeros(5, 4);
        let out = gcn_layer(&a, &h, &w);
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gcn_layer_single_node_identity() {
        // one node: A_norm = [1], so the layer is tanh(phi . W)
        let g = VariableGraph {
            n_nodes: 1,
            edges: vec![],
            features: vec![[0, 1, 0, 1, 1]],
        };
        let a = normalize_adjacency(&g);
        let h = feature_matrix(&g);
        let mut w = DMatrix::zeros(5, 5);
        for i in 0..5 {
            w[(i, i)] = 1.0;
        }
        let out = gcn_layer(&a, &h, &w);
        for j in 0..5 {
            assert!((out[(0, j)] - f64::from(g.features[0][j]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn gcn_layer_matches_hand_computation_on_path() {
        // 3-node path 0-1-2: degrees with self-loops are (2, 3, 2).
        // Hand-computed product for single-feature H and W = [[1]]:
        //   S = [[1/2, 1/sqrt(6), 0], [1/sqrt(6), 1/3, 1/sqrt(6)], [0, 1/sqrt(6), 1/2]]
        let g = VariableGraph {
            n_nodes: 3,
            edges: vec![(0, 1), (1, 2)],
            features: vec![[1, 0, 0, 0, 0]; 3],
        };
        let a = normalize_adjacency(&g);
        let s6 = 6.0_f64.sqrt().recip();
        let expected = [
            [0.5, s6, 0.0],
            [s6, 1.0 / 3.0, s6],
            [0.0, s6, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - expected[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
        let h = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        let w = DMatrix::from_element(1, 1, 0.5);
        let out = gcn_layer(&a, &h, &w);
        let hand = [
            (0.5 * 1.0 + s6 * 2.0) * 0.5,
            (s6 * 1.0 + 2.0 / 3.0 - s6) * 0.5,
            (s6 * 2.0 - 0.5) * 0.5,
        ];
        for i in 0..3 {
            assert!((out[(i, 0)] - hand[i].tanh()).abs() < 1e-12, "row {i}");
        }
    }

    #[test]
    fn mean_pool_arithmetic() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 5.0]);
        let r = mean_pool(&h);
        assert_eq!(r.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn mean_pool_single_row() {
        let h = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        assert_eq!(mean_pool(&h).as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn mean_pool_permutation_invariant() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let hp = DMatrix::from_row_slice(3, 2, &[5.0, 6.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mean_pool(&h), mean_pool(&hp));
    }

    #[test]
    fn forward_uniform_with_zero_head() {
        let hp = Hyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = GcnParams::init(&hp, &mut rng);
        params.head_weights.fill(0.0);
        params.head_bias.fill(0.0);
        let p = forward(&graph(4, vec![(0, 1), (2, 3)]), &params).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn forward_probabilities_sum_to_one() {
        let hp = Hyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = GcnParams::init(&hp, &mut rng);
        for n in [1usize, 2, 5, 9] {
            let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
            let p = forward(&graph(n, edges), &params).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn forward_is_permutation_invariant() {
        let hp = Hyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = GcnParams::init(&hp, &mut rng);
        let g = graph(6, vec![(0, 1), (1, 2), (2, 3), (4, 5), (0, 5)]);
        let perm = [3, 0, 5, 1, 4, 2];
        let gp = g.permuted(&perm);
        let p1 = forward(&g, &params).unwrap();
        let p2 = forward(&gp, &params).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_variable_size_graphs_share_params() {
        let hp = Hyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = GcnParams::init(&hp, &mut rng);
        for n in [1, 3, 17, 40] {
            let edges = (0..n / 2).map(|i| (i, n - 1 - i)).filter(|(a, b)| a != b).collect();
            assert_eq!(forward(&graph(n, edges), &params).unwrap().len(), 2);
        }
    }

    #[test]
    fn class_weights_match_inverse_frequency() {
        // 136 OA and 61 BB of 197
        let mut labels = vec![LABEL_OA; 136];
        labels.extend(vec![LABEL_BB; 61]);
        let (w_oa, w_bb) = class_weights(&labels).unwrap();
        assert!((w_oa - 0.7243).abs() < 1e-3, "w_oa = {w_oa}");
        assert!((w_bb - 1.6148).abs() < 1e-3, "w_bb = {w_bb}");
    }

    #[test]
    fn class_weights_balanced_and_skewed() {
        let labels: Vec<usize> = [vec![0; 10], vec![1; 10]].concat();
        assert_eq!(class_weights(&labels).unwrap(), (1.0, 1.0));
        let labels: Vec<usize> = [vec![0; 3], vec![1; 1]].concat();
        let (a, b) = class_weights(&labels).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-12);
        assert!((b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn class_weights_single_class_errors() {
        assert!(matches!(class_weights(&[0, 0, 0]), Err(GnnError::SingleClass)));
    }

    #[test]
    fn cross_entropy_perfect_and_uniform() {
        let big = DVector::from_vec(vec![50.0, -50.0]);
        let loss = weighted_cross_entropy(&[big], &[0], (1.0, 1.0));
        assert!(loss < 1e-12);

        let zero = DVector::from_vec(vec![0.0, 0.0]);
        let loss = weighted_cross_entropy(&[zero.clone()], &[0], (1.0, 1.0));
        assert!((loss - 2.0_f64.ln()).abs() < 1e-12);

        // weighted-mean normalization cancels for uniform logits
        let loss = weighted_cross_entropy(&[zero.clone(), zero], &[0, 1], (0.5, 1.5));
        assert!((loss - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn weights_file_roundtrip() {
        let hp = Hyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = GcnParams::init(&hp, &mut rng);
        let text = write_weights(&params);
        let loaded = read_weights(&text).unwrap();
        assert_eq!(loaded, params);
        assert!(text.contains("\"format_version\": 1"));
        assert!(text.contains("\"label_names\""));
    }

    #[test]
    fn corrupted_weights_rejected() {
        let hp = Hyperparams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = GcnParams::init(&hp, &mut rng);
        let text = write_weights(&params);
        assert!(read_weights(&text.replace("\"format_version\": 1", "\"format_version\": 9")).is_err());
        assert!(read_weights(&text.replace("\"OA\"", "\"XX\"")).is_err());
        assert!(read_weights("{").is_err());
    }
}
