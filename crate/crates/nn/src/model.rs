//! Dense-network parameters and bit-accurate fixed-point inference.
//!
//! Weights are stored row-major with one row per input and one column per
//! output. Every layer computes, per output `j`:
//!
//! 1. `acc = Σ_i w[i][j] · x[i]` with exact products, summed in input
//!    order into a saturating ⟨32,12⟩ accumulator;
//! 2. `acc += bias[j]` (saturating);
//! 3. ReLU on hidden layers, identity on the last;
//! 4. requantize to ⟨16,6⟩, rounding half to even and saturating.

use std::path::Path;

use apeiron_core::{mac, Accumulator, Activation, Weight};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Input slots of an event.
pub const INPUTS: usize = 64;
/// Output widths of the three dense layers.
pub const LAYER_WIDTHS: [usize; 3] = [64, 16, 4];

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("layer {layer}: {what}")]
    Shape { layer: usize, what: String },
    #[error("layer {layer}: {field}[{index}] = {value} is not a valid <8,1> raw code (-128..=127)")]
    Range {
        layer: usize,
        field: &'static str,
        index: usize,
        value: i64,
    },
    #[error("model has no layers")]
    Empty,
    #[error("parameter file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// On-disk form: raw ⟨8,1⟩ codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows × cols`.
    pub weights: Vec<i64>,
    pub bias: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLayer {
    rows: usize,
    cols: usize,
    weights: Vec<Weight>,
    bias: Vec<Weight>,
}

impl DenseLayer {
    pub fn new(rows: usize, cols: usize, weights: Vec<Weight>, bias: Vec<Weight>) -> Result<Self, String> {
        if rows == 0 || cols == 0 {
            return Err(format!("shape {rows}x{cols} has no weights"));
        }
        if weights.len() != rows * cols {
            return Err(format!("{} weights for a {rows}x{cols} matrix", weights.len()));
        }
        if bias.len() != cols {
            return Err(format!("{} biases for {cols} outputs", bias.len()));
        }
        Ok(DenseLayer {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weight(&self, i: usize, j: usize) -> Weight {
        self.weights[i * self.cols + j]
    }

    pub fn bias(&self, j: usize) -> Weight {
        self.bias[j]
    }

    fn forward(&self, x: &[Activation], hidden: bool, out: &mut Vec<Activation>) {
        out.clear();
        for j in 0..self.cols {
            let mut acc = Accumulator::ZERO;
            for (i, &xi) in x.iter().enumerate() {
                acc = mac(acc, self.weight(i, j), xi);
            }
            acc = acc.saturating_add(self.bias[j].requantize());
            if hidden {
                acc = acc.relu();
            }
            out.push(acc.requantize());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseModel {
    layers: Vec<DenseLayer>,
}

/// Class scores of one event and the winning class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inference {
    pub scores: Vec<Activation>,
    /// Index of the highest score; ties go to the lowest index.
    pub class: usize,
}

impl DenseModel {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::Empty);
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].cols != pair[1].rows {
                return Err(ModelError::Shape {
                    layer: l + 1,
                    what: format!("{} inputs but the previous layer has {} outputs", pair[1].rows, pair[0].cols),
                });
            }
        }
        Ok(DenseModel { layers })
    }

    /// All-zero parameters for the given widths, `sizes[0]` being the input.
    pub fn zeros(sizes: &[usize]) -> Self {
        Self::from_fn(sizes, |_, _, _| 0, |_, _| 0)
    }

    /// Uniform raw codes in `-max_abs..=max_abs`.
    pub fn random(sizes: &[usize], max_abs: i64, rng: &mut impl Rng) -> Self {
        let max_abs = max_abs.clamp(0, 127);
        let lo = (-max_abs).max(-128);
        let mut w = Vec::new();
        for l in 0..sizes.len() - 1 {
            w.push((
                (0..sizes[l] * sizes[l + 1]).map(|_| rng.gen_range(lo..=max_abs)).collect::<Vec<_>>(),
                (0..sizes[l + 1]).map(|_| rng.gen_range(lo..=max_abs)).collect::<Vec<_>>(),
            ));
        }
        Self::from_fn(sizes, |l, i, j| w[l].0[i * sizes[l + 1] + j], |l, j| w[l].1[j])
    }

    /// The reference architecture: 64 inputs, then layers of 64, 16 and 4.
    pub fn reference_sizes() -> [usize; 4] {
        [INPUTS, LAYER_WIDTHS[0], LAYER_WIDTHS[1], LAYER_WIDTHS[2]]
    }

    fn from_fn(sizes: &[usize], w: impl Fn(usize, usize, usize) -> i64, b: impl Fn(usize, usize) -> i64) -> Self {
        assert!(sizes.len() >= 2, "need an input width and at least one layer");
        let layers = (0..sizes.len() - 1)
            .map(|l| {
                let (rows, cols) = (sizes[l], sizes[l + 1]);
                let weights = (0..rows * cols)
                    .map(|k| Weight::from_raw_saturating(w(l, k / cols, k % cols)))
                    .collect();
                let bias = (0..cols).map(|j| Weight::from_raw_saturating(b(l, j))).collect();
                DenseLayer::new(rows, cols, weights, bias).expect("consistent shape")
            })
            .collect();
        DenseModel::new(layers).expect("chained shapes")
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].rows
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").cols
    }

    /// Runs the network. Inputs shorter than [`DenseModel::input_width`]
    /// are zero-padded.
    ///
    /// # Panics
    /// If `x` is longer than the input width.
    pub fn infer(&self, x: &[Activation]) -> Inference {
        assert!(
            x.len() <= self.input_width(),
            "{} inputs for a {}-input network",
            x.len(),
            self.input_width()
        );
        let mut cur: Vec<Activation> = x.to_vec();
        cur.resize(self.input_width(), Activation::ZERO);
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, l < last, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        let class = argmax(&cur);
        Inference { scores: cur, class }
    }

    pub fn to_file(&self) -> ParamsFile {
        ParamsFile {
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.iter().map(|w| i64::from(w.raw())).collect(),
                    bias: l.bias.iter().map(|b| i64::from(b.raw())).collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &ParamsFile) -> Result<Self, ModelError> {
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, lf) in file.layers.iter().enumerate() {
            let conv = |field: &'static str, v: &[i64]| -> Result<Vec<Weight>, ModelError> {
                v.iter()
                    .enumerate()
                    .map(|(index, &value)| {
                        Weight::from_raw(value).ok_or(ModelError::Range {
                            layer: l,
                            field,
                            index,
                            value,
                        })
                    })
                    .collect()
            };
            let layer = DenseLayer::new(lf.rows, lf.cols, conv("weights", &lf.weights)?, conv("bias", &lf.bias)?)
                .map_err(|what| ModelError::Shape { layer: l, what })?;
            layers.push(layer);
        }
        DenseModel::new(layers)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("parameters serialize")
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[Activation]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn act(x: f64) -> Activation {
        Activation::quantize(x)
    }

    #[test]
    fn zero_network_scores_zero_and_picks_class_zero() {
        let m = DenseModel::zeros(&DenseModel::reference_sizes());
        let x: Vec<Activation> = (0..64).map(|i| act(i as f64 / 64.0)).collect();
        let r = m.infer(&x);
        assert_eq!(r.scores, vec![Activation::ZERO; 4]);
        assert_eq!(r.class, 0);
    }

    #[test]
    fn single_path_of_halves_gives_an_eighth() {
        // slot 5 -> hidden 3 -> hidden 7 -> class 2, every weight 0.5 (raw 64)
        let sizes = DenseModel::reference_sizes();
        let m = DenseModel::from_fn(
            &sizes,
            |l, i, j| match (l, i, j) {
                (0, 5, 3) | (1, 3, 7) | (2, 7, 2) => 64,
                _ => 0,
            },
            |_, _| 0,
        );
        let mut x = vec![Activation::ZERO; 64];
        x[5] = act(1.0);
        let r = m.infer(&x);
        // 1.0 * 0.5^3 = 0.125 = raw 128 at 10 fractional bits
        assert_eq!(r.scores[2].raw(), 128);
        assert_eq!(r.class, 2);
        assert_eq!(r.scores.iter().filter(|s| s.raw() != 0).count(), 1);
    }

    #[test]
    fn hidden_relu_clips_and_output_stays_signed() {
        let m = DenseModel::from_fn(&[1, 1, 1], |l, _, _| if l == 0 { -64 } else { 64 }, |l, _| if l == 1 { -32 } else { 0 });
        // hidden = relu(-0.5) = 0, output = 0 * 0.5 - 0.25
        let r = m.infer(&[act(1.0)]);
        assert_eq!(r.scores[0].to_f64(), -0.25);
    }

    #[test]
    fn ties_go_to_the_lowest_class() {
        let v = [act(1.0), act(3.0), act(3.0), act(-1.0)];
        assert_eq!(argmax(&v), 1);
        assert_eq!(argmax(&[act(0.0); 4]), 0);
    }

    #[test]
    fn output_saturates_instead_of_wrapping() {
        // 64 inputs of ~32 times weight ~1 overflow <16,6>
        let m = DenseModel::from_fn(&[64, 1], |_, _, _| 127, |_, _| 127);
        let r = m.infer(&vec![Activation::MAX; 64]);
        assert_eq!(r.scores[0], Activation::MAX);
        let m = DenseModel::from_fn(&[64, 1], |_, _, _| -128, |_, _| -128);
        let r = m.infer(&vec![Activation::MAX; 64]);
        assert_eq!(r.scores[0], Activation::MIN);
    }

    #[test]
    fn json_round_trip_and_range_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DenseModel::random(&DenseModel::reference_sizes(), 127, &mut rng);
        assert_eq!(DenseModel::from_json(&m.to_json()).unwrap(), m);

        let mut f = m.to_file();
        f.layers[1].bias[3] = 128;
        assert!(matches!(
            DenseModel::from_file(&f),
            Err(ModelError::Range { layer: 1, field: "bias", index: 3, value: 128 })
        ));
        let mut f = m.to_file();
        f.layers[2].rows = 15;
        assert!(DenseModel::from_file(&f).is_err());
        assert!(DenseModel::from_json("{\"layers\": []}").is_err());
        assert!(DenseModel::from_json("{\"layers\": [], \"extra\": 1}").is_err());
    }

    #[test]
    fn short_inputs_are_zero_padded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = DenseModel::random(&DenseModel::reference_sizes(), 127, &mut rng);
        let x: Vec<Activation> = (0..10).map(|i| act(i as f64 / 10.0)).collect();
        let mut padded = x.clone();
        padded.resize(64, Activation::ZERO);
        assert_eq!(m.infer(&x), m.infer(&padded));
    }
}
