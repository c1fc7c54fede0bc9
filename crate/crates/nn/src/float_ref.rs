//! Double-precision forward pass over the same (already quantized)
//! parameters, and a worst-case bound on how far the fixed-point scores
//! can drift from it.

use crate::model::DenseModel;

/// Scores computed in `f64`, plus the largest magnitude any accumulator
/// reached, so callers can tell whether saturation was possible.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatInference {
    pub scores: Vec<f64>,
    pub peak_pre_activation: f64,
    pub peak_activation: f64,
}

pub fn infer_float(model: &DenseModel, x: &[f64]) -> FloatInference {
    let mut cur = x.to_vec();
    cur.resize(model.input_width(), 0.0);
    let last = model.layers().len() - 1;
    let (mut peak_pre, mut peak_act) = (0.0f64, 0.0f64);
    for (l, layer) in model.layers().iter().enumerate() {
        let mut next = Vec::with_capacity(layer.cols());
        for j in 0..layer.cols() {
            let mut s = 0.0;
            for (i, xi) in cur.iter().enumerate() {
                s += layer.weight(i, j).to_f64() * xi;
                peak_pre = peak_pre.max(s.abs());
            }
            s += layer.bias(j).to_f64();
            peak_pre = peak_pre.max(s.abs());
            if l < last {
                s = s.max(0.0);
            }
            peak_act = peak_act.max(s.abs());
            next.push(s);
        }
        cur = next;
    }
    FloatInference {
        scores: cur,
        peak_pre_activation: peak_pre,
        peak_activation: peak_act,
    }
}

/// Per-output bound on `|fixed − float|`, valid when nothing saturates.
///
/// Products and sums are exact in the accumulator, so the only error source
/// is rounding each layer output to 10 fractional bits (half an ULP,
/// 2^-11). That error enters the next layer through `|w|`, and ReLU does
/// not amplify it:
/// `e_out[j] = Σ_i |w[i][j]| · e_in[i] + 2^-11`.
pub fn error_bound(model: &DenseModel) -> Vec<f64> {
    let half_ulp = 2f64.powi(-11);
    let mut e = vec![0.0; model.input_width()];
    for layer in model.layers() {
        e = (0..layer.cols())
            .map(|j| (0..layer.rows()).map(|i| layer.weight(i, j).to_f64().abs() * e[i]).sum::<f64>() + half_ulp)
            .collect();
    }
    e
}

/// Whether a float pass stayed far enough inside the ⟨32,12⟩ and ⟨16,6⟩
/// ranges for [`error_bound`] to apply.
pub fn saturation_free(f: &FloatInference) -> bool {
    f.peak_pre_activation < 2047.0 && f.peak_activation < 31.9
}
