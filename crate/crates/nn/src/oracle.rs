//! Arbitrary-precision reference for [`crate::DenseModel::infer`].
//!
//! Works directly on raw integer codes with `BigInt`, so it shares no
//! arithmetic with the fixed-point path: every product is exact, every
//! clamp is an explicit comparison, and rounding is a floor division
//! followed by a half-even remainder test.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::model::ParamsFile;

// weight ⟨8,1⟩: 7 fractional bits; activation ⟨16,6⟩: 10; accumulator ⟨32,12⟩: 20
const W_FRAC: u32 = 7;
const A_FRAC: u32 = 10;
const ACC_FRAC: u32 = 20;

struct Layer {
    rows: usize,
    cols: usize,
    /// Column-major so one output's weights are contiguous.
    w_by_col: Vec<BigInt>,
    /// Biases already on the accumulator grid.
    bias_acc: Vec<BigInt>,
}

/// Parameters converted once, reusable across many inputs.
pub struct OracleNet {
    layers: Vec<Layer>,
    acc_lo: BigInt,
    acc_hi: BigInt,
    act_lo: BigInt,
    act_hi: BigInt,
    /// Product (2^-17 grid) to accumulator (2^-20 grid).
    prod_to_acc: BigInt,
    /// Accumulator grid to activation grid divisor.
    acc_to_act: BigInt,
}

fn pow2(n: u32) -> BigInt {
    BigInt::one() << n
}

fn clamp(v: BigInt, lo: &BigInt, hi: &BigInt) -> BigInt {
    if &v < lo {
        lo.clone()
    } else if &v > hi {
        hi.clone()
    } else {
        v
    }
}

/// `n / d` rounded to nearest, ties to even. `d > 0`.
pub fn div_round_half_even(n: &BigInt, d: &BigInt) -> BigInt {
    let (q, r) = n.div_mod_floor(d);
    let twice: BigInt = &r * 2;
    if twice > *d || (twice == *d && q.is_odd()) {
        q + 1
    } else {
        q
    }
}

impl OracleNet {
    pub fn new(params: &ParamsFile) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| {
                let mut w_by_col = Vec::with_capacity(l.rows * l.cols);
                for j in 0..l.cols {
                    for i in 0..l.rows {
                        w_by_col.push(BigInt::from(l.weights[i * l.cols + j]));
                    }
                }
                let to_acc = pow2(ACC_FRAC - W_FRAC);
                Layer {
                    rows: l.rows,
                    cols: l.cols,
                    w_by_col,
                    bias_acc: l.bias.iter().map(|&b| BigInt::from(b) * &to_acc).collect(),
                }
            })
            .collect();
        OracleNet {
            layers,
            acc_lo: -pow2(31),
            acc_hi: pow2(31) - 1,
            act_lo: -pow2(15),
            act_hi: pow2(15) - 1,
            prod_to_acc: pow2(ACC_FRAC - (W_FRAC + A_FRAC)),
            acc_to_act: pow2(ACC_FRAC - A_FRAC),
        }
    }

    /// Raw ⟨16,6⟩ scores and the arg-max class. Inputs are raw ⟨16,6⟩
    /// codes, zero-padded to the first layer's width.
    pub fn infer(&self, x_raw: &[i64]) -> (Vec<i64>, usize) {
        let width = self.layers[0].rows;
        assert!(x_raw.len() <= width);
        let mut x: Vec<BigInt> = x_raw.iter().map(|&v| BigInt::from(v)).collect();
        x.resize(width, BigInt::zero());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = Vec::with_capacity(layer.cols);
            for j in 0..layer.cols {
                let col = &layer.w_by_col[j * layer.rows..(j + 1) * layer.rows];
                let mut acc = BigInt::zero();
                for (w, xi) in col.iter().zip(&x) {
                    // a zero term leaves a saturating sum unchanged
                    if w.is_zero() || xi.is_zero() {
                        continue;
                    }
                    let term = w * xi * &self.prod_to_acc;
                    acc = clamp(acc + term, &self.acc_lo, &self.acc_hi);
                }
                acc = clamp(acc + &layer.bias_acc[j], &self.acc_lo, &self.acc_hi);
                if l < last && acc.is_negative() {
                    acc = BigInt::zero();
                }
                let r = div_round_half_even(&acc, &self.acc_to_act);
                y.push(clamp(r, &self.act_lo, &self.act_hi));
            }
            x = y;
        }
        let mut best = 0;
        for i in 1..x.len() {
            if x[i] > x[best] {
                best = i;
            }
        }
        let scores = x
            .iter()
            .map(|v| i64::try_from(v).expect("clamped to 16 bits"))
            .collect();
        (scores, best)
    }
}
