//! Two's-complement fixed-point numbers in ⟨W,I⟩ notation: W total bits,
//! I integer bits including the sign, W−I fractional bits.
//!
//! All conversions round half to even and saturate to the representable
//! range; nothing here ever wraps.

use std::fmt;

/// Runtime description of a ⟨W,I⟩ format. Widths up to 32 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    width: u32,
    int_bits: u32,
}

impl FixedFormat {
    /// Panics unless `2 <= width <= 32` and `1 <= int_bits <= width`.
    pub const fn new(width: u32, int_bits: u32) -> Self {
        assert!(width >= 2 && width <= 32, "fixed-point width must be 2..=32");
        assert!(int_bits >= 1 && int_bits <= width, "integer bits must be 1..=width");
        FixedFormat { width, int_bits }
    }

    pub const fn width(self) -> u32 {
        self.width
    }

    pub const fn int_bits(self) -> u32 {
        self.int_bits
    }

    pub const fn frac_bits(self) -> u32 {
        self.width - self.int_bits
    }

    pub const fn min_raw(self) -> i64 {
        -(1i64 << (self.width - 1))
    }

    pub const fn max_raw(self) -> i64 {
        (1i64 << (self.width - 1)) - 1
    }

    /// Size of one unit in the last place.
    pub fn ulp(self) -> f64 {
        (-(self.frac_bits() as f64)).exp2()
    }

    pub fn saturate(self, raw: i128) -> i64 {
        raw.clamp(i128::from(self.min_raw()), i128::from(self.max_raw())) as i64
    }

    /// Nearest representable raw code for `x`. NaN maps to zero.
    pub fn quantize(self, x: f64) -> i64 {
        if x.is_nan() {
            return 0;
        }
        let scaled = (x * (self.frac_bits() as f64).exp2()).round_ties_even();
        // Saturating float-to-int cast, then clamp into the format.
        self.saturate(scaled as i128)
    }

    pub fn to_f64(self, raw: i64) -> f64 {
        raw as f64 * self.ulp()
    }

    /// Re-expresses `value` (an integer carrying `from_frac` fractional
    /// bits) in this format.
    pub fn requantize(self, value: i128, from_frac: u32) -> i64 {
        let to = self.frac_bits();
        let v = if from_frac <= to {
            let shift = to - from_frac;
            value.checked_shl(shift).filter(|s| s >> shift == value).unwrap_or(if value < 0 {
                i128::MIN
            } else {
                i128::MAX
            })
        } else {
            shift_right_half_even(value, from_frac - to)
        };
        self.saturate(v)
    }
}

/// `value / 2^shift` rounded half to even.
fn shift_right_half_even(value: i128, shift: u32) -> i128 {
    if shift == 0 {
        return value;
    }
    if shift >= 127 {
        return 0;
    }
    let floor = value >> shift;
    let rem = value - (floor << shift);
    let half = 1i128 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

/// A ⟨W,I⟩ fixed-point value.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Fixed<const W: u32, const I: u32> {
    raw: i32,
}

/// ⟨8,1⟩: weights and biases.
pub type Weight = Fixed<8, 1>;
/// ⟨16,6⟩: activations.
pub type Activation = Fixed<16, 6>;
/// ⟨32,12⟩: multiply-accumulate register.
pub type Accumulator = Fixed<32, 12>;

impl<const W: u32, const I: u32> Fixed<W, I> {
    pub const FORMAT: FixedFormat = FixedFormat::new(W, I);
    pub const ZERO: Self = Fixed { raw: 0 };
    pub const MAX: Self = Fixed {
        raw: Self::FORMAT.max_raw() as i32,
    };
    pub const MIN: Self = Fixed {
        raw: Self::FORMAT.min_raw() as i32,
    };

    pub fn from_raw(raw: i64) -> Option<Self> {
        (Self::FORMAT.min_raw()..=Self::FORMAT.max_raw())
            .contains(&raw)
            .then_some(Fixed { raw: raw as i32 })
    }

    pub fn from_raw_saturating(raw: i64) -> Self {
        Fixed {
            raw: Self::FORMAT.saturate(i128::from(raw)) as i32,
        }
    }

    /// Nearest representable value, saturated into range.
    pub fn quantize(x: f64) -> Self {
        Fixed {
            raw: Self::FORMAT.quantize(x) as i32,
        }
    }

    pub fn raw(self) -> i32 {
        self.raw
    }

    pub fn to_f64(self) -> f64 {
        Self::FORMAT.to_f64(i64::from(self.raw))
    }

    pub fn requantize<const W2: u32, const I2: u32>(self) -> Fixed<W2, I2> {
        Fixed {
            raw: Fixed::<W2, I2>::FORMAT.requantize(i128::from(self.raw), Self::FORMAT.frac_bits())
                as i32,
        }
    }

    pub fn saturating_add(self, other: Self) -> Self {
        Self::from_raw_saturating(i64::from(self.raw) + i64::from(other.raw))
    }

    pub fn relu(self) -> Self {
        if self.raw < 0 {
            Self::ZERO
        } else {
            self
        }
    }
}

impl<const W: u32, const I: u32> fmt::Debug for Fixed<W, I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed<{W},{I}>({} = raw {})", self.to_f64(), self.raw)
    }
}

impl<const W: u32, const I: u32> fmt::Display for Fixed<W, I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

/// Adds the exact product `a × b` into `acc`, saturating on overflow.
pub fn mac(acc: Accumulator, a: Weight, b: Activation) -> Accumulator {
    let product = i128::from(a.raw) * i128::from(b.raw);
    let frac = Weight::FORMAT.frac_bits() + Activation::FORMAT.frac_bits();
    let term = Accumulator::FORMAT.requantize(product, frac);
    Accumulator::from_raw_saturating(i64::from(acc.raw) + term)
}
