//! Extended-precision scalars and the vector kernels every other module
//! builds on.
//!
//! [`ExtFloat`] wraps an MPFR value. Arithmetic always goes through a
//! [`PrecisionContext`]: each operation computes the exact result and rounds
//! it once, to nearest with ties to even, at the context's mantissa width.
//! There is no fused accumulation, so a dot product of length `n` performs
//! `2n - 1` roundings regardless of the precision chosen.
//!
//! Widths count mantissa bits including the implicit leading bit (the MPFR
//! convention). `53` is IEEE binary64, `64` is the x87 extended format, and the
//! experiment grid is `64, 128, 256, 512, 1024`.

use std::cmp::Ordering;
use std::fmt;

use rug::float::Round;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mantissa widths swept by the precision experiments.
pub const EXPERIMENT_BITS: [u32; 5] = [64, 128, 256, 512, 1024];

/// Mantissa width of a native `f64`.
pub const F64_BITS: u32 = 53;

/// A mantissa width together with round-to-nearest-even semantics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PrecisionContext {
    bits: u32,
}

impl PrecisionContext {
    /// Builds a context for `bits` of mantissa. Accepts the experiment grid
    /// plus 53 (native double).
    pub fn new(bits: u32) -> Result<Self> {
        if bits == F64_BITS || EXPERIMENT_BITS.contains(&bits) {
            Ok(Self { bits })
        } else {
            Err(Error::UnsupportedPrecision(bits))
        }
    }

    /// The native double context.
    pub fn double() -> Self {
        Self { bits: F64_BITS }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// Machine epsilon `2^(1 - bits)` as an `f64`. For 1024 bits this is the
    /// subnormal `2^-1023`, which `f64` still represents exactly.
    pub fn epsilon(self) -> f64 {
        2f64.powi(1 - self.bits as i32)
    }

    /// Unit roundoff `2^-bits`, half of [`epsilon`](Self::epsilon).
    pub fn unit_roundoff(self) -> f64 {
        2f64.powi(-(self.bits as i32))
    }

    /// The wider of two contexts.
    pub fn widest(self, other: Self) -> Self {
        if other.bits > self.bits {
            other
        } else {
            self
        }
    }

    pub fn zero(self) -> ExtFloat {
        ExtFloat(Float::new(self.bits))
    }

    pub fn one(self) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, 1))
    }

    /// Exact for every finite double since all widths are at least 53 bits.
    pub fn from_f64(self, x: f64) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, x))
    }

    pub fn from_i64(self, x: i64) -> ExtFloat {
        ExtFloat(Float::with_val_round(self.bits, x, Round::Nearest).0)
    }

    /// Parses a decimal literal, rounding once to the context width.
    pub fn parse(self, text: &str) -> Result<ExtFloat> {
        let parsed = Float::parse(text).map_err(|e| Error::Domain(format!("{text:?}: {e}")))?;
        Ok(ExtFloat(Float::with_val(self.bits, parsed)))
    }

    /// Rounds `x` (of any width) into this context.
    pub fn round(self, x: &ExtFloat) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, &x.0))
    }

    pub fn add(self, a: &ExtFloat, b: &ExtFloat) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, &a.0 + &b.0))
    }

    pub fn sub(self, a: &ExtFloat, b: &ExtFloat) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, &a.0 - &b.0))
    }

    pub fn mul(self, a: &ExtFloat, b: &ExtFloat) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, &a.0 * &b.0))
    }

    pub fn div(self, a: &ExtFloat, b: &ExtFloat) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, &a.0 / &b.0))
    }

    pub fn mul_f64(self, a: &ExtFloat, b: f64) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, &a.0 * b))
    }

    pub fn sqrt(self, a: &ExtFloat) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, a.0.sqrt_ref()))
    }

    pub fn ln(self, a: &ExtFloat) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits, a.0.ln_ref()))
    }
}

impl TryFrom<u32> for PrecisionContext {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<PrecisionContext> for u32 {
    fn from(ctx: PrecisionContext) -> u32 {
        ctx.bits
    }
}

impl fmt::Display for PrecisionContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-bit", self.bits)
    }
}

/// An immutable extended-precision floating-point value.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct ExtFloat(pub(crate) Float);

impl ExtFloat {
    /// Mantissa width this value is stored at.
    pub fn bits(&self) -> u32 {
        self.0.prec()
    }

    /// Nearest double.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative()
    }

    /// Exact negation.
    pub fn neg(&self) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits(), -&self.0))
    }

    /// Exact absolute value.
    pub fn abs(&self) -> ExtFloat {
        ExtFloat(Float::with_val(self.bits(), self.0.abs_ref()))
    }

    /// Access to the underlying MPFR value.
    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn from_float(value: Float) -> ExtFloat {
        ExtFloat(value)
    }

    pub fn total_cmp(&self, other: &ExtFloat) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Debug for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExtFloat<{}>({})", self.bits(), self.0.to_string_radix(10, Some(20)))
    }
}

impl fmt::Display for ExtFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A vector whose entries share one precision.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtVector {
    ctx: PrecisionContext,
    data: Vec<Float>,
}

impl ExtVector {
    pub fn zeros(len: usize, ctx: PrecisionContext) -> Self {
        Self { ctx, data: (0..len).map(|_| Float::new(ctx.bits)).collect() }
    }

    pub fn from_f64s(values: &[f64], ctx: PrecisionContext) -> Self {
        Self { ctx, data: values.iter().map(|&v| Float::with_val(ctx.bits, v)).collect() }
    }

    /// Rounds each element into `ctx`.
    pub fn from_elems<I: IntoIterator<Item = ExtFloat>>(elems: I, ctx: PrecisionContext) -> Self {
        Self {
            ctx,
            data: elems
                .into_iter()
                .map(|e| if e.bits() == ctx.bits { e.0 } else { Float::with_val(ctx.bits, e.0) })
                .collect(),
        }
    }

    pub(crate) fn from_raw(data: Vec<Float>, ctx: PrecisionContext) -> Self {
        debug_assert!(data.iter().all(|x| x.prec() == ctx.bits));
        Self { ctx, data }
    }

    pub fn ctx(&self) -> PrecisionContext {
        self.ctx
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> ExtFloat {
        ExtFloat(self.data[i].clone())
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.data.iter().map(Float::to_f64).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = ExtFloat> + '_ {
        self.data.iter().map(|x| ExtFloat(x.clone()))
    }

    /// Rounds every entry into `ctx`.
    pub fn with_ctx(&self, ctx: PrecisionContext) -> ExtVector {
        Self { ctx, data: self.data.iter().map(|x| Float::with_val(ctx.bits, x)).collect() }
    }

    pub(crate) fn raw(&self) -> &[Float] {
        &self.data
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [Float] {
        &mut self.data
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left: a, right: b })
    }
}

/// Sum of products. Works at the widest of `ctx` and the operands' contexts,
/// rounding after every multiply and every add, left to right.
pub fn dot(u: &ExtVector, v: &ExtVector, ctx: PrecisionContext) -> Result<ExtFloat> {
    check_len(u.len(), v.len())?;
    let ctx = ctx.widest(u.ctx).widest(v.ctx);
    Ok(ExtFloat(dot_raw(&u.data, &v.data, ctx.bits)))
}

pub(crate) fn dot_raw(u: &[Float], v: &[Float], bits: u32) -> Float {
    let mut acc = Float::new(bits);
    let mut prod = Float::new(bits);
    for (a, b) in u.iter().zip(v) {
        prod.assign(a * b);
        acc += &prod;
    }
    acc
}

/// `alpha * x + y` elementwise, with the product and the sum each rounded.
pub fn axpy(alpha: &ExtFloat, x: &ExtVector, y: &ExtVector, ctx: PrecisionContext) -> Result<ExtVector> {
    check_len(x.len(), y.len())?;
    let ctx = ctx.widest(x.ctx).widest(y.ctx);
    let mut out = y.with_ctx(ctx);
    axpy_raw(&alpha.0, &x.data, &mut out.data);
    Ok(out)
}

/// `y <- alpha * x + y` in place at the precision of `y`'s entries.
pub(crate) fn axpy_raw(alpha: &Float, x: &[Float], y: &mut [Float]) {
    let Some(first) = y.first() else { return };
    let mut prod = Float::new(first.prec());
    for (yi, xi) in y.iter_mut().zip(x) {
        prod.assign(alpha * xi);
        *yi += &prod;
    }
}

/// `p <- r + beta * p` in place.
pub(crate) fn xpby_raw(r: &[Float], beta: &Float, p: &mut [Float]) {
    let Some(first) = p.first() else { return };
    let mut prod = Float::new(first.prec());
    for (pi, ri) in p.iter_mut().zip(r) {
        prod.assign(beta * &*pi);
        pi.assign(ri + &prod);
    }
}

/// Euclidean norm: the rounded square root of [`dot`]`(u, u)`.
pub fn norm(u: &ExtVector, ctx: PrecisionContext) -> ExtFloat {
    let ctx = ctx.widest(u.ctx);
    let sq = dot_raw(&u.data, &u.data, ctx.bits);
    ExtFloat(Float::with_val(ctx.bits, sq.sqrt_ref()))
}
