//! Multi-precision arithmetic used by the moment machinery.
//!
//! Three layers are provided:
//! - exact rationals ([`RBig`]) for sign-certified determinants of moment
//!   matrices built from rounded `f64` inputs (every finite `f64` is a dyadic
//!   rational, so the conversion is exact);
//! - working-precision binary floats ([`Real`]) for the quadrature pipeline;
//! - outward-rounded intervals ([`Interval`]) where cancellation has to be
//!   detected rather than trusted.

use std::cmp::Ordering;

use dashu::base::{Approximation, BitTest, Sign, SquareRoot, UnsignedAbs};
use dashu::float::round::mode::{Down, HalfEven, Up};
use dashu::float::{Context, FBig};
use dashu::integer::{IBig, UBig};
use dashu::rational::RBig;

/// Default working precision in bits.
pub const DEFAULT_PRECISION_BITS: usize = 512;
/// Upper end of the precision ladder.
pub const MAX_PRECISION_BITS: usize = 4096;

pub type Real = FBig<HalfEven>;

/// Exact rational value of a finite `f64`.
pub fn rational(x: f64) -> RBig {
    assert!(x.is_finite(), "non-finite value {x}");
    RBig::try_from(x).expect("finite f64 converts exactly")
}

pub fn rational_int(n: i64) -> RBig {
    RBig::from(IBig::from(n))
}

pub fn rational_to_f64(r: &RBig) -> f64 {
    match r.to_f64() {
        Approximation::Exact(v) | Approximation::Inexact(v, _) => v,
    }
}

/// Natural log of |r|, robust to magnitudes outside the `f64` range.
/// Returns `-inf` for zero.
pub fn ln_abs_rational(r: &RBig) -> f64 {
    if r.numerator() == &IBig::ZERO {
        return f64::NEG_INFINITY;
    }
    ln_ubig(&r.numerator().unsigned_abs()) - ln_ubig(r.denominator())
}

fn ln_ubig(x: &UBig) -> f64 {
    let bits = x.bit_len();
    if bits <= 1000 {
        let v: f64 = match x.to_f64() {
            Approximation::Exact(v) | Approximation::Inexact(v, _) => v,
        };
        if v.is_finite() {
            return v.ln();
        }
    }
    let shift = bits - 64;
    let top = x >> shift;
    let v: f64 = match top.to_f64() {
        Approximation::Exact(v) | Approximation::Inexact(v, _) => v,
    };
    v.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn sign_of(r: &RBig) -> Ordering {
    r.numerator().cmp(&IBig::ZERO)
}

/// Determinant by exact Gaussian elimination with nonzero pivot search.
pub fn det_rational(mut m: Vec<Vec<RBig>>) -> RBig {
    let n = m.len();
    if n == 0 {
        return RBig::ONE;
    }
    let mut det = RBig::ONE;
    for col in 0..n {
        let pivot = match (col..n).find(|&r| m[r][col] != RBig::ZERO) {
            Some(p) => p,
            None => return RBig::ZERO,
        };
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if m[r][col] == RBig::ZERO {
                continue;
            }
            let factor = &m[r][col] / &p;
            for c in col..n {
                let delta = &factor * &m[col][c];
                m[r][c] -= delta;
            }
        }
    }
    det
}

pub fn real(x: f64, bits: usize) -> Real {
    Real::try_from(x)
        .expect("finite f64")
        .with_precision(bits)
        .value()
}

pub fn real_int(n: i64, bits: usize) -> Real {
    Real::from(IBig::from(n)).with_precision(bits).value()
}

/// `2^exp` at the given precision.
pub fn real_pow2(exp: isize, bits: usize) -> Real {
    Real::from_parts(IBig::ONE, exp).with_precision(bits).value()
}

pub fn real_from_rational(r: &RBig, bits: usize) -> Real {
    let num = Real::from(r.numerator().clone()).with_precision(bits).value();
    let den = Real::from(IBig::from(r.denominator().clone()))
        .with_precision(bits)
        .value();
    num / den
}

pub fn real_to_f64(x: &Real) -> f64 {
    match x.to_f64() {
        Approximation::Exact(v) | Approximation::Inexact(v, _) => v,
    }
}

pub fn real_sqrt(x: &Real) -> Real {
    x.sqrt()
}

pub fn real_is_negative(x: &Real) -> bool {
    x.repr().sign() == Sign::Negative && !x.repr().is_zero()
}

pub fn real_is_positive(x: &Real) -> bool {
    x.repr().sign() == Sign::Positive && !x.repr().is_zero()
}

pub fn real_abs(x: &Real) -> Real {
    if real_is_negative(x) {
        -x.clone()
    } else {
        x.clone()
    }
}

/// Closed interval `[lo, hi]` with outward rounding at a fixed precision.
#[derive(Clone, Debug)]
pub struct Interval {
    lo: FBig<Down>,
    hi: FBig<Up>,
    bits: usize,
}

impl Interval {
    pub fn from_f64(x: f64, bits: usize) -> Self {
        Self {
            lo: FBig::<Down>::try_from(x).expect("finite").with_precision(bits).value(),
            hi: FBig::<Up>::try_from(x).expect("finite").with_precision(bits).value(),
            bits,
        }
    }

    /// Interval `[x - r, x + r]`.
    pub fn with_radius(x: f64, radius: f64, bits: usize) -> Self {
        assert!(radius >= 0.0);
        let c = Self::from_f64(x, bits);
        let r = Self::from_f64(radius, bits);
        Self {
            lo: c.lo - r.hi.clone().with_rounding::<Down>(),
            hi: c.hi + r.hi,
            bits,
        }
    }

    pub fn from_int(n: i64, bits: usize) -> Self {
        Self::from_ibig(IBig::from(n), bits)
    }

    pub fn from_ibig(n: IBig, bits: usize) -> Self {
        Self {
            lo: FBig::<Down>::from(n.clone()).with_precision(bits).value(),
            hi: FBig::<Up>::from(n).with_precision(bits).value(),
            bits,
        }
    }

    pub fn from_rational(r: &RBig, bits: usize) -> Self {
        let num = Self::from_ibig(r.numerator().clone(), bits);
        let den = Self::from_ibig(IBig::from(r.denominator().clone()), bits);
        num.div(&den)
    }

    pub fn from_real(x: &Real, bits: usize) -> Self {
        let lo = x.clone().with_rounding::<Down>().with_precision(bits).value();
        let hi = x.clone().with_rounding::<Up>().with_precision(bits).value();
        Self { lo, hi, bits }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn lo_f64(&self) -> f64 {
        match self.lo.to_f64() {
            Approximation::Exact(v) | Approximation::Inexact(v, _) => v,
        }
    }

    pub fn hi_f64(&self) -> f64 {
        match self.hi.to_f64() {
            Approximation::Exact(v) | Approximation::Inexact(v, _) => v,
        }
    }

    pub fn mid_f64(&self) -> f64 {
        0.5 * self.lo_f64() + 0.5 * self.hi_f64()
    }

    pub fn width_f64(&self) -> f64 {
        let w = self.hi.clone() - self.lo.clone().with_rounding::<Up>();
        match w.to_f64() {
            Approximation::Exact(v) | Approximation::Inexact(v, _) => v,
        }
    }

    pub fn contains_zero(&self) -> bool {
        !is_pos_down(&self.lo) && !is_neg_up(&self.hi)
    }

    /// Upper bound on |x| over the interval.
    pub fn abs_upper_f64(&self) -> f64 {
        self.lo_f64().abs().max(self.hi_f64().abs())
    }

    /// Lower bound on |x| over the interval (zero if the interval straddles 0).
    pub fn abs_lower_f64(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo_f64().abs().min(self.hi_f64().abs())
        }
    }

    /// Certified sign, or `None` when the interval contains zero.
    pub fn sign(&self) -> Option<Ordering> {
        if is_pos_down(&self.lo) {
            Some(Ordering::Greater)
        } else if is_neg_up(&self.hi) {
            Some(Ordering::Less)
        } else {
            None
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            lo: -(self.hi.clone().with_rounding::<Down>()),
            hi: -(self.lo.clone().with_rounding::<Up>()),
            bits: self.bits,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
            bits: self.bits.max(o.bits),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let (a_lo, a_hi) = (self.lo.clone(), self.hi.clone());
        let (b_lo, b_hi) = (o.lo.clone(), o.hi.clone());
        let pairs = [
            (a_lo.clone(), b_lo.clone()),
            (a_lo.clone(), b_hi.clone().with_rounding::<Down>()),
            (a_hi.clone().with_rounding::<Down>(), b_lo.clone()),
            (a_hi.clone().with_rounding::<Down>(), b_hi.clone().with_rounding::<Down>()),
        ];
        let lo = pairs
            .iter()
            .map(|(x, y)| x * y)
            .reduce(|a, b| if a <= b { a } else { b })
            .expect("four products");
        let hi = pairs
            .iter()
            .map(|(x, y)| x.clone().with_rounding::<Up>() * y.clone().with_rounding::<Up>())
            .reduce(|a, b| if a >= b { a } else { b })
            .expect("four products");
        Self {
            lo,
            hi,
            bits: self.bits.max(o.bits),
        }
    }

    /// Division by an interval that excludes zero.
    pub fn div(&self, o: &Self) -> Self {
        assert!(!o.contains_zero(), "interval division by an interval containing zero");
        // 1/o is monotone decreasing on an interval of one sign.
        let one_lo = FBig::<Down>::ONE.with_precision(self.bits.max(o.bits)).value();
        let one_hi = FBig::<Up>::ONE.with_precision(self.bits.max(o.bits)).value();
        let recip = Self {
            lo: one_lo / o.hi.clone().with_rounding::<Down>(),
            hi: one_hi / o.lo.clone().with_rounding::<Up>(),
            bits: o.bits,
        };
        self.mul(&recip)
    }

    /// Square root of a nonnegative interval (negative lower end clamps to 0).
    pub fn sqrt(&self) -> Self {
        assert!(!is_neg_up(&self.hi), "sqrt of a negative interval");
        let lo = if is_pos_down(&self.lo) {
            Context::<Down>::new(self.bits).sqrt(self.lo.repr()).value()
        } else {
            FBig::<Down>::ZERO
        };
        let hi = Context::<Up>::new(self.bits).sqrt(self.hi.repr()).value();
        Self {
            lo,
            hi,
            bits: self.bits,
        }
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::from_int(1, self.bits);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Smallest interval containing both operands.
    pub fn hull(&self, o: &Self) -> Self {
        Self {
            lo: if self.lo <= o.lo { self.lo.clone() } else { o.lo.clone() },
            hi: if self.hi >= o.hi { self.hi.clone() } else { o.hi.clone() },
            bits: self.bits.max(o.bits),
        }
    }
}

fn is_pos_down(x: &FBig<Down>) -> bool {
    x.repr().sign() == Sign::Positive && !x.repr().is_zero()
}

fn is_neg_up(x: &FBig<Up>) -> bool {
    x.repr().sign() == Sign::Negative && !x.repr().is_zero()
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> IBig {
    if k > n {
        return IBig::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = UBig::ONE;
    for i in 0..k {
        acc = acc * UBig::from(n - i) / UBig::from(i + 1);
    }
    IBig::from(acc)
}

pub fn factorial(n: u64) -> UBig {
    (1..=n).fold(UBig::ONE, |acc, i| acc * UBig::from(i))
}
