//! Exact rational scalar.
//!
//! Every time, position, speed and λ value in the simulator is a [`Rat`].
//! Values whose numerator and denominator fit in an `i64` are kept in a
//! machine-word representation; anything larger transparently moves to
//! `BigRational`. The two representations never overlap, so derived
//! equality and hashing are structural.

use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};
use core::iter::Sum;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};

/// Error returned when a string is not an exact rational literal.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not an exact rational: {input:?} ({reason})")]
pub struct ParseRatError {
    pub input: String,
    pub reason: &'static str,
}

#[derive(Clone)]
enum Repr {
    Small(Ratio<i64>),
    Big(BigRational),
}

/// Arbitrary-precision rational number, always in lowest terms with a
/// positive denominator.
#[derive(Clone)]
pub struct Rat(Repr);

impl Rat {
    pub fn zero() -> Self {
        Rat(Repr::Small(Ratio::new_raw(0, 1)))
    }

    pub fn one() -> Self {
        Rat(Repr::Small(Ratio::new_raw(1, 1)))
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_small(Ratio::from_integer(n))
    }

    /// `numer / denom`, or `None` when `denom == 0`.
    pub fn new(numer: i64, denom: i64) -> Option<Self> {
        if denom == 0 {
            return None;
        }
        Some(Self::from_big(BigRational::new(BigInt::from(numer), BigInt::from(denom))))
    }

    /// `numer / denom` for literal constants. Panics on a zero denominator.
    pub fn frac(numer: i64, denom: i64) -> Self {
        Self::new(numer, denom).expect("zero denominator in Rat::frac")
    }

    pub fn from_bigints(numer: BigInt, denom: BigInt) -> Option<Self> {
        if denom.is_zero() {
            return None;
        }
        Some(Self::from_big(BigRational::new(numer, denom)))
    }

    /// `2^exp` for any signed exponent.
    pub fn pow2(exp: i32) -> Self {
        let magnitude = BigInt::one() << exp.unsigned_abs();
        if exp >= 0 {
            Self::from_big(BigRational::from_integer(magnitude))
        } else {
            Self::from_big(BigRational::new(BigInt::one(), magnitude))
        }
    }

    fn from_small(r: Ratio<i64>) -> Self {
        // i64::MIN cannot be negated; keep it out of the small path.
        if *r.numer() == i64::MIN || *r.denom() == i64::MIN {
            Rat(Repr::Big(BigRational::new(
                BigInt::from(*r.numer()),
                BigInt::from(*r.denom()),
            )))
        } else {
            Rat(Repr::Small(r))
        }
    }

    fn from_big(r: BigRational) -> Self {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(n), Some(d)) if n != i64::MIN && d != i64::MIN => {
                Rat(Repr::Small(Ratio::new_raw(n, d)))
            }
            _ => Rat(Repr::Big(r)),
        }
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(r) => BigRational::new_raw(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            Repr::Big(r) => r.clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(r) => BigInt::from(*r.numer()),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(r) => BigInt::from(*r.denom()),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_zero(),
            Repr::Big(r) => r.is_zero(),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.signum() < 0
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(r) => r.is_integer(),
            Repr::Big(r) => r.is_integer(),
        }
    }

    pub fn signum(&self) -> i32 {
        match &self.0 {
            Repr::Small(r) => r.numer().signum() as i32,
            Repr::Big(r) => {
                if r.is_zero() {
                    0
                } else if r.is_positive() {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// `self / rhs`, or `None` when `rhs` is zero.
    pub fn checked_div(&self, rhs: &Rat) -> Option<Rat> {
        if rhs.is_zero() {
            return None;
        }
        if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
            if let Some(r) = a.checked_div(b) {
                return Some(Self::from_small(r));
            }
        }
        Some(Self::from_big(self.to_big() / rhs.to_big()))
    }

    pub fn recip(&self) -> Option<Rat> {
        Rat::one().checked_div(self)
    }

    /// Exact square root when both numerator and denominator are perfect
    /// squares; `None` otherwise (including negative input).
    pub fn sqrt_exact(&self) -> Option<Rat> {
        if self.is_negative() {
            return None;
        }
        let (n, d) = (self.numer(), self.denom());
        let (rn, rd) = (n.sqrt(), d.sqrt());
        if &rn * &rn == n && &rd * &rd == d {
            Rat::from_bigints(rn, rd)
        } else {
            None
        }
    }

    pub fn floor(&self) -> BigInt {
        self.to_big().floor().to_integer()
    }

    pub fn min(self, other: Rat) -> Rat {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Rat) -> Rat {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Nearest `f64`. Only for reporting; never feed it back into the simulation.
    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(r) => *r.numer() as f64 / *r.denom() as f64,
            Repr::Big(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Approximate base-2 logarithm that stays accurate for values far outside
    /// the `f64` range.
    pub fn log2_approx(&self) -> f64 {
        let n = self.numer();
        let d = self.denom();
        let shift_n = n.bits().saturating_sub(60) as i64;
        let shift_d = d.bits().saturating_sub(60) as i64;
        let nf = (n >> shift_n as usize).to_f64().unwrap_or(f64::NAN);
        let df = (d >> shift_d as usize).to_f64().unwrap_or(f64::NAN);
        libm::log2(nf) - libm::log2(df) + (shift_n - shift_d) as f64
    }
}

impl Default for Rat {
    fn default() -> Self {
        Rat::zero()
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.numer() == b.numer() && a.denom() == b.denom(),
            (Repr::Big(a), Repr::Big(b)) => a.numer() == b.numer() && a.denom() == b.denom(),
            _ => false,
        }
    }
}

impl Eq for Rat {}

impl Hash for Rat {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(r) => {
                r.numer().hash(state);
                r.denom().hash(state);
            }
            Repr::Big(r) => {
                r.numer().hash(state);
                r.denom().hash(state);
            }
        }
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            // Denominators are positive, so cross-multiplying preserves the order.
            (Repr::Small(a), Repr::Small(b)) => {
                (*a.numer() as i128 * *b.denom() as i128).cmp(&(*b.numer() as i128 * *a.denom() as i128))
            }
            _ => (self.numer() * other.denom()).cmp(&(other.numer() * self.denom())),
        }
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn add_ref(a: &Rat, b: &Rat) -> Rat {
    if let (Repr::Small(x), Repr::Small(y)) = (&a.0, &b.0) {
        if let Some(r) = x.checked_add(y) {
            return Rat::from_small(r);
        }
    }
    Rat::from_big(a.to_big() + b.to_big())
}

fn sub_ref(a: &Rat, b: &Rat) -> Rat {
    if let (Repr::Small(x), Repr::Small(y)) = (&a.0, &b.0) {
        if let Some(r) = x.checked_sub(y) {
            return Rat::from_small(r);
        }
    }
    Rat::from_big(a.to_big() - b.to_big())
}

fn mul_ref(a: &Rat, b: &Rat) -> Rat {
    if let (Repr::Small(x), Repr::Small(y)) = (&a.0, &b.0) {
        if let Some(r) = x.checked_mul(y) {
            return Rat::from_small(r);
        }
    }
    Rat::from_big(a.to_big() * b.to_big())
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $f:ident) => {
        impl $tr<&Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                $f(self, rhs)
            }
        }
        impl $tr<Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                $f(&self, &rhs)
            }
        }
        impl $tr<&Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &Rat) -> Rat {
                $f(&self, rhs)
            }
        }
        impl $tr<Rat> for &Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                $f(self, &rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_ref);
forward_binop!(Sub, sub, sub_ref);
forward_binop!(Mul, mul, mul_ref);

fn div_ref(a: &Rat, b: &Rat) -> Rat {
    a.checked_div(b).expect("Rat division by zero")
}

// Panics on a zero divisor; use `checked_div` where the divisor is not
// known to be nonzero.
forward_binop!(Div, div, div_ref);

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, rhs: &Rat) {
        *self = add_ref(self, rhs);
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, rhs: &Rat) {
        *self = sub_ref(self, rhs);
    }
}

impl MulAssign<&Rat> for Rat {
    fn mul_assign(&mut self, rhs: &Rat) {
        *self = mul_ref(self, rhs);
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match &self.0 {
            Repr::Small(r) => Rat::from_small(-*r),
            Repr::Big(r) => Rat::from_big(-r.clone()),
        }
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        -&self
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}

impl Sum<Rat> for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::from_int(n)
    }
}

impl From<BigRational> for Rat {
    fn from(r: BigRational) -> Self {
        Rat::from_big(r)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Repr::Small(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Repr::Big(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Repr::Big(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_int(s: &str, original: &str) -> Result<BigInt, ParseRatError> {
    let err = |reason| ParseRatError { input: original.into(), reason };
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err("expected decimal digits"));
    }
    s.parse::<BigInt>().map_err(|_| err("expected decimal digits"))
}

impl FromStr for Rat {
    type Err = ParseRatError;

    /// Accepts `p`, `p/q` and finite decimals such as `-0.125`.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let s = input.trim();
        let err = |reason| ParseRatError { input: input.into(), reason };
        if let Some((p, q)) = s.split_once('/') {
            let p = parse_int(p.trim(), input)?;
            let q = parse_int(q.trim(), input)?;
            if q.is_zero() {
                return Err(err("zero denominator"));
            }
            return Ok(Rat::from_big(BigRational::new(p, q)));
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err("malformed decimal fraction"));
            }
            let negative = int_part.starts_with('-');
            let int_digits = int_part.strip_prefix(['+', '-']).unwrap_or(int_part);
            let whole = if int_digits.is_empty() {
                BigInt::zero()
            } else {
                parse_int(int_digits, input)?
            };
            let scale = num_traits::pow(BigInt::from(10u8), frac_part.len());
            let frac: BigInt = frac_part.parse().map_err(|_| err("malformed decimal fraction"))?;
            let magnitude = BigRational::new(whole * &scale + frac, scale);
            return Ok(Rat::from_big(if negative { -magnitude } else { magnitude }));
        }
        Ok(Rat::from_big(BigRational::from_integer(parse_int(s, input)?)))
    }
}

#[cfg(feature = "serde")]
mod serde_impl {
    use super::Rat;
    use alloc::string::ToString;
    use core::fmt;
    use serde::de::{self, Visitor};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    impl Serialize for Rat {
        fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
            serializer.serialize_str(&self.to_string())
        }
    }

    struct RatVisitor;

    impl Visitor<'_> for RatVisitor {
        type Value = Rat;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("an exact rational as a \"p/q\" or decimal string, or an integer")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
            v.parse().map_err(E::custom)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
            Ok(Rat::from_int(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
            i64::try_from(v)
                .map(Rat::from_int)
                .map_err(|_| E::custom("integer out of range; quote it as a string"))
        }

        fn visit_f64<E: de::Error>(self, _v: f64) -> Result<Rat, E> {
            Err(E::custom(
                "floating-point numbers are not exact; write the value as a \"p/q\" or decimal string",
            ))
        }
    }

    impl<'de> Deserialize<'de> for Rat {
        fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
            deserializer.deserialize_any(RatVisitor)
        }
    }
}
