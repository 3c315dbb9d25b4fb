//! Scalar backends for opinion values.
//!
//! Two interchangeable backends implement [`Scalar`]:
//!
//! * [`Rational`]: arbitrary-precision rationals, always reduced with a
//!   positive denominator. Used wherever exact distance ties or exact fixed
//!   points must be certified.
//! * [`Float`]: IEEE-754 binary64. Used for Monte Carlo runs.
//!
//! **Ties on the float backend are decided by exact binary comparison, with no
//! epsilon.** Ties between independently drawn floats have probability zero;
//! configurations that rely on ties must be built on the rational backend.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("empty aggregation")]
    EmptyAggregation,
    #[error("cannot parse {0:?} as a number")]
    Parse(String),
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("mixed numeric backends: {0}")]
    MixedBackends(String),
}

/// Which arithmetic a value or configuration uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    #[default]
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Float => f.write_str("float"),
        }
    }
}

/// An opinion value. Comparison is a total order.
pub trait Scalar:
    Clone + Ord + fmt::Debug + fmt::Display + Send + Sync + Serialize + 'static
{
    const BACKEND: Backend;

    fn zero() -> Self;
    /// `num / den`; `den` must be nonzero.
    fn from_ratio(num: i64, den: i64) -> Self;
    /// `mantissa / 2^bits`, exact on both backends for `mantissa < 2^53`.
    fn from_dyadic(mantissa: u64, bits: u32) -> Self;
    /// Nearest float for `Float`; the exact binary value for `Rational`.
    fn from_f64(x: f64) -> Result<Self, NumericError>;
    fn to_f64(&self) -> f64;

    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div_count(&self, count: usize) -> Self;

    /// Mean of a non-empty slice. The float backend clamps the rounded result
    /// into `[min, max]` of the inputs so averaging stays a convex combination.
    fn mean_nonempty(values: &[Self]) -> Self;

    /// Accepts `p/q`, integers and decimal text such as `0.4` or `1e-3`.
    fn parse_text(text: &str) -> Result<Self, NumericError>;
    /// `p/q` for rationals, 17 significant digits for floats.
    fn to_text(&self) -> String;

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }

    /// Orders like `|self - other|`; only used to rank distances.
    type DistanceKey: Ord;
    fn distance_key(&self, other: &Self) -> Self::DistanceKey;
}

pub fn mean_of<S: Scalar>(values: &[S]) -> Result<S, NumericError> {
    if values.is_empty() {
        return Err(NumericError::EmptyAggregation);
    }
    Ok(S::mean_nonempty(values))
}

pub fn abs_diff<S: Scalar>(a: &S, b: &S) -> S {
    if a >= b {
        a.sub(b)
    } else {
        b.sub(a)
    }
}

// ---------------------------------------------------------------------------
// Exact backend
// ---------------------------------------------------------------------------

/// Arbitrary-precision rational in canonical form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rational(BigRational);

// Denominators are positive in canonical form, so cross-multiplication
// orders correctly and beats the division-based default on small operands.
impl Ord for Rational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if self.0.denom() == other.0.denom() {
            return self.0.numer().cmp(other.0.numer());
        }
        (self.0.numer() * other.0.denom()).cmp(&(other.0.numer() * self.0.denom()))
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Rational {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn integer(value: i64) -> Self {
        Rational(BigRational::from_integer(value.into()))
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    pub fn into_big(self) -> BigRational {
        self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// The rational with the smallest denominator in the closed interval
    /// `[lo, hi]` (continued-fraction descent).
    pub fn simplest_between(lo: &Rational, hi: &Rational) -> Rational {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        if !lo.0.is_positive() && !hi.0.is_negative() {
            return Rational::zero();
        }
        if hi.0.is_negative() {
            let r = simplest_nonneg(&-hi.0.clone(), &-lo.0.clone());
            return Rational(-r);
        }
        Rational(simplest_nonneg(&lo.0, &hi.0))
    }
}

fn simplest_nonneg(lo: &BigRational, hi: &BigRational) -> BigRational {
    let fl = lo.floor();
    if &fl == lo {
        return fl;
    }
    let next = &fl + BigRational::one();
    if &next <= hi {
        return next;
    }
    // lo and hi both lie strictly inside (fl, fl + 1)
    let inner = simplest_nonneg(&(hi - &fl).recip(), &(lo - &fl).recip());
    fl + inner.recip()
}

impl From<BigRational> for Rational {
    fn from(value: BigRational) -> Self {
        Rational(value)
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl FromStr for Rational {
    type Err = NumericError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rational::parse_text(s)
    }
}

/// Exact value of a decimal literal (`-12.5e-3`).
fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = all_digits.parse().ok()?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// `|a - b|` as an unreduced fraction with positive denominator.
#[derive(Debug, Clone)]
pub struct RawDistance {
    num: BigInt,
    den: BigInt,
}

impl Ord for RawDistance {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if self.den == other.den {
            return self.num.cmp(&other.num);
        }
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl PartialOrd for RawDistance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for RawDistance {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for RawDistance {}

impl Scalar for Rational {
    const BACKEND: Backend = Backend::Exact;

    type DistanceKey = RawDistance;

    fn distance_key(&self, other: &Self) -> RawDistance {
        let (a, b) = (&self.0, &other.0);
        let (num, den) = if a.denom() == b.denom() {
            (a.numer() - b.numer(), a.denom().clone())
        } else {
            (
                a.numer() * b.denom() - b.numer() * a.denom(),
                a.denom() * b.denom(),
            )
        };
        RawDistance {
            num: num.abs(),
            den,
        }
    }

    fn zero() -> Self {
        Rational(BigRational::zero())
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(num, den)
    }

    fn from_dyadic(mantissa: u64, bits: u32) -> Self {
        Rational::new(mantissa, BigInt::one() << bits)
    }

    fn from_f64(x: f64) -> Result<Self, NumericError> {
        BigRational::from_float(x)
            .map(Rational)
            .ok_or(NumericError::NonFinite(x))
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    fn add(&self, other: &Self) -> Self {
        Rational(&self.0 + &other.0)
    }

    fn sub(&self, other: &Self) -> Self {
        Rational(&self.0 - &other.0)
    }

    fn mul(&self, other: &Self) -> Self {
        Rational(&self.0 * &other.0)
    }

    fn neg(&self) -> Self {
        Rational(-self.0.clone())
    }

    fn div_count(&self, count: usize) -> Self {
        Rational(&self.0 / BigRational::from_integer(BigInt::from(count)))
    }

    fn mean_nonempty(values: &[Self]) -> Self {
        // accumulate unreduced and normalize once
        let (mut num, mut den) = (BigInt::zero(), BigInt::one());
        for v in values {
            let (n, d) = (v.0.numer(), v.0.denom());
            if *d == den {
                num += n;
            } else {
                num = num * d + n * &den;
                den *= d;
            }
        }
        Rational(BigRational::new(num, den * BigInt::from(values.len())))
    }

    fn parse_text(text: &str) -> Result<Self, NumericError> {
        let t = text.trim();
        let err = || NumericError::Parse(text.to_string());
        if let Some((p, q)) = t.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| err())?;
            let q: BigInt = q.trim().parse().map_err(|_| err())?;
            if q.is_zero() {
                return Err(err());
            }
            return Ok(Rational(BigRational::new(p, q)));
        }
        parse_decimal(t).map(Rational).ok_or_else(err)
    }

    fn to_text(&self) -> String {
        format!("{}/{}", self.0.numer(), self.0.denom())
    }
}

impl Serialize for Rational {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let literal = NumberLiteral::deserialize(deserializer)?;
        literal.to_scalar().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Float backend
// ---------------------------------------------------------------------------

/// Finite binary64 value. `-0.0` is normalized to `+0.0` so that equality and
/// the total order agree.
#[derive(Clone, Copy)]
pub struct Float(f64);

impl Float {
    pub fn new(x: f64) -> Result<Self, NumericError> {
        if x.is_finite() {
            Ok(Float::normalized(x))
        } else {
            Err(NumericError::NonFinite(x))
        }
    }

    #[inline]
    fn normalized(x: f64) -> Self {
        Float(if x == 0.0 { 0.0 } else { x })
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Float {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Float {}

impl PartialOrd for Float {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Float {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::hash::Hash for Float {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state)
    }
}

impl fmt::Debug for Float {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Float {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Float {
    type Err = NumericError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Float::parse_text(s)
    }
}

/// `%.17g`-style rendering: 17 significant digits, trailing zeros trimmed,
/// scientific notation outside `1e-5 <= |x| < 1e17`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_fraction(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl Scalar for Float {
    const BACKEND: Backend = Backend::Float;

    type DistanceKey = Float;

    fn distance_key(&self, other: &Self) -> Float {
        abs_diff(self, other)
    }

    fn zero() -> Self {
        Float(0.0)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Float::normalized(num as f64 / den as f64)
    }

    fn from_dyadic(mantissa: u64, bits: u32) -> Self {
        Float::normalized(mantissa as f64 * 2f64.powi(-(bits as i32)))
    }

    fn from_f64(x: f64) -> Result<Self, NumericError> {
        Float::new(x)
    }

    fn to_f64(&self) -> f64 {
        self.0
    }

    #[inline]
    fn add(&self, other: &Self) -> Self {
        Float::normalized(self.0 + other.0)
    }

    #[inline]
    fn sub(&self, other: &Self) -> Self {
        Float::normalized(self.0 - other.0)
    }

    fn mul(&self, other: &Self) -> Self {
        Float::normalized(self.0 * other.0)
    }

    fn neg(&self) -> Self {
        Float::normalized(-self.0)
    }

    fn div_count(&self, count: usize) -> Self {
        Float::normalized(self.0 / count as f64)
    }

    fn mean_nonempty(values: &[Self]) -> Self {
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            sum += v.0;
            lo = lo.min(v.0);
            hi = hi.max(v.0);
        }
        Float::normalized((sum / values.len() as f64).clamp(lo, hi))
    }

    fn parse_text(text: &str) -> Result<Self, NumericError> {
        let t = text.trim();
        if t.contains('/') {
            let r = Rational::parse_text(t)?;
            return Float::new(r.to_f64());
        }
        let x: f64 = t
            .parse()
            .map_err(|_| NumericError::Parse(text.to_string()))?;
        Float::new(x)
    }

    fn to_text(&self) -> String {
        format_g17(self.0)
    }
}

impl Serialize for Float {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Float {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let literal = NumberLiteral::deserialize(deserializer)?;
        literal.to_scalar().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Backend-neutral literals
// ---------------------------------------------------------------------------

/// A number as written in a JSON document: either a bare JSON number or a
/// string holding `p/q` or decimal text. Conversion to a backend happens
/// later, so the same document can drive either backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberLiteral {
    Number(f64),
    Text(String),
}

impl NumberLiteral {
    /// Converts to the requested backend. Bare JSON numbers convert to the
    /// exact backend through their shortest decimal rendering, so `0.4`
    /// becomes `2/5` rather than the binary approximation.
    pub fn to_scalar<S: Scalar>(&self) -> Result<S, NumericError> {
        match self {
            NumberLiteral::Number(x) => {
                if !x.is_finite() {
                    return Err(NumericError::NonFinite(*x));
                }
                S::parse_text(&format!("{x}"))
            }
            NumberLiteral::Text(t) => S::parse_text(t),
        }
    }

    pub fn is_text(&self) -> bool {
        matches!(self, NumberLiteral::Text(_))
    }
}

impl From<f64> for NumberLiteral {
    fn from(x: f64) -> Self {
        NumberLiteral::Number(x)
    }
}

impl From<&str> for NumberLiteral {
    fn from(s: &str) -> Self {
        NumberLiteral::Text(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_of(&[q("1/2"), q("1/2"), q("1/2")]).unwrap(), q("1/2"));
        assert_eq!(mean_of(&[q("0"), q("1"), q("1/2")]).unwrap(), q("1/2"));
        let m = mean_of(&[Float::new(0.0).unwrap(), Float::new(0.5).unwrap()]).unwrap();
        assert_eq!(m.get(), 0.25);
    }

    #[test]
    fn mean_of_empty_is_an_error() {
        assert_eq!(
            mean_of::<Rational>(&[]),
            Err(NumericError::EmptyAggregation)
        );
        assert_eq!(
            mean_of::<Float>(&[]).unwrap_err().to_string(),
            "empty aggregation"
        );
    }

    #[test]
    fn abs_diff_examples() {
        assert_eq!(abs_diff(&q("3"), &q("1")), q("2"));
        assert_eq!(abs_diff(&q("2/5"), &q("3/5")), q("1/5"));
        assert!(abs_diff(&q("7/9"), &q("7/9")).is_zero());
        let x = Float::new(0.3).unwrap();
        assert!(abs_diff(&x, &x).is_zero());
    }

    #[test]
    fn rationals_are_canonical() {
        let a = Rational::new(4, -6);
        assert_eq!(a.to_text(), "-2/3");
        assert_eq!(a, q("-2/3"));
        assert_eq!(q("0.4"), q("2/5"));
        assert_eq!(q("1e-3"), q("1/1000"));
        assert_eq!(q("-1.25E1"), q("-25/2"));
        assert!(Rational::parse_text("1/0").is_err());
        assert!(Rational::parse_text("abc").is_err());
        assert!(Rational::parse_text(".").is_err());
    }

    #[test]
    fn float_zero_signs_agree() {
        let pz = Float::new(0.0).unwrap();
        let nz = Float::new(-0.0).unwrap();
        assert_eq!(pz, nz);
        assert_eq!(pz.cmp(&nz), Ordering::Equal);
        assert_eq!(pz.neg(), pz);
        assert!(Float::new(f64::NAN).is_err());
    }

    #[test]
    fn float_mean_stays_inside_inputs() {
        let v = Float::new(0.1).unwrap();
        let vals = vec![v; 7];
        assert_eq!(Float::mean_nonempty(&vals), v);
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(0.4), "0.40000000000000002");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(1e-9), "1.0000000000000001e-09");
        assert_eq!(format_g17(0.25).parse::<f64>().unwrap(), 0.25);
    }

    #[test]
    fn simplest_rational_in_interval() {
        let s = Rational::simplest_between(&q("0.3999999999"), &q("0.4000000001"));
        assert_eq!(s, q("2/5"));
        assert_eq!(Rational::simplest_between(&q("-1/3"), &q("1/7")), q("0"));
        assert_eq!(
            Rational::simplest_between(&q("-0.61"), &q("-0.59")),
            q("-3/5")
        );
        assert_eq!(Rational::simplest_between(&q("7/3"), &q("7/3")), q("7/3"));
    }

    #[test]
    fn literals_route_to_backends() {
        let lit = NumberLiteral::Number(0.4);
        assert_eq!(lit.to_scalar::<Rational>().unwrap(), q("2/5"));
        assert_eq!(lit.to_scalar::<Float>().unwrap().get(), 0.4);
        let text = NumberLiteral::from("3/5");
        assert_eq!(text.to_scalar::<Float>().unwrap().get(), 0.6);
    }

    proptest! {
        #[test]
        fn distance_key_orders_like_abs_diff(
            v in prop::collection::vec((-200i64..200, 1i64..30), 3),
        ) {
            let q: Vec<Rational> = v.iter().map(|&(p, d)| Rational::new(p, d)).collect();
            let (a, b, c) = (&q[0], &q[1], &q[2]);
            prop_assert_eq!(
                a.distance_key(c).cmp(&b.distance_key(c)),
                abs_diff(a, c).cmp(&abs_diff(b, c))
            );
        }

        #[test]
        fn rational_order_matches_big_rational(p in -500i64..500, d in 1i64..40, r in -500i64..500, e in 1i64..40) {
            let (x, y) = (Rational::new(p, d), Rational::new(r, e));
            prop_assert_eq!(x.cmp(&y), x.as_big().cmp(y.as_big()));
        }

        #[test]
        fn exact_mean_matches_reduced_sum(v in prop::collection::vec((-200i64..200, 1i64..30), 1..12)) {
            let q: Vec<Rational> = v.iter().map(|&(p, d)| Rational::new(p, d)).collect();
            let sum = q.iter().fold(BigRational::zero(), |acc, x| acc + x.as_big());
            let expected = sum / BigRational::from_integer(BigInt::from(q.len()));
            let mean = Rational::mean_nonempty(&q);
            prop_assert_eq!(mean.as_big(), &expected);
        }

        #[test]
        fn rational_text_round_trip(p in -10_000i64..10_000, d in 1i64..10_000) {
            let r = Rational::new(p, d);
            let back: Rational = r.to_text().parse().unwrap();
            prop_assert_eq!(&back, &r);
            let json = serde_json::to_string(&r).unwrap();
            let from_json: Rational = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(from_json, r);
        }

        #[test]
        fn g17_round_trips_floats(x in -1e6f64..1e6) {
            let text = format_g17(x);
            prop_assert_eq!(text.parse::<f64>().unwrap(), x);
        }

        #[test]
        fn abs_diff_is_symmetric(a in -1000i64..1000, b in -1000i64..1000, d in 1i64..50) {
            let (x, y) = (Rational::new(a, d), Rational::new(b, d));
            prop_assert_eq!(abs_diff(&x, &y), abs_diff(&y, &x));
            prop_assert!(abs_diff(&x, &y) >= Rational::zero());
            let (fx, fy) = (Float::from_ratio(a, d), Float::from_ratio(b, d));
            prop_assert_eq!(abs_diff(&fx, &fy), abs_diff(&fy, &fx));
        }

        #[test]
        fn mean_of_copies_is_exact(p in -1000i64..1000, d in 1i64..1000, k in 1usize..30) {
            let v = Rational::new(p, d);
            prop_assert_eq!(mean_of(&vec![v.clone(); k]).unwrap(), v);
        }
    }
}
