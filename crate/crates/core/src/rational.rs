//! Exact rational numbers used for every length, mass and cost.
//!
//! `Q` wraps `Ratio<i128>` and checks every operation for overflow. All masses
//! produced by the builtin algorithms live on a bounded denominator grid, so
//! overflow means a plugin produced an unbounded denominator; we panic with a
//! clear message instead of silently wrapping.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Q(Ratio<i128>);

impl Q {
    pub const ZERO: Q = Q(Ratio::new_raw(0, 1));
    pub const ONE: Q = Q(Ratio::new_raw(1, 1));

    pub fn new(numer: i128, denom: i128) -> Q {
        assert!(denom != 0, "zero denominator");
        Q(Ratio::new(numer, denom))
    }

    pub fn int(v: i128) -> Q {
        Q(Ratio::from_integer(v))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn floor(&self) -> i128 {
        self.0.floor().to_integer()
    }

    pub fn ceil(&self) -> i128 {
        self.0.ceil().to_integer()
    }

    pub fn min(self, other: Q) -> Q {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Q) -> Q {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn pow(self, exp: u32) -> Q {
        let mut acc = Q::ONE;
        for _ in 0..exp {
            acc = acc * self;
        }
        acc
    }

    /// Largest multiple of `quantum` that is `<= self`.
    pub fn floor_to(self, quantum: Q) -> Q {
        assert!(quantum.is_positive(), "quantum must be positive");
        Q::int((self / quantum).floor()) * quantum
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn ratio(&self) -> Ratio<i128> {
        self.0
    }
}

fn overflow(op: &str, a: Q, b: Q) -> ! {
    panic!("rational overflow in {a} {op} {b}")
}

impl Add for Q {
    type Output = Q;
    fn add(self, rhs: Q) -> Q {
        match self.0.checked_add(&rhs.0) {
            Some(v) => Q(v),
            None => overflow("+", self, rhs),
        }
    }
}

impl Sub for Q {
    type Output = Q;
    fn sub(self, rhs: Q) -> Q {
        match self.0.checked_sub(&rhs.0) {
            Some(v) => Q(v),
            None => overflow("-", self, rhs),
        }
    }
}

impl Mul for Q {
    type Output = Q;
    fn mul(self, rhs: Q) -> Q {
        match self.0.checked_mul(&rhs.0) {
            Some(v) => Q(v),
            None => overflow("*", self, rhs),
        }
    }
}

impl Div for Q {
    type Output = Q;
    fn div(self, rhs: Q) -> Q {
        assert!(!rhs.is_zero(), "division by zero");
        match self.0.checked_div(&rhs.0) {
            Some(v) => Q(v),
            None => overflow("/", self, rhs),
        }
    }
}

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        Q(-self.0)
    }
}

impl AddAssign for Q {
    fn add_assign(&mut self, rhs: Q) {
        *self = *self + rhs;
    }
}

impl SubAssign for Q {
    fn sub_assign(&mut self, rhs: Q) {
        *self = *self - rhs;
    }
}

impl Sum for Q {
    fn sum<I: Iterator<Item = Q>>(iter: I) -> Q {
        iter.fold(Q::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Q> for Q {
    fn sum<I: Iterator<Item = &'a Q>>(iter: I) -> Q {
        iter.fold(Q::ZERO, |a, b| a + *b)
    }
}

impl PartialOrd for Q {
    fn partial_cmp(&self, other: &Q) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Q {
    fn cmp(&self, other: &Q) -> Ordering {
        // Cross-multiplication in i128 can overflow for large operands; compare
        // through the integer and fractional parts like `Ratio` does.
        let (a, b) = (self.0, other.0);
        let (aq, ar) = a.numer().div_mod_floor(a.denom());
        let (bq, br) = b.numer().div_mod_floor(b.denom());
        match aq.cmp(&bq) {
            Ordering::Equal => {}
            ord => return ord,
        }
        if ar == 0 || br == 0 {
            return ar.cmp(&br);
        }
        // compare ar/ad with br/bd  <=>  bd/br with ad/ar (reversed)
        Q(Ratio::new_raw(*b.denom(), br)).cmp(&Q(Ratio::new_raw(*a.denom(), ar)))
    }
}

impl From<i128> for Q {
    fn from(v: i128) -> Q {
        Q::int(v)
    }
}

impl From<u64> for Q {
    fn from(v: u64) -> Q {
        Q::int(v as i128)
    }
}

impl From<u32> for Q {
    fn from(v: u32) -> Q {
        Q::int(v as i128)
    }
}

/// Serialized as `p/q`, or `p` for integers.
impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Q {
    type Err = Error;

    fn from_str(s: &str) -> Result<Q, Error> {
        let bad = || Error::Parse(format!("invalid rational {s:?}"));
        let s = s.trim();
        match s.split_once('/') {
            Some((p, q)) => {
                let p: i128 = p.trim().parse().map_err(|_| bad())?;
                let q: i128 = q.trim().parse().map_err(|_| bad())?;
                if q == 0 {
                    return Err(bad());
                }
                Ok(Q::new(p, q))
            }
            None => match s.split_once('.') {
                // exact decimal: "0.25" is 1/4
                Some((int, frac)) => {
                    let neg = int.starts_with('-');
                    let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
                    if frac.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) || frac.len() > 30 {
                        return Err(bad());
                    }
                    let p: i128 = digits.parse().map_err(|_| bad())?;
                    let q = 10i128.checked_pow(frac.len() as u32).ok_or_else(bad)?;
                    Ok(Q::new(if neg { -p } else { p }, q))
                }
                None => s.parse::<i128>().map(Q::int).map_err(|_| bad()),
            },
        }
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Q, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
