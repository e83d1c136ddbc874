//! Guaranteed-correct decisions about `exp` and `ln` at a handful of points.
//!
//! The only real-valued steps in the whole crate are `b = ceil(exp(3 rho))`,
//! `i_h = floor(sqrt(ln h))` and `ln(b) / 3`. They are decided here with
//! rigorous interval bounds on the Taylor series of `exp`, evaluated in
//! big rationals, so no floating-point rounding can flip an integer result.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::rational::Q;

fn big(q: Q) -> BigRational {
    BigRational::new(BigInt::from(q.numer()), BigInt::from(q.denom()))
}

/// Lower/upper bounds on `exp(x)` for `x >= 0`, refined term by term until
/// `decide` returns `Some`.
fn exp_refine<T>(x: &BigRational, mut decide: impl FnMut(&BigRational, &BigRational) -> Option<T>) -> T {
    assert!(!x.is_negative(), "exp bounds are only needed for x >= 0");
    let two = BigRational::from_integer(BigInt::from(2));
    let mut sum = BigRational::zero();
    let mut term = BigRational::one();
    let mut n: u64 = 0;
    loop {
        sum += &term;
        n += 1;
        term = &term * x / BigRational::from_integer(BigInt::from(n));
        // Once n > 2x every later term at most halves, so the tail is < 2 * term.
        if BigRational::from_integer(BigInt::from(n)) > x * &two {
            let hi = &sum + &term * &two;
            if let Some(answer) = decide(&sum, &hi) {
                return answer;
            }
        }
        assert!(n < 100_000, "exp series failed to converge");
    }
}

/// Compares `exp(x)` against the integer `n`.
pub fn exp_cmp_int(x: Q, n: u128) -> Ordering {
    if x.is_zero() {
        return 1u128.cmp(&n);
    }
    let x = big(x);
    let target = BigRational::from_integer(BigInt::from(n));
    exp_refine(&x, |lo, hi| {
        if *lo > target {
            Some(Ordering::Greater)
        } else if *hi < target {
            Some(Ordering::Less)
        } else {
            None
        }
    })
}

/// `ceil(exp(x))` for `x >= 0`.
pub fn ceil_exp(x: Q) -> u128 {
    let guess = x.to_f64().exp().ceil();
    let mut n = if guess.is_finite() && guess >= 1.0 { guess as u128 } else { 1 };
    // smallest n with exp(x) <= n
    while exp_cmp_int(x, n) == Ordering::Greater {
        n += 1;
    }
    while n > 1 && exp_cmp_int(x, n - 1) != Ordering::Greater {
        n -= 1;
    }
    n
}

/// `floor(sqrt(ln h))`, i.e. the largest `i` with `exp(i^2) <= h`.
pub fn floor_sqrt_ln(h: u128) -> u32 {
    assert!(h >= 1);
    let mut i: u32 = 0;
    while exp_cmp_int(Q::int(((i + 1) * (i + 1)) as i128), h) != Ordering::Greater {
        i += 1;
    }
    i
}

/// A rational `r` with `exp(r) <= n` and `ln(n) - r < 10^-12`.
pub fn ln_lower_bound(n: u128) -> Q {
    assert!(n >= 1);
    if n == 1 {
        return Q::ZERO;
    }
    let scale: i128 = 1_000_000_000_000;
    let mut num = ((n as f64).ln() * scale as f64).floor() as i128;
    while exp_cmp_int(Q::new(num + 1, scale), n) != Ordering::Greater {
        num += 1;
    }
    while exp_cmp_int(Q::new(num, scale), n) == Ordering::Greater {
        num -= 1;
    }
    Q::new(num, scale)
}

fn sig_digits(v: &BigRational, sig: usize) -> String {
    if v.is_zero() {
        return "0".to_string();
    }
    let mut exp10: i64 = v.to_f64().map(|f| f.abs().log10().floor() as i64).unwrap_or(0);
    let ten = BigInt::from(10);
    loop {
        let shift = sig as i64 - 1 - exp10;
        let scaled = if shift >= 0 {
            v * BigRational::from_integer(ten.pow(shift as u32))
        } else {
            v / BigRational::from_integer(ten.pow((-shift) as u32))
        };
        let digits = scaled.round().to_integer().to_string();
        if digits.len() > sig {
            exp10 += 1;
            continue;
        }
        if digits.len() < sig {
            exp10 -= 1;
            continue;
        }
        let point = (exp10 + 1) as i64;
        return if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), digits)
        } else if point as usize >= digits.len() {
            format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
        } else {
            format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
        };
    }
}

/// `exp(x)` printed with `sig` significant digits (informational only).
pub fn exp_decimal(x: Q, sig: usize) -> String {
    let x = big(x);
    let tol = BigRational::new(BigInt::one(), BigInt::from(10).pow(sig as u32 + 12));
    let mid = exp_refine(&x, |lo, hi| {
        if (hi - lo) / lo < tol {
            Some((lo + hi) / BigRational::from_integer(BigInt::from(2)))
        } else {
            None
        }
    });
    sig_digits(&mid, sig)
}

/// `2 atanh(p/q) * scale` in fixed point, for `0 <= p/q <= 1/3`.
fn two_atanh_fixed(p: &BigInt, q: &BigInt, scale: &BigInt) -> BigInt {
    let p2 = p * p;
    let q2 = q * q;
    let mut pow = scale * p / q;
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    while !pow.is_zero() {
        sum += &pow / BigInt::from(2 * k + 1);
        pow = pow * &p2 / &q2;
        k += 1;
    }
    sum * 2
}

/// `ln(n) / divisor` printed with `sig` significant digits (informational only).
pub fn ln_decimal(n: u128, divisor: u32, sig: usize) -> String {
    if n == 1 {
        return "0".to_string();
    }
    // n = 2^m r with 1 <= r < 2; ln n = m ln 2 + 2 atanh((r-1)/(r+1))
    let m = 127 - n.leading_zeros();
    let scale = BigInt::from(10).pow(sig as u32 + 20);
    let ln2 = two_atanh_fixed(&BigInt::one(), &BigInt::from(3), &scale);
    let two_m = BigInt::one() << m;
    let n = BigInt::from(n);
    let ln_r = two_atanh_fixed(&(&n - &two_m), &(&n + &two_m), &scale);
    let ln = ln2 * m + ln_r;
    let v = BigRational::new(ln, scale * BigInt::from(divisor));
    sig_digits(&v, sig)
}
