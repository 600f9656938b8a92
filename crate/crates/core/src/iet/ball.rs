//! Fixed-point balls `(mid ± rad) · 2^-bits` over big integers.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    mid: BigInt,
    rad: BigUint,
    bits: u32,
}

fn round_div(num: &BigInt, den: &BigInt) -> (BigInt, bool) {
    let (q, r) = num.div_mod_floor(den);
    if r.is_zero() {
        return (q, true);
    }
    let twice = &r * 2u32;
    if twice.abs() >= den.abs() {
        (q + 1, false)
    } else {
        (q, false)
    }
}

fn ceil_div(num: &BigUint, den: &BigUint) -> BigUint {
    let (q, r) = num.div_rem(den);
    if r.is_zero() {
        q
    } else {
        q + 1u32
    }
}

impl Ball {
    pub fn exact_int(n: i64, bits: u32) -> Self {
        Ball {
            mid: BigInt::from(n) << bits,
            rad: BigUint::zero(),
            bits,
        }
    }

    pub fn from_rational(q: &BigRational, bits: u32) -> Self {
        let num = q.numer() << bits;
        let (mid, exact) = round_div(&num, q.denom());
        Ball {
            mid,
            rad: if exact { BigUint::zero() } else { BigUint::one() },
            bits,
        }
    }

    /// Ball containing every real within `radius` of `q`.
    pub fn with_radius(q: &BigRational, radius: &BigRational, bits: u32) -> Self {
        let mut b = Ball::from_rational(q, bits);
        let r = radius.abs() * BigRational::from_integer(BigInt::one() << bits);
        let r = r.ceil().to_integer().to_biguint().unwrap_or_default();
        b.rad += r;
        b
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn mid_rational(&self) -> BigRational {
        BigRational::new(self.mid.clone(), BigInt::one() << self.bits)
    }

    pub fn radius_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(self.rad.clone()), BigInt::one() << self.bits)
    }

    pub fn mid_f64(&self) -> f64 {
        ratio_f64(&self.mid, self.bits)
    }

    /// Upper bound on the radius as an `f64`.
    pub fn radius_f64(&self) -> f64 {
        let r = ratio_f64(&BigInt::from(self.rad.clone()), self.bits);
        if r == 0.0 && !self.rad.is_zero() {
            f64::MIN_POSITIVE
        } else {
            r * (1.0 + 1e-15)
        }
    }

    pub fn is_positive(&self) -> bool {
        self.mid.sign() == Sign::Plus && self.mid.magnitude() > &self.rad
    }

    /// Sign when the ball excludes zero.
    pub fn sign(&self) -> Option<Ordering> {
        if self.mid.magnitude() <= &self.rad {
            if self.mid.is_zero() && self.rad.is_zero() {
                return Some(Ordering::Equal);
            }
            return None;
        }
        Some(if self.mid.is_negative() {
            Ordering::Less
        } else {
            Ordering::Greater
        })
    }

    pub fn contains(&self, q: &BigRational) -> bool {
        let d = (self.mid_rational() - q).abs();
        d <= self.radius_rational()
    }

    fn align(&self, other: &Ball) {
        assert_eq!(self.bits, other.bits, "ball precision mismatch");
    }

    pub fn add(&self, other: &Ball) -> Ball {
        self.align(other);
        Ball {
            mid: &self.mid + &other.mid,
            rad: &self.rad + &other.rad,
            bits: self.bits,
        }
    }

    pub fn sub(&self, other: &Ball) -> Ball {
        self.align(other);
        Ball {
            mid: &self.mid - &other.mid,
            rad: &self.rad + &other.rad,
            bits: self.bits,
        }
    }

    pub fn scale(&self, k: i64) -> Ball {
        Ball {
            mid: &self.mid * k,
            rad: &self.rad * k.unsigned_abs(),
            bits: self.bits,
        }
    }

    /// Quotient; errors when the divisor ball touches zero.
    pub fn div(&self, other: &Ball) -> Result<Ball> {
        self.align(other);
        let d = other.mid.magnitude();
        if d <= &other.rad {
            return Err(Error::PrecisionExhausted { bits: self.bits });
        }
        let (mid, exact) = round_div(&(&self.mid << self.bits), &other.mid);
        // |a/b - m/d| <= (r_a d + r_b |m|) / (d (d - r_b)), all in units of 2^-bits.
        let dr = d - &other.rad;
        let num = (&self.rad * d + &other.rad * self.mid.magnitude()) << self.bits;
        let mut rad = ceil_div(&num, &(d * &dr));
        if !exact {
            rad += 1u32;
        }
        Ok(Ball {
            mid,
            rad,
            bits: self.bits,
        })
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Ball>, bits: u32) -> Ball {
        let mut acc = Ball::exact_int(0, bits);
        for b in items {
            acc = acc.add(b);
        }
        acc
    }

    /// Decimal rendering of the midpoint with enough digits for the precision.
    pub fn mid_decimal(&self) -> String {
        let digits = (self.bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1;
        decimal_string(&self.mid_rational(), digits)
    }

    pub fn radius_decimal(&self) -> String {
        let r = ratio_f64(&BigInt::from(self.rad.clone()), self.bits);
        if self.rad.is_zero() {
            "0".into()
        } else if r == 0.0 {
            format!("{:e}", f64::MIN_POSITIVE)
        } else {
            format!("{:e}", r * (1.0 + 1e-15))
        }
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {:.3e}", self.mid_f64(), self.radius_f64())
    }
}

fn ratio_f64(n: &BigInt, bits: u32) -> f64 {
    let shift = n.bits().saturating_sub(60);
    (n >> shift).to_f64().unwrap_or(0.0) * 2f64.powi(shift as i32 - bits as i32)
}

/// Truncated decimal expansion with `digits` fractional digits.
pub fn decimal_string(q: &BigRational, digits: usize) -> String {
    let neg = q.is_negative();
    let q = q.abs();
    let int = q.numer() / q.denom();
    let frac = q - BigRational::from_integer(int.clone());
    let scaled = (frac * BigRational::from_integer(BigInt::from(10u32).pow(digits as u32)))
        .to_integer();
    let mut s = format!("{}{}", if neg { "-" } else { "" }, int);
    if digits > 0 {
        let f = format!("{:0>width$}", scaled, width = digits);
        let f = f.trim_end_matches('0');
        if !f.is_empty() {
            s.push('.');
            s.push_str(f);
        }
    }
    s
}

/// Parses `[-]digits[.digits][e[-]digits]` exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::invalid(format!("not a decimal number: {s:?}"));
    let t = s.trim();
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{ip}{fp}");
    let n: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let e10 = exp - fp.len() as i32;
    let ten = BigInt::from(10u32);
    let mut q = if e10 >= 0 {
        BigRational::from_integer(n * ten.pow(e10 as u32))
    } else {
        BigRational::new(n, ten.pow((-e10) as u32))
    };
    if neg {
        q = -q;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn arithmetic_encloses_exact_values() {
        let a = Ball::from_rational(&rat(1, 3), 64);
        let b = Ball::from_rational(&rat(2, 7), 64);
        assert!(a.add(&b).contains(&rat(13, 21)));
        assert!(a.sub(&b).contains(&rat(1, 21)));
        assert!(a.scale(-5).contains(&rat(-5, 3)));
        assert!(a.div(&b).unwrap().contains(&rat(7, 6)));
        assert_eq!(a.sub(&b).sign(), Some(Ordering::Greater));
        assert_eq!(a.sub(&a).sign(), None);
    }

    #[test]
    fn decimals_round_trip() {
        assert_eq!(parse_decimal("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_decimal("-1.5e-2").unwrap(), rat(-3, 200));
        assert_eq!(parse_decimal("1e-70").unwrap().denom(), &BigInt::from(10u32).pow(70));
        assert!(parse_decimal("0.2.5").is_err());
        assert!(parse_decimal("").is_err());
        assert_eq!(decimal_string(&rat(1, 8), 5), "0.125");
        assert_eq!(decimal_string(&rat(-3, 2), 3), "-1.5");
        let b = Ball::from_rational(&rat(5, 8), 32);
        assert_eq!(b.mid_decimal(), "0.625");
    }
}
