//! Continued fractions `α = [a_1, a_2, …] = 1/(a_1 + 1/(a_2 + …))`.
//!
//! A [`ContinuedFraction`] is the single source of truth for a rotation
//! number. Digits are produced on demand from an explicit list, a periodic
//! rule or a seeded Gauss–Kuzmin sampler, and convergents are cached next
//! to them. Convergents use `p_0 = 0, q_0 = 1, p_{-1} = 1, q_{-1} = 0`, so
//! `p_1/q_1 = 1/a_1` and `q_1 = a_1`.
//!
//! Exact comparisons in `ℚ + ℤα` go through [`ContinuedFraction::sign_of`],
//! which brackets α between consecutive convergents until the sign of
//! `u + vα` is constant on the bracket.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{OnceLock, RwLock};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of digits `sign_of` may consume.
pub const DEFAULT_MAX_SIGN_DEPTH: usize = 10_000;

/// Where the digits of a continued fraction come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfSource {
    /// A finite list. Requests beyond its end fail with `DepthExhausted`.
    Explicit(Vec<BigInt>),
    /// `prefix` followed by `period` repeated forever.
    Periodic { prefix: Vec<BigInt>, period: Vec<BigInt> },
    /// Independent digits with `P(a = k) = log2(1 + 1/(k(k+2)))`.
    GaussKuzmin { seed: u64 },
}

/// The `n`-th convergent `p_n / q_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub index: usize,
    pub p: BigInt,
    pub q: BigInt,
}

impl Convergent {
    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.p.clone(), self.q.clone())
    }
}

impl fmt::Display for Convergent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

#[derive(Clone, Debug)]
struct Cache {
    digits: Vec<BigInt>,
    // p[n], q[n] for n >= 0
    p: Vec<BigInt>,
    q: Vec<BigInt>,
    sums: Vec<BigInt>,
    rng: Option<ChaCha8Rng>,
}

impl Cache {
    fn new(rng: Option<ChaCha8Rng>) -> Self {
        Cache {
            digits: Vec::new(),
            p: vec![BigInt::zero()],
            q: vec![BigInt::one()],
            sums: vec![BigInt::zero()],
            rng,
        }
    }

    fn push(&mut self, a: BigInt) {
        let n = self.digits.len();
        let (p_prev, q_prev) = if n == 0 {
            (BigInt::one(), BigInt::zero())
        } else {
            (self.p[n - 1].clone(), self.q[n - 1].clone())
        };
        let p = &a * &self.p[n] + p_prev;
        let q = &a * &self.q[n] + q_prev;
        let s = &self.sums[n] + &a;
        self.p.push(p);
        self.q.push(q);
        self.sums.push(s);
        self.digits.push(a);
    }
}

/// A continued fraction with lazily extended digits.
///
/// Extension takes an internal write lock, so a shared reference may be
/// used from several threads; pre-extending with [`ensure_depth`] avoids
/// lock contention in parallel sweeps.
///
/// [`ensure_depth`]: ContinuedFraction::ensure_depth
pub struct ContinuedFraction {
    source: CfSource,
    cache: RwLock<Cache>,
    max_sign_depth: usize,
    approx: OnceLock<(f64, f64)>,
}

impl Clone for ContinuedFraction {
    fn clone(&self) -> Self {
        let cache = self.cache.read().expect("poisoned").clone();
        ContinuedFraction {
            source: self.source.clone(),
            cache: RwLock::new(cache),
            max_sign_depth: self.max_sign_depth,
            approx: self.approx.clone(),
        }
    }
}

impl fmt::Debug for ContinuedFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuedFraction")
            .field("source", &self.source)
            .finish()
    }
}

fn check_digits(digits: &[BigInt]) -> Result<()> {
    if let Some(bad) = digits.iter().find(|d| d.sign() != Sign::Plus) {
        return Err(Error::invalid(format!(
            "partial quotients must be >= 1, got {bad}"
        )));
    }
    Ok(())
}

fn big_digits(digits: &[u64]) -> Vec<BigInt> {
    digits.iter().map(|&d| BigInt::from(d)).collect()
}

/// Draws one Gauss–Kuzmin digit by inverting `P(a >= k) = log2(1 + 1/k)`.
pub fn gauss_kuzmin_digit<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    // u in (0, 1]
    let u = 1.0 - rng.gen::<f64>();
    let denom = (u * std::f64::consts::LN_2).exp_m1();
    let k = (1.0 / denom).floor();
    if k >= 1.0e18 {
        1_000_000_000_000_000_000
    } else {
        (k as u64).max(1)
    }
}

impl ContinuedFraction {
    fn with_source(source: CfSource) -> Result<Self> {
        let rng = match &source {
            CfSource::Explicit(d) => {
                check_digits(d)?;
                None
            }
            CfSource::Periodic { prefix, period } => {
                check_digits(prefix)?;
                check_digits(period)?;
                if period.is_empty() {
                    return Err(Error::invalid("periodic continued fraction needs a nonempty period"));
                }
                None
            }
            CfSource::GaussKuzmin { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        };
        Ok(ContinuedFraction {
            source,
            cache: RwLock::new(Cache::new(rng)),
            max_sign_depth: DEFAULT_MAX_SIGN_DEPTH,
            approx: OnceLock::new(),
        })
    }

    /// A finite digit list; operations needing more digits fail.
    pub fn from_digits(digits: &[u64]) -> Result<Self> {
        Self::with_source(CfSource::Explicit(big_digits(digits)))
    }

    pub fn from_big_digits(digits: Vec<BigInt>) -> Result<Self> {
        Self::with_source(CfSource::Explicit(digits))
    }

    pub fn periodic(prefix: &[u64], period: &[u64]) -> Result<Self> {
        Self::with_source(CfSource::Periodic {
            prefix: big_digits(prefix),
            period: big_digits(period),
        })
    }

    pub fn periodic_big(prefix: Vec<BigInt>, period: Vec<BigInt>) -> Result<Self> {
        Self::with_source(CfSource::Periodic { prefix, period })
    }

    /// `[d, d, d, …]`.
    pub fn constant(d: u64) -> Result<Self> {
        Self::periodic(&[], &[d])
    }

    /// An extendable Gauss–Kuzmin sampled expansion.
    pub fn gauss_kuzmin(seed: u64) -> Self {
        Self::with_source(CfSource::GaussKuzmin { seed }).expect("sampler source is always valid")
    }

    pub fn source(&self) -> &CfSource {
        &self.source
    }

    pub fn with_max_sign_depth(mut self, depth: usize) -> Self {
        self.max_sign_depth = depth.max(2);
        self
    }

    pub fn max_sign_depth(&self) -> usize {
        self.max_sign_depth
    }

    /// Number of digits currently stored.
    pub fn stored_depth(&self) -> usize {
        self.cache.read().expect("poisoned").digits.len()
    }

    /// Number of digits the source can ever produce (`None` if unbounded).
    pub fn max_depth(&self) -> Option<usize> {
        match &self.source {
            CfSource::Explicit(d) => Some(d.len()),
            _ => None,
        }
    }

    /// Makes at least `n` digits available.
    pub fn ensure_depth(&self, n: usize) -> Result<()> {
        {
            let cache = self.cache.read().expect("poisoned");
            if cache.digits.len() >= n {
                return Ok(());
            }
        }
        if let Some(max) = self.max_depth() {
            if n > max {
                return Err(Error::DepthExhausted { requested: n, available: max });
            }
        }
        let mut cache = self.cache.write().expect("poisoned");
        while cache.digits.len() < n {
            let i = cache.digits.len();
            let a = match &self.source {
                CfSource::Explicit(d) => d[i].clone(),
                CfSource::Periodic { prefix, period } => {
                    if i < prefix.len() {
                        prefix[i].clone()
                    } else {
                        period[(i - prefix.len()) % period.len()].clone()
                    }
                }
                CfSource::GaussKuzmin { .. } => {
                    let rng = cache.rng.as_mut().expect("sampler cache has an rng");
                    BigInt::from(gauss_kuzmin_digit(rng))
                }
            };
            cache.push(a);
        }
        Ok(())
    }

    /// The partial quotient `a_i`, 1-based.
    pub fn digit(&self, i: usize) -> Result<BigInt> {
        if i == 0 {
            return Err(Error::invalid("digits are indexed from 1"));
        }
        self.ensure_depth(i)?;
        Ok(self.cache.read().expect("poisoned").digits[i - 1].clone())
    }

    /// The first `n` digits.
    pub fn digits(&self, n: usize) -> Result<Vec<BigInt>> {
        self.ensure_depth(n)?;
        Ok(self.cache.read().expect("poisoned").digits[..n].to_vec())
    }

    /// `p_n` and `q_n`; `n = 0` gives `0/1`.
    pub fn convergent(&self, n: usize) -> Result<Convergent> {
        self.ensure_depth(n)?;
        let cache = self.cache.read().expect("poisoned");
        Ok(Convergent {
            index: n,
            p: cache.p[n].clone(),
            q: cache.q[n].clone(),
        })
    }

    /// Convergents `1..=n`.
    pub fn convergents(&self, n: usize) -> Result<Vec<Convergent>> {
        if n == 0 {
            return Err(Error::invalid("need at least one convergent"));
        }
        self.ensure_depth(n)?;
        let cache = self.cache.read().expect("poisoned");
        Ok((1..=n)
            .map(|i| Convergent {
                index: i,
                p: cache.p[i].clone(),
                q: cache.q[i].clone(),
            })
            .collect())
    }

    /// The denominator `q_n`.
    pub fn q(&self, n: usize) -> Result<BigInt> {
        self.ensure_depth(n)?;
        Ok(self.cache.read().expect("poisoned").q[n].clone())
    }

    /// Denominators `q_0..=q_n`.
    pub fn qs(&self, n: usize) -> Result<Vec<BigInt>> {
        self.ensure_depth(n)?;
        Ok(self.cache.read().expect("poisoned").q[..=n].to_vec())
    }

    /// The digit sum `a_1 + … + a_n`.
    pub fn digit_sums(&self, n: usize) -> Result<BigInt> {
        self.ensure_depth(n)?;
        Ok(self.cache.read().expect("poisoned").sums[n].clone())
    }

    /// Certified bracket `lo < α < hi` from convergents `depth-1` and `depth`.
    pub fn alpha_interval(&self, depth: usize) -> Result<(BigRational, BigRational)> {
        if depth < 2 {
            return Err(Error::invalid("alpha_interval needs depth >= 2"));
        }
        self.ensure_depth(depth)?;
        let cache = self.cache.read().expect("poisoned");
        let a = BigRational::new(cache.p[depth - 1].clone(), cache.q[depth - 1].clone());
        let b = BigRational::new(cache.p[depth].clone(), cache.q[depth].clone());
        Ok(if a < b { (a, b) } else { (b, a) })
    }

    /// Exact sign of `u + vα`.
    pub fn sign_of(&self, u: &BigRational, v: &BigInt) -> Result<Ordering> {
        if v.is_zero() {
            return Ok(u.numer().sign_ordering());
        }
        let cap = match self.max_depth() {
            Some(max) => max.min(self.max_sign_depth),
            None => self.max_sign_depth,
        };
        let mut depth = 16.min(cap).max(1);
        loop {
            self.ensure_depth(depth)?;
            if let Some(sign) = self.sign_at_depth(u, v, depth) {
                return Ok(sign);
            }
            if depth >= cap {
                return Err(match self.max_depth() {
                    Some(max) if max <= self.max_sign_depth => Error::DepthExhausted {
                        requested: depth + 1,
                        available: max,
                    },
                    _ => Error::SignUnresolved { max_depth: cap },
                });
            }
            depth = (depth * 2).min(cap);
        }
    }

    /// Sign of `u + vα` if constant on the bracket at `depth`.
    fn sign_at_depth(&self, u: &BigRational, v: &BigInt, depth: usize) -> Option<Ordering> {
        let cache = self.cache.read().expect("poisoned");
        let at = |k: usize| -> Ordering {
            // sign(u + v p/q) = sign(numer q + v p denom)
            (u.numer() * &cache.q[k] + v * &cache.p[k] * u.denom()).sign_ordering()
        };
        let s1 = at(depth - 1);
        let s2 = at(depth);
        match (s1, s2) {
            (a, b) if a == b && a != Ordering::Equal => Some(a),
            (Ordering::Equal, b) if b != Ordering::Equal => Some(b),
            (a, Ordering::Equal) if a != Ordering::Equal => Some(a),
            _ => None,
        }
    }

    /// Floating approximation of α with an absolute error bound.
    pub fn alpha_f64(&self) -> (f64, f64) {
        *self.approx.get_or_init(|| {
            let target = BigInt::one() << 64;
            let mut depth = 2;
            loop {
                let ok = self.ensure_depth(depth).is_ok();
                if !ok {
                    depth -= 1;
                    break;
                }
                if self.q(depth - 1).expect("extended") >= target {
                    break;
                }
                depth += 1;
            }
            if depth < 2 {
                let c = self.convergent(depth.max(1)).expect("at least one digit");
                return (c.to_rational().to_f64().unwrap_or(0.5), 1.0);
            }
            let (lo, hi) = self.alpha_interval(depth).expect("extended");
            let mid = ((&lo + &hi) / BigInt::from(2)).to_f64().unwrap_or(0.5);
            let width = (&hi - &lo).to_f64().unwrap_or(1.0);
            (mid, width + 4.0 * f64::EPSILON * mid.abs() + f64::MIN_POSITIVE)
        })
    }

    /// Digits rendered as decimal strings, the JSON wire format.
    pub fn digits_json(&self, n: usize) -> Result<serde_json::Value> {
        Ok(serde_json::Value::Array(
            self.digits(n)?
                .into_iter()
                .map(|d| serde_json::Value::String(d.to_string()))
                .collect(),
        ))
    }

    /// Parses a JSON array of decimal strings (or plain integers).
    pub fn from_json_digits(value: &serde_json::Value) -> Result<Self> {
        let arr = value
            .as_array()
            .ok_or_else(|| Error::invalid("digit list must be a JSON array"))?;
        let digits = arr
            .iter()
            .map(|v| match v {
                serde_json::Value::String(s) => s
                    .parse::<BigInt>()
                    .map_err(|_| Error::invalid(format!("bad digit {s:?}"))),
                serde_json::Value::Number(n) => n
                    .as_u64()
                    .map(BigInt::from)
                    .ok_or_else(|| Error::invalid(format!("bad digit {n}"))),
                other => Err(Error::invalid(format!("bad digit {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_big_digits(digits)
    }
}

trait SignOrdering {
    fn sign_ordering(&self) -> Ordering;
}

impl SignOrdering for BigInt {
    fn sign_ordering(&self) -> Ordering {
        match self.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }
}

/// Sign of `u + vα` for a given expansion.
pub fn sign_of(u: &BigRational, v: &BigInt, cf: &ContinuedFraction) -> Result<Ordering> {
    cf.sign_of(u, v)
}

/// A `gauss:<seed>:<depth>` expansion with `depth` digits pre-drawn.
pub fn sample_gauss_kuzmin(seed: u64, depth: usize) -> Result<ContinuedFraction> {
    if depth == 0 {
        return Err(Error::invalid("depth must be >= 1"));
    }
    let cf = ContinuedFraction::gauss_kuzmin(seed);
    cf.ensure_depth(depth)?;
    Ok(cf)
}

/// Parses an `--alpha` argument.
///
/// Accepted forms: `[2,1,4]` (finite list), `[2,1,...]` (the last digit
/// repeats forever) and `gauss:<seed>:<depth>`.
pub fn parse_alpha(spec: &str) -> Result<ContinuedFraction> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("gauss:") {
        let mut parts = rest.split(':');
        let seed = parts
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| Error::invalid(format!("bad sampler spec {spec:?}")))?;
        let depth = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::invalid(format!("bad sampler spec {spec:?}")))?;
        if parts.next().is_some() {
            return Err(Error::invalid(format!("bad sampler spec {spec:?}")));
        }
        return sample_gauss_kuzmin(seed, depth);
    }
    let inner = spec
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::invalid(format!("alpha must be [digits] or gauss:<seed>:<depth>, got {spec:?}")))?;
    let mut digits = Vec::new();
    let mut repeat = false;
    for tok in inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if repeat {
            return Err(Error::invalid("'...' must be the last entry"));
        }
        if tok == "..." || tok == "…" {
            repeat = true;
            continue;
        }
        digits.push(
            tok.parse::<BigInt>()
                .map_err(|_| Error::invalid(format!("bad digit {tok:?}")))?,
        );
    }
    if digits.is_empty() {
        return Err(Error::invalid("empty digit list"));
    }
    if repeat {
        let last = digits.pop().expect("nonempty");
        ContinuedFraction::periodic_big(digits, vec![last])
    } else {
        ContinuedFraction::from_big_digits(digits)
    }
}

/// Evaluates `1/(a_1 + 1/(a_2 + … + 1/a_n))` directly from the inside out.
pub fn nested_value(digits: &[BigInt]) -> BigRational {
    let mut acc = BigRational::zero();
    for a in digits.iter().rev() {
        acc = (BigRational::from_integer(a.clone()) + acc).recip();
    }
    acc
}

/// Inverse of `a` modulo `m` (`gcd(a, m) = 1` required).
pub(crate) fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(m);
    if !e.gcd.is_one() {
        return None;
    }
    Some(e.x.mod_floor(m))
}

pub(crate) fn abs_f64(x: &BigInt) -> f64 {
    x.abs().to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn convergent_examples() {
        let cf = ContinuedFraction::from_digits(&[2]).unwrap();
        assert_eq!(cf.convergents(1).unwrap()[0].to_string(), "1/2");
        let cf = ContinuedFraction::from_digits(&[1, 1, 1, 1, 1]).unwrap();
        assert_eq!(cf.convergents(5).unwrap()[4].to_string(), "5/8");
        let cf = ContinuedFraction::from_digits(&[2, 2, 2]).unwrap();
        assert_eq!(cf.convergents(3).unwrap()[2].to_string(), "5/12");
    }

    #[test]
    fn explicit_list_exhausts() {
        let cf = ContinuedFraction::from_digits(&[2, 2]).unwrap();
        assert!(matches!(
            cf.convergents(3),
            Err(Error::DepthExhausted { requested: 3, available: 2 })
        ));
        assert!(ContinuedFraction::from_digits(&[2, 0]).is_err());
    }

    #[test]
    fn digit_sum_examples() {
        let cf = ContinuedFraction::from_digits(&[2, 1, 3]).unwrap();
        assert_eq!(cf.digit_sums(3).unwrap(), 6.into());
        assert_eq!(ContinuedFraction::constant(2).unwrap().digit_sums(10).unwrap(), 20.into());
        assert_eq!(ContinuedFraction::constant(1).unwrap().digit_sums(7).unwrap(), 7.into());
    }

    #[test]
    fn interval_examples() {
        let cf = ContinuedFraction::constant(2).unwrap();
        assert_eq!(cf.alpha_interval(3).unwrap(), (r(2, 5), r(5, 12)));
        let cf = ContinuedFraction::constant(1).unwrap();
        assert_eq!(cf.alpha_interval(4).unwrap(), (r(3, 5), r(2, 3)));
        let cf = ContinuedFraction::gauss_kuzmin(3);
        let (lo, hi) = cf.alpha_interval(2).unwrap();
        let width = BigRational::new(1.into(), cf.q(1).unwrap() * cf.q(2).unwrap());
        assert_eq!(hi - lo, width);
        assert!(cf.alpha_interval(1).is_err());
    }

    #[test]
    fn sign_examples() {
        let cf = ContinuedFraction::constant(2).unwrap();
        assert_eq!(cf.sign_of(&r(0, 1), &0.into()).unwrap(), Ordering::Equal);
        assert_eq!(cf.sign_of(&r(-2, 5), &1.into()).unwrap(), Ordering::Greater);
        assert_eq!(cf.sign_of(&r(1, 1), &(-2).into()).unwrap(), Ordering::Greater);
        assert_eq!(cf.sign_of(&r(-1, 2), &1.into()).unwrap(), Ordering::Less);
    }

    #[test]
    fn explicit_list_cannot_resolve_close_call() {
        // 2/5 - α has |.| < 1/(5*12) so three digits cannot settle it
        let cf = ContinuedFraction::from_digits(&[2, 2]).unwrap();
        assert!(matches!(
            cf.sign_of(&r(-5, 12), &1.into()),
            Err(Error::DepthExhausted { .. })
        ));
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_gauss_kuzmin(0, 5).unwrap();
        let b = sample_gauss_kuzmin(0, 5).unwrap();
        assert_eq!(a.digits(5).unwrap(), b.digits(5).unwrap());
        assert!(a.digits(5).unwrap().iter().all(|d| *d >= BigInt::one()));
        // extension continues the same stream
        assert_eq!(a.digits(40).unwrap(), b.digits(40).unwrap());
    }

    #[test]
    fn gauss_kuzmin_frequency_of_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let ones = (0..n).filter(|_| gauss_kuzmin_digit(&mut rng) == 1).count();
        let expected = (4.0f64 / 3.0).log2();
        assert!((ones as f64 / n as f64 - expected).abs() < 0.01);
    }

    #[test]
    fn parse_alpha_forms() {
        let cf = parse_alpha("[2,1,...]").unwrap();
        assert_eq!(cf.digits(4).unwrap(), big_digits(&[2, 1, 1, 1]));
        let cf = parse_alpha("[2,1,4]").unwrap();
        assert_eq!(cf.max_depth(), Some(3));
        assert_eq!(parse_alpha("gauss:7:40").unwrap().stored_depth(), 40);
        assert!(parse_alpha("gauss:x:4").is_err());
        assert!(parse_alpha("2,1").is_err());
    }

    #[test]
    fn json_digits_round_trip() {
        let cf = ContinuedFraction::from_digits(&[3, 7, 15, 1, 292]).unwrap();
        let json = cf.digits_json(5).unwrap();
        assert_eq!(json.to_string(), r#"["3","7","15","1","292"]"#);
        let back = ContinuedFraction::from_json_digits(&json).unwrap();
        assert_eq!(back.digits(5).unwrap(), cf.digits(5).unwrap());
    }

    #[test]
    fn alpha_f64_is_tight() {
        let cf = ContinuedFraction::constant(2).unwrap();
        let (mid, err) = cf.alpha_f64();
        assert!((mid - (2f64.sqrt() - 1.0)).abs() <= err);
        assert!(err < 1e-15);
    }
}
