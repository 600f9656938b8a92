//! The infinite staircase `f = χ[0,1/2) − χ[1/2,1)` over rotations by
//! `α = [2r₁, s₁, 2r₂, s₂, …]`.
//!
//! With the labels `A = [0,1/2)`, `B = [1/2,1−α)`, `C = [1−α,1)` the orbit of
//! the origin is coded by the limit of `σ₁∘⋯∘σₙ(A)` for the substitutions
//!
//! ```text
//! σ(A) = A (AʳBʳ⁻¹C)ˢ
//! σ(B) = A (Aʳ⁻¹BʳC) (AʳBʳ⁻¹C)ˢ⁻¹
//! σ(C) = A (Aʳ⁻¹BʳC) (AʳBʳ⁻¹C)ˢ
//! ```
//!
//! and the ergodic sum `S_n(0)` is the drift `#A − #B − #C` of the length-`n`
//! prefix. Level words are never materialized beyond a cap; lengths and
//! prefix-drift histograms follow from the block structure instead.

mod forge;
mod histogram;

pub use forge::{
    forge_alpha, forge_next_r, scale_bound, zeta_certificate, zeta_prefix_check, BSpec, ForgeReport, PrefixCheck,
    ScaleTerm, ZetaCertificate,
};
pub use histogram::{
    level_histograms, level_histograms_with_cap, level_profile, max_hits, max_hits_bound, LetterHistogram,
    LevelHistogram, LevelProfile, DEFAULT_SUPPORT_CAP,
};

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cocycle::{CirclePoint, Orbit, StepCocycle};
use crate::contfrac::ContinuedFraction;
use crate::error::{Error, Result};

/// Default cap on materialized word length.
pub const DEFAULT_WORD_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    A,
    B,
    C,
}

impl Letter {
    pub const ALL: [Letter; 3] = [Letter::A, Letter::B, Letter::C];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Value of the staircase cocycle on the letter's interval.
    pub fn drift(self) -> i64 {
        match self {
            Letter::A => 1,
            Letter::B | Letter::C => -1,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'A',
            Letter::B => 'B',
            Letter::C => 'C',
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `#A − #B − #C`.
    pub fn drift(&self) -> i64 {
        self.0.iter().map(|l| l.drift()).sum()
    }

    /// Drifts of the prefixes of length `1..=len`.
    pub fn prefix_drifts(&self) -> Vec<i64> {
        let mut acc = 0;
        self.0
            .iter()
            .map(|l| {
                acc += l.drift();
                acc
            })
            .collect()
    }

    pub fn starts_with(&self, other: &Word) -> bool {
        self.0.starts_with(&other.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|l| l.as_char()).collect();
        f.write_str(&s)
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'A' => Ok(Letter::A),
                'B' => Ok(Letter::B),
                'C' => Ok(Letter::C),
                other => Err(Error::invalid(format!("letter {other:?} not in {{A,B,C}}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

/// Pairs `(r_i, s_i)` defining `α = [2r₁, s₁, 2r₂, s₂, …]`.
///
/// Forged `r_i` outgrow machine integers quickly, so they are unbounded.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(JsonCount, u64)>", into = "Vec<(JsonCount, u64)>")]
pub struct StaircaseParams {
    pairs: Vec<(BigUint, u64)>,
}

/// A JSON integer, or a decimal string once it leaves the `u64` range.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum JsonCount {
    Small(u64),
    Big(String),
}

impl TryFrom<Vec<(JsonCount, u64)>> for StaircaseParams {
    type Error = Error;

    fn try_from(pairs: Vec<(JsonCount, u64)>) -> Result<Self> {
        let pairs = pairs
            .into_iter()
            .map(|(r, s)| {
                let r = match r {
                    JsonCount::Small(r) => BigUint::from(r),
                    JsonCount::Big(t) => t
                        .parse::<BigUint>()
                        .map_err(|_| Error::invalid(format!("bad integer {t:?}")))?,
                };
                Ok((r, s))
            })
            .collect::<Result<Vec<_>>>()?;
        StaircaseParams::new(pairs)
    }
}

impl From<StaircaseParams> for Vec<(JsonCount, u64)> {
    fn from(p: StaircaseParams) -> Self {
        p.pairs
            .into_iter()
            .map(|(r, s)| match r.to_u64() {
                Some(v) => (JsonCount::Small(v), s),
                None => (JsonCount::Big(r.to_string()), s),
            })
            .collect()
    }
}

impl StaircaseParams {
    pub fn new<R: Into<BigUint>>(pairs: Vec<(R, u64)>) -> Result<Self> {
        let pairs: Vec<(BigUint, u64)> = pairs.into_iter().map(|(r, s)| (r.into(), s)).collect();
        if pairs.iter().any(|(r, s)| r.is_zero() || *s == 0) {
            return Err(Error::invalid("r_i and s_i must be >= 1"));
        }
        Ok(StaircaseParams { pairs })
    }

    pub fn pairs(&self) -> &[(BigUint, u64)] {
        &self.pairs
    }

    /// The first `n` pairs.
    pub fn prefix(&self, n: usize) -> StaircaseParams {
        StaircaseParams {
            pairs: self.pairs[..n.min(self.depth())].to_vec(),
        }
    }

    pub fn depth(&self) -> usize {
        self.pairs.len()
    }

    /// `(r_n, s_n)` for `1 <= n <= depth`.
    pub fn pair(&self, n: usize) -> Result<(BigUint, u64)> {
        if n == 0 || n > self.depth() {
            return Err(Error::DepthExhausted {
                requested: n,
                available: self.depth(),
            });
        }
        Ok(self.pairs[n - 1].clone())
    }

    /// Digits `[2r₁, s₁, …, 2r_d, s_d]`.
    pub fn digits(&self) -> Vec<BigInt> {
        self.pairs
            .iter()
            .flat_map(|(r, s)| [BigInt::from(r * 2u32), BigInt::from(*s)])
            .collect()
    }

    /// The rotation number, continued past the last pair by repeating it.
    pub fn continued_fraction(&self) -> Result<ContinuedFraction> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("empty parameter list has no rotation number"));
        }
        let mut prefix = self.digits();
        let period = prefix.split_off(prefix.len() - 2);
        ContinuedFraction::periodic_big(prefix, period)
    }

    /// `2r_{n+1} q_{2n} < q_{2n+2}` for every `n < depth`.
    pub fn sandwich_holds(&self) -> Result<bool> {
        let cf = self.continued_fraction()?;
        for n in 0..self.depth() {
            let r = BigInt::from(self.pairs[n].0.clone());
            if r * 2 * cf.q(2 * n)? >= cf.q(2 * n + 2)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// One application of `σ_{r,s}` to a letter, as repeated run segments.
#[derive(Clone, Debug)]
pub(crate) struct Segment {
    pub runs: Vec<(Letter, BigUint)>,
    pub repeat: u64,
}

pub(crate) fn image_segments(letter: Letter, r: &BigUint, s: u64) -> Vec<Segment> {
    let r1 = r - 1u32;
    let one = BigUint::one();
    let lead = Segment {
        runs: vec![(Letter::A, one.clone())],
        repeat: 1,
    };
    let standard = |repeat| Segment {
        runs: vec![(Letter::A, r.clone()), (Letter::B, r1.clone()), (Letter::C, one.clone())],
        repeat,
    };
    let heavy = Segment {
        runs: vec![(Letter::A, r1.clone()), (Letter::B, r.clone()), (Letter::C, one.clone())],
        repeat: 1,
    };
    match letter {
        Letter::A => vec![lead, standard(s)],
        Letter::B => vec![lead, heavy, standard(s - 1)],
        Letter::C => vec![lead, heavy, standard(s)],
    }
}

/// `count[X][Y]` = number of `Y` in `σ(X)`.
pub fn letter_counts(r: &BigUint, s: u64) -> [[BigUint; 3]; 3] {
    Letter::ALL.map(|x| {
        let mut c = [BigUint::zero(), BigUint::zero(), BigUint::zero()];
        for seg in image_segments(x, r, s) {
            for (y, m) in &seg.runs {
                c[y.index()] += m * seg.repeat;
            }
        }
        c
    })
}

pub fn substitute(word: &Word, r: u64, s: u64) -> Result<Word> {
    if r == 0 || s == 0 {
        return Err(Error::invalid("r and s must be >= 1"));
    }
    let r = BigUint::from(r);
    let mut out = Vec::new();
    for &l in &word.0 {
        for seg in image_segments(l, &r, s) {
            for _ in 0..seg.repeat {
                for (y, m) in &seg.runs {
                    let m = m.to_usize().expect("r fits in u64");
                    out.extend(std::iter::repeat(*y).take(m));
                }
            }
        }
    }
    Ok(Word(out))
}

/// `|σ⁽ⁿ⁾(A)|, |σ⁽ⁿ⁾(B)|, |σ⁽ⁿ⁾(C)|` from letter counts.
pub fn level_lengths(params: &StaircaseParams, n: usize) -> Result<[BigUint; 3]> {
    if n > params.depth() {
        return Err(Error::DepthExhausted {
            requested: n,
            available: params.depth(),
        });
    }
    let mut len = [BigUint::one(), BigUint::one(), BigUint::one()];
    for i in 1..=n {
        let (r, s) = &params.pairs[i - 1];
        len = next_lengths(&len, r, *s);
    }
    Ok(len)
}

/// `σ⁽ⁿ⁾ = σ⁽ⁿ⁻¹⁾ ∘ σₙ`, so level-`n` lengths are counts of `σₙ` weighted by level-`(n−1)` lengths.
pub(crate) fn next_lengths(prev: &[BigUint; 3], r: &BigUint, s: u64) -> [BigUint; 3] {
    letter_counts(r, s).map(|row| row.iter().zip(prev).map(|(c, l)| c * l).sum())
}

/// `σ₁∘⋯∘σₙ(letter)`, refused above `cap` letters.
pub fn level_word(params: &StaircaseParams, n: usize, letter: Letter, cap: usize) -> Result<Word> {
    let len = &level_lengths(params, n)?[letter.index()];
    if len > &BigUint::from(cap) {
        return Err(Error::LengthCap {
            length: len.to_string(),
            cap,
        });
    }
    let mut w = Word::letter(letter);
    for i in (1..=n).rev() {
        let (r, s) = &params.pairs[i - 1];
        let r = r.to_u64().ok_or(Error::Overflow("r does not fit in 64 bits"))?;
        w = substitute(&w, r, *s)?;
    }
    Ok(w)
}

/// The staircase partition `0 < 1/2 < 1 − α`.
pub fn coding_partition(cf: &ContinuedFraction) -> Result<Vec<CirclePoint>> {
    let half = CirclePoint::rational(num_rational::BigRational::new(1.into(), 2.into()));
    let one_minus_alpha = CirclePoint::new(num_rational::BigRational::one(), BigInt::from(-1), cf)?;
    if half.cmp_exact(&one_minus_alpha, cf)? != std::cmp::Ordering::Less {
        return Err(Error::invalid("rotation number must be below 1/2"));
    }
    Ok(vec![CirclePoint::zero(), half, one_minus_alpha])
}

/// The staircase cocycle as a three-interval step function (values `1, −1, −1`).
pub fn staircase_cocycle(cf: &ContinuedFraction) -> Result<StepCocycle> {
    StepCocycle::new(coding_partition(cf)?, vec![1, -1, -1], cf)
}

/// The `N`-letter itinerary of `x` through `A`, `B`, `C`.
pub fn coding_of_point(params: &StaircaseParams, x: &CirclePoint, n: usize) -> Result<Word> {
    let cf = params.continued_fraction()?;
    coding_with(&cf, x, n, DEFAULT_WORD_CAP)
}

pub(crate) fn coding_with(cf: &ContinuedFraction, x: &CirclePoint, n: usize, cap: usize) -> Result<Word> {
    if n > cap {
        return Err(Error::LengthCap {
            length: n.to_string(),
            cap,
        });
    }
    let part = coding_partition(cf)?;
    let mut orbit = Orbit::new(&part, x, cf);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(Letter::ALL[orbit.step()?]);
    }
    Ok(Word(out))
}

pub(crate) fn biguint_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(u64, u64)]) -> StaircaseParams {
        StaircaseParams::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn substitute_examples() {
        let a: Word = "A".parse().unwrap();
        assert_eq!(substitute(&a, 1, 1).unwrap().to_string(), "AAC");
        assert_eq!(substitute(&"B".parse().unwrap(), 1, 1).unwrap().to_string(), "ABC");
        assert_eq!(substitute(&a, 1, 2).unwrap().to_string(), "AACAC");
        assert_eq!(substitute(&"C".parse().unwrap(), 2, 1).unwrap().to_string(), "AABBCAABC");
    }

    #[test]
    fn level_word_examples() {
        let params = p(&[(1, 1), (2, 1)]);
        assert_eq!(level_word(&params, 0, Letter::B, 10).unwrap().to_string(), "B");
        let w1 = level_word(&params, 1, Letter::A, 100).unwrap();
        assert_eq!(w1.to_string(), "AAC");
        let w2 = level_word(&params, 2, Letter::A, 100).unwrap();
        assert!(w2.starts_with(&w1));
        assert!(matches!(level_word(&params, 2, Letter::A, 5), Err(Error::LengthCap { .. })));
    }

    #[test]
    fn level_length_examples() {
        let params = p(&[(1, 1)]);
        assert_eq!(level_lengths(&params, 0).unwrap(), [1u32, 1, 1].map(BigUint::from));
        assert_eq!(level_lengths(&params, 1).unwrap(), [3u32, 3, 5].map(BigUint::from));
    }

    #[test]
    fn lengths_match_denominators_and_words() {
        for pairs in [vec![(1, 1), (1, 1), (1, 1)], vec![(2, 1), (1, 2), (3, 1)], vec![(3, 2), (2, 2)]] {
            let params = p(&pairs);
            let cf = params.continued_fraction().unwrap();
            for n in 1..=params.depth() {
                let len = level_lengths(&params, n).unwrap();
                let q2n = cf.q(2 * n).unwrap().to_biguint().unwrap();
                let q2n1 = cf.q(2 * n - 1).unwrap().to_biguint().unwrap();
                assert_eq!(len[0], q2n);
                assert_eq!(len[1], q2n);
                assert_eq!(len[2], &q2n + q2n1);
                for l in Letter::ALL {
                    let w = level_word(&params, n, l, 1 << 20).unwrap();
                    assert_eq!(BigUint::from(w.len()), len[l.index()]);
                    assert_eq!(w.drift(), l.drift());
                }
            }
            assert!(params.sandwich_holds().unwrap());
        }
    }

    #[test]
    fn coding_examples() {
        let params = p(&[(1, 1)]);
        let z = CirclePoint::zero();
        assert_eq!(coding_of_point(&params, &z, 3).unwrap().to_string(), "AAC");
        assert_eq!(coding_of_point(&params, &z, 1).unwrap().to_string(), "A");
        let params = p(&[(2, 1), (1, 2)]);
        let cf = params.continued_fraction().unwrap();
        let w = coding_of_point(&params, &z, 200).unwrap();
        let f = staircase_cocycle(&cf).unwrap();
        let t = crate::cocycle::ergodic_sums(&f, &z, 200, &cf).unwrap();
        assert_eq!(w.prefix_drifts(), t.sums[1..].to_vec());
        // the two-interval staircase gives the same sums
        let t2 = crate::cocycle::ergodic_sums(&StepCocycle::staircase(), &z, 200, &cf).unwrap();
        assert_eq!(t.sums, t2.sums);
    }

    #[test]
    fn params_json() {
        let params = p(&[(1, 2), (3, 1)]);
        assert_eq!(serde_json::to_string(&params).unwrap(), "[[1,2],[3,1]]");
        let back: StaircaseParams = serde_json::from_str("[[1,2],[3,1]]").unwrap();
        assert_eq!(back, params);
        assert!(serde_json::from_str::<StaircaseParams>("[[0,2]]").is_err());
        assert_eq!(params.digits(), [2, 2, 6, 1].map(BigInt::from).to_vec());
        let big = p(&[(1, 1)]);
        let big = StaircaseParams::new(vec![(BigUint::from(u64::MAX) * 4u32, 1), (big.pairs()[0].0.clone(), 2)]).unwrap();
        let json = serde_json::to_string(&big).unwrap();
        assert_eq!(json, r#"[["73786976294838206460",1],[1,2]]"#);
        assert_eq!(serde_json::from_str::<StaircaseParams>(&json).unwrap(), big);
    }
}
