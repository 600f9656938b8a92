//! Prefix-drift histograms `g(P, k)` of level words.
//!
//! A level-`n` word is a concatenation of level-`(n−1)` words, so its
//! histogram is a sum of shifted copies of the previous histograms. Within a
//! run `Yᵐ` the shifts form an arithmetic progression of step `g(Y) = ±1`,
//! which turns each run into a box filter. Exact histograms are kept while
//! their support fits under a cap; past that only the per-letter bound
//! `Σ_runs min(|W_Y|, m·maxhits(Y))` is carried.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use super::{image_segments, letter_counts, next_lengths, Letter, StaircaseParams};
use crate::error::{Error, Result};

/// Largest histogram support (number of drift levels) kept exactly.
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Dense {
    lo: i128,
    counts: Vec<u128>,
}

impl Dense {
    fn single(k: i128) -> Self {
        Dense { lo: k, counts: vec![1] }
    }

    fn hi(&self) -> i128 {
        self.lo + self.counts.len() as i128 - 1
    }

    fn max(&self) -> u128 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// Histogram `k → #{prefixes with drift k}` of one word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LetterHistogram {
    min_level: i64,
    counts: Vec<BigUint>,
}

impl LetterHistogram {
    pub fn from_drifts(drifts: &[i64]) -> Self {
        let (Some(&lo), Some(&hi)) = (drifts.iter().min(), drifts.iter().max()) else {
            return LetterHistogram {
                min_level: 0,
                counts: Vec::new(),
            };
        };
        let mut counts = vec![BigUint::zero(); (hi - lo + 1) as usize];
        for d in drifts {
            counts[(d - lo) as usize] += 1u32;
        }
        LetterHistogram { min_level: lo, counts }
    }

    pub fn get(&self, k: i64) -> BigUint {
        let i = k - self.min_level;
        if i < 0 || i as usize >= self.counts.len() {
            return BigUint::zero();
        }
        self.counts[i as usize].clone()
    }

    /// Nonzero entries in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &BigUint)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.min_level + i as i64, c))
    }

    pub fn min_level(&self) -> i64 {
        self.min_level
    }

    pub fn max_level(&self) -> i64 {
        self.min_level + self.counts.len() as i64 - 1
    }

    pub fn max(&self) -> BigUint {
        self.counts.iter().max().cloned().unwrap_or_default()
    }

    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }
}

/// Exact histograms of the three level-`n` words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelHistogram {
    pub level: usize,
    pub words: [LetterHistogram; 3],
    pub lengths: [BigUint; 3],
    pub drifts: [i64; 3],
}

impl LevelHistogram {
    pub fn word(&self, l: Letter) -> &LetterHistogram {
        &self.words[l.index()]
    }

    pub fn max_hits(&self) -> BigUint {
        self.words.iter().map(LetterHistogram::max).max().unwrap_or_default()
    }

    /// Columns `k,countA,countB,countC`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,countA,countB,countC")?;
        let lo = self.words.iter().map(|h| h.min_level()).min().unwrap_or(0);
        let hi = self.words.iter().map(|h| h.max_level()).max().unwrap_or(-1);
        for k in lo..=hi {
            let [a, b, c] = [0, 1, 2].map(|i| self.words[i].get(k));
            writeln!(out, "{k},{a},{b},{c}")?;
        }
        Ok(())
    }
}

/// Lengths, drifts and hit maxima of the level-`n` words; the maxima are
/// exact while `exact` holds and upper bounds otherwise.
#[derive(Clone, Debug)]
pub struct LevelProfile {
    pub level: usize,
    pub lengths: [BigUint; 3],
    pub drifts: [i64; 3],
    pub max_hits: [BigUint; 3],
    pub exact: bool,
    dense: Option<[Dense; 3]>,
}

impl LevelProfile {
    /// Single letters.
    pub fn base() -> Self {
        LevelProfile {
            level: 0,
            lengths: [BigUint::one(), BigUint::one(), BigUint::one()],
            drifts: [1, -1, -1],
            max_hits: [BigUint::one(), BigUint::one(), BigUint::one()],
            exact: true,
            dense: Some([Dense::single(1), Dense::single(-1), Dense::single(-1)]),
        }
    }

    pub fn max(&self) -> BigUint {
        self.max_hits.iter().max().cloned().unwrap_or_default()
    }

    /// Per-letter bound `Σ_runs repeat · min(|W_Y|, m · maxhits(Y))`; `r = None`
    /// gives the bound that holds for every `r`.
    pub fn next_bound(&self, r: Option<&BigUint>, s: u64) -> [BigUint; 3] {
        let two = BigUint::from(2u32);
        Letter::ALL.map(|x| {
            let mut total = BigUint::zero();
            for (si, seg) in image_segments(x, r.unwrap_or(&two), s).into_iter().enumerate() {
                let mut part = BigUint::zero();
                for (y, m) in &seg.runs {
                    let y = *y;
                    let len = &self.lengths[y.index()];
                    let grows_with_r = si > 0 && y != Letter::C;
                    part += if r.is_none() && grows_with_r {
                        len.clone()
                    } else {
                        (&self.max_hits[y.index()] * m).min(len.clone())
                    };
                }
                total += part * seg.repeat;
            }
            total
        })
    }

    /// The level `n+1` profile for the pair `(r, s)`.
    pub fn advance(&self, r: &BigUint, s: u64, cap: usize) -> LevelProfile {
        let lengths = next_lengths(&self.lengths, r, s);
        let bound = self.next_bound(Some(r), s);
        // each letter's drift is ±1, so a level word's drift is its letter count difference
        let drifts = letter_counts(r, s).map(|row| {
            let d: BigInt = row
                .iter()
                .zip(self.drifts)
                .map(|(c, g)| BigInt::from(c.clone()) * g)
                .sum();
            d.to_i64().expect("level drifts are ±1")
        });
        let mut dense_next: Vec<Dense> = Vec::with_capacity(3);
        let small_r = r.to_u64().filter(|&r| r as u128 <= cap as u128);
        if let (Some(dense), Some(r)) = (&self.dense, small_r) {
            for x in Letter::ALL {
                let shifts = self.shift_intervals(x, r, s);
                if let Some(d) = convolve(dense, &shifts, cap) {
                    dense_next.push(d);
                }
            }
        }
        let dense = <[Dense; 3]>::try_from(dense_next).ok();
        let (max_hits, exact) = match &dense {
            Some(d) => (d.clone().map(|h| BigUint::from(h.max())), true),
            None => (bound, false),
        };
        LevelProfile {
            level: self.level + 1,
            lengths,
            drifts,
            max_hits,
            exact,
            dense,
        }
    }

    /// Drops exact histograms, keeping only bounds from here on.
    pub fn forget_histograms(mut self) -> Self {
        self.dense = None;
        self
    }

    /// Shift intervals `(Y, lo, hi, weight)` of the constituents of `σ(X)`.
    fn shift_intervals(&self, x: Letter, r: u64, s: u64) -> Vec<(Letter, i128, i128, u128)> {
        let mut out = Vec::new();
        let mut c: i128 = 0;
        for seg in image_segments(x, &BigUint::from(r), s) {
            if seg.repeat == 0 {
                continue;
            }
            let start = c;
            let mut one_pass = Vec::new();
            for (y, m) in &seg.runs {
                let (y, m) = (*y, m.to_u64().expect("small r"));
                if m == 0 {
                    continue;
                }
                let g = self.drifts[y.index()] as i128;
                debug_assert!(g == 1 || g == -1);
                let end = c + g * (m as i128 - 1);
                one_pass.push((y, c.min(end), c.max(end)));
                c = end + g;
            }
            let delta = c - start;
            if delta == 0 {
                out.extend(one_pass.into_iter().map(|(y, lo, hi)| (y, lo, hi, seg.repeat as u128)));
            } else {
                for rep in 0..seg.repeat as i128 {
                    let off = rep * delta;
                    out.extend(one_pass.iter().map(|&(y, lo, hi)| (y, lo + off, hi + off, 1)));
                }
                c = start + delta * seg.repeat as i128;
            }
        }
        out
    }

    fn to_histogram(&self) -> Option<LevelHistogram> {
        let dense = self.dense.as_ref()?;
        Some(LevelHistogram {
            level: self.level,
            words: dense.clone().map(|d| LetterHistogram {
                min_level: d.lo as i64,
                counts: d.counts.into_iter().map(BigUint::from).collect(),
            }),
            lengths: self.lengths.clone(),
            drifts: self.drifts,
        })
    }
}

fn convolve(prev: &[Dense; 3], shifts: &[(Letter, i128, i128, u128)], cap: usize) -> Option<Dense> {
    let lo = shifts.iter().map(|&(y, a, _, _)| prev[y.index()].lo + a).min()?;
    let hi = shifts.iter().map(|&(y, _, b, _)| prev[y.index()].hi() + b).max()?;
    let span = hi - lo + 1;
    if span > cap as i128 {
        return None;
    }
    let mut out = vec![0u128; span as usize];
    let prefix: Vec<Vec<u128>> = prev
        .iter()
        .map(|d| {
            let mut p = Vec::with_capacity(d.counts.len() + 1);
            p.push(0u128);
            for &c in &d.counts {
                p.push(p.last().copied().unwrap_or(0).checked_add(c)?);
            }
            Some(p)
        })
        .collect::<Option<_>>()?;
    for &(y, a, b, w) in shifts {
        let h = &prev[y.index()];
        let p = &prefix[y.index()];
        let len = h.counts.len() as i128;
        for k in (h.lo + a)..=(h.hi() + b) {
            // Σ_{c=a}^{b} h[k − c]
            let i1 = (k - b - h.lo).max(0);
            let i2 = (k - a - h.lo).min(len - 1);
            if i1 > i2 {
                continue;
            }
            let v = (p[i2 as usize + 1] - p[i1 as usize]).checked_mul(w)?;
            let slot = &mut out[(k - lo) as usize];
            *slot = slot.checked_add(v)?;
        }
    }
    Some(Dense { lo, counts: out })
}

/// Profiles of levels `0..=n`, exact while the support stays below `cap`.
pub fn level_profile(params: &StaircaseParams, n: usize, cap: usize) -> Result<Vec<LevelProfile>> {
    if n > params.depth() {
        return Err(Error::DepthExhausted {
            requested: n,
            available: params.depth(),
        });
    }
    let mut out = vec![LevelProfile::base()];
    for i in 1..=n {
        let (r, s) = &params.pairs()[i - 1];
        let next = out[i - 1].advance(r, *s, cap);
        out[i - 1].dense = None;
        out.push(next);
    }
    Ok(out)
}

pub fn level_histograms_with_cap(params: &StaircaseParams, n: usize, cap: usize) -> Result<LevelHistogram> {
    let prof = level_profile(params, n, cap)?.pop().expect("level 0 present");
    prof.to_histogram().ok_or_else(|| Error::LengthCap {
        length: format!("histogram support at level {n}"),
        cap,
    })
}

pub fn level_histograms(params: &StaircaseParams, n: usize) -> Result<LevelHistogram> {
    level_histograms_with_cap(params, n, DEFAULT_SUPPORT_CAP)
}

/// Exact maximum histogram entry over the three level-`n` words.
pub fn max_hits(params: &StaircaseParams, n: usize) -> Result<BigUint> {
    Ok(level_histograms(params, n)?.max_hits())
}

/// Exact maximum when the histograms fit the cap, otherwise the run bound.
pub fn max_hits_bound(params: &StaircaseParams, n: usize) -> Result<BigUint> {
    Ok(level_profile(params, n, DEFAULT_SUPPORT_CAP)?
        .pop()
        .expect("level 0 present")
        .max())
}
