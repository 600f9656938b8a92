//! Forging rotation numbers for which the staircase's ζ series stays
//! bounded, and a uniform-in-`x` bound on `ζ_N(x) = Σ_{i≤N} ω(i)[S_i(x) = 0]`.
//!
//! Scale `n ≥ 1` covers times `(Q_n, Q_{n+1}]` with `Q_n = |σ⁽ⁿ⁾(A)|`, the
//! shortest level-`n` word. Cut it into windows `(lQ_n, (l+1)Q_n]`. The
//! coding of any point over a window sits inside two consecutive level-`n`
//! words, so a window holds at most `h_n = 2·maxhits(n)` zeros; the whole
//! scale sits inside two level-`(n+1)` words and holds at most
//! `T_n = 2·maxhits(n+1)`. With ω nonincreasing, packing `T_n` zeros into the
//! earliest windows `h_n` at a time bounds the scale's contribution. Scale 0
//! is the single window `[1, Q_1]` holding at most `T_0` zeros.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::histogram::{level_profile, LevelProfile, DEFAULT_SUPPORT_CAP};
use super::{biguint_f64, Letter, StaircaseParams};
use crate::cocycle::{ergodic_sums, CirclePoint, StepCocycle};
use crate::error::{Error, Result};
use crate::recurrence::OmegaWeight;

/// Windows past this index are summed in blocks of relative width 1/64.
const EXACT_WINDOWS: u128 = 4096;

/// Search ceiling for forged `r_n`; ω evaluations stay in `f64` range well past it.
const MAX_R_BITS: u64 = 256;

/// Relative slack absorbing floating-point rounding of the ω sums.
const ROUNDING_SLACK: f64 = 1e-9;

/// The summable sequence `b_n` targeted by forging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BSpec {
    /// `b_n = b0 · ratio^n`.
    Geometric { b0: f64, ratio: f64 },
    /// `b_1, b_2, …` explicitly.
    List(Vec<f64>),
}

impl BSpec {
    pub fn value(&self, n: usize) -> Result<f64> {
        let v = match self {
            BSpec::Geometric { b0, ratio } => {
                if !(*b0 > 0.0 && *ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::invalid("geometric b needs b0 > 0 and 0 < ratio < 1"));
                }
                b0 * ratio.powi(n as i32)
            }
            BSpec::List(v) => *v.get(n.wrapping_sub(1)).ok_or_else(|| {
                Error::invalid(format!("b list has {} entries, b_{n} requested", v.len()))
            })?,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("b_{n} must be positive, got {v}")));
        }
        Ok(v)
    }
}

/// Block-summed window weights `ω(l_start · Q + 1)`.
struct Windows<'a> {
    q: f64,
    w: &'a OmegaWeight,
}

impl Windows<'_> {
    fn block(l: u128) -> (u128, u128) {
        if l <= EXACT_WINDOWS {
            return (l, l + 1);
        }
        let mut start = EXACT_WINDOWS + 1;
        loop {
            let end = start + (start / 64).max(1);
            if l < end {
                return (start, end);
            }
            start = end;
        }
    }

    fn weight(&self, l: u128) -> f64 {
        let (start, _) = Self::block(l);
        self.w.eval(start as f64 * self.q + 1.0)
    }

    /// `Σ_{l=l0}^{l1} weight(l)`.
    fn range_sum(&self, l0: u128, l1: u128) -> f64 {
        let mut sum = 0.0;
        let mut l = l0;
        while l <= l1 {
            let (start, end) = Self::block(l);
            let take = end.min(l1 + 1) - l;
            sum += take as f64 * self.w.eval(start as f64 * self.q + 1.0);
            l += take;
        }
        sum
    }

    /// Largest `Σ ω` over placements of `budget` zeros into windows
    /// `l0..=l1`, at most `per_window` in each.
    fn greedy(&self, l0: u128, l1: u128, per_window: &BigUint, budget: &BigUint) -> f64 {
        if l0 > l1 || budget.is_zero() || per_window.is_zero() {
            return 0.0;
        }
        let (full, rem) = budget.div_rem(per_window);
        let full = full.to_u128().unwrap_or(u128::MAX / 2);
        let h = biguint_f64(per_window);
        let last_full = l0.saturating_add(full).saturating_sub(1).min(l1);
        let mut sum = if full > 0 { h * self.range_sum(l0, last_full) } else { 0.0 };
        let next = l0.saturating_add(full);
        if next <= l1 && !rem.is_zero() {
            sum += biguint_f64(&rem) * self.weight(next);
        }
        sum
    }
}

/// Bound on the scale-`n` contribution used when forging `r_n`: windows are
/// unlimited and the level-`(n+1)` maximum is bounded for every `r_{n+1}`.
pub fn scale_bound(profile: &LevelProfile, next_s: u64, w: &OmegaWeight) -> f64 {
    let q = &profile.lengths[Letter::A.index()];
    let per_window = profile.max() * 2u32;
    let budget = profile.next_bound(None, next_s).into_iter().max().unwrap_or_default() * 2u32;
    let win = Windows { q: biguint_f64(q), w };
    win.greedy(1, u128::MAX / 2, &per_window, &budget) * (1.0 + ROUNDING_SLACK)
}

/// Minimal `r_n` after `prefix` with scale bound below `b`, for `ω = n^{−ε}`.
pub fn forge_next_r(prefix: &StaircaseParams, eps: f64, b: f64, s: u64) -> Result<BigUint> {
    check_eps(eps)?;
    let w = OmegaWeight::power_law(eps)?;
    let profile = bound_profile(prefix);
    next_r(&profile, &w, b, s).map(|(r, _)| r)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.5 && eps <= 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (1/2, 1]; at or below 1/2 the scale bounds do not shrink as r grows (got {eps})"
        )));
    }
    Ok(())
}

fn bound_profile(params: &StaircaseParams) -> LevelProfile {
    let mut p = LevelProfile::base().forget_histograms();
    for (r, s) in params.pairs() {
        p = p.advance(r, *s, 0);
    }
    p
}

fn next_r(prev: &LevelProfile, w: &OmegaWeight, b: f64, s: u64) -> Result<(BigUint, f64)> {
    let eval = |r: &BigUint| scale_bound(&prev.advance(r, s, 0), s, w);
    let one = BigUint::from(1u32);
    let mut hi = one.clone();
    let mut hi_val = eval(&hi);
    if hi_val < b {
        return Ok((hi, hi_val));
    }
    while !(hi_val < b) {
        if hi.bits() > MAX_R_BITS {
            return Err(Error::Overflow("forged r_n exceeds the search range"));
        }
        hi <<= 1;
        hi_val = eval(&hi);
    }
    // eval(lo) fails, eval(hi) succeeds
    let mut lo: BigUint = &hi >> 1;
    while &hi - &lo > one {
        let mid: BigUint = (&lo + &hi) >> 1;
        let v = eval(&mid);
        if v < b {
            hi = mid;
            hi_val = v;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_val))
}

/// Forged parameters with the scale bound that certified each `r_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForgeReport {
    pub params: StaircaseParams,
    pub eps: f64,
    pub b: Vec<f64>,
    pub scale_bounds: Vec<f64>,
}

/// Chooses `s_n = s` and the minimal `r_n` with scale-`n` bound below `b_n`.
pub fn forge_alpha(eps: f64, b: &BSpec, s: u64, depth: usize) -> Result<ForgeReport> {
    check_eps(eps)?;
    if s == 0 {
        return Err(Error::invalid("s must be >= 1"));
    }
    let w = OmegaWeight::power_law(eps)?;
    let mut profile = LevelProfile::base().forget_histograms();
    let mut pairs = Vec::with_capacity(depth);
    let mut bs = Vec::with_capacity(depth);
    let mut bounds = Vec::with_capacity(depth);
    for n in 1..=depth {
        let bn = b.value(n)?;
        let (r, val) = next_r(&profile, &w, bn, s)?;
        debug_assert!(val < bn);
        profile = profile.advance(&r, s, 0);
        pairs.push((r, s));
        bs.push(bn);
        bounds.push(val);
    }
    Ok(ForgeReport {
        params: StaircaseParams::new(pairs)?,
        eps,
        b: bs,
        scale_bounds: bounds,
    })
}

/// One scale of the certificate: times in `(start, end]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleTerm {
    pub scale: usize,
    pub start: BigUint,
    pub end: BigUint,
    pub window: BigUint,
    pub per_window: BigUint,
    pub budget: BigUint,
    pub bound: f64,
}

impl ScaleTerm {
    /// Largest window index with a time `<= end`.
    fn last_window(&self) -> u128 {
        if self.scale == 0 {
            return 0;
        }
        let (d, m) = self.end.div_rem(&self.window);
        let d = if m.is_zero() { d - 1u32 } else { d };
        d.to_u128().unwrap_or(u128::MAX / 2)
    }
}

/// A bound on `ζ_N(x)` valid for every `x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZetaCertificate {
    pub horizon: BigUint,
    pub omega: OmegaWeight,
    pub scales: Vec<ScaleTerm>,
    pub total: f64,
}

fn top_sum(w: &OmegaWeight, from: u64, count: u64) -> f64 {
    (from + 1..=from + count).map(|i| w.eval(i as f64)).sum()
}

pub fn zeta_certificate(params: &StaircaseParams, eps: f64, w: &OmegaWeight, n: &BigUint) -> Result<ZetaCertificate> {
    if w.power() < eps {
        return Err(Error::invalid(format!("omega power {} is below epsilon {eps}", w.power())));
    }
    let depth = params.depth();
    if depth == 0 {
        return Err(Error::invalid("certificate needs at least one level"));
    }
    let profiles = level_profile(params, depth, DEFAULT_SUPPORT_CAP)?;
    let q_top = &profiles[depth].lengths[Letter::A.index()];
    if n > q_top || n.is_zero() {
        return Err(Error::HorizonExceeded {
            requested: n.to_usize().unwrap_or(usize::MAX),
            available: q_top.to_usize().unwrap_or(usize::MAX),
        });
    }
    let mut scales = Vec::new();
    let q1 = profiles[1].lengths[Letter::A.index()].clone();
    let end0 = n.min(&q1).clone();
    let budget0 = profiles[1].max() * 2u32;
    let count0 = budget0.clone().min(end0.clone()).to_u64().ok_or(Error::Overflow("scale-0 zero count"))?;
    scales.push(ScaleTerm {
        scale: 0,
        start: BigUint::zero(),
        end: end0,
        window: q1,
        per_window: budget0.clone(),
        budget: budget0,
        bound: top_sum(w, 0, count0) * (1.0 + ROUNDING_SLACK),
    });
    for s in 1..depth {
        let start = profiles[s].lengths[Letter::A.index()].clone();
        if &start >= n {
            break;
        }
        let end = n.min(&profiles[s + 1].lengths[Letter::A.index()]).clone();
        let mut term = ScaleTerm {
            scale: s,
            start: start.clone(),
            end,
            window: start.clone(),
            per_window: profiles[s].max() * 2u32,
            budget: profiles[s + 1].max() * 2u32,
            bound: 0.0,
        };
        let win = Windows {
            q: biguint_f64(&start),
            w,
        };
        term.bound = win.greedy(1, term.last_window(), &term.per_window, &term.budget) * (1.0 + ROUNDING_SLACK);
        scales.push(term);
    }
    let total = scales.iter().map(|t| t.bound).sum::<f64>() * (1.0 + ROUNDING_SLACK);
    Ok(ZetaCertificate {
        horizon: n.clone(),
        omega: w.clone(),
        scales,
        total,
    })
}

/// A simulated prefix of one orbit checked against a certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrefixCheck {
    /// Times `1..=simulated` were computed exactly.
    pub simulated: u64,
    pub zeta_prefix: f64,
    /// `ζ_prefix` plus the certified bound on the remaining times, using the
    /// zero budget left over in each scale.
    pub upper_bound: f64,
    /// Windows or scales holding more zeros than the certificate allows.
    pub violations: usize,
}

impl PrefixCheck {
    pub fn holds(&self, cert: &ZetaCertificate) -> bool {
        self.violations == 0 && self.zeta_prefix <= self.upper_bound && self.upper_bound <= cert.total
    }
}

/// Simulates the orbit of `x` up to the last window boundary below `budget`
/// and bounds `ζ_N(x)` from there.
pub fn zeta_prefix_check(
    params: &StaircaseParams,
    cert: &ZetaCertificate,
    x: &CirclePoint,
    budget: u64,
) -> Result<PrefixCheck> {
    let cf = params.continued_fraction()?;
    let limit = cert.horizon.to_u64().map_or(budget, |h| h.min(budget));
    // last window boundary at or below the limit
    let mut b = 0u64;
    for t in &cert.scales {
        let end = t.end.to_u64().unwrap_or(u64::MAX);
        if end <= limit {
            b = end;
            continue;
        }
        if t.scale > 0 {
            let q = t.window.to_u64().expect("window below limit");
            if limit >= q {
                b = b.max(limit / q * q);
            }
        }
        break;
    }
    let w = &cert.omega;
    let sums = if b > 0 {
        ergodic_sums(&StepCocycle::staircase(), x, b as usize, &cf)?.sums
    } else {
        vec![0]
    };
    let zeros: Vec<u64> = (1..=b).filter(|&i| sums[i as usize] == 0).collect();
    let zeta_prefix = zeros.iter().map(|&i| w.eval(i as f64)).sum::<f64>() + 0.0;

    let mut violations = 0;
    let mut tail = 0.0;
    for t in &cert.scales {
        let start = t.start.to_u64().unwrap_or(u64::MAX);
        let end = t.end.to_u64().unwrap_or(u64::MAX);
        if start >= b {
            tail += t.bound;
            continue;
        }
        let seen: Vec<u64> = zeros.iter().copied().filter(|&i| i > start && i <= end).collect();
        let obs = BigUint::from(seen.len());
        if obs > t.budget {
            violations += 1;
        }
        let left = if obs > t.budget { BigUint::zero() } else { &t.budget - &obs };
        if t.scale == 0 {
            if end > b {
                let room = left.min(BigUint::from(end - b)).to_u64().unwrap_or(0);
                tail += top_sum(w, b, room);
            }
            continue;
        }
        let q = t.window.to_u64().expect("window below simulated prefix");
        let mut per: std::collections::BTreeMap<u64, u64> = std::collections::BTreeMap::new();
        for i in seen {
            *per.entry((i - 1) / q).or_default() += 1;
        }
        violations += per.values().filter(|&&c| BigUint::from(c) > t.per_window).count();
        if end > b {
            let win = Windows { q: q as f64, w };
            tail += win.greedy((b / q) as u128, t.last_window(), &t.per_window, &left);
        }
    }
    Ok(PrefixCheck {
        simulated: b,
        zeta_prefix,
        upper_bound: (zeta_prefix + tail) * (1.0 + ROUNDING_SLACK),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::sample_points;

    #[test]
    fn forge_examples() {
        let b = BSpec::Geometric { b0: 1.0, ratio: 0.5 };
        assert!(forge_alpha(0.75, &b, 1, 0).unwrap().params.pairs().is_empty());
        assert!(forge_alpha(0.5, &b, 1, 3).is_err());
        let rep = forge_alpha(0.75, &b, 1, 4).unwrap();
        let rs: Vec<BigUint> = rep.params.pairs().iter().map(|p| p.0.clone()).collect();
        assert!(rs.windows(2).all(|w| w[0] < w[1]), "{rs:?}");
        for (v, bn) in rep.scale_bounds.iter().zip(&rep.b) {
            assert!(v < bn);
        }
        assert!(rep.params.sandwich_holds().unwrap());
        // minimality: one less fails
        let w = OmegaWeight::power_law(0.75).unwrap();
        let mut prefix = LevelProfile::base().forget_histograms();
        for (n, (r, s)) in rep.params.pairs().iter().enumerate() {
            if r > &BigUint::from(1u32) {
                assert!(scale_bound(&prefix.advance(&(r - 1u32), *s, 0), *s, &w) >= rep.b[n]);
            }
            prefix = prefix.advance(r, *s, 0);
        }
    }

    #[test]
    fn larger_eps_needs_no_larger_r() {
        let b = BSpec::Geometric { b0: 1.0, ratio: 0.5 };
        let rep = forge_alpha(0.7, &b, 1, 3).unwrap();
        for n in 0..3 {
            let prefix = rep.params.prefix(n);
            let bn = b.value(n + 1).unwrap();
            let r_lo = forge_next_r(&prefix, 0.7, bn, 1).unwrap();
            let r_hi = forge_next_r(&prefix, 0.9, bn, 1).unwrap();
            assert_eq!(r_lo, rep.params.pairs()[n].0);
            assert!(r_hi <= r_lo);
        }
    }

    #[test]
    fn single_scale_certificate_dominates() {
        let params = StaircaseParams::new(vec![(3u64, 1), (2u64, 1)]).unwrap();
        let w = OmegaWeight::harmonic();
        let q2 = super::super::level_lengths(&params, 1).unwrap()[0].clone();
        let cert = zeta_certificate(&params, 1.0, &w, &q2).unwrap();
        assert_eq!(cert.scales.len(), 1);
        assert!(cert.total >= w.eval(1.0));
        for x in sample_points(&StepCocycle::staircase(), 30, 4) {
            let chk = zeta_prefix_check(&params, &cert, &x, 1 << 20).unwrap();
            assert_eq!(chk.simulated, q2.to_u64().unwrap());
            assert!(chk.holds(&cert), "{chk:?}");
        }
    }

    #[test]
    fn multi_scale_certificate_dominates() {
        let params = StaircaseParams::new(vec![(2u64, 1), (3u64, 2), (2u64, 1), (4u64, 1)]).unwrap();
        let w = OmegaWeight::power_law(0.8).unwrap();
        let n = super::super::level_lengths(&params, 4).unwrap()[0].clone();
        let cert = zeta_certificate(&params, 0.8, &w, &n).unwrap();
        assert_eq!(cert.scales.len(), 4);
        for x in sample_points(&StepCocycle::staircase(), 40, 9) {
            let chk = zeta_prefix_check(&params, &cert, &x, 1 << 20).unwrap();
            assert_eq!(BigUint::from(chk.simulated), n);
            assert!(chk.holds(&cert), "{chk:?}");
        }
        assert!(zeta_certificate(&params, 0.9, &w, &n).is_err());
        assert!(zeta_certificate(&params, 0.8, &w, &(&n + 1u32)).is_err());
    }
}
