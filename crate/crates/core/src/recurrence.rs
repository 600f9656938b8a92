//! Weight functions ω, the ζ series `Σ ω(n)[S_n = 0]`, and the
//! balls-and-bins statistics behind ω-recurrence.
//!
//! Times `1..=N` are balls, the values of `S_n` are bins. A bin is crowded
//! when it holds at least `ε₂N/ρ` balls; a ball `m` is predicting when the
//! next `N` sums revisit `S_m` at least `ε₂ε₃N/ρ` times.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{ergodic_sums, CirclePoint, StepCocycle, SumTrace};
use crate::contfrac::ContinuedFraction;
use crate::error::{Error, Result};

/// Highest supported iterated logarithm; `log⁽⁵⁾ n > 0` needs `n > e^{e^{e^e}}`.
pub const MAX_ITERATED_LOG: u32 = 4;

/// `ω(n) = (ln n)^m / (n^z · log⁽ʲ⁰⁾n ⋯ log⁽ʲ⁾n)`, held at `ω(n₀)` for `n < n₀`.
///
/// `log⁽¹⁾ = ln` and `log⁽ⁱ⁺¹⁾ = ln ∘ log⁽ⁱ⁾`. The iterated-log range is empty
/// when `j < j₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OmegaFields", into = "OmegaFields")]
pub struct OmegaWeight {
    power: f64,
    log_power: f64,
    iter_start: u32,
    iter_end: u32,
    valid_from: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OmegaFields {
    power: f64,
    #[serde(default)]
    log_power: f64,
    #[serde(default = "default_iter_start")]
    iter_start: u32,
    #[serde(default = "default_iter_end")]
    iter_end: u32,
    #[serde(default)]
    valid_from: Option<u64>,
}

fn default_iter_start() -> u32 {
    2
}

fn default_iter_end() -> u32 {
    1
}

impl TryFrom<OmegaFields> for OmegaWeight {
    type Error = Error;

    fn try_from(f: OmegaFields) -> Result<Self> {
        let w = OmegaWeight::new(f.power, f.log_power, f.iter_start, f.iter_end)?;
        match f.valid_from {
            Some(n0) => w.with_valid_from(n0),
            None => Ok(w),
        }
    }
}

impl From<OmegaWeight> for OmegaFields {
    fn from(w: OmegaWeight) -> Self {
        OmegaFields {
            power: w.power,
            log_power: w.log_power,
            iter_start: w.iter_start,
            iter_end: w.iter_end,
            valid_from: Some(w.valid_from),
        }
    }
}

fn iterated_log(n: f64, depth: u32) -> f64 {
    let mut x = n;
    for _ in 0..depth {
        x = x.ln();
    }
    x
}

impl OmegaWeight {
    pub fn new(power: f64, log_power: f64, iter_start: u32, iter_end: u32) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::invalid(format!("power z must be >= 0, got {power}")));
        }
        if !(log_power.is_finite() && log_power >= 0.0) {
            return Err(Error::invalid(format!("log power m must be >= 0, got {log_power}")));
        }
        if power == 0.0 && log_power > 0.0 {
            return Err(Error::invalid("(ln n)^m with z = 0 is increasing"));
        }
        if iter_start < 2 {
            return Err(Error::invalid("iterated logs start at depth 2"));
        }
        if iter_end >= iter_start && iter_end > MAX_ITERATED_LOG {
            return Err(Error::invalid(format!(
                "iterated logs deeper than {MAX_ITERATED_LOG} are not supported"
            )));
        }
        let mut w = OmegaWeight {
            power,
            log_power,
            iter_start,
            iter_end,
            valid_from: 1,
        };
        w.valid_from = w.monotone_from();
        Ok(w)
    }

    /// `1/n^z`.
    pub fn power_law(z: f64) -> Result<Self> {
        Self::new(z, 0.0, 2, 1)
    }

    /// `1/n`.
    pub fn harmonic() -> Self {
        Self::power_law(1.0).expect("valid")
    }

    /// Raise the clamping threshold; it cannot go below the monotone range.
    pub fn with_valid_from(mut self, n0: u64) -> Result<Self> {
        let min = self.monotone_from();
        if n0 < min {
            return Err(Error::invalid(format!("valid_from must be >= {min}")));
        }
        self.valid_from = n0;
        Ok(self)
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn log_power(&self) -> f64 {
        self.log_power
    }

    pub fn iterated_range(&self) -> Option<(u32, u32)> {
        (self.iter_end >= self.iter_start).then_some((self.iter_start, self.iter_end))
    }

    pub fn valid_from(&self) -> u64 {
        self.valid_from
    }

    /// Smallest integer where every factor is positive and the power-log
    /// part has started to decrease (`n ≥ e^{m/z}`).
    fn monotone_from(&self) -> u64 {
        let mut n0: u64 = 1;
        if self.log_power > 0.0 {
            n0 = n0.max((self.log_power / self.power).exp().ceil() as u64);
        }
        if let Some((_, end)) = self.iterated_range() {
            // log⁽ᵉⁿᵈ⁾ n > 0 iff n > exp⁽ᵉⁿᵈ⁻¹⁾(1); the deeper factors then follow
            let mut t = 1.0f64;
            for _ in 0..end - 1 {
                t = t.exp();
            }
            n0 = n0.max(t.floor() as u64 + 1);
            while !self.factors_positive(n0 as f64) {
                n0 += 1;
            }
        }
        n0
    }

    fn factors_positive(&self, n: f64) -> bool {
        match self.iterated_range() {
            None => true,
            Some((s, e)) => (s..=e).all(|d| iterated_log(n, d) > 0.0),
        }
    }

    fn raw(&self, n: f64) -> f64 {
        let mut num = if self.log_power > 0.0 {
            n.ln().powf(self.log_power)
        } else {
            1.0
        };
        num /= n.powf(self.power);
        if let Some((s, e)) = self.iterated_range() {
            let mut x = iterated_log(n, s - 1);
            for _ in s..=e {
                x = x.ln();
                num /= x;
            }
        }
        num
    }

    /// ω at a real argument `n ≥ 1`.
    pub fn eval(&self, n: f64) -> f64 {
        self.raw(n.max(self.valid_from as f64))
    }
}

impl fmt::Display for OmegaWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z={},m={}", self.power, self.log_power)?;
        if let Some((s, e)) = self.iterated_range() {
            write!(f, ",iter={s}..{e}")?;
        }
        Ok(())
    }
}

/// Accepts `1/n`, `n^-z`, or `z=<z>[,m=<m>][,iter=<j0>..<j>][,from=<n0>]`.
impl FromStr for OmegaWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1/n" {
            return Ok(Self::harmonic());
        }
        if let Some(z) = s.strip_prefix("n^-") {
            let z: f64 = z
                .parse()
                .map_err(|_| Error::invalid(format!("bad exponent in {s:?}")))?;
            return Self::power_law(z);
        }
        let (mut z, mut m, mut range, mut from) = (None, 0.0, (2, 1), None);
        for part in s.split(',') {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("expected key=value in {part:?}")))?;
            let bad = || Error::invalid(format!("bad value for {key}: {val:?}"));
            match key.trim() {
                "z" => z = Some(val.trim().parse::<f64>().map_err(|_| bad())?),
                "m" => m = val.trim().parse::<f64>().map_err(|_| bad())?,
                "iter" => {
                    let (a, b) = val.split_once("..").ok_or_else(bad)?;
                    range = (
                        a.trim().parse().map_err(|_| bad())?,
                        b.trim().parse().map_err(|_| bad())?,
                    );
                }
                "from" => from = Some(val.trim().parse::<u64>().map_err(|_| bad())?),
                other => return Err(Error::invalid(format!("unknown omega key {other:?}"))),
            }
        }
        let z = z.ok_or_else(|| Error::invalid("omega needs z=<power>"))?;
        let w = OmegaWeight::new(z, m, range.0, range.1)?;
        match from {
            Some(n0) => w.with_valid_from(n0),
            None => Ok(w),
        }
    }
}

pub fn omega_eval(w: &OmegaWeight, n: u64) -> f64 {
    w.eval(n as f64)
}

/// `ω(n) = n^{-(1 - dλ')}`.
pub fn omega_from_lyapunov(d: u32, lambda: f64) -> Result<OmegaWeight> {
    let dl = d as f64 * lambda;
    if d == 0 || !(dl > 0.0 && dl < 1.0) {
        return Err(Error::invalid(format!("need 0 < d*lambda < 1, got {dl}")));
    }
    OmegaWeight::power_law(1.0 - dl)
}

/// Tolerances ε₁, ε₂, ε₃ of the balls-and-bins argument and the gap δ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct RecurrenceConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub delta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "one")]
    eps1: f64,
    #[serde(default = "half")]
    eps2: f64,
    #[serde(default = "half")]
    eps3: f64,
    #[serde(default = "half")]
    delta: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl TryFrom<RawConfig> for RecurrenceConfig {
    type Error = Error;

    fn try_from(r: RawConfig) -> Result<Self> {
        RecurrenceConfig::new(r.eps1, r.eps2, r.eps3, r.delta)
    }
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        RecurrenceConfig {
            eps1: 1.0,
            eps2: 0.5,
            eps3: 0.5,
            delta: 0.5,
        }
    }
}

impl RecurrenceConfig {
    pub fn new(eps1: f64, eps2: f64, eps3: f64, delta: f64) -> Result<Self> {
        if !(eps1 > 0.0 && eps1 <= 1.0) {
            return Err(Error::invalid(format!("eps1 must lie in (0,1], got {eps1}")));
        }
        for (name, v) in [("eps2", eps2), ("eps3", eps3), ("delta", delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        Ok(RecurrenceConfig {
            eps1,
            eps2,
            eps3,
            delta,
        })
    }
}

/// `Σ_{i=1}^{N} ω(i)·[S_i = 0]`.
pub fn zeta_partial(trace: &SumTrace, w: &OmegaWeight, n: usize) -> Result<f64> {
    if n > trace.horizon() {
        return Err(Error::HorizonExceeded {
            requested: n,
            available: trace.horizon(),
        });
    }
    Ok((1..=n)
        .filter(|&i| trace.sums[i] == 0)
        .map(|i| w.eval(i as f64))
        .sum())
}

/// Smallest `n` with at least a fraction `ε₁` of the samples `≤ n`.
pub fn rho_quantile(samples: &[u64], eps1: f64) -> Result<u64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    if !(eps1 > 0.0 && eps1 <= 1.0) {
        return Err(Error::invalid(format!("eps1 must lie in (0,1], got {eps1}")));
    }
    let mut s = samples.to_vec();
    s.sort_unstable();
    let len = s.len();
    let k = (1..=len)
        .find(|&k| k as f64 >= eps1 * len as f64)
        .unwrap_or(len);
    Ok(s[k - 1])
}

/// Crowded bins among the first `N` sums.
#[derive(Clone, Debug, PartialEq)]
pub struct CrowdedBins {
    pub threshold: f64,
    /// Crowded value → number of balls in it.
    pub bins: BTreeMap<i64, usize>,
    pub ball_total: usize,
}

impl CrowdedBins {
    pub fn values(&self) -> Vec<i64> {
        self.bins.keys().copied().collect()
    }
}

pub fn crowded_bins(trace: &SumTrace, n: usize, rho: f64, eps2: f64) -> Result<CrowdedBins> {
    if n > trace.horizon() {
        return Err(Error::HorizonExceeded {
            requested: n,
            available: trace.horizon(),
        });
    }
    if rho < 1.0 {
        return Err(Error::invalid("rho must be >= 1"));
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &s in &trace.sums[1..=n] {
        *counts.entry(s).or_default() += 1;
    }
    let threshold = eps2 * n as f64 / rho;
    counts.retain(|_, c| *c as f64 >= threshold);
    let ball_total = counts.values().sum();
    Ok(CrowdedBins {
        threshold,
        bins: counts,
        ball_total,
    })
}

/// `(1 − ε₂)N`, the guaranteed crowded-ball mass when ρ is the range.
pub fn crowded_lower_bound(n: usize, eps2: f64) -> f64 {
    (1.0 - eps2) * n as f64
}

/// `#{1 <= m <= N : #{n in [1,N] : S_{m+n} = S_m} >= ε₂ε₃N/ρ}`.
pub fn predicting_balls(trace: &SumTrace, n: usize, rho: f64, eps2: f64, eps3: f64) -> Result<usize> {
    if 2 * n > trace.horizon() {
        return Err(Error::HorizonExceeded {
            requested: 2 * n,
            available: trace.horizon(),
        });
    }
    if n == 0 {
        return Ok(0);
    }
    let s = &trace.sums;
    let threshold = eps2 * eps3 * n as f64 / rho;
    // window holds S_{m+1} ..= S_{m+n}
    let mut window: HashMap<i64, usize> = HashMap::new();
    for &v in &s[2..=n + 1] {
        *window.entry(v).or_default() += 1;
    }
    let mut count = 0;
    for m in 1..=n {
        if window.get(&s[m]).copied().unwrap_or(0) as f64 >= threshold {
            count += 1;
        }
        if m < n {
            let out = window.get_mut(&s[m + 1]).expect("in window");
            *out -= 1;
            *window.entry(s[m + n + 1]).or_default() += 1;
        }
    }
    Ok(count)
}

/// `(1 − ε₂)(1 − ε₃)N − ρ`.
pub fn predicting_lower_bound(n: usize, rho: f64, eps2: f64, eps3: f64) -> f64 {
    (1.0 - eps2) * (1.0 - eps3) * n as f64 - rho
}

/// Seeded dyadic base point for sample `i`, independent of thread scheduling.
pub fn sample_point(seed: u64, i: u64) -> CirclePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    CirclePoint::dyadic(rng.gen::<u64>() >> 11, 53)
}

/// Fraction of sampled `x` with `zero_hits(N) >= ε₂ε₃N/ρ`.
#[allow(clippy::too_many_arguments)]
pub fn bk_fraction(
    f: &StepCocycle,
    cf: &ContinuedFraction,
    n: usize,
    rho: f64,
    eps2: f64,
    eps3: f64,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    if sample_count == 0 {
        return Err(Error::invalid("sample_count must be >= 1"));
    }
    let threshold = eps2 * eps3 * n as f64 / rho;
    let hits = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let trace = ergodic_sums(f, &sample_point(seed, i), n, cf)?;
            Ok(trace.zero_hits(n)? as f64 >= threshold)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / sample_count as f64)
}

/// `ε₁(1 − ε₂)(1 − ε₃) − ρ/N`.
pub fn bk_lower_bound(n: usize, rho: f64, cfg: &RecurrenceConfig) -> f64 {
    cfg.eps1 * (1.0 - cfg.eps2) * (1.0 - cfg.eps3) - rho / n as f64
}

/// Whether `N_k/ρ_k >= (δ/(1−δ)) Σ_{i<k} N_i/ρ_i` for each `k`.
pub fn gap_condition(ns: &[f64], rhos: &[f64], delta: f64) -> Result<Vec<bool>> {
    check_lists(ns, rhos)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta must lie in (0,1)"));
    }
    let factor = delta / (1.0 - delta);
    let mut prefix = 0.0;
    Ok(ns
        .iter()
        .zip(rhos)
        .map(|(n, r)| {
            let ratio = n / r;
            let ok = ratio >= factor * prefix;
            prefix += ratio;
            ok
        })
        .collect())
}

fn check_lists(ns: &[f64], rhos: &[f64]) -> Result<()> {
    if ns.len() != rhos.len() {
        return Err(Error::invalid("N and rho lists differ in length"));
    }
    if ns.iter().chain(rhos).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("N and rho entries must be positive"));
    }
    Ok(())
}

/// Partial sums of `Σ_k ω(N_k) N_k / ρ_k` for `K' = 1..=K`.
pub fn divergence_series(ns: &[f64], rhos: &[f64], w: &OmegaWeight, k: usize) -> Result<Vec<f64>> {
    check_lists(ns, rhos)?;
    if k > ns.len() {
        return Err(Error::invalid(format!("K = {k} exceeds list length {}", ns.len())));
    }
    let mut acc = 0.0;
    Ok(ns[..k]
        .iter()
        .zip(rhos)
        .map(|(n, r)| {
            acc += w.eval(*n) * n / r;
            acc
        })
        .collect())
}

/// `C_k = (𝐚_k / q_k) Σ_{i=1}^{k−1} q_i / 𝐚_i` for `k = 1..=K`, exactly.
pub fn ck_rotation_exact(cf: &ContinuedFraction, k: usize) -> Result<Vec<BigRational>> {
    cf.ensure_depth(k)?;
    let mut out = Vec::with_capacity(k);
    let mut acc = BigRational::zero();
    for i in 1..=k {
        let a = cf.digit_sums(i)?;
        let q = cf.q(i)?;
        out.push(&acc * BigRational::new(a.clone(), q.clone()));
        acc += BigRational::new(q, a);
    }
    Ok(out)
}

pub fn ck_rotation(cf: &ContinuedFraction, k: usize) -> Result<Vec<f64>> {
    Ok(ck_rotation_exact(cf, k)?
        .iter()
        .map(|c| c.to_f64().unwrap_or(f64::INFINITY))
        .collect())
}

/// `C_k = Σ_{j=1}^{k−1} (k/(k−j))^{M+1} γ^{j(θ₂−θ₁)/θ₁}` for `k = 1..=K`.
pub fn ck_iet(theta1: f64, theta2: f64, m: u32, gamma: f64, k: usize) -> Result<Vec<f64>> {
    if !(theta2 >= 0.0 && theta2 < theta1) {
        return Err(Error::invalid("need 0 <= theta2 < theta1"));
    }
    if !(gamma > 1.0) || m < 1 {
        return Err(Error::invalid("need gamma > 1 and M >= 1"));
    }
    let rate = (theta2 - theta1) / theta1 * gamma.ln();
    Ok((1..=k)
        .map(|k| {
            let kf = k as f64;
            // smallest terms first
            (1..k)
                .rev()
                .map(|j| {
                    let jf = j as f64;
                    ((m + 1) as f64 * (kf / (kf - jf)).ln() + jf * rate).exp()
                })
                .sum()
        })
        .collect())
}

/// `𝐚_k` and `q_k` for `k = 1..=K` as floating point lists.
pub fn rotation_scales(cf: &ContinuedFraction, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ns = Vec::with_capacity(k);
    let mut rhos = Vec::with_capacity(k);
    for i in 1..=k {
        ns.push(crate::contfrac::abs_f64(&cf.q(i)?));
        rhos.push(crate::contfrac::abs_f64(&cf.digit_sums(i)?));
    }
    Ok((ns, rhos))
}

/// Range sizes `#{S_1..S_N}` over sampled base points.
pub fn range_samples(f: &StepCocycle, cf: &ContinuedFraction, n: usize, sample_count: usize, seed: u64) -> Result<Vec<u64>> {
    (0..sample_count as u64)
        .into_par_iter()
        .map(|i| {
            let trace = ergodic_sums(f, &sample_point(seed, i), n, cf)?;
            Ok(trace.range_count(n)? as u64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::CirclePoint;

    fn trace(s: &[i64]) -> SumTrace {
        SumTrace::from_sums(CirclePoint::zero(), s.to_vec()).unwrap()
    }

    #[test]
    fn omega_examples() {
        assert!((omega_eval(&OmegaWeight::harmonic(), 10) - 0.1).abs() < 1e-15);
        let w = OmegaWeight::power_law(0.75).unwrap();
        assert!((omega_eval(&w, 16) - 0.125).abs() < 1e-15);
        let w = OmegaWeight::new(1.0, 1.0, 2, 1).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!((w.eval(e2) - 2.0 / e2).abs() < 1e-12);
        assert_eq!(w.valid_from(), 3);
        // clamped below n0
        assert_eq!(w.eval(1.0), w.eval(3.0));
    }

    #[test]
    fn omega_parse_and_validation() {
        let w: OmegaWeight = "z=0.5,m=1,iter=2..2".parse().unwrap();
        assert!((w.eval(8.0) - 8f64.ln() / (8f64.sqrt() * 8f64.ln().ln())).abs() < 1e-12);
        assert_eq!("1/n".parse::<OmegaWeight>().unwrap(), OmegaWeight::harmonic());
        assert_eq!("n^-0.75".parse::<OmegaWeight>().unwrap(), OmegaWeight::power_law(0.75).unwrap());
        assert!("z=0,m=1".parse::<OmegaWeight>().is_err());
        assert!("z=1,iter=2..5".parse::<OmegaWeight>().is_err());
        assert!("z=1,q=2".parse::<OmegaWeight>().is_err());
        let w: OmegaWeight = "z=1,iter=3..4".parse().unwrap();
        assert!(w.eval(w.valid_from() as f64).is_finite());
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(serde_json::from_str::<OmegaWeight>(&json).unwrap(), w);
    }

    #[test]
    fn omega_monotone_samples() {
        for w in [
            OmegaWeight::harmonic(),
            OmegaWeight::new(0.5, 2.0, 2, 3).unwrap(),
            OmegaWeight::new(1.0, 0.0, 3, 4).unwrap(),
        ] {
            let mut prev = w.eval(1.0);
            for n in (1..200_000u64).step_by(7) {
                let cur = w.eval(n as f64);
                assert!(cur <= prev * (1.0 + 1e-12), "{w} at {n}");
                prev = cur;
            }
        }
    }

    #[test]
    fn lyapunov_weights() {
        assert_eq!(omega_from_lyapunov(1, 0.5).unwrap().power(), 0.5);
        assert_eq!(omega_from_lyapunov(2, 0.25).unwrap().power(), 0.5);
        assert!((omega_from_lyapunov(1, 1e-9).unwrap().power() - 1.0).abs() < 1e-8);
        assert!(omega_from_lyapunov(2, 0.5).is_err());
    }

    #[test]
    fn zeta_examples() {
        let w = OmegaWeight::harmonic();
        assert_eq!(zeta_partial(&trace(&[0, 1, 2, 1]), &w, 3).unwrap(), 0.0);
        assert!((zeta_partial(&trace(&[0, 1, 0, 1, 0]), &w, 4).unwrap() - 0.75).abs() < 1e-15);
        assert!(zeta_partial(&trace(&[0, 1]), &w, 2).is_err());
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_quantile(&[5, 5, 5], 1.0).unwrap(), 5);
        assert_eq!(rho_quantile(&[1, 2, 3, 4], 0.5).unwrap(), 2);
        assert_eq!(rho_quantile(&[4, 3, 2, 1], 0.6).unwrap(), 3);
    }

    #[test]
    fn crowded_examples() {
        let t = trace(&[0, 1, 2, 1, 2, 1]);
        let c = crowded_bins(&t, 5, 2.0, 0.8).unwrap();
        assert_eq!(c.values(), vec![1, 2]);
        assert_eq!(c.ball_total, 5);
        let c = crowded_bins(&t, 5, 5.0, 0.1).unwrap();
        assert_eq!(c.values(), vec![1, 2]);
    }

    #[test]
    fn predicting_examples() {
        let zeros = trace(&[0; 21]);
        assert_eq!(predicting_balls(&zeros, 10, 1.0, 0.5, 0.5).unwrap(), 10);
        let ones: Vec<i64> = (0..21).collect();
        assert_eq!(predicting_balls(&trace(&ones), 10, 1.0, 0.5, 0.5).unwrap(), 0);
        assert!(predicting_balls(&trace(&ones), 11, 1.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn gap_examples() {
        let ns: Vec<f64> = (1..=12).map(|k| 2f64.powi(k)).collect();
        let ones = vec![1.0; 12];
        assert!(gap_condition(&ns, &ones, 0.5).unwrap().iter().all(|&b| b));
        let ns: Vec<f64> = (1..=12).map(|k| k as f64).collect();
        let g = gap_condition(&ns, &ones, 0.5).unwrap();
        for (i, ok) in g.iter().enumerate() {
            assert_eq!(*ok, i + 1 < 4, "k = {}", i + 1);
        }
    }

    #[test]
    fn divergence_examples() {
        let ns = vec![3.0, 10.0, 1e6];
        let s = divergence_series(&ns, &[1.0; 3], &OmegaWeight::harmonic(), 3).unwrap();
        for (i, v) in s.iter().enumerate() {
            assert!((v - (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ck_examples() {
        let cf = ContinuedFraction::constant(2).unwrap();
        let c = ck_rotation_exact(&cf, 3).unwrap();
        assert_eq!(c[0], BigRational::zero());
        assert_eq!(c[1], BigRational::new(4.into(), 5.into()));
        assert_eq!(c[2], BigRational::new(9.into(), 8.into()));
        let c = ck_iet(1.0, 0.0, 1, 2.0, 2).unwrap();
        assert_eq!(c[0], 0.0);
        assert!((c[1] - 2.0).abs() < 1e-12);
        assert!(ck_iet(1.0, 1.0, 1, 2.0, 2).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RecurrenceConfig::new(1.0, 0.5, 0.5, 0.5).is_ok());
        assert!(RecurrenceConfig::new(0.0, 0.5, 0.5, 0.5).is_err());
        assert!(RecurrenceConfig::new(1.0, 1.0, 0.5, 0.5).is_err());
        let c: RecurrenceConfig = serde_json::from_str(r#"{"eps2": 0.9}"#).unwrap();
        assert_eq!(c.eps2, 0.9);
        assert_eq!(c.eps1, 1.0);
        assert!(serde_json::from_str::<RecurrenceConfig>(r#"{"eps4": 0.9}"#).is_err());
    }
}
