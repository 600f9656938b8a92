//! Rotation skew products with ℤ-valued step cocycles.
//!
//! Points of the circle are kept exactly as `u + vα mod 1` with `u`
//! rational and `v` an integer, so every orbit comparison is decided by
//! [`ContinuedFraction::sign_of`]. Long orbits run through [`Orbit`], which
//! screens each comparison in floating point with a rigorous error bound
//! and only falls back to exact arithmetic when the screen is inconclusive.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contfrac::{mod_inverse, ContinuedFraction};
use crate::error::{Error, Result};

/// The point `(u + vα) mod 1`, kept canonical: `0 <= u + vα < 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CirclePoint {
    u: BigRational,
    v: BigInt,
}

impl CirclePoint {
    pub fn zero() -> Self {
        CirclePoint {
            u: BigRational::zero(),
            v: BigInt::zero(),
        }
    }

    /// Canonical representative of `u + vα mod 1`.
    pub fn new(u: BigRational, v: BigInt, cf: &ContinuedFraction) -> Result<Self> {
        let (a, _) = cf.alpha_f64();
        let approx = u.to_f64().unwrap_or(0.0) + v.to_f64().unwrap_or(0.0) * a;
        let mut u = u - BigRational::from_integer(BigInt::from(approx.floor() as i64));
        // settle the integer shift exactly
        loop {
            if cf.sign_of(&u, &v)? == Ordering::Less {
                u += BigRational::one();
                continue;
            }
            let shifted = &u - BigRational::one();
            if cf.sign_of(&shifted, &v)? != Ordering::Less {
                u = shifted;
                continue;
            }
            break;
        }
        Ok(CirclePoint { u, v })
    }

    /// A rational point `u mod 1`.
    pub fn rational(u: BigRational) -> Self {
        let fl = u.floor();
        CirclePoint {
            u: u - fl,
            v: BigInt::zero(),
        }
    }

    /// The dyadic point `m / 2^bits`.
    pub fn dyadic(m: u64, bits: u32) -> Self {
        Self::rational(BigRational::new(BigInt::from(m), BigInt::one() << bits))
    }

    pub fn u(&self) -> &BigRational {
        &self.u
    }

    pub fn v(&self) -> &BigInt {
        &self.v
    }

    pub fn to_f64(&self, cf: &ContinuedFraction) -> f64 {
        let (a, _) = cf.alpha_f64();
        self.u.to_f64().unwrap_or(0.0) + self.v.to_f64().unwrap_or(0.0) * a
    }

    /// Exact comparison of the real representatives in `[0, 1)`.
    pub fn cmp_exact(&self, other: &CirclePoint, cf: &ContinuedFraction) -> Result<Ordering> {
        cf.sign_of(&(&self.u - &other.u), &(&self.v - &other.v))
    }

    /// `x + nα mod 1`.
    pub fn rotate(&self, n: &BigInt, cf: &ContinuedFraction) -> Result<CirclePoint> {
        if n.is_zero() {
            return Ok(self.clone());
        }
        CirclePoint::new(self.u.clone(), &self.v + n, cf)
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.u, self.v)
    }
}

/// Parses `"u,v"` without canonicalizing; see [`CirclePoint::new`].
impl FromStr for CirclePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (u, v) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("expected \"u,v\", got {s:?}")))?;
        let u: BigRational = u
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad rational {u:?}")))?;
        let v: BigInt = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad integer {v:?}")))?;
        Ok(CirclePoint { u, v })
    }
}

/// `x + nα mod 1`.
pub fn rotate(x: &CirclePoint, n: i64, cf: &ContinuedFraction) -> Result<CirclePoint> {
    x.rotate(&BigInt::from(n), cf)
}

/// A ℤ-valued step function on the circle, left-closed on each interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepCocycle {
    breakpoints: Vec<CirclePoint>,
    values: Vec<i64>,
}

/// JSON wire form: breakpoints as `"u,v"` strings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CocycleSpec {
    pub breakpoints: Vec<String>,
    pub values: Vec<i64>,
}

impl StepCocycle {
    pub fn new(breakpoints: Vec<CirclePoint>, values: Vec<i64>, cf: &ContinuedFraction) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::invalid("need one value per breakpoint and at least one interval"));
        }
        let mut canon = Vec::with_capacity(breakpoints.len());
        for b in breakpoints {
            canon.push(CirclePoint::new(b.u, b.v, cf)?);
        }
        if canon[0] != CirclePoint::zero() {
            return Err(Error::invalid("first breakpoint must be 0"));
        }
        for w in canon.windows(2) {
            if w[0].cmp_exact(&w[1], cf)? != Ordering::Less {
                return Err(Error::invalid("breakpoints must be strictly increasing"));
            }
        }
        Ok(StepCocycle {
            breakpoints: canon,
            values,
        })
    }

    /// `χ[0,1/2) − χ[1/2,1)`.
    pub fn staircase() -> Self {
        StepCocycle {
            breakpoints: vec![
                CirclePoint::zero(),
                CirclePoint::rational(BigRational::new(1.into(), 2.into())),
            ],
            values: vec![1, -1],
        }
    }

    pub fn constant(c: i64) -> Self {
        StepCocycle {
            breakpoints: vec![CirclePoint::zero()],
            values: vec![c],
        }
    }

    pub fn breakpoints(&self) -> &[CirclePoint] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Sum of absolute jumps, including the wrap at 0.
    pub fn variation(&self) -> u64 {
        let n = self.values.len();
        (0..n)
            .map(|i| (self.values[(i + 1) % n] - self.values[i]).unsigned_abs())
            .sum()
    }

    /// Interval lengths as exact elements `(u, v)` of `ℚ + ℤα`.
    pub fn interval_lengths(&self) -> Vec<(BigRational, BigInt)> {
        let n = self.breakpoints.len();
        (0..n)
            .map(|i| {
                let (ru, rv) = if i + 1 < n {
                    (self.breakpoints[i + 1].u.clone(), self.breakpoints[i + 1].v.clone())
                } else {
                    (BigRational::one(), BigInt::zero())
                };
                (ru - &self.breakpoints[i].u, rv - &self.breakpoints[i].v)
            })
            .collect()
    }

    /// `∫ f = U + Vα`, exactly.
    pub fn mean(&self) -> (BigRational, BigInt) {
        let mut u = BigRational::zero();
        let mut v = BigInt::zero();
        for ((lu, lv), &c) in self.interval_lengths().into_iter().zip(&self.values) {
            u += lu * BigRational::from_integer(c.into());
            v += lv * c;
        }
        (u, v)
    }

    /// α is irrational, so `U + Vα = 0` iff `U = V = 0`.
    pub fn is_mean_zero(&self) -> bool {
        let (u, v) = self.mean();
        u.is_zero() && v.is_zero()
    }

    pub fn evaluate(&self, x: &CirclePoint, cf: &ContinuedFraction) -> Result<i64> {
        Ok(self.values[self.locate(x, cf)?])
    }

    fn locate(&self, x: &CirclePoint, cf: &ContinuedFraction) -> Result<usize> {
        let mut idx = 0;
        for (i, b) in self.breakpoints.iter().enumerate().skip(1) {
            if x.cmp_exact(b, cf)? == Ordering::Less {
                break;
            }
            idx = i;
        }
        Ok(idx)
    }

    pub fn to_spec(&self) -> CocycleSpec {
        CocycleSpec {
            breakpoints: self.breakpoints.iter().map(ToString::to_string).collect(),
            values: self.values.clone(),
        }
    }

    pub fn from_spec(spec: &CocycleSpec, cf: &ContinuedFraction) -> Result<Self> {
        let bps = spec
            .breakpoints
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<CirclePoint>>>()?;
        StepCocycle::new(bps, spec.values.clone(), cf)
    }
}

/// Value of `f` at `x`.
pub fn evaluate(f: &StepCocycle, x: &CirclePoint, cf: &ContinuedFraction) -> Result<i64> {
    f.evaluate(x, cf)
}

#[derive(Clone, Copy, Debug)]
struct FastPoint {
    num: i128,
    den: i128,
    v: i64,
}

impl FastPoint {
    fn from_point(x: &CirclePoint) -> Option<Self> {
        Some(FastPoint {
            num: x.u.numer().to_i128()?,
            den: x.u.denom().to_i128()?,
            v: x.v.to_i64()?,
        })
    }

    fn to_point(self) -> CirclePoint {
        CirclePoint {
            u: BigRational::new(self.num.into(), self.den.into()),
            v: self.v.into(),
        }
    }
}

/// Step-by-step orbit of a point under the rotation, reporting which
/// interval of a fixed partition each orbit point falls in.
pub struct Orbit<'a> {
    cf: &'a ContinuedFraction,
    partition: Vec<CirclePoint>,
    fast_partition: Option<Vec<FastPoint>>,
    fast: Option<FastPoint>,
    slow: CirclePoint,
    alpha: f64,
    alpha_err: f64,
}

impl<'a> Orbit<'a> {
    /// `partition` must be canonical, strictly increasing and start at 0.
    pub fn new(partition: &[CirclePoint], x: &CirclePoint, cf: &'a ContinuedFraction) -> Self {
        let fast_partition: Option<Vec<FastPoint>> =
            partition.iter().map(FastPoint::from_point).collect();
        let (alpha, alpha_err) = cf.alpha_f64();
        Orbit {
            cf,
            partition: partition.to_vec(),
            fast: if fast_partition.is_some() {
                FastPoint::from_point(x)
            } else {
                None
            },
            fast_partition,
            slow: x.clone(),
            alpha,
            alpha_err,
        }
    }

    /// Current point.
    pub fn point(&self) -> CirclePoint {
        match self.fast {
            Some(p) => p.to_point(),
            None => self.slow.clone(),
        }
    }

    /// Sign of `p/q + wα`, screened in floating point first.
    fn sign(&self, p: i128, q: i128, w: i64) -> Result<Ordering> {
        let r = p as f64 / q as f64;
        let wa = w as f64 * self.alpha;
        let est = r + wa;
        let err = (w as f64).abs() * self.alpha_err + 8.0 * f64::EPSILON * (r.abs() + wa.abs()) + 1e-300;
        if est > err {
            return Ok(Ordering::Greater);
        }
        if est < -err {
            return Ok(Ordering::Less);
        }
        self.cf
            .sign_of(&BigRational::new(p.into(), q.into()), &BigInt::from(w))
    }

    /// Sign of `x − b` for fast points, `None` on i128 overflow.
    fn fast_cmp(&self, x: FastPoint, b: FastPoint) -> Option<Result<Ordering>> {
        let lhs = x.num.checked_mul(b.den)?;
        let rhs = b.num.checked_mul(x.den)?;
        let p = lhs.checked_sub(rhs)?;
        let q = x.den.checked_mul(b.den)?;
        let w = x.v.checked_sub(b.v)?;
        Some(self.sign(p, q, w))
    }

    fn locate_fast(&self, x: FastPoint, bps: &[FastPoint]) -> Option<Result<usize>> {
        // last breakpoint <= x, breakpoint 0 always qualifies
        let (mut lo, mut hi) = (0usize, bps.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            match self.fast_cmp(x, bps[mid])? {
                Ok(Ordering::Less) => hi = mid,
                Ok(_) => lo = mid,
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(lo))
    }

    fn advance_fast(&self, x: FastPoint) -> Option<Result<FastPoint>> {
        let v = x.v.checked_add(1)?;
        let p = x.num.checked_sub(x.den)?;
        Some(self.sign(p, x.den, v).map(|s| {
            if s == Ordering::Less {
                FastPoint { num: x.num, den: x.den, v }
            } else {
                FastPoint { num: p, den: x.den, v }
            }
        }))
    }

    /// Interval index of the current point, then rotates by α.
    pub fn step(&mut self) -> Result<usize> {
        if let (Some(x), Some(bps)) = (self.fast, self.fast_partition.as_ref()) {
            if let Some(idx) = self.locate_fast(x, bps) {
                let idx = idx?;
                if let Some(next) = self.advance_fast(x) {
                    self.fast = Some(next?);
                    return Ok(idx);
                }
            }
            // overflow: continue exactly
            self.slow = x.to_point();
            self.fast = None;
        }
        let mut idx = 0;
        for (i, b) in self.partition.iter().enumerate().skip(1) {
            if self.slow.cmp_exact(b, self.cf)? == Ordering::Less {
                break;
            }
            idx = i;
        }
        let mut u = self.slow.u.clone();
        let v = &self.slow.v + 1;
        let shifted = &u - BigRational::one();
        if self.cf.sign_of(&shifted, &v)? != Ordering::Less {
            u = shifted;
        }
        self.slow = CirclePoint { u, v };
        Ok(idx)
    }
}

/// Ergodic sums `S_0 = 0, S_n = Σ_{i<n} f(x + iα)` up to a horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumTrace {
    pub x: CirclePoint,
    pub sums: Vec<i64>,
}

impl SumTrace {
    pub fn from_sums(x: CirclePoint, sums: Vec<i64>) -> Result<Self> {
        if sums.first() != Some(&0) {
            return Err(Error::invalid("a trace starts with S_0 = 0"));
        }
        Ok(SumTrace { x, sums })
    }

    pub fn horizon(&self) -> usize {
        self.sums.len() - 1
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.horizon() {
            return Err(Error::HorizonExceeded {
                requested: n,
                available: self.horizon(),
            });
        }
        Ok(())
    }

    /// `#{S_1, …, S_N}`; the zeroth sum is ignored.
    pub fn range_count(&self, n: usize) -> Result<usize> {
        self.check(n)?;
        let mut seen: Vec<i64> = self.sums[1..=n].to_vec();
        seen.sort_unstable();
        seen.dedup();
        Ok(seen.len())
    }

    /// `#{1 <= n <= N : S_n = 0}`.
    pub fn zero_hits(&self, n: usize) -> Result<usize> {
        self.check(n)?;
        Ok(self.sums[1..=n].iter().filter(|&&s| s == 0).count())
    }

    /// Columns `n,S_n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,S_n")?;
        for (n, s) in self.sums.iter().enumerate() {
            writeln!(out, "{n},{s}")?;
        }
        Ok(())
    }
}

pub fn range_count(trace: &SumTrace, n: usize) -> Result<usize> {
    trace.range_count(n)
}

pub fn zero_hits(trace: &SumTrace, n: usize) -> Result<usize> {
    trace.zero_hits(n)
}

/// Exact ergodic sums of `f` along the orbit of `x`.
pub fn ergodic_sums(f: &StepCocycle, x: &CirclePoint, n: usize, cf: &ContinuedFraction) -> Result<SumTrace> {
    if n == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let mut sums = Vec::with_capacity(n + 1);
    sums.push(0i64);
    if f.values.iter().all(|&c| c == f.values[0]) {
        // constant cocycles need no orbit
        let c = f.values[0];
        for i in 1..=n as i64 {
            sums.push(c * i);
        }
        return Ok(SumTrace { x: x.clone(), sums });
    }
    let mut orbit = Orbit::new(&f.breakpoints, x, cf);
    let mut acc = 0i64;
    for _ in 0..n {
        acc += f.values[orbit.step()?];
        sums.push(acc);
    }
    Ok(SumTrace { x: x.clone(), sums })
}

/// `#{0 <= j < q_k : {x + jα} < c}`, exactly, in `O(1)` exact comparisons.
///
/// For `j < q_k` the points `x + jα` sit within `1/q_k` of the evenly
/// spaced points `x + j p_k/q_k`; only residues within two spacings of `c`
/// or of `0` need an exact look.
pub fn count_below(x: &CirclePoint, c: &CirclePoint, k: usize, cf: &ContinuedFraction) -> Result<BigInt> {
    let vmax = x.v.abs().max(c.v.abs());
    ResidueCounter::new(cf, k, &vmax)?.count_below(x, c)
}

/// The per-level data behind [`count_below`], shared across many points.
struct ResidueCounter<'a> {
    cf: &'a ContinuedFraction,
    q: BigInt,
    p_inv: BigInt,
    /// `α` is approximated by `lo_num / lo_den` to within `1/(8 q (vmax + 1))`.
    lo_num: BigInt,
    lo_den: BigInt,
    vmax: BigInt,
}

/// `q·(u + vα)` as `num / den` with `den > 0`.
struct Scaled {
    num: BigInt,
    den: BigInt,
}

impl<'a> ResidueCounter<'a> {
    fn new(cf: &'a ContinuedFraction, k: usize, vmax: &BigInt) -> Result<Self> {
        let conv = cf.convergent(k)?;
        let q = conv.q;
        let p_inv = mod_inverse(&conv.p, &q).ok_or(Error::Overflow("convergent not coprime"))?;
        let target = &q * 8 * (vmax + 1);
        let mut depth = k + 2;
        loop {
            cf.ensure_depth(depth)?;
            if cf.q(depth - 1)? * cf.q(depth)? > target {
                break;
            }
            depth += 1;
        }
        let (lo, _) = cf.alpha_interval(depth)?;
        Ok(ResidueCounter {
            cf,
            q,
            p_inv,
            lo_num: lo.numer().clone(),
            lo_den: lo.denom().clone(),
            vmax: vmax.clone(),
        })
    }

    fn scaled(&self, x: &CirclePoint) -> Scaled {
        let (a, b) = (x.u.numer(), x.u.denom());
        Scaled {
            num: &self.q * (a * &self.lo_den + &x.v * &self.lo_num * b),
            den: b * &self.lo_den,
        }
    }

    fn count_below(&self, x: &CirclePoint, c: &CirclePoint) -> Result<BigInt> {
        if c.u.is_zero() && c.v.is_zero() {
            return Ok(BigInt::zero());
        }
        if x.v.abs() > self.vmax || c.v.abs() > self.vmax {
            let vmax = x.v.abs().max(c.v.abs());
            let k = self.level()?;
            return ResidueCounter::new(self.cf, k, &vmax)?.count_below(x, c);
        }
        let q = &self.q;
        if *q < BigInt::from(32) {
            let n = q.to_usize().expect("small");
            let mut orbit = Orbit::new(&[CirclePoint::zero(), c.clone()], x, self.cf);
            let mut count = 0usize;
            for _ in 0..n {
                if orbit.step()? == 0 {
                    count += 1;
                }
            }
            return Ok(BigInt::from(count));
        }
        let xs = self.scaled(x);
        let cs = self.scaled(c);
        // x residues sit at rx/dx + i, i = 0..q
        let (fl_x, rx) = xs.num.div_mod_floor(&xs.den);
        let dx = &xs.den;
        let (nc, dc) = (&cs.num, &cs.den);
        // t = cq - frac_x = (nc dx - rx dc) / (dc dx)
        let t_num = nc * dx - &rx * dc;
        let t_den = dc * dx;
        let mut total = t_num.div_ceil(&t_den).clamp(BigInt::zero(), q.clone());
        let centre = t_num.div_floor(&t_den);

        let mut cands: Vec<BigInt> = Vec::with_capacity(11);
        for d in -2..=2 {
            cands.push(&centre + d);
        }
        for d in 0..3 {
            cands.push(BigInt::from(d));
            cands.push(q - 1 - d);
        }
        cands.retain(|i| !i.is_negative() && i < q);
        cands.sort();
        cands.dedup();

        let nc_dx = nc * dx;
        let two_span = t_den.clone() * 2;
        let wrap_lo = dx * 2;
        let wrap_hi = (q - 2) * dx;
        for i in cands {
            // pos = (rx + i dx) / dx
            let pos_num = &rx + &i * dx;
            let diff = &pos_num * dc - &nc_dx;
            let near_c = diff.abs() < two_span;
            let near_wrap = pos_num < wrap_lo || pos_num > wrap_hi;
            if !(near_c || near_wrap) {
                continue;
            }
            if diff.is_negative() {
                total -= 1;
            }
            let j = ((&i - &fl_x) * &self.p_inv).mod_floor(q);
            let y = x.rotate(&j, self.cf)?;
            if y.cmp_exact(c, self.cf)? == Ordering::Less {
                total += 1;
            }
        }
        Ok(total)
    }

    fn level(&self) -> Result<usize> {
        let mut k = 0;
        while self.cf.q(k)? != self.q {
            k += 1;
        }
        Ok(k)
    }
}

/// The Birkhoff sum `S_{q_k} f(x)`, exactly, without walking the orbit.
pub fn convergent_sum(f: &StepCocycle, x: &CirclePoint, k: usize, cf: &ContinuedFraction) -> Result<BigInt> {
    let vmax = f.breakpoints.iter().map(|b| b.v.abs()).chain([x.v.abs()]).max().unwrap_or_default();
    convergent_sum_with(&ResidueCounter::new(cf, k, &vmax)?, f, x)
}

fn convergent_sum_with(counter: &ResidueCounter<'_>, f: &StepCocycle, x: &CirclePoint) -> Result<BigInt> {
    let n = f.breakpoints.len();
    let mut counts = Vec::with_capacity(n + 1);
    counts.push(BigInt::zero());
    for b in &f.breakpoints[1..] {
        counts.push(counter.count_below(x, b)?);
    }
    counts.push(counter.q.clone());
    Ok((0..n)
        .map(|i| (&counts[i + 1] - &counts[i]) * f.values[i])
        .sum())
}

/// Outcome of a Denjoy–Koksma sweep at time `q_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenjoyKoksmaReport {
    pub level: usize,
    pub q: String,
    pub max_abs: BigInt,
    pub variation: u64,
    pub samples: usize,
    pub holds: bool,
}

/// Sample points: `0`, the breakpoints, and `count` seeded dyadic points.
pub fn sample_points(f: &StepCocycle, count: usize, seed: u64) -> Vec<CirclePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![CirclePoint::zero()];
    for b in &f.breakpoints[1..] {
        pts.push(b.clone());
    }
    for _ in 0..count {
        pts.push(CirclePoint::dyadic(rng.gen::<u64>() >> 11, 53));
    }
    pts
}

/// Max of `|S_{q_k} f(x)|` over sampled `x`, against the variation bound.
pub fn denjoy_koksma_check(
    f: &StepCocycle,
    cf: &ContinuedFraction,
    k: usize,
    sample_count: usize,
    seed: u64,
) -> Result<DenjoyKoksmaReport> {
    if k == 0 {
        return Err(Error::invalid("level k must be >= 1"));
    }
    if !f.is_mean_zero() {
        return Err(Error::NonzeroMean);
    }
    cf.ensure_depth(k + 8)?;
    let pts = sample_points(f, sample_count, seed);
    let vmax = f.breakpoints.iter().chain(&pts).map(|b| b.v.abs()).max().unwrap_or_default();
    let counter = ResidueCounter::new(cf, k, &vmax)?;
    let sums = pts
        .par_iter()
        .map(|x| convergent_sum_with(&counter, f, x))
        .collect::<Result<Vec<_>>>()?;
    let max_abs = sums.iter().map(|s| s.abs()).max().unwrap_or_default();
    let variation = f.variation();
    Ok(DenjoyKoksmaReport {
        level: k,
        q: cf.q(k)?.to_string(),
        holds: max_abs <= BigInt::from(variation),
        max_abs,
        variation,
        samples: pts.len(),
    })
}

/// Least-squares slope of `y` against `x`; 0 when either is degenerate.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / sxx
}

/// Per-horizon maxima behind a Lyapunov estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovTable {
    pub horizons: Vec<usize>,
    pub max_abs: Vec<u64>,
    pub slope: f64,
}

/// Slope of `log max(max_x |S_n(x)|, 1)` against `log n`.
pub fn lyapunov_table(
    f: &StepCocycle,
    cf: &ContinuedFraction,
    horizons: &[usize],
    sample_count: usize,
    seed: u64,
) -> Result<LyapunovTable> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) || horizons[0] == 0 {
        return Err(Error::invalid("horizons must be positive and strictly increasing"));
    }
    if sample_count == 0 {
        return Err(Error::invalid("sample_count must be >= 1"));
    }
    let n_max = *horizons.last().expect("nonempty");
    let pts = sample_points(f, sample_count, seed);
    let per_point = pts
        .par_iter()
        .map(|x| {
            let trace = ergodic_sums(f, x, n_max, cf)?;
            Ok(horizons
                .iter()
                .map(|&n| trace.sums[n].unsigned_abs())
                .collect::<Vec<u64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs: Vec<u64> = (0..horizons.len())
        .map(|i| per_point.iter().map(|v| v[i]).max().unwrap_or(0))
        .collect();
    let xs: Vec<f64> = horizons.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = max_abs.iter().map(|&m| (m.max(1) as f64).ln()).collect();
    Ok(LyapunovTable {
        horizons: horizons.to_vec(),
        max_abs,
        slope: ls_slope(&xs, &ys),
    })
}

pub fn lyapunov_estimate(
    f: &StepCocycle,
    cf: &ContinuedFraction,
    horizons: &[usize],
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    Ok(lyapunov_table(f, cf, horizons, sample_count, seed)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn silver() -> ContinuedFraction {
        ContinuedFraction::constant(2).unwrap()
    }

    #[test]
    fn rotate_examples() {
        let cf = silver();
        let z = CirclePoint::zero();
        let p = rotate(&z, 2, &cf).unwrap();
        assert_eq!((p.u().clone(), p.v().clone()), (r(0, 1), 2.into()));
        let p = rotate(&z, 3, &cf).unwrap();
        assert_eq!((p.u().clone(), p.v().clone()), (r(-1, 1), 3.into()));
        let x = CirclePoint::rational(r(1, 3));
        assert_eq!(rotate(&x, 0, &cf).unwrap(), x);
    }

    #[test]
    fn evaluate_examples() {
        let cf = silver();
        let f = StepCocycle::staircase();
        assert_eq!(evaluate(&f, &CirclePoint::zero(), &cf).unwrap(), 1);
        let a = rotate(&CirclePoint::zero(), 1, &cf).unwrap();
        assert_eq!(evaluate(&f, &a, &cf).unwrap(), 1);
        assert_eq!(evaluate(&f, &CirclePoint::rational(r(1, 2)), &cf).unwrap(), -1);
    }

    #[test]
    fn ergodic_sum_examples() {
        let cf = silver();
        let f = StepCocycle::staircase();
        let t = ergodic_sums(&f, &CirclePoint::zero(), 3, &cf).unwrap();
        assert_eq!(t.sums, vec![0, 1, 2, 1]);
        let g = ContinuedFraction::gauss_kuzmin(5);
        assert_eq!(ergodic_sums(&f, &CirclePoint::zero(), 1, &g).unwrap().sums[1], 1);
        let z = StepCocycle::constant(0);
        let t = ergodic_sums(&z, &CirclePoint::rational(r(1, 7)), 10, &cf).unwrap();
        assert!(t.sums.iter().all(|&s| s == 0));
    }

    #[test]
    fn range_and_zero_examples() {
        let t = SumTrace::from_sums(CirclePoint::zero(), vec![0, 1, 2, 1, 2, 1]).unwrap();
        assert_eq!(t.range_count(5).unwrap(), 2);
        assert_eq!(t.zero_hits(5).unwrap(), 0);
        assert!(matches!(t.range_count(6), Err(Error::HorizonExceeded { .. })));
        let cf = silver();
        let one = ergodic_sums(&StepCocycle::constant(1), &CirclePoint::zero(), 7, &cf).unwrap();
        assert_eq!(one.range_count(7).unwrap(), 7);
        let zero = ergodic_sums(&StepCocycle::constant(0), &CirclePoint::zero(), 9, &cf).unwrap();
        assert_eq!(zero.range_count(7).unwrap(), 1);
        assert_eq!(zero.zero_hits(9).unwrap(), 9);
        let t = SumTrace::from_sums(CirclePoint::zero(), vec![0, 1, 0, 1, 0]).unwrap();
        assert_eq!(t.zero_hits(4).unwrap(), 2);
    }

    #[test]
    fn cocycle_validation_and_mean() {
        let cf = silver();
        let f = StepCocycle::staircase();
        assert_eq!(f.variation(), 4);
        assert!(f.is_mean_zero());
        assert!(!StepCocycle::constant(1).is_mean_zero());
        // χ[0,1-α) − χ[1-α,1) has mean 1 − 2α
        let g = StepCocycle::new(
            vec![CirclePoint::zero(), "1,-1".parse().unwrap()],
            vec![1, -1],
            &cf,
        )
        .unwrap();
        assert_eq!(g.mean(), (r(1, 1), BigInt::from(-2)));
        let bad = StepCocycle::new(
            vec![CirclePoint::zero(), CirclePoint::rational(r(1, 2)), CirclePoint::rational(r(1, 4))],
            vec![1, 0, -1],
            &cf,
        );
        assert!(bad.is_err());
        let spec = f.to_spec();
        assert_eq!(spec.breakpoints, vec!["0,0", "1/2,0"]);
        assert_eq!(StepCocycle::from_spec(&spec, &cf).unwrap(), f);
    }

    #[test]
    fn denjoy_koksma_examples() {
        let f = StepCocycle::staircase();
        let rep = denjoy_koksma_check(&f, &silver(), 1, 50, 1).unwrap();
        assert_eq!(rep.q, "2");
        assert!(rep.holds && rep.max_abs <= 4.into());
        let zero = StepCocycle::constant(0);
        let rep = denjoy_koksma_check(&zero, &silver(), 3, 10, 1).unwrap();
        assert_eq!(rep.max_abs, BigInt::zero());
        let cf = crate::contfrac::parse_alpha("gauss:7:40").unwrap();
        let rep = denjoy_koksma_check(&f, &cf, 10, 1000, 2).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(matches!(
            denjoy_koksma_check(&StepCocycle::constant(1), &silver(), 2, 5, 0),
            Err(Error::NonzeroMean)
        ));
    }

    #[test]
    fn convergent_sum_matches_walk() {
        let f = StepCocycle::staircase();
        for seed in 0..6 {
            let cf = ContinuedFraction::gauss_kuzmin(seed);
            for x in sample_points(&f, 4, seed) {
                for k in 1..9 {
                    let q = cf.q(k).unwrap().to_usize().unwrap();
                    if q > 200_000 {
                        break;
                    }
                    let walked = ergodic_sums(&f, &x, q, &cf).unwrap().sums[q];
                    assert_eq!(convergent_sum(&f, &x, k, &cf).unwrap(), walked.into());
                }
            }
        }
    }

    #[test]
    fn lyapunov_examples() {
        let cf = silver();
        let hs = [16, 64, 256, 1024];
        assert_eq!(lyapunov_estimate(&StepCocycle::constant(0), &cf, &hs, 3, 0).unwrap(), 0.0);
        let s = lyapunov_estimate(&StepCocycle::constant(1), &cf, &hs, 3, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(lyapunov_estimate(&StepCocycle::constant(1), &cf, &[4, 4], 3, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sums_are_additive(seed in 0u64..1000, m in 1usize..300, n in 1usize..300, num in 0u64..1000) {
            let cf = ContinuedFraction::gauss_kuzmin(seed);
            let f = StepCocycle::staircase();
            let x = CirclePoint::rational(r(num as i64, 1000));
            let whole = ergodic_sums(&f, &x, m + n, &cf).unwrap();
            let y = rotate(&x, m as i64, &cf).unwrap();
            let tail = ergodic_sums(&f, &y, n, &cf).unwrap();
            prop_assert_eq!(whole.sums[m + n], whole.sums[m] + tail.sums[n]);
        }

        #[test]
        fn range_nondecreasing_and_zero_hits_bounded(seed in 0u64..1000, n in 2usize..400) {
            let cf = ContinuedFraction::gauss_kuzmin(seed);
            let t = ergodic_sums(&StepCocycle::staircase(), &CirclePoint::zero(), n, &cf).unwrap();
            let ranges: Vec<usize> = (1..=n).map(|k| t.range_count(k).unwrap()).collect();
            prop_assert!(ranges.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(t.zero_hits(n).unwrap() <= n);
        }
    }
}
