//! Interval exchange transformations with certified lengths, Rauzy induction,
//! periodic-type IETs from Rauzy loops and their Birkhoff sums.

pub mod ball;
pub mod rauzy;

use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{ls_slope, CirclePoint, SumTrace};
use crate::error::{Error, Result};

pub use ball::{parse_decimal, Ball};
pub use rauzy::{iet_omega, is_primitive, perron_vector, spectrum, Move, Permutation, RauzyLoop, Spectrum};

/// Precision ceiling for automatic escalation.
pub const MAX_BITS: u32 = 4096;
pub const DEFAULT_BITS: u32 = 256;

/// An IET on `[0, 1)`: labels in domain and image order plus one length per label.
#[derive(Clone, Debug)]
pub struct Iet {
    perm: Permutation,
    lengths: Vec<Ball>,
    source: Option<RauzyLoop>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LengthField {
    mid: String,
    radius: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IetFields {
    permutation: [Vec<usize>; 2],
    lengths: Vec<LengthField>,
    #[serde(default)]
    bits: Option<u32>,
}

impl Iet {
    /// Lengths are indexed by label. They must be positive and sum to 1
    /// within their radii.
    pub fn new(perm: Permutation, lengths: Vec<Ball>) -> Result<Self> {
        if lengths.len() != perm.size() {
            return Err(Error::invalid("one length per interval"));
        }
        let bits = lengths[0].bits();
        if lengths.iter().any(|b| b.bits() != bits) {
            return Err(Error::invalid("lengths must share one precision"));
        }
        if !lengths.iter().all(Ball::is_positive) {
            return Err(Error::invalid("lengths must be certified positive"));
        }
        let total = Ball::sum(&lengths, bits);
        let slack = BigRational::new(BigInt::from(lengths.len() + 1), BigInt::one() << bits);
        let gap = (total.mid_rational() - BigRational::one()).abs();
        if gap > total.radius_rational() + slack {
            return Err(Error::invalid("lengths must sum to 1"));
        }
        Ok(Iet {
            perm,
            lengths,
            source: None,
        })
    }

    /// Exact rational lengths.
    pub fn from_rationals(perm: Permutation, lengths: &[BigRational], bits: u32) -> Result<Self> {
        let sum: BigRational = lengths.iter().sum();
        if !sum.is_one() {
            return Err(Error::invalid("lengths must sum to 1"));
        }
        Iet::new(perm, lengths.iter().map(|q| Ball::from_rational(q, bits)).collect())
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn lengths(&self) -> &[Ball] {
        &self.lengths
    }

    pub fn size(&self) -> usize {
        self.perm.size()
    }

    pub fn bits(&self) -> u32 {
        self.lengths[0].bits()
    }

    /// The loop whose Perron vector produced these lengths, if any.
    pub fn source(&self) -> Option<&RauzyLoop> {
        self.source.as_ref()
    }

    pub fn lengths_f64(&self) -> Vec<f64> {
        self.lengths.iter().map(Ball::mid_f64).collect()
    }

    /// `Σ φ(label) λ(label)`.
    pub fn mean(&self, phi: &[i64]) -> f64 {
        phi.iter()
            .zip(&self.lengths)
            .map(|(&v, l)| v as f64 * l.mid_f64())
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&IetFields {
            permutation: self.perm.to_rows(),
            lengths: self
                .lengths
                .iter()
                .map(|b| LengthField {
                    mid: b.mid_decimal(),
                    radius: b.radius_decimal(),
                })
                .collect(),
            bits: Some(self.bits()),
        })
        .expect("IET serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: IetFields =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("IET JSON: {e}")))?;
        let bits = f.bits.unwrap_or(DEFAULT_BITS);
        if !(64..=MAX_BITS).contains(&bits) {
            return Err(Error::invalid(format!("bits must lie in 64..={MAX_BITS}")));
        }
        let lengths = f
            .lengths
            .iter()
            .map(|l| {
                Ok(Ball::with_radius(
                    &parse_decimal(&l.mid)?,
                    &parse_decimal(&l.radius)?,
                    bits,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Iet::new(Permutation::from_rows(&f.permutation)?, lengths)
    }

    /// Image of the point, for `f64` inspection only.
    pub fn map_f64(&self, x: f64) -> f64 {
        let lf = self.lengths_f64();
        let mut start = 0.0;
        for (p, &a) in self.perm.top.iter().enumerate() {
            let end = start + lf[a];
            if x < end || p + 1 == self.size() {
                let image_start: f64 = self
                    .perm
                    .bottom
                    .iter()
                    .take_while(|&&b| b != a)
                    .map(|&b| lf[b])
                    .sum();
                return x - start + image_start;
            }
            start = end;
        }
        unreachable!()
    }
}

/// One step of Rauzy induction: the induced IET with lengths renormalised to
/// sum 1, the move taken and its elementary matrix (`old = E · new` before
/// renormalisation).
pub fn rauzy_step(iet: &Iet) -> Result<(Iet, Move, DMatrix<i64>)> {
    let t = *iet.perm.top.last().unwrap();
    let b = *iet.perm.bottom.last().unwrap();
    let diff = iet.lengths[t].sub(&iet.lengths[b]);
    let mv = match diff.sign() {
        Some(Ordering::Greater) => Move::Bottom,
        Some(Ordering::Less) => Move::Top,
        _ => return Err(Error::RauzyTie),
    };
    let e = iet.perm.move_matrix(mv);
    let mut lengths = iet.lengths.clone();
    match mv {
        Move::Bottom => lengths[t] = diff,
        Move::Top => lengths[b] = diff.scale(-1),
    }
    let total = Ball::sum(&lengths, iet.bits());
    let lengths = lengths
        .iter()
        .map(|l| l.div(&total))
        .collect::<Result<Vec<_>>>()?;
    let next = Iet {
        perm: iet.perm.apply(mv),
        lengths,
        source: None,
    };
    Ok((next, mv, e))
}

/// The self-similar IET of a loop: lengths are the normalised Perron vector.
pub fn periodic_iet_from_loop(lp: &RauzyLoop, bits: u32) -> Result<Iet> {
    if !(64..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid(format!("bits must lie in 64..={MAX_BITS}")));
    }
    let lengths = lp.perron_lengths(bits)?;
    let mut iet = Iet::new(lp.start().clone(), lengths)?;
    iet.source = Some(lp.clone());
    Ok(iet)
}

/// Runs the loop's moves by Rauzy induction and returns an upper bound on
/// `max_i |λ'_i - λ_i|`. Errors if induction leaves the loop.
pub fn self_similarity_residual(iet: &Iet, lp: &RauzyLoop) -> Result<f64> {
    if iet.perm != *lp.start() {
        return Err(Error::invalid("IET does not sit at the loop's start"));
    }
    let mut cur = iet.clone();
    for &want in lp.moves() {
        let (next, mv, _) = rauzy_step(&cur)?;
        if mv != want {
            return Err(Error::invalid(format!(
                "induction took {mv} where the loop has {want}"
            )));
        }
        cur = next;
    }
    Ok(iet
        .lengths
        .iter()
        .zip(&cur.lengths)
        .map(|(a, b)| {
            let d = a.sub(b);
            d.mid_f64().abs() + d.radius_f64()
        })
        .fold(0.0, f64::max))
}

/// Orbit of a rational point. Positions are `x0 + Σ n_j λ_j` with integer `n`;
/// interval membership is screened in `f64` and settled with balls, raising the
/// precision (when the lengths come from a loop) if a ball straddles a breakpoint.
pub struct IetOrbit<'a> {
    iet: &'a Iet,
    lengths: Vec<Ball>,
    lf: Vec<f64>,
    le: Vec<f64>,
    x0: BigRational,
    x0f: f64,
    coeff: Vec<i64>,
    starts: Vec<Vec<i64>>,
    shifts: Vec<Vec<i64>>,
}

impl<'a> IetOrbit<'a> {
    pub fn new(iet: &'a Iet, x0: BigRational) -> Result<Self> {
        if x0.is_negative() || x0 >= BigRational::one() {
            return Err(Error::invalid("starting point must lie in [0, 1)"));
        }
        let m = iet.size();
        let mut starts = vec![vec![0i64; m]; m];
        for p in 1..m {
            starts[p] = starts[p - 1].clone();
            starts[p][iet.perm.top[p - 1]] += 1;
        }
        let mut shifts = vec![vec![0i64; m]; m];
        for (a, shift) in shifts.iter_mut().enumerate() {
            for &b in iet.perm.bottom.iter().take_while(|&&b| b != a) {
                shift[b] += 1;
            }
            for &b in iet.perm.top.iter().take_while(|&&b| b != a) {
                shift[b] -= 1;
            }
        }
        let mut orbit = IetOrbit {
            iet,
            lengths: Vec::new(),
            lf: Vec::new(),
            le: Vec::new(),
            x0f: x0.to_f64().unwrap_or(0.0),
            x0,
            coeff: vec![0; m],
            starts,
            shifts,
        };
        orbit.set_lengths(iet.lengths.clone());
        Ok(orbit)
    }

    fn set_lengths(&mut self, lengths: Vec<Ball>) {
        self.lf = lengths.iter().map(Ball::mid_f64).collect();
        self.le = lengths
            .iter()
            .map(|b| b.radius_f64() + b.mid_f64().abs() * 1e-15)
            .collect();
        self.lengths = lengths;
    }

    pub fn bits(&self) -> u32 {
        self.lengths[0].bits()
    }

    /// Current point as `x0 + Σ n_j λ_j` (coefficients `n`).
    pub fn coefficients(&self) -> &[i64] {
        &self.coeff
    }

    /// Sign of `x - start(p)`.
    fn compare_start(&mut self, p: usize) -> Result<Ordering> {
        let m = self.coeff.len();
        let mut val = self.x0f;
        let mut err = 0.0;
        let mut mag = self.x0f.abs();
        for j in 0..m {
            let c = (self.coeff[j] - self.starts[p][j]) as f64;
            val += c * self.lf[j];
            err += c.abs() * self.le[j];
            mag += (c * self.lf[j]).abs();
        }
        let err = 2.0 * (err + (m as f64 + 2.0) * f64::EPSILON * (mag + 1.0));
        if val > err {
            return Ok(Ordering::Greater);
        }
        if val < -err {
            return Ok(Ordering::Less);
        }
        loop {
            let bits = self.bits();
            let mut ball = Ball::from_rational(&self.x0, bits);
            for j in 0..m {
                ball = ball.add(&self.lengths[j].scale(self.coeff[j] - self.starts[p][j]));
            }
            if let Some(s) = ball.sign() {
                return Ok(s);
            }
            match self.iet.source() {
                Some(lp) if bits * 2 <= MAX_BITS => {
                    let lengths = lp.perron_lengths(bits * 2)?;
                    self.set_lengths(lengths);
                }
                _ => return Err(Error::PrecisionExhausted { bits }),
            }
        }
    }

    /// Label of the interval holding the current point; advances the orbit.
    pub fn step(&mut self) -> Result<usize> {
        let m = self.coeff.len();
        let mut pos = 0;
        for p in (1..m).rev() {
            if self.compare_start(p)? != Ordering::Less {
                pos = p;
                break;
            }
        }
        let a = self.iet.perm.top[pos];
        for j in 0..m {
            self.coeff[j] += self.shifts[a][j];
        }
        Ok(a)
    }
}

/// `S_0 = 0, S_n = Σ_{i<n} φ(T^i x)` with `φ` given per label.
pub fn iet_ergodic_sums(iet: &Iet, phi: &[i64], x0: &BigRational, n: usize) -> Result<SumTrace> {
    if phi.len() != iet.size() {
        return Err(Error::invalid("one cocycle value per interval"));
    }
    if n == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let mut orbit = IetOrbit::new(iet, x0.clone())?;
    let mut sums = Vec::with_capacity(n + 1);
    let mut s: i64 = 0;
    sums.push(0);
    for _ in 0..n {
        s += phi[orbit.step()?];
        sums.push(s);
    }
    SumTrace::from_sums(CirclePoint::rational(x0.clone()), sums)
}

/// `0` and `count` seeded dyadic points `k / 2^53`.
pub fn iet_sample_points(count: usize, seed: u64) -> Vec<BigRational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![BigRational::zero()];
    for _ in 0..count {
        pts.push(BigRational::new(
            BigInt::from(rng.gen::<u64>() >> 11),
            BigInt::one() << 53,
        ));
    }
    pts
}

/// Growth of centred Birkhoff sums `|S_n - n μ|`, `μ = Σ φ λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthTable {
    pub horizons: Vec<usize>,
    pub max_abs: Vec<f64>,
    pub mean: f64,
    pub exponent: f64,
}

/// Slope of `log max(max_x |S_n(x) - n μ|, 1)` against `log n`.
pub fn birkhoff_sup_growth(
    iet: &Iet,
    phi: &[i64],
    horizons: &[usize],
    sample_count: usize,
    seed: u64,
) -> Result<GrowthTable> {
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("horizons must be positive and strictly increasing"));
    }
    let n_max = *horizons.last().unwrap();
    let mean = iet.mean(phi);
    let pts = iet_sample_points(sample_count, seed);
    let per_point = pts
        .par_iter()
        .map(|x| {
            let trace = iet_ergodic_sums(iet, phi, x, n_max)?;
            Ok(horizons
                .iter()
                .map(|&n| (trace.sums[n] as f64 - n as f64 * mean).abs())
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs: Vec<f64> = (0..horizons.len())
        .map(|i| per_point.iter().map(|v| v[i]).fold(0.0, f64::max))
        .collect();
    let xs: Vec<f64> = horizons.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = max_abs.iter().map(|&m| m.max(1.0).ln()).collect();
    Ok(GrowthTable {
        horizons: horizons.to_vec(),
        max_abs,
        mean,
        exponent: ls_slope(&xs, &ys),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{ergodic_sums, StepCocycle};
    use crate::contfrac::ContinuedFraction;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn two(a: (i64, i64), b: (i64, i64)) -> Iet {
        Iet::from_rationals(Permutation::rotation_class(2), &[rat(a.0, a.1), rat(b.0, b.1)], 128)
            .unwrap()
    }

    #[test]
    fn rauzy_step_examples() {
        let (next, mv, e) = rauzy_step(&two((3, 10), (7, 10))).unwrap();
        assert_eq!(mv, Move::Bottom);
        assert!(next.lengths[0].contains(&rat(3, 7)));
        assert!(next.lengths[1].contains(&rat(4, 7)));
        assert_eq!(e, DMatrix::from_row_slice(2, 2, &[1, 0, 1, 1]));

        let (next, mv, _) = rauzy_step(&two((7, 10), (3, 10))).unwrap();
        assert_eq!(mv, Move::Top);
        assert!(next.lengths[0].contains(&rat(4, 7)));
        assert!(next.lengths[1].contains(&rat(3, 7)));

        assert!(matches!(rauzy_step(&two((1, 2), (1, 2))), Err(Error::RauzyTie)));
    }

    #[test]
    fn loops_are_validated() {
        let p = Permutation::rotation_class(2);
        assert!(matches!(RauzyLoop::new(p.clone(), vec![]), Err(Error::NotPrimitive)));
        assert!(matches!(RauzyLoop::new(p, vec![Move::Top]), Err(Error::NotPrimitive)));
        let g = RauzyLoop::golden();
        assert_eq!(g.matrix(), &DMatrix::from_row_slice(2, 2, &[2, 1, 1, 1]));
        assert_eq!(RauzyLoop::from_json(&g.to_json()).unwrap(), g);
        assert!(Permutation::new(vec![0, 1], vec![0, 1]).is_err());
        assert!(RauzyLoop::from_json(r#"{"permutation":[[1,2],[2,1]],"moves":["up"]}"#).is_err());
    }

    #[test]
    fn golden_iet_is_self_similar() {
        let g = RauzyLoop::golden();
        let iet = periodic_iet_from_loop(&g, 256).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((iet.lengths[0].mid_f64() - 1.0 / phi).abs() < 1e-15);
        assert!(iet.lengths[0].radius_f64() < 1e-70);
        assert!(self_similarity_residual(&iet, &g).unwrap() <= 1e-12);
        let s = g.spectrum();
        assert!((s.theta1 - 0.9624236501192069).abs() < 1e-12);
        assert_eq!(s.theta2, 0.0);
        assert_eq!(s.jordan, 1);
        assert_eq!(Iet::from_json(&iet.to_json()).unwrap().perm, iet.perm);
    }

    #[test]
    fn loop_matrix_reconstructs_lengths() {
        let g = RauzyLoop::golden();
        let iet = periodic_iet_from_loop(&g, 128).unwrap();
        let mut cur = iet.clone();
        let mut prod = DMatrix::<i64>::identity(2, 2);
        for _ in g.moves() {
            let (next, _, e) = rauzy_step(&cur).unwrap();
            prod *= e;
            cur = next;
        }
        let bits = iet.bits();
        let image: Vec<Ball> = (0..2)
            .map(|i| {
                Ball::sum(
                    &(0..2).map(|j| cur.lengths[j].scale(prod[(i, j)])).collect::<Vec<_>>(),
                    bits,
                )
            })
            .collect();
        let total = Ball::sum(&image, bits);
        for i in 0..2 {
            let d = image[i].div(&total).unwrap().sub(&iet.lengths[i]);
            assert!(d.mid_f64().abs() <= d.radius_f64() + 1e-30);
        }
    }

    #[test]
    fn golden_sums_match_rotation() {
        let iet = periodic_iet_from_loop(&RauzyLoop::golden(), 256).unwrap();
        let cf = ContinuedFraction::periodic(&[2], &[1]).unwrap();
        let breakpoints = vec![CirclePoint::zero(), "1,-1".parse::<CirclePoint>().unwrap()];
        let f = StepCocycle::new(breakpoints, vec![1, -1], &cf).unwrap();
        for x in iet_sample_points(4, 11) {
            let a = iet_ergodic_sums(&iet, &[1, -1], &x, 3000).unwrap();
            let b = ergodic_sums(&f, &CirclePoint::rational(x.clone()), 3000, &cf).unwrap();
            assert_eq!(a.sums, b.sums);
        }
    }

    #[test]
    fn precision_exhaustion_is_reported() {
        // The orbit of 0 lands on the breakpoint 1/3; fixed lengths cannot be refined.
        let x = BigRational::zero();
        let near = Iet::new(
            Permutation::rotation_class(2),
            vec![
                Ball::with_radius(&rat(1, 3), &rat(1, 1 << 40), 64),
                Ball::with_radius(&rat(2, 3), &rat(1, 1 << 40), 64),
            ],
        )
        .unwrap();
        assert!(matches!(
            iet_ergodic_sums(&near, &[1, -1], &x, 10),
            Err(Error::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn zero_cocycle_has_zero_growth() {
        let iet = periodic_iet_from_loop(&RauzyLoop::golden(), 128).unwrap();
        let g = birkhoff_sup_growth(&iet, &[0, 0], &[16, 64, 256], 2, 1).unwrap();
        assert_eq!(g.exponent, 0.0);
    }

    #[test]
    fn four_interval_growth_tracks_second_exponent() {
        use Move::*;
        let lp = RauzyLoop::new(
            Permutation::rotation_class(4),
            vec![Bottom, Bottom, Top, Bottom, Top, Top, Bottom, Top],
        )
        .unwrap();
        let s = lp.spectrum();
        assert!(s.theta2 > 0.6 && s.theta2 < 0.61);
        let iet = periodic_iet_from_loop(&lp, 192).unwrap();
        assert!(self_similarity_residual(&iet, &lp).unwrap() < 1e-40);
        let hs: Vec<usize> = (6..=14).map(|k| 1usize << k).collect();
        let g = birkhoff_sup_growth(&iet, &[1, 0, -1, 0], &hs, 4, 5).unwrap();
        let ratio = s.theta2 / s.theta1;
        assert!(g.exponent <= ratio + 0.1, "{} vs {}", g.exponent, ratio);
        assert!(g.exponent >= ratio - 0.2, "{} vs {}", g.exponent, ratio);
    }

    #[test]
    fn omega_from_spectrum() {
        let s = Spectrum {
            theta1: 2.0,
            theta2: 1.0,
            jordan: 1,
            eigenvalue_moduli: vec![],
        };
        let w = iet_omega(&s, 2).unwrap();
        assert_eq!(w.power(), 0.5);
        assert_eq!(w.log_power(), 1.0);
        assert_eq!(w.iterated_range(), Some((2, 2)));
        let n: f64 = 1e6;
        let expect = n.ln() / (n.sqrt() * n.ln().ln());
        assert!((w.eval(n) - expect).abs() < 1e-15);
    }
}
