//! Rauzy moves on permutation pairs, closed loops and their matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::ball::Ball;
use crate::error::{Error, Result};
use crate::recurrence::OmegaWeight;

/// Which row of the permutation a Rauzy move rearranges.
///
/// `Top` applies when the last bottom interval is longer, `Bottom` when the
/// last top interval is longer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Top,
    Bottom,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Move::Top => "top",
            Move::Bottom => "bottom",
        })
    }
}

impl FromStr for Move {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "top" | "t" => Ok(Move::Top),
            "bottom" | "b" => Ok(Move::Bottom),
            other => Err(Error::invalid(format!("unknown Rauzy move {other:?}"))),
        }
    }
}

/// Interval labels `0..m` listed in domain order (`top`) and image order (`bottom`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
}

impl Permutation {
    pub fn new(top: Vec<usize>, bottom: Vec<usize>) -> Result<Self> {
        let m = top.len();
        if m < 2 || bottom.len() != m {
            return Err(Error::invalid("permutation rows need equal length >= 2"));
        }
        for row in [&top, &bottom] {
            let mut seen = vec![false; m];
            for &l in row {
                if l >= m || std::mem::replace(&mut seen[l], true) {
                    return Err(Error::invalid("permutation rows must list labels 0..m once"));
                }
            }
        }
        let p = Permutation { top, bottom };
        if !p.is_irreducible() {
            return Err(Error::invalid("permutation is reducible"));
        }
        Ok(p)
    }

    /// Top row `0..m`, bottom row the reversal.
    pub fn rotation_class(m: usize) -> Self {
        Permutation {
            top: (0..m).collect(),
            bottom: (0..m).rev().collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.top.len()
    }

    pub fn is_irreducible(&self) -> bool {
        let m = self.size();
        let mut top_mask = vec![false; m];
        let mut bottom_seen = vec![false; m];
        for k in 0..m - 1 {
            top_mask[self.top[k]] = true;
            bottom_seen[self.bottom[k]] = true;
            if (0..m).all(|l| top_mask[l] == bottom_seen[l]) {
                return false;
            }
        }
        true
    }

    /// Permutation after `mv`. Labels keep their identity.
    pub fn apply(&self, mv: Move) -> Permutation {
        let t = *self.top.last().unwrap();
        let b = *self.bottom.last().unwrap();
        let mut p = self.clone();
        let (row, moved, anchor) = match mv {
            Move::Top => (&mut p.top, t, b),
            Move::Bottom => (&mut p.bottom, b, t),
        };
        row.pop();
        let at = row.iter().position(|&l| l == anchor).unwrap();
        row.insert(at + 1, moved);
        p
    }

    /// Elementary matrix `E` with `old = E · new` for unnormalised lengths.
    pub fn move_matrix(&self, mv: Move) -> DMatrix<i64> {
        let m = self.size();
        let t = *self.top.last().unwrap();
        let b = *self.bottom.last().unwrap();
        let mut e = DMatrix::<i64>::identity(m, m);
        match mv {
            Move::Top => e[(b, t)] = 1,
            Move::Bottom => e[(t, b)] = 1,
        }
        e
    }

    /// 1-based rows, the external form.
    pub fn to_rows(&self) -> [Vec<usize>; 2] {
        [
            self.top.iter().map(|l| l + 1).collect(),
            self.bottom.iter().map(|l| l + 1).collect(),
        ]
    }

    pub fn from_rows(rows: &[Vec<usize>; 2]) -> Result<Self> {
        let shift = |r: &Vec<usize>| -> Result<Vec<usize>> {
            r.iter()
                .map(|&l| {
                    l.checked_sub(1)
                        .ok_or_else(|| Error::invalid("permutation labels start at 1"))
                })
                .collect()
        };
        Permutation::new(shift(&rows[0])?, shift(&rows[1])?)
    }
}

/// A closed path of Rauzy moves starting and ending at `start`.
///
/// JSON form: `{"permutation": [[top], [bottom]], "moves": ["top", ...]}` with 1-based labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LoopFields", into = "LoopFields")]
pub struct RauzyLoop {
    start: Permutation,
    moves: Vec<Move>,
    matrix: DMatrix<i64>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopFields {
    permutation: [Vec<usize>; 2],
    moves: Vec<Move>,
}

impl TryFrom<LoopFields> for RauzyLoop {
    type Error = Error;

    fn try_from(f: LoopFields) -> Result<Self> {
        RauzyLoop::new(Permutation::from_rows(&f.permutation)?, f.moves)
    }
}

impl From<RauzyLoop> for LoopFields {
    fn from(lp: RauzyLoop) -> Self {
        LoopFields {
            permutation: lp.start.to_rows(),
            moves: lp.moves,
        }
    }
}

impl RauzyLoop {
    /// Validates that the moves return to `start` and that the loop matrix is primitive.
    pub fn new(start: Permutation, moves: Vec<Move>) -> Result<Self> {
        let m = start.size();
        let mut p = start.clone();
        let mut matrix = DMatrix::<i64>::identity(m, m);
        for &mv in &moves {
            matrix = checked_mul(&matrix, &p.move_matrix(mv))?;
            p = p.apply(mv);
        }
        if p != start {
            return Err(Error::invalid("moves do not return to the starting permutation"));
        }
        if !is_primitive(&matrix) {
            return Err(Error::NotPrimitive);
        }
        Ok(RauzyLoop {
            start,
            moves,
            matrix,
        })
    }

    /// Two intervals, moves `[top, bottom]`; matrix `[[2,1],[1,1]]`.
    pub fn golden() -> Self {
        RauzyLoop::new(Permutation::rotation_class(2), vec![Move::Top, Move::Bottom])
            .expect("golden loop is valid")
    }

    pub fn start(&self) -> &Permutation {
        &self.start
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn matrix(&self) -> &DMatrix<i64> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.start.size()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("loop serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::invalid(format!("loop JSON: {e}")))
    }

    /// Perron eigenvector normalised to sum 1, as balls at `bits` of precision.
    pub fn perron_lengths(&self, bits: u32) -> Result<Vec<Ball>> {
        perron_vector(&self.matrix, bits)
    }

    /// Lyapunov data of the loop matrix.
    pub fn spectrum(&self) -> Spectrum {
        spectrum(&self.matrix)
    }
}

fn checked_mul(a: &DMatrix<i64>, b: &DMatrix<i64>) -> Result<DMatrix<i64>> {
    let n = a.nrows();
    let mut c = DMatrix::<i64>::zeros(n, b.ncols());
    for i in 0..n {
        for j in 0..b.ncols() {
            let mut s: i64 = 0;
            for k in 0..a.ncols() {
                s = a[(i, k)]
                    .checked_mul(b[(k, j)])
                    .and_then(|x| s.checked_add(x))
                    .ok_or(Error::Overflow("Rauzy loop matrix"))?;
            }
            c[(i, j)] = s;
        }
    }
    Ok(c)
}

fn bool_mul(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).any(|k| a[i][k] && b[k][j])).collect())
        .collect()
}

fn positive_power(matrix: &DMatrix<i64>) -> Option<usize> {
    let n = matrix.nrows();
    let base: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| matrix[(i, j)] > 0).collect())
        .collect();
    let mut p = base.clone();
    // Wielandt: a primitive n×n matrix has a positive power at most (n-1)^2 + 1.
    for k in 1..=(n - 1) * (n - 1) + 1 {
        if p.iter().all(|r| r.iter().all(|&x| x)) {
            return Some(k);
        }
        p = bool_mul(&p, &base);
    }
    None
}

pub fn is_primitive(matrix: &DMatrix<i64>) -> bool {
    matrix.iter().all(|&x| x >= 0) && positive_power(matrix).is_some()
}

type BigMatrix = Vec<Vec<BigInt>>;

fn big_power(matrix: &DMatrix<i64>, k: usize) -> BigMatrix {
    let n = matrix.nrows();
    let base: BigMatrix = (0..n)
        .map(|i| (0..n).map(|j| BigInt::from(matrix[(i, j)])).collect())
        .collect();
    let mut p = base.clone();
    for _ in 1..k {
        p = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|l| &p[i][l] * &base[l][j]).sum())
                    .collect()
            })
            .collect();
    }
    p
}

fn apply(p: &BigMatrix, v: &[BigInt]) -> Vec<BigInt> {
    p.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn big_f64(n: &BigInt) -> f64 {
    n.to_f64().unwrap_or(f64::INFINITY)
}

/// Birkhoff contraction coefficient of a positive matrix in the Hilbert metric,
/// rounded up.
fn contraction(p: &BigMatrix) -> f64 {
    let n = p.len();
    let mut diam: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let r = (big_f64(&p[i][k]).ln() + big_f64(&p[j][l]).ln())
                        - (big_f64(&p[j][k]).ln() + big_f64(&p[i][l]).ln());
                    diam = diam.max(r);
                }
            }
        }
    }
    ((diam / 4.0).tanh() * (1.0 + 1e-12) + 1e-15).min(1.0)
}

/// Certified Perron eigenvector of a primitive matrix, normalised to sum 1.
///
/// Power iteration on a positive power `P` in fixed point, then a Hilbert-metric
/// bound `d(v, v*) <= d(v, Pv) / (1 - tau(P))` turns the last residual into radii.
pub fn perron_vector(matrix: &DMatrix<i64>, bits: u32) -> Result<Vec<Ball>> {
    let k = positive_power(matrix).ok_or(Error::NotPrimitive)?;
    let p = big_power(matrix, k);
    let tau = contraction(&p);
    if tau >= 1.0 {
        return Err(Error::PrecisionExhausted { bits });
    }
    let n = p.len();
    let work = bits + 64;
    let scale = BigInt::one() << work;
    let mut v: Vec<BigInt> = vec![&scale / n; n];
    let mut last_u = None;
    for _ in 0..200_000 {
        let w = apply(&p, &v);
        let total: BigInt = w.iter().sum();
        let next: Vec<BigInt> = w.iter().map(|x| (x << work) / &total).collect();
        // u = max_i (Pv)_i / v_i ÷ min_i (Pv)_i / v_i - 1
        let ratios: Vec<BigRational> = w
            .iter()
            .zip(&v)
            .map(|(a, b)| BigRational::new(a.clone(), b.clone()))
            .collect();
        let hi = ratios.iter().max().unwrap().clone();
        let lo = ratios.iter().min().unwrap().clone();
        let u = hi / lo - BigRational::one();
        // Stop once u / (1 - tau) is well below 2^-bits.
        let u_scaled = &u * BigRational::from_integer(BigInt::one() << (bits + 8));
        let done = u_scaled.to_f64().unwrap_or(f64::INFINITY) * (1.0 + 1e-12) <= (1.0 - tau);
        if done {
            return finish(&v, &u, tau, bits);
        }
        if let Some(prev) = &last_u {
            if &u >= prev && u_scaled.to_f64().unwrap_or(f64::INFINITY) < 1e6 {
                // Rounding floor reached; certify what we have.
                return finish(&v, &u, tau, bits);
            }
        }
        last_u = Some(u);
        v = next;
    }
    Err(Error::PrecisionExhausted { bits })
}

fn finish(v: &[BigInt], u: &BigRational, tau: f64, bits: u32) -> Result<Vec<Ball>> {
    // delta <= ln(1 + u) / (1 - tau) <= u / (1 - tau); |v*_i - w_i| <= w_i (e^delta - 1) <= 2 delta w_i.
    let inv = 1.0 / (1.0 - tau) * (1.0 + 1e-12);
    let inv = BigRational::from_float(inv).ok_or(Error::PrecisionExhausted { bits })?;
    let delta = u * inv;
    if delta > BigRational::new(1.into(), 2.into()) {
        return Err(Error::PrecisionExhausted { bits });
    }
    let total: BigInt = v.iter().sum();
    Ok(v
        .iter()
        .map(|x| {
            let w = BigRational::new(x.clone(), total.clone());
            let r = &w * &delta * BigRational::from_integer(2.into());
            Ball::with_radius(&w, &r, bits)
        })
        .collect())
}

/// Exponents of the loop matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// log of the Perron root.
    pub theta1: f64,
    /// max(log |second eigenvalue|, 0).
    pub theta2: f64,
    /// Largest Jordan block among eigenvalues of the second modulus, bounded
    /// by algebraic minus geometric multiplicity plus one.
    pub jordan: u32,
    pub eigenvalue_moduli: Vec<f64>,
}

const CLUSTER_TOL: f64 = 1e-9;

pub fn spectrum(matrix: &DMatrix<i64>) -> Spectrum {
    let n = matrix.nrows();
    let a = matrix.map(|x| x as f64);
    let eig = a.clone().complex_eigenvalues();
    let mut vals: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    vals.sort_by(|x, y| {
        let mx = x.0.hypot(x.1);
        let my = y.0.hypot(y.1);
        my.partial_cmp(&mx).unwrap()
    });
    let moduli: Vec<f64> = vals.iter().map(|v| v.0.hypot(v.1)).collect();
    let rho = moduli[0];
    let second = moduli.get(1).copied().unwrap_or(0.0);
    let theta1 = rho.ln();
    let theta2 = if second > 0.0 { second.ln().max(0.0) } else { 0.0 };
    let tol = CLUSTER_TOL * rho.max(1.0);
    let mut jordan = 1u32;
    if n > 1 && second > 0.0 {
        let mut used = vec![false; n];
        for i in 1..n {
            if used[i] || (moduli[i] - second).abs() > tol.max(1e-6 * second) {
                continue;
            }
            let (re, im) = vals[i];
            let cluster: Vec<usize> = (1..n)
                .filter(|&j| (vals[j].0 - re).hypot(vals[j].1 - im) <= tol.max(1e-6 * second))
                .collect();
            for &j in &cluster {
                used[j] = true;
            }
            let algebraic = cluster.len();
            let geometric = if im.abs() <= tol {
                let shifted = &a - DMatrix::<f64>::identity(n, n) * re;
                n - shifted.rank(1e-7 * rho.max(1.0))
            } else {
                // Complex eigenvalues: assume diagonalisable unless repeated.
                1.min(algebraic)
            };
            let block = (algebraic - geometric.min(algebraic) + 1) as u32;
            jordan = jordan.max(block);
        }
    }
    Spectrum {
        theta1,
        theta2,
        jordan,
        eigenvalue_moduli: moduli,
    }
}

/// omega(n) = log^m n / (n^{(θ1-θ2)/θ1} · iterated logs 2..=j).
pub fn iet_omega(spec: &Spectrum, iterated: u32) -> Result<OmegaWeight> {
    if !(spec.theta1 > 0.0) {
        return Err(Error::invalid("Perron exponent must be positive"));
    }
    let z = (spec.theta1 - spec.theta2) / spec.theta1;
    let (start, end) = if iterated >= 2 { (2, iterated) } else { (2, 1) };
    OmegaWeight::new(z, spec.jordan as f64, start, end)
}

/// Largest entry of the loop matrix, for reporting.
pub fn matrix_max(matrix: &DMatrix<i64>) -> i64 {
    matrix.iter().copied().max().unwrap_or(0)
}
