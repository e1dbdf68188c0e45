//! Exact Fincke-Pohst enumeration of short vectors of a positive definite
//! rational Gram matrix.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::hlattice::HermLattice;
use crate::linalg::{self, IntMatrix, RatMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortVector {
    pub coords: Vec<i64>,
    pub norm: BigRational,
}

/// All nonzero `v` with `v^t S v <= bound`, one per `{v, -v}` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortVectorSet {
    pub bound: BigRational,
    pub vectors: Vec<ShortVector>,
    pub complete: bool,
}

impl ShortVectorSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Sign normalization: the first nonzero coordinate is positive.
pub fn is_sign_normalized(v: &[i64]) -> bool {
    v.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

pub fn quadratic_form(s: &RatMatrix, v: &[i64]) -> BigRational {
    let mut acc = BigRational::zero();
    for (i, row) in s.iter().enumerate() {
        if v[i] == 0 {
            continue;
        }
        for (j, x) in row.iter().enumerate() {
            if v[j] != 0 {
                acc += x * BigRational::from_integer((v[i] * v[j]).into());
            }
        }
    }
    acc
}

pub fn int_quadratic_form(s: &IntMatrix, v: &[i64]) -> i64 {
    let mut acc = 0;
    for (i, row) in s.iter().enumerate() {
        if v[i] == 0 {
            continue;
        }
        let mut r = 0;
        for (j, x) in row.iter().enumerate() {
            r += x * v[j];
        }
        acc += v[i] * r;
    }
    acc
}

pub fn short_vectors(s: &RatMatrix, bound: &BigRational) -> Result<ShortVectorSet> {
    let mut vectors = Vec::new();
    enumerate(s, bound, |x| {
        if is_sign_normalized(x) {
            vectors.push(x.to_vec());
        }
    })?;
    vectors.sort();
    let vectors = vectors
        .into_iter()
        .map(|coords| {
            let norm = quadratic_form(s, &coords);
            ShortVector { coords, norm }
        })
        .collect();
    Ok(ShortVectorSet {
        bound: bound.clone(),
        vectors,
        complete: true,
    })
}

/// Calls `visit` on every nonzero integer vector `x` (both signs) with
/// `x^t S x <= bound`. Fails if `S` is not positive definite.
pub fn enumerate<F: FnMut(&[i64])>(s: &RatMatrix, bound: &BigRational, mut visit: F) -> Result<()> {
    let (mu, q) = linalg::ldl(s)?;
    if bound.is_negative() {
        return Ok(());
    }
    // machine-width rationals when they fit, big rationals otherwise
    let small = |x: &BigRational| x.numer().bits() < 40 && x.denom().bits() < 40;
    if mu.iter().flatten().all(small) && q.iter().all(small) && small(bound) {
        let conv = |x: &BigRational| {
            Ratio::new(x.numer().to_i128().unwrap(), x.denom().to_i128().unwrap())
        };
        let mu128: Vec<Vec<Ratio<i128>>> = mu.iter().map(|r| r.iter().map(conv).collect()).collect();
        let q128: Vec<Ratio<i128>> = q.iter().map(conv).collect();
        let mut found = Vec::new();
        match Enumerator::new(&mu128, &q128).run(&conv(bound), &mut |x: &[i64]| found.push(x.to_vec())) {
            Ok(()) => {
                for x in &found {
                    visit(x);
                }
                return Ok(());
            }
            Err(Error::Overflow(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mub: Vec<Vec<Ratio<BigInt>>> = mu;
    Enumerator::new(&mub, &q).run(bound, &mut visit)
}

struct Enumerator<'a, T: Clone + Integer> {
    mu: &'a [Vec<Ratio<T>>],
    q: &'a [Ratio<T>],
    x: Vec<i64>,
}

trait Scalar:
    Clone + Integer + Signed + CheckedAdd + CheckedSub + CheckedMul + FromPrimitive + ToPrimitive
{
}
impl<T> Scalar for T where
    T: Clone + Integer + Signed + CheckedAdd + CheckedSub + CheckedMul + FromPrimitive + ToPrimitive
{
}

fn sub<T: Scalar>(a: &Ratio<T>, b: &Ratio<T>) -> Result<Ratio<T>> {
    a.checked_sub(b).ok_or(Error::Overflow("enumeration"))
}

fn mul<T: Scalar>(a: &Ratio<T>, b: &Ratio<T>) -> Result<Ratio<T>> {
    a.checked_mul(b).ok_or(Error::Overflow("enumeration"))
}

fn from_i64<T: Scalar>(x: i64) -> Ratio<T> {
    Ratio::from_integer(T::from_i64(x).expect("i64 fits"))
}

fn approx<T: Scalar>(x: &Ratio<T>) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

impl<'a, T: Scalar> Enumerator<'a, T> {
    fn new(mu: &'a [Vec<Ratio<T>>], q: &'a [Ratio<T>]) -> Self {
        Enumerator {
            mu,
            q,
            x: vec![0; q.len()],
        }
    }

    fn run<F: FnMut(&[i64])>(&mut self, bound: &Ratio<T>, visit: &mut F) -> Result<()> {
        let n = self.q.len();
        if n == 0 {
            return Ok(());
        }
        self.level(n - 1, bound.clone(), visit)
    }

    /// `q (x - c)^2 <= r`
    fn fits(&self, i: usize, x: i64, c: &Ratio<T>, r: &Ratio<T>) -> Result<bool> {
        let d = sub(&from_i64(x), c)?;
        Ok(mul(&mul(&d, &d)?, &self.q[i])? <= *r)
    }

    fn level<F: FnMut(&[i64])>(&mut self, i: usize, remaining: Ratio<T>, visit: &mut F) -> Result<()> {
        let n = self.q.len();
        let mut c = Ratio::zero();
        for j in i + 1..n {
            if self.x[j] != 0 {
                c = sub(&c, &mul(&self.mu[i][j], &from_i64(self.x[j]))?)?;
            }
        }
        // integer interval around c, located approximately then fixed exactly
        let cf = approx(&c);
        let rad = (approx(&remaining) / approx(&self.q[i])).max(0.0).sqrt();
        let mut lo = (cf - rad).floor() as i64;
        let mut hi = (cf + rad).ceil() as i64;
        let c_floor = c.floor().to_integer().to_i64().ok_or(Error::Overflow("enumeration"))?;
        while lo <= c_floor && !self.fits(i, lo, &c, &remaining)? {
            lo += 1;
        }
        while self.fits(i, lo - 1, &c, &remaining)? {
            lo -= 1;
        }
        while hi > c_floor && !self.fits(i, hi, &c, &remaining)? {
            hi -= 1;
        }
        while self.fits(i, hi + 1, &c, &remaining)? {
            hi += 1;
        }
        for xi in lo..=hi {
            let d = sub(&from_i64(xi), &c)?;
            let used = mul(&mul(&d, &d)?, &self.q[i])?;
            if used > remaining {
                continue;
            }
            self.x[i] = xi;
            if i == 0 {
                if self.x.iter().any(|&v| v != 0) {
                    visit(&self.x);
                }
            } else {
                let rest = sub(&remaining, &used)?;
                self.level(i - 1, rest, visit)?;
            }
        }
        self.x[i] = 0;
        Ok(())
    }
}

/// Sign-normalized lattice vectors grouped by norm, packed with a fixed
/// stride.
#[derive(Debug, Clone, Default)]
pub struct PackedVectors {
    pub dim: usize,
    pub data: Vec<i32>,
}

impl PackedVectors {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[i32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i32]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

/// Sign-normalized vectors of every norm up to `max_norm` for an integral
/// Gram matrix.
pub fn vectors_by_norm(s: &IntMatrix, max_norm: i64) -> Result<BTreeMap<i64, PackedVectors>> {
    let dim = s.len();
    let mut out: BTreeMap<i64, PackedVectors> = BTreeMap::new();
    let mut overflow = false;
    // float candidates, exact integer norms
    NearEnumerator::new(s)?.run(&vec![0.0; dim], max_norm as f64, |x| {
        if !is_sign_normalized(x) {
            return;
        }
        let norm = int_quadratic_form(s, x);
        if norm > max_norm {
            return;
        }
        let e = out.entry(norm).or_insert_with(|| PackedVectors {
            dim,
            data: Vec::new(),
        });
        for &c in x {
            match i32::try_from(c) {
                Ok(v) => e.data.push(v),
                Err(_) => overflow = true,
            }
        }
    });
    if overflow {
        return Err(Error::Overflow("packed vector coordinates"));
    }
    for v in out.values_mut() {
        let mut rows: Vec<&[i32]> = v.data.chunks_exact(dim).collect();
        rows.sort();
        v.data = rows.concat();
    }
    Ok(out)
}

/// All lattice vectors (both signs) with `h(x, x) = c`.
pub fn vectors_of_norm(lattice: &HermLattice, c: i64) -> Result<Vec<Vec<i64>>> {
    let n = 2 * lattice.rank();
    if c < 0 {
        return Ok(Vec::new());
    }
    if c == 0 {
        return Ok(vec![vec![0; n]]);
    }
    let target = BigRational::from_integer(c.into());
    let gram = &lattice.trace_data().gram;
    let mut out = Vec::new();
    enumerate(gram, &target, |x| {
        if quadratic_form(gram, x) == target {
            out.push(x.to_vec());
        }
    })?;
    out.sort();
    Ok(out)
}


/// Candidate lattice points near a real center, for callers that check
/// every hit exactly. Floating point with a slack, so the candidate set is
/// a superset of `{x : (x - c)^t S (x - c) <= r}`.
#[derive(Debug, Clone)]
pub struct NearEnumerator {
    mu: Vec<Vec<f64>>,
    q: Vec<f64>,
}

impl NearEnumerator {
    pub fn new(s: &IntMatrix) -> Result<Self> {
        let (mu, q) = linalg::ldl(&linalg::int_to_rat(s))?;
        let f = |x: &BigRational| x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN);
        Ok(NearEnumerator {
            mu: mu.iter().map(|r| r.iter().map(f).collect()).collect(),
            q: q.iter().map(f).collect(),
        })
    }

    pub fn run<F: FnMut(&[i64])>(&self, center: &[f64], radius: f64, mut visit: F) {
        let n = self.q.len();
        if n == 0 || radius < 0.0 {
            return;
        }
        let mut x = vec![0i64; n];
        let slack = 1e-7 * (1.0 + radius.abs());
        self.level(n - 1, center, radius + slack, &mut x, &mut visit);
    }

    fn level<F: FnMut(&[i64])>(&self, i: usize, z: &[f64], remaining: f64, x: &mut [i64], visit: &mut F) {
        let n = self.q.len();
        let mut c = z[i];
        for j in i + 1..n {
            c -= self.mu[i][j] * (x[j] as f64 - z[j]);
        }
        let rad = (remaining.max(0.0) / self.q[i]).sqrt();
        let lo = (c - rad).ceil() as i64;
        let hi = (c + rad).floor() as i64;
        for xi in lo..=hi {
            let d = xi as f64 - c;
            let rest = remaining - self.q[i] * d * d;
            if rest < 0.0 {
                continue;
            }
            x[i] = xi;
            if i == 0 {
                visit(x);
            } else {
                self.level(i - 1, z, rest, x, visit);
            }
        }
        x[i] = 0;
    }
}
