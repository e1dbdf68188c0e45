//! Imaginary quadratic fields `K = Q(sqrt(-m))`, exact elements in the
//! `{1, omega}` basis, and integral ideals of `O_K` in Hermite normal form.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn is_squarefree(n: i64) -> bool {
    if n < 1 {
        return false;
    }
    let mut n = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return false;
            }
        }
        p += 1;
    }
    true
}

/// Positive divisors of `n`, ascending.
pub fn divisors(n: i64) -> Vec<i64> {
    let n = n.abs();
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Squarefree positive divisors of `n`, ascending.
pub fn squarefree_divisors(n: i64) -> Vec<i64> {
    let mut primes = Vec::new();
    let mut r = n.abs();
    let mut p = 2;
    while p * p <= r {
        if r % p == 0 {
            primes.push(p);
            while r % p == 0 {
                r /= p;
            }
        }
        p += 1;
    }
    if r > 1 {
        primes.push(r);
    }
    let mut divs = vec![1i64];
    for p in primes {
        let extra: Vec<i64> = divs.iter().map(|d| d * p).collect();
        divs.extend(extra);
    }
    divs.sort_unstable();
    divs
}

pub fn prime_factors(n: i64) -> Vec<i64> {
    squarefree_divisors(n)
        .into_iter()
        .filter(|&d| d > 1 && squarefree_divisors(d).len() == 2)
        .collect()
}

/// Extended gcd on `i64`: returns `(g, x, y)` with `a x + b y = g >= 0`.
pub fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i64, 0i64);
    let (mut old_t, mut t) = (0i64, 1i64);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Arithmetic context of `K = Q(sqrt(-m))`.
///
/// `omega` is the standard generator of `O_K = Z + omega Z`; it satisfies
/// `omega^2 - omega_trace * omega + omega_norm = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldCtx {
    m: i64,
    disc: i64,
    omega_trace: i64,
    omega_norm: i64,
    unit_count: usize,
}

impl FieldCtx {
    pub fn new(m: i64) -> Result<Self> {
        if !is_squarefree(m) {
            return Err(Error::NotSquarefree(m));
        }
        let (disc, omega_trace, omega_norm) = if m % 4 == 3 {
            (-m, 1, (1 + m) / 4)
        } else {
            (-4 * m, 0, m)
        };
        let mut ctx = FieldCtx {
            m,
            disc,
            omega_trace,
            omega_norm,
            unit_count: 0,
        };
        // brute-force norm-one search; units of an imaginary quadratic order
        // all have coordinates in {-1, 0, 1}
        let mut units = 0;
        for a in -1i64..=1 {
            for b in -1i64..=1 {
                if a * a + omega_trace * a * b + omega_norm * b * b == 1 {
                    units += 1;
                }
            }
        }
        ctx.unit_count = units;
        Ok(ctx)
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    /// The (negative) field discriminant `d_K`.
    pub fn disc(&self) -> i64 {
        self.disc
    }

    pub fn abs_disc(&self) -> i64 {
        -self.disc
    }

    pub fn omega_trace(&self) -> i64 {
        self.omega_trace
    }

    pub fn omega_norm(&self) -> i64 {
        self.omega_norm
    }

    pub fn unit_count(&self) -> usize {
        self.unit_count
    }

    pub fn squarefree_disc_divisors(&self) -> Vec<i64> {
        squarefree_divisors(self.abs_disc())
    }

    pub fn check_disc_divisor(&self, d: i64) -> Result<()> {
        if d >= 1 && is_squarefree(d) && self.abs_disc() % d == 0 {
            Ok(())
        } else {
            Err(Error::InvalidDivisor {
                d,
                disc: self.abs_disc(),
            })
        }
    }

    pub fn omega(&self) -> KElem {
        KElem::from_ints(0, 1)
    }

    /// `sqrt(-m)` with positive imaginary part.
    pub fn sqrt_neg_m(&self) -> KElem {
        if self.omega_trace == 1 {
            KElem::from_ints(-1, 2)
        } else {
            KElem::from_ints(0, 1)
        }
    }

    /// The fixed branch `sqrt(d_K) = i sqrt(|d_K|)`.
    pub fn sqrt_disc(&self) -> KElem {
        if self.omega_trace == 1 {
            KElem::from_ints(-1, 2)
        } else {
            KElem::from_ints(0, 2)
        }
    }

    pub fn mul(&self, x: &KElem, y: &KElem) -> KElem {
        let t = BigRational::from_integer(self.omega_trace.into());
        let n = BigRational::from_integer(self.omega_norm.into());
        let bb = &x.b * &y.b;
        KElem {
            a: &x.a * &y.a - &n * &bb,
            b: &x.a * &y.b + &x.b * &y.a + &t * &bb,
        }
    }

    pub fn conj(&self, x: &KElem) -> KElem {
        let t = BigRational::from_integer(self.omega_trace.into());
        KElem {
            a: &x.a + &t * &x.b,
            b: -x.b.clone(),
        }
    }

    pub fn norm(&self, x: &KElem) -> BigRational {
        let t = BigRational::from_integer(self.omega_trace.into());
        let n = BigRational::from_integer(self.omega_norm.into());
        &x.a * &x.a + &t * &x.a * &x.b + &n * &x.b * &x.b
    }

    pub fn trace(&self, x: &KElem) -> BigRational {
        let t = BigRational::from_integer(self.omega_trace.into());
        BigRational::from_integer(2.into()) * &x.a + t * &x.b
    }

    /// Real part, i.e. half the trace.
    pub fn re(&self, x: &KElem) -> BigRational {
        self.trace(x) / BigRational::from_integer(2.into())
    }

    pub fn inv(&self, x: &KElem) -> Result<KElem> {
        let n = self.norm(x);
        if n.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let c = self.conj(x);
        Ok(KElem {
            a: c.a / &n,
            b: c.b / &n,
        })
    }

    pub fn div(&self, x: &KElem, y: &KElem) -> Result<KElem> {
        Ok(self.mul(x, &self.inv(y)?))
    }

    /// Action of `omega` on integer coordinates `(a, b)`.
    pub fn omega_times(&self, a: i64, b: i64) -> (i64, i64) {
        (-self.omega_norm * b, a + self.omega_trace * b)
    }

    /// Integer norm form `N(a + b omega)`.
    pub fn norm_int(&self, a: i64, b: i64) -> i64 {
        a * a + self.omega_trace * a * b + self.omega_norm * b * b
    }
}

/// An element `a + b omega` of `K` with exact rational coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KElem {
    pub a: BigRational,
    pub b: BigRational,
}

impl KElem {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        KElem { a, b }
    }

    pub fn from_ints(a: i64, b: i64) -> Self {
        KElem {
            a: BigRational::from_integer(a.into()),
            b: BigRational::from_integer(b.into()),
        }
    }

    pub fn from_rational(a: BigRational) -> Self {
        KElem {
            a,
            b: BigRational::zero(),
        }
    }

    pub fn zero() -> Self {
        Self::from_ints(0, 0)
    }

    pub fn one() -> Self {
        Self::from_ints(1, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_integral(&self) -> bool {
        self.a.is_integer() && self.b.is_integer()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn scale(&self, s: &BigRational) -> KElem {
        KElem {
            a: &self.a * s,
            b: &self.b * s,
        }
    }

    /// Integer coordinates, if integral and representable.
    pub fn to_ints(&self) -> Option<(i64, i64)> {
        if !self.is_integral() {
            return None;
        }
        Some((self.a.to_integer().to_i64()?, self.b.to_integer().to_i64()?))
    }

    /// Common-denominator form `(num_a, num_b, den)` with `den > 0` and
    /// `gcd(num_a, num_b, den) = 1`.
    pub fn to_triple(&self) -> (BigInt, BigInt, BigInt) {
        let den = self.a.denom().lcm(self.b.denom());
        let na = self.a.numer() * (&den / self.a.denom());
        let nb = self.b.numer() * (&den / self.b.denom());
        (na, nb, den)
    }

    pub fn from_triple(na: BigInt, nb: BigInt, den: BigInt) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(KElem {
            a: BigRational::new(na, den.clone()),
            b: BigRational::new(nb, den),
        })
    }
}

impl Add for &KElem {
    type Output = KElem;
    fn add(self, o: &KElem) -> KElem {
        KElem {
            a: &self.a + &o.a,
            b: &self.b + &o.b,
        }
    }
}

impl Sub for &KElem {
    type Output = KElem;
    fn sub(self, o: &KElem) -> KElem {
        KElem {
            a: &self.a - &o.a,
            b: &self.b - &o.b,
        }
    }
}

impl Neg for &KElem {
    type Output = KElem;
    fn neg(self) -> KElem {
        KElem {
            a: -self.a.clone(),
            b: -self.b.clone(),
        }
    }
}

impl Add for KElem {
    type Output = KElem;
    fn add(self, o: KElem) -> KElem {
        &self + &o
    }
}

impl Sub for KElem {
    type Output = KElem;
    fn sub(self, o: KElem) -> KElem {
        &self - &o
    }
}

impl Neg for KElem {
    type Output = KElem;
    fn neg(self) -> KElem {
        -&self
    }
}

impl fmt::Display for KElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) => write!(f, "({})w", self.b),
            _ => write!(f, "{} + ({})w", self.a, self.b),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonInt {
    Small(i64),
    Big(String),
}

impl JsonInt {
    fn from_big(x: &BigInt) -> Self {
        match x.to_i64() {
            Some(v) => JsonInt::Small(v),
            None => JsonInt::Big(x.to_string()),
        }
    }

    fn into_big<E: de::Error>(self) -> std::result::Result<BigInt, E> {
        match self {
            JsonInt::Small(v) => Ok(v.into()),
            JsonInt::Big(s) => s.parse().map_err(E::custom),
        }
    }
}

impl Serialize for KElem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (na, nb, den) = self.to_triple();
        let mut tup = s.serialize_tuple(3)?;
        tup.serialize_element(&JsonInt::from_big(&na))?;
        tup.serialize_element(&JsonInt::from_big(&nb))?;
        tup.serialize_element(&JsonInt::from_big(&den))?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for KElem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (na, nb, den): (JsonInt, JsonInt, JsonInt) = Deserialize::deserialize(d)?;
        let den = den.into_big::<D::Error>()?;
        if !den.is_positive() {
            return Err(de::Error::custom("KElem denominator must be positive"));
        }
        KElem::from_triple(na.into_big()?, nb.into_big()?, den).map_err(de::Error::custom)
    }
}

/// Integral ideal of `O_K`, stored as the canonical lower-triangular HNF
/// `[[h11, 0], [h21, h22]]` whose rows are a Z-basis in `{1, omega}`
/// coordinates, with `h11, h22 > 0` and `0 <= h21 < h11`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ideal {
    pub hnf: [[i64; 2]; 2],
    pub norm: i64,
}

impl Ideal {
    pub fn unit(_ctx: &FieldCtx) -> Ideal {
        Ideal {
            hnf: [[1, 0], [0, 1]],
            norm: 1,
        }
    }

    /// Ideal generated over `O_K` by integral elements.
    pub fn from_gens(ctx: &FieldCtx, gens: &[KElem]) -> Result<Ideal> {
        let mut pairs = Vec::with_capacity(gens.len());
        for g in gens {
            let (a, b) = g.to_ints().ok_or_else(|| Error::NonIntegral(g.to_string()))?;
            pairs.push((a, b));
        }
        Self::from_int_gens(ctx, &pairs)
    }

    pub fn from_int_gens(ctx: &FieldCtx, gens: &[(i64, i64)]) -> Result<Ideal> {
        let mut span = Vec::with_capacity(2 * gens.len());
        for &(a, b) in gens {
            span.push((a, b));
            span.push(ctx.omega_times(a, b));
        }
        Self::from_z_span(&span)
    }

    /// HNF of a Z-span of vectors that is already closed under `omega`.
    fn from_z_span(vecs: &[(i64, i64)]) -> Result<Ideal> {
        // row with the gcd of the omega-coordinates, and gcd of the
        // first coordinates of the omega-free part
        let mut row = (0i64, 0i64);
        let mut free = 0i64;
        for &(a, b) in vecs {
            if b == 0 {
                free = free.gcd(&a);
                continue;
            }
            if row.1 == 0 {
                free = free.gcd(&row.0);
                row = (a, b);
                continue;
            }
            let (g, s, u) = egcd(row.1, b);
            let combined = (s * row.0 + u * a, g);
            let killed = (b / g) * row.0 - (row.1 / g) * a;
            free = free.gcd(&killed);
            row = combined;
        }
        if row.1 == 0 || free == 0 {
            return Err(Error::ZeroIdeal);
        }
        if row.1 < 0 {
            row = (-row.0, -row.1);
        }
        let h11 = free.abs();
        let h21 = row.0.rem_euclid(h11);
        Ok(Ideal {
            hnf: [[h11, 0], [h21, row.1]],
            norm: h11 * row.1,
        })
    }

    pub fn principal(ctx: &FieldCtx, x: &KElem) -> Result<Ideal> {
        Self::from_gens(ctx, std::slice::from_ref(x))
    }

    /// Z-basis as field elements.
    pub fn basis(&self) -> [KElem; 2] {
        [
            KElem::from_ints(self.hnf[0][0], 0),
            KElem::from_ints(self.hnf[1][0], self.hnf[1][1]),
        ]
    }

    pub fn int_basis(&self) -> [(i64, i64); 2] {
        [(self.hnf[0][0], 0), (self.hnf[1][0], self.hnf[1][1])]
    }

    pub fn product(&self, ctx: &FieldCtx, other: &Ideal) -> Result<Ideal> {
        let mut gens = Vec::with_capacity(4);
        for &(a1, b1) in &self.int_basis() {
            for &(a2, b2) in &other.int_basis() {
                // (a1 + b1 w)(a2 + b2 w)
                let n = ctx.omega_norm();
                let t = ctx.omega_trace();
                let a = a1
                    .checked_mul(a2)
                    .and_then(|v| v.checked_sub(n.checked_mul(b1 * b2)?))
                    .ok_or(Error::Overflow("ideal product"))?;
                let b = a1 * b2 + a2 * b1 + t * b1 * b2;
                gens.push((a, b));
            }
        }
        Self::from_int_gens(ctx, &gens)
    }

    pub fn pow(&self, ctx: &FieldCtx, e: u32) -> Result<Ideal> {
        let mut acc = Ideal::unit(ctx);
        for _ in 0..e {
            acc = acc.product(ctx, self)?;
        }
        Ok(acc)
    }

    pub fn contains(&self, x: &KElem) -> bool {
        let Some((a, b)) = x.to_ints() else {
            return false;
        };
        let [[h11, _], [h21, h22]] = self.hnf;
        if b % h22 != 0 {
            return false;
        }
        let q = b / h22;
        (a - q * h21) % h11 == 0
    }

    pub fn is_unit_ideal(&self) -> bool {
        self.norm == 1
    }
}

/// `A_d = d O_K + (m + sqrt(-m)) O_K`, the ideal of norm `d` for a
/// squarefree divisor `d` of `|d_K|`.
pub fn ideal_a_d(ctx: &FieldCtx, d: i64) -> Result<Ideal> {
    ctx.check_disc_divisor(d)?;
    let w = &KElem::from_ints(ctx.m(), 0) + &ctx.sqrt_neg_m();
    let ideal = Ideal::from_gens(ctx, &[KElem::from_ints(d, 0), w])?;
    if ideal.norm != d {
        return Err(Error::Invalid(format!(
            "A_{d} has norm {} instead of {d}",
            ideal.norm
        )));
    }
    Ok(ideal)
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

pub fn rat_frac(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_discriminants() {
        let k5 = FieldCtx::new(5).unwrap();
        assert_eq!(k5.disc(), -20);
        assert_eq!((k5.omega_trace(), k5.omega_norm()), (0, 5));
        let k3 = FieldCtx::new(3).unwrap();
        assert_eq!(k3.disc(), -3);
        assert_eq!((k3.omega_trace(), k3.omega_norm()), (1, 1));
        assert_eq!(k3.unit_count(), 6);
        assert_eq!(FieldCtx::new(1).unwrap().unit_count(), 4);
        assert_eq!(FieldCtx::new(7).unwrap().unit_count(), 2);
        assert!(FieldCtx::new(4).is_err());
        assert!(FieldCtx::new(0).is_err());
        assert!(FieldCtx::new(-3).is_err());
    }

    #[test]
    fn unit_count_matches_wide_search() {
        for m in [1i64, 2, 3, 5, 7, 11, 15, 30] {
            let k = FieldCtx::new(m).unwrap();
            let mut n = 0;
            for a in -5i64..=5 {
                for b in -5i64..=5 {
                    if k.norm_int(a, b) == 1 {
                        n += 1;
                    }
                }
            }
            assert_eq!(n, k.unit_count(), "m = {m}");
        }
    }

    #[test]
    fn element_arithmetic() {
        let k = FieldCtx::new(5).unwrap();
        let x = KElem::from_ints(1, 1);
        assert_eq!(k.norm(&x), rat(6));
        let y = KElem::from_ints(1, -1);
        assert_eq!(k.mul(&x, &y), KElem::from_ints(6, 0));
        let k3 = FieldCtx::new(3).unwrap();
        assert_eq!(k3.conj(&k3.omega()), KElem::from_ints(1, -1));
        let q = k.div(&x, &y).unwrap();
        assert_eq!(k.mul(&q, &y), x);
        assert_eq!(k.div(&x, &KElem::zero()), Err(Error::DivisionByZero));
        // sqrt(d_K)^2 = d_K
        for m in [1, 2, 3, 5, 7, 30] {
            let k = FieldCtx::new(m).unwrap();
            let s = k.sqrt_disc();
            assert_eq!(k.mul(&s, &s), KElem::from_ints(k.disc(), 0));
            let r = k.sqrt_neg_m();
            assert_eq!(k.mul(&r, &r), KElem::from_ints(-m, 0));
        }
    }

    #[test]
    fn ideal_hnf_examples() {
        let k = FieldCtx::new(5).unwrap();
        let a2 = Ideal::from_gens(&k, &[KElem::from_ints(2, 0), KElem::from_ints(5, 1)]).unwrap();
        assert_eq!(a2.hnf, [[2, 0], [1, 1]]);
        assert_eq!(a2.norm, 2);
        let same = Ideal::from_gens(
            &k,
            &[
                KElem::from_ints(16, 0),
                KElem::from_ints(5, 1),
                KElem::from_ints(5, -1),
                KElem::from_ints(2, 0),
            ],
        )
        .unwrap();
        assert_eq!(same, a2);
        let unit = Ideal::from_gens(&k, &[KElem::one()]).unwrap();
        assert_eq!(unit, Ideal::unit(&k));
        assert!(Ideal::from_gens(&k, &[]).is_err());
        assert!(Ideal::from_gens(&k, &[KElem::zero()]).is_err());
        assert!(Ideal::from_gens(&k, &[KElem::new(rat_frac(1, 2), rat(0))]).is_err());
    }

    #[test]
    fn ideal_products_and_a_d() {
        let k = FieldCtx::new(5).unwrap();
        let a2 = ideal_a_d(&k, 2).unwrap();
        let a5 = ideal_a_d(&k, 5).unwrap();
        assert_eq!(a5.norm, 5);
        assert_eq!(a2.hnf, [[2, 0], [1, 1]]);
        assert_eq!(
            a2.product(&k, &a2).unwrap(),
            Ideal::principal(&k, &KElem::from_ints(2, 0)).unwrap()
        );
        assert_eq!(a2.product(&k, &a5).unwrap().norm, 10);
        assert_eq!(a2.product(&k, &Ideal::unit(&k)).unwrap(), a2);
        assert_eq!(ideal_a_d(&k, 1).unwrap(), Ideal::unit(&k));
        assert!(ideal_a_d(&k, 3).is_err());
        assert!(ideal_a_d(&k, 4).is_err());
    }

    #[test]
    fn a_d_is_two_torsion_for_small_m() {
        for m in (1..=100).filter(|&m| is_squarefree(m)) {
            let k = FieldCtx::new(m).unwrap();
            for d in k.squarefree_disc_divisors() {
                let a = ideal_a_d(&k, d).unwrap();
                assert_eq!(a.norm, d);
                let sq = a.product(&k, &a).unwrap();
                assert_eq!(sq, Ideal::principal(&k, &KElem::from_ints(d, 0)).unwrap());
            }
        }
    }

    #[test]
    fn kelem_json() {
        let x = KElem::new(rat_frac(1, 2), rat_frac(-3, 4));
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "[2,-3,4]");
        let y: KElem = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
        let ideal = Ideal {
            hnf: [[2, 0], [1, 1]],
            norm: 2,
        };
        assert_eq!(
            serde_json::to_string(&ideal).unwrap(),
            r#"{"hnf":[[2,0],[1,1]],"norm":2}"#
        );
    }
}
