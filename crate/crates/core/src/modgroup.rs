//! Atkin-Lehner matrices `V_d`, their action on indices, membership in the
//! class `A` of scaled integral matrices and `SU(n, n)` checks.
//!
//! `V_d = L / sqrt(d)` is kept through the integral matrix `L`; every product
//! that is needed involves `sqrt(d)` only squared.

use num_integer::Integer;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qfield::{FieldCtx, Ideal, KElem};
use crate::reduction::{act, act_matrix};
use crate::theta::HermIndex;

pub type KMatrix = Vec<Vec<KElem>>;

/// `V_d = (1/sqrt d) [[alpha d, beta (m + sqrt(-m))], [gamma (m - sqrt(-m)), delta d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtkinLehner {
    pub d: i64,
    pub alpha: i64,
    pub beta: i64,
    pub gamma: i64,
    pub delta: i64,
}

fn canonical_solution(d: i64, c: i64) -> Result<(i64, i64)> {
    // alpha d - beta c = 1 with beta minimal nonnegative
    if d == 1 {
        return Ok((1, 0));
    }
    if d.gcd(&c) != 1 {
        return Err(Error::Invalid(format!("gcd({d}, {c}) != 1")));
    }
    let beta = (0..d)
        .find(|b| (b * (c % d) + 1) % d == 0)
        .expect("c is invertible modulo d");
    let num = 1 + i128::from(beta) * i128::from(c);
    let alpha = i64::try_from(num / i128::from(d)).map_err(|_| Error::Overflow("V_d entries"))?;
    Ok((alpha, beta))
}

/// Canonical `V_d`: `gamma = delta = 1` and least nonnegative `beta`.
pub fn build_vd(ctx: &FieldCtx, d: i64) -> Result<AtkinLehner> {
    ctx.check_disc_divisor(d)?;
    if d == 1 {
        return Ok(AtkinLehner { d, alpha: 1, beta: 0, gamma: 0, delta: 1 });
    }
    let m = ctx.m();
    let c = m * (m + 1) / d;
    if c * d != m * (m + 1) {
        return Err(Error::InvalidDivisor { d, disc: ctx.disc() });
    }
    let (alpha, beta) = canonical_solution(d, c)?;
    Ok(AtkinLehner { d, alpha, beta, gamma: 1, delta: 1 })
}

impl AtkinLehner {
    /// `alpha delta d - beta gamma m (m + 1) / d`, the determinant of `V_d`.
    pub fn det(&self, ctx: &FieldCtx) -> i128 {
        let m = i128::from(ctx.m());
        let d = i128::from(self.d);
        i128::from(self.alpha) * i128::from(self.delta) * d
            - i128::from(self.beta) * i128::from(self.gamma) * (m * (m + 1) / d)
    }

    /// `L = sqrt(d) V_d`.
    pub fn scaled(&self, ctx: &FieldCtx) -> [[KElem; 2]; 2] {
        let m = KElem::from_ints(ctx.m(), 0);
        let s = ctx.sqrt_neg_m();
        let plus = &m + &s;
        let minus = &m - &s;
        [
            [KElem::from_ints(self.alpha * self.d, 0), plus.scale(&BigRational::from_integer(self.beta.into()))],
            [minus.scale(&BigRational::from_integer(self.gamma.into())), KElem::from_ints(self.delta * self.d, 0)],
        ]
    }

    /// `sqrt(d) V_d^{-1}`, the adjugate of `L`.
    pub fn scaled_inverse(&self, ctx: &FieldCtx) -> [[KElem; 2]; 2] {
        let l = self.scaled(ctx);
        [[l[1][1].clone(), -&l[0][1]], [-&l[1][0], l[0][0].clone()]]
    }

    /// `sqrt(d) W_d = diag(L, d conj(L)^{-t})` as a 4x4 matrix.
    pub fn scaled_w(&self, ctx: &FieldCtx) -> KMatrix {
        let l = self.scaled(ctx);
        let adj = self.scaled_inverse(ctx);
        // d conj(L)^{-t} = conj(adj L)^t since det L = d
        let lower = [
            [ctx.conj(&adj[0][0]), ctx.conj(&adj[1][0])],
            [ctx.conj(&adj[0][1]), ctx.conj(&adj[1][1])],
        ];
        let mut w = vec![vec![KElem::zero(); 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                w[i][j] = l[i][j].clone();
                w[i + 2][j + 2] = lower[i][j].clone();
            }
        }
        w
    }
}

/// `T[V_d]`, or `T[V_d^{-1}]` when `invert` is set.
pub fn vd_act(ctx: &FieldCtx, t: &HermIndex, v: &AtkinLehner, invert: bool) -> Result<HermIndex> {
    let u = if invert { v.scaled_inverse(ctx) } else { v.scaled(ctx) };
    act(ctx, t, &u, &BigRational::from_integer(v.d.into()))
}

/// The same action on an arbitrary Hermitian matrix.
pub fn vd_act_matrix(ctx: &FieldCtx, t: &[[KElem; 2]; 2], v: &AtkinLehner, invert: bool) -> [[KElem; 2]; 2] {
    let u = if invert { v.scaled_inverse(ctx) } else { v.scaled(ctx) };
    act_matrix(ctx, t, &u, &BigRational::from_integer(v.d.into()))
}

/// `V'_d = (1/sqrt d) [[alpha d, beta sqrt(-m)], [-gamma sqrt(-m), delta d]]`
/// for `d | m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtkinLehnerPrime {
    pub d: i64,
    pub alpha: i64,
    pub beta: i64,
    pub gamma: i64,
    pub delta: i64,
}

pub fn build_vd_prime(ctx: &FieldCtx, d: i64) -> Result<AtkinLehnerPrime> {
    let m = ctx.m();
    if d < 1 || m % d != 0 {
        return Err(Error::NotDividingM { d, m });
    }
    if d == 1 {
        return Ok(AtkinLehnerPrime { d, alpha: 1, beta: 0, gamma: 0, delta: 1 });
    }
    let (alpha, beta) = canonical_solution(d, m / d)?;
    Ok(AtkinLehnerPrime { d, alpha, beta, gamma: 1, delta: 1 })
}

impl AtkinLehnerPrime {
    pub fn det(&self, ctx: &FieldCtx) -> i128 {
        i128::from(self.alpha) * i128::from(self.delta) * i128::from(self.d)
            - i128::from(self.beta) * i128::from(self.gamma) * i128::from(ctx.m() / self.d)
    }

    pub fn scaled(&self, ctx: &FieldCtx) -> [[KElem; 2]; 2] {
        let s = ctx.sqrt_neg_m();
        [
            [KElem::from_ints(self.alpha * self.d, 0), s.scale(&BigRational::from_integer(self.beta.into()))],
            [s.scale(&BigRational::from_integer((-self.gamma).into())), KElem::from_ints(self.delta * self.d, 0)],
        ]
    }
}

/// Whether `V_d V'_d` has entries in `O_K`.
pub fn vd_product_integral(ctx: &FieldCtx, v: &AtkinLehner, w: &AtkinLehnerPrime) -> bool {
    let a = v.scaled(ctx);
    let b = w.scaled(ctx);
    let den = BigRational::from_integer(v.d.into());
    (0..2).all(|i| {
        (0..2).all(|j| {
            let x = &ctx.mul(&a[i][0], &b[0][j]) + &ctx.mul(&a[i][1], &b[1][j]);
            KElem::new(x.a / &den, x.b / &den).is_integral()
        })
    })
}

/// Determinant over `K` by elimination.
pub fn k_det(ctx: &FieldCtx, m: &[Vec<KElem>]) -> KElem {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = KElem::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return KElem::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det = ctx.mul(&det, &a[c][c]);
        for i in c + 1..n {
            if a[i][c].is_zero() {
                continue;
            }
            let f = ctx.div(&a[i][c], &a[c][c]).expect("pivot is nonzero");
            for j in c..n {
                let x = ctx.mul(&f, &a[c][j]);
                a[i][j] = &a[i][j] - &x;
            }
        }
    }
    det
}

fn k_mul(ctx: &FieldCtx, a: &[Vec<KElem>], b: &[Vec<KElem>]) -> KMatrix {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| {
                    row.iter()
                        .zip(b)
                        .filter(|(x, r)| !x.is_zero() && !r[j].is_zero())
                        .fold(KElem::zero(), |acc, (x, r)| &acc + &ctx.mul(x, &r[j]))
                })
                .collect()
        })
        .collect()
}

fn conj_transpose(ctx: &FieldCtx, a: &[Vec<KElem>]) -> KMatrix {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| ctx.conj(&r[j])).collect())
        .collect()
}

/// Record of a class-`A` test for an integral matrix `L`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassAWitness {
    pub n: usize,
    /// Ideal generated by the entries of `L`.
    pub ideal: Ideal,
    pub det: KElem,
    /// `N(det L) = (u conj u)^n` for `A = L / u` in `SL_n(C)`.
    pub det_norm: String,
    pub accepted: bool,
}

/// Tests `I(L)^n = det(L) O_K`.
pub fn class_a_check(ctx: &FieldCtx, l: &[Vec<KElem>]) -> Result<ClassAWitness> {
    let n = l.len();
    if n == 0 || l.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("class-A test needs a nonempty square matrix".into()));
    }
    if l.iter().flatten().any(|x| !x.is_integral()) {
        return Err(Error::NonIntegral("matrix entries must lie in O_K".into()));
    }
    let det = k_det(ctx, l);
    if det.is_zero() {
        return Err(Error::Singular);
    }
    let gens: Vec<KElem> = l.iter().flatten().filter(|x| !x.is_zero()).cloned().collect();
    let ideal = Ideal::from_gens(ctx, &gens)?;
    let power = ideal.pow(ctx, n as u32)?;
    let principal = Ideal::principal(ctx, &det)?;
    Ok(ClassAWitness {
        n,
        accepted: power == principal,
        det_norm: ctx.norm(&det).to_string(),
        det,
        ideal,
    })
}

impl ClassAWitness {
    /// `N(I(L))^n = N(det L)`.
    pub fn norm_identity_holds(&self) -> bool {
        let lhs = num_bigint::BigInt::from(self.ideal.norm).pow(self.n as u32);
        self.det_norm == lhs.to_string()
    }
}

/// `J = [[0, -I], [I, 0]]` of size `2n`.
pub fn j_matrix(n: usize) -> KMatrix {
    let mut j = vec![vec![KElem::zero(); 2 * n]; 2 * n];
    for i in 0..n {
        j[i][i + n] = KElem::from_ints(-1, 0);
        j[i + n][i] = KElem::one();
    }
    j
}

/// `conj(M)^t J M = s J` and `det M = s^n`; `s = 1` is membership in
/// `SU(n, n)`.
pub fn su_check_scaled(ctx: &FieldCtx, m: &[Vec<KElem>], s: i64) -> bool {
    let size = m.len();
    if size == 0 || size % 2 != 0 || m.iter().any(|r| r.len() != size) {
        return false;
    }
    let n = size / 2;
    let j = j_matrix(n);
    let lhs = k_mul(ctx, &k_mul(ctx, &conj_transpose(ctx, m), &j), m);
    let sr = BigRational::from_integer(s.into());
    let rhs: KMatrix = j.iter().map(|r| r.iter().map(|x| x.scale(&sr)).collect()).collect();
    if lhs != rhs {
        return false;
    }
    k_det(ctx, m) == KElem::from_rational(num_traits::Pow::pow(sr, n as u32))
}

pub fn su_check(ctx: &FieldCtx, m: &[Vec<KElem>]) -> bool {
    su_check_scaled(ctx, m, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_quadruples() {
        let ctx = FieldCtx::new(5).unwrap();
        let v = build_vd(&ctx, 2).unwrap();
        assert_eq!((v.alpha, v.beta, v.gamma, v.delta), (8, 1, 1, 1));
        let v = build_vd(&ctx, 5).unwrap();
        assert_eq!((v.alpha, v.beta, v.gamma, v.delta), (5, 4, 1, 1));
        let v = build_vd(&ctx, 1).unwrap();
        assert_eq!((v.alpha, v.beta, v.gamma, v.delta), (1, 0, 0, 1));
        assert!(build_vd(&ctx, 3).is_err());
    }

    #[test]
    fn action_round_trip() {
        let ctx = FieldCtx::new(5).unwrap();
        let v = build_vd(&ctx, 2).unwrap();
        let t = HermIndex::new(1, 1, 0, 0);
        let u = vd_act(&ctx, &t, &v, false).unwrap();
        assert_eq!(u.det_d(&ctx), 20);
        assert_eq!(vd_act(&ctx, &u, &v, true).unwrap(), t);
    }

    #[test]
    fn class_a_examples() {
        let ctx = FieldCtx::new(5).unwrap();
        let l = build_vd(&ctx, 2).unwrap().scaled(&ctx);
        let l: KMatrix = l.iter().map(|r| r.to_vec()).collect();
        let w = class_a_check(&ctx, &l).unwrap();
        assert!(w.accepted);
        assert_eq!(w.ideal, crate::qfield::ideal_a_d(&ctx, 2).unwrap());
        assert!(w.norm_identity_holds());
        let diag = vec![vec![KElem::from_ints(2, 0), KElem::zero()], vec![KElem::zero(), KElem::one()]];
        assert!(!class_a_check(&ctx, &diag).unwrap().accepted);
        let id = vec![vec![KElem::one(), KElem::zero()], vec![KElem::zero(), KElem::one()]];
        assert!(class_a_check(&ctx, &id).unwrap().accepted);
    }

    #[test]
    fn su_examples() {
        let ctx = FieldCtx::new(5).unwrap();
        let mut id = vec![vec![KElem::zero(); 4]; 4];
        for (i, r) in id.iter_mut().enumerate() {
            r[i] = KElem::one();
        }
        assert!(su_check(&ctx, &id));
        assert!(su_check(&ctx, &j_matrix(2)));
        let v = build_vd(&ctx, 2).unwrap();
        assert!(su_check_scaled(&ctx, &v.scaled_w(&ctx), 2));
        assert!(!su_check(&ctx, &v.scaled_w(&ctx)));
    }
}
